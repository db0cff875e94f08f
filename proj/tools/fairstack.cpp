#include <CLI11.hpp>

#include "fairstack/cli.hpp"

int main(int argc, char** argv) {
    using namespace fairstack;
    CLI::App app{"fairstack: fair Stackelberg equilibria, loss bounds and beta sweeps"};
    app.require_subcommand(1);
    CommandOptions o;
    std::string objective, fairness, grid;
    double beta = 0.0;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "scenario config (YAML)")->required();
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--seed", o.seed, "seed for all randomness");
        sub->add_flag("--quiet", o.quiet, "suppress report output");
    };
    auto fair = [&](CLI::App* sub) {
        sub->add_option("--objective", objective, "acc or sw")->check(CLI::IsMember({"acc", "sw"}));
        sub->add_option("--fairness", fairness, "l1, l2, asym or custom")->check(CLI::IsMember({"l1", "l2", "asym", "custom"}));
        sub->add_option("--beta", beta, "fairness budget")->check(CLI::NonNegativeNumber);
        sub->add_option("--starts", o.starts, "multistart count")->check(CLI::PositiveNumber);
    };

    CLI::App* validate = app.add_subcommand("validate", "check a scenario and report fairness properties");
    common(validate);
    validate->add_option("--fairness", fairness)->check(CLI::IsMember({"l1", "l2", "asym", "custom"}));
    validate->add_option("--beta", beta)->check(CLI::NonNegativeNumber);
    CLI::App* solve = app.add_subcommand("solve", "constrained and unconstrained equilibria");
    common(solve);
    fair(solve);
    CLI::App* bounds = app.add_subcommand("bounds", "optimality-loss bounds with realized losses");
    common(bounds);
    fair(bounds);
    CLI::App* sweep = app.add_subcommand("sweep", "beta sweep with CSV and SVG output");
    common(sweep);
    fair(sweep);
    sweep->add_option("--beta-grid", grid, "lo:hi:n{lin|geo}");
    CLI::App* simulate = app.add_subcommand("simulate", "peer ERM versus the closed form");
    common(simulate);
    simulate->add_option("--peers", o.n_per_group, "peers per group")->check(CLI::PositiveNumber);
    simulate->add_option("--noise", o.noise, "score noise standard deviation")->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    try {
        if (!objective.empty()) o.objective = parse_objective(objective);
        if (!fairness.empty()) o.fairness = parse_kind(fairness);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    for (CLI::App* sub : {validate, solve, bounds, sweep})
        if (sub->parsed() && sub->count("--beta")) o.beta = beta;
    o.beta_grid = grid;

    if (validate->parsed()) return cmd_validate(o);
    if (solve->parsed()) return cmd_solve(o);
    if (bounds->parsed()) return cmd_bounds(o);
    if (sweep->parsed()) return cmd_sweep(o);
    return cmd_simulate(o);
}
