#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "fairstack/bounds.hpp"
#include "fairstack/config.hpp"

namespace fairstack {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitValidation = 2, kExitSolver = 3, kExitIo = 4 };

struct CommandOptions {
    std::filesystem::path config;
    std::filesystem::path out = "out";
    std::uint64_t seed = 0;
    std::optional<Objective> objective;
    std::optional<FairnessKind> fairness;
    std::optional<double> beta;
    std::string beta_grid;
    int starts = 64;
    Eigen::Index n_per_group = 200;
    double noise = 0.0;
    bool quiet = false;
};

inline int exit_code_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::Io: return kExitIo;
        case ErrorKind::Numeric: return kExitSolver;
        default: return kExitValidation;
    }
}

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v == 0.0 ? 0.0 : v);
    return buf;
}

inline std::string vec_text(const Vec& v) {
    std::string s = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v(i));
    return s + "]";
}

namespace detail {

inline void ensure_out_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw Error(ErrorKind::Io, "cannot create output directory '" + dir.string() + "'");
}

inline FairnessSpec effective_spec(const Config& c, const CommandOptions& o) {
    FairnessSpec spec = c.fairness;
    if (!c.has_fairness && !o.fairness) throw Error(ErrorKind::Input, "no fairness section and no --fairness flag");
    if (o.fairness) spec.kind = *o.fairness;
    if (o.beta) spec.beta = *o.beta;
    return spec;
}

inline Objective effective_objective(const Config& c, const CommandOptions& o) {
    if (o.objective) return *o.objective;
    return c.experiment ? c.experiment->objective : Objective::Acc;
}

inline std::string safe_name(const std::string& s) {
    std::string out;
    for (char ch : s) out += std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' ? ch : '_';
    return out.empty() ? "default" : out;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
}

inline void print_check(std::ostream& os, const std::string& name, const PropertyCheck& p) {
    os << "  " << name << ": " << (p.satisfied ? "satisfied" : "not satisfied") << " (margin " << num(p.margin) << ")";
    if (!p.reason.empty()) os << " - " << p.reason;
    os << '\n';
}

inline void print_result(std::ostream& os, const std::string& label, const EquilibriumResult& r) {
    os << label << ": value " << num(r.objective_value) << ", delta " << num(r.delta_value) << ", geometry "
       << to_string(r.geometry) << ", method " << r.diagnostics.method << ", iterations " << r.diagnostics.iterations
       << (r.diagnostics.converged ? "" : ", NOT CONVERGED") << (r.diagnostics.heuristic ? ", heuristic" : "") << '\n';
    os << "  policy " << vec_text(r.policy.weights) << (r.policy.deployable ? "" : " (not deployable)") << '\n';
}

}  // namespace detail

inline int cmd_validate(const CommandOptions& o, std::ostream& os = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, [&] {
        detail::ensure_out_dir(o.out);
        Config c = load_config(o.config);
        int code = kExitOk;
        for (const BuiltScenario& b : build_split_scenarios(c, o.seed)) {
            const std::string tag = b.split.empty() ? "scenario" : "split " + b.split;
            ValidationReport v = validate_scenario(b.scenario);
            for (const auto& n : b.notes) os << tag << ": note: " << n << '\n';
            if (!v.ok()) {
                for (const auto& msg : v.violations) os << tag << ": violation: " << msg << '\n';
                code = kExitValidation;
                continue;
            }
            os << tag << ": valid (d = " << b.scenario.dim() << ")\n";
            if (!c.has_fairness && !o.fairness) continue;
            FairnessSpec spec = detail::effective_spec(c, o);
            PropertyReport r = property_report(b.scenario, spec, o.seed);
            os << "  fairness " << to_string(r.kind) << ", beta " << num(r.beta) << '\n';
            os << "  sigma_d(M) " << num(r.sigma_d) << ", sampled mu(M) " << num(r.mu_sampled) << '\n';
            detail::print_check(os, "property 1", r.property1);
            detail::print_check(os, "property 2", r.property2.check);
            detail::print_check(os, "property 3", r.property3);
            if (r.class_f)
                os << "  class F: " << (r.class_f->member ? "member" : "not a member") << " - " << r.class_f->reason
                   << " (L " << num(r.class_f->lipschitz) << ", D " << num(r.class_f->diameter)
                   << (r.class_f->diameter_conservative ? ", conservative" : "") << ")\n";
            for (const auto& n : r.notes) os << "  note: " << n << '\n';
        }
        return code;
    });
}

inline int cmd_solve(const CommandOptions& o, std::ostream& os = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, [&] {
        detail::ensure_out_dir(o.out);
        Config c = load_config(o.config);
        FairnessSpec spec = detail::effective_spec(c, o);
        Objective obj = detail::effective_objective(c, o);
        int code = kExitOk;
        for (const BuiltScenario& b : build_split_scenarios(c, o.seed)) {
            if (!b.split.empty()) os << "split " << b.split << '\n';
            FairProblem pb = FairProblem::from(b.scenario, spec);
            EquilibriumResult un = solve_unconstrained(obj, pb.w_star, pb.coeff);
            un.delta_value = pb.delta(un.policy.weights);
            os << "objective " << to_string(obj) << ", fairness " << to_string(spec.kind) << ", beta " << num(spec.beta)
               << '\n';
            detail::print_result(os, "unconstrained", un);
            if (is_convex_kind(spec.kind)) {
                EquilibriumResult r = solve_constrained(obj, pb);
                detail::print_result(os, "constrained", r);
                os << "realized loss " << num(un.objective_value - r.objective_value) << '\n';
                if (!r.diagnostics.converged) code = kExitSolver;
            } else {
                ClassFReport cf = check_class_F(spec, pb.dm);
                if (!cf.member) throw Error(ErrorKind::Contract, "class F membership not verified: " + cf.reason);
                MultistartOptions mo;
                mo.starts = o.starts;
                mo.seed = o.seed;
                EquilibriumResult res = solve_nonconvex_restricted(obj, pb, cf);
                EquilibriumResult ms = solve_nonconvex_multistart(obj, pb, mo);
                EquilibriumResult env = solve_nonconvex_envelope(obj, pb, cf);
                detail::print_result(os, "restricted", res);
                detail::print_result(os, "multistart", ms);
                detail::print_result(os, "envelope", env);
                os << "sandwich " << num(res.objective_value) << " <= " << num(ms.objective_value) << " <= "
                   << num(env.objective_value) << '\n';
                os << "realized loss (restricted) " << num(un.objective_value - res.objective_value) << '\n';
                if (!res.diagnostics.converged || !env.diagnostics.converged) code = kExitSolver;
            }
        }
        return code;
    });
}

inline std::string bounds_csv(const BoundsReport& r) {
    std::ostringstream os;
    os << "objective,bound,value,realized_loss,checked,valid\n";
    for (const BoundEntry& e : r.entries) {
        if (!e.emitted()) continue;
        os << to_string(e.objective) << ',' << e.name << ',' << fmt17(e.value) << ',' << fmt17(e.realized_loss) << ','
           << (e.checked ? 1 : 0) << ',' << (e.valid ? 1 : 0) << '\n';
    }
    return os.str();
}

inline std::string bounds_text(const BoundsReport& r) {
    std::ostringstream os;
    os << "fairness " << to_string(r.kind) << ", beta " << num(r.inputs.beta) << ", sigma_d " << num(r.inputs.sigma_d);
    if (!std::isnan(r.inputs.lambda_d)) os << ", lambda_d " << num(r.inputs.lambda_d);
    if (!std::isnan(r.inputs.hoffman))
        os << ", hoffman " << num(r.inputs.hoffman) << (r.inputs.hoffman_certified ? "" : " (sampled lower bound)");
    if (!std::isnan(r.inputs.lipschitz)) os << ", L " << num(r.inputs.lipschitz) << ", D " << num(r.inputs.diameter);
    os << '\n';
    for (const BoundEntry& e : r.entries) {
        os << "  " << to_string(e.objective) << ' ' << e.name << ": ";
        if (!e.emitted()) {
            os << "not emitted (";
            bool first = true;
            for (const auto& p : e.preconditions)
                if (!p.second) os << (first ? "" : ", ") << p.first << " fails", first = false;
            os << ")\n";
            continue;
        }
        os << "bound " << num(e.value);
        if (e.checked) os << ", realized " << num(e.realized_loss) << (e.valid ? ", ok" : ", VIOLATED");
        os << '\n';
    }
    if (r.tightness) {
        const TightnessVerdict& t = *r.tightness;
        os << "  restriction tightness: conditions " << (t.conditions_met ? "met" : "not met") << " (outside "
           << t.w_star_outside << ", envelope inside " << t.envelope_inside << ", beyond " << t.w_star_beyond
           << "); acc " << num(t.restriction.acc) << " vs " << num(t.se.acc) << ", sw " << num(t.restriction.sw)
           << " vs " << num(t.se.sw) << "; verdict " << (t.holds ? "holds" : "fails") << '\n';
    }
    for (const auto& n : r.notes) os << "  note: " << n << '\n';
    return os.str();
}

inline int cmd_bounds(const CommandOptions& o, std::ostream& os = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, [&] {
        detail::ensure_out_dir(o.out);
        Config c = load_config(o.config);
        FairnessSpec spec = detail::effective_spec(c, o);
        BoundsOptions bo;
        bo.starts = o.starts;
        bo.seed = o.seed;
        std::string csv, text;
        bool valid = true;
        for (const BuiltScenario& b : build_split_scenarios(c, o.seed)) {
            BoundsReport r = bounds_report(b.scenario, spec, bo);
            valid = valid && r.all_valid();
            std::string body = bounds_csv(r);
            if (csv.empty()) csv = "split," + body.substr(0, body.find('\n') + 1);
            std::istringstream lines(body.substr(body.find('\n') + 1));
            for (std::string line; std::getline(lines, line);) csv += (b.split.empty() ? "" : b.split) + "," + line + "\n";
            text += (b.split.empty() ? "" : "split " + b.split + ": ") + bounds_text(r);
        }
        write_text_file(o.out / "bounds.csv", csv);
        write_text_file(o.out / "bounds.txt", text);
        if (!o.quiet) os << text;
        if (!valid) err << "warning: a realized loss exceeds its bound\n";
        return kExitOk;
    });
}

inline int cmd_sweep(const CommandOptions& o, std::ostream& os = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, [&] {
        detail::ensure_out_dir(o.out);
        Config c = load_config(o.config);
        FairnessSpec spec = detail::effective_spec(c, o);
        Objective obj = detail::effective_objective(c, o);
        std::vector<BuiltScenario> built = build_split_scenarios(c, o.seed);
        std::vector<FairProblem> problems;
        double delta_max = 0.0;
        for (const BuiltScenario& b : built) {
            problems.push_back(FairProblem::from(b.scenario, spec));
            EquilibriumResult un = solve_unconstrained(obj, problems.back().w_star, problems.back().coeff);
            delta_max = std::max(delta_max, problems.back().delta(un.policy.weights));
        }
        std::string grid_text = !o.beta_grid.empty() ? o.beta_grid : (c.experiment ? c.experiment->beta_grid : "");
        std::vector<double> grid = grid_text.empty() ? default_beta_grid(delta_max) : parse_beta_grid(grid_text);
        std::vector<SweepResult> results;
        int code = kExitOk;
        for (std::size_t i = 0; i < built.size(); ++i) {
            SweepMetadata meta;
            meta.split = built[i].split;
            meta.cost_case = c.experiment ? to_string(c.experiment->cost_case) : "config";
            meta.seed = o.seed;
            SweepResult r = beta_sweep(problems[i], grid, obj, meta);
            std::filesystem::path csv = o.out / ("sweep_" + detail::safe_name(meta.split) + ".csv");
            emit_csv(r, csv);
            for (const SweepPoint& p : r.points)
                if (!p.diagnostics.converged) {
                    err << "warning: beta " << num(p.beta) << " did not converge" << (p.error.empty() ? "" : ": " + p.error)
                        << '\n';
                    code = kExitSolver;
                }
            if (!o.quiet)
                os << (meta.split.empty() ? "default" : meta.split) << ": " << r.points.size() << " points, unconstrained "
                   << num(r.unconstrained_value) << ", delta(w_u) " << num(r.unconstrained_delta)
                   << (r.monotone() ? "" : ", NOT MONOTONE") << " -> " << csv.string() << '\n';
            results.push_back(std::move(r));
        }
        std::string title = std::string(obj == Objective::Acc ? "Accuracy" : "Social welfare") + ", " +
                            to_string(spec.kind) + " fairness";
        emit_plot(results, o.out / "sweep.svg", title);
        if (!o.quiet) os << "plot -> " << (o.out / "sweep.svg").string() << '\n';
        return code;
    });
}

inline int cmd_simulate(const CommandOptions& o, std::ostream& os = std::cout, std::ostream& err = std::cerr) {
    return detail::guarded(err, [&] {
        detail::ensure_out_dir(o.out);
        Config c = load_config(o.config);
        if (o.n_per_group < 1) throw Error(ErrorKind::Input, "peer count must be positive");
        for (const BuiltScenario& b : build_split_scenarios(c, o.seed)) {
            const Scenario& s = b.scenario;
            require_valid(s);
            if (!b.split.empty()) os << "split " << b.split << '\n';
            Vec w = clip_to_ball(s.ground_truth);
            for (std::size_t g = 0; g < 2; ++g) {
                const GroupParams& gp = s.groups[g];
                PeerDataset peers = sample_peers(gp.sampler, o.n_per_group, w, derive_seed(o.seed, g), o.noise);
                Vec erm = peer_estimate_erm(peers);
                double dev = (erm - peer_estimate_closed_form(gp.projector, w)).cwiseAbs().maxCoeff();
                ProjectorResult sampled = projector_from_samples(peers.features, s.dim());
                double dev_sampled = (erm - sampled.projector * w).cwiseAbs().maxCoeff();
                os << "group " << g + 1 << ": n " << o.n_per_group << ", sampled rank " << sampled.rank
                   << ", projector rank " << static_cast<Eigen::Index>(std::llround(gp.projector.trace()))
                   << ", max |erm - Pi w| " << num(dev) << ", max |erm - Pi_sampled w| " << num(dev_sampled)
                   << (o.noise > 0.0 ? " (noisy scores)" : "") << '\n';
            }
        }
        return kExitOk;
    });
}

}  // namespace fairstack
