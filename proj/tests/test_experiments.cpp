#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace fstest;

namespace {

const char* kColumns[] = {"sex", "age", "western", "married", "edu-num", "workclass", "occupation", "hours"};

std::string adult_like_csv(int n, std::uint64_t seed, bool with_edu = true) {
    Stream st(seed, 70);
    std::ostringstream os;
    bool first = true;
    for (const char* c : kColumns) {
        if (!with_edu && std::string(c) == "edu-num") continue;
        os << (first ? "" : ",") << c;
        first = false;
    }
    os << ",country,income\n";
    for (int i = 0; i < n; ++i) {
        int sex = static_cast<int>(st.below(2));
        int age = 18 + static_cast<int>(st.below(50));
        std::string country = st.uniform() < 0.7 ? "United-States" : (st.uniform() < 0.5 ? "Germany" : "India");
        int western = country == "India" ? 0 : 1;
        int married = static_cast<int>(st.below(2));
        int edu = 1 + static_cast<int>(st.below(16));
        int work = static_cast<int>(st.below(4));
        int occ = static_cast<int>(st.below(6));
        int hours = 20 + static_cast<int>(st.below(40));
        int label = (edu + hours / 10 + married * 3 + static_cast<int>(st.below(6))) > 14 ? 1 : 0;
        os << sex << ',' << age << ',' << western << ',' << married;
        if (with_edu) os << ',' << edu;
        os << ',' << work << ',' << occ << ',' << hours << ',' << country << ',' << label << '\n';
    }
    return os.str();
}

DatasetSchema adult_schema() {
    DatasetSchema sc;
    for (const char* c : kColumns) {
        ColumnEncoding e;
        e.column = c;
        sc.features.push_back(e);
    }
    ColumnEncoding label;
    label.column = "income";
    sc.label = label;
    sc.keep = {"age", "country", "edu-num"};
    return sc;
}

FairnessSpec spec(FairnessKind k, double beta = 0.0) {
    FairnessSpec s;
    s.kind = k;
    s.beta = beta;
    return s;
}

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("fairstack_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

TEST(Ingest, EightColumnRoundTrip) {
    std::istringstream in(adult_like_csv(100, 1));
    TabularDataset ds = ingest_dataset(in, adult_schema());
    EXPECT_EQ(ds.dim(), 8);
    EXPECT_EQ(ds.rows(), 100);
    ASSERT_TRUE(ds.label.has_value());
    EXPECT_EQ(ds.label->size(), 100);
    EXPECT_TRUE(ds.values.allFinite());
    EXPECT_EQ(ds.columns[4], "edu-num");
    EXPECT_EQ(ds.raw.at("country").size(), 100u);
}

TEST(Ingest, MissingColumnIsNamed) {
    std::istringstream in(adult_like_csv(10, 1, false));
    try {
        ingest_dataset(in, adult_schema());
        FAIL() << "expected an ingestion error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Ingestion);
        EXPECT_NE(std::string(e.what()).find("edu-num"), std::string::npos);
    }
}

TEST(Ingest, BadCellsNameRowAndColumn) {
    DatasetSchema sc;
    ColumnEncoding a;
    a.column = "a";
    sc.features.push_back(a);
    for (std::string bad : {"x", "?", "NA"}) {
        std::istringstream in("a\n1\n" + bad + "\n");
        try {
            ingest_dataset(in, sc);
            FAIL() << "expected an ingestion error for '" << bad << "'";
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::Ingestion);
            std::string msg = e.what();
            EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
            EXPECT_NE(msg.find("'a'"), std::string::npos) << msg;
        }
    }
}

TEST(Ingest, Encodings) {
    DatasetSchema sc;
    ColumnEncoding age;
    age.column = "age";
    age.encoding = Encoding::Threshold;
    age.threshold = 35;
    ColumnEncoding country;
    country.column = "country";
    country.encoding = Encoding::Threshold;
    country.positive = {"United-States", "Germany"};
    ColumnEncoding work;
    work.column = "work";
    work.encoding = Encoding::Codes;
    work.codes = {{"private", 0}, {"gov", 1}};
    sc.features = {age, country, work};
    std::istringstream in("age,country,work\n30,India,gov\n35,Germany,private\n50,United-States,gov\n");
    TabularDataset ds = ingest_dataset(in, sc);
    Mat expected(3, 3);
    expected << 1, 0, 1, 1, 1, 0, 0, 1, 1;
    EXPECT_EQ(ds.values, expected);

    std::istringstream bad("age,country,work\n30,India,self\n");
    EXPECT_THROW(ingest_dataset(bad, sc), Error);
}

TEST(Split, AgeThresholdPartitions) {
    std::istringstream in(adult_like_csv(200, 2));
    TabularDataset ds = ingest_dataset(in, adult_schema());
    SplitRule r;
    r.column = "age";
    r.op = SplitOp::Le;
    r.value = 35;
    GroupSplit g = split_groups(ds, r);
    EXPECT_EQ(g.rows1.size() + g.rows2.size(), 200u);
    for (Eigen::Index i : g.rows1) EXPECT_LE(ds.values(i, 1), 35);
    for (Eigen::Index i : g.rows2) EXPECT_GT(ds.values(i, 1), 35);
    EXPECT_EQ(g.group1.rows(), static_cast<Eigen::Index>(g.rows1.size()));
}

TEST(Split, EducationAndCountryRules) {
    std::istringstream in(adult_like_csv(200, 3));
    TabularDataset ds = ingest_dataset(in, adult_schema());
    SplitRule edu;
    edu.column = "edu-num";
    edu.op = SplitOp::Ge;
    edu.value = 9;
    GroupSplit g = split_groups(ds, edu);
    for (Eigen::Index i : g.rows1) EXPECT_GE(ds.values(i, 4), 9);
    for (Eigen::Index i : g.rows2) EXPECT_LT(ds.values(i, 4), 9);

    SplitRule west;
    west.column = "country";
    west.op = SplitOp::In;
    west.values = {"United-States", "Germany"};
    GroupSplit w = split_groups(ds, west);
    const auto& cells = ds.raw.at("country");
    for (Eigen::Index i : w.rows1) EXPECT_NE(cells[static_cast<std::size_t>(i)], "India");
    for (Eigen::Index i : w.rows2) EXPECT_EQ(cells[static_cast<std::size_t>(i)], "India");
}

TEST(Split, EmptyPartIsAnError) {
    std::istringstream in(adult_like_csv(50, 4));
    TabularDataset ds = ingest_dataset(in, adult_schema());
    SplitRule r;
    r.column = "age";
    r.value = 5;
    try {
        split_groups(ds, r);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Split);
    }
    r.column = "nope";
    EXPECT_THROW(split_groups(ds, r), Error);
}

TEST(Fit, CorrelatedFeatureGivesAlignedTruth) {
    Stream st(5, 71);
    const Eigen::Index n = 400;
    Mat x(n, 3);
    Vec y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = static_cast<double>(st.below(2));
        x(i, 0) = st.normal();
        x(i, 1) = 2.0 * y(i) - 1.0;
        x(i, 2) = st.normal();
    }
    Vec w = fit_ground_truth(x, y);
    EXPECT_LE(w.norm(), 1.0 + 1e-15);
    EXPECT_GT(w(1), 0.0);
    EXPECT_GT(std::abs(w(1)), 5.0 * std::max(std::abs(w(0)), std::abs(w(2))));
}

TEST(Fit, IndependentLabelsGiveSmallTruth) {
    Stream st(6, 72);
    const Eigen::Index n = 10000;
    Mat x = st.normal_mat(n, 4);
    Vec y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = static_cast<double>(st.below(2));
    EXPECT_LT(fit_ground_truth(x, y).norm(), 0.1);
}

TEST(Fit, DegenerateLabelsAreRejected) {
    Mat x = Mat::Ones(4, 2);
    try {
        fit_ground_truth(x, Vec::Ones(4));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Fit);
    }
    Vec y(4);
    y << 0, 1, 2, 0;
    EXPECT_THROW(fit_ground_truth(x, y), Error);
}

TEST(Fit, LargeFitsAreProjected) {
    std::istringstream in(adult_like_csv(300, 7));
    TabularDataset ds = ingest_dataset(in, adult_schema());
    Vec w = fit_ground_truth(ds);
    EXPECT_LE(w.norm(), 1.0 + 1e-15);
}

TEST(Grid, Parsing) {
    auto lin = parse_beta_grid("0:1:11lin");
    ASSERT_EQ(lin.size(), 11u);
    EXPECT_EQ(lin.front(), 0.0);
    EXPECT_EQ(lin.back(), 1.0);
    EXPECT_NEAR(lin[3], 0.3, 1e-15);
    auto geo = parse_beta_grid("0.001:1:4geo");
    ASSERT_EQ(geo.size(), 4u);
    EXPECT_NEAR(geo[1], 0.01, 1e-15);
    EXPECT_NEAR(geo[3], 1.0, 1e-15);
    for (std::string bad : {"1:0:3lin", "0:1:3", "0:1:2.5lin", "0:1:3log", "0:1:3geo", "x:1:3lin"})
        EXPECT_THROW(parse_beta_grid(bad), Error) << bad;
    auto def = default_beta_grid(0.4);
    EXPECT_EQ(def.size(), 25u);
    EXPECT_NEAR(def.front(), 1e-3, 1e-18);
    EXPECT_NEAR(def.back(), 0.8, 1e-15);
}

TEST(Sweep, WorkedExampleRecoveryThreshold) {
    auto res = beta_sweep(worked_example(), spec(FairnessKind::L1), {0.0, 7.0 / 16.0, 7.0 / 8.0}, Objective::Acc);
    ASSERT_EQ(res.points.size(), 3u);
    EXPECT_EQ(res.unconstrained_value, 0.0);
    EXPECT_NEAR(res.unconstrained_delta, 7.0 / 8.0, 1e-15);
    // M is invertible, so W(0) = {0} and the loss at beta = 0 is |w*|^2
    EXPECT_NEAR(res.unconstrained_value - res.points[0].objective_value, 0.5, 1e-12);
    EXPECT_GT(res.unconstrained_value - res.points[1].objective_value, 1e-3);
    EXPECT_EQ(res.unconstrained_value - res.points[2].objective_value, 0.0);
    EXPECT_TRUE(res.monotone());
    for (const auto& p : res.points) EXPECT_TRUE(p.diagnostics.converged);
}

TEST(Sweep, FlatBeyondRecoveryAndHomogeneousGroups) {
    Stream st(8, 73);
    Scenario s = random_scenario(3, st);
    FairProblem pb = FairProblem::from(s, spec(FairnessKind::L2));
    for (Objective o : {Objective::Acc, Objective::Sw}) {
        auto un = solve_unconstrained(o, pb.w_star, pb.coeff);
        double du = pb.delta(un.policy.weights);
        auto res = beta_sweep(pb, linear_grid(du * 1.01, du * 3, 6), o);
        for (const auto& p : res.points) EXPECT_NEAR(p.objective_value, res.unconstrained_value, 1e-12);
    }
    Scenario h = s;
    h.groups[1] = h.groups[0];
    for (FairnessKind k : {FairnessKind::L1, FairnessKind::L2}) {
        auto res = beta_sweep(h, spec(k), linear_grid(0.0, 1.0, 5), Objective::Acc);
        for (const auto& p : res.points) EXPECT_NEAR(p.objective_value, res.unconstrained_value, 1e-12);
    }
}

TEST(Sweep, MonotoneWithRecoveryWithinOneStep) {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        Stream st(seed, 74);
        Eigen::Index d = 2 + static_cast<Eigen::Index>(st.below(3));
        Scenario s = random_scenario(d, st, {0.4, true, seed % 3 == 0});
        for (FairnessKind k : {FairnessKind::L1, FairnessKind::L2})
            for (Objective o : {Objective::Acc, Objective::Sw}) {
                FairProblem pb = FairProblem::from(s, spec(k));
                auto un = solve_unconstrained(o, pb.w_star, pb.coeff);
                double du = pb.delta(un.policy.weights);
                if (!(du > 1e-6)) continue;
                const int n = 41;
                auto grid = linear_grid(0.0, 2.0 * du, n);
                double spacing = grid[1] - grid[0];
                auto res = beta_sweep(pb, grid, o);
                ASSERT_TRUE(res.monotone()) << seed;
                double first = std::numeric_limits<double>::infinity();
                for (const auto& p : res.points) {
                    ASSERT_TRUE(p.diagnostics.converged) << seed << " beta " << p.beta;
                    if (res.unconstrained_value - p.objective_value < 1e-9) {
                        first = p.beta;
                        break;
                    }
                }
                EXPECT_GE(first, du - spacing) << seed;
                EXPECT_LE(first, du + spacing) << seed;
            }
    }
}

TEST(Sweep, NonconvexKindsUseTheRestriction) {
    Stream st(9, 75);
    Scenario s = random_scenario(2, st);
    s.groups[0].projector.setIdentity();
    FairProblem pb = FairProblem::from(s, spec(FairnessKind::Asym));
    ClassFReport cf0 = check_class_F(pb.spec, pb.dm);
    ASSERT_TRUE(cf0.member) << cf0.reason;
    auto res = beta_sweep(pb, linear_grid(0.0, 0.95 * cf0.lambda_d, 9), Objective::Acc);
    EXPECT_TRUE(res.monotone());
    auto past = beta_sweep(pb, {2.0 * cf0.lambda_d}, Objective::Acc);
    EXPECT_NE(past.points[0].error.find("class F"), std::string::npos);
    for (const auto& p : res.points) {
        EXPECT_TRUE(p.error.empty()) << p.error;
        FairProblem at = pb;
        at.spec.beta = p.beta;
        EXPECT_NEAR(p.objective_value, solve_nonconvex_restricted(Objective::Acc, at, check_class_F(at.spec, at.dm)).objective_value,
                    1e-12);
    }
}

TEST(Sweep, FailuresAreRecordedPerPoint) {
    FairnessSpec sp = spec(FairnessKind::Custom);
    sp.custom_q = Mat::Identity(2, 2);
    sp.f = std::make_shared<const Expression>(Expression::parse("1 + abs(w1)"));
    sp.lipschitz = 1.0;
    auto res = beta_sweep(worked_example(), sp, {0.1, 0.2}, Objective::Acc);
    for (const auto& p : res.points) {
        EXPECT_FALSE(p.diagnostics.converged);
        EXPECT_FALSE(p.error.empty());
    }
    EXPECT_THROW(beta_sweep(worked_example(), spec(FairnessKind::L1), {0.2, 0.1}, Objective::Acc), Error);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
    Stream st(10, 76);
    Scenario s = random_scenario(4, st);
    auto grid = linear_grid(0.0, 1.0, 17);
    auto a = beta_sweep(s, spec(FairnessKind::L1), grid, Objective::Sw, {}, 1);
    auto b = beta_sweep(s, spec(FairnessKind::L1), grid, Objective::Sw, {}, 4);
    EXPECT_EQ(sweep_csv(a), sweep_csv(b));
    EXPECT_EQ(sweep_policies_csv(a), sweep_policies_csv(b));
}

TEST(Emit, CsvRoundTrip) {
    Stream st(11, 77);
    Scenario s = random_scenario(3, st);
    SweepMetadata meta;
    meta.split = "demo";
    auto res = beta_sweep(s, spec(FairnessKind::L2), linear_grid(0.0, 0.5, 9), Objective::Acc, meta);
    auto dir = temp_dir("csv");
    auto path = dir / "sweep_demo.csv";
    emit_csv(res, path);
    std::string text = slurp(path);
    EXPECT_EQ(text.substr(0, text.find('\n')), "beta,objective_value,delta_at_opt,unconstrained_value,converged");
    auto rows = read_sweep_csv(path);
    ASSERT_EQ(rows.size(), res.grid.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].beta, res.points[i].beta);
        EXPECT_EQ(rows[i].objective_value, res.points[i].objective_value);
        EXPECT_EQ(rows[i].delta_at_opt, res.points[i].delta_at_opt);
        EXPECT_EQ(rows[i].unconstrained_value, res.unconstrained_value);
        EXPECT_EQ(rows[i].converged, res.points[i].diagnostics.converged);
        if (i > 0) EXPECT_GE(rows[i].objective_value, rows[i - 1].objective_value - 1e-9);
    }
    auto side = policies_path(path);
    EXPECT_EQ(side.filename(), "sweep_demo_policies.csv");
    EXPECT_EQ(count_of(slurp(side), "\n"), res.grid.size() + 1);
    EXPECT_THROW(emit_csv(res, dir / "missing" / "x.csv"), Error);
}

TEST(Emit, SvgStructureAndDeterminism) {
    Stream st(12, 78);
    Scenario s = random_scenario(3, st);
    std::vector<SweepResult> results;
    for (const char* name : {"a", "b", "c"}) {
        SweepMetadata meta;
        meta.split = name;
        results.push_back(beta_sweep(s, spec(FairnessKind::L1), linear_grid(0.0, 1.0, 7), Objective::Acc, meta));
        s.groups[1].projector = random_projector(3, 1 + static_cast<Eigen::Index>(st.below(3)), st);
    }
    std::string svg = sweep_svg(results, "accuracy <l1>");
    EXPECT_EQ(count_of(svg, "<polyline"), 3u);
    EXPECT_GE(count_of(svg, "class=\"reference\""), 1u);
    EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
    EXPECT_NE(svg.find("accuracy &lt;l1&gt;"), std::string::npos);
    auto dir = temp_dir("svg");
    emit_plot(results, dir / "a.svg");
    emit_plot(results, dir / "b.svg");
    EXPECT_EQ(slurp(dir / "a.svg"), slurp(dir / "b.svg"));
    EXPECT_EQ(slurp(dir / "a.svg"), sweep_svg(results));
}

TEST(Synth, DeterministicAndValid) {
    SynthOptions o;
    o.d = 6;
    o.n_per_group = 50;
    o.seed = 13;
    o.rank = {3, 4};
    auto a = synth_generate(o);
    auto b = synth_generate(o);
    EXPECT_EQ(a.scenario.contribution.entries, b.scenario.contribution.entries);
    EXPECT_EQ(a.scenario.groups[1].projector, b.scenario.groups[1].projector);
    EXPECT_EQ(a.samples[0], b.samples[0]);
    EXPECT_EQ(a.scenario.ground_truth, b.scenario.ground_truth);
    EXPECT_TRUE(validate_scenario(a.scenario).ok());
    for (const auto& g : a.scenario.groups) EXPECT_LE((g.projector * g.projector - g.projector).norm(), 1e-10);
    EXPECT_NEAR(a.scenario.groups[0].projector.trace(), 3.0, 1e-10);
    EXPECT_NEAR(a.scenario.groups[1].projector.trace(), 4.0, 1e-10);
    EXPECT_LE((a.scenario.contribution.entries - contribution_by_paths(a.graph)).cwiseAbs().maxCoeff(), 1e-12);
    o.seed = 14;
    EXPECT_NE(synth_generate(o).scenario.ground_truth, a.scenario.ground_truth);
}

TEST(Synth, CostCases) {
    SynthOptions o;
    o.d = 4;
    o.n_per_group = 20;
    o.cost_case = CostCase::Scaled;
    auto s = synth_generate(o).scenario;
    EXPECT_EQ(s.groups[1].cost, 2.0 * s.groups[0].cost);
    EXPECT_EQ(s.groups[0].cost, Mat::Identity(4, 4));
    o.cost_case = CostCase::Random;
    auto r = synth_generate(o).scenario;
    EXPECT_TRUE(validate_scenario(r).ok());
    EXPECT_NE(r.groups[0].cost, r.groups[1].cost);
    EXPECT_EQ(r.groups[0].cost, synth_generate(o).scenario.groups[0].cost);
    EXPECT_THROW(parse_cost_case("odd"), Error);
}

TEST(Synth, SupportsGiveCoordinateProjectors) {
    SynthOptions o;
    o.d = 4;
    o.n_per_group = 40;
    o.support = {std::vector<Eigen::Index>{0, 1, 2, 3}, std::vector<Eigen::Index>{1, 2, 3}};
    auto s = synth_generate(o).scenario;
    Mat p = Mat::Identity(4, 4);
    p(0, 0) = 0.0;
    EXPECT_LE((s.groups[0].projector - Mat::Identity(4, 4)).norm(), 1e-10);
    EXPECT_LE((s.groups[1].projector - p).norm(), 1e-10);
}

TEST(Alignment, DesirableSplitIsMoreConstrained) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Stream st(seed, 79);
        Vec w = st.in_ball(4);
        if (std::abs(w(0)) < std::abs(w(3))) std::swap(w(0), w(3));
        auto grid = linear_grid(0.0, 1.0, 21);
        for (FairnessKind k : {FairnessKind::L1, FairnessKind::L2}) {
            auto aligned = beta_sweep(alignment_scenario(0, w), spec(k), grid, Objective::Acc);
            auto other = beta_sweep(alignment_scenario(3, w), spec(k), grid, Objective::Acc);
            for (std::size_t i = 0; i < grid.size(); ++i)
                ASSERT_LE(aligned.points[i].objective_value, other.points[i].objective_value + 1e-12)
                    << seed << " beta " << grid[i];
            if (std::abs(w(0)) > std::abs(w(3)) + 1e-9)
                EXPECT_LT(aligned.points[0].objective_value, other.points[0].objective_value);
        }
    }
}
