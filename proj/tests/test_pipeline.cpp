#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gsbart/diagnostics.hpp"
#include "gsbart/pipeline.hpp"
#include "gsbart/predict.hpp"
#include "gsbart/synth.hpp"
#include "oracles.hpp"

using namespace gsbart;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = "pipeline_tmp_" + name;
    std::ofstream f(path);
    f << content;
    return path;
}

Dataset dataset_from_synth(const SyntheticData& d, Schema& schema, bool with_truth = true) {
    schema.response = "y";
    schema.features = d.feature_names;
    if (with_truth) schema.truth = "truth";
    Dataset ds;
    ds.n = static_cast<int>(d.y.size());
    ds.feature_names = d.feature_names;
    ds.feature_columns = d.features;
    ds.response_numeric = true;
    ds.response_num = d.y;
    for (double v : d.y) {
        std::ostringstream os;
        os << v;
        ds.response_raw.push_back(os.str());
    }
    if (with_truth) ds.truth = d.truth;
    return ds;
}

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.trees = 4;
    cfg.sweeps = 10;
    cfg.burnin = 3;
    cfg.iit_steps = 5;
    cfg.depth_cap = 4;
    cfg.seed = 5;
    cfg.workers = 1;
    cfg.default_chain_bins = 20;
    return cfg;
}

}  // namespace

TEST_CASE("dataset loading validates structure and types") {
    const auto csv = write_temp("ok.csv", "y,x1,x2\n1.5,0.2,7\n2.5,0.4,8\n0.5,0.9,9\n");
    Schema schema;
    schema.response = "y";
    schema.features = {"x1", "x2"};
    const Dataset ds = load_dataset(csv, schema);
    CHECK(ds.n == 3);
    CHECK(ds.response_num == std::vector<double>{1.5, 2.5, 0.5});
    CHECK(ds.feature("x2")[2] == 9.0);

    Schema missing = schema;
    missing.response = "yy";
    CHECK_THROWS_WITH(load_dataset(csv, missing), Catch::Matchers::ContainsSubstring("yy"));

    const auto bad = write_temp("bad.csv", "y,x1,x2\n1.5,oops,7\n");
    CHECK_THROWS_WITH(load_dataset(bad, schema), Catch::Matchers::ContainsSubstring("x1"));

    const auto empty = write_temp("empty.csv", "");
    CHECK_THROWS_AS(load_dataset(empty, schema), ValidationError);

    // categorical response is rejected by the normal model
    const auto cat = write_temp("cat.csv", "y,x1,x2\nA,0.2,7\nB,0.4,8\nA,0.9,9\nB,0.1,4\n"
                                           "A,0.6,2\nB,0.3,1\nA,0.7,5\nB,0.8,3\nA,0.15,6\nB,0.95,9\n");
    const Dataset cds = load_dataset(cat, schema);
    RunConfig cfg = tiny_config();
    cfg.model = "normal";
    CHECK_THROWS_AS(run_training(cds, schema, cfg, ""), ValidationError);
}

TEST_CASE("config files parse with graph specs and env workers") {
    setenv("GSBART_WORKERS", "3", 1);
    const auto path = write_temp(
        "cfg.txt",
        "trees = 7\nsweeps = 30\nburnin = 5\nk = 9\nalpha = 0.9\nbeta = 1.5\nseed = 123\n"
        "model = count\ndepth_cap = 6\ngraph.x1 = chain:40\ngraph.region = tree:e.txt:b.txt:4\n");
    const RunConfig cfg = load_run_config(path);
    CHECK(cfg.trees == 7);
    CHECK(cfg.iit_steps == 9);
    CHECK(cfg.workers == 3);  // env var
    CHECK(cfg.model == "count");
    REQUIRE(cfg.graphs.size() == 2);
    CHECK(cfg.graphs[0].label == "region");
    CHECK(cfg.graphs[0].arborescences == 4);
    CHECK(cfg.graphs[1].chain_bins == 40);

    const auto with_workers = write_temp("cfg2.txt", "workers = 2\n");
    CHECK(load_run_config(with_workers).workers == 2);  // config overrides env
    unsetenv("GSBART_WORKERS");

    const auto bad = write_temp("cfg3.txt", "alpha = 1.5\n");
    CHECK_THROWS_AS(load_run_config(bad), ValidationError);
}

TEST_CASE("synthetic generators honor their formulas") {
    const SyntheticData f = generate_friedman(50, 0.0, 3);
    for (int i = 0; i < 50; ++i) {
        const double want = 10.0 * std::sin(M_PI * f.features[0][i] * f.features[1][i]) +
                            20.0 * std::pow(f.features[2][i] - 0.5, 2.0) + 10.0 * f.features[3][i];
        CHECK(f.truth[i] == Catch::Approx(want).margin(1e-12));
        CHECK(f.y[i] == f.truth[i]);  // sigma = 0: residuals identically zero
    }

    const SyntheticData c = generate_chain_step(60, 0.0, 4);
    for (int i = 0; i < 60; ++i)
        if (c.features[0][i] < 0.25) CHECK(c.truth[i] == kStepLevels[0]);

    const SyntheticData g = generate_graph_step(40, 0.0, 5);
    CHECK_FALSE(g.graph_edges.empty());
    CHECK(g.graph_bins.size() == 40u);
    CHECK_THROWS_AS(generate_synthetic("nope", 50, 1.0, 1), ValidationError);
    CHECK_THROWS_AS(generate_synthetic("friedman", 5, 1.0, 1), ValidationError);
}

TEST_CASE("training produces deterministic stores and honest bookkeeping") {
    Schema schema;
    const Dataset ds = dataset_from_synth(generate_chain_step(60, 0.3, 7), schema);
    RunConfig cfg = tiny_config();

    const PosteriorStore s1 = run_training(ds, schema, cfg, "response = y\nfeatures = x1\n");
    const PosteriorStore s2 = run_training(ds, schema, cfg, "response = y\nfeatures = x1\n");
    std::ostringstream o1, o2;
    save_store(s1, o1);
    save_store(s2, o2);
    CHECK(o1.str() == o2.str());  // identical seeds, identical stores

    CHECK(s1.kept_sweeps() == cfg.sweeps - cfg.burnin);
    CHECK(static_cast<int>(s1.trace[0].size()) == cfg.sweeps);
    CHECK(s1.ensembles[0].front().trees.size() == static_cast<std::size_t>(cfg.trees));

    // sweeps == burnin: empty posterior store
    RunConfig none = cfg;
    none.sweeps = none.burnin;
    const PosteriorStore s3 = run_training(ds, schema, none, "");
    CHECK(s3.kept_sweeps() == 0);

    // store round trip is lossless
    std::istringstream in(o1.str());
    const PosteriorStore back = load_store(in);
    std::ostringstream o3;
    save_store(back, o3);
    CHECK(o3.str() == o1.str());
}

TEST_CASE("prediction replays stored ensembles") {
    // Hand-built store: one kept sweep, two root-only trees with weights 0.25
    // and 0.5 on the working scale.
    PosteriorStore store;
    store.model = "normal";
    store.n_train = 3;
    store.n_total = 4;
    store.y_mid = 2.0;
    store.y_range = 4.0;
    store.order = {0, 1, 2, 3};
    GraphBlueprint bp;
    bp.kind = GraphBlueprint::Kind::Chain;
    bp.feature_label = "x1";
    bp.cut_points = {0.5};
    store.graphs = {bp};
    PosteriorStore::Entry e;
    e.sweep = 0;
    e.sigma = 1.0;
    e.sigma_mu2 = 1.0;
    DecisionTree t(3, 4);
    t.set_leaf_weight(0, 0.25);
    std::ostringstream ts;
    t.serialize(ts);
    e.trees = {ts.str(), ts.str()};
    store.ensembles = {{e}};

    Dataset ds;
    ds.n = 4;
    ds.feature_names = {"x1"};
    ds.feature_columns = {{0.1, 0.6, 0.3, 0.9}};
    ds.response_raw = {"0", "0", "0", "0"};
    ds.response_num = {0, 0, 0, 0};

    const auto graphs = rebuild_graphs(store, [&](const std::string&) {
        return ds.feature_columns[0];
    });
    const Predictions pred = predict(store, ds, graphs);
    REQUIRE(pred.rows.size() == 4);
    for (const auto& r : pred.rows) {
        CHECK(r.mean == Catch::Approx(0.5 * 4.0 + 2.0).margin(1e-12));  // unscaled sum of weights
        CHECK(r.is_test == (r.row == 3));
    }
}

TEST_CASE("in-sample predictions reproduce the final sweep fit exactly") {
    Schema schema;
    const Dataset ds = dataset_from_synth(generate_chain_step(50, 0.2, 9), schema);
    RunConfig cfg = tiny_config();
    cfg.sweeps = 6;
    cfg.burnin = 5;  // keep exactly the final sweep
    const PosteriorStore store = run_training(ds, schema, cfg, "");
    const OrderedData od = make_order(ds, cfg);
    const GraphSet gs = build_graphs(ds, schema, cfg, od);

    // Rebuild the sampler to the same final state (same seeds) and compare.
    std::vector<double> y(od.n_total);
    for (int i = 0; i < od.n_total; ++i)
        y[i] = (ds.response_num[od.order[i]] - store.y_mid) / store.y_range;
    const auto draws = phi_draws(store, 0, gs.graphs);
    REQUIRE(draws.size() == 1);

    ResponseModel model;
    model.kind = ModelKind::Normal;
    model.sigma = std::sqrt(detail::variance(std::vector<double>(y.begin(), y.begin() + od.n_train)));
    PriorConfig prior = make_prior(cfg, y, od.n_train);
    prior.sigma_mu2 = std::pow(0.5 / (2.0 * std::sqrt(double(cfg.trees))), 2.0);
    prior.lambda = calibrate_lambda(model.sigma, prior.nu);
    SamplerState s = SamplerState::init(model, prior,
                                        std::vector<double>(y.begin(), y.begin() + od.n_train),
                                        od.n_train, od.n_total, cfg.trees);
    for (int sweep = 0; sweep < cfg.sweeps; ++sweep) gibbs_sweep(s, gs.graphs, cfg);
    for (int i = 0; i < od.n_total; ++i)
        CHECK(draws[0][i] == Catch::Approx(s.phi_total[i]).margin(1e-12));
}

TEST_CASE("variable importance counts and degenerate case") {
    PosteriorStore store;
    store.importance = {{"x1", 12}};
    store.ensembles = {{PosteriorStore::Entry{}}};
    const ImportanceReport rep = variable_importance(store);
    REQUIRE(rep.rows.size() == 1);
    CHECK(rep.rows[0].share == 1.0);
    CHECK_FALSE(rep.degenerate);

    PosteriorStore zero = store;
    zero.importance = {{"x1", 0}, {"x2", 0}};
    const ImportanceReport rep0 = variable_importance(zero);
    CHECK(rep0.degenerate);
    for (const auto& r : rep0.rows) CHECK(r.share == 0.0);

    PosteriorStore empty;
    CHECK_THROWS_AS(variable_importance(empty), ValidationError);
}

TEST_CASE("hdi matches the quantile oracle on normal draws") {
    Rng rng(15);
    std::vector<double> draws(20000);
    for (auto& d : draws) d = rng.normal(0.0, 1.0);
    const Interval iv = hdi(draws, 0.95);
    CHECK(iv.lo == Catch::Approx(-1.96).margin(0.06));
    CHECK(iv.hi == Catch::Approx(1.96).margin(0.06));
    CHECK_THROWS_AS(hdi({}, 0.95), ValidationError);
}

TEST_CASE("partial dependence: constant, step, and untouched features") {
    // store with two chain-backed features; all rules live on feature x1
    PosteriorStore store;
    store.model = "normal";
    store.n_train = 4;
    store.n_total = 4;
    store.y_mid = 0.0;
    store.y_range = 1.0;
    store.order = {0, 1, 2, 3};
    GraphBlueprint b1, b2;
    b1.kind = b2.kind = GraphBlueprint::Kind::Chain;
    b1.feature_label = "x1";
    b1.cut_points = {0.5};
    b1.value_lo = 0.0;
    b1.value_hi = 1.0;
    b2.feature_label = "x2";
    b2.cut_points = {0.5};
    b2.value_lo = 0.0;
    b2.value_hi = 1.0;
    store.graphs = {b1, b2};

    Dataset ds;
    ds.n = 4;
    ds.feature_names = {"x1", "x2"};
    ds.feature_columns = {{0.2, 0.4, 0.6, 0.8}, {0.3, 0.6, 0.2, 0.9}};
    const auto graphs = rebuild_graphs(store, [&](const std::string& label) {
        return ds.feature(label);
    });

    // one-split tree on x1 at cut 0.5: left weight -1, right weight +2
    DecisionTree t(4, 4);
    t.apply_split(0, {0, 1}, graphs);
    t.set_leaf_weight(t.node(0).left, -1.0);
    t.set_leaf_weight(t.node(0).right, 2.0);
    std::ostringstream ts;
    t.serialize(ts);
    PosteriorStore::Entry e;
    e.trees = {ts.str()};
    store.ensembles = {{e, e}};

    std::vector<double> clamped;
    const auto pd_x1 =
        partial_dependence(store, graphs, "x1", {0.1, 0.4, 0.6, 0.9, 2.0}, &clamped);
    CHECK(pd_x1[0].mean == Catch::Approx(-1.0).margin(1e-12));
    CHECK(pd_x1[1].mean == Catch::Approx(-1.0).margin(1e-12));
    CHECK(pd_x1[2].mean == Catch::Approx(2.0).margin(1e-12));  // step at the cut
    CHECK(pd_x1[3].mean == Catch::Approx(2.0).margin(1e-12));
    CHECK(clamped == std::vector<double>{2.0});

    // a feature absent from every split has a flat curve
    const auto pd_x2 = partial_dependence(store, graphs, "x2", {0.1, 0.5, 0.9}, nullptr);
    CHECK(pd_x2[0].mean == pd_x2[1].mean);
    CHECK(pd_x2[1].mean == pd_x2[2].mean);
    CHECK(pd_x2[0].hdi95.hi == Catch::Approx(pd_x2[0].hdi95.lo).margin(1e-12));

    CHECK_THROWS_AS(partial_dependence(store, graphs, "zzz", {0.5}, nullptr), ValidationError);
}

TEST_CASE("effective sample size estimator") {
    // constant chain: defined as n with a flag
    const EssResult c = effective_sample_size(std::vector<double>(50, 3.14));
    CHECK(c.constant_chain);
    CHECK(c.ess == 50.0);

    // white noise: ESS near the chain length
    Rng rng(21);
    double total = 0.0;
    const int L = 2000, chains = 40;
    for (int r = 0; r < chains; ++r) {
        std::vector<double> chain(L);
        for (auto& v : chain) v = rng.normal(0.0, 1.0);
        total += effective_sample_size(chain).ess;
    }
    const double mean_ess = total / chains;
    CHECK(mean_ess > 0.8 * L);
    CHECK(mean_ess < 1.2 * L);

    // strongly autocorrelated chain: far fewer effective samples
    std::vector<double> ar(L);
    double x = 0.0;
    for (auto& v : ar) v = x = 0.95 * x + rng.normal(0.0, 1.0);
    CHECK(effective_sample_size(ar).ess < 0.2 * L);
}

TEST_CASE("diagnostics report coverage against a truth column") {
    Schema schema;
    const Dataset ds = dataset_from_synth(generate_chain_step(60, 0.3, 17), schema);
    RunConfig cfg = tiny_config();
    const PosteriorStore store = run_training(ds, schema, cfg, "");
    const OrderedData od = make_order(ds, cfg);
    const GraphSet gs = build_graphs(ds, schema, cfg, od);
    const DiagnosticsReport rep = diagnostics(store, ds, gs.graphs);
    CHECK(rep.trace_metric == "mspe");
    CHECK(rep.ess_test.size() == static_cast<std::size_t>(od.n_total - od.n_train));
    CHECK(rep.coverage95 >= 0.0);
    CHECK(rep.coverage95 <= 1.0);
    CHECK(rep.mean_ess > 0.0);
}
