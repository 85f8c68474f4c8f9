// gsbart command line: train GS-BART models, predict, and inspect posteriors.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "gsbart/config.hpp"
#include "gsbart/dataset.hpp"
#include "gsbart/diagnostics.hpp"
#include "gsbart/pipeline.hpp"
#include "gsbart/posterior.hpp"
#include "gsbart/predict.hpp"
#include "gsbart/synth.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw gsbart::ValidationError("cannot open file: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path);
    if (!f) throw gsbart::ValidationError("cannot write file: " + path);
    f << content;
}

gsbart::PosteriorStore load_store_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw gsbart::ValidationError("cannot open model store: " + path);
    return gsbart::load_store(f);
}

// Rebuild graphs for a loaded store against a dataset in original row order.
std::vector<gsbart::Arborescence> graphs_for_store(const gsbart::PosteriorStore& store,
                                                   const gsbart::Dataset& ds) {
    if (static_cast<int>(store.order.size()) != ds.n)
        throw gsbart::ValidationError("data file has " + std::to_string(ds.n) +
                                      " rows but the model was trained on " +
                                      std::to_string(store.order.size()));
    return gsbart::rebuild_graphs(store, [&](const std::string& label) {
        std::vector<double> col(ds.n);
        const auto& by_row = ds.feature(label);
        for (int i = 0; i < ds.n; ++i) col[i] = by_row[store.order[i]];
        return col;
    });
}

gsbart::Schema schema_from_text(const std::string& text) {
    // Reuse the file parser through a temp-free path: parse line by line.
    std::istringstream is(text);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = gsbart::trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw gsbart::ValidationError("stored schema: expected 'key = value': " + line);
        kv[gsbart::trim(line.substr(0, eq))] = gsbart::trim(line.substr(eq + 1));
    }
    gsbart::Schema s;
    s.response = kv.count("response") ? kv["response"] : "";
    if (kv.count("features")) s.features = gsbart::split_list(kv["features"], ',');
    if (kv.count("offset")) s.offset = kv["offset"];
    if (kv.count("split")) s.split = kv["split"];
    if (kv.count("truth")) s.truth = kv["truth"];
    if (s.response.empty() || s.features.empty())
        throw gsbart::ValidationError("stored schema is incomplete");
    return s;
}

int cmd_train(const std::string& data, const std::string& schema_path, const std::string& config,
              const std::string& out) {
    const gsbart::Schema schema = gsbart::load_schema(schema_path);
    const gsbart::RunConfig cfg = gsbart::load_run_config(config);
    const gsbart::Dataset ds = gsbart::load_dataset(data, schema);
    const gsbart::PosteriorStore store =
        gsbart::run_training(ds, schema, cfg, read_file(schema_path));
    std::ofstream f(out);
    if (!f) throw gsbart::ValidationError("cannot write model store: " + out);
    gsbart::save_store(store, f);
    std::cerr << "trained " << cfg.model << " model: " << store.kept_sweeps()
              << " kept sweeps, " << store.graphs.size() << " candidate graphs\n";
    return 0;
}

int cmd_predict(const std::string& store_path, const std::string& data, const std::string& out) {
    const gsbart::PosteriorStore store = load_store_file(store_path);
    const gsbart::Schema schema = schema_from_text(store.schema_text);
    const gsbart::Dataset ds = gsbart::load_dataset(data, schema);
    const auto graphs = graphs_for_store(store, ds);
    const gsbart::Predictions pred = gsbart::predict(store, ds, graphs);

    std::ostringstream os;
    os.precision(10);
    if (store.model == "classification") {
        os << "row\tsplit\tclass";
        for (const auto& c : pred.class_labels) os << "\tprob_" << c;
        os << "\n";
        for (const auto& r : pred.rows) {
            os << r.row << "\t" << (r.is_test ? "test" : "train") << "\t" << r.class_label;
            for (double p : r.class_probs) os << "\t" << p;
            os << "\n";
        }
    } else {
        os << "row\tsplit\tmean\thdi_lo\thdi_hi\n";
        for (const auto& r : pred.rows)
            os << r.row << "\t" << (r.is_test ? "test" : "train") << "\t" << r.mean << "\t"
               << r.hdi95.lo << "\t" << r.hdi95.hi << "\n";
    }
    write_file(out, os.str());
    return 0;
}

int cmd_importance(const std::string& store_path, const std::string& out) {
    const gsbart::PosteriorStore store = load_store_file(store_path);
    const gsbart::ImportanceReport rep = gsbart::variable_importance(store);
    std::ostringstream os;
    os.precision(10);
    os << "feature\tcount\tshare\n";
    for (const auto& r : rep.rows) os << r.feature << "\t" << r.count << "\t" << r.share << "\n";
    if (rep.degenerate) std::cerr << "warning: no splits recorded; shares reported as 0\n";
    write_file(out, os.str());
    return 0;
}

int cmd_pd(const std::string& store_path, const std::string& data, const std::string& feature,
           const std::string& grid_spec, const std::string& out) {
    const gsbart::PosteriorStore store = load_store_file(store_path);
    const gsbart::Schema schema = schema_from_text(store.schema_text);
    const gsbart::Dataset ds = gsbart::load_dataset(data, schema);
    const auto graphs = graphs_for_store(store, ds);

    std::vector<double> grid;
    const auto parts = gsbart::split_list(grid_spec, ':');
    if (parts.size() == 3) {
        const double lo = std::stod(parts[0]), hi = std::stod(parts[1]);
        const int steps = std::stoi(parts[2]);
        if (steps < 2 || !(hi > lo))
            throw gsbart::ValidationError("grid must be lo:hi:steps with steps >= 2 and hi > lo");
        for (int i = 0; i < steps; ++i)
            grid.push_back(lo + (hi - lo) * static_cast<double>(i) / (steps - 1));
    } else {
        for (const auto& tok : gsbart::split_list(grid_spec, ','))
            grid.push_back(std::stod(tok));
        if (grid.empty()) throw gsbart::ValidationError("empty grid");
    }

    std::vector<double> clamped;
    const auto rows = gsbart::partial_dependence(store, graphs, feature, grid, &clamped);
    if (!clamped.empty()) {
        std::cerr << "warning: " << clamped.size()
                  << " grid value(s) outside the binned range were clamped\n";
    }
    std::ostringstream os;
    os.precision(10);
    os << "grid\tmean\thdi_lo\thdi_hi\n";
    for (const auto& r : rows)
        os << r.grid << "\t" << r.mean << "\t" << r.hdi95.lo << "\t" << r.hdi95.hi << "\n";
    write_file(out, os.str());
    return 0;
}

int cmd_synth(const std::string& kind, int n, double sigma, std::uint64_t seed,
              const std::string& out) {
    const gsbart::SyntheticData d = gsbart::generate_synthetic(kind, n, sigma, seed);
    write_file(out, d.to_csv());
    if (!d.graph_edges.empty()) {
        std::ostringstream es;
        for (auto [u, v] : d.graph_edges) es << u << " " << v << "\n";
        write_file(out + ".edges", es.str());
        std::ostringstream bs;
        for (int b : d.graph_bins) bs << b << "\n";
        write_file(out + ".bins", bs.str());
    }
    return 0;
}

int cmd_diag(const std::string& store_path, const std::string& data, const std::string& out) {
    const gsbart::PosteriorStore store = load_store_file(store_path);
    const gsbart::Schema schema = schema_from_text(store.schema_text);
    const gsbart::Dataset ds = gsbart::load_dataset(data, schema);
    const auto graphs = graphs_for_store(store, ds);
    const gsbart::DiagnosticsReport rep = gsbart::diagnostics(store, ds, graphs);

    std::ostringstream os;
    os.precision(10);
    os << "section\tindex\tvalue\n";
    for (std::size_t c = 0; c < rep.trace.size(); ++c)
        for (std::size_t s = 0; s < rep.trace[c].size(); ++s)
            os << "trace_" << rep.trace_metric << (rep.trace.size() > 1 ? "_" + std::to_string(c) : "")
               << "\t" << s << "\t" << rep.trace[c][s] << "\n";
    for (std::size_t i = 0; i < rep.ess_test.size(); ++i)
        os << "ess\t" << rep.ess_rows[i] << "\t" << rep.ess_test[i] << "\n";
    os << "mean_ess\t0\t" << rep.mean_ess << "\n";
    if (rep.any_constant_chain) os << "constant_chain_flag\t0\t1\n";
    if (!std::isnan(rep.coverage95)) {
        os << "coverage95\t0\t" << rep.coverage95 << "\n";
        os << "mean_hdi_width\t0\t" << rep.mean_hdi_width << "\n";
    }
    write_file(out, os.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GS-BART: Bayesian additive decision trees with graph-split rules"};
    app.require_subcommand(1);

    std::string data, schema, config, out, store, feature, grid = "0:1:11", kind = "friedman";
    int n = 400;
    double sigma = 1.0;
    std::uint64_t seed = 42;

    auto* train = app.add_subcommand("train", "Fit a GS-BART model");
    train->add_option("--data", data, "CSV data file")->required();
    train->add_option("--schema", schema, "schema key=value file")->required();
    train->add_option("--config", config, "run config key=value file")->required();
    train->add_option("--out", out, "output model store path")->required();

    auto* predict = app.add_subcommand("predict", "Posterior predictive summaries");
    predict->add_option("--model-store", store, "trained model store")->required();
    predict->add_option("--data", data, "CSV data file (same rows as training)")->required();
    predict->add_option("--out", out, "output TSV path")->required();

    auto* importance = app.add_subcommand("importance", "Variable importance counts");
    importance->add_option("--model-store", store, "trained model store")->required();
    importance->add_option("--out", out, "output TSV path")->required();

    auto* pd = app.add_subcommand("pd", "Partial dependence of one feature");
    pd->add_option("--model-store", store, "trained model store")->required();
    pd->add_option("--data", data, "CSV data file (same rows as training)")->required();
    pd->add_option("--feature", feature, "chain-backed feature name")->required();
    pd->add_option("--grid", grid, "lo:hi:steps or comma separated values");
    pd->add_option("--out", out, "output TSV path")->required();

    auto* synth = app.add_subcommand("synth", "Generate synthetic data");
    synth->add_option("--kind", kind, "friedman | chain-step | graph-step");
    synth->add_option("--n", n, "number of samples");
    synth->add_option("--sigma", sigma, "noise standard deviation");
    synth->add_option("--seed", seed, "random seed");
    synth->add_option("--out", out, "output CSV path")->required();

    auto* diag = app.add_subcommand("diag", "Trace, ESS, and coverage diagnostics");
    diag->add_option("--model-store", store, "trained model store")->required();
    diag->add_option("--data", data, "CSV data file (same rows as training)")->required();
    diag->add_option("--out", out, "output TSV path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(data, schema, config, out);
        if (predict->parsed()) return cmd_predict(store, data, out);
        if (importance->parsed()) return cmd_importance(store, out);
        if (pd->parsed()) return cmd_pd(store, data, feature, grid, out);
        if (synth->parsed()) return cmd_synth(kind, n, sigma, seed, out);
        if (diag->parsed()) return cmd_diag(store, data, out);
    } catch (const gsbart::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
