#pragma once

#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "gsbart/common.hpp"
#include "gsbart/dataset.hpp"
#include "gsbart/likelihood.hpp"

namespace gsbart {

// One candidate-graph recipe. Chain graphs come from dataset columns;
// structural graphs come from edge-list + bin-assignment files and spawn
// `arborescences` random spanning trees each.
struct GraphSpec {
    enum class Kind { Chain, Structural };
    Kind kind = Kind::Chain;
    std::string label;        // feature column name, or structural label
    int chain_bins = 100;     // chain only
    std::string edge_file;    // structural only
    std::string bin_file;     // structural only
    int arborescences = 5;    // structural only
};

struct RunConfig {
    int trees = 50;
    int sweeps = 215;
    int burnin = 15;
    int iit_steps = 20;      // K informed steps per tree per sweep
    double alpha = 0.95;
    double beta = 2.0;
    double a = 3.0;
    double b = -1.0;         // <= 0 means var(y)/trees at fit time
    double nu = 3.0;
    double mu0 = 0.0;
    std::uint64_t seed = 42;
    std::string model = "normal";  // normal | count | classification
    int depth_cap = 10;
    unsigned workers = 1;
    double test_fraction = 0.2;    // used when the schema has no split column
    std::uint64_t split_seed = 0;  // 0 means derive from seed
    double feature_subsample = 1.0;
    int default_chain_bins = 100;
    std::vector<GraphSpec> graphs;  // explicit specs; features without one get a default chain

    void validate() const {
        if (trees < 1) throw ValidationError("config: trees must be >= 1");
        if (sweeps < 0 || burnin < 0 || burnin > sweeps)
            throw ValidationError("config: need 0 <= burnin <= sweeps");
        if (iit_steps < 1) throw ValidationError("config: k must be >= 1");
        if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("config: alpha must be in (0,1)");
        if (beta < 0.0) throw ValidationError("config: beta must be >= 0");
        if (a <= 0.0) throw ValidationError("config: a must be > 0");
        if (depth_cap < 1) throw ValidationError("config: depth_cap must be >= 1");
        if (model != "normal" && model != "count" && model != "classification")
            throw ValidationError("config: unknown model '" + model + "'");
        if (!(test_fraction > 0.0 && test_fraction < 1.0))
            throw ValidationError("config: test_fraction must be in (0,1)");
        if (!(feature_subsample > 0.0 && feature_subsample <= 1.0))
            throw ValidationError("config: feature_subsample must be in (0,1]");
    }
};

inline unsigned workers_from_env() {
    if (const char* env = std::getenv("GSBART_WORKERS")) {
        const long w = std::strtol(env, nullptr, 10);
        if (w >= 1) return static_cast<unsigned>(w);
    }
    return 1;
}

// Keys: trees, sweeps, burnin, k, alpha, beta, a, b, nu, mu0, seed, model,
// depth_cap, workers, test_fraction, split_seed, feature_subsample,
// default_chain_bins, and per-feature graph specs of the form
//   graph.<column> = chain:<bins>
//   graph.<label>  = tree:<edge_file>:<bin_file>:<count>
// The worker count defaults to GSBART_WORKERS; the config key overrides it.
inline RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    cfg.workers = workers_from_env();
    auto kv = parse_key_values(path);

    auto geti = [&](const char* key, int& dst) {
        if (kv.count(key)) dst = std::stoi(kv[key]);
    };
    auto getd = [&](const char* key, double& dst) {
        if (kv.count(key)) dst = std::stod(kv[key]);
    };
    geti("trees", cfg.trees);
    geti("sweeps", cfg.sweeps);
    geti("burnin", cfg.burnin);
    geti("k", cfg.iit_steps);
    getd("alpha", cfg.alpha);
    getd("beta", cfg.beta);
    getd("a", cfg.a);
    getd("b", cfg.b);
    getd("nu", cfg.nu);
    getd("mu0", cfg.mu0);
    geti("depth_cap", cfg.depth_cap);
    getd("test_fraction", cfg.test_fraction);
    getd("feature_subsample", cfg.feature_subsample);
    geti("default_chain_bins", cfg.default_chain_bins);
    if (kv.count("seed")) cfg.seed = std::stoull(kv["seed"]);
    if (kv.count("split_seed")) cfg.split_seed = std::stoull(kv["split_seed"]);
    if (kv.count("model")) cfg.model = kv["model"];
    if (kv.count("workers")) {
        const int w = std::stoi(kv["workers"]);
        if (w < 1) throw ValidationError("config: workers must be >= 1");
        cfg.workers = static_cast<unsigned>(w);
    }

    for (const auto& [key, value] : kv) {
        if (key.rfind("graph.", 0) != 0) continue;
        GraphSpec spec;
        spec.label = key.substr(6);
        const auto parts = split_list(value, ':');
        if (parts.empty()) throw ValidationError("config: empty graph spec for " + key);
        if (parts[0] == "chain") {
            spec.kind = GraphSpec::Kind::Chain;
            if (parts.size() > 1) spec.chain_bins = std::stoi(parts[1]);
            if (spec.chain_bins < 2) throw ValidationError("config: chain bins must be >= 2");
        } else if (parts[0] == "tree") {
            if (parts.size() < 3)
                throw ValidationError("config: tree spec needs tree:<edges>:<bins>[:count]");
            spec.kind = GraphSpec::Kind::Structural;
            spec.edge_file = parts[1];
            spec.bin_file = parts[2];
            if (parts.size() > 3) spec.arborescences = std::stoi(parts[3]);
            if (spec.arborescences < 1)
                throw ValidationError("config: arborescence count must be >= 1");
        } else {
            throw ValidationError("config: unknown graph spec kind '" + parts[0] + "'");
        }
        cfg.graphs.push_back(spec);
    }
    cfg.validate();
    return cfg;
}

}  // namespace gsbart
