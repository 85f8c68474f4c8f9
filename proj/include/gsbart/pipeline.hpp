#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gsbart/config.hpp"
#include "gsbart/dataset.hpp"
#include "gsbart/posterior.hpp"
#include "gsbart/sampler.hpp"
#include "gsbart/stats.hpp"

namespace gsbart {

// Dataset reordered so training rows come first; graphs and trees index
// samples by this internal order.
struct OrderedData {
    std::vector<int> order;  // internal id -> original row
    int n_train = 0;
    int n_total = 0;

    template <typename T>
    std::vector<T> reorder(const std::vector<T>& by_row) const {
        std::vector<T> out(order.size());
        for (std::size_t i = 0; i < order.size(); ++i) out[i] = by_row[order[i]];
        return out;
    }
};

inline OrderedData make_order(const Dataset& ds, const RunConfig& cfg) {
    std::vector<char> test(ds.n, 0);
    if (!ds.is_test.empty()) {
        test.assign(ds.is_test.begin(), ds.is_test.end());
    } else {
        const std::uint64_t sseed =
            cfg.split_seed ? cfg.split_seed : derive_seed(cfg.seed, 0x511fULL);
        Rng rng(sseed);
        std::vector<int> ids(ds.n);
        std::iota(ids.begin(), ids.end(), 0);
        for (int i = 0; i < ds.n; ++i)
            std::swap(ids[i], ids[i + static_cast<int>(rng.uniform_index(ds.n - i))]);
        const int n_test = std::max(1, static_cast<int>(std::lround(cfg.test_fraction * ds.n)));
        for (int i = 0; i < n_test; ++i) test[ids[i]] = 1;
    }
    OrderedData od;
    for (int i = 0; i < ds.n; ++i)
        if (!test[i]) od.order.push_back(i);
    od.n_train = static_cast<int>(od.order.size());
    for (int i = 0; i < ds.n; ++i)
        if (test[i]) od.order.push_back(i);
    od.n_total = ds.n;
    if (od.n_train == 0 || od.n_train == od.n_total)
        throw ValidationError("train/test split leaves one side empty");
    return od;
}

// Build the shared candidate graph set: one chain per feature column (default
// bins unless a spec overrides) plus M random arborescences per structural
// spec. Returns graphs plus blueprints for the model store.
struct GraphSet {
    std::vector<Arborescence> graphs;
    std::vector<GraphBlueprint> blueprints;
    std::map<std::string, std::vector<int>> bin_assignments;  // by original row
};

inline GraphSet build_graphs(const Dataset& ds, const Schema& schema, const RunConfig& cfg,
                             const OrderedData& od) {
    GraphSet gs;
    std::map<std::string, const GraphSpec*> spec_of;
    std::vector<const GraphSpec*> structural;
    for (const auto& spec : cfg.graphs) {
        if (spec.kind == GraphSpec::Kind::Chain)
            spec_of[spec.label] = &spec;
        else
            structural.push_back(&spec);
    }

    for (const auto& fname : schema.features) {
        int bins = cfg.default_chain_bins;
        if (auto it = spec_of.find(fname); it != spec_of.end()) bins = it->second->chain_bins;
        const std::vector<double> values = od.reorder(ds.feature(fname));
        bins = std::min<int>(bins, std::max<int>(2, static_cast<int>(values.size())));
        const auto cuts = default_cut_points(values, bins);
        gs.graphs.push_back(build_chain_graph(values, cuts, fname));
        GraphBlueprint bp;
        bp.kind = GraphBlueprint::Kind::Chain;
        bp.feature_label = fname;
        bp.cut_points = cuts;
        bp.value_lo = *std::min_element(values.begin(), values.end());
        bp.value_hi = *std::max_element(values.begin(), values.end());
        gs.blueprints.push_back(std::move(bp));
    }

    int sidx = 0;
    for (const GraphSpec* spec : structural) {
        StructuralGraph g0 = load_structural_graph(spec->edge_file, spec->bin_file);
        if (static_cast<int>(g0.bin_assignment.size()) != ds.n)
            throw ValidationError("bin assignment for '" + spec->label + "' has " +
                                  std::to_string(g0.bin_assignment.size()) + " rows, data has " +
                                  std::to_string(ds.n));
        gs.bin_assignments[spec->label] = g0.bin_assignment;  // original row order
        StructuralGraph internal = g0;
        internal.bin_assignment = od.reorder(g0.bin_assignment);
        for (int m = 0; m < spec->arborescences; ++m) {
            const std::uint64_t aseed = derive_seed(cfg.seed, 0xa9b0ULL,
                                                    static_cast<std::uint64_t>(sidx),
                                                    static_cast<std::uint64_t>(m));
            gs.graphs.push_back(sample_arborescence(internal, aseed, spec->label));
            GraphBlueprint bp;
            bp.kind = GraphBlueprint::Kind::Arborescence;
            bp.feature_label = spec->label;
            bp.bin_label = spec->label;
            bp.parent = gs.graphs.back().parent;
            bp.root = gs.graphs.back().root;
            gs.blueprints.push_back(std::move(bp));
        }
        ++sidx;
    }
    return gs;
}

namespace detail {

inline double variance(const std::vector<double>& x) {
    if (x.empty()) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return x.size() > 1 ? ss / static_cast<double>(x.size() - 1) : 0.0;
}

}  // namespace detail

// Hyperparameters from config; b defaults to var(y)/T on the working scale.
inline PriorConfig make_prior(const RunConfig& cfg, const std::vector<double>& y_working,
                              int n_train) {
    PriorConfig p;
    p.alpha = cfg.alpha;
    p.beta = cfg.beta;
    p.mu0 = cfg.mu0;
    p.a = cfg.a;
    p.nu = cfg.nu;
    if (cfg.b > 0.0) {
        p.b = cfg.b;
    } else {
        std::vector<double> y_train(y_working.begin(), y_working.begin() + n_train);
        p.b = std::max(detail::variance(y_train), 1e-12) / static_cast<double>(cfg.trees);
    }
    p.validate();
    return p;
}

// Fit one GS-BART ensemble (one response vector) and record kept sweeps into
// `entries`. y_all is on the working scale over all internal samples; only
// the training prefix enters the likelihood. trace_fn(phi_total) is evaluated
// after every sweep.
template <typename TraceFn>
void run_ensemble(const std::vector<double>& y_all, const ResponseModel& model_init,
                  PriorConfig prior, const std::vector<Arborescence>& graphs,
                  const RunConfig& cfg, int n_train, int n_total,
                  std::vector<PosteriorStore::Entry>& entries, std::vector<double>& trace,
                  std::map<std::string, long>& importance, const TraceFn& trace_fn) {
    std::vector<double> y_train(y_all.begin(), y_all.begin() + n_train);
    SamplerState s =
        SamplerState::init(model_init, prior, std::move(y_train), n_train, n_total, cfg.trees);

    for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
        gibbs_sweep(s, graphs, cfg);
        trace.push_back(trace_fn(s));
        if (sweep >= cfg.burnin) {
            PosteriorStore::Entry e;
            e.sweep = sweep;
            e.sigma = s.model.sigma;
            e.sigma_mu2 = s.prior.sigma_mu2;
            for (const auto& tree : s.trees) {
                std::ostringstream os;
                os.precision(17);
                tree.serialize(os);
                e.trees.push_back(os.str());
                for (const auto& node : tree.nodes())
                    if (node.kind == TreeNode::Kind::Internal)
                        ++importance[graphs[node.rule.graph_id].feature_label];
            }
            entries.push_back(std::move(e));
        }
    }
}

// Full training entry point behind the `train` CLI command.
inline PosteriorStore run_training(const Dataset& ds, const Schema& schema, const RunConfig& cfg,
                                   const std::string& schema_text) {
    cfg.validate();
    if (cfg.model == "normal" || cfg.model == "count") {
        if (!ds.response_numeric)
            throw ValidationError("response column '" + schema.response +
                                  "' must be numeric for the " + cfg.model + " model");
    }
    if (cfg.model == "count")
        for (double v : ds.response_num)
            if (v < 0.0) throw ValidationError("count model: response must be nonnegative");

    const OrderedData od = make_order(ds, cfg);
    GraphSet gs = build_graphs(ds, schema, cfg, od);

    PosteriorStore store;
    store.model = cfg.model;
    store.n_train = od.n_train;
    store.n_total = od.n_total;
    store.order = od.order;
    store.graphs = gs.blueprints;
    store.bin_assignments = gs.bin_assignments;
    store.schema_text = schema_text;
    for (const auto& g : gs.graphs) store.importance[g.feature_label];  // seed zero counts

    std::vector<double> offset_internal;
    if (!ds.offset.empty()) offset_internal = od.reorder(ds.offset);

    const double k_shrink = 2.0 * std::sqrt(static_cast<double>(cfg.trees));

    if (cfg.model == "classification") {
        std::set<std::string> labels(ds.response_raw.begin(), ds.response_raw.end());
        if (labels.size() < 2) throw ValidationError("classification: need at least 2 classes");
        store.class_labels.assign(labels.begin(), labels.end());
        store.trace_metric = "loglik";
        const auto raw_internal = od.reorder(ds.response_raw);

        for (std::size_t c = 0; c < store.class_labels.size(); ++c) {
            std::vector<double> y(od.n_total);
            for (int i = 0; i < od.n_total; ++i)
                y[i] = raw_internal[i] == store.class_labels[c] ? 1.0 : 0.0;

            ResponseModel model;
            model.kind = ModelKind::Logistic;
            PriorConfig prior = make_prior(cfg, y, od.n_train);
            prior.sigma_mu2 = std::pow(3.0 / k_shrink, 2.0);

            RunConfig class_cfg = cfg;
            class_cfg.seed = derive_seed(cfg.seed, 0xc1a5ULL, c);
            store.ensembles.emplace_back();
            store.trace.emplace_back();
            run_ensemble(y, model, prior, gs.graphs, class_cfg, od.n_train, od.n_total,
                         store.ensembles.back(), store.trace.back(), store.importance,
                         [&](const SamplerState& s) {
                             // mean held-out log likelihood of the binary fit
                             double ll = 0.0;
                             for (int i = od.n_train; i < od.n_total; ++i)
                                 ll += exact_log_likelihood(s.model, y[i], s.phi_total[i]);
                             return ll / std::max(1, od.n_total - od.n_train);
                         });
        }
        return store;
    }

    std::vector<double> y_internal = od.reorder(ds.response_num);

    if (cfg.model == "normal") {
        double lo = y_internal[0], hi = y_internal[0];
        for (int i = 0; i < od.n_train; ++i) {
            lo = std::min(lo, y_internal[i]);
            hi = std::max(hi, y_internal[i]);
        }
        if (!(hi > lo)) throw ValidationError("normal model: training response is constant");
        store.y_mid = (lo + hi) / 2.0;
        store.y_range = hi - lo;
        std::vector<double> y(od.n_total);
        for (int i = 0; i < od.n_total; ++i) y[i] = (y_internal[i] - store.y_mid) / store.y_range;

        ResponseModel model;
        model.kind = ModelKind::Normal;
        std::vector<double> y_train(y.begin(), y.begin() + od.n_train);
        const double sd_hat = std::sqrt(std::max(detail::variance(y_train), 1e-12));
        model.sigma = sd_hat;
        PriorConfig prior = make_prior(cfg, y, od.n_train);
        prior.sigma_mu2 = std::pow(0.5 / k_shrink, 2.0);
        prior.lambda = calibrate_lambda(sd_hat, prior.nu);

        store.trace_metric = "mspe";
        store.ensembles.emplace_back();
        store.trace.emplace_back();
        run_ensemble(y, model, prior, gs.graphs, cfg, od.n_train, od.n_total,
                     store.ensembles.back(), store.trace.back(), store.importance,
                     [&](const SamplerState& s) {
                         double mspe = 0.0;
                         for (int i = od.n_train; i < od.n_total; ++i) {
                             const double pred = s.phi_total[i] * store.y_range + store.y_mid;
                             const double err = pred - y_internal[i];
                             mspe += err * err;
                         }
                         return mspe / std::max(1, od.n_total - od.n_train);
                     });
        return store;
    }

    // count model
    ResponseModel model;
    model.kind = ModelKind::Count;
    model.offset = offset_internal.empty() ? nullptr : &offset_internal;
    PriorConfig prior = make_prior(cfg, y_internal, od.n_train);
    prior.sigma_mu2 = std::pow(6.0 / k_shrink, 2.0);

    store.trace_metric = "rmspe";
    store.ensembles.emplace_back();
    store.trace.emplace_back();
    run_ensemble(y_internal, model, prior, gs.graphs, cfg, od.n_train, od.n_total,
                 store.ensembles.back(), store.trace.back(), store.importance,
                 [&](const SamplerState& s) {
                     double mspe = 0.0;
                     for (int i = od.n_train; i < od.n_total; ++i) {
                         const double off =
                             offset_internal.empty() ? 0.0 : offset_internal[i];
                         const double rate = std::exp(std::clamp(
                             s.phi_total[i] + off, -kCountPhiClamp, kCountPhiClamp));
                         const double err = rate - y_internal[i];
                         mspe += err * err;
                     }
                     return std::sqrt(mspe / std::max(1, od.n_total - od.n_train));
                 });
    return store;
}

}  // namespace gsbart
