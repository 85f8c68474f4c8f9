#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "gsbart/common.hpp"
#include "gsbart/predict.hpp"

namespace gsbart {

// Effective sample size by the initial-positive-sequence rule: sum
// autocorrelations in pairs until a pair sum turns nonpositive. A constant
// chain has no defined autocorrelation; it is reported as length n with a flag.
struct EssResult {
    double ess = 0.0;
    bool constant_chain = false;
};

inline EssResult effective_sample_size(const std::vector<double>& chain) {
    const std::size_t n = chain.size();
    if (n == 0) throw ValidationError("effective_sample_size: empty chain");
    double mean = 0.0;
    for (double v : chain) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : chain) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (var <= 1e-20 * (1.0 + mean * mean) || n == 1) return {static_cast<double>(n), true};

    auto rho = [&](std::size_t lag) {
        double c = 0.0;
        for (std::size_t i = 0; i + lag < n; ++i) c += (chain[i] - mean) * (chain[i + lag] - mean);
        return c / (static_cast<double>(n) * var);
    };
    double tail = 0.0;
    for (std::size_t t = 1; 2 * t < n; ++t) {
        const double pair = rho(2 * t - 1) + rho(2 * t);
        if (pair <= 0.0) break;
        tail += pair;
    }
    const double denom = 1.0 + 2.0 * tail;
    return {static_cast<double>(n) / std::max(denom, 1e-12), false};
}

struct DiagnosticsReport {
    std::vector<std::vector<double>> trace;  // per class, per sweep (from the store)
    std::string trace_metric;
    std::vector<double> ess_test;            // per test sample (original row order)
    std::vector<int> ess_rows;               // original rows the entries refer to
    double mean_ess = 0.0;
    bool any_constant_chain = false;
    double coverage95 = std::nan("");        // vs truth column when present
    double mean_hdi_width = std::nan("");
};

// Test-sample chain diagnostics from the stored ensembles plus the per-sweep
// trace recorded during training. Coverage is measured against the dataset's
// truth column when the schema provides one.
inline DiagnosticsReport diagnostics(const PosteriorStore& store, const Dataset& ds,
                                     const std::vector<Arborescence>& graphs) {
    if (store.ensembles.empty() || store.kept_sweeps() == 0)
        throw ValidationError("diagnostics: posterior store is empty");
    DiagnosticsReport rep;
    rep.trace = store.trace;
    rep.trace_metric = store.trace_metric;

    const int n_ensembles = static_cast<int>(store.ensembles.size());
    std::vector<std::vector<std::vector<double>>> all_draws;  // per ensemble
    for (int c = 0; c < n_ensembles; ++c) all_draws.push_back(phi_draws(store, c, graphs));
    const std::size_t m = all_draws[0].size();

    std::vector<double> chain(m);
    double ess_sum = 0.0;
    long covered = 0, counted = 0;
    double width_sum = 0.0;
    for (int i = store.n_train; i < store.n_total; ++i) {
        // For classification the chain of the first class stands in; ESS is a
        // per-sample mixing summary, not a class-specific quantity.
        for (std::size_t d = 0; d < m; ++d) chain[d] = all_draws[0][d][i];
        const EssResult e = effective_sample_size(chain);
        rep.ess_test.push_back(e.ess);
        rep.ess_rows.push_back(store.order[i]);
        rep.any_constant_chain = rep.any_constant_chain || e.constant_chain;
        ess_sum += e.ess;

        if (!ds.truth.empty() && store.model != "classification") {
            std::vector<double> scaled(m);
            for (std::size_t d = 0; d < m; ++d)
                scaled[d] = store.model == "normal"
                                ? chain[d] * store.y_range + store.y_mid
                                : chain[d];
            const Interval iv = hdi(scaled, 0.95);
            const double truth = ds.truth[store.order[i]];
            covered += (truth >= iv.lo && truth <= iv.hi);
            width_sum += iv.hi - iv.lo;
            ++counted;
        }
    }
    rep.mean_ess = ess_sum / std::max<std::size_t>(1, rep.ess_test.size());
    if (counted > 0) {
        rep.coverage95 = static_cast<double>(covered) / counted;
        rep.mean_hdi_width = width_sum / counted;
    }
    return rep;
}

}  // namespace gsbart
