#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gsbart/dataset.hpp"
#include "gsbart/posterior.hpp"
#include "gsbart/tree.hpp"

namespace gsbart {

// Highest-density interval from draws: the shortest window containing
// ceil(level * m) sorted draws.
struct Interval {
    double lo = 0.0, hi = 0.0;
};

inline Interval hdi(std::vector<double> draws, double level = 0.95) {
    if (draws.empty()) throw ValidationError("hdi: no draws");
    std::sort(draws.begin(), draws.end());
    const std::size_t m = draws.size();
    const std::size_t w = std::min<std::size_t>(
        m, static_cast<std::size_t>(std::ceil(level * static_cast<double>(m))));
    std::size_t best = 0;
    double best_width = draws[w - 1] - draws[0];
    for (std::size_t i = 0; i + w <= m; ++i) {
        const double width = draws[i + w - 1] - draws[i];
        if (width < best_width) {
            best_width = width;
            best = i;
        }
    }
    return {draws[best], draws[best + w - 1]};
}

// phi draws for every internal sample from one ensemble: draws[d][i].
// Trees are deserialized once and replayed through the stored rules, so test
// samples route exactly as they did during training.
inline std::vector<std::vector<double>> phi_draws(const PosteriorStore& store, int ensemble_index,
                                                  const std::vector<Arborescence>& graphs) {
    if (store.ensembles.empty() || store.ensembles[ensemble_index].empty())
        throw ValidationError("posterior store has no kept sweeps");
    const auto& entries = store.ensembles[ensemble_index];
    std::vector<std::vector<double>> draws(entries.size(),
                                           std::vector<double>(store.n_total, 0.0));
    for (std::size_t d = 0; d < entries.size(); ++d) {
        for (const auto& tree_text : entries[d].trees) {
            std::istringstream is(tree_text);
            const DecisionTree tree =
                DecisionTree::deserialize(is, store.n_train, store.n_total, graphs);
            const auto member = tree.replay_membership(graphs);
            for (int i = 0; i < store.n_total; ++i)
                draws[d][i] += tree.node(member[i]).leaf_weight;
        }
    }
    return draws;
}

struct PredictionRow {
    int row = 0;              // original dataset row
    bool is_test = false;
    double mean = 0.0;        // posterior mean of phi (response scale)
    Interval hdi95;
    std::string class_label;  // classification only
    std::vector<double> class_probs;
};

struct Predictions {
    std::vector<PredictionRow> rows;          // in original row order
    std::vector<std::string> class_labels;
    std::vector<std::vector<double>> draws;   // [draw][internal sample], response scale
};

// Posterior predictive summaries for every sample. Normal: phi unscaled to the
// original units. Count: rate exp(phi + offset). Classification: softmax of
// the per-class posterior mean fits.
inline Predictions predict(const PosteriorStore& store, const Dataset& ds,
                           const std::vector<Arborescence>& graphs) {
    Predictions out;
    const int n = store.n_total;
    std::vector<int> internal_of(n);  // original row -> internal id
    for (int i = 0; i < n; ++i) internal_of[store.order[i]] = i;

    if (store.model == "classification") {
        out.class_labels = store.class_labels;
        const std::size_t C = store.class_labels.size();
        std::vector<std::vector<double>> mean_phi(C, std::vector<double>(n, 0.0));
        for (std::size_t c = 0; c < C; ++c) {
            const auto draws = phi_draws(store, static_cast<int>(c), graphs);
            for (const auto& d : draws)
                for (int i = 0; i < n; ++i) mean_phi[c][i] += d[i] / draws.size();
        }
        for (int row = 0; row < n; ++row) {
            const int i = internal_of[row];
            PredictionRow pr;
            pr.row = row;
            pr.is_test = i >= store.n_train;
            double mx = -1e300;
            for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, mean_phi[c][i]);
            double z = 0.0;
            for (std::size_t c = 0; c < C; ++c) z += std::exp(mean_phi[c][i] - mx);
            std::size_t arg = 0;
            for (std::size_t c = 0; c < C; ++c) {
                pr.class_probs.push_back(std::exp(mean_phi[c][i] - mx) / z);
                if (pr.class_probs[c] > pr.class_probs[arg]) arg = c;  // ties keep the first
            }
            pr.class_label = store.class_labels[arg];
            pr.mean = pr.class_probs[arg];
            out.rows.push_back(std::move(pr));
        }
        return out;
    }

    const auto draws = phi_draws(store, 0, graphs);
    std::vector<double> offset_internal;
    if (store.model == "count" && !ds.offset.empty()) {
        offset_internal.resize(n);
        for (int i = 0; i < n; ++i) offset_internal[i] = ds.offset[store.order[i]];
    }
    out.draws.assign(draws.size(), std::vector<double>(n, 0.0));
    for (std::size_t d = 0; d < draws.size(); ++d)
        for (int i = 0; i < n; ++i) {
            double v = draws[d][i];
            if (store.model == "normal")
                v = v * store.y_range + store.y_mid;
            else
                v = std::exp(std::clamp(v + (offset_internal.empty() ? 0.0 : offset_internal[i]),
                                        -kCountPhiClamp, kCountPhiClamp));
            out.draws[d][i] = v;
        }

    std::vector<double> sample_draws(draws.size());
    for (int row = 0; row < n; ++row) {
        const int i = internal_of[row];
        PredictionRow pr;
        pr.row = row;
        pr.is_test = i >= store.n_train;
        for (std::size_t d = 0; d < draws.size(); ++d) sample_draws[d] = out.draws[d][i];
        double mean = 0.0;
        for (double v : sample_draws) mean += v;
        pr.mean = mean / static_cast<double>(sample_draws.size());
        pr.hdi95 = hdi(sample_draws, 0.95);
        out.rows.push_back(std::move(pr));
    }
    return out;
}

// -------------------------- variable importance ------------------------------

struct ImportanceRow {
    std::string feature;
    long count = 0;
    double share = 0.0;
};

// Split counts per feature label with shares; when no splits were accepted at
// all, shares are reported as zero and `degenerate` is set.
struct ImportanceReport {
    std::vector<ImportanceRow> rows;
    bool degenerate = false;
};

inline ImportanceReport variable_importance(const PosteriorStore& store) {
    if (store.ensembles.empty() || store.kept_sweeps() == 0)
        throw ValidationError("variable_importance: posterior store is empty");
    ImportanceReport rep;
    long total = 0;
    for (const auto& [label, count] : store.importance) total += count;
    rep.degenerate = total == 0;
    for (const auto& [label, count] : store.importance)
        rep.rows.push_back({label, count, rep.degenerate ? 0.0 : static_cast<double>(count) / total});
    std::sort(rep.rows.begin(), rep.rows.end(), [](const auto& a, const auto& b) {
        return a.count != b.count ? a.count > b.count : a.feature < b.feature;
    });
    return rep;
}

// -------------------------- partial dependence -------------------------------

struct PartialDependenceRow {
    double grid = 0.0;
    double mean = 0.0;  // response-scale phi averaged over samples and draws
    Interval hdi95;
};

// For each grid value: force the feature's chain graphs to the grid value's
// bin, re-route every sample, and average phi over samples; the interval is
// over posterior draws of that average. Grid values outside the binned range
// are clamped (reported via `clamped`).
inline std::vector<PartialDependenceRow> partial_dependence(
    const PosteriorStore& store, const std::vector<Arborescence>& base_graphs,
    const std::string& feature, const std::vector<double>& grid, std::vector<double>* clamped) {
    if (store.model == "classification")
        throw ValidationError("partial dependence is defined for normal and count models");
    std::vector<std::size_t> chain_ids;
    double lo = 0.0, hi = 0.0;
    for (std::size_t g = 0; g < store.graphs.size(); ++g)
        if (store.graphs[g].kind == GraphBlueprint::Kind::Chain &&
            store.graphs[g].feature_label == feature) {
            chain_ids.push_back(g);
            lo = store.graphs[g].value_lo;
            hi = store.graphs[g].value_hi;
        }
    if (chain_ids.empty())
        throw ValidationError("feature '" + feature + "' is not backed by a chain graph");

    // Deserialize every kept tree once.
    std::vector<std::vector<DecisionTree>> trees;
    for (const auto& e : store.ensembles.at(0)) {
        std::vector<DecisionTree> ts;
        for (const auto& text : e.trees) {
            std::istringstream is(text);
            ts.push_back(DecisionTree::deserialize(is, store.n_train, store.n_total, base_graphs));
        }
        trees.push_back(std::move(ts));
    }

    std::vector<PartialDependenceRow> out;
    for (double g0 : grid) {
        double g = g0;
        if (g < lo || g > hi) {
            if (clamped) clamped->push_back(g0);
            g = std::clamp(g, lo, hi);
        }
        std::vector<Arborescence> graphs = base_graphs;
        for (std::size_t gi : chain_ids) {
            const auto& cuts = store.graphs[gi].cut_points;
            const int bin = static_cast<int>(std::lower_bound(cuts.begin(), cuts.end(), g) -
                                             cuts.begin());
            std::fill(graphs[gi].vertex_of.begin(), graphs[gi].vertex_of.end(), bin);
        }
        std::vector<double> draw_means;
        for (const auto& ensemble : trees) {
            double total = 0.0;
            for (const auto& tree : ensemble) {
                const auto member = tree.replay_membership(graphs);
                for (int i = 0; i < store.n_total; ++i)
                    total += tree.node(member[i]).leaf_weight;
            }
            double avg = total / static_cast<double>(store.n_total);
            if (store.model == "normal") avg = avg * store.y_range + store.y_mid;
            draw_means.push_back(avg);
        }
        PartialDependenceRow row;
        row.grid = g0;
        double mean = 0.0;
        for (double v : draw_means) mean += v;
        row.mean = mean / static_cast<double>(draw_means.size());
        row.hdi95 = hdi(draw_means, 0.95);
        out.push_back(row);
    }
    return out;
}

}  // namespace gsbart
