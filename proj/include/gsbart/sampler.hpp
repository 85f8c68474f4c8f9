#pragma once

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gsbart/common.hpp"
#include "gsbart/config.hpp"
#include "gsbart/engine.hpp"
#include "gsbart/iit.hpp"
#include "gsbart/likelihood.hpp"
#include "gsbart/posterior.hpp"
#include "gsbart/tree.hpp"

namespace gsbart {

// One state visited by the rejection-free chain, with its importance weight
// ingredients: log(1/Z) plus, for non-Gaussian models, the exact-vs-quadratic
// log-likelihood correction at leaf weights drawn from the surrogate posterior.
struct VisitedState {
    DecisionTree tree;
    std::vector<double> leaf_weights;  // aligned with tree.leaf_ids()
    double log_inv_Z = 0.0;
    double log_correction = 0.0;
};

namespace detail {

inline std::vector<double> draw_leaf_weights(const DecisionTree& tree, const GradientTable& grad,
                                             const PriorConfig& prior, Rng& rng) {
    std::vector<double> out;
    for (int leaf : tree.leaf_ids())
        out.push_back(sample_leaf_weight(leaf_stats(tree.node(leaf).train_samples, grad), prior, rng));
    return out;
}

// sum_i [ L(phi_-t,i + mu) - Lhat(phi_-t,i + mu) ] over training samples,
// where Lhat is the quadratic expansion recorded in the gradient table.
// Identically zero for the normal model.
inline double exact_minus_quadratic(const ResponseModel& model, const std::vector<double>& y,
                                    const GradientTable& grad, const DecisionTree& tree,
                                    const std::vector<double>& leaf_weights) {
    const auto leaves = tree.leaf_ids();
    double total = 0.0;
    for (std::size_t k = 0; k < leaves.size(); ++k) {
        const double mu = leaf_weights[k];
        for (int i : tree.node(leaves[k]).train_samples) {
            const double phi_new = grad.phi_hat[i] - grad.phi_t_hat[i] + mu;
            const double step = mu - grad.phi_t_hat[i];
            const double lhat = exact_log_likelihood(model, y[i], grad.phi_hat[i]) +
                                step * grad.ldot[i] + 0.5 * step * step * grad.lddot[i];
            total += exact_log_likelihood(model, y[i], phi_new) - lhat;
        }
    }
    return total;
}

}  // namespace detail

// Draw one decision tree (and its leaf weights) for weak learner t: grow a
// rejection-free chain of K informed moves from the root, then resample one
// visited state with weight (1/Z) * prod(L/Lhat). For the normal model the
// correction factor is identically one.
inline std::pair<DecisionTree, std::vector<double>> sample_tree(
    int n_train, int n_total, int iit_steps, const std::vector<Arborescence>& graphs,
    const GradientTable& grad, const ResponseModel& model, const std::vector<double>& y,
    const PriorConfig& prior, int depth_cap, unsigned workers, std::uint64_t seed) {
    if (iit_steps < 1) throw ValidationError("sample_tree: K must be >= 1");
    Rng rng(seed);
    const bool gaussian = model.kind == ModelKind::Normal;

    DecisionTree tree(n_train, n_total);
    auto scans = scan_all_graphs(graphs, tree, grad, prior, workers);
    Neighborhood nb = enumerate_moves(tree, scans, graphs, grad, prior, depth_cap);

    std::vector<VisitedState> visited;
    visited.reserve(iit_steps);
    for (int step = 0; step < iit_steps; ++step) {
        std::vector<double> etas;
        etas.reserve(nb.moves.size());
        for (const auto& m : nb.moves) etas.push_back(m.log_eta);
        const Move& mv = nb.moves[sample_log_weights(etas, rng)];

        if (mv.kind == Move::Kind::Split) {
            // The chosen cell stands for its equivalent edge set; realize one
            // member uniformly (test-sample routing may differ, training
            // bipartition never does).
            const auto types = scans[mv.rule.graph_id].table.type_column(mv.leaf_ordinal);
            GraphSplitRule rule = mv.rule;
            rule.edge_vertex =
                resolve_equivalent_edge(graphs[mv.rule.graph_id], types, mv.rule.edge_vertex, rng);
            tree.apply_split(mv.node_id, rule, graphs);
        } else {
            tree.apply_merge(mv.node_id);
        }

        scans = scan_all_graphs(graphs, tree, grad, prior, workers);
        nb = enumerate_moves(tree, scans, graphs, grad, prior, depth_cap);

        VisitedState vs;
        vs.tree = tree;
        vs.log_inv_Z = -nb.log_Z;
        if (!gaussian) {
            vs.leaf_weights = detail::draw_leaf_weights(tree, grad, prior, rng);
            vs.log_correction = detail::exact_minus_quadratic(model, y, grad, tree, vs.leaf_weights);
        }
        visited.push_back(std::move(vs));
    }

    std::vector<double> logw;
    logw.reserve(visited.size());
    for (const auto& v : visited) logw.push_back(v.log_inv_Z + v.log_correction);
    VisitedState& chosen = visited[sample_log_weights(logw, rng)];
    if (gaussian)
        chosen.leaf_weights = detail::draw_leaf_weights(chosen.tree, grad, prior, rng);

    const auto leaves = chosen.tree.leaf_ids();
    for (std::size_t k = 0; k < leaves.size(); ++k)
        chosen.tree.set_leaf_weight(leaves[k], chosen.leaf_weights[k]);
    return {std::move(chosen.tree), std::move(chosen.leaf_weights)};
}

// Mutable ensemble state across Gibbs sweeps.
struct SamplerState {
    ResponseModel model;  // sigma updated in place for the normal model
    PriorConfig prior;    // sigma_mu2 updated in place
    std::vector<double> y;  // training response on the working scale
    int n_train = 0;
    int n_total = 0;
    std::vector<DecisionTree> trees;
    std::vector<std::vector<double>> phi_tree;  // [t][sample], all samples
    std::vector<double> phi_total;              // all samples
    int sweep = 0;

    static SamplerState init(ResponseModel model, PriorConfig prior, std::vector<double> y,
                             int n_train, int n_total, int n_trees) {
        SamplerState s;
        s.model = std::move(model);
        s.prior = prior;
        s.y = std::move(y);
        s.n_train = n_train;
        s.n_total = n_total;
        s.trees.assign(n_trees, DecisionTree(n_train, n_total));
        s.phi_tree.assign(n_trees, std::vector<double>(n_total, 0.0));
        s.phi_total.assign(n_total, 0.0);
        return s;
    }
};

// One deterministic-sweep Gibbs pass: every tree is regrown from the root by
// the IIT sampler against the current residual fit, then sigma_mu^2 and (for
// the normal model) sigma^2 are refreshed from their conjugate posteriors.
inline void gibbs_sweep(SamplerState& s, const std::vector<Arborescence>& graphs,
                        const RunConfig& cfg) {
    const int T = static_cast<int>(s.trees.size());
    std::vector<double> phi_train(s.n_train);

    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < s.n_train; ++i) phi_train[i] = s.phi_total[i];
        std::vector<double> phi_t_train(s.phi_tree[t].begin(), s.phi_tree[t].begin() + s.n_train);
        const GradientTable grad = GradientTable::build(s.model, s.y, phi_train, phi_t_train);

        const std::uint64_t tree_seed =
            derive_seed(cfg.seed, 0x5eedULL, static_cast<std::uint64_t>(s.sweep),
                        static_cast<std::uint64_t>(t));

        // Column subsampling hook: each tree update may see a random subset
        // of the candidate graphs; rule graph ids are remapped back after.
        DecisionTree tree;
        std::vector<double> weights;
        if (cfg.feature_subsample >= 1.0 || graphs.size() <= 1) {
            std::tie(tree, weights) =
                sample_tree(s.n_train, s.n_total, cfg.iit_steps, graphs, grad, s.model, s.y,
                            s.prior, cfg.depth_cap, cfg.workers, tree_seed);
        } else {
            Rng sub_rng(derive_seed(cfg.seed, 0x50b5ULL, static_cast<std::uint64_t>(s.sweep),
                                    static_cast<std::uint64_t>(t)));
            const std::size_t keep = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::ceil(cfg.feature_subsample * graphs.size())));
            std::vector<int> ids(graphs.size());
            std::iota(ids.begin(), ids.end(), 0);
            for (std::size_t i = 0; i < keep; ++i)
                std::swap(ids[i], ids[i + sub_rng.uniform_index(ids.size() - i)]);
            ids.resize(keep);
            std::sort(ids.begin(), ids.end());
            std::vector<Arborescence> subset;
            for (int id : ids) subset.push_back(graphs[id]);
            std::tie(tree, weights) =
                sample_tree(s.n_train, s.n_total, cfg.iit_steps, subset, grad, s.model, s.y,
                            s.prior, cfg.depth_cap, cfg.workers, tree_seed);
            tree.remap_graph_ids(ids);
        }

        const std::vector<double> fit = tree.fitted_values();
        for (int i = 0; i < s.n_total; ++i) s.phi_total[i] += fit[i] - s.phi_tree[t][i];
        s.phi_tree[t] = fit;
        s.trees[t] = std::move(tree);
    }

    // Re-derive the totals exactly once per sweep so phi_total is always the
    // literal sum of per-tree contributions.
    std::fill(s.phi_total.begin(), s.phi_total.end(), 0.0);
    for (int u = 0; u < T; ++u)
        for (int i = 0; i < s.n_total; ++i) s.phi_total[i] += s.phi_tree[u][i];

    Rng hyper_rng(derive_seed(cfg.seed, 0x4a9ULL, static_cast<std::uint64_t>(s.sweep), 999));
    std::vector<double> all_weights;
    for (const auto& tree : s.trees)
        for (int leaf : tree.leaf_ids()) all_weights.push_back(tree.node(leaf).leaf_weight);
    s.prior.sigma_mu2 = sample_sigma_mu2(all_weights, s.prior, hyper_rng);

    if (s.model.kind == ModelKind::Normal) {
        std::vector<double> resid(s.n_train);
        for (int i = 0; i < s.n_train; ++i) resid[i] = s.y[i] - s.phi_total[i];
        s.model.sigma = std::sqrt(sample_sigma2_normal(resid, s.prior, hyper_rng));
    }
    ++s.sweep;
}

}  // namespace gsbart
