#pragma once

#include <cmath>
#include <vector>

#include "gsbart/common.hpp"
#include "gsbart/engine.hpp"
#include "gsbart/graph.hpp"
#include "gsbart/likelihood.hpp"
#include "gsbart/tree.hpp"

namespace gsbart {

// One split or merge proposal with everything the informed weight needs.
struct Move {
    enum class Kind { Split, Merge };
    Kind kind = Kind::Split;
    int node_id = -1;          // leaf to split / internal node to merge
    int leaf_ordinal = -1;     // split only: table column of the leaf
    GraphSplitRule rule;       // split only: canonical valid edge
    double log_lik_ratio = 0.0;
    double log_prior_ratio = 0.0;
    double log_q_fwd = 0.0;
    double log_q_bwd = 0.0;
    double log_eta = kNegInf;
};

// Structure prior ratio of a split at depth d: alpha * (1 - alpha/(2+d)^beta)^2
// * pi_g * pi_e / ((1+d)^beta - alpha). The merge ratio is its reciprocal at
// the merged node's depth.
inline double prior_ratio_split(int depth, double pi_g, double pi_e, double alpha, double beta) {
    const double grow2 = std::pow(2.0 + depth, beta);
    const double grow1 = std::pow(1.0 + depth, beta);
    const double t = 1.0 - alpha / grow2;
    return alpha * t * t * pi_g * pi_e / (grow1 - alpha);
}

inline double log_prior_ratio_split(int depth, double log_pi_g, double log_pi_e, double alpha,
                                    double beta) {
    const double grow2 = std::pow(2.0 + depth, beta);
    const double grow1 = std::pow(1.0 + depth, beta);
    return std::log(alpha) + 2.0 * std::log(1.0 - alpha / grow2) + log_pi_g + log_pi_e -
           std::log(grow1 - alpha);
}

// eta = q_fwd * h(posterior_ratio * q_bwd / q_fwd) with h(x) = sqrt(x),
// assembled in log space.
inline double informed_log_weight(const Move& m) {
    return m.log_q_fwd +
           0.5 * (m.log_lik_ratio + m.log_prior_ratio + m.log_q_bwd - m.log_q_fwd);
}

struct Neighborhood {
    std::vector<Move> moves;
    double log_Z = kNegInf;
    int splittable_leaves = 0;
    bool root_only = false;
};

namespace detail {

// Split/merge selection probabilities for a tree with the given move
// availability: both available -> 1/2 each; a root-only tree always splits;
// with no valid split the merge probability renormalizes to 1.
inline double log_p_split(bool has_split, bool has_merge) {
    if (!has_split) return kNegInf;
    return has_merge ? std::log(0.5) : 0.0;
}
inline double log_p_merge(bool has_split, bool has_merge) {
    if (!has_merge) return kNegInf;
    return has_split ? std::log(0.5) : 0.0;
}

// Does any graph hold a valid edge for a hypothetical leaf made of
// `samples`? Used for the backward probability of split moves when no other
// splittable leaf survives in the post-move tree. A leaf set admits a valid
// edge in an arborescence exactly when it occupies two or more distinct bins:
// cutting below its deepest occupied vertex always yields a bipartition.
inline bool subset_has_valid_edge(const std::vector<int>& samples,
                                  const std::vector<Arborescence>& graphs) {
    for (const auto& g : graphs) {
        if (samples.empty()) continue;
        const int first = g.vertex_of[samples.front()];
        for (int i : samples)
            if (g.vertex_of[i] != first) return true;
    }
    return false;
}

}  // namespace detail

// Enumerate the complete neighborhood of `tree`: one split move per valid
// (leaf, graph, canonical edge) cell and one merge move per second-generation
// internal node, with exact forward and backward proposal probabilities.
inline Neighborhood enumerate_moves(const DecisionTree& tree, const std::vector<GraphScan>& scans,
                                    const std::vector<Arborescence>& graphs,
                                    const GradientTable& grad, const PriorConfig& prior,
                                    int depth_cap) {
    const auto leaves = tree.leaf_ids();
    const int L = static_cast<int>(leaves.size());
    const int P = static_cast<int>(graphs.size());
    Neighborhood nb;
    nb.root_only = (L == 1);

    // Per (graph, leaf) valid-edge counts and per-leaf valid-graph counts.
    std::vector<int> valid_edges(static_cast<std::size_t>(P) * L, 0);
    std::vector<int> valid_graphs(L, 0);
    for (int g = 0; g < P; ++g) {
        const SplitTable& t = scans[g].table;
        for (int v = 0; v < t.n_vertices; ++v)
            for (int k = 0; k < L; ++k)
                if (t.type[t.at(v, k)] == kEdgeValid) ++valid_edges[g * L + k];
        for (int k = 0; k < L; ++k)
            if (valid_edges[g * L + k] > 0) ++valid_graphs[k];
    }
    std::vector<char> splittable(L, 0);
    for (int k = 0; k < L; ++k)
        splittable[k] = valid_graphs[k] > 0 && tree.node(leaves[k]).depth < depth_cap;
    for (int k = 0; k < L; ++k) nb.splittable_leaves += splittable[k];

    const auto merge_nodes = tree.second_generation_internals();
    const int w2 = static_cast<int>(merge_nodes.size());
    const bool has_split = nb.splittable_leaves > 0;
    const bool has_merge = w2 > 0;
    if (!has_split && !has_merge)
        throw std::runtime_error(
            "enumerate_moves: degenerate neighborhood (no valid split or merge)");
    const double lps = detail::log_p_split(has_split, has_merge);
    const double lpm = detail::log_p_merge(has_split, has_merge);

    // Leaf totals are shared across graphs; take them from the first scan.
    const LeafTotals totals = leaf_totals(scans.empty() ? VertexStats{} : scans[0].stats);

    // Depth-dependent prior factor, shared by every move at the same depth.
    std::vector<double> prior_base;
    auto prior_base_at = [&](int d) {
        while (static_cast<int>(prior_base.size()) <= d)
            prior_base.push_back(log_prior_ratio_split(
                static_cast<int>(prior_base.size()), 0.0, 0.0, prior.alpha, prior.beta));
        return prior_base[d];
    };

    // ------------------------------- splits --------------------------------
    for (int k = 0; k < L; ++k) {
        if (!splittable[k]) continue;
        const int leaf_id = leaves[k];
        const int d = tree.node(leaf_id).depth;
        const double log_pi_g = -std::log(static_cast<double>(valid_graphs[k]));
        const double log_lsplit = -std::log(static_cast<double>(nb.splittable_leaves));

        // Backward bookkeeping shared by every split of this leaf. The split
        // node becomes second generation; its parent stops being one if the
        // sibling is a leaf.
        int w2_new = w2 + 1;
        const int par = tree.node(leaf_id).parent;
        if (par >= 0) {
            const auto& pn = tree.node(par);
            if (tree.is_leaf(pn.left) && tree.is_leaf(pn.right)) --w2_new;
        }
        // Splittable leaves of the post-move tree, before looking at the two
        // offspring: every other leaf keeps its status.
        const int other_splittable = nb.splittable_leaves - 1;

        // When no other leaf can split, the offspring decide whether the
        // post-move tree still has a split. Per graph, a side is splittable
        // if it spans two or more occupied bins; occ_sub[v] counts occupied
        // bins inside the subtree of v, so the test is O(1) per edge. Only a
        // leaf spanning exactly two occupied bins of the cut graph stays
        // inconclusive and routes its samples for the exact answer.
        std::vector<std::vector<int>> occ_sub(
            other_splittable == 0 && d + 1 < depth_cap ? P : 0);
        std::vector<int> occ_total(occ_sub.size(), 0);
        for (std::size_t g = 0; g < occ_sub.size(); ++g) {
            const VertexStats& vs = scans[g].stats;
            occ_sub[g].assign(vs.n_vertices, 0);
            for (int v : graphs[g].post_order) {
                int occ = vs.cnt[vs.at(v, k)] > 0 ? 1 : 0;
                for (int c : graphs[g].children[v]) occ += occ_sub[g][c];
                occ_sub[g][v] = occ;
            }
            occ_total[g] = occ_sub[g][graphs[g].root];
        }

        for (int g = 0; g < P; ++g) {
            const int ve = valid_edges[g * L + k];
            if (ve == 0) continue;
            const SplitTable& t = scans[g].table;
            const double log_pi_e = -std::log(static_cast<double>(ve));
            for (int v = 0; v < t.n_vertices; ++v) {
                const std::size_t cell = t.at(v, k);
                if (t.type[cell] != kEdgeValid) continue;
                Move m;
                m.kind = Move::Kind::Split;
                m.node_id = leaf_id;
                m.leaf_ordinal = k;
                m.rule = GraphSplitRule{g, v};
                m.log_lik_ratio = t.ratio[cell];
                m.log_prior_ratio = prior_base_at(d) + log_pi_g + log_pi_e;
                m.log_q_fwd = lps + log_lsplit + log_pi_g + log_pi_e;

                bool star_has_split = other_splittable > 0;
                if (!star_has_split && d + 1 < depth_cap) {
                    star_has_split =
                        occ_sub[g][v] >= 2 || occ_total[g] - occ_sub[g][v] >= 2;
                    if (!star_has_split) {
                        // Only the two offspring can make the new tree splittable.
                        const auto& geo = graphs[g];
                        std::vector<int> right, left;
                        for (int i : tree.node(leaf_id).train_samples)
                            (geo.in_subtree(geo.vertex_of[i], v) ? right : left).push_back(i);
                        star_has_split = detail::subset_has_valid_edge(right, graphs) ||
                                         detail::subset_has_valid_edge(left, graphs);
                    }
                }
                m.log_q_bwd = detail::log_p_merge(star_has_split, true) -
                              std::log(static_cast<double>(w2_new));
                m.log_eta = informed_log_weight(m);
                nb.moves.push_back(m);
            }
        }
    }

    // ------------------------------- merges --------------------------------
    for (int node_id : merge_nodes) {
        const auto& node = tree.node(node_id);
        const int d = node.depth;
        int kL = -1, kR = -1;
        for (int k = 0; k < L; ++k) {
            if (leaves[k] == node.left) kL = k;
            if (leaves[k] == node.right) kR = k;
        }
        const LeafStats sL = totals.stats(kL);
        const LeafStats sR = totals.stats(kR);

        Move m;
        m.kind = Move::Kind::Merge;
        m.node_id = node_id;
        m.log_lik_ratio = merge_log_ratio(sL, sR, prior);
        m.log_q_fwd = lpm - std::log(static_cast<double>(w2));

        // Backward split on the merged tree: count valid edges for the merged
        // leaf per graph from its per-vertex training counts (columns add).
        int star_valid_graphs = 0;
        int star_valid_edges_rule = 0;
        std::vector<long> merged_cnt, scratch;
        for (int g = 0; g < P; ++g) {
            const VertexStats& vs = scans[g].stats;
            const int nv = vs.n_vertices;
            merged_cnt.resize(nv);
            for (int v = 0; v < nv; ++v)
                merged_cnt[v] = vs.cnt[vs.at(v, kL)] + vs.cnt[vs.at(v, kR)];
            const int ve =
                count_valid_edges(graphs[g], merged_cnt, sL.count + sR.count, scratch);
            if (ve > 0) ++star_valid_graphs;
            if (g == node.rule.graph_id) star_valid_edges_rule = ve;
        }
        if (star_valid_graphs == 0 || star_valid_edges_rule == 0)
            throw std::runtime_error("enumerate_moves: merged leaf lost its re-split rule");

        // Splittable leaves of the merged tree: all leaves except the two
        // children keep their status; the merged leaf is always splittable.
        int star_ls = 1;
        for (int k = 0; k < L; ++k)
            if (k != kL && k != kR && splittable[k]) ++star_ls;
        const bool star_root_only = (L == 2);
        const double log_pi_g_star = -std::log(static_cast<double>(star_valid_graphs));
        const double log_pi_e_star = -std::log(static_cast<double>(star_valid_edges_rule));
        m.log_q_bwd = detail::log_p_split(true, !star_root_only) -
                      std::log(static_cast<double>(star_ls)) + log_pi_g_star + log_pi_e_star;
        m.log_prior_ratio = -(prior_base_at(d) + log_pi_g_star + log_pi_e_star);
        m.log_eta = informed_log_weight(m);
        nb.moves.push_back(m);
    }

    std::vector<double> etas;
    etas.reserve(nb.moves.size());
    for (const auto& m : nb.moves) etas.push_back(m.log_eta);
    nb.log_Z = log_sum_exp(etas);
    if (nb.moves.empty()) throw std::runtime_error("enumerate_moves: empty neighborhood");
    return nb;
}

}  // namespace gsbart
