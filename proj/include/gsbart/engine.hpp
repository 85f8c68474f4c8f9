#pragma once

#include <vector>

#include "gsbart/common.hpp"
#include "gsbart/graph.hpp"
#include "gsbart/likelihood.hpp"
#include "gsbart/tree.hpp"

namespace gsbart {

// Edge types with respect to one leaf (one table column).
inline constexpr signed char kEdgeValid = 1;
inline constexpr signed char kEdgeInvalid = -1;
inline constexpr signed char kEdgeRedundant = 0;

// Per-vertex gradient statistics of one candidate graph, one (J, H, count)
// triple per (vertex, leaf) cell. Flattened as [v * n_leaves + k].
struct VertexStats {
    int n_vertices = 0;
    int n_leaves = 0;
    std::vector<double> J;
    std::vector<double> H;
    std::vector<long> cnt;  // training sample counts

    std::size_t at(int v, int k) const { return static_cast<std::size_t>(v) * n_leaves + k; }
};

// Split log-likelihood ratios and edge types of one candidate graph, one
// column per current leaf. ratio is finite exactly where type == kEdgeValid;
// the root vertex has no edge and its row stays kEdgeInvalid.
struct SplitTable {
    int n_vertices = 0;
    int n_leaves = 0;
    std::vector<double> ratio;       // init -inf
    std::vector<signed char> type;

    std::size_t at(int v, int k) const { return static_cast<std::size_t>(v) * n_leaves + k; }

    std::vector<signed char> type_column(int k) const {
        std::vector<signed char> col(n_vertices);
        for (int v = 0; v < n_vertices; ++v) col[v] = type[at(v, k)];
        return col;
    }
};

// Leaf-level totals (sum over vertices of any one graph).
struct LeafTotals {
    std::vector<double> J;
    std::vector<double> H;
    std::vector<long> cnt;

    LeafStats stats(int k) const { return LeafStats{J[k], H[k], cnt[k]}; }
};

// leaf_ordinal[i] maps each training sample to its leaf's column index.
inline VertexStats compute_vertex_stats(const Arborescence& graph,
                                        const std::vector<int>& leaf_ordinal, int n_leaves,
                                        int n_train, const GradientTable& grad) {
    VertexStats vs;
    vs.n_vertices = graph.vertex_count();
    vs.n_leaves = n_leaves;
    vs.J.assign(static_cast<std::size_t>(vs.n_vertices) * n_leaves, 0.0);
    vs.H.assign(vs.J.size(), 0.0);
    vs.cnt.assign(vs.J.size(), 0);
    for (int v = 0; v < vs.n_vertices; ++v) {
        for (int i : graph.vertex_samples[v]) {
            if (i >= n_train) continue;
            const std::size_t cell = vs.at(v, leaf_ordinal[i]);
            vs.J[cell] += grad.ldot[i] - grad.phi_t_hat[i] * grad.lddot[i];
            vs.H[cell] -= grad.lddot[i];
            ++vs.cnt[cell];
        }
    }
    return vs;
}

inline VertexStats compute_vertex_stats(const Arborescence& graph, const DecisionTree& tree,
                                        const GradientTable& grad) {
    const auto leaves = tree.leaf_ids();
    std::vector<int> ordinal_of_node(tree.nodes().size(), -1);
    for (int k = 0; k < static_cast<int>(leaves.size()); ++k) ordinal_of_node[leaves[k]] = k;
    std::vector<int> leaf_ordinal(tree.n_train());
    for (int i = 0; i < tree.n_train(); ++i) leaf_ordinal[i] = ordinal_of_node[tree.leaf_of(i)];
    return compute_vertex_stats(graph, leaf_ordinal, static_cast<int>(leaves.size()),
                                tree.n_train(), grad);
}

inline LeafTotals leaf_totals(const VertexStats& vs) {
    LeafTotals t;
    t.J.assign(vs.n_leaves, 0.0);
    t.H.assign(vs.n_leaves, 0.0);
    t.cnt.assign(vs.n_leaves, 0);
    for (int v = 0; v < vs.n_vertices; ++v)
        for (int k = 0; k < vs.n_leaves; ++k) {
            t.J[k] += vs.J[vs.at(v, k)];
            t.H[k] += vs.H[vs.at(v, k)];
            t.cnt[k] += vs.cnt[vs.at(v, k)];
        }
    return t;
}

// One bottom-up pass over the arborescence. For every edge e_v and leaf k it
// accumulates the right-subtree statistics, derives the left side by
// subtraction, types the edge (valid / invalid / redundant), and fills the
// split log ratio at valid cells. Every (edge, leaf) cell is visited once.
// The traversal uses the precomputed post order, not recursion, so chains of
// hundreds of vertices cannot overflow the call stack.
inline SplitTable recursive_split_scan(const Arborescence& graph, const VertexStats& vs,
                                       const LeafTotals& totals, const PriorConfig& prior) {
    const int nv = vs.n_vertices;
    const int L = vs.n_leaves;
    if (static_cast<int>(graph.post_order.size()) != nv)
        throw std::runtime_error("recursive_split_scan: malformed graph (cycle or disconnect)");

    SplitTable table;
    table.n_vertices = nv;
    table.n_leaves = L;
    table.ratio.assign(static_cast<std::size_t>(nv) * L, kNegInf);
    table.type.assign(static_cast<std::size_t>(nv) * L, kEdgeValid);

    // Right-subtree accumulators, reused as scratch across vertices.
    std::vector<double> rJ(static_cast<std::size_t>(nv) * L, 0.0);
    std::vector<double> rH(static_cast<std::size_t>(nv) * L, 0.0);
    std::vector<long> rc(static_cast<std::size_t>(nv) * L, 0);
    std::vector<int> child_splits(L);  // children of v whose right set is nonempty, per leaf

    for (int v : graph.post_order) {
        const std::size_t base = vs.at(v, 0);
        for (int k = 0; k < L; ++k) {
            rJ[base + k] = vs.J[base + k];
            rH[base + k] = vs.H[base + k];
            rc[base + k] = vs.cnt[base + k];
        }
        std::fill(child_splits.begin(), child_splits.end(), 0);
        for (int c : graph.children[v]) {
            const std::size_t cb = vs.at(c, 0);
            for (int k = 0; k < L; ++k) {
                rJ[base + k] += rJ[cb + k];
                rH[base + k] += rH[cb + k];
                rc[base + k] += rc[cb + k];
                if (rc[cb + k] > 0) ++child_splits[k];
            }
        }
        for (int k = 0; k < L; ++k) {
            const std::size_t cell = base + k;
            const long right = rc[cell];
            const long left = totals.cnt[k] - right;
            if (v == graph.root || right == 0 || left == 0) {
                table.type[cell] = kEdgeInvalid;
            } else if (child_splits[k] == 1 && vs.cnt[cell] == 0) {
                table.type[cell] = kEdgeRedundant;
            } else {
                const LeafStats parent{totals.J[k], totals.H[k], totals.cnt[k]};
                const LeafStats rstats{rJ[cell], rH[cell], right};
                const LeafStats lstats{parent.J - rstats.J, parent.H - rstats.H, left};
                table.ratio[cell] = split_log_ratio(parent, lstats, rstats, prior);
            }
        }
    }
    return table;
}

// Single-column scan used for hypothetical leaves (e.g. the merged leaf of a
// proposed merge move), fed with ready-made per-vertex statistics.
inline SplitTable scan_column(const Arborescence& graph, const std::vector<double>& vJ,
                              const std::vector<double>& vH, const std::vector<long>& vcnt,
                              const LeafStats& total, const PriorConfig& prior) {
    VertexStats vs;
    vs.n_vertices = graph.vertex_count();
    vs.n_leaves = 1;
    vs.J = vJ;
    vs.H = vH;
    vs.cnt = vcnt;
    LeafTotals t;
    t.J = {total.J};
    t.H = {total.H};
    t.cnt = {total.count};
    return recursive_split_scan(graph, vs, t, prior);
}

// Number of valid edges for a hypothetical leaf given only its per-vertex
// training counts. Edge types never depend on J or H, so this costs one
// counting pass. scratch must have at least |V| slots.
inline int count_valid_edges(const Arborescence& graph, const std::vector<long>& own_cnt,
                             long total, std::vector<long>& scratch) {
    const int nv = graph.vertex_count();
    scratch.resize(nv);
    int valid = 0;
    for (int v : graph.post_order) {
        long rc = own_cnt[v];
        int child_splits = 0;
        for (int c : graph.children[v]) {
            rc += scratch[c];
            if (scratch[c] > 0) ++child_splits;
        }
        scratch[v] = rc;
        if (v == graph.root || rc == 0 || total - rc == 0) continue;      // invalid
        if (child_splits == 1 && own_cnt[v] == 0) continue;               // redundant
        ++valid;
    }
    return valid;
}

// Scan of one graph against the current tree.
struct GraphScan {
    VertexStats stats;
    SplitTable table;
};

// Independent per-graph scans, fanned out over a worker pool. Each scan
// writes only its own slot, so results match the sequential order exactly.
inline std::vector<GraphScan> scan_all_graphs(const std::vector<Arborescence>& graphs,
                                              const DecisionTree& tree, const GradientTable& grad,
                                              const PriorConfig& prior, unsigned workers = 1) {
    const auto leaves = tree.leaf_ids();
    std::vector<int> ordinal_of_node(tree.nodes().size(), -1);
    for (int k = 0; k < static_cast<int>(leaves.size()); ++k) ordinal_of_node[leaves[k]] = k;
    std::vector<int> leaf_ordinal(tree.n_train());
    for (int i = 0; i < tree.n_train(); ++i) leaf_ordinal[i] = ordinal_of_node[tree.leaf_of(i)];
    const int L = static_cast<int>(leaves.size());

    std::vector<GraphScan> out(graphs.size());
    parallel_for(graphs.size(), workers, [&](std::size_t gi) {
        try {
            out[gi].stats =
                compute_vertex_stats(graphs[gi], leaf_ordinal, L, tree.n_train(), grad);
            out[gi].table =
                recursive_split_scan(graphs[gi], out[gi].stats, leaf_totals(out[gi].stats), prior);
        } catch (const std::exception& e) {
            throw std::runtime_error("graph " + std::to_string(gi) + ": " + e.what());
        }
    });
    return out;
}

}  // namespace gsbart
