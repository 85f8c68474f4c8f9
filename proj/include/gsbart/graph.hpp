#pragma once

#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gsbart/common.hpp"

namespace gsbart {

// ---------------------------- StructuralGraph -------------------------------

// Undirected connected graph over vertex bins, plus the assignment of every
// sample (training and test alike) to one bin. Bins arrive precomputed.
struct StructuralGraph {
    int vertex_count = 0;
    std::vector<std::pair<int, int>> edges;       // deduplicated, u < v
    std::vector<int> bin_assignment;              // sample index -> vertex id
    std::vector<std::vector<int>> adjacency;      // derived

    void build_adjacency() {
        adjacency.assign(vertex_count, {});
        for (auto [u, v] : edges) {
            adjacency[u].push_back(v);
            adjacency[v].push_back(u);
        }
    }

    bool connected() const {
        if (vertex_count == 0) return false;
        std::vector<char> seen(vertex_count, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        int count = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int w : adjacency[u])
                if (!seen[w]) {
                    seen[w] = 1;
                    ++count;
                    stack.push_back(w);
                }
        }
        return count == vertex_count;
    }

    void validate() const {
        if (vertex_count <= 0) throw ValidationError("structural graph has no vertices");
        for (auto [u, v] : edges) {
            if (u == v) throw ValidationError("structural graph has a self-loop");
            if (u < 0 || v < 0 || u >= vertex_count || v >= vertex_count)
                throw ValidationError("structural graph edge endpoint out of range");
        }
        if (!connected()) throw ValidationError("structural graph is not connected");
        for (int b : bin_assignment)
            if (b < 0 || b >= vertex_count)
                throw ValidationError("bin assignment refers to a vertex out of range");
    }
};

// Edge list file: one "u v" pair per line, 0-based ids. '#' starts a comment.
inline StructuralGraph load_structural_graph(const std::string& edge_path,
                                             const std::string& bin_path) {
    StructuralGraph g;
    std::ifstream ef(edge_path);
    if (!ef) throw ValidationError("cannot open edge list file: " + edge_path);
    std::set<std::pair<int, int>> dedup;
    std::string line;
    int max_id = -1;
    while (std::getline(ef, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        int u, v;
        if (!(ls >> u >> v)) {
            std::string any;
            if (std::istringstream(line) >> any)
                throw ValidationError("malformed edge list line: " + line);
            continue;  // blank line
        }
        if (u == v) throw ValidationError("self-loop in edge list: " + line);
        dedup.insert({std::min(u, v), std::max(u, v)});
        max_id = std::max({max_id, u, v});
    }
    g.edges.assign(dedup.begin(), dedup.end());
    g.vertex_count = max_id + 1;

    std::ifstream bf(bin_path);
    if (!bf) throw ValidationError("cannot open bin assignment file: " + bin_path);
    while (std::getline(bf, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        int b;
        while (ls >> b) g.bin_assignment.push_back(b);
    }
    g.build_adjacency();
    g.validate();
    return g;
}

// ------------------------------ Arborescence --------------------------------

// Rooted directed tree over vertex bins; every edge points child -> parent.
// The edge e_v is identified by its child vertex v (the root has no edge).
// Immutable after construction.
struct Arborescence {
    std::vector<std::vector<int>> vertex_samples;  // bin -> sample indices
    std::vector<int> parent;                       // vertex -> parent, root -> -1
    int root = 0;
    std::string feature_label;
    std::vector<int> vertex_of;                    // sample index -> vertex id

    // Derived at finalize():
    std::vector<std::vector<int>> children;
    std::vector<int> post_order;   // children before parents
    std::vector<int> tin, tout;    // Euler intervals: u in subtree(v) iff tin[v] <= tin[u] < tout[v]

    int vertex_count() const { return static_cast<int>(parent.size()); }

    bool in_subtree(int u, int v) const { return tin[v] <= tin[u] && tin[u] < tout[v]; }

    void finalize() {
        const int nv = vertex_count();
        children.assign(nv, {});
        int roots = 0;
        for (int v = 0; v < nv; ++v) {
            if (parent[v] < 0) {
                ++roots;
                if (v != root) throw ValidationError("arborescence root mismatch");
            } else {
                children[parent[v]].push_back(v);
            }
        }
        if (roots != 1) throw ValidationError("arborescence must have exactly one root");

        post_order.clear();
        post_order.reserve(nv);
        tin.assign(nv, -1);
        tout.assign(nv, -1);
        // Iterative DFS; deep chains must not overflow the call stack.
        int timer = 0;
        std::vector<std::pair<int, int>> stack{{root, 0}};
        while (!stack.empty()) {
            auto& [v, ci] = stack.back();
            if (ci == 0) tin[v] = timer++;
            if (ci < static_cast<int>(children[v].size())) {
                int c = children[v][ci++];
                stack.emplace_back(c, 0);
            } else {
                tout[v] = timer;
                post_order.push_back(v);
                stack.pop_back();
            }
        }
        if (static_cast<int>(post_order.size()) != nv)
            throw ValidationError("arborescence is not connected (cycle in parent map)");

        for (int v : vertex_of)
            if (v < 0 || v >= nv) throw ValidationError("sample assigned to vertex out of range");
    }
};

// All vertices whose parent chain reaches v, excluding v itself.
inline std::vector<int> descendants(const Arborescence& a, int v) {
    if (v < 0 || v >= a.vertex_count()) throw ValidationError("descendants: vertex out of range");
    std::vector<int> out;
    std::vector<int> stack(a.children[v].begin(), a.children[v].end());
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        out.push_back(u);
        stack.insert(stack.end(), a.children[u].begin(), a.children[u].end());
    }
    return out;
}

inline std::vector<int> ancestors(const Arborescence& a, int v) {
    if (v < 0 || v >= a.vertex_count()) throw ValidationError("ancestors: vertex out of range");
    std::vector<int> out;
    for (int u = a.parent[v]; u >= 0; u = a.parent[u]) out.push_back(u);
    return out;
}

inline std::vector<int> bottom_vertices(const Arborescence& a) {
    std::vector<int> out;
    for (int v = 0; v < a.vertex_count(); ++v)
        if (a.children[v].empty()) out.push_back(v);
    return out;
}

// ------------------------------ chain graphs --------------------------------

// Chain over value bins of one numeric feature. Bin k (0-based) holds samples
// with cut[k-1] < x <= cut[k]; ties at a cut point fall left. The root is the
// lowest-value bin, so cutting edge e_{v_{k+1}} bipartitions exactly as X > cut[k].
inline Arborescence build_chain_graph(const std::vector<double>& values,
                                      const std::vector<double>& cut_points,
                                      const std::string& feature_label = "") {
    for (double x : values)
        if (!std::isfinite(x)) throw ValidationError("chain graph: non-finite feature value");
    for (std::size_t k = 1; k < cut_points.size(); ++k)
        if (!(cut_points[k - 1] < cut_points[k]))
            throw ValidationError("chain graph: cut points must be strictly increasing");

    const int nv = static_cast<int>(cut_points.size()) + 1;
    Arborescence a;
    a.feature_label = feature_label;
    a.vertex_samples.assign(nv, {});
    a.parent.assign(nv, -1);
    a.root = 0;
    for (int v = 1; v < nv; ++v) a.parent[v] = v - 1;

    a.vertex_of.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        // first bin whose upper cut is >= x
        int bin = static_cast<int>(std::lower_bound(cut_points.begin(), cut_points.end(), values[i]) -
                                   cut_points.begin());
        a.vertex_of[i] = bin;
        a.vertex_samples[bin].push_back(static_cast<int>(i));
    }
    a.finalize();
    return a;
}

// Quantile cut points over the distinct values: the (k/bin_count)-quantiles,
// k = 1..bin_count-1, linear interpolation between order statistics,
// deduplicated. Fewer than 2 distinct values is an error.
inline std::vector<double> default_cut_points(const std::vector<double>& values, int bin_count) {
    if (bin_count < 2) throw ValidationError("default_cut_points: bin_count must be >= 2");
    std::vector<double> distinct(values);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    const std::size_t m = distinct.size();
    if (m < 2) throw ValidationError("default_cut_points: fewer than 2 distinct values");

    std::vector<double> cuts;
    for (int k = 1; k < bin_count; ++k) {
        double pos = (static_cast<double>(k) / bin_count) * static_cast<double>(m - 1);
        auto lo = static_cast<std::size_t>(pos);
        double frac = pos - static_cast<double>(lo);
        double q = (lo + 1 < m) ? distinct[lo] + frac * (distinct[lo + 1] - distinct[lo])
                                : distinct[lo];
        if (cuts.empty() || q > cuts.back()) cuts.push_back(q);
    }
    return cuts;
}

// --------------------------- Wilson's sampler -------------------------------

// Uniform spanning tree of g via loop-erased random walks, oriented toward a
// uniformly chosen root. Exact (not approximate) uniformity over spanning trees.
inline Arborescence sample_arborescence(const StructuralGraph& g, std::uint64_t seed,
                                        const std::string& feature_label = "") {
    g.validate();
    Rng rng(seed);
    const int nv = g.vertex_count;
    const int root = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(nv)));

    std::vector<char> in_tree(nv, 0);
    std::vector<int> next(nv, -1);
    in_tree[root] = 1;
    for (int i = 0; i < nv; ++i) {
        if (in_tree[i]) continue;
        // Random walk from i until the tree is hit; 'next' erases loops.
        int u = i;
        while (!in_tree[u]) {
            const auto& nbrs = g.adjacency[u];
            next[u] = nbrs[rng.uniform_index(nbrs.size())];
            u = next[u];
        }
        for (u = i; !in_tree[u]; u = next[u]) in_tree[u] = 1;
    }

    Arborescence a;
    a.feature_label = feature_label;
    a.parent.assign(nv, -1);
    for (int v = 0; v < nv; ++v)
        if (v != root) a.parent[v] = next[v];
    a.root = root;
    a.vertex_samples.assign(nv, {});
    a.vertex_of = g.bin_assignment;
    for (std::size_t i = 0; i < g.bin_assignment.size(); ++i)
        a.vertex_samples[g.bin_assignment[i]].push_back(static_cast<int>(i));
    a.finalize();
    return a;
}

}  // namespace gsbart
