#pragma once

#include <iosfwd>
#include <sstream>
#include <string>
#include <vector>

#include "gsbart/common.hpp"
#include "gsbart/graph.hpp"

namespace gsbart {

// A decision rule: cut edge e_{edge_vertex} of candidate graph graph_id.
// Samples whose vertex lies in the cut edge's subtree go right.
struct GraphSplitRule {
    int graph_id = -1;
    int edge_vertex = -1;
};

struct TreeNode {
    enum class Kind { Internal, Leaf, Dead };
    Kind kind = Kind::Leaf;
    int depth = 0;
    int parent = -1;
    int left = -1, right = -1;     // internal only
    GraphSplitRule rule;           // internal only
    double leaf_weight = 0.0;      // leaf only
    std::vector<int> train_samples;  // leaf only
    std::vector<int> test_samples;   // leaf only
};

// Graph-split decision tree over all n samples (training indices < n_train).
// Node storage is an append-only arena; merges tombstone the child slots so
// replaying the construction stays cheap.
class DecisionTree {
  public:
    DecisionTree() = default;

    DecisionTree(int n_train, int n_total) : n_train_(n_train) {
        TreeNode root;
        root.kind = TreeNode::Kind::Leaf;
        root.depth = 0;
        for (int i = 0; i < n_total; ++i)
            (i < n_train ? root.train_samples : root.test_samples).push_back(i);
        nodes_.push_back(std::move(root));
        membership_.assign(n_total, 0);
    }

    int n_train() const { return n_train_; }
    int n_total() const { return static_cast<int>(membership_.size()); }
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const TreeNode& node(int id) const { return nodes_.at(id); }
    int leaf_of(int sample) const { return membership_[sample]; }

    bool is_leaf(int id) const { return nodes_.at(id).kind == TreeNode::Kind::Leaf; }

    // Live leaves in ascending node-id order; the ordinal of a leaf in this
    // list is its column index in split tables.
    std::vector<int> leaf_ids() const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
            if (nodes_[i].kind == TreeNode::Kind::Leaf) out.push_back(i);
        return out;
    }

    int leaf_count() const {
        int c = 0;
        for (const auto& n : nodes_)
            if (n.kind == TreeNode::Kind::Leaf) ++c;
        return c;
    }

    // Internal nodes whose two children are both leaves.
    std::vector<int> second_generation_internals() const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
            const auto& n = nodes_[i];
            if (n.kind == TreeNode::Kind::Internal && is_leaf(n.left) && is_leaf(n.right))
                out.push_back(i);
        }
        return out;
    }

    // Split a leaf by `rule`; both offspring must contain at least one
    // training sample. Test samples follow the same routing. The candidate
    // graph itself is never modified.
    void apply_split(int leaf_id, const GraphSplitRule& rule,
                     const std::vector<Arborescence>& graphs) {
        TreeNode& leaf = nodes_.at(leaf_id);
        if (leaf.kind != TreeNode::Kind::Leaf)
            throw ValidationError("apply_split: node is not a leaf");
        const Arborescence& g = graphs.at(rule.graph_id);
        if (rule.edge_vertex <= -1 || rule.edge_vertex >= g.vertex_count() ||
            rule.edge_vertex == g.root)
            throw ValidationError("apply_split: rule edge does not exist");

        TreeNode lnode, rnode;
        lnode.depth = rnode.depth = leaf.depth + 1;
        auto route = [&](const std::vector<int>& src, std::vector<int>& lo, std::vector<int>& hi) {
            for (int i : src)
                (g.in_subtree(g.vertex_of[i], rule.edge_vertex) ? hi : lo).push_back(i);
        };
        route(leaf.train_samples, lnode.train_samples, rnode.train_samples);
        route(leaf.test_samples, lnode.test_samples, rnode.test_samples);
        if (lnode.train_samples.empty() || rnode.train_samples.empty())
            throw ValidationError("apply_split: rule produces an empty training offspring");

        const int lid = static_cast<int>(nodes_.size());
        const int rid = lid + 1;
        lnode.parent = rnode.parent = leaf_id;
        for (int i : lnode.train_samples) membership_[i] = lid;
        for (int i : lnode.test_samples) membership_[i] = lid;
        for (int i : rnode.train_samples) membership_[i] = rid;
        for (int i : rnode.test_samples) membership_[i] = rid;

        leaf.kind = TreeNode::Kind::Internal;
        leaf.rule = rule;
        leaf.left = lid;
        leaf.right = rid;
        leaf.train_samples.clear();
        leaf.test_samples.clear();
        leaf.leaf_weight = 0.0;
        nodes_.push_back(std::move(lnode));
        nodes_.push_back(std::move(rnode));
    }

    // Merge the two leaf children of a second-generation internal node back
    // into it; exact inverse of apply_split on topology and memberships.
    void apply_merge(int internal_id) {
        TreeNode& node = nodes_.at(internal_id);
        if (node.kind != TreeNode::Kind::Internal)
            throw ValidationError("apply_merge: node is not internal");
        TreeNode& l = nodes_.at(node.left);
        TreeNode& r = nodes_.at(node.right);
        if (l.kind != TreeNode::Kind::Leaf || r.kind != TreeNode::Kind::Leaf)
            throw ValidationError("apply_merge: children are not both leaves");

        node.train_samples = std::move(l.train_samples);
        node.train_samples.insert(node.train_samples.end(), r.train_samples.begin(),
                                  r.train_samples.end());
        node.test_samples = std::move(l.test_samples);
        node.test_samples.insert(node.test_samples.end(), r.test_samples.begin(),
                                 r.test_samples.end());
        std::sort(node.train_samples.begin(), node.train_samples.end());
        std::sort(node.test_samples.begin(), node.test_samples.end());
        for (int i : node.train_samples) membership_[i] = internal_id;
        for (int i : node.test_samples) membership_[i] = internal_id;

        l.kind = TreeNode::Kind::Dead;
        r.kind = TreeNode::Kind::Dead;
        l.train_samples.clear();
        l.test_samples.clear();
        node.kind = TreeNode::Kind::Leaf;
        node.left = node.right = -1;
        node.rule = GraphSplitRule{};
        node.leaf_weight = 0.0;
    }

    void set_leaf_weight(int leaf_id, double w) { nodes_.at(leaf_id).leaf_weight = w; }

    // Translate rule graph ids after fitting against a graph subset:
    // local id j becomes global_ids[j].
    void remap_graph_ids(const std::vector<int>& global_ids) {
        for (auto& n : nodes_)
            if (n.kind == TreeNode::Kind::Internal) n.rule.graph_id = global_ids.at(n.rule.graph_id);
    }

    // Fitted contribution of this tree for every sample.
    std::vector<double> fitted_values() const {
        std::vector<double> out(membership_.size());
        for (std::size_t i = 0; i < membership_.size(); ++i)
            out[i] = nodes_[membership_[i]].leaf_weight;
        return out;
    }

    // Recompute every sample's leaf by replaying the rules from the root;
    // used by consistency checks and by prediction on stored ensembles.
    std::vector<int> replay_membership(const std::vector<Arborescence>& graphs) const {
        std::vector<int> out(membership_.size());
        for (std::size_t i = 0; i < membership_.size(); ++i) {
            int id = 0;
            while (nodes_[id].kind == TreeNode::Kind::Internal) {
                const auto& n = nodes_[id];
                const Arborescence& g = graphs.at(n.rule.graph_id);
                id = g.in_subtree(g.vertex_of[i], n.rule.edge_vertex) ? n.right : n.left;
            }
            out[i] = id;
        }
        return out;
    }

    const std::vector<int>& membership() const { return membership_; }

    // ----------------------- serialization ---------------------------------
    // Line-oriented: "<id> I <depth> <left> <right> <graph_id> <edge_vertex>"
    // for internal nodes, "<id> L <depth> <leaf_weight>" for leaves.
    void serialize(std::ostream& os) const {
        os << "tree " << nodes_.size() << "\n";
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
            const auto& n = nodes_[i];
            if (n.kind == TreeNode::Kind::Internal)
                os << i << " I " << n.depth << " " << n.left << " " << n.right << " "
                   << n.rule.graph_id << " " << n.rule.edge_vertex << "\n";
            else if (n.kind == TreeNode::Kind::Leaf) {
                std::ostringstream w;
                w.precision(17);
                w << n.leaf_weight;
                os << i << " L " << n.depth << " " << w.str() << "\n";
            } else
                os << i << " D " << n.depth << "\n";
        }
    }

    static DecisionTree deserialize(std::istream& is, int n_train, int n_total,
                                    const std::vector<Arborescence>& graphs) {
        std::string tag;
        std::size_t count = 0;
        if (!(is >> tag >> count) || tag != "tree")
            throw ValidationError("tree deserialize: missing 'tree' header");
        DecisionTree t;
        t.n_train_ = n_train;
        t.nodes_.resize(count);
        for (std::size_t k = 0; k < count; ++k) {
            int id, depth;
            std::string kind;
            if (!(is >> id >> kind >> depth))
                throw ValidationError("tree deserialize: truncated node line");
            TreeNode& n = t.nodes_.at(id);
            n.depth = depth;
            if (kind == "I") {
                n.kind = TreeNode::Kind::Internal;
                if (!(is >> n.left >> n.right >> n.rule.graph_id >> n.rule.edge_vertex))
                    throw ValidationError("tree deserialize: bad internal node");
            } else if (kind == "L") {
                n.kind = TreeNode::Kind::Leaf;
                if (!(is >> n.leaf_weight))
                    throw ValidationError("tree deserialize: bad leaf node");
            } else if (kind == "D") {
                n.kind = TreeNode::Kind::Dead;
            } else {
                throw ValidationError("tree deserialize: unknown node kind '" + kind + "'");
            }
        }
        for (std::size_t k = 0; k < count; ++k) {
            const TreeNode& n = t.nodes_[k];
            if (n.kind == TreeNode::Kind::Internal) {
                t.nodes_.at(n.left).parent = static_cast<int>(k);
                t.nodes_.at(n.right).parent = static_cast<int>(k);
            }
        }
        t.membership_.assign(n_total, 0);
        t.membership_ = t.replay_membership(graphs);
        for (int i = 0; i < n_total; ++i) {
            TreeNode& leaf = t.nodes_.at(t.membership_[i]);
            (i < n_train ? leaf.train_samples : leaf.test_samples).push_back(i);
        }
        return t;
    }

  private:
    std::vector<TreeNode> nodes_;
    std::vector<int> membership_;
    int n_train_ = 0;
};

// Walk the redundant ('0') ancestors of a chosen valid edge; the traversed
// edges plus the chosen one form an equivalent edge set (identical training
// bipartition), from which one member is sampled uniformly.
inline int resolve_equivalent_edge(const Arborescence& g,
                                   const std::vector<signed char>& edge_types_for_leaf,
                                   int chosen_edge, Rng& rng) {
    if (edge_types_for_leaf.at(chosen_edge) != 1)
        throw ValidationError("resolve_equivalent_edge: chosen edge is not valid for this leaf");
    std::vector<int> members{chosen_edge};
    for (int u = g.parent[chosen_edge]; u >= 0 && u != g.root; u = g.parent[u]) {
        if (edge_types_for_leaf[u] != 0) break;
        members.push_back(u);
    }
    return members[rng.uniform_index(members.size())];
}

}  // namespace gsbart
