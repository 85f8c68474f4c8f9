#pragma once

#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gsbart/common.hpp"
#include "gsbart/graph.hpp"
#include "gsbart/likelihood.hpp"
#include "gsbart/tree.hpp"

namespace gsbart {

// Everything needed to rebuild the candidate graph set against the same
// dataset: chains store their cut points, arborescences their parent arrays,
// and structural bin assignments are stored once per structural label.
struct GraphBlueprint {
    enum class Kind { Chain, Arborescence };
    Kind kind = Kind::Chain;
    std::string feature_label;
    std::vector<double> cut_points;  // chain
    double value_lo = 0.0;           // chain: observed feature range
    double value_hi = 0.0;
    std::vector<int> parent;         // arborescence
    int root = 0;                    // arborescence
    std::string bin_label;           // arborescence: key into bin_assignments
};

// Posterior samples and run metadata; only post-burn-in sweeps are kept.
struct PosteriorStore {
    std::string model;  // normal | count | classification
    int n_train = 0;
    int n_total = 0;
    double y_mid = 0.0, y_range = 1.0;  // normal response scaling
    std::vector<int> order;             // internal sample id -> original row
    std::vector<std::string> class_labels;  // classification only

    std::vector<GraphBlueprint> graphs;
    std::map<std::string, std::vector<int>> bin_assignments;  // by original row order

    struct Entry {
        int sweep = 0;
        double sigma = 0.0;
        double sigma_mu2 = 0.0;
        std::vector<std::string> trees;  // serialized, one per weak learner
    };
    // ensembles[c] for class c; a single element for normal/count.
    std::vector<std::vector<Entry>> ensembles;

    std::map<std::string, long> importance;    // feature label -> split count
    std::vector<std::vector<double>> trace;    // per class, per sweep metric
    std::string trace_metric;                  // mspe | rmspe | loglik
    std::string schema_text;                   // embedded schema for predict

    int kept_sweeps() const { return ensembles.empty() ? 0 : static_cast<int>(ensembles[0].size()); }
};

// ------------------------------ persistence ---------------------------------

inline void save_store(const PosteriorStore& s, std::ostream& os) {
    os << std::setprecision(17);
    os << "gsbart-store 1\n";
    os << "model " << s.model << "\n";
    os << "n_train " << s.n_train << "\n";
    os << "n_total " << s.n_total << "\n";
    os << "scale " << s.y_mid << " " << s.y_range << "\n";
    os << "order " << s.order.size();
    for (int i : s.order) os << " " << i;
    os << "\n";
    os << "classes " << s.class_labels.size();
    for (const auto& c : s.class_labels) os << " " << c;
    os << "\n";
    os << "trace_metric " << (s.trace_metric.empty() ? "none" : s.trace_metric) << "\n";

    os << "bins " << s.bin_assignments.size() << "\n";
    for (const auto& [label, bins] : s.bin_assignments) {
        os << label << " " << bins.size();
        for (int b : bins) os << " " << b;
        os << "\n";
    }
    os << "graphs " << s.graphs.size() << "\n";
    for (const auto& g : s.graphs) {
        if (g.kind == GraphBlueprint::Kind::Chain) {
            os << "chain " << g.feature_label << " " << g.value_lo << " " << g.value_hi << " "
               << g.cut_points.size();
            for (double c : g.cut_points) os << " " << c;
            os << "\n";
        } else {
            os << "arb " << g.feature_label << " " << g.bin_label << " " << g.parent.size() << " "
               << g.root;
            for (int p : g.parent) os << " " << p;
            os << "\n";
        }
    }

    os << "importance " << s.importance.size() << "\n";
    for (const auto& [label, count] : s.importance) os << label << " " << count << "\n";

    os << "trace " << s.trace.size() << "\n";
    for (const auto& tr : s.trace) {
        os << tr.size();
        for (double v : tr) os << " " << v;
        os << "\n";
    }

    os << "ensembles " << s.ensembles.size() << "\n";
    for (const auto& ens : s.ensembles) {
        os << "entries " << ens.size() << "\n";
        for (const auto& e : ens) {
            os << "entry " << e.sweep << " " << e.sigma << " " << e.sigma_mu2 << " "
               << e.trees.size() << "\n";
            for (const auto& t : e.trees) os << t;
        }
    }

    os << "schema_begin\n" << s.schema_text;
    if (!s.schema_text.empty() && s.schema_text.back() != '\n') os << "\n";
    os << "schema_end\n";
}

inline PosteriorStore load_store(std::istream& is) {
    PosteriorStore s;
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "gsbart-store")
        throw ValidationError("not a gsbart model store");
    auto expect = [&](const char* want) {
        if (!(is >> tag) || tag != want)
            throw ValidationError(std::string("model store: expected '") + want + "', got '" +
                                  tag + "'");
    };
    expect("model");
    is >> s.model;
    expect("n_train");
    is >> s.n_train;
    expect("n_total");
    is >> s.n_total;
    expect("scale");
    is >> s.y_mid >> s.y_range;
    expect("order");
    std::size_t count;
    is >> count;
    s.order.resize(count);
    for (auto& v : s.order) is >> v;
    expect("classes");
    is >> count;
    s.class_labels.resize(count);
    for (auto& c : s.class_labels) is >> c;
    expect("trace_metric");
    is >> s.trace_metric;
    if (s.trace_metric == "none") s.trace_metric.clear();

    expect("bins");
    is >> count;
    for (std::size_t i = 0; i < count; ++i) {
        std::string label;
        std::size_t m;
        is >> label >> m;
        auto& bins = s.bin_assignments[label];
        bins.resize(m);
        for (auto& b : bins) is >> b;
    }
    expect("graphs");
    is >> count;
    for (std::size_t i = 0; i < count; ++i) {
        std::string kind;
        is >> kind;
        GraphBlueprint g;
        if (kind == "chain") {
            g.kind = GraphBlueprint::Kind::Chain;
            std::size_t m;
            is >> g.feature_label >> g.value_lo >> g.value_hi >> m;
            g.cut_points.resize(m);
            for (auto& c : g.cut_points) is >> c;
        } else if (kind == "arb") {
            g.kind = GraphBlueprint::Kind::Arborescence;
            std::size_t m;
            is >> g.feature_label >> g.bin_label >> m >> g.root;
            g.parent.resize(m);
            for (auto& p : g.parent) is >> p;
        } else {
            throw ValidationError("model store: unknown graph kind '" + kind + "'");
        }
        s.graphs.push_back(std::move(g));
    }

    expect("importance");
    is >> count;
    for (std::size_t i = 0; i < count; ++i) {
        std::string label;
        long c;
        is >> label >> c;
        s.importance[label] = c;
    }
    expect("trace");
    is >> count;
    s.trace.resize(count);
    for (auto& tr : s.trace) {
        std::size_t m;
        is >> m;
        tr.resize(m);
        for (auto& v : tr) is >> v;
    }

    expect("ensembles");
    is >> count;
    s.ensembles.resize(count);
    for (auto& ens : s.ensembles) {
        expect("entries");
        std::size_t m;
        is >> m;
        ens.resize(m);
        for (auto& e : ens) {
            expect("entry");
            std::size_t ntrees;
            is >> e.sweep >> e.sigma >> e.sigma_mu2 >> ntrees;
            e.trees.resize(ntrees);
            is >> std::ws;
            for (auto& t : e.trees) {
                // Each serialized tree starts with "tree <nodes>".
                std::string line;
                if (!std::getline(is, line))
                    throw ValidationError("model store: truncated tree block");
                std::istringstream head(line);
                std::string word;
                std::size_t nodes;
                if (!(head >> word >> nodes) || word != "tree")
                    throw ValidationError("model store: bad tree header '" + line + "'");
                std::ostringstream block;
                block << line << "\n";
                for (std::size_t k = 0; k < nodes; ++k) {
                    if (!std::getline(is, line))
                        throw ValidationError("model store: truncated tree nodes");
                    block << line << "\n";
                }
                t = block.str();
            }
        }
    }

    expect("schema_begin");
    is >> std::ws;
    std::ostringstream schema;
    std::string line;
    while (std::getline(is, line)) {
        if (line == "schema_end") break;
        schema << line << "\n";
    }
    s.schema_text = schema.str();
    return s;
}

// Rebuild the candidate graphs against a dataset laid out in the store's
// internal order (train rows first). values_of(label) must return the feature
// column in that same order.
template <typename FeatureLookup>
std::vector<Arborescence> rebuild_graphs(const PosteriorStore& s, const FeatureLookup& values_of) {
    std::vector<Arborescence> out;
    out.reserve(s.graphs.size());
    for (const auto& bp : s.graphs) {
        if (bp.kind == GraphBlueprint::Kind::Chain) {
            out.push_back(build_chain_graph(values_of(bp.feature_label), bp.cut_points,
                                            bp.feature_label));
        } else {
            const auto it = s.bin_assignments.find(bp.bin_label);
            if (it == s.bin_assignments.end())
                throw ValidationError("model store: missing bin assignment '" + bp.bin_label + "'");
            Arborescence a;
            a.feature_label = bp.feature_label;
            a.parent = bp.parent;
            a.root = bp.root;
            const int nv = static_cast<int>(bp.parent.size());
            a.vertex_samples.assign(nv, {});
            // Bin assignments are stored by original row; remap to internal ids.
            a.vertex_of.resize(s.order.size());
            for (std::size_t i = 0; i < s.order.size(); ++i) {
                const int bin = it->second.at(s.order[i]);
                a.vertex_of[i] = bin;
                a.vertex_samples[bin].push_back(static_cast<int>(i));
            }
            a.finalize();
            out.push_back(std::move(a));
        }
    }
    return out;
}

}  // namespace gsbart
