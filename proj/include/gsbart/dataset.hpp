#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gsbart/common.hpp"

namespace gsbart {

// Which columns play which role. Parsed from a key=value schema file.
struct Schema {
    std::string response;
    std::vector<std::string> features;  // numeric columns backing chain graphs
    std::string offset;                 // optional, count model
    std::string split;                  // optional, values "train"/"test"
    std::string truth;                  // optional, noiseless target for diagnostics
};

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Generic "key = value" file with '#' comments; duplicate keys keep the last.
inline std::map<std::string, std::string> parse_key_values(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(f, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError("expected 'key = value': " + line);
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline Schema load_schema(const std::string& path) {
    auto kv = parse_key_values(path);
    Schema s;
    if (!kv.count("response")) throw ValidationError("schema: missing 'response'");
    s.response = kv["response"];
    if (!kv.count("features")) throw ValidationError("schema: missing 'features'");
    s.features = split_list(kv["features"], ',');
    if (s.features.empty()) throw ValidationError("schema: 'features' is empty");
    if (kv.count("offset")) s.offset = kv["offset"];
    if (kv.count("split")) s.split = kv["split"];
    if (kv.count("truth")) s.truth = kv["truth"];
    return s;
}

// Typed, validated dataset in file row order. No missing values allowed.
struct Dataset {
    int n = 0;
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> feature_columns;  // aligned with feature_names
    std::vector<std::string> response_raw;             // original tokens
    std::vector<double> response_num;                  // numeric view (empty for categorical use)
    bool response_numeric = true;
    std::vector<double> offset;        // empty if schema has none
    std::vector<char> is_test;         // from split column; empty if none
    std::vector<double> truth;         // empty if schema has none

    const std::vector<double>& feature(const std::string& name) const {
        for (std::size_t j = 0; j < feature_names.size(); ++j)
            if (feature_names[j] == name) return feature_columns[j];
        throw ValidationError("unknown feature column: " + name);
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace detail

// CSV with a header row; cells must parse per the schema's roles. Errors name
// the offending row and column.
inline Dataset load_dataset(const std::string& data_path, const Schema& schema) {
    std::ifstream f(data_path);
    if (!f) throw ValidationError("cannot open data file: " + data_path);
    std::string line;
    if (!std::getline(f, line)) throw ValidationError("empty data file: " + data_path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);
    std::map<std::string, int> col_of;
    for (int j = 0; j < static_cast<int>(header.size()); ++j) col_of[header[j]] = j;

    auto require = [&](const std::string& name) {
        auto it = col_of.find(name);
        if (it == col_of.end())
            throw ValidationError("data file is missing column '" + name + "'");
        return it->second;
    };
    const int resp_col = require(schema.response);
    std::vector<int> feat_cols;
    for (const auto& fname : schema.features) feat_cols.push_back(require(fname));
    const int offset_col = schema.offset.empty() ? -1 : require(schema.offset);
    const int split_col = schema.split.empty() ? -1 : require(schema.split);
    const int truth_col = schema.truth.empty() ? -1 : require(schema.truth);

    Dataset ds;
    ds.feature_names = schema.features;
    ds.feature_columns.assign(schema.features.size(), {});

    auto parse_num = [](const std::string& cell, int row, const std::string& col) {
        try {
            std::size_t pos = 0;
            double v = std::stod(cell, &pos);
            if (pos != cell.size()) throw std::invalid_argument("trailing junk");
            return v;
        } catch (const std::exception&) {
            throw ValidationError("unparseable number at row " + std::to_string(row) +
                                  ", column '" + col + "': '" + cell + "'");
        }
    };

    int row = 1;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw ValidationError("row " + std::to_string(row) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(header.size()));
        for (std::size_t j = 0; j < cells.size(); ++j)
            if (cells[j].empty())
                throw ValidationError("missing value at row " + std::to_string(row) +
                                      ", column '" + header[j] + "'");

        ds.response_raw.push_back(cells[resp_col]);
        for (std::size_t j = 0; j < feat_cols.size(); ++j)
            ds.feature_columns[j].push_back(
                parse_num(cells[feat_cols[j]], row, schema.features[j]));
        if (offset_col >= 0)
            ds.offset.push_back(parse_num(cells[offset_col], row, schema.offset));
        if (truth_col >= 0) ds.truth.push_back(parse_num(cells[truth_col], row, schema.truth));
        if (split_col >= 0) {
            const std::string& tag = cells[split_col];
            if (tag != "train" && tag != "test")
                throw ValidationError("split column value must be 'train' or 'test' at row " +
                                      std::to_string(row) + ", got '" + tag + "'");
            ds.is_test.push_back(tag == "test");
        }
        ++row;
    }
    ds.n = static_cast<int>(ds.response_raw.size());
    if (ds.n == 0) throw ValidationError("data file has no rows: " + data_path);

    // Numeric view of the response; categorical models read the raw tokens.
    ds.response_num.reserve(ds.n);
    ds.response_numeric = true;
    for (int i = 0; i < ds.n; ++i) {
        try {
            std::size_t pos = 0;
            double v = std::stod(ds.response_raw[i], &pos);
            if (pos != ds.response_raw[i].size()) throw std::invalid_argument("junk");
            ds.response_num.push_back(v);
        } catch (const std::exception&) {
            ds.response_numeric = false;
            ds.response_num.clear();
            break;
        }
    }
    return ds;
}

}  // namespace gsbart
