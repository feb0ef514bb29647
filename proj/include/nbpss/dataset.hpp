#pragma once

#include "design.hpp"
#include "errors.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace nbpss {

/// Column table read from a headed CSV file; cells are kept as text.
struct Table {
    std::vector<std::string> names;
    std::vector<std::vector<std::string>> columns;

    Index rows() const { return columns.empty() ? 0 : static_cast<Index>(columns.front().size()); }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) return i;
        }
        throw ConfigError("dataset: missing column '" + name + "'");
    }

    bool has(const std::string& name) const {
        for (const auto& n : names) {
            if (n == name) return true;
        }
        return false;
    }

    const std::vector<std::string>& text(const std::string& name) const { return columns[index_of(name)]; }

    Vector numeric(const std::string& name) const {
        const auto& col = text(name);
        Vector out(static_cast<Index>(col.size()));
        for (std::size_t i = 0; i < col.size(); ++i) {
            const std::string& s = col[i];
            double v = 0.0;
            const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
                throw ConfigError("dataset: non-numeric value '" + s + "' in column '" + name + "' at row " +
                                  std::to_string(i + 1));
            }
            out(static_cast<Index>(i)) = v;
        }
        return out;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    return out;
}

} // namespace detail

inline Table parse_csv(std::istream& in, const std::string& what) {
    Table t;
    std::string line;
    if (!std::getline(in, line) || line.find_first_not_of(" \t\r") == std::string::npos) {
        throw ConfigError(what + ": empty file (a header row is required)");
    }
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);   // UTF-8 BOM
    t.names = detail::split_csv_line(line);
    t.columns.assign(t.names.size(), {});
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto cells = detail::split_csv_line(line);
        detail::require(cells.size() == t.names.size(),
                        what + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                            " fields, header has " + std::to_string(t.names.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) t.columns[c].push_back(std::move(cells[c]));
    }
    detail::require(t.rows() > 0, what + ": no data rows");
    return t;
}

inline Table load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), "cannot open dataset '" + path.string() + "'");
    return parse_csv(in, "dataset '" + path.string() + "'");
}

/// Standardization with the n - 1 denominator.
struct Scaling {
    double mean = 0.0;
    double sd = 1.0;
};

inline Scaling scaling_of(const Vector& x, const std::string& name) {
    detail::require(x.size() >= 2, "covariate '" + name + "': need at least two rows to standardize");
    Scaling s;
    s.mean = x.mean();
    s.sd = std::sqrt((x.array() - s.mean).square().sum() / static_cast<double>(x.size() - 1));
    detail::require(s.sd > 0.0, "covariate '" + name + "' is constant (sd = 0)");
    return s;
}

inline Vector standardize(const Vector& x, const Scaling& s) { return (x.array() - s.mean) / s.sd; }

/** Region graph from a node list (one label per line) and an edge list
 * ("regionA regionB" per line). Blank lines and lines starting with '#' are skipped. */
inline RegionGraph load_graph(std::istream& nodes, std::istream& edges, const std::string& what = "adjacency") {
    RegionGraph g;
    std::string line;
    while (std::getline(nodes, line)) {
        std::istringstream ss(line);
        std::string label;
        if (!(ss >> label) || label[0] == '#') continue;
        detail::require(!g.index_of(label), what + ": duplicate node '" + label + "'");
        g.nodes.push_back(label);
    }
    detail::require(!g.nodes.empty(), what + ": empty node list");
    g.adjacency = Matrix::Zero(g.size(), g.size());
    std::size_t row = 0;
    while (std::getline(edges, line)) {
        ++row;
        std::istringstream ss(line);
        std::string a, b;
        if (!(ss >> a) || a[0] == '#') continue;
        detail::require(static_cast<bool>(ss >> b), what + ": edge line " + std::to_string(row) + " needs two regions");
        const auto ia = g.index_of(a), ib = g.index_of(b);
        detail::require(ia && ib, what + ": edge line " + std::to_string(row) + " names an unknown region");
        detail::require(*ia != *ib, what + ": self-loop at region '" + a + "'");
        g.adjacency(*ia, *ib) = 1.0;
        g.adjacency(*ib, *ia) = 1.0;
    }
    return g;
}

inline RegionGraph load_graph(const std::filesystem::path& nodes, const std::filesystem::path& edges) {
    std::ifstream n(nodes), e(edges);
    detail::require(static_cast<bool>(n), "cannot open node list '" + nodes.string() + "'");
    detail::require(static_cast<bool>(e), "cannot open edge list '" + edges.string() + "'");
    return load_graph(n, e, "adjacency '" + edges.string() + "'");
}

} // namespace nbpss
