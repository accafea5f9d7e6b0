#pragma once

// Deterministic file emitters. Every float goes through fmt17 so identical
// configs produce byte-identical CSV files; JSON uses sorted keys.

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "fock.hpp"

namespace pdc {

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
}

struct CsvTable {
    std::vector<std::string> comments;  // emitted as leading "# ..." lines
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

inline void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    for (const auto& c : table.comments) out << "# " << c << "\n";
    for (std::size_t j = 0; j < table.columns.size(); ++j)
        out << (j ? "," : "") << table.columns[j];
    out << "\n";
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size())
            throw ConfigError("csv row width does not match column count");
        for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << fmt17(row[j]);
        out << "\n";
    }
    if (!out) throw ConfigError("short write to " + path);
}

// Heat-map layout: one row per matrix entry.
inline CsvTable heatmap_table(const Matrix& m) {
    CsvTable t;
    t.columns = {"n", "m", "re", "im", "abs"};
    t.rows.reserve(std::size_t(m.rows()) * std::size_t(m.cols()));
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) {
            cplx z = m(r, c);
            t.rows.push_back({double(r), double(c), z.real(), z.imag(), std::abs(z)});
        }
    return t;
}

inline nlohmann::json matrix_json(const DensityMatrix& dm) {
    nlohmann::json j;
    std::vector<std::string> names;
    for (Mode m : dm.modes) names.emplace_back(mode_name(m));
    j["modes"] = names;
    j["cutoffs"] = dm.cutoffs;
    std::vector<std::vector<double>> re(std::size_t(dm.dim())), im(std::size_t(dm.dim()));
    for (int r = 0; r < dm.dim(); ++r) {
        re[std::size_t(r)].resize(std::size_t(dm.dim()));
        im[std::size_t(r)].resize(std::size_t(dm.dim()));
        for (int c = 0; c < dm.dim(); ++c) {
            re[std::size_t(r)][std::size_t(c)] = dm.rho(r, c).real();
            im[std::size_t(r)][std::size_t(c)] = dm.rho(r, c).imag();
        }
    }
    j["re"] = re;
    j["im"] = im;
    return j;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
    if (!out) throw ConfigError("short write to " + path);
}

}  // namespace pdc
