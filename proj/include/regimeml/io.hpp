#pragma once

// File formats: CSV series (17-significant-digit round trip), the model JSON
// schema, snapshot/angle serialization, MCEM trajectory files, and JSON report
// helpers. Parsing failures throw std::runtime_error carrying the file, row,
// and column so the CLI can surface them at exit code 2.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "regimeml/common.hpp"
#include "regimeml/doa.hpp"
#include "regimeml/mcem.hpp"
#include "regimeml/model.hpp"

namespace regimeml {

/// Shortest exact decimal form: 17 significant digits round-trip IEEE doubles.
inline std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_number(const std::string& tok, const std::string& path, int row, int col) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    double x = std::strtod(begin, &end);
    while (end != nullptr && (*end == ' ' || *end == '\t')) ++end;
    if (end == begin || end == nullptr || *end != '\0')
        throw std::runtime_error(path + ": row " + std::to_string(row) + ", column " +
                                 std::to_string(col) + ": cannot parse '" + tok +
                                 "' as a number");
    return x;
}

}  // namespace detail

/// Read a CSV with a mandatory one-line header; every subsequent row must be
/// numeric and as wide as the header.
inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    CsvTable table;
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (row == 1) {
            table.header = detail::split_csv_line(line);
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> toks = detail::split_csv_line(line);
        if (toks.size() != table.header.size())
            throw std::runtime_error(path + ": row " + std::to_string(row) + ": expected " +
                                     std::to_string(table.header.size()) + " columns, found " +
                                     std::to_string(toks.size()));
        std::vector<double> vals;
        vals.reserve(toks.size());
        for (std::size_t c = 0; c < toks.size(); ++c)
            vals.push_back(detail::parse_number(toks[c], path, row, static_cast<int>(c) + 1));
        table.rows.push_back(std::move(vals));
    }
    if (table.header.empty()) throw std::runtime_error(path + ": empty file");
    return table;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    for (std::size_t c = 0; c < header.size(); ++c)
        out << (c ? "," : "") << header[c];
    out << "\n";
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c)
            out << (c ? "," : "") << format_g17(r[c]);
        out << "\n";
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

// ---------------------------------------------------------------------------
// Finite-regime model JSON: { "d_x", "s", "kernel", "ar", "sigma" }.

inline SwitchingArModel model_from_json(const nlohmann::json& j, const std::string& where) {
    for (const auto& item : j.items())
        if (item.key() != "d_x" && item.key() != "s" && item.key() != "kernel" &&
            item.key() != "ar" && item.key() != "sigma")
            throw std::runtime_error(where + ": unknown model key '" + item.key() + "'");
    for (const char* key : {"d_x", "s", "kernel", "ar", "sigma"})
        if (!j.contains(key))
            throw std::runtime_error(where + ": missing model key '" + std::string(key) + "'");

    SwitchingArModel m;
    m.num_regimes = j.at("d_x").get<int>();
    m.order = j.at("s").get<int>();
    if (m.num_regimes < 1) throw std::runtime_error(where + ": d_x must be >= 1");
    if (m.order < 0) throw std::runtime_error(where + ": s must be >= 0");

    const auto& kernel = j.at("kernel");
    const auto& ar = j.at("ar");
    const auto& sigma = j.at("sigma");
    if (static_cast<int>(kernel.size()) != m.num_regimes ||
        static_cast<int>(ar.size()) != m.num_regimes ||
        static_cast<int>(sigma.size()) != m.num_regimes)
        throw std::runtime_error(where + ": kernel/ar/sigma must each have d_x rows");

    m.kernel = Matrix(m.num_regimes, m.num_regimes);
    m.ar = Matrix(m.num_regimes, m.order + 1);
    m.sigma = Vector(m.num_regimes);
    for (int i = 0; i < m.num_regimes; ++i) {
        if (static_cast<int>(kernel[i].size()) != m.num_regimes)
            throw std::runtime_error(where + ": kernel row " + std::to_string(i) +
                                     " must have d_x entries");
        if (static_cast<int>(ar[i].size()) != m.order + 1)
            throw std::runtime_error(where + ": ar row " + std::to_string(i) +
                                     " must have s+1 entries");
        for (int k = 0; k < m.num_regimes; ++k) m.kernel(i, k) = kernel[i][k].get<double>();
        for (int k = 0; k <= m.order; ++k) m.ar(i, k) = ar[i][k].get<double>();
        m.sigma(i) = sigma[i].get<double>();
    }
    return m;
}

inline SwitchingArModel read_model_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    return model_from_json(j, path);
}

inline nlohmann::json model_to_json(const SwitchingArModel& m) {
    nlohmann::json j;
    j["d_x"] = m.num_regimes;
    j["s"] = m.order;
    j["kernel"] = nlohmann::json::array();
    j["ar"] = nlohmann::json::array();
    j["sigma"] = nlohmann::json::array();
    for (int i = 0; i < m.num_regimes; ++i) {
        nlohmann::json krow = nlohmann::json::array(), arow = nlohmann::json::array();
        for (int k = 0; k < m.num_regimes; ++k) krow.push_back(m.kernel(i, k));
        for (int k = 0; k <= m.order; ++k) arow.push_back(m.ar(i, k));
        j["kernel"].push_back(krow);
        j["ar"].push_back(arow);
        j["sigma"].push_back(m.sigma(i));
    }
    return j;
}

// ---------------------------------------------------------------------------
// Numeric series.

/// Observations with the AR lag window first; column y holds all of them.
inline void write_observations_csv(const std::string& path, const std::vector<double>& values) {
    std::vector<std::vector<double>> rows;
    rows.reserve(values.size());
    for (double v : values) rows.push_back({v});
    write_csv(path, {"y"}, rows);
}

inline std::vector<double> read_single_column_csv(const std::string& path,
                                                  const std::string& name) {
    CsvTable t = read_csv(path);
    if (t.header.size() != 1 || t.header[0] != name)
        throw std::runtime_error(path + ": expected a single '" + name + "' column");
    std::vector<double> out;
    out.reserve(t.rows.size());
    for (const auto& r : t.rows) out.push_back(r[0]);
    return out;
}

inline void write_regimes_csv(const std::string& path, const std::vector<int>& regimes) {
    std::vector<std::vector<double>> rows;
    rows.reserve(regimes.size());
    for (int r : regimes) rows.push_back({static_cast<double>(r)});
    write_csv(path, {"regime"}, rows);
}

inline void write_angles_csv(const std::string& path, const std::vector<double>& angles) {
    std::vector<std::vector<double>> rows;
    rows.reserve(angles.size());
    for (double a : angles) rows.push_back({a});
    write_csv(path, {"angle"}, rows);
}

inline std::vector<double> read_angles_csv(const std::string& path) {
    return read_single_column_csv(path, "angle");
}

// Snapshots: interleaved real/imaginary columns re0, im0, ..., re{d-1}, im{d-1}.
inline void write_snapshots_csv(const std::string& path, const ArraySnapshots& data) {
    std::vector<std::string> header;
    for (int j = 0; j < data.sensors; ++j) {
        header.push_back("re" + std::to_string(j));
        header.push_back("im" + std::to_string(j));
    }
    std::vector<std::vector<double>> rows;
    rows.reserve(data.y.size());
    for (const auto& snap : data.y) {
        std::vector<double> r;
        r.reserve(2 * static_cast<std::size_t>(data.sensors));
        for (int j = 0; j < data.sensors; ++j) {
            r.push_back(snap(j).real());
            r.push_back(snap(j).imag());
        }
        rows.push_back(std::move(r));
    }
    write_csv(path, header, rows);
}

inline ArraySnapshots read_snapshots_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    if (t.header.size() < 4 || t.header.size() % 2 != 0)
        throw std::runtime_error(path + ": snapshot files need interleaved re/im columns");
    const int d = static_cast<int>(t.header.size()) / 2;
    for (int j = 0; j < d; ++j)
        if (t.header[2 * j] != "re" + std::to_string(j) ||
            t.header[2 * j + 1] != "im" + std::to_string(j))
            throw std::runtime_error(path + ": expected header re0,im0,...,re" +
                                     std::to_string(d - 1) + ",im" + std::to_string(d - 1));
    ArraySnapshots data;
    data.sensors = d;
    data.y.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        ComplexVector snap(d);
        for (int j = 0; j < d; ++j) snap(j) = Complex(r[2 * j], r[2 * j + 1]);
        data.y.push_back(std::move(snap));
    }
    if (data.y.empty()) throw std::runtime_error(path + ": no snapshots");
    return data;
}

// MCEM trajectory: row 0 is the initial point; its beta_hat and accept_rate
// print as nan because no E-step has run yet.
inline void write_trajectory_csv(const std::string& path,
                                 const std::vector<McemIterate>& trajectory) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "iter,sigma_eta_sq,sigma_s_sq,sigma_eps_sq,beta_hat,accept_rate\n";
    for (std::size_t t = 0; t < trajectory.size(); ++t) {
        const McemIterate& it = trajectory[t];
        out << t << "," << format_g17(it.params.sigma_eta_sq) << ","
            << format_g17(it.params.sigma_s_sq) << "," << format_g17(it.params.sigma_eps_sq)
            << "," << format_g17(it.beta_hat) << "," << format_g17(it.accept_rate) << "\n";
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

// ---------------------------------------------------------------------------
// JSON report fragments.

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

inline nlohmann::json vector_to_json(const Vector& v) {
    nlohmann::json out = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error(path + ": write failed");
}

inline nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    return j;
}

}  // namespace regimeml
