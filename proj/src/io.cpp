#include "doppler/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doppler/errors.hpp"

namespace doppler {

using nlohmann::json;

json complex_to_json(Complex z) { return json::array({z.real(), z.imag()}); }

Complex complex_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw ConfigError("expected a complex number as [re, im]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

json matrix_to_json(const CMatrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

CMatrix matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw ConfigError("expected a non-empty matrix");
    const auto n = static_cast<Eigen::Index>(j.size());
    CMatrix m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) throw ConfigError("matrix is not square");
        for (Eigen::Index c = 0; c < n; ++c) m(r, c) = complex_from_json(row[static_cast<std::size_t>(c)]);
    }
    return m;
}

void write_json(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + " is not valid JSON: " + e.what());
    }
}

void write_density(const std::filesystem::path& path, const DensityMatrix& rho) {
    json doc;
    doc["dim"] = rho.dim();
    doc["rho"] = matrix_to_json(rho.matrix());
    write_json(path, doc);
}

CMatrix read_density(const std::filesystem::path& path) {
    const json doc = read_json(path);
    if (!doc.is_object() || !doc.contains("dim") || !doc.contains("rho")) {
        throw ConfigError(path.string() + ": expected keys 'dim' and 'rho'");
    }
    CMatrix m = matrix_from_json(doc.at("rho"));
    if (!doc.at("dim").is_number_integer() || doc.at("dim").get<long long>() != m.rows()) {
        throw ConfigError(path.string() + ": 'dim' does not match the matrix");
    }
    return m;
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<SweepRow> sweep_rows(const SweepResult& result) {
    std::vector<SweepRow> rows(result.times.size());
    for (std::size_t j = 0; j < rows.size(); ++j) {
        rows[j].t_us = result.times[j];
        if (j < result.absorption_exact.size()) {
            rows[j].absorption_exact = result.absorption_exact[j];
            rows[j].exact_solve_us = result.exact_us[j];
        }
        if (result.absorption_sampled) {
            rows[j].absorption_sampled = (*result.absorption_sampled)[j];
            rows[j].sampled_solve_us = result.sampled_us[j];
        }
    }
    return rows;
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
    auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    std::ostringstream out;
    out << kSweepHeader << '\n';
    for (const SweepRow& r : rows) {
        out << format_double(r.t_us) << ',' << cell(r.absorption_exact) << ',' << cell(r.absorption_sampled) << ','
            << cell(r.exact_solve_us) << ',' << cell(r.sampled_solve_us) << '\n';
    }
    return out.str();
}

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << format_sweep_csv(sweep_rows(result));
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kSweepHeader) throw ConfigError("sweep CSV: missing or wrong header");

    auto parse = [](const std::string& cell, std::size_t line_no) -> std::optional<double> {
        if (cell.empty()) return std::nullopt;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(cell, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != cell.size()) {
            throw ConfigError("sweep CSV line " + std::to_string(line_no) + ": bad number '" + cell + "'");
        }
        return v;
    };

    std::vector<SweepRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cells.size() != 5) throw ConfigError("sweep CSV line " + std::to_string(line_no) + ": expected 5 columns");
        SweepRow r;
        const auto t = parse(cells[0], line_no);
        if (!t) throw ConfigError("sweep CSV line " + std::to_string(line_no) + ": empty time");
        r.t_us = *t;
        r.absorption_exact = parse(cells[1], line_no);
        r.absorption_sampled = parse(cells[2], line_no);
        r.exact_solve_us = parse(cells[3], line_no);
        r.sampled_solve_us = parse(cells[4], line_no);
        if (r.absorption_exact.has_value() != r.exact_solve_us.has_value() ||
            r.absorption_sampled.has_value() != r.sampled_solve_us.has_value()) {
            throw ConfigError("sweep CSV line " + std::to_string(line_no) + ": value without timing");
        }
        rows.push_back(r);
    }
    return rows;
}

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_sweep_csv(buf.str());
}

}  // namespace doppler
