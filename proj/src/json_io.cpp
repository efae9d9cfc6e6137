#include "phireg/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "phireg/errors.hpp"

namespace phireg {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Matrix parse_matrix(const json& j, Index rows, Index cols) {
    if (!j.is_array()) throw ValidationError("expected a JSON array for a matrix");
    if (!j.empty() && j.front().is_array()) {
        const Index r = static_cast<Index>(j.size());
        const Index c = static_cast<Index>(j.front().size());
        Matrix m(r, c);
        for (Index i = 0; i < r; ++i) {
            if (static_cast<Index>(j[i].size()) != c) throw DimensionError("ragged matrix rows in JSON");
            for (Index k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
        }
        if ((rows >= 0 && r != rows) || (cols >= 0 && c != cols))
            throw DimensionError("matrix has shape " + std::to_string(r) + "x" + std::to_string(c));
        return m;
    }
    const auto flat = j.get<std::vector<double>>();
    if (rows < 0 && cols < 0) {
        rows = static_cast<Index>(flat.size());
        cols = 1;
    } else if (rows < 0) {
        rows = cols > 0 ? static_cast<Index>(flat.size()) / cols : 0;
    } else if (cols < 0) {
        cols = rows > 0 ? static_cast<Index>(flat.size()) / rows : 0;
    }
    if (rows * cols != static_cast<Index>(flat.size()))
        throw DimensionError("flat array of " + std::to_string(flat.size()) + " entries does not fit the shape");
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index k = 0; k < cols; ++k) m(i, k) = flat[static_cast<std::size_t>(i * cols + k)];
    return m;
}

json parse_or_throw(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string(what) + " is not valid JSON: " + e.what());
    }
}

}  // namespace

std::string fit_to_json(const FitResult& fit) {
    json j;
    j["lambda"] = fit.lambda;
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["score_norm"] = fit.score_norm;
    j["objective"] = fit.objective;
    j["n_clusters"] = fit.n_clusters;
    j["free_categories"] = fit.beta_hat.free_categories();
    j["covariates"] = fit.beta_hat.covariates();
    j["beta_hat"] = matrix_json(fit.beta_hat.coefficients());
    j["beta_flat"] = vector_json(fit.beta_hat.flatten());
    j["J_hat"] = matrix_json(fit.J_hat);
    j["G_hat"] = matrix_json(fit.G_hat);
    j["V_hat"] = matrix_json(fit.V_hat);
    j["objective_path"] = fit.objective_path;
    j["warnings"] = fit.warnings;
    return j.dump(2);
}

FitResult fit_from_json(const std::string& text) {
    const json j = parse_or_throw(text, "fit file");
    FitResult fit;
    try {
        fit.lambda = j.at("lambda").get<double>();
        fit.converged = j.at("converged").get<bool>();
        fit.iterations = j.value("iterations", 0);
        fit.score_norm = j.value("score_norm", 0.0);
        fit.objective = j.value("objective", 0.0);
        fit.n_clusters = j.at("n_clusters").get<Index>();
        fit.beta_hat = BetaMatrix(parse_matrix(j.at("beta_hat"), -1, -1));
        const Index p = fit.beta_hat.size();
        fit.V_hat = parse_matrix(j.at("V_hat"), p, p);
        if (j.contains("J_hat")) fit.J_hat = parse_matrix(j["J_hat"], p, p);
        if (j.contains("G_hat")) fit.G_hat = parse_matrix(j["G_hat"], p, p);
        if (j.contains("objective_path")) fit.objective_path = j["objective_path"].get<std::vector<double>>();
        if (j.contains("warnings")) fit.warnings = j["warnings"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed fit file: ") + e.what());
    }
    return fit;
}

FitResult load_fit(const std::string& path) { return fit_from_json(read_text(path)); }

std::string wald_to_json(const WaldReport& report) {
    json j;
    j["statistic"] = report.statistic;
    j["df"] = report.df;
    j["p_value"] = report.p_value;
    j["alpha"] = report.alpha;
    j["reject"] = report.reject;
    json at = json::object();
    for (const auto& [level, decision] : report.reject_at) {
        char key[32];
        std::snprintf(key, sizeof key, "%g", level);
        at[key] = decision;
    }
    j["reject_at"] = at;
    return j.dump(2);
}

std::string influence_to_json(const InfluenceReport& report, double lambda) {
    json j;
    j["lambda"] = lambda;
    j["if"] = vector_json(report.if_vector);
    j["if_norm"] = report.if_vector.norm();
    j["u_star"] = vector_json(report.u_star);
    j["psi"] = matrix_json(report.psi);
    if (report.if2_wald) j["if2_wald"] = *report.if2_wald;
    return j.dump(2);
}

std::string cells_to_json(const std::vector<CellResult>& cells) {
    json arr = json::array();
    for (const auto& c : cells) {
        json j;
        j["lambda"] = c.lambda;
        j["nh"] = c.nh;
        j["contaminated"] = c.contaminated;
        j["replicates"] = c.replicates;
        auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
        j["rmse"] = num(c.rmse);
        j["level"] = num(c.level);
        j["level_se"] = num(c.level_se);
        j["power"] = num(c.power);
        j["power_se"] = num(c.power_se);
        j["nonconverged_null"] = c.nonconverged_null;
        j["nonconverged_alt"] = c.nonconverged_alt;
        arr.push_back(std::move(j));
    }
    return arr.dump(2);
}

Matrix matrix_from_json(const std::string& text, Index rows, Index cols) {
    try {
        return parse_matrix(parse_or_throw(text, "matrix"), rows, cols);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed matrix: ") + e.what());
    }
}

Vector vector_from_json(const std::string& text) {
    const Matrix m = matrix_from_json(text);
    if (m.cols() != 1 && m.rows() != 1) throw DimensionError("expected a vector");
    return Eigen::Map<const Vector>(m.data(), m.size());
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

std::string RunManifest::to_json() const {
    json j;
    j["subcommand"] = subcommand;
    j["version"] = library_version();
    j["seed"] = seed;
    j["config"] = parse_or_throw(config_json, "manifest config");
    json in = json::object();
    for (const auto& [path, digest] : inputs) in[path] = digest;
    j["inputs"] = in;
    json t = json::object();
    for (const auto& [label, seconds] : timings) t[label] = seconds;
    j["timings"] = t;
    return j.dump(2);
}

std::string library_version() { return "0.1.0"; }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace phireg
