#include "lfbgw/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace lfbgw {

using nlohmann::json;

namespace {

Eigen::VectorXd derive_h0(const Eigen::MatrixXd& H, double tol) {
    Eigen::VectorXd h0 = Eigen::VectorXd::Ones(H.rows()) - H.rowwise().sum();
    // Snap roundoff-sized overshoot to the exact boundary; numerically
    // derived triplets land at 1 - 1e-16 row sums all the time.
    for (Eigen::Index i = 0; i < h0.size(); ++i) {
        if (h0[i] < 0.0 && h0[i] > -tol) h0[i] = 0.0;
        if (h0[i] > 1.0 && h0[i] < 1.0 + tol) h0[i] = 1.0;
    }
    return h0;
}

}  // namespace

ValidationReport validate_model(const LFModel& model, double tol) {
    ValidationReport rep;
    auto flag = [&rep](std::string rule, int row, int col, double value) {
        rep.ok = false;
        rep.violations.push_back({std::move(rule), row, col, value});
    };

    const int n = model.n_types;
    if (n < 1 || model.H.rows() != n || model.H.cols() != n ||
        model.g.size() != n || model.h0.size() != n) {
        flag("shape", -1, -1, static_cast<double>(n));
        return rep;  // nothing else is well-defined
    }

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double h = model.H(i, j);
            if (!(h >= 0.0) || !std::isfinite(h)) flag("H.nonneg", i, j, h);
        }
        const double row_sum = model.H.row(i).sum();
        if (row_sum > 1.0 + tol) flag("H.substochastic", i, -1, row_sum);
        const double h0 = model.h0[i];
        if (!(h0 >= 0.0 && h0 <= 1.0)) flag("h0.range", i, -1, h0);
        if (std::abs(h0 - (1.0 - row_sum)) > tol) flag("h0.derived", i, -1, h0);
    }

    for (int j = 0; j < n; ++j) {
        const double gj = model.g[j];
        if (!(gj >= 0.0) || !std::isfinite(gj)) flag("g.nonneg", j, -1, gj);
    }
    const double g_sum = model.g.sum();
    if (std::abs(g_sum - 1.0) > tol) flag("g.sums_to_one", -1, -1, g_sum);

    if (!(model.m > 0.0) || !std::isfinite(model.m))
        flag("m.positive", -1, -1, model.m);

    return rep;
}

LFModel make_model(Eigen::MatrixXd H, Eigen::VectorXd g, double m, double tol) {
    LFModel model;
    model.n_types = static_cast<int>(H.rows());
    model.H = std::move(H);
    model.g = std::move(g);
    model.m = m;
    model.h0 = derive_h0(model.H, tol);

    ValidationReport rep = validate_model(model, tol);
    if (!rep.ok) {
        std::ostringstream msg;
        msg << "invalid model:";
        for (const auto& v : rep.violations) {
            msg << " [" << v.rule;
            if (v.row >= 0) msg << " row " << v.row + 1;
            if (v.col >= 0) msg << " col " << v.col + 1;
            msg << " = " << v.value << "]";
        }
        throw ValidationError(msg.str(), std::move(rep));
    }
    return model;
}

LFModel embed_single_type(double h0, double m) {
    if (!(h0 >= 0.0 && h0 < 1.0))
        throw DomainError("embed_single_type: h0 must lie in [0,1)");
    if (!(m > 0.0)) throw DomainError("embed_single_type: m must be positive");
    Eigen::MatrixXd H(1, 1);
    H(0, 0) = 1.0 - h0;
    return make_model(H, Eigen::VectorXd::Ones(1), m);
}

Eigen::MatrixXd mean_matrix(const LFModel& model) {
    const Eigen::VectorXd row_sums = model.H.rowwise().sum();
    return model.H + model.m * row_sums * model.g.transpose();
}

namespace {

Eigen::MatrixXd parse_H(const json& jh, int n) {
    if (!jh.is_array() || jh.empty())
        throw ParseError("H must be a non-empty array");

    const bool dense = static_cast<int>(jh.size()) == n &&
                       std::all_of(jh.begin(), jh.end(), [n](const json& row) {
                           return row.is_array() &&
                                  static_cast<int>(row.size()) == n &&
                                  std::all_of(row.begin(), row.end(),
                                              [](const json& x) {
                                                  return x.is_number();
                                              });
                       });

    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    if (dense) {
        // An N x N numeric array is always read as dense rows; sparse
        // documents that happen to contain exactly N triplets for N = 3
        // would be ambiguous otherwise.
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) H(i, j) = jh[i][j].get<double>();
        return H;
    }

    // Sparse: list of [i, j, value] with 1-based indices.
    std::set<std::pair<int, int>> seen;
    for (const json& entry : jh) {
        if (!entry.is_array() || entry.size() != 3)
            throw ParseError("sparse H entries must be [i, j, value]");
        if (!entry[0].is_number_integer() || !entry[1].is_number_integer() ||
            !entry[2].is_number())
            throw ParseError("sparse H entry has non-numeric fields");
        const int i = entry[0].get<int>();
        const int j = entry[1].get<int>();
        if (i < 1 || i > n || j < 1 || j > n)
            throw ParseError("sparse H index out of range");
        if (!seen.insert({i, j}).second)
            throw ParseError("duplicate sparse H entry");
        H(i - 1, j - 1) = entry[2].get<double>();
    }
    return H;
}

}  // namespace

LFModel load_model(const std::string& text, double tol) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("model document is not valid JSON: ") +
                         e.what());
    }
    if (!doc.is_object()) throw ParseError("model document must be an object");

    for (const auto& [key, _] : doc.items()) {
        if (key != "n_types" && key != "m" && key != "g" && key != "H")
            throw ParseError("unknown key '" + key +
                             "' (h0 is derived, never stored)");
    }
    for (const char* key : {"n_types", "m", "g", "H"})
        if (!doc.contains(key))
            throw ParseError(std::string("missing key '") + key + "'");

    if (!doc["n_types"].is_number_integer())
        throw ParseError("n_types must be an integer");
    const int n = doc["n_types"].get<int>();
    if (n < 1) throw ParseError("n_types must be positive");

    if (!doc["m"].is_number()) throw ParseError("m must be a number");
    const double m = doc["m"].get<double>();

    if (!doc["g"].is_array() || static_cast<int>(doc["g"].size()) != n)
        throw ParseError("g must be an array of n_types numbers");
    Eigen::VectorXd g(n);
    for (int j = 0; j < n; ++j) {
        if (!doc["g"][j].is_number()) throw ParseError("g entries must be numbers");
        g[j] = doc["g"][j].get<double>();
    }

    Eigen::MatrixXd H = parse_H(doc["H"], n);
    return make_model(std::move(H), std::move(g), m, tol);
}

LFModel load_model_file(const std::string& path, double tol) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_model(buf.str(), tol);
}

std::string save_model(const LFModel& model) {
    json doc;
    doc["n_types"] = model.n_types;
    doc["m"] = model.m;
    doc["g"] = json::array();
    for (int j = 0; j < model.n_types; ++j) doc["g"].push_back(model.g[j]);
    doc["H"] = json::array();
    for (int i = 0; i < model.n_types; ++i) {
        json row = json::array();
        for (int j = 0; j < model.n_types; ++j) row.push_back(model.H(i, j));
        doc["H"].push_back(row);
    }
    return doc.dump(2) + "\n";
}

std::string model_digest(const LFModel& model) {
    const std::string text = save_model(model);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace lfbgw
