// lfbgw: analyze, transform, verify and simulate linear-fractional
// multitype Bienayme-Galton-Watson processes.

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "lfbgw/genfun.hpp"
#include "lfbgw/model.hpp"
#include "lfbgw/rng.hpp"
#include "lfbgw/simulate.hpp"
#include "lfbgw/singletype.hpp"
#include "lfbgw/spectral.hpp"
#include "lfbgw/transforms.hpp"
#include "lfbgw/version.hpp"

using nlohmann::json;
using namespace lfbgw;

namespace {

// exit codes: 0 ok, 1 internal/check failure, 2 domain precondition,
// 3 parse/validation
constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitDomain = 2;
constexpr int kExitParse = 3;

struct CommonOpts {
    std::string model_path;
    std::string single_params;  // "h0,m"
    double tol = 1e-13;         // rho solver tolerance
    std::uint64_t seed = 1;
    bool seed_given = false;
    std::string out_path;
    std::string format = "json";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    auto* model = cmd->add_option("--model", opts.model_path,
                                  "model JSON file");
    auto* single = cmd->add_option(
        "--single", opts.single_params,
        "inline single-type parameters h0,m instead of a model file");
    model->excludes(single);
    single->excludes(model);
    cmd->add_option("--tol", opts.tol,
                    "tolerance for the eigenvalue solve (default 1e-13)");
    cmd->add_option("--seed", opts.seed, "64-bit RNG seed")
        ->each([&opts](const std::string&) { opts.seed_given = true; });
    cmd->add_option("--out", opts.out_path, "output path (default: stdout)");
    cmd->add_option("--format", opts.format, "json|csv (default json)")
        ->check(CLI::IsMember({"json", "csv"}));
}

std::optional<STParams> parse_single(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) return std::nullopt;
    try {
        return STParams{std::stod(text.substr(0, comma)),
                        std::stod(text.substr(comma + 1))};
    } catch (...) {
        return std::nullopt;
    }
}

LFModel resolve_model(const CommonOpts& opts) {
    if (!opts.single_params.empty()) {
        const auto p = parse_single(opts.single_params);
        if (!p) throw ParseError("--single expects 'h0,m'");
        return embed_single_type(p->h0, p->m);
    }
    if (opts.model_path.empty())
        throw ParseError("one of --model or --single is required");
    return load_model_file(opts.model_path);
}

json report_header(const CommonOpts& opts, const LFModel& model) {
    json h;
    h["tool"] = "lfbgw";
    h["version"] = kVersion;
    h["model_digest"] = model_digest(model);
    h["seed"] = opts.seed;
    h["tolerances"] = {{"rho", opts.tol},
                       {"series_eps", SeriesOptions{}.eps},
                       {"model", kModelTol}};
    return h;
}

void emit(const CommonOpts& opts, const std::string& text) {
    if (opts.out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(opts.out_path, std::ios::binary);
    if (!out) throw Error("cannot open output file: " + opts.out_path);
    out << text;
}

std::string fmt_double(double x) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, p);
}

json vec_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

// flatten a report into "key,value" rows
void flatten_csv(const json& node, const std::string& prefix,
                 std::ostringstream& out) {
    if (node.is_object()) {
        for (const auto& [k, v] : node.items())
            flatten_csv(v, prefix.empty() ? k : prefix + "." + k, out);
    } else if (node.is_array()) {
        int i = 0;
        for (const auto& v : node.items())
            flatten_csv(v.value(), prefix + "[" + std::to_string(i++) + "]",
                        out);
    } else {
        out << prefix << "," << node.dump() << "\n";
    }
}

std::string render(const CommonOpts& opts, const json& report) {
    if (opts.format == "csv") {
        std::ostringstream out;
        out << "key,value\n";
        flatten_csv(report, "", out);
        return out.str();
    }
    return report.dump(2) + "\n";
}

json st_report_json(const STReport& r) {
    json j;
    j["M"] = r.M;
    j["class"] = to_string(r.criticality);
    j["q"] = r.q;
    if (r.m_hat) {
        j["m_hat"] = *r.m_hat;
        j["h_hat0"] = *r.h_hat0;
        j["M_hat"] = *r.M_hat;
        j["m_tilde"] = *r.m_tilde;
        j["M_bar"] = *r.M_bar;
        j["alpha"] = *r.alpha;
    }
    return j;
}

// ---------------------------------------------------------------- analyze

int cmd_analyze(const CommonOpts& opts, const std::string& refine_path) {
    const LFModel model = resolve_model(opts);
    const SpectralSummary s = analyze(model, {}, opts.tol);

    json report = report_header(opts, model);
    json spec;
    spec["class"] = to_string(s.criticality);
    spec["mu"] = std::isfinite(s.mu) ? json(s.mu) : json("inf");
    spec["k_used"] = s.k_used;
    spec["q"] = vec_to_json(s.q);
    if (s.rho) {
        spec["rho"] = *s.rho;
        spec["beta"] = *s.beta;
        spec["u"] = vec_to_json(*s.u);
        spec["v"] = vec_to_json(*s.v);
    }
    report["spectral"] = spec;

    if (model.n_types == 1) {
        const STParams p{model.h0[0], model.m};
        report["singletype"] = st_report_json(st_analyze(p));
    }

    if (!refine_path.empty()) {
        // truncation diagnostic: same analysis on a user-supplied larger
        // truncation of the same countable model
        const LFModel refined = load_model_file(refine_path);
        const SpectralSummary rs = analyze(refined, {}, opts.tol);
        json diag;
        diag["n_types"] = model.n_types;
        diag["n_types_refined"] = refined.n_types;
        if (s.rho && rs.rho) {
            diag["rho"] = *s.rho;
            diag["rho_refined"] = *rs.rho;
            diag["delta_rho"] = std::abs(*s.rho - *rs.rho);
        }
        const int shared = std::min(model.n_types, refined.n_types);
        diag["max_delta_q_shared"] =
            (s.q.head(shared) - rs.q.head(shared)).lpNorm<Eigen::Infinity>();
        report["refinement"] = diag;
    }

    emit(opts, render(opts, report));
    return kExitOk;
}

// -------------------------------------------------------------- transform

int cmd_transform(const CommonOpts& opts, std::string out_dual,
                  std::string out_hs, bool hs_only) {
    const LFModel model = resolve_model(opts);
    const SpectralSummary s = analyze(model, {}, opts.tol);
    if (s.criticality != Criticality::supercritical)
        throw NotSupercritical("transform: model is not supercritical");

    const std::string stem =
        opts.model_path.empty()
            ? std::string("single")
            : std::filesystem::path(opts.model_path).stem().string();
    if (out_dual.empty()) out_dual = stem + ".dual.json";
    if (out_hs.empty()) out_hs = stem + ".hs.json";

    json report = report_header(opts, model);
    report["rho"] = *s.rho;

    const LFModel hs = hs_triplet(model, s);
    {
        std::ofstream f(out_hs, std::ios::binary);
        if (!f) throw Error("cannot write " + out_hs);
        f << save_model(hs);
    }
    const HsSpectral hss = hs_spectral_closed(model, s);
    const double rho_tilde = solve_rho(hs, opts.tol);
    const double beta_tilde = compute_beta(hs, rho_tilde);
    json hs_rep;
    hs_rep["file"] = out_hs;
    hs_rep["m_tilde"] = hs.m;
    hs_rep["g_tilde"] = vec_to_json(hs.g);
    hs_rep["rho_closed"] = hss.rho_tilde;
    hs_rep["rho_resolved"] = rho_tilde;
    hs_rep["delta_rho"] = std::abs(rho_tilde - hss.rho_tilde);
    hs_rep["beta_closed"] = hss.beta_tilde;
    hs_rep["beta_resolved"] = beta_tilde;
    hs_rep["delta_beta"] = std::abs(beta_tilde - hss.beta_tilde);
    hs_rep["delta_u"] = (eigen_u(hs, rho_tilde, beta_tilde) - hss.u_tilde)
                            .lpNorm<Eigen::Infinity>();
    hs_rep["delta_v"] =
        (eigen_v(hs, rho_tilde) - hss.v_tilde).lpNorm<Eigen::Infinity>();
    report["hs"] = hs_rep;

    if (!hs_only) {
        // throws DualDegenerate at the rho = 1+m / q = 0 boundary; the HS
        // file above is already on disk by then
        const LFModel dual = dual_triplet(model, s);
        {
            std::ofstream f(out_dual, std::ios::binary);
            if (!f) throw Error("cannot write " + out_dual);
            f << save_model(dual);
        }
        const DualSpectral ds = dual_spectral_closed(model, s);
        const double rho_hat = solve_rho_any(dual, opts.tol);
        const double beta_hat = compute_beta(dual, rho_hat);
        json dual_rep;
        dual_rep["file"] = out_dual;
        dual_rep["m_hat"] = dual.m;
        dual_rep["g_hat"] = vec_to_json(dual.g);
        dual_rep["rho_closed"] = ds.rho_hat;
        dual_rep["rho_resolved"] = rho_hat;
        dual_rep["delta_rho"] = std::abs(rho_hat - ds.rho_hat);
        dual_rep["beta_closed"] = ds.beta_hat;
        dual_rep["beta_resolved"] = beta_hat;
        dual_rep["delta_beta"] = std::abs(beta_hat - ds.beta_hat);
        dual_rep["delta_u"] = (eigen_u(dual, rho_hat, beta_hat) - ds.u_hat)
                                  .lpNorm<Eigen::Infinity>();
        dual_rep["delta_v"] =
            (eigen_v(dual, rho_hat) - ds.v_hat).lpNorm<Eigen::Infinity>();
        report["dual"] = dual_rep;
    }

    emit(opts, render(opts, report));
    return kExitOk;
}

// ----------------------------------------------------------------- verify

struct Check {
    std::string name;
    double residual;
    double tol;
    std::string note;
};

int cmd_verify(const CommonOpts& opts, int points, double inject_q_error) {
    const LFModel model = resolve_model(opts);
    SpectralSummary s = analyze(model, {}, opts.tol);
    if (s.criticality != Criticality::supercritical)
        throw NotSupercritical("verify: model is not supercritical");
    if (inject_q_error != 0.0) {
        // diagnostic: corrupt q to confirm the checks actually bite
        Eigen::VectorXd q = s.q;
        q[0] = std::min(1.0, q[0] + inject_q_error);
        s.q = q;
    }

    const double rho = *s.rho;
    const int n = model.n_types;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::MatrixXd M = mean_matrix(model);
    std::vector<Check> checks;
    // a check that cannot even be computed (construction blew up on
    // inconsistent inputs) is reported as an infinite residual, not a crash
    auto add = [&checks](const std::string& name, double tol,
                         auto&& residual_fn) {
        double residual = std::numeric_limits<double>::infinity();
        std::string note;
        try {
            residual = residual_fn();
        } catch (const std::exception& e) {
            note = e.what();
        }
        checks.push_back({name, residual, tol, std::move(note)});
    };

    add("fixed_point_q", 1e-8, [&] {
        return (s.q - fixed_point_q(model)).lpNorm<Eigen::Infinity>();
    });
    add("normalization_v_u", 1e-10,
        [&] { return std::abs(s.v->dot(*s.u) - 1.0); });
    add("normalization_v_1", 1e-10, [&] { return std::abs(s.v->sum() - 1.0); });
    add("left_eigenvector", 1e-8, [&] {
        return (M.transpose() * *s.v - rho * *s.v).lpNorm<Eigen::Infinity>();
    });
    add("right_eigenvector", 1e-8, [&] {
        return (M * *s.u - rho * *s.u).lpNorm<Eigen::Infinity>();
    });
    add("pgf_fixed_point", 1e-10, [&] {
        return (pgf_eval(model, s.q) - s.q).lpNorm<Eigen::Infinity>();
    });
    add("g_q_identity", 1e-10, [&] {
        return std::abs(model.g.dot(s.q) - (1.0 + model.m - rho) / model.m);
    });
    add("H_q_identity", 1e-10, [&] {
        return (model.H * s.q -
                rho * (model.H.rowwise().sum() - ones + s.q))
            .lpNorm<Eigen::Infinity>();
    });

    // m sum_n g H^n q^t = rho and (rho-1) sum_n H^n q^t = rho (1-q)
    Eigen::VectorXd hq_acc = Eigen::VectorXd::Zero(n);
    double ghq_acc = 0.0;
    {
        Eigen::VectorXd w = model.H * s.q;
        Eigen::RowVectorXd gw = model.g.transpose() * model.H;
        for (int k = 0; k < 200000; ++k) {
            hq_acc += w;
            ghq_acc += gw.dot(s.q);
            if (w.lpNorm<Eigen::Infinity>() < 1e-17) break;
            w = model.H * w;
            gw *= model.H;
        }
    }
    add("mu_r_identity", 1e-8,
        [&] { return std::abs(model.m * ghq_acc - rho); });
    add("q_u_r_identity", 1e-8, [&] {
        return ((rho - 1.0) * hq_acc - rho * (ones - s.q))
            .lpNorm<Eigen::Infinity>();
    });

    std::optional<LFModel> dual, hs;
    std::optional<SkeletonLaw> law;
    try {
        dual = dual_triplet(model, s);
    } catch (const std::exception&) {
    }
    try {
        hs = hs_triplet(model, s);
    } catch (const std::exception&) {
    }
    try {
        law = skeleton_law(model, s);
    } catch (const std::exception&) {
    }
    auto require = [](const auto& opt, const char* what) -> decltype(auto) {
        if (!opt) throw Error(std::string(what) + " could not be built");
        return *opt;
    };

    add("ghat_Hhat_identity", 1e-10, [&] {
        const LFModel& d = require(dual, "dual triplet");
        double worst = 0.0;
        Eigen::RowVectorXd lhs = d.g.transpose();
        Eigen::RowVectorXd gHk = model.g.transpose();
        const double c = model.m / (1.0 + model.m - rho);
        for (int k = 0; k <= 10; ++k) {
            const Eigen::RowVectorXd rhs =
                c / std::pow(rho, k) * gHk.cwiseProduct(s.q.transpose());
            worst = std::max(worst, (lhs - rhs).lpNorm<Eigen::Infinity>());
            lhs *= d.H;
            gHk *= model.H;
        }
        return worst;
    });

    add("hs_rows_stochastic", 1e-12, [&] {
        return (require(hs, "HS triplet").H.rowwise().sum() - ones)
            .lpNorm<Eigen::Infinity>();
    });
    add("triplet_mixture", 1e-12, [&] {
        const LFModel& h = require(hs, "HS triplet");
        const LFModel& d = require(dual, "dual triplet");
        return (h.m * h.g + (model.m - h.m) * d.g - model.m * model.g)
            .lpNorm<Eigen::Infinity>();
    });

    add("dual_rho_roundtrip", 1e-9, [&] {
        return std::abs(
            solve_rho_any(require(dual, "dual triplet"), opts.tol) * rho -
            1.0);
    });
    add("hs_rho_roundtrip", 1e-9, [&] {
        return std::abs(solve_rho(require(hs, "HS triplet"), opts.tol) - rho);
    });

    add("dual_beta_closed", 1e-8, [&] {
        const LFModel& d = require(dual, "dual triplet");
        const double rh = solve_rho_any(d, opts.tol);
        return std::abs(compute_beta(d, rh) -
                        dual_spectral_closed(model, s).beta_hat);
    });
    add("hs_beta_closed", 1e-8, [&] {
        const LFModel& h = require(hs, "HS triplet");
        const double rt = solve_rho(h, opts.tol);
        return std::abs(compute_beta(h, rt) -
                        hs_spectral_closed(model, s).beta_tilde);
    });
    add("u_tilde_is_ones", 1e-8, [&] {
        const LFModel& h = require(hs, "HS triplet");
        const double rt = solve_rho(h, opts.tol);
        return (eigen_u(h, rt, compute_beta(h, rt)) - ones)
            .lpNorm<Eigen::Infinity>();
    });
    add("u_hat_closed", 1e-7, [&] {
        const LFModel& d = require(dual, "dual triplet");
        const double rh = solve_rho_any(d, opts.tol);
        return (eigen_u(d, rh, compute_beta(d, rh)) -
                dual_spectral_closed(model, s).u_hat)
            .lpNorm<Eigen::Infinity>();
    });
    add("v_hat_closed", 1e-7, [&] {
        const LFModel& d = require(dual, "dual triplet");
        const double rh = solve_rho_any(d, opts.tol);
        return (eigen_v(d, rh) - dual_spectral_closed(model, s).v_hat)
            .lpNorm<Eigen::Infinity>();
    });
    add("v_tilde_closed", 1e-7, [&] {
        const LFModel& h = require(hs, "HS triplet");
        const double rt = solve_rho(h, opts.tol);
        return (eigen_v(h, rt) - hs_spectral_closed(model, s).v_tilde)
            .lpNorm<Eigen::Infinity>();
    });

    // pointwise identity sweeps at seeded random probe points
    RngStream rng(opts.seed);
    std::vector<Eigen::VectorXd> sweep_s, sweep_t;
    for (int r = 0; r < points; ++r) {
        Eigen::VectorXd sp(n), tp(n);
        for (int j = 0; j < n; ++j) {
            sp[j] = rng.next_unit();
            tp[j] = rng.next_unit();
        }
        sweep_s.push_back(std::move(sp));
        sweep_t.push_back(std::move(tp));
    }
    add("mixture_residual_max", 1e-10, [&] {
        double worst = 0.0;
        for (int r = 0; r < points; ++r)
            worst = std::max(worst, mixture_residual(model, s, sweep_s[r])
                                        .lpNorm<Eigen::Infinity>());
        return worst;
    });
    add("F_route_agreement_max", 1e-10, [&] {
        const SkeletonLaw& l = require(law, "skeleton law");
        double worst = 0.0;
        for (int r = 0; r < points; ++r) {
            const Eigen::VectorXd def =
                joint_pgf_F(model, s, sweep_s[r], sweep_t[r]);
            const Eigen::VectorXd fac =
                joint_pgf_F_factorized(l, sweep_s[r], sweep_t[r]);
            worst = std::max(worst, (def - fac).lpNorm<Eigen::Infinity>());
        }
        return worst;
    });
    add("F_marginal_is_hs_pgf", 1e-10, [&] {
        const LFModel& h = require(hs, "HS triplet");
        double worst = 0.0;
        for (int r = 0; r < points; ++r)
            worst = std::max(worst,
                             (joint_pgf_F(model, s, sweep_s[r], ones) -
                              pgf_eval(h, sweep_s[r]))
                                 .lpNorm<Eigen::Infinity>());
        return worst;
    });

    add("alpha_in_unit_interval", 0.5, [&] {
        const SkeletonLaw& l = require(law, "skeleton law");
        for (int i = 0; i < n; ++i)
            if (!(l.alpha[i] > 0.0 && l.alpha[i] < 1.0)) return 1.0;
        return 0.0;
    });
    add("mbar_forms_agree", 1e-9, [&] {
        const Eigen::VectorXd mbar = skeleton_total_mean(model, s);
        const Eigen::VectorXd M_i = (1.0 + model.m) * (ones - model.h0);
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            const double alt =
                M_i[i] +
                (1.0 + model.m) *
                    (model.h0[i] + (rho - 1.0) * (s.q[i] - model.h0[i]) /
                                       (rho * (1.0 - s.q[i])));
            worst = std::max(worst, std::abs(mbar[i] - alt));
        }
        return worst;
    });
    add("mbar_exceeds_mean", 0.5, [&] {
        const Eigen::VectorXd mbar = skeleton_total_mean(model, s);
        const Eigen::VectorXd M_i = (1.0 + model.m) * (ones - model.h0);
        for (int i = 0; i < n; ++i)
            if (mbar[i] <= M_i[i]) return 1.0;
        return 0.0;
    });

    json report = report_header(opts, model);
    report["points"] = points;
    bool all_pass = true;
    json arr = json::array();
    for (const Check& c : checks) {
        const bool pass = c.residual <= c.tol;
        all_pass = all_pass && pass;
        json entry = {{"name", c.name},
                      {"residual", std::isfinite(c.residual)
                                       ? json(c.residual)
                                       : json("inf")},
                      {"tol", c.tol},
                      {"pass", pass}};
        if (!c.note.empty()) entry["note"] = c.note;
        arr.push_back(entry);
    }
    report["checks"] = arr;
    report["pass"] = all_pass;
    emit(opts, render(opts, report));
    return all_pass ? kExitOk : kExitInternal;
}

// --------------------------------------------------------------- simulate

std::vector<Eigen::VectorXd> parse_probes(const std::string& text, int n) {
    std::vector<Eigen::VectorXd> probes;
    if (text.empty()) {
        probes.push_back(Eigen::VectorXd::Constant(n, 0.5));
        return probes;
    }
    std::string body = text;
    if (body[0] == '@') {
        std::ifstream in(body.substr(1));
        if (!in) throw ParseError("cannot open probe file " + body.substr(1));
        std::ostringstream buf;
        buf << in.rdbuf();
        body = buf.str();
        for (char& c : body)
            if (c == '\n') c = ';';
    }
    std::istringstream pts(body);
    std::string point;
    while (std::getline(pts, point, ';')) {
        if (point.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream comps(point);
        std::string comp;
        std::vector<double> vals;
        while (std::getline(comps, comp, ',')) vals.push_back(std::stod(comp));
        if (static_cast<int>(vals.size()) != n)
            throw ParseError("probe point has wrong dimension");
        Eigen::VectorXd p(n);
        for (int j = 0; j < n; ++j) p[j] = vals[j];
        probes.push_back(std::move(p));
    }
    if (probes.empty()) throw ParseError("no probe points parsed");
    return probes;
}

// Fixed-size accumulator: sums and sums of squares of per-replicate
// observables plus counters.
struct Accum {
    std::vector<double> sum, sum_sq;
    std::int64_t n = 0;        // replicates contributing to sums
    std::int64_t n_total = 0;  // all replicates
    std::int64_t overflowed = 0;
    std::int64_t extinct = 0;

    explicit Accum(std::size_t width = 0)
        : sum(width, 0.0), sum_sq(width, 0.0) {}

    void add(const std::vector<double>& x) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            sum[i] += x[i];
            sum_sq[i] += x[i] * x[i];
        }
        ++n;
    }
    void merge(const Accum& other) {
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += other.sum[i];
            sum_sq[i] += other.sum_sq[i];
        }
        n += other.n;
        n_total += other.n_total;
        overflowed += other.overflowed;
        extinct += other.extinct;
    }
    double mean(std::size_t i) const { return sum[i] / n; }
    double se(std::size_t i) const {
        if (n < 2) return 0.0;
        const double m = mean(i);
        const double var = std::max(0.0, (sum_sq[i] - n * m * m) / (n - 1.0));
        return std::sqrt(var / n);
    }
};

enum class ReplicateOutcome { ok, overflowed, extinct_ok };

// Runs `replicates` jobs split into fixed 256-replicate blocks handed to
// `workers` threads. Blocks are merged in index order, so the totals are
// byte-identical for any worker count; the observable function must derive
// all of its randomness from the global replicate index it receives.
template <typename Fn>
Accum run_blocks(std::int64_t replicates, std::size_t width, int workers,
                 Fn&& observe) {
    constexpr std::int64_t kBlock = 256;
    const std::int64_t n_blocks = (replicates + kBlock - 1) / kBlock;
    std::vector<Accum> blocks(static_cast<std::size_t>(n_blocks),
                              Accum(width));
    std::atomic<std::int64_t> next{0};
    std::atomic<bool> failed{false};
    std::string error_msg;
    std::mutex error_mutex;

    auto work = [&]() {
        std::vector<double> x(width);
        for (;;) {
            const std::int64_t b = next.fetch_add(1);
            if (b >= n_blocks || failed.load()) break;
            const std::int64_t lo = b * kBlock;
            const std::int64_t hi = std::min(replicates, lo + kBlock);
            try {
                for (std::int64_t r = lo; r < hi; ++r) {
                    Accum& blk = blocks[static_cast<std::size_t>(b)];
                    ++blk.n_total;
                    const ReplicateOutcome outcome = observe(r, x);
                    if (outcome == ReplicateOutcome::overflowed) {
                        ++blk.overflowed;
                    } else {
                        if (outcome == ReplicateOutcome::extinct_ok)
                            ++blk.extinct;
                        blk.add(x);
                    }
                }
            } catch (const std::exception& e) {
                std::scoped_lock lock(error_mutex);
                error_msg = e.what();
                failed.store(true);
                break;
            }
        }
    };

    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }
    if (failed.load()) throw Error("simulate worker failed: " + error_msg);

    Accum total(width);
    for (const Accum& b : blocks) total.merge(b);
    return total;
}

struct CsvWriter {
    std::ostringstream out;

    void comment(const std::string& line) { out << "# " << line << "\n"; }
    void header() { out << "statistic,a,b,value,stderr,n\n"; }
    void row(const std::string& stat, const std::string& a,
             const std::string& b, double value, double se, std::int64_t n) {
        out << stat << "," << a << "," << b << "," << fmt_double(value) << ","
            << fmt_double(se) << "," << n << "\n";
    }
};

int cmd_simulate(const CommonOpts& opts, const std::string& mode,
                 std::int64_t replicates, int horizon, int root_type_1based,
                 const std::string& probe_text, int workers, std::int64_t cap,
                 const std::string& dot_path) {
    if (!opts.seed_given)
        throw DomainError("simulate: --seed is required for reproducibility");
    if (replicates <= 0) throw EmptySamples("simulate: replicates = 0");
    const LFModel model = resolve_model(opts);
    const int n = model.n_types;
    const int root = root_type_1based - 1;
    if (root < 0 || root >= n)
        throw DomainError("simulate: --root-type out of range");
    const std::vector<Eigen::VectorXd> probes = parse_probes(probe_text, n);
    const RngStream base(opts.seed);

    CsvWriter csv;
    csv.comment(std::string("lfbgw ") + kVersion);
    csv.comment("model_digest=" + model_digest(model));
    csv.comment("seed=" + std::to_string(opts.seed) + " mode=" + mode +
                " replicates=" + std::to_string(replicates) +
                " horizon=" + std::to_string(horizon) +
                " root_type=" + std::to_string(root_type_1based) +
                " rho_tol=" + fmt_double(opts.tol));
    csv.header();

    if (mode == "offspring") {
        // one sweep per root type so every row of M gets covered
        for (int i = 0; i < n; ++i) {
            const std::size_t width = n + probes.size();
            const Accum acc = run_blocks(
                replicates, width, workers,
                [&](std::int64_t r, std::vector<double>& x) {
                    RngStream rng = base.substream(
                        static_cast<std::uint64_t>(i) * replicates + r);
                    const OffspringSample s = sample_offspring(model, i, rng);
                    for (int j = 0; j < n; ++j) x[j] = s.counts[j];
                    for (std::size_t p = 0; p < probes.size(); ++p) {
                        double v = 1.0;
                        for (int j = 0; j < n; ++j)
                            v *= std::pow(probes[p][j], s.counts[j]);
                        x[n + p] = v;
                    }
                    return ReplicateOutcome::ok;
                });
            for (int j = 0; j < n; ++j)
                csv.row("mean_count", std::to_string(i + 1),
                        std::to_string(j + 1), acc.mean(j), acc.se(j), acc.n);
            for (std::size_t p = 0; p < probes.size(); ++p)
                csv.row("pgf", std::to_string(i + 1), std::to_string(p),
                        acc.mean(n + p), acc.se(n + p), acc.n);
        }
    } else if (mode == "skeleton") {
        const SpectralSummary sum = analyze(model, {}, opts.tol);
        const SkeletonLaw law = skeleton_law(model, sum);
        const std::size_t width = 3 + probes.size();
        const Accum acc = run_blocks(
            replicates, width, workers,
            [&](std::int64_t r, std::vector<double>& x) {
                RngStream rng = base.substream(r);
                const OffspringSample s =
                    sample_skeleton_offspring(law, root, rng);
                x[0] = s.counts.sum();
                x[1] = s.skeleton_counts.sum();
                x[2] = s.doomed_counts.sum();
                for (std::size_t p = 0; p < probes.size(); ++p) {
                    double v = 1.0;
                    for (int j = 0; j < n; ++j)
                        v *= std::pow(probes[p][j], s.skeleton_counts[j]);
                    x[3 + p] = v;
                }
                return ReplicateOutcome::ok;
            });
        csv.row("total_mean", std::to_string(root + 1), "", acc.mean(0),
                acc.se(0), acc.n);
        csv.row("skeleton_total_mean", std::to_string(root + 1), "",
                acc.mean(1), acc.se(1), acc.n);
        csv.row("doomed_total_mean", std::to_string(root + 1), "", acc.mean(2),
                acc.se(2), acc.n);
        for (std::size_t p = 0; p < probes.size(); ++p)
            csv.row("skeleton_pgf", std::to_string(root + 1),
                    std::to_string(p), acc.mean(3 + p), acc.se(3 + p), acc.n);
    } else if (mode == "generations") {
        // per-generation totals only for replicates under the cap; a capped
        // replicate still counts for the extinction frequency (it survived)
        const std::size_t width = static_cast<std::size_t>(horizon) + 1;
        Eigen::VectorX<std::int64_t> init =
            Eigen::VectorX<std::int64_t>::Zero(n);
        init[root] = 1;
        const Accum acc = run_blocks(
            replicates, width, workers,
            [&](std::int64_t r, std::vector<double>& x) {
                RngStream rng = base.substream(r);
                try {
                    const auto gens =
                        simulate_generations(model, init, horizon, rng, cap);
                    for (int gen = 0; gen <= horizon; ++gen)
                        x[gen] = static_cast<double>(gens[gen].sum());
                    return gens.back().sum() == 0
                               ? ReplicateOutcome::extinct_ok
                               : ReplicateOutcome::ok;
                } catch (const PopulationOverflow&) {
                    return ReplicateOutcome::overflowed;
                }
            });
        for (int gen = 0; gen <= horizon; ++gen)
            csv.row("generation_total_mean", std::to_string(gen), "",
                    acc.mean(gen), acc.se(gen), acc.n);
        const double p_ext =
            static_cast<double>(acc.extinct) / acc.n_total;
        csv.row("extinct_freq", std::to_string(horizon), "", p_ext,
                std::sqrt(p_ext * (1.0 - p_ext) / acc.n_total), acc.n_total);
        csv.row("overflow_freq", "", "",
                static_cast<double>(acc.overflowed) / acc.n_total, 0.0,
                acc.n_total);
    } else if (mode == "tree") {
        const SpectralSummary sum = analyze(model, {}, opts.tol);
        const std::size_t width = 2 * (horizon + 1) + 2;
        const Accum acc = run_blocks(
            replicates, width, workers,
            [&](std::int64_t r, std::vector<double>& x) {
                const GenealogyTree tree = simulate_tree_labeled(
                    model, sum, root, horizon, base.substream(r), cap);
                x[0] = tree.nodes[0].skeleton ? 1.0 : 0.0;
                x[1] = 1.0 - x[0];
                std::vector<std::int64_t> skel(horizon + 1, 0),
                    doom(horizon + 1, 0);
                for (const TreeNode& node : tree.nodes)
                    (node.skeleton ? skel : doom)[node.generation] += 1;
                for (int gen = 0; gen <= horizon; ++gen) {
                    x[2 + 2 * gen] = static_cast<double>(skel[gen]);
                    x[3 + 2 * gen] = static_cast<double>(doom[gen]);
                }
                return ReplicateOutcome::ok;
            });
        csv.row("root_skeleton_freq", std::to_string(root + 1), "",
                acc.mean(0), acc.se(0), acc.n);
        csv.row("root_doomed_freq", std::to_string(root + 1), "", acc.mean(1),
                acc.se(1), acc.n);
        for (int gen = 0; gen <= horizon; ++gen) {
            csv.row("skeleton_mean", std::to_string(gen), "",
                    acc.mean(2 + 2 * gen), acc.se(2 + 2 * gen), acc.n);
            csv.row("doomed_mean", std::to_string(gen), "",
                    acc.mean(3 + 2 * gen), acc.se(3 + 2 * gen), acc.n);
        }
        if (!dot_path.empty()) {
            const GenealogyTree tree = simulate_tree_labeled(
                model, sum, root, horizon, base.substream(0), cap);
            std::ofstream f(dot_path, std::ios::binary);
            if (!f) throw Error("cannot write " + dot_path);
            f << tree_to_dot(tree);
        }
    } else {
        throw ParseError("unknown mode " + mode);
    }

    emit(opts, csv.out.str());
    return kExitOk;
}

// --------------------------------------------------------------- validate

int cmd_validate(const CommonOpts& opts) {
    if (opts.model_path.empty())
        throw ParseError("validate: --model is required");
    json report;
    report["tool"] = "lfbgw";
    report["version"] = kVersion;
    try {
        const LFModel model = load_model_file(opts.model_path);
        report["model_digest"] = model_digest(model);
        report["ok"] = true;
        report["violations"] = json::array();
        emit(opts, render(opts, report));
        return kExitOk;
    } catch (const ValidationError& e) {
        report["ok"] = false;
        json arr = json::array();
        for (const Violation& v : e.report.violations)
            arr.push_back({{"rule", v.rule},
                           {"row", v.row + 1},
                           {"col", v.col + 1},
                           {"value", v.value}});
        report["violations"] = arr;
        emit(opts, render(opts, report));
        return kExitParse;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"linear-fractional multitype branching process toolkit"};
    app.require_subcommand(1);

    CommonOpts a_opts, t_opts, v_opts, s_opts, val_opts;

    auto* analyze_cmd =
        app.add_subcommand("analyze", "spectral summary of a model");
    add_common(analyze_cmd, a_opts);
    std::string refine_path;
    analyze_cmd->add_option("--refine", refine_path,
                            "larger-truncation model for a convergence "
                            "diagnostic");

    auto* transform_cmd = app.add_subcommand(
        "transform", "emit dual and Harris-Sevastyanov triplets");
    add_common(transform_cmd, t_opts);
    std::string out_dual, out_hs;
    bool hs_only = false;
    transform_cmd->add_option("--out-dual", out_dual, "dual model output path");
    transform_cmd->add_option("--out-hs", out_hs, "HS model output path");
    transform_cmd->add_flag("--hs-only", hs_only,
                            "skip the dual (valid when extinction is "
                            "impossible)");

    auto* verify_cmd = app.add_subcommand(
        "verify", "run the identity suite at random probe points");
    add_common(verify_cmd, v_opts);
    int points = 100;
    double inject_q_error = 0.0;
    verify_cmd->add_option("--points", points, "probe points (default 100)");
    verify_cmd->add_option("--inject-q-error", inject_q_error,
                           "perturb q[1] to exercise failure reporting");

    auto* simulate_cmd =
        app.add_subcommand("simulate", "Monte Carlo statistics (CSV)");
    add_common(simulate_cmd, s_opts);
    std::string mode = "tree", probe_text, dot_path;
    std::int64_t replicates = 10000, cap = kDefaultPopulationCap;
    int horizon = 10, root_type = 1, workers = 1;
    simulate_cmd
        ->add_option("--mode", mode, "offspring|skeleton|generations|tree")
        ->check(CLI::IsMember({"offspring", "skeleton", "generations",
                               "tree"}));
    simulate_cmd->add_option("--replicates", replicates, "default 10000");
    simulate_cmd->add_option("--horizon", horizon, "generations (default 10)");
    simulate_cmd->add_option("--root-type", root_type,
                             "1-based root type (default 1)");
    simulate_cmd->add_option("--probe-points", probe_text,
                             "'s1,s2;...' or @file");
    simulate_cmd->add_option("--workers", workers, "threads (default 1)");
    simulate_cmd->add_option("--cap", cap, "population cap (default 1e7)");
    simulate_cmd->add_option("--dot", dot_path,
                             "export replicate 0's labeled tree (tree mode)");

    auto* validate_cmd = app.add_subcommand("validate", "check a model file");
    add_common(validate_cmd, val_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (analyze_cmd->parsed()) return cmd_analyze(a_opts, refine_path);
        if (transform_cmd->parsed())
            return cmd_transform(t_opts, out_dual, out_hs, hs_only);
        if (verify_cmd->parsed())
            return cmd_verify(v_opts, points, inject_q_error);
        if (simulate_cmd->parsed())
            return cmd_simulate(s_opts, mode, replicates, horizon, root_type,
                                probe_text, workers, cap, dot_path);
        if (validate_cmd->parsed()) return cmd_validate(val_opts);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    } catch (const NotSupercritical& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const DualDegenerate& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const EmptySamples& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const AlphaOutOfRange& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const PopulationOverflow& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
