// Command-line front end: detect / estimate / regress / arfit / breakdown /
// ca / simulate subcommands with CSV input and JSON + SVG output.
//
// Exit codes: 0 success, 1 usage error, 2 data or numeric error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cellrobust/breakdown.hpp"
#include "cellrobust/ca.hpp"
#include "cellrobust/data_matrix.hpp"
#include "cellrobust/detect.hpp"
#include "cellrobust/errors.hpp"
#include "cellrobust/estimate.hpp"
#include "cellrobust/regress.hpp"
#include "cellrobust/rng.hpp"
#include "cellrobust/univar.hpp"

using json = nlohmann::ordered_json;
using namespace cellrobust;

namespace {

constexpr const char* kVersion = "1.0.0";

unsigned thread_count() {
    if (const char* env = std::getenv("CELLROBUST_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : std::min(hw, 8u);
}

json json_vector(const Vector& v) {
    json a = json::array();
    for (double x : v) a.push_back(x);
    return a;
}

json json_matrix(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

// Missing cells are encoded as null; NaN never appears in output.
json json_matrix_masked(const Matrix& m, const BoolMat& missing) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (missing.rows() == m.rows() && missing(i, j))
                row.push_back(nullptr);
            else
                row.push_back(m(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json json_bool_matrix(const BoolMat& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json json_flags(const CellFlags& f) {
    json r;
    r["cutoff"] = f.cutoff;
    r["flagged_count"] = f.flagged_count();
    r["flags"] = json_bool_matrix(f.flags);
    r["stdres"] = json_matrix_masked(f.stdres, f.missing);
    r["predicted"] = json_matrix(f.predicted);
    json rf = json::array();
    for (auto v : f.row_flags) rf.push_back(v != 0);
    r["row_flags"] = std::move(rf);
    return r;
}

json json_model(const CovModel& m) {
    json r;
    r["method"] = m.method;
    r["mu"] = json_vector(m.mu);
    r["sigma"] = json_matrix(m.sigma);
    r["n_used"] = json_matrix(m.n_used);
    if (m.loglik)
        r["loglik"] = *m.loglik;
    else
        r["loglik"] = nullptr;
    return r;
}

json json_regfit(const RegFit& f) {
    json r;
    r["alpha"] = f.alpha;
    r["beta"] = json_vector(f.beta);
    r["sigma_hat"] = f.sigma_hat;
    r["source_model"] = f.source_model;
    r["sigma_clamped"] = f.sigma_clamped;
    return r;
}

void write_json(const std::string& op, json inputs, json result, const std::string& path) {
    json doc;
    doc["op"] = op;
    doc["inputs"] = std::move(inputs);
    doc["result"] = std::move(result);
    write_text_atomic(path, doc.dump(2) + "\n");
}

Vector read_series(const std::string& path) {
    const DataMatrix m = read_csv(path);
    if (m.d() != 1) throw DataError(path + ": expected a single-column series");
    Vector y;
    y.reserve(m.n());
    for (std::size_t i = 0; i < m.n(); ++i) {
        if (m.is_missing(i, 0)) throw DataError(path + ": series contains missing values");
        y.push_back(m.values(i, 0));
    }
    return y;
}

struct DetectArgs {
    std::string method = "ddc";
    double cutoff = kDefaultCutoff;
    double corr_threshold = 0.5;
    std::size_t max_predictors = 10;
    std::string in, out, cellmap;
};

struct EstimateArgs {
    std::string method;
    std::string detector = "ddc";
    std::string scale = "mad";
    double cutoff = kDefaultCutoff;
    std::string in, out;
};

struct RegressArgs {
    std::string in, out;
    std::string response = "last";
    std::string cov = "classical";
    bool no_intercept = false;
};

struct ArfitArgs {
    std::string in, out;
    std::size_t order = 1;
    std::string cov = "classical";
    bool no_intercept = false;
};

struct CurveArgs {
    std::size_t n = 100, d = 4;
    double value = 500.0;
    std::size_t reps = 200;
    std::uint64_t seed = 1;
    std::string out, plot;
};

struct AttackArgs {
    std::string kind;
    std::string in, out, summary;
    double c = 0.0;
    double beta0 = 0.0;
};

struct CaArgs {
    std::string in, out, biplot, cellmap;
    std::string method = "classical";
    std::string k = "auto";
};

struct SimARArgs {
    std::size_t n = 1000;
    std::string phi = "0.5,0.2,0.2";
    double sigma = 1.0;
    std::uint64_t seed = 1;
    std::size_t every = 0;
    double value = 10.0;
    std::string out;
};

struct SimTableArgs {
    std::size_t n = 1000, d = 10;
    double eps = 0.10;
    double value = 5.0;
    std::uint64_t seed = 1;
    std::string out, truth;
};

Vector parse_phi(const std::string& s) {
    Vector phi;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t pos = s.find(',', start);
        if (pos == std::string::npos) pos = s.size();
        phi.push_back(std::stod(s.substr(start, pos - start)));
        start = pos + 1;
    }
    return phi;
}

int run_detect(const DetectArgs& a) {
    const DataMatrix x = read_csv(a.in);
    CellFlags flags;
    if (a.method == "univariate") {
        flags = flag_univariate(x, a.cutoff);
    } else {
        DdcOptions opts;
        opts.cutoff = a.cutoff;
        opts.corr_threshold = a.corr_threshold;
        opts.max_predictors = a.max_predictors;
        flags = ddc(x, opts);
    }
    if (!a.out.empty()) {
        json inputs;
        inputs["in"] = a.in;
        inputs["method"] = a.method;
        inputs["cutoff"] = a.cutoff;
        write_json("detect", std::move(inputs), json_flags(flags), a.out);
    }
    if (!a.cellmap.empty()) write_cellmap(flags, x.row_names, x.col_names, a.cellmap);
    return 0;
}

int run_estimate(const EstimateArgs& a) {
    const DataMatrix x = read_csv(a.in);
    json result;
    if (a.method == "classical") {
        result = json_model(classical_cov(x));
    } else if (a.method == "coordmedian") {
        result["method"] = "coordmedian";
        result["mu"] = json_vector(coordwise_location(x, LocationKind::Median));
        result["sigma"] = nullptr;
    } else if (a.method == "spatialmedian") {
        result["method"] = "spatialmedian";
        result["mu"] = json_vector(spatial_median(x));
        result["sigma"] = nullptr;
    } else if (a.method == "twostep") {
        const DetectorKind det =
            a.detector == "univariate" ? DetectorKind::Univariate : DetectorKind::Ddc;
        const TwoStepFit fit = two_step_cov(x, det, a.cutoff);
        result = json_model(fit.em.model);
        result["flagged_count"] = fit.flags.flagged_count();
        result["em_iterations"] = fit.em.iterations;
    } else {
        const RobustScaleKind kind =
            a.scale == "qn" ? RobustScaleKind::Qn : RobustScaleKind::Mad;
        result = json_model(pairwise_cov(x, kind));
    }
    json inputs;
    inputs["in"] = a.in;
    inputs["method"] = a.method;
    write_json("estimate", std::move(inputs), std::move(result), a.out);
    return 0;
}

CovMethod parse_cov(const std::string& s) {
    if (s == "classical") return CovMethod::Classical;
    if (s == "twostep") return CovMethod::TwoStep;
    return CovMethod::Pairwise;
}

int run_regress(const RegressArgs& a) {
    const DataMatrix z = read_csv(a.in);
    std::size_t response = z.d() - 1;
    if (a.response != "last") {
        const long idx = std::stol(a.response);
        if (idx < 1 || static_cast<std::size_t>(idx) > z.d())
            throw DataError("regress: response index out of range");
        response = static_cast<std::size_t>(idx - 1);
    }
    CovModel model;
    switch (parse_cov(a.cov)) {
        case CovMethod::Classical: model = classical_cov(z); break;
        case CovMethod::TwoStep: model = two_step_cov(z).em.model; break;
        case CovMethod::Pairwise: model = pairwise_cov(z); break;
    }
    const RegFit fit = a.no_intercept ? plugin_regression_no_intercept(model, response)
                                      : plugin_regression(model, response);
    json inputs;
    inputs["in"] = a.in;
    inputs["response"] = a.response;
    inputs["cov"] = a.cov;
    write_json("regress", std::move(inputs), json_regfit(fit), a.out);
    return 0;
}

int run_arfit(const ArfitArgs& a) {
    const Vector y = read_series(a.in);
    const RegFit fit = ar_fit(y, a.order, parse_cov(a.cov), !a.no_intercept);
    json inputs;
    inputs["in"] = a.in;
    inputs["order"] = a.order;
    inputs["cov"] = a.cov;
    inputs["intercept"] = !a.no_intercept;
    write_json("arfit", std::move(inputs), json_regfit(fit), a.out);
    return 0;
}

int run_curve(const CurveArgs& a) {
    const std::vector<CurveEstimator> est = {
        CurveEstimator::Mean, CurveEstimator::SpatialMedian, CurveEstimator::CoordMedian,
        CurveEstimator::CoordUnivMcd};
    const BreakdownCurve curve =
        breakdown_curve(est, a.n, a.d, a.value, a.reps, a.seed, thread_count());
    if (!a.out.empty()) write_text_atomic(a.out, breakdown_curve_csv(curve));
    if (!a.plot.empty()) write_text_atomic(a.plot, breakdown_curve_svg(curve));
    return 0;
}

int run_attack(const AttackArgs& a) {
    const DataMatrix x = read_csv(a.in);
    AttackResult res;
    if (a.kind == "location") {
        res = hyperplane_attack_location(x, a.c);
    } else if (a.kind == "implosion") {
        res = implosion_attack(x);
    } else {
        res = regression_attack(x, a.beta0);
    }
    if (!a.out.empty()) write_csv(res.contaminated, a.out);
    if (!a.summary.empty()) {
        json inputs;
        inputs["in"] = a.in;
        inputs["kind"] = a.kind;
        if (a.kind == "location") inputs["c"] = a.c;
        if (a.kind == "regression") inputs["beta0"] = a.beta0;
        json result;
        result["param"] = res.param;
        json counts = json::array();
        for (std::size_t c : res.per_column_count) counts.push_back(c);
        result["per_column_count"] = std::move(counts);
        result["replaced_total"] = res.replaced.count();
        write_json("breakdown_attack", std::move(inputs), std::move(result), a.summary);
    }
    return 0;
}

int run_ca(const CaArgs& a) {
    const DataMatrix data = read_csv(a.in);
    const ContingencyTable table = ContingencyTable::from_data(data);
    const std::size_t max_k = std::min(table.counts.rows(), table.counts.cols()) - 1;

    CASolution sol;
    if (a.method == "classical") {
        const std::size_t k = a.k == "auto" ? max_k : std::stoul(a.k);
        sol = classical_ca(table, k);
    } else {
        const std::size_t k = a.k == "auto" ? 0 : std::stoul(a.k);
        sol = robust_ca(table, k);
    }

    if (!a.out.empty()) {
        json inputs;
        inputs["in"] = a.in;
        inputs["method"] = a.method;
        inputs["k"] = a.k;
        json result;
        result["k"] = sol.k;
        result["gamma"] = json_vector(sol.gamma);
        result["row_pc"] = json_matrix(sol.row_pc);
        result["col_pc"] = json_matrix(sol.col_pc);
        result["u"] = json_matrix(sol.u);
        result["v"] = json_matrix(sol.v);
        result["row_names"] = sol.row_names;
        result["col_names"] = sol.col_names;
        if (sol.flags)
            result["flags"] = json_flags(*sol.flags);
        else
            result["flags"] = nullptr;
        write_json("ca", std::move(inputs), std::move(result), a.out);
    }
    if (!a.biplot.empty()) write_biplot(sol, a.biplot);
    if (!a.cellmap.empty()) {
        if (!sol.flags) throw CLI::ValidationError("--cellmap requires --method robust");
        write_cellmap(*sol.flags, sol.row_names, sol.col_names, a.cellmap);
    }
    return 0;
}

int run_sim_ar(const SimARArgs& a) {
    const Vector phi = parse_phi(a.phi);
    Rng rng(a.seed);
    const std::size_t burn = 500;
    Vector x(a.n + burn, 0.0);
    for (std::size_t t = phi.size(); t < x.size(); ++t) {
        double v = a.sigma * rng.normal();
        for (std::size_t j = 0; j < phi.size(); ++j) v += phi[j] * x[t - 1 - j];
        x[t] = v;
    }
    Vector y(x.end() - static_cast<std::ptrdiff_t>(a.n), x.end());
    if (a.every > 0)
        for (std::size_t t = 0; t < y.size(); t += a.every) y[t] = a.value;

    DataMatrix out;
    out.values = Matrix(a.n, 1);
    for (std::size_t i = 0; i < a.n; ++i) out.values(i, 0) = y[i];
    out.missing = BoolMat(a.n, 1);
    out.col_names = {"y"};
    out.row_names = default_row_names(a.n);
    write_csv(out, a.out);
    return 0;
}

int run_sim_table1(const SimTableArgs& a) {
    Rng rng(a.seed);
    const double rho = -0.9;
    const double s = std::sqrt(1.0 - rho * rho);
    Matrix x(a.n, a.d);
    for (std::size_t i = 0; i < a.n; ++i) {
        x(i, 0) = rng.normal();
        for (std::size_t j = 1; j < a.d; ++j) x(i, j) = rho * x(i, j - 1) + s * rng.normal();
    }
    BoolMat truth(a.n, a.d);
    for (std::size_t i = 0; i < a.n; ++i)
        for (std::size_t j = 0; j < a.d; ++j)
            if (rng.uniform() < a.eps) {
                x(i, j) = a.value;
                truth.set(i, j, true);
            }
    write_csv(DataMatrix::from_matrix(std::move(x)), a.out);
    if (!a.truth.empty()) {
        DataMatrix t;
        t.values = Matrix(a.n, a.d);
        for (std::size_t i = 0; i < a.n; ++i)
            for (std::size_t j = 0; j < a.d; ++j) t.values(i, j) = truth(i, j) ? 1.0 : 0.0;
        t.missing = BoolMat(a.n, a.d);
        t.col_names = default_col_names(a.d);
        t.row_names = default_row_names(a.n);
        write_csv(t, a.truth);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cellwise-robust multivariate statistics"};
    app.set_version_flag("--version", std::string("cellrobust ") + kVersion);
    app.require_subcommand(1);

    DetectArgs da;
    auto* detect_cmd = app.add_subcommand("detect", "Flag outlying cells");
    detect_cmd->add_option("--method", da.method)->check(CLI::IsMember({"univariate", "ddc"}));
    detect_cmd->add_option("--cutoff", da.cutoff);
    detect_cmd->add_option("--corr-threshold", da.corr_threshold);
    detect_cmd->add_option("--max-predictors", da.max_predictors);
    detect_cmd->add_option("--in", da.in)->required();
    detect_cmd->add_option("--out", da.out);
    detect_cmd->add_option("--cellmap", da.cellmap);

    EstimateArgs ea;
    auto* estimate_cmd = app.add_subcommand("estimate", "Location and covariance estimation");
    estimate_cmd->add_option("--method", ea.method)
        ->required()
        ->check(CLI::IsMember({"classical", "coordmedian", "spatialmedian", "twostep",
                               "pairwise"}));
    estimate_cmd->add_option("--detector", ea.detector)
        ->check(CLI::IsMember({"univariate", "ddc"}));
    estimate_cmd->add_option("--scale", ea.scale)->check(CLI::IsMember({"mad", "qn"}));
    estimate_cmd->add_option("--cutoff", ea.cutoff);
    estimate_cmd->add_option("--in", ea.in)->required();
    estimate_cmd->add_option("--out", ea.out)->required();

    RegressArgs ra;
    auto* regress_cmd = app.add_subcommand("regress", "Plug-in regression from a joint model");
    regress_cmd->add_option("--in", ra.in)->required();
    regress_cmd->add_option("--out", ra.out)->required();
    regress_cmd->add_option("--response", ra.response);
    regress_cmd->add_option("--cov", ra.cov)
        ->check(CLI::IsMember({"classical", "twostep", "pairwise"}));
    regress_cmd->add_flag("--no-intercept", ra.no_intercept);

    ArfitArgs aa;
    auto* arfit_cmd = app.add_subcommand("arfit", "Autoregressive fit via the AR embedding");
    arfit_cmd->add_option("--in", aa.in)->required();
    arfit_cmd->add_option("--out", aa.out)->required();
    arfit_cmd->add_option("--order", aa.order)->required();
    arfit_cmd->add_option("--cov", aa.cov)
        ->check(CLI::IsMember({"classical", "twostep", "pairwise"}));
    arfit_cmd->add_flag("--no-intercept", aa.no_intercept);

    auto* breakdown_cmd = app.add_subcommand("breakdown", "Breakdown experiments and attacks");
    breakdown_cmd->require_subcommand(1);
    CurveArgs cu;
    auto* curve_cmd = breakdown_cmd->add_subcommand("curve", "Empirical breakdown curves");
    curve_cmd->add_option("--n", cu.n);
    curve_cmd->add_option("--d", cu.d);
    curve_cmd->add_option("--value", cu.value);
    curve_cmd->add_option("--reps", cu.reps);
    curve_cmd->add_option("--seed", cu.seed);
    curve_cmd->add_option("--out", cu.out);
    curve_cmd->add_option("--plot", cu.plot);
    AttackArgs at;
    auto* attack_cmd = breakdown_cmd->add_subcommand("attack", "Run a breakdown attack");
    attack_cmd->add_option("--kind", at.kind)
        ->required()
        ->check(CLI::IsMember({"location", "implosion", "regression"}));
    attack_cmd->add_option("--in", at.in)->required();
    attack_cmd->add_option("--c", at.c);
    attack_cmd->add_option("--beta0", at.beta0);
    attack_cmd->add_option("--out", at.out);
    attack_cmd->add_option("--summary", at.summary);

    CaArgs ca_args;
    auto* ca_cmd = app.add_subcommand("ca", "Correspondence analysis");
    ca_cmd->add_option("--in", ca_args.in)->required();
    ca_cmd->add_option("--method", ca_args.method)
        ->check(CLI::IsMember({"classical", "robust"}));
    ca_cmd->add_option("--k", ca_args.k);
    ca_cmd->add_option("--out", ca_args.out);
    ca_cmd->add_option("--biplot", ca_args.biplot);
    ca_cmd->add_option("--cellmap", ca_args.cellmap);

    auto* sim_cmd = app.add_subcommand("simulate", "Generate experiment datasets");
    sim_cmd->require_subcommand(1);
    SimARArgs sa;
    auto* sim_ar_cmd = sim_cmd->add_subcommand("ar", "AR(p) series, optional contamination");
    sim_ar_cmd->add_option("--n", sa.n);
    sim_ar_cmd->add_option("--phi", sa.phi);
    sim_ar_cmd->add_option("--sigma", sa.sigma);
    sim_ar_cmd->add_option("--seed", sa.seed);
    sim_ar_cmd->add_option("--every", sa.every);
    sim_ar_cmd->add_option("--value", sa.value);
    sim_ar_cmd->add_option("--out", sa.out)->required();
    SimTableArgs st;
    auto* sim_t1_cmd = sim_cmd->add_subcommand("table1", "Correlated gaussian with cell outliers");
    sim_t1_cmd->add_option("--n", st.n);
    sim_t1_cmd->add_option("--d", st.d);
    sim_t1_cmd->add_option("--eps", st.eps);
    sim_t1_cmd->add_option("--value", st.value);
    sim_t1_cmd->add_option("--seed", st.seed);
    sim_t1_cmd->add_option("--out", st.out)->required();
    sim_t1_cmd->add_option("--truth", st.truth);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (detect_cmd->parsed()) return run_detect(da);
        if (estimate_cmd->parsed()) return run_estimate(ea);
        if (regress_cmd->parsed()) return run_regress(ra);
        if (arfit_cmd->parsed()) return run_arfit(aa);
        if (breakdown_cmd->parsed()) {
            if (curve_cmd->parsed()) return run_curve(cu);
            return run_attack(at);
        }
        if (ca_cmd->parsed()) return run_ca(ca_args);
        if (sim_cmd->parsed()) {
            if (sim_ar_cmd->parsed()) return run_sim_ar(sa);
            return run_sim_table1(st);
        }
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
