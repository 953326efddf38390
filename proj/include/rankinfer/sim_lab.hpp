#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "rankinfer/rank_estimation.hpp"
#include "rankinfer/rank_tests.hpp"

namespace rankinfer::sim {

enum class DesignKind { MotivationIID, GaussianDirect, HeteroMA };
enum class OmegaChoice { Omega1, Omega2 };

// A data generating process from the study designs:
//  - MotivationIID:  Z = Pi0^T V + u, V,u ~ N(0, I_k) iid,
//                    Pi0 = diag(1_{k-d}, 0_d) + delta I_k
//  - GaussianDirect: iid 2x2 matrices with vec(Z) ~ N(delta Omega^{1/2} vec(I2), Omega)
//  - HeteroMA:       Z_t = Pi0^T V_t + V_{1,t} u_t with u_t = e_t - (1/4) 1 1^T e_{t-1},
//                    Pi0 = diag(1_2, 0_2) + delta I_4 (heteroskedastic, MA(1) errors)
struct Design {
    DesignKind kind = DesignKind::MotivationIID;
    double delta = 0.0;
    int d = 1;                                // MotivationIID: trailing zero entries
    OmegaChoice omega = OmegaChoice::Omega1;  // GaussianDirect
    int k = 6;                                // matrix dimension (all designs are square)
    std::int64_t n = 1000;

    std::string label() const {
        char buf[160];
        switch (kind) {
            case DesignKind::MotivationIID:
                std::snprintf(buf, sizeof(buf), "motivation(d=%d)", d);
                break;
            case DesignKind::GaussianDirect:
                std::snprintf(buf, sizeof(buf), "gaussian-direct(%s)",
                              omega == OmegaChoice::Omega1 ? "omega1" : "omega2");
                break;
            case DesignKind::HeteroMA:
                std::snprintf(buf, sizeof(buf), "hetero-ma");
                break;
        }
        return buf;
    }
};

struct VZSample {
    std::vector<Vector> V;
    std::vector<Vector> Z;
};

inline std::vector<Matrix> contributions_of(const VZSample& sample) {
    std::vector<Matrix> out;
    out.reserve(sample.V.size());
    for (std::size_t i = 0; i < sample.V.size(); ++i) {
        out.push_back(sample.V[i] * sample.Z[i].transpose());
    }
    return out;
}

// General-k variant of the motivation model; the study design fixes k = 6.
inline VZSample gen_motivation_dim(double delta, int d, int k, std::int64_t n,
                                   std::uint64_t seed) {
    if (d < 1 || d > k) throw InvalidArgument("gen_motivation: d must lie in [1, k]");
    if (delta < 0.0) throw InvalidArgument("gen_motivation: delta must be >= 0");
    Matrix pi0 = Matrix::Zero(k, k);
    for (int j = 0; j < k - d; ++j) pi0(j, j) = 1.0;
    pi0 += delta * Matrix::Identity(k, k);

    CounterRng rng(seed, 0);
    VZSample sample;
    sample.V.reserve(static_cast<std::size_t>(n));
    sample.Z.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        Vector v(k), u(k);
        for (int j = 0; j < k; ++j) v(j) = rng.normal();
        for (int j = 0; j < k; ++j) u(j) = rng.normal();
        sample.V.push_back(v);
        sample.Z.push_back(pi0.transpose() * v + u);
    }
    return sample;
}

inline VZSample gen_motivation(double delta, int d, std::int64_t n, std::uint64_t seed) {
    if (d < 1 || d > 6) throw InvalidArgument("gen_motivation: d must lie in [1, 6]");
    return gen_motivation_dim(delta, d, 6, n, seed);
}

inline Matrix omega1() { return Matrix::Identity(4, 4); }

inline Matrix omega2() {
    const double c = 0.9 * std::sqrt(5.0);
    Matrix o(4, 4);
    o << 1, 0, 0, -c,
         0, 1, c, 0,
         0, c, 5, 0,
        -c, 0, 0, 5;
    return o;
}

// Symmetric PSD square root.
inline Matrix matrix_sqrt(const Matrix& omega) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(omega);
    if (es.eigenvalues().minCoeff() <= 0.0) {
        throw InvalidArgument("gen_gaussian_direct: omega must be positive definite");
    }
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

inline std::vector<Matrix> gen_gaussian_direct(const Matrix& omega, double delta,
                                               std::int64_t n, std::uint64_t seed) {
    if (omega.rows() != 4 || omega.cols() != 4) {
        throw InvalidArgument("gen_gaussian_direct: omega must be 4x4 (2x2 matrices)");
    }
    if (!omega.isApprox(omega.transpose(), 1e-12)) {
        throw InvalidArgument("gen_gaussian_direct: omega must be symmetric");
    }
    const Matrix root = matrix_sqrt(omega);
    Vector vec_i2(4);
    vec_i2 << 1, 0, 0, 1;  // column-major vec(I2)
    const Vector mean = delta * (root * vec_i2);

    CounterRng rng(seed, 0);
    std::vector<Matrix> sample;
    sample.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        Vector xi(4);
        for (int j = 0; j < 4; ++j) xi(j) = rng.normal();
        const Vector z = mean + root * xi;
        Matrix zi(2, 2);
        zi << z(0), z(2), z(1), z(3);  // unvec, column-major
        sample.push_back(zi);
    }
    return sample;
}

inline std::vector<Matrix> gen_gaussian_direct(OmegaChoice choice, double delta,
                                               std::int64_t n, std::uint64_t seed) {
    return gen_gaussian_direct(choice == OmegaChoice::Omega1 ? omega1() : omega2(),
                               delta, n, seed);
}

// Heteroskedastic MA(1) design: only u carries first-order autocorrelation.
// `u_out`, when given, receives the error series (used by moment checks).
inline VZSample gen_hetero_ma(double delta, std::int64_t n, std::uint64_t seed,
                              std::vector<Vector>* u_out = nullptr) {
    if (delta < 0.0) throw InvalidArgument("gen_hetero_ma: delta must be >= 0");
    constexpr int k = 4;
    Matrix pi0 = Matrix::Zero(k, k);
    pi0(0, 0) = pi0(1, 1) = 1.0;
    pi0 += delta * Matrix::Identity(k, k);

    CounterRng rng(seed, 0);
    Vector eps_prev(k);
    for (int j = 0; j < k; ++j) eps_prev(j) = rng.normal();

    VZSample sample;
    sample.V.reserve(static_cast<std::size_t>(n));
    sample.Z.reserve(static_cast<std::size_t>(n));
    for (std::int64_t t = 0; t < n; ++t) {
        Vector v(k), eps(k);
        for (int j = 0; j < k; ++j) v(j) = rng.normal();
        for (int j = 0; j < k; ++j) eps(j) = rng.normal();
        const Vector u = eps - 0.25 * eps_prev.sum() * Vector::Ones(k);
        eps_prev = eps;
        if (u_out != nullptr) u_out->push_back(u);
        sample.V.push_back(v);
        sample.Z.push_back(pi0.transpose() * v + v(0) * u);
    }
    return sample;
}

// A generated dataset reduced to what the tests consume.
struct Dataset {
    std::vector<Matrix> contributions;  // Pi_hat = mean of these
    bool time_ordered = false;
};

inline Dataset make_dataset(const Design& design, std::uint64_t seed) {
    Dataset data;
    switch (design.kind) {
        case DesignKind::MotivationIID:
            data.contributions =
                contributions_of(gen_motivation_dim(design.delta, design.d, design.k,
                                                    design.n, seed));
            break;
        case DesignKind::GaussianDirect:
            data.contributions = gen_gaussian_direct(design.omega, design.delta,
                                                     design.n, seed);
            break;
        case DesignKind::HeteroMA:
            data.contributions = contributions_of(gen_hetero_ma(design.delta, design.n, seed));
            data.time_ordered = true;
            break;
    }
    return data;
}

// kappa_n = coefficient * n^exponent, or a fixed explicit value.
struct KappaRule {
    double coefficient = 1.0;
    double exponent = -0.25;
    std::optional<double> fixed;

    double value(double n) const {
        return fixed ? *fixed : coefficient * std::pow(n, exponent);
    }

    std::string label() const {
        if (fixed) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "kappa=%g", *fixed);
            return buf;
        }
        char buf[64];
        if (coefficient == 1.0) {
            std::snprintf(buf, sizeof(buf), "n^%g", exponent);
        } else {
            std::snprintf(buf, sizeof(buf), "%gn^%g", coefficient, exponent);
        }
        return buf;
    }
};

enum class Method { CfA, CfN, CfT, Kp, KpM, Custom };

// A pluggable rejection decision, mainly for tests and custom engines.
using CustomDecision = std::function<bool(const MatrixEstimate&, const BootstrapEnsemble&,
                                          const VecCovariance&, int r, double alpha)>;

struct MethodSpec {
    Method method = Method::CfA;
    KappaRule kappa;             // CF-A, CF-N
    double beta_divisor = 10.0;  // CF-T: beta = alpha / beta_divisor
    CustomDecision custom;       // Method::Custom only
    std::string custom_name = "custom";

    std::string name() const {
        switch (method) {
            case Method::CfA: return "cf-a";
            case Method::CfN: return "cf-n";
            case Method::CfT: return "cf-t";
            case Method::Kp: return "kp";
            case Method::KpM: return "kp-m";
            case Method::Custom: return custom_name;
        }
        return "unknown";
    }

    std::string tuning() const {
        switch (method) {
            case Method::CfA:
            case Method::CfN:
                return kappa.label();
            case Method::CfT: {
                char buf[48];
                std::snprintf(buf, sizeof(buf), "beta=alpha/%g", beta_divisor);
                return buf;
            }
            default:
                return "";
        }
    }

    bool needs_bootstrap() const {
        return method == Method::CfA || method == Method::CfN || method == Method::CfT ||
               method == Method::Custom;
    }

    bool needs_covariance() const {
        return method == Method::Kp || method == Method::KpM || method == Method::CfT ||
               method == Method::Custom;
    }
};

struct RejectionRow {
    std::string design;
    std::int64_t n = 0;
    double delta = 0.0;
    std::string method;
    std::string tuning;
    double rate = 0.0;
    double se = 0.0;
    std::int64_t reps = 0;
};

struct RejectionTable {
    std::vector<RejectionRow> rows;
};

struct MonteCarloConfig {
    Design design;
    int r = 0;  // hypothesized rank under test
    std::vector<MethodSpec> methods;
    std::int64_t replications = 2000;
    int bootstrap_draws = 500;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    int threads = 0;  // 0: RANKINFER_THREADS or hardware count
    int block_size = 2;
};

namespace detail {

inline BootstrapEnsemble make_ensemble(const Dataset& data, int B, std::uint64_t seed,
                                       int block_size) {
    if (data.time_ordered) {
        return draw_circular_block(data.contributions, block_size, B, seed);
    }
    return draw_empirical(data.contributions, B, seed);
}

inline VecCovariance make_covariance(const Dataset& data) {
    if (data.time_ordered) return cov_hacc_one_lag(data.contributions);
    return cov_iid(data.contributions);
}

inline MatrixEstimate make_estimate(const Dataset& data) {
    Matrix acc = Matrix::Zero(data.contributions.front().rows(),
                              data.contributions.front().cols());
    for (const Matrix& c : data.contributions) acc += c;
    const auto n = static_cast<std::int64_t>(data.contributions.size());
    acc /= static_cast<double>(n);
    return MatrixEstimate(std::move(acc), std::sqrt(static_cast<double>(n)), n);
}

}  // namespace detail

// Runs one rejection decision per (replication, method). Replications are
// seeded as hash(master, design label # r, rep) and evaluated in parallel;
// the output is identical for any thread count.
inline RejectionTable run_monte_carlo(const MonteCarloConfig& config) {
    if (config.replications < 1) {
        throw InvalidArgument("run_monte_carlo: replications must be >= 1");
    }
    if (config.methods.empty()) {
        throw InvalidArgument("run_monte_carlo: no methods given");
    }
    const std::int64_t R = config.replications;
    const std::size_t m_count = config.methods.size();
    const std::uint64_t design_tag =
        fnv1a(config.design.label() + "#r=" + std::to_string(config.r));

    std::vector<std::uint8_t> rejected(static_cast<std::size_t>(R) * m_count, 0);
    std::vector<std::string> errors(static_cast<std::size_t>(R));
    std::mutex error_mutex;

    bool any_bootstrap = false;
    bool any_covariance = false;
    for (const auto& spec : config.methods) {
        any_bootstrap = any_bootstrap || spec.needs_bootstrap();
        any_covariance = any_covariance || spec.needs_covariance();
    }

    parallel_for(
        R,
        [&](std::int64_t rep) {
            try {
                const std::uint64_t rep_seed =
                    derive_seed(config.seed, design_tag, static_cast<std::uint64_t>(rep));
                const Dataset data = make_dataset(config.design, derive_seed(rep_seed, 0));
                const MatrixEstimate est = detail::make_estimate(data);

                BootstrapEnsemble ensemble;
                if (any_bootstrap) {
                    ensemble = detail::make_ensemble(data, config.bootstrap_draws,
                                                     derive_seed(rep_seed, 1),
                                                     config.block_size);
                }
                VecCovariance cov;
                if (any_covariance) cov = detail::make_covariance(data);

                const double n = static_cast<double>(config.design.n);
                for (std::size_t mi = 0; mi < m_count; ++mi) {
                    const MethodSpec& spec = config.methods[mi];
                    TestResult result;
                    switch (spec.method) {
                        case Method::CfA:
                        case Method::CfN: {
                            DerivativeEstimator estimator;
                            estimator.kind = spec.method == Method::CfA
                                                 ? DerivativeKind::Analytic
                                                 : DerivativeKind::Numerical;
                            estimator.kappa = spec.kappa.value(n);
                            estimator.r = config.r;
                            result = cf_one_step(est, ensemble, config.r, config.alpha,
                                                 estimator);
                            break;
                        }
                        case Method::CfT: {
                            const double beta = config.alpha / spec.beta_divisor;
                            const int first = sequential_kp_rank(est, cov, beta);
                            result = cf_two_step(est, ensemble, config.r, config.alpha,
                                                 beta, first);
                            break;
                        }
                        case Method::Kp:
                            result = kp_test(est, cov, config.r, config.alpha);
                            break;
                        case Method::KpM:
                            result = kp_m_test(est, cov, config.r, config.alpha);
                            break;
                        case Method::Custom:
                            result.reject =
                                spec.custom(est, ensemble, cov, config.r, config.alpha);
                            break;
                    }
                    rejected[static_cast<std::size_t>(rep) * m_count + mi] =
                        result.reject ? 1 : 0;
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                errors[static_cast<std::size_t>(rep)] = e.what();
            }
        },
        config.threads);

    for (std::int64_t rep = 0; rep < R; ++rep) {
        if (!errors[static_cast<std::size_t>(rep)].empty()) {
            throw NumericalError("run_monte_carlo: replication " + std::to_string(rep) +
                                 " failed: " + errors[static_cast<std::size_t>(rep)]);
        }
    }

    RejectionTable table;
    for (std::size_t mi = 0; mi < m_count; ++mi) {
        std::int64_t count = 0;
        for (std::int64_t rep = 0; rep < R; ++rep) {
            count += rejected[static_cast<std::size_t>(rep) * m_count + mi];
        }
        const double rate = static_cast<double>(count) / static_cast<double>(R);
        RejectionRow row;
        row.design = config.design.label() + "#r=" + std::to_string(config.r);
        row.n = config.design.n;
        row.delta = config.design.delta;
        row.method = config.methods[mi].name();
        row.tuning = config.methods[mi].tuning();
        row.rate = rate;
        row.se = std::sqrt(rate * (1.0 - rate) / static_cast<double>(R));
        row.reps = R;
        table.rows.push_back(std::move(row));
    }
    return table;
}

enum class EstimatorKind { SequentialCfA, SequentialKp, Threshold };

struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::SequentialCfA;
    KappaRule kappa;      // SequentialCfA, Threshold
    double level = 0.05;  // SequentialCfA, SequentialKp
    int bootstrap_draws = 500;

    std::string label() const {
        switch (kind) {
            case EstimatorKind::SequentialCfA: return "seq-cf-a(" + kappa.label() + ")";
            case EstimatorKind::SequentialKp: return "seq-kp";
            case EstimatorKind::Threshold: return "threshold(" + kappa.label() + ")";
        }
        return "unknown";
    }
};

struct RankHistogram {
    std::string design;
    std::int64_t n = 0;
    double delta = 0.0;
    std::string estimator;
    std::vector<double> percent;  // index r = 0..k
    std::int64_t reps = 0;
};

// Estimate the rank on one dataset with the given estimator spec. The
// bootstrap ensemble (when needed) is drawn once and shared across steps.
inline int estimate_rank(const Dataset& data, const EstimatorSpec& spec,
                         std::uint64_t seed) {
    const MatrixEstimate est = detail::make_estimate(data);
    const int k = static_cast<int>(est.values.cols());
    const double n = static_cast<double>(data.contributions.size());

    switch (spec.kind) {
        case EstimatorKind::Threshold: {
            return threshold_rank(est.values, spec.kappa.value(n), k - 1);
        }
        case EstimatorKind::SequentialKp: {
            const VecCovariance cov = detail::make_covariance(data);
            return sequential_kp_rank(est, cov, spec.level);
        }
        case EstimatorKind::SequentialCfA: {
            const BootstrapEnsemble ensemble =
                detail::make_ensemble(data, spec.bootstrap_draws, seed, 2);
            auto engine = [&](int r, double level) {
                DerivativeEstimator estimator;
                estimator.kind = DerivativeKind::Analytic;
                estimator.kappa = spec.kappa.value(n);
                estimator.r = r;
                const TestResult t = cf_one_step(est, ensemble, r, level, estimator);
                StepDecision d;
                d.statistic = t.statistic;
                d.critical_value = t.critical_value.value_or(0.0);
                d.p_value = t.p_value;
                d.reject = t.reject;
                return d;
            };
            return sequential_estimate({engine, k, spec.level}).rank;
        }
    }
    throw InvalidArgument("estimate_rank: unknown estimator");
}

// Functional core: `estimator` maps (dataset, seed) to a rank in 0..k.
inline RankHistogram rank_distribution(
    const Design& design, const std::function<int(const Dataset&, std::uint64_t)>& estimator,
    const std::string& estimator_label, std::int64_t R, std::uint64_t seed,
    int threads = 0) {
    if (R < 1) throw InvalidArgument("rank_distribution: R must be >= 1");
    const std::uint64_t design_tag = fnv1a(design.label() + "#" + estimator_label);

    std::vector<int> picked(static_cast<std::size_t>(R), -1);
    std::vector<std::string> errors(static_cast<std::size_t>(R));
    std::mutex error_mutex;

    parallel_for(
        R,
        [&](std::int64_t rep) {
            try {
                const std::uint64_t rep_seed =
                    derive_seed(seed, design_tag, static_cast<std::uint64_t>(rep));
                const Dataset data = make_dataset(design, derive_seed(rep_seed, 0));
                picked[static_cast<std::size_t>(rep)] =
                    estimator(data, derive_seed(rep_seed, 1));
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                errors[static_cast<std::size_t>(rep)] = e.what();
            }
        },
        threads);

    for (std::int64_t rep = 0; rep < R; ++rep) {
        if (!errors[static_cast<std::size_t>(rep)].empty()) {
            throw NumericalError("rank_distribution: replication " + std::to_string(rep) +
                                 " failed: " + errors[static_cast<std::size_t>(rep)]);
        }
    }

    RankHistogram hist;
    hist.design = design.label();
    hist.n = design.n;
    hist.delta = design.delta;
    hist.estimator = estimator_label;
    hist.percent.assign(static_cast<std::size_t>(design.k) + 1, 0.0);
    for (int value : picked) {
        if (value < 0 || value > design.k) {
            throw NumericalError("rank_distribution: estimator returned a rank outside 0..k");
        }
        hist.percent[static_cast<std::size_t>(value)] += 100.0 / static_cast<double>(R);
    }
    hist.reps = R;
    return hist;
}

inline RankHistogram rank_distribution(const Design& design, const EstimatorSpec& spec,
                                       std::int64_t R, std::uint64_t seed,
                                       int threads = 0) {
    return rank_distribution(
        design,
        [&spec](const Dataset& data, std::uint64_t rep_seed) {
            return estimate_rank(data, spec, rep_seed);
        },
        spec.label(), R, seed, threads);
}

// --- emitters ---------------------------------------------------------------

namespace detail {

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[40];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace detail

inline std::string emit_csv(const RejectionTable& table) {
    std::ostringstream out;
    out << "design,n,delta,method,tuning,rate,se,R\n";
    for (const auto& row : table.rows) {
        out << row.design << ',' << row.n << ',' << detail::format_double(row.delta)
            << ',' << row.method << ',' << row.tuning << ','
            << detail::format_double(row.rate) << ',' << detail::format_double(row.se)
            << ',' << row.reps << '\n';
    }
    return out.str();
}

inline std::string emit_json(const RejectionTable& table) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
        rows.push_back({{"design", row.design},
                        {"n", row.n},
                        {"delta", row.delta},
                        {"method", row.method},
                        {"tuning", row.tuning},
                        {"rate", row.rate},
                        {"se", row.se},
                        {"R", row.reps}});
    }
    return rows.dump(2) + "\n";
}

inline RejectionTable parse_rejection_json(const std::string& text) {
    const auto rows = nlohmann::json::parse(text);
    RejectionTable table;
    for (const auto& row : rows) {
        RejectionRow r;
        r.design = row.at("design").get<std::string>();
        r.n = row.at("n").get<std::int64_t>();
        r.delta = row.at("delta").get<double>();
        r.method = row.at("method").get<std::string>();
        r.tuning = row.at("tuning").get<std::string>();
        r.rate = row.at("rate").get<double>();
        r.se = row.at("se").get<double>();
        r.reps = row.at("R").get<std::int64_t>();
        table.rows.push_back(std::move(r));
    }
    return table;
}

inline std::string emit_csv(const RankHistogram& hist) {
    std::ostringstream out;
    out << "design,n,delta,estimator,rank,percent,R\n";
    for (std::size_t r = 0; r < hist.percent.size(); ++r) {
        out << hist.design << ',' << hist.n << ',' << detail::format_double(hist.delta)
            << ',' << hist.estimator << ',' << r << ','
            << detail::format_double(hist.percent[r]) << ',' << hist.reps << '\n';
    }
    return out.str();
}

inline std::string emit_json(const RankHistogram& hist) {
    nlohmann::ordered_json doc;
    doc["design"] = hist.design;
    doc["n"] = hist.n;
    doc["delta"] = hist.delta;
    doc["estimator"] = hist.estimator;
    doc["percent"] = hist.percent;
    doc["R"] = hist.reps;
    return doc.dump(2) + "\n";
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NumericalError("write_file: cannot open " + path);
    out << content;
    if (!out) throw NumericalError("write_file: failed writing " + path);
}

}  // namespace rankinfer::sim
