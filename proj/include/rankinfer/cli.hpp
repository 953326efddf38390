#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rankinfer/sim_lab.hpp"

namespace rankinfer::cli {

// Exit codes: 0 success, 2 usage error, 3 numerical/data failure,
// 4 malformed CSV (message carries the line number).
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitBadCsv = 4;

struct CsvError : std::runtime_error {
    CsvError(const std::string& what, std::int64_t line_number)
        : std::runtime_error(what), line(line_number) {}
    std::int64_t line;
};

struct RunConfig {
    bool help_requested = false;
    std::string input_path;
    std::vector<std::string> varlist1;  // V columns, m of them
    std::vector<std::string> varlist2;  // Z columns, k of them
    std::optional<std::string> cluster_column;
    bool time_ordered = false;
    int block_size = 2;
    std::string method = "cf-t";
    std::optional<int> r;  // default k - 1 (full rank)
    double alpha = 0.05;
    std::optional<double> beta;  // default alpha / 15
    sim::KappaRule kappa;        // default n^{-1/4}
    int bootstrap_draws = 500;
    std::uint64_t seed = 20260808;
    std::optional<std::string> output_path;
    std::string format = "json";  // the result document schema is JSON
    int threads = 0;
};

inline std::vector<std::string> split_list(const std::string& raw) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(raw);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// "n^-1/4", "1.5n^-1/3", "n^-0.25" and plain numbers ("0.2") are accepted;
// a plain number is an explicit kappa independent of n.
inline bool parse_kappa_rule(const std::string& raw, sim::KappaRule& rule) {
    const auto caret = raw.find("n^");
    if (caret == std::string::npos) {
        try {
            std::size_t used = 0;
            const double value = std::stod(raw, &used);
            if (used != raw.size() || !(value > 0.0)) return false;
            rule = sim::KappaRule{1.0, 0.0, value};
            return true;
        } catch (...) {
            return false;
        }
    }
    double coefficient = 1.0;
    if (caret > 0) {
        try {
            std::size_t used = 0;
            coefficient = std::stod(raw.substr(0, caret), &used);
            if (used != caret || !(coefficient > 0.0)) return false;
        } catch (...) {
            return false;
        }
    }
    const std::string tail = raw.substr(caret + 2);
    double exponent = 0.0;
    const auto slash = tail.find('/');
    try {
        if (slash != std::string::npos) {
            std::size_t used_num = 0, used_den = 0;
            const double numer = std::stod(tail.substr(0, slash), &used_num);
            const double denom = std::stod(tail.substr(slash + 1), &used_den);
            if (used_num != slash || used_den != tail.size() - slash - 1 || denom == 0.0) {
                return false;
            }
            exponent = numer / denom;
        } else {
            std::size_t used = 0;
            exponent = std::stod(tail, &used);
            if (used != tail.size()) return false;
        }
    } catch (...) {
        return false;
    }
    if (!(exponent < 0.0)) return false;
    rule = sim::KappaRule{coefficient, exponent, std::nullopt};
    return true;
}

inline const std::vector<std::string>& known_methods() {
    static const std::vector<std::string> methods = {
        "cf-t", "cf-a", "cf-n", "kp", "kp-m", "seq-kp", "seq-cf-a", "threshold"};
    return methods;
}

// Parses argv into a validated RunConfig. Returns kExitOk or kExitUsage.
inline int parse_args(int argc, const char* const* argv, RunConfig& config,
                      std::ostream& err) {
    CLI::App app{"Bootstrap tests and estimators for the rank of E[V Z^T]"};
    app.name("bootranktest");

    std::string varlist1_raw, varlist2_raw, kappa_raw, cluster_raw, output_raw;
    app.add_option("--input", config.input_path, "Input CSV file (header row required)")
        ->required();
    app.add_option("--v", varlist1_raw,
                   "Comma-separated column names for V (at least as many as --z)")
        ->required();
    app.add_option("--z", varlist2_raw, "Comma-separated column names for Z")->required();
    app.add_option("--cluster", cluster_raw, "Cluster id column (pairs cluster bootstrap)");
    app.add_flag("--time-ordered", config.time_ordered,
                 "Treat rows as a time series (circular block bootstrap)");
    app.add_option("--block-size", config.block_size, "Block size for --time-ordered")
        ->default_val(2);
    app.add_option("--method", config.method,
                   "cf-t|cf-a|cf-n|kp|kp-m|seq-kp|seq-cf-a|threshold")
        ->default_val("cf-t");
    int r_value = -1;
    app.add_option("--r", r_value, "Hypothesized rank (default k-1, full rank test)");
    app.add_option("--alpha", config.alpha, "Significance level")->default_val(0.05);
    double beta_value = -1.0;
    app.add_option("--beta", beta_value, "First-step level for cf-t (default alpha/15)");
    app.add_option("--kappa", kappa_raw,
                   "Threshold rule: n^-1/5, n^-1/4, n^-1/3, 1.5n^-1/4, ... or an "
                   "explicit value")
        ->default_val("n^-1/4");
    app.add_option("--B", config.bootstrap_draws, "Bootstrap repetitions")->default_val(500);
    app.add_option("--seed", config.seed, "RNG seed")->default_val(20260808);
    app.add_option("--out", output_raw, "Write the JSON document here instead of stdout");
    app.add_option("--format", config.format, "Output format (json)")->default_val("json");
    app.add_option("--threads", config.threads,
                   "Worker threads (0: RANKINFER_THREADS or hardware)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            err << app.help();
            config.help_requested = true;
            return kExitOk;
        }
        err << "bootranktest: " << e.what() << "\n";
        return kExitUsage;
    }

    config.varlist1 = split_list(varlist1_raw);
    config.varlist2 = split_list(varlist2_raw);
    if (!cluster_raw.empty()) config.cluster_column = cluster_raw;
    if (!output_raw.empty()) config.output_path = output_raw;
    if (r_value >= 0) config.r = r_value;
    if (beta_value >= 0.0) config.beta = beta_value;

    if (config.varlist1.empty() || config.varlist2.empty()) {
        err << "bootranktest: --v and --z must name at least one column each\n";
        return kExitUsage;
    }
    if (config.varlist1.size() < config.varlist2.size()) {
        err << "bootranktest: varlist1 must have at least as many variables as varlist2\n";
        return kExitUsage;
    }
    if (config.cluster_column && config.time_ordered) {
        err << "bootranktest: choose exactly one resampling scheme "
               "(--cluster or --time-ordered)\n";
        return kExitUsage;
    }
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
        err << "bootranktest: --alpha must lie in (0,1)\n";
        return kExitUsage;
    }
    if (config.beta && !(*config.beta > 0.0 && *config.beta < config.alpha)) {
        err << "bootranktest: --beta must lie in (0, alpha)\n";
        return kExitUsage;
    }
    if (config.bootstrap_draws < 1) {
        err << "bootranktest: --B must be >= 1\n";
        return kExitUsage;
    }
    if (config.block_size < 1) {
        err << "bootranktest: --block-size must be >= 1\n";
        return kExitUsage;
    }
    bool method_known = false;
    for (const auto& name : known_methods()) method_known |= name == config.method;
    if (!method_known) {
        err << "bootranktest: unknown --method '" << config.method << "'\n";
        return kExitUsage;
    }
    if (config.format != "json") {
        err << "bootranktest: unsupported --format '" << config.format << "'\n";
        return kExitUsage;
    }
    if (!kappa_raw.empty() && !parse_kappa_rule(kappa_raw, config.kappa)) {
        err << "bootranktest: cannot parse --kappa '" << kappa_raw << "'\n";
        return kExitUsage;
    }
    if (config.r && *config.r >= static_cast<int>(config.varlist2.size())) {
        err << "bootranktest: --r must be smaller than the number of --z columns\n";
        return kExitUsage;
    }
    return kExitOk;
}

namespace detail {

struct CsvData {
    std::vector<Vector> v_rows;
    std::vector<Vector> z_rows;
    std::vector<std::string> cluster_labels;  // empty unless clustering
};

inline double parse_cell(const std::string& cell, std::int64_t line) {
    double value = 0.0;
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    const auto result = std::from_chars(begin, end, value);
    if (result.ec != std::errc() || result.ptr != end) {
        throw CsvError("malformed numeric cell '" + cell + "' at line " +
                       std::to_string(line), line);
    }
    return value;
}

inline std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

// Comma-separated, header row required, '.' decimal, UTF-8. Rows are kept
// in file order (resampling indices refer to that order).
inline CsvData read_csv(const RunConfig& config) {
    std::ifstream in(config.input_path, std::ios::binary);
    if (!in) {
        throw CsvError("cannot open input file " + config.input_path + " (line 1)", 1);
    }
    std::string line;
    if (!std::getline(in, line)) throw CsvError("empty input file (line 1)", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string> header = split_row(line);
    std::map<std::string, std::size_t> column_of;
    for (std::size_t i = 0; i < header.size(); ++i) column_of[header[i]] = i;

    auto require_column = [&](const std::string& name) {
        const auto it = column_of.find(name);
        if (it == column_of.end()) {
            throw CsvError("missing column '" + name + "' in header (line 1)", 1);
        }
        return it->second;
    };
    std::vector<std::size_t> v_cols, z_cols;
    for (const auto& name : config.varlist1) v_cols.push_back(require_column(name));
    for (const auto& name : config.varlist2) z_cols.push_back(require_column(name));
    std::optional<std::size_t> cluster_col;
    if (config.cluster_column) cluster_col = require_column(*config.cluster_column);

    CsvData data;
    std::int64_t line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_row(line);
        if (cells.size() != header.size()) {
            throw CsvError("row has " + std::to_string(cells.size()) + " fields, header has " +
                           std::to_string(header.size()) + " at line " +
                           std::to_string(line_number), line_number);
        }
        Vector v(static_cast<Eigen::Index>(v_cols.size()));
        Vector z(static_cast<Eigen::Index>(z_cols.size()));
        for (std::size_t i = 0; i < v_cols.size(); ++i) {
            v(static_cast<Eigen::Index>(i)) = parse_cell(cells[v_cols[i]], line_number);
        }
        for (std::size_t i = 0; i < z_cols.size(); ++i) {
            z(static_cast<Eigen::Index>(i)) = parse_cell(cells[z_cols[i]], line_number);
        }
        data.v_rows.push_back(std::move(v));
        data.z_rows.push_back(std::move(z));
        if (cluster_col) data.cluster_labels.push_back(cells[*cluster_col]);
    }
    return data;
}

inline nlohmann::ordered_json result_document(const RunConfig& config,
                                              const TestResult& result,
                                              const Vector& singular_values,
                                              const std::string& scheme,
                                              std::int64_t n) {
    nlohmann::ordered_json doc;
    doc["method"] = result.method;
    doc["r"] = result.r;
    doc["statistic"] = result.statistic;
    doc["critical_value"] =
        result.critical_value ? nlohmann::ordered_json(*result.critical_value)
                              : nlohmann::ordered_json(nullptr);
    doc["p_value"] = result.p_value ? nlohmann::ordered_json(*result.p_value)
                                    : nlohmann::ordered_json(nullptr);
    doc["reject"] = result.reject;
    doc["alpha"] = result.alpha;
    doc["beta"] = result.beta ? nlohmann::ordered_json(*result.beta)
                              : nlohmann::ordered_json(nullptr);
    doc["kappa"] = result.kappa ? nlohmann::ordered_json(*result.kappa)
                                : nlohmann::ordered_json(nullptr);
    doc["estimated_rank"] = result.estimated_rank
                                ? nlohmann::ordered_json(*result.estimated_rank)
                                : nlohmann::ordered_json(nullptr);
    doc["B"] = result.bootstrap_draws ? nlohmann::ordered_json(*result.bootstrap_draws)
                                      : nlohmann::ordered_json(nullptr);
    doc["seed"] = config.seed;
    doc["scheme"] = scheme;
    doc["n"] = n;
    std::vector<double> sv(singular_values.data(),
                           singular_values.data() + singular_values.size());
    doc["singular_values"] = sv;
    doc["flags"] = result.flags;
    return doc;
}

}  // namespace detail

// Loads the CSV, builds Pi_hat = (1/n) sum V_i Z_i^T, runs the selected
// method and writes the JSON result document. Returns a process exit code.
inline int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        const detail::CsvData data = detail::read_csv(config);
        const auto n = static_cast<std::int64_t>(data.v_rows.size());
        if (n < 2) throw InsufficientData("need at least 2 data rows");

        std::vector<Matrix> contributions;
        contributions.reserve(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            contributions.push_back(data.v_rows[static_cast<std::size_t>(i)] *
                                    data.z_rows[static_cast<std::size_t>(i)].transpose());
        }
        Matrix mean = Matrix::Zero(contributions.front().rows(), contributions.front().cols());
        for (const Matrix& c : contributions) mean += c;
        mean /= static_cast<double>(n);
        const MatrixEstimate est(mean, std::sqrt(static_cast<double>(n)), n);

        const int k = static_cast<int>(config.varlist2.size());
        const int r = config.r.value_or(k - 1);
        const double alpha = config.alpha;
        const double beta = config.beta.value_or(alpha / 15.0);
        const double kappa = config.kappa.value(static_cast<double>(n));

        TestResult result;
        std::string scheme = "empirical";
        std::vector<std::string> extra_flags;

        const bool needs_bootstrap = config.method == "cf-t" || config.method == "cf-a" ||
                                     config.method == "cf-n" || config.method == "seq-cf-a";
        BootstrapEnsemble ensemble;
        if (needs_bootstrap) {
            if (config.cluster_column) {
                scheme = "cluster";
                // Group rows by cluster label, clusters ordered by first appearance.
                std::vector<std::vector<Matrix>> groups;
                std::map<std::string, std::size_t> group_of;
                for (std::int64_t i = 0; i < n; ++i) {
                    const std::string& label = data.cluster_labels[static_cast<std::size_t>(i)];
                    auto it = group_of.find(label);
                    if (it == group_of.end()) {
                        it = group_of.emplace(label, groups.size()).first;
                        groups.emplace_back();
                    }
                    groups[it->second].push_back(contributions[static_cast<std::size_t>(i)]);
                }
                ensemble = draw_cluster(groups, config.bootstrap_draws, config.seed,
                                        data.cluster_labels, config.threads);
                // The pairs-cluster root is 1/sqrt(n) of the empirical-root
                // convention; rescale so the ensemble feeds the tests on the
                // same tau_n scale.
                for (Matrix& draw : ensemble.draws) draw *= std::sqrt(static_cast<double>(n));
                extra_flags.push_back("cluster root rescaled by sqrt(n) for testing");
            } else if (config.time_ordered) {
                scheme = "circular-block";
                ensemble = draw_circular_block(contributions, config.block_size,
                                               config.bootstrap_draws, config.seed,
                                               config.threads);
            } else {
                ensemble = draw_empirical(contributions, config.bootstrap_draws, config.seed,
                                          config.threads);
            }
        } else if (config.cluster_column) {
            scheme = "cluster";
        } else if (config.time_ordered) {
            scheme = "circular-block";
        }

        const bool needs_covariance = config.method == "cf-t" || config.method == "kp" ||
                                      config.method == "kp-m" || config.method == "seq-kp";
        VecCovariance cov;
        if (needs_covariance) {
            if (config.time_ordered) {
                cov = cov_hacc_one_lag(contributions);
            } else {
                cov = cov_iid(contributions);
                if (config.cluster_column) {
                    extra_flags.push_back(
                        "kp covariance treats records as independent (cluster structure "
                        "is used by the bootstrap only)");
                }
            }
        }

        if (config.method == "cf-a" || config.method == "cf-n") {
            DerivativeEstimator estimator;
            estimator.kind = config.method == "cf-a" ? DerivativeKind::Analytic
                                                     : DerivativeKind::Numerical;
            estimator.kappa = kappa;
            estimator.r = r;
            result = cf_one_step(est, ensemble, r, alpha, estimator);
        } else if (config.method == "cf-t") {
            const int first = sequential_kp_rank(est, cov, beta);
            result = cf_two_step(est, ensemble, r, alpha, beta, first);
        } else if (config.method == "kp") {
            result = kp_test(est, cov, r, alpha);
        } else if (config.method == "kp-m") {
            result = kp_m_test(est, cov, r, alpha);
        } else if (config.method == "seq-kp") {
            auto engine = [&](int step_r, double level) {
                const TestResult t = kp_test(est, cov, step_r, level);
                StepDecision d;
                d.statistic = t.statistic;
                d.critical_value = t.critical_value.value_or(0.0);
                d.p_value = t.p_value;
                d.reject = t.reject;
                return d;
            };
            const SequentialEstimate se = sequential_estimate({engine, k, alpha});
            result.method = "seq-kp";
            result.r = r;
            result.alpha = alpha;
            result.estimated_rank = se.rank;
            result.reject = se.rank > r;
            result.statistic = est.rate * est.rate * phi_r(est.values, r);
        } else if (config.method == "seq-cf-a") {
            auto engine = [&](int step_r, double level) {
                DerivativeEstimator estimator;
                estimator.kind = DerivativeKind::Analytic;
                estimator.kappa = kappa;
                estimator.r = step_r;
                const TestResult t = cf_one_step(est, ensemble, step_r, level, estimator);
                StepDecision d;
                d.statistic = t.statistic;
                d.critical_value = t.critical_value.value_or(0.0);
                d.p_value = t.p_value;
                d.reject = t.reject;
                return d;
            };
            const SequentialEstimate se = sequential_estimate({engine, k, alpha});
            result.method = "seq-cf-a";
            result.r = r;
            result.alpha = alpha;
            result.kappa = kappa;
            result.estimated_rank = se.rank;
            result.reject = se.rank > r;
            result.statistic = est.rate * est.rate * phi_r(est.values, r);
            result.bootstrap_draws = ensemble.B;
        } else if (config.method == "threshold") {
            result.method = "threshold";
            result.r = r;
            result.alpha = alpha;
            result.kappa = kappa;
            result.estimated_rank = threshold_rank(est.values, kappa, k - 1);
            result.reject = *result.estimated_rank > r;
            result.statistic = est.rate * est.rate * phi_r(est.values, r);
        }
        for (const auto& flag : extra_flags) result.flags.push_back(flag);

        const SpectralDecomposition dec = svd(est.values);
        const nlohmann::ordered_json doc =
            detail::result_document(config, result, dec.singular_values, scheme, n);
        const std::string text = doc.dump(2) + "\n";
        if (config.output_path) {
            std::ofstream file(*config.output_path, std::ios::binary);
            if (!file) {
                err << "bootranktest: cannot open output file " << *config.output_path
                    << "\n";
                return kExitNumerical;
            }
            file << text;
        } else {
            out << text;
        }
        return kExitOk;
    } catch (const CsvError& e) {
        err << "bootranktest: " << e.what() << "\n";
        return kExitBadCsv;
    } catch (const std::exception& e) {
        err << "bootranktest: " << e.what() << "\n";
        return kExitNumerical;
    }
}

}  // namespace rankinfer::cli
