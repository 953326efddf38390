// Monte Carlo front end: runs the study designs and emits rejection tables
// or rank-estimator histograms as CSV/JSON.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rankinfer/cli.hpp"
#include "rankinfer/sim_lab.hpp"

namespace sim = rankinfer::sim;

namespace {

bool make_design(const std::string& name, double delta, int d, std::int64_t n,
                 sim::Design& design, std::ostream& err) {
    design.delta = delta;
    design.d = d;
    design.n = n;
    if (name == "motivation") {
        design.kind = sim::DesignKind::MotivationIID;
        design.k = 6;
    } else if (name == "gaussian-omega1") {
        design.kind = sim::DesignKind::GaussianDirect;
        design.omega = sim::OmegaChoice::Omega1;
        design.k = 2;
    } else if (name == "gaussian-omega2") {
        design.kind = sim::DesignKind::GaussianDirect;
        design.omega = sim::OmegaChoice::Omega2;
        design.k = 2;
    } else if (name == "hetero-ma") {
        design.kind = sim::DesignKind::HeteroMA;
        design.k = 4;
    } else {
        err << "ranklab: unknown design '" << name << "'\n";
        return false;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo laboratory for matrix rank tests"};
    app.name("ranklab");

    std::string design_name = "hetero-ma";
    std::string methods_raw = "cf-t,cf-a,cf-n,kp-m";
    std::string estimator_name;
    std::string kappa_raw = "n^-1/4";
    std::string format = "csv";
    std::string output_path;
    double delta = 0.0;
    int d = 1;
    std::int64_t n = 1000;
    int r = -1;
    double alpha = 0.05;
    double beta_divisor = 10.0;
    std::int64_t replications = 2000;
    int bootstrap_draws = 500;
    std::uint64_t seed = 20260808;
    int threads = 0;

    app.add_option("--design", design_name,
                   "motivation|gaussian-omega1|gaussian-omega2|hetero-ma")
        ->default_val("hetero-ma");
    app.add_option("--delta", delta, "Alternative distance (0 = null)")->default_val(0.0);
    app.add_option("--d", d, "Trailing zero count for the motivation design")
        ->default_val(1);
    app.add_option("--n", n, "Sample size")->default_val(1000);
    app.add_option("--r", r, "Hypothesized rank (default k-1)");
    app.add_option("--methods", methods_raw, "Comma list of cf-t,cf-a,cf-n,kp,kp-m");
    app.add_option("--estimator", estimator_name,
                   "Histogram mode: seq-cf-a|seq-kp|threshold");
    app.add_option("--kappa", kappa_raw, "Threshold rule, e.g. n^-1/4");
    app.add_option("--alpha", alpha, "Significance level")->default_val(0.05);
    app.add_option("--beta-divisor", beta_divisor, "cf-t first-step level = alpha/this")
        ->default_val(10.0);
    app.add_option("--R", replications, "Monte Carlo replications")->default_val(2000);
    app.add_option("--B", bootstrap_draws, "Bootstrap repetitions")->default_val(500);
    app.add_option("--seed", seed, "Master seed")->default_val(20260808);
    app.add_option("--threads", threads, "Worker threads (0: env or hardware)");
    app.add_option("--format", format, "csv|json")->default_val("csv");
    app.add_option("--out", output_path, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            std::cerr << app.help();
            return 2;
        }
        std::cerr << "ranklab: " << e.what() << "\n";
        return 2;
    }

    sim::Design design;
    if (!make_design(design_name, delta, d, n, design, std::cerr)) return 2;
    if (r < 0) r = design.k - 1;

    sim::KappaRule kappa;
    if (!rankinfer::cli::parse_kappa_rule(kappa_raw, kappa)) {
        std::cerr << "ranklab: cannot parse --kappa '" << kappa_raw << "'\n";
        return 2;
    }

    try {
        std::string text;
        if (!estimator_name.empty()) {
            sim::EstimatorSpec spec;
            spec.kappa = kappa;
            spec.level = alpha;
            spec.bootstrap_draws = bootstrap_draws;
            if (estimator_name == "seq-cf-a") {
                spec.kind = sim::EstimatorKind::SequentialCfA;
            } else if (estimator_name == "seq-kp") {
                spec.kind = sim::EstimatorKind::SequentialKp;
            } else if (estimator_name == "threshold") {
                spec.kind = sim::EstimatorKind::Threshold;
            } else {
                std::cerr << "ranklab: unknown estimator '" << estimator_name << "'\n";
                return 2;
            }
            const sim::RankHistogram hist =
                sim::rank_distribution(design, spec, replications, seed, threads);
            text = format == "json" ? sim::emit_json(hist) : sim::emit_csv(hist);
        } else {
            sim::MonteCarloConfig config;
            config.design = design;
            config.r = r;
            config.replications = replications;
            config.bootstrap_draws = bootstrap_draws;
            config.alpha = alpha;
            config.seed = seed;
            config.threads = threads;
            for (const std::string& name : rankinfer::cli::split_list(methods_raw)) {
                sim::MethodSpec spec;
                spec.kappa = kappa;
                spec.beta_divisor = beta_divisor;
                if (name == "cf-a") {
                    spec.method = sim::Method::CfA;
                } else if (name == "cf-n") {
                    spec.method = sim::Method::CfN;
                } else if (name == "cf-t") {
                    spec.method = sim::Method::CfT;
                } else if (name == "kp") {
                    spec.method = sim::Method::Kp;
                } else if (name == "kp-m") {
                    spec.method = sim::Method::KpM;
                } else {
                    std::cerr << "ranklab: unknown method '" << name << "'\n";
                    return 2;
                }
                config.methods.push_back(spec);
            }
            const sim::RejectionTable table = sim::run_monte_carlo(config);
            text = format == "json" ? sim::emit_json(table) : sim::emit_csv(table);
        }
        if (!output_path.empty()) {
            sim::write_file(output_path, text);
        } else {
            std::cout << text;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "ranklab: " << e.what() << "\n";
        return 3;
    }
}
