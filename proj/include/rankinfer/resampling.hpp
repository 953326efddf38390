#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rankinfer/parallel.hpp"
#include "rankinfer/rng.hpp"
#include "rankinfer/spectral.hpp"

namespace rankinfer {

enum class SchemeKind { EmpiricalIID, PairsCluster, CircularBlock };

inline const char* to_string(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::EmpiricalIID: return "empirical";
        case SchemeKind::PairsCluster: return "cluster";
        case SchemeKind::CircularBlock: return "circular-block";
    }
    return "unknown";
}

struct Scheme {
    SchemeKind kind = SchemeKind::EmpiricalIID;
    int block_size = 0;                       // CircularBlock only
    std::vector<std::string> cluster_ids;     // PairsCluster only, one per record
};

// B bootstrap roots, tagged with the scheme and seed that produced them.
// Draw b is a pure function of (seed, b, data), so ensembles are bitwise
// reproducible under any parallel schedule.
struct BootstrapEnsemble {
    std::vector<Matrix> draws;
    Scheme scheme;
    std::uint64_t seed = 0;
    int B = 0;
};

namespace detail {

inline void check_contributions(const std::vector<Matrix>& contributions,
                                const char* where) {
    if (contributions.empty()) throw InsufficientData(std::string(where) + ": empty sample");
    const Eigen::Index rows = contributions.front().rows();
    const Eigen::Index cols = contributions.front().cols();
    for (const Matrix& c : contributions) {
        if (c.rows() != rows || c.cols() != cols) {
            throw DimensionError(std::string(where) + ": contributions differ in shape");
        }
        check_finite(c, where);
    }
}

inline Matrix mean_of(const std::vector<Matrix>& contributions) {
    Matrix acc = Matrix::Zero(contributions.front().rows(), contributions.front().cols());
    for (const Matrix& c : contributions) acc += c;
    return acc / static_cast<double>(contributions.size());
}

inline void check_ensemble(const BootstrapEnsemble& ensemble, const char* where) {
    for (const Matrix& d : ensemble.draws) check_finite(d, where);
}

}  // namespace detail

// Efron empirical bootstrap over per-record m x k contributions. Draw b is
// the root sqrt(n) * (Pi*_b - Pi_hat) with Pi*_b = (1/n) sum_i W_i c_i and
// (W_1,...,W_n) multinomial(n; 1/n,...,1/n).
inline BootstrapEnsemble draw_empirical(const std::vector<Matrix>& contributions, int B,
                                        std::uint64_t seed, int threads = 1) {
    detail::check_contributions(contributions, "draw_empirical");
    const std::int64_t n = static_cast<std::int64_t>(contributions.size());
    if (n < 2) throw InsufficientData("draw_empirical: need at least 2 records");
    if (B < 1) throw InvalidArgument("draw_empirical: B must be >= 1");

    const Matrix pi_hat = detail::mean_of(contributions);
    const double scale = std::sqrt(static_cast<double>(n));

    BootstrapEnsemble ensemble;
    ensemble.B = B;
    ensemble.seed = seed;
    ensemble.scheme.kind = SchemeKind::EmpiricalIID;
    ensemble.draws.assign(static_cast<std::size_t>(B), Matrix());
    parallel_for(
        B,
        [&](std::int64_t b) {
            CounterRng rng(seed, static_cast<std::uint64_t>(b));
            const auto counts = multinomial_counts(n, n, rng);
            Matrix star = Matrix::Zero(pi_hat.rows(), pi_hat.cols());
            for (std::int64_t i = 0; i < n; ++i) {
                if (counts[static_cast<std::size_t>(i)] != 0) {
                    star += static_cast<double>(counts[static_cast<std::size_t>(i)]) *
                            contributions[static_cast<std::size_t>(i)];
                }
            }
            star /= static_cast<double>(n);
            ensemble.draws[static_cast<std::size_t>(b)] = scale * (star - pi_hat);
        },
        threads);
    detail::check_ensemble(ensemble, "draw_empirical");
    return ensemble;
}

// Pairs cluster bootstrap: whole clusters are resampled with replacement via
// multinomial(G; 1/G,...,1/G) weights over the G cluster totals. Draw b is
//
//   (1/n) sum_g W_g ( S_g - n_g * Pi_hat ),   S_g = sum of cluster g's records,
//
// the per-observation-centered form of the cluster root; identical clusters
// therefore produce exactly zero draws. Note the convention: this root is
// 1/sqrt(n) times the scaling used by draw_empirical, matching the source
// formula; callers feeding rank tests rescale by sqrt(n).
inline BootstrapEnsemble draw_cluster(const std::vector<std::vector<Matrix>>& groups,
                                      int B, std::uint64_t seed,
                                      std::vector<std::string> cluster_ids = {},
                                      int threads = 1) {
    const std::int64_t G = static_cast<std::int64_t>(groups.size());
    if (G < 2) throw InsufficientData("draw_cluster: need at least 2 clusters");
    if (B < 1) throw InvalidArgument("draw_cluster: B must be >= 1");

    std::vector<Matrix> totals;
    std::vector<double> sizes;
    totals.reserve(groups.size());
    std::int64_t n = 0;
    for (const auto& group : groups) {
        detail::check_contributions(group, "draw_cluster");
        Matrix total = Matrix::Zero(group.front().rows(), group.front().cols());
        for (const Matrix& c : group) total += c;
        totals.push_back(std::move(total));
        sizes.push_back(static_cast<double>(group.size()));
        n += static_cast<std::int64_t>(group.size());
    }
    if (!cluster_ids.empty() && static_cast<std::int64_t>(cluster_ids.size()) != n) {
        throw DimensionError("draw_cluster: cluster_ids must carry one label per record");
    }
    Matrix pi_hat = Matrix::Zero(totals.front().rows(), totals.front().cols());
    for (const Matrix& t : totals) pi_hat += t;
    pi_hat /= static_cast<double>(n);

    BootstrapEnsemble ensemble;
    ensemble.B = B;
    ensemble.seed = seed;
    ensemble.scheme.kind = SchemeKind::PairsCluster;
    ensemble.scheme.cluster_ids = std::move(cluster_ids);
    ensemble.draws.assign(static_cast<std::size_t>(B), Matrix());
    parallel_for(
        B,
        [&](std::int64_t b) {
            CounterRng rng(seed, static_cast<std::uint64_t>(b));
            const auto counts = multinomial_counts(G, G, rng);
            Matrix acc = Matrix::Zero(pi_hat.rows(), pi_hat.cols());
            for (std::int64_t g = 0; g < G; ++g) {
                if (counts[static_cast<std::size_t>(g)] != 0) {
                    acc += static_cast<double>(counts[static_cast<std::size_t>(g)]) *
                           (totals[static_cast<std::size_t>(g)] -
                            sizes[static_cast<std::size_t>(g)] * pi_hat);
                }
            }
            ensemble.draws[static_cast<std::size_t>(b)] = acc / static_cast<double>(n);
        },
        threads);
    detail::check_ensemble(ensemble, "draw_cluster");
    return ensemble;
}

// Circular block bootstrap (Politis-Romano): ceil(n / b) blocks of length b
// with wraparound, truncated to n observations, then the usual root
// sqrt(n) * (Pi*_b - Pi_hat). The root is centered at Pi_hat.
inline BootstrapEnsemble draw_circular_block(const std::vector<Matrix>& series,
                                             int block_size, int B, std::uint64_t seed,
                                             int threads = 1) {
    detail::check_contributions(series, "draw_circular_block");
    const std::int64_t n = static_cast<std::int64_t>(series.size());
    if (block_size < 1 || block_size > n) {
        throw InvalidArgument("draw_circular_block: block_size must lie in [1, n]");
    }
    if (B < 1) throw InvalidArgument("draw_circular_block: B must be >= 1");

    const Matrix pi_hat = detail::mean_of(series);
    const double scale = std::sqrt(static_cast<double>(n));
    const std::int64_t blocks = (n + block_size - 1) / block_size;

    BootstrapEnsemble ensemble;
    ensemble.B = B;
    ensemble.seed = seed;
    ensemble.scheme.kind = SchemeKind::CircularBlock;
    ensemble.scheme.block_size = block_size;
    ensemble.draws.assign(static_cast<std::size_t>(B), Matrix());
    parallel_for(
        B,
        [&](std::int64_t b) {
            CounterRng rng(seed, static_cast<std::uint64_t>(b));
            Matrix star = Matrix::Zero(pi_hat.rows(), pi_hat.cols());
            std::int64_t filled = 0;
            for (std::int64_t blk = 0; blk < blocks && filled < n; ++blk) {
                const std::int64_t start =
                    static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(n)));
                for (int j = 0; j < block_size && filled < n; ++j, ++filled) {
                    star += series[static_cast<std::size_t>((start + j) % n)];
                }
            }
            star /= static_cast<double>(n);
            ensemble.draws[static_cast<std::size_t>(b)] = scale * (star - pi_hat);
        },
        threads);
    detail::check_ensemble(ensemble, "draw_circular_block");
    return ensemble;
}

}  // namespace rankinfer
