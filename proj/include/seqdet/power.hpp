#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "seqdet/arl_analytic.hpp"
#include "seqdet/math_util.hpp"
#include "seqdet/model.hpp"
#include "seqdet/parallel.hpp"
#include "seqdet/quadrature.hpp"
#include "seqdet/rng.hpp"

namespace seqdet {

/*
 * Detection power of the MOSUM chart for a transient mean shift with
 * lambda = l/L = 1 (window length matched to the signal): diffusion
 * approximation over the tent-shaped barrier, its discrete-time corrected
 * version, and the seeded empirical estimator. Inputs are standardized so
 * sigma = 1 internally; gamma = A sqrt(L) / sigma.
 */

/// Mean uplift E_nu S_{n,L} - mu L of the moving sum as the window slides
/// across a signal of length l starting after nu; nu' = nu - L.
inline double mean_profile_discrete(std::int64_t n, double amplitude, std::int64_t window,
                                    std::int64_t signal_len, std::int64_t nu_prime) {
    if (window < 1 || signal_len < 1)
        throw std::invalid_argument("mean_profile_discrete: window and signal length must be >= 1");
    const std::int64_t lo = std::min(signal_len, window);
    const std::int64_t hi = std::max(signal_len, window);
    const std::int64_t nu_plus_l = nu_prime + window + signal_len;
    if (n <= nu_prime || n >= nu_plus_l) return 0.0;
    if (n <= nu_prime + lo) return amplitude * static_cast<double>(n - nu_prime);
    if (n <= nu_prime + hi) return amplitude * static_cast<double>(lo);
    return amplitude * static_cast<double>(lo - (n - nu_prime - hi));
}

/// Pr(S(t) < h on [0,1] | S(0) = x) for the triangular-correlation process.
inline double conditional_f1(double h, double x) {
    if (x > h) throw std::invalid_argument("conditional_f1: requires x <= h");
    if (x < -37.0) {
        // exp(x^2/2) Phi(x) -> phi(0)/|x| (1 - 1/x^2 + 3/x^4 ...): the naive
        // product is inf * 0 here, and the tail still matters at O(1/|x|)
        const double inv = 1.0 / (x * x);
        const double tail = normal_pdf(h) / (-x) * (1.0 - inv + 3.0 * inv * inv);
        return normal_cdf(h) - tail;
    }
    return normal_cdf(h) - std::exp(-0.5 * (h * h - x * x)) * normal_cdf(x);
}

namespace detail {

/*
 * Integrand of the two-dimensional representation of
 * Pr(S(t) < B(t; h, 0, -gamma, gamma) on [0, 3] | S(0) = 0): a 4x4
 * determinant of normal densities (last column: distribution functions)
 * weighted by exp(-gamma (x3 - x2)). Start value fixed at x = 0.
 */
inline double barrier3_integrand(double x2, double x3, double h, double gamma) {
    const std::array<std::array<double, 4>, 4> m{{
        {normal_pdf(0.0), normal_pdf(-x2 - h), normal_pdf(-x3 - 2.0 * h + gamma),
         normal_cdf(-x3 - 2.0 * h + gamma)},
        {normal_pdf(h), normal_pdf(x2), normal_pdf(-x3 - h + gamma),
         normal_cdf(-x3 - h + gamma)},
        {normal_pdf(x2 + 2.0 * h), normal_pdf(h), normal_pdf(x2 - x3 + gamma),
         normal_cdf(x2 - x3 + gamma)},
        {normal_pdf(x3 + 3.0 * h - gamma), normal_pdf(x3 + 2.0 * h - gamma - x2), normal_pdf(h),
         normal_cdf(h)},
    }};
    return std::exp(-gamma * (x3 - x2)) * det4(m);
}

}  // namespace detail

/*
 * Pr(S(t) < B(t; h, 0, -gamma, gamma) on [0, 3] | S(0) = 0): flat barrier h
 * on [0,1], descending to h - gamma at t = 2, back to h at t = 3. The
 * infinite region is truncated where the Gaussian-determinant integrand is
 * below ~1e-14 along each axis (the tensorized tail integrator doubles
 * panel widths until contributions are negligible).
 */
inline double conditional_f3_dip(double h, double gamma) {
    if (!(gamma >= 0.0)) throw std::invalid_argument("conditional_f3_dip: gamma must be >= 0");
    auto inner = [&](double x2) {
        auto f = [&](double x3) { return detail::barrier3_integrand(x2, x3, h, gamma); };
        return integrate_to_infinity(f, x2 - h + gamma, 1e-12, 4.0);
    };
    const double outer = integrate_to_infinity(inner, -h, 1e-11, 4.0);
    const double prefactor = kSqrt2Pi * std::exp(0.5 * gamma * gamma);
    return clamp_probability(prefactor * outer);
}

/// Diffusion (L -> infinity) power: 1 - F_{h,0,-g,g}(3|0) / F_{h,0}(1|0).
inline double diffusion_power(double h, double gamma) {
    const double f1 = conditional_f1(h, 0.0);
    if (!(f1 > 0.0)) throw std::domain_error("diffusion_power: F_{h,0}(1|0) is not positive");
    return clamp_probability(1.0 - conditional_f3_dip(h, gamma) / f1);
}

/// Discrete-time corrected power: the barrier is lifted to h_L = h + w_L.
inline double discrete_power(double h, double amplitude, std::int64_t window) {
    if (window < 2) throw std::invalid_argument("discrete_power: window must be >= 2");
    if (!(amplitude > 0.0)) throw std::invalid_argument("discrete_power: amplitude must be > 0");
    const double gamma = amplitude * std::sqrt(static_cast<double>(window));
    const double h_l = h + discrete_barrier_shift(window);
    return diffusion_power(h_l, gamma);
}

struct PowerEstimate {
    double power = 0.0;
    double std_error = 0.0;
    std::int64_t detections = 0;
    std::int64_t conditioned = 0;  // replicates with no alarm before nu'
    std::int64_t replicates = 0;
    std::uint64_t seed = 0;
    std::int64_t nu_prime = 0;
    std::int64_t window_begin = 0;  // statistic indices [begin, end], inclusive
    std::int64_t window_end = 0;
};

/*
 * Conditional crossing frequency of the standardized moving sum: given no
 * crossing at statistic indices 0..nu', the fraction crossing somewhere in
 * [win_begin, win_end]. Signal occupies observations nu+1..nu+l.
 */
inline PowerEstimate empirical_power_mosum_window(double h, double amplitude, std::int64_t window,
                                                  std::int64_t signal_len, std::int64_t nu,
                                                  std::int64_t win_begin, std::int64_t win_end,
                                                  std::int64_t reps, std::uint64_t seed,
                                                  int threads = 0) {
    if (reps < 1000) throw std::invalid_argument("empirical power: need at least 10^3 replicates");
    const std::int64_t nu_prime = nu - window;
    if (nu_prime < 0 || win_begin > win_end)
        throw std::invalid_argument("empirical power: malformed conditioning window");
    const double sqrt_l = std::sqrt(static_cast<double>(window));
    const std::int64_t last_obs = win_end + window;  // xi index n needs observations n+1..n+L

    struct Partial {
        std::int64_t conditioned = 0;
        std::int64_t detections = 0;
    };
    std::vector<Partial> parts(static_cast<std::size_t>(std::min<std::int64_t>(reps, kReduceChunks)));

    parallel_chunks(reps, threads, [&](std::int64_t chunk, std::int64_t begin, std::int64_t end) {
        Partial local;
        std::vector<double> ring(static_cast<std::size_t>(window), 0.0);
        for (std::int64_t rep = begin; rep < end; ++rep) {
            Rng rng = Rng::for_replicate(seed, static_cast<std::uint64_t>(rep));
            double sum = 0.0;
            bool pre_crossed = false;
            bool detected = false;
            for (std::int64_t obs = 1; obs <= last_obs; ++obs) {
                const bool shifted = obs > nu && obs <= nu + signal_len;
                const double y = shifted ? rng.normal() + amplitude : rng.normal();
                const std::size_t pos = static_cast<std::size_t>((obs - 1) % window);
                sum += y - ring[pos];
                ring[pos] = y;
                if (obs < window) continue;
                const std::int64_t stat_idx = obs - window;
                const double xi = sum / sqrt_l;
                if (stat_idx <= nu_prime) {
                    if (xi > h) {
                        pre_crossed = true;
                        break;
                    }
                } else if (stat_idx >= win_begin && xi > h) {
                    detected = true;
                    break;
                }
            }
            std::fill(ring.begin(), ring.end(), 0.0);
            if (!pre_crossed) {
                ++local.conditioned;
                if (detected) ++local.detections;
            }
        }
        parts[static_cast<std::size_t>(chunk)] = local;
    });

    PowerEstimate est;
    for (const auto& p : parts) {
        est.conditioned += p.conditioned;
        est.detections += p.detections;
    }
    if (est.conditioned == 0)
        throw std::runtime_error("empirical power: no replicate survived conditioning (threshold too low)");
    est.power = static_cast<double>(est.detections) / static_cast<double>(est.conditioned);
    est.std_error = std::sqrt(est.power * (1.0 - est.power) / static_cast<double>(est.conditioned));
    est.replicates = reps;
    est.seed = seed;
    est.nu_prime = nu_prime;
    est.window_begin = win_begin;
    est.window_end = win_end;
    return est;
}

/*
 * Empirical conditional detection probability of the MOSUM chart at
 * standardized threshold h: crossing within statistic indices
 * [nu'+1, nu+l-1] given no crossing up to nu'. Burn-in nu = 3L (the
 * conditioned moving-sum sequence is effectively stationary past 2L).
 */
inline PowerEstimate empirical_power_mosum(double h, double amplitude, std::int64_t window,
                                           std::int64_t signal_len, std::int64_t reps,
                                           std::uint64_t seed, int threads = 0) {
    if (window < 1 || signal_len < 1)
        throw std::invalid_argument("empirical_power_mosum: window and signal length must be >= 1");
    const std::int64_t nu = 3 * window;
    const std::int64_t nu_prime = nu - window;
    return empirical_power_mosum_window(h, amplitude, window, signal_len, nu, nu_prime + 1,
                                        nu + signal_len - 1, reps, seed, threads);
}

}  // namespace seqdet
