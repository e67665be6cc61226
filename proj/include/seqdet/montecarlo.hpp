#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqdet/arl_analytic.hpp"
#include "seqdet/detectors.hpp"
#include "seqdet/model.hpp"
#include "seqdet/parallel.hpp"
#include "seqdet/power.hpp"
#include "seqdet/rng.hpp"

namespace seqdet {

/*
 * Seeded simulation engine. Replicate i of a plan draws from the RNG
 * stream keyed by (master seed, i); partials are folded in fixed chunk
 * order, so estimates are bit-identical across thread counts.
 */

struct DetectorConfig {
    ProcedureKind kind = ProcedureKind::Page;
    GaussianChangeSpec spec{};
    std::int64_t mosum_window = 0;   // Mosum
    TransientWindow window{1, 1};    // GenMosum

    std::int64_t warmup_offset() const {
        if (kind == ProcedureKind::Mosum) return mosum_window;
        if (kind == ProcedureKind::GenMosum) return window.l1;
        return 0;
    }
};

struct SimulationPlan {
    DetectorConfig detector;
    double threshold = 0.0;
    Hypothesis hypothesis = Hypothesis::no_change();
    std::int64_t replicates = 100000;
    std::int64_t max_steps = 0;  // censoring cap per replicate
    std::uint64_t seed = 1;
    int parallelism = 0;  // 0: use all hardware threads

    void validate() const {
        if (replicates < 1) throw std::invalid_argument("SimulationPlan: replicates must be >= 1");
        if (max_steps < detector.warmup_offset() + 1)
            throw std::invalid_argument("SimulationPlan: max_steps must exceed the detector warm-up");
    }
};

struct RunLengthEstimate {
    double mean = 0.0;       // stopping time in the procedure's own convention
    double std_error = 0.0;
    std::int64_t censored_count = 0;
    std::int64_t replicates = 0;
    std::uint64_t seed = 0;
    std::int64_t warmup_offset = 0;
    bool censoring_flagged = false;  // more than 0.1% of replicates censored
};

namespace detail {

template <class MakeDetector>
RunLengthEstimate run_length_core(const SimulationPlan& plan, const MakeDetector& make) {
    plan.validate();
    if (plan.hypothesis.has_change())
        throw std::invalid_argument("estimate_arl: the run-length estimator runs under no-change");
    const GaussianChangeSpec spec = plan.detector.spec;

    struct Partial {
        std::int64_t sum = 0;
        double sum_sq = 0.0;
        std::int64_t censored = 0;
    };
    std::vector<Partial> parts(
        static_cast<std::size_t>(std::min<std::int64_t>(plan.replicates, kReduceChunks)));

    parallel_chunks(plan.replicates, plan.parallelism,
                    [&](std::int64_t chunk, std::int64_t begin, std::int64_t end) {
                        Partial local;
                        auto detector = make();
                        for (std::int64_t rep = begin; rep < end; ++rep) {
                            detector.reset();
                            Rng rng = Rng::for_replicate(plan.seed, static_cast<std::uint64_t>(rep));
                            auto stream = [&] { return rng.normal(spec.mu, spec.sigma); };
                            const RunResult result =
                                run_to_alarm(detector, plan.threshold, stream, plan.max_steps);
                            if (result.alarm) {
                                local.sum += result.alarm->n;
                                local.sum_sq += static_cast<double>(result.alarm->n) *
                                                static_cast<double>(result.alarm->n);
                            } else {
                                ++local.censored;
                            }
                        }
                        parts[static_cast<std::size_t>(chunk)] = local;
                    });

    std::int64_t sum = 0, censored = 0;
    double sum_sq = 0.0;
    for (const auto& p : parts) {
        sum += p.sum;
        sum_sq += p.sum_sq;
        censored += p.censored;
    }
    const std::int64_t hits = plan.replicates - censored;
    if (hits == 0) throw std::runtime_error("estimate_arl: every replicate was censored");

    RunLengthEstimate est;
    est.mean = static_cast<double>(sum) / static_cast<double>(hits);
    const double var = std::max(0.0, sum_sq / static_cast<double>(hits) - est.mean * est.mean);
    est.std_error = std::sqrt(var / static_cast<double>(hits));
    est.censored_count = censored;
    est.replicates = plan.replicates;
    est.seed = plan.seed;
    est.warmup_offset = plan.detector.warmup_offset();
    est.censoring_flagged =
        static_cast<double>(censored) > 0.001 * static_cast<double>(plan.replicates);
    return est;
}

}  // namespace detail

/// Mean stopping time under no change, in the procedure's tau convention
/// (MOSUM and generalized MOSUM include their warm-up offsets).
inline RunLengthEstimate estimate_arl(const SimulationPlan& plan) {
    const DetectorConfig& cfg = plan.detector;
    switch (cfg.kind) {
        case ProcedureKind::CusumV:
            return detail::run_length_core(plan, [&] { return CusumVDetector(cfg.spec); });
        case ProcedureKind::Page:
            return detail::run_length_core(plan, [&] { return PageDetector(cfg.spec); });
        case ProcedureKind::ShiryaevRoberts:
            return detail::run_length_core(plan, [&] { return ShiryaevRobertsDetector(cfg.spec); });
        case ProcedureKind::Mosum:
            return detail::run_length_core(plan,
                                           [&] { return MosumDetector(cfg.mosum_window, cfg.spec); });
        case ProcedureKind::GenMosum:
            return detail::run_length_core(plan,
                                           [&] { return GenMosumDetector(cfg.window, cfg.spec); });
        case ProcedureKind::FullLr:
            return detail::run_length_core(plan, [&] { return FullLrDetector(cfg.spec); });
    }
    throw std::invalid_argument("estimate_arl: unknown procedure");
}

struct BcpEstimate {
    double probability = 0.0;  // Pr(max statistic over indices 0..M stays below H)
    double std_error = 0.0;
    std::int64_t replicates = 0;
    std::uint64_t seed = 0;
};

/*
 * Boundary-crossing probability over a finite horizon of statistic
 * indices 0..M: the fraction of replicates whose statistic history stays
 * below H. Windowed procedures consume warm-up + M observations; the
 * generalized MOSUM history includes the windows ending before l1.
 */
inline BcpEstimate estimate_bcp(const DetectorConfig& config, double threshold, std::int64_t horizon,
                                std::int64_t reps, std::uint64_t seed, int threads = 0) {
    if (horizon < 0) throw std::invalid_argument("estimate_bcp: horizon must be >= 0");
    if (reps < 1) throw std::invalid_argument("estimate_bcp: replicates must be >= 1");
    const GaussianChangeSpec spec = config.spec;
    // Statistic indices 0..M: windowed procedures consume warm-up + M
    // observations, unwindowed ones M steps (their index starts at 1).
    const std::int64_t steps = config.warmup_offset() + horizon;

    std::vector<std::int64_t> parts(
        static_cast<std::size_t>(std::min<std::int64_t>(reps, kReduceChunks)), 0);

    auto run = [&](auto make_detector) {
        parallel_chunks(reps, threads, [&](std::int64_t chunk, std::int64_t begin, std::int64_t end) {
            std::int64_t below = 0;
            auto detector = make_detector();
            const double key = detector.threshold_key(threshold);
            for (std::int64_t rep = begin; rep < end; ++rep) {
                detector.reset();
                Rng rng = Rng::for_replicate(seed, static_cast<std::uint64_t>(rep));
                bool crossed = false;
                for (std::int64_t s = 0; s < steps; ++s) {
                    detector.step(rng.normal(spec.mu, spec.sigma));
                    if (detector.ready() && detector.crossed(key)) {
                        crossed = true;
                        break;
                    }
                }
                if (!crossed) ++below;
            }
            parts[static_cast<std::size_t>(chunk)] = below;
        });
    };

    switch (config.kind) {
        case ProcedureKind::CusumV: run([&] { return CusumVDetector(spec); }); break;
        case ProcedureKind::Page: run([&] { return PageDetector(spec); }); break;
        case ProcedureKind::ShiryaevRoberts: run([&] { return ShiryaevRobertsDetector(spec); }); break;
        case ProcedureKind::Mosum: run([&] { return MosumDetector(config.mosum_window, spec); }); break;
        case ProcedureKind::GenMosum: run([&] { return GenMosumDetector(config.window, spec); }); break;
        case ProcedureKind::FullLr: run([&] { return FullLrDetector(spec); }); break;
    }

    std::int64_t below = 0;
    for (auto b : parts) below += b;
    BcpEstimate est;
    est.probability = static_cast<double>(below) / static_cast<double>(reps);
    est.std_error = std::sqrt(est.probability * (1.0 - est.probability) / static_cast<double>(reps));
    est.replicates = reps;
    est.seed = seed;
    return est;
}

struct CalibrationResult {
    double threshold = 0.0;
    double achieved_arl = 0.0;
    double achieved_std_error = 0.0;
    int rounds = 0;
    std::int64_t final_replicates = 0;
};

namespace detail {

/// Bisection runs on a transformed coordinate so multiplicative threshold
/// scales (V, R) bisect geometrically.
inline bool multiplicative_scale(ProcedureKind kind) {
    return kind == ProcedureKind::CusumV || kind == ProcedureKind::ShiryaevRoberts;
}

inline double analytic_threshold_seed(const DetectorConfig& config, double target) {
    const double amplitude = config.spec.amplitude;
    switch (config.kind) {
        case ProcedureKind::CusumV: {
            const double k = kappa(amplitude);
            return target * amplitude * k * k / 2.0;
        }
        case ProcedureKind::Page: {
            const double k = kappa(amplitude);
            return std::log(std::max(1.5, target * amplitude * k * k / 2.0));
        }
        case ProcedureKind::ShiryaevRoberts:
            return target * kappa(amplitude);
        case ProcedureKind::Mosum: {
            const std::int64_t window = config.mosum_window;
            const double want = std::max(2.0, target - static_cast<double>(window));
            double lo = 0.2, hi = 8.0;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                double arl;
                try {
                    arl = mosum_arl_std(mid, window);
                } catch (const std::domain_error&) {
                    lo = mid;
                    continue;
                }
                (arl < want ? lo : hi) = mid;
            }
            const double h = 0.5 * (lo + hi);
            return config.spec.mu * static_cast<double>(window) +
                   h * config.spec.sigma * std::sqrt(static_cast<double>(window));
        }
        case ProcedureKind::GenMosum: {
            if (config.window.l0 != 1) return 0.0;  // no closed form; bracket by probing
            const double want = std::max(2.0, target - static_cast<double>(config.window.l1));
            double lo = -2.0, hi = 40.0;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                double arl;
                try {
                    arl = approx2_arl(mid, config.spec.amplitude, config.window.l1);
                } catch (const std::domain_error&) {
                    lo = mid;
                    continue;
                }
                (arl < want ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
        }
        case ProcedureKind::FullLr:
            return std::log(std::max(2.0, target));  // crude seed; refined by simulation
    }
    return 0.0;
}

inline double simulated_arl(const DetectorConfig& config, double threshold, double target,
                            std::int64_t reps, std::uint64_t seed, int threads,
                            double* std_error) {
    SimulationPlan plan;
    plan.detector = config;
    plan.threshold = threshold;
    plan.replicates = reps;
    plan.max_steps = static_cast<std::int64_t>(100.0 * target) + config.warmup_offset() + 16;
    plan.seed = seed;
    plan.parallelism = threads;
    const RunLengthEstimate est = estimate_arl(plan);
    if (std_error) *std_error = est.std_error;
    // Censored replicates sit above the cap: treat them at the cap, which
    // biases the bracket conservatively instead of dropping them.
    const double hit_frac = static_cast<double>(est.replicates - est.censored_count) /
                            static_cast<double>(est.replicates);
    return est.mean * hit_frac +
           static_cast<double>(plan.max_steps) * (1.0 - hit_frac);
}

}  // namespace detail

/*
 * Monotone threshold search for a target ARL: analytic seed where one
 * exists, expanding bracket probes at low replicate counts, then at most
 * eight bisection rounds at escalating replicate counts until the
 * simulated ARL is within tol_rel of the target.
 */
inline CalibrationResult calibrate_threshold(const DetectorConfig& config, double target_arl,
                                             double tol_rel, std::uint64_t seed, int threads = 0,
                                             std::int64_t max_reps = 100000) {
    if (!(target_arl > static_cast<double>(config.warmup_offset())))
        throw std::invalid_argument("calibrate_threshold: target must exceed the warm-up length");
    if (!(tol_rel > 0.0)) throw std::invalid_argument("calibrate_threshold: tol_rel must be > 0");

    const bool log_scale = detail::multiplicative_scale(config.kind);
    auto encode = [&](double h) { return log_scale ? std::log(h) : h; };
    auto decode = [&](double u) { return log_scale ? std::exp(u) : u; };

    std::uint64_t seed_state = seed;
    auto next_seed = [&] { return splitmix64(seed_state); };

    const std::int64_t probe_reps = std::min<std::int64_t>(2000, max_reps);
    auto probe = [&](double u) {
        return detail::simulated_arl(config, decode(u), target_arl, probe_reps, next_seed(), threads,
                                     nullptr);
    };

    double u_seed = encode(std::max(detail::analytic_threshold_seed(config, target_arl),
                                    log_scale ? 1e-6 : -1e300));
    if (config.kind == ProcedureKind::GenMosum && config.window.l0 != 1) u_seed = 0.0;

    const double step0 = log_scale ? 0.7 : (config.kind == ProcedureKind::Mosum
                                                ? 0.5 * config.spec.sigma *
                                                      std::sqrt(static_cast<double>(config.mosum_window))
                                                : 1.0);
    double lo = u_seed, hi = u_seed;
    double arl_lo = probe(u_seed), arl_hi = arl_lo;
    double step = step0;
    for (int guard = 0; arl_lo >= target_arl && guard < 64; ++guard) {
        lo -= step;
        step *= 1.6;
        arl_lo = probe(lo);
    }
    step = step0;
    for (int guard = 0; arl_hi <= target_arl && guard < 64; ++guard) {
        hi += step;
        step *= 1.6;
        arl_hi = probe(hi);
    }
    if (!(arl_lo < target_arl && target_arl < arl_hi))
        throw std::runtime_error("calibrate_threshold: failed to bracket the target ARL");

    CalibrationResult result;
    double mid = 0.5 * (lo + hi);
    std::int64_t reps = std::min<std::int64_t>(4000, max_reps);
    for (int round = 0; round < 8; ++round) {
        mid = 0.5 * (lo + hi);
        double se = 0.0;
        const double arl =
            detail::simulated_arl(config, decode(mid), target_arl, reps, next_seed(), threads, &se);
        result.threshold = decode(mid);
        result.achieved_arl = arl;
        result.achieved_std_error = se;
        result.rounds = round + 1;
        result.final_replicates = reps;
        if (std::abs(arl / target_arl - 1.0) <= tol_rel &&
            se <= 0.5 * tol_rel * target_arl)
            return result;
        (arl < target_arl ? lo : hi) = mid;
        reps = std::min<std::int64_t>(reps * 2, max_reps);
    }
    return result;
}

struct ThreeWayPower {
    PowerEstimate mosum;      // P_S
    PowerEstimate genmosum;   // P_Z
    PowerEstimate cusum;      // P_V
    double mosum_threshold_std = 0.0;  // xi-scale h1
    double genmosum_threshold = 0.0;   // centered-sum H2
    double cusum_threshold_log = 0.0;  // log-scale H3
};

/// P_Z: crossing of any admissible (nu, l) window ending in
/// [nu+1, nu+2l-1] given none ending at or before nu.
inline PowerEstimate empirical_power_genmosum(double threshold, const TransientWindow& window,
                                              double amplitude, std::int64_t signal_len,
                                              std::int64_t nu, std::int64_t reps,
                                              std::uint64_t seed, int threads = 0) {
    if (reps < 1000) throw std::invalid_argument("empirical power: need at least 10^3 replicates");
    const std::int64_t last_obs = nu + 2 * signal_len - 1;
    GaussianChangeSpec spec{0.0, amplitude, 1.0};

    struct Partial {
        std::int64_t conditioned = 0;
        std::int64_t detections = 0;
    };
    std::vector<Partial> parts(
        static_cast<std::size_t>(std::min<std::int64_t>(reps, kReduceChunks)));

    parallel_chunks(reps, threads, [&](std::int64_t chunk, std::int64_t begin, std::int64_t end) {
        Partial local;
        GenMosumDetector detector(window, spec);
        for (std::int64_t rep = begin; rep < end; ++rep) {
            detector.reset();
            Rng rng = Rng::for_replicate(seed, static_cast<std::uint64_t>(rep));
            bool pre_crossed = false, detected = false;
            for (std::int64_t obs = 1; obs <= last_obs; ++obs) {
                const bool shifted = obs > nu && obs <= nu + signal_len;
                detector.step(shifted ? rng.normal() + amplitude : rng.normal());
                if (detector.value() > threshold) {
                    if (obs <= nu) {
                        pre_crossed = true;
                    } else {
                        detected = true;
                    }
                    break;
                }
            }
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
        throw std::runtime_error("empirical power: no replicate survived conditioning");
    est.power = static_cast<double>(est.detections) / static_cast<double>(est.conditioned);
    est.std_error = std::sqrt(est.power * (1.0 - est.power) / static_cast<double>(est.conditioned));
    est.replicates = reps;
    est.seed = seed;
    est.nu_prime = nu - window.l1;
    est.window_begin = nu - window.l1 + 1;
    est.window_end = nu - window.l1 + 2 * signal_len - 1;
    return est;
}

/// P_V: CUSUM crossing within (nu, nu + 2l) given tau_V > nu.
inline PowerEstimate empirical_power_cusum(double threshold_log, double amplitude,
                                           std::int64_t signal_len, std::int64_t nu,
                                           std::int64_t reps, std::uint64_t seed,
                                           int threads = 0) {
    if (reps < 1000) throw std::invalid_argument("empirical power: need at least 10^3 replicates");
    const std::int64_t last_obs = nu + 2 * signal_len - 1;
    GaussianChangeSpec spec{0.0, amplitude, 1.0};

    struct Partial {
        std::int64_t conditioned = 0;
        std::int64_t detections = 0;
    };
    std::vector<Partial> parts(
        static_cast<std::size_t>(std::min<std::int64_t>(reps, kReduceChunks)));

    parallel_chunks(reps, threads, [&](std::int64_t chunk, std::int64_t begin, std::int64_t end) {
        Partial local;
        CusumVDetector detector(spec);
        for (std::int64_t rep = begin; rep < end; ++rep) {
            detector.reset();
            Rng rng = Rng::for_replicate(seed, static_cast<std::uint64_t>(rep));
            bool pre_crossed = false, detected = false;
            for (std::int64_t obs = 1; obs <= last_obs; ++obs) {
                const bool shifted = obs > nu && obs <= nu + signal_len;
                detector.step(shifted ? rng.normal() + amplitude : rng.normal());
                if (detector.log_value() > threshold_log) {
                    if (obs <= nu) {
                        pre_crossed = true;
                    } else {
                        detected = true;
                    }
                    break;
                }
            }
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
        throw std::runtime_error("empirical power: no replicate survived conditioning");
    est.power = static_cast<double>(est.detections) / static_cast<double>(est.conditioned);
    est.std_error = std::sqrt(est.power * (1.0 - est.power) / static_cast<double>(est.conditioned));
    est.replicates = reps;
    est.seed = seed;
    est.nu_prime = nu;
    est.window_begin = nu + 1;
    est.window_end = last_obs;
    return est;
}

/*
 * Power comparison of MOSUM(L), generalized MOSUM(l0, l1) and CUSUM for a
 * signal of length l, all calibrated to a common ARL. Detection windows
 * span 2l - 1 statistic indices past each procedure's conditioning point;
 * the change point sits at nu = 3 max(L, l1) so every conditioned
 * statistic has reached its stationary regime.
 */
inline ThreeWayPower estimate_power_three_way(double amplitude, std::int64_t signal_len,
                                              const TransientWindow& window_z, std::int64_t window_L,
                                              double target_arl, std::int64_t reps,
                                              std::uint64_t seed, int threads = 0) {
    if (signal_len < 1) throw std::invalid_argument("estimate_power_three_way: signal length >= 1");
    GaussianChangeSpec spec{0.0, amplitude, 1.0};

    // H1 from the analytic MOSUM ARL (tau_M convention: subtract L).
    const double want_s = target_arl - static_cast<double>(window_L);
    double lo = 0.2, hi = 8.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        double arl;
        try {
            arl = mosum_arl_std(mid, window_L);
        } catch (const std::domain_error&) {
            lo = mid;
            continue;
        }
        (arl < want_s ? lo : hi) = mid;
    }
    const double h1 = 0.5 * (lo + hi);

    DetectorConfig genmosum_cfg{ProcedureKind::GenMosum, spec, 0, window_z};
    const CalibrationResult calib_z =
        calibrate_threshold(genmosum_cfg, target_arl, 0.02, seed ^ 0x5A17ULL, threads);

    DetectorConfig page_cfg{ProcedureKind::Page, spec, 0, {1, 1}};
    const CalibrationResult calib_v =
        calibrate_threshold(page_cfg, target_arl, 0.02, seed ^ 0xC0DEULL, threads);

    const std::int64_t nu = 3 * std::max(window_L, window_z.l1);

    ThreeWayPower out;
    out.mosum_threshold_std = h1;
    out.genmosum_threshold = calib_z.threshold;
    out.cusum_threshold_log = calib_v.threshold;
    out.mosum = empirical_power_mosum_window(h1, amplitude, window_L, signal_len, nu,
                                             nu - window_L + 1,
                                             nu - window_L + 2 * signal_len - 1, reps,
                                             seed ^ 0xA11CEULL, threads);
    out.genmosum = empirical_power_genmosum(calib_z.threshold, window_z, amplitude, signal_len,
                                            nu, reps, seed ^ 0xB0B5ULL, threads);
    out.cusum = empirical_power_cusum(calib_v.threshold, amplitude, signal_len, nu, reps,
                                      seed ^ 0xF00DULL, threads);
    return out;
}

}  // namespace seqdet
