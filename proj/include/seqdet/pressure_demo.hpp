#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "seqdet/arl_analytic.hpp"
#include "seqdet/detectors.hpp"
#include "seqdet/model.hpp"
#include "seqdet/rng.hpp"

namespace seqdet {

/*
 * Synthetic hold-period monitoring demo: the recorded series is a known
 * sinusoidal carrier plus Gaussian noise, with a few embedded hold
 * periods where the noise mean is elevated. Detection runs MOSUM on the
 * residual after subtracting the known carrier, with the threshold set
 * from the analytic ARL approximation. Amplitudes and spacing of the
 * default fixture are chosen so the false-alarm budget over the record is
 * a small fraction of one alarm while each hold period is detected with
 * probability near one.
 */

struct EmbeddedTransient {
    std::int64_t nu;  // last index before the hold period
    std::int64_t len;
    double amplitude;
};

struct PressureDemoConfig {
    std::int64_t length = 850;
    double carrier_amplitude = 3.0;
    double carrier_period = 50.0;
    double mu = 0.0;
    double sigma = 1.0;
    std::int64_t window = 75;
    double target_arl = 5000.0;
    std::uint64_t seed = 101;
    std::vector<EmbeddedTransient> transients = {
        {150, 60, 1.2}, {420, 80, 1.0}, {620, 100, 1.1}};
};

struct AlarmCluster {
    std::int64_t first_n;
    std::int64_t last_n;
    std::int64_t alarms;
};

struct PressureDemoResult {
    std::vector<double> recorded;    // carrier + noise (+ hold shifts)
    std::vector<double> carrier;     // known s_t
    std::vector<double> residual;    // recorded - carrier
    std::vector<double> statistic;   // moving sum, NaN during warm-up
    double threshold = 0.0;          // raw-sum scale
    double threshold_std = 0.0;      // standardized scale
    std::vector<AlarmEvent> alarms;  // statistic reset after each alarm
    std::vector<AlarmCluster> clusters;
};

inline double pressure_demo_threshold(const PressureDemoConfig& config) {
    const double want = config.target_arl - static_cast<double>(config.window);
    double lo = 0.2, hi = 8.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        double arl;
        try {
            arl = mosum_arl_std(mid, config.window);
        } catch (const std::domain_error&) {
            lo = mid;
            continue;
        }
        (arl < want ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline PressureDemoResult run_pressure_demo(const PressureDemoConfig& config) {
    if (config.length < config.window + 1)
        throw std::invalid_argument("pressure demo: record shorter than the MOSUM window");
    for (const auto& t : config.transients) {
        if (t.nu < 0 || t.len < 1 || t.nu + t.len > config.length)
            throw std::invalid_argument("pressure demo: hold period outside the record");
    }

    PressureDemoResult out;
    const std::int64_t n = config.length;
    out.recorded.resize(static_cast<std::size_t>(n));
    out.carrier.resize(static_cast<std::size_t>(n));
    out.residual.resize(static_cast<std::size_t>(n));
    out.statistic.assign(static_cast<std::size_t>(n), std::nan(""));

    Rng rng(config.seed);
    for (std::int64_t i = 1; i <= n; ++i) {
        double mean = config.mu;
        for (const auto& t : config.transients) {
            if (i > t.nu && i <= t.nu + t.len) mean += t.amplitude;
        }
        const double s = config.carrier_amplitude *
                         std::sin(2.0 * kPi * static_cast<double>(i) / config.carrier_period);
        const double y = rng.normal(mean, config.sigma);
        out.carrier[static_cast<std::size_t>(i - 1)] = s;
        out.recorded[static_cast<std::size_t>(i - 1)] = s + y;
        out.residual[static_cast<std::size_t>(i - 1)] = y;
    }

    const double h = pressure_demo_threshold(config);
    out.threshold_std = h;
    out.threshold = config.mu * static_cast<double>(config.window) +
                    h * config.sigma * std::sqrt(static_cast<double>(config.window));

    GaussianChangeSpec spec{config.mu, 1.0, config.sigma};
    MosumDetector detector(config.window, spec);
    for (std::int64_t i = 1; i <= n; ++i) {
        detector.step(out.residual[static_cast<std::size_t>(i - 1)]);
        if (!detector.ready()) continue;
        out.statistic[static_cast<std::size_t>(i - 1)] = detector.value();
        if (detector.value() > out.threshold) {
            out.alarms.push_back(
                AlarmEvent{i, detector.value(), out.threshold, ProcedureKind::Mosum});
            detector.reset();  // repeated application of the same rule
        }
    }

    // Alarms closer than one window length form one cluster.
    for (const auto& alarm : out.alarms) {
        if (!out.clusters.empty() && alarm.n - out.clusters.back().last_n <= config.window) {
            out.clusters.back().last_n = alarm.n;
            ++out.clusters.back().alarms;
        } else {
            out.clusters.push_back(AlarmCluster{alarm.n, alarm.n, 1});
        }
    }
    return out;
}

}  // namespace seqdet
