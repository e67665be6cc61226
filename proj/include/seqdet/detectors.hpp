#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "seqdet/model.hpp"

namespace seqdet {

enum class ProcedureKind { CusumV, Page, ShiryaevRoberts, Mosum, GenMosum, FullLr };

inline std::string_view procedure_name(ProcedureKind kind) {
    switch (kind) {
        case ProcedureKind::CusumV: return "cusum";
        case ProcedureKind::Page: return "page";
        case ProcedureKind::ShiryaevRoberts: return "sr";
        case ProcedureKind::Mosum: return "mosum";
        case ProcedureKind::GenMosum: return "genmosum";
        case ProcedureKind::FullLr: return "fulllr";
    }
    return "?";
}

/// First threshold crossing; n is in the stopping-time convention of the
/// procedure (MOSUM and generalized MOSUM include their warm-up offsets).
struct AlarmEvent {
    std::int64_t n;
    double statistic;
    double threshold;
    ProcedureKind procedure;
};

/*
 * Detectors share a small duck-typed interface:
 *   step(y)          consume one observation
 *   steps()          observations consumed
 *   ready()          first step at which an alarm is legal
 *   value()          current statistic on its native scale
 *   threshold_key(H) precomputed comparison key for threshold H
 *   crossed(key)     alarm test against the key
 *   reset()          back to the start state
 * Streams are single-owner; states are plain values and may be moved
 * between threads, never shared mutably.
 */

/// V_n = max{V_{n-1}, 1} * g(y_n)/f(y_n), V_0 = 1, tracked on the log scale.
class CusumVDetector {
public:
    static constexpr ProcedureKind kind = ProcedureKind::CusumV;

    explicit CusumVDetector(const GaussianChangeSpec& spec) : spec_(spec) { spec_.validate(); }

    void step(double y) {
        log_value_ = std::max(log_value_, 0.0) + log_likelihood_ratio(y, spec_);
        ++n_;
    }
    std::int64_t steps() const { return n_; }
    bool ready() const { return n_ >= 1; }
    double value() const { return std::exp(log_value_); }
    double log_value() const { return log_value_; }
    double threshold_key(double threshold) const {
        if (!(threshold > 0.0)) throw std::invalid_argument("cusum: threshold must be > 0 on the V scale");
        return std::log(threshold);
    }
    bool crossed(double key) const { return log_value_ > key; }
    void reset() { log_value_ = 0.0; n_ = 0; }

private:
    GaussianChangeSpec spec_;
    double log_value_ = 0.0;  // log V_0 = 0
    std::int64_t n_ = 0;
};

/// P_n = max{P_{n-1} + log g(y_n)/f(y_n), 0}, P_0 = 0.
class PageDetector {
public:
    static constexpr ProcedureKind kind = ProcedureKind::Page;

    explicit PageDetector(const GaussianChangeSpec& spec) : spec_(spec) { spec_.validate(); }

    void step(double y) {
        value_ = std::max(value_ + log_likelihood_ratio(y, spec_), 0.0);
        ++n_;
    }
    std::int64_t steps() const { return n_; }
    bool ready() const { return n_ >= 1; }
    double value() const { return value_; }
    double threshold_key(double threshold) const { return threshold; }
    bool crossed(double key) const { return value_ > key; }
    void reset() { value_ = 0.0; n_ = 0; }

private:
    GaussianChangeSpec spec_;
    double value_ = 0.0;
    std::int64_t n_ = 0;
};

/// R_n = (1 + R_{n-1}) * g(y_n)/f(y_n), R_0 = 0.
class ShiryaevRobertsDetector {
public:
    static constexpr ProcedureKind kind = ProcedureKind::ShiryaevRoberts;

    explicit ShiryaevRobertsDetector(const GaussianChangeSpec& spec) : spec_(spec) { spec_.validate(); }

    void step(double y) {
        value_ = (1.0 + value_) * std::exp(log_likelihood_ratio(y, spec_));
        ++n_;
    }
    std::int64_t steps() const { return n_; }
    bool ready() const { return n_ >= 1; }
    double value() const { return value_; }
    double threshold_key(double threshold) const { return threshold; }
    bool crossed(double key) const { return value_ > key; }
    void reset() { value_ = 0.0; n_ = 0; }

private:
    GaussianChangeSpec spec_;
    double value_ = 0.0;
    std::int64_t n_ = 0;
};

/*
 * Moving sum of the last L raw observations. The statistic index n of
 * S_{n,L} trails the observation counter by L, and the reported stopping
 * time is the observation counter itself (tau_M = tau_S + L). The ring
 * buffer sum is rebuilt every 2^16 steps to bound floating-point drift.
 */
class MosumDetector {
public:
    static constexpr ProcedureKind kind = ProcedureKind::Mosum;

    MosumDetector(std::int64_t window, const GaussianChangeSpec& spec)
        : spec_(spec), window_(window), buffer_(static_cast<std::size_t>(window), 0.0) {
        if (window < 1) throw std::invalid_argument("mosum: window must be >= 1");
        spec_.validate();
    }

    void step(double y) {
        const std::size_t pos = static_cast<std::size_t>(n_ % window_);
        if (n_ >= window_) {
            sum_ += y - buffer_[pos];
        } else {
            sum_ += y;
        }
        buffer_[pos] = y;
        ++n_;
        if ((n_ & 0xFFFF) == 0) resum();
    }
    std::int64_t steps() const { return n_; }
    bool ready() const { return n_ >= window_; }
    double value() const { return sum_; }
    /// (S - mu L) / (sigma sqrt(L)), the standardized moving sum.
    double xi() const {
        return (sum_ - spec_.mu * static_cast<double>(window_)) /
               (spec_.sigma * std::sqrt(static_cast<double>(window_)));
    }
    double threshold_key(double threshold) const { return threshold; }
    bool crossed(double key) const { return sum_ > key; }
    std::int64_t window() const { return window_; }
    std::int64_t warmup_offset() const { return window_; }
    void reset() {
        std::fill(buffer_.begin(), buffer_.end(), 0.0);
        sum_ = 0.0;
        n_ = 0;
    }

private:
    void resum() {
        double s = 0.0;
        for (double v : buffer_) s += v;
        sum_ = s;
    }

    GaussianChangeSpec spec_;
    std::int64_t window_;
    std::vector<double> buffer_;
    double sum_ = 0.0;
    std::int64_t n_ = 0;
};

/*
 * Generalized moving sum over window lengths l0..l1 of centered terms
 * (y - mu - A/2): after warm-up, value() is the maximum suffix sum of the
 * trailing l1-buffer over admissible lengths. Alarms are legal from the
 * l1-th observation on; the first check also covers windows that ended
 * before l1 (the statistic is a running maximum over every admissible
 * window seen so far), which matches its Monte Carlo run-length behavior.
 */
class GenMosumDetector {
public:
    static constexpr ProcedureKind kind = ProcedureKind::GenMosum;

    GenMosumDetector(const TransientWindow& window, const GaussianChangeSpec& spec)
        : spec_(spec), window_(window), buffer_(static_cast<std::size_t>(window.l1), 0.0) {
        spec_.validate();
    }

    void step(double y) {
        const std::int64_t l1 = window_.l1;
        buffer_[static_cast<std::size_t>(n_ % l1)] = y - spec_.mu - 0.5 * spec_.amplitude;
        ++n_;
        const std::int64_t avail = std::min(n_, l1);
        if (avail < window_.l0) {
            value_ = -std::numeric_limits<double>::infinity();
            return;
        }
        double suffix = 0.0;
        double best = -std::numeric_limits<double>::infinity();
        for (std::int64_t k = 1; k <= avail; ++k) {
            const std::int64_t idx = (n_ - k) % l1;
            suffix += buffer_[static_cast<std::size_t>(idx)];
            if (k >= window_.l0 && suffix > best) best = suffix;
        }
        value_ = best;
        if (best > running_max_) running_max_ = best;
    }
    std::int64_t steps() const { return n_; }
    bool ready() const { return n_ >= window_.l1; }
    double value() const { return value_; }
    double running_max() const { return running_max_; }
    double threshold_key(double threshold) const { return threshold; }
    bool crossed(double key) const {
        return (n_ == window_.l1 ? running_max_ : value_) > key;
    }
    const TransientWindow& window() const { return window_; }
    std::int64_t warmup_offset() const { return window_.l1; }
    void reset() {
        std::fill(buffer_.begin(), buffer_.end(), 0.0);
        value_ = -std::numeric_limits<double>::infinity();
        running_max_ = -std::numeric_limits<double>::infinity();
        n_ = 0;
    }

private:
    GaussianChangeSpec spec_;
    TransientWindow window_;
    std::vector<double> buffer_;
    double value_ = -std::numeric_limits<double>::infinity();
    double running_max_ = -std::numeric_limits<double>::infinity();
    std::int64_t n_ = 0;
};

/*
 * K_n = max{K_{n-1}, max_nu Lambda_{nu,n}} via the reflected walk
 * W_n = max(W_{n-1}, 0) + llr(y_n): exact and O(1) per step, unlike the
 * direct maximization over all (nu, l) windows.
 */
class FullLrDetector {
public:
    static constexpr ProcedureKind kind = ProcedureKind::FullLr;

    explicit FullLrDetector(const GaussianChangeSpec& spec) : spec_(spec) { spec_.validate(); }

    void step(double y) {
        walk_ = std::max(walk_, 0.0) + log_likelihood_ratio(y, spec_);
        if (walk_ > value_) value_ = walk_;
        ++n_;
    }
    std::int64_t steps() const { return n_; }
    bool ready() const { return n_ >= 1; }
    double value() const { return value_; }
    double walk() const { return walk_; }
    double threshold_key(double threshold) const { return threshold; }
    bool crossed(double key) const { return value_ > key; }
    void reset() { walk_ = 0.0; value_ = 0.0; n_ = 0; }

private:
    GaussianChangeSpec spec_;
    double walk_ = 0.0;   // W_n
    double value_ = 0.0;  // K_n (nondecreasing)
    std::int64_t n_ = 0;
};

struct RunResult {
    std::optional<AlarmEvent> alarm;  // empty: stream exhausted before a crossing
    std::int64_t steps_consumed = 0;
};

/*
 * Drives a detector over a lazy stream until the first crossing or until
 * max_steps observations have been consumed. `stream()` yields the next
 * observation. The reported n honors each procedure's warm-up offset.
 */
template <class Detector, class Stream>
RunResult run_to_alarm(Detector& detector, double threshold, Stream&& stream,
                       std::int64_t max_steps) {
    const double key = detector.threshold_key(threshold);
    while (detector.steps() < max_steps) {
        detector.step(stream());
        if (detector.ready() && detector.crossed(key)) {
            return RunResult{AlarmEvent{detector.steps(), detector.value(), threshold,
                                        Detector::kind},
                             detector.steps()};
        }
    }
    return RunResult{std::nullopt, detector.steps()};
}

/// Batch statistics for a transient change when mu (and possibly A) must
/// be estimated from the sample itself; maxima over all windows of length
/// l0..l1 inside the n observations.
struct NuisanceStats {
    std::optional<double> z1;  // mu replaced by the sample mean, A known
    std::optional<double> z2;  // mu averaged over null and alternative, A known
    double z3 = 0.0;           // scale-free; neither mu nor A required
};

inline NuisanceStats batch_nuisance_stats(std::span<const double> ys, const TransientWindow& window,
                                          std::optional<double> amplitude = std::nullopt) {
    const std::int64_t n = static_cast<std::int64_t>(ys.size());
    if (n < window.l1) throw std::invalid_argument("batch_nuisance_stats: need length(ys) >= l1");
    if (amplitude && !(*amplitude > 0.0))
        throw std::invalid_argument("batch_nuisance_stats: amplitude must be > 0");

    std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
    double total = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        total += ys[static_cast<std::size_t>(i)];
        prefix[static_cast<std::size_t>(i + 1)] = total;
    }
    const double mu_hat = total / static_cast<double>(n);

    const double neg_inf = -std::numeric_limits<double>::infinity();
    double best1 = neg_inf, best2 = neg_inf, best3 = neg_inf;
    for (std::int64_t l = window.l0; l <= window.l1; ++l) {
        const double dn = static_cast<double>(n);
        const double dl = static_cast<double>(l);
        const double z3_denom = (l < n) ? std::sqrt(dl * (1.0 - dl / dn)) : 0.0;
        for (std::int64_t nu = 0; nu + l <= n; ++nu) {
            const double window_sum =
                prefix[static_cast<std::size_t>(nu + l)] - prefix[static_cast<std::size_t>(nu)];
            const double centered = window_sum - dl * mu_hat;
            if (amplitude) {
                const double a = *amplitude;
                const double v1 = a * (centered - dl * 0.5 * a);
                const double v2 = a * (centered - dl * 0.5 * a * (1.0 - dl / dn));
                if (v1 > best1) best1 = v1;
                if (v2 > best2) best2 = v2;
            }
            if (l < n) {  // the full-sample window has zero centered sum and zero scale
                const double v3 = centered / z3_denom;
                if (v3 > best3) best3 = v3;
            }
        }
    }
    NuisanceStats out;
    if (amplitude) {
        out.z1 = best1;
        out.z2 = best2;
    }
    out.z3 = best3;
    return out;
}

}  // namespace seqdet
