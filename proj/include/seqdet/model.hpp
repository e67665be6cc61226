#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "seqdet/rng.hpp"

namespace seqdet {

/*
 * Observation model: i.i.d. N(mu, sigma^2) before and after a change
 * window, N(mu + amplitude, sigma^2) inside it. The per-observation
 * log-likelihood ratio of the shifted density against the base density is
 *
 *     log g(y)/f(y) = amplitude * (y - mu - amplitude/2) / sigma^2 .
 *
 * Indices in the public contracts are 1-based: a change at nu means the
 * shifted regime covers observations nu+1 .. nu+l.
 */

struct GaussianChangeSpec {
    double mu = 0.0;
    double amplitude = 1.0;
    double sigma = 1.0;

    GaussianChangeSpec() = default;
    GaussianChangeSpec(double mu_, double amplitude_, double sigma_ = 1.0)
        : mu(mu_), amplitude(amplitude_), sigma(sigma_) {
        validate();
    }

    void validate() const {
        if (!(amplitude > 0.0)) throw std::invalid_argument("GaussianChangeSpec: amplitude must be > 0");
        if (!(sigma > 0.0)) throw std::invalid_argument("GaussianChangeSpec: sigma must be > 0");
    }
};

/// Bounds l0 <= l <= l1 on the length of a transient signal.
struct TransientWindow {
    std::int64_t l0 = 1;
    std::int64_t l1 = 1;

    TransientWindow() = default;
    TransientWindow(std::int64_t l0_, std::int64_t l1_) : l0(l0_), l1(l1_) {
        if (l0 < 1 || l0 > l1) throw std::invalid_argument("TransientWindow: need 1 <= l0 <= l1");
    }
};

/// NoChange, or a signal occupying observations nu+1 .. nu+len.
struct Hypothesis {
    std::int64_t nu = 0;
    std::int64_t len = 0;  // 0 means no change

    static Hypothesis no_change() { return {}; }
    static Hypothesis change_at(std::int64_t nu, std::int64_t len) {
        if (nu < 0) throw std::invalid_argument("Hypothesis: nu must be >= 0");
        if (len < 1) throw std::invalid_argument("Hypothesis: signal length must be >= 1");
        return Hypothesis{nu, len};
    }
    bool has_change() const { return len > 0; }
};

inline double log_likelihood_ratio(double y, const GaussianChangeSpec& spec) {
    return spec.amplitude * (y - spec.mu - 0.5 * spec.amplitude) / (spec.sigma * spec.sigma);
}

/// Sum of per-term log-likelihood ratios over observations nu+1 .. end (1-based).
inline double segment_llr(std::span<const double> ys, const GaussianChangeSpec& spec,
                          std::int64_t nu, std::int64_t end) {
    if (nu < 0 || nu >= end || end > static_cast<std::int64_t>(ys.size()))
        throw std::out_of_range("segment_llr: need 0 <= nu < end <= length(ys)");
    double sum = 0.0;
    for (std::int64_t j = nu; j < end; ++j) sum += log_likelihood_ratio(ys[static_cast<std::size_t>(j)], spec);
    return sum;
}

/// i.i.d. stream of length n under the hypothesis; bit-reproducible per seed.
inline std::vector<double> sample_stream(const GaussianChangeSpec& spec, const Hypothesis& hyp,
                                         std::int64_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_stream: n must be >= 1");
    spec.validate();
    Rng rng(seed);
    std::vector<double> ys(static_cast<std::size_t>(n));
    for (std::int64_t i = 1; i <= n; ++i) {
        const bool shifted = hyp.has_change() && i > hyp.nu && i <= hyp.nu + hyp.len;
        const double mean = shifted ? spec.mu + spec.amplitude : spec.mu;
        ys[static_cast<std::size_t>(i - 1)] = rng.normal(mean, spec.sigma);
    }
    return ys;
}

}  // namespace seqdet
