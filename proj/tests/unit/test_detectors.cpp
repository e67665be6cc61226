#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "seqdet/detectors.hpp"
#include "seqdet/model.hpp"
#include "seqdet/rng.hpp"

using namespace seqdet;

namespace {

std::vector<double> llr_terms(const std::vector<double>& ys, const GaussianChangeSpec& spec) {
    std::vector<double> z(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) z[i] = log_likelihood_ratio(ys[i], spec);
    return z;
}

// max over change points of the suffix log-likelihood sum; -inf for n = 0
double brute_cusum_log(const std::vector<double>& z, std::size_t n) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t start = 0; start < n; ++start) {
        double sum = 0.0;
        for (std::size_t i = start; i < n; ++i) sum += z[i];
        best = std::max(best, sum);
    }
    return best;
}

double brute_sr(const std::vector<double>& z, std::size_t n) {
    double total = 0.0;
    for (std::size_t start = 0; start < n; ++start) {
        double sum = 0.0;
        for (std::size_t i = start; i < n; ++i) sum += z[i];
        total += std::exp(sum);
    }
    return total;
}

double brute_page(const std::vector<double>& z, std::size_t n) {
    return std::max(0.0, brute_cusum_log(z, n));
}

double brute_full_lr(const std::vector<double>& z, std::size_t n) {
    double best = 0.0;  // K_0 = 0
    for (std::size_t a = 0; a < n; ++a) {
        double sum = 0.0;
        for (std::size_t b = a; b < n; ++b) {
            sum += z[b];
            best = std::max(best, sum);
        }
    }
    return best;
}

// windows of length l0..l1 ending anywhere in the first n observations
double brute_window_max(const std::vector<double>& terms, std::size_t n, std::int64_t l0,
                        std::int64_t l1) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t end = 1; end <= n; ++end) {
        for (std::int64_t len = l0; len <= l1 && len <= static_cast<std::int64_t>(end); ++len) {
            double sum = 0.0;
            for (std::size_t i = end - static_cast<std::size_t>(len); i < end; ++i) sum += terms[i];
            best = std::max(best, sum);
        }
    }
    return best;
}

std::vector<double> random_stream(Rng& rng, std::size_t n, double drift = 0.0) {
    std::vector<double> ys(n);
    for (auto& y : ys) y = rng.normal(drift, 1.0);
    return ys;
}

}  // namespace

TEST_CASE("recursive statistics equal their direct definitions") {
    Rng rng(424242);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 5 + static_cast<std::size_t>(rng.uniform01() * 45);
        GaussianChangeSpec spec{rng.normal(0.0, 0.3), 0.3 + rng.uniform01() * 1.5, 1.0};
        const auto ys = random_stream(rng, n, rng.normal(0.0, 0.5));
        const auto z = llr_terms(ys, spec);

        CusumVDetector cusum(spec);
        PageDetector page(spec);
        ShiryaevRobertsDetector sr(spec);
        FullLrDetector full(spec);
        const std::int64_t L = 2 + static_cast<std::int64_t>(rng.uniform01() * 6);
        MosumDetector mosum(L, spec);
        const std::int64_t l0 = 1 + static_cast<std::int64_t>(rng.uniform01() * 3);
        const std::int64_t l1 = l0 + static_cast<std::int64_t>(rng.uniform01() * 5);
        GenMosumDetector gen({l0, l1}, spec);

        std::vector<double> centered(ys.size());
        for (std::size_t i = 0; i < ys.size(); ++i)
            centered[i] = ys[i] - spec.mu - 0.5 * spec.amplitude;

        for (std::size_t k = 1; k <= n; ++k) {
            const double y = ys[k - 1];
            cusum.step(y);
            page.step(y);
            sr.step(y);
            full.step(y);
            mosum.step(y);
            gen.step(y);

            REQUIRE(cusum.log_value() == Catch::Approx(brute_cusum_log(z, k)).margin(1e-9));
            REQUIRE(page.value() == Catch::Approx(brute_page(z, k)).margin(1e-9));
            REQUIRE(sr.value() == Catch::Approx(brute_sr(z, k)).epsilon(1e-9));
            REQUIRE(full.value() == Catch::Approx(brute_full_lr(z, k)).margin(1e-9));
            REQUIRE(sr.value() >= 0.0);
            REQUIRE(page.value() >= 0.0);

            if (k >= static_cast<std::size_t>(L)) {
                double window_sum = 0.0;
                for (std::size_t i = k - static_cast<std::size_t>(L); i < k; ++i)
                    window_sum += ys[i];
                REQUIRE(mosum.value() == Catch::Approx(window_sum).margin(1e-9));
            }
            if (k >= static_cast<std::size_t>(l0)) {
                const std::int64_t avail = std::min<std::int64_t>(static_cast<std::int64_t>(k), l1);
                double best = -std::numeric_limits<double>::infinity();
                for (std::int64_t len = l0; len <= avail; ++len) {
                    double sum = 0.0;
                    for (std::size_t i = k - static_cast<std::size_t>(len); i < k; ++i)
                        sum += centered[i];
                    best = std::max(best, sum);
                }
                REQUIRE(gen.value() == Catch::Approx(best).margin(1e-9));
                REQUIRE(gen.running_max() ==
                        Catch::Approx(brute_window_max(centered, k, l0, l1)).margin(1e-9));
            }
            // the unrestricted maximum dominates any window-restricted one
            if (k >= static_cast<std::size_t>(l1)) {
                const double restricted =
                    spec.amplitude * brute_window_max(centered, k, l0, l1);
                REQUIRE(full.value() >= restricted - 1e-9);
            }
        }
    }
}

TEST_CASE("textbook single-step behaviors") {
    GaussianChangeSpec unit{0.0, 1.0, 1.0};

    SECTION("cusum stays at one on zero llr") {
        CusumVDetector d(unit);
        d.step(0.5);  // llr = 0
        CHECK(d.value() == Catch::Approx(1.0));
    }
    SECTION("cusum grows geometrically on constant llr = log 2") {
        const double y = std::log(2.0) + 0.5;  // llr(y) = log 2
        CusumVDetector d(unit);
        for (int n = 1; n <= 20; ++n) {
            d.step(y);
            CHECK(d.log_value() == Catch::Approx(n * std::log(2.0)).margin(1e-12));
        }
    }
    SECTION("page reflects at zero on negative llr") {
        PageDetector d(unit);
        for (int n = 0; n < 50; ++n) {
            d.step(-0.2);
            CHECK(d.value() == 0.0);
        }
    }
    SECTION("sr counts steps on zero llr") {
        ShiryaevRobertsDetector d(unit);
        for (int n = 1; n <= 30; ++n) {
            d.step(0.5);
            CHECK(d.value() == Catch::Approx(static_cast<double>(n)).epsilon(1e-12));
        }
    }
    SECTION("full-lr statistic is zero on a nonpositive walk and nondecreasing") {
        FullLrDetector d(unit);
        for (int n = 0; n < 20; ++n) {
            d.step(-0.5);  // llr = -1
            CHECK(d.value() == 0.0);
        }
        Rng rng(5);
        double prev = 0.0;
        for (int n = 0; n < 200; ++n) {
            d.step(rng.normal());
            CHECK(d.value() >= prev);
            prev = d.value();
        }
    }
    SECTION("mosum on a constant stream sums to c L after warm-up") {
        MosumDetector d(7, unit);
        for (int n = 1; n <= 30; ++n) {
            d.step(1.5);
            if (d.ready()) CHECK(d.value() == Catch::Approx(7 * 1.5).margin(1e-12));
        }
        CHECK(d.xi() == Catch::Approx((10.5 - 0.0) / std::sqrt(7.0)));
    }
    SECTION("genmosum is zero when every observation sits at mu + A/2") {
        GenMosumDetector d({2, 5}, unit);
        for (int n = 1; n <= 12; ++n) {
            d.step(0.5);
            if (n >= 2) CHECK(d.value() == Catch::Approx(0.0).margin(1e-12));
        }
    }
}

TEST_CASE("mosum ring-buffer sum survives long streams") {
    GaussianChangeSpec unit{0.0, 1.0, 1.0};
    MosumDetector d(16, unit);
    Rng rng(11);
    std::vector<double> last(16, 0.0);
    for (std::int64_t n = 0; n < (1 << 17) + 37; ++n) {
        const double y = rng.normal(0.0, 100.0);
        last[static_cast<std::size_t>(n % 16)] = y;
        d.step(y);
    }
    double expect = 0.0;
    for (double v : last) expect += v;
    CHECK(d.value() == Catch::Approx(expect).margin(1e-9 * 16 * 100));
}

TEST_CASE("page and cusum stopping times coincide for thresholds above one") {
    GaussianChangeSpec unit{0.0, 1.0, 1.0};
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const double barrier = 1.5 + static_cast<double>(seed % 7);
        Rng rng_a(900 + seed), rng_b(900 + seed);
        CusumVDetector cusum(unit);
        PageDetector page(unit);
        const auto ra = run_to_alarm(cusum, barrier, [&] { return rng_a.normal(); }, 20000);
        const auto rb = run_to_alarm(page, std::log(barrier), [&] { return rng_b.normal(); }, 20000);
        REQUIRE(ra.alarm.has_value());
        REQUIRE(rb.alarm.has_value());
        CHECK(ra.alarm->n == rb.alarm->n);
    }
}

TEST_CASE("genmosum with l0 = l1 = L reduces to mosum on the shifted threshold") {
    GaussianChangeSpec spec{0.4, 0.8, 1.0};
    const std::int64_t L = 6;
    const double shift = static_cast<double>(L) * (spec.mu + 0.5 * spec.amplitude);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const double barrier = 1.0 + static_cast<double>(seed % 5);
        Rng rng_a(3000 + seed), rng_b(3000 + seed);
        GenMosumDetector gen({L, L}, spec);
        MosumDetector mosum(L, spec);
        const auto ra = run_to_alarm(gen, barrier, [&] { return rng_a.normal(spec.mu, 1.0); }, 50000);
        const auto rb =
            run_to_alarm(mosum, barrier + shift, [&] { return rng_b.normal(spec.mu, 1.0); }, 50000);
        REQUIRE(ra.alarm.has_value() == rb.alarm.has_value());
        if (ra.alarm) CHECK(ra.alarm->n == rb.alarm->n);
    }
}

TEST_CASE("run_to_alarm honors warm-up, exhaustion, and the tau offset") {
    GaussianChangeSpec unit{0.0, 1.0, 1.0};

    SECTION("mosum alarm cannot predate the window and carries the offset") {
        MosumDetector d(9, unit);
        int fed = 0;
        const auto r = run_to_alarm(d, 5.0, [&] { ++fed; return 10.0; }, 1000);
        REQUIRE(r.alarm.has_value());
        CHECK(r.alarm->n == 9);  // raw crossing index 0 plus L
        CHECK(fed == 9);
        CHECK(r.alarm->statistic > r.alarm->threshold);
    }
    SECTION("genmosum first legal alarm is at l1") {
        GenMosumDetector d({2, 5}, unit);
        const auto r = run_to_alarm(d, 1.0, [&] { return 10.0; }, 1000);
        REQUIRE(r.alarm.has_value());
        CHECK(r.alarm->n == 5);
    }
    SECTION("stream exhaustion is reported, not alarmed") {
        PageDetector d(unit);
        const auto r = run_to_alarm(d, 1000.0, [&] { return 0.0; }, 500);
        CHECK_FALSE(r.alarm.has_value());
        CHECK(r.steps_consumed == 500);
    }
}

TEST_CASE("batch nuisance statistics match enumeration") {
    GaussianChangeSpec unused{0.0, 1.0, 1.0};
    Rng rng(2718);

    SECTION("flat sample pins z1 and zeroes z3") {
        std::vector<double> ys(10, 3.7);
        const auto stats = batch_nuisance_stats(ys, {2, 4}, 1.5);
        REQUIRE(stats.z1.has_value());
        CHECK(*stats.z1 == Catch::Approx(-1.5 * 1.5 / 2.0 * 2.0));  // -A^2 l0 / 2
        CHECK(stats.z3 == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("z3 ignores location shifts and A") {
        std::vector<double> ys(12);
        for (auto& y : ys) y = rng.normal();
        const auto base = batch_nuisance_stats(ys, {2, 4});
        CHECK_FALSE(base.z1.has_value());
        for (auto& y : ys) y += 17.0;
        const auto shifted = batch_nuisance_stats(ys, {2, 4});
        CHECK(shifted.z3 == Catch::Approx(base.z3).margin(1e-9));
    }
    SECTION("random samples agree with an independent double loop") {
        for (int trial = 0; trial < 25; ++trial) {
            const std::size_t n = 12;
            const std::int64_t l0 = 2, l1 = 4;
            const double amplitude = 0.5 + rng.uniform01();
            std::vector<double> ys(n);
            for (auto& y : ys) y = rng.normal(0.3, 1.4);
            double mean = 0.0;
            for (double y : ys) mean += y;
            mean /= static_cast<double>(n);

            double z1 = -1e300, z2 = -1e300, z3 = -1e300;
            for (std::int64_t len = l0; len <= l1; ++len) {
                for (std::size_t nu = 0; nu + static_cast<std::size_t>(len) <= n; ++nu) {
                    double s1 = 0.0, s2 = 0.0, s3 = 0.0;
                    for (std::size_t j = nu; j < nu + static_cast<std::size_t>(len); ++j) {
                        s1 += amplitude * (ys[j] - mean - amplitude / 2.0);
                        s2 += amplitude *
                              (ys[j] - mean -
                               amplitude / 2.0 * (1.0 - static_cast<double>(len) / n));
                        s3 += ys[j];
                    }
                    z1 = std::max(z1, s1);
                    z2 = std::max(z2, s2);
                    z3 = std::max(z3, (s3 - static_cast<double>(len) * mean) /
                                          std::sqrt(static_cast<double>(len) *
                                                    (1.0 - static_cast<double>(len) / n)));
                }
            }
            const auto stats = batch_nuisance_stats(ys, {l0, l1}, amplitude);
            REQUIRE(stats.z1.has_value());
            CHECK(*stats.z1 == Catch::Approx(z1).margin(1e-9));
            CHECK(*stats.z2 == Catch::Approx(z2).margin(1e-9));
            CHECK(stats.z3 == Catch::Approx(z3).margin(1e-9));
        }
    }
    SECTION("short samples are rejected") {
        std::vector<double> ys(3, 0.0);
        CHECK_THROWS_AS(batch_nuisance_stats(ys, {2, 4}), std::invalid_argument);
    }
}
