#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "fdr/core.hpp"

using namespace fdr;

namespace {

// Independent oracle for Phi, kept free of the erfc path under test.
// Central range: Phi(x) = 1/2 + phi(x) * sum x^(2k+1) / (1*3*...*(2k+1));
// all terms positive, so no cancellation for x > 0.
double phi_series(double x) {
    const double ax = std::fabs(x);
    double term = ax;
    double sum = ax;
    for (int k = 1; k < 400; ++k) {
        term *= ax * ax / (2.0 * k + 1.0);
        sum += term;
        if (term < 1e-20 * sum) break;
    }
    const double density = std::exp(-0.5 * ax * ax) / std::sqrt(2.0 * M_PI);
    const double upper = 0.5 + density * sum;
    return (x >= 0.0) ? upper : 1.0 - upper;
}

// Far tail: Phi(-a) ~ phi(a)/a * (1 - 1/a^2 + 3/a^4 - ...), truncated at the
// smallest term. Relative error below 1e-8 for a >= 7.
double phi_tail_lower(double a) {
    const double density = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI);
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 30; ++k) {
        const double next = term * -(2.0 * k - 1.0) / (a * a);
        if (std::fabs(next) >= std::fabs(term)) break;
        term = next;
        sum += term;
    }
    return density / a * sum;
}

std::vector<double> random_probs(std::mt19937_64& gen, std::size_t n) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> p(n);
    for (double& v : p) v = unif(gen);
    return p;
}

ThresholdSequence make_thresholds(std::vector<double> t) {
    ThresholdSequence seq;
    seq.thresholds = std::move(t);
    return seq;
}

}  // namespace

TEST_CASE("sort_pvalues basic examples") {
    {
        const std::vector<double> p = {0.5, 0.02, 0.02};
        const SortedPValues sp = sort_pvalues(p);
        CHECK(sp.sorted == std::vector<double>{0.02, 0.02, 0.5});
        CHECK(sp.perm == std::vector<std::size_t>{1, 2, 0});  // stable on the tie
        CHECK(sp.values == p);
    }
    {
        const std::vector<double> p = {1.0};
        const SortedPValues sp = sort_pvalues(p);
        CHECK(sp.sorted == std::vector<double>{1.0});
        CHECK(sp.perm == std::vector<std::size_t>{0});
    }
    {
        const std::vector<double> p = {0.9, 0.1, 0.5, 0.3};
        const SortedPValues sp = sort_pvalues(p);
        CHECK(sp.sorted == std::vector<double>{0.1, 0.3, 0.5, 0.9});
        CHECK(sp.perm == std::vector<std::size_t>{1, 3, 2, 0});
    }
}

TEST_CASE("sort_pvalues input validation") {
    CHECK_THROWS_AS(sort_pvalues(std::vector<double>{}), EmptyInput);
    CHECK_THROWS_AS(sort_pvalues(std::vector<double>{0.5, 1.2}), OutOfRange);
    CHECK_THROWS_AS(sort_pvalues(std::vector<double>{-0.1}), OutOfRange);
    CHECK_THROWS_AS(sort_pvalues(std::vector<double>{std::nan("")}), OutOfRange);
    CHECK_THROWS_AS(sort_pvalues(std::vector<double>{std::numeric_limits<double>::infinity()}),
                    OutOfRange);
}

TEST_CASE("sort invariants hold on random vectors") {
    std::mt19937_64 gen(7);
    for (int rep = 0; rep < 200; ++rep) {
        std::uniform_int_distribution<std::size_t> size(1, 60);
        std::vector<double> p = random_probs(gen, size(gen));
        // inject ties
        if (p.size() > 3) p[2] = p[0];
        const SortedPValues sp = sort_pvalues(p);
        CHECK(std::is_sorted(sp.sorted.begin(), sp.sorted.end()));
        std::vector<bool> seen(p.size(), false);
        for (std::size_t k = 0; k < p.size(); ++k) {
            CHECK(sp.sorted[k] == p[sp.perm[k]]);
            CHECK(!seen[sp.perm[k]]);
            seen[sp.perm[k]] = true;
        }
        // permutation invariance of the order statistics
        std::vector<double> shuffled = p;
        std::shuffle(shuffled.begin(), shuffled.end(), gen);
        CHECK(sort_pvalues(shuffled).sorted == sp.sorted);
    }
    // an all-ties vector keeps original order
    const SortedPValues ties = sort_pvalues(std::vector<double>(7, 0.25));
    CHECK(ties.perm == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
}

TEST_CASE("step_up examples") {
    const auto t = make_thresholds({0.1 / 3, 0.2 / 3, 0.1});
    {
        const SortedPValues sp = sort_pvalues(std::vector<double>{0.01, 0.02, 0.5});
        const RejectionOutcome out = step_up(sp, t);
        CHECK(out.r == 2);
        CHECK(out.rejected_indices == std::vector<std::size_t>{0, 1});
        CHECK(out.mode == StepMode::up);
    }
    {
        // largest crossing wins even though p_(1) > t_1
        const SortedPValues sp = sort_pvalues(std::vector<double>{0.04, 0.05, 0.09});
        CHECK(step_up(sp, t).r == 3);
    }
    {
        const SortedPValues sp = sort_pvalues(std::vector<double>{1.0, 1.0, 1.0});
        CHECK(step_up(sp, t).r == 0);
    }
}

TEST_CASE("step_down examples") {
    const auto t = make_thresholds({0.1 / 3, 0.2 / 3, 0.1});
    {
        const SortedPValues sp = sort_pvalues(std::vector<double>{0.04, 0.05, 0.09});
        CHECK(step_down(sp, t).r == 0);  // contrast with step_up r = 3
    }
    {
        const SortedPValues sp = sort_pvalues(std::vector<double>{0.01, 0.02, 0.5});
        CHECK(step_down(sp, t).r == 2);
    }
    {
        const SortedPValues sp = sort_pvalues(std::vector<double>{0.001, 0.002});
        CHECK(step_down(sp, make_thresholds({0.05, 0.1})).r == 2);  // all pass
    }
}

TEST_CASE("step engines validate lengths") {
    const SortedPValues sp = sort_pvalues(std::vector<double>{0.1, 0.2});
    const auto t = make_thresholds({0.1});
    CHECK_THROWS_AS(step_up(sp, t), LengthMismatch);
    CHECK_THROWS_AS(step_down(sp, t), LengthMismatch);
}

TEST_CASE("boundary p == threshold rejects (inclusive comparison)") {
    const SortedPValues sp = sort_pvalues(std::vector<double>{0.05});
    const auto t = make_thresholds({0.05});
    CHECK(step_up(sp, t).r == 1);
    CHECK(step_down(sp, t).r == 1);
}

TEST_CASE("step_down never exceeds step_up; extremes agree") {
    std::mt19937_64 gen(11);
    std::uniform_int_distribution<std::size_t> size(1, 80);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 500; ++rep) {
        const std::size_t m = size(gen);
        const SortedPValues sp = sort_pvalues(random_probs(gen, m));
        std::vector<double> t(m);
        for (double& v : t) v = unif(gen);
        std::sort(t.begin(), t.end());
        const auto seq = make_thresholds(t);
        const std::size_t r_up = step_up(sp, seq).r;
        const std::size_t r_down = step_down(sp, seq).r;
        CHECK(r_down <= r_up);

        // raising thresholds pointwise never decreases r, in either mode
        std::vector<double> raised = t;
        for (double& v : raised) v = std::min(1.0, v + unif(gen) * 0.1);
        const auto seq2 = make_thresholds(raised);
        CHECK(step_up(sp, seq2).r >= r_up);
        CHECK(step_down(sp, seq2).r >= r_down);
    }
    // all-below and all-above
    const SortedPValues sp = sort_pvalues(std::vector<double>{0.01, 0.02, 0.03});
    const auto lo = make_thresholds({0.001, 0.002, 0.003});
    const auto hi = make_thresholds({0.5, 0.6, 0.7});
    CHECK(step_up(sp, hi).r == 3);
    CHECK(step_down(sp, hi).r == 3);
    CHECK(step_up(sp, lo).r == 0);
    CHECK(step_down(sp, lo).r == 0);
}

TEST_CASE("linear_thresholds") {
    {
        const ThresholdSequence t = linear_thresholds(3, 0.1, 3.0);
        REQUIRE(t.size() == 3);
        CHECK(t.thresholds[0] == doctest::Approx(0.1 / 3).epsilon(1e-12));
        CHECK(t.thresholds[1] == doctest::Approx(0.2 / 3).epsilon(1e-12));
        CHECK(t.thresholds[2] == doctest::Approx(0.1).epsilon(1e-12));
    }
    {
        const ThresholdSequence t = linear_thresholds(3, 0.1, 1.5);
        CHECK(t.thresholds[0] == doctest::Approx(0.2 / 3).epsilon(1e-12));
        CHECK(t.thresholds[1] == doctest::Approx(0.4 / 3).epsilon(1e-12));
        CHECK(t.thresholds[2] == doctest::Approx(0.2).epsilon(1e-12));
    }
    {
        const ThresholdSequence t = linear_thresholds(2, 1.0, 2.0);
        CHECK(t.thresholds[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(t.thresholds[1] == doctest::Approx(1.0).epsilon(1e-15));
    }
    // strictly increasing for any finite m0_hat
    const ThresholdSequence t = linear_thresholds(50, 0.05, 7.3);
    for (std::size_t i = 1; i < t.size(); ++i) CHECK(t.thresholds[i] > t.thresholds[i - 1]);

    CHECK_THROWS_AS(linear_thresholds(3, 0.1, 0.0), DegenerateEstimator);
    CHECK_THROWS_AS(linear_thresholds(3, 0.0, 1.0), OutOfRange);
    CHECK_THROWS_AS(linear_thresholds(3, 1.1, 1.0), OutOfRange);
    const ThresholdSequence zero =
        linear_thresholds(3, 0.1, std::numeric_limits<double>::infinity());
    CHECK(zero.thresholds == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("standard_normal_cdf pinned values") {
    CHECK(standard_normal_cdf(0.0) == 0.5);
    CHECK(standard_normal_cdf(1.959964) == doctest::Approx(0.975).epsilon(1e-6));
    // values from standard tables
    CHECK(std::fabs(standard_normal_cdf(1.0) - 0.8413447460685429) < 1e-13);
    CHECK(std::fabs(standard_normal_cdf(2.0) - 0.9772498680518208) < 1e-13);
    CHECK(std::fabs(standard_normal_cdf(3.0) - 0.9986501019683699) < 1e-13);
    CHECK(std::fabs(standard_normal_cdf(-1.0) - 0.1586552539314571) < 1e-13);
    CHECK_THROWS_AS(standard_normal_cdf(std::nan("")), NonFiniteInput);
    CHECK_THROWS_AS(standard_normal_cdf(std::numeric_limits<double>::infinity()),
                    NonFiniteInput);
}

TEST_CASE("standard_normal_cdf agrees with the series oracle") {
    for (int i = -650; i <= 650; ++i) {
        const double x = i / 100.0;
        CHECK(std::fabs(standard_normal_cdf(x) - phi_series(x)) < 1e-12);
    }
}

TEST_CASE("standard_normal_cdf far tail via the asymptotic oracle") {
    for (double a : {7.0, 8.0, 9.0, 10.0, 12.0}) {
        const double got = standard_normal_cdf(-a);
        const double want = phi_tail_lower(a);
        CHECK(got > 0.0);  // no underflow
        CHECK(std::fabs(got - want) / want < 1e-5);
    }
    // the pinned example: Phi(-8) ~ 6.22e-16
    CHECK(standard_normal_cdf(-8.0) == doctest::Approx(6.22e-16).epsilon(2e-3));
}

TEST_CASE("standard_normal_cdf symmetry and monotonicity on a dense grid") {
    double prev = -1.0;
    for (int i = 0; i <= 10000; ++i) {
        const double x = -10.0 + i * 20.0 / 10000.0;
        const double up = standard_normal_cdf(x);
        const double down = standard_normal_cdf(-x);
        CHECK(std::fabs(up + down - 1.0) <= 1e-14);
        CHECK(up >= prev);
        prev = up;
    }
}

TEST_CASE("standard_normal_quantile inverts the cdf") {
    CHECK(standard_normal_quantile(0.5) == 0.0);
    CHECK(standard_normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    for (int i = 1; i < 1000; ++i) {
        const double p = i / 1000.0;
        const double x = standard_normal_quantile(p);
        CHECK(std::fabs(standard_normal_cdf(x) - p) < 1e-13);
    }
    // extreme but in-range inputs stay finite and consistent
    for (double p : {1e-300, 1e-16, 0x1p-54, 1.0 - 1e-16}) {
        const double x = standard_normal_quantile(p);
        CHECK(std::isfinite(x));
        CHECK(std::fabs(standard_normal_cdf(x) - p) <= 1e-14 + 1e-10 * p);
    }
    CHECK_THROWS_AS(standard_normal_quantile(0.0), OutOfRange);
    CHECK_THROWS_AS(standard_normal_quantile(1.0), OutOfRange);
    CHECK_THROWS_AS(standard_normal_quantile(std::nan("")), NonFiniteInput);
}
