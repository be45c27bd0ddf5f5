#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "fdr/correction.hpp"
#include "fdr/estimators.hpp"

using namespace fdr;

namespace {

// Exact-distribution oracle: z = 2 * sum of (m0-1) uniforms, no Gaussian
// approximation; estimates m0 * E[1 / min(m, max(s, z))].
double mc_bound_oracle(std::size_t m, std::size_t m0, double s, std::size_t draws,
                       std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double acc = 0.0;
    for (std::size_t d = 0; d < draws; ++d) {
        double z = 0.0;
        for (std::size_t j = 1; j < m0; ++j) z += unif(gen);
        z *= 2.0;
        acc += 1.0 / std::min(static_cast<double>(m), std::max(s, z));
    }
    return static_cast<double>(m0) * acc / static_cast<double>(draws);
}

}  // namespace

TEST_CASE("uniform_sum_density") {
    // N(1, 1/3) at its mean
    CHECK(uniform_sum_density(2, 1.0) ==
          doctest::Approx(std::sqrt(3.0 / (2.0 * M_PI))).epsilon(1e-12));
    CHECK(uniform_sum_density(2, 1.0) == doctest::Approx(0.690988).epsilon(1e-6));
    // tails vanish
    CHECK(uniform_sum_density(2, 40.0) == 0.0);
    CHECK(uniform_sum_density(2, -40.0) == 0.0);
    // peak of N(300, 100)
    CHECK(uniform_sum_density(301, 300.0) ==
          doctest::Approx(1.0 / std::sqrt(200.0 * M_PI)).epsilon(1e-12));
    CHECK(uniform_sum_density(301, 300.0) == doctest::Approx(0.0398942).epsilon(1e-6));
    // m0 = 1 is the symbolic point mass at zero
    CHECK(uniform_sum_density(1, 0.0) == std::numeric_limits<double>::infinity());
    CHECK(uniform_sum_density(1, 0.5) == 0.0);
    CHECK_THROWS_AS(uniform_sum_density(0, 1.0), OutOfRange);
    CHECK_THROWS_AS(uniform_sum_density(2, std::nan("")), NonFiniteInput);
}

TEST_CASE("correction_integral degenerate m0 = 1 is exactly 1/s") {
    CHECK(correction_integral(500, 1, 98.0) == doctest::Approx(1.0 / 98.0).epsilon(1e-15));
    CHECK(correction_integral(10, 1, 3.5) == doctest::Approx(1.0 / 3.5).epsilon(1e-15));
    CHECK_THROWS_AS(correction_integral(10, 0, 3.0), OutOfRange);
    CHECK_THROWS_AS(correction_integral(10, 11, 3.0), OutOfRange);
    CHECK_THROWS_AS(correction_integral(10, 5, 0.0), OutOfRange);
    CHECK_THROWS_AS(correction_integral(10, 5, 10.0), OutOfRange);
}

TEST_CASE("correction_integral against the exact-distribution MC oracle") {
    // Small m0: the normal approximation must sit above the exact value
    // (within MC noise); it converges from above as m0 grows.
    for (const std::size_t m0 : {2ul, 5ul, 20ul, 40ul}) {
        for (const double s : {30.0, 98.0}) {
            const double approx = correction_integral(500, m0, s);
            const double exact = mc_bound_oracle(500, m0, s, 1000000, 1234 + m0);
            CHECK(exact <= approx * 1.01);
        }
    }
    // CLT regime: two-sided agreement within 1%.
    for (const std::size_t m0 : {100ul, 250ul, 500ul}) {
        for (const double s : {30.0, 98.0}) {
            const double approx = correction_integral(500, m0, s);
            const double exact = mc_bound_oracle(500, m0, s, 200000, 99 + m0);
            CHECK(std::fabs(exact - approx) / approx < 0.01);
        }
    }
}

TEST_CASE("correction_integral has the expected shape in m0") {
    // fixed m = 500, s = 98: continuous in m0 with an interior maximum and a
    // second candidate maximum at m0 = m
    std::vector<double> values;
    for (std::size_t m0 = 1; m0 <= 500; ++m0) {
        values.push_back(correction_integral(500, m0, 98.0));
    }
    // an interior local maximum exists well away from both ends
    std::size_t peak = 0;
    for (std::size_t i = 1; i + 1 < 450; ++i) {
        if (values[i] > values[i - 1] && values[i] >= values[i + 1] &&
            (peak == 0 || values[i] > values[peak])) {
            peak = i;
        }
    }
    CHECK(peak + 1 > 50);
    CHECK(peak + 1 < 400);
    // ... and the m0 = m endpoint is the second candidate maximum; at the
    // optimal s the two are nearly level (that is what fixes s)
    CHECK(values[499] == doctest::Approx(values[peak]).epsilon(0.02));
    CHECK(values[499] > values[449]);
    // continuity: neighbour steps shrink like 1/m0 (the floor regime scales
    // as m0/s, so early steps are (m0+1)/m0)
    for (std::size_t i = 1; i < values.size(); ++i) {
        CHECK(std::fabs(values[i] / values[i - 1] - 1.0) <= 2.0 / static_cast<double>(i));
    }
    // the m0 = m endpoint is a local maximum relative to its neighbourhood
    CHECK(values[499] > values[450]);
}

TEST_CASE("optimal_correction at m = 100") {
    const CorrectionFactors cf = optimal_correction(100);
    CHECK(cf.m == 100);
    CHECK(cf.s >= 32.0);
    CHECK(cf.s <= 38.0);
    CHECK(cf.c > 1.02);
    CHECK(cf.c < 1.04);
    // certified maximum on the grid
    for (std::size_t m0 = 1; m0 <= 100; ++m0) {
        CHECK(correction_integral(100, m0, cf.s) <= cf.c * (1.0 + 1e-7));
    }
    CHECK_THROWS_AS(optimal_correction(1), OutOfRange);
}

TEST_CASE("optimal_correction control condition by MC at m = 100") {
    // E[1 / m0_hat-with-one-null-removed] <= 1/m0 for the corrected sum
    // estimator; alternatives contribute their worst case of zero.
    const CorrectionFactors cf = optimal_correction(100);
    std::mt19937_64 gen(71);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (const std::size_t m0 : {1ul, 25ul, 50ul, 100ul}) {
        const std::size_t draws = 30000;
        double acc = 0.0, acc2 = 0.0;
        for (std::size_t d = 0; d < draws; ++d) {
            double z = 0.0;
            for (std::size_t j = 1; j < m0; ++j) z += unif(gen);
            z *= 2.0;
            const double est = cf.c * std::min(100.0, std::max(cf.s, z));
            const double x = 1.0 / est;
            acc += x;
            acc2 += x * x;
        }
        const double mean = acc / draws;
        const double var = (acc2 - draws * mean * mean) / (draws - 1.0);
        const double se = std::sqrt(std::max(0.0, var) / draws);
        CHECK(mean <= 1.0 / static_cast<double>(m0) + 3.0 * se);
    }
}

TEST_CASE("table is monotone in m: C down, s/m down") {
    const std::vector<std::size_t> ms = {100, 200, 500, 1000, 2000};
    const CorrectionTable table = CorrectionTable::compute(ms);
    REQUIRE(table.size() == ms.size());
    double prev_c = std::numeric_limits<double>::infinity();
    double prev_frac = std::numeric_limits<double>::infinity();
    for (const std::size_t m : ms) {
        const CorrectionFactors& cf = table.at(m);
        CHECK(cf.c >= 1.0);
        CHECK(cf.s > 0.0);
        CHECK(cf.s < static_cast<double>(m));
        CHECK(cf.c <= prev_c);
        CHECK(cf.s / static_cast<double>(m) <= prev_frac);
        prev_c = cf.c;
        prev_frac = cf.s / static_cast<double>(m);
    }
    // the two table sizes with known landmarks
    CHECK(std::fabs(table.at(500).s - 98.0) <= 3.0);
    CHECK(std::fabs(table.at(1000).s - 147.0) <= 3.0);
    CHECK(table.at(500).c == doctest::Approx(1.0117138).epsilon(2e-4));
    CHECK(table.at(1000).c == doctest::Approx(1.0079781).epsilon(2e-4));
}

TEST_CASE("asymptotic regime via the strided search") {
    const CorrectionFactors cf = optimal_correction(100000);
    CHECK(cf.c >= 1.0);
    CHECK(cf.c <= 1.02);
    CHECK(cf.s / 100000.0 < 0.05);
}

TEST_CASE("table computation is independent of the worker count") {
    const std::vector<std::size_t> ms = {40, 60, 80};
    const CorrectionTable one = CorrectionTable::compute(ms, 1);
    const CorrectionTable three = CorrectionTable::compute(ms, 3);
    for (const std::size_t m : ms) {
        CHECK(one.at(m).c == three.at(m).c);
        CHECK(one.at(m).s == three.at(m).s);
    }
}

TEST_CASE("table save/load round trip is exact") {
    const std::vector<std::size_t> ms = {100, 500};
    const CorrectionTable table = CorrectionTable::compute(ms);
    std::stringstream first;
    table.save(first);
    const CorrectionTable loaded = CorrectionTable::load(first, "mem");
    for (const std::size_t m : ms) {
        CHECK(loaded.at(m).m == table.at(m).m);
        CHECK(loaded.at(m).c == table.at(m).c);  // bit-for-bit
        CHECK(loaded.at(m).s == table.at(m).s);
    }
    std::stringstream second;
    loaded.save(second);
    CHECK(first.str() == second.str());
}

TEST_CASE("table load rejects bad files") {
    {
        std::stringstream in("fdr-correction-table v999\n100,1.03,35\n");
        CHECK_THROWS_AS(CorrectionTable::load(in, "mem"), VersionMismatch);
    }
    {
        std::stringstream in("fdr-correction-table v1\n100,abc,35\n");
        CHECK_THROWS_AS(CorrectionTable::load(in, "mem"), ParseError);
    }
    {
        std::stringstream in("fdr-correction-table v1\n100,1.03,200\n");
        CHECK_THROWS_AS(CorrectionTable::load(in, "mem"), ParseError);  // s >= m
    }
    {
        std::stringstream in("");
        CHECK_THROWS_AS(CorrectionTable::load(in, "mem"), ParseError);
    }
}

TEST_CASE("table miss and compute-on-demand") {
    CorrectionTable table;
    CHECK(table.find(100) == nullptr);
    CHECK_THROWS_AS(table.at(100), MissingCorrection);
    const CorrectionFactors& cf = table.get_or_compute(100);
    CHECK(cf.m == 100);
    CHECK(table.find(100) != nullptr);
    CHECK(&table.get_or_compute(100) == &cf);  // cached, not recomputed
}
