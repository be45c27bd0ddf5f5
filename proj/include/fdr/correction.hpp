#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "fdr/core.hpp"

namespace fdr {

/// The universal correction pair for the sum estimator at a given m:
/// m0_hat = c * min(m, max(s, 2*sum(p))). c >= 1 and 0 < s < m for every
/// computed table entry; c -> 1 and s/m -> 0 as m grows.
struct CorrectionFactors {
    std::size_t m = 0;
    double c = 1.0;
    double s = 0.0;
};

/// Density of z = 2*sum of (m0-1) i.i.d. U[0,1] terms, approximated by a
/// normal with mean m0-1 and variance (m0-1)/3. For m0 == 1 the distribution
/// is a point mass at 0, returned symbolically as +inf at t == 0 and 0
/// elsewhere; callers integrate that case analytically.
double uniform_sum_density(std::size_t m0, double t);

/// The three-part bound integral
///   m0 * [ P(z < s)/s + int_s^m h(t)/t dt + P(z > m)/m ]
/// with normal mass below 0 folded into the 1/s term and mass above 2m into
/// the 1/m term (both allocations only increase the value).
double correction_integral(std::size_t m, std::size_t m0, double s);

/// Min-max search for (C(m), s(m)): C(m,s) = max over m0 in 1..m of the
/// bound integral, and s(m) is the smallest s at which that maximum stops
/// decreasing, i.e. first equals the s-independent value at m0 = m. Exact
/// integer grids for m <= 2000; strided grids with local refinement above.
CorrectionFactors optimal_correction(std::size_t m);

/// Persistent cache of correction factors, keyed by m.
///
/// File format: header line "fdr-correction-table v1", then one CSV line
/// per m ("m,C,s", C to 8 significant digits), ascending in m.
class CorrectionTable {
public:
    CorrectionTable() = default;

    /// Computes factors for every requested m, parallelized across the list.
    static CorrectionTable compute(std::span<const std::size_t> ms, unsigned threads = 0);

    static CorrectionTable load(const std::filesystem::path& path);
    static CorrectionTable load(std::istream& in, const std::string& origin);
    void save(const std::filesystem::path& path) const;
    void save(std::ostream& out) const;

    const CorrectionFactors* find(std::size_t m) const noexcept;
    /// Throws MissingCorrection when m is absent.
    const CorrectionFactors& at(std::size_t m) const;
    /// Cache miss computes (and stores) the factors on demand.
    const CorrectionFactors& get_or_compute(std::size_t m);

    void insert(const CorrectionFactors& cf);
    std::vector<std::size_t> ms() const;
    std::size_t size() const noexcept { return rows_.size(); }

private:
    std::map<std::size_t, CorrectionFactors> rows_;
};

}  // namespace fdr
