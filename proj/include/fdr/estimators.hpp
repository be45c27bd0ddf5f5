#pragma once

#include <cstddef>
#include <span>

#include "fdr/core.hpp"
#include "fdr/correction.hpp"

namespace fdr {

/// m0_hat' = 2 * sum(p). Unbiased for m0 under the global null.
double estimate_m0_sum_raw(std::span<const double> p);

/// m0_hat = C(m) * min(m, max(s(m), 2*sum(p))). cf must be the factors for
/// this m (MissingCorrection otherwise).
double estimate_m0_sum_corrected(std::span<const double> p, const CorrectionFactors& cf);

/// m0_tilde' = -sum(log(1 - p)), with p clamped to 1 - 2^-52 before the log
/// so p-values of exactly 1 stay finite (and large, matching the known
/// inflation with one-tailed data).
double estimate_m0_log_raw(std::span<const double> p);

/// m0_tilde = 2 + m0_tilde'.
double estimate_m0_log_corrected(std::span<const double> p);

/// (m + 1 - #{p_i <= lambda}) / (1 - lambda). Not capped at m.
double estimate_m0_sts(std::span<const double> p, double lambda);

/// Rank-dependent thresholds i*q / (m + 1 - i*(1-q)), consumed step-down.
ThresholdSequence bky_threshold_sequence(std::size_t m, double q);

struct EstimatorKind {
    enum class Tag {
        sum_raw,
        sum_corrected,
        log_raw,
        log_corrected,
        sts,
        bky_local,
        oracle_known,
    };

    Tag tag = Tag::sum_corrected;
    double lambda = 0.5;  // sts only
    std::size_t m0 = 0;   // oracle_known only

    static EstimatorKind sum_raw() { return {Tag::sum_raw, 0.0, 0}; }
    static EstimatorKind sum_corrected() { return {Tag::sum_corrected, 0.0, 0}; }
    static EstimatorKind log_raw() { return {Tag::log_raw, 0.0, 0}; }
    static EstimatorKind log_corrected() { return {Tag::log_corrected, 0.0, 0}; }
    static EstimatorKind sts(double lambda) { return {Tag::sts, lambda, 0}; }
    static EstimatorKind bky_local() { return {Tag::bky_local, 0.0, 0}; }
    static EstimatorKind oracle_known(std::size_t m0) { return {Tag::oracle_known, 0.0, m0}; }

    /// Every kind except bky_local evaluates to a single number.
    bool is_scalar() const noexcept { return tag != Tag::bky_local; }
    const char* name() const noexcept;
};

/// Evaluates a scalar estimator. sum_corrected needs factors for p.size().
double estimate_m0(std::span<const double> p, const EstimatorKind& kind,
                   const CorrectionFactors* cf = nullptr);

/// Drop-one evaluation used by the FDR bound check: the estimator applied to
/// the remaining m-1 p-values. sum_corrected keeps the correction factors of
/// the original m (cf.m == p_rest.size() + 1).
double estimate_m0_drop_first(std::span<const double> p_rest, const EstimatorKind& kind,
                              const CorrectionFactors* cf = nullptr);

}  // namespace fdr
