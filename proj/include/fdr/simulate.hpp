#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdr/core.hpp"
#include "fdr/correction.hpp"
#include "fdr/estimators.hpp"
#include "fdr/procedures.hpp"

namespace fdr {

struct SimConfig {
    std::size_t m = 500;
    std::size_t m0 = 250;   // true nulls; the first m0 coordinates
    double mu1 = 3.5;       // alternative mean (signal strength)
    double rho = 0.0;       // pairwise correlation, single common factor
    double q = 0.05;
    std::size_t reps = 50000;
    std::uint64_t seed = 0;
};

void validate(const SimConfig& cfg);

struct Instance {
    std::vector<double> z;
    std::vector<std::uint8_t> is_null;  // 1 for the first m0 coordinates
};

/// Equicorrelated Gaussian test statistics: with Y_0..Y_m i.i.d. N(0,1),
/// X_i = sqrt(rho)*Y_m + sqrt(1-rho)*Y_i, plus mu1 for the alternatives.
/// Deterministic in (cfg.seed, rep_index).
Instance generate_instance(const SimConfig& cfg, std::uint64_t rep_index);

/// Two-tailed p-values p_i = 2*Phi(-|z_i|), in (0,1].
std::vector<double> instance_pvalues(std::span<const double> z);

struct ReplicationCounts {
    std::size_t v = 0;  // false rejections
    std::size_t s = 0;  // true rejections
    std::size_t r = 0;  // total rejections
    std::size_t u = 0;  // true non-rejections
    std::size_t t = 0;  // false non-rejections
    double vr = 0.0;    // v / max(r,1)
};

ReplicationCounts evaluate_replication(const RejectionOutcome& outcome,
                                       std::span<const std::uint8_t> is_null);

/// Fixed-width histogram on [0,1]; 1.0 lands in the last bin.
struct Histogram {
    explicit Histogram(std::size_t n_bins = 1000) : bins(n_bins, 0) {}
    std::vector<std::uint64_t> bins;
    std::uint64_t total = 0;

    void add(double x);
    void merge(const Histogram& other);
    /// Fraction of samples in bins entirely at or below x (bin resolution).
    double cdf(double x) const;
};

struct SimMetrics {
    double fdr_hat = 0.0;  // mean of V/R+
    double fdr_se = 0.0;
    double vr_std = 0.0;   // sample st.d. of V/R+
    std::optional<double> power_hat;  // mean S/m1; absent when m1 == 0
    std::optional<double> power_se;
    double p_bound = 0.0;  // exact fraction of reps with V/R+ <= q (inclusive)
    double p_bound_se = 0.0;
    double mean_r = 0.0;
    std::size_t reps = 0;
    Histogram vr_ecdf{1000};
};

/// Runs every procedure on a shared instance per replication (common random
/// numbers) and aggregates. Deterministic in (cfg, specs, seed), independent
/// of the number of worker threads. The simulation level cfg.q overrides the
/// per-spec q, and an Oracle spec uses the ground-truth cfg.m0.
std::vector<SimMetrics> run_simulation(const SimConfig& cfg,
                                       std::span<const ProcedureSpec> specs,
                                       const CorrectionTable* table = nullptr,
                                       unsigned threads = 0);

struct BoundCheckResult {
    double empirical_fdr = 0.0;  // modified step-up procedure with the estimator
    double empirical_se = 0.0;
    double bound = 0.0;  // m0 * q * E[1 / m0_hat evaluated without one null p]
    double bound_se = 0.0;
};

/// Monte Carlo check of the FDR bound for a scalar monotonic estimator.
BoundCheckResult thm1_bound_check(const SimConfig& cfg, const EstimatorKind& est,
                                  const CorrectionTable* table = nullptr,
                                  unsigned threads = 0);

struct CounterexampleResult {
    double fdr1 = 0.0;  // procedure rejecting the single lowest p-value
    double se1 = 0.0;
    double fdr2 = 0.0;  // procedure rejecting the two lowest p-values
    double se2 = 0.0;
};

/// The m=3, m0=1 scenario where the more conservative procedure has the
/// higher FDR: p_1 ~ U[0,1] null and p_2, p_3 drawn from the mixture
/// eps*U[0,eps] + (1-eps)*delta(eps). Ties at eps break by original index.
CounterexampleResult counterexample_scenario(double epsilon, std::size_t reps,
                                             std::uint64_t seed);

struct SweepRequest {
    SimConfig base;  // m, rho, q, reps, seed used as-is; mu1/m0 come from the grid
    std::vector<double> mu1_grid;
    std::vector<double> m0_frac_grid;
    std::vector<ProcedureSpec> specs;
    std::vector<std::string> metrics;  // of {"fdr","power","vr_std","p_bound","mean_r"}
};

struct SweepRow {
    double mu1 = 0.0;
    double m0_frac = 0.0;
    std::string procedure;
    std::string mode;
    std::string metric;
    std::optional<double> value;  // absent for power when m1 == 0
    std::optional<double> se;
};

/// One run_simulation per grid cell, all cells with the same seed, rows in
/// grid order (mu1 outer, m0_frac inner).
std::vector<SweepRow> sweep(const SweepRequest& request, const CorrectionTable* table = nullptr,
                            unsigned threads = 0);

}  // namespace fdr
