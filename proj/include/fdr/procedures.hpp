#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fdr/core.hpp"
#include "fdr/correction.hpp"
#include "fdr/estimators.hpp"

namespace fdr {

enum class ProcedureKind { bh95, oracle, bky, sts, ibh_sum, ibh_log };

/// A fully specified rejection procedure. BKY is step-down and STS step-up
/// by definition; the factory functions enforce the lock.
struct ProcedureSpec {
    ProcedureKind kind = ProcedureKind::bh95;
    StepMode mode = StepMode::up;
    double q = 0.05;
    double lambda = 0.5;  // sts
    std::size_t m0 = 0;   // oracle

    static ProcedureSpec bh95(double q, StepMode mode = StepMode::up);
    static ProcedureSpec oracle(double q, std::size_t m0, StepMode mode = StepMode::up);
    static ProcedureSpec bky(double q);
    static ProcedureSpec sts(double q, double lambda = 0.5);
    static ProcedureSpec ibh_sum(double q, StepMode mode = StepMode::down);
    static ProcedureSpec ibh_log(double q, StepMode mode = StepMode::down);

    const char* name() const noexcept;
    const char* mode_name() const noexcept;
};

void validate(const ProcedureSpec& spec);

/// Runs one procedure on a p-value vector. IBHsum needs correction factors
/// for m, looked up in `table` (MissingCorrection when absent or null).
RejectionOutcome apply_procedure(std::span<const double> p, const ProcedureSpec& spec,
                                 const CorrectionTable* table = nullptr);

/// Same, reusing an existing sort (the simulation path shares one sort per
/// instance across all procedures).
RejectionOutcome apply_procedure(const SortedPValues& sp, const ProcedureSpec& spec,
                                 const CorrectionTable* table = nullptr);

struct QValueVector {
    std::vector<double> qvals;  // aligned to original indices
    std::optional<EstimatorKind> estimator_used;
    double m0_hat = 0.0;  // m for the plain BH q-values
};

/// q_(i) = min over j >= i of m*p_(j)/j, capped at 1: the smallest level at
/// which BH95 step-up would reject hypothesis (i).
QValueVector bh_qvalues(std::span<const double> p);

/// BH q-values scaled by m0_hat/m (capped at 1) for a scalar estimator.
QValueVector adaptive_qvalues(std::span<const double> p, const EstimatorKind& est,
                              const CorrectionTable* table = nullptr);

/// Rejection-count ratios against BH95 (step-up) across several datasets,
/// per procedure and per q level, with mean and sample standard deviation
/// across datasets. A dataset where BH95 rejects nothing contributes an
/// undefined ratio, excluded from the aggregates and counted.
struct CompareReport {
    struct Dataset {
        std::string name;
        std::size_t m = 0;
        std::string error;                         // nonempty: excluded entirely
        std::vector<std::size_t> r_bh95;           // per q level
        std::vector<std::vector<std::size_t>> r;   // [q][procedure]
    };
    struct Cell {
        double mean = 0.0;
        double stddev = 0.0;  // NaN when fewer than 2 usable ratios
        std::size_t n_used = 0;
        std::size_t n_undefined = 0;
    };

    std::vector<double> q_levels;
    std::vector<ProcedureSpec> procedures;  // evaluated at each q level
    std::vector<Dataset> datasets;          // sorted by name
    std::vector<std::vector<Cell>> cells;   // [q][procedure]
};

CompareReport compare_datasets(
    std::vector<std::pair<std::string, std::vector<double>>> datasets,
    std::span<const ProcedureSpec> procedures, std::span<const double> q_levels,
    const CorrectionTable* table = nullptr, unsigned threads = 0);

}  // namespace fdr
