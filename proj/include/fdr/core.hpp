#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fdr {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments or malformed input; the CLI maps these to exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

class EmptyInput : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class OutOfRange : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NonFiniteInput : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class LengthMismatch : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class LambdaOutOfRange : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DegenerateEstimator : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class MissingCorrection : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class VersionMismatch : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class IoError : public Error {
public:
    using Error::Error;
};

enum class StepMode { up, down };

/// A p-value vector together with its order statistics. `perm[k]` is the
/// original (0-based) index of the k-th smallest p-value; ties keep
/// ascending original index.
struct SortedPValues {
    std::vector<double> values;
    std::vector<double> sorted;
    std::vector<std::size_t> perm;

    std::size_t m() const noexcept { return values.size(); }
};

SortedPValues sort_pvalues(std::span<const double> values);

/// Per-rank rejection thresholds; `thresholds[i-1]` is compared against the
/// i-th order statistic.
struct ThresholdSequence {
    std::vector<double> thresholds;
    std::string label;

    std::size_t size() const noexcept { return thresholds.size(); }
};

/// thresholds_i = i*q/m0_hat. m0_hat == +inf gives all-zero thresholds;
/// m0_hat == 0 throws DegenerateEstimator (callers map that to reject-all).
ThresholdSequence linear_thresholds(std::size_t m, double q, double m0_hat);

struct RejectionOutcome {
    std::size_t r = 0;
    std::vector<std::size_t> rejected_indices;  // original indices, ascending
    double m0_hat = 0.0;                        // filled by the procedure layer
    ThresholdSequence thresholds;
    StepMode mode = StepMode::up;
};

/// r = max{i : p_(i) <= t_i}, 0 if none. Comparison is inclusive.
RejectionOutcome step_up(const SortedPValues& sp, const ThresholdSequence& t);

/// r = min{i : p_(i) > t_i} - 1; all below thresholds gives r = m.
RejectionOutcome step_down(const SortedPValues& sp, const ThresholdSequence& t);

namespace detail {

// Count-only engines shared by the public step functions and the simulation
// hot path. `threshold_at(i)` is the threshold for 1-based rank i.
template <typename F>
std::size_t step_up_count(std::span<const double> sorted, F&& threshold_at) {
    for (std::size_t i = sorted.size(); i >= 1; --i) {
        if (sorted[i - 1] <= threshold_at(i)) return i;
    }
    return 0;
}

template <typename F>
std::size_t step_down_count(std::span<const double> sorted, F&& threshold_at) {
    for (std::size_t i = 1; i <= sorted.size(); ++i) {
        if (sorted[i - 1] > threshold_at(i)) return i - 1;
    }
    return sorted.size();
}

}  // namespace detail

/// Standard normal CDF, absolute error below 1e-12; the tail does not
/// underflow to 0 until far beyond |x| = 8.
double standard_normal_cdf(double x);

/// Inverse of the standard normal CDF for p in (0,1).
double standard_normal_quantile(double p);

}  // namespace fdr
