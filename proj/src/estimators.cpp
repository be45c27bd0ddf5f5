#include "fdr/estimators.hpp"

#include <algorithm>
#include <cmath>

namespace fdr {

namespace {

constexpr double kLogClamp = 1.0 - 0x1p-52;

void require_probabilities(std::span<const double> p) {
    if (p.empty()) throw EmptyInput("estimator input is empty");
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p[i]) || p[i] < 0.0 || p[i] > 1.0) {
            throw OutOfRange("p-value at index " + std::to_string(i) + " outside [0,1]");
        }
    }
}

double sum_raw_unchecked(std::span<const double> p) {
    double sum = 0.0;
    for (const double v : p) sum += v;
    return 2.0 * sum;
}

double log_raw_unchecked(std::span<const double> p) {
    double acc = 0.0;
    for (const double v : p) acc -= std::log1p(-std::min(v, kLogClamp));
    return acc;
}

double sts_unchecked(std::span<const double> p, double lambda) {
    std::size_t r = 0;
    for (const double v : p) r += (v <= lambda) ? 1 : 0;
    return (static_cast<double>(p.size()) + 1.0 - static_cast<double>(r)) / (1.0 - lambda);
}

}  // namespace

double estimate_m0_sum_raw(std::span<const double> p) {
    require_probabilities(p);
    return sum_raw_unchecked(p);
}

double estimate_m0_sum_corrected(std::span<const double> p, const CorrectionFactors& cf) {
    require_probabilities(p);
    if (cf.m != p.size()) {
        throw MissingCorrection("correction factors are for m = " + std::to_string(cf.m) +
                                ", p-value vector has m = " + std::to_string(p.size()));
    }
    const double raw = sum_raw_unchecked(p);
    return cf.c * std::min(static_cast<double>(cf.m), std::max(cf.s, raw));
}

double estimate_m0_log_raw(std::span<const double> p) {
    require_probabilities(p);
    return log_raw_unchecked(p);
}

double estimate_m0_log_corrected(std::span<const double> p) {
    require_probabilities(p);
    return 2.0 + log_raw_unchecked(p);
}

double estimate_m0_sts(std::span<const double> p, double lambda) {
    if (!(lambda > 0.0) || !(lambda < 1.0)) {
        throw LambdaOutOfRange("lambda must be strictly inside (0,1)");
    }
    require_probabilities(p);
    return sts_unchecked(p, lambda);
}

ThresholdSequence bky_threshold_sequence(std::size_t m, double q) {
    if (m < 1) throw EmptyInput("m must be >= 1");
    if (!(q > 0.0) || q > 1.0) throw OutOfRange("q must be in (0,1]");
    ThresholdSequence t;
    t.label = "bky";
    t.thresholds.resize(m);
    for (std::size_t i = 1; i <= m; ++i) {
        const double di = static_cast<double>(i);
        const double m0_local = static_cast<double>(m) + 1.0 - di * (1.0 - q);
        t.thresholds[i - 1] = di * q / m0_local;
    }
    return t;
}

const char* EstimatorKind::name() const noexcept {
    switch (tag) {
        case Tag::sum_raw: return "sum-raw";
        case Tag::sum_corrected: return "sum";
        case Tag::log_raw: return "log-raw";
        case Tag::log_corrected: return "log";
        case Tag::sts: return "sts";
        case Tag::bky_local: return "bky";
        case Tag::oracle_known: return "oracle";
    }
    return "?";
}

double estimate_m0(std::span<const double> p, const EstimatorKind& kind,
                   const CorrectionFactors* cf) {
    switch (kind.tag) {
        case EstimatorKind::Tag::sum_raw:
            return estimate_m0_sum_raw(p);
        case EstimatorKind::Tag::sum_corrected:
            if (cf == nullptr) {
                throw MissingCorrection("corrected sum estimator needs correction factors");
            }
            return estimate_m0_sum_corrected(p, *cf);
        case EstimatorKind::Tag::log_raw:
            return estimate_m0_log_raw(p);
        case EstimatorKind::Tag::log_corrected:
            return estimate_m0_log_corrected(p);
        case EstimatorKind::Tag::sts:
            return estimate_m0_sts(p, kind.lambda);
        case EstimatorKind::Tag::oracle_known:
            return static_cast<double>(kind.m0);
        case EstimatorKind::Tag::bky_local:
            break;
    }
    throw ValidationError("estimator kind has no scalar value");
}

double estimate_m0_drop_first(std::span<const double> p_rest, const EstimatorKind& kind,
                              const CorrectionFactors* cf) {
    switch (kind.tag) {
        case EstimatorKind::Tag::sum_raw:
            return sum_raw_unchecked(p_rest);
        case EstimatorKind::Tag::sum_corrected: {
            if (cf == nullptr) {
                throw MissingCorrection("corrected sum estimator needs correction factors");
            }
            if (cf->m != p_rest.size() + 1) {
                throw MissingCorrection("drop-one evaluation expects factors for m = " +
                                        std::to_string(p_rest.size() + 1));
            }
            const double raw = sum_raw_unchecked(p_rest);
            return cf->c * std::min(static_cast<double>(cf->m), std::max(cf->s, raw));
        }
        case EstimatorKind::Tag::log_raw:
            return log_raw_unchecked(p_rest);
        case EstimatorKind::Tag::log_corrected:
            return 2.0 + log_raw_unchecked(p_rest);
        case EstimatorKind::Tag::sts:
            if (!(kind.lambda > 0.0) || !(kind.lambda < 1.0)) {
                throw LambdaOutOfRange("lambda must be strictly inside (0,1)");
            }
            return sts_unchecked(p_rest, kind.lambda);
        default:
            break;
    }
    throw ValidationError("estimator kind has no drop-one evaluation");
}

}  // namespace fdr
