#include "fdr/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fdr {

namespace {

void require_probability_vector(std::span<const double> values) {
    if (values.empty()) throw EmptyInput("p-value vector is empty");
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw OutOfRange("p-value at index " + std::to_string(i) +
                             " outside [0,1]: " + std::to_string(v));
        }
    }
}

RejectionOutcome make_outcome(const SortedPValues& sp, const ThresholdSequence& t,
                              std::size_t r, StepMode mode) {
    RejectionOutcome out;
    out.r = r;
    out.rejected_indices.assign(sp.perm.begin(), sp.perm.begin() + static_cast<std::ptrdiff_t>(r));
    std::sort(out.rejected_indices.begin(), out.rejected_indices.end());
    out.thresholds = t;
    out.mode = mode;
    return out;
}

}  // namespace

SortedPValues sort_pvalues(std::span<const double> values) {
    require_probability_vector(values);
    SortedPValues sp;
    sp.values.assign(values.begin(), values.end());
    sp.perm.resize(values.size());
    std::iota(sp.perm.begin(), sp.perm.end(), std::size_t{0});
    std::sort(sp.perm.begin(), sp.perm.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] < values[b];
        return a < b;  // stable on ties
    });
    sp.sorted.resize(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) sp.sorted[k] = values[sp.perm[k]];
    return sp;
}

ThresholdSequence linear_thresholds(std::size_t m, double q, double m0_hat) {
    if (m < 1) throw EmptyInput("m must be >= 1");
    if (!(q > 0.0) || q > 1.0) throw OutOfRange("q must be in (0,1]");
    if (std::isnan(m0_hat) || m0_hat < 0.0) throw OutOfRange("m0_hat must be >= 0");
    if (m0_hat == 0.0) throw DegenerateEstimator("m0_hat = 0: thresholds unbounded");
    ThresholdSequence t;
    t.thresholds.resize(m);
    for (std::size_t i = 1; i <= m; ++i) {
        t.thresholds[i - 1] = static_cast<double>(i) * q / m0_hat;
    }
    return t;
}

RejectionOutcome step_up(const SortedPValues& sp, const ThresholdSequence& t) {
    if (t.size() != sp.m()) throw LengthMismatch("threshold length != m");
    const std::size_t r = detail::step_up_count(
        sp.sorted, [&](std::size_t i) { return t.thresholds[i - 1]; });
    return make_outcome(sp, t, r, StepMode::up);
}

RejectionOutcome step_down(const SortedPValues& sp, const ThresholdSequence& t) {
    if (t.size() != sp.m()) throw LengthMismatch("threshold length != m");
    const std::size_t r = detail::step_down_count(
        sp.sorted, [&](std::size_t i) { return t.thresholds[i - 1]; });
    return make_outcome(sp, t, r, StepMode::down);
}

namespace {

// erfc via the rational Chebyshev approximations of W. J. Cody,
// "Rational Chebyshev approximation for the error function",
// Math. Comp. 23 (1969); coefficients as in the SPECFUN reference
// implementation. Relative error is a few ulps over the whole range,
// which keeps the Phi contract (abs error <= 1e-12) with a wide margin.
double erfc_cody(double x) {
    static const double A[5] = {3.16112374387056560e00, 1.13864154151050156e02,
                                3.77485237685302021e02, 3.20937758913846947e03,
                                1.85777706184603153e-1};
    static const double B[4] = {2.36012909523441209e01, 2.44024637934444173e02,
                                1.28261652607737228e03, 2.84423683343917062e03};
    static const double C[9] = {5.64188496988670089e-1, 8.88314979438837594e00,
                                6.61191906371416295e01, 2.98635138197400131e02,
                                8.81952221241769090e02, 1.71204761263407058e03,
                                2.05107837782607147e03, 1.23033935479799725e03,
                                2.15311535474403846e-8};
    static const double D[8] = {1.57449261107098347e01, 1.17693950891312499e02,
                                5.37181101862009858e02, 1.62138957456669019e03,
                                3.29079923573345963e03, 4.36261909014324716e03,
                                3.43936767414372164e03, 1.23033935480374942e03};
    static const double P[6] = {3.05326634961232344e-1, 3.60344899949804439e-1,
                                1.25781726111229246e-1, 1.60837851487422766e-2,
                                6.58749161529837803e-4, 1.63153871373020978e-2};
    static const double Q[5] = {2.56852019228982242e00, 1.87295284992346047e00,
                                5.27905102951428412e-1, 6.05183413124413191e-2,
                                2.33520497626869185e-3};
    static const double inv_sqrt_pi = 5.6418958354775628695e-1;

    const double ax = std::fabs(x);
    if (ax <= 0.46875) {
        // erfc(x) = 1 - erf(x); erf via the central rational approximation.
        const double y = ax * ax;
        double xnum = A[4] * y;
        double xden = y;
        for (int i = 0; i < 3; ++i) {
            xnum = (xnum + A[i]) * y;
            xden = (xden + B[i]) * y;
        }
        const double erf = x * (xnum + A[3]) / (xden + B[3]);
        return 1.0 - erf;
    }

    double result;
    if (ax <= 4.0) {
        double xnum = C[8] * ax;
        double xden = ax;
        for (int i = 0; i < 7; ++i) {
            xnum = (xnum + C[i]) * ax;
            xden = (xden + D[i]) * ax;
        }
        result = (xnum + C[7]) / (xden + D[7]);
    } else {
        const double y = 1.0 / (ax * ax);
        double xnum = P[5] * y;
        double xden = y;
        for (int i = 0; i < 4; ++i) {
            xnum = (xnum + P[i]) * y;
            xden = (xden + Q[i]) * y;
        }
        result = y * (xnum + P[4]) / (xden + Q[4]);
        result = (inv_sqrt_pi - result) / ax;
    }
    // exp(-x^2) split to avoid the rounding of a single wide product.
    const double ysq = std::trunc(ax * 16.0) / 16.0;
    const double del = (ax - ysq) * (ax + ysq);
    result *= std::exp(-ysq * ysq) * std::exp(-del);

    return (x < 0.0) ? 2.0 - result : result;
}

}  // namespace

double standard_normal_cdf(double x) {
    if (!std::isfinite(x)) throw NonFiniteInput("standard_normal_cdf: non-finite input");
    return 0.5 * erfc_cody(-x * M_SQRT1_2);
}

double standard_normal_quantile(double p) {
    if (!std::isfinite(p)) throw NonFiniteInput("standard_normal_quantile: non-finite input");
    if (!(p > 0.0 && p < 1.0)) throw OutOfRange("standard_normal_quantile: p must be in (0,1)");

    // Wichura's algorithm AS 241 (PPND16), Applied Statistics 37 (1988).
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        static const double a[8] = {
            3.3871328727963666080e0,  1.3314166789178437745e2, 1.9715909503065514427e3,
            1.3731693765509461125e4,  4.5921953931549871457e4, 6.7265770927008700853e4,
            3.3430575583588128105e4,  2.5090809287301226727e3};
        static const double b[7] = {
            4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
            2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
            5.2264952788528545610e3};
        const double r = 0.180625 - q * q;
        double num = a[7];
        double den = b[6];
        for (int i = 6; i >= 0; --i) num = num * r + a[i];
        for (int i = 5; i >= 0; --i) den = den * r + b[i];
        den = den * r + 1.0;
        return q * num / den;
    }

    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        static const double c[8] = {
            1.42343711074968357734e0,  4.63033784615654529590e0,  5.76949722146069140550e0,
            3.64784832476320460504e0,  1.27045825245236838258e0,  2.41780725177450611770e-1,
            2.27238449892691845833e-2, 7.74545014278341407640e-4};
        static const double d[7] = {
            2.05319162663775882187e0,  1.67638483018380384940e0,  6.89767334985100004550e-1,
            1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
            1.05075007164441684324e-9};
        r -= 1.6;
        double num = c[7];
        double den = d[6];
        for (int i = 6; i >= 0; --i) num = num * r + c[i];
        for (int i = 5; i >= 0; --i) den = den * r + d[i];
        den = den * r + 1.0;
        value = num / den;
    } else {
        static const double e[8] = {
            6.65790464350110377720e0,  5.46378491116411436990e0,  1.78482653991729133580e0,
            2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
            2.71155556874348757815e-5, 2.01033439929228813265e-7};
        static const double f[7] = {
            5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
            7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
            2.04426310338993978564e-15};
        r -= 5.0;
        double num = e[7];
        double den = f[6];
        for (int i = 6; i >= 0; --i) num = num * r + e[i];
        for (int i = 5; i >= 0; --i) den = den * r + f[i];
        den = den * r + 1.0;
        value = num / den;
    }
    return (q < 0.0) ? -value : value;
}

}  // namespace fdr
