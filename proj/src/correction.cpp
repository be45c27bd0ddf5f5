#include "fdr/correction.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace fdr {

namespace {

constexpr int kPointsPerSigma = 24;   // Simpson resolution for the h(t)/t part
constexpr double kTailSigmas = 10.0;  // integration window around the mean
constexpr char kFileHeader[] = "fdr-correction-table v1";

struct Gaussian {
    double mu;
    double sigma;
};

Gaussian uniform_sum_gaussian(std::size_t m0) {
    const double n = static_cast<double>(m0) - 1.0;  // number of 2*p terms
    return {n, std::sqrt(n / 3.0)};
}

// int_lo^hi density(t)/t dt by composite Simpson.
double integral_density_over_t(const Gaussian& g, double lo, double hi) {
    if (!(lo < hi)) return 0.0;
    long n = std::lround(std::ceil((hi - lo) / g.sigma * kPointsPerSigma));
    n = std::max<long>(n, 16);
    if (n % 2 != 0) ++n;
    const double h = (hi - lo) / static_cast<double>(n);
    const double norm = 1.0 / (g.sigma * std::sqrt(2.0 * M_PI));
    const auto f = [&](double t) {
        const double u = (t - g.mu) / g.sigma;
        return norm * std::exp(-0.5 * u * u) / t;
    };
    double acc = f(lo) + f(hi);
    for (long k = 1; k < n; ++k) {
        acc += f(lo + h * static_cast<double>(k)) * ((k % 2 != 0) ? 4.0 : 2.0);
    }
    return acc * h / 3.0;
}

}  // namespace

double uniform_sum_density(std::size_t m0, double t) {
    if (m0 == 0) throw OutOfRange("uniform_sum_density: m0 must be >= 1");
    if (!std::isfinite(t)) throw NonFiniteInput("uniform_sum_density: non-finite t");
    if (m0 == 1) {
        // point mass at 0
        return (t == 0.0) ? std::numeric_limits<double>::infinity() : 0.0;
    }
    const Gaussian g = uniform_sum_gaussian(m0);
    const double u = (t - g.mu) / g.sigma;
    return std::exp(-0.5 * u * u) / (g.sigma * std::sqrt(2.0 * M_PI));
}

double correction_integral(std::size_t m, std::size_t m0, double s) {
    if (m0 < 1 || m0 > m) throw OutOfRange("correction_integral: need 1 <= m0 <= m");
    if (!(s > 0.0) || !(s < static_cast<double>(m))) {
        throw OutOfRange("correction_integral: need 0 < s < m");
    }
    if (m0 == 1) return 1.0 / s;  // all mass lands in the 1/s term

    const Gaussian g = uniform_sum_gaussian(m0);
    const double dm = static_cast<double>(m);
    const double below_s = standard_normal_cdf((s - g.mu) / g.sigma);
    const double above_m = 1.0 - standard_normal_cdf((dm - g.mu) / g.sigma);
    const double lo = std::max(s, g.mu - kTailSigmas * g.sigma);
    const double hi = std::min(dm, g.mu + kTailSigmas * g.sigma);
    const double middle = integral_density_over_t(g, lo, hi);
    return static_cast<double>(m0) * (below_s / s + middle + above_m / dm);
}

namespace {

// max over the m0 grid {1, 1+stride, ...} u {m}; reports the arg as well.
double max_over_m0(std::size_t m, double s, std::size_t stride, std::size_t* argmax) {
    double best = -1.0;
    std::size_t arg = 1;
    for (std::size_t m0 = 1; m0 < m; m0 += stride) {
        const double c = correction_integral(m, m0, s);
        if (c > best) {
            best = c;
            arg = m0;
        }
    }
    const double at_m = correction_integral(m, m, s);
    if (at_m > best) {
        best = at_m;
        arg = m;
    }
    if (argmax != nullptr) *argmax = arg;
    return best;
}

}  // namespace

CorrectionFactors optimal_correction(std::size_t m) {
    if (m < 2) throw OutOfRange("optimal_correction: m must be >= 2");

    // Integer grids up to m = 2000; strided scan with step-1 refinement above.
    const std::size_t stride =
        (m <= 2000) ? 1 : static_cast<std::size_t>((m + 1999) / 2000);

    // Plateau value: the m0 = m candidate, whose s-dependence is below double
    // precision while s stays well under m. The search stops at the first s
    // whose max over m0 has descended to this value.
    const double plateau = correction_integral(m, m, 1.0);
    const double cutoff = plateau * (1.0 + 1e-10);

    std::size_t s_coarse = 0;
    bool found = false;
    double fallback_best = std::numeric_limits<double>::infinity();
    std::size_t fallback_s = 1;
    for (std::size_t s = stride; s < m; s += stride) {
        const double mx = max_over_m0(m, static_cast<double>(s), stride, nullptr);
        if (mx < fallback_best) {
            fallback_best = mx;
            fallback_s = s;
        }
        if (mx <= cutoff) {
            s_coarse = s;
            found = true;
            break;
        }
    }
    std::size_t s_final = found ? s_coarse : fallback_s;
    if (found && stride > 1) {
        for (std::size_t s = (s_coarse > stride) ? s_coarse - stride + 1 : 1; s <= s_coarse;
             ++s) {
            if (max_over_m0(m, static_cast<double>(s), stride, nullptr) <= cutoff) {
                s_final = s;
                break;
            }
        }
    }

    // Certify the maximum at the chosen s; on a strided grid, also refine a
    // step-1 window around the coarse argmax.
    std::size_t arg = m;
    double c = max_over_m0(m, static_cast<double>(s_final), stride, &arg);
    if (stride > 1) {
        const std::size_t lo = (arg > stride) ? arg - stride : 1;
        const std::size_t hi = std::min(m, arg + stride);
        for (std::size_t m0 = lo; m0 <= hi; ++m0) {
            c = std::max(c, correction_integral(m, m0, static_cast<double>(s_final)));
        }
    }

    // Quantize to the table file resolution (8 significant digits) so that
    // computed, saved and re-loaded factors are identical bit for bit.
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.8g", c);
    c = std::strtod(buf, nullptr);

    return CorrectionFactors{m, c, static_cast<double>(s_final)};
}

CorrectionTable CorrectionTable::compute(std::span<const std::size_t> ms, unsigned threads) {
    std::vector<std::size_t> todo(ms.begin(), ms.end());
    std::sort(todo.begin(), todo.end());
    todo.erase(std::unique(todo.begin(), todo.end()), todo.end());

    if (threads == 0) threads = std::thread::hardware_concurrency();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(todo.size())));

    std::vector<CorrectionFactors> results(todo.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= results.size()) return;
                try {
                    results[i] = optimal_correction(todo[i]);
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);

    CorrectionTable table;
    for (const auto& cf : results) table.insert(cf);
    return table;
}

void CorrectionTable::insert(const CorrectionFactors& cf) { rows_[cf.m] = cf; }

const CorrectionFactors* CorrectionTable::find(std::size_t m) const noexcept {
    const auto it = rows_.find(m);
    return (it == rows_.end()) ? nullptr : &it->second;
}

const CorrectionFactors& CorrectionTable::at(std::size_t m) const {
    const CorrectionFactors* cf = find(m);
    if (cf == nullptr) {
        throw MissingCorrection("no correction factors for m = " + std::to_string(m));
    }
    return *cf;
}

const CorrectionFactors& CorrectionTable::get_or_compute(std::size_t m) {
    const auto it = rows_.find(m);
    if (it != rows_.end()) return it->second;
    return rows_.emplace(m, optimal_correction(m)).first->second;
}

std::vector<std::size_t> CorrectionTable::ms() const {
    std::vector<std::size_t> out;
    out.reserve(rows_.size());
    for (const auto& [m, cf] : rows_) out.push_back(m);
    return out;
}

void CorrectionTable::save(std::ostream& out) const {
    out << kFileHeader << '\n';
    char buf[64];
    for (const auto& [m, cf] : rows_) {
        if (cf.s == std::floor(cf.s)) {
            std::snprintf(buf, sizeof buf, "%zu,%.8g,%lld", m, cf.c,
                          static_cast<long long>(cf.s));
        } else {
            std::snprintf(buf, sizeof buf, "%zu,%.8g,%.17g", m, cf.c, cf.s);
        }
        out << buf << '\n';
    }
}

void CorrectionTable::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    save(out);
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

CorrectionTable CorrectionTable::load(std::istream& in, const std::string& origin) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(origin + ": empty correction table file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kFileHeader) {
        throw VersionMismatch(origin + ": unsupported header \"" + line + "\"");
    }
    CorrectionTable table;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        unsigned long long m = 0;
        double c = 0.0, s = 0.0;
        char extra = 0;
        if (std::sscanf(line.c_str(), "%llu,%lf,%lf%c", &m, &c, &s, &extra) != 3) {
            throw ParseError(origin + ":" + std::to_string(lineno) +
                             ": expected \"m,C,s\", got \"" + line + "\"");
        }
        if (m < 2 || !(c > 0.0) || !(s > 0.0) || !(s < static_cast<double>(m))) {
            throw ParseError(origin + ":" + std::to_string(lineno) +
                             ": values out of range in \"" + line + "\"");
        }
        table.insert(CorrectionFactors{static_cast<std::size_t>(m), c, s});
    }
    return table;
}

CorrectionTable CorrectionTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open correction table: " + path.string());
    return load(in, path.string());
}

}  // namespace fdr
