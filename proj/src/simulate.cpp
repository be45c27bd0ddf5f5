#include "fdr/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <thread>
#include <utility>

#include "fdr/rng.hpp"

namespace fdr {

void validate(const SimConfig& cfg) {
    if (cfg.m < 1) throw EmptyInput("simulation needs m >= 1");
    if (cfg.m0 > cfg.m) throw OutOfRange("m0 exceeds m");
    if (!std::isfinite(cfg.mu1) || cfg.mu1 < 0.0) throw OutOfRange("mu1 must be >= 0");
    if (!std::isfinite(cfg.rho) || cfg.rho < 0.0 || cfg.rho > 1.0) {
        throw OutOfRange("rho must be in [0,1]");
    }
    if (!(cfg.q > 0.0) || cfg.q > 1.0) throw OutOfRange("q must be in (0,1]");
    if (cfg.reps < 1) throw OutOfRange("reps must be >= 1");
}

namespace {

void fill_instance(const SimConfig& cfg, std::uint64_t rep_index, std::vector<double>& z) {
    CounterRng rng(cfg.seed, rep_index);
    z.resize(cfg.m);
    for (std::size_t i = 0; i < cfg.m; ++i) z[i] = rng.next_normal();
    const double common = rng.next_normal();
    const double a = std::sqrt(cfg.rho);
    const double b = std::sqrt(1.0 - cfg.rho);
    for (std::size_t i = 0; i < cfg.m; ++i) {
        z[i] = a * common + b * z[i] + (i >= cfg.m0 ? cfg.mu1 : 0.0);
    }
}

void fill_pvalues(std::span<const double> z, std::vector<double>& p) {
    p.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = 2.0 * standard_normal_cdf(-std::fabs(z[i]));
    }
}

// (p-value, original index) pairs sorted ascending; index breaks ties.
using RankedPValues = std::vector<std::pair<double, std::uint32_t>>;

void sort_ranked(std::span<const double> p, RankedPValues& ranked) {
    ranked.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        ranked[i] = {p[i], static_cast<std::uint32_t>(i)};
    }
    std::sort(ranked.begin(), ranked.end());
}

struct StreamingStats {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::uint64_t n = 0;

    void add(double x) {
        sum += x;
        sum_sq += x * x;
        ++n;
    }
    void merge(const StreamingStats& o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
        n += o.n;
    }
    double mean() const { return (n > 0) ? sum / static_cast<double>(n) : 0.0; }
    double stddev() const {
        if (n < 2) return 0.0;
        const double m = mean();
        const double var =
            (sum_sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1);
        return std::sqrt(std::max(0.0, var));
    }
    double se() const { return (n > 0) ? stddev() / std::sqrt(static_cast<double>(n)) : 0.0; }
};

// Runs `body(block_begin, block_end, block_index)` over [0, total) in fixed
// blocks claimed dynamically; block results must be stored per index so the
// final merge order is independent of scheduling.
template <typename Body>
void run_blocks(std::uint64_t total, std::uint64_t block_size, unsigned threads,
                std::size_t n_blocks, Body&& body) {
    if (threads == 0) threads = std::thread::hardware_concurrency();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_blocks)));

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    const auto worker = [&] {
        for (;;) {
            if (failed.load(std::memory_order_relaxed)) return;
            const std::size_t blk = next.fetch_add(1);
            if (blk >= n_blocks) return;
            const std::uint64_t begin = static_cast<std::uint64_t>(blk) * block_size;
            const std::uint64_t end = std::min<std::uint64_t>(total, begin + block_size);
            try {
                body(begin, end, blk);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };

    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
}

constexpr std::uint64_t kSimBlock = 1024;

// Per-spec plan: everything that does not depend on the realization.
struct SpecPlan {
    ProcedureSpec spec;
    std::vector<double> fixed;  // precomputed thresholds (bh95, oracle, bky)
    bool reject_all = false;    // oracle with m0 = 0
    const CorrectionFactors* cf = nullptr;
    bool needs_sum = false;
    bool needs_log = false;
};

std::vector<SpecPlan> plan_specs(const SimConfig& cfg, std::span<const ProcedureSpec> specs,
                                 const CorrectionTable* table) {
    std::vector<SpecPlan> plans;
    plans.reserve(specs.size());
    for (const ProcedureSpec& raw : specs) {
        ProcedureSpec spec = raw;
        if (spec.kind == ProcedureKind::oracle) spec.m0 = cfg.m0;  // ground truth
        spec.q = cfg.q;
        validate(spec);
        SpecPlan plan;
        plan.spec = spec;
        switch (spec.kind) {
            case ProcedureKind::bh95:
                plan.fixed =
                    linear_thresholds(cfg.m, spec.q, static_cast<double>(cfg.m)).thresholds;
                break;
            case ProcedureKind::oracle:
                if (spec.m0 == 0) {
                    plan.reject_all = true;
                } else {
                    plan.fixed =
                        linear_thresholds(cfg.m, spec.q, static_cast<double>(spec.m0))
                            .thresholds;
                }
                break;
            case ProcedureKind::bky:
                plan.fixed = bky_threshold_sequence(cfg.m, spec.q).thresholds;
                break;
            case ProcedureKind::sts:
                break;
            case ProcedureKind::ibh_sum:
                if (table == nullptr) {
                    throw MissingCorrection("ibhsum needs a correction table (m = " +
                                            std::to_string(cfg.m) + ")");
                }
                plan.cf = &table->at(cfg.m);
                plan.needs_sum = true;
                break;
            case ProcedureKind::ibh_log:
                plan.needs_log = true;
                break;
        }
        plans.push_back(std::move(plan));
    }
    return plans;
}

// Rejection count for one plan on one realization.
std::size_t plan_reject_count(const SpecPlan& plan, const RankedPValues& ranked,
                              double sum_p, double neg_log_sum) {
    const std::size_t m = ranked.size();
    const auto sorted_at = [&](std::size_t i) { return ranked[i - 1].first; };
    const auto up = [&](auto threshold_at) {
        for (std::size_t i = m; i >= 1; --i) {
            if (sorted_at(i) <= threshold_at(i)) return i;
        }
        return std::size_t{0};
    };
    const auto down = [&](auto threshold_at) {
        for (std::size_t i = 1; i <= m; ++i) {
            if (sorted_at(i) > threshold_at(i)) return i - 1;
        }
        return m;
    };

    if (plan.reject_all) return m;

    const ProcedureSpec& spec = plan.spec;
    switch (spec.kind) {
        case ProcedureKind::bh95:
        case ProcedureKind::oracle:
        case ProcedureKind::bky: {
            const auto at = [&](std::size_t i) { return plan.fixed[i - 1]; };
            return (spec.mode == StepMode::up) ? up(at) : down(at);
        }
        case ProcedureKind::sts: {
            // #{p_i <= lambda}, ties inclusive
            const std::size_t r_lambda =
                static_cast<std::size_t>(std::upper_bound(ranked.begin(), ranked.end(),
                                                          std::make_pair(
                                                              spec.lambda,
                                                              std::numeric_limits<
                                                                  std::uint32_t>::max())) -
                                         ranked.begin());
            const double m0_hat = (static_cast<double>(m) + 1.0 -
                                   static_cast<double>(r_lambda)) /
                                  (1.0 - spec.lambda);
            const auto at = [&](std::size_t i) {
                return std::min(static_cast<double>(i) * spec.q / m0_hat, spec.lambda);
            };
            return up(at);  // step-up by definition
        }
        case ProcedureKind::ibh_sum: {
            const double m0_hat =
                plan.cf->c *
                std::min(static_cast<double>(m), std::max(plan.cf->s, sum_p));
            const auto at = [&](std::size_t i) { return static_cast<double>(i) * spec.q / m0_hat; };
            return (spec.mode == StepMode::up) ? up(at) : down(at);
        }
        case ProcedureKind::ibh_log: {
            const double m0_hat = 2.0 + neg_log_sum;
            const auto at = [&](std::size_t i) { return static_cast<double>(i) * spec.q / m0_hat; };
            return (spec.mode == StepMode::up) ? up(at) : down(at);
        }
    }
    throw ValidationError("unknown procedure kind");
}

struct MetricsAcc {
    StreamingStats vr;
    StreamingStats power;
    StreamingStats r;
    std::uint64_t n_bound = 0;
    Histogram hist{1000};

    void merge(const MetricsAcc& o) {
        vr.merge(o.vr);
        power.merge(o.power);
        r.merge(o.r);
        n_bound += o.n_bound;
        hist.merge(o.hist);
    }
};

SimMetrics finalize(const MetricsAcc& acc, const SimConfig& cfg) {
    SimMetrics out;
    out.reps = acc.vr.n;
    out.fdr_hat = acc.vr.mean();
    out.fdr_se = acc.vr.se();
    out.vr_std = acc.vr.stddev();
    if (cfg.m0 < cfg.m) {
        out.power_hat = acc.power.mean();
        out.power_se = acc.power.se();
    }
    const double n = static_cast<double>(acc.vr.n);
    out.p_bound = (acc.vr.n > 0) ? static_cast<double>(acc.n_bound) / n : 0.0;
    out.p_bound_se = (acc.vr.n > 0) ? std::sqrt(out.p_bound * (1.0 - out.p_bound) / n) : 0.0;
    out.mean_r = acc.r.mean();
    out.vr_ecdf = acc.hist;
    return out;
}

}  // namespace

Instance generate_instance(const SimConfig& cfg, std::uint64_t rep_index) {
    validate(cfg);
    Instance inst;
    fill_instance(cfg, rep_index, inst.z);
    inst.is_null.assign(cfg.m, 0);
    std::fill(inst.is_null.begin(), inst.is_null.begin() + static_cast<std::ptrdiff_t>(cfg.m0),
              std::uint8_t{1});
    return inst;
}

std::vector<double> instance_pvalues(std::span<const double> z) {
    for (const double v : z) {
        if (!std::isfinite(v)) throw NonFiniteInput("instance_pvalues: non-finite z-score");
    }
    std::vector<double> p;
    fill_pvalues(z, p);
    return p;
}

ReplicationCounts evaluate_replication(const RejectionOutcome& outcome,
                                       std::span<const std::uint8_t> is_null) {
    const std::size_t m = is_null.size();
    if (outcome.thresholds.size() != m || outcome.rejected_indices.size() != outcome.r) {
        throw LengthMismatch("evaluate_replication: outcome and truth lengths disagree");
    }
    std::size_t m0 = 0;
    for (const std::uint8_t b : is_null) m0 += b;

    ReplicationCounts counts;
    counts.r = outcome.r;
    for (const std::size_t idx : outcome.rejected_indices) {
        if (idx >= m) throw LengthMismatch("evaluate_replication: rejected index out of range");
        counts.v += is_null[idx];
    }
    counts.s = counts.r - counts.v;
    counts.u = m0 - counts.v;
    counts.t = (m - m0) - counts.s;
    counts.vr = static_cast<double>(counts.v) /
                static_cast<double>(std::max<std::size_t>(counts.r, 1));
    return counts;
}

void Histogram::add(double x) {
    const std::size_t n = bins.size();
    std::size_t b;
    if (x >= 1.0) {
        b = n - 1;
    } else if (x <= 0.0) {
        b = 0;
    } else {
        b = static_cast<std::size_t>(x * static_cast<double>(n));
        if (b >= n) b = n - 1;
    }
    ++bins[b];
    ++total;
}

void Histogram::merge(const Histogram& other) {
    if (bins.size() != other.bins.size()) throw LengthMismatch("histogram bin counts differ");
    for (std::size_t i = 0; i < bins.size(); ++i) bins[i] += other.bins[i];
    total += other.total;
}

double Histogram::cdf(double x) const {
    if (total == 0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (x < 0.0) return 0.0;
    const std::size_t upto =
        std::min(bins.size(), static_cast<std::size_t>(x * static_cast<double>(bins.size())));
    std::uint64_t count = 0;
    for (std::size_t b = 0; b < upto; ++b) count += bins[b];
    return static_cast<double>(count) / static_cast<double>(total);
}

std::vector<SimMetrics> run_simulation(const SimConfig& cfg,
                                       std::span<const ProcedureSpec> specs,
                                       const CorrectionTable* table, unsigned threads) {
    validate(cfg);
    if (specs.empty()) throw EmptyInput("run_simulation: no procedures given");
    const std::vector<SpecPlan> plans = plan_specs(cfg, specs, table);

    const std::size_t n_blocks =
        static_cast<std::size_t>((cfg.reps + kSimBlock - 1) / kSimBlock);
    std::vector<std::vector<MetricsAcc>> block_acc(n_blocks,
                                                   std::vector<MetricsAcc>(plans.size()));

    const std::size_t m1 = cfg.m - cfg.m0;
    run_blocks(cfg.reps, kSimBlock, threads, n_blocks,
               [&](std::uint64_t begin, std::uint64_t end, std::size_t blk) {
                   std::vector<double> z, p;
                   RankedPValues ranked;
                   std::vector<MetricsAcc>& acc = block_acc[blk];
                   bool any_sum = false, any_log = false;
                   for (const SpecPlan& plan : plans) {
                       any_sum = any_sum || plan.needs_sum;
                       any_log = any_log || plan.needs_log;
                   }
                   for (std::uint64_t rep = begin; rep < end; ++rep) {
                       try {
                           fill_instance(cfg, rep, z);
                           fill_pvalues(z, p);
                           sort_ranked(p, ranked);
                           double sum_p = 0.0, neg_log_sum = 0.0;
                           if (any_sum) {
                               for (const double v : p) sum_p += v;
                               sum_p *= 2.0;
                           }
                           if (any_log) {
                               for (const double v : p) neg_log_sum -= std::log1p(-v);
                           }
                           for (std::size_t k = 0; k < plans.size(); ++k) {
                               const std::size_t r =
                                   plan_reject_count(plans[k], ranked, sum_p, neg_log_sum);
                               std::size_t v = 0;
                               for (std::size_t j = 0; j < r; ++j) {
                                   v += (ranked[j].second < cfg.m0) ? 1 : 0;
                               }
                               const double vr =
                                   static_cast<double>(v) /
                                   static_cast<double>(std::max<std::size_t>(r, 1));
                               acc[k].vr.add(vr);
                               acc[k].r.add(static_cast<double>(r));
                               if (m1 > 0) {
                                   acc[k].power.add(static_cast<double>(r - v) /
                                                    static_cast<double>(m1));
                               }
                               if (vr <= cfg.q) ++acc[k].n_bound;
                               acc[k].hist.add(vr);
                           }
                       } catch (const std::exception& e) {
                           throw Error("replication " + std::to_string(rep) + ": " + e.what());
                       }
                   }
               });

    std::vector<MetricsAcc> merged(plans.size());
    for (std::size_t blk = 0; blk < n_blocks; ++blk) {
        for (std::size_t k = 0; k < plans.size(); ++k) merged[k].merge(block_acc[blk][k]);
    }
    std::vector<SimMetrics> out;
    out.reserve(plans.size());
    for (const MetricsAcc& acc : merged) out.push_back(finalize(acc, cfg));
    return out;
}

BoundCheckResult thm1_bound_check(const SimConfig& cfg, const EstimatorKind& est,
                                  const CorrectionTable* table, unsigned threads) {
    validate(cfg);
    if (cfg.m0 < 1) throw OutOfRange("thm1_bound_check needs m0 >= 1");
    if (!est.is_scalar() || est.tag == EstimatorKind::Tag::oracle_known) {
        throw ValidationError("bound check needs a data-driven scalar estimator");
    }
    const CorrectionFactors* cf = nullptr;
    if (est.tag == EstimatorKind::Tag::sum_corrected) {
        if (table == nullptr) {
            throw MissingCorrection("corrected sum estimator needs a correction table");
        }
        cf = &table->at(cfg.m);
    }

    struct BlockAcc {
        StreamingStats vr;
        StreamingStats inv;  // 1 / m0_hat with the first (null) p-value removed
    };
    const std::size_t n_blocks =
        static_cast<std::size_t>((cfg.reps + kSimBlock - 1) / kSimBlock);
    std::vector<BlockAcc> block_acc(n_blocks);

    run_blocks(cfg.reps, kSimBlock, threads, n_blocks,
               [&](std::uint64_t begin, std::uint64_t end, std::size_t blk) {
                   std::vector<double> z, p;
                   RankedPValues ranked;
                   BlockAcc& acc = block_acc[blk];
                   for (std::uint64_t rep = begin; rep < end; ++rep) {
                       fill_instance(cfg, rep, z);
                       fill_pvalues(z, p);
                       const double m0_hat = estimate_m0(p, est, cf);
                       sort_ranked(p, ranked);
                       std::size_t rr = 0;
                       for (std::size_t i = ranked.size(); i >= 1; --i) {
                           if (ranked[i - 1].first <=
                               static_cast<double>(i) * cfg.q / m0_hat) {
                               rr = i;
                               break;
                           }
                       }
                       std::size_t v = 0;
                       for (std::size_t j = 0; j < rr; ++j) {
                           v += (ranked[j].second < cfg.m0) ? 1 : 0;
                       }
                       acc.vr.add(static_cast<double>(v) /
                                  static_cast<double>(std::max<std::size_t>(rr, 1)));

                       const std::span<const double> rest(p.data() + 1, p.size() - 1);
                       acc.inv.add(1.0 / estimate_m0_drop_first(rest, est, cf));
                   }
               });

    StreamingStats vr, inv;
    for (const BlockAcc& acc : block_acc) {
        vr.merge(acc.vr);
        inv.merge(acc.inv);
    }
    const double scale = static_cast<double>(cfg.m0) * cfg.q;
    return BoundCheckResult{vr.mean(), vr.se(), scale * inv.mean(), scale * inv.se()};
}

CounterexampleResult counterexample_scenario(double epsilon, std::size_t reps,
                                             std::uint64_t seed) {
    if (!(epsilon > 0.0) || !(epsilon < 1.0)) throw OutOfRange("epsilon must be in (0,1)");
    if (reps < 1) throw OutOfRange("reps must be >= 1");

    struct BlockAcc {
        StreamingStats vr1;
        StreamingStats vr2;
    };
    constexpr std::uint64_t kBlock = 8192;
    const std::size_t n_blocks = static_cast<std::size_t>((reps + kBlock - 1) / kBlock);
    std::vector<BlockAcc> block_acc(n_blocks);

    run_blocks(reps, kBlock, 0, n_blocks,
               [&](std::uint64_t begin, std::uint64_t end, std::size_t blk) {
                   BlockAcc& acc = block_acc[blk];
                   for (std::uint64_t rep = begin; rep < end; ++rep) {
                       CounterRng rng(seed, rep);
                       double p[3];
                       p[0] = rng.next_uniform();  // the null p-value
                       for (int i = 1; i < 3; ++i) {
                           p[i] = (rng.next_uniform() < epsilon) ? epsilon * rng.next_uniform()
                                                                 : epsilon;
                       }
                       // ranks with ties broken by original index
                       int lowest = 0, second = -1;
                       for (int i = 1; i < 3; ++i) {
                           if (p[i] < p[lowest]) {
                               second = lowest;
                               lowest = i;
                           } else if (second < 0 || p[i] < p[second]) {
                               second = i;
                           }
                       }
                       const bool null_first = (lowest == 0);
                       const bool null_in_two = (lowest == 0 || second == 0);
                       acc.vr1.add(null_first ? 1.0 : 0.0);
                       acc.vr2.add(null_in_two ? 0.5 : 0.0);
                   }
               });

    StreamingStats vr1, vr2;
    for (const BlockAcc& acc : block_acc) {
        vr1.merge(acc.vr1);
        vr2.merge(acc.vr2);
    }
    return CounterexampleResult{vr1.mean(), vr1.se(), vr2.mean(), vr2.se()};
}

std::vector<SweepRow> sweep(const SweepRequest& request, const CorrectionTable* table,
                            unsigned threads) {
    if (request.mu1_grid.empty() || request.m0_frac_grid.empty()) {
        throw EmptyInput("sweep grid is empty");
    }
    if (request.specs.empty()) throw EmptyInput("sweep: no procedures given");
    if (request.metrics.empty()) throw EmptyInput("sweep: no metrics requested");
    for (const double f : request.m0_frac_grid) {
        if (!(f >= 0.0) || f > 1.0) throw OutOfRange("m0 fraction must be in [0,1]");
    }
    static const std::vector<std::string> known = {"fdr", "power", "vr_std", "p_bound",
                                                   "mean_r"};
    for (const std::string& name : request.metrics) {
        if (std::find(known.begin(), known.end(), name) == known.end()) {
            throw OutOfRange("unknown metric: " + name);
        }
    }

    std::vector<SweepRow> rows;
    for (const double mu1 : request.mu1_grid) {
        for (const double frac : request.m0_frac_grid) {
            SimConfig cfg = request.base;
            cfg.mu1 = mu1;
            cfg.m0 = std::min<std::size_t>(
                cfg.m, static_cast<std::size_t>(
                           std::llround(frac * static_cast<double>(cfg.m))));
            const std::vector<SimMetrics> metrics =
                run_simulation(cfg, request.specs, table, threads);
            for (std::size_t k = 0; k < request.specs.size(); ++k) {
                const SimMetrics& sm = metrics[k];
                for (const std::string& name : request.metrics) {
                    SweepRow row;
                    row.mu1 = mu1;
                    row.m0_frac = frac;
                    row.procedure = request.specs[k].name();
                    row.mode = request.specs[k].mode_name();
                    row.metric = name;
                    if (name == "fdr") {
                        row.value = sm.fdr_hat;
                        row.se = sm.fdr_se;
                    } else if (name == "power") {
                        row.value = sm.power_hat;
                        row.se = sm.power_se;
                    } else if (name == "vr_std") {
                        row.value = sm.vr_std;
                    } else if (name == "p_bound") {
                        row.value = sm.p_bound;
                        row.se = sm.p_bound_se;
                    } else {
                        row.value = sm.mean_r;
                    }
                    rows.push_back(std::move(row));
                }
            }
        }
    }
    return rows;
}

}  // namespace fdr
