#include "fdr/procedures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

namespace fdr {

ProcedureSpec ProcedureSpec::bh95(double q, StepMode mode) {
    return {ProcedureKind::bh95, mode, q, 0.5, 0};
}
ProcedureSpec ProcedureSpec::oracle(double q, std::size_t m0, StepMode mode) {
    return {ProcedureKind::oracle, mode, q, 0.5, m0};
}
ProcedureSpec ProcedureSpec::bky(double q) {
    return {ProcedureKind::bky, StepMode::down, q, 0.5, 0};
}
ProcedureSpec ProcedureSpec::sts(double q, double lambda) {
    return {ProcedureKind::sts, StepMode::up, q, lambda, 0};
}
ProcedureSpec ProcedureSpec::ibh_sum(double q, StepMode mode) {
    return {ProcedureKind::ibh_sum, mode, q, 0.5, 0};
}
ProcedureSpec ProcedureSpec::ibh_log(double q, StepMode mode) {
    return {ProcedureKind::ibh_log, mode, q, 0.5, 0};
}

const char* ProcedureSpec::name() const noexcept {
    switch (kind) {
        case ProcedureKind::bh95: return "bh95";
        case ProcedureKind::oracle: return "orc";
        case ProcedureKind::bky: return "bky";
        case ProcedureKind::sts: return "sts";
        case ProcedureKind::ibh_sum: return "ibhsum";
        case ProcedureKind::ibh_log: return "ibhlog";
    }
    return "?";
}

const char* ProcedureSpec::mode_name() const noexcept {
    return mode == StepMode::up ? "up" : "down";
}

void validate(const ProcedureSpec& spec) {
    if (!(spec.q > 0.0) || spec.q > 1.0) throw OutOfRange("q must be in (0,1]");
    if (spec.kind == ProcedureKind::sts) {
        if (!(spec.lambda > 0.0) || !(spec.lambda < 1.0)) {
            throw LambdaOutOfRange("lambda must be strictly inside (0,1)");
        }
        if (spec.mode != StepMode::up) {
            throw ValidationError("sts is a step-up procedure");
        }
    }
    if (spec.kind == ProcedureKind::bky && spec.mode != StepMode::down) {
        throw ValidationError("bky is a step-down procedure");
    }
}

namespace {

RejectionOutcome reject_all(const SortedPValues& sp, const ProcedureSpec& spec) {
    RejectionOutcome out;
    out.r = sp.m();
    out.rejected_indices.resize(sp.m());
    std::iota(out.rejected_indices.begin(), out.rejected_indices.end(), std::size_t{0});
    out.m0_hat = 0.0;
    out.mode = spec.mode;
    out.thresholds.thresholds.assign(sp.m(), std::numeric_limits<double>::infinity());
    out.thresholds.label = spec.name();
    return out;
}

RejectionOutcome run_engine(const SortedPValues& sp, ThresholdSequence t,
                            const ProcedureSpec& spec, double m0_hat) {
    t.label = spec.name();
    RejectionOutcome out =
        (spec.mode == StepMode::up) ? step_up(sp, t) : step_down(sp, t);
    out.m0_hat = m0_hat;
    return out;
}

const CorrectionFactors& factors_for(std::size_t m, const CorrectionTable* table) {
    if (table == nullptr) {
        throw MissingCorrection("ibhsum needs a correction table (m = " + std::to_string(m) +
                                ")");
    }
    return table->at(m);
}

}  // namespace

RejectionOutcome apply_procedure(const SortedPValues& sp, const ProcedureSpec& spec,
                                 const CorrectionTable* table) {
    validate(spec);
    const std::size_t m = sp.m();
    const double dm = static_cast<double>(m);

    switch (spec.kind) {
        case ProcedureKind::bh95:
            return run_engine(sp, linear_thresholds(m, spec.q, dm), spec, dm);

        case ProcedureKind::oracle: {
            if (spec.m0 > m) throw OutOfRange("oracle m0 exceeds m");
            if (spec.m0 == 0) return reject_all(sp, spec);  // thresholds unbounded
            const double m0 = static_cast<double>(spec.m0);
            return run_engine(sp, linear_thresholds(m, spec.q, m0), spec, m0);
        }

        case ProcedureKind::bky: {
            RejectionOutcome out = run_engine(sp, bky_threshold_sequence(m, spec.q), spec, 0.0);
            // rank-dependent estimator; record its value at the decision rank
            const double rank = static_cast<double>(std::max<std::size_t>(out.r, 1));
            out.m0_hat = dm + 1.0 - rank * (1.0 - spec.q);
            return out;
        }

        case ProcedureKind::sts: {
            const double m0_hat = estimate_m0_sts(sp.values, spec.lambda);
            ThresholdSequence t = linear_thresholds(m, spec.q, m0_hat);
            for (double& x : t.thresholds) x = std::min(x, spec.lambda);  // no rejection above lambda
            return run_engine(sp, std::move(t), spec, m0_hat);
        }

        case ProcedureKind::ibh_sum: {
            const double m0_hat = estimate_m0_sum_corrected(sp.values, factors_for(m, table));
            return run_engine(sp, linear_thresholds(m, spec.q, m0_hat), spec, m0_hat);
        }

        case ProcedureKind::ibh_log: {
            const double m0_hat = estimate_m0_log_corrected(sp.values);
            return run_engine(sp, linear_thresholds(m, spec.q, m0_hat), spec, m0_hat);
        }
    }
    throw ValidationError("unknown procedure kind");
}

RejectionOutcome apply_procedure(std::span<const double> p, const ProcedureSpec& spec,
                                 const CorrectionTable* table) {
    return apply_procedure(sort_pvalues(p), spec, table);
}

QValueVector bh_qvalues(std::span<const double> p) {
    const SortedPValues sp = sort_pvalues(p);
    const std::size_t m = sp.m();
    const double dm = static_cast<double>(m);

    std::vector<double> sorted_q(m);
    double running = 1.0;
    for (std::size_t j = m; j >= 1; --j) {
        running = std::min(running, dm * sp.sorted[j - 1] / static_cast<double>(j));
        sorted_q[j - 1] = running;
    }

    QValueVector out;
    out.qvals.resize(m);
    for (std::size_t k = 0; k < m; ++k) out.qvals[sp.perm[k]] = sorted_q[k];
    out.m0_hat = dm;
    return out;
}

QValueVector adaptive_qvalues(std::span<const double> p, const EstimatorKind& est,
                              const CorrectionTable* table) {
    if (!est.is_scalar()) throw ValidationError("adaptive q-values need a scalar estimator");
    QValueVector out = bh_qvalues(p);
    const CorrectionFactors* cf = nullptr;
    if (est.tag == EstimatorKind::Tag::sum_corrected) {
        cf = &factors_for(p.size(), table);
    }
    const double m0_hat = estimate_m0(p, est, cf);
    const double scale = m0_hat / static_cast<double>(p.size());
    for (double& qv : out.qvals) qv = std::min(1.0, qv * scale);
    out.estimator_used = est;
    out.m0_hat = m0_hat;
    return out;
}

CompareReport compare_datasets(
    std::vector<std::pair<std::string, std::vector<double>>> datasets,
    std::span<const ProcedureSpec> procedures, std::span<const double> q_levels,
    const CorrectionTable* table, unsigned threads) {
    if (datasets.empty()) throw EmptyInput("compare_datasets: no datasets");
    if (q_levels.empty()) throw EmptyInput("compare_datasets: no q levels");
    for (const double q : q_levels) {
        if (!(q > 0.0) || q > 1.0) throw OutOfRange("q must be in (0,1]");
    }

    std::sort(datasets.begin(), datasets.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    CompareReport report;
    report.q_levels.assign(q_levels.begin(), q_levels.end());
    report.procedures.assign(procedures.begin(), procedures.end());
    report.datasets.resize(datasets.size());

    if (threads == 0) threads = std::thread::hardware_concurrency();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(datasets.size())));

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (;;) {
            const std::size_t d = next.fetch_add(1);
            if (d >= datasets.size()) return;
            CompareReport::Dataset& row = report.datasets[d];
            row.name = datasets[d].first;
            try {
                const SortedPValues sp = sort_pvalues(datasets[d].second);
                row.m = sp.m();
                row.r_bh95.resize(q_levels.size());
                row.r.assign(q_levels.size(), std::vector<std::size_t>(procedures.size()));
                for (std::size_t qi = 0; qi < q_levels.size(); ++qi) {
                    row.r_bh95[qi] =
                        apply_procedure(sp, ProcedureSpec::bh95(q_levels[qi]), table).r;
                    for (std::size_t pi = 0; pi < procedures.size(); ++pi) {
                        ProcedureSpec spec = procedures[pi];
                        spec.q = q_levels[qi];
                        row.r[qi][pi] = apply_procedure(sp, spec, table).r;
                    }
                }
            } catch (const std::exception& e) {
                row.error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    report.cells.assign(q_levels.size(),
                        std::vector<CompareReport::Cell>(procedures.size()));
    for (std::size_t qi = 0; qi < q_levels.size(); ++qi) {
        for (std::size_t pi = 0; pi < procedures.size(); ++pi) {
            CompareReport::Cell& cell = report.cells[qi][pi];
            std::vector<double> ratios;
            for (const CompareReport::Dataset& row : report.datasets) {
                if (!row.error.empty()) continue;
                if (row.r_bh95[qi] == 0) {
                    ++cell.n_undefined;
                    continue;
                }
                ratios.push_back(static_cast<double>(row.r[qi][pi]) /
                                 static_cast<double>(row.r_bh95[qi]));
            }
            cell.n_used = ratios.size();
            if (ratios.empty()) {
                cell.mean = std::numeric_limits<double>::quiet_NaN();
                cell.stddev = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            double sum = 0.0;
            for (const double x : ratios) sum += x;
            cell.mean = sum / static_cast<double>(ratios.size());
            if (ratios.size() >= 2) {
                double ss = 0.0;
                for (const double x : ratios) ss += (x - cell.mean) * (x - cell.mean);
                cell.stddev = std::sqrt(ss / static_cast<double>(ratios.size() - 1));
            } else {
                cell.stddev = std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    return report;
}

}  // namespace fdr
