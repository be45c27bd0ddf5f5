#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fdr/procedures.hpp"
#include "fdr/simulate.hpp"

namespace fdr {

enum class PValueFormat { plain, csv };

/// Input sources are either plain text (one value per line, '#' comments and
/// blank lines ignored) or CSV with a header; `column` selects the CSV
/// column by name, or by 0-based position when it is all digits.
struct PValueFile {
    std::filesystem::path path;
    PValueFormat format = PValueFormat::plain;
    std::string column = "pval";
};

/// .csv extension selects CSV, anything else plain.
PValueFormat infer_format(const std::filesystem::path& path);

std::vector<double> read_pvalues(const PValueFile& file);
std::vector<double> read_pvalues_plain(std::istream& in, const std::string& origin);
std::vector<double> read_pvalues_csv(std::istream& in, const std::string& column,
                                     const std::string& origin);

/// Plain format at full precision, so a read-back is bit-exact.
void write_pvalues(std::ostream& out, std::span<const double> values);

/// Rejection report: '#' metadata lines (procedure, mode, q, m, m0_hat, r)
/// followed by "index,pvalue" rows for the rejected hypotheses, indices
/// ascending and 1-based.
void write_rejection_report(std::ostream& out, const RejectionOutcome& outcome,
                            std::span<const double> pvalues, const ProcedureSpec& spec);

/// "index,pvalue,qvalue" rows in original order (1-based indices).
void write_qvalue_report(std::ostream& out, std::span<const double> pvalues,
                         const QValueVector& qv);

/// One "metric,value,se" block per procedure, prefixed with '#' metadata.
void write_metrics_report(std::ostream& out, const SimConfig& cfg,
                          std::span<const ProcedureSpec> specs,
                          std::span<const SimMetrics> metrics);

/// "vr_upper,cum_fraction" rows of the V/R+ histogram.
void write_ecdf(std::ostream& out, const Histogram& hist);

/// Header "mu1,m0_frac,procedure,mode,metric,value,se"; empty cells for
/// unavailable values.
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

/// Per-dataset rejection counts and ratios, then the mean/st.d. summary per
/// (q, procedure); undefined ratios print as "undef".
void write_compare_report(std::ostream& out, const CompareReport& report);

/// Default report formatting: %.*g with 6 significant digits.
std::string format_value(double v, int significant = 6);

}  // namespace fdr
