#include "fdr/cli_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace fdr {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_double(const std::string& field, const std::string& origin, std::size_t lineno) {
    const std::string text = trim(field);
    if (text.empty()) {
        throw ParseError(origin + ":" + std::to_string(lineno) + ": empty value");
    }
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size()) {
        throw ParseError(origin + ":" + std::to_string(lineno) + ": not a number: \"" + text +
                         "\"");
    }
    return v;
}

double parse_probability(const std::string& field, const std::string& origin,
                         std::size_t lineno) {
    const double v = parse_double(field, origin, lineno);
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw OutOfRange(origin + ":" + std::to_string(lineno) + ": value outside [0,1]: " +
                         trim(field));
    }
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    for (const char c : s) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

PValueFormat infer_format(const std::filesystem::path& path) {
    return (path.extension() == ".csv") ? PValueFormat::csv : PValueFormat::plain;
}

std::vector<double> read_pvalues_plain(std::istream& in, const std::string& origin) {
    std::vector<double> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string text = trim(strip_cr(line));
        if (text.empty() || text[0] == '#') continue;
        values.push_back(parse_probability(text, origin, lineno));
    }
    if (values.empty()) throw EmptyInput(origin + ": no p-values found");
    return values;
}

std::vector<double> read_pvalues_csv(std::istream& in, const std::string& column,
                                     const std::string& origin) {
    std::string line;
    std::size_t lineno = 0;

    // header (comment lines before it are tolerated, so our own reports can
    // be fed back in)
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string text = trim(strip_cr(line));
        if (text.empty() || text[0] == '#') continue;
        header = split_csv(text);
        break;
    }
    if (header.empty()) throw EmptyInput(origin + ": missing CSV header");

    std::size_t col = header.size();
    if (all_digits(column)) {
        col = static_cast<std::size_t>(std::strtoull(column.c_str(), nullptr, 10));
        if (col >= header.size()) {
            throw ParseError(origin + ": column index " + column + " out of range (" +
                             std::to_string(header.size()) + " columns)");
        }
    } else {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == column) {
                col = i;
                break;
            }
        }
        if (col == header.size()) {
            throw ParseError(origin + ": no column named \"" + column + "\"");
        }
    }

    std::vector<double> values;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string text = trim(strip_cr(line));
        if (text.empty() || text[0] == '#') continue;
        const std::vector<std::string> fields = split_csv(text);
        if (col >= fields.size()) {
            throw ParseError(origin + ":" + std::to_string(lineno) + ": row has " +
                             std::to_string(fields.size()) + " fields, need column " +
                             std::to_string(col + 1));
        }
        values.push_back(parse_probability(fields[col], origin, lineno));
    }
    if (values.empty()) throw EmptyInput(origin + ": no p-values found");
    return values;
}

std::vector<double> read_pvalues(const PValueFile& file) {
    std::ifstream in(file.path);
    if (!in) throw IoError("cannot open: " + file.path.string());
    if (file.format == PValueFormat::plain) {
        return read_pvalues_plain(in, file.path.string());
    }
    return read_pvalues_csv(in, file.column, file.path.string());
}

std::string format_value(double v, int significant) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", significant, v);
    return buf;
}

void write_pvalues(std::ostream& out, std::span<const double> values) {
    char buf[64];
    for (const double v : values) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf << '\n';
    }
}

void write_rejection_report(std::ostream& out, const RejectionOutcome& outcome,
                            std::span<const double> pvalues, const ProcedureSpec& spec) {
    out << "# procedure: " << spec.name() << '\n';
    out << "# mode: " << (outcome.mode == StepMode::up ? "up" : "down") << '\n';
    out << "# q: " << format_value(spec.q) << '\n';
    out << "# m: " << pvalues.size() << '\n';
    out << "# m0_hat: " << format_value(outcome.m0_hat) << '\n';
    out << "# r: " << outcome.r << '\n';
    out << "index,pvalue\n";
    for (const std::size_t idx : outcome.rejected_indices) {
        out << (idx + 1) << ',' << format_value(pvalues[idx]) << '\n';
    }
}

void write_qvalue_report(std::ostream& out, std::span<const double> pvalues,
                         const QValueVector& qv) {
    out << "# m: " << pvalues.size() << '\n';
    out << "# estimator: " << (qv.estimator_used ? qv.estimator_used->name() : "none") << '\n';
    out << "# m0_hat: " << format_value(qv.m0_hat) << '\n';
    out << "index,pvalue,qvalue\n";
    for (std::size_t i = 0; i < pvalues.size(); ++i) {
        out << (i + 1) << ',' << format_value(pvalues[i]) << ',' << format_value(qv.qvals[i])
            << '\n';
    }
}

void write_metrics_report(std::ostream& out, const SimConfig& cfg,
                          std::span<const ProcedureSpec> specs,
                          std::span<const SimMetrics> metrics) {
    out << "# m: " << cfg.m << '\n';
    out << "# m0: " << cfg.m0 << '\n';
    out << "# mu1: " << format_value(cfg.mu1) << '\n';
    out << "# rho: " << format_value(cfg.rho) << '\n';
    out << "# q: " << format_value(cfg.q) << '\n';
    out << "# reps: " << cfg.reps << '\n';
    out << "# seed: " << cfg.seed << '\n';
    out << "# normals: inverse-cdf\n";
    out << "procedure,mode,metric,value,se\n";
    for (std::size_t k = 0; k < specs.size(); ++k) {
        const SimMetrics& sm = metrics[k];
        const std::string tag =
            std::string(specs[k].name()) + ',' + specs[k].mode_name() + ',';
        out << tag << "fdr," << format_value(sm.fdr_hat) << ',' << format_value(sm.fdr_se)
            << '\n';
        out << tag << "power,";
        if (sm.power_hat) {
            out << format_value(*sm.power_hat) << ',' << format_value(*sm.power_se);
        } else {
            out << ',';
        }
        out << '\n';
        out << tag << "vr_std," << format_value(sm.vr_std) << ",\n";
        out << tag << "p_bound," << format_value(sm.p_bound) << ','
            << format_value(sm.p_bound_se) << '\n';
        out << tag << "mean_r," << format_value(sm.mean_r) << ",\n";
    }
}

void write_ecdf(std::ostream& out, const Histogram& hist) {
    out << "vr_upper,cum_fraction\n";
    std::uint64_t cum = 0;
    const double n = static_cast<double>(hist.bins.size());
    for (std::size_t b = 0; b < hist.bins.size(); ++b) {
        cum += hist.bins[b];
        const double frac =
            (hist.total > 0) ? static_cast<double>(cum) / static_cast<double>(hist.total) : 0.0;
        out << format_value(static_cast<double>(b + 1) / n) << ',' << format_value(frac)
            << '\n';
    }
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
    out << "mu1,m0_frac,procedure,mode,metric,value,se\n";
    for (const SweepRow& row : rows) {
        out << format_value(row.mu1) << ',' << format_value(row.m0_frac) << ','
            << row.procedure << ',' << row.mode << ',' << row.metric << ',';
        if (row.value) out << format_value(*row.value);
        out << ',';
        if (row.se) out << format_value(*row.se);
        out << '\n';
    }
}

void write_compare_report(std::ostream& out, const CompareReport& report) {
    for (const CompareReport::Dataset& ds : report.datasets) {
        if (!ds.error.empty()) out << "# error dataset " << ds.name << ": " << ds.error << '\n';
    }
    out << "dataset,m,q,procedure,r,r_bh95,ratio\n";
    for (const CompareReport::Dataset& ds : report.datasets) {
        if (!ds.error.empty()) continue;
        for (std::size_t qi = 0; qi < report.q_levels.size(); ++qi) {
            for (std::size_t pi = 0; pi < report.procedures.size(); ++pi) {
                out << ds.name << ',' << ds.m << ',' << format_value(report.q_levels[qi])
                    << ',' << report.procedures[pi].name() << ',' << ds.r[qi][pi] << ','
                    << ds.r_bh95[qi] << ',';
                if (ds.r_bh95[qi] == 0) {
                    out << "undef";
                } else {
                    out << format_value(static_cast<double>(ds.r[qi][pi]) /
                                        static_cast<double>(ds.r_bh95[qi]));
                }
                out << '\n';
            }
        }
    }
    out << "# mean ratio vs bh95 across datasets (sample st.d.)\n";
    out << "q,procedure,mean,stddev,n_used,n_undefined\n";
    for (std::size_t qi = 0; qi < report.q_levels.size(); ++qi) {
        for (std::size_t pi = 0; pi < report.procedures.size(); ++pi) {
            const CompareReport::Cell& cell = report.cells[qi][pi];
            out << format_value(report.q_levels[qi]) << ',' << report.procedures[pi].name()
                << ',';
            if (std::isnan(cell.mean)) {
                out << "undef,";
            } else {
                out << format_value(cell.mean) << ',';
            }
            if (!std::isnan(cell.stddev)) out << format_value(cell.stddev);
            out << ',' << cell.n_used << ',' << cell.n_undefined << '\n';
        }
    }
}

}  // namespace fdr
