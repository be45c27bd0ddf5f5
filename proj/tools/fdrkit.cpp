// fdrkit: FDR procedures (BH95, oracle, BKY, STS, IBHsum, IBHlog), q-values,
// correction-factor tables, and the Monte Carlo study driver.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fdr/cli_io.hpp"
#include "fdr/correction.hpp"
#include "fdr/procedures.hpp"
#include "fdr/simulate.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, sep)) parts.push_back(part);
    return parts;
}

fdr::StepMode parse_mode(const std::string& text) {
    if (text == "up") return fdr::StepMode::up;
    if (text == "down") return fdr::StepMode::down;
    throw fdr::ValidationError("mode must be 'up' or 'down', got '" + text + "'");
}

// "name" or "name:mode"; oracle m0 and sts lambda are filled by the caller.
fdr::ProcedureSpec parse_procedure(const std::string& text, double q, double lambda,
                                   std::size_t oracle_m0, const std::string& mode_override) {
    std::string name = text;
    std::string mode;
    if (const auto colon = text.find(':'); colon != std::string::npos) {
        name = text.substr(0, colon);
        mode = text.substr(colon + 1);
    } else {
        mode = mode_override;
    }

    fdr::ProcedureSpec spec;
    if (name == "bh95") {
        spec = fdr::ProcedureSpec::bh95(q);
        if (!mode.empty()) spec.mode = parse_mode(mode);
    } else if (name == "orc") {
        spec = fdr::ProcedureSpec::oracle(q, oracle_m0);
        if (!mode.empty()) spec.mode = parse_mode(mode);
    } else if (name == "bky") {
        spec = fdr::ProcedureSpec::bky(q);
        if (!mode.empty() && parse_mode(mode) != fdr::StepMode::down) {
            throw fdr::ValidationError("bky is step-down by definition");
        }
    } else if (name == "sts") {
        spec = fdr::ProcedureSpec::sts(q, lambda);
        if (!mode.empty() && parse_mode(mode) != fdr::StepMode::up) {
            throw fdr::ValidationError("sts is step-up by definition");
        }
    } else if (name == "ibhsum") {
        spec = fdr::ProcedureSpec::ibh_sum(q);
        if (!mode.empty()) spec.mode = parse_mode(mode);
    } else if (name == "ibhlog") {
        spec = fdr::ProcedureSpec::ibh_log(q);
        if (!mode.empty()) spec.mode = parse_mode(mode);
    } else {
        throw fdr::ValidationError("unknown procedure '" + name +
                                   "' (expected bh95|orc|bky|sts|ibhsum|ibhlog)");
    }
    return spec;
}

fdr::EstimatorKind parse_estimator(const std::string& name, double lambda) {
    if (name == "sumraw") return fdr::EstimatorKind::sum_raw();
    if (name == "sumcorrected") return fdr::EstimatorKind::sum_corrected();
    if (name == "lograw") return fdr::EstimatorKind::log_raw();
    if (name == "logcorrected") return fdr::EstimatorKind::log_corrected();
    if (name == "sts") return fdr::EstimatorKind::sts(lambda);
    throw fdr::ValidationError(
        "unknown estimator '" + name +
        "' (expected sumraw|sumcorrected|lograw|logcorrected|sts|none)");
}

// Persistent cache semantics: load the file when present, compute missing
// entries on demand, and write the file back when it gained rows.
struct TableCache {
    std::string path;
    fdr::CorrectionTable table;
    bool dirty = false;

    void open(const std::string& file) {
        path = file;
        if (!path.empty() && fs::exists(path)) table = fdr::CorrectionTable::load(path);
    }
    const fdr::CorrectionTable* ensure(std::size_t m) {
        if (table.find(m) == nullptr) {
            std::cerr << "computing correction factors for m = " << m << "...\n";
            table.get_or_compute(m);
            dirty = true;
        }
        return &table;
    }
    void flush() {
        if (dirty && !path.empty()) table.save(path);
    }
};

std::ostream& open_output(std::ofstream& file, const std::string& path) {
    if (path.empty()) return std::cout;
    file.open(path, std::ios::binary);
    if (!file) throw fdr::IoError("cannot open for writing: " + path);
    return file;
}

std::vector<double> load_input(const std::string& input, const std::string& format,
                               const std::string& column) {
    fdr::PValueFile file;
    file.path = input;
    file.format = format.empty() ? fdr::infer_format(file.path)
                                 : (format == "csv" ? fdr::PValueFormat::csv
                                                    : fdr::PValueFormat::plain);
    if (!column.empty()) file.column = column;
    return fdr::read_pvalues(file);
}

bool glob_match(const std::string& pattern, const std::string& text) {
    std::size_t p = 0, t = 0, star = std::string::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
    std::vector<fs::path> paths;
    for (const std::string& input : inputs) {
        if (input.find_first_of("*?") == std::string::npos) {
            paths.emplace_back(input);
            continue;
        }
        const fs::path pattern(input);
        const fs::path dir = pattern.parent_path().empty() ? "." : pattern.parent_path();
        std::vector<fs::path> matches;
        if (fs::exists(dir)) {
            for (const auto& entry : fs::directory_iterator(dir)) {
                if (entry.is_regular_file() &&
                    glob_match(pattern.filename().string(), entry.path().filename().string())) {
                    matches.push_back(entry.path());
                }
            }
        }
        if (matches.empty()) throw fdr::ValidationError("no files match: " + input);
        std::sort(matches.begin(), matches.end());
        paths.insert(paths.end(), matches.begin(), matches.end());
    }
    return paths;
}

std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
    std::vector<std::size_t> out;
    for (const std::string& part : split(text, ',')) {
        try {
            out.push_back(std::stoull(part));
        } catch (const std::exception&) {
            throw fdr::ValidationError(std::string("bad ") + what + " entry: '" + part + "'");
        }
    }
    if (out.empty()) throw fdr::ValidationError(std::string(what) + " list is empty");
    return out;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
    std::vector<double> out;
    for (const std::string& part : split(text, ',')) {
        try {
            out.push_back(std::stod(part));
        } catch (const std::exception&) {
            throw fdr::ValidationError(std::string("bad ") + what + " entry: '" + part + "'");
        }
    }
    if (out.empty()) throw fdr::ValidationError(std::string(what) + " list is empty");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"False discovery rate procedures, q-values and simulation study"};
    app.require_subcommand(1);

    // common option storage
    std::string input, format, column, out_path, table_path;
    std::string procedure = "bh95", mode, estimator = "none", procedures_list;
    double q = 0.05, lambda = 0.5, epsilon = 0.1;
    std::size_t oracle_m0 = 0;
    unsigned threads = 0;
    fdr::SimConfig cfg;

    auto* apply = app.add_subcommand("apply", "Run one procedure on a p-value file");
    apply->add_option("--input", input, "p-value file")->required();
    apply->add_option("--format", format, "plain|csv (default: by extension)");
    apply->add_option("--column", column, "CSV column name or 0-based index (default: pval)");
    apply->add_option("--procedure", procedure, "bh95|orc|bky|sts|ibhsum|ibhlog")->required();
    apply->add_option("--mode", mode, "up|down (default: procedure-specific)");
    apply->add_option("--q", q, "FDR level in (0,1]");
    auto* apply_m0 = apply->add_option("--m0", oracle_m0, "true null count (orc only)");
    apply->add_option("--lambda", lambda, "STS lambda in (0,1)");
    apply->add_option("--correction-table", table_path, "correction factor cache file");
    apply->add_option("--out", out_path, "output file (default: stdout)");

    auto* qvalue = app.add_subcommand("qvalue", "q-values, optionally estimator-adjusted");
    qvalue->add_option("--input", input, "p-value file")->required();
    qvalue->add_option("--format", format, "plain|csv (default: by extension)");
    qvalue->add_option("--column", column, "CSV column name or 0-based index (default: pval)");
    qvalue->add_option("--estimator", estimator,
                       "none|sumraw|sumcorrected|lograw|logcorrected|sts");
    qvalue->add_option("--lambda", lambda, "STS lambda in (0,1)");
    qvalue->add_option("--correction-table", table_path, "correction factor cache file");
    qvalue->add_option("--out", out_path, "output file (default: stdout)");

    std::string ecdf_out;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo run at one parameter point");
    simulate->add_option("--m", cfg.m, "hypotheses");
    simulate->add_option("--m0", cfg.m0, "true nulls");
    simulate->add_option("--mu1", cfg.mu1, "alternative mean");
    simulate->add_option("--rho", cfg.rho, "pairwise correlation in [0,1]");
    simulate->add_option("--q", cfg.q, "FDR level");
    simulate->add_option("--reps", cfg.reps, "replications");
    simulate->add_option("--seed", cfg.seed, "RNG seed");
    simulate->add_option("--procedures", procedures_list,
                         "comma list, each name[:up|:down] (default: all six)");
    simulate->add_option("--lambda", lambda, "STS lambda");
    simulate->add_option("--correction-table", table_path, "correction factor cache file");
    simulate->add_option("--threads", threads, "worker threads (0 = auto)");
    simulate->add_option("--out", out_path, "metrics CSV (default: stdout)");
    simulate->add_option("--ecdf-out", ecdf_out, "V/R+ ECDF CSV");

    std::string mu1_grid_text, m0frac_grid_text, metrics_text = "fdr,power";
    auto* sweep_cmd = app.add_subcommand("sweep", "Grid of simulations over (mu1, m0/m)");
    sweep_cmd->add_option("--m", cfg.m, "hypotheses");
    sweep_cmd->add_option("--rho", cfg.rho, "pairwise correlation in [0,1]");
    sweep_cmd->add_option("--q", cfg.q, "FDR level");
    sweep_cmd->add_option("--reps", cfg.reps, "replications per cell");
    sweep_cmd->add_option("--seed", cfg.seed, "RNG seed (shared across cells)");
    sweep_cmd->add_option("--mu1-grid", mu1_grid_text, "comma list of mu1 values")->required();
    sweep_cmd->add_option("--m0frac-grid", m0frac_grid_text, "comma list of m0/m values")
        ->required();
    sweep_cmd->add_option("--procedures", procedures_list, "comma list (default: all six)");
    sweep_cmd->add_option("--metrics", metrics_text, "of fdr,power,vr_std,p_bound,mean_r");
    sweep_cmd->add_option("--lambda", lambda, "STS lambda");
    sweep_cmd->add_option("--correction-table", table_path, "correction factor cache file");
    sweep_cmd->add_option("--threads", threads, "worker threads (0 = auto)");
    sweep_cmd->add_option("--out", out_path, "output CSV (default: stdout)");

    std::string m_list_text, out_table;
    auto* correction = app.add_subcommand("correction", "Compute correction factor tables");
    correction->add_option("--m-list", m_list_text, "comma list of m values")->required();
    correction->add_option("--out-table", out_table, "table file (default: stdout)");
    correction->add_option("--threads", threads, "worker threads (0 = auto)");

    std::vector<std::string> inputs;
    std::string q_list_text = "0.05,0.1", compare_procs = "bky,sts,ibhsum,ibhlog";
    auto* compare = app.add_subcommand("compare", "Rejection ratios vs BH95 across datasets");
    compare->add_option("--inputs", inputs, "p-value files (globs allowed)")->required();
    compare->add_option("--format", format, "plain|csv (default: by extension)");
    compare->add_option("--column", column, "CSV column name or 0-based index (default: pval)");
    compare->add_option("--q-list", q_list_text, "comma list of q levels");
    compare->add_option("--procedures", compare_procs, "comma list of numerator procedures");
    compare->add_option("--lambda", lambda, "STS lambda");
    compare->add_option("--correction-table", table_path, "correction factor cache file");
    compare->add_option("--threads", threads, "worker threads (0 = auto)");
    compare->add_option("--out", out_path, "output CSV (default: stdout)");

    std::size_t ce_reps = 1000000;
    std::uint64_t ce_seed = 0;
    auto* counterexample =
        app.add_subcommand("counterexample", "FDR of reject-lowest vs reject-two-lowest");
    counterexample->add_option("--epsilon", epsilon, "mixture parameter in (0,1)");
    counterexample->add_option("--reps", ce_reps, "replications");
    counterexample->add_option("--seed", ce_seed, "RNG seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad usage is a validation error
    }

    try {
        TableCache cache;
        cache.open(table_path);
        std::ofstream out_file;

        if (apply->parsed()) {
            if (procedure == "orc" && apply_m0->count() == 0) {
                throw fdr::ValidationError("orc needs --m0 (the known true null count)");
            }
            const std::vector<double> p = load_input(input, format, column);
            fdr::ProcedureSpec spec = parse_procedure(procedure, q, lambda, oracle_m0, mode);
            const fdr::CorrectionTable* table =
                (spec.kind == fdr::ProcedureKind::ibh_sum) ? cache.ensure(p.size()) : nullptr;
            const fdr::RejectionOutcome outcome = fdr::apply_procedure(p, spec, table);
            fdr::write_rejection_report(open_output(out_file, out_path), outcome, p, spec);
        } else if (qvalue->parsed()) {
            const std::vector<double> p = load_input(input, format, column);
            fdr::QValueVector qv;
            if (estimator == "none") {
                qv = fdr::bh_qvalues(p);
            } else {
                const fdr::EstimatorKind kind = parse_estimator(estimator, lambda);
                const fdr::CorrectionTable* table =
                    (kind.tag == fdr::EstimatorKind::Tag::sum_corrected)
                        ? cache.ensure(p.size())
                        : nullptr;
                qv = fdr::adaptive_qvalues(p, kind, table);
            }
            fdr::write_qvalue_report(open_output(out_file, out_path), p, qv);
        } else if (simulate->parsed() || sweep_cmd->parsed()) {
            if (procedures_list.empty()) {
                procedures_list = "orc,bh95,bky,sts,ibhsum,ibhlog";
            }
            std::vector<fdr::ProcedureSpec> specs;
            bool wants_ibhsum = false;
            for (const std::string& name : split(procedures_list, ',')) {
                specs.push_back(parse_procedure(name, cfg.q, lambda, cfg.m0, ""));
                wants_ibhsum |= (specs.back().kind == fdr::ProcedureKind::ibh_sum);
            }
            const fdr::CorrectionTable* table = wants_ibhsum ? cache.ensure(cfg.m) : nullptr;

            if (simulate->parsed()) {
                const std::vector<fdr::SimMetrics> metrics =
                    fdr::run_simulation(cfg, specs, table, threads);
                fdr::write_metrics_report(open_output(out_file, out_path), cfg, specs, metrics);
                if (!ecdf_out.empty()) {
                    std::ofstream ecdf_file(ecdf_out, std::ios::binary);
                    if (!ecdf_file) throw fdr::IoError("cannot open for writing: " + ecdf_out);
                    ecdf_file << "procedure,mode,vr_upper,cum_fraction\n";
                    for (std::size_t k = 0; k < specs.size(); ++k) {
                        const fdr::Histogram& h = metrics[k].vr_ecdf;
                        std::uint64_t cum = 0;
                        for (std::size_t b = 0; b < h.bins.size(); ++b) {
                            cum += h.bins[b];
                            ecdf_file << specs[k].name() << ',' << specs[k].mode_name() << ','
                                      << fdr::format_value(static_cast<double>(b + 1) /
                                                           static_cast<double>(h.bins.size()))
                                      << ','
                                      << fdr::format_value(static_cast<double>(cum) /
                                                           static_cast<double>(h.total))
                                      << '\n';
                        }
                    }
                }
            } else {
                fdr::SweepRequest request;
                request.base = cfg;
                request.mu1_grid = parse_double_list(mu1_grid_text, "--mu1-grid");
                request.m0_frac_grid = parse_double_list(m0frac_grid_text, "--m0frac-grid");
                request.specs = specs;
                for (const std::string& name : split(metrics_text, ',')) {
                    request.metrics.push_back(name);
                }
                const std::vector<fdr::SweepRow> rows = fdr::sweep(request, table, threads);
                fdr::write_sweep_csv(open_output(out_file, out_path), rows);
            }
        } else if (correction->parsed()) {
            const std::vector<std::size_t> ms = parse_size_list(m_list_text, "--m-list");
            const fdr::CorrectionTable table = fdr::CorrectionTable::compute(ms, threads);
            if (out_table.empty()) {
                table.save(std::cout);
            } else {
                table.save(fs::path(out_table));
            }
        } else if (compare->parsed()) {
            std::vector<std::pair<std::string, std::vector<double>>> datasets;
            const bool wants_ibhsum =
                compare_procs.find("ibhsum") != std::string::npos;
            for (const fs::path& path : expand_inputs(inputs)) {
                datasets.emplace_back(path.filename().string(),
                                      load_input(path.string(), format, column));
                if (wants_ibhsum) cache.ensure(datasets.back().second.size());
            }
            std::vector<fdr::ProcedureSpec> procs;
            for (const std::string& name : split(compare_procs, ',')) {
                procs.push_back(parse_procedure(name, 0.05, lambda, oracle_m0, ""));
            }
            const std::vector<double> q_levels = parse_double_list(q_list_text, "--q-list");
            const fdr::CompareReport report = fdr::compare_datasets(
                std::move(datasets), procs, q_levels, &cache.table, threads);
            fdr::write_compare_report(open_output(out_file, out_path), report);
        } else if (counterexample->parsed()) {
            const fdr::CounterexampleResult result =
                fdr::counterexample_scenario(epsilon, ce_reps, ce_seed);
            std::ostream& out = std::cout;
            out << "epsilon,reps,fdr_reject_lowest,se1,fdr_reject_two_lowest,se2\n";
            out << fdr::format_value(epsilon) << ',' << ce_reps << ','
                << fdr::format_value(result.fdr1) << ',' << fdr::format_value(result.se1)
                << ',' << fdr::format_value(result.fdr2) << ','
                << fdr::format_value(result.se2) << '\n';
        }

        cache.flush();
        if (out_file.is_open()) {
            out_file.flush();
            if (!out_file) throw fdr::IoError("write failed: " + out_path);
        }
        return 0;
    } catch (const fdr::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
