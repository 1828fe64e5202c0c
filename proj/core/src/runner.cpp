#include "brw/runner.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "brw/analysis.hpp"
#include "brw/csv.hpp"
#include "brw/errors.hpp"

namespace brw {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kCheckpointMagic[8] = {'B', 'R', 'W', 'C', 'K', 'P', 'T', '1'};

std::string sig17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw MissingArtifact("missing file: " + path);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

template <typename T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace

void run_batch(const OffspringLaw& off, const IncrementLaw& inc,
               const ModelConstants* constants, int n, const PruneRule& prune,
               const QuerySet& queries, const BatchOptions& options,
               const std::function<void(std::size_t, RunRecord&&)>& sink) {
    const std::size_t total = options.replicates;
    if (options.first_replicate >= total) return;

    auto worker_loop = [&](std::atomic<std::size_t>& next, std::exception_ptr& error,
                           std::mutex& error_mu) {
        constexpr std::size_t kChunk = 16;
        for (;;) {
            const std::size_t begin = next.fetch_add(kChunk);
            if (begin >= total) return;
            const std::size_t end = std::min(begin + kChunk, total);
            for (std::size_t rep = begin; rep < end; ++rep) {
                try {
                    sink(rep, simulate(off, inc, constants, n, prune, queries,
                                       options.seed, rep, options.population_cap));
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                    next.store(total);
                    return;
                }
            }
        }
    };

    std::atomic<std::size_t> next{options.first_replicate};
    std::exception_ptr error;
    std::mutex error_mu;
    if (options.workers <= 1) {
        worker_loop(next, error, error_mu);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(options.workers));
        for (int w = 0; w < options.workers; ++w)
            pool.emplace_back([&] { worker_loop(next, error, error_mu); });
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
}

std::vector<RunRecord> collect_batch(const OffspringLaw& off, const IncrementLaw& inc,
                                     const ModelConstants* constants, int n,
                                     const PruneRule& prune, const QuerySet& queries,
                                     const BatchOptions& options) {
    std::vector<RunRecord> records(options.replicates);
    run_batch(off, inc, constants, n, prune, queries, options,
              [&](std::size_t rep, RunRecord&& rec) { records[rep] = std::move(rec); });
    return records;
}

std::string query_column_name(const BarrierEventQuery& q) {
    using Family = BarrierEventQuery::Family;
    switch (q.family) {
        case Family::GBeta: return "gbeta_b" + csv::format_double(q.z);
        case Family::E:
            return "lambda_z" + csv::format_double(q.z) + "_l" + std::to_string(q.ell);
        case Family::F:
            return "gamma_z" + csv::format_double(q.z) + "_l" + std::to_string(q.ell);
        case Family::Gn:
            return "gn_z" + csv::format_double(q.z) + "_l" + std::to_string(q.ell);
    }
    return "query";
}

void write_records_csv(const std::string& path, const QuerySet& queries,
                       const std::vector<RunRecord>& records) {
    csv::Writer w(path);
    std::vector<std::string> header{"replicate", "max_final", "population_peak",
                                    "pruned_weight"};
    for (const auto& q : queries.queries()) header.push_back(query_column_name(q));
    std::size_t trace_len = 0;
    for (const auto& r : records) trace_len = std::max(trace_len, r.y_trace.size());
    for (std::size_t k = 0; k < trace_len; ++k) {
        header.push_back("max_" + std::to_string(k));
        header.push_back("y_" + std::to_string(k));
        header.push_back("z_" + std::to_string(k));
    }
    w.row(header);

    std::vector<std::string> row;
    for (const auto& r : records) {
        row.clear();
        row.push_back(std::to_string(r.replicate));
        row.push_back(csv::format_double(r.max_final));
        row.push_back(std::to_string(r.population_peak));
        row.push_back(csv::format_double(r.pruned_weight));
        for (auto c : r.event_counts) row.push_back(std::to_string(c));
        for (std::size_t k = 0; k < trace_len; ++k) {
            const bool has = k < r.y_trace.size();
            row.push_back(has ? csv::format_double(r.max_trace[k]) : "");
            row.push_back(has ? csv::format_double(r.y_trace[k]) : "");
            row.push_back(has ? csv::format_double(r.z_trace[k]) : "");
        }
        w.row(row);
    }
}

void write_checkpoint(const std::string& path, const std::string& config_hash,
                      std::size_t total, const std::vector<RunRecord>& prefix) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out.good()) throw MissingArtifact("cannot write checkpoint: " + tmp);
        out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
        put<std::uint32_t>(out, 1);
        char hash[32] = {};
        std::memcpy(hash, config_hash.data(), std::min<std::size_t>(32, config_hash.size()));
        out.write(hash, sizeof(hash));
        put<std::uint64_t>(out, total);
        put<std::uint64_t>(out, prefix.size());
        for (const auto& r : prefix) {
            put<std::uint64_t>(out, r.replicate);
            put<double>(out, r.max_final);
            put<double>(out, r.pruned_weight);
            put<std::uint64_t>(out, r.population_peak);
            put<std::uint32_t>(out, static_cast<std::uint32_t>(r.event_counts.size()));
            for (auto c : r.event_counts) put<std::int64_t>(out, c);
            put<std::uint32_t>(out, static_cast<std::uint32_t>(r.y_trace.size()));
            for (std::size_t k = 0; k < r.y_trace.size(); ++k) {
                put<double>(out, r.max_trace[k]);
                put<double>(out, r.y_trace[k]);
                put<double>(out, r.z_trace[k]);
            }
        }
    }
    fs::rename(tmp, path);
}

std::vector<RunRecord> load_checkpoint(const std::string& path,
                                       const std::string& config_hash,
                                       std::size_t expected_total) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) return {};
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in.good() || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw IntegrityError("checkpoint magic mismatch: " + path);
    if (get<std::uint32_t>(in) != 1)
        throw IntegrityError("unsupported checkpoint version");
    char hash[32];
    in.read(hash, sizeof(hash));
    char expect[32] = {};
    std::memcpy(expect, config_hash.data(), std::min<std::size_t>(32, config_hash.size()));
    if (std::memcmp(hash, expect, sizeof(hash)) != 0)
        throw IntegrityError("checkpoint belongs to a different config");
    if (get<std::uint64_t>(in) != expected_total)
        throw IntegrityError("checkpoint replicate total mismatch");
    const auto count = get<std::uint64_t>(in);
    std::vector<RunRecord> records(count);
    for (auto& r : records) {
        r.replicate = get<std::uint64_t>(in);
        r.max_final = get<double>(in);
        r.pruned_weight = get<double>(in);
        r.population_peak = get<std::uint64_t>(in);
        const auto nq = get<std::uint32_t>(in);
        r.event_counts.resize(nq);
        for (auto& c : r.event_counts) c = get<std::int64_t>(in);
        const auto tl = get<std::uint32_t>(in);
        r.max_trace.resize(tl);
        r.y_trace.resize(tl);
        r.z_trace.resize(tl);
        for (std::uint32_t k = 0; k < tl; ++k) {
            r.max_trace[k] = get<double>(in);
            r.y_trace[k] = get<double>(in);
            r.z_trace[k] = get<double>(in);
        }
        if (!in.good()) throw IntegrityError("truncated checkpoint: " + path);
    }
    return records;
}

namespace {

json constants_json(const ModelConstants& c) {
    json j;
    j["c1"] = sig17(c.c1);
    j["theta_bar"] = sig17(c.theta_bar);
    j["c2"] = sig17(c.c2);
    j["log_rho"] = sig17(c.log_rho);
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

struct DiagnosticOutputs {
    std::vector<Verdict> verdicts;
};

void diag_martingale(const std::vector<RunRecord>& records, const std::string& dir,
                     DiagnosticOutputs& out) {
    const auto summary = martingale_traces(records);
    csv::Writer w(dir + "/martingale.csv");
    w.row({"k", "mean_y", "se_y", "mean_z", "se_z"});
    double worst_y = 0.0, worst_z = 0.0;
    for (std::size_t k = 0; k < summary.mean_y.size(); ++k) {
        w.row({std::to_string(k), csv::format_double(summary.mean_y[k]),
               csv::format_double(summary.se_y[k]), csv::format_double(summary.mean_z[k]),
               csv::format_double(summary.se_z[k])});
        if (k > 0) {
            worst_y = std::max(worst_y, std::abs(summary.mean_y[k] - 1.0) /
                                            std::max(summary.se_y[k], 1e-300));
            worst_z = std::max(worst_z, std::abs(summary.mean_z[k]) /
                                            std::max(summary.se_z[k], 1e-300));
        }
    }
    out.verdicts.push_back({"martingale_y_unit_mean", worst_y <= 5.0, worst_y, 5.0});
    out.verdicts.push_back({"martingale_z_zero_mean", worst_z <= 5.0, worst_z, 5.0});
}

std::vector<TailObservation> empirical_tail(const RunConfig& cfg,
                                            const ModelConstants& constants,
                                            const std::vector<RunRecord>& records) {
    const double mn = constants.centering(cfg.horizon);
    std::vector<TailObservation> table;
    for (double z : cfg.diagnostics.tail_z) {
        double zz = z;
        if (cfg.increment_law().is_lattice()) {
            const double span = cfg.increment_law().lattice_span();
            zz = std::round((mn + z) / span) * span - mn;
        }
        std::size_t hits = 0;
        for (const auto& r : records)
            if (r.max_final > mn + zz) ++hits;
        TailObservation obs;
        obs.z = zz;
        obs.survival = static_cast<double>(hits) / static_cast<double>(records.size());
        obs.exceedances = hits;
        table.push_back(obs);
    }
    return table;
}

void diag_tail(const RunConfig& cfg, const ModelConstants& constants,
               const std::vector<RunRecord>& records, const std::string& dir,
               DiagnosticOutputs& out, double& alpha_hat) {
    const auto table = empirical_tail(cfg, constants, records);
    csv::Writer w(dir + "/tail.csv");
    w.row({"z", "survival", "exceedances"});
    for (const auto& obs : table)
        w.row({csv::format_double(obs.z), csv::format_double(obs.survival),
               std::to_string(obs.exceedances)});

    const auto fit = fit_tail(table);
    alpha_hat = fit.alpha_hat;
    const double rel = std::abs(fit.theta_hat - constants.theta_bar) / constants.theta_bar;
    out.verdicts.push_back({"tail_theta_matches_calibration",
                            rel <= cfg.diagnostics.theta_tolerance, rel,
                            cfg.diagnostics.theta_tolerance});
    const auto [lo, hi] = tail_tightness_range(table, constants.theta_bar);
    const double factor = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    out.verdicts.push_back({"tail_two_sided_tightness",
                            factor <= cfg.diagnostics.tightness_factor, factor,
                            cfg.diagnostics.tightness_factor});
    csv::Writer wf(dir + "/tail_fit.csv");
    wf.row({"theta_hat", "theta_se", "alpha_hat", "alpha_se", "z_min", "z_max"});
    wf.row({csv::format_double(fit.theta_hat), csv::format_double(fit.theta_se),
            csv::format_double(fit.alpha_hat), csv::format_double(fit.alpha_se),
            csv::format_double(fit.z_min), csv::format_double(fit.z_max)});
}

void diag_moment_ratios(const RunConfig& cfg, const ModelConstants& constants,
                        const std::vector<RunRecord>& records, const std::string& dir,
                        DiagnosticOutputs& out) {
    using Family = BarrierEventQuery::Family;
    const auto qs = cfg.query_set();
    const auto& queries = qs.queries();
    const double mn = constants.centering(cfg.horizon);

    csv::Writer w(dir + "/moment_ratios.csv");
    w.row({"z", "ell", "e_lambda", "e_gamma", "e_lambda_sq", "p_exceed",
           "gamma_over_lambda", "lambda_sq_over_lambda", "p_over_lambda",
           "se_gamma_over_lambda", "se_lambda_sq_over_lambda", "se_p_over_lambda"});

    bool any = false;
    MomentRatioRow last;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        if (queries[qi].family != Family::E) continue;
        int match = -1;
        for (std::size_t qj = 0; qj < queries.size(); ++qj) {
            if (queries[qj].family == Family::F && queries[qj].z == queries[qi].z &&
                queries[qj].ell == queries[qi].ell)
                match = static_cast<int>(qj);
        }
        if (match < 0) continue;
        std::vector<std::int64_t> lam(records.size()), gam(records.size());
        std::vector<std::uint8_t> exc(records.size());
        for (std::size_t r = 0; r < records.size(); ++r) {
            lam[r] = records[r].event_counts[qi];
            gam[r] = records[r].event_counts[static_cast<std::size_t>(match)];
            exc[r] = records[r].max_final > mn + queries[qi].z ? 1 : 0;
        }
        const auto row =
            moment_ratios(lam, gam, exc, queries[qi].z, queries[qi].ell);
        w.row({csv::format_double(row.z), std::to_string(row.ell),
               csv::format_double(row.e_lambda), csv::format_double(row.e_gamma),
               csv::format_double(row.e_lambda_sq), csv::format_double(row.p_exceed),
               csv::format_double(row.gamma_over_lambda),
               csv::format_double(row.lambda_sq_over_lambda),
               csv::format_double(row.p_over_lambda),
               csv::format_double(row.se_gamma_over_lambda),
               csv::format_double(row.se_lambda_sq_over_lambda),
               csv::format_double(row.se_p_over_lambda)});
        last = row;
        any = true;
    }
    if (any) {
        const double bound = cfg.diagnostics.ratio_bound;
        const bool pass = last.gamma_over_lambda <= bound &&
                          last.lambda_sq_over_lambda <= bound &&
                          last.p_over_lambda >= 1.0 / bound &&
                          last.p_over_lambda <= bound;
        const double stat = std::max({last.gamma_over_lambda,
                                      last.lambda_sq_over_lambda, last.p_over_lambda});
        out.verdicts.push_back({"moment_ratios_at_largest_z", pass, stat, bound});
    }
}

void diag_mixture(const RunConfig& cfg, const ModelConstants& constants,
                  const std::vector<RunRecord>& records, const std::string& dir,
                  DiagnosticOutputs& out, double alpha_hat) {
    const int k = cfg.diagnostics.mixture_k;
    std::vector<double> zk(records.size());
    std::vector<std::uint8_t> below(records.size());
    const double mn = constants.centering(cfg.horizon);
    for (std::size_t r = 0; r < records.size(); ++r) {
        if (records[r].z_trace.size() <= static_cast<std::size_t>(k))
            throw InsufficientData("mixture diagnostic needs traces recorded to k");
        zk[r] = records[r].z_trace[static_cast<std::size_t>(k)];
        below[r] = records[r].max_final <= mn + cfg.diagnostics.z_probe ? 1 : 0;
    }
    const auto res = mixture_test(zk, below, alpha_hat, constants.theta_bar,
                                  cfg.diagnostics.z_probe, cfg.diagnostics.bins);
    csv::Writer w(dir + "/mixture.csv");
    w.row({"bin", "z_k_mean", "count", "freq", "predicted", "deviation"});
    for (std::size_t b = 0; b < res.bins.size(); ++b) {
        const auto& bin = res.bins[b];
        w.row({std::to_string(b), csv::format_double(bin.z_k_mean),
               std::to_string(bin.count), csv::format_double(bin.freq),
               csv::format_double(bin.predicted), csv::format_double(bin.deviation)});
    }
    out.verdicts.push_back({"mixture_bins_within_4_sigma", res.statistic <= 4.0,
                            res.statistic, 4.0});
}

void diag_barrier_bound(const RunConfig& cfg, const ModelConstants& constants,
                        const std::vector<RunRecord>& records, const std::string& dir,
                        DiagnosticOutputs& out) {
    using Family = BarrierEventQuery::Family;
    const auto qs = cfg.query_set();
    const auto& queries = qs.queries();
    std::vector<double> betas;
    std::vector<Estimate> estimates;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        if (queries[qi].family != Family::GBeta) continue;
        Welford acc;
        for (const auto& r : records)
            acc.add(static_cast<double>(r.event_counts[qi]));
        betas.push_back(queries[qi].z);
        estimates.push_back({acc.mean(), acc.std_error(), records.size()});
    }
    if (betas.empty()) return;
    const double delta = cfg.diagnostics.delta > 0.0 ? cfg.diagnostics.delta
                                                     : constants.theta_bar / 4.0;
    const auto res =
        barrier_bound_check(betas, estimates, cfg.horizon, constants.theta_bar, delta);
    csv::Writer w(dir + "/barrier_bound.csv");
    w.row({"beta", "p_hat", "std_err", "bound_shape", "c_ratio"});
    for (const auto& row : res.rows)
        w.row({csv::format_double(row.beta), csv::format_double(row.p_hat),
               csv::format_double(row.std_err), csv::format_double(row.bound_shape),
               csv::format_double(row.c_ratio)});
    csv::Writer wc(dir + "/barrier_bound_fit.csv");
    wc.row({"n", "delta", "c_fit"});
    wc.row({std::to_string(res.n), csv::format_double(res.delta),
            csv::format_double(res.c_fit)});

    bool monotone = true;
    for (std::size_t i = 1; i < res.rows.size(); ++i) {
        const double slack = 3.0 * std::hypot(res.rows[i].std_err,
                                              res.rows[i - 1].std_err);
        if (res.rows[i].p_hat > res.rows[i - 1].p_hat + slack) monotone = false;
    }
    out.verdicts.push_back({"gbeta_monotone_in_beta", monotone, monotone ? 0.0 : 1.0,
                            0.0});
}

int analyze_records(const RunConfig& cfg, const ModelConstants* constants,
                    const std::vector<RunRecord>& records, const std::string& out_dir,
                    std::ostream& log) {
    const std::string diag_dir = out_dir + "/diagnostics";
    fs::create_directories(diag_dir);
    DiagnosticOutputs outputs;
    double alpha_hat = 0.0;

    const auto& wants = cfg.diagnostics;
    if (wants.wants("martingale")) diag_martingale(records, diag_dir, outputs);
    if (constants != nullptr) {
        if (wants.wants("tail"))
            diag_tail(cfg, *constants, records, diag_dir, outputs, alpha_hat);
        if (wants.wants("moment_ratios"))
            diag_moment_ratios(cfg, *constants, records, diag_dir, outputs);
        if (wants.wants("mixture")) {
            if (alpha_hat <= 0.0)
                throw InsufficientData(
                    "mixture diagnostic needs the tail fit; add 'tail' to the list");
            diag_mixture(cfg, *constants, records, diag_dir, outputs, alpha_hat);
        }
        if (wants.wants("barrier_bound"))
            diag_barrier_bound(cfg, *constants, records, diag_dir, outputs);
    }

    json verdicts = json::array();
    bool all_pass = true;
    for (const auto& v : outputs.verdicts) {
        verdicts.push_back({{"check", v.check},
                            {"pass", v.pass},
                            {"statistic", v.statistic},
                            {"tolerance", v.tolerance}});
        all_pass = all_pass && v.pass;
        log << (v.pass ? "PASS " : "FAIL ") << v.check << " (statistic "
            << v.statistic << ", tolerance " << v.tolerance << ")\n";
    }
    write_text(out_dir + "/verdicts.json", verdicts.dump(2) + "\n");
    return all_pass ? 0 : 1;
}

}  // namespace

int run_pipeline(const RunConfig& cfg, const std::string& out_dir, bool resume,
                 std::ostream& log) {
    fs::create_directories(out_dir);
    const auto off = cfg.offspring();
    const auto& inc = cfg.increment_law();

    std::optional<ModelConstants> constants;
    if (cfg.needs_constants()) constants = calibrate(off, inc);
    const ModelConstants* cptr = constants ? &*constants : nullptr;

    const PruneRule prune = cfg.prune_rule(cptr);
    const QuerySet queries = cfg.query_set();

    const std::string checkpoint_path = out_dir + "/checkpoint.bin";
    std::vector<RunRecord> records(cfg.replicates);
    std::size_t start = 0;
    if (resume) {
        auto prefix = load_checkpoint(checkpoint_path, cfg.hash_hex, cfg.replicates);
        for (std::size_t i = 0; i < prefix.size(); ++i) records[i] = std::move(prefix[i]);
        start = prefix.size();
        if (start > 0)
            log << "resumed " << start << " replicates from checkpoint\n";
    }

    // Periodic checkpoint of the completed prefix.
    std::mutex mu;
    std::vector<char> done(cfg.replicates, 0);
    for (std::size_t i = 0; i < start; ++i) done[i] = 1;
    std::size_t prefix_len = start;
    std::size_t last_flush = start;
    const std::size_t interval =
        std::max<std::size_t>(1000, cfg.replicates / 20);

    BatchOptions options;
    options.replicates = cfg.replicates;
    options.workers = cfg.workers;
    options.seed = cfg.seed;
    options.first_replicate = start;
    run_batch(off, inc, cptr, cfg.horizon, prune, queries, options,
              [&](std::size_t rep, RunRecord&& rec) {
                  records[rep] = std::move(rec);
                  std::lock_guard<std::mutex> lock(mu);
                  done[rep] = 1;
                  while (prefix_len < cfg.replicates && done[prefix_len]) ++prefix_len;
                  if (prefix_len - last_flush >= interval &&
                      !cfg.retain_genealogy) {
                      write_checkpoint(checkpoint_path, cfg.hash_hex, cfg.replicates,
                                       {records.begin(),
                                        records.begin() +
                                            static_cast<std::ptrdiff_t>(prefix_len)});
                      last_flush = prefix_len;
                  }
              });

    write_records_csv(out_dir + "/records.csv", queries, records);

    double pruned_total = 0.0;
    std::size_t peak = 0;
    for (const auto& r : records) {
        pruned_total += r.pruned_weight;
        peak = std::max(peak, r.population_peak);
    }

    json manifest;
    manifest["config_hash"] = cfg.hash_hex;
    manifest["constants"] =
        constants ? constants_json(*constants) : json(nullptr);
    manifest["versions"] = {{"brwlab", "0.1.0"}, {"records_format", 1}};
    manifest["audit"] = {{"replicates", cfg.replicates},
                         {"pruned_weight_total", pruned_total},
                         {"population_peak", peak}};
    manifest["records_sha256"] = sha256_hex(file_bytes(out_dir + "/records.csv"));
    write_text(out_dir + "/manifest.json", manifest.dump(2) + "\n");

    int status = 0;
    if (!cfg.diagnostics.list.empty())
        status = analyze_records(cfg, cptr, records, out_dir, log);
    return status;
}

int run_oracle(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
    fs::create_directories(out_dir);
    const auto off = cfg.offspring();
    const auto& inc = cfg.increment_law();
    if (!inc.is_lattice())
        throw ConfigError("the oracle verb needs a lattice increment law");

    // Golden cache keyed by config hash.
    std::string cached_csv;
    if (const char* cache = std::getenv("BRW_CACHE_DIR")) {
        const std::string dir = std::string(cache) + "/" + cfg.hash_hex;
        cached_csv = dir + "/oracle.csv";
        if (fs::exists(cached_csv)) {
            fs::create_directories(out_dir);
            fs::copy_file(cached_csv, out_dir + "/oracle.csv",
                          fs::copy_options::overwrite_existing);
            if (fs::exists(dir + "/oracle.json"))
                fs::copy_file(dir + "/oracle.json", out_dir + "/oracle.json",
                              fs::copy_options::overwrite_existing);
            log << "oracle loaded from cache\n";
            return 0;
        }
    }

    const MaxCdf law = exact_max_law(off, inc, cfg.horizon);
    csv::Writer w(out_dir + "/oracle.csv");
    w.row({"position", "cdf"});
    for (std::size_t i = 0; i < law.values.size(); ++i)
        w.row({csv::format_double(law.position(i)), csv::format_double(law.values[i])});

    json header;
    header["n"] = law.n;
    header["exactness"] = "lattice_exact";
    header["error_budget"] = law.error_budget;
    header["config_hash"] = cfg.hash_hex;
    write_text(out_dir + "/oracle.json", header.dump(2) + "\n");

    if (cfg.needs_constants()) {
        const auto constants = calibrate(off, inc);
        const auto tail = centered_tail(law, constants, cfg.diagnostics.tail_z);
        csv::Writer tw(out_dir + "/oracle_tail.csv");
        tw.row({"z_requested", "z_used", "survival"});
        for (const auto& pt : tail)
            tw.row({csv::format_double(pt.z_requested), csv::format_double(pt.z_used),
                    csv::format_double(pt.survival)});
    }

    if (!cached_csv.empty()) {
        fs::create_directories(fs::path(cached_csv).parent_path());
        fs::copy_file(out_dir + "/oracle.csv", cached_csv,
                      fs::copy_options::overwrite_existing);
        fs::copy_file(out_dir + "/oracle.json",
                      fs::path(cached_csv).parent_path() / "oracle.json",
                      fs::copy_options::overwrite_existing);
    }
    log << "oracle written (" << law.values.size() << " grid points)\n";
    return 0;
}

int run_analyze(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
    const auto rows = csv::read_file(out_dir + "/records.csv");
    if (rows.size() < 2) throw MissingArtifact("records.csv has no data rows");
    const auto& header = rows.front();
    const auto qs = cfg.query_set();
    const std::size_t nq = qs.queries().size();
    const std::size_t fixed = 4;
    if (header.size() < fixed + nq)
        throw MissingArtifact("records.csv does not match the config's query list");
    std::size_t trace_len = 0;
    if (header.size() > fixed + nq) trace_len = (header.size() - fixed - nq) / 3;

    std::vector<RunRecord> records;
    records.reserve(rows.size() - 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        RunRecord rec;
        rec.replicate = std::stoull(r[0]);
        rec.max_final = std::stod(r[1]);
        rec.population_peak = std::stoull(r[2]);
        rec.pruned_weight = std::stod(r[3]);
        rec.event_counts.resize(nq);
        for (std::size_t q = 0; q < nq; ++q)
            rec.event_counts[q] = std::stoll(r[fixed + q]);
        for (std::size_t k = 0; k < trace_len; ++k) {
            const auto& mx = r[fixed + nq + 3 * k];
            if (mx.empty()) break;
            rec.max_trace.push_back(std::stod(mx));
            rec.y_trace.push_back(std::stod(r[fixed + nq + 3 * k + 1]));
            rec.z_trace.push_back(std::stod(r[fixed + nq + 3 * k + 2]));
        }
        records.push_back(std::move(rec));
    }

    std::optional<ModelConstants> constants;
    if (cfg.needs_constants())
        constants = calibrate(cfg.offspring(), cfg.increment_law());
    return analyze_records(cfg, constants ? &*constants : nullptr, records, out_dir,
                           log);
}

int report(const std::string& artifact_dir, std::ostream& out) {
    const std::string manifest_path = artifact_dir + "/manifest.json";
    json manifest;
    try {
        manifest = json::parse(file_bytes(manifest_path));
    } catch (const json::parse_error&) {
        throw MissingArtifact("manifest.json is unreadable in " + artifact_dir);
    }

    const std::string recorded = manifest.value("records_sha256", "");
    if (!recorded.empty()) {
        const std::string actual =
            sha256_hex(file_bytes(artifact_dir + "/records.csv"));
        if (actual != recorded)
            throw IntegrityError("records.csv does not match the manifest digest");
    }

    out << "artifact: " << artifact_dir << "\n";
    out << "config_hash: " << manifest.value("config_hash", "?") << "\n";
    if (manifest.contains("constants") && manifest["constants"].is_object()) {
        out << "constants:";
        for (const auto& [k, v] : manifest["constants"].items())
            out << " " << k << "=" << v.get<std::string>();
        out << "\n";
    }
    if (manifest.contains("audit")) {
        out << "audit: replicates=" << manifest["audit"].value("replicates", 0)
            << " pruned_weight_total="
            << manifest["audit"].value("pruned_weight_total", 0.0)
            << " population_peak=" << manifest["audit"].value("population_peak", 0)
            << "\n";
    }

    int status = 0;
    const std::string verdicts_path = artifact_dir + "/verdicts.json";
    if (fs::exists(verdicts_path)) {
        const json verdicts = json::parse(file_bytes(verdicts_path));
        for (const auto& v : verdicts) {
            const bool pass = v.value("pass", false);
            out << (pass ? "PASS " : "FAIL ") << v.value("check", "?")
                << " (statistic " << v.value("statistic", 0.0) << ", tolerance "
                << v.value("tolerance", 0.0) << ")\n";
            if (!pass) status = 1;
        }
    } else {
        out << "no verdicts recorded\n";
    }
    out << "plot data: " << artifact_dir << "/diagnostics/*.csv\n";
    return status;
}

}  // namespace brw
