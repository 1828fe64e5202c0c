#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "brw/config.hpp"
#include "brw/oracle.hpp"
#include "brw/simulator.hpp"

namespace brw {

struct BatchOptions {
    std::size_t replicates = 1;
    int workers = 1;
    std::uint64_t seed = 0;
    std::size_t first_replicate = 0;
    std::size_t population_cap = kDefaultPopulationCap;
};

// Fan replicates out over a worker pool. The sink receives each record
// exactly once, from a worker thread, with a distinct replicate index;
// records are pure functions of (seed, replicate), so scheduling cannot
// change results.
void run_batch(const OffspringLaw& off, const IncrementLaw& inc,
               const ModelConstants* constants, int n, const PruneRule& prune,
               const QuerySet& queries, const BatchOptions& options,
               const std::function<void(std::size_t, RunRecord&&)>& sink);

std::vector<RunRecord> collect_batch(const OffspringLaw& off, const IncrementLaw& inc,
                                     const ModelConstants* constants, int n,
                                     const PruneRule& prune, const QuerySet& queries,
                                     const BatchOptions& options);

struct Verdict {
    std::string check;
    bool pass = false;
    double statistic = 0.0;
    double tolerance = 0.0;
};

// Full pipeline: calibrate, simulate, analyze, persist. Writes
// manifest.json, records.csv, diagnostics/*.csv and verdicts.json under
// out_dir; maintains a binary checkpoint and resumes from it on request.
// Returns the process exit status (0 ok, 1 verdict failures).
int run_pipeline(const RunConfig& cfg, const std::string& out_dir, bool resume,
                 std::ostream& log);

// Exact max-law artifact: oracle.csv (position, cdf) plus oracle.json
// header and the centered tail table. Honors BRW_CACHE_DIR as a golden
// cache keyed by config hash.
int run_oracle(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);

// Re-run the analysis stage over an existing artifact directory.
int run_analyze(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);

// Render the verdict table for an artifact directory; verifies the
// records.csv digest recorded in the manifest. Returns nonzero when any
// verdict failed.
int report(const std::string& artifact_dir, std::ostream& out);

// Serialization helpers shared by the pipeline and the tests.
void write_records_csv(const std::string& path, const QuerySet& queries,
                       const std::vector<RunRecord>& records);
void write_checkpoint(const std::string& path, const std::string& config_hash,
                      std::size_t total, const std::vector<RunRecord>& prefix);
// Returns records for the contiguous completed prefix; empty when absent.
std::vector<RunRecord> load_checkpoint(const std::string& path,
                                       const std::string& config_hash,
                                       std::size_t expected_total);

std::string query_column_name(const BarrierEventQuery& q);

}  // namespace brw
