#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "brw/laws.hpp"
#include "brw/model.hpp"

namespace brw {

// Front pruning. Particles far below the running front contribute
// negligibly to the maximum and to the martingale sums; the audit records
// an upper bound on the discarded exponential weight so runs can bound the
// induced bias. The running maximum itself is never pruned, so max_final
// stays exact under every rule. A below-line rule with slope equal to the
// top of the step support and offset m_n + z - n * slope is an exact prune
// for all events above m_n + z: discarded particles cannot reach them.
struct PruneRule {
    enum class Mode { None, GapBelowMax, BelowLine, GapAndLine };

    Mode mode = Mode::None;
    double gap = 0.0;          // drop below (running max - gap)
    double line_slope = 0.0;   // drop below slope*k + offset
    double line_offset = 0.0;
    bool audit = false;
    // Soft cap on the live set (0 = off). High-Z realizations carry
    // near-front populations with a heavy tail; when the cap is breached
    // the threshold tightens to the cap-th highest position (whole lattice
    // levels kept on ties), and the audit records the discarded weight.
    std::size_t max_live = 1u << 20;

    bool uses_gap() const {
        return mode == Mode::GapBelowMax || mode == Mode::GapAndLine;
    }
    bool uses_line() const {
        return mode == Mode::BelowLine || mode == Mode::GapAndLine;
    }

    static PruneRule none() { return {}; }
    static PruneRule gap_below_max(double gap, bool audit = true);
    static PruneRule below_line(double slope, double offset, bool audit = true);
    static PruneRule gap_and_line(double gap, double slope, double offset,
                                  bool audit = true);
    // Default gap (1.5 log(n+1) + 2)/theta_bar: the live set peaks around
    // exp(theta * gap) ~ (n+1)^1.5, with the discarded weight audited.
    static PruneRule default_rule(const ModelConstants& constants, int n);
};

struct BarrierEventQuery {
    enum class Family { GBeta, E, F, Gn };

    Family family = Family::GBeta;
    double z = 0.0;  // z for E/F/Gn, beta for GBeta
    int ell = 0;     // E/F/Gn only
};

// Event registrations plus recording options for simulate().
class QuerySet {
public:
    int add_gbeta(double beta);
    // E: ancestor line stays <= j m_n/n + z through generation n-ell and
    //    some depth-ell descendant ends above m_n + z.
    // F: same with the curve raised by log(ell)/2 + (4/theta)(log[j ^ (n-ell-j)])_+.
    // Gn: some ancestor line exceeds the raised curve (strict).
    // The coupling constraint ell <= z can be relaxed for exploration.
    int add_event(BarrierEventQuery::Family family, double z, int ell,
                  bool relax_ell_bound = false);

    const std::vector<BarrierEventQuery>& queries() const { return queries_; }
    bool empty() const { return queries_.empty(); }

    bool record_traces = false;
    int traces_upto = -1;          // -1: full horizon
    bool retain_genealogy = false;
    // Record the particle positions of one generation (-1: off).
    int snapshot_generation = -1;

    // ell(z) = floor(min(z, sqrt(z) log(2+z))), at least 2.
    static int default_ell(double z);

private:
    std::vector<BarrierEventQuery> queries_;
};

struct RunRecord {
    double max_final = 0.0;
    std::vector<double> max_trace;  // eta*_k, k = 0..n (when traces recorded)
    std::vector<double> y_trace;    // Y_k = sum exp(-theta (c1 k - eta))
    std::vector<double> z_trace;    // Z_k = sum (c1 k - eta) exp(-theta (c1 k - eta))
    std::vector<std::int64_t> event_counts;  // per query; counts for E/F, 0/1 for flags
    double pruned_weight = 0.0;     // audit upper bound on discarded weight
    std::uint64_t seed = 0;
    std::uint64_t replicate = 0;
    std::size_t population_peak = 0;
    std::vector<double> snapshot_positions;  // when a snapshot was requested

    // Genealogy payload (small-n runs only).
    std::vector<std::vector<std::uint32_t>> parents;        // per generation 1..n
    std::vector<std::vector<double>> generation_positions;  // per generation 0..n
    std::vector<std::vector<std::uint32_t>> qualifying;     // per query: E/F roots

    std::int64_t lambda_count(int query_id) const { return event_counts[query_id]; }
    std::int64_t gamma_count(int query_id) const { return event_counts[query_id]; }
};

inline constexpr std::size_t kDefaultPopulationCap = 50'000'000;
inline constexpr std::size_t kGenealogyPopulationCap = 100'000;

// Forward simulation of the branching random walk for n generations.
// constants may be null when no recording option or query needs them
// (traces, audit and event curves all reference theta_bar and m_n).
// Determinism: the record is a pure function of (seed, replicate) and the
// configuration; particle streams are keyed by lineage ids, so enlarging
// the prune gap never changes the draws of surviving lineages.
RunRecord simulate(const OffspringLaw& off, const IncrementLaw& inc,
                   const ModelConstants* constants, int n, const PruneRule& prune,
                   const QuerySet& queries, std::uint64_t seed,
                   std::uint64_t replicate = 0,
                   std::size_t population_cap = kDefaultPopulationCap);

struct TraceSummary {
    std::vector<double> mean_y, se_y;
    std::vector<double> mean_z, se_z;
};

// Per-generation sample means of Y_k and Z_k over a batch.
TraceSummary martingale_traces(const std::vector<RunRecord>& batch);

// For each split depth s = 1..n-ell, the number of ordered pairs of
// distinct qualifying generation-(n-ell) particles whose last common
// ancestor sits at generation n-ell-s. Requires retained genealogy.
std::vector<std::int64_t> pair_split_histogram(const std::vector<RunRecord>& batch,
                                               int n, int ell, int query_id);

}  // namespace brw
