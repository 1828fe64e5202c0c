#include "brw/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "brw/errors.hpp"
#include "brw/stats.hpp"

namespace brw {

namespace {

constexpr std::uint64_t kRootId = 0x633d237e4f1c9b25ULL;

double log_plus_min(int a, int b) {
    const int m = std::min(a, b);
    return m >= 2 ? std::log(static_cast<double>(m)) : 0.0;
}

struct EventPrep {
    // Curve value per generation for path constraints; interpretation
    // depends on the family (E/F: stay <=, Gn: flag on >, GBeta: flag on >=).
    std::vector<double> curve;
    BarrierEventQuery::Family family;
    int ell = 0;
    double terminal_threshold = 0.0;  // m_n + z for E/F subtree maxima
    int mask_bit = -1;                // E/F only
    int ell_group = -1;               // E/F only
};

struct EllGroup {
    int ell = 0;
    int start_gen = 0;  // n - ell
    bool active = false;
    std::uint32_t subtree_count = 0;
    std::vector<std::uint32_t> tags;
};

}  // namespace

PruneRule PruneRule::gap_below_max(double gap, bool audit) {
    if (!(gap > 0.0)) throw DomainError("prune gap must be positive");
    PruneRule r;
    r.mode = Mode::GapBelowMax;
    r.gap = gap;
    r.audit = audit;
    return r;
}

PruneRule PruneRule::below_line(double slope, double offset, bool audit) {
    PruneRule r;
    r.mode = Mode::BelowLine;
    r.line_slope = slope;
    r.line_offset = offset;
    r.audit = audit;
    return r;
}

PruneRule PruneRule::gap_and_line(double gap, double slope, double offset,
                                  bool audit) {
    PruneRule r = gap_below_max(gap, audit);
    r.mode = Mode::GapAndLine;
    r.line_slope = slope;
    r.line_offset = offset;
    return r;
}

PruneRule PruneRule::default_rule(const ModelConstants& constants, int n) {
    return gap_below_max((1.5 * std::log(n + 1.0) + 2.0) / constants.theta_bar, true);
}

int QuerySet::add_gbeta(double beta) {
    if (!(beta > 0.0)) throw DomainError("gbeta query requires beta > 0");
    queries_.push_back({BarrierEventQuery::Family::GBeta, beta, 0});
    return static_cast<int>(queries_.size()) - 1;
}

int QuerySet::add_event(BarrierEventQuery::Family family, double z, int ell,
                        bool relax_ell_bound) {
    if (family == BarrierEventQuery::Family::GBeta)
        throw DomainError("use add_gbeta for curve-exceedance queries");
    if (ell < 1) throw DomainError("event query requires ell >= 1");
    if (!relax_ell_bound && static_cast<double>(ell) > z)
        throw DomainError("event query requires ell <= z (relax to explore)");
    queries_.push_back({family, z, ell});
    return static_cast<int>(queries_.size()) - 1;
}

int QuerySet::default_ell(double z) {
    const int ell = static_cast<int>(
        std::floor(std::min(z, std::sqrt(z) * std::log(2.0 + z))));
    return std::max(ell, 2);
}

RunRecord simulate(const OffspringLaw& off, const IncrementLaw& inc,
                   const ModelConstants* constants, int n, const PruneRule& prune,
                   const QuerySet& queries, std::uint64_t seed,
                   std::uint64_t replicate, std::size_t population_cap) {
    if (n < 0) throw DomainError("simulate requires n >= 0");
    const bool need_constants = queries.record_traces || !queries.empty() ||
                                (prune.audit && prune.mode != PruneRule::Mode::None);
    if (need_constants && constants == nullptr)
        throw DomainError("traces, queries and audited pruning need model constants");
    if (prune.mode == PruneRule::Mode::None && n >= 1) {
        if (static_cast<double>(n) * std::log(off.rho()) > std::log(1e8))
            throw PopulationOverflow(
                "expected unpruned population rho^n exceeds 1e8; set a prune rule");
    }

    const double theta = constants ? constants->theta_bar : 0.0;
    const double c1 = constants ? constants->c1 : 0.0;
    const double mn = (constants && n >= 1) ? constants->centering(n) : 0.0;
    const double slope = n >= 1 ? mn / n : 0.0;

    // Prepare query curves and tag groups.
    std::vector<EventPrep> prep;
    std::vector<EllGroup> groups;
    int mask_bits = 0;
    for (const auto& q : queries.queries()) {
        EventPrep e;
        e.family = q.family;
        e.ell = q.ell;
        if (q.family == BarrierEventQuery::Family::GBeta) {
            e.curve.resize(static_cast<std::size_t>(n) + 1);
            for (int k = 0; k <= n; ++k)
                e.curve[k] = slope * k + q.z + 4.0 / theta * log_plus_min(k, n - k);
        } else {
            if (q.ell > n) throw DomainError("event query needs ell <= n");
            const int m = n - q.ell;
            e.curve.resize(static_cast<std::size_t>(m) + 1);
            const double lift =
                q.family == BarrierEventQuery::Family::E ? 0.0 : 0.5 * std::log(q.ell);
            for (int j = 0; j <= m; ++j) {
                const double bump =
                    q.family == BarrierEventQuery::Family::E
                        ? 0.0
                        : 4.0 / theta * log_plus_min(j, m - j);
                e.curve[j] = slope * j + q.z + lift + bump;
            }
            if (q.family != BarrierEventQuery::Family::Gn) {
                e.terminal_threshold = mn + q.z;
                e.mask_bit = mask_bits++;
                if (mask_bits > 64)
                    throw CapacityError("at most 64 E/F queries per run");
                int gi = -1;
                for (std::size_t g = 0; g < groups.size(); ++g)
                    if (groups[g].ell == q.ell) gi = static_cast<int>(g);
                if (gi < 0) {
                    groups.push_back({q.ell, n - q.ell, false, 0, {}});
                    gi = static_cast<int>(groups.size()) - 1;
                }
                e.ell_group = gi;
            }
        }
        prep.push_back(std::move(e));
    }
    const bool use_masks = mask_bits > 0;

    RunRecord rec;
    rec.seed = seed;
    rec.replicate = replicate;
    rec.event_counts.assign(prep.size(), 0);
    if (queries.retain_genealogy) rec.qualifying.resize(prep.size());

    const int trace_upto =
        queries.traces_upto < 0 ? n : std::min(queries.traces_upto, n);
    if (queries.record_traces) {
        rec.max_trace.reserve(trace_upto + 1);
        rec.y_trace.reserve(trace_upto + 1);
        rec.z_trace.reserve(trace_upto + 1);
        rec.max_trace.push_back(0.0);
        rec.y_trace.push_back(1.0);
        rec.z_trace.push_back(0.0);
    }

    // Generation-0 state: a single root at the origin.
    std::vector<double> pos{0.0}, next_pos;
    std::vector<std::uint64_t> ids{kRootId}, next_ids;
    std::vector<std::uint64_t> masks, next_masks;
    std::vector<std::uint8_t> flags(prep.size(), 0);
    std::vector<std::vector<std::uint8_t>> qual(prep.size());

    if (use_masks) masks.assign(1, 0);
    for (std::size_t qi = 0; qi < prep.size(); ++qi) {
        auto& e = prep[qi];
        switch (e.family) {
            case BarrierEventQuery::Family::GBeta:
            case BarrierEventQuery::Family::Gn: {
                const bool strict = e.family == BarrierEventQuery::Family::Gn;
                const double c0 = e.curve[0];
                if (strict ? (0.0 > c0) : (0.0 >= c0)) flags[qi] = 1;
                break;
            }
            default:
                if (0.0 <= e.curve[0]) masks[0] |= 1ULL << e.mask_bit;
                break;
        }
    }
    // ell == n groups activate at the root.
    for (auto& g : groups) {
        if (g.start_gen == 0) {
            g.active = true;
            g.subtree_count = 1;
            g.tags.assign(1, 0);
        }
    }
    auto snapshot_qualifying = [&](int gen) {
        for (std::size_t qi = 0; qi < prep.size(); ++qi) {
            const auto& e = prep[qi];
            if (e.mask_bit < 0 || n - e.ell != gen) continue;
            auto& qv = qual[qi];
            qv.resize(pos.size());
            for (std::size_t i = 0; i < pos.size(); ++i)
                qv[i] = (masks[i] >> e.mask_bit) & 1ULL;
            if (queries.retain_genealogy) {
                for (std::size_t i = 0; i < pos.size(); ++i)
                    if (qv[i]) rec.qualifying[qi].push_back(static_cast<std::uint32_t>(i));
            }
        }
    };
    snapshot_qualifying(0);

    if (queries.retain_genealogy) {
        rec.generation_positions.push_back(pos);
        rec.parents.reserve(n);
    }
    if (queries.snapshot_generation == 0) rec.snapshot_positions = pos;

    std::vector<std::vector<std::uint32_t>> next_tags(groups.size());
    std::vector<std::uint32_t> parent_row;
    std::vector<double> scratch;
    rec.population_peak = 1;

    const std::uint64_t rep_stream = detail::mix64(replicate + detail::kGamma);

    for (int g = 0; g < n; ++g) {
        const int k = g + 1;  // generation being produced
        next_pos.clear();
        next_ids.clear();
        next_masks.clear();
        for (auto& t : next_tags) t.clear();
        parent_row.clear();

        double gen_max = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < pos.size(); ++i) {
            CounterRng rng(seed, detail::mix64(rep_stream ^ ids[i]));
            const int children = off.sample(rng);
            for (int c = 0; c < children; ++c) {
                const double x = pos[i] + inc.sample(rng);
                next_pos.push_back(x);
                next_ids.push_back(
                    detail::mix64(ids[i] + detail::kGamma * (2 * c + 3)));
                gen_max = std::max(gen_max, x);
                if (use_masks) next_masks.push_back(masks[i]);
                for (std::size_t gi = 0; gi < groups.size(); ++gi) {
                    if (groups[gi].active)
                        next_tags[gi].push_back(groups[gi].tags[i]);
                }
                if (queries.retain_genealogy)
                    parent_row.push_back(static_cast<std::uint32_t>(i));
            }
        }
        if (next_pos.size() > population_cap)
            throw PopulationOverflow("live set exceeds the population cap at generation " +
                                     std::to_string(k));

        pos.swap(next_pos);
        ids.swap(next_ids);
        if (use_masks) masks.swap(next_masks);
        for (std::size_t gi = 0; gi < groups.size(); ++gi)
            if (groups[gi].active) groups[gi].tags.swap(next_tags[gi]);
        rec.population_peak = std::max(rec.population_peak, pos.size());

        // Path-constraint masks and exceedance flags for generation k.
        struct MaskUpdate {
            std::uint64_t clear_bit;
            double curve;
        };
        std::vector<MaskUpdate> updates;
        for (std::size_t qi = 0; qi < prep.size(); ++qi) {
            const auto& e = prep[qi];
            switch (e.family) {
                case BarrierEventQuery::Family::GBeta:
                    if (!flags[qi] && gen_max >= e.curve[k]) flags[qi] = 1;
                    break;
                case BarrierEventQuery::Family::Gn:
                    if (!flags[qi] && k <= n - e.ell && gen_max > e.curve[k])
                        flags[qi] = 1;
                    break;
                default:
                    if (k <= n - e.ell)
                        updates.push_back({~(1ULL << e.mask_bit), e.curve[k]});
                    break;
            }
        }
        if (!updates.empty()) {
            for (std::size_t i = 0; i < pos.size(); ++i) {
                const double p = pos[i];
                std::uint64_t m = masks[i];
                for (const auto& u : updates)
                    if (p > u.curve) m &= u.clear_bit;
                masks[i] = m;
            }
        }

        // Tag groups whose root generation is k.
        for (auto& grp : groups) {
            if (!grp.active && grp.start_gen == k) {
                grp.active = true;
                grp.subtree_count = static_cast<std::uint32_t>(pos.size());
                grp.tags.resize(pos.size());
                for (std::size_t i = 0; i < pos.size(); ++i)
                    grp.tags[i] = static_cast<std::uint32_t>(i);
            }
        }
        snapshot_qualifying(k);

        if (queries.record_traces && k <= trace_upto) {
            rec.max_trace.push_back(gen_max);
            KahanSum y, z;
            for (double p : pos) {
                const double depth = c1 * k - p;
                const double w = std::exp(-theta * depth);
                y.add(w);
                z.add(depth * w);
            }
            rec.y_trace.push_back(y.value());
            rec.z_trace.push_back(z.value());
        }

        if (queries.retain_genealogy) {
            if (pos.size() > kGenealogyPopulationCap)
                throw CapacityError("population exceeds the genealogy retention cap");
            rec.parents.push_back(parent_row);
            rec.generation_positions.push_back(pos);
        }
        if (queries.snapshot_generation == k) rec.snapshot_positions = pos;

        // Prune after all generation-k statistics are in.
        if (prune.mode != PruneRule::Mode::None && k < n) {
            double threshold = -std::numeric_limits<double>::infinity();
            if (prune.uses_gap()) threshold = gen_max - prune.gap;
            if (prune.uses_line())
                threshold =
                    std::max(threshold, prune.line_slope * k + prune.line_offset);
            if (prune.max_live > 0 && pos.size() > prune.max_live) {
                scratch.assign(pos.begin(), pos.end());
                auto nth = scratch.begin() +
                           static_cast<std::ptrdiff_t>(scratch.size() - prune.max_live);
                std::nth_element(scratch.begin(), nth, scratch.end());
                threshold = std::max(threshold, *nth);
            }
            threshold = std::min(threshold, gen_max);  // never prune the max
            std::size_t w = 0;
            std::size_t pruned = 0;
            for (std::size_t i = 0; i < pos.size(); ++i) {
                if (pos[i] >= threshold) {
                    pos[w] = pos[i];
                    ids[w] = ids[i];
                    if (use_masks) masks[w] = masks[i];
                    for (auto& grp : groups)
                        if (grp.active) grp.tags[w] = grp.tags[i];
                    ++w;
                } else {
                    ++pruned;
                }
            }
            if (pruned > 0 && prune.audit) {
                // Each discarded particle carries weight below
                // exp(-theta (c1 k - threshold)).
                rec.pruned_weight +=
                    static_cast<double>(pruned) * std::exp(-theta * (c1 * k - threshold));
            }
            pos.resize(w);
            ids.resize(w);
            if (use_masks) masks.resize(w);
            for (auto& grp : groups)
                if (grp.active) grp.tags.resize(w);
        }
    }

    rec.max_final = 0.0;
    if (n >= 1) {
        double mx = -std::numeric_limits<double>::infinity();
        for (double p : pos) mx = std::max(mx, p);
        rec.max_final = mx;
    }

    // Resolve E/F counts from subtree maxima.
    for (std::size_t qi = 0; qi < prep.size(); ++qi) {
        const auto& e = prep[qi];
        if (e.family == BarrierEventQuery::Family::GBeta ||
            e.family == BarrierEventQuery::Family::Gn) {
            rec.event_counts[qi] = flags[qi];
            continue;
        }
        const auto& grp = groups[static_cast<std::size_t>(e.ell_group)];
        std::vector<double> submax(grp.subtree_count,
                                   -std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < pos.size(); ++i)
            submax[grp.tags[i]] = std::max(submax[grp.tags[i]], pos[i]);
        std::int64_t count = 0;
        const auto& qv = qual[qi];
        for (std::size_t t = 0; t < qv.size(); ++t)
            if (qv[t] && submax[t] > e.terminal_threshold) ++count;
        rec.event_counts[qi] = count;
    }

    return rec;
}

TraceSummary martingale_traces(const std::vector<RunRecord>& batch) {
    if (batch.empty()) throw InsufficientData("martingale_traces needs a nonempty batch");
    std::size_t len = std::numeric_limits<std::size_t>::max();
    for (const auto& r : batch) len = std::min(len, r.y_trace.size());
    if (len == 0 || len == std::numeric_limits<std::size_t>::max())
        throw InsufficientData("batch has no recorded traces");

    std::vector<Welford> wy(len), wz(len);
    for (const auto& r : batch) {
        for (std::size_t k = 0; k < len; ++k) {
            wy[k].add(r.y_trace[k]);
            wz[k].add(r.z_trace[k]);
        }
    }
    TraceSummary s;
    s.mean_y.resize(len);
    s.se_y.resize(len);
    s.mean_z.resize(len);
    s.se_z.resize(len);
    for (std::size_t k = 0; k < len; ++k) {
        s.mean_y[k] = wy[k].mean();
        s.se_y[k] = wy[k].std_error();
        s.mean_z[k] = wz[k].mean();
        s.se_z[k] = wz[k].std_error();
    }
    return s;
}

std::vector<std::int64_t> pair_split_histogram(const std::vector<RunRecord>& batch,
                                               int n, int ell, int query_id) {
    const int m = n - ell;
    if (m < 0) throw DomainError("pair_split_histogram needs ell <= n");
    std::vector<std::int64_t> hist(static_cast<std::size_t>(m) + 1, 0);

    for (const auto& rec : batch) {
        if (rec.parents.size() != static_cast<std::size_t>(n) ||
            rec.qualifying.empty())
            throw CapacityError("pair_split_histogram requires retained genealogy");
        const auto& q = rec.qualifying[static_cast<std::size_t>(query_id)];
        if (q.size() < 2) continue;

        // Ancestor index of each qualifying particle at every generation.
        std::vector<std::vector<std::uint32_t>> anc(q.size());
        for (std::size_t vi = 0; vi < q.size(); ++vi) {
            auto& a = anc[vi];
            a.resize(static_cast<std::size_t>(m) + 1);
            std::uint32_t cur = q[vi];
            for (int j = m; j >= 0; --j) {
                a[static_cast<std::size_t>(j)] = cur;
                if (j > 0) cur = rec.parents[static_cast<std::size_t>(j) - 1][cur];
            }
        }
        for (std::size_t vi = 0; vi < q.size(); ++vi) {
            for (std::size_t wi = vi + 1; wi < q.size(); ++wi) {
                int split = 0;
                for (int j = m; j >= 0; --j) {
                    if (anc[vi][static_cast<std::size_t>(j)] ==
                        anc[wi][static_cast<std::size_t>(j)]) {
                        split = j;
                        break;
                    }
                }
                const int s = m - split;
                hist[static_cast<std::size_t>(s)] += 2;  // ordered pairs
            }
        }
    }
    return hist;
}

}  // namespace brw
