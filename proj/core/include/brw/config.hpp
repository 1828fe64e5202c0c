#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "brw/laws.hpp"
#include "brw/model.hpp"
#include "brw/simulator.hpp"

namespace brw {

// Run configuration. The on-disk format is a TOML subset (tables, arrays
// of tables, strings, integers, booleans, arrays, inline tables). Real
// numbers are written as quoted decimal strings so the canonical form, and
// therefore the config hash, never depends on float formatting.

struct DiagnosticsConfig {
    std::vector<std::string> list;
    std::vector<double> tail_z{2, 3, 4, 5, 6, 7, 8};
    double z_probe = 3.0;
    int mixture_k = 8;
    int bins = 10;
    double theta_tolerance = 0.15;
    double tightness_factor = 3.0;
    double delta = 0.0;  // 0: use theta_bar / 4
    double ratio_bound = 1.5;

    bool wants(const std::string& name) const;
};

struct QueryConfig {
    BarrierEventQuery::Family family = BarrierEventQuery::Family::GBeta;
    double z = 0.0;
    int ell = 0;  // 0: ell(z) rule
};

struct RunConfig {
    std::vector<std::pair<int, double>> offspring_pmf;
    std::optional<IncrementLaw> increment;

    int horizon = 1;
    std::size_t replicates = 1;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string out_dir;

    enum class PruneMode { None, Default, Gap, Line };
    PruneMode prune_mode = PruneMode::Default;
    double prune_gap = 0.0;
    double prune_slope = 0.0;
    double prune_offset = 0.0;
    bool prune_audit = true;

    bool record_traces = false;
    int traces_upto = -1;
    bool retain_genealogy = false;

    std::vector<QueryConfig> queries;
    DiagnosticsConfig diagnostics;

    nlohmann::json canonical;  // validated tree, reals still decimal strings
    std::string hash_hex;      // SHA-256 of the canonical serialization

    OffspringLaw offspring() const;
    const IncrementLaw& increment_law() const;
    PruneRule prune_rule(const ModelConstants* constants) const;
    QuerySet query_set() const;
    // Whether any consumer (traces, queries, audit, diagnostics) needs
    // calibrated constants.
    bool needs_constants() const;
};

// Parse the TOML subset into a JSON tree (objects/arrays/strings/
// integers/booleans). Unquoted reals are rejected with a ConfigError.
nlohmann::json parse_toml_subset(const std::string& text);

RunConfig config_from_json(const nlohmann::json& tree);
RunConfig load_config(const std::string& path);

std::string sha256_hex(std::string_view bytes);

// Decimal-string to double with full validation.
double parse_decimal(const std::string& text);

}  // namespace brw
