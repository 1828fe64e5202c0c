#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace brw::acceptance {

// One acceptance criterion outcome. `blocked` marks criteria whose stated
// model fails the calibration preconditions; they run, report the blocking
// analysis, and count as failures.
struct CriterionResult {
    CriterionResult() = default;
    CriterionResult(std::string id_, std::string name_)
        : id(std::move(id_)), name(std::move(name_)) {}

    std::string id;
    std::string name;
    bool pass = false;
    bool blocked = false;
    std::string detail;
    double seconds = 0.0;
};

struct Options {
    int workers = 8;
    std::uint64_t seed = 0xb10cba5e;
    std::string scratch_dir = "acceptance-scratch";
    // Thin the Monte Carlo replicate counts (development smoke runs only;
    // the official gate runs at full size).
    bool quick = false;
};

std::vector<CriterionResult> run_all(const Options& options);

// Individual criteria (shared context carries the companion tail fit from
// A09 into A11).
struct Context;
CriterionResult a01_calibration(Context&);
CriterionResult a02_oracle_enumeration(Context&);
CriterionResult a03_simulator_dkw(Context&);
CriterionResult a04_martingale_means(Context&);
CriterionResult a05_ballot_scaling(Context&);
CriterionResult a06_beta_star_stated(Context&);
CriterionResult a06s_beta_star_supplement(Context&);
CriterionResult a07_drift_stated(Context&);
CriterionResult a07s_drift_supplement(Context&);
CriterionResult a08_positivity_clt(Context&);
CriterionResult a09_tail_stated(Context&);
CriterionResult a09l_tail_companion(Context&);
CriterionResult a10_moment_ratios_stated(Context&);
CriterionResult a10l_moment_ratios_companion(Context&);
CriterionResult a11_mixture_stated(Context&);
CriterionResult a11l_mixture_companion(Context&);
CriterionResult a12_barrier_bound(Context&);
CriterionResult a13_determinism(Context&);

void print_results(const std::vector<CriterionResult>& results, std::ostream& out);
bool all_pass(const std::vector<CriterionResult>& results);

}  // namespace brw::acceptance
