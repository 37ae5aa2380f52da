#ifndef RPLCIL_CONFIG_HPP
#define RPLCIL_CONFIG_HPP

#include <optional>
#include <string>

#include "rplcil/harness.hpp"

namespace rplcil {

// Flat "key = value" sections; see configs/example.cfg. Unknown sections or
// keys are rejected so typos fail loudly.
struct RunConfig {
    SuiteConfig suite;
    double train_frac = 0.7;
    bool seed_from_config = false;
};

RunConfig default_run_config();
RunConfig load_run_config(const std::string& path);

// Seed priority: --seed flag, then config, then RPLCIL_SEED, then 3.
std::uint64_t resolve_seed(const RunConfig& config, std::optional<std::uint64_t> flag_seed);
void apply_seed(RunConfig& config, std::uint64_t seed);

} // namespace rplcil

#endif
