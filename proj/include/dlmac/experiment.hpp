#pragma once

#include "dlmac/config.hpp"
#include "dlmac/mcs_ladder.hpp"
#include "dlmac/neuralkit.hpp"
#include "dlmac/simcore.hpp"
#include "dlmac/spectrum.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dlmac {

// Builders that turn a flat experiment config into the library's option
// structs. Absent keys keep the struct defaults.

/// `synth.*` plus one `interferer.<name>.*` block per name listed in
/// `synth.interferers`.
SynthScenario scenario_from_config(const Config& cfg);
ChannelMapOptions channel_map_options_from(const Config& cfg);
LabelConfig label_config_from(const Config& cfg);
TrainConfig train_config_from(const Config& cfg);

/// Network for `task`. jcara: `model.arch = lstm` (K1 steps of one TXOP
/// each, then a dense layer) or `dnn` (flat window through
/// `model.dnn_hidden`). switch: ReLU MLP over `model.switch_hidden`.
Architecture architecture_from(const Config& cfg, TaskKind task);

/// Everything but the policy comes from `sim.*`, `traffic.*`, `csma.*`,
/// `arf.*`, `iwl.*`, `switch.*` and `label.*`.
RunConfig run_config_from(const Config& cfg, PolicyKind policy = PolicyKind::dlmac);

/// `sim.policies`, default `dlmac`.
std::vector<PolicyKind> policies_from(const Config& cfg);

/// `sim.repetitions` consecutive seeds starting at `base`.
std::vector<std::uint64_t> seeds_from(const Config& cfg, std::uint64_t base);

/// Whether `key` is a recognised experiment key.
bool is_known_key(std::string_view key);

/// Rejects unknown keys and values that do not parse into valid option
/// structs. Throws ConfigError.
void validate_config(const Config& cfg);

/// Rows [begin, begin + count) of a processed trace; count 0 takes the rest.
ProcessedTrace trace_segment(const ProcessedTrace& trace, std::size_t begin, std::size_t count = 0);

// ---------------------------------------------------------------------------
// Sweeps.

struct SweepAxis {
    std::string key; ///< config key the values are written to
    std::vector<std::string> values;
};

/// `sweep.<key> = v1, v2, ...` entries in key order.
std::vector<SweepAxis> sweep_axes(const Config& cfg);

struct RunSpec {
    std::string label;
    RunConfig run;
    std::uint64_t seed = 0;
};

/// Cartesian product of the sweep axes, then policies, then seeds. Each
/// point's label is the policy name followed by `[key:value;...]` when any
/// axis is present.
std::vector<RunSpec> expand_runs(const Config& cfg, std::span<const std::uint64_t> seeds);

/// Runs every spec on `trace`, `jobs` at a time. Reports come back in spec
/// order whatever the scheduling.
std::vector<SimReport> run_many(const ProcessedTrace& trace, std::span<const RunSpec> specs, const Models& models,
                                std::size_t jobs);

} // namespace dlmac
