#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "nsv/analysis.hpp"
#include "nsv/embed.hpp"
#include "nsv/field.hpp"
#include "nsv/lift.hpp"
#include "nsv/systems.hpp"

namespace nsv::config {

using json = nlohmann::json;

struct DimensionConfig {
    std::size_t k_min = 10;
    std::size_t k_max = 20;
    std::size_t subsample_cap = 5000;
};

/// Long-sequence generation settings for the chaos analysis: half the
/// sequences start in the low-energy box, half in the high-energy box, and
/// every base state gets a nearby partner so near-pairs exist.
struct ChaosRunConfig {
    std::size_t n_sequences = 100;
    std::size_t seq_len = 600;
    systems::AmplitudeRange low_range;
    systems::AmplitudeRange high_range;
    double pair_perturbation = 1e-3;
    analysis::ChaosConfig metrics;
};

struct CycleRunConfig {
    double probe_time = 10.0;
    std::size_t probes = 3;
    std::size_t substeps = 4;
    analysis::LimitCycleConfig detector;
};

struct SynthesisConfig {
    std::vector<double> gammas{1.0, 2.0, 4.0};
    double horizon_time = 2.0;
    std::size_t substeps = 4;
    std::size_t probes = 5;
};

struct AnalysisConfig {
    analysis::EquilibriumSearchParams equilibria;
    ChaosRunConfig chaos;
    CycleRunConfig cycles;
    SynthesisConfig synthesis;
};

/// Whole-run configuration. Sub-module seeds are never stored: they are
/// derived from the one global seed by role when the config is resolved.
struct PipelineConfig {
    int format_version = 1;
    std::uint64_t seed = 1;
    std::string out_dir = "runs/out";
    lift::DatasetConfig dataset;
    DimensionConfig dimension;
    embed::EmbedConfig embed;
    bool embed_auto_dim = true;  // adopt the rounded dimension estimate
    field::FieldTrainConfig field;
    AnalysisConfig analysis;
};

/// Desk-scale defaults for "spring_mass", "single_pendulum",
/// "double_pendulum", or "hopf".
PipelineConfig default_config(const std::string& system_name);

/// Push the global seed into every sub-config by role derivation.
void resolve_seeds(PipelineConfig& cfg);

void validate(const PipelineConfig& cfg);

json system_params_to_json(const systems::SystemParams& params);
systems::SystemParams system_params_from_json(const json& doc);
json dataset_config_to_json(const lift::DatasetConfig& cfg);
lift::DatasetConfig dataset_config_from_json(const json& doc);

json to_json(const PipelineConfig& cfg);
PipelineConfig from_json(const json& doc);

PipelineConfig load(const std::string& path);
void save(const PipelineConfig& cfg, const std::string& path);

}  // namespace nsv::config
