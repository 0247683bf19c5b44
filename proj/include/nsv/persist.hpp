#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nsv/common.hpp"
#include "nsv/embed.hpp"
#include "nsv/field.hpp"
#include "nsv/lift.hpp"
#include "nsv/nn.hpp"
#include "nsv/systems.hpp"

namespace nsv::persist {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes);
std::string hash_file(const fs::path& path);

/// Write-to-temp then atomic rename; creates parent directories.
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

void write_json_file(const fs::path& path, const json& doc);
json read_json_file(const fs::path& path);

/// Simple delimited CSV: header row then one row per record.
void write_csv(const fs::path& path, const std::vector<std::string>& columns,
               const std::vector<Vec>& rows);

// ---------------------------------------------------------------------------
// Series files: one JSON header line, then tab-separated rows of
// (t, components...) in shortest-round-trip decimal text.
// ---------------------------------------------------------------------------

void write_state_trajectory(const fs::path& path, const systems::Trajectory& traj,
                            const json& params);
systems::Trajectory read_state_trajectory(const fs::path& path, json* header = nullptr);

void write_latent_series(const fs::path& path, const lift::LatentSeries& series);
lift::LatentSeries read_latent_series(const fs::path& path);

void write_nsv_trajectory(const fs::path& path, const embed::NsvTrajectory& traj);
embed::NsvTrajectory read_nsv_trajectory(const fs::path& path);

// ---------------------------------------------------------------------------
// Datasets: a manifest plus one series file per sequence. Reading verifies
// the recorded per-file hashes and reconstructs the lift from its seed.
// ---------------------------------------------------------------------------

void write_dataset(const lift::Dataset& dataset, const fs::path& dir);
lift::Dataset read_dataset(const fs::path& dir);
json read_dataset_manifest(const fs::path& dir);

// ---------------------------------------------------------------------------
// Checkpoints: architecture specs plus flat row-major parameter arrays. The
// loader validates the architecture fingerprint and recorded provenance.
// ---------------------------------------------------------------------------

json mlp_to_json(const nn::MlpParams& params);
nn::MlpParams mlp_from_json(const json& doc);

void write_embedding(const fs::path& path, const embed::EmbeddingModel& model,
                     const json& metadata);
embed::EmbeddingModel read_embedding(const fs::path& path, json* metadata = nullptr);

void write_field_model(const fs::path& path, const field::FieldModel& model,
                       const json& metadata);
field::FieldModel read_field_model(const fs::path& path, json* metadata = nullptr);

// ---------------------------------------------------------------------------
// Provenance: artifacts record the hash of every input they were derived
// from; checking recomputes and refuses on any mismatch.
// ---------------------------------------------------------------------------

json provenance_of(const std::vector<fs::path>& inputs);
void check_provenance(const json& provenance);

}  // namespace nsv::persist
