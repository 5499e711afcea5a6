#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csi_intruder/defense.hpp"
#include "csi_intruder/perturbation_opt.hpp"
#include "csi_intruder/scenario_gen.hpp"
#include "csi_intruder/sensing_models.hpp"
#include "csi_intruder/surrogate_gan.hpp"

namespace csi_intruder::harness {

/// The shipped configuration schema.
const nlohmann::json& config_schema();

/// Checks `doc` against a JSON-schema subset (type, properties, required,
/// additionalProperties, enum, minimum/maximum and their exclusive forms, items).
/// Returns one "path: problem" line per violation.
std::vector<std::string> validate_schema(const nlohmann::json& schema, const nlohmann::json& doc);

/// Sets a dotted key; the value is parsed as JSON when possible, otherwise kept as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

struct DataConfig {
    std::string preset = "gesture";
    int classes = 6;
    std::size_t train_per_class = 50;
    std::size_t test_per_class = 20;
    scenario::SampleConfig sample;
    double epsilon_percentile = 95.0;
};

struct ModelsConfig {
    std::size_t epochs = 30;
    double lr = 0.05;
    std::size_t batch = 32;
    std::size_t packet_blocks = sensing::kDefaultPacketBlocks;
};

struct AttackConfig {
    std::size_t eve_paths = 3;
    double eve_gain = 3.0;  // Eve's transmit amplitude relative to the legitimate transmitter
    double eve_est_noise_rel = 0.01;
    channel::DistortionProfile profile;
    double kappa = 1e-8;
    sensing::Weighting weighting = sensing::Weighting::reciprocal;
    std::size_t samples_per_class = 2;
    std::size_t dt_draws = 4;
};

struct ScreenConfig {
    std::size_t draws = 16;
    double noise_rel = 0.01;
    std::size_t fresh_draws = 64;
};

struct GanRunConfig {
    gan::GanConfig gan;
    std::size_t surrogates = 100;
    double sample_dropout = 0.1;
};

struct EvalConfig {
    std::size_t repetitions = 10;
    double switch_duration = 0.2;
    double noise_rel = 0.0;
    std::vector<double> sweep_durations{0.02, 0.1, 0.2, 1.0, 4.0, 8.0};
    std::size_t sweep_repetitions = 3;
    std::size_t diversity_count = 100;
};

struct DefenseConfig {
    defense::AdvCounts train{500, 500};
    defense::AdvCounts eval{200, 200};
    std::size_t epochs = 30;
    double lr = 0.01;
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::filesystem::path out = "runs/default";
    DataConfig data;
    ModelsConfig models;
    AttackConfig attack;
    attack::PsoParams pso;
    ScreenConfig screen;
    GanRunConfig gan;
    EvalConfig eval;
    DefenseConfig defense;

    /// Fully resolved document (every field present).
    nlohmann::json to_json() const;
    /// Validates against the schema and fills unspecified fields with defaults.
    static RunConfig from_json(const nlohmann::json& doc);
};

/// Reads a config file, applies `--set` overrides, then the seed and output overrides.
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {},
                      std::optional<std::uint64_t> seed = std::nullopt,
                      std::optional<std::filesystem::path> out = std::nullopt);

}  // namespace csi_intruder::harness
