#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "csi_intruder/channel_sim.hpp"

namespace csi_intruder::scenario {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Moving-object path: tau(m) = base_delay + amplitude * sin(2*pi*freq*m/rate + jitter).
struct DynamicPathSpec {
    double attenuation = 0.25;
    double base_delay = 30e-9;  // s
    double amplitude = 0.25e-9; // s
    double freq = 2.0;          // Hz
    Range jitter{0.0, 0.0};     // rad, drawn per instance
};

/// Static reflector whose attenuation/delay are drawn per instance from the ranges.
struct StaticPathRange {
    Range attenuation;
    Range delay;
};

struct StateClassSpec {
    int class_id = 0;
    std::vector<DynamicPathSpec> dynamic_paths;
    std::vector<StaticPathRange> static_paths;
};

enum class Split { train, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct LabeledSample {
    std::size_t id = 0;
    channel::CsiFrame frame;
    int label = 0;
    Split split = Split::train;
    std::uint64_t seed = 0;
};

struct SampleConfig {
    channel::SubcarrierGrid grid;
    std::size_t m_packets = 128;
    // Receiver noise std relative to the mean clean amplitude of each frame.
    double noise_rel = 0.01;
};

/// Checks class ids cover [0, G) and modulation frequencies are at least `min_freq_gap` apart.
void validate_class_specs(const std::vector<StateClassSpec>& specs, double min_freq_gap);

LabeledSample gen_class_sample(const StateClassSpec& spec, const SampleConfig& cfg, std::uint64_t instance_seed);

/// Builds the class specs of a named preset: gesture, respiration, gait, localization.
std::vector<StateClassSpec> make_preset(const std::string& preset, int n_classes, std::uint64_t env_seed);

/// Minimum modulation-frequency gap enforced for a preset.
double preset_min_freq_gap(const std::string& preset);

struct DatasetManifest {
    SampleConfig sample_config;
    std::string preset;
    int n_classes = 0;
    std::size_t train_per_class = 0;
    std::size_t test_per_class = 0;
    std::uint64_t master_seed = 0;
    double epsilon = 0.0;
    double epsilon_percentile = 95.0;

    struct Entry {
        std::size_t id = 0;
        int label = 0;
        Split split = Split::train;
        std::uint64_t seed = 0;
        std::string file;
    };
    std::vector<Entry> files;
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

struct Dataset {
    DatasetManifest manifest;
    std::vector<LabeledSample> samples;

    std::vector<const LabeledSample*> split(Split s) const;
};

/// Peak per-subcarrier amplitude deviation from its temporal mean, max over (n, m).
double amplitude_deviation(const channel::CsiFrame& frame);

/// Linear-interpolation percentile (q in [0, 100]).
double percentile(std::vector<double> values, double q);

/// epsilon = percentile over training samples of amplitude_deviation.
double compute_epsilon(const std::vector<LabeledSample>& samples, double q);

struct DatasetCounts {
    std::size_t train_per_class = 50;
    std::size_t test_per_class = 20;
};

/// In-memory generation; throws DegenerateDatasetError when epsilon is zero.
Dataset generate_dataset(const std::vector<StateClassSpec>& specs, const DatasetCounts& counts,
                         std::uint64_t master_seed, const SampleConfig& cfg, const std::string& preset = "custom",
                         double epsilon_percentile = 95.0);

/// Writes manifest.json, labels.csv and frames/sample_<id>.csv.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

Dataset build_dataset(const std::vector<StateClassSpec>& specs, const DatasetCounts& counts, std::uint64_t master_seed,
                      const SampleConfig& cfg, const std::filesystem::path& dir, const std::string& preset = "custom",
                      double epsilon_percentile = 95.0);

Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace csi_intruder::scenario
