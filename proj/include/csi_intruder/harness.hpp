#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "csi_intruder/config.hpp"

namespace csi_intruder::harness {

enum class Stage { gen_data, train_models, optimize, train_gan, attack_eval, defense_eval, duration_sweep, report };

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

/// Every stage in execution order.
const std::vector<Stage>& pipeline_order();
/// Direct upstream stages.
std::vector<Stage> upstream(Stage s);
/// Transitive upstream stages in pipeline order.
std::vector<Stage> ancestors(Stage s);

std::filesystem::path stage_dir(const RunConfig& cfg, Stage s);
bool stage_complete(const RunConfig& cfg, Stage s);
/// Throws DependencyError naming the first missing upstream stage, ConsistencyError on a seed mismatch.
void check_dependencies(const RunConfig& cfg, Stage s);

void run_stage(const RunConfig& cfg, Stage s);
void run_pipeline(const RunConfig& cfg);

/// Process exit status for an error kind (0 is success).
int exit_code(const std::string& error_kind);

// --- evaluation building blocks -----------------------------------------------

struct NamedModel {
    std::string name;
    nn::Network model;
    bool white_box = true;
};

/// An attack arm; an empty perturbation list means no attack.
struct ArmSpec {
    std::string name;
    std::vector<channel::Perturbation> perturbations;
};

struct ArmResult {
    std::string model;
    std::string arm;
    std::vector<double> per_rep;
    double mean = 0.0;
    double std = 0.0;  // population standard deviation over repetitions
};

struct AttackEvalParams {
    std::size_t repetitions = 10;
    double switch_duration = 0.2;
    channel::DistortionProfile profile;  // noise_std is the receiver noise during evaluation
    std::uint64_t seed = 0;
};

/// The eval set is treated as one continuous packet stream (frame k holds packets [kM, (k+1)M)).
/// Each repetition draws one switching schedule and one dt per block; every arm shares them, and
/// arms with a single perturbation keep it for every block.
std::vector<ArmResult> attack_eval(const std::vector<NamedModel>& models, const sensing::FeatureScaler& scaler,
                                   const std::vector<const scenario::LabeledSample*>& eval_set,
                                   const channel::EveChannel& eve, const std::vector<ArmSpec>& arms,
                                   const AttackEvalParams& params);

/// Constant magnitude equal to the RMS magnitude of `ref` (same Euclidean norm) with uniform phases.
channel::Perturbation equal_norm_random(const channel::Perturbation& ref, Rng& rng);

/// Variance across the elements of hidden layer `layer` of (attacked - clean) features,
/// averaged over frames. Each frame gets its own dt.
double feature_difference_variance(const nn::Network& model, std::size_t layer, const sensing::FeatureScaler& scaler,
                                   const std::vector<const scenario::LabeledSample*>& frames,
                                   const channel::EveChannel& eve, const channel::Perturbation& p,
                                   const channel::DistortionProfile& profile, std::uint64_t seed);

/// std / mean (population); 0 when the mean is 0.
double coefficient_of_variation(const std::vector<double>& values);

/// Mean pairwise distance of the received surrogates h_eve * delta_i over that of `count`
/// noisy receptions of h_eve * best.
struct DiversityResult {
    double surrogate_distance = 0.0;
    double repeat_distance = 0.0;
    double ratio = 0.0;
};

DiversityResult surrogate_diversity(const std::vector<channel::Perturbation>& surrogates,
                                    const channel::Perturbation& best, const channel::EveChannel& eve,
                                    double noise_std, std::size_t count, std::uint64_t seed);

/// Mean receiver amplitude over the training split.
double mean_amplitude(const scenario::Dataset& ds);

// --- run artifacts ---------------------------------------------------------------

/// The first `samples_per_class` training samples of each label, the attacker's fitness set.
std::vector<const scenario::LabeledSample*> fitness_samples(const RunConfig& cfg, const scenario::Dataset& ds);

/// Objective over the white-box entries of `models`; the context points into `models` and `scaler`.
attack::FitnessContext make_fitness_context(const RunConfig& cfg, const scenario::Dataset& ds,
                                            const sensing::FeatureScaler& scaler,
                                            const std::vector<NamedModel>& models,
                                            const std::vector<sensing::TrainRecord>& records,
                                            const channel::EveChannel& eve_estimate, sensing::Weighting weighting);

/// Persisted outputs of gen-data, train-models and optimize.
struct RunArtifacts {
    scenario::Dataset data;
    sensing::FeatureScaler scaler;
    std::vector<NamedModel> models;
    std::vector<sensing::TrainRecord> records;
    channel::EveChannel eve_truth;
    channel::EveChannel eve_estimate;
};

RunArtifacts load_run(const RunConfig& cfg);

}  // namespace csi_intruder::harness
