#pragma once

#include <string>
#include <vector>

#include "csi_intruder/channel_sim.hpp"
#include "csi_intruder/scenario_gen.hpp"
#include "csi_intruder/sensing_models.hpp"

namespace csi_intruder::defense {

/// Detector label of every perturbed sample; legitimate classes shift up by one.
inline constexpr int kPerturbedClass = 0;

enum class AdvKind { mixed, pure };

std::string to_string(AdvKind k);

struct AdvSample {
    channel::CsiFrame frame;
    AdvKind kind = AdvKind::mixed;
    std::size_t surrogate = 0;
    int source_id = -1;  // dataset sample under a mixed perturbation, -1 for pure
    double dt = 0.0;
};

struct AdvCounts {
    std::size_t mixed = 500;
    std::size_t pure = 500;
};

/// Mixed samples perturb random frames of `split`; pure samples perturb an all-zero frame.
/// Every sample draws its own surrogate, dt and receiver noise.
std::vector<AdvSample> collect_adv_samples(const scenario::Dataset& ds, scenario::Split split,
                                           const std::vector<channel::Perturbation>& surrogates,
                                           const channel::EveChannel& eve, const AdvCounts& counts,
                                           const channel::DistortionProfile& profile, std::uint64_t seed);

/// Standardized features, one column per adversarial sample.
Eigen::MatrixXd adv_features(const std::vector<AdvSample>& samples, const sensing::FeatureScaler& scaler);

/// Same architecture as `model` with one extra output, freshly initialized and trained on the
/// clean training set (labels + 1) plus the adversarial samples (label 0).
sensing::TrainResult adversarial_retrain(const nn::Network& model, const sensing::LabeledFeatures& train_set,
                                         const Eigen::MatrixXd& adv, const sensing::TrainConfig& cfg);

struct DetectionReport {
    double detection = 0.0;        // adversarial samples classified as perturbed
    double detection_mixed = 0.0;
    double detection_pure = 0.0;
    double false_alarm = 0.0;      // clean test samples classified as perturbed
    double clean_accuracy = 0.0;   // clean test samples assigned their own class
    std::size_t n_mixed = 0;
    std::size_t n_pure = 0;
    std::size_t n_clean = 0;

    nlohmann::json to_json() const;
};

DetectionReport evaluate_detection(const nn::Network& detector, const std::vector<AdvSample>& adv,
                                   const Eigen::MatrixXd& adv_x, const sensing::LabeledFeatures& clean_test);

}  // namespace csi_intruder::defense
