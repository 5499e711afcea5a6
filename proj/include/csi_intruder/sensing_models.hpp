#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "csi_intruder/channel_sim.hpp"
#include "csi_intruder/nn.hpp"
#include "csi_intruder/scenario_gen.hpp"

namespace csi_intruder::sensing {

inline constexpr std::size_t kDefaultPacketBlocks = 16;

/// Raw features: block-averaged amplitude (N x B) followed by block-averaged
/// packet-to-packet phase differences (N x B), subcarrier-major. d = 2*N*B.
/// Entries with zero magnitude contribute a phase difference of 0; their count
/// is reported through `zero_entries`.
Eigen::VectorXd featurize(const channel::CsiFrame& frame, std::size_t packet_blocks = kDefaultPacketBlocks,
                          std::size_t* zero_entries = nullptr);

/// Per-feature standardization fitted on the training split.
class FeatureScaler {
public:
    FeatureScaler() = default;
    FeatureScaler(Eigen::VectorXd mean, Eigen::VectorXd stddev, std::size_t packet_blocks);

    static FeatureScaler fit(const Eigen::MatrixXd& raw_columns, std::size_t packet_blocks);

    Eigen::VectorXd apply(const Eigen::VectorXd& raw) const;
    /// featurize + apply
    Eigen::VectorXd transform(const channel::CsiFrame& frame) const;

    std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
    std::size_t packet_blocks() const { return packet_blocks_; }

    nlohmann::json to_json() const;
    static FeatureScaler from_json(const nlohmann::json& j);

private:
    Eigen::VectorXd mean_;
    Eigen::VectorXd inv_std_;
    std::size_t packet_blocks_ = kDefaultPacketBlocks;
};

/// Standardized features of a set of frames, one column per sample.
struct LabeledFeatures {
    Eigen::MatrixXd x;
    std::vector<int> y;

    std::size_t size() const { return y.size(); }
};

FeatureScaler fit_scaler(const scenario::Dataset& ds, std::size_t packet_blocks = kDefaultPacketBlocks);
LabeledFeatures dataset_features(const scenario::Dataset& ds, scenario::Split split, const FeatureScaler& scaler);

struct ModelSpec {
    std::string name;
    std::vector<std::size_t> hidden;
    nn::Activation activation = nn::Activation::relu;
    std::uint64_t seed_salt = 0;
    bool white_box = true;
};

/// Three white-box MLPs and one held-out black-box MLP.
std::vector<ModelSpec> default_zoo();

nn::Network make_model(const ModelSpec& spec, std::size_t input_dim, std::size_t n_classes, std::uint64_t seed);

struct TrainConfig {
    std::size_t epochs = 30;
    double lr = 0.05;
    std::size_t batch = 32;
    double dropout = 0.0;
    std::uint64_t seed = 0;
};

/// Mean |dLoss/da| per hidden element (post-activation) accumulated over every batch of training.
struct TrainRecord {
    std::vector<Eigen::VectorXd> delta_bar;
    std::size_t epochs = 0;
    std::size_t steps = 0;
    double final_loss = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;

    nlohmann::json to_json() const;
    static TrainRecord from_json(const nlohmann::json& j);
};

struct TrainResult {
    nn::Network model;
    TrainRecord record;
};

/// Mini-batch SGD on softmax cross-entropy. `test` may be null.
TrainResult train(nn::Network model, const LabeledFeatures& train_set, const LabeledFeatures* test_set,
                  const TrainConfig& cfg);

/// Mean softmax cross-entropy over the columns of x.
double cross_entropy(const nn::Network& model, const Eigen::MatrixXd& x, std::span<const int> y);
/// Gradients of `cross_entropy` (mean over samples). Dropout off.
nn::Gradients cross_entropy_gradients(const nn::Network& model, const Eigen::MatrixXd& x, std::span<const int> y);

/// Hidden-layer activations followed by the logits.
std::vector<Eigen::VectorXd> forward_features(const nn::Network& model, const Eigen::VectorXd& x);

int predict(const nn::Network& model, const Eigen::VectorXd& x);
std::vector<int> predict_batch(const nn::Network& model, const Eigen::MatrixXd& x);

/// Fraction of columns whose argmax equals y + label_offset.
double accuracy(const nn::Network& model, const LabeledFeatures& data, int label_offset = 0);

enum class Weighting {
    reciprocal,    // 1 / (delta_bar + kappa)
    uniform,       // all ones (unweighted objective)
    proportional,  // delta_bar + kappa (inverted ablation)
};

std::string to_string(Weighting w);
Weighting weighting_from_string(const std::string& s);

struct ImportanceWeights {
    std::vector<Eigen::VectorXd> per_layer;

    ImportanceWeights scaled(double factor) const;
};

ImportanceWeights importance_weights(const TrainRecord& record, double kappa = 1e-8,
                                     Weighting mode = Weighting::reciprocal);

// --- checkpoints -------------------------------------------------------------

void save_model(const std::filesystem::path& path, const std::string& name, const nn::Network& model,
                const TrainRecord& record);

struct LoadedModel {
    std::string name;
    nn::Network model;
    TrainRecord record;
};

LoadedModel load_model(const std::filesystem::path& path);

}  // namespace csi_intruder::sensing
