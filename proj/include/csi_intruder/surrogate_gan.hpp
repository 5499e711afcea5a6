#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "csi_intruder/channel_sim.hpp"
#include "csi_intruder/nn.hpp"

namespace csi_intruder::gan {

/// [mag/eps ; phase/2pi], length 2N.
Eigen::VectorXd normalize(const channel::Perturbation& p);
/// Inverse of normalize; magnitudes clamped into [0, eps], phases wrapped.
channel::Perturbation denormalize(const Eigen::VectorXd& x, double epsilon);

/// Layer chain {d, 128, 32, 16, 32, 128, d}; relu hidden, identity output.
nn::Network make_autoencoder(std::size_t dim, std::uint64_t seed);
/// Index of the layer whose output is the 16-wide embedding.
inline constexpr std::size_t kEmbeddingLayer = 2;

/// Mean squared reconstruction error of x.
double energy(const nn::Network& net, const Eigen::VectorXd& x);
/// Per-column energies.
Eigen::VectorXd energies(const nn::Network& net, const Eigen::MatrixXd& x);
/// Encoder output for each column.
Eigen::MatrixXd embeddings(const nn::Network& net, const Eigen::MatrixXd& x);

/// mean(real energy) + mean(max(0, thr - fake energy)).
double disc_loss(const Eigen::VectorXd& real_energy, const Eigen::VectorXd& fake_energy, double thr);
double disc_loss(const nn::Network& d_net, const Eigen::MatrixXd& real_batch, const Eigen::MatrixXd& fake_batch,
                 double thr);

/// Mean squared pairwise cosine over i != j of the embedding columns; 0 for a single column.
double pulling_away(const Eigen::MatrixXd& emb);
/// Gradient of pulling_away with respect to each embedding column.
Eigen::MatrixXd pulling_away_gradient(const Eigen::MatrixXd& emb);

/// mean fake energy + lambda_pt * pulling_away(embeddings).
double gen_loss(const Eigen::VectorXd& fake_energy, const Eigen::MatrixXd& emb, double lambda_pt);
double gen_loss(const nn::Network& d_net, const Eigen::MatrixXd& fake_batch, double lambda_pt);

/// Gradients of the batch discriminator loss with respect to the discriminator.
/// Dropout is active only when `rng` is given. The loss is written to `loss` when non-null.
nn::Gradients disc_loss_gradients(const nn::Network& disc, const Eigen::MatrixXd& real, const Eigen::MatrixXd& fake,
                                  double thr, double dropout = 0.0, Rng* rng = nullptr, double* loss = nullptr);

/// Gradients of the generator loss (fake energy + pulling-away term) with respect to the generator,
/// propagated through the fixed discriminator.
nn::Gradients gen_loss_gradients(const nn::Network& gen, const nn::Network& disc, const Eigen::MatrixXd& ran,
                                 double lambda_pt, double gen_dropout = 0.0, double disc_dropout = 0.0,
                                 Rng* rng = nullptr, double* loss = nullptr);

struct GanConfig {
    double thr_scale = 1.0;  // thr = thr_scale * mean real energy under the pretrained autoencoder
    double lr = 0.01;
    std::size_t batch = 64;
    double dropout = 0.5;            // discriminator hidden layers
    double generator_dropout = 0.5;  // generator hidden layers
    double stop_loss = 0.1;
    double lambda_pt = 0.1;
    std::size_t max_epochs = 2000;
    std::size_t pretrain_epochs = 1000;
    double pretrain_dropout = 0.5;
    double pretrain_lr = 0.001;
    double jitter = 0.25;  // half-width of the uniform noise forming the generator input

    void validate() const;
    nlohmann::json to_json() const;
    static GanConfig from_json(const nlohmann::json& j);
};

struct LossRow {
    std::size_t epoch = 0;
    double disc_loss = 0.0;
    double gen_loss = 0.0;
};

struct GanResult {
    nn::Network generator;
    nn::Network discriminator;
    double thr = 0.0;
    double pretrain_energy = 0.0;  // mean real energy under the pretrained autoencoder
    std::size_t epochs = 0;
    std::string reason;  // "converged" or "max_epochs"
    std::vector<LossRow> trace;
};

/// Normalized input: x + U[-jitter, jitter] per coordinate, clipped to [0, 1].
Eigen::MatrixXd jitter_inputs(const Eigen::MatrixXd& x, double jitter, Rng& rng);

/// Trains generator and discriminator in turn on the normalized candidate set (one column per candidate).
GanResult train_gan(const Eigen::MatrixXd& z, const GanConfig& cfg, std::uint64_t seed);

/// Generator outputs for jittered copies of `anchor` (normalized), decoded into the bound.
/// A positive `dropout` keeps the generator's dropout masks active while sampling.
std::vector<channel::Perturbation> sample_surrogates(const nn::Network& generator, const Eigen::VectorXd& anchor,
                                                     std::size_t count, double epsilon, double jitter, double dropout,
                                                     std::uint64_t seed);

struct ScheduleBlock {
    std::size_t start = 0;
    std::size_t end = 0;  // exclusive
    std::size_t surrogate = 0;
};

struct SwitchSchedule {
    double duration = 0.2;
    double packet_rate = 1000.0;
    std::size_t block_packets = 0;
    std::vector<ScheduleBlock> blocks;

    std::size_t total_packets() const { return blocks.empty() ? 0 : blocks.back().end; }
};

/// Blocks of ceil(duration * rate) packets, surrogates drawn uniformly without immediate repetition.
SwitchSchedule schedule_switch(std::size_t n_surrogates, double duration, double packet_rate,
                               std::size_t total_packets, std::uint64_t seed);

/// Mean Euclidean distance over all unordered pairs of columns.
double mean_pairwise_distance(const Eigen::MatrixXcd& columns);

// --- artifacts ----------------------------------------------------------------

void write_loss_trace_csv(const std::filesystem::path& path, const std::vector<LossRow>& trace);
void write_schedule_csv(const std::filesystem::path& path, const SwitchSchedule& schedule);
SwitchSchedule read_schedule_csv(const std::filesystem::path& path, double duration, double packet_rate);

}  // namespace csi_intruder::gan
