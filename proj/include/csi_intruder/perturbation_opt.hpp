#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "csi_intruder/channel_sim.hpp"
#include "csi_intruder/sensing_models.hpp"

namespace csi_intruder::attack {

/// Axis-aligned search box; periodic coordinates wrap instead of clamping.
struct SearchBox {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    std::vector<bool> periodic;

    std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }
    double range(std::size_t i) const { return upper[static_cast<Eigen::Index>(i)] - lower[static_cast<Eigen::Index>(i)]; }
    void project(Eigen::VectorXd& pos) const;
    Eigen::VectorXd sample(Rng& rng) const;

    static SearchBox cube(std::size_t dim, double lo, double hi);
    /// Magnitudes [0, eps] for N subcarriers followed by phases [0, 2*pi).
    static SearchBox perturbation(std::size_t n_subcarriers, double epsilon);
};

/// position = [m_1..m_N, phi_1..phi_N] -> h_delta[n] = m_n * exp(j*phi_n), clamped into the bound.
channel::Perturbation decode(const Eigen::VectorXd& position, double epsilon);
Eigen::VectorXd encode(const channel::Perturbation& p);

/// Uniform magnitudes and phases, rescaled so the infinity norm equals epsilon.
channel::Perturbation random_perturbation(std::size_t n_subcarriers, double epsilon, Rng& rng);

// --- particle swarm ----------------------------------------------------------

struct PsoParams {
    std::size_t particles = 100;
    std::size_t iterations = 1000;
    double c1 = 0.5;
    double c2 = 0.5;
    double inertia = 1.0;
    double inertia_decay = 0.9;
    double velocity_clamp = 0.5;  // fraction of each coordinate's range

    nlohmann::json to_json() const;
    static PsoParams from_json(const nlohmann::json& j);
};

struct Particle {
    Eigen::VectorXd position;
    Eigen::VectorXd velocity;
    double fitness = 0.0;
    Eigen::VectorXd best_position;
    double best_fitness = 0.0;
};

struct Swarm {
    std::vector<Particle> particles;
    Eigen::VectorXd global_best;
    double global_best_fitness = 0.0;
    std::size_t iteration = 0;
    double inertia = 1.0;
    PsoParams params;
    std::uint64_t seed = 0;
};

/// Fitness of a position; `iteration` selects the shared random draws of that iteration.
using FitnessFn = std::function<double(const Eigen::VectorXd& position, std::size_t iteration)>;

/// Uniform positions, zero velocities, bests from one fitness evaluation.
Swarm init_swarm(const SearchBox& box, const PsoParams& params, std::uint64_t seed, const FitnessFn& fitness);

/// v = w*v + c1*b1*(d_p - z) + c2*b2*(d_glo - z); z = z + v; then clamp/wrap.
void update_particle(Particle& p, const Eigen::VectorXd& global_best, double w, double c1, double c2,
                     const Eigen::VectorXd& b1, const Eigen::VectorXd& b2, const SearchBox& box,
                     double velocity_clamp);

/// One iteration: move every particle, re-evaluate, refresh bests, decay inertia.
void pso_step(Swarm& swarm, const SearchBox& box, const FitnessFn& fitness);

struct TraceRow {
    std::size_t iteration = 0;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
};

struct PsoRun {
    Swarm swarm;
    std::vector<TraceRow> trace;  // row 0 is the initialization
};

PsoRun run_pso(const SearchBox& box, const PsoParams& params, std::uint64_t seed, const FitnessFn& fitness);

// --- cross-model objective ----------------------------------------------------

struct WhiteBoxModel {
    const nn::Network* model = nullptr;
    sensing::ImportanceWeights weights;
};

struct FitnessContext {
    std::vector<WhiteBoxModel> models;
    std::vector<channel::CsiFrame> samples;
    channel::EveChannel eve;  // attacker-side channel estimate
    const sensing::FeatureScaler* scaler = nullptr;
    channel::DistortionProfile profile;
    std::size_t dt_draws = 4;
    double epsilon = 0.0;
    std::uint64_t seed = 0;

    /// Validates shapes and caches the clean hidden features; call before evaluating.
    void prepare();
    bool prepared() const { return !clean_.empty(); }

    // clean_[k][q][u]: hidden layer u of model q on sample k
    std::vector<std::vector<std::vector<Eigen::VectorXd>>> clean_;
};

/// Weighted absolute hidden-feature difference summed over models, samples and layers for one draw.
double feature_disruption(const channel::Perturbation& p, const FitnessContext& ctx, const channel::EveChannel& eve,
                          double dt, double noise_std, std::uint64_t noise_seed);

/// Mean of feature_disruption over ctx.dt_draws draws seeded by `draw_seed`.
double fitness(const channel::Perturbation& p, const FitnessContext& ctx, std::uint64_t draw_seed);

struct OptimizeResult {
    std::vector<channel::Perturbation> candidates;  // personal bests (Z)
    channel::Perturbation global_best;
    double global_best_fitness = 0.0;
    std::vector<TraceRow> trace;
};

OptimizeResult optimize(const FitnessContext& ctx, const PsoParams& params, std::uint64_t seed);

struct ScreenConfig {
    std::size_t draws = 16;
    double noise_std = 0.0;          // receiver noise per draw
    double eve_est_noise_std = 0.0;  // channel-estimation error per draw
    std::uint64_t seed = 0;
};

struct ScreenResult {
    std::size_t index = 0;
    channel::Perturbation best;
    std::vector<double> mean;
    std::vector<double> variance;
    std::vector<std::vector<double>> per_draw;  // [candidate][draw]
};

/// Per-draw disruption of one perturbation under the screening draw `d` of `cfg`.
double screening_draw(const channel::Perturbation& p, const FitnessContext& ctx, const ScreenConfig& cfg,
                      std::size_t d);

/// Scores every candidate over the same random draws and keeps the best mean
/// (ties: lower variance, then lower index).
ScreenResult robustness_screen(const std::vector<channel::Perturbation>& candidates, const FitnessContext& ctx,
                               const ScreenConfig& cfg);

// --- artifacts ----------------------------------------------------------------

/// CSV with header `n,mag,phase`.
void write_perturbation_csv(const std::filesystem::path& path, const channel::Perturbation& p);
channel::Perturbation read_perturbation_csv(const std::filesystem::path& path, double epsilon);

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);

}  // namespace csi_intruder::attack
