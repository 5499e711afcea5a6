#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "csi_intruder/common.hpp"

namespace csi_intruder::channel {

/// OFDM subcarrier layout and packet timing.
struct SubcarrierGrid {
    std::size_t n_subcarriers = 32;
    double center_freq = 2.437e9;  // Hz
    double spacing = 312.5e3;      // Hz, bandwidth between adjacent subcarriers
    double packet_rate = 1000.0;   // packets per second

    /// f_n = center + (n - N/2) * spacing
    double freq(std::size_t n) const {
        return center_freq + (static_cast<double>(n) - static_cast<double>(n_subcarriers) / 2.0) * spacing;
    }

    void validate() const;
    bool operator==(const SubcarrierGrid&) const = default;
};

nlohmann::json to_json(const SubcarrierGrid& g);
SubcarrierGrid grid_from_json(const nlohmann::json& j);

struct StaticDelay {
    double tau = 0.0;
};

/// tau(m) = base + amplitude * sin(2*pi*freq*m/packet_rate + phase)
struct SinusoidalDelay {
    double base = 0.0;
    double amplitude = 0.0;
    double freq = 0.0;
    double phase = 0.0;
};

/// Explicit per-packet delays; length must equal the frame's packet count.
struct SampledDelay {
    std::vector<double> tau;
};

using DelayTrajectory = std::variant<StaticDelay, SinusoidalDelay, SampledDelay>;

struct Path {
    double attenuation = 1.0;
    DelayTrajectory delay = StaticDelay{};
};

double delay_at(const DelayTrajectory& d, std::size_t m, double packet_rate);

using PathSet = std::vector<Path>;

void validate_paths(const PathSet& paths, std::size_t m_packets, double packet_rate);

/// N x M matrix of complex CSI (rows are subcarriers, columns are packets).
class CsiFrame {
public:
    CsiFrame() = default;
    CsiFrame(SubcarrierGrid grid, std::size_t m_packets);
    CsiFrame(SubcarrierGrid grid, Eigen::MatrixXcd values);

    const SubcarrierGrid& grid() const { return grid_; }
    std::size_t n_subcarriers() const { return static_cast<std::size_t>(values_.rows()); }
    std::size_t n_packets() const { return static_cast<std::size_t>(values_.cols()); }

    const Eigen::MatrixXcd& values() const { return values_; }
    Eigen::MatrixXcd& values() { return values_; }

    cplx operator()(std::size_t n, std::size_t m) const { return values_(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)); }
    cplx& operator()(std::size_t n, std::size_t m) { return values_(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)); }

    bool all_finite() const;

private:
    SubcarrierGrid grid_;
    Eigen::MatrixXcd values_;
};

/// Per-subcarrier attack payload H_delta with its amplitude bound.
struct Perturbation {
    Eigen::VectorXcd h_delta;
    double epsilon = 0.0;

    double inf_norm() const;
    bool within_bound(double slack = 1e-12) const;

    static Perturbation zero(std::size_t n, double epsilon);
};

struct DistortionProfile {
    // Transmission delay between attacker and legitimate transmitter.
    bool enable_time_offset = true;
    double dt_min = 0.0;
    double dt_max = 50e-9;
    // Residual carrier frequency offset, applied as exp(-j*2*pi*cfo*m/packet_rate).
    bool enable_cfo = false;
    double cfo = 0.0;
    // Sampling frequency offset / packet detection delay phase error.
    bool enable_sfo_pdd = false;
    double sfo_pdd_phase_error = 0.0;  // seconds (tau_sp)
    // Complex Gaussian noise per received entry.
    double noise_std = 0.0;

    void validate(const SubcarrierGrid& grid) const;
    double draw_dt(Rng& rng) const;
};

nlohmann::json to_json(const DistortionProfile& p);
DistortionProfile profile_from_json(const nlohmann::json& j);

struct EveChannel {
    Eigen::VectorXcd h_eve;
    double est_noise_std = 0.0;

    void validate(const SubcarrierGrid& grid) const;
};

struct EvePathDraw {
    std::vector<double> attenuation;
    std::vector<double> delay;
};

// --- synthesis -------------------------------------------------------------

CsiFrame synthesize_csi(const PathSet& paths, const SubcarrierGrid& grid, std::size_t m_packets);

Perturbation apply_time_offset(const Perturbation& p, double dt, const SubcarrierGrid& grid);

CsiFrame apply_residual_offsets(const CsiFrame& frame, const DistortionProfile& profile);

/// Draws L static paths with alpha in [0.2, 1.0] and tau in [0, 200 ns].
EvePathDraw draw_eve_paths(std::uint64_t seed, std::size_t l_paths);
EveChannel eve_channel_from_paths(const EvePathDraw& paths, const SubcarrierGrid& grid, double est_noise_std = 0.0);
EveChannel draw_eve_channel(std::uint64_t seed, const SubcarrierGrid& grid, std::size_t l_paths, double est_noise_std = 0.0);

/// Attacker-side estimate: true channel plus complex Gaussian estimation noise.
EveChannel estimate_eve_channel(const EveChannel& truth, std::uint64_t seed);

/// clean[n,m] + h_eve[n] * h_delta[n] * exp(-j*2*pi*dt*f_n) + noise, one dt for the whole frame.
CsiFrame contaminate(const CsiFrame& clean, const EveChannel& eve, const Perturbation& p, double dt,
                     const DistortionProfile& profile, std::uint64_t noise_seed = 0);

/// A packet range [start, end) carrying one perturbation with its own dt.
struct PacketSegment {
    std::size_t start = 0;
    std::size_t end = 0;
    const Perturbation* perturbation = nullptr;
    double dt = 0.0;
};

/// Contamination where different packet ranges carry different perturbations.
CsiFrame contaminate_segments(const CsiFrame& clean, const EveChannel& eve, std::span<const PacketSegment> segments,
                              const DistortionProfile& profile, std::uint64_t noise_seed = 0);

void add_receiver_noise(CsiFrame& frame, double noise_std, std::uint64_t seed);

// --- persistence -----------------------------------------------------------

/// CSV with header `n,m,re,im`, one row per entry, shortest round-trip decimals.
void write_frame_csv(const std::filesystem::path& path, const CsiFrame& frame);
CsiFrame read_frame_csv(const std::filesystem::path& path, const SubcarrierGrid& grid, std::size_t m_packets);

/// CSV plus `<stem>.json` sidecar recording grid, seed, and provenance.
void save_frame(const std::filesystem::path& csv_path, const CsiFrame& frame, std::uint64_t seed,
                const std::string& provenance);

std::string format_double(double v);
double parse_double(std::string_view s, const std::string& context);

}  // namespace csi_intruder::channel
