#include "csi_intruder/channel_sim.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace csi_intruder::channel {

namespace fs = std::filesystem;

void SubcarrierGrid::validate() const {
    if (n_subcarriers < 2) throw ConfigError("grid: n_subcarriers must be >= 2");
    if (!(spacing > 0.0)) throw ConfigError("grid: spacing must be > 0");
    if (!(packet_rate > 0.0)) throw ConfigError("grid: packet_rate must be > 0");
    if (!std::isfinite(center_freq)) throw ConfigError("grid: center_freq must be finite");
}

nlohmann::json to_json(const SubcarrierGrid& g) {
    return {{"n_subcarriers", g.n_subcarriers},
            {"center_freq", g.center_freq},
            {"spacing", g.spacing},
            {"packet_rate", g.packet_rate}};
}

SubcarrierGrid grid_from_json(const nlohmann::json& j) {
    SubcarrierGrid g;
    g.n_subcarriers = j.at("n_subcarriers").get<std::size_t>();
    g.center_freq = j.at("center_freq").get<double>();
    g.spacing = j.at("spacing").get<double>();
    g.packet_rate = j.at("packet_rate").get<double>();
    g.validate();
    return g;
}

double delay_at(const DelayTrajectory& d, std::size_t m, double packet_rate) {
    return std::visit(
        [&](const auto& t) -> double {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, StaticDelay>) {
                return t.tau;
            } else if constexpr (std::is_same_v<T, SinusoidalDelay>) {
                return t.base + t.amplitude * std::sin(kTwoPi * t.freq * static_cast<double>(m) / packet_rate + t.phase);
            } else {
                return t.tau.at(m);
            }
        },
        d);
}

void validate_paths(const PathSet& paths, std::size_t m_packets, double packet_rate) {
    if (paths.empty()) throw ConfigError("path set must contain at least one path");
    for (std::size_t l = 0; l < paths.size(); ++l) {
        const auto& p = paths[l];
        if (!(p.attenuation >= 0.0) || !std::isfinite(p.attenuation))
            throw ConfigError("path " + std::to_string(l) + ": attenuation must be finite and >= 0");
        if (const auto* s = std::get_if<SampledDelay>(&p.delay); s && s->tau.size() != m_packets) {
            throw ConfigError("path " + std::to_string(l) + ": trajectory has " + std::to_string(s->tau.size()) +
                              " samples but frame has " + std::to_string(m_packets) + " packets");
        }
        for (std::size_t m = 0; m < m_packets; ++m) {
            const double tau = delay_at(p.delay, m, packet_rate);
            if (!(tau >= 0.0) || !std::isfinite(tau))
                throw ConfigError("path " + std::to_string(l) + ": delay at packet " + std::to_string(m) +
                                  " is negative or non-finite");
        }
    }
}

CsiFrame::CsiFrame(SubcarrierGrid grid, std::size_t m_packets)
    : grid_(grid),
      values_(Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(grid.n_subcarriers), static_cast<Eigen::Index>(m_packets))) {}

CsiFrame::CsiFrame(SubcarrierGrid grid, Eigen::MatrixXcd values) : grid_(grid), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.rows()) != grid_.n_subcarriers)
        throw ConfigError("frame rows (" + std::to_string(values_.rows()) + ") do not match grid N (" +
                          std::to_string(grid_.n_subcarriers) + ")");
}

bool CsiFrame::all_finite() const {
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
        const cplx v = values_.data()[i];
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    }
    return true;
}

double Perturbation::inf_norm() const { return h_delta.size() == 0 ? 0.0 : h_delta.cwiseAbs().maxCoeff(); }

bool Perturbation::within_bound(double slack) const { return inf_norm() <= epsilon * (1.0 + slack); }

Perturbation Perturbation::zero(std::size_t n, double epsilon) {
    return {Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n)), epsilon};
}

void DistortionProfile::validate(const SubcarrierGrid& grid) const {
    if (!(dt_min >= 0.0) || !(dt_max >= dt_min) || dt_max > 1.0 / grid.packet_rate)
        throw ConfigError("distortion: dt range must satisfy 0 <= dt_min <= dt_max <= 1/packet_rate");
    if (!(noise_std >= 0.0)) throw ConfigError("distortion: noise_std must be >= 0");
}

double DistortionProfile::draw_dt(Rng& rng) const {
    if (!enable_time_offset) return 0.0;
    if (dt_max == dt_min) return dt_min;
    return uniform(rng, dt_min, dt_max);
}

nlohmann::json to_json(const DistortionProfile& p) {
    return {{"enable_time_offset", p.enable_time_offset},
            {"dt_min", p.dt_min},
            {"dt_max", p.dt_max},
            {"enable_cfo", p.enable_cfo},
            {"cfo", p.cfo},
            {"enable_sfo_pdd", p.enable_sfo_pdd},
            {"sfo_pdd_phase_error", p.sfo_pdd_phase_error},
            {"noise_std", p.noise_std}};
}

DistortionProfile profile_from_json(const nlohmann::json& j) {
    DistortionProfile p;
    p.enable_time_offset = j.value("enable_time_offset", p.enable_time_offset);
    p.dt_min = j.value("dt_min", p.dt_min);
    p.dt_max = j.value("dt_max", p.dt_max);
    p.enable_cfo = j.value("enable_cfo", p.enable_cfo);
    p.cfo = j.value("cfo", p.cfo);
    p.enable_sfo_pdd = j.value("enable_sfo_pdd", p.enable_sfo_pdd);
    p.sfo_pdd_phase_error = j.value("sfo_pdd_phase_error", p.sfo_pdd_phase_error);
    p.noise_std = j.value("noise_std", p.noise_std);
    return p;
}

void EveChannel::validate(const SubcarrierGrid& grid) const {
    if (static_cast<std::size_t>(h_eve.size()) != grid.n_subcarriers)
        throw ConfigError("eve channel length does not match grid N");
    for (Eigen::Index n = 0; n < h_eve.size(); ++n) {
        const cplx v = h_eve[n];
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()) || std::abs(v) == 0.0)
            throw ConfigError("eve channel entry " + std::to_string(n) + " is zero or non-finite");
    }
}

CsiFrame synthesize_csi(const PathSet& paths, const SubcarrierGrid& grid, std::size_t m_packets) {
    grid.validate();
    if (m_packets < 1) throw PreconditionError("synthesize_csi: m_packets must be >= 1");
    validate_paths(paths, m_packets, grid.packet_rate);

    CsiFrame frame(grid, m_packets);
    auto& h = frame.values();
    for (const auto& path : paths) {
        for (std::size_t m = 0; m < m_packets; ++m) {
            const double tau = delay_at(path.delay, m, grid.packet_rate);
            for (std::size_t n = 0; n < grid.n_subcarriers; ++n) {
                h(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) +=
                    path.attenuation * std::polar(1.0, -kTwoPi * grid.freq(n) * tau);
            }
        }
    }
    return frame;
}

Perturbation apply_time_offset(const Perturbation& p, double dt, const SubcarrierGrid& grid) {
    if (static_cast<std::size_t>(p.h_delta.size()) != grid.n_subcarriers)
        throw ConfigError("apply_time_offset: perturbation length does not match grid");
    if (!std::isfinite(dt)) throw ConfigError("apply_time_offset: dt must be finite");
    Perturbation out = p;
    for (Eigen::Index n = 0; n < out.h_delta.size(); ++n) {
        out.h_delta[n] *= std::polar(1.0, -kTwoPi * dt * grid.freq(static_cast<std::size_t>(n)));
    }
    return out;
}

CsiFrame apply_residual_offsets(const CsiFrame& frame, const DistortionProfile& profile) {
    CsiFrame out = frame;
    const auto& grid = frame.grid();
    auto& h = out.values();
    if (profile.enable_cfo) {
        for (Eigen::Index m = 0; m < h.cols(); ++m) {
            h.col(m) *= std::polar(1.0, -kTwoPi * profile.cfo * static_cast<double>(m) / grid.packet_rate);
        }
    }
    if (profile.enable_sfo_pdd) {
        for (Eigen::Index n = 0; n < h.rows(); ++n) {
            h.row(n) *= std::polar(1.0, -kTwoPi * grid.spacing * static_cast<double>(n) * profile.sfo_pdd_phase_error);
        }
    }
    return out;
}

EvePathDraw draw_eve_paths(std::uint64_t seed, std::size_t l_paths) {
    if (l_paths < 1) throw PreconditionError("draw_eve_channel: l_paths must be >= 1");
    Rng rng(derive_seed(seed, 0xE7Eull));
    EvePathDraw d;
    for (std::size_t l = 0; l < l_paths; ++l) {
        d.attenuation.push_back(uniform(rng, 0.2, 1.0));
        d.delay.push_back(uniform(rng, 0.0, 200e-9));
    }
    return d;
}

EveChannel eve_channel_from_paths(const EvePathDraw& paths, const SubcarrierGrid& grid, double est_noise_std) {
    PathSet ps;
    for (std::size_t l = 0; l < paths.attenuation.size(); ++l) {
        ps.push_back({paths.attenuation[l], StaticDelay{paths.delay[l]}});
    }
    const CsiFrame f = synthesize_csi(ps, grid, 1);
    EveChannel eve{f.values().col(0), est_noise_std};
    eve.validate(grid);
    return eve;
}

EveChannel draw_eve_channel(std::uint64_t seed, const SubcarrierGrid& grid, std::size_t l_paths, double est_noise_std) {
    return eve_channel_from_paths(draw_eve_paths(seed, l_paths), grid, est_noise_std);
}

EveChannel estimate_eve_channel(const EveChannel& truth, std::uint64_t seed) {
    EveChannel est = truth;
    if (truth.est_noise_std > 0.0) {
        Rng rng(seed);
        for (Eigen::Index n = 0; n < est.h_eve.size(); ++n) est.h_eve[n] += complex_gaussian(rng, truth.est_noise_std);
    }
    return est;
}

void add_receiver_noise(CsiFrame& frame, double noise_std, std::uint64_t seed) {
    if (noise_std <= 0.0) return;
    Rng rng(seed);
    auto& h = frame.values();
    for (Eigen::Index m = 0; m < h.cols(); ++m)
        for (Eigen::Index n = 0; n < h.rows(); ++n) h(n, m) += complex_gaussian(rng, noise_std);
}

namespace {

void check_compatible(const CsiFrame& clean, const EveChannel& eve) {
    const std::size_t n = clean.n_subcarriers();
    if (static_cast<std::size_t>(eve.h_eve.size()) != n)
        throw ConfigError("contaminate: eve channel length " + std::to_string(eve.h_eve.size()) +
                          " does not match frame N " + std::to_string(n));
}

// Received perturbation column for one segment, before residual offsets.
Eigen::VectorXcd received_column(const EveChannel& eve, const Perturbation& p, double dt, const SubcarrierGrid& grid) {
    if (p.h_delta.size() != eve.h_eve.size())
        throw ConfigError("contaminate: perturbation length does not match eve channel");
    Eigen::VectorXcd col(p.h_delta.size());
    for (Eigen::Index n = 0; n < col.size(); ++n) {
        col[n] = eve.h_eve[n] * p.h_delta[n] * std::polar(1.0, -kTwoPi * dt * grid.freq(static_cast<std::size_t>(n)));
    }
    return col;
}

}  // namespace

CsiFrame contaminate(const CsiFrame& clean, const EveChannel& eve, const Perturbation& p, double dt,
                     const DistortionProfile& profile, std::uint64_t noise_seed) {
    const PacketSegment seg{0, clean.n_packets(), &p, dt};
    return contaminate_segments(clean, eve, std::span<const PacketSegment>(&seg, 1), profile, noise_seed);
}

CsiFrame contaminate_segments(const CsiFrame& clean, const EveChannel& eve, std::span<const PacketSegment> segments,
                              const DistortionProfile& profile, std::uint64_t noise_seed) {
    check_compatible(clean, eve);
    const auto& grid = clean.grid();
    CsiFrame injected(grid, clean.n_packets());
    for (const auto& seg : segments) {
        if (seg.perturbation == nullptr || seg.end > clean.n_packets() || seg.start > seg.end)
            throw ConfigError("contaminate: invalid packet segment");
        const Eigen::VectorXcd col = received_column(eve, *seg.perturbation, seg.dt, grid);
        for (std::size_t m = seg.start; m < seg.end; ++m) injected.values().col(static_cast<Eigen::Index>(m)) = col;
    }
    if (profile.enable_cfo || profile.enable_sfo_pdd) injected = apply_residual_offsets(injected, profile);

    CsiFrame out(grid, clean.values() + injected.values());
    add_receiver_noise(out, profile.noise_std, noise_seed);
    return out;
}

// --- persistence -----------------------------------------------------------

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& context) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConsistencyError(context + ": cannot parse number '" + std::string(s) + "'");
    return v;
}

void write_frame_csv(const fs::path& path, const CsiFrame& frame) {
    std::ostringstream os;
    os << "n,m,re,im\n";
    const auto& h = frame.values();
    for (Eigen::Index n = 0; n < h.rows(); ++n) {
        for (Eigen::Index m = 0; m < h.cols(); ++m) {
            os << n << ',' << m << ',' << format_double(h(n, m).real()) << ',' << format_double(h(n, m).imag()) << '\n';
        }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << os.str();
    if (!f) throw IoError("write failed for " + path.string());
}

CsiFrame read_frame_csv(const fs::path& path, const SubcarrierGrid& grid, std::size_t m_packets) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open frame file " + path.string());
    std::string line;
    if (!std::getline(f, line) || line != "n,m,re,im")
        throw ConsistencyError(path.string() + ": missing or malformed header");

    const std::size_t expected = grid.n_subcarriers * m_packets;
    CsiFrame frame(grid, m_packets);
    std::vector<bool> seen(expected, false);
    std::size_t rows = 0;
    const std::string ctx = path.string();
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::string_view sv(line);
        std::string_view fields[4];
        for (int k = 0; k < 4; ++k) {
            const auto comma = sv.find(',');
            if (k < 3 && comma == std::string_view::npos)
                throw ConsistencyError(ctx + ": malformed row " + std::to_string(rows + 1));
            fields[k] = k < 3 ? sv.substr(0, comma) : sv;
            if (k < 3) sv.remove_prefix(comma + 1);
        }
        const double nd = parse_double(fields[0], ctx);
        const double md = parse_double(fields[1], ctx);
        if (nd < 0 || md < 0 || nd >= static_cast<double>(grid.n_subcarriers) || md >= static_cast<double>(m_packets))
            throw ConsistencyError(ctx + ": index out of range in row " + std::to_string(rows + 1));
        const auto n = static_cast<std::size_t>(nd);
        const auto m = static_cast<std::size_t>(md);
        frame(n, m) = {parse_double(fields[2], ctx), parse_double(fields[3], ctx)};
        seen[n * m_packets + m] = true;
        ++rows;
    }
    if (rows != expected)
        throw ConsistencyError(ctx + ": expected " + std::to_string(expected) + " data rows, found " +
                               std::to_string(rows));
    for (bool s : seen)
        if (!s) throw ConsistencyError(ctx + ": duplicate or missing (n,m) entries");
    if (!frame.all_finite()) throw ConsistencyError(ctx + ": non-finite values");
    return frame;
}

void save_frame(const fs::path& csv_path, const CsiFrame& frame, std::uint64_t seed, const std::string& provenance) {
    write_frame_csv(csv_path, frame);
    nlohmann::json meta = {{"grid", to_json(frame.grid())},
                           {"n_packets", frame.n_packets()},
                           {"seed", seed},
                           {"provenance", provenance},
                           {"file", csv_path.filename().string()}};
    fs::path sidecar = csv_path;
    sidecar.replace_extension(".json");
    std::ofstream f(sidecar, std::ios::binary);
    if (!f) throw IoError("cannot open " + sidecar.string() + " for writing");
    f << meta.dump(2) << '\n';
}

}  // namespace csi_intruder::channel
