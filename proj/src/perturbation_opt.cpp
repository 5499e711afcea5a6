#include "csi_intruder/perturbation_opt.hpp"

#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

namespace csi_intruder::attack {

namespace fs = std::filesystem;
using channel::Perturbation;

namespace {

// Shrinks a complex value until its magnitude does not exceed eps (guards against rounding in polar()).
cplx within(cplx v, double eps) {
    while (std::abs(v) > eps) v *= 1.0 - 0x1p-52;
    return v;
}

// Signed shortest angular difference target - from, in (-pi, pi].
double angular_diff(double target, double from) {
    double d = std::fmod(target - from, kTwoPi);
    if (d > kTwoPi / 2) d -= kTwoPi;
    if (d <= -kTwoPi / 2) d += kTwoPi;
    return d;
}

}  // namespace

void SearchBox::project(Eigen::VectorXd& pos) const {
    for (Eigen::Index i = 0; i < pos.size(); ++i) {
        if (periodic[static_cast<std::size_t>(i)]) {
            const double r = upper[i] - lower[i];
            double w = std::fmod(pos[i] - lower[i], r);
            if (w < 0) w += r;
            if (w >= r) w = 0.0;
            pos[i] = lower[i] + w;
        } else {
            pos[i] = std::clamp(pos[i], lower[i], upper[i]);
        }
    }
}

Eigen::VectorXd SearchBox::sample(Rng& rng) const {
    Eigen::VectorXd x(lower.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = uniform(rng, lower[i], upper[i]);
    project(x);
    return x;
}

SearchBox SearchBox::cube(std::size_t dim, double lo, double hi) {
    const auto d = static_cast<Eigen::Index>(dim);
    return {Eigen::VectorXd::Constant(d, lo), Eigen::VectorXd::Constant(d, hi), std::vector<bool>(dim, false)};
}

SearchBox SearchBox::perturbation(std::size_t n, double epsilon) {
    const auto d = static_cast<Eigen::Index>(n);
    SearchBox b;
    b.lower = Eigen::VectorXd::Zero(2 * d);
    b.upper.resize(2 * d);
    b.upper.head(d).setConstant(epsilon);
    b.upper.tail(d).setConstant(kTwoPi);
    b.periodic.assign(2 * n, false);
    std::fill(b.periodic.begin() + static_cast<std::ptrdiff_t>(n), b.periodic.end(), true);
    return b;
}

Perturbation decode(const Eigen::VectorXd& position, double epsilon) {
    if (position.size() % 2 != 0) throw ConfigError("decode: position length must be 2N");
    const Eigen::Index n = position.size() / 2;
    Perturbation p{Eigen::VectorXcd(n), epsilon};
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mag = std::clamp(position[i], 0.0, epsilon);
        p.h_delta[i] = within(std::polar(mag, wrap_phase(position[n + i])), epsilon);
    }
    return p;
}

Eigen::VectorXd encode(const Perturbation& p) {
    const Eigen::Index n = p.h_delta.size();
    Eigen::VectorXd pos(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        pos[i] = std::abs(p.h_delta[i]);
        pos[n + i] = wrap_phase(std::arg(p.h_delta[i]));
    }
    return pos;
}

Perturbation random_perturbation(std::size_t n_subcarriers, double epsilon, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(n_subcarriers);
    Eigen::VectorXd mag(n), phase(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        mag[i] = uniform(rng, 0.0, 1.0);
        phase[i] = uniform(rng, 0.0, kTwoPi);
    }
    mag *= epsilon / mag.maxCoeff();
    Perturbation p{Eigen::VectorXcd(n), epsilon};
    for (Eigen::Index i = 0; i < n; ++i) p.h_delta[i] = within(std::polar(mag[i], phase[i]), epsilon);
    return p;
}

nlohmann::json PsoParams::to_json() const {
    return {{"particles", particles},   {"iterations", iterations},       {"c1", c1},
            {"c2", c2},                 {"inertia", inertia},             {"inertia_decay", inertia_decay},
            {"velocity_clamp", velocity_clamp}};
}

PsoParams PsoParams::from_json(const nlohmann::json& j) {
    PsoParams p;
    p.particles = j.value("particles", p.particles);
    p.iterations = j.value("iterations", p.iterations);
    p.c1 = j.value("c1", p.c1);
    p.c2 = j.value("c2", p.c2);
    p.inertia = j.value("inertia", p.inertia);
    p.inertia_decay = j.value("inertia_decay", p.inertia_decay);
    p.velocity_clamp = j.value("velocity_clamp", p.velocity_clamp);
    return p;
}

Swarm init_swarm(const SearchBox& box, const PsoParams& params, std::uint64_t seed, const FitnessFn& fitness) {
    if (params.particles < 1) throw PreconditionError("pso: need at least one particle");
    if (!(params.inertia > 0.0)) throw ConfigError("pso: inertia must be > 0");
    Swarm s;
    s.params = params;
    s.seed = seed;
    s.inertia = params.inertia;
    for (std::size_t i = 0; i < params.particles; ++i) {
        Rng rng(derive_seed(seed, 0, i));
        Particle p;
        p.position = box.sample(rng);
        p.velocity = Eigen::VectorXd::Zero(p.position.size());
        p.fitness = fitness(p.position, 0);
        p.best_position = p.position;
        p.best_fitness = p.fitness;
        s.particles.push_back(std::move(p));
    }
    s.global_best = s.particles.front().best_position;
    s.global_best_fitness = s.particles.front().best_fitness;
    for (const auto& p : s.particles) {
        if (p.best_fitness > s.global_best_fitness) {
            s.global_best_fitness = p.best_fitness;
            s.global_best = p.best_position;
        }
    }
    return s;
}

void update_particle(Particle& p, const Eigen::VectorXd& global_best, double w, double c1, double c2,
                     const Eigen::VectorXd& b1, const Eigen::VectorXd& b2, const SearchBox& box,
                     double velocity_clamp) {
    for (Eigen::Index i = 0; i < p.position.size(); ++i) {
        const bool wrap = box.periodic[static_cast<std::size_t>(i)];
        const double to_personal = wrap ? angular_diff(p.best_position[i], p.position[i]) : p.best_position[i] - p.position[i];
        const double to_global = wrap ? angular_diff(global_best[i], p.position[i]) : global_best[i] - p.position[i];
        double v = w * p.velocity[i] + c1 * b1[i] * to_personal + c2 * b2[i] * to_global;
        const double vmax = velocity_clamp * box.range(static_cast<std::size_t>(i));
        p.velocity[i] = std::clamp(v, -vmax, vmax);
        p.position[i] += p.velocity[i];
    }
    box.project(p.position);
}

void pso_step(Swarm& swarm, const SearchBox& box, const FitnessFn& fitness) {
    const std::size_t r = swarm.iteration + 1;
    const auto dim = static_cast<Eigen::Index>(box.dim());
    for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
        auto& p = swarm.particles[i];
        Rng rng(derive_seed(swarm.seed, r, i));
        Eigen::VectorXd b1(dim), b2(dim);
        for (Eigen::Index k = 0; k < dim; ++k) {
            b1[k] = uniform(rng, 0.0, 1.0);
            b2[k] = uniform(rng, 0.0, 1.0);
        }
        update_particle(p, swarm.global_best, swarm.inertia, swarm.params.c1, swarm.params.c2, b1, b2, box,
                        swarm.params.velocity_clamp);
        p.fitness = fitness(p.position, r);
        if (p.fitness > p.best_fitness) {
            p.best_fitness = p.fitness;
            p.best_position = p.position;
        }
    }
    for (const auto& p : swarm.particles) {
        if (p.best_fitness > swarm.global_best_fitness) {
            swarm.global_best_fitness = p.best_fitness;
            swarm.global_best = p.best_position;
        }
    }
    swarm.inertia *= swarm.params.inertia_decay;
    swarm.iteration = r;
}

namespace {

TraceRow trace_row(const Swarm& s) {
    double mean = 0.0;
    for (const auto& p : s.particles) mean += p.fitness;
    return {s.iteration, s.global_best_fitness, mean / static_cast<double>(s.particles.size())};
}

}  // namespace

PsoRun run_pso(const SearchBox& box, const PsoParams& params, std::uint64_t seed, const FitnessFn& fitness) {
    PsoRun run;
    run.swarm = init_swarm(box, params, seed, fitness);
    run.trace.push_back(trace_row(run.swarm));
    for (std::size_t r = 0; r < params.iterations; ++r) {
        pso_step(run.swarm, box, fitness);
        run.trace.push_back(trace_row(run.swarm));
        if ((r + 1) % 50 == 0)
            spdlog::debug("pso iteration {} best {:.6g}", r + 1, run.swarm.global_best_fitness);
    }
    return run;
}

void FitnessContext::prepare() {
    if (models.empty()) throw ConfigError("fitness context: need at least one white-box model");
    if (samples.empty()) throw ConfigError("fitness context: need at least one CSI sample");
    if (dt_draws < 1) throw ConfigError("fitness context: dt_draws must be >= 1");
    if (scaler == nullptr) throw ConfigError("fitness context: feature scaler missing");
    if (!(epsilon > 0.0)) throw ConfigError("fitness context: epsilon must be > 0");
    for (std::size_t q = 0; q < models.size(); ++q) {
        const auto& m = models[q];
        if (m.model == nullptr) throw ConfigError("fitness context: null model");
        if (m.weights.per_layer.size() != m.model->hidden_count())
            throw ConfigError("fitness context: model " + std::to_string(q) + " has " +
                              std::to_string(m.model->hidden_count()) + " hidden layers but " +
                              std::to_string(m.weights.per_layer.size()) + " weight vectors");
        for (std::size_t u = 0; u < m.weights.per_layer.size(); ++u)
            if (static_cast<std::size_t>(m.weights.per_layer[u].size()) != m.model->layers()[u].out_dim())
                throw ConfigError("fitness context: weight shape mismatch at model " + std::to_string(q) + " layer " +
                                  std::to_string(u));
    }
    for (const auto& s : samples) eve.validate(s.grid());

    clean_.clear();
    for (const auto& s : samples) {
        const Eigen::VectorXd x = scaler->transform(s);
        std::vector<std::vector<Eigen::VectorXd>> per_model;
        for (const auto& m : models) {
            auto f = sensing::forward_features(*m.model, x);
            f.pop_back();  // logits are not a hidden feature space
            per_model.push_back(std::move(f));
        }
        clean_.push_back(std::move(per_model));
    }
}

double feature_disruption(const Perturbation& p, const FitnessContext& ctx, const channel::EveChannel& eve, double dt,
                          double noise_std, std::uint64_t noise_seed) {
    if (!ctx.prepared()) throw PreconditionError("fitness context not prepared");
    channel::DistortionProfile profile = ctx.profile;
    profile.noise_std = noise_std;
    double total = 0.0;
    for (std::size_t k = 0; k < ctx.samples.size(); ++k) {
        const auto contaminated = channel::contaminate(ctx.samples[k], eve, p, dt, profile, derive_seed(noise_seed, k));
        const Eigen::VectorXd x = ctx.scaler->transform(contaminated);
        for (std::size_t q = 0; q < ctx.models.size(); ++q) {
            const auto feats = sensing::forward_features(*ctx.models[q].model, x);
            const auto& clean = ctx.clean_[k][q];
            const auto& w = ctx.models[q].weights.per_layer;
            for (std::size_t u = 0; u < clean.size(); ++u) {
                if (feats[u].size() != clean[u].size() || w[u].size() != clean[u].size())
                    throw ConfigError("fitness: feature/weight shape mismatch");
                total += w[u].dot((feats[u] - clean[u]).cwiseAbs());
            }
        }
    }
    return total;
}

double fitness(const Perturbation& p, const FitnessContext& ctx, std::uint64_t draw_seed) {
    double sum = 0.0;
    for (std::size_t j = 0; j < ctx.dt_draws; ++j) {
        Rng rng(derive_seed(draw_seed, j));
        const double dt = ctx.profile.draw_dt(rng);
        sum += feature_disruption(p, ctx, ctx.eve, dt, ctx.profile.noise_std, derive_seed(draw_seed, j, 1));
    }
    return sum / static_cast<double>(ctx.dt_draws);
}

OptimizeResult optimize(const FitnessContext& ctx, const PsoParams& params, std::uint64_t seed) {
    if (!ctx.prepared()) throw PreconditionError("optimize: fitness context not prepared");
    const std::size_t n = static_cast<std::size_t>(ctx.eve.h_eve.size());
    const SearchBox box = SearchBox::perturbation(n, ctx.epsilon);
    const FitnessFn fn = [&](const Eigen::VectorXd& pos, std::size_t iteration) {
        return fitness(decode(pos, ctx.epsilon), ctx, derive_seed(ctx.seed, 0xF17ull, iteration));
    };
    PsoRun run = run_pso(box, params, seed, fn);

    OptimizeResult out;
    for (const auto& p : run.swarm.particles) out.candidates.push_back(decode(p.best_position, ctx.epsilon));
    out.global_best = decode(run.swarm.global_best, ctx.epsilon);
    out.global_best_fitness = run.swarm.global_best_fitness;
    out.trace = std::move(run.trace);
    return out;
}

double screening_draw(const Perturbation& p, const FitnessContext& ctx, const ScreenConfig& cfg, std::size_t d) {
    Rng rng(derive_seed(cfg.seed, d));
    const double dt = ctx.profile.draw_dt(rng);
    channel::EveChannel eve = ctx.eve;
    eve.est_noise_std = cfg.eve_est_noise_std;
    eve = channel::estimate_eve_channel(eve, derive_seed(cfg.seed, d, 1));
    return feature_disruption(p, ctx, eve, dt, cfg.noise_std, derive_seed(cfg.seed, d, 2));
}

ScreenResult robustness_screen(const std::vector<Perturbation>& candidates, const FitnessContext& ctx,
                               const ScreenConfig& cfg) {
    if (candidates.empty()) throw PreconditionError("robustness_screen: empty candidate set");
    if (cfg.draws < 1) throw ConfigError("robustness_screen: draws must be >= 1");
    ScreenResult res;
    for (const auto& c : candidates) {
        std::vector<double> vals;
        for (std::size_t d = 0; d < cfg.draws; ++d) vals.push_back(screening_draw(c, ctx, cfg, d));
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var /= static_cast<double>(vals.size());
        res.mean.push_back(mean);
        res.variance.push_back(var);
        res.per_draw.push_back(std::move(vals));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        if (res.mean[i] > res.mean[best] || (res.mean[i] == res.mean[best] && res.variance[i] < res.variance[best]))
            best = i;
    }
    res.index = best;
    res.best = candidates[best];
    return res;
}

void write_perturbation_csv(const fs::path& path, const Perturbation& p) {
    std::ostringstream os;
    os << "n,mag,phase\n";
    const Eigen::VectorXd pos = encode(p);
    const Eigen::Index n = p.h_delta.size();
    for (Eigen::Index i = 0; i < n; ++i)
        os << i << ',' << channel::format_double(pos[i]) << ',' << channel::format_double(pos[n + i]) << '\n';
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << os.str();
}

Perturbation read_perturbation_csv(const fs::path& path, double epsilon) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open perturbation file " + path.string());
    std::string line;
    if (!std::getline(f, line) || line != "n,mag,phase") throw ConsistencyError(path.string() + ": malformed header");
    std::vector<double> mag, phase;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string a, b, c;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
            throw ConsistencyError(path.string() + ": malformed row");
        if (static_cast<std::size_t>(channel::parse_double(a, path.string())) != mag.size())
            throw ConsistencyError(path.string() + ": rows out of order");
        mag.push_back(channel::parse_double(b, path.string()));
        phase.push_back(channel::parse_double(c, path.string()));
    }
    const auto n = static_cast<Eigen::Index>(mag.size());
    Perturbation p{Eigen::VectorXcd(n), epsilon};
    for (Eigen::Index i = 0; i < n; ++i) {
        if (mag[static_cast<std::size_t>(i)] > epsilon)
            throw ConsistencyError(path.string() + ": magnitude exceeds epsilon at n=" + std::to_string(i));
        p.h_delta[i] = within(std::polar(mag[static_cast<std::size_t>(i)], phase[static_cast<std::size_t>(i)]), epsilon);
    }
    return p;
}

void write_trace_csv(const fs::path& path, const std::vector<TraceRow>& trace) {
    std::ostringstream os;
    os << "iteration,best_fitness,mean_fitness\n";
    for (const auto& r : trace)
        os << r.iteration << ',' << channel::format_double(r.best_fitness) << ','
           << channel::format_double(r.mean_fitness) << '\n';
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << os.str();
}

}  // namespace csi_intruder::attack
