#include "csi_intruder/surrogate_gan.hpp"

#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "csi_intruder/perturbation_opt.hpp"

namespace csi_intruder::gan {

namespace fs = std::filesystem;

Eigen::VectorXd normalize(const channel::Perturbation& p) {
    if (!(p.epsilon > 0.0)) throw ConfigError("normalize: epsilon must be > 0");
    Eigen::VectorXd x = attack::encode(p);
    const Eigen::Index n = p.h_delta.size();
    x.head(n) /= p.epsilon;
    x.tail(n) /= kTwoPi;
    return x;
}

channel::Perturbation denormalize(const Eigen::VectorXd& x, double epsilon) {
    if (x.size() % 2 != 0) throw ConfigError("denormalize: vector length must be 2N");
    const Eigen::Index n = x.size() / 2;
    Eigen::VectorXd pos(x.size());
    pos.head(n) = x.head(n) * epsilon;
    pos.tail(n) = x.tail(n) * kTwoPi;
    return attack::decode(pos, epsilon);
}

nn::Network make_autoencoder(std::size_t dim, std::uint64_t seed) {
    using nn::Activation;
    const auto relu = Activation::relu;
    return nn::Network::make({dim, 128, 32, 16, 32, 128, dim}, {relu, relu, relu, relu, relu, Activation::identity},
                             seed);
}

Eigen::VectorXd energies(const nn::Network& net, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd out = net.output(x);
    return (out - x).colwise().squaredNorm().transpose() / static_cast<double>(x.rows());
}

double energy(const nn::Network& net, const Eigen::VectorXd& x) {
    return energies(net, Eigen::MatrixXd(x))[0];
}

Eigen::MatrixXd embeddings(const nn::Network& net, const Eigen::MatrixXd& x) {
    const auto cache = net.forward(x);
    return cache.post.at(kEmbeddingLayer);
}

double disc_loss(const Eigen::VectorXd& real_energy, const Eigen::VectorXd& fake_energy, double thr) {
    if (real_energy.size() == 0 || fake_energy.size() == 0) throw PreconditionError("disc_loss: empty batch");
    const double hinge = (thr - fake_energy.array()).max(0.0).mean();
    return real_energy.mean() + hinge;
}

double disc_loss(const nn::Network& d_net, const Eigen::MatrixXd& real_batch, const Eigen::MatrixXd& fake_batch,
                 double thr) {
    return disc_loss(energies(d_net, real_batch), energies(d_net, fake_batch), thr);
}

namespace {

// Unit columns and norms; zero columns stay zero.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> unit_columns(const Eigen::MatrixXd& s) {
    Eigen::MatrixXd u = s;
    Eigen::VectorXd norms = s.colwise().norm().transpose();
    for (Eigen::Index i = 0; i < s.cols(); ++i) {
        if (norms[i] > 0.0) u.col(i) /= norms[i];
        else u.col(i).setZero();
    }
    return {u, norms};
}

}  // namespace

double pulling_away(const Eigen::MatrixXd& emb) {
    const Eigen::Index b = emb.cols();
    if (b < 2) return 0.0;
    const auto [u, norms] = unit_columns(emb);
    const Eigen::MatrixXd c = u.transpose() * u;
    const double total = c.array().square().sum() - c.diagonal().array().square().sum();
    return total / static_cast<double>(b * (b - 1));
}

Eigen::MatrixXd pulling_away_gradient(const Eigen::MatrixXd& emb) {
    const Eigen::Index b = emb.cols();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(emb.rows(), b);
    if (b < 2) return g;
    const auto [u, norms] = unit_columns(emb);
    const Eigen::MatrixXd c = u.transpose() * u;
    const double scale = 4.0 / static_cast<double>(b * (b - 1));
    for (Eigen::Index i = 0; i < b; ++i) {
        if (norms[i] == 0.0) continue;
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(emb.rows());
        for (Eigen::Index j = 0; j < b; ++j) {
            if (j == i || norms[j] == 0.0) continue;
            // d cos_ij / d s_i = (u_j - cos_ij * u_i) / |s_i|
            acc += c(i, j) * (u.col(j) - c(i, j) * u.col(i));
        }
        g.col(i) = scale * acc / norms[i];
    }
    return g;
}

double gen_loss(const Eigen::VectorXd& fake_energy, const Eigen::MatrixXd& emb, double lambda_pt) {
    if (fake_energy.size() == 0) throw PreconditionError("gen_loss: empty batch");
    return fake_energy.mean() + lambda_pt * pulling_away(emb);
}

double gen_loss(const nn::Network& d_net, const Eigen::MatrixXd& fake_batch, double lambda_pt) {
    return gen_loss(energies(d_net, fake_batch), embeddings(d_net, fake_batch), lambda_pt);
}

void GanConfig::validate() const {
    if (!(thr_scale > 0.0)) throw ConfigError("gan.thr_scale must be > 0");
    if (!(lr > 0.0)) throw ConfigError("gan.lr must be > 0");
    if (!(pretrain_lr > 0.0)) throw ConfigError("gan.pretrain_lr must be > 0");
    if (batch < 1) throw ConfigError("gan.batch must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("gan.dropout must be in [0, 1)");
    if (!(generator_dropout >= 0.0 && generator_dropout < 1.0)) throw ConfigError("gan.generator_dropout must be in [0, 1)");
    if (!(pretrain_dropout >= 0.0 && pretrain_dropout < 1.0)) throw ConfigError("gan.pretrain_dropout must be in [0, 1)");
    if (!(stop_loss > 0.0)) throw ConfigError("gan.stop_loss must be > 0");
    if (!(lambda_pt >= 0.0)) throw ConfigError("gan.lambda_pt must be >= 0");
    if (!(jitter >= 0.0)) throw ConfigError("gan.jitter must be >= 0");
}

nlohmann::json GanConfig::to_json() const {
    return {{"thr_scale", thr_scale}, {"lr", lr},
            {"batch", batch},         {"dropout", dropout},
            {"stop_loss", stop_loss}, {"lambda_pt", lambda_pt},
            {"max_epochs", max_epochs}, {"pretrain_epochs", pretrain_epochs},
            {"pretrain_dropout", pretrain_dropout},
            {"generator_dropout", generator_dropout},
            {"pretrain_lr", pretrain_lr},
            {"jitter", jitter}};
}

GanConfig GanConfig::from_json(const nlohmann::json& j) {
    GanConfig c;
    c.thr_scale = j.value("thr_scale", c.thr_scale);
    c.lr = j.value("lr", c.lr);
    c.batch = j.value("batch", c.batch);
    c.dropout = j.value("dropout", c.dropout);
    c.stop_loss = j.value("stop_loss", c.stop_loss);
    c.lambda_pt = j.value("lambda_pt", c.lambda_pt);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
    c.pretrain_dropout = j.value("pretrain_dropout", c.pretrain_dropout);
    c.pretrain_lr = j.value("pretrain_lr", c.pretrain_lr);
    c.generator_dropout = j.value("generator_dropout", c.generator_dropout);
    c.jitter = j.value("jitter", c.jitter);
    return c;
}

Eigen::MatrixXd jitter_inputs(const Eigen::MatrixXd& x, double jitter, Rng& rng) {
    Eigen::MatrixXd out = x;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            out(i, j) = std::clamp(out(i, j) + uniform(rng, -jitter, jitter), 0.0, 1.0);
    return out;
}

namespace {

Eigen::MatrixXd draw_batch(const Eigen::MatrixXd& z, std::size_t batch, Rng& rng) {
    std::uniform_int_distribution<Eigen::Index> pick(0, z.cols() - 1);
    Eigen::MatrixXd b(z.rows(), static_cast<Eigen::Index>(batch));
    for (Eigen::Index j = 0; j < b.cols(); ++j) b.col(j) = z.col(pick(rng));
    return b;
}

// d(mean energy)/d(output) for a batch, per column.
Eigen::MatrixXd energy_output_grad(const Eigen::MatrixXd& out, const Eigen::MatrixXd& x) {
    return 2.0 * (out - x) / static_cast<double>(x.rows() * x.cols());
}

void check_finite(double v, const char* what, std::size_t step) {
    if (!std::isfinite(v)) throw TrainingError(std::string("gan training diverged: non-finite ") + what, step);
}

}  // namespace

nn::Gradients disc_loss_gradients(const nn::Network& disc, const Eigen::MatrixXd& real, const Eigen::MatrixXd& fake,
                                  double thr, double dropout, Rng* rng, double* loss) {
    const auto dim = static_cast<double>(real.rows());
    const auto rc = disc.forward(real, dropout, rng);
    const auto fc = disc.forward(fake, dropout, rng);
    const Eigen::VectorXd re = (rc.post.back() - real).colwise().squaredNorm().transpose() / dim;
    const Eigen::VectorXd fe = (fc.post.back() - fake).colwise().squaredNorm().transpose() / dim;
    if (loss) *loss = disc_loss(re, fe, thr);
    Eigen::MatrixXd fake_grad = -energy_output_grad(fc.post.back(), fake);
    for (Eigen::Index j = 0; j < fake_grad.cols(); ++j)
        if (fe[j] >= thr) fake_grad.col(j).setZero();
    auto g = disc.backward(rc, energy_output_grad(rc.post.back(), real));
    g += disc.backward(fc, fake_grad);
    return g;
}

nn::Gradients gen_loss_gradients(const nn::Network& gen, const nn::Network& disc, const Eigen::MatrixXd& ran,
                                 double lambda_pt, double gen_dropout, double disc_dropout, Rng* rng, double* loss) {
    const auto gc = gen.forward(ran, gen_dropout, rng);
    const Eigen::MatrixXd& fake = gc.post.back();
    const auto dc = disc.forward(fake, disc_dropout, rng);
    const Eigen::MatrixXd& emb = dc.post[kEmbeddingLayer];
    const Eigen::VectorXd fe =
        (dc.post.back() - fake).colwise().squaredNorm().transpose() / static_cast<double>(fake.rows());
    if (loss) *loss = gen_loss(fe, emb, lambda_pt);
    const Eigen::MatrixXd out_grad = energy_output_grad(dc.post.back(), fake);
    std::vector<Eigen::MatrixXd> extra(disc.layers().size());
    extra[kEmbeddingLayer] = lambda_pt * pulling_away_gradient(emb);
    const auto dg = disc.backward(dc, out_grad, &extra);
    // The fake sample is both the discriminator input and its reconstruction target.
    return gen.backward(gc, dg.input - out_grad);
}

GanResult train_gan(const Eigen::MatrixXd& z, const GanConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (z.cols() < 2) throw PreconditionError("train_gan: need at least two candidates");
    const auto dim = static_cast<std::size_t>(z.rows());
    const std::size_t steps_per_epoch = std::max<std::size_t>(1, (static_cast<std::size_t>(z.cols()) + cfg.batch - 1) / cfg.batch);
    Rng rng(derive_seed(seed, 0x6A4ull));
    std::size_t step = 0;

    // Plain autoencoder on the real candidates; it sets the energy scale and warm-starts both players.
    nn::Network pre = make_autoencoder(dim, derive_seed(seed, 1));
    {
        nn::Adam opt(pre, cfg.pretrain_lr);
        for (std::size_t e = 0; e < cfg.pretrain_epochs; ++e) {
            for (std::size_t s = 0; s < steps_per_epoch; ++s) {
                const Eigen::MatrixXd x = draw_batch(z, cfg.batch, rng);
                const auto cache = pre.forward(x, cfg.pretrain_dropout, &rng);
                const auto g = pre.backward(cache, energy_output_grad(cache.post.back(), x));
                opt.step(pre, g);
                check_finite(g.weights.front().sum(), "pretraining gradient", ++step);
            }
        }
    }

    GanResult res{pre, pre, 0.0, 0.0, 0, "max_epochs", {}};
    res.pretrain_energy = energies(pre, z).mean();
    res.thr = cfg.thr_scale * res.pretrain_energy;
    nn::Network& gen = res.generator;
    nn::Network& disc = res.discriminator;
    nn::Adam gen_opt(gen, cfg.lr);
    nn::Adam disc_opt(disc, cfg.lr);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        double d_sum = 0.0, g_sum = 0.0;
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            ++step;
            const Eigen::MatrixXd real = draw_batch(z, cfg.batch, rng);
            const Eigen::MatrixXd ran = jitter_inputs(real, cfg.jitter, rng);

            // Discriminator step, generator fixed.
            {
                const Eigen::MatrixXd fake = gen.forward(ran, cfg.generator_dropout, &rng).post.back();
                double loss = 0.0;
                const auto g = disc_loss_gradients(disc, real, fake, res.thr, cfg.dropout, &rng, &loss);
                check_finite(loss, "discriminator loss", step);
                d_sum += loss;
                disc_opt.step(disc, g);
            }

            // Generator step, discriminator fixed.
            {
                double loss = 0.0;
                const auto g = gen_loss_gradients(gen, disc, ran, cfg.lambda_pt, cfg.generator_dropout, cfg.dropout,
                                                  &rng, &loss);
                check_finite(loss, "generator loss", step);
                g_sum += loss;
                gen_opt.step(gen, g);
            }
        }
        const double d_mean = d_sum / static_cast<double>(steps_per_epoch);
        const double g_mean = g_sum / static_cast<double>(steps_per_epoch);
        res.trace.push_back({epoch, d_mean, g_mean});
        res.epochs = epoch;
        if (!gen.all_finite() || !disc.all_finite()) throw TrainingError("gan training diverged: non-finite weights", step);
        if ((d_mean + g_mean) / 2.0 < cfg.stop_loss) {
            res.reason = "converged";
            break;
        }
    }
    spdlog::debug("gan stopped after {} epochs ({}), thr {:.6g}", res.epochs, res.reason, res.thr);
    return res;
}

std::vector<channel::Perturbation> sample_surrogates(const nn::Network& generator, const Eigen::VectorXd& anchor,
                                                     std::size_t count, double epsilon, double jitter, double dropout,
                                                     std::uint64_t seed) {
    std::vector<channel::Perturbation> out;
    if (count == 0) return out;
    if (static_cast<std::size_t>(anchor.size()) != generator.input_dim())
        throw ConfigError("sample_surrogates: anchor length does not match the generator");
    Rng rng(derive_seed(seed, 0x5A3ull));
    const Eigen::MatrixXd base = anchor.replicate(1, static_cast<Eigen::Index>(count));
    const Eigen::MatrixXd in = jitter_inputs(base, jitter, rng);
    const Eigen::MatrixXd gen = dropout > 0.0 ? generator.forward(in, dropout, &rng).post.back() : generator.output(in);
    for (Eigen::Index j = 0; j < gen.cols(); ++j) out.push_back(denormalize(gen.col(j), epsilon));
    return out;
}

SwitchSchedule schedule_switch(std::size_t n_surrogates, double duration, double packet_rate,
                               std::size_t total_packets, std::uint64_t seed) {
    if (n_surrogates == 0) throw PreconditionError("schedule_switch: no surrogates");
    if (!(duration > 0.0)) throw ConfigError("schedule_switch: duration must be > 0");
    if (!(packet_rate > 0.0)) throw ConfigError("schedule_switch: packet rate must be > 0");
    SwitchSchedule s;
    s.duration = duration;
    s.packet_rate = packet_rate;
    s.block_packets = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(duration * packet_rate - 1e-9)));
    if (n_surrogates == 1 && total_packets > s.block_packets)
        spdlog::warn("only one surrogate available; consecutive blocks will repeat it");
    Rng rng(derive_seed(seed, 0x5C4Eull));
    std::size_t prev = n_surrogates;
    for (std::size_t start = 0; start < total_packets; start += s.block_packets) {
        std::size_t pick = 0;
        if (n_surrogates > 1) {
            if (prev == n_surrogates) {
                pick = std::uniform_int_distribution<std::size_t>(0, n_surrogates - 1)(rng);
            } else {
                pick = std::uniform_int_distribution<std::size_t>(0, n_surrogates - 2)(rng);
                if (pick >= prev) ++pick;
            }
        }
        s.blocks.push_back({start, std::min(start + s.block_packets, total_packets), pick});
        prev = pick;
    }
    return s;
}

double mean_pairwise_distance(const Eigen::MatrixXcd& columns) {
    const Eigen::Index n = columns.cols();
    if (n < 2) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) sum += (columns.col(i) - columns.col(j)).norm();
    return sum / static_cast<double>(n * (n - 1) / 2);
}

void write_loss_trace_csv(const fs::path& path, const std::vector<LossRow>& trace) {
    std::ostringstream os;
    os << "epoch,disc_loss,gen_loss\n";
    for (const auto& r : trace)
        os << r.epoch << ',' << channel::format_double(r.disc_loss) << ',' << channel::format_double(r.gen_loss) << '\n';
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << os.str();
}

void write_schedule_csv(const fs::path& path, const SwitchSchedule& schedule) {
    std::ostringstream os;
    os << "block,start_packet,end_packet,surrogate_id\n";
    for (std::size_t b = 0; b < schedule.blocks.size(); ++b) {
        const auto& blk = schedule.blocks[b];
        os << b << ',' << blk.start << ',' << blk.end << ',' << blk.surrogate << '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << os.str();
}

SwitchSchedule read_schedule_csv(const fs::path& path, double duration, double packet_rate) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open schedule file " + path.string());
    std::string line;
    if (!std::getline(f, line) || line != "block,start_packet,end_packet,surrogate_id")
        throw ConsistencyError(path.string() + ": malformed header");
    SwitchSchedule s;
    s.duration = duration;
    s.packet_rate = packet_rate;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::size_t> v;
        while (std::getline(ss, cell, ',')) {
            try {
                v.push_back(std::stoull(cell));
            } catch (const std::exception&) {
                throw ConsistencyError(path.string() + ": bad value '" + cell + "'");
            }
        }
        if (v.size() != 4 || v[0] != s.blocks.size()) throw ConsistencyError(path.string() + ": malformed row");
        s.blocks.push_back({v[1], v[2], v[3]});
    }
    if (!s.blocks.empty()) s.block_packets = s.blocks.front().end - s.blocks.front().start;
    return s;
}

}  // namespace csi_intruder::gan
