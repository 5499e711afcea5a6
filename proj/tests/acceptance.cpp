// Runs the eleven acceptance checks and prints one PASS/FAIL line per check.
// Criteria 4-11 use the desk-scale runs for seeds 1-3 (see desk_runs.hpp).

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "csi_intruder/harness.hpp"
#include "desk_runs.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace csi_intruder;
using desk::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

// --- 1: channel math against scalar oracles -------------------------------------

Outcome oracle_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240611);
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    auto rand_c = [&] { return oracle::cd(uni(-1, 1), uni(-1, 1)); };

    double worst = 0.0;
    std::size_t instances = 0;
    for (int trial = 0; trial < 120; ++trial) {
        channel::SubcarrierGrid g;
        g.n_subcarriers = pick(2, 9);
        g.center_freq = uni(2.0e9, 6.0e9);
        g.spacing = uni(1e5, 1e6);
        g.packet_rate = uni(100.0, 2000.0);
        const std::size_t n = g.n_subcarriers, m = pick(1, 6);
        auto freq = [&](std::size_t k) { return oracle::subcarrier_freq(g.center_freq, g.spacing, n, k); };

        // multipath synthesis with static, sinusoidal and sampled delays
        channel::PathSet paths;
        std::vector<oracle::ScalarPath> scalar;
        for (std::size_t l = 0, count = pick(1, 4); l < count; ++l) {
            const double alpha = uni(0.1, 1.0);
            switch (pick(0, 2)) {
                case 0: {
                    const double tau = uni(0.0, 300e-9);
                    paths.push_back({alpha, channel::StaticDelay{tau}});
                    scalar.push_back({alpha, [tau](std::size_t) { return tau; }});
                    break;
                }
                case 1: {
                    const channel::SinusoidalDelay s{uni(10e-9, 200e-9), uni(0.0, 5e-9), uni(0.1, 10.0), uni(0.0, 6.0)};
                    const double rate = g.packet_rate;
                    paths.push_back({alpha, s});
                    scalar.push_back({alpha, [s, rate](std::size_t k) {
                                          return s.base + s.amplitude * std::sin(2.0 * oracle::kPi * s.freq *
                                                                                     static_cast<double>(k) / rate +
                                                                                 s.phase);
                                      }});
                    break;
                }
                default: {
                    std::vector<double> taus;
                    for (std::size_t k = 0; k < m; ++k) taus.push_back(uni(0.0, 300e-9));
                    paths.push_back({alpha, channel::SampledDelay{taus}});
                    scalar.push_back({alpha, [taus](std::size_t k) { return taus[k]; }});
                }
            }
        }
        const auto frame = channel::synthesize_csi(paths, g, m);
        const auto ref = oracle::multipath(scalar, g.center_freq, g.spacing, n, m);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < m; ++k) worst = std::max(worst, oracle::rel_err(frame(i, k), ref[i][k]));

        // time offset on a random perturbation
        channel::Perturbation p{Eigen::VectorXcd(static_cast<Eigen::Index>(n)), 2.0};
        for (std::size_t i = 0; i < n; ++i) p.h_delta[static_cast<Eigen::Index>(i)] = rand_c();
        const double dt = uni(0.0, 100e-9);
        const auto shifted = channel::apply_time_offset(p, dt, g);
        for (std::size_t i = 0; i < n; ++i) {
            const oracle::cd expect = p.h_delta[static_cast<Eigen::Index>(i)] * oracle::phasor(-2.0 * oracle::kPi * dt * freq(i));
            worst = std::max(worst, oracle::rel_err(shifted.h_delta[static_cast<Eigen::Index>(i)], expect));
        }

        // residual offsets, then the full contamination, with random flags
        channel::DistortionProfile prof;
        prof.enable_cfo = pick(0, 1) == 1;
        prof.cfo = uni(-500.0, 500.0);
        prof.enable_sfo_pdd = pick(0, 1) == 1;
        prof.sfo_pdd_phase_error = uni(0.0, 200e-9);
        auto residual = [&](std::size_t i, std::size_t k) {
            double a = 0.0;
            if (prof.enable_cfo) a -= 2.0 * oracle::kPi * prof.cfo * static_cast<double>(k) / g.packet_rate;
            if (prof.enable_sfo_pdd) a -= 2.0 * oracle::kPi * g.spacing * static_cast<double>(i) * prof.sfo_pdd_phase_error;
            return oracle::phasor(a);
        };
        channel::CsiFrame clean(g, m);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < m; ++k) clean(i, k) = rand_c();
        const auto offset = channel::apply_residual_offsets(clean, prof);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < m; ++k)
                worst = std::max(worst, oracle::rel_err(offset(i, k), clean(i, k) * residual(i, k)));

        channel::EveChannel eve{Eigen::VectorXcd(static_cast<Eigen::Index>(n)), 0.0};
        for (std::size_t i = 0; i < n; ++i) eve.h_eve[static_cast<Eigen::Index>(i)] = rand_c();
        const auto dirty = channel::contaminate(clean, eve, p, dt, prof);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < m; ++k) {
                const auto ii = static_cast<Eigen::Index>(i);
                const oracle::cd expect = clean(i, k) + eve.h_eve[ii] * p.h_delta[ii] *
                                                            oracle::phasor(-2.0 * oracle::kPi * dt * freq(i)) *
                                                            residual(i, k);
                worst = std::max(worst, oracle::rel_err(dirty(i, k), expect));
            }
        ++instances;
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-10 && instances >= 100 && secs < 10.0,
            std::to_string(instances) + " instances, max relative error " + fmt(worst) + ", " + fmt(secs, 3) + " s"};
}

// --- 2: gradient checks -----------------------------------------------------------

Outcome gradient_checks() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(3);
    auto random = [&](Eigen::Index r, Eigen::Index c, double lo, double hi) {
        Eigen::MatrixXd x(r, c);
        for (auto& v : x.reshaped()) v = uniform(rng, lo, hi);
        return x;
    };
    double worst = 0.0;
    std::size_t checks = 0, min_coords = 1000000;
    auto record = [&](const gradcheck::Result& r) {
        worst = std::max(worst, r.max_rel_error);
        min_coords = std::min(min_coords, r.coordinates);
        ++checks;
    };

    using nn::Activation;
    const std::vector<std::pair<std::vector<std::size_t>, std::vector<Activation>>> classifiers{
        {{10, 8, 6, 4}, {Activation::relu, Activation::relu, Activation::identity}},
        {{10, 7, 4}, {Activation::tanh, Activation::identity}},
        {{10, 6, 5, 4}, {Activation::identity, Activation::tanh, Activation::identity}},
    };
    for (std::size_t i = 0; i < classifiers.size(); ++i) {
        const auto net = nn::Network::make(classifiers[i].first, classifiers[i].second, 100 + i);
        const Eigen::MatrixXd x = random(10, 6, -1, 1);
        const std::vector<int> y{0, 1, 2, 3, 1, 0};
        record(gradcheck::check(net, [&](const nn::Network& n) { return sensing::cross_entropy(n, x, y); },
                                sensing::cross_entropy_gradients(net, x, y), 40, 200 + i));
    }
    // the shipped classifier architectures at full input width
    for (const auto& spec : sensing::default_zoo()) {
        const auto net = sensing::make_model(spec, 1024, 6, spec.seed_salt);
        const Eigen::MatrixXd x = random(1024, 4, -2, 2);
        const std::vector<int> y{0, 5, 2, 3};
        record(gradcheck::check(net, [&](const nn::Network& n) { return sensing::cross_entropy(n, x, y); },
                                sensing::cross_entropy_gradients(net, x, y), 24, 300 + spec.seed_salt));
    }

    const auto ae = gan::make_autoencoder(12, 7);
    const Eigen::MatrixXd xa = random(12, 5, 0, 1);
    const auto cache = ae.forward(xa);
    const Eigen::MatrixXd grad_out = 2.0 * (cache.post.back() - xa) / static_cast<double>(xa.size());
    record(gradcheck::check(ae, [&](const nn::Network& n) { return gan::energies(n, xa).mean(); },
                            ae.backward(cache, grad_out), 40, 400));

    const auto disc = gan::make_autoencoder(10, 8);
    const Eigen::MatrixXd real = random(10, 5, 0, 1), fake = random(10, 4, 0, 1);
    const auto fe = gan::energies(disc, fake);
    const double thr = 0.5 * (fe.minCoeff() + fe.maxCoeff());
    record(gradcheck::check(disc, [&](const nn::Network& n) { return gan::disc_loss(n, real, fake, thr); },
                            gan::disc_loss_gradients(disc, real, fake, thr), 40, 401));

    const auto gen = gan::make_autoencoder(10, 9);
    const Eigen::MatrixXd ran = random(10, 5, 0, 1);
    record(gradcheck::check(gen, [&](const nn::Network& n) { return gan::gen_loss(disc, n.output(ran), 0.7); },
                            gan::gen_loss_gradients(gen, disc, ran, 0.7), 40, 402));

    const double secs = seconds_since(t0);
    return {worst < 1e-4 && min_coords >= 20 && secs < 30.0,
            std::to_string(checks) + " networks, >= " + std::to_string(min_coords) +
                " coordinates each, max relative error " + fmt(worst) + ", " + fmt(secs, 3) + " s"};
}

// --- 3: swarm on the sphere --------------------------------------------------------

Outcome pso_sanity() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto f = [](const Eigen::VectorXd& x, std::size_t) { return -x.squaredNorm(); };
    double grid_best = -1e300;
    for (int a = 0; a < 10; ++a)
        for (int b = 0; b < 10; ++b)
            for (int c = 0; c < 10; ++c)
                for (int d = 0; d < 10; ++d)
                    grid_best = std::max(grid_best, f(Eigen::Vector4d(-1 + 0.2 * a, -1 + 0.2 * b, -1 + 0.2 * c, -1 + 0.2 * d), 0));
    attack::PsoParams params;
    params.particles = 30;
    params.iterations = 200;
    int hits = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto run = attack::run_pso(attack::SearchBox::cube(4, -1.0, 1.0), params, seed, f);
        const double gap = std::abs(run.swarm.global_best_fitness - grid_best);
        worst = std::max(worst, gap);
        hits += gap <= 1e-2;
    }
    const double secs = seconds_since(t0);
    return {hits >= 9 && secs < 60.0, std::to_string(hits) + "/10 seeds within 1e-2 of the grid optimum " +
                                          fmt(grid_best + 0.0) + " (worst gap " + fmt(worst) + "), " + fmt(secs, 3) + " s"};
}

// --- 4-11: desk runs ------------------------------------------------------------------

struct Run {
    harness::RunConfig cfg;
    json report;
    json timings;
};

const json& black_box(const json& report) { return desk::model_entry(report, false); }

double arm_mean(const json& model, const std::string& arm) {
    return model.at("attacked").at(arm).at("mean").get<double>();
}

// Largest magnitude in a perturbation CSV, read straight from the text.
double max_magnitude(const fs::path& path) {
    std::istringstream in(desk::slurp(path));
    std::string line;
    std::getline(in, line);
    if (line != "n,mag,phase") throw ConsistencyError(path.string() + ": unexpected header");
    double worst = 0.0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto a = line.find(','), b = line.find(',', a + 1);
        worst = std::max(worst, std::stod(line.substr(a + 1, b - a - 1)));
    }
    return worst;
}

Outcome bound_safety(const std::vector<Run>& runs) {
    std::size_t files = 0, violations = 0, reported = 0;
    for (const auto& r : runs) {
        const double eps = r.report.at("scenario").at("epsilon").get<double>();
        std::vector<fs::path> targets;
        const fs::path opt = harness::stage_dir(r.cfg, harness::Stage::optimize);
        for (const char* arm : {"weighted", "unweighted"}) {
            for (const auto& e : fs::directory_iterator(opt / arm / "Z")) targets.push_back(e.path());
            targets.push_back(opt / arm / "global_best.csv");
            targets.push_back(opt / arm / "best.csv");
        }
        targets.push_back(opt / "random.csv");
        targets.push_back(opt / "random_equal_norm.csv");
        for (const auto& e : fs::directory_iterator(harness::stage_dir(r.cfg, harness::Stage::train_gan) / "surrogates"))
            targets.push_back(e.path());
        for (const auto& e :
             fs::directory_iterator(harness::stage_dir(r.cfg, harness::Stage::defense_eval) / "eval_surrogates"))
            targets.push_back(e.path());
        for (const auto& t : targets) {
            ++files;
            violations += max_magnitude(t) > eps;
        }
        reported += r.report.at("bound_violations").get<std::size_t>();
    }
    return {violations == 0 && reported == 0 && files > 0,
            std::to_string(files) + " perturbation files over " + std::to_string(runs.size()) + " runs, " +
                std::to_string(violations) + " above epsilon, " + std::to_string(reported) + " reported by the pipeline"};
}

double pipeline_seconds(const Run& r) {
    double s = 0.0;
    for (const auto& [stage, v] : r.timings.items()) s += v.get<double>();
    return s;
}

Outcome attack_effectiveness(const std::vector<Run>& runs) {
    std::vector<double> drops;
    std::string per;
    double slowest = 0.0;
    for (const auto& r : runs) {
        drops.push_back(black_box(r.report).at("drop_surrogates").get<double>());
        per += (per.empty() ? "" : ", ") + fmt(drops.back(), 3);
        slowest = std::max(slowest, pipeline_seconds(r));
    }
    const double med = desk::median(drops);
    const auto& p = runs.front().cfg.pso;
    return {med >= 0.30 && slowest < 900.0 && p.particles == 20 && p.iterations == 100,
            "black-box drop under surrogates: median " + fmt(med, 3) + " (" + per + "), P=" +
                std::to_string(p.particles) + " R=" + std::to_string(p.iterations) + ", slowest pipeline " +
                fmt(slowest, 4) + " s"};
}

Outcome weighting_ablation(const std::vector<Run>& runs) {
    std::vector<double> w, u;
    for (const auto& r : runs) {
        w.push_back(arm_mean(black_box(r.report), "best"));
        u.push_back(arm_mean(black_box(r.report), "unweighted"));
    }
    const double mw = desk::median(w), mu = desk::median(u);
    return {mw <= mu, "black-box accuracy, median weighted " + fmt(mw, 4) + " vs unweighted " + fmt(mu, 4)};
}

Outcome concentration(const std::vector<Run>& runs) {
    std::vector<double> ratios;
    std::string per;
    for (const auto& r : runs) {
        ratios.push_back(r.report.at("concentration").at("ratio").get<double>());
        per += (per.empty() ? "" : ", ") + fmt(ratios.back(), 3);
    }
    const double med = desk::median(ratios);
    return {med >= 2.0, "variance ratio optimized/equal-norm random: median " + fmt(med, 3) + " (" + per + ")"};
}

Outcome parity_and_diversity(const std::vector<Run>& runs) {
    double gap = 0.0, min_ratio = 1e300;
    for (const auto& r : runs) {
        const auto& bb = black_box(r.report);
        gap += std::abs(arm_mean(bb, "surrogates") - arm_mean(bb, "best")) / static_cast<double>(runs.size());
        min_ratio = std::min(min_ratio, r.report.at("surrogate_diversity").at("ratio").get<double>());
    }
    return {gap <= 0.10 && min_ratio >= 5.0,
            "mean |surrogates - best| " + fmt(gap, 3) + ", smallest distance ratio " + fmt(min_ratio, 3)};
}

Outcome screening(const std::vector<Run>& runs) {
    int ok = 0;
    std::string per;
    for (const auto& r : runs) {
        const auto& s = r.report.at("screening").at("weighted");
        const double a = s.at("cov_screened").get<double>(), b = s.at("cov_global_best").get<double>();
        ok += a <= b;
        per += (per.empty() ? "" : ", ") + fmt(a, 3) + "<=" + fmt(b, 3);
    }
    const int need = (2 * static_cast<int>(runs.size()) + 2) / 3;
    return {ok >= need, std::to_string(ok) + "/" + std::to_string(runs.size()) + " seeds (" + per + ")"};
}

Outcome defense_quality(const std::vector<Run>& runs) {
    double min_det = 1.0, max_fa = 0.0, worst_delta = 0.0, slowest = 0.0;
    for (const auto& r : runs) {
        for (const auto& m : r.report.at("defense")) {
            min_det = std::min(min_det, m.at("detection").get<double>());
            max_fa = std::max(max_fa, m.at("false_alarm").get<double>());
            worst_delta = std::min(worst_delta, m.at("clean_accuracy_delta").get<double>());
        }
        slowest = std::max(slowest, r.timings.at("defense-eval").get<double>());
    }
    return {min_det >= 0.90 && max_fa <= 0.05 && worst_delta >= -0.05 && slowest < 300.0,
            "min detection " + fmt(min_det, 4) + ", max false alarm " + fmt(max_fa, 4) + ", worst clean delta " +
                fmt(worst_delta, 4) + ", slowest stage " + fmt(slowest, 4) + " s"};
}

Outcome determinism(const Run& first) {
    auto cfg = first.cfg;
    cfg.out = first.cfg.out.parent_path() / (first.cfg.out.filename().string() + "_rerun");
    fs::remove_all(cfg.out);
    harness::run_pipeline(cfg);
    std::size_t same = 0, total = 0;
    std::string differing;
    for (const char* f : {"metrics_report.json", "accuracy.csv", "sweep.csv", "defense.csv"}) {
        ++total;
        if (desk::slurp(harness::stage_dir(first.cfg, harness::Stage::report) / f) ==
            desk::slurp(harness::stage_dir(cfg, harness::Stage::report) / f))
            ++same;
        else
            differing += std::string(" ") + f;
    }
    return {same == total, std::to_string(same) + "/" + std::to_string(total) + " report files byte-identical for seed " +
                               std::to_string(cfg.seed) + (differing.empty() ? "" : ", differing:" + differing)};
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    int failed = 0;
    auto line = [&](int id, const std::string& name, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << o.detail << std::endl;
    };

    line(1, "oracle equivalence", oracle_equivalence);
    line(2, "gradient checks", gradient_checks);
    line(3, "PSO sanity", pso_sanity);

    std::vector<Run> runs;
    std::string setup_error;
    try {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            Run r;
            r.cfg = desk::ensure(seed);
            r.report = desk::report(r.cfg);
            r.timings = desk::read_json(harness::stage_dir(r.cfg, harness::Stage::report) / "timings.json");
            runs.push_back(std::move(r));
        }
    } catch (const std::exception& e) {
        setup_error = e.what();
    }
    auto with_runs = [&](const std::function<Outcome(const std::vector<Run>&)>& f) {
        return [&, f]() -> Outcome {
            if (!setup_error.empty()) return {false, "desk runs unavailable: " + setup_error};
            return f(runs);
        };
    };
    line(4, "bound safety", with_runs(bound_safety));
    line(5, "attack effectiveness", with_runs(attack_effectiveness));
    line(6, "importance-weight ablation", with_runs(weighting_ablation));
    line(7, "concentration", with_runs(concentration));
    line(8, "surrogate parity and diversity", with_runs(parity_and_diversity));
    line(9, "robustness screening", with_runs(screening));
    line(10, "defense", with_runs(defense_quality));
    line(11, "determinism", with_runs([](const std::vector<Run>& r) { return determinism(r.front()); }));

    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
