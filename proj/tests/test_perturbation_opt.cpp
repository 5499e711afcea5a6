#include <doctest.h>

#include <fstream>
#include <memory>

#include "csi_intruder/perturbation_opt.hpp"
#include "oracles.hpp"

using namespace csi_intruder;
using namespace csi_intruder::attack;
using channel::Perturbation;

namespace {

// Two subcarriers, two packets, all-ones clean CSI and eve channel, a single model whose hidden
// layer copies the two amplitude features. Disruption is then sum_n w_n * | |1 + delta_n| - 1 |.
struct Toy {
    sensing::FeatureScaler scaler{Eigen::VectorXd::Zero(4), Eigen::VectorXd::Ones(4), 1};
    nn::Network net;
    FitnessContext ctx;
};

std::unique_ptr<Toy> make_toy(double w0, double w1, double epsilon = 1.0) {
    auto t = std::make_unique<Toy>();
    nn::DenseLayer hidden{Eigen::MatrixXd::Zero(2, 4), Eigen::VectorXd::Zero(2), nn::Activation::identity};
    hidden.weights(0, 0) = 1.0;
    hidden.weights(1, 1) = 1.0;
    nn::DenseLayer out{Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2), nn::Activation::identity};
    t->net = nn::Network({hidden, out});

    channel::SubcarrierGrid g;
    g.n_subcarriers = 2;
    channel::CsiFrame clean(g, 2);
    clean.values().setConstant(1.0);

    t->ctx.models.push_back({&t->net, {{Eigen::Vector2d(w0, w1)}}});
    t->ctx.samples.push_back(clean);
    t->ctx.eve.h_eve = Eigen::VectorXcd::Ones(2);
    t->ctx.scaler = &t->scaler;
    t->ctx.profile.enable_time_offset = false;
    t->ctx.dt_draws = 3;
    t->ctx.epsilon = epsilon;
    t->ctx.seed = 11;
    t->ctx.prepare();
    return t;
}

Perturbation pert(std::initializer_list<cplx> v, double eps) {
    Perturbation p{Eigen::VectorXcd(static_cast<Eigen::Index>(v.size())), eps};
    Eigen::Index i = 0;
    for (cplx c : v) p.h_delta[i++] = c;
    return p;
}

double toy_expect(const Perturbation& p, double w0, double w1) {
    return w0 * std::abs(std::abs(1.0 + p.h_delta[0]) - 1.0) + w1 * std::abs(std::abs(1.0 + p.h_delta[1]) - 1.0);
}

}  // namespace

TEST_CASE("decode maps magnitude/phase positions onto the bounded complex vector") {
    const double eps = 0.2;
    Eigen::VectorXd pos(4);
    pos << eps, 0.5 * eps, 0.0, oracle::kPi / 2;
    const auto p = decode(pos, eps);
    CHECK(std::abs(p.h_delta[0] - cplx(eps, 0.0)) < 1e-15);
    CHECK(std::abs(p.h_delta[1] - cplx(0.0, 0.5 * eps)) < 1e-15);
    CHECK(p.within_bound(0.0));

    pos << 3.0 * eps, -1.0, 7.0, -0.5;
    const auto c = decode(pos, eps);
    CHECK(std::abs(c.h_delta[0]) <= eps);
    CHECK(std::abs(c.h_delta[0]) == doctest::Approx(eps));
    CHECK(c.h_delta[1] == cplx(0.0, 0.0));
    CHECK_THROWS_AS(decode(Eigen::VectorXd::Zero(3), eps), ConfigError);
}

TEST_CASE("encode inverts decode on the search box") {
    Rng rng(5);
    const auto box = SearchBox::perturbation(32, 0.7);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::VectorXd pos = box.sample(rng);
        const auto p = decode(pos, 0.7);
        CHECK(p.within_bound(0.0));
        const Eigen::VectorXd back = encode(p);
        CHECK((back.head(32) - pos.head(32)).cwiseAbs().maxCoeff() < 1e-14);
        for (Eigen::Index i = 32; i < 64; ++i)
            CHECK(std::abs(std::remainder(back[i] - pos[i], 2.0 * oracle::kPi)) < 1e-12);
    }
}

TEST_CASE("random perturbation reaches the bound exactly") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = random_perturbation(32, 0.05, rng);
        CHECK(p.within_bound(0.0));
        CHECK(p.inf_norm() == doctest::Approx(0.05).epsilon(1e-14));
    }
}

TEST_CASE("search box projection clamps or wraps") {
    const auto box = SearchBox::perturbation(2, 1.0);
    Eigen::VectorXd x(4);
    x << -0.5, 1.5, 2.0 * oracle::kPi + 0.1, -0.1;
    box.project(x);
    CHECK(x[0] == 0.0);
    CHECK(x[1] == 1.0);
    CHECK(x[2] == doctest::Approx(0.1));
    CHECK(x[3] == doctest::Approx(2.0 * oracle::kPi - 0.1));
    x[2] = 2.0 * oracle::kPi;
    box.project(x);
    CHECK(x[2] == 0.0);
    CHECK(x[3] < 2.0 * oracle::kPi);
}

TEST_CASE("particle update") {
    const auto box = SearchBox::cube(1, -10.0, 10.0);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);

    SUBCASE("one step from rest toward unit bests") {
        Particle p{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 0.0, one, 0.0};
        update_particle(p, one, 1.0, 0.5, 0.5, one, one, box, 1.0);
        CHECK(p.velocity[0] == doctest::Approx(1.0));
        CHECK(p.position[0] == doctest::Approx(1.0));
    }
    SUBCASE("a particle resting at both bests stays put") {
        const Eigen::VectorXd z = Eigen::VectorXd::Constant(1, 3.0);
        Particle p{z, Eigen::VectorXd::Zero(1), 0.0, z, 0.0};
        for (int i = 0; i < 5; ++i) update_particle(p, z, 0.9, 0.5, 0.5, one, one, box, 0.5);
        CHECK(p.position[0] == 3.0);
        CHECK(p.velocity[0] == 0.0);
    }
    SUBCASE("velocity is clamped to a fraction of the range") {
        Particle p{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 0.0, Eigen::VectorXd::Constant(1, 10.0), 0.0};
        update_particle(p, Eigen::VectorXd::Constant(1, 10.0), 1.0, 0.5, 0.5, one, one, box, 0.1);
        CHECK(p.velocity[0] == doctest::Approx(2.0));
    }
    SUBCASE("phase coordinates move along the shorter arc") {
        const auto pbox = SearchBox::perturbation(1, 1.0);
        Eigen::VectorXd z(2), target(2);
        z << 0.5, 0.1;
        target << 0.5, 2.0 * oracle::kPi - 0.1;
        Particle p{z, Eigen::VectorXd::Zero(2), 0.0, target, 0.0};
        update_particle(p, target, 1.0, 0.5, 0.5, Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2), pbox, 0.5);
        CHECK(p.velocity[1] == doctest::Approx(-0.2));
        CHECK(p.position[1] == doctest::Approx(2.0 * oracle::kPi - 0.1));
    }
}

TEST_CASE("swarm finds the maximum of the negated sphere") {
    const auto sphere = [](const Eigen::VectorXd& x, std::size_t) { return -x.squaredNorm(); };

    // grid over [-1, 1)^4 with step 0.2, 10^4 points including the origin
    double grid_best = -1e300;
    Eigen::Vector4d arg;
    for (int a = 0; a < 10; ++a)
        for (int b = 0; b < 10; ++b)
            for (int c = 0; c < 10; ++c)
                for (int d = 0; d < 10; ++d) {
                    const Eigen::Vector4d x(-1 + 0.2 * a, -1 + 0.2 * b, -1 + 0.2 * c, -1 + 0.2 * d);
                    const double f = sphere(x, 0);
                    if (f > grid_best) {
                        grid_best = f;
                        arg = x;
                    }
                }
    CHECK(arg.norm() < 1e-12);

    PsoParams params;
    params.particles = 30;
    params.iterations = 200;
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto run = run_pso(SearchBox::cube(4, -1.0, 1.0), params, seed, sphere);
        hits += std::abs(run.swarm.global_best_fitness - grid_best) <= 1e-2;
        for (std::size_t r = 1; r < run.trace.size(); ++r)
            CHECK(run.trace[r].best_fitness >= run.trace[r - 1].best_fitness);
    }
    MESSAGE("sphere hits " << hits << "/10");
    CHECK(hits >= 9);
}

TEST_CASE("pso preconditions and zero iterations") {
    const auto f = [](const Eigen::VectorXd& x, std::size_t) { return x.sum(); };
    PsoParams params;
    params.particles = 0;
    CHECK_THROWS_AS(run_pso(SearchBox::cube(2, 0, 1), params, 1, f), PreconditionError);
    params.particles = 8;
    params.iterations = 0;
    const auto run = run_pso(SearchBox::cube(2, 0, 1), params, 1, f);
    REQUIRE(run.trace.size() == 1);
    double best = -1e300;
    for (const auto& p : run.swarm.particles) {
        CHECK(p.position == p.best_position);
        CHECK(p.velocity.isZero(0.0));
        best = std::max(best, f(p.position, 0));
    }
    CHECK(run.swarm.global_best_fitness == best);
    CHECK(run.trace[0].best_fitness == best);
}

TEST_CASE("fitness on the toy context matches the hand formula") {
    const auto toy = make_toy(2.0, 3.0);
    const auto& ctx = toy->ctx;
    CHECK(fitness(Perturbation::zero(2, 1.0), ctx, 1) == 0.0);

    const auto p = pert({cplx(0.5, 0.0), cplx(0.0, 0.5)}, 1.0);
    const double expect = 2.0 * 0.5 + 3.0 * (std::sqrt(1.25) - 1.0);
    CHECK(toy_expect(p, 2.0, 3.0) == doctest::Approx(expect));
    CHECK(fitness(p, ctx, 1) == doctest::Approx(expect).epsilon(1e-12));

    const auto q = pert({cplx(-0.9, 0.0), cplx(0.3, -0.4)}, 1.0);
    CHECK(fitness(q, ctx, 9) == doctest::Approx(toy_expect(q, 2.0, 3.0)).epsilon(1e-12));

    // scaling the importance weights scales the objective
    auto doubled = make_toy(4.0, 6.0);
    CHECK(fitness(q, doubled->ctx, 9) == doctest::Approx(2.0 * fitness(q, ctx, 9)).epsilon(1e-12));
}

TEST_CASE("fitness with time offsets and noise") {
    auto toy = make_toy(1.0, 1.0);
    toy->ctx.profile.enable_time_offset = true;
    toy->ctx.profile.dt_max = 50e-9;
    CHECK(fitness(Perturbation::zero(2, 1.0), toy->ctx, 3) == 0.0);
    const auto p = pert({cplx(0.2, 0.1), cplx(-0.3, 0.0)}, 1.0);
    CHECK(fitness(p, toy->ctx, 3) == fitness(p, toy->ctx, 3));

    toy->ctx.profile.noise_std = 0.05;
    CHECK(fitness(Perturbation::zero(2, 1.0), toy->ctx, 3) > 0.0);
}

TEST_CASE("fitness context validation") {
    auto toy = make_toy(1.0, 1.0);
    FitnessContext bad = toy->ctx;
    bad.models[0].weights.per_layer[0] = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(bad.prepare(), ConfigError);
    bad = toy->ctx;
    bad.samples.clear();
    CHECK_THROWS_AS(bad.prepare(), ConfigError);
    bad = toy->ctx;
    bad.epsilon = 0.0;
    CHECK_THROWS_AS(bad.prepare(), ConfigError);
    bad = toy->ctx;
    bad.eve.h_eve = Eigen::VectorXcd::Ones(3);
    CHECK_THROWS(bad.prepare());
    FitnessContext unprepared;
    CHECK_THROWS_AS(fitness(Perturbation::zero(2, 1.0), unprepared, 1), PreconditionError);
}

TEST_CASE("optimize on the toy context") {
    const auto toy = make_toy(1.0, 2.0, 0.5);
    PsoParams params;
    params.particles = 12;
    params.iterations = 40;
    const auto res = optimize(toy->ctx, params, 3);
    REQUIRE(res.candidates.size() == 12);
    for (const auto& c : res.candidates) CHECK(c.within_bound(0.0));
    CHECK(res.global_best.within_bound(0.0));
    for (std::size_t r = 1; r < res.trace.size(); ++r) CHECK(res.trace[r].best_fitness >= res.trace[r - 1].best_fitness);
    // without distortions the objective is deterministic and maximized by delta = -0.5 on both subcarriers
    CHECK(res.global_best_fitness == doctest::Approx(toy_expect(res.global_best, 1.0, 2.0)).epsilon(1e-12));
    CHECK(res.global_best_fitness <= toy_expect(pert({-0.5, -0.5}, 0.5), 1.0, 2.0) + 1e-12);
    CHECK(res.global_best_fitness > 0.9 * toy_expect(pert({-0.5, -0.5}, 0.5), 1.0, 2.0));

    const auto again = optimize(toy->ctx, params, 3);
    CHECK(again.global_best.h_delta == res.global_best.h_delta);

    params.iterations = 0;
    const auto init = optimize(toy->ctx, params, 3);
    REQUIRE(init.trace.size() == 1);
    double best = -1e300;
    for (const auto& c : init.candidates) best = std::max(best, toy_expect(c, 1.0, 2.0));
    CHECK(init.global_best_fitness == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("robustness screening") {
    const auto toy = make_toy(1.0, 1.0);
    const ScreenConfig cfg{6, 0.0, 0.0, 21};

    SUBCASE("a single candidate is returned as is") {
        const auto p = pert({cplx(0.1, 0.0), 0.0}, 1.0);
        const auto res = robustness_screen({p}, toy->ctx, cfg);
        CHECK(res.index == 0);
        CHECK(res.best.h_delta == p.h_delta);
        CHECK(res.variance[0] == doctest::Approx(0.0));
    }
    SUBCASE("dominating candidate wins; equal means fall back to the lower index") {
        const auto weak = pert({cplx(0.1, 0.0), 0.0}, 1.0);
        const auto strong = pert({cplx(0.4, 0.0), cplx(0.4, 0.0)}, 1.0);
        const auto res = robustness_screen({weak, strong, weak}, toy->ctx, cfg);
        CHECK(res.index == 1);
        for (std::size_t d = 0; d < cfg.draws; ++d)
            CHECK(res.per_draw[1][d] == doctest::Approx(toy_expect(strong, 1.0, 1.0)).epsilon(1e-12));
        CHECK(robustness_screen({weak, weak}, toy->ctx, cfg).index == 0);
    }
    SUBCASE("selection replays from the per-draw scores") {
        auto noisy = make_toy(1.0, 1.0);
        noisy->ctx.profile.enable_time_offset = true;
        const ScreenConfig nc{8, 0.02, 0.05, 4};
        Rng rng(8);
        std::vector<Perturbation> cands;
        for (int i = 0; i < 6; ++i) cands.push_back(random_perturbation(2, 0.3, rng));
        const auto res = robustness_screen(cands, noisy->ctx, nc);
        std::size_t expect = 0;
        std::vector<double> mean(cands.size()), var(cands.size());
        for (std::size_t i = 0; i < cands.size(); ++i) {
            std::vector<double> v;
            for (std::size_t d = 0; d < nc.draws; ++d) {
                v.push_back(screening_draw(cands[i], noisy->ctx, nc, d));
                CHECK(v.back() == res.per_draw[i][d]);
            }
            mean[i] = oracle::mean(v);
            for (double x : v) var[i] += (x - mean[i]) * (x - mean[i]) / static_cast<double>(v.size());
            if (mean[i] > mean[expect] || (mean[i] == mean[expect] && var[i] < var[expect])) expect = i;
        }
        CHECK(res.index == expect);
        CHECK(res.mean[expect] == doctest::Approx(mean[expect]).epsilon(1e-12));
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(robustness_screen({}, toy->ctx, cfg), PreconditionError);
        CHECK_THROWS_AS(robustness_screen({Perturbation::zero(2, 1.0)}, toy->ctx, ScreenConfig{0, 0, 0, 1}), ConfigError);
    }
}

TEST_CASE("perturbation csv round trip and corruption") {
    oracle::TempDir dir("pert");
    Rng rng(6);
    const auto p = random_perturbation(32, 0.4, rng);
    write_perturbation_csv(dir.path() / "p.csv", p);
    const auto back = read_perturbation_csv(dir.path() / "p.csv", 0.4);
    CHECK((back.h_delta - p.h_delta).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(back.within_bound(0.0));
    CHECK_THROWS_AS(read_perturbation_csv(dir.path() / "p.csv", 0.1), ConsistencyError);
    CHECK_THROWS_AS(read_perturbation_csv(dir.path() / "none.csv", 0.4), IoError);
    std::ofstream(dir.path() / "bad.csv") << "idx,m,p\n0,0.1,0.2\n";
    CHECK_THROWS_AS(read_perturbation_csv(dir.path() / "bad.csv", 0.4), ConsistencyError);
    std::ofstream(dir.path() / "order.csv") << "n,mag,phase\n1,0.1,0.2\n";
    CHECK_THROWS_AS(read_perturbation_csv(dir.path() / "order.csv", 0.4), ConsistencyError);

    write_trace_csv(dir.path() / "t.csv", {{0, 1.5, 1.0}, {1, 2.0, 1.25}});
    std::ifstream t(dir.path() / "t.csv");
    std::string header;
    std::getline(t, header);
    CHECK(header == "iteration,best_fitness,mean_fitness");
}
