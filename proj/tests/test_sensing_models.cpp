#include <doctest.h>

#include <numeric>

#include "csi_intruder/sensing_models.hpp"
#include "oracles.hpp"

using namespace csi_intruder;
using namespace csi_intruder::sensing;

namespace {

channel::CsiFrame random_frame(std::size_t n, std::size_t m, std::uint64_t seed) {
    channel::SubcarrierGrid g;
    g.n_subcarriers = n;
    channel::CsiFrame f(g, m);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) f(i, j) = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
    return f;
}

LabeledFeatures toy_set(std::size_t count, std::size_t dim, int classes, std::uint64_t seed) {
    Rng rng(seed);
    LabeledFeatures d;
    d.x.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
        const int y = static_cast<int>(i % static_cast<std::size_t>(classes));
        for (std::size_t k = 0; k < dim; ++k)
            d.x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
                uniform(rng, -0.3, 0.3) + (static_cast<int>(k) % classes == y ? 1.0 : 0.0);
        d.y.push_back(y);
    }
    return d;
}

}  // namespace

TEST_CASE("featurize: dimension, constant frame, scaling") {
    channel::SubcarrierGrid g;
    channel::CsiFrame c(g, 128);
    c.values().setConstant(cplx(0.3, -0.4));
    const auto fc = featurize(c);
    CHECK(fc.size() == 1024);
    CHECK(fc.tail(512).isZero(0.0));
    CHECK(fc.head(512).isConstant(0.5, 1e-12));

    const auto f = random_frame(32, 128, 1);
    channel::CsiFrame f2 = f;
    f2.values() *= 2.0;
    const auto a = featurize(f), b = featurize(f2);
    CHECK((b.head(512) - 2.0 * a.head(512)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((b.tail(512) - a.tail(512)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(featurize(f, 0), ConfigError);
    CHECK_THROWS_AS(featurize(f, 129), ConfigError);
}

TEST_CASE("featurize matches naive block averaging") {
    const auto f = random_frame(32, 128, 2);
    const auto x = featurize(f, 16);
    for (std::size_t n = 0; n < 32; ++n)
        for (std::size_t b = 0; b < 16; ++b) {
            double amp = 0.0, ph = 0.0;
            int diffs = 0;
            for (std::size_t m = b * 8; m < b * 8 + 8; ++m) {
                amp += std::abs(f(n, m));
                if (m > 0) {
                    double d = std::atan2(f(n, m).imag(), f(n, m).real()) -
                               std::atan2(f(n, m - 1).imag(), f(n, m - 1).real());
                    while (d > oracle::kPi) d -= 2.0 * oracle::kPi;
                    while (d <= -oracle::kPi) d += 2.0 * oracle::kPi;
                    ph += d;
                    ++diffs;
                }
            }
            CHECK(x[static_cast<Eigen::Index>(n * 16 + b)] == doctest::Approx(amp / 8.0).epsilon(1e-12));
            CHECK(x[static_cast<Eigen::Index>(512 + n * 16 + b)] ==
                  doctest::Approx(ph / diffs).epsilon(1e-9).scale(1.0));
        }
}

TEST_CASE("zero-magnitude entries give a zero phase difference and are counted") {
    channel::SubcarrierGrid g;
    g.n_subcarriers = 2;
    channel::CsiFrame f(g, 4);
    f.values().setConstant(cplx(1.0, 0.0));
    f(1, 2) = 0.0;
    std::size_t zeros = 0;
    const auto x = featurize(f, 2, &zeros);
    CHECK(zeros == 2);
    CHECK(x.tail(4).isZero(0.0));
}

TEST_CASE("feature scaler standardizes the fitting columns") {
    Rng rng(3);
    Eigen::MatrixXd raw(5, 40);
    for (Eigen::Index j = 0; j < 40; ++j)
        for (Eigen::Index i = 0; i < 5; ++i) raw(i, j) = uniform(rng, 0, 10) * static_cast<double>(i + 1);
    const auto s = FeatureScaler::fit(raw, 1);
    Eigen::MatrixXd z(5, 40);
    for (Eigen::Index j = 0; j < 40; ++j) z.col(j) = s.apply(raw.col(j));
    for (Eigen::Index i = 0; i < 5; ++i) {
        CHECK(std::abs(z.row(i).mean()) < 1e-12);
        const double var = (z.row(i).array() - z.row(i).mean()).square().sum() / 39.0;
        CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto back = FeatureScaler::from_json(nlohmann::json::parse(s.to_json().dump()));
    CHECK(back.apply(raw.col(3)).isApprox(s.apply(raw.col(3)), 1e-15));
    CHECK_THROWS_AS(s.apply(Eigen::VectorXd::Zero(4)), ConfigError);
    CHECK_THROWS_AS(FeatureScaler::fit(raw.leftCols(1), 1), PreconditionError);
}

TEST_CASE("default zoo architecture") {
    const auto zoo = default_zoo();
    REQUIRE(zoo.size() == 4);
    CHECK(std::count_if(zoo.begin(), zoo.end(), [](const auto& s) { return s.white_box; }) == 3);
    CHECK(make_model(zoo[0], 1024, 6, 1).dims() == std::vector<std::size_t>{1024, 64, 32, 6});
    CHECK(make_model(zoo[1], 1024, 6, 1).dims() == std::vector<std::size_t>{1024, 128, 6});
    CHECK(make_model(zoo[1], 1024, 6, 1).layers()[0].activation == nn::Activation::tanh);
    CHECK(make_model(zoo[2], 1024, 6, 1).dims() == std::vector<std::size_t>{1024, 96, 48, 6});
    CHECK(make_model(zoo[3], 1024, 6, 1).dims() == std::vector<std::size_t>{1024, 256, 64, 6});
    CHECK_FALSE(zoo[3].white_box);
}

TEST_CASE("training: preconditions, determinism and learning") {
    const auto train_set = toy_set(96, 12, 3, 1);
    const auto test_set = toy_set(30, 12, 3, 2);
    const ModelSpec spec{"toy", {16, 8}, nn::Activation::relu, 5, true};
    const auto model = make_model(spec, 12, 3, 7);

    TrainConfig cfg;
    cfg.epochs = 0;
    CHECK_THROWS_AS(train(model, train_set, nullptr, cfg), PreconditionError);

    cfg.epochs = 20;
    cfg.seed = 4;
    const auto a = train(model, train_set, &test_set, cfg);
    const auto b = train(model, train_set, &test_set, cfg);
    for (std::size_t l = 0; l < model.layer_count(); ++l) CHECK(a.model.layers()[l].weights == b.model.layers()[l].weights);
    for (std::size_t l = 0; l < a.record.delta_bar.size(); ++l) CHECK(a.record.delta_bar[l] == b.record.delta_bar[l]);
    CHECK(a.record.test_accuracy > 0.9);
    CHECK(a.record.steps == 20 * 3);
    REQUIRE(a.record.delta_bar.size() == 2);
    CHECK(a.record.delta_bar[0].size() == 16);
    CHECK((a.record.delta_bar[0].array() >= 0.0).all());
    CHECK(accuracy(a.model, test_set) == a.record.test_accuracy);

    cfg.lr = 1e300;
    CHECK_THROWS_AS(train(model, train_set, nullptr, cfg), TrainingError);
}

TEST_CASE("delta_bar is the running mean of per-sample |dLoss/da| over batches") {
    const auto data = toy_set(8, 6, 2, 9);
    const ModelSpec spec{"toy", {5}, nn::Activation::tanh, 1, true};
    const auto model = make_model(spec, 6, 2, 3);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch = 8;
    cfg.lr = 0.1;
    const auto res = train(model, data, nullptr, cfg);
    // one full batch: the record is the batch mean of |dL_i/da| under the initial weights
    const auto cache = model.forward(data.x);
    const Eigen::MatrixXd probs = nn::softmax_columns(cache.post.back());
    Eigen::MatrixXd grad = probs;
    for (std::size_t i = 0; i < data.size(); ++i) grad(data.y[i], static_cast<Eigen::Index>(i)) -= 1.0;
    // dL/da1 = W2^T (p - t) for the identity output layer
    const Eigen::MatrixXd da = model.layers()[1].weights.transpose() * grad;
    const Eigen::VectorXd expect = da.cwiseAbs().rowwise().mean();
    CHECK(res.record.steps == 1);
    CHECK((res.record.delta_bar[0] - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("importance weights") {
    TrainRecord r;
    r.delta_bar = {Eigen::VectorXd::Constant(4, 0.25)};
    auto w = importance_weights(r);
    CHECK(w.per_layer[0].isConstant(w.per_layer[0][0], 0.0));

    r.delta_bar = {(Eigen::VectorXd(2) << 1.0, 3.0).finished()};
    w = importance_weights(r, 0.0);
    CHECK(w.per_layer[0][0] == 1.0);
    CHECK(w.per_layer[0][1] == doctest::Approx(1.0 / 3.0));

    Rng rng(4);
    Eigen::VectorXd d(50);
    for (Eigen::Index i = 0; i < 50; ++i) d[i] = uniform(rng, 0, 2);
    d[7] = 0.0;  // a dead unit stays finite thanks to kappa
    r.delta_bar = {d};
    w = importance_weights(r, 1e-8);
    CHECK(w.per_layer[0].allFinite());
    CHECK((w.per_layer[0].array() > 0.0).all());
    std::vector<int> by_delta(50), by_weight(50);
    std::iota(by_delta.begin(), by_delta.end(), 0);
    std::iota(by_weight.begin(), by_weight.end(), 0);
    std::sort(by_delta.begin(), by_delta.end(), [&](int a, int b) { return d[a] < d[b]; });
    std::sort(by_weight.begin(), by_weight.end(), [&](int a, int b) { return w.per_layer[0][a] > w.per_layer[0][b]; });
    CHECK(by_delta == by_weight);

    CHECK(importance_weights(r, 1e-8, Weighting::uniform).per_layer[0].isOnes(0.0));
    const auto p = importance_weights(r, 0.5, Weighting::proportional);
    CHECK(p.per_layer[0][3] == doctest::Approx(d[3] + 0.5));
    CHECK(w.scaled(2.0).per_layer[0] == 2.0 * w.per_layer[0]);
    CHECK_THROWS_AS(importance_weights(TrainRecord{}), PreconditionError);
    CHECK(weighting_from_string(to_string(Weighting::proportional)) == Weighting::proportional);
    CHECK_THROWS_AS(weighting_from_string("inverse"), ConfigError);
}

TEST_CASE("checkpoint round trip") {
    oracle::TempDir dir("model");
    const auto data = toy_set(20, 6, 2, 1);
    const auto res = train(make_model({"m", {4}, nn::Activation::relu, 1, true}, 6, 2, 1), data, nullptr, {2, 0.05, 8, 0.0, 1});
    save_model(dir.path() / "m.json", "m", res.model, res.record);
    const auto back = load_model(dir.path() / "m.json");
    CHECK(back.name == "m");
    CHECK(back.model.layers()[0].weights == res.model.layers()[0].weights);
    CHECK(back.record.delta_bar[0] == res.record.delta_bar[0]);
    CHECK(back.record.steps == res.record.steps);
    CHECK_THROWS_AS(load_model(dir.path() / "none.json"), IoError);
    CHECK(predict(back.model, data.x.col(0)) == predict_batch(res.model, data.x).front());
}
