#include "csi_intruder/sensing_models.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

namespace csi_intruder::sensing {

namespace fs = std::filesystem;

Eigen::VectorXd featurize(const channel::CsiFrame& frame, std::size_t packet_blocks, std::size_t* zero_entries) {
    const auto n_sub = static_cast<Eigen::Index>(frame.n_subcarriers());
    const auto m_pk = static_cast<Eigen::Index>(frame.n_packets());
    const auto blocks = static_cast<Eigen::Index>(packet_blocks);
    if (blocks < 1 || blocks > m_pk) throw ConfigError("featurize: packet block count must be in [1, M]");

    const auto& h = frame.values();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(2 * n_sub * blocks);
    std::size_t zeros = 0;
    for (Eigen::Index n = 0; n < n_sub; ++n) {
        for (Eigen::Index b = 0; b < blocks; ++b) {
            const Eigen::Index lo = b * m_pk / blocks;
            const Eigen::Index hi = (b + 1) * m_pk / blocks;
            double amp = 0.0;
            double dphi = 0.0;
            Eigen::Index n_diff = 0;
            for (Eigen::Index m = lo; m < hi; ++m) {
                const cplx v = h(n, m);
                amp += std::abs(v);
                if (m == 0) continue;
                const cplx prev = h(n, m - 1);
                if (v == cplx{} || prev == cplx{}) {
                    ++zeros;
                } else {
                    dphi += std::arg(v * std::conj(prev));
                }
                ++n_diff;
            }
            out[n * blocks + b] = amp / static_cast<double>(hi - lo);
            out[n_sub * blocks + n * blocks + b] = n_diff > 0 ? dphi / static_cast<double>(n_diff) : 0.0;
        }
    }
    if (zeros > 0) spdlog::warn("featurize: {} zero-magnitude entries, phase difference set to 0", zeros);
    if (zero_entries) *zero_entries = zeros;
    return out;
}

FeatureScaler::FeatureScaler(Eigen::VectorXd mean, Eigen::VectorXd stddev, std::size_t packet_blocks)
    : mean_(std::move(mean)), inv_std_(stddev.size()), packet_blocks_(packet_blocks) {
    if (mean_.size() != stddev.size()) throw ConfigError("scaler: mean and std lengths differ");
    for (Eigen::Index i = 0; i < stddev.size(); ++i) inv_std_[i] = 1.0 / std::max(stddev[i], 1e-9);
}

FeatureScaler FeatureScaler::fit(const Eigen::MatrixXd& raw, std::size_t packet_blocks) {
    if (raw.cols() < 2) throw PreconditionError("scaler: need at least two samples");
    const Eigen::VectorXd mean = raw.rowwise().mean();
    const Eigen::VectorXd var =
        (raw.colwise() - mean).cwiseAbs2().rowwise().sum() / static_cast<double>(raw.cols() - 1);
    return FeatureScaler(mean, var.cwiseSqrt(), packet_blocks);
}

Eigen::VectorXd FeatureScaler::apply(const Eigen::VectorXd& raw) const {
    if (raw.size() != mean_.size())
        throw ConfigError("scaler: feature dimension " + std::to_string(raw.size()) + " != " +
                          std::to_string(mean_.size()));
    return (raw - mean_).cwiseProduct(inv_std_);
}

Eigen::VectorXd FeatureScaler::transform(const channel::CsiFrame& frame) const {
    return apply(featurize(frame, packet_blocks_));
}

nlohmann::json FeatureScaler::to_json() const {
    std::vector<double> sd(static_cast<std::size_t>(inv_std_.size()));
    for (Eigen::Index i = 0; i < inv_std_.size(); ++i) sd[static_cast<std::size_t>(i)] = 1.0 / inv_std_[i];
    return {{"packet_blocks", packet_blocks_},
            {"mean", std::vector<double>(mean_.data(), mean_.data() + mean_.size())},
            {"std", sd}};
}

FeatureScaler FeatureScaler::from_json(const nlohmann::json& j) {
    try {
        const auto mean = j.at("mean").get<std::vector<double>>();
        const auto sd = j.at("std").get<std::vector<double>>();
        return FeatureScaler(Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size())),
                             Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size())),
                             j.at("packet_blocks").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
        throw ConsistencyError(std::string("malformed feature scaler: ") + e.what());
    }
}

FeatureScaler fit_scaler(const scenario::Dataset& ds, std::size_t packet_blocks) {
    const auto train = ds.split(scenario::Split::train);
    const std::size_t d = 2 * ds.manifest.sample_config.grid.n_subcarriers * packet_blocks;
    Eigen::MatrixXd raw(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i)
        raw.col(static_cast<Eigen::Index>(i)) = featurize(train[i]->frame, packet_blocks);
    return FeatureScaler::fit(raw, packet_blocks);
}

LabeledFeatures dataset_features(const scenario::Dataset& ds, scenario::Split split, const FeatureScaler& scaler) {
    const auto items = ds.split(split);
    LabeledFeatures out;
    out.x.resize(static_cast<Eigen::Index>(scaler.dim()), static_cast<Eigen::Index>(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i) {
        out.x.col(static_cast<Eigen::Index>(i)) = scaler.transform(items[i]->frame);
        out.y.push_back(items[i]->label);
    }
    return out;
}

std::vector<ModelSpec> default_zoo() {
    using nn::Activation;
    return {
        {"wb_mlp_relu_64_32", {64, 32}, Activation::relu, 11, true},
        {"wb_mlp_tanh_128", {128}, Activation::tanh, 23, true},
        {"wb_mlp_relu_96_48", {96, 48}, Activation::relu, 37, true},
        {"bb_mlp_relu_256_64", {256, 64}, Activation::relu, 101, false},
    };
}

nn::Network make_model(const ModelSpec& spec, std::size_t input_dim, std::size_t n_classes, std::uint64_t seed) {
    std::vector<std::size_t> dims{input_dim};
    dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
    dims.push_back(n_classes);
    std::vector<nn::Activation> acts(spec.hidden.size(), spec.activation);
    acts.push_back(nn::Activation::identity);
    return nn::Network::make(dims, acts, derive_seed(seed, spec.seed_salt));
}

nlohmann::json TrainRecord::to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& v : delta_bar) layers.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    return {{"delta_bar", layers},
            {"epochs", epochs},
            {"steps", steps},
            {"final_loss", final_loss},
            {"train_accuracy", train_accuracy},
            {"test_accuracy", test_accuracy}};
}

TrainRecord TrainRecord::from_json(const nlohmann::json& j) {
    TrainRecord r;
    try {
        for (const auto& l : j.at("delta_bar")) {
            const auto v = l.get<std::vector<double>>();
            r.delta_bar.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
        r.epochs = j.at("epochs").get<std::size_t>();
        r.steps = j.at("steps").get<std::size_t>();
        r.final_loss = j.at("final_loss").get<double>();
        r.train_accuracy = j.at("train_accuracy").get<double>();
        r.test_accuracy = j.at("test_accuracy").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConsistencyError(std::string("malformed train record: ") + e.what());
    }
    return r;
}

namespace {

Eigen::MatrixXd one_hot(std::span<const int> y, Eigen::Index classes) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(classes, static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0 || y[i] >= classes) throw ConfigError("label " + std::to_string(y[i]) + " out of range");
        t(y[i], static_cast<Eigen::Index>(i)) = 1.0;
    }
    return t;
}

double mean_cross_entropy(const Eigen::MatrixXd& probs, std::span<const int> y) {
    double loss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        loss -= std::log(std::max(probs(y[i], static_cast<Eigen::Index>(i)), 1e-300));
    return loss / static_cast<double>(y.size());
}

}  // namespace

double cross_entropy(const nn::Network& model, const Eigen::MatrixXd& x, std::span<const int> y) {
    return mean_cross_entropy(nn::softmax_columns(model.output(x)), y);
}

nn::Gradients cross_entropy_gradients(const nn::Network& model, const Eigen::MatrixXd& x, std::span<const int> y) {
    const auto cache = model.forward(x);
    const Eigen::MatrixXd probs = nn::softmax_columns(cache.post.back());
    const Eigen::MatrixXd grad = (probs - one_hot(y, probs.rows())) / static_cast<double>(y.size());
    return model.backward(cache, grad);
}

TrainResult train(nn::Network model, const LabeledFeatures& train_set, const LabeledFeatures* test_set,
                  const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw PreconditionError("train: epochs must be >= 1");
    if (cfg.batch < 1) throw PreconditionError("train: batch size must be >= 1");
    if (train_set.size() == 0) throw PreconditionError("train: empty training set");
    if (static_cast<std::size_t>(train_set.x.rows()) != model.input_dim())
        throw ConfigError("train: feature dimension does not match model input");

    TrainRecord rec;
    for (std::size_t l = 0; l < model.hidden_count(); ++l)
        rec.delta_bar.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.layers()[l].out_dim())));

    Rng rng(derive_seed(cfg.seed, 0x7A1Aull));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    const auto classes = static_cast<Eigen::Index>(model.output_dim());

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(start + cfg.batch, order.size());
            const auto bsz = static_cast<Eigen::Index>(end - start);
            Eigen::MatrixXd xb(train_set.x.rows(), bsz);
            std::vector<int> yb;
            for (std::size_t i = start; i < end; ++i) {
                xb.col(static_cast<Eigen::Index>(i - start)) = train_set.x.col(static_cast<Eigen::Index>(order[i]));
                yb.push_back(train_set.y[order[i]]);
            }
            const auto cache = model.forward(xb, cfg.dropout, cfg.dropout > 0.0 ? &rng : nullptr);
            const Eigen::MatrixXd probs = nn::softmax_columns(cache.post.back());
            const double loss = mean_cross_entropy(probs, yb);
            if (!std::isfinite(loss)) throw TrainingError("training diverged: non-finite loss", rec.steps);
            epoch_loss += loss * static_cast<double>(bsz);

            // Per-sample loss gradients; the update uses their batch mean.
            const Eigen::MatrixXd per_sample = probs - one_hot(yb, classes);
            nn::Gradients g = model.backward(cache, per_sample);
            ++rec.steps;
            const double w_new = 1.0 / static_cast<double>(rec.steps);
            for (std::size_t l = 0; l < rec.delta_bar.size(); ++l) {
                const Eigen::VectorXd batch_mean = g.post[l].cwiseAbs().rowwise().mean();
                rec.delta_bar[l] += w_new * (batch_mean - rec.delta_bar[l]);
            }
            nn::sgd_step(model, g, cfg.lr / static_cast<double>(bsz));
            if (!model.all_finite()) throw TrainingError("training diverged: non-finite weights", rec.steps);
        }
        rec.final_loss = epoch_loss / static_cast<double>(order.size());
        spdlog::debug("epoch {} loss {:.5f}", epoch, rec.final_loss);
    }
    rec.epochs = cfg.epochs;
    rec.train_accuracy = accuracy(model, train_set);
    rec.test_accuracy = test_set ? accuracy(model, *test_set) : 0.0;
    return {std::move(model), std::move(rec)};
}

std::vector<Eigen::VectorXd> forward_features(const nn::Network& model, const Eigen::VectorXd& x) {
    if (static_cast<std::size_t>(x.size()) != model.input_dim())
        throw ConfigError("forward_features: input dimension " + std::to_string(x.size()) + " != " +
                          std::to_string(model.input_dim()));
    std::vector<Eigen::VectorXd> out;
    Eigen::VectorXd a = x;
    for (const auto& layer : model.layers()) {
        Eigen::VectorXd z = layer.weights * a + layer.bias;
        switch (layer.activation) {
            case nn::Activation::relu: a = z.cwiseMax(0.0); break;
            case nn::Activation::tanh: a = z.array().tanh().matrix(); break;
            case nn::Activation::identity: a = std::move(z); break;
        }
        out.push_back(a);
    }
    return out;
}

int predict(const nn::Network& model, const Eigen::VectorXd& x) {
    Eigen::Index idx = 0;
    model.output(x).maxCoeff(&idx);
    return static_cast<int>(idx);
}

std::vector<int> predict_batch(const nn::Network& model, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd out = model.output(x);
    std::vector<int> pred(static_cast<std::size_t>(out.cols()));
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        Eigen::Index idx = 0;
        out.col(j).maxCoeff(&idx);
        pred[static_cast<std::size_t>(j)] = static_cast<int>(idx);
    }
    return pred;
}

double accuracy(const nn::Network& model, const LabeledFeatures& data, int label_offset) {
    if (data.size() == 0) throw PreconditionError("accuracy: empty set");
    const auto pred = predict_batch(model, data.x);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == data.y[i] + label_offset;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::string to_string(Weighting w) {
    switch (w) {
        case Weighting::reciprocal: return "reciprocal";
        case Weighting::uniform: return "uniform";
        case Weighting::proportional: return "proportional";
    }
    return "reciprocal";
}

Weighting weighting_from_string(const std::string& s) {
    if (s == "reciprocal") return Weighting::reciprocal;
    if (s == "uniform") return Weighting::uniform;
    if (s == "proportional") return Weighting::proportional;
    throw ConfigError("unknown weighting '" + s + "'");
}

ImportanceWeights ImportanceWeights::scaled(double factor) const {
    ImportanceWeights w = *this;
    for (auto& v : w.per_layer) v *= factor;
    return w;
}

ImportanceWeights importance_weights(const TrainRecord& record, double kappa, Weighting mode) {
    if (record.delta_bar.empty()) throw PreconditionError("importance_weights: empty train record");
    ImportanceWeights w;
    for (const auto& d : record.delta_bar) {
        switch (mode) {
            case Weighting::reciprocal: w.per_layer.push_back((d.array() + kappa).inverse().matrix()); break;
            case Weighting::uniform: w.per_layer.push_back(Eigen::VectorXd::Ones(d.size())); break;
            case Weighting::proportional: w.per_layer.push_back((d.array() + kappa).matrix()); break;
        }
    }
    return w;
}

void save_model(const fs::path& path, const std::string& name, const nn::Network& model, const TrainRecord& record) {
    nlohmann::json j = model.to_json();
    j["name"] = name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write model checkpoint " + path.string());
    f << j.dump() << '\n';
    fs::path rec_path = path;
    rec_path.replace_extension(".record.json");
    std::ofstream r(rec_path, std::ios::binary);
    if (!r) throw IoError("cannot write train record " + rec_path.string());
    r << record.to_json().dump() << '\n';
}

LoadedModel load_model(const fs::path& path) {
    auto read = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        if (!f) throw IoError("cannot open " + p.string());
        nlohmann::json j;
        try {
            f >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConsistencyError(p.string() + ": " + e.what());
        }
        return j;
    };
    const auto j = read(path);
    fs::path rec_path = path;
    rec_path.replace_extension(".record.json");
    LoadedModel m;
    m.name = j.value("name", path.stem().string());
    m.model = nn::Network::from_json(j);
    m.record = TrainRecord::from_json(read(rec_path));
    return m;
}

}  // namespace csi_intruder::sensing
