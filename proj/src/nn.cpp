#include "csi_intruder/nn.hpp"

namespace csi_intruder::nn {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::identity: return "identity";
    }
    return "identity";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "identity") return Activation::identity;
    throw ConsistencyError("unknown activation '" + s + "'");
}

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
    switch (a) {
        case Activation::relu: return z.cwiseMax(0.0);
        case Activation::tanh: return z.array().tanh().matrix();
        case Activation::identity: return z;
    }
    return z;
}

// dLoss/dz from dLoss/da, given z and a = act(z) (before dropout).
Eigen::MatrixXd activation_backward(const Eigen::MatrixXd& grad_a, const Eigen::MatrixXd& z, Activation act) {
    switch (act) {
        case Activation::relu: return (z.array() > 0.0).select(grad_a, 0.0);
        case Activation::tanh: {
            const Eigen::ArrayXXd t = z.array().tanh();
            return (grad_a.array() * (1.0 - t * t)).matrix();
        }
        case Activation::identity: return grad_a;
    }
    return grad_a;
}

}  // namespace

Gradients& Gradients::operator+=(const Gradients& o) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] += o.weights[l];
        bias[l] += o.bias[l];
    }
    return *this;
}

Network::Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ConfigError("network needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (layers_[l].bias.size() != layers_[l].weights.rows())
            throw ConfigError("layer " + std::to_string(l) + ": bias length does not match weights");
        if (l > 0 && layers_[l].in_dim() != layers_[l - 1].out_dim())
            throw ConfigError("layer " + std::to_string(l) + ": input dimension does not chain");
    }
}

Network Network::make(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations,
                      std::uint64_t seed) {
    if (dims.size() < 2 || activations.size() != dims.size() - 1)
        throw ConfigError("network: need dims.size() >= 2 and one activation per layer");
    Rng rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(dims[l]);
        const auto out = static_cast<Eigen::Index>(dims[l + 1]);
        // He-uniform for relu, Glorot-uniform otherwise.
        const double limit = activations[l] == Activation::relu ? std::sqrt(6.0 / static_cast<double>(in))
                                                                : std::sqrt(6.0 / static_cast<double>(in + out));
        DenseLayer layer;
        layer.weights.resize(out, in);
        for (Eigen::Index r = 0; r < out; ++r)
            for (Eigen::Index c = 0; c < in; ++c) layer.weights(r, c) = uniform(rng, -limit, limit);
        layer.bias = Eigen::VectorXd::Zero(out);
        layer.activation = activations[l];
        layers.push_back(std::move(layer));
    }
    return Network(std::move(layers));
}

std::vector<std::size_t> Network::dims() const {
    std::vector<std::size_t> d{input_dim()};
    for (const auto& l : layers_) d.push_back(l.out_dim());
    return d;
}

ForwardCache Network::forward(const Eigen::MatrixXd& x, double dropout, Rng* rng) const {
    if (static_cast<std::size_t>(x.rows()) != input_dim())
        throw ConfigError("network input has dimension " + std::to_string(x.rows()) + ", expected " +
                          std::to_string(input_dim()));
    ForwardCache c;
    c.input = x;
    const bool drop = dropout > 0.0 && rng != nullptr;
    const Eigen::MatrixXd* prev = &c.input;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        c.pre.push_back((layer.weights * *prev).colwise() + layer.bias);
        Eigen::MatrixXd a = activate(c.pre.back(), layer.activation);
        if (drop && l + 1 < layers_.size()) {
            std::bernoulli_distribution keep(1.0 - dropout);
            Eigen::MatrixXd m(a.rows(), a.cols());
            const double scale = 1.0 / (1.0 - dropout);
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = keep(*rng) ? scale : 0.0;
            a = a.cwiseProduct(m);
            c.mask.push_back(std::move(m));
        } else {
            c.mask.emplace_back();
        }
        c.post.push_back(std::move(a));
        prev = &c.post.back();
    }
    return c;
}

Eigen::MatrixXd Network::output(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.rows()) != input_dim())
        throw ConfigError("network input has dimension " + std::to_string(x.rows()) + ", expected " +
                          std::to_string(input_dim()));
    Eigen::MatrixXd a = x;
    for (const auto& layer : layers_) a = activate((layer.weights * a).colwise() + layer.bias, layer.activation);
    return a;
}

Eigen::VectorXd Network::output(const Eigen::VectorXd& x) const {
    return output(Eigen::MatrixXd(x)).col(0);
}

Gradients Network::backward(const ForwardCache& cache, const Eigen::MatrixXd& grad_output,
                            const std::vector<Eigen::MatrixXd>* extra_post) const {
    const std::size_t L = layers_.size();
    Gradients g;
    g.weights.resize(L);
    g.bias.resize(L);
    g.pre.resize(L);
    g.post.resize(L);
    Eigen::MatrixXd grad_a = grad_output;
    for (std::size_t li = L; li-- > 0;) {
        const auto& layer = layers_[li];
        if (extra_post && li < extra_post->size() && (*extra_post)[li].size() > 0) grad_a += (*extra_post)[li];
        g.post[li] = grad_a;
        if (cache.mask[li].size() > 0) grad_a = grad_a.cwiseProduct(cache.mask[li]);
        Eigen::MatrixXd dz = activation_backward(grad_a, cache.pre[li], layer.activation);
        const Eigen::MatrixXd& a_prev = li == 0 ? cache.input : cache.post[li - 1];
        g.weights[li] = dz * a_prev.transpose();
        g.bias[li] = dz.rowwise().sum();
        grad_a = layer.weights.transpose() * dz;
        g.pre[li] = std::move(dz);
    }
    g.input = std::move(grad_a);
    return g;
}

bool Network::all_finite() const {
    for (const auto& l : layers_)
        if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    return true;
}

nlohmann::json Network::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& l : layers_) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weights.size()));
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
        arr.push_back({{"in", l.in_dim()},
                       {"out", l.out_dim()},
                       {"activation", to_string(l.activation)},
                       {"weights", w},
                       {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
    }
    return {{"layers", arr}};
}

Network Network::from_json(const nlohmann::json& j) {
    std::vector<DenseLayer> layers;
    try {
        for (const auto& lj : j.at("layers")) {
            const auto in = lj.at("in").get<Eigen::Index>();
            const auto out = lj.at("out").get<Eigen::Index>();
            const auto w = lj.at("weights").get<std::vector<double>>();
            const auto b = lj.at("bias").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out)
                throw ConsistencyError("checkpoint layer has inconsistent array sizes");
            DenseLayer l;
            l.weights.resize(out, in);
            for (Eigen::Index r = 0; r < out; ++r)
                for (Eigen::Index c = 0; c < in; ++c) l.weights(r, c) = w[static_cast<std::size_t>(r * in + c)];
            l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), out);
            l.activation = activation_from_string(lj.at("activation").get<std::string>());
            layers.push_back(std::move(l));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConsistencyError(std::string("malformed network checkpoint: ") + e.what());
    }
    return Network(std::move(layers));
}

Adam::Adam(const Network& net, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& l : net.layers()) {
        mw_.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        vw_.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        mb_.push_back(Eigen::VectorXd::Zero(l.bias.size()));
        vb_.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
}

void Adam::step(Network& net, const Gradients& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        mw_[l] = beta1_ * mw_[l] + (1.0 - beta1_) * g.weights[l];
        vw_[l] = beta2_ * vw_[l] + (1.0 - beta2_) * g.weights[l].cwiseAbs2();
        mb_[l] = beta1_ * mb_[l] + (1.0 - beta1_) * g.bias[l];
        vb_[l] = beta2_ * vb_[l] + (1.0 - beta2_) * g.bias[l].cwiseAbs2();
        layers[l].weights.array() -= lr_ * (mw_[l].array() / c1) / ((vw_[l].array() / c2).sqrt() + eps_);
        layers[l].bias.array() -= lr_ * (mb_[l].array() / c1) / ((vb_[l].array() / c2).sqrt() + eps_);
    }
}

void sgd_step(Network& net, const Gradients& g, double lr) {
    auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weights -= lr * g.weights[l];
        layers[l].bias -= lr * g.bias[l];
    }
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p = logits;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double mx = p.col(j).maxCoeff();
        p.col(j) = (p.col(j).array() - mx).exp().matrix();
        p.col(j) /= p.col(j).sum();
    }
    return p;
}

}  // namespace csi_intruder::nn
