#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "csi_intruder/common.hpp"

namespace csi_intruder::nn {

enum class Activation { relu, tanh, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd bias;     // out
    Activation activation = Activation::relu;

    std::size_t in_dim() const { return static_cast<std::size_t>(weights.cols()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(weights.rows()); }
};

/// Activations and caches for one batched forward pass. Columns are samples.
struct ForwardCache {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> pre;   // z per layer
    std::vector<Eigen::MatrixXd> post;  // a per layer (after dropout on hidden layers)
    std::vector<Eigen::MatrixXd> mask;  // scaled keep-masks, empty when dropout is off
};

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> bias;
    std::vector<Eigen::MatrixXd> pre;   // dLoss/dz per layer, per sample column
    std::vector<Eigen::MatrixXd> post;  // dLoss/da per layer (before the dropout mask)
    Eigen::MatrixXd input;

    Gradients& operator+=(const Gradients& o);
};

/// Fully-connected feed-forward network; every layer except the last is "hidden".
class Network {
public:
    Network() = default;
    explicit Network(std::vector<DenseLayer> layers);

    /// dims = {in, h1, ..., out}; activations.size() == dims.size() - 1.
    static Network make(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations,
                         std::uint64_t seed);

    std::size_t input_dim() const { return layers_.front().in_dim(); }
    std::size_t output_dim() const { return layers_.back().out_dim(); }
    std::size_t layer_count() const { return layers_.size(); }
    std::size_t hidden_count() const { return layers_.size() - 1; }
    std::vector<std::size_t> dims() const;

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }

    /// Batched forward pass. Dropout (probability `dropout`) is applied to hidden layers when rng is given.
    ForwardCache forward(const Eigen::MatrixXd& x, double dropout = 0.0, Rng* rng = nullptr) const;

    Eigen::MatrixXd output(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd output(const Eigen::VectorXd& x) const;

    /// Backpropagates dLoss/d(output). `extra_post[l]`, when non-empty, is added to dLoss/d(post[l]).
    Gradients backward(const ForwardCache& cache, const Eigen::MatrixXd& grad_output,
                       const std::vector<Eigen::MatrixXd>* extra_post = nullptr) const;

    bool all_finite() const;

    nlohmann::json to_json() const;
    static Network from_json(const nlohmann::json& j);

private:
    std::vector<DenseLayer> layers_;
};

/// Adam with bias correction.
class Adam {
public:
    Adam(const Network& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(Network& net, const Gradients& g);

private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<Eigen::MatrixXd> mw_, vw_;
    std::vector<Eigen::VectorXd> mb_, vb_;
};

void sgd_step(Network& net, const Gradients& g, double lr);

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

}  // namespace csi_intruder::nn
