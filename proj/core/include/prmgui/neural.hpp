#pragma once

// Dense multilayer perceptrons with hand-written reverse-mode gradients,
// an AdamW optimizer and finite-difference gradient checking. Everything is
// double precision and deterministic given seeds.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace prmgui::nn {

enum class Activation : std::uint8_t { Tanh, Relu };

// Weights are (out x in); layer l maps layer_sizes[l] -> layer_sizes[l+1].
// Hidden layers use `activation`, the output layer is linear.
struct MlpParams {
  std::vector<int> layer_sizes;
  Activation activation = Activation::Tanh;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  std::size_t num_layers() const { return weights.size(); }
  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  std::size_t num_params() const;
  bool all_finite() const;

  // Flat views in a fixed order (W0, b0, W1, b1, ...), for checks and tests.
  double& coord(std::size_t i);
  double coord(std::size_t i) const;

  bool operator==(const MlpParams& o) const;
};

// Gradients share the parameter layout.
using MlpGrads = MlpParams;

MlpParams init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed,
                   Activation activation = Activation::Tanh);
MlpGrads zeros_like(const MlpParams& params);

struct ForwardCache {
  // activations[0] is the input batch; activations[l+1] the output of layer l.
  std::vector<Eigen::MatrixXd> activations;
};

// Batched forward pass; columns of `inputs` are examples.
Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs, ForwardCache* cache = nullptr);
Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input);

// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(outputs).
void backward(const MlpParams& params, const ForwardCache& cache, const Eigen::MatrixXd& d_outputs, MlpGrads& grads);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits);
double log_sum_exp(const Eigen::VectorXd& v);

struct Example {
  Eigen::VectorXd x;
  int y = 0;
};

struct LossAndGrad {
  double loss = 0.0;
  MlpGrads grads;
};

// Mean of -log softmax(logits)[y] over the batch.
double cross_entropy_loss(const MlpParams& params, std::span<const Example> batch);
LossAndGrad cross_entropy_grad(const MlpParams& params, std::span<const Example> batch);

struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimState {
  AdamWConfig config;
  std::int64_t step = 0;
  MlpParams first_moment;
  MlpParams second_moment;
};

OptimState make_optimizer(const MlpParams& params, const AdamWConfig& config);

// Decoupled weight decay (p *= 1 - lr * wd) followed by the bias-corrected
// adaptive-moment update. Throws NumericError on non-finite gradients.
void optimizer_step(MlpParams& params, const MlpGrads& grads, OptimState& opt);

// Largest relative error between `analytic` and central differences of
// `loss` over all coordinates (a seeded 1% sample above 10^4 parameters).
// Denominators are floored at 1e-6. Throws ValidationError unless
// 0 < h <= 1e-3.
double grad_check(const MlpParams& params, const std::function<double(const MlpParams&)>& loss,
                  const MlpGrads& analytic, double h, std::uint64_t sample_seed = 0);
double grad_check(const MlpParams& params, std::span<const Example> batch, double h, std::uint64_t sample_seed = 0);

void scale(MlpGrads& grads, double factor);
void add_to(MlpGrads& dst, const MlpGrads& src);

// Text checkpoint with a shape header; floats are written as hex so a
// save/load round trip is bit-exact. `meta` carries free-form tags such as
// the featurizer version.
void save_mlp(std::ostream& out, const MlpParams& params, const std::map<std::string, std::string>& meta = {});
MlpParams load_mlp(std::istream& in, std::map<std::string, std::string>* meta = nullptr);

}  // namespace prmgui::nn
