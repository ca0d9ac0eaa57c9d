#include "prmgui/neural.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include "prmgui/error.hpp"
#include "prmgui/rng.hpp"

namespace prmgui::nn {

std::size_t MlpParams::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

bool MlpParams::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  }
  return true;
}

double& MlpParams::coord(std::size_t i) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto nw = static_cast<std::size_t>(weights[l].size());
    if (i < nw) return weights[l].data()[i];
    i -= nw;
    const auto nb = static_cast<std::size_t>(biases[l].size());
    if (i < nb) return biases[l].data()[i];
    i -= nb;
  }
  throw std::out_of_range("MlpParams::coord");
}

double MlpParams::coord(std::size_t i) const { return const_cast<MlpParams&>(*this).coord(i); }

bool MlpParams::operator==(const MlpParams& o) const {
  if (layer_sizes != o.layer_sizes || activation != o.activation || weights.size() != o.weights.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l] != o.weights[l] || biases[l] != o.biases[l]) return false;
  }
  return true;
}

MlpParams init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed, Activation activation) {
  if (layer_sizes.size() < 2) throw ValidationError("an MLP needs at least an input and an output layer");
  for (int s : layer_sizes) {
    if (s <= 0) throw ValidationError("layer sizes must be positive");
  }
  MlpParams p;
  p.layer_sizes = layer_sizes;
  p.activation = activation;
  Rng rng(seed);
  const std::size_t n_layers = layer_sizes.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const int in = layer_sizes[l];
    const int out = layer_sizes[l + 1];
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(out, in);
    if (l + 1 < n_layers) {
      const double limit = activation == Activation::Tanh ? std::sqrt(6.0 / (in + out)) : std::sqrt(6.0 / in);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return p;
}

MlpGrads zeros_like(const MlpParams& params) {
  MlpGrads g;
  g.layer_sizes = params.layer_sizes;
  g.activation = params.activation;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(params.weights[l].rows(), params.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(params.biases[l].size()));
  }
  return g;
}

Eigen::MatrixXd forward_batch(const MlpParams& params, const Eigen::MatrixXd& inputs, ForwardCache* cache) {
  if (inputs.rows() != params.input_dim()) {
    throw ValidationError("input dimension " + std::to_string(inputs.rows()) + " does not match layer size " +
                          std::to_string(params.input_dim()));
  }
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(inputs);
  }
  Eigen::MatrixXd a = inputs;
  const std::size_t n = params.num_layers();
  for (std::size_t l = 0; l < n; ++l) {
    Eigen::MatrixXd z = params.weights[l] * a;
    z.colwise() += params.biases[l];
    if (l + 1 < n) {
      if (params.activation == Activation::Tanh) {
        z = z.array().tanh().matrix();
      } else {
        z = z.cwiseMax(0.0);
      }
    }
    a = std::move(z);
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Eigen::VectorXd forward(const MlpParams& params, const Eigen::VectorXd& input) {
  return forward_batch(params, input).col(0);
}

void backward(const MlpParams& params, const ForwardCache& cache, const Eigen::MatrixXd& d_outputs, MlpGrads& grads) {
  const std::size_t n = params.num_layers();
  Eigen::MatrixXd delta = d_outputs;
  for (std::size_t l = n; l-- > 0;) {
    const Eigen::MatrixXd& a_in = cache.activations[l];
    grads.weights[l].noalias() += delta * a_in.transpose();
    grads.biases[l] += delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd d_in = params.weights[l].transpose() * delta;
    if (params.activation == Activation::Tanh) {
      delta = (d_in.array() * (1.0 - a_in.array().square())).matrix();
    } else {
      delta = (d_in.array() * (a_in.array() > 0.0).cast<double>()).matrix();
    }
  }
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  return (logits.array() - log_sum_exp(logits)).matrix();
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

namespace {

Eigen::MatrixXd stack_inputs(const MlpParams& params, std::span<const Example> batch) {
  Eigen::MatrixXd x(params.input_dim(), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].x.size() != params.input_dim()) throw ValidationError("example dimension mismatch");
    if (batch[i].y < 0 || batch[i].y >= params.output_dim()) throw ValidationError("label out of range");
    x.col(static_cast<Eigen::Index>(i)) = batch[i].x;
  }
  return x;
}

}  // namespace

double cross_entropy_loss(const MlpParams& params, std::span<const Example> batch) {
  if (batch.empty()) throw ValidationError("cross entropy over an empty batch");
  const Eigen::MatrixXd logits = forward_batch(params, stack_inputs(params, batch));
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Eigen::VectorXd col = logits.col(static_cast<Eigen::Index>(i));
    total += log_sum_exp(col) - col(batch[i].y);
  }
  return total / static_cast<double>(batch.size());
}

LossAndGrad cross_entropy_grad(const MlpParams& params, std::span<const Example> batch) {
  if (batch.empty()) throw ValidationError("cross entropy over an empty batch");
  ForwardCache cache;
  const Eigen::MatrixXd logits = forward_batch(params, stack_inputs(params, batch), &cache);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Eigen::MatrixXd d_logits(logits.rows(), logits.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd col = logits.col(c);
    const double lse = log_sum_exp(col);
    total += lse - col(batch[i].y);
    d_logits.col(c) = (col.array() - lse).exp().matrix() * inv_n;
    d_logits(batch[i].y, c) -= inv_n;
  }
  LossAndGrad out{total * inv_n, zeros_like(params)};
  backward(params, cache, d_logits, out.grads);
  return out;
}

OptimState make_optimizer(const MlpParams& params, const AdamWConfig& config) {
  if (!(config.lr > 0.0) || config.weight_decay < 0.0 || config.beta1 < 0.0 || config.beta1 >= 1.0 ||
      config.beta2 < 0.0 || config.beta2 >= 1.0 || !(config.eps > 0.0)) {
    throw ValidationError("invalid AdamW configuration");
  }
  return {config, 0, zeros_like(params), zeros_like(params)};
}

void optimizer_step(MlpParams& params, const MlpGrads& grads, OptimState& opt) {
  if (grads.layer_sizes != params.layer_sizes || opt.first_moment.layer_sizes != params.layer_sizes) {
    throw ValidationError("optimizer shapes do not match parameters");
  }
  if (!grads.all_finite()) throw NumericError("non-finite gradient rejected by optimizer_step");
  const auto& c = opt.config;
  opt.step += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.step));
  const double decay = 1.0 - c.lr * c.weight_decay;
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    p *= decay;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    p.array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  };
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    update(params.weights[l], grads.weights[l], opt.first_moment.weights[l], opt.second_moment.weights[l]);
    update(params.biases[l], grads.biases[l], opt.first_moment.biases[l], opt.second_moment.biases[l]);
  }
}

double grad_check(const MlpParams& params, const std::function<double(const MlpParams&)>& loss,
                  const MlpGrads& analytic, double h, std::uint64_t sample_seed) {
  if (!(h > 0.0 && h <= 1e-3)) throw ValidationError("grad_check step h must be in (0, 1e-3]");
  const std::size_t n = params.num_params();
  std::vector<std::size_t> coords;
  if (n > 10'000) {
    Rng rng(sample_seed);
    const std::size_t k = std::max<std::size_t>(1, n / 100);
    for (std::size_t i = 0; i < k; ++i) coords.push_back(uniform_index(rng, n));
  } else {
    coords.resize(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
  }
  MlpParams probe = params;
  double worst = 0.0;
  for (std::size_t i : coords) {
    const double orig = probe.coord(i);
    probe.coord(i) = orig + h;
    const double up = loss(probe);
    probe.coord(i) = orig - h;
    const double down = loss(probe);
    probe.coord(i) = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.coord(i);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

double grad_check(const MlpParams& params, std::span<const Example> batch, double h, std::uint64_t sample_seed) {
  const auto analytic = cross_entropy_grad(params, batch);
  return grad_check(
      params, [&](const MlpParams& p) { return cross_entropy_loss(p, batch); }, analytic.grads, h, sample_seed);
}

void scale(MlpGrads& grads, double factor) {
  for (std::size_t l = 0; l < grads.num_layers(); ++l) {
    grads.weights[l] *= factor;
    grads.biases[l] *= factor;
  }
}

void add_to(MlpGrads& dst, const MlpGrads& src) {
  for (std::size_t l = 0; l < dst.num_layers(); ++l) {
    dst.weights[l] += src.weights[l];
    dst.biases[l] += src.biases[l];
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kMagic = "prmgui-mlp";
constexpr int kFormatVersion = 1;

void write_values(std::ostream& out, const double* data, Eigen::Index n) {
  char buf[64];
  for (Eigen::Index i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "%a", data[i]);
    out << buf << (i + 1 == n ? '\n' : ' ');
  }
  if (n == 0) out << '\n';
}

void read_values(std::istream& in, double* data, Eigen::Index n) {
  std::string tok;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(in >> tok)) throw IoError("truncated checkpoint");
    char* end = nullptr;
    data[i] = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw IoError("bad number in checkpoint: " + tok);
  }
}

}  // namespace

void save_mlp(std::ostream& out, const MlpParams& params, const std::map<std::string, std::string>& meta) {
  out << kMagic << ' ' << kFormatVersion << '\n';
  for (const auto& [k, v] : meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ValidationError("checkpoint meta must be single-line, key without spaces");
    }
    out << "meta " << k << ' ' << v << '\n';
  }
  out << "activation " << (params.activation == Activation::Tanh ? "tanh" : "relu") << '\n';
  out << "layers " << params.layer_sizes.size();
  for (int s : params.layer_sizes) out << ' ' << s;
  out << '\n';
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    out << "W " << l << ' ' << params.weights[l].rows() << ' ' << params.weights[l].cols() << '\n';
    write_values(out, params.weights[l].data(), params.weights[l].size());
    out << "b " << l << ' ' << params.biases[l].size() << '\n';
    write_values(out, params.biases[l].data(), params.biases[l].size());
  }
  out << "end\n";
}

MlpParams load_mlp(std::istream& in, std::map<std::string, std::string>* meta) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw IoError("not a prmgui MLP checkpoint");
  if (version != kFormatVersion) throw VersionMismatch("unsupported checkpoint version " + std::to_string(version));
  std::string tag;
  MlpParams p;
  std::vector<int> sizes;
  while (in >> tag) {
    if (tag == "meta") {
      std::string key;
      std::string value;
      in >> key;
      std::getline(in, value);
      if (!value.empty() && value[0] == ' ') value.erase(0, 1);
      if (meta) (*meta)[key] = value;
    } else if (tag == "activation") {
      std::string a;
      in >> a;
      if (a == "tanh") {
        p.activation = Activation::Tanh;
      } else if (a == "relu") {
        p.activation = Activation::Relu;
      } else {
        throw IoError("unknown activation " + a);
      }
    } else if (tag == "layers") {
      std::size_t n = 0;
      in >> n;
      sizes.resize(n);
      for (auto& s : sizes) in >> s;
      p = [&] {
        MlpParams shaped = zeros_like(init_mlp(sizes, 0, p.activation));
        shaped.activation = p.activation;
        return shaped;
      }();
    } else if (tag == "W") {
      std::size_t l = 0;
      Eigen::Index r = 0;
      Eigen::Index c = 0;
      in >> l >> r >> c;
      if (l >= p.num_layers() || p.weights[l].rows() != r || p.weights[l].cols() != c) {
        throw IoError("checkpoint weight shape does not match header");
      }
      read_values(in, p.weights[l].data(), r * c);
    } else if (tag == "b") {
      std::size_t l = 0;
      Eigen::Index n = 0;
      in >> l >> n;
      if (l >= p.num_layers() || p.biases[l].size() != n) throw IoError("checkpoint bias shape does not match header");
      read_values(in, p.biases[l].data(), n);
    } else if (tag == "end") {
      if (sizes.empty()) throw IoError("checkpoint without layers header");
      return p;
    } else {
      throw IoError("unexpected checkpoint tag " + tag);
    }
  }
  throw IoError("truncated checkpoint");
}

}  // namespace prmgui::nn
