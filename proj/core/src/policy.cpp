#include "prmgui/policy.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>

#include "prmgui/error.hpp"

namespace prmgui::policy {

using world::Action;

PolicyModel make_policy(std::uint64_t seed, const std::vector<int>& hidden) {
  std::vector<int> sizes{prm::kFeatureDim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return {prm::featurizer_version(), nn::init_mlp(sizes, seed, nn::Activation::Tanh), 1.0};
}

std::size_t argmax(const Eigen::VectorXd& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  }
  return best;
}

namespace {

Eigen::VectorXd greedy_log_probs(const Eigen::VectorXd& scores) {
  Eigen::VectorXd lp = Eigen::VectorXd::Constant(scores.size(), -std::numeric_limits<double>::infinity());
  lp(static_cast<Eigen::Index>(argmax(scores))) = 0.0;
  return lp;
}

}  // namespace

Eigen::VectorXd log_probs(const PolicyModel& model, const Eigen::MatrixXd& feats) {
  if (feats.cols() == 0) throw ValidationError("policy over an empty candidate set");
  const Eigen::VectorXd scores = nn::forward_batch(model.scorer, feats).row(0).transpose();
  if (model.temperature <= 0.0) return greedy_log_probs(scores);
  return nn::log_softmax(scores / model.temperature);
}

Eigen::VectorXd probs(const PolicyModel& model, const Eigen::MatrixXd& feats) {
  return log_probs(model, feats).array().exp().matrix();
}

Eigen::VectorXd action_probs(const PolicyModel& model, const world::TaskSpec& task, const world::GuiState& state,
                             std::span<const Action> candidates) {
  return probs(model, prm::featurize_all(task, state, candidates));
}

void DecisionBatch::add(const Eigen::MatrixXd& candidate_feats, std::size_t chosen_index) {
  if (chosen_index >= static_cast<std::size_t>(candidate_feats.cols())) {
    throw ValidationError("chosen index outside the candidate set");
  }
  const Eigen::Index start = offsets.back();
  const Eigen::Index k = candidate_feats.cols();
  if (feats.rows() == 0) feats.resize(candidate_feats.rows(), 0);
  feats.conservativeResize(Eigen::NoChange, start + k);
  feats.middleCols(start, k) = candidate_feats;
  offsets.push_back(start + k);
  chosen.push_back(chosen_index);
}

Eigen::VectorXd batch_logp(const PolicyModel& model, const DecisionBatch& batch,
                           const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& dloss_dlogp,
                           nn::MlpGrads* grads) {
  const std::size_t n = batch.size();
  Eigen::VectorXd logp(static_cast<Eigen::Index>(n));
  if (n == 0) return logp;
  if (model.temperature <= 0.0) throw ValidationError("log-probability gradients need a positive temperature");
  nn::ForwardCache cache;
  const Eigen::RowVectorXd scores = nn::forward_batch(model.scorer, batch.feats, grads ? &cache : nullptr).row(0);
  const double inv_t = 1.0 / model.temperature;
  std::vector<Eigen::VectorXd> p(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index a = batch.offsets[i];
    const Eigen::Index k = batch.offsets[i + 1] - a;
    const Eigen::VectorXd z = scores.segment(a, k).transpose() * inv_t;
    const Eigen::VectorXd lp = nn::log_softmax(z);
    logp(static_cast<Eigen::Index>(i)) = lp(static_cast<Eigen::Index>(batch.chosen[i]));
    p[i] = lp.array().exp().matrix();
  }
  if (!grads) return logp;
  const Eigen::VectorXd coeff = dloss_dlogp(logp);
  Eigen::MatrixXd d_scores = Eigen::MatrixXd::Zero(1, batch.feats.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index a = batch.offsets[i];
    const Eigen::Index k = batch.offsets[i + 1] - a;
    const double c = coeff(static_cast<Eigen::Index>(i));
    if (c == 0.0) continue;
    // d logp_chosen / d score_j = (1[j == chosen] - p_j) / T
    Eigen::RowVectorXd g = -p[i].transpose();
    g(static_cast<Eigen::Index>(batch.chosen[i])) += 1.0;
    d_scores.block(0, a, 1, k) += c * inv_t * g;
  }
  nn::backward(model.scorer, cache, d_scores, *grads);
  return logp;
}

ValueModel make_value(std::uint64_t seed, const std::vector<int>& hidden) {
  std::vector<int> sizes{prm::kFeatureDim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return {prm::featurizer_version(), nn::init_mlp(sizes, seed, nn::Activation::Tanh)};
}

ValueModel init_value_from_prm(const prm::PrmModel& prm) {
  prm::check_version(prm.featurizer_version, prm::featurizer_version());
  ValueModel v;
  v.featurizer_version = prm.featurizer_version;
  v.params = prm.params;
  v.params.layer_sizes.back() = 1;
  const auto last = v.params.num_layers() - 1;
  v.params.weights[last] = Eigen::MatrixXd::Zero(1, v.params.weights[last].cols());
  v.params.biases[last] = Eigen::VectorXd::Zero(1);
  return v;
}

double value_of(const ValueModel& model, const world::TaskSpec& task, const world::GuiState& state) {
  return nn::forward(model.params, prm::featurize_state(task, state))(0);
}

Eigen::VectorXd values_of(const ValueModel& model, const Eigen::MatrixXd& state_feats) {
  if (state_feats.cols() == 0) return {};
  return nn::forward_batch(model.params, state_feats).row(0).transpose();
}

std::size_t sample_index(const Eigen::VectorXd& p, Rng& rng) {
  return sample_categorical(rng, std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
}

StepChoice PolicyAgent::choose(const world::TaskSpec& task, const world::GuiState& state,
                               std::span<const Action> candidates, Rng& rng, const EpisodeContext&) const {
  const Eigen::VectorXd lp = log_probs(*model_, prm::featurize_all(task, state, candidates));
  const std::size_t idx = greedy_ ? argmax(lp) : sample_index(lp.array().exp().matrix(), rng);
  return {idx, lp(static_cast<Eigen::Index>(idx))};
}

namespace {

std::string hex_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

template <typename M>
void save_model(const std::filesystem::path& path, const nn::MlpParams& params,
                std::map<std::string, std::string> meta) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  nn::save_mlp(out, params, meta);
}

nn::MlpParams load_model(const std::filesystem::path& path, std::map<std::string, std::string>& meta,
                         const std::string& kind) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  auto params = nn::load_mlp(in, &meta);
  if (meta["kind"] != kind) throw FormatError(path.string() + " is not a " + kind + " checkpoint");
  prm::check_version(meta["featurizer"], prm::featurizer_version());
  if (params.input_dim() != prm::kFeatureDim || params.output_dim() != 1) {
    throw VersionMismatch(path.string() + ": shape does not match the feature schema");
  }
  return params;
}

}  // namespace

void save_policy(const std::filesystem::path& path, const PolicyModel& model) {
  save_model<PolicyModel>(path, model.scorer,
                          {{"kind", "policy"},
                           {"featurizer", model.featurizer_version},
                           {"temperature", hex_double(model.temperature)}});
}

PolicyModel load_policy(const std::filesystem::path& path) {
  std::map<std::string, std::string> meta;
  PolicyModel m;
  m.scorer = load_model(path, meta, "policy");
  m.featurizer_version = meta["featurizer"];
  m.temperature = std::strtod(meta["temperature"].c_str(), nullptr);
  return m;
}

void save_value(const std::filesystem::path& path, const ValueModel& model) {
  save_model<ValueModel>(path, model.params, {{"kind", "value"}, {"featurizer", model.featurizer_version}});
}

ValueModel load_value(const std::filesystem::path& path) {
  std::map<std::string, std::string> meta;
  ValueModel m;
  m.params = load_model(path, meta, "value");
  m.featurizer_version = meta["featurizer"];
  return m;
}

PolicyModel behavior_clone(const std::vector<datagen::OfflineExample>& examples, const CloneConfig& cfg,
                           std::uint64_t seed) {
  PolicyModel model = make_policy(derive_seed(seed, 1), cfg.hidden);
  if (cfg.steps <= 0) return model;
  if (examples.empty()) throw ValidationError("behavior_clone: no examples");
  std::vector<Eigen::MatrixXd> feats;
  std::vector<std::size_t> target;
  for (const auto& ex : examples) {
    const auto cands = world::enumerate_actions(ex.state, ex.task);
    const auto it = std::find(cands.begin(), cands.end(), ex.ground_truth);
    if (it == cands.end()) continue;
    feats.push_back(prm::featurize_all(ex.task, ex.state, cands));
    target.push_back(static_cast<std::size_t>(it - cands.begin()));
  }
  if (feats.empty()) throw ValidationError("behavior_clone: no ground truth among the candidates");
  nn::AdamWConfig ac;
  ac.lr = cfg.lr;
  auto opt = nn::make_optimizer(model.scorer, ac);
  Rng rng(derive_seed(seed, 2));
  for (int s = 0; s < cfg.steps; ++s) {
    DecisionBatch batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto i = uniform_index(rng, feats.size());
      batch.add(feats[i], target[i]);
    }
    auto grads = nn::zeros_like(model.scorer);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    batch_logp(
        model, batch, [&](const Eigen::VectorXd& lp) { return Eigen::VectorXd::Constant(lp.size(), -inv_n); },
        &grads);
    nn::optimizer_step(model.scorer, grads, opt);
  }
  return model;
}

}  // namespace prmgui::policy
