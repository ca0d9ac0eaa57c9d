#pragma once

// Candidate-set policy: softmax over scorer(featurize(task, state, a)) / T
// for a in enumerate_actions(state). Value models read the state block of
// the same features.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prmgui/datagen.hpp"
#include "prmgui/neural.hpp"
#include "prmgui/prm.hpp"
#include "prmgui/rollout.hpp"

namespace prmgui::policy {

struct PolicyModel {
  std::string featurizer_version;
  nn::MlpParams scorer;  // [F, ..., 1]
  double temperature = 1.0;
};

PolicyModel make_policy(std::uint64_t seed, const std::vector<int>& hidden = {64, 64});

// Log-probabilities over the columns of `feats` (one candidate per column).
// Temperature 0 puts all mass on the first highest-scoring candidate.
Eigen::VectorXd log_probs(const PolicyModel& model, const Eigen::MatrixXd& feats);
Eigen::VectorXd probs(const PolicyModel& model, const Eigen::MatrixXd& feats);
Eigen::VectorXd action_probs(const PolicyModel& model, const world::TaskSpec& task, const world::GuiState& state,
                             std::span<const world::Action> candidates);

// Lowest index among the maximal entries.
std::size_t argmax(const Eigen::VectorXd& v);

// Many decision points scored in one pass. Item i owns columns
// [offsets[i], offsets[i+1]) of `feats` and chose column offsets[i] + chosen[i].
struct DecisionBatch {
  Eigen::MatrixXd feats;
  std::vector<Eigen::Index> offsets{0};
  std::vector<std::size_t> chosen;

  void add(const Eigen::MatrixXd& candidate_feats, std::size_t chosen_index);
  std::size_t size() const { return chosen.size(); }
};

// Returns log pi(chosen_i). When `grads` is given, asks `dloss_dlogp` for
// dL/dlogp_i and accumulates dL/dtheta into `grads`.
Eigen::VectorXd batch_logp(const PolicyModel& model, const DecisionBatch& batch,
                           const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& dloss_dlogp = {},
                           nn::MlpGrads* grads = nullptr);

struct ValueModel {
  std::string featurizer_version;
  nn::MlpParams params;  // [F, ..., 1] over state features
};

ValueModel make_value(std::uint64_t seed, const std::vector<int>& hidden = {64, 64});

// Copies every PRM layer except the output; the scalar head starts at zero.
ValueModel init_value_from_prm(const prm::PrmModel& prm);

double value_of(const ValueModel& model, const world::TaskSpec& task, const world::GuiState& state);
// Values for a batch of state-feature columns.
Eigen::VectorXd values_of(const ValueModel& model, const Eigen::MatrixXd& state_feats);

// Samples from the policy, or takes the argmax when greedy.
class PolicyAgent final : public Agent {
 public:
  explicit PolicyAgent(std::shared_ptr<const PolicyModel> model, bool greedy = false)
      : model_(std::move(model)), greedy_(greedy) {}
  StepChoice choose(const world::TaskSpec& task, const world::GuiState& state,
                    std::span<const world::Action> candidates, Rng& rng, const EpisodeContext& ctx) const override;
  const PolicyModel& model() const { return *model_; }

 private:
  std::shared_ptr<const PolicyModel> model_;
  bool greedy_;
};

// Draws one index from the policy's distribution (one uniform draw).
std::size_t sample_index(const Eigen::VectorXd& probs, Rng& rng);

void save_policy(const std::filesystem::path& path, const PolicyModel& model);
PolicyModel load_policy(const std::filesystem::path& path);
void save_value(const std::filesystem::path& path, const ValueModel& model);
ValueModel load_value(const std::filesystem::path& path);

// Supervised warm start on oracle actions: maximizes log pi(ground truth).
struct CloneConfig {
  int steps = 200;
  int batch_size = 32;
  double lr = 1e-3;
  std::vector<int> hidden{64, 64};
};

PolicyModel behavior_clone(const std::vector<datagen::OfflineExample>& examples, const CloneConfig& cfg,
                           std::uint64_t seed);

}  // namespace prmgui::policy
