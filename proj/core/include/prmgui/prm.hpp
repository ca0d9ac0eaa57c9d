#pragma once

// The process reward model: a two-way classifier over hand-built features of
// (task, state, action), trained with cross-entropy on step labels.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prmgui/datagen.hpp"
#include "prmgui/neural.hpp"
#include "prmgui/protocol.hpp"
#include "prmgui/socket.hpp"
#include "prmgui/world.hpp"

namespace prmgui::prm {

using datagen::Label;

// Feature layout: a state block (task, screen, progress flags) followed by
// an action block (kind, target widget, typed text, direction). Value models
// see the state block with the action block zeroed.
inline constexpr std::string_view kFeatureSchema = "feat-1";
inline constexpr int kStateDim = 38;
inline constexpr int kActionDim = 51;
inline constexpr int kFeatureDim = kStateDim + kActionDim;

// "<schema>/<fixture version>"; stored in every checkpoint.
std::string featurizer_version(const world::Fixture& fixture = *world::default_fixture());

// Throws VersionMismatch unless both ids name the same schema and fixture.
void check_version(const std::string& model_version, const std::string& expected);

Eigen::VectorXd featurize(const world::TaskSpec& task, const world::GuiState& state, const world::Action& action);
Eigen::VectorXd featurize_state(const world::TaskSpec& task, const world::GuiState& state);
// One column per action.
Eigen::MatrixXd featurize_all(const world::TaskSpec& task, const world::GuiState& state,
                              std::span<const world::Action> actions);

// Output 0 is the positive token, output 1 the negative one.
struct PrmModel {
  std::string featurizer_version;
  nn::MlpParams params;
};

PrmModel make_prm(std::uint64_t seed, const std::vector<int>& hidden = {64, 64},
                  const world::Fixture& fixture = *world::default_fixture());

struct PrmScore {
  double logit_pos = 0.0;
  double logit_neg = 0.0;
  double p_pos = 0.5;
  Label label = Label::Negative;
  bool operator==(const PrmScore&) const = default;
};

// Ties go to the negative label.
PrmScore score_from_logits(double logit_pos, double logit_neg);

PrmScore prm_score(const PrmModel& model, const world::TaskSpec& task, const world::GuiState& state,
                   const world::Action& action);
std::vector<PrmScore> prm_score_batch(const PrmModel& model, const world::TaskSpec& task,
                                      const world::GuiState& state, std::span<const world::Action> actions);

// 2 * p_pos - 1, or +-1 from the label when `hard`.
double prm_scalar(const PrmScore& s, bool hard = false);

struct PrmTrainConfig {
  int epochs = 2;
  double lr = 1e-4;
  int batch_size = 32;
  double weight_decay = 0.01;
  std::vector<int> hidden{64, 64};
};

struct PrmTrainResult {
  PrmModel model;
  std::vector<double> epoch_loss;  // mean training loss per epoch
  std::vector<double> step_loss;   // minibatch loss per optimizer step
};

PrmTrainResult train_prm(const datagen::LabeledDataset& dataset, const PrmTrainConfig& cfg, std::uint64_t seed);

// Fraction of records whose predicted label equals the clean oracle label.
double prm_accuracy(const PrmModel& model, const datagen::LabeledDataset& heldout);

void save_prm(std::ostream& out, const PrmModel& model);
PrmModel load_prm(std::istream& in);
void save_prm(const std::filesystem::path& path, const PrmModel& model);
PrmModel load_prm(const std::filesystem::path& path);

// Something that scores steps: an in-process model or a remote service.
class StepScorer {
 public:
  virtual ~StepScorer() = default;
  virtual std::vector<PrmScore> score(const world::TaskSpec& task, const world::GuiState& state,
                                      std::span<const world::Action> actions) const = 0;
  PrmScore score_one(const world::TaskSpec& task, const world::GuiState& state, const world::Action& action) const {
    return score(task, state, std::span<const world::Action>(&action, 1)).front();
  }
};

class LocalScorer final : public StepScorer {
 public:
  explicit LocalScorer(std::shared_ptr<const PrmModel> model) : model_(std::move(model)) {}
  std::vector<PrmScore> score(const world::TaskSpec& task, const world::GuiState& state,
                              std::span<const world::Action> actions) const override;
  const PrmModel& model() const { return *model_; }

 private:
  std::shared_ptr<const PrmModel> model_;
};

// Thread-safe; calls are serialized over one connection, which is
// re-established once if it drops.
class RemoteScorer final : public StepScorer {
 public:
  explicit RemoteScorer(net::Endpoint ep, net::ClientOptions opts = {});
  std::vector<PrmScore> score(const world::TaskSpec& task, const world::GuiState& state,
                              std::span<const world::Action> actions) const override;

 private:
  net::Endpoint ep_;
  net::ClientOptions opts_;
  mutable std::mutex mu_;
  mutable std::unique_ptr<net::Client> client_;
};

// Requests: `Score` {task, state, action} -> ScoreOk {logit_pos, logit_neg,
// p_pos, label}; `ScoreBatch` {task, state, actions} -> ScoreBatchOk
// {scores}; `Ping` -> Pong.
class PrmServer {
 public:
  PrmServer(std::shared_ptr<const PrmModel> model, const net::Endpoint& bind);
  net::Endpoint endpoint() const { return server_->endpoint(); }
  void stop() { server_->stop(); }

 private:
  std::shared_ptr<const PrmModel> model_;
  std::unique_ptr<net::LineServer> server_;
};

std::unique_ptr<PrmServer> serve_prm(std::shared_ptr<const PrmModel> model, const net::Endpoint& bind);

nlohmann::json to_json(const PrmScore& s);
PrmScore prm_score_from_json(const nlohmann::json& j);

}  // namespace prmgui::prm
