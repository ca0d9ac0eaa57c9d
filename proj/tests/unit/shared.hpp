#pragma once

// Models trained once per test process and shared by several suites.

#include <memory>

#include "prmgui/datagen.hpp"
#include "prmgui/policy.hpp"
#include "prmgui/prm.hpp"
#include "prmgui/recipes.hpp"

namespace testing {

inline const prmgui::world::DistanceOracle& oracle() {
  static prmgui::world::DistanceOracle o;
  return o;
}

inline std::shared_ptr<const prmgui::policy::PolicyModel> baseline() {
  static const auto p = std::make_shared<const prmgui::policy::PolicyModel>(prmgui::recipes::baseline_policy(oracle()));
  return p;
}

struct TrainedPrm {
  std::shared_ptr<const prmgui::prm::PrmModel> model;
  prmgui::datagen::LabeledDataset heldout;
};

// Clean labels from the acceptance data mix (5000 probes, 500 episodes).
inline const TrainedPrm& trained_prm() {
  static const TrainedPrm t = [] {
    prmgui::policy::PolicyAgent agent(baseline());
    const prmgui::recipes::DataSpec spec;
    const auto recs =
        prmgui::recipes::prm_records(agent, nullptr, prmgui::datagen::default_task_bank(), spec, 31, oracle());
    auto [train, heldout] = prmgui::datagen::balance_and_split(recs, 1.0, 0.2, 32);
    auto res = prmgui::prm::train_prm(train, prmgui::recipes::tuned_prm_config(), 33);
    return TrainedPrm{std::make_shared<const prmgui::prm::PrmModel>(std::move(res.model)), std::move(heldout)};
  }();
  return t;
}

}  // namespace testing
