#include <bitset>
#include <mutex>
#include <unordered_map>

#include "prmgui/error.hpp"
#include "prmgui/world.hpp"
#include "world_model.hpp"

namespace prmgui::world {

namespace {

using detail::Model;
using detail::ModelHash;

constexpr std::size_t kMaxRootMoves = 128;
using MoveMask = std::bitset<kMaxRootMoves>;

struct Analysis {
  int dist = -1;  // -1 = unreachable
  bool exhausted = false;
  std::size_t nodes = 0;
  // Root moves (enumerate_moves order) that start a shortest path.
  MoveMask optimal;
};

// Layered breadth-first search from `root`. Every node carries the set of
// root moves that reach it at minimal depth, so the union over the first
// goal layer is exactly the set of optimal first moves.
Analysis analyze(const WorldInstance& w, Model root, std::size_t budget) {
  const Fixture& fx = w.fixture();
  const auto& vocab = WorldAccess::vocab(w);
  const auto goal = detail::make_goal(w.task(), fx, vocab);
  const auto typed = WorldAccess::typed_ids(w);
  root.step_count = 0;

  Analysis out;
  if (detail::goal_met(root, goal)) {
    out.dist = 0;
    return out;
  }

  std::unordered_map<Model, std::uint32_t, ModelHash> index;
  std::vector<Model> nodes;
  std::vector<MoveMask> masks;
  index.emplace(root, 0);
  nodes.push_back(root);
  masks.emplace_back();

  {
    const auto slots = detail::layout(root, fx, vocab);
    const auto moves = detail::enumerate_moves(root, slots, fx, typed);
    if (moves.size() > kMaxRootMoves) throw std::length_error("too many candidate actions for search");
    for (std::size_t i = 0; i < moves.size(); ++i) {
      if (moves[i].kind == ActionKind::Finished) continue;
      Model next = detail::apply(root, moves[i], slots, fx, vocab);
      if (next == root) continue;
      auto [it, inserted] = index.emplace(std::move(next), static_cast<std::uint32_t>(nodes.size()));
      if (inserted) {
        nodes.push_back(it->first);
        masks.emplace_back();
      }
      masks[it->second].set(i);
    }
  }

  std::size_t layer_begin = 1;
  int depth = 1;
  while (layer_begin < nodes.size()) {
    const std::size_t layer_end = nodes.size();
    MoveMask found;
    bool any_goal = false;
    for (std::size_t k = layer_begin; k < layer_end; ++k) {
      if (detail::goal_met(nodes[k], goal)) {
        any_goal = true;
        found |= masks[k];
      }
    }
    if (any_goal) {
      out.dist = depth;
      out.optimal = found;
      out.nodes = nodes.size();
      return out;
    }
    for (std::size_t k = layer_begin; k < layer_end; ++k) {
      const Model current = nodes[k];
      const MoveMask mask = masks[k];
      const auto slots = detail::layout(current, fx, vocab);
      for (const auto& mv : detail::enumerate_moves(current, slots, fx, typed)) {
        if (mv.kind == ActionKind::Finished) continue;
        Model next = detail::apply(current, mv, slots, fx, vocab);
        auto [it, inserted] = index.emplace(std::move(next), static_cast<std::uint32_t>(nodes.size()));
        if (inserted) {
          nodes.push_back(it->first);
          masks.push_back(mask);
          if (nodes.size() > budget) {
            out.exhausted = true;
            out.nodes = nodes.size();
            return out;
          }
        } else if (it->second >= layer_end) {
          masks[it->second] |= mask;
        }
      }
    }
    layer_begin = layer_end;
    ++depth;
  }
  out.nodes = nodes.size();
  return out;
}

Distance to_distance(const Analysis& a) {
  Distance d;
  if (a.dist >= 0) d.steps = a.dist;
  d.budget_exhausted = a.exhausted;
  d.nodes_expanded = a.nodes;
  return d;
}

std::string cache_namespace(const WorldInstance& w) {
  std::string key = w.fixture().version;
  key += '\x1f';
  key += to_string(w.task().tmpl);
  for (const auto& [k, v] : w.task().params) {
    key += '\x1f';
    key += k;
    key += '=';
    key += v;
  }
  const auto& vocab = WorldAccess::vocab(w);
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    key += '\x1e';
    key += vocab.at(static_cast<std::uint16_t>(i));
  }
  return key;
}

}  // namespace

Distance min_steps_to_success(const WorldInstance& world, std::size_t node_budget) {
  return to_distance(analyze(world, WorldAccess::model(world), node_budget));
}

struct DistanceOracle::Impl {
  std::size_t budget;
  mutable std::mutex mu;
  std::unordered_map<std::string, std::unordered_map<Model, Analysis, ModelHash>> cache;

  Analysis lookup(const WorldInstance& w) {
    Model key = WorldAccess::model(w);
    key.step_count = 0;
    const std::string ns = cache_namespace(w);
    {
      std::lock_guard lock(mu);
      const auto outer = cache.find(ns);
      if (outer != cache.end()) {
        const auto inner = outer->second.find(key);
        if (inner != outer->second.end()) return inner->second;
      }
    }
    Analysis a = analyze(w, key, budget);
    std::lock_guard lock(mu);
    cache[ns].emplace(std::move(key), a);
    return a;
  }
};

DistanceOracle::DistanceOracle(std::size_t node_budget) : impl_(std::make_unique<Impl>()) {
  impl_->budget = node_budget;
}

DistanceOracle::~DistanceOracle() = default;

Distance DistanceOracle::distance(const WorldInstance& world) const { return to_distance(impl_->lookup(world)); }

Distance DistanceOracle::distance_after(const WorldInstance& world, const Action& action) const {
  return distance(peek_step(world, action));
}

std::size_t DistanceOracle::cache_size() const {
  std::lock_guard lock(impl_->mu);
  std::size_t n = 0;
  for (const auto& [ns, inner] : impl_->cache) n += inner.size();
  return n;
}

bool is_correct_dismissal(const WorldInstance& world, const Action& action) {
  if (!world.state().obstacle || action.kind != ActionKind::Click) return false;
  const auto next = peek_step(world, action);
  return !next.state().obstacle && next.state().screen == world.state().screen;
}

std::vector<Action> optimal_actions(const WorldInstance& world, const DistanceOracle& oracle) {
  return oracle.optimal_actions(world);
}

std::vector<Action> DistanceOracle::optimal_actions(const WorldInstance& world) const {
  const Analysis a = impl_->lookup(world);
  if (a.dist < 0) return {};
  if (a.dist == 0) {
    // Solved, but a dialog may still hide Finished; clear it first.
    if (!world.state().obstacle) return {Action::finished()};
    for (const auto& c : enumerate_actions(world.state(), world.task())) {
      if (is_correct_dismissal(world, c)) return {c};
    }
    return {};
  }
  const auto candidates = enumerate_actions(world.state(), world.task());
  std::vector<Action> out;
  for (std::size_t i = 0; i < candidates.size() && i < kMaxRootMoves; ++i) {
    if (a.optimal.test(i)) out.push_back(candidates[i]);
  }
  return out;
}

}  // namespace prmgui::world
