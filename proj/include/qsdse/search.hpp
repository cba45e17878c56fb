#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsdse/model.hpp"
#include "qsdse/rng.hpp"

namespace qsdse {

/// One step of an episode: from state (layer-1, from_impl) -- or START when
/// layer == 0 -- the agent took `action` (impl index of `layer`) and received
/// `reward` (negated milliseconds).
struct Transition {
  int layer = 0;
  int from_impl = 0; // ignored when layer == 0
  int action = 0;
  double reward = 0.0; // <= 0
  bool terminal = false;
};

/// Tabular action-value function over (depth, impl) states. Row (layer,
/// from_impl) holds one value per impl of `layer`; layer 0 has the single
/// START row. All values start at 0.
class QTable {
public:
  QTable(const DesignSpace& space, double alpha, double gamma);

  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }

  const std::vector<double>& row(int layer, int from_impl) const;
  double value(const Transition& t) const;

  /// Bellman update, exactly
  ///   Q(s,a) = Q(s,a)(1-alpha) + alpha [r + gamma max_a' Q(s',a')]
  /// with max term 0 on terminal transitions. Returns the updated value.
  double update(const Transition& t);

private:
  std::vector<double>& row_mut(int layer, int from_impl);
  double max_next(const Transition& t) const;

  double alpha_;
  double gamma_;
  // rows_[0] has one row (START); rows_[l] has one row per impl of layer l-1.
  std::vector<std::vector<std::vector<double>>> rows_;
};

/// Free-function spelling of the Bellman update used by the tests.
inline double q_update(QTable& q, const Transition& t) { return q.update(t); }

/// Fixed-capacity ring keeping the most recent transitions.
class ReplayBuffer {
public:
  explicit ReplayBuffer(std::size_t capacity = 128) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return buffer_.size(); }

  void push(const Transition& t);

  /// i-th most recent transition, i in [0, size).
  const Transition& recent(std::size_t i) const;

  const Transition& sample(RandomSource& rng) const;

private:
  std::size_t capacity_;
  std::size_t next_ = 0; // slot for the next push once full
  std::vector<Transition> buffer_;
};

/// epsilon blocks as (epsilon, episode count), non-increasing epsilon.
struct EpsilonSchedule {
  std::vector<std::pair<double, int>> blocks;

  int total_episodes() const;
  /// epsilon for a 0-based episode number.
  double at(int episode) const;
};

/// 50% of episodes at epsilon 1.0, 5% at each of 0.9..0.1, and the floor
/// remainder at 0 (full exploitation). Requires >= 20 episodes.
EpsilonSchedule epsilon_schedule(int total_episodes);

struct SearchParams {
  int total_episodes = 500;
  double alpha = 0.05;
  double gamma = 0.9;
  int replay_batch = 32;
  int replay_capacity = 128;
  std::uint64_t seed = 0;
};

struct SearchReport {
  std::string algorithm;
  Configuration best_config;
  double best_latency_ms = 0.0;
  std::uint64_t considered_states = 0; // (layer, impl) evaluations performed
  std::vector<double> learning_curve;  // per-episode latency (RL/Random only)
  double wall_time_ms = 0.0;           // informational; never serialised
  std::optional<std::uint64_t> seed;
};

/// epsilon-greedy pick over one Q row: with probability epsilon a uniform
/// action, otherwise the argmax with ties broken by lowest impl index
/// (impls are id-sorted, so lowest index == lowest id).
int select_action(const std::vector<double>& row, double epsilon,
                  RandomSource& rng);

/// Q-learning search: per episode, samples impls layer by layer with the
/// scheduled epsilon, applies per-layer shaped rewards (negated layer latency
/// with edge penalties charged to the consumer), updates Q along the episode
/// and over a replayed batch. Configurations crossing a FORBIDDEN edge get a
/// surrogate reward of twice the worst finite episode latency and are never
/// eligible as best.
SearchReport run_rl(const DesignSpace& space, const SearchParams& params);

/// Uniform sampling per layer per episode; no learning.
SearchReport run_random(const DesignSpace& space, int episodes,
                        std::uint64_t seed);

/// One forward greedy pass; picks per layer the impl minimising latency (DS)
/// or latency plus incoming conversion penalty (DS+). Chains only.
SearchReport run_direct(const DesignSpace& space, bool include_penalty);

/// Exact shortest path over the layered graph, node costs folded into
/// incoming edges; settles every reachable vertex. Chains only.
SearchReport run_dijkstra(const DesignSpace& space);

/// A* with h(vertex at depth d) = min impl latency of layer d+2 (0 near the
/// end), stopping when the virtual END vertex is popped. Chains only.
SearchReport run_astar(const DesignSpace& space);

inline constexpr std::uint64_t kDefaultBruteForceCap = 10'000'000;

/// Exhaustive enumeration (OpenMP over the index space); ground truth for
/// everything else. Throws SpaceTooLarge above `cap` configurations.
SearchReport run_brute_force(const DesignSpace& space,
                             std::uint64_t cap = kDefaultBruteForceCap);

} // namespace qsdse
