#include "qsdse/search.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

namespace qsdse {

QTable::QTable(const DesignSpace& space, double alpha, double gamma)
    : alpha_(alpha), gamma_(gamma) {
  const int depth = space.layer_count();
  rows_.resize(depth);
  for (int l = 0; l < depth; ++l) {
    const int row_count = (l == 0) ? 1 : space.impl_count(l - 1);
    rows_[l].assign(row_count,
                    std::vector<double>(space.impl_count(l), 0.0));
  }
}

const std::vector<double>& QTable::row(int layer, int from_impl) const {
  if (layer < 0 || layer >= static_cast<int>(rows_.size()))
    raise(ErrorCode::UnknownState, "no such layer in Q-table");
  const auto& layer_rows = rows_[layer];
  const int r = (layer == 0) ? 0 : from_impl;
  if (r < 0 || r >= static_cast<int>(layer_rows.size()))
    raise(ErrorCode::UnknownState, "no such state in Q-table");
  return layer_rows[r];
}

std::vector<double>& QTable::row_mut(int layer, int from_impl) {
  return const_cast<std::vector<double>&>(
      static_cast<const QTable*>(this)->row(layer, from_impl));
}

double QTable::value(const Transition& t) const {
  const auto& r = row(t.layer, t.from_impl);
  if (t.action < 0 || t.action >= static_cast<int>(r.size()))
    raise(ErrorCode::UnknownState, "no such action in Q-table");
  return r[t.action];
}

double QTable::max_next(const Transition& t) const {
  if (t.terminal) return 0.0;
  const auto& next = row(t.layer + 1, t.action);
  double best = next[0];
  for (double v : next) best = std::max(best, v);
  return best;
}

double QTable::update(const Transition& t) {
  const double mx = max_next(t);
  auto& r = row_mut(t.layer, t.from_impl);
  if (t.action < 0 || t.action >= static_cast<int>(r.size()))
    raise(ErrorCode::UnknownState, "no such action in Q-table");
  const double updated =
      r[t.action] * (1.0 - alpha_) + alpha_ * (t.reward + gamma_ * mx);
  r[t.action] = updated;
  return updated;
}

void ReplayBuffer::push(const Transition& t) {
  if (buffer_.size() < capacity_) {
    buffer_.push_back(t);
  } else {
    buffer_[next_] = t;
    next_ = (next_ + 1) % capacity_;
  }
}

const Transition& ReplayBuffer::recent(std::size_t i) const {
  if (buffer_.size() < capacity_) return buffer_[buffer_.size() - 1 - i];
  return buffer_[(next_ + capacity_ - 1 - i) % capacity_];
}

const Transition& ReplayBuffer::sample(RandomSource& rng) const {
  return buffer_[rng.next_index(buffer_.size())];
}

int EpsilonSchedule::total_episodes() const {
  int total = 0;
  for (const auto& [eps, count] : blocks) total += count;
  return total;
}

double EpsilonSchedule::at(int episode) const {
  int offset = episode;
  for (const auto& [eps, count] : blocks) {
    if (offset < count) return eps;
    offset -= count;
  }
  return blocks.back().first;
}

EpsilonSchedule epsilon_schedule(int total_episodes) {
  if (total_episodes < 20)
    raise(ErrorCode::TooFewEpisodes,
          "need at least 20 episodes, got " + std::to_string(total_episodes));
  const int full = total_episodes / 2;       // 50% exploration
  const int step = total_episodes / 20;      // 5% per epsilon in 0.9..0.1
  EpsilonSchedule s;
  s.blocks.emplace_back(1.0, full);
  int used = full;
  for (int i = 9; i >= 1; --i) {
    s.blocks.emplace_back(i / 10.0, step);
    used += step;
  }
  s.blocks.emplace_back(0.0, total_episodes - used); // remainder exploits
  return s;
}

int select_action(const std::vector<double>& row, double epsilon,
                  RandomSource& rng) {
  if (row.empty()) raise(ErrorCode::EmptyRow, "empty Q row");
  if (rng.next_double() < epsilon)
    return static_cast<int>(rng.next_index(row.size()));
  int best = 0;
  for (int k = 1; k < static_cast<int>(row.size()); ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

namespace {

// Upper bound on any feasible episode latency; surrogate fallback before the
// first finite episode has been seen.
double latency_upper_bound(const DesignSpace& space) {
  double bound = 0.0;
  for (int l = 0; l < space.layer_count(); ++l) {
    double worst = 0.0;
    for (int k = 0; k < space.impl_count(l); ++k)
      worst = std::max(worst, space.impl(l, k).latency_ms);
    bound += worst;
  }
  for (int e = 0; e < static_cast<int>(space.dependency_edges().size()); ++e) {
    const auto [pd, d] = space.dependency_edges()[e];
    double worst = 0.0;
    for (int a = 0; a < space.impl_count(pd); ++a)
      for (int b = 0; b < space.impl_count(d); ++b)
        if (auto c = space.edge_cost(e, a, b)) worst = std::max(worst, *c);
    bound += worst;
  }
  return bound;
}

struct EpisodeOutcome {
  double latency = 0.0; // finite latency, or the surrogate when forbidden
  bool forbidden = false;
};

// Shared by RL and Random: walks the sampled configuration once, charging
// each layer its latency plus the penalties on its incoming edges. Forbidden
// steps are marked with reward NaN for the caller to patch with the
// surrogate.
EpisodeOutcome score_episode(const DesignSpace& space,
                             const std::vector<int>& idx,
                             std::vector<double>* step_rewards) {
  EpisodeOutcome out;
  for (int l = 0; l < space.layer_count(); ++l) {
    double step = space.impl(l, idx[l]).latency_ms;
    bool step_forbidden = false;
    for (int e : space.incoming_edges()[l]) {
      const int pd = space.dependency_edges()[e].first;
      EdgeCost c = space.edge_cost(e, idx[pd], idx[l]);
      if (!c) {
        step_forbidden = true;
        break;
      }
      step += *c;
    }
    if (step_forbidden) {
      out.forbidden = true;
      if (step_rewards)
        (*step_rewards)[l] = std::numeric_limits<double>::quiet_NaN();
    } else {
      out.latency += step;
      if (step_rewards) (*step_rewards)[l] = -step;
    }
  }
  return out;
}

} // namespace

SearchReport run_rl(const DesignSpace& space, const SearchParams& params) {
  const double t0 = omp_get_wtime();
  const EpsilonSchedule schedule = epsilon_schedule(params.total_episodes);
  const int depth = space.layer_count();

  QTable q(space, params.alpha, params.gamma);
  ReplayBuffer buffer(static_cast<std::size_t>(params.replay_capacity));
  RandomSource rng(params.seed);

  const double fallback = 2.0 * latency_upper_bound(space);
  double worst_finite = -1.0;
  double best_latency = std::numeric_limits<double>::infinity();
  std::vector<int> best_idx;

  std::vector<int> idx(depth);
  std::vector<Transition> transitions(depth);
  std::vector<double> step_rewards(depth);

  SearchReport report;
  report.algorithm = "rl";
  report.seed = params.seed;
  report.learning_curve.reserve(params.total_episodes);

  for (int episode = 0; episode < params.total_episodes; ++episode) {
    const double eps = schedule.at(episode);

    int prev = 0;
    for (int l = 0; l < depth; ++l) {
      const int action = select_action(q.row(l, prev), eps, rng);
      idx[l] = action;
      transitions[l] = Transition{l, prev, action, 0.0, l == depth - 1};
      prev = action;
    }

    const EpisodeOutcome outcome = score_episode(space, idx, &step_rewards);
    double episode_latency;
    if (outcome.forbidden) {
      const double surrogate = worst_finite > 0.0 ? 2.0 * worst_finite : fallback;
      episode_latency = surrogate;
      for (int l = 0; l < depth; ++l)
        step_rewards[l] = std::isnan(step_rewards[l]) ? -surrogate
                                                      : step_rewards[l];
    } else {
      episode_latency = outcome.latency;
      worst_finite = std::max(worst_finite, outcome.latency);
      if (outcome.latency < best_latency) {
        best_latency = outcome.latency;
        best_idx = idx;
      }
    }
    report.learning_curve.push_back(episode_latency);

    for (int l = 0; l < depth; ++l) {
      transitions[l].reward = step_rewards[l];
      q.update(transitions[l]);
      buffer.push(transitions[l]);
    }
    for (int i = 0; i < params.replay_batch && buffer.size() > 0; ++i)
      q.update(buffer.sample(rng));
  }

  if (best_idx.empty())
    raise(ErrorCode::NoFeasiblePath, "every sampled episode was forbidden");

  report.best_config = space.to_configuration(best_idx);
  report.best_latency_ms = space.try_evaluate(best_idx)->latency_ms;
  report.considered_states =
      static_cast<std::uint64_t>(params.total_episodes) * depth;
  report.wall_time_ms = (omp_get_wtime() - t0) * 1e3;
  return report;
}

SearchReport run_random(const DesignSpace& space, int episodes,
                        std::uint64_t seed) {
  const double t0 = omp_get_wtime();
  const int depth = space.layer_count();
  RandomSource rng(seed);

  const double fallback = 2.0 * latency_upper_bound(space);
  double worst_finite = -1.0;
  double best_latency = std::numeric_limits<double>::infinity();
  std::vector<int> best_idx;
  std::vector<int> idx(depth);

  SearchReport report;
  report.algorithm = "random";
  report.seed = seed;
  report.learning_curve.reserve(episodes);

  for (int episode = 0; episode < episodes; ++episode) {
    for (int l = 0; l < depth; ++l)
      idx[l] = static_cast<int>(rng.next_index(space.impl_count(l)));
    const EpisodeOutcome outcome = score_episode(space, idx, nullptr);
    if (outcome.forbidden) {
      report.learning_curve.push_back(worst_finite > 0.0 ? 2.0 * worst_finite
                                                         : fallback);
      continue;
    }
    report.learning_curve.push_back(outcome.latency);
    worst_finite = std::max(worst_finite, outcome.latency);
    if (outcome.latency < best_latency) {
      best_latency = outcome.latency;
      best_idx = idx;
    }
  }

  if (best_idx.empty())
    raise(ErrorCode::NoFeasiblePath, "every sampled episode was forbidden");

  report.best_config = space.to_configuration(best_idx);
  report.best_latency_ms = space.try_evaluate(best_idx)->latency_ms;
  report.considered_states = static_cast<std::uint64_t>(episodes) * depth;
  report.wall_time_ms = (omp_get_wtime() - t0) * 1e3;
  return report;
}

namespace {

void require_chain(const DesignSpace& space, const char* algorithm) {
  if (!space.is_chain())
    raise(ErrorCode::NotAChain,
          std::string(algorithm) + " requires a chain network");
}

} // namespace

SearchReport run_direct(const DesignSpace& space, bool include_penalty) {
  const double t0 = omp_get_wtime();
  require_chain(space, include_penalty ? "ds+" : "ds");
  const int depth = space.layer_count();

  std::vector<int> idx(depth);
  std::uint64_t considered = 0;
  int prev = -1;
  for (int l = 0; l < depth; ++l) {
    const int count = space.impl_count(l);
    considered += static_cast<std::uint64_t>(count);
    int best = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int k = 0; k < count; ++k) {
      double cost = space.impl(l, k).latency_ms;
      if (include_penalty && l > 0) {
        const int edge = space.incoming_edges()[l][0];
        EdgeCost pen = space.edge_cost(edge, prev, k);
        if (!pen) continue; // never step onto a forbidden edge
        cost += *pen;
      }
      if (cost < best_cost) { // strict: ties keep the lowest impl id
        best_cost = cost;
        best = k;
      }
    }
    if (best < 0)
      raise(ErrorCode::NoFeasiblePath,
            "greedy dead end at layer " + space.layer(l).id);
    idx[l] = best;
    prev = best;
  }

  SearchReport report;
  report.algorithm = include_penalty ? "ds+" : "ds";
  report.best_config = space.to_configuration(idx);
  report.best_latency_ms = space.evaluate(report.best_config).latency_ms;
  report.considered_states = considered;
  report.wall_time_ms = (omp_get_wtime() - t0) * 1e3;
  return report;
}

namespace {

// Shared layered-graph shortest path. Vertices are (layer, impl) plus
// virtual START/END; the weight of stepping onto vertex v is v's impl
// latency plus the conversion penalty, the same expression evaluate() uses,
// so path costs compare bit-exactly against enumeration.
//
// `heuristic` is empty for Dijkstra (full sweep: shortest path to every
// vertex) and the per-depth lookahead for A* (stops once END pops).
// considered_states counts relaxations targeting impl vertices -- each one
// evaluates a (layer, impl) state.
SearchReport shortest_path(const DesignSpace& space,
                           const std::vector<double>& heuristic,
                           const char* algorithm) {
  const double t0 = omp_get_wtime();
  const int depth = space.layer_count();
  const bool astar = !heuristic.empty();
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<std::vector<double>> dist(depth);
  std::vector<std::vector<int>> parent(depth);
  std::vector<std::vector<char>> settled(depth);
  for (int l = 0; l < depth; ++l) {
    dist[l].assign(space.impl_count(l), inf);
    parent[l].assign(space.impl_count(l), -1);
    settled[l].assign(space.impl_count(l), 0);
  }
  double end_dist = inf;
  int end_parent = -1;
  bool end_settled = false;

  // Entries are (priority, layer+1, impl); layer -1 is START, depth is END.
  using Entry = std::tuple<double, int, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> open;
  open.emplace(astar ? heuristic[0] : 0.0, 0, 0);
  bool start_settled = false;

  std::uint64_t considered = 0;

  auto h_at = [&](int layer_plus_1) {
    return astar ? heuristic[layer_plus_1] : 0.0;
  };

  while (!open.empty()) {
    const auto [f, lp1, k] = open.top();
    open.pop();

    if (lp1 == depth + 1) { // END
      if (end_settled) continue;
      end_settled = true;
      if (astar) break;
      continue;
    }
    if (lp1 == 0) { // START
      if (start_settled) continue;
      start_settled = true;
      considered += space.impl_count(0);
      for (int j = 0; j < space.impl_count(0); ++j) {
        const double nd = space.impl(0, j).latency_ms;
        if (nd < dist[0][j]) {
          dist[0][j] = nd;
          parent[0][j] = -1;
          open.emplace(nd + h_at(1), 1, j);
        }
      }
      continue;
    }

    const int l = lp1 - 1;
    if (settled[l][k]) continue;
    settled[l][k] = 1;
    const double g = dist[l][k];

    if (l == depth - 1) {
      if (g < end_dist) {
        end_dist = g;
        end_parent = k;
        open.emplace(g, depth + 1, 0);
      }
      continue;
    }

    const int edge = space.incoming_edges()[l + 1][0];
    considered += space.impl_count(l + 1);
    for (int j = 0; j < space.impl_count(l + 1); ++j) {
      EdgeCost pen = space.edge_cost(edge, k, j);
      if (!pen) continue;
      const double w = space.impl(l + 1, j).latency_ms + *pen;
      const double nd = g + w;
      if (nd < dist[l + 1][j]) {
        dist[l + 1][j] = nd;
        parent[l + 1][j] = k;
        open.emplace(nd + h_at(l + 2), l + 2, j);
      }
    }
  }

  if (end_parent < 0)
    raise(ErrorCode::NoFeasiblePath, "all paths are forbidden");

  std::vector<int> idx(depth);
  idx[depth - 1] = end_parent;
  for (int l = depth - 1; l > 0; --l) idx[l - 1] = parent[l][idx[l]];

  SearchReport report;
  report.algorithm = algorithm;
  report.best_config = space.to_configuration(idx);
  report.best_latency_ms = space.try_evaluate(idx)->latency_ms;
  report.considered_states = considered;
  report.wall_time_ms = (omp_get_wtime() - t0) * 1e3;
  return report;
}

} // namespace

SearchReport run_dijkstra(const DesignSpace& space) {
  require_chain(space, "dijkstra");
  return shortest_path(space, {}, "dijkstra");
}

SearchReport run_astar(const DesignSpace& space) {
  require_chain(space, "astar");
  const int depth = space.layer_count();

  // h for a vertex at depth d is the cheapest impl latency two layers ahead;
  // index by layer+1 so START (depth -1) and END slots exist.
  std::vector<double> heuristic(depth + 2, 0.0);
  auto min_latency = [&](int l) {
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < space.impl_count(l); ++k)
      best = std::min(best, space.impl(l, k).latency_ms);
    return best;
  };
  for (int lp1 = 0; lp1 <= depth + 1; ++lp1) {
    const int lookahead = lp1 + 1; // (lp1 - 1) + 2
    heuristic[lp1] = lookahead < depth ? min_latency(lookahead) : 0.0;
  }
  return shortest_path(space, heuristic, "astar");
}

SearchReport run_brute_force(const DesignSpace& space, std::uint64_t cap) {
  const double t0 = omp_get_wtime();
  const auto count = space.config_count(cap);
  if (!count)
    raise(ErrorCode::SpaceTooLarge,
          "space size exceeds brute-force cap of " + std::to_string(cap));
  const std::uint64_t size = *count;
  const int depth = space.layer_count();

  std::vector<std::uint64_t> stride(depth, 1);
  for (int l = depth - 2; l >= 0; --l)
    stride[l] = stride[l + 1] * space.impl_count(l + 1);

  double global_best = std::numeric_limits<double>::infinity();
  std::uint64_t global_index = size; // sentinel: no feasible config

  #pragma omp parallel
  {
    double best = std::numeric_limits<double>::infinity();
    std::uint64_t best_index = size;
    std::vector<int> idx(depth);
    std::uint64_t decoded = size; // forces a full decode first

    #pragma omp for schedule(static)
    for (std::uint64_t i = 0; i < size; ++i) {
      if (i == decoded + 1) { // odometer fast path within a chunk
        for (int l = depth - 1; l >= 0; --l) {
          if (++idx[l] < space.impl_count(l)) break;
          idx[l] = 0;
        }
      } else {
        for (int l = 0; l < depth; ++l)
          idx[l] = static_cast<int>((i / stride[l]) % space.impl_count(l));
      }
      decoded = i;

      if (auto m = space.try_evaluate(idx)) {
        // Lexicographic (latency, index): index order is impl-id order, so
        // ties resolve to the lowest ids.
        if (m->latency_ms < best ||
            (m->latency_ms == best && i < best_index)) {
          best = m->latency_ms;
          best_index = i;
        }
      }
    }

    #pragma omp critical
    {
      if (best < global_best ||
          (best == global_best && best_index < global_index)) {
        global_best = best;
        global_index = best_index;
      }
    }
  }

  if (global_index >= size)
    raise(ErrorCode::NoFeasiblePath, "no feasible configuration exists");

  std::vector<int> idx(depth);
  for (int l = 0; l < depth; ++l)
    idx[l] = static_cast<int>((global_index / stride[l]) % space.impl_count(l));

  SearchReport report;
  report.algorithm = "brute";
  report.best_config = space.to_configuration(idx);
  report.best_latency_ms = space.try_evaluate(idx)->latency_ms;
  report.considered_states = size * static_cast<std::uint64_t>(depth);
  report.wall_time_ms = (omp_get_wtime() - t0) * 1e3;
  return report;
}

} // namespace qsdse
