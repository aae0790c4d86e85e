#pragma once

// Applied models built on the growth primitives: the Bianconi-Barabasi tree,
// Dereich's preferential attachment multigraph and the disordered Chinese
// restaurant process.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <utility>
#include <vector>

#include "cgp/engines.hpp"
#include "cgp/fitness.hpp"
#include "cgp/malthusian.hpp"
#include "cgp/numerics.hpp"
#include "cgp/random.hpp"
#include "cgp/weighted_sampler.hpp"

namespace cgp {

struct Edge {
  long long from = 0;
  long long to = 0;
  long long multiplicity = 1;
};

/// Vertices as families: `size` is the degree (tree) or indegree (Dereich).
/// `tau` holds continuous birth times when the model is embedded, otherwise
/// the arrival step.
struct NetworkState {
  std::vector<FamilyRecord> vertices;
  long long step = 0;
  long long edge_count = 0;
  std::vector<Edge> edges;
  bool embedded = false;

  long long degree_sum() const {
    long long s = 0;
    for (const auto& v : vertices) s += v.size;
    return s;
  }
};

// ---------------------------------------------------------------------------
// Bianconi-Barabasi tree

/// Discrete BB tree: vertex k+1 attaches to an existing vertex chosen with
/// probability proportional to fitness times degree.
class BbTree {
public:
  BbTree(FitnessModel model, Rng& rng) : model_(std::move(model)) {
    for (int i = 0; i < 2; ++i) push_vertex(sample_fitness(model_, rng), 0);
    state_.vertices[1].parent = 1;
    state_.vertices[0].size = 1;
    state_.vertices[1].size = 1;
    sampler_.set(0, state_.vertices[0].fitness);
    sampler_.set(1, state_.vertices[1].fitness);
    state_.edges.push_back({2, 1, 1});
    state_.edge_count = 1;
    state_.step = 2;
  }

  /// Attachment target (0-based) from the current state; the state is not changed.
  std::size_t choose_target(Rng& rng) const { return sampler_.find(uniform01(rng) * sampler_.total()); }

  void add_vertex(Rng& rng) {
    const std::size_t j = choose_target(rng);
    const double f = sample_fitness(model_, rng);
    auto& target = state_.vertices[j];
    target.size += 1;
    sampler_.add(j, target.fitness);
    const long long parent = target.index;
    push_vertex(f, parent);
    state_.vertices.back().size = 1;
    sampler_.set(state_.vertices.size() - 1, f);
    ++state_.step;
    ++state_.edge_count;
    state_.edges.push_back({state_.vertices.back().index, parent, 1});
  }

  const NetworkState& state() const { return state_; }
  const WeightedSampler& sampler() const { return sampler_; }

private:
  void push_vertex(double fitness, long long parent) {
    FamilyRecord v;
    v.index = static_cast<long long>(state_.vertices.size()) + 1;
    v.tau = static_cast<double>(v.index);
    v.fitness = fitness;
    v.size = 0;
    v.parent = parent;
    state_.vertices.push_back(v);
    sampler_.push_back(0.0);
  }

  FitnessModel model_;
  NetworkState state_;
  WeightedSampler sampler_;
};

/// BB tree on n_vertices. With embed = true the tree is read off the RBP
/// with p_11 = 1 started from two connected vertices at time 0, so `tau`
/// carries the exact continuous birth epochs.
inline NetworkState simulate_bb_tree(const FitnessModel& model, long long n_vertices, Rng& rng,
                                     bool embed = false) {
  if (n_vertices < 2) throw DomainError("bb tree: n_vertices must be at least 2");
  if (!embed) {
    BbTree tree(model, rng);
    while (static_cast<long long>(tree.state().vertices.size()) < n_vertices) tree.add_vertex(rng);
    return tree.state();
  }
  RbpGillespie engine(model, OffspringLaw::one_one(), rng, false);
  const double f1 = sample_fitness(model, rng);
  const double f2 = sample_fitness(model, rng);
  engine.add_family(0.0, f1, 1, 0);
  engine.add_family(0.0, f2, 1, 1);
  engine.run(StopRule{std::numeric_limits<double>::infinity(), 0, n_vertices});
  const auto& snap = engine.snapshot();
  NetworkState out;
  out.embedded = true;
  out.vertices = snap.families;
  out.step = snap.family_count;
  for (const auto& v : out.vertices)
    if (v.parent > 0) out.edges.push_back({v.index, v.parent, 1});
  out.edge_count = static_cast<long long>(out.edges.size());
  return out;
}

// ---------------------------------------------------------------------------
// Dereich's network

enum class DereichScheme { TotalThenSplit, PerVertex };

/// Preferential attachment multigraph. In step m the new vertex m+1 sends
/// Poisson(beta F_k (1 + indeg_k) / m) edges to each vertex k <= m, all
/// counts drawn from the state before the step.
class DereichNetwork {
public:
  DereichNetwork(FitnessModel model, double beta, Rng& rng) : model_(std::move(model)), beta_(beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("dereich: beta must lie in (0, 1)");
    push_vertex(sample_fitness(model_, rng));
    state_.step = 0;
  }

  /// Builds a network directly from given fitnesses and indegrees (for
  /// frozen-state experiments); `step` is the current m.
  DereichNetwork(FitnessModel model, double beta, const std::vector<double>& fitness,
                 const std::vector<long long>& indegree)
      : model_(std::move(model)), beta_(beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("dereich: beta must lie in (0, 1)");
    if (fitness.size() != indegree.size() || fitness.empty())
      throw DomainError("dereich: fitness and indegree sizes differ");
    for (std::size_t i = 0; i < fitness.size(); ++i) {
      push_vertex(fitness[i]);
      state_.vertices[i].size = indegree[i];
      sampler_.set(i, fitness[i] * (1.0 + static_cast<double>(indegree[i])));
      state_.edge_count += indegree[i];
    }
    state_.step = static_cast<long long>(fitness.size()) - 1;
  }

  double beta() const { return beta_; }
  long long m() const { return static_cast<long long>(state_.vertices.size()); }

  /// Edge counts from the next vertex to every existing vertex, without
  /// changing the state.
  std::vector<long long> step_counts(Rng& rng, DereichScheme scheme = DereichScheme::TotalThenSplit) const {
    std::vector<long long> counts(state_.vertices.size(), 0);
    for (const auto& [k, c] : sparse_counts(rng, scheme)) counts[k] = c;
    return counts;
  }

  /// Adds vertex m+1 together with its outgoing edges.
  void advance(Rng& rng, DereichScheme scheme = DereichScheme::TotalThenSplit) {
    const long long from = m() + 1;
    for (const auto& [k, c] : sparse_counts(rng, scheme)) {
      auto& v = state_.vertices[k];
      v.size += c;
      sampler_.set(k, v.fitness * (1.0 + static_cast<double>(v.size)));
      state_.edge_count += c;
      state_.edges.push_back({from, v.index, c});
    }
    push_vertex(sample_fitness(model_, rng));
    ++state_.step;
  }

  const NetworkState& state() const { return state_; }

private:
  // Non-zero (target, count) pairs for the next step, ascending in target.
  std::vector<std::pair<std::size_t, long long>> sparse_counts(Rng& rng, DereichScheme scheme) const {
    const std::size_t n = state_.vertices.size();
    const double m = static_cast<double>(n);
    std::vector<std::pair<std::size_t, long long>> out;
    if (scheme == DereichScheme::PerVertex) {
      for (std::size_t k = 0; k < n; ++k) {
        const long long c = poisson(rng, beta_ * sampler_.weight(k) / m);
        if (c > 0) out.emplace_back(k, c);
      }
      return out;
    }
    const long long total = poisson(rng, beta_ * sampler_.total() / m);
    std::vector<std::size_t> targets;
    targets.reserve(static_cast<std::size_t>(total));
    for (long long e = 0; e < total; ++e) targets.push_back(sampler_.find(uniform01(rng) * sampler_.total()));
    std::sort(targets.begin(), targets.end());
    for (std::size_t k : targets) {
      if (!out.empty() && out.back().first == k)
        ++out.back().second;
      else
        out.emplace_back(k, 1);
    }
    return out;
  }

  void push_vertex(double fitness) {
    FamilyRecord v;
    v.index = static_cast<long long>(state_.vertices.size()) + 1;
    v.tau = static_cast<double>(v.index);
    v.fitness = fitness;
    v.size = 0;
    state_.vertices.push_back(v);
    sampler_.push_back(fitness);
  }

  FitnessModel model_;
  double beta_;
  NetworkState state_;
  WeightedSampler sampler_;
};

/// Deterministic embedding tau_n = (1/lambda) sum_{i<n} 1/i, n >= 1.
inline double dereich_embedding_time(long long n, double lambda) {
  if (n < 1) throw DomainError("dereich embedding: n must be positive");
  return num::harmonic(n - 1) / lambda;
}

/// Dereich network on n_vertices; tau is replaced by the deterministic
/// embedding times when lambda > 0.
inline NetworkState simulate_dereich(const FitnessModel& model, double beta, long long n_vertices,
                                     Rng& rng, DereichScheme scheme = DereichScheme::TotalThenSplit,
                                     double lambda = 0.0) {
  if (n_vertices < 1) throw DomainError("dereich: n_vertices must be positive");
  DereichNetwork net(model, beta, rng);
  while (net.m() < n_vertices) net.advance(rng, scheme);
  NetworkState out = net.state();
  if (lambda > 0.0) {
    out.embedded = true;
    double h = 0.0;
    for (auto& v : out.vertices) {
      v.tau = h / lambda;
      h += 1.0 / static_cast<double>(v.index);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Disordered Chinese restaurant process

struct CrpOptions {
  /// Replace every table weight by 1 (classical CRP); test hook only.
  bool unit_weights = false;
  /// Record continuous arrival clocks T_{n+1} = T_n + Exp(n + theta).
  bool embed = false;
};

struct CrpState {
  /// One record per table: fitness = weight W_j, size = occupancy Z_j,
  /// tau = opening clock (NaN unless embedded).
  std::vector<FamilyRecord> tables;
  long long customers = 0;
  double clock = 0.0;
  double theta = 0.0;
  bool embedded = false;
};

/// Customer n+1 joins table j with probability Z_j W_j / (n + theta) and
/// otherwise opens a new table with a weight drawn from mu.
inline CrpState simulate_crp(const FitnessModel& model, double theta, long long n_customers, Rng& rng,
                             const CrpOptions& opt = {}) {
  if (!(theta >= 0.0)) throw DomainError("crp: theta must be non-negative");
  if (n_customers < 1) throw DomainError("crp: n_customers must be positive");
  if (opt.unit_weights && !(theta > 0.0)) throw DomainError("crp: unit weights need theta > 0");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CrpState st;
  st.theta = theta;
  st.embedded = opt.embed;
  WeightedSampler sampler;
  auto open_table = [&](double clock) {
    const double w = opt.unit_weights ? 1.0 : sample_fitness(model, rng);
    FamilyRecord t;
    t.index = static_cast<long long>(st.tables.size()) + 1;
    t.tau = opt.embed ? clock : nan;
    t.fitness = w;
    t.size = 1;
    st.tables.push_back(t);
    sampler.push_back(w);
  };
  open_table(0.0);
  st.customers = 1;
  while (st.customers < n_customers) {
    const double n = static_cast<double>(st.customers);
    if (opt.embed) st.clock += exponential(rng, n + theta);
    const double u = uniform01(rng) * (n + theta);
    if (u < sampler.total()) {
      const std::size_t j = sampler.find(u);
      st.tables[j].size += 1;
      sampler.add(j, st.tables[j].fitness);
    } else {
      open_table(st.clock);
    }
    ++st.customers;
  }
  return st;
}

// ---------------------------------------------------------------------------
// CSV export

inline void write_edges_csv(std::ostream& os, const NetworkState& net) {
  os << "from,to,multiplicity\n";
  for (const auto& e : net.edges) os << e.from << ',' << e.to << ',' << e.multiplicity << '\n';
}

inline void write_tables_csv(std::ostream& os, const CrpState& crp) {
  os << "table_index,weight,size,tau_if_embedded\n";
  for (const auto& t : crp.tables) {
    os << t.index << ',' << fmt_double(t.fitness) << ',' << t.size << ',';
    if (crp.embedded) os << fmt_double(t.tau);
    os << '\n';
  }
}

}  // namespace cgp
