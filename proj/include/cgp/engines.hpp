#pragma once

// Exact event-driven simulation of the branching primitives: Yule processes,
// continuous-time Galton-Watson processes with bounded offspring, and
// general reinforced branching processes (RBP).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cgp/fitness.hpp"
#include "cgp/malthusian.hpp"
#include "cgp/random.hpp"
#include "cgp/weighted_sampler.hpp"

namespace cgp {

class SizeCapError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class RateUnderflowError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr long long kDefaultSizeCap = 100'000'000;

/// One family (vertex, clan, table). Indices are 1-based in birth order.
struct FamilyRecord {
  long long index = 0;
  double tau = 0.0;
  double fitness = 0.0;
  long long size = 0;
  /// Index of the family whose event founded this one; 0 for founders.
  long long parent = 0;
};

struct PopulationSnapshot {
  double clock = 0.0;
  std::vector<FamilyRecord> families;
  long long total_size = 0;
  long long family_count = 0;
  /// Sum of size * fitness, maintained incrementally by the engine.
  double total_rate = 0.0;

  double recompute_rate() const {
    double r = 0.0;
    for (const auto& f : families) r += static_cast<double>(f.size) * f.fitness;
    return r;
  }
};

/// One RBP birth event: the chosen family gained `same` members and founded
/// `fresh` new families at `time`.
struct BirthEvent {
  long long index = 0;
  double time = 0.0;
  long long family = 0;
  int same = 0;
  int fresh = 0;
};

struct StopRule {
  double t_end = std::numeric_limits<double>::infinity();
  /// Stop as soon as N(t) reaches this value (0 disables).
  long long max_population = 0;
  /// Stop as soon as M(t) reaches this value (0 disables).
  long long max_families = 0;

  bool finite() const { return std::isfinite(t_end) || max_population > 0 || max_families > 0; }
};

namespace detail {

// Inverse-CDF sampling from a short finite table.
template <typename T>
class CumulativeTable {
public:
  CumulativeTable() = default;
  explicit CumulativeTable(std::vector<std::pair<T, double>> items) : items_(std::move(items)) {
    double acc = 0.0;
    for (const auto& it : items_) {
      acc += it.second;
      cum_.push_back(acc);
    }
    if (!cum_.empty()) cum_.back() = std::numeric_limits<double>::infinity();
  }
  // A single atom consumes no randomness.
  const T& sample(Rng& rng) const {
    if (items_.size() == 1) return items_.front().first;
    const double u = uniform01(rng);
    std::size_t i = 0;
    while (cum_[i] <= u) ++i;
    return items_[i].first;
  }

private:
  std::vector<std::pair<T, double>> items_;
  std::vector<double> cum_;
};

inline CumulativeTable<std::pair<int, int>> law_table(const OffspringLaw& law) {
  std::vector<std::pair<std::pair<int, int>, double>> items;
  for (const auto& e : law.entries()) items.push_back({{e.same, e.fresh}, e.p});
  return CumulativeTable<std::pair<int, int>>(std::move(items));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Single-family processes

using SizePath = std::vector<std::pair<double, long long>>;

/// Exact jump path of a Yule process with rate gamma per individual, started
/// from one individual, on [0, t_end]. The last entry is (t_end, Y(t_end)).
inline SizePath simulate_yule(double gamma, double t_end, Rng& rng,
                              long long size_cap = kDefaultSizeCap) {
  if (!(gamma > 0.0) || !(t_end > 0.0)) throw DomainError("simulate_yule: gamma, t_end must be positive");
  SizePath path{{0.0, 1}};
  double t = 0.0;
  long long k = 1;
  for (;;) {
    t += exp1(rng) / (gamma * static_cast<double>(k));
    if (t > t_end) break;
    if (++k > size_cap) throw SizeCapError("simulate_yule: size cap exceeded");
    path.emplace_back(t, k);
  }
  path.emplace_back(t_end, k);
  return path;
}

/// Y(t_end) of the same process without storing the path; consumes the
/// random stream exactly as simulate_yule does.
inline long long yule_size_at(double gamma, double t_end, Rng& rng,
                              long long size_cap = kDefaultSizeCap) {
  double t = 0.0;
  long long k = 1;
  for (;;) {
    t += exp1(rng) / (gamma * static_cast<double>(k));
    if (t > t_end) return k;
    if (++k > size_cap) throw SizeCapError("yule_size_at: size cap exceeded");
  }
}

/// Continuous-time Galton-Watson process with an immortal founder: in state
/// k the next event comes at rate k * rate and adds J ~ `increments` (J may
/// be 0). Exact jump path on [0, t_end], including zero-size jumps.
inline SizePath simulate_ct_gw(const std::vector<std::pair<int, double>>& increments, double rate,
                               double t_end, Rng& rng, long long size_cap = kDefaultSizeCap) {
  if (!(rate > 0.0)) throw DomainError("simulate_ct_gw: rate must be positive");
  double total = 0.0;
  for (const auto& [j, p] : increments) {
    if (j < 0 || p < 0.0) throw DomainError("simulate_ct_gw: invalid increment law");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("simulate_ct_gw: increments must sum to 1");
  detail::CumulativeTable<int> table(increments);
  const bool frozen = increments.size() == 1 && increments.front().first == 0;
  SizePath path{{0.0, 1}};
  if (frozen) {
    path.emplace_back(t_end, 1);
    return path;
  }
  double t = 0.0;
  long long k = 1;
  for (;;) {
    t += exp1(rng) / (rate * static_cast<double>(k));
    if (t > t_end) break;
    k += table.sample(rng);
    if (k > size_cap) throw SizeCapError("simulate_ct_gw: size cap exceeded");
    path.emplace_back(t, k);
  }
  path.emplace_back(t_end, k);
  return path;
}

// ---------------------------------------------------------------------------
// Reinforced branching process, Gillespie scheme

/// Gillespie simulation of the RBP: total rate R = sum Z_n F_n, next event
/// after Exp(R), family n chosen with probability Z_n F_n / R through a
/// Fenwick tree, then (i, j) ~ p_ij adds i members and founds j families.
class RbpGillespie {
public:
  RbpGillespie(FitnessModel model, const OffspringLaw& law, Rng& rng, bool log_events = true)
      : model_(std::move(model)), table_(detail::law_table(law)), rng_(rng), log_events_(log_events) {}

  /// Adds a family alive from `tau` with the given fitness and size.
  void add_family(double tau, double fitness, long long size = 1, long long parent = 0) {
    FamilyRecord f;
    f.index = static_cast<long long>(snap_.families.size()) + 1;
    f.tau = tau;
    f.fitness = fitness;
    f.size = size;
    f.parent = parent;
    snap_.families.push_back(f);
    sampler_.push_back(static_cast<double>(size) * fitness);
    snap_.total_size += size;
    snap_.family_count += 1;
  }

  /// Default initial condition: one family of size 1 born at time 0.
  void seed() { add_family(0.0, sample_fitness(model_, rng_)); }

  /// Performs one event unless it would happen after t_end; returns false
  /// (and advances the clock to t_end) in that case.
  bool step(double t_end = std::numeric_limits<double>::infinity()) {
    const double rate = sampler_.total();
    if (!(rate > 0.0)) throw RateUnderflowError("rbp: total rate is zero");
    const double t = snap_.clock + exp1(rng_) / rate;
    if (t > t_end) {
      snap_.clock = t_end;
      return false;
    }
    snap_.clock = t;
    const std::size_t n = sampler_.find(uniform01(rng_) * rate);
    const auto [same, fresh] = table_.sample(rng_);
    auto& fam = snap_.families[n];
    if (same > 0) {
      fam.size += same;
      snap_.total_size += same;
      sampler_.add(n, static_cast<double>(same) * fam.fitness);
    }
    const long long parent = fam.index;
    for (int j = 0; j < fresh; ++j) add_family(t, sample_fitness(model_, rng_), 1, parent);
    ++n_events_;
    if (log_events_) events_.push_back({n_events_, t, parent, same, fresh});
    return true;
  }

  void run(const StopRule& stop) {
    if (!stop.finite()) throw DomainError("rbp: stop rule must be finite");
    if (snap_.families.empty()) seed();
    for (;;) {
      if (stop.max_population > 0 && snap_.total_size >= stop.max_population) break;
      if (stop.max_families > 0 && snap_.family_count >= stop.max_families) break;
      if (!step(stop.t_end)) break;
    }
  }

  const PopulationSnapshot& snapshot() {
    snap_.total_rate = sampler_.total();
    return snap_;
  }
  const std::vector<BirthEvent>& events() const { return events_; }
  long long event_count() const { return n_events_; }
  const WeightedSampler& sampler() const { return sampler_; }

private:
  FitnessModel model_;
  detail::CumulativeTable<std::pair<int, int>> table_;
  Rng& rng_;
  bool log_events_;
  WeightedSampler sampler_;
  PopulationSnapshot snap_;
  std::vector<BirthEvent> events_;
  long long n_events_ = 0;
};

struct RbpResult {
  PopulationSnapshot snapshot;
  std::vector<BirthEvent> events;
};

/// Exact RBP sample from one founder at time 0 until the stop rule fires.
inline RbpResult simulate_rbp(const FitnessModel& model, const OffspringLaw& law,
                              const StopRule& stop, Rng& rng, bool log_events = true) {
  RbpGillespie engine(model, law, rng, log_events);
  engine.seed();
  engine.run(stop);
  return {engine.snapshot(), engine.events()};
}

/// Exact RBP sample at time t_end built family by family from the
/// construction Z_n(t) = Y_n(F_n (t - tau_n)): each family's growth path is
/// simulated on its own, and every founding event it emits becomes a new
/// family. Same law as simulate_rbp at a fixed time, O(1) work per event.
/// Throws SizeCapError once N(t_end) would exceed `population_cap`.
inline PopulationSnapshot simulate_rbp_branching(const FitnessModel& model, const OffspringLaw& law,
                                                 double t_end, Rng& rng,
                                                 long long population_cap = kDefaultSizeCap) {
  if (!(t_end >= 0.0)) throw DomainError("rbp: t_end must be non-negative");
  const auto table = detail::law_table(law);
  struct Pending {
    double tau;
    double fitness;
    long long parent_seq;
  };
  std::vector<Pending> stack{{0.0, sample_fitness(model, rng), 0}};
  struct Done {
    double tau;
    double fitness;
    long long size;
    long long parent_seq;
    long long seq;
  };
  std::vector<Done> done;
  long long total = 0;
  long long seq = 0;
  while (!stack.empty()) {
    const Pending p = stack.back();
    stack.pop_back();
    const long long my_seq = ++seq;
    long long k = 1;
    double t = p.tau;
    if (++total > population_cap) throw SizeCapError("rbp: population cap exceeded");
    for (;;) {
      t += exp1(rng) / (p.fitness * static_cast<double>(k));
      if (t > t_end) break;
      const auto [same, fresh] = table.sample(rng);
      k += same;
      total += same;
      if (total > population_cap) throw SizeCapError("rbp: population cap exceeded");
      for (int j = 0; j < fresh; ++j) stack.push_back({t, sample_fitness(model, rng), my_seq});
    }
    done.push_back({p.tau, p.fitness, k, p.parent_seq, my_seq});
  }
  std::stable_sort(done.begin(), done.end(), [](const Done& a, const Done& b) {
    if (a.tau != b.tau) return a.tau < b.tau;
    return a.seq < b.seq;
  });
  std::vector<long long> index_of(done.size() + 1, 0);
  for (std::size_t i = 0; i < done.size(); ++i) index_of[static_cast<std::size_t>(done[i].seq)] = static_cast<long long>(i) + 1;
  PopulationSnapshot snap;
  snap.clock = t_end;
  snap.families.reserve(done.size());
  for (std::size_t i = 0; i < done.size(); ++i) {
    const auto& d = done[i];
    FamilyRecord f;
    f.index = static_cast<long long>(i) + 1;
    f.tau = d.tau;
    f.fitness = d.fitness;
    f.size = d.size;
    f.parent = d.parent_seq == 0 ? 0 : index_of[static_cast<std::size_t>(d.parent_seq)];
    snap.total_size += d.size;
    snap.families.push_back(f);
  }
  snap.family_count = static_cast<long long>(snap.families.size());
  snap.total_rate = snap.recompute_rate();
  return snap;
}

enum class RbpEngine { Gillespie, Branching };

/// Selection-mutation population: each individual with fitness f gives birth
/// at rate f to k ~ (p_k) children, each independently a mutant (founder of a
/// new family with fresh fitness) with probability beta. Simulated as the RBP
/// with the binomially thinned law.
inline RbpResult simulate_selection_mutation(const FitnessModel& model, double beta,
                                             const std::vector<std::pair<int, double>>& offspring,
                                             const StopRule& stop, Rng& rng,
                                             RbpEngine engine = RbpEngine::Gillespie,
                                             bool log_events = true) {
  if (!(beta > 0.0 && beta <= 1.0)) throw DomainError("selection-mutation: beta outside (0, 1]");
  const auto law = OffspringLaw::thinned(offspring, beta);
  if (engine == RbpEngine::Branching) {
    if (!std::isfinite(stop.t_end)) throw DomainError("branching engine needs a finite t_end");
    const long long cap = stop.max_population > 0 ? stop.max_population : kDefaultSizeCap;
    return {simulate_rbp_branching(model, law, stop.t_end, rng, cap), {}};
  }
  return simulate_rbp(model, law, stop, rng, log_events);
}

/// Estimate of the offset T in tau_n = (1/lambda) log n + T + eps_n: the
/// median of tau_n - (1/lambda) log n over the later half of the families.
inline double estimate_T(const std::vector<FamilyRecord>& families, double lambda) {
  const std::size_t m = families.size();
  if (m == 0) return 0.0;
  const std::size_t start = m / 2;
  std::vector<double> d;
  d.reserve(m - start);
  for (std::size_t i = start; i < m; ++i)
    d.push_back(families[i].tau - std::log(static_cast<double>(families[i].index)) / lambda);
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double med = d[mid];
  if (d.size() % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    med = 0.5 * (med + lower);
  }
  return med;
}

// ---------------------------------------------------------------------------
// CSV export

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_event_log_csv(std::ostream& os, const std::vector<BirthEvent>& events) {
  os << "event_index,time,family_index,delta_same_family,new_families\n";
  for (const auto& e : events)
    os << e.index << ',' << fmt_double(e.time) << ',' << e.family << ',' << e.same << ','
       << e.fresh << '\n';
}

inline void write_snapshot_csv(std::ostream& os, const PopulationSnapshot& snap) {
  os << "family_index,tau,fitness,size\n";
  for (const auto& f : snap.families)
    os << f.index << ',' << fmt_double(f.tau) << ',' << fmt_double(f.fitness) << ',' << f.size
       << '\n';
}

}  // namespace cgp
