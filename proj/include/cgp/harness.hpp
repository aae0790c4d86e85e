#pragma once

// Experiment configuration, replicate orchestration and on-disk outputs.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "cgp/engines.hpp"
#include "cgp/extremal.hpp"
#include "cgp/fitness.hpp"
#include "cgp/malthusian.hpp"
#include "cgp/models.hpp"
#include "cgp/random.hpp"
#include "cgp/scaling.hpp"
#include "json.hpp"

namespace cgp {

/// Invalid configuration; `field` names the offending entry.
class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string field, const std::string& msg)
      : std::runtime_error(field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

private:
  std::string field_;
};

/// Stop rule of the RBP models when the config gives none.
inline constexpr long long kDefaultPopulationStop = 10'000'000;

enum class ModelKind { Toy, Rbp, SelectionMutation, BbTree, Dereich, Crp };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Toy: return "toy";
    case ModelKind::Rbp: return "rbp";
    case ModelKind::SelectionMutation: return "selection_mutation";
    case ModelKind::BbTree: return "bb_tree";
    case ModelKind::Dereich: return "dereich";
    case ModelKind::Crp: return "crp";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  for (auto k : {ModelKind::Toy, ModelKind::Rbp, ModelKind::SelectionMutation, ModelKind::BbTree,
                 ModelKind::Dereich, ModelKind::Crp})
    if (s == to_string(k)) return k;
  throw ConfigError("model", "unknown model '" + s + "'");
}

struct ExperimentConfig {
  ModelKind model = ModelKind::Crp;
  std::string fitness_id = "weibull_alpha";
  std::map<std::string, double> fitness_params;

  // dynamics
  double beta = 0.6;
  double theta = 1.0;
  /// Growth rate of the toy model and of Dereich's embedding.
  double lambda = 1.0;
  double truncation = 3.0;
  /// Offspring-number law (k, p_k) of the selection-mutation model.
  std::vector<std::pair<int, double>> offspring{{1, 1.0}};
  /// Joint law p_ij of the general RBP.
  std::vector<OffspringLaw::Entry> law{{1, 1, 1.0}};
  RbpEngine engine = RbpEngine::Gillespie;
  bool embed = true;
  bool log_events = false;

  // stop
  double t_end = 0.0;
  long long max_population = 0;
  long long max_families = 0;
  long long n_vertices = 0;
  long long n_customers = 0;

  long long replicates = 1;
  std::uint64_t seed = 1;
  /// 0 selects the available hardware parallelism.
  unsigned threads = 0;

  std::string output_dir;
  bool point_cloud = false;
  bool details = false;

  bool validate = false;
  double ks_threshold = 0.05;
  double ratio_tolerance = 0.05;
};

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path.empty() ? std::string(key) : path + "." + key, "wrong type");
  }
}

inline void check_keys(const nlohmann::json& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
  }
}

}  // namespace detail

/// Field-level validation of a config; throws ConfigError.
inline void validate_config(const ExperimentConfig& c) {
  if (c.replicates < 1) throw ConfigError("replicates", "must be at least 1");
  const auto& ids = catalog::ids();
  if (std::find(ids.begin(), ids.end(), c.fitness_id) == ids.end())
    throw ConfigError("fitness.id", "unknown fitness model '" + c.fitness_id + "'");
  try {
    (void)catalog::make(c.fitness_id, c.fitness_params);
  } catch (const std::exception& e) {
    throw ConfigError("fitness.params", e.what());
  }
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  switch (c.model) {
    case ModelKind::Toy:
      if (c.fitness_id != "weibull_alpha") throw ConfigError("fitness.id", "toy model needs weibull_alpha");
      if (!positive(c.t_end)) throw ConfigError("stop.t_end", "must be positive");
      if (!positive(c.lambda)) throw ConfigError("dynamics.lambda", "must be positive");
      if (!(c.truncation >= 3.0)) throw ConfigError("dynamics.truncation", "must be at least 3");
      break;
    case ModelKind::Rbp:
    case ModelKind::SelectionMutation:
      if (c.model == ModelKind::SelectionMutation && !(c.beta > 0.0 && c.beta <= 1.0))
        throw ConfigError("dynamics.beta", "must lie in (0, 1]");
      if (!positive(c.t_end) && c.max_population <= 0 && c.max_families <= 0)
        throw ConfigError("stop", "needs t_end, max_population or max_families");
      if (c.t_end < 0.0) throw ConfigError("stop.t_end", "must be positive");
      if (c.engine == RbpEngine::Branching && !positive(c.t_end))
        throw ConfigError("stop.t_end", "the branching engine needs a finite t_end");
      try {
        if (c.model == ModelKind::Rbp)
          (void)OffspringLaw(c.law);
        else
          (void)OffspringLaw::thinned(c.offspring, c.beta);
      } catch (const std::exception& e) {
        throw ConfigError(c.model == ModelKind::Rbp ? "dynamics.law" : "dynamics.offspring", e.what());
      }
      break;
    case ModelKind::BbTree:
      if (c.n_vertices < 2) throw ConfigError("stop.n_vertices", "must be at least 2");
      break;
    case ModelKind::Dereich:
      if (!(c.beta > 0.0 && c.beta < 1.0)) throw ConfigError("dynamics.beta", "must lie in (0, 1)");
      if (!positive(c.lambda)) throw ConfigError("dynamics.lambda", "must be positive");
      if (c.n_vertices < 2) throw ConfigError("stop.n_vertices", "must be at least 2");
      break;
    case ModelKind::Crp:
      if (!(c.theta >= 0.0)) throw ConfigError("dynamics.theta", "must be non-negative");
      if (c.n_customers < 1) throw ConfigError("stop.n_customers", "must be positive");
      break;
  }
  if (c.validate && c.replicates < 100)
    throw ConfigError("validate.enabled", "limit-law validation needs at least 100 replicates");
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::check_keys;
  using detail::get_or;
  check_keys(j, "", {"model", "fitness", "dynamics", "stop", "replicates", "seed", "threads", "outputs", "validate"});
  ExperimentConfig c;
  if (!j.contains("model")) throw ConfigError("model", "missing");
  c.model = parse_model_kind(get_or<std::string>(j, "model", "", ""));
  if (j.contains("fitness")) {
    const auto& f = j.at("fitness");
    check_keys(f, "fitness", {"id", "params"});
    c.fitness_id = get_or<std::string>(f, "id", c.fitness_id, "fitness");
    if (f.contains("params")) {
      check_keys(f.at("params"), "fitness.params", {"rho", "alpha"});
      c.fitness_params = get_or<std::map<std::string, double>>(f, "params", {}, "fitness");
    }
  }
  if (j.contains("dynamics")) {
    const auto& d = j.at("dynamics");
    check_keys(d, "dynamics", {"beta", "theta", "lambda", "truncation", "offspring", "law", "engine", "embed", "log_events"});
    c.beta = get_or(d, "beta", c.beta, "dynamics");
    c.theta = get_or(d, "theta", c.theta, "dynamics");
    c.lambda = get_or(d, "lambda", c.lambda, "dynamics");
    c.truncation = get_or(d, "truncation", c.truncation, "dynamics");
    c.embed = get_or(d, "embed", c.model != ModelKind::Crp, "dynamics");
    c.log_events = get_or(d, "log_events", c.log_events, "dynamics");
    if (d.contains("offspring")) {
      c.offspring.clear();
      for (const auto& row : d.at("offspring")) {
        if (!row.is_array() || row.size() != 2) throw ConfigError("dynamics.offspring", "rows must be [k, p_k]");
        c.offspring.emplace_back(row[0].get<int>(), row[1].get<double>());
      }
    }
    if (d.contains("law")) {
      c.law.clear();
      for (const auto& row : d.at("law")) {
        if (!row.is_array() || row.size() != 3) throw ConfigError("dynamics.law", "rows must be [i, j, p_ij]");
        c.law.push_back({row[0].get<int>(), row[1].get<int>(), row[2].get<double>()});
      }
    }
    const auto eng = get_or<std::string>(d, "engine", "gillespie", "dynamics");
    if (eng == "gillespie")
      c.engine = RbpEngine::Gillespie;
    else if (eng == "branching")
      c.engine = RbpEngine::Branching;
    else
      throw ConfigError("dynamics.engine", "must be 'gillespie' or 'branching'");
  }
  if (j.contains("stop")) {
    const auto& s = j.at("stop");
    check_keys(s, "stop", {"t_end", "max_population", "max_families", "n_vertices", "n_customers"});
    c.t_end = get_or(s, "t_end", c.t_end, "stop");
    c.max_population = get_or(s, "max_population", c.max_population, "stop");
    c.max_families = get_or(s, "max_families", c.max_families, "stop");
    c.n_vertices = get_or(s, "n_vertices", c.n_vertices, "stop");
    c.n_customers = get_or(s, "n_customers", c.n_customers, "stop");
  }
  c.replicates = get_or(j, "replicates", c.replicates, "");
  c.seed = get_or(j, "seed", c.seed, "");
  c.threads = get_or(j, "threads", c.threads, "");
  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    check_keys(o, "outputs", {"dir", "point_cloud", "details"});
    c.output_dir = get_or(o, "dir", c.output_dir, "outputs");
    c.point_cloud = get_or(o, "point_cloud", c.point_cloud, "outputs");
    c.details = get_or(o, "details", c.details, "outputs");
  }
  if (j.contains("validate")) {
    const auto& v = j.at("validate");
    check_keys(v, "validate", {"enabled", "ks_threshold", "ratio_tolerance"});
    c.validate = get_or(v, "enabled", c.validate, "validate");
    c.ks_threshold = get_or(v, "ks_threshold", c.ks_threshold, "validate");
    c.ratio_tolerance = get_or(v, "ratio_tolerance", c.ratio_tolerance, "validate");
  }
  if (!j.contains("dynamics")) c.embed = c.model != ModelKind::Crp;
  if ((c.model == ModelKind::Rbp || c.model == ModelKind::SelectionMutation) && !(c.t_end > 0.0) &&
      c.max_population <= 0 && c.max_families <= 0)
    c.max_population = kDefaultPopulationStop;
  if (c.fitness_params.empty()) c.fitness_params = catalog::default_params(c.fitness_id);
  return c;
}

/// Fully resolved config, all defaults materialized.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json offspring = nlohmann::json::array();
  for (const auto& [k, p] : c.offspring) offspring.push_back({k, p});
  nlohmann::json law = nlohmann::json::array();
  for (const auto& e : c.law) law.push_back({e.same, e.fresh, e.p});
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : c.fitness_params) params[k] = v;
  return {
      {"model", to_string(c.model)},
      {"fitness", {{"id", c.fitness_id}, {"params", params}}},
      {"dynamics",
       {{"beta", c.beta},
        {"theta", c.theta},
        {"lambda", c.lambda},
        {"truncation", c.truncation},
        {"offspring", offspring},
        {"law", law},
        {"engine", c.engine == RbpEngine::Gillespie ? "gillespie" : "branching"},
        {"embed", c.embed},
        {"log_events", c.log_events}}},
      {"stop",
       {{"t_end", c.t_end},
        {"max_population", c.max_population},
        {"max_families", c.max_families},
        {"n_vertices", c.n_vertices},
        {"n_customers", c.n_customers}}},
      {"replicates", c.replicates},
      {"seed", c.seed},
      {"threads", c.threads},
      {"outputs", {{"dir", c.output_dir}, {"point_cloud", c.point_cloud}, {"details", c.details}}},
      {"validate",
       {{"enabled", c.validate}, {"ks_threshold", c.ks_threshold}, {"ratio_tolerance", c.ratio_tolerance}}},
  };
}

/// Seed from EXTREMAL_SEED when no explicit seed was given.
inline std::optional<std::uint64_t> seed_from_env() {
  const char* s = std::getenv("EXTREMAL_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos, 0);
    if (pos != std::string(s).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("EXTREMAL_SEED", "not an unsigned integer");
  }
}

// ---------------------------------------------------------------------------
// Worker pool

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs f(k) for k in [0, n) on `threads` workers and returns the results in
/// index order. The first exception (by index) is rethrown.
template <typename R, typename F>
std::vector<R> parallel_replicates(long long n, unsigned threads, F&& f) {
  std::vector<R> out(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<long long> next{0};
  auto worker = [&] {
    for (;;) {
      const long long k = next.fetch_add(1);
      if (k >= n) return;
      try {
        out[static_cast<std::size_t>(k)] = f(k);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
  };
  const unsigned nt = static_cast<unsigned>(std::min<long long>(std::max(1u, threads), std::max(1LL, n)));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Experiment

struct ReplicateOutput {
  ReplicateSummary summary;
  double t_or_n = 0.0;
  /// Per-replicate detail files: name -> CSV text.
  std::map<std::string, std::string> details;
  std::vector<RescaledPoint> cloud;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ReplicateOutput> replicates;
  std::optional<LimitsReport> limits;
  nlohmann::json summary;
  /// Scaling bundle at the common observation time, when there is one.
  std::optional<ScalingBundle> bundle;

  bool pass() const { return !limits || limits->pass(); }
};

namespace detail {

inline bool binary_increments(const std::vector<std::pair<int, double>>& marginal) {
  for (const auto& [i, p] : marginal)
    if (p > 0.0 && i > 1) return false;
  return true;
}

struct GrowthSetup {
  double lambda = 1.0;
  double gamma = 1.0;
  /// E[xi^{lambda/gamma}]; NaN means exponential xi.
  double xi_moment = std::numeric_limits<double>::quiet_NaN();
};

inline ScalingBundle bundle_for(const FitnessModel& model, const GrowthSetup& g, double t, double T_hat) {
  ScalingBundle b = model.is_gumbel() ? make_gumbel_bundle(model, g.lambda, g.gamma, t)
                                      : make_weibull_bundle(model, g.lambda, g.gamma, t, T_hat);
  if (!std::isnan(g.xi_moment)) {
    b.xi_moment = g.xi_moment;
    b.frechet_scale = model.is_gumbel() ? frechet_scale_gumbel(b.lambda, b.gamma, b.kappa, b.xi_moment)
                                        : frechet_scale_weibull(b.lambda, b.gamma, b.alpha, b.xi_moment);
  }
  return b;
}

inline std::string csv_of(const std::function<void(std::ostream&)>& writer) {
  std::ostringstream os;
  writer(os);
  return os.str();
}

inline ReplicateOutput finish_families(const std::vector<FamilyRecord>& families, double t,
                                       const FitnessModel& model, const GrowthSetup& g, double T_hat,
                                       bool want_cloud) {
  ReplicateOutput out;
  out.t_or_n = t;
  const auto b = bundle_for(model, g, t, T_hat);
  out.summary = summarize(families, model, b, T_hat);
  if (want_cloud)
    out.cloud = b.tail == TailClass::Gumbel ? rescale_gumbel(families, model, b, T_hat) : rescale_weibull(families, b);
  return out;
}

}  // namespace detail

/// Growth constants (lambda, gamma, xi moment) of a configured model.
inline detail::GrowthSetup growth_setup(const ExperimentConfig& c, const FitnessModel& model) {
  detail::GrowthSetup g;
  switch (c.model) {
    case ModelKind::Toy:
      g.lambda = c.lambda;
      g.gamma = 1.0;
      break;
    case ModelKind::Rbp: {
      const OffspringLaw law(c.law);
      g.lambda = malthusian_rbp(model, law).lambda;
      g.gamma = law.m1();
      if (!(g.gamma > 0.0)) throw ConfigError("dynamics.law", "families must grow (m1 > 0)");
      if (!detail::binary_increments(law.first_marginal())) {
        Rng rng = make_stream(c.seed, std::numeric_limits<std::uint64_t>::max());
        g.xi_moment = estimate_xi_moment(law.first_marginal(), 1.0, g.lambda / g.gamma,
                                         std::log(2000.0) / g.gamma, 2000, rng);
      }
      break;
    }
    case ModelKind::SelectionMutation: {
      const auto law = OffspringLaw::thinned(c.offspring, c.beta);
      double mean = 0.0;
      for (const auto& [k, p] : c.offspring) mean += k * p;
      g.lambda = malthusian_selection_mutation(model, c.beta, mean).lambda;
      g.gamma = (1.0 - c.beta) * mean;
      if (!(g.gamma > 0.0)) throw ConfigError("dynamics.beta", "families must grow (beta < 1)");
      if (!detail::binary_increments(law.first_marginal())) {
        Rng rng = make_stream(c.seed, std::numeric_limits<std::uint64_t>::max());
        g.xi_moment = estimate_xi_moment(law.first_marginal(), 1.0, g.lambda / g.gamma,
                                         std::log(2000.0) / g.gamma, 2000, rng);
      }
      break;
    }
    case ModelKind::BbTree:
      g.lambda = malthusian_bb(model).lambda;
      g.gamma = 1.0;
      break;
    case ModelKind::Dereich:
      g.lambda = c.lambda;
      g.gamma = c.lambda * c.beta;
      break;
    case ModelKind::Crp:
      g.lambda = 1.0;
      g.gamma = 1.0;
      break;
  }
  return g;
}

/// One replicate of a configured experiment on the stream (seed, k).
inline ReplicateOutput run_replicate(const ExperimentConfig& c, const FitnessModel& model,
                                     const detail::GrowthSetup& g, long long k) {
  Rng rng = make_stream(c.seed, static_cast<std::uint64_t>(k));
  const bool want_details = c.replicates == 1 || c.details;
  const bool want_cloud = c.point_cloud && k == 0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  switch (c.model) {
    case ModelKind::Toy: {
      const auto o = toy_model_oracle(model.alpha(), c.lambda, c.t_end, c.truncation, rng);
      ReplicateOutput out;
      out.t_or_n = c.t_end;
      out.summary.t = c.t_end;
      out.summary.max_size_rescaled = o.rescaled_max;
      out.summary.argmax_fitness = o.argmax_fitness;
      out.summary.argmax_birth_rescaled =
          std::log(static_cast<double>(o.argmax)) / c.lambda - (model.alpha() / c.lambda) * std::log(c.t_end);
      out.summary.top_ratio = nan;
      return out;
    }
    case ModelKind::Rbp:
    case ModelKind::SelectionMutation: {
      const OffspringLaw law = c.model == ModelKind::Rbp ? OffspringLaw(c.law) : OffspringLaw::thinned(c.offspring, c.beta);
      const StopRule stop{c.t_end > 0.0 ? c.t_end : std::numeric_limits<double>::infinity(), c.max_population,
                          c.max_families};
      RbpResult res;
      if (c.engine == RbpEngine::Branching) {
        const long long cap = c.max_population > 0 ? c.max_population : kDefaultSizeCap;
        res.snapshot = simulate_rbp_branching(model, law, c.t_end, rng, cap);
      } else {
        res = simulate_rbp(model, law, stop, rng, c.log_events && want_details);
      }
      const auto& snap = res.snapshot;
      const double T_hat = estimate_T(snap.families, g.lambda);
      auto out = detail::finish_families(snap.families, snap.clock, model, g, T_hat, want_cloud);
      if (want_details) {
        out.details["snapshot.csv"] = detail::csv_of([&](std::ostream& os) { write_snapshot_csv(os, snap); });
        if (c.log_events && c.engine == RbpEngine::Gillespie)
          out.details["events.csv"] = detail::csv_of([&](std::ostream& os) { write_event_log_csv(os, res.events); });
      }
      return out;
    }
    case ModelKind::BbTree: {
      const auto net = simulate_bb_tree(model, c.n_vertices, rng, c.embed);
      ReplicateOutput out;
      if (c.embed) {
        double clock = 0.0;
        for (const auto& v : net.vertices) clock = std::max(clock, v.tau);
        const double T_hat = estimate_T(net.vertices, g.lambda);
        out = detail::finish_families(net.vertices, clock, model, g, T_hat, want_cloud);
      } else {
        const auto e = extract_extremes(net.vertices);
        out.t_or_n = static_cast<double>(c.n_vertices);
        out.summary.t = out.t_or_n;
        out.summary.top_ratio = e.ratio;
        out.summary.argmax_fitness = net.vertices[e.position].fitness;
        out.summary.max_size_rescaled =
            static_cast<double>(e.max_size) / std::pow(static_cast<double>(c.n_vertices), 1.0 / g.lambda);
        out.summary.argmax_birth_rescaled = nan;
        out.summary.T_hat = nan;
      }
      if (want_details) out.details["edges.csv"] = detail::csv_of([&](std::ostream& os) { write_edges_csv(os, net); });
      return out;
    }
    case ModelKind::Dereich: {
      auto net = simulate_dereich(model, c.beta, c.n_vertices, rng, DereichScheme::TotalThenSplit, c.lambda);
      // family sizes are 1 + indegree
      std::vector<FamilyRecord> fams = net.vertices;
      for (auto& f : fams) f.size += 1;
      const double t = dereich_embedding_time(c.n_vertices, c.lambda);
      auto out = detail::finish_families(fams, t, model, g, num::kEulerGamma / c.lambda, want_cloud);
      if (want_details) out.details["edges.csv"] = detail::csv_of([&](std::ostream& os) { write_edges_csv(os, net); });
      return out;
    }
    case ModelKind::Crp: {
      const auto crp = simulate_crp(model, c.theta, c.n_customers, rng, {false, c.embed});
      ReplicateOutput out;
      out.t_or_n = static_cast<double>(c.n_customers);
      out.summary.t = out.t_or_n;
      if (crp.tables.size() >= 2) {
        const auto e = extract_extremes(crp.tables);
        out.summary.top_ratio = e.ratio;
        out.summary.argmax_fitness = crp.tables[e.position].fitness;
        out.summary.max_size_rescaled = static_cast<double>(e.max_size) / static_cast<double>(c.n_customers);
        out.summary.argmax_birth_rescaled = crp.embedded ? crp.tables[e.position].tau : nan;
      } else {
        out.summary.top_ratio = std::numeric_limits<double>::infinity();
        out.summary.argmax_fitness = crp.tables.front().fitness;
        out.summary.max_size_rescaled = 1.0;
        out.summary.argmax_birth_rescaled = crp.embedded ? 0.0 : nan;
      }
      out.summary.T_hat = nan;
      if (want_details) out.details["tables.csv"] = detail::csv_of([&](std::ostream& os) { write_tables_csv(os, crp); });
      return out;
    }
  }
  throw ConfigError("model", "unhandled model");
}

inline void write_replicates_csv(std::ostream& os, const std::vector<ReplicateOutput>& reps) {
  os << "replicate,t_or_n,max_size_rescaled,argmax_fitness,argmax_birth_rescaled,top_ratio,T_hat\n";
  for (std::size_t k = 0; k < reps.size(); ++k) {
    const auto& r = reps[k];
    os << k << ',' << fmt_double(r.t_or_n) << ',' << fmt_double(r.summary.max_size_rescaled) << ','
       << fmt_double(r.summary.argmax_fitness) << ',' << fmt_double(r.summary.argmax_birth_rescaled) << ','
       << fmt_double(r.summary.top_ratio) << ',' << fmt_double(r.summary.T_hat) << '\n';
  }
}

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + p.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write failed: " + p.string());
}

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace detail

/// Runs all replicates, validates against the limit laws when requested and
/// writes the output directory when one is configured.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  ExperimentResult res;
  res.config = config;
  const auto model = catalog::make(config.fitness_id, config.fitness_params);
  const auto g = growth_setup(config, model);
  res.replicates = parallel_replicates<ReplicateOutput>(
      config.replicates, resolve_threads(config.threads),
      [&](long long k) { return run_replicate(config, model, g, k); });

  // population or family stops leave each replicate at its own time
  const bool time_indexed = config.model == ModelKind::Rbp || config.model == ModelKind::SelectionMutation ||
                            config.model == ModelKind::Dereich;
  const bool common_t =
      time_indexed && std::all_of(res.replicates.begin(), res.replicates.end(), [&](const ReplicateOutput& r) {
        return r.t_or_n == res.replicates.front().t_or_n;
      });
  if (common_t) {
    const double t = res.replicates.front().t_or_n;
    res.bundle = detail::bundle_for(model, g, t, 0.0);
  } else if (config.model == ModelKind::Toy) {
    ScalingBundle b;
    b.tail = TailClass::Weibull;
    b.t = config.t_end;
    b.lambda = config.lambda;
    b.gamma = 1.0;
    b.alpha = model.alpha();
    b.frechet_shape = config.lambda;
    b.frechet_scale = 1.0;
    res.bundle = b;
  }

  if (config.validate) {
    std::vector<ReplicateSummary> sums;
    for (const auto& r : res.replicates) sums.push_back(r.summary);
    LimitsOptions opt;
    opt.ks_threshold = config.ks_threshold;
    opt.ratio_tolerance = config.ratio_tolerance;
    ScalingBundle b;
    if (res.bundle) b = *res.bundle;
    switch (config.model) {
      case ModelKind::Toy:
        opt.check_ratio = false;
        opt.check_position = false;
        break;
      case ModelKind::Crp:
        opt.check_size = false;
        opt.check_position = false;
        break;
      case ModelKind::BbTree:
        if (!config.embed) {
          opt.check_size = false;
          opt.check_position = false;
        }
        break;
      default:
        break;
    }
    if ((opt.check_size || opt.check_position) && !res.bundle)
      throw ConfigError("stop", "limit-law validation needs a common observation time");
    // in the Weibull case each replicate carries its own T_hat; the fitness
    // check only needs t, alpha and lambda
    res.limits = validate_limits(sums, b, opt);
  }

  nlohmann::json means = nlohmann::json::object();
  {
    double a = 0, f = 0, s = 0, n = 0;
    for (const auto& r : res.replicates) {
      a += std::log(r.summary.max_size_rescaled);
      f += r.summary.argmax_fitness;
      s += r.summary.argmax_birth_rescaled;
      n += 1;
    }
    means["log_max_size_rescaled"] = detail::finite_or_null(a / n);
    means["argmax_fitness"] = detail::finite_or_null(f / n);
    means["argmax_birth_rescaled"] = detail::finite_or_null(s / n);
  }
  res.summary = {{"config", to_json(config)},
                 {"n_replicates", config.replicates},
                 {"means", means},
                 {"validation", res.limits ? to_json(*res.limits) : nlohmann::json::array()},
                 {"pass", res.pass()}};
  if (res.bundle) {
    const auto& b = *res.bundle;
    res.summary["scaling"] = {{"tail", to_string(b.tail)},     {"t", b.t},
                              {"lambda", b.lambda},            {"gamma", b.gamma},
                              {"sigma_t", b.sigma_t},          {"frechet_shape", b.frechet_shape},
                              {"frechet_scale", b.frechet_scale}};
  }

  if (!config.output_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path dir(config.output_dir);
    fs::create_directories(dir);
    detail::write_file(dir / "config.resolved.json", to_json(config).dump(2) + "\n");
    detail::write_file(dir / "replicates.csv", detail::csv_of([&](std::ostream& os) { write_replicates_csv(os, res.replicates); }));
    detail::write_file(dir / "summary.json", res.summary.dump(2) + "\n");
    if (config.point_cloud && !res.replicates.front().cloud.empty())
      detail::write_file(dir / "point_cloud.csv",
                         detail::csv_of([&](std::ostream& os) { write_point_cloud_csv(os, res.replicates.front().cloud); }));
    for (std::size_t k = 0; k < res.replicates.size(); ++k) {
      const auto& det = res.replicates[k].details;
      if (det.empty()) continue;
      fs::path sub = dir;
      if (config.replicates > 1) {
        char name[32];
        std::snprintf(name, sizeof name, "replicate_%05zu", k);
        sub /= name;
        fs::create_directories(sub);
      }
      for (const auto& [file, text] : det) detail::write_file(sub / file, text);
    }
  }
  return res;
}

}  // namespace cgp
