// Command-line front end: simulate, validate, sigma, malthus, kappa, catalog.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cgp/fitness.hpp"
#include "cgp/harness.hpp"
#include "cgp/malthusian.hpp"
#include "cgp/scaling.hpp"
#include "json.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

struct FitnessFlags {
  std::string id;
  std::optional<double> rho;
  std::optional<double> alpha;

  void add_to(CLI::App* app, bool required) {
    auto* opt = app->add_option("--model", id, "Fitness model id (see `catalog`)");
    if (required) opt->required();
    app->add_option("--rho", rho, "Parameter of power_rho");
    app->add_option("--alpha", alpha, "Parameter of weibull_alpha");
  }

  std::map<std::string, double> params() const {
    auto p = cgp::catalog::default_params(id);
    if (rho) p["rho"] = *rho;
    if (alpha) p["alpha"] = *alpha;
    return p;
  }

  cgp::FitnessModel make() const { return cgp::catalog::make(id, params()); }
};

std::string g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// validate presets

nlohmann::json preset(const std::string& name) {
  if (name == "toy_frechet")
    return {{"model", "toy"},
            {"fitness", {{"id", "weibull_alpha"}, {"params", {{"alpha", 1.0}}}}},
            {"dynamics", {{"lambda", 1.0}, {"truncation", 3.0}}},
            {"stop", {{"t_end", 50.0}}},
            {"replicates", 2000}};
  if (name == "crp_ratio")
    return {{"model", "crp"},
            {"fitness", {{"id", "weibull_alpha"}, {"params", {{"alpha", 1.0}}}}},
            {"dynamics", {{"theta", 1.0}, {"embed", false}}},
            {"stop", {{"n_customers", 100000}}},
            {"replicates", 2000}};
  if (name == "weibull_rbp")
    return {{"model", "selection_mutation"},
            {"fitness", {{"id", "weibull_alpha"}, {"params", {{"alpha", 1.0}}}}},
            {"dynamics", {{"beta", 0.6}, {"engine", "branching"}}},
            {"stop", {{"t_end", 25.0}, {"max_population", 100000000}}},
            {"replicates", 500}};
  if (name == "gumbel_clt")
    return {{"model", "selection_mutation"},
            {"fitness", {{"id", "gnedenko"}}},
            {"dynamics", {{"beta", 0.6}, {"engine", "branching"}}},
            {"stop", {{"t_end", 32.0}, {"max_population", 100000000}}},
            {"replicates", 500}};
  throw cgp::ConfigError("scenario", "unknown scenario '" + name + "'");
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> v{"toy_frechet", "crp_ratio", "weibull_rbp", "gumbel_clt"};
  return v;
}

void print_report(const cgp::ExperimentResult& res) {
  if (res.limits) {
    for (const auto& c : res.limits->checks)
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.law << " distance=" << g12(c.ks)
                << " threshold=" << g12(c.threshold) << " n=" << c.n_replicates << '\n';
  }
  std::cout << "replicates=" << res.replicates.size() << " pass=" << (res.pass() ? "true" : "false") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Competing growth processes: simulation and limit-law checks"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run a configured experiment");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<long long> replicates;
  std::optional<unsigned> threads;
  std::string out_dir;
  std::optional<std::string> sim_model;
  std::optional<std::string> sim_fitness;
  std::optional<double> sim_beta, sim_theta, sim_t_end, sim_lambda, sim_rho, sim_alpha;
  std::optional<long long> sim_n_vertices, sim_n_customers, sim_max_pop, sim_max_fam;
  std::optional<std::string> sim_engine;
  bool sim_validate = false;
  bool sim_cloud = false;
  sim->add_option("--config", config_path, "JSON experiment file")->check(CLI::ExistingFile);
  sim->add_option("--seed", seed, "Master seed (overrides file and EXTREMAL_SEED)");
  sim->add_option("--replicates", replicates, "Number of replicates");
  sim->add_option("--threads", threads, "Worker threads (0 = hardware)");
  sim->add_option("--out", out_dir, "Output directory");
  sim->add_option("--model", sim_model, "toy|rbp|selection_mutation|bb_tree|dereich|crp");
  sim->add_option("--fitness", sim_fitness, "Fitness model id");
  sim->add_option("--rho", sim_rho, "power_rho parameter");
  sim->add_option("--alpha", sim_alpha, "weibull_alpha parameter");
  sim->add_option("--beta", sim_beta, "Mutation / attachment parameter");
  sim->add_option("--theta", sim_theta, "CRP new-table parameter");
  sim->add_option("--lambda", sim_lambda, "Toy / Dereich growth rate");
  sim->add_option("--t-end", sim_t_end, "Observation time");
  sim->add_option("--n-vertices", sim_n_vertices, "Network size");
  sim->add_option("--n-customers", sim_n_customers, "CRP customers");
  sim->add_option("--max-population", sim_max_pop, "Stop at this population");
  sim->add_option("--max-families", sim_max_fam, "Stop at this number of families");
  sim->add_option("--engine", sim_engine, "gillespie|branching");
  sim->add_flag("--validate", sim_validate, "Test the replicates against the limit laws");
  sim->add_flag("--point-cloud", sim_cloud, "Write point_cloud.csv for replicate 0");

  // validate
  auto* val = app.add_subcommand("validate", "Run a named scenario end to end");
  std::string scenario;
  val->add_option("scenario", scenario, "Scenario name")->required()->check(CLI::IsMember(preset_names()));
  val->add_option("--seed", seed, "Master seed");
  val->add_option("--replicates", replicates, "Override the replicate count");
  val->add_option("--threads", threads, "Worker threads (0 = hardware)");
  val->add_option("--out", out_dir, "Output directory");

  // sigma
  auto* sig = app.add_subcommand("sigma", "Window centre sigma_t and asymptotic diagnostics");
  FitnessFlags sig_fit;
  sig_fit.add_to(sig, true);
  double sig_lambda = 1.0;
  double sig_t = 0.0;
  sig->add_option("--lambda", sig_lambda, "Malthusian parameter")->required();
  sig->add_option("--t", sig_t, "Time")->required();

  // malthus
  auto* mal = app.add_subcommand("malthus", "Malthusian parameter");
  FitnessFlags mal_fit;
  mal_fit.add_to(mal, true);
  std::string equation = "bb";
  double mal_beta = 0.6;
  double mal_mean = 1.0;
  mal->add_option("--equation", equation, "bb|selection_mutation|rbp|crp");
  mal->add_option("--beta", mal_beta, "Mutation probability");
  mal->add_option("--mean", mal_mean, "Mean offspring number");

  // kappa
  auto* kap = app.add_subcommand("kappa", "Curvature constant kappa");
  FitnessFlags kap_fit;
  kap_fit.add_to(kap, true);

  // catalog
  auto* cat = app.add_subcommand("catalog", "List fitness models and their regularity status");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return kExitPass;
    std::cerr << '\n' << app.help();
    return kExitConfig;
  }

  try {
    if (*sim || *val) {
      nlohmann::json j;
      if (*val) {
        j = preset(scenario);
        j["validate"] = {{"enabled", true}};
      } else if (!config_path.empty()) {
        std::ifstream f(config_path);
        try {
          j = nlohmann::json::parse(f);
        } catch (const nlohmann::json::exception& e) {
          throw cgp::ConfigError("config", e.what());
        }
      } else {
        j = nlohmann::json::object();
      }
      auto set = [&](const char* section, const char* key, const auto& v) {
        if (v) j[section][key] = *v;
      };
      if (sim_model) j["model"] = *sim_model;
      if (sim_fitness) j["fitness"]["id"] = *sim_fitness;
      if (sim_rho) j["fitness"]["params"]["rho"] = *sim_rho;
      if (sim_alpha) j["fitness"]["params"]["alpha"] = *sim_alpha;
      set("dynamics", "beta", sim_beta);
      set("dynamics", "theta", sim_theta);
      set("dynamics", "lambda", sim_lambda);
      set("dynamics", "engine", sim_engine);
      set("stop", "t_end", sim_t_end);
      set("stop", "n_vertices", sim_n_vertices);
      set("stop", "n_customers", sim_n_customers);
      set("stop", "max_population", sim_max_pop);
      set("stop", "max_families", sim_max_fam);
      if (sim_validate) j["validate"]["enabled"] = true;
      if (sim_cloud) j["outputs"]["point_cloud"] = true;
      if (replicates) j["replicates"] = *replicates;
      if (threads) j["threads"] = *threads;
      if (!out_dir.empty()) j["outputs"]["dir"] = out_dir;
      if (seed)
        j["seed"] = *seed;
      else if (const auto env = cgp::seed_from_env())
        j["seed"] = *env;

      const auto config = cgp::config_from_json(j);
      const auto res = cgp::run_experiment(config);
      print_report(res);
      return res.pass() ? kExitPass : kExitFail;
    }

    if (*sig) {
      const auto model = sig_fit.make();
      const auto sol = cgp::solve_sigma(model, sig_lambda, sig_t);
      std::cout << "sigma_t " << g12(sol.sigma) << '\n'
                << "root " << g12(sol.root) << (sol.clamped ? " (clamped to 1)" : "") << '\n'
                << "residual " << g12(sol.residual) << '\n';
      std::vector<double> grid;
      for (double t = sig_t; t <= sig_t * 1e4 + 1; t *= 10.0) grid.push_back(t);
      const auto rep = cgp::sanity_asymptotics(model, sig_lambda, grid);
      std::cout << "t sigma c1_ratio curvature_ratio small_o\n";
      for (const auto& r : rep.rows)
        std::cout << g12(r.t) << ' ' << g12(r.sigma) << ' ' << g12(r.c1_ratio) << ' '
                  << g12(r.curvature_ratio) << ' ' << g12(r.small_o) << '\n';
      std::cout << "converged c1=" << rep.c1_converged << " curvature=" << rep.curvature_converged
                << " small_o=" << rep.small_o_converged << '\n';
      return kExitPass;
    }

    if (*mal) {
      const auto model = mal_fit.make();
      cgp::MalthusianResult r;
      if (equation == "bb")
        r = cgp::malthusian_bb(model);
      else if (equation == "selection_mutation")
        r = cgp::malthusian_selection_mutation(model, mal_beta, mal_mean);
      else if (equation == "rbp")
        r = cgp::malthusian_rbp(model, cgp::OffspringLaw::one_one());
      else if (equation == "crp")
        r = cgp::malthusian_crp(model);
      else
        throw cgp::ConfigError("--equation", "must be bb, selection_mutation, rbp or crp");
      std::cout << "lambda " << g12(r.lambda) << '\n' << "residual " << g12(r.residual) << '\n';
      return kExitPass;
    }

    if (*kap) {
      const auto model = kap_fit.make();
      const auto k = cgp::kappa(model);
      std::printf("kappa %.6f\n", k.estimate);
      std::cout << "extrapolation_residual " << g12(k.residual) << '\n';
      for (int i = 0; i < 5; ++i) std::cout << "raw[x=1-1e-" << i + 4 << "] " << g12(k.raw[static_cast<std::size_t>(i)]) << '\n';
      std::cout << "failed " << (k.failed ? "true" : "false") << '\n';
      return k.failed ? kExitFail : kExitPass;
    }

    if (*cat) {
      for (const auto& id : cgp::catalog::ids()) {
        const auto model = cgp::catalog::make(id);
        std::cout << id << " class=" << cgp::to_string(model.kind());
        if (model.is_gumbel()) {
          const auto rep = cgp::check_a5(model);
          std::cout << " kappa=" << g12(rep.kappa.estimate) << " A5=";
          for (const auto& c : rep.conditions) std::cout << c.name << ':' << (c.pass ? "ok" : "FAIL") << ' ';
        } else {
          std::cout << " alpha=" << g12(model.alpha());
        }
        std::cout << '\n';
      }
      return kExitPass;
    }
  } catch (const cgp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cgp::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cgp::NoSolutionError& e) {
    std::cerr << "no solution: " << e.what() << '\n';
    return kExitFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
  return kExitPass;
}
