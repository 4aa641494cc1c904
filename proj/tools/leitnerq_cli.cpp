#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include <nlohmann/json.hpp>

#include "leitnerq/log_store.hpp"
#include "leitnerq/lqn_sim.hpp"
#include "leitnerq/memory_models.hpp"
#include "leitnerq/model_eval.hpp"
#include "leitnerq/planner.hpp"

namespace {

using nlohmann::json;
using namespace leitnerq;

constexpr const char* kVersion = "0.1.0";

struct Run {
  std::string subcommand;
  std::vector<std::string> argv;
  std::string out;
  bool quiet = false;
  json manifest = json::object();
  std::vector<std::string> outputs;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_file(Run& run, const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  run.outputs.push_back(path);
}

void write_manifest(Run& run) {
  if (run.out.empty()) return;
  json m = {{"tool", "leitnerq"},
            {"version", kVersion},
            {"subcommand", run.subcommand},
            {"argv", run.argv},
            {"outputs", run.outputs}};
  for (auto& [k, v] : run.manifest.items()) m[k] = v;
  std::ofstream out(run.out + ".manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest for " + run.out);
  out << m.dump(2) << '\n';
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                           const std::optional<std::uint64_t>& config) {
  if (flag) return *flag;
  if (const char* env = std::getenv("LQN_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw std::runtime_error(std::string("LQN_SEED is not an unsigned integer: ") + env);
  }
  return config.value_or(0);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw std::runtime_error("not a number: '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<ModelSpec> parse_model_list(const std::string& text) {
  std::vector<ModelSpec> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    const ModelSpec spec = parse_model(tok);
    if (std::find(out.begin(), out.end(), spec) != out.end()) {
      std::cerr << "warning: duplicate model '" << tok << "' ignored\n";
      continue;
    }
    out.push_back(spec);
  }
  if (out.empty()) throw std::runtime_error("no models given");
  return out;
}

std::string models_text(std::span<const ModelSpec> models) {
  std::string s;
  for (const auto& m : models) s += (s.empty() ? "" : ",") + std::to_string(m.row());
  return s;
}

template <typename T>
std::optional<T> json_opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

// --- ingest ----------------------------------------------------------------

struct IngestArgs {
  std::string logs;
  std::string dialect = "mnemosyne";
  std::string time_unit = "days";
  int min_interactions = 1;
};

void cmd_ingest(Run& run, const IngestArgs& a) {
  std::ifstream in(a.logs);
  if (!in) throw std::runtime_error("cannot open " + a.logs);
  const Dialect dialect = parse_dialect(a.dialect);
  const TimeUnit unit = parse_time_unit(a.time_unit);
  LogSet set;
  try {
    set = parse_logs(in, dialect, unit);
  } catch (const ParseError& e) {
    throw std::runtime_error(a.logs + ": " + e.what());
  }
  set = filter_min_interactions(set, a.min_interactions);
  const auto histories = build_histories(set);
  const LogSummary s = summarize(set);
  if (!run.quiet) {
    std::cout << "users " << s.users << "\nitems " << s.items << "\ninteractions "
              << s.interactions << "\nrecall_rate " << s.recall_rate << '\n';
  }
  if (!run.out.empty()) write_file(run, run.out, histories_to_json(histories, unit).dump() + "\n");
  run.manifest["config"] = {{"logs", a.logs},
                            {"dialect", to_string(dialect)},
                            {"time_unit", to_string(unit)},
                            {"min_interactions", a.min_interactions}};
  run.manifest["summary"] = {{"users", s.users},
                             {"items", s.items},
                             {"interactions", s.interactions},
                             {"recall_rate", s.recall_rate}};
}

// --- fit / eval ------------------------------------------------------------

struct EvalArgs {
  std::string histories;
  std::string models = "1,2,3,4,5,6,7,8,9,10,11,12,13,14";
  int folds = 10;
  double test_frac = 0.2;
  double trunc_frac = 0.1;
  std::optional<std::uint64_t> seed;
  std::string format = "csv";
  double l2 = 1.0;
  unsigned threads = 1;
};

HistorySet load_histories(const std::string& path) {
  try {
    return histories_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void cmd_fit(Run& run, const EvalArgs& a) {
  const auto models = parse_model_list(a.models);
  const HistorySet hs = load_histories(a.histories);
  std::vector<Sample> samples;
  for (const auto& h : hs.histories) {
    auto s = samples_of(h, 0, h.interactions.size());
    samples.insert(samples.end(), s.begin(), s.end());
  }
  json fitted = json::array();
  for (const auto& spec : models) {
    std::vector<Sample> usable_rows;
    for (const auto& s : samples) {
      if (usable(spec, s.features)) usable_rows.push_back(s);
    }
    const MemoryModel m = fit_model(spec, usable_rows, a.l2, hs.time_unit);
    json entry = to_json(m);
    entry["log_likelihood"] = log_likelihood(m, usable_rows);
    fitted.push_back(std::move(entry));
    if (!run.quiet) {
      std::cout << spec.row() << ' ' << spec.name();
      if (spec.kind == ModelKind::kEfc && spec.difficulty == DifficultyMode::kGlobal) {
        std::cout << " theta=" << m.theta;
      }
      std::cout << '\n';
    }
  }
  if (!run.out.empty()) write_file(run, run.out, json{{"models", fitted}}.dump(2) + "\n");
  run.manifest["config"] = {{"histories", a.histories}, {"models", models_text(models)},
                            {"l2", a.l2}};
}

void cmd_eval(Run& run, const EvalArgs& a) {
  const auto models = parse_model_list(a.models);
  if (a.format != "csv" && a.format != "json") throw std::runtime_error("format must be csv or json");
  const HistorySet hs = load_histories(a.histories);
  const std::uint64_t seed = resolve_seed(a.seed, std::nullopt);
  const FoldPlan plan = make_fold_plan(hs.histories, a.folds, a.test_frac, a.trunc_frac, seed);
  EvalOptions options;
  options.threads = a.threads;
  const EvalReport report = evaluate_models(hs.histories, models, plan, options);
  if (!run.quiet) {
    for (const auto& m : report.models) {
      std::cout << m.name << " auc " << (m.validation.mean ? *m.validation.mean : 0.0)
                << " +- " << (m.validation.stderr_ ? *m.validation.stderr_ : 0.0) << '\n';
    }
  }
  if (!run.out.empty()) {
    write_file(run, run.out, a.format == "csv" ? to_csv(report) : to_json(report).dump(2) + "\n");
  }
  run.manifest["seed"] = seed;
  run.manifest["config"] = {{"histories", a.histories}, {"models", models_text(models)},
                            {"folds", a.folds},         {"test_frac", a.test_frac},
                            {"trunc_frac", a.trunc_frac}, {"format", a.format}};
}

// --- simulate / sweep ------------------------------------------------------

struct SimArgs {
  std::string config;
  std::optional<std::string> rates;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda_ext;
  std::string format = "csv";
  unsigned threads = 0;
};

void cmd_simulate(Run& run, const SimArgs& a) {
  const json j = read_json_file(a.config);
  SimConfig c = sim_config_from_json(j);
  if (a.lambda_ext) c.lambda_ext = *a.lambda_ext;
  c.seed = resolve_seed(a.seed, json_opt<std::uint64_t>(j, "seed"));
  c.record_trace = !run.out.empty();
  const SimResult r = simulate(c);
  if (!run.quiet) {
    std::cout << "events " << r.events << "\nintroduced " << r.introduced << "\nmastered "
              << r.mastered << "\nlambda_out " << r.lambda_out << "\noccupancy";
    for (long o : r.occupancy) std::cout << ' ' << o;
    std::cout << '\n';
  }
  if (!run.out.empty()) write_file(run, run.out, trace_csv(r.trace));
  run.manifest["seed"] = c.seed;
  run.manifest["config"] = to_json(c);
}

void cmd_sweep(Run& run, const SimArgs& a) {
  const json j = read_json_file(a.config);
  SimConfig c = sim_config_from_json(j);
  c.seed = resolve_seed(a.seed, json_opt<std::uint64_t>(j, "seed"));
  std::vector<double> rates;
  if (a.rates) {
    rates = parse_list(*a.rates);
  } else if (j.contains("rates")) {
    rates = j.at("rates").get<std::vector<double>>();
  } else {
    rates = {c.lambda_ext};
  }
  const int trials = a.trials.value_or(j.value("trials", 100));
  if (a.format != "csv" && a.format != "json") throw std::runtime_error("format must be csv or json");
  const SweepResult sweep = sweep_arrival_rates(c, rates, trials, c.seed, a.threads);
  for (const auto& s : sweep.skipped) {
    std::cerr << "skipped rate " << s.lambda_ext << ": " << s.reason << '\n';
  }
  if (!run.quiet) std::cout << sweep_csv(sweep);
  if (!run.out.empty()) {
    write_file(run, run.out, a.format == "csv" ? sweep_csv(sweep) : to_json(sweep).dump(2) + "\n");
    write_file(run, run.out + ".occupancy.csv", occupancy_csv(sweep));
  }
  json skipped = json::array();
  for (const auto& s : sweep.skipped) skipped.push_back({{"lambda_ext", s.lambda_ext}, {"reason", s.reason}});
  run.manifest["seed"] = c.seed;
  run.manifest["config"] = to_json(c);
  run.manifest["rates"] = rates;
  run.manifest["trials"] = trials;
  run.manifest["skipped"] = skipped;
}

// --- plan / plan-multi -----------------------------------------------------

struct PlanArgs {
  std::optional<std::string> config;
  std::optional<int> decks;
  std::optional<double> budget;
  std::optional<double> theta;
  std::optional<std::string> thetas;
  std::optional<std::string> mix;
  std::optional<std::string> sweep_theta;
  std::optional<std::string> sweep_budget;
  std::optional<std::string> mu;
  std::optional<double> lambda_ext;
};

struct PlanInputs {
  int decks = 0;
  double budget = 0.0;
  double theta = 0.0;
  std::vector<double> thetas;
  std::vector<double> mix;
  std::vector<double> sweep_theta;
  std::vector<double> sweep_budget;
};

PlanInputs resolve_plan(const PlanArgs& a, bool multi) {
  json j = a.config ? read_json_file(*a.config) : json::object();
  PlanInputs p;
  auto list = [&](const std::optional<std::string>& flag, const char* key) {
    if (flag) return parse_list(*flag);
    return j.contains(key) ? j.at(key).get<std::vector<double>>() : std::vector<double>{};
  };
  p.decks = a.decks.value_or(j.value("decks", 0));
  p.budget = a.budget.value_or(j.value("budget", 0.0));
  if (p.decks < 1) throw std::runtime_error("--decks is required (>= 1)");
  // A checked schedule implies its budget; a budget sweep supplies its own.
  const bool budget_optional = !multi && (a.mu || a.sweep_budget || j.contains("sweep_budget"));
  if (!(p.budget > 0.0) && !budget_optional) {
    throw std::runtime_error("--budget is required (> 0)");
  }
  if (multi) {
    p.thetas = list(a.thetas, "thetas");
    p.mix = list(a.mix, "mix");
    if (p.thetas.empty()) throw std::runtime_error("--thetas is required");
  } else {
    p.theta = a.theta.value_or(j.value("theta", 0.0));
    p.sweep_theta = list(a.sweep_theta, "sweep_theta");
    p.sweep_budget = list(a.sweep_budget, "sweep_budget");
    if (!(p.theta > 0.0) && p.sweep_theta.empty()) {
      throw std::runtime_error("--theta is required (> 0)");
    }
  }
  return p;
}

void cmd_plan(Run& run, const PlanArgs& a) {
  const PlanInputs p = resolve_plan(a, false);
  json config = {{"decks", p.decks}, {"budget", p.budget}, {"theta", p.theta}};
  if (!p.sweep_theta.empty() || !p.sweep_budget.empty()) {
    std::string csv;
    if (!p.sweep_theta.empty()) {
      csv = sensitivity_csv(sensitivity_theta(p.decks, p.budget, p.sweep_theta));
      config["sweep_theta"] = p.sweep_theta;
    } else {
      csv = sensitivity_csv(sensitivity_budget(p.decks, p.theta, p.sweep_budget));
      config["sweep_budget"] = p.sweep_budget;
    }
    if (!run.quiet) std::cout << csv;
    if (!run.out.empty()) write_file(run, run.out, csv);
    run.manifest["config"] = config;
    return;
  }

  PlanResult r;
  if (a.mu) {
    // Check a given schedule instead of optimizing.
    r.schedule.n = p.decks;
    r.schedule.mu = parse_list(*a.mu);
    r.schedule.lambda_ext = a.lambda_ext.value_or(0.0);
    r.schedule.theta = p.theta;
    if (r.schedule.mu.size() != static_cast<std::size_t>(p.decks)) {
      throw std::runtime_error("--mu needs one rate per deck");
    }
    double total = r.schedule.lambda_ext;
    for (double m : r.schedule.mu) total += m;
    r.schedule.budget = p.budget > 0.0 ? p.budget : total;
    if (total > r.schedule.budget * (1.0 + 1e-12)) {
      throw std::runtime_error("infeasible: lambda_ext + sum(mu) exceeds the budget");
    }
    r.flow = solve_flow_balance(r.schedule.mu, r.schedule.lambda_ext, p.theta);
    config["mu"] = r.schedule.mu;
    config["lambda_ext"] = r.schedule.lambda_ext;
    if (!r.flow.feasible) {
      run.manifest["config"] = config;
      throw std::runtime_error(
          "infeasible: deck " + std::to_string(r.flow.starved_deck.value_or(0)) +
          " is starved (arrivals reach its review rate)");
    }
  } else {
    r = optimize_schedule(p.decks, p.budget, p.theta);
  }
  if (!run.quiet) std::cout << format_plan_table(r.schedule, r.flow);
  if (!run.out.empty()) write_file(run, run.out, to_json(r).dump(2) + "\n");
  run.manifest["config"] = config;
}

void cmd_plan_multi(Run& run, const PlanArgs& a) {
  const PlanInputs p = resolve_plan(a, true);
  const MultiPlan plan = optimize_multi_difficulty(p.decks, p.budget, p.thetas, p.mix);
  if (!run.quiet) {
    std::cout << "total_rate " << plan.total_rate << '\n';
    for (std::size_t b = 0; b < plan.bins.size(); ++b) {
      std::cout << "\nbin " << b + 1 << " theta " << plan.thetas[b] << " mix " << plan.mix[b]
                << '\n'
                << format_plan_table(plan.bins[b].schedule, plan.bins[b].flow);
    }
  }
  if (!run.out.empty()) write_file(run, run.out, to_json(plan).dump(2) + "\n");
  run.manifest["config"] = {{"decks", p.decks}, {"budget", p.budget}, {"thetas", p.thetas},
                            {"mix", plan.mix}};
}

int run_cli(std::vector<std::string> args);

int cmd_replay(const std::string& manifest_path) {
  const json m = read_json_file(manifest_path);
  auto argv = m.at("argv").get<std::vector<std::string>>();
  if (m.contains("seed") && std::find(argv.begin(), argv.end(), "--seed") == argv.end()) {
    argv.push_back("--seed");
    argv.push_back(std::to_string(m.at("seed").get<std::uint64_t>()));
  }
  return run_cli(argv);
}

int run_cli(std::vector<std::string> args) {
  CLI::App app{"Leitner queue network toolkit: memory models, simulation and review planning"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  Run run;
  run.argv = args;
  app.add_flag("--quiet", run.quiet, "Suppress summaries on stdout");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Parse review logs into per-pair histories");
  c_ingest->add_option("--logs", ingest.logs, "Log CSV (user_id,item_id,timestamp,grade)")->required();
  c_ingest->add_option("--dialect", ingest.dialect, "mnemosyne or self");
  c_ingest->add_option("--time-unit", ingest.time_unit, "days or seconds");
  c_ingest->add_option("--min-interactions", ingest.min_interactions, "Drop sparse users/items");
  c_ingest->add_option("--out", run.out, "Histories JSON");

  EvalArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Fit memory models on all histories");
  c_fit->add_option("--histories", fit.histories, "Histories JSON from ingest")->required();
  c_fit->add_option("--models", fit.models, "Model names or row numbers, comma separated");
  c_fit->add_option("--l2", fit.l2, "L2 penalty for IRT and logistic models");
  c_fit->add_option("--out", run.out, "Fitted models JSON");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Cross-validate memory models");
  c_eval->add_option("--histories", eval.histories, "Histories JSON from ingest")->required();
  c_eval->add_option("--models", eval.models, "Model names or row numbers, comma separated");
  c_eval->add_option("--folds", eval.folds);
  c_eval->add_option("--test-frac", eval.test_frac);
  c_eval->add_option("--trunc-frac", eval.trunc_frac);
  c_eval->add_option("--seed", eval.seed);
  c_eval->add_option("--format", eval.format, "csv or json");
  c_eval->add_option("--threads", eval.threads);
  c_eval->add_option("--out", run.out, "Report file");

  SimArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Run one simulated session");
  c_sim->add_option("--config", sim.config, "Simulation config JSON")->required();
  c_sim->add_option("--lambda-ext", sim.lambda_ext, "Override the arrival rate");
  c_sim->add_option("--seed", sim.seed);
  c_sim->add_option("--out", run.out, "Trace CSV");

  SimArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Sweep arrival rates over seeded trials");
  c_sweep->add_option("--config", sweep.config, "Simulation config JSON")->required();
  c_sweep->add_option("--rates", sweep.rates, "Comma-separated arrival rates");
  c_sweep->add_option("--trials", sweep.trials);
  c_sweep->add_option("--seed", sweep.seed);
  c_sweep->add_option("--format", sweep.format, "csv or json");
  c_sweep->add_option("--threads", sweep.threads, "Worker threads (0: all cores)");
  c_sweep->add_option("--out", run.out, "Sweep table");

  PlanArgs plan;
  auto* c_plan = app.add_subcommand("plan", "Optimize a review schedule");
  c_plan->add_option("--config", plan.config, "JSON with decks, budget, theta, sweep lists");
  c_plan->add_option("--decks", plan.decks);
  c_plan->add_option("--budget", plan.budget);
  c_plan->add_option("--theta", plan.theta);
  c_plan->add_option("--sweep-theta", plan.sweep_theta, "Comma-separated theta grid");
  c_plan->add_option("--sweep-budget", plan.sweep_budget, "Comma-separated budget grid");
  c_plan->add_option("--mu", plan.mu, "Check this schedule instead of optimizing");
  c_plan->add_option("--lambda-ext", plan.lambda_ext, "Arrival rate for --mu");
  c_plan->add_option("--out", run.out, "Plan JSON or sensitivity CSV");

  PlanArgs multi;
  auto* c_multi = app.add_subcommand("plan-multi", "Plan parallel networks per difficulty");
  c_multi->add_option("--config", multi.config, "JSON with decks, budget, thetas, mix");
  c_multi->add_option("--decks", multi.decks);
  c_multi->add_option("--budget", multi.budget);
  c_multi->add_option("--thetas", multi.thetas, "Comma-separated difficulties");
  c_multi->add_option("--mix", multi.mix, "Share of new items per difficulty");
  c_multi->add_option("--out", run.out, "Plan JSON");

  std::string manifest;
  auto* c_replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  c_replay->add_option("manifest", manifest)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (c_replay->parsed()) return cmd_replay(manifest);
    if (c_ingest->parsed()) {
      run.subcommand = "ingest";
      cmd_ingest(run, ingest);
    } else if (c_fit->parsed()) {
      run.subcommand = "fit";
      cmd_fit(run, fit);
    } else if (c_eval->parsed()) {
      run.subcommand = "eval";
      cmd_eval(run, eval);
    } else if (c_sim->parsed()) {
      run.subcommand = "simulate";
      cmd_simulate(run, sim);
    } else if (c_sweep->parsed()) {
      run.subcommand = "sweep";
      cmd_sweep(run, sweep);
    } else if (c_plan->parsed()) {
      run.subcommand = "plan";
      cmd_plan(run, plan);
    } else if (c_multi->parsed()) {
      run.subcommand = "plan-multi";
      cmd_plan_multi(run, multi);
    }
    write_manifest(run);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  return run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
