// specmap: plan speculative-sampling deployments on heterogeneous SoCs.
//
// Exit status: 0 success, 1 input error, 2 coverage/feasibility error.

#include "specmap/specmap.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace specmap;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitCoverage = 2;
constexpr const char *kOutputDirEnv = "SPECMAP_OUTPUT_DIR";

struct WorkspaceConfig {
  std::string platform_file;
  std::string profiles_file;
  std::string traces_file;
  std::string output_dir = "specmap-out";
  std::uint32_t seq_len = 63;
  double alpha_percentile = 90.0;
  std::uint32_t gamma_max = kDefaultGammaMax.value;
  double min_speedup = 1.05;
  double heterogeneity_margin = 0.05;
  std::uint64_t seed = 20251016;

  void require_file(const std::string &path, const char *what) const {
    if (path.empty())
      throw InputError(std::string("missing --") + what);
    if (!fs::is_regular_file(path))
      throw InputError(std::string(what) + " file '" + path + "' does not exist");
  }

  fs::path out_dir() const {
    if (const char *env = std::getenv(kOutputDirEnv); env && *env)
      return env;
    return output_dir;
  }
};

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

fs::path prepare_output(const WorkspaceConfig &ws, const std::string &name) {
  const fs::path dir = ws.out_dir();
  fs::create_directories(dir);
  return dir / name;
}

std::ofstream open_output(const fs::path &path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw InputError("cannot write '" + path.string() + "'");
  return out;
}

std::optional<Quantization> quant_flag(const std::string &text) {
  if (text.empty())
    return std::nullopt;
  return parse_quantization(text);
}

std::string describe_allocation(const DesignVariant &v, const Platform &p) {
  std::string out;
  for (std::size_t i = 0; i < v.allocation.size(); ++i)
    out += (i ? " " : "") + p.unit(i).id + ":" + std::to_string(v.allocation[i]);
  return out;
}

Mapping parse_mapping(const std::string &text, const Platform &platform) {
  Mapping m;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (part.find_first_not_of("0123456789") == std::string::npos && !part.empty())
      m.assignment.push_back(std::stoul(part));
    else
      m.assignment.push_back(platform.index_of(part));
  }
  if (!is_valid(m, platform))
    throw InputError("mapping '" + text + "' does not match the platform's " +
                     std::to_string(platform.partition_count()) + " partitions");
  return m;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const WorkspaceConfig &ws, const std::string &drafter_quant, const std::string &target_quant) {
  ws.require_file(ws.profiles_file, "profiles");
  const ProfileStore store = load_profiles(ws.profiles_file);

  std::cout << "profiles: " << store.size() << "\n";
  for (const auto &[key, profile] : store.profiles()) {
    std::cout << "  " << to_string(key.role) << " " << key.unit_id << " allocation=" << key.allocation << " "
              << to_string(key.quantization) << ": " << profile.samples().size() << " samples, seq_len ["
              << profile.min_seq_len() << ", " << profile.max_seq_len() << "]\n";
    if (!profile.monotone())
      std::cerr << "warning: latency of " << key.describe() << " decreases with seq_len somewhere\n";
  }
  if (ws.platform_file.empty())
    return 0;

  ws.require_file(ws.platform_file, "platform");
  const Platform platform = load_platform(ws.platform_file);
  const auto variants = enumerate_variants(platform);
  const auto curves = build_cost_curves(store, platform, {quant_flag(drafter_quant), quant_flag(target_quant)});
  std::cout << "coverage: " << curves.size() << " of " << search_space_size(platform)
            << " (variant, mapping) pairs\n";
  for (const auto &curve : curves) {
    std::size_t infeasible = 0;
    for (const auto &p : curve.points())
      infeasible += p.infeasible();
    const auto &m = curve.mapping();
    std::cout << "  [" << describe_allocation(curve.variant(), platform) << "] drafter=" << platform.unit(m.drafter_unit()).id
              << " target=" << platform.unit(m.target_unit()).id << ": seq_len [" << curve.min_seq_len() << ", "
              << curve.max_seq_len() << "]";
    if (infeasible)
      std::cout << ", " << infeasible << " point(s) with c > 1";
    std::cout << "\n";
  }
  const auto path = prepare_output(ws, "cost_curves.csv");
  auto out = open_output(path);
  write_cost_curves(out, curves, variants);
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_alpha(const WorkspaceConfig &ws, const std::string &config, const std::string &task) {
  ws.require_file(ws.traces_file, "traces");
  const auto traces = load_traces(ws.traces_file);
  const auto dist = distribution(traces, config, task.empty() ? std::nullopt : std::optional<std::string>(task));
  const auto &s = dist.summary;
  std::cout << "config " << config << (task.empty() ? "" : ", task " + task) << ": " << dist.samples.size()
            << " samples\n";
  std::cout << "  min " << fixed(s.min, 4) << "  p10 " << fixed(s.p10, 4) << "  p25 " << fixed(s.p25, 4)
            << "  median " << fixed(s.median, 4) << "  mean " << fixed(s.mean, 4) << "  p75 " << fixed(s.p75, 4)
            << "  p90 " << fixed(s.p90, 4) << "  max " << fixed(s.max, 4) << "\n";
  const auto path = prepare_output(ws, "alpha_samples.csv");
  auto out = open_output(path);
  write_alpha_samples(out, dist);
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

struct PlanFlags {
  std::optional<double> alpha;
  std::string config = "fp16/w8a8";
  std::string task = "translation";
  std::string drafter_quant;
  std::string target_quant;
  std::optional<std::uint32_t> hidden_dim;
};

AcceptanceRate resolve_alpha(const WorkspaceConfig &ws, const PlanFlags &flags) {
  if (flags.alpha)
    return AcceptanceRate{*flags.alpha};
  ws.require_file(ws.traces_file, "traces");
  if (!(ws.alpha_percentile > 0.0 && ws.alpha_percentile <= 100.0))
    throw InputError("--alpha-percentile must lie in (0, 100]");
  const auto traces = load_traces(ws.traces_file);
  const auto dist = distribution(traces, flags.config,
                                 flags.task.empty() ? std::nullopt : std::optional<std::string>(flags.task));
  std::vector<double> sorted = dist.per_sample_alphas();
  std::sort(sorted.begin(), sorted.end());
  return AcceptanceRate{percentile(sorted, ws.alpha_percentile)};
}

int cmd_plan(const WorkspaceConfig &ws, const PlanFlags &flags) {
  ws.require_file(ws.platform_file, "platform");
  ws.require_file(ws.profiles_file, "profiles");
  const Platform platform = load_platform(ws.platform_file);
  const ProfileStore store = load_profiles(ws.profiles_file);
  const AcceptanceRate alpha = resolve_alpha(ws, flags);

  PlanRequest request{platform, alpha};
  request.seq_len = ws.seq_len;
  request.gamma_max = DraftLength{ws.gamma_max};
  request.min_speedup = ws.min_speedup;
  request.heterogeneity_margin = ws.heterogeneity_margin;
  if (flags.hidden_dim)
    request.target_model = ModelSpec{"target", *flags.hidden_dim, Quantization::other};
  request.validate();

  const auto curves =
      build_cost_curves(store, platform, {quant_flag(flags.drafter_quant), quant_flag(flags.target_quant)});
  const auto decisions = plan(request, curves);

  std::cout << "alpha = " << format_double(alpha.value()) << ", seq_len = " << ws.seq_len << "\n\n";
  std::cout << format_decision_table(decisions, platform);
  const PlanDecision best = best_global(decisions);
  std::cout << "\nbest: variant " << best.variant_index << " (" << describe_allocation(best.variant, platform) << ")";
  if (best.use_speculation)
    std::cout << ", gamma = " << best.gamma.value << ", drafter on " << platform.unit(best.mapping->drafter_unit()).id
              << ", target on " << platform.unit(best.mapping->target_unit()).id << ", predicted speedup "
              << fixed(best.predicted_speedup.value(), 3) << "x\n";
  else
    std::cout << ", no speculation\n";
  for (const auto &d : decisions)
    for (const auto &note : d.notes)
      std::cout << "note (variant " << d.variant_index << "): " << note << "\n";

  const auto path = prepare_output(ws, "plan.csv");
  auto out = open_output(path);
  write_plan(out, decisions);
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

struct SimFlags {
  std::vector<double> alphas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<std::uint32_t> gammas{1, 3, 5, 7};
  std::optional<double> c;
  std::size_t variant = 1;
  std::string mapping = "gpu;cpu";
  std::uint64_t rounds = 100000;
  double per_module_call = 0.0;
  double per_round_fixed = 0.0;
  std::string granularity = "per-pass";
};

CostCoefficient resolve_cost(const WorkspaceConfig &ws, const SimFlags &flags) {
  if (flags.c)
    return CostCoefficient{*flags.c};
  ws.require_file(ws.platform_file, "platform");
  ws.require_file(ws.profiles_file, "profiles");
  const Platform platform = load_platform(ws.platform_file);
  const auto variants = enumerate_variants(platform);
  if (flags.variant < 1 || flags.variant > variants.size())
    throw InputError("--variant must lie in [1, " + std::to_string(variants.size()) + "]");
  const DesignVariant &variant = variants[flags.variant - 1];
  const Mapping mapping = parse_mapping(flags.mapping, platform);
  const ProfileStore store = load_profiles(ws.profiles_file);
  const auto &drafter =
      store.find(ModelRole::drafter, platform.unit(mapping.drafter_unit()).id, variant.allocation[mapping.drafter_unit()]);
  const auto &target =
      store.find(ModelRole::target, platform.unit(mapping.target_unit()).id, variant.allocation[mapping.target_unit()]);
  return cost_coefficient(drafter, target, ws.seq_len);
}

int cmd_simulate(const WorkspaceConfig &ws, const SimFlags &flags) {
  const CostCoefficient c = resolve_cost(ws, flags);
  ServingOverheads overheads{flags.per_module_call, flags.per_round_fixed, parse_call_granularity(flags.granularity)};
  overheads.validate();
  if (flags.rounds < 1)
    throw InputError("--rounds must be at least 1");
  const auto cells = sweep(flags.alphas, flags.gammas, c, overheads, flags.rounds, ws.seed);

  std::cout << "c = " << fixed(c.value(), 4) << ", rounds per cell = " << flags.rounds << ", seed = " << ws.seed
            << "\n";
  std::cout << "alpha  gamma  predicted  measured  stderr\n";
  for (const auto &cell : cells)
    std::cout << fixed(cell.alpha, 3) << "  " << cell.gamma << "      " << fixed(cell.predicted, 4) << "     "
              << fixed(cell.measured, 4) << "    "
              << (cell.standard_error ? fixed(*cell.standard_error, 5) : std::string("NA")) << "\n";
  const auto path = prepare_output(ws, "sweep.csv");
  auto out = open_output(path);
  write_sweep(out, cells);
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_fit_overhead(const WorkspaceConfig &ws, double alpha, std::uint32_t gamma, double c, double shift,
                     std::uint64_t rounds, const std::string &granularity) {
  const AcceptanceRate a{alpha};
  const CallGranularity g = parse_call_granularity(granularity);
  const double p = fit_module_call_overhead(a, DraftLength{gamma}, CostCoefficient{c}, shift, g);

  SimScenario scenario;
  scenario.alpha_source = ConstantAlpha{AcceptanceRate{alpha * (1.0 + shift)}};
  scenario.gamma = DraftLength{gamma};
  scenario.t_draft_ms = c;
  scenario.t_target_ms = 1.0;
  scenario.overheads = ServingOverheads{p, 0.0, g};
  scenario.budget = Budget::rounds(rounds);
  scenario.seed = ws.seed;
  const SimResult sim = simulate(scenario);
  const double predicted = speedup(a, DraftLength{gamma}, CostCoefficient{c}).value();

  std::cout << "per-call overhead = " << fixed(p, 6) << " x t_target\n";
  std::cout << "predicted at alpha " << fixed(alpha, 4) << ": " << fixed(predicted, 4) << "\n";
  std::cout << "measured at alpha " << fixed(alpha * (1.0 + shift), 4) << " with overhead: "
            << fixed(sim.measured_speedup, 4) << " +- " << fixed(sim.speedup_stderr.value_or(0.0), 4) << "\n";

  const auto path = prepare_output(ws, "overhead_fit.csv");
  auto out = open_output(path);
  out << "#specmap overhead-fit " << kFormatVersion << "\n";
  out << "alpha,shifted_alpha,gamma,c,granularity,per_module_call,predicted,measured,stderr\n";
  out << format_double(alpha) << "," << format_double(alpha * (1.0 + shift)) << "," << gamma << ","
      << format_double(c) << "," << to_string(g) << "," << format_double(p) << "," << format_double(predicted) << ","
      << format_double(sim.measured_speedup) << ","
      << (sim.speedup_stderr ? format_double(*sim.speedup_stderr) : std::string("NA")) << "\n";
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_toy(const WorkspaceConfig &ws, const std::string &draft_file, const std::string &target_file,
            const std::string &rule_text, std::uint32_t gamma, std::uint64_t rounds, Token initial_state) {
  ws.require_file(draft_file, "draft");
  ws.require_file(target_file, "target");
  const MarkovModel draft = load_markov(draft_file);
  const MarkovModel target = load_markov(target_file);
  const AcceptanceRule rule = parse_acceptance_rule(rule_text);
  const AcceptanceRate exact = exact_mean_alpha(draft, target, rule, initial_state);
  const GenerationResult run = generate_and_verify(draft, target, rule, DraftLength{gamma}, rounds, ws.seed, initial_state);
  const double per_round = static_cast<double>(run.tokens_generated()) / static_cast<double>(run.rounds);

  std::cout << "vocab " << draft.vocab_size() << ", rule " << to_string(rule) << ", gamma " << gamma << "\n";
  std::cout << "exact mean alpha     " << fixed(exact.value(), 6) << "\n";
  std::cout << "empirical alpha      "
            << (run.empirical_alpha() ? fixed(*run.empirical_alpha(), 6) : std::string("NA")) << "\n";
  std::cout << "tokens per round     " << fixed(per_round, 4) << " (" << run.tokens_generated() << " tokens, "
            << run.rounds << " rounds)\n";

  const auto path = prepare_output(ws, "toy_run.csv");
  auto out = open_output(path);
  out << "#specmap toy-run " << kFormatVersion << "\n";
  out << "rule,gamma,rounds,tokens,proposed,accepted,empirical_alpha,exact_mean_alpha\n";
  out << to_string(rule) << "," << gamma << "," << run.rounds << "," << run.tokens_generated() << ","
      << run.proposed << "," << run.accepted << ","
      << (run.empirical_alpha() ? format_double(*run.empirical_alpha()) : std::string("NA")) << ","
      << format_double(exact.value()) << "\n";
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Plan speculative-sampling deployments on heterogeneous edge SoCs"};
  app.require_subcommand(1);
  WorkspaceConfig ws;
  app.add_option("-o,--out-dir", ws.output_dir, "Directory for structured output (env " + std::string(kOutputDirEnv) +
                                                    " overrides)");

  auto *ingest = app.add_subcommand("ingest", "Validate latency profiles and summarise coverage");
  std::string drafter_quant, target_quant;
  ingest->add_option("--profiles", ws.profiles_file, "Profiles file")->required();
  ingest->add_option("--platform", ws.platform_file, "Platform file; enables cost-curve coverage output");
  ingest->add_option("--drafter-quant", drafter_quant, "Drafter quantization (default: unique per key)");
  ingest->add_option("--target-quant", target_quant, "Target quantization (default: unique per key)");

  auto *alpha = app.add_subcommand("alpha", "Acceptance-rate distribution for one quantization pair");
  std::string config, task;
  alpha->add_option("--traces", ws.traces_file, "Trace file")->required();
  alpha->add_option("--config", config, "Quantization-pair tag, e.g. fp16/w8a8")->required();
  alpha->add_option("--task", task, "Restrict to one task");

  auto *plan_cmd = app.add_subcommand("plan", "Per-variant deployment decision table");
  PlanFlags plan_flags;
  plan_cmd->add_option("--platform", ws.platform_file, "Platform file")->required();
  plan_cmd->add_option("--profiles", ws.profiles_file, "Profiles file")->required();
  plan_cmd->add_option("--traces", ws.traces_file, "Trace file (alpha source when --alpha is not given)");
  plan_cmd->add_option("--alpha", plan_flags.alpha, "Scenario acceptance rate");
  plan_cmd->add_option("--config", plan_flags.config, "Trace quantization pair")->capture_default_str();
  plan_cmd->add_option("--task", plan_flags.task, "Trace task filter (empty for all)")->capture_default_str();
  plan_cmd->add_option("--alpha-percentile", ws.alpha_percentile, "Percentile of per-sample alpha, in (0, 100]")
      ->capture_default_str();
  plan_cmd->add_option("--seq-len", ws.seq_len, "Evaluation sequence length")->capture_default_str();
  plan_cmd->add_option("--gamma-max", ws.gamma_max, "Largest draft length searched")->capture_default_str();
  plan_cmd->add_option("--min-speedup", ws.min_speedup, "Deployment threshold")->capture_default_str();
  plan_cmd->add_option("--heterogeneity-margin", ws.heterogeneity_margin,
                       "Required gain of heterogeneous over homogeneous")
      ->capture_default_str();
  plan_cmd->add_option("--drafter-quant", plan_flags.drafter_quant, "Drafter quantization");
  plan_cmd->add_option("--target-quant", plan_flags.target_quant, "Target quantization");
  plan_cmd->add_option("--hidden-dim", plan_flags.hidden_dim, "Target hidden dimension (flags long sequences)");

  auto *sim = app.add_subcommand("simulate", "Monte Carlo sweep of measured vs predicted speedup");
  SimFlags sim_flags;
  sim->add_option("--alphas", sim_flags.alphas, "Acceptance rates")->delimiter(',');
  sim->add_option("--gammas", sim_flags.gammas, "Draft lengths")->delimiter(',');
  sim->add_option("--c", sim_flags.c, "Cost coefficient (otherwise derived from the workspace)");
  sim->add_option("--platform", ws.platform_file, "Platform file");
  sim->add_option("--profiles", ws.profiles_file, "Profiles file");
  sim->add_option("--variant", sim_flags.variant, "1-based design variant")->capture_default_str();
  sim->add_option("--mapping", sim_flags.mapping, "Drafter;target units, by id or index")->capture_default_str();
  sim->add_option("--seq-len", ws.seq_len, "Evaluation sequence length")->capture_default_str();
  sim->add_option("--rounds", sim_flags.rounds, "Rounds per cell")->capture_default_str();
  sim->add_option("--per-module-call", sim_flags.per_module_call, "Overhead per module call, in t_target units");
  sim->add_option("--per-round-fixed", sim_flags.per_round_fixed, "Overhead per round, in t_target units");
  sim->add_option("--granularity", sim_flags.granularity, "per-pass or per-module")->capture_default_str();
  sim->add_option("--seed", ws.seed, "Base seed; cell i uses seed + i")->capture_default_str();

  auto *fit = app.add_subcommand("fit-overhead", "Per-call overhead that explains a relative alpha shift");
  double fit_alpha = 0.9, fit_c = 0.3578, fit_shift = 0.04;
  std::uint32_t fit_gamma = 5;
  std::uint64_t fit_rounds = 100000;
  std::string fit_granularity = "per-pass";
  fit->add_option("--alpha", fit_alpha, "Predicted acceptance rate")->capture_default_str();
  fit->add_option("--gamma", fit_gamma, "Draft length")->capture_default_str();
  fit->add_option("--c", fit_c, "Cost coefficient")->capture_default_str();
  fit->add_option("--shift", fit_shift, "Relative alpha shift of the measured curve")->capture_default_str();
  fit->add_option("--rounds", fit_rounds, "Verification rounds")->capture_default_str();
  fit->add_option("--granularity", fit_granularity, "per-pass or per-module")->capture_default_str();
  fit->add_option("--seed", ws.seed, "Seed")->capture_default_str();

  auto *toy = app.add_subcommand("toy", "Token-level draft/verify run on Markov model pairs");
  std::string draft_file, target_file, rule = "stochastic";
  std::uint32_t toy_gamma = 4;
  std::uint64_t toy_rounds = 100000;
  Token initial_state = 0;
  toy->add_option("--draft", draft_file, "Drafter Markov grid")->required();
  toy->add_option("--target", target_file, "Target Markov grid")->required();
  toy->add_option("--rule", rule, "greedy or stochastic")->capture_default_str();
  toy->add_option("--gamma", toy_gamma, "Draft length")->capture_default_str();
  toy->add_option("--rounds", toy_rounds, "Rounds")->capture_default_str();
  toy->add_option("--initial-state", initial_state, "Start token")->capture_default_str();
  toy->add_option("--seed", ws.seed, "Seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (ingest->parsed())
      return cmd_ingest(ws, drafter_quant, target_quant);
    if (alpha->parsed())
      return cmd_alpha(ws, config, task);
    if (plan_cmd->parsed())
      return cmd_plan(ws, plan_flags);
    if (sim->parsed())
      return cmd_simulate(ws, sim_flags);
    if (fit->parsed())
      return cmd_fit_overhead(ws, fit_alpha, fit_gamma, fit_c, fit_shift, fit_rounds, fit_granularity);
    if (toy->parsed())
      return cmd_toy(ws, draft_file, target_file, rule, toy_gamma, toy_rounds, initial_state);
  } catch (const CoverageError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCoverage;
  } catch (const InputError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
