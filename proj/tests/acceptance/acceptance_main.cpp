// Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned below.

#include "specmap/specmap.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace specmap;
namespace fs = std::filesystem;

namespace {

constexpr double kRelTol = 1e-12;          // criterion 1
constexpr double kFeasibilitySlack = 1e-12; // criterion 2
constexpr double kTableTol = 0.005;         // criterion 5
constexpr double kSigmas = 3.0;             // criteria 6 and 7
constexpr double kChiSquareAlpha = 0.001;   // criterion 7
constexpr double kFamilyWise = 0.0027;      // criterion 8, two-sided 3-sigma over the whole grid
constexpr std::uint64_t kSeed = 20251016;

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string &why) {
    if (pass)
      detail.clear();
    pass = false;
    detail += (detail.empty() ? "" : "; ") + why;
  }
};

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

Platform edge_soc() { return Platform{{{"cpu", UnitKind::cpu, 6}, {"gpu", UnitKind::gpu, 1}}, 2}; }

std::vector<CostCurve> constant_curves(const Platform &p, const std::function<double(std::size_t, const Mapping &)> &cost) {
  std::vector<CostCurve> out;
  const auto variants = enumerate_variants(p);
  for (std::size_t v = 0; v < variants.size(); ++v)
    for (const auto &m : enumerate_mappings(p))
      out.push_back(CostCurve::constant(variants[v], m, 63, cost(v + 1, m)));
  return out;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o;
  struct Case {
    double a;
    std::uint32_t g;
    double c;
    double want; // 40-digit reference evaluation
  };
  const Case cases[] = {{0.8, 3, 0.5, 1.1808}, {0.37, 0, 0.9, 1.0}, {0.0, 2, 0.5, 0.5}, {1.0, 5, 0.2, 3.0},
                        {0.9, 5, 0.3578, 1.6800250986016493}};
  double worst = 0.0;
  for (const auto &k : cases) {
    const double got = speedup(AcceptanceRate{k.a}, DraftLength{k.g}, CostCoefficient{k.c}).value();
    const double err = std::abs(got - k.want) / k.want;
    worst = std::max(worst, err);
    if (err > kRelTol)
      o.fail("S(" + num(k.a) + "," + std::to_string(k.g) + "," + num(k.c) + ") = " + num(got, 17));
  }
  const double c = solve_cost_coefficient(AcceptanceRate{0.9}, DraftLength{5}, Speedup{1.68}).value();
  const double back = speedup(AcceptanceRate{0.9}, DraftLength{5}, CostCoefficient{c}).value();
  if (std::abs(back - 1.68) / 1.68 > kRelTol)
    o.fail("back-solve round trip " + num(back, 17));
  if (o.pass)
    o.detail = "max relative error " + num(worst, 3) + ", speedup(0.8, 3, 0.5) = 1.1808";
  return o;
}

Outcome criterion2() {
  Outcome o;
  double worst = 0.0;
  std::size_t checked = 0;
  for (int ai = 1; ai <= 19; ++ai) {
    const double a = 0.05 * ai;
    for (int ci = 0;; ++ci) {
      const double c = a + 0.05 * ci;
      if (c > 1.5 + 1e-9)
        break;
      for (std::uint32_t g = 0; g <= 16; ++g) {
        const double s = speedup(AcceptanceRate{a}, DraftLength{g}, CostCoefficient{c}).value();
        worst = std::max(worst, s);
        ++checked;
        if (s > 1.0 + kFeasibilitySlack)
          o.fail("S(" + num(a) + "," + std::to_string(g) + "," + num(c) + ") = " + num(s, 17));
      }
    }
  }
  if (o.pass)
    o.detail = std::to_string(checked) + " grid points, max speedup " + num(worst, 17);
  return o;
}

Outcome criterion3() {
  Outcome o;
  const auto p = edge_soc();
  const auto v = enumerate_variants(p).size();
  const auto total = v * enumerate_mappings(p).size();
  if (v != 6 || variant_count(p) != 6)
    o.fail("variants " + std::to_string(v));
  if (total != 24 || search_space_size(p) != 24)
    o.fail("mappings " + std::to_string(total));
  if (o.pass)
    o.detail = "6 variants, 24 mappings";
  return o;
}

Outcome criterion4() {
  Outcome o;
  std::mt19937_64 gen(kSeed);
  std::uniform_real_distribution<double> u(0.41, 1.5);
  std::size_t sets = 0;
  auto check = [&](const std::vector<CostCurve> &curves) {
    PlanRequest r{edge_soc(), AcceptanceRate{0.17}};
    for (double threshold : {1.0, 1.05}) {
      r.min_speedup = threshold;
      for (const auto &d : plan(r, curves))
        if (d.use_speculation || d.predicted_speedup.value() != 1.0 || d.gamma.value != 0)
          o.fail("variant " + std::to_string(d.variant_index) + " speculates");
    }
    ++sets;
  };
  check(constant_curves(edge_soc(), [](auto, auto &) { return 0.41; }));
  for (int i = 0; i < 500; ++i)
    check(constant_curves(edge_soc(), [&](auto, auto &) { return u(gen); }));
  const auto bundled = build_cost_curves(load_profiles(std::string(SPECMAP_DATA_DIR) + "/edge_soc/profiles.csv"),
                                         load_platform(std::string(SPECMAP_DATA_DIR) + "/edge_soc/platform.csv"));
  check(bundled);
  if (o.pass)
    o.detail = std::to_string(sets) + " curve sets, all variants No";
  return o;
}

Outcome criterion5() {
  Outcome o;
  auto cost = [](std::size_t v, const Mapping &m) {
    const bool drafter_gpu_target_cpu = m.assignment == std::vector<std::size_t>{1, 0};
    const bool cpu_only = m.assignment == std::vector<std::size_t>{0, 0};
    if (v == 1 && drafter_gpu_target_cpu) return 0.3578;
    if (v == 1 && cpu_only) return 0.80;
    if (v == 2 && drafter_gpu_target_cpu) return 0.7318;
    if (v == 5 && cpu_only) return 0.8627;
    return 0.95;
  };
  PlanRequest r{edge_soc(), AcceptanceRate{0.90}};
  r.min_speedup = 1.0;
  const auto d = plan(r, constant_curves(edge_soc(), cost));

  struct Expect {
    std::size_t variant;
    bool yes;
    std::uint32_t gamma;
    std::optional<bool> hetero;
    double speedup;
  };
  const Expect rows[] = {{1, true, 5, true, 1.68}, {2, true, 2, true, 1.10}, {3, false, 0, {}, 1.0},
                         {4, false, 0, {}, 1.0},   {5, true, 1, false, 1.02}, {6, false, 0, {}, 1.0}};
  std::string table;
  for (const auto &e : rows) {
    const auto &got = d.at(e.variant - 1);
    const std::string tag = "variant " + std::to_string(e.variant);
    table += (table.empty() ? "" : ", ") + std::to_string(e.variant) + ":" +
             (got.use_speculation ? "Yes(g=" + std::to_string(got.gamma.value) + ")" : std::string("No")) + "/" +
             num(got.predicted_speedup.value(), 5);
    if (got.use_speculation != e.yes) {
      o.fail(tag + " speculation " + (got.use_speculation ? "Yes" : "No"));
      continue;
    }
    if (!e.yes)
      continue;
    if (got.gamma.value != e.gamma)
      o.fail(tag + " gamma " + std::to_string(got.gamma.value) + " (expected " + std::to_string(e.gamma) +
             ", speedup there " +
             num(speedup(r.alpha, DraftLength{e.gamma}, *got.cost_coefficient).value(), 6) + ")");
    if (got.heterogeneous != e.hetero)
      o.fail(tag + " heterogeneous mismatch");
    if (std::abs(got.predicted_speedup.value() - e.speedup) > kTableTol)
      o.fail(tag + " speedup " + num(got.predicted_speedup.value()));
  }
  o.detail = (o.pass ? "" : o.detail + " | ") + table;
  return o;
}

Outcome criterion6() {
  Outcome o;
  std::mt19937_64 gen(kSeed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_speedup = 0.0, worst_tokens = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double a = 0.02 + 0.96 * u(gen);
    const double c = a * (0.02 + 0.96 * u(gen));
    const std::uint32_t g = 1 + static_cast<std::uint32_t>(gen() % 16);
    SimScenario s;
    s.alpha_source = ConstantAlpha{AcceptanceRate{a}};
    s.gamma = DraftLength{g};
    s.t_draft_ms = c;
    s.t_target_ms = 1.0;
    s.budget = Budget::rounds(100000);
    s.seed = derive_seed(kSeed, static_cast<std::uint64_t>(i));
    const SimResult r = simulate(s);
    const double predicted = speedup(AcceptanceRate{a}, DraftLength{g}, CostCoefficient{c}).value();
    const double tokens = expected_tokens_per_round(AcceptanceRate{a}, DraftLength{g});
    const double zs = std::abs(r.measured_speedup - predicted) / *r.speedup_stderr;
    const double zt = std::abs(r.mean_tokens_per_round - tokens) / *r.tokens_stderr;
    worst_speedup = std::max(worst_speedup, zs);
    worst_tokens = std::max(worst_tokens, zt);
    const std::string tag = "(a=" + num(a, 4) + ", g=" + std::to_string(g) + ", c=" + num(c, 4) + ")";
    if (zs > kSigmas)
      o.fail(tag + " speedup off by " + num(zs, 3) + " SE");
    if (zt > kSigmas)
      o.fail(tag + " tokens/round off by " + num(zt, 3) + " SE");
  }
  if (o.pass)
    o.detail = "50 triples at 1e5 rounds, worst |z| speedup " + num(worst_speedup, 3) + ", tokens " +
               num(worst_tokens, 3);
  return o;
}

/// p-value of a two-sample chi-square homogeneity test on category counts.
double homogeneity_p(const std::vector<double> &a, const std::vector<double> &b) {
  const double na = std::accumulate(a.begin(), a.end(), 0.0);
  const double nb = std::accumulate(b.begin(), b.end(), 0.0);
  double stat = 0.0;
  int df = -1;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double col = a[k] + b[k];
    if (col == 0.0)
      continue;
    ++df;
    const double ea = col * na / (na + nb);
    const double eb = col * nb / (na + nb);
    stat += (a[k] - ea) * (a[k] - ea) / ea + (b[k] - eb) * (b[k] - eb) / eb;
  }
  if (df < 1)
    return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), stat));
}

Outcome criterion7() {
  Outcome o;
  const MarkovModel target = load_markov(std::string(SPECMAP_DATA_DIR) + "/toy/target.txt");
  const MarkovModel bundled_draft = load_markov(std::string(SPECMAP_DATA_DIR) + "/toy/draft.txt");
  // Every row overlaps the target by exactly 0.8, so each verification is an
  // independent Bernoulli(0.8) trial.
  const MarkovModel even_draft{{{0.4, 0.3, 0.3}, {0.2, 0.5, 0.3}, {0.45, 0.2, 0.35}}};
  const auto rule = AcceptanceRule::stochastic_rejection;
  const DraftLength gamma{4};
  const std::size_t v = target.vocab_size();

  // Marginal of the k-th emitted token from independent replications, so the
  // counts are i.i.d. draws and the chi-square null distribution holds.
  const std::uint64_t replications = 100000;
  const std::uint32_t positions = gamma.value + 1;
  double min_p = 1.0;
  for (const MarkovModel *draft : {&bundled_draft, &even_draft}) {
    std::vector<std::vector<double>> spec(positions, std::vector<double>(v, 0.0)), plain = spec;
    for (std::uint64_t i = 0; i < replications; ++i) {
      SpeculativeLoop loop(*draft, target, rule, 0);
      Rng rng(derive_seed(kSeed, i));
      std::vector<Token> out;
      while (out.size() < positions)
        loop.round(gamma, rng, &out);
      const auto alone = sample_target_chain(target, positions, derive_seed(kSeed + replications, i), 0);
      for (std::uint32_t k = 0; k < positions; ++k) {
        spec[k][out[k]] += 1.0;
        plain[k][alone[k]] += 1.0;
      }
    }
    for (std::uint32_t k = 0; k < positions; ++k) {
      const double p = homogeneity_p(spec[k], plain[k]);
      min_p = std::min(min_p, p);
      if (!(p > kChiSquareAlpha))
        o.fail("token " + std::to_string(k + 1) + " marginal differs, p = " + num(p, 3));
    }
  }

  // Long-run acceptance on one stream of 1e5 tokens.
  GenerationResult run;
  {
    SpeculativeLoop loop(even_draft, target, rule, 0);
    Rng rng(kSeed);
    while (run.tokens.size() < 100000) {
      const auto r = loop.round(gamma, rng, &run.tokens);
      ++run.rounds;
      run.proposed += r.proposed;
      run.verified += r.verified;
      run.accepted += r.accepted;
    }
  }
  const double exact = exact_mean_alpha(even_draft, target, rule, 0).value();
  const double empirical = *run.empirical_alpha();
  const double se = std::sqrt(exact * (1.0 - exact) / static_cast<double>(run.verified));
  const double z = std::abs(empirical - exact) / se;
  if (z > kSigmas)
    o.fail("alpha " + num(empirical) + " vs exact " + num(exact) + " (" + num(z, 3) + " SE)");
  if (o.pass)
    o.detail = "min chi-square p " + num(min_p, 3) + " over " + std::to_string(2 * positions) +
               " marginals; alpha " + num(empirical, 5) + " vs " + num(exact, 5) + " (" + num(z, 3) + " SE)";
  return o;
}

Outcome criterion8() {
  Outcome o;
  const double c = 0.3578;
  std::vector<std::uint32_t> gammas{1, 2, 3, 4, 5, 6, 7};

  // Predicted structure on a fine grid.
  const int fine = 20000;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < gammas.size(); ++i)
    for (std::size_t j = i + 1; j < gammas.size(); ++j) {
      const DraftLength ga{gammas[i]}, gb{gammas[j]};
      if (!is_feasible(AcceptanceRate{1.0}, CostCoefficient{c}))
        continue;
      ++pairs;
      int crossings = 0;
      double prev = 0.0;
      for (int k = 1; k < fine; ++k) {
        const AcceptanceRate a{static_cast<double>(k) / fine};
        const double diff = speedup(a, gb, CostCoefficient{c}).value() - speedup(a, ga, CostCoefficient{c}).value();
        if (k > 1 && ((prev < 0.0 && diff >= 0.0) || (prev > 0.0 && diff <= 0.0)))
          ++crossings;
        if (diff != 0.0)
          prev = diff;
      }
      const double low = speedup(AcceptanceRate{0.0}, gb, CostCoefficient{c}).value() -
                         speedup(AcceptanceRate{0.0}, ga, CostCoefficient{c}).value();
      const double high = speedup(AcceptanceRate{1.0}, gb, CostCoefficient{c}).value() -
                          speedup(AcceptanceRate{1.0}, ga, CostCoefficient{c}).value();
      const std::string tag = "gamma " + std::to_string(ga.value) + " vs " + std::to_string(gb.value);
      if (crossings != 1)
        o.fail(tag + ": " + std::to_string(crossings) + " crossings");
      if (!(low < 0.0 && high > 0.0))
        o.fail(tag + ": longer draft does not lose low and win high");
    }

  // Measured curves against predicted, Bonferroni-adjusted over all cells.
  std::vector<double> alphas;
  for (int k = 0; k <= 20; ++k)
    alphas.push_back(k / 20.0);
  const auto cells = sweep(alphas, gammas, CostCoefficient{c}, {}, 100000, kSeed);
  const double per_cell = kFamilyWise / static_cast<double>(cells.size());
  const double z_crit = boost::math::quantile(boost::math::complement(boost::math::normal(), per_cell / 2.0));
  double worst = 0.0;
  for (const auto &cell : cells) {
    const double diff = std::abs(cell.measured - cell.predicted);
    const double se = cell.standard_error.value_or(0.0);
    if (se == 0.0) {
      if (diff > 1e-12 * cell.predicted)
        o.fail("deterministic cell a=" + num(cell.alpha) + " g=" + std::to_string(cell.gamma) + " off by " + num(diff));
      continue;
    }
    worst = std::max(worst, diff / se);
    if (diff / se > z_crit)
      o.fail("cell a=" + num(cell.alpha) + " g=" + std::to_string(cell.gamma) + " off by " + num(diff / se, 3) +
             " SE");
  }
  if (o.pass)
    o.detail = std::to_string(pairs) + " pairs cross once; " + std::to_string(cells.size()) +
               " cells within " + num(z_crit, 3) + " SE (worst " + num(worst, 3) + ")";
  return o;
}

int run_cli(const fs::path &out_dir, const std::string &args) {
  const std::string cmd = "SPECMAP_OUTPUT_DIR='" + out_dir.string() + "' '" + std::string(SPECMAP_CLI_PATH) + "' " +
                          args + " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion9() {
  Outcome o;
  const std::string d = SPECMAP_DATA_DIR;
  const std::string ws = " --platform " + d + "/edge_soc/platform.csv --profiles " + d + "/edge_soc/profiles.csv";
  struct Command {
    std::string args;
    std::string output;
  };
  const std::vector<Command> commands{
      {"ingest --profiles " + d + "/edge_soc/profiles.csv --platform " + d + "/edge_soc/platform.csv",
       "cost_curves.csv"},
      {"alpha --traces " + d + "/edge_soc/traces.csv --config fp16/w8a8 --task translation", "alpha_samples.csv"},
      {"plan" + ws + " --traces " + d + "/edge_soc/traces.csv", "plan.csv"},
      {"plan" + ws + " --alpha 0.17", "plan.csv"},
      {"simulate" + ws + " --variant 1 --mapping 'gpu;cpu' --rounds 20000 --seed 7", "sweep.csv"},
      {"simulate --c 0.41 --alphas 0.2,0.9 --gammas 1,3 --rounds 5000 --per-module-call 0.02 --seed 7", "sweep.csv"},
      {"fit-overhead --alpha 0.9 --gamma 5 --c 0.3578 --rounds 20000 --seed 7", "overhead_fit.csv"},
      {"toy --draft " + d + "/toy/draft.txt --target " + d + "/toy/target.txt --rounds 20000 --seed 7",
       "toy_run.csv"},
  };
  const fs::path root = fs::temp_directory_path() / "specmap-acceptance-determinism";
  fs::remove_all(root);
  std::size_t compared = 0;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    std::string first;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = root / (std::to_string(i) + "-" + std::to_string(rep));
      fs::create_directories(dir);
      const int status = run_cli(dir, commands[i].args);
      if (status != 0) {
        o.fail("'" + commands[i].args.substr(0, commands[i].args.find(' ')) + "' exited " + std::to_string(status));
        break;
      }
      const std::string bytes = slurp(dir / commands[i].output);
      if (bytes.empty())
        o.fail(commands[i].output + " empty");
      if (rep == 0)
        first = bytes;
      else if (bytes != first)
        o.fail("'" + commands[i].args.substr(0, commands[i].args.find(' ')) + "' output differs between runs");
      else
        ++compared;
    }
  }
  fs::remove_all(root);
  if (o.pass)
    o.detail = std::to_string(compared) + " command reruns byte-identical";
  return o;
}

} // namespace

int main() {
  struct Criterion {
    int id;
    const char *name;
    Outcome (*fn)();
  };
  const Criterion criteria[] = {
      {1, "speedup formula fidelity", criterion1},
      {2, "no gain when c >= alpha", criterion2},
      {3, "design-space counts", criterion3},
      {4, "low-alpha plan is all No", criterion4},
      {5, "high-alpha decision pattern", criterion5},
      {6, "analytic vs Monte Carlo", criterion6},
      {7, "speculative sampling on toy models", criterion7},
      {8, "draft-length crossing structure", criterion8},
      {9, "CLI determinism", criterion9},
  };
  int failures = 0;
  for (const auto &c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception &e) {
      o.fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << " ("
              << num(secs, 3) << " s)" << std::endl;
  }
  std::cout << (9 - failures) << "/9 criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
