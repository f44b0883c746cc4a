// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero on any failure.

#include <array>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "bipgd/baselines.hpp"
#include "bipgd/core_qp.hpp"
#include "bipgd/harness.hpp"
#include "bipgd/metrics.hpp"
#include "bipgd/problems.hpp"
#include "bipgd/solver.hpp"

using namespace bipgd;
namespace h = bipgd::harness;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string Fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string Fmt(const char* format, ...) {
  char buf[1024];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

// Traces of every solver run below, for the per-step subproblem check.
std::vector<std::pair<std::string, Trace>> g_runs;

void Keep(const std::string& label, const Trace& t) { g_runs.emplace_back(label, t); }

Outcome QpEquivalence() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> dim(1, 50);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = dim(rng), m = dim(rng);
    BlockVec gf{Vec(n), Vec(m)}, gh{Vec(n), Vec(m)};
    for (Vec* v : {&gf.x, &gf.y, &gh.x, &gh.y}) {
      for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = normal(rng);
    }
    const double alpha = std::array{0.01, 0.1, 1.0}[t % 3];
    const double rho = (t / 3) % 2 ? rho_regular(gh) : rho_general(gh, std::abs(normal(rng)));
    const double lambda = multiplier(gf, gh, rho, alpha);
    const BlockVec d = direction(gf, gh, lambda);
    const QpSolution ref = qp_brute_oracle(gf, gh, rho, alpha);
    worst = std::max({worst, std::abs(lambda - ref.lambda),
                      (d.x - ref.delta.x).cwiseAbs().maxCoeff(),
                      (d.y - ref.delta.y).cwiseAbs().maxCoeff()});
  }
  const double secs = Seconds(start);
  return {worst <= 1e-8 && secs <= 5.0, Fmt("max error %.3e over 1000 instances, %.2fs", worst, secs)};
}

Outcome OracleValidity() {
  const auto start = Clock::now();
  bool ok = true;
  std::string detail;
  for (const char* name : {"sc_synthetic", "nc_synthetic", "coreset", "dhc", "regularity"}) {
    h::ProblemSpec spec;
    spec.name = name;
    const h::ValidationReport r = h::validate_problem(h::make_problem(spec), 0);
    double fd = 0.0, sym = 0.0;
    for (const h::ValidationCheck& c : r.checks) {
      if (c.name == "finite_difference") fd = c.value;
      if (c.name == "hvp_symmetry") sym = c.value;
    }
    ok = ok && fd <= 1e-5 && sym <= 1e-10;
    detail += Fmt("%s fd=%.1e sym=%.1e; ", name, fd, sym);
  }
  const double secs = Seconds(start);
  return {ok && secs <= 10.0, detail + Fmt("%.2fs", secs)};
}

struct Sweep {
  std::vector<h::RunOutcome> runs;
  double seconds = 0.0;
};

Sweep RunSweep(h::MethodKind kind) {
  const auto start = Clock::now();
  h::ExperimentConfig config;
  config.problem.name = "sc_synthetic";
  config.problem.seed = 0;
  config.methods = {{kind, h::json::object()}};
  config.K_list = {1000, 10000, 100000};
  const BenchmarkProblem problem = h::make_problem(config.problem);
  Sweep s;
  for (std::int64_t K : config.K_list) {
    s.runs.push_back(h::run_method(problem, config.methods[0], K, config));
    Keep(std::string(h::to_string(kind)) + " K=" + std::to_string(K), s.runs.back().trace);
  }
  s.seconds = Seconds(start);
  return s;
}

Outcome RateCheck(const Sweep& s, bool cor1) {
  std::vector<std::pair<double, double>> delta, second;
  for (const h::RunOutcome& r : s.runs) {
    if (!r.error.empty()) return {false, "run failed: " + r.error};
    const double K = static_cast<double>(r.K);
    delta.emplace_back(K, r.trace.totals.mean_delta_sq());
    second.emplace_back(K, cor1 ? r.trace.totals.mean_grad_h_sq() : r.trace.totals.mean_h());
  }
  const double threshold = cor1 ? -0.4 : -0.2;
  const double sd = rate_slope(delta), s2 = rate_slope(second);
  std::string detail = Fmt("slope(mean |Delta|^2)=%.3f slope(mean %s)=%.3f threshold %.1f, %.1fs",
                           sd, cor1 ? "|grad h|^2" : "h", s2, threshold, s.seconds);
  if (cor1) {
    const Trace& t = s.runs.back().trace;
    double best = t.records.front().kkt_stationarity;
    for (const IterateRecord& r : t.records) best = std::min(best, r.kkt_stationarity);
    detail += Fmt("; K=1e5 min stationarity / initial = %.2e",
                  best / t.records.front().kkt_stationarity);
  }
  return {sd <= threshold && s2 <= threshold && s.seconds <= 120.0, detail};
}

Outcome DescentBound(const Sweep& cor1) {
  const BenchmarkProblem p = make_sc_synthetic(0);
  const SmoothnessConstants& c = p.oracles.constants;
  bool ok = true;
  std::string detail;
  for (const h::RunOutcome& r : cor1.runs) {
    if (r.K > 10000) continue;
    const Trace& t = r.trace;
    const double K = static_cast<double>(r.K);
    const double alpha = t.config.alpha, gamma = t.config.gamma, C0 = t.config.C0;
    const double f0 = t.records.front().f_val;
    const double fbar = *p.f_lower_bound;
    const double rhs = 4.0 * (f0 + alpha * alpha * alpha * C0 - fbar) / (gamma * K) +
                       2.0 * alpha * C0 / (gamma * *c.L_h * K) +
                       2.0 * alpha * alpha * *c.L_h * *c.C_f * *c.C_f;
    const double lhs = t.totals.mean_delta_sq();
    ok = ok && lhs <= 1.05 * rhs;
    detail += Fmt("K=%lld lhs=%.4e rhs=%.4e; ", static_cast<long long>(r.K), lhs, rhs);
  }
  return {ok, detail};
}

Outcome Regularity() {
  h::ProblemSpec spec;
  spec.name = "regularity";
  const BenchmarkProblem p = h::make_problem(spec);
  const double c = p.metadata.extra.at("regularity_c");
  int violations = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto [x, y] = sample_point(p, s);
    if (p.oracles.grad_y_g(x, y).norm() > c * grad_h(p.oracles, x, y).norm() * (1 + 1e-12)) {
      ++violations;
    }
  }
  h::ExperimentConfig config;
  config.problem = spec;
  const h::MethodSpec method{h::MethodKind::OursCor1, h::json::object()};
  const h::RunOutcome run = h::run_method(p, method, 10000, config);
  if (!run.error.empty()) return {false, "run failed: " + run.error};
  Keep("regularity ours_cor1 K=10000", run.trace);
  const std::int64_t best =
      best_iterate(run.trace, BestIterateCriterion::MaxOfGradHAndStationarity);
  const IterateRecord* rec = nullptr;
  for (const IterateRecord& r : run.trace.records) {
    if (r.k == best) rec = &r;
  }
  const double eps = std::max(rec->grad_h_sq, rec->kkt_stationarity);
  const bool implied = rec->h_val <= c * c * rec->grad_h_sq * (1 + 1e-9) + 1e-300;
  return {violations == 0 && implied && rec->h_val <= c * c * eps * (1 + 1e-9) + 1e-300,
          Fmt("c=%.4f, %d/100 violations; best k=%lld h=%.3e c^2|grad h|^2=%.3e eps=%.3e", c,
              violations, static_cast<long long>(best), rec->h_val, c * c * rec->grad_h_sq, eps)};
}

// Total oracle calls at the first iterate whose true hypergradient norm is <= 1e-4, or -1.
using Runner = std::function<void(const IterationObserver&)>;

std::int64_t CallsToTarget(const BenchmarkProblem& p, const Runner& runner, double& last) {
  std::int64_t calls = -1;
  runner([&](const IterateRecord& r, const Vec& x, const Vec&) {
    last = p.hypergradient(x).norm();
    if (calls < 0 && last <= 1e-4) calls = static_cast<std::int64_t>(r.oracle_calls.total());
  });
  return calls;
}

Outcome Coreset() {
  const auto start = Clock::now();
  const BenchmarkProblem p = make_coreset(0);
  const SmoothnessConstants c = estimate_constants(p.oracles, p.x0, p.y0, 1.0, 100, 0);
  const std::int64_t K = 1000;
  const Schedule s = schedule_cor1(K, *c.L_f, *c.L_h);
  const double C0 = 1.0;
  double last_ours = 0, last_aid = 0, last_bome = 0;
  const std::int64_t ours = CallsToTarget(p, [&](const IterationObserver& obs) {
    const WarmStartResult ws =
        warm_start(p.oracles, p.x0, p.y0, s.alpha, C0, 10000, 1.0 / *p.oracles.constants.L_yy_g);
    SolverConfig cfg;
    cfg.K = K;
    cfg.alpha = s.alpha;
    cfg.gamma = s.gamma;
    cfg.C0 = C0;
    Keep("coreset ours_cor1 K=1000", run(p.oracles, cfg, p.x0, ws.y, obs));
  }, last_ours);
  BaselineConfig bc;
  bc.K = 5000;
  const std::int64_t aid = CallsToTarget(
      p, [&](const IterationObserver& obs) { aid_run(p, p.x0, bc, std::nullopt, obs); }, last_aid);
  bc.method = BaselineMethod::BOME;
  const std::int64_t bome = CallsToTarget(
      p, [&](const IterationObserver& obs) { bome_run(p, p.x0, p.y0, bc, obs); }, last_bome);
  const double secs = Seconds(start);
  auto beats = [ours](std::int64_t other) { return other < 0 || ours < other; };
  return {ours >= 0 && beats(aid) && beats(bome) && secs <= 60.0,
          Fmt("oracle calls to |grad l| <= 1e-4: ours %lld, aid %lld, bome %lld "
              "(-1 = not reached; final norms %.1e/%.1e/%.1e), %.1fs",
              static_cast<long long>(ours), static_cast<long long>(aid),
              static_cast<long long>(bome), last_ours, last_aid, last_bome, secs)};
}

Outcome Hypercleaning() {
  const auto start = Clock::now();
  const DhcParams params;
  const BenchmarkProblem p = make_dhc(params);
  constexpr double kTol = 1e-12;
  constexpr std::int64_t kRefitIters = 100000;
  const Vec y_uniform =
      solve_lower_level(p.oracles, Vec::Zero(params.n_train), p.y0, kTol, kRefitIters);
  const double base = p.test_accuracy(y_uniform);

  const SmoothnessConstants c = estimate_constants(p.oracles, p.x0, p.y0, 0.5, 50, 0);
  const std::int64_t K = 20000;
  const Schedule s = schedule_cor1(K, *c.L_f, *c.L_h);
  const WarmStartResult ws =
      warm_start(p.oracles, p.x0, p.y0, s.alpha, 1.0, 100000, 1.0 / *c.L_yy_g);
  SolverConfig cfg;
  cfg.K = K;
  cfg.alpha = s.alpha;
  cfg.gamma = s.gamma;
  cfg.C0 = 1.0;
  const Trace t = run(p.oracles, cfg, p.x0, ws.y);
  Keep("dhc ours_cor1 K=20000", t);
  const Vec y_refit = solve_lower_level(p.oracles, t.final_x, t.final_y, kTol, kRefitIters);
  const double ours = p.test_accuracy(y_refit);
  const double secs = Seconds(start);
  return {ours - base >= 0.02 && secs <= 180.0,
          Fmt("test accuracy uniform %.4f, ours %.4f (final iterate %.4f), gain %.1f pp, %.1fs",
              base, ours, p.test_accuracy(t.final_y), 100.0 * (ours - base), secs)};
}

Outcome Determinism() {
  const fs::path root = fs::temp_directory_path() / ("bipgd_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream(root / "config.json") << R"({
  "problem": {"name": "sc_synthetic", "seed": 0},
  "methods": ["ours_cor1"],
  "K_list": [1000],
  "emit_plot_data": false
})";
  }
  std::string csv[2];
  int codes[2];
  for (int i = 0; i < 2; ++i) {
    h::GlobalOptions o;
    o.output_dir = (root / ("out" + std::to_string(i))).string();
    std::ostringstream log;
    codes[i] = h::cmd_run((root / "config.json").string(), o, log);
    std::ifstream in(root / ("out" + std::to_string(i)) / "ours_cor1_K1000.csv", std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    csv[i] = buf.str();
  }
  fs::remove_all(root);
  const bool same = codes[0] == 0 && codes[1] == 0 && !csv[0].empty() && csv[0] == csv[1];
  return {same, Fmt("%zu bytes per trace, %s", csv[0].size(), same ? "identical" : "different")};
}

Outcome SubproblemKkt() {
  std::size_t records = 0;
  double worst_feas = 0.0, worst_cs = 0.0;
  bool ok = true;
  for (const auto& [label, trace] : g_runs) {
    for (const IterateRecord& r : trace.records) {
      ++records;
      const double feas = r.constraint_slack / std::max(1.0, r.alpha_rho);
      const double cs = std::abs(r.lambda * r.constraint_slack) /
                        std::max(1.0, r.lambda * r.alpha_rho);
      worst_feas = std::max(worst_feas, feas);
      worst_cs = std::max(worst_cs, cs);
      ok = ok && feas <= 1e-8 && cs <= 1e-8 && r.lambda >= 0.0;
    }
  }
  return {ok && records > 0,
          Fmt("%zu records over %zu runs, worst scaled slack %.2e, complementarity %.2e", records,
              g_runs.size(), worst_feas, worst_cs)};
}

}  // namespace

int main() {
  Outcome results[11];
  results[1] = QpEquivalence();
  results[3] = OracleValidity();
  const Sweep cor1 = RunSweep(h::MethodKind::OursCor1);
  results[4] = RateCheck(cor1, true);
  const Sweep cor3 = RunSweep(h::MethodKind::OursCor3);
  results[5] = RateCheck(cor3, false);
  results[6] = DescentBound(cor1);
  results[7] = Regularity();
  results[8] = Coreset();
  results[9] = Hypercleaning();
  results[10] = Determinism();
  results[2] = SubproblemKkt();

  static const char* kNames[] = {"",
                                 "qp_closed_form",
                                 "subproblem_kkt",
                                 "oracle_validity",
                                 "rate_cor1",
                                 "rate_cor3",
                                 "descent_bound",
                                 "regularity",
                                 "coreset_comparison",
                                 "hypercleaning_accuracy",
                                 "determinism"};
  int failures = 0;
  for (int i = 1; i <= 10; ++i) {
    std::printf("AC%-2d %-22s %s  %s\n", i, kNames[i], results[i].passed ? "PASS" : "FAIL",
                results[i].detail.c_str());
    if (!results[i].passed) ++failures;
  }
  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
