// Copyright 2026 The bipgd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bipgd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "bipgd/core_qp.hpp"
#include "bipgd/metrics.hpp"

namespace bipgd::harness {
namespace fs = std::filesystem;

namespace {

int LineOfOffset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

// Line of the first occurrence of "key" in the source, or 1.
int LineOfKey(const std::string& text, const std::string& key) {
  if (key.empty()) return 1;
  const std::size_t pos = text.find("\"" + key + "\"");
  return pos == std::string::npos ? 1 : LineOfOffset(text, pos);
}

const std::set<std::string> kProblemNames = {"sc_synthetic", "nc_synthetic", "coreset", "dhc",
                                             "regularity"};

MethodKind MethodFromString(const std::string& name) {
  if (name == "ours_cor1") return MethodKind::OursCor1;
  if (name == "ours_cor3") return MethodKind::OursCor3;
  if (name == "aid") return MethodKind::Aid;
  if (name == "bome") return MethodKind::Bome;
  throw ConfigError("unknown method '" + name + "' (expected ours_cor1, ours_cor3, aid or bome)");
}

bool IsOurs(MethodKind kind) { return kind == MethodKind::OursCor1 || kind == MethodKind::OursCor3; }

const std::set<std::string> kOursKeys = {"alpha",      "gamma",     "C0",
                                         "L_f",        "L_h",       "denom_tol",
                                         "warm_start_budget", "warm_start_step", "record_every"};
const std::set<std::string> kBaselineKeys = {"outer_step", "inner_iters", "inner_step",
                                             "cg_tol",     "cg_max_iters", "bome_eta",
                                             "record_every"};

std::set<std::string> ProblemKeys(const std::string& name) {
  if (name == "sc_synthetic" || name == "nc_synthetic") return {"name", "seed", "n"};
  if (name == "regularity") return {"name", "seed", "n", "p", "m"};
  if (name == "dhc") {
    return {"name",   "seed",  "n_features", "n_classes",        "n_train",
            "n_val",  "n_test", "corruption", "class_separation", "regularizer"};
  }
  return {"name", "seed"};
}

json ConfigToJson(const ExperimentConfig& config) {
  json j;
  const ProblemSpec& p = config.problem;
  json problem = {{"name", p.name}, {"seed", p.seed}};
  if (p.name == "sc_synthetic" || p.name == "nc_synthetic") problem["n"] = p.n;
  if (p.name == "regularity") {
    problem["n"] = p.n;
    problem["p"] = p.p;
    problem["m"] = p.m;
  }
  if (p.name == "dhc") {
    problem["n_features"] = p.dhc.n_features;
    problem["n_classes"] = p.dhc.n_classes;
    problem["n_train"] = p.dhc.n_train;
    problem["n_val"] = p.dhc.n_val;
    problem["n_test"] = p.dhc.n_test;
    problem["corruption"] = p.dhc.corruption;
    problem["class_separation"] = p.dhc.class_separation;
    problem["regularizer"] = p.dhc.regularizer;
  }
  j["problem"] = problem;
  j["methods"] = json::array();
  for (const MethodSpec& m : config.methods) {
    json entry = m.overrides;
    entry["name"] = to_string(m.kind);
    j["methods"].push_back(entry);
  }
  j["K_list"] = config.K_list;
  j["seed"] = config.seed;
  j["output_dir"] = config.output_dir;
  j["emit_plot_data"] = config.emit_plot_data;
  j["C0"] = config.C0;
  j["record_every"] = config.record_every ? json(*config.record_every) : json(nullptr);
  return j;
}

json RecordToJson(const IterateRecord& r) {
  return {{"k", r.k},
          {"f", r.f_val},
          {"h", r.h_val},
          {"grad_h_sq", r.grad_h_sq},
          {"delta_sq", r.delta_sq},
          {"lambda", r.lambda},
          {"kkt_stationarity", r.kkt_stationarity},
          {"constraint_slack", r.constraint_slack},
          {"oracle_calls", r.oracle_calls.total()}};
}

json CountsToJson(const OracleCounts& c) {
  return {{"grad_f", c.grad_f}, {"grad_g", c.grad_g}, {"hvp", c.hvp}, {"total", c.total()}};
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string CsvName(const RunOutcome& o) {
  return fmt::format("{}_K{}.csv", to_string(o.method), o.K);
}

std::string Status(const RunOutcome& o) {
  if (o.diverged) return "diverged";
  return o.error.empty() ? "ok" : "failed";
}

}  // namespace

const char* to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::OursCor1: return "ours_cor1";
    case MethodKind::OursCor3: return "ours_cor3";
    case MethodKind::Aid: return "aid";
    case MethodKind::Bome: return "bome";
  }
  return "?";
}

BenchmarkProblem make_problem(const ProblemSpec& spec) {
  if (spec.name == "sc_synthetic") return make_sc_synthetic(spec.seed, spec.n);
  if (spec.name == "nc_synthetic") return make_nc_synthetic(spec.seed, spec.n);
  if (spec.name == "coreset") return make_coreset(spec.seed);
  if (spec.name == "regularity") return make_regularity_example(spec.seed, spec.p, spec.m, spec.n);
  if (spec.name == "dhc") {
    DhcParams params = spec.dhc;
    params.seed = spec.seed;
    return make_dhc(params);
  }
  throw ConfigError("unknown problem '" + spec.name + "'");
}

json problem_to_json(const ProblemSpec& spec, const BenchmarkProblem& problem) {
  json j = {{"name", problem.name},
            {"seed", spec.seed},
            {"dim_x", problem.metadata.dim_x},
            {"dim_y", problem.metadata.dim_y},
            {"strongly_convex", problem.strongly_convex}};
  if (problem.metadata.condition_number) j["condition_number"] = *problem.metadata.condition_number;
  if (problem.metadata.corruption_rate) j["corruption_rate"] = *problem.metadata.corruption_rate;
  for (const auto& [key, value] : problem.metadata.extra) j[key] = value;
  const SmoothnessConstants& c = problem.oracles.constants;
  json constants = json::object();
  auto put = [&constants](const char* name, const std::optional<double>& v) {
    if (v) constants[name] = *v;
  };
  put("L_f", c.L_f);
  put("L_h", c.L_h);
  put("C_f", c.C_f);
  put("C_g", c.C_g);
  put("L_yy_g", c.L_yy_g);
  put("L_yx_g", c.L_yx_g);
  j["constants"] = constants;
  return j;
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigFileError(source, LineOfOffset(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
  }
  auto fail = [&](const std::string& key, const std::string& message) -> void {
    throw ConfigFileError(source, LineOfKey(text, key), message);
  };
  if (!j.is_object()) fail("", "top level must be a JSON object");

  static const std::set<std::string> kTopKeys = {"problem", "methods",        "K_list", "seed",
                                                 "output_dir", "emit_plot_data", "C0",
                                                 "record_every"};
  for (const auto& [key, value] : j.items()) {
    if (!kTopKeys.count(key)) fail(key, "unknown key '" + key + "'");
  }

  ExperimentConfig config;
  try {
    config.seed = j.value("seed", std::uint64_t{0});
    config.output_dir = j.value("output_dir", std::string("results"));
    config.emit_plot_data = j.value("emit_plot_data", true);
    config.C0 = j.value("C0", 1.0);
    if (j.contains("record_every") && !j["record_every"].is_null()) {
      config.record_every = j["record_every"].get<std::int64_t>();
    }
  } catch (const json::exception& e) {
    fail("", std::string("invalid top-level value: ") + e.what());
  }
  if (!(config.C0 > 0.0)) fail("C0", "C0 must be positive");
  if (config.record_every && *config.record_every < 1) fail("record_every", "record_every must be at least 1");

  // problem
  if (!j.contains("problem")) fail("", "missing required key 'problem'");
  json problem = j["problem"];
  if (problem.is_string()) problem = json{{"name", problem}};
  if (!problem.is_object() || !problem.contains("name") || !problem["name"].is_string()) {
    fail("problem", "'problem' must be a name or an object with a 'name'");
  }
  ProblemSpec& spec = config.problem;
  spec.name = problem["name"].get<std::string>();
  if (!kProblemNames.count(spec.name)) fail("problem", "unknown problem '" + spec.name + "'");
  const std::set<std::string> allowed = ProblemKeys(spec.name);
  for (const auto& [key, value] : problem.items()) {
    if (!allowed.count(key)) fail(key, "key '" + key + "' does not apply to problem " + spec.name);
  }
  try {
    spec.seed = problem.value("seed", config.seed);
    spec.n = problem.value("n", spec.n);
    spec.p = problem.value("p", spec.p);
    spec.m = problem.value("m", spec.m);
    spec.dhc.n_features = problem.value("n_features", spec.dhc.n_features);
    spec.dhc.n_classes = problem.value("n_classes", spec.dhc.n_classes);
    spec.dhc.n_train = problem.value("n_train", spec.dhc.n_train);
    spec.dhc.n_val = problem.value("n_val", spec.dhc.n_val);
    spec.dhc.n_test = problem.value("n_test", spec.dhc.n_test);
    spec.dhc.corruption = problem.value("corruption", spec.dhc.corruption);
    spec.dhc.class_separation = problem.value("class_separation", spec.dhc.class_separation);
    spec.dhc.regularizer = problem.value("regularizer", spec.dhc.regularizer);
  } catch (const json::exception& e) {
    fail("problem", std::string("invalid problem parameter: ") + e.what());
  }
  if (spec.n < 1 || spec.p < 1 || spec.m < 1) fail("problem", "problem dimensions must be positive");
  if (!(spec.dhc.corruption >= 0.0 && spec.dhc.corruption < 1.0)) {
    fail("corruption", "corruption must lie in [0, 1)");
  }

  // K_list
  if (!j.contains("K_list") || !j["K_list"].is_array() || j["K_list"].empty()) {
    fail("K_list", "'K_list' must be a non-empty array of positive integers");
  }
  for (const json& k : j["K_list"]) {
    if (!k.is_number_integer() || k.get<std::int64_t>() < 1) {
      fail("K_list", "'K_list' entries must be positive integers");
    }
    config.K_list.push_back(k.get<std::int64_t>());
  }

  // methods
  if (!j.contains("methods") || !j["methods"].is_array() || j["methods"].empty()) {
    fail("methods", "'methods' must be a non-empty array");
  }
  std::optional<bool> strongly_convex;
  for (const json& entry : j["methods"]) {
    MethodSpec method;
    std::string name;
    if (entry.is_string()) {
      name = entry.get<std::string>();
    } else if (entry.is_object() && entry.contains("name") && entry["name"].is_string()) {
      name = entry["name"].get<std::string>();
      method.overrides = entry;
      method.overrides.erase("name");
    } else {
      fail("methods", "each method must be a name or an object with a 'name'");
    }
    try {
      method.kind = MethodFromString(name);
    } catch (const ConfigError& e) {
      fail(name, e.what());
    }
    const std::set<std::string>& keys = IsOurs(method.kind) ? kOursKeys : kBaselineKeys;
    for (const auto& [key, value] : method.overrides.items()) {
      if (!keys.count(key)) fail(key, "override '" + key + "' does not apply to method " + name);
      if (!value.is_number()) fail(key, "override '" + key + "' must be a number");
      if (!(value.get<double>() > 0.0)) fail(key, "override '" + key + "' must be positive");
    }
    if (method.kind == MethodKind::Aid) {
      if (!strongly_convex) strongly_convex = make_problem(spec).strongly_convex;
      if (!*strongly_convex) {
        fail(name, "method aid requires a strongly convex lower level; problem " + spec.name +
                       " is not");
      }
    }
    if (method.kind == MethodKind::Bome && spec.name == "dhc") {
      // grad_x_g is available for every generator; nothing to check.
    }
    config.methods.push_back(std::move(method));
  }
  return config;
}

RunOutcome run_method(const BenchmarkProblem& problem, const MethodSpec& method, std::int64_t K,
                      const ExperimentConfig& config) {
  RunOutcome out;
  out.method = method.kind;
  out.K = K;
  const json& ov = method.overrides;
  const auto started = std::chrono::steady_clock::now();
  std::optional<std::int64_t> record_every = config.record_every;
  if (ov.contains("record_every")) record_every = ov["record_every"].get<std::int64_t>();

  json& r = out.resolved;
  r["method"] = to_string(method.kind);
  r["K"] = K;
  r["seed"] = config.seed;

  try {
    if (IsOurs(method.kind)) {
      const bool cor1 = method.kind == MethodKind::OursCor1;
      SmoothnessConstants c = problem.oracles.constants;
      std::string source = "problem";
      if (!c.L_f || (cor1 && !c.L_h)) {
        c = estimate_constants(problem.oracles, problem.x0, problem.y0, 1.0, 100, config.seed);
        source = "estimated";
      }
      const double L_f = ov.value("L_f", *c.L_f);
      const double L_h = cor1 ? ov.value("L_h", *c.L_h) : c.L_h.value_or(0.0);
      const Schedule s = cor1 ? schedule_cor1(K, L_f, L_h) : schedule_cor3(K, L_f);

      SolverConfig sc;
      sc.K = K;
      sc.alpha = ov.value("alpha", s.alpha);
      sc.gamma = ov.value("gamma", s.gamma);
      sc.C0 = ov.value("C0", config.C0);
      sc.rho_variant = cor1 ? RhoVariant::Regular : RhoVariant::General;
      sc.denom_tol = ov.value("denom_tol", kDefaultDenomTol);
      sc.warm_start_budget = ov.value("warm_start_budget", sc.warm_start_budget);
      const std::optional<double>& L_yy = problem.oracles.constants.L_yy_g;
      sc.warm_start_step = ov.value("warm_start_step", L_yy && *L_yy > 0.0 ? 1.0 / *L_yy : 1e-2);
      sc.seed = config.seed;
      sc.record_every = record_every.value_or(sc.resolved_record_every());
      sc.validate();

      r["schedule"] = cor1 ? "cor1" : "cor3";
      r["alpha"] = sc.alpha;
      r["gamma"] = sc.gamma;
      r["C0"] = sc.C0;
      r["rho_variant"] = to_string(sc.rho_variant);
      r["denom_tol"] = sc.denom_tol;
      r["warm_start_budget"] = sc.warm_start_budget;
      r["warm_start_step"] = *sc.warm_start_step;
      r["record_every"] = *sc.record_every;
      r["L_f"] = L_f;
      if (cor1) r["L_h"] = L_h;
      r["constants_source"] = source;

      const WarmStartResult ws = warm_start(problem.oracles, problem.x0, problem.y0, sc.alpha,
                                            sc.C0, sc.warm_start_budget, *sc.warm_start_step);
      r["warm_start_iterations"] = ws.iterations;
      out.trace = run(problem.oracles, sc, problem.x0, ws.y);
      if (out.trace.config.h0) r["h0"] = *out.trace.config.h0;
    } else {
      BaselineConfig bc;
      bc.method = method.kind == MethodKind::Aid ? BaselineMethod::AID : BaselineMethod::BOME;
      bc.K = K;
      bc.outer_step = ov.value("outer_step", bc.outer_step);
      bc.inner_iters = ov.value("inner_iters", bc.inner_iters);
      if (ov.contains("inner_step")) bc.inner_step = ov["inner_step"].get<double>();
      bc.cg_tol = ov.value("cg_tol", bc.cg_tol);
      bc.cg_max_iters = ov.value("cg_max_iters", bc.cg_max_iters);
      bc.bome_eta = ov.value("bome_eta", bc.bome_eta);
      bc.record_every = record_every.value_or(std::max<std::int64_t>(1, K / 10000));
      bc.validate();

      r["outer_step"] = bc.outer_step;
      r["inner_iters"] = bc.inner_iters;
      r["inner_step"] = bc.resolved_inner_step(problem.oracles);
      r["record_every"] = *bc.record_every;
      if (bc.method == BaselineMethod::AID) {
        r["cg_tol"] = bc.cg_tol;
        r["cg_max_iters"] = bc.cg_max_iters;
        out.trace = aid_run(problem, problem.x0, bc);
      } else {
        r["bome_eta"] = bc.bome_eta;
        out.trace = bome_run(problem, problem.x0, problem.y0, bc);
      }
    }
  } catch (const DivergenceError& e) {
    out.diverged = true;
    out.error = e.what();
    out.trace = e.partial();
  } catch (const WarmStartError& e) {
    out.error = e.what();
  }
  out.trace.problem_name = problem.name;
  out.trace.schedule_name = to_string(method.kind);
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

std::string trace_csv(const Trace& trace) {
  std::string csv = kTraceCsvHeader;
  csv += '\n';
  for (const IterateRecord& r : trace.records) {
    csv += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{},{}\n", r.k,
                       r.f_val, r.h_val, r.grad_h_sq, r.delta_sq, r.lambda, r.kkt_stationarity,
                       r.oracle_calls.grad_f, r.oracle_calls.grad_g, r.oracle_calls.hvp);
  }
  return csv;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out.flush()) throw Error("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string render_svg(const std::string& title, const std::string& y_label,
                       const std::vector<PlotSeries>& series) {
  constexpr double kWidth = 720, kHeight = 440;
  constexpr double kLeft = 80, kRight = 180, kTop = 40, kBottom = 50;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};

  double x_max = 1.0, log_min = 0.0, log_max = 0.0;
  bool any = false;
  for (const PlotSeries& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!(y > 0.0) || !std::isfinite(y)) continue;
      const double ly = std::log10(y);
      if (!any) log_min = log_max = ly;
      log_min = std::min(log_min, ly);
      log_max = std::max(log_max, ly);
      x_max = std::max(x_max, x);
      any = true;
    }
  }
  log_min = std::floor(log_min);
  log_max = std::ceil(log_max);
  if (log_max <= log_min) log_max = log_min + 1;
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + plot_w * x / x_max; };
  auto py = [&](double ly) { return kTop + plot_h * (log_max - ly) / (log_max - log_min); };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"24\" font-size=\"15\">{}</text>\n",
      kWidth, kHeight, kLeft, title);
  svg += fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
      kLeft, kTop, plot_w, plot_h);
  const int step = std::max(1, static_cast<int>((log_max - log_min) / 8));
  for (int e = static_cast<int>(log_min); e <= static_cast<int>(log_max); e += step) {
    const double y = py(e);
    svg += fmt::format(
        "<line x1=\"{}\" y1=\"{:.1f}\" x2=\"{}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>\n"
        "<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">1e{}</text>\n",
        kLeft, y, kLeft + plot_w, y, kLeft - 6, y + 4, e);
  }
  for (int i = 0; i <= 4; ++i) {
    const double xv = x_max * i / 4.0;
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{:.0f}</text>\n",
                       px(xv), kTop + plot_h + 18, xv);
  }
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">iteration k</text>\n",
                     kLeft + plot_w / 2, kHeight - 10);
  svg += fmt::format(
      "<text x=\"16\" y=\"{:.1f}\" transform=\"rotate(-90 16 {:.1f})\" "
      "text-anchor=\"middle\">{}</text>\n",
      kTop + plot_h / 2, kTop + plot_h / 2, y_label);

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    std::string points;
    for (const auto& [x, y] : series[i].points) {
      if (!(y > 0.0) || !std::isfinite(y)) continue;
      points += fmt::format("{:.1f},{:.1f} ", px(x), py(std::log10(y)));
    }
    svg += fmt::format(
        "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color,
        points);
    const double ly = kTop + 16 + 18 * static_cast<double>(i);
    svg += fmt::format(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"3\"/>\n"
        "<text x=\"{}\" y=\"{}\">{}</text>\n",
        kWidth - kRight + 12, ly, kWidth - kRight + 32, ly, color, kWidth - kRight + 38, ly + 4,
        series[i].label);
  }
  svg += "</svg>\n";
  return svg;
}

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.passed; });
}

json ValidationReport::to_json() const {
  json j = {{"problem", problem}, {"passed", passed()}, {"checks", json::array()}};
  for (const ValidationCheck& c : checks) {
    j["checks"].push_back(
        {{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"passed", c.passed}});
  }
  return j;
}

ValidationReport validate_problem(const BenchmarkProblem& problem, std::uint64_t seed) {
  constexpr int kPoints = 10;
  const ProblemOracles& o = problem.oracles;
  ValidationReport report;
  report.problem = problem.name;

  double fd = 0.0, sym = 0.0, qp = 0.0, lower = 0.0, hyper = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    const std::uint64_t point_seed = seed * 1000003ULL + static_cast<std::uint64_t>(i);
    const auto [x, y] = sample_point(problem, point_seed);
    fd = std::max(fd, finite_diff_check(problem, x, y, 1e-6, point_seed).max_rel_error);
    sym = std::max(sym, hvp_symmetry_error(o, x, y, point_seed));

    const BlockVec gf = o.grad_f(x, y);
    const BlockVec gh = grad_h(o, x, y);
    const double h0 = eval_h(o, x, y);
    for (double alpha : {0.01, 0.1, 1.0}) {
      for (double rho : {rho_regular(gh), rho_general(gh, h0)}) {
        const double lambda = multiplier(gf, gh, rho, alpha);
        const BlockVec delta = direction(gf, gh, lambda);
        const QpSolution ref = qp_brute_oracle(gf, gh, rho, alpha);
        const double scale = std::max({1.0, std::abs(ref.lambda), ref.delta.x.cwiseAbs().maxCoeff(),
                                       ref.delta.y.cwiseAbs().maxCoeff()});
        const double err = std::max({std::abs(lambda - ref.lambda),
                                     (delta.x - ref.delta.x).cwiseAbs().maxCoeff(),
                                     (delta.y - ref.delta.y).cwiseAbs().maxCoeff()});
        qp = std::max(qp, err / scale);
      }
    }
    if (problem.lower_solution) {
      const Vec y_star = problem.lower_solution(x);
      lower = std::max(lower, o.grad_y_g(x, y_star).norm());
      if (problem.hypergradient && problem.strongly_convex) {
        BaselineConfig cfg;
        const Vec aid = aid_hypergradient(o, x, y_star, cfg);
        const Vec exact = problem.hypergradient(x);
        hyper = std::max(hyper, (aid - exact).norm() / std::max(1.0, exact.norm()));
      }
    }
  }
  auto add = [&report](const char* name, double value, double threshold) {
    report.checks.push_back({name, value, threshold, value <= threshold});
  };
  add("finite_difference", fd, 1e-5);
  add("hvp_symmetry", sym, 1e-10);
  add("qp_closed_form", qp, 1e-8);
  if (problem.lower_solution) add("lower_solution", lower, 1e-8);
  if (problem.hypergradient && problem.strongly_convex) add("aid_hypergradient", hyper, 1e-4);
  return report;
}

namespace {

struct LoadedExperiment {
  ExperimentConfig config;
  fs::path output_dir;
};

std::optional<LoadedExperiment> Load(const std::string& config_path, const GlobalOptions& options,
                                     std::ostream& log) {
  try {
    LoadedExperiment e{parse_experiment_config(ReadFile(config_path), config_path), {}};
    if (options.record_every) e.config.record_every = *options.record_every;
    if (options.output_dir) e.config.output_dir = *options.output_dir;
    e.output_dir = e.config.output_dir;
    return e;
  } catch (const ConfigError& err) {
    log << "error: " << err.what() << "\n";
    return std::nullopt;
  }
}

std::vector<RunOutcome> RunAll(const BenchmarkProblem& problem, const ExperimentConfig& config,
                               int jobs, std::ostream& log) {
  std::vector<std::pair<const MethodSpec*, std::int64_t>> work;
  for (const MethodSpec& m : config.methods) {
    for (std::int64_t K : config.K_list) work.emplace_back(&m, K);
  }
  std::vector<RunOutcome> outcomes(work.size());
  std::vector<std::exception_ptr> errors(work.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      try {
        outcomes[i] = run_method(problem, *work[i].first, work[i].second, config);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp<int>(jobs, 1, static_cast<int>(work.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    const RunOutcome& o = outcomes[i];
    log << fmt::format("{} K={}: {} ({:.2f}s)\n", to_string(o.method), o.K, Status(o),
                       o.wall_seconds);
    if (!o.error.empty()) log << "  " << o.error << "\n";
  }
  return outcomes;
}

json RunSummary(const BenchmarkProblem& problem, const RunOutcome& o) {
  json j = {{"method", to_string(o.method)},
            {"K", o.K},
            {"status", Status(o)},
            {"csv", CsvName(o)},
            {"resolved", o.resolved},
            {"wall_seconds", o.wall_seconds},
            {"oracle_calls", CountsToJson(o.trace.oracle_calls)}};
  if (!o.error.empty()) j["error"] = o.error;
  const TraceTotals& t = o.trace.totals;
  if (t.iterations > 0) {
    j["totals"] = {{"iterations", t.iterations},
                   {"mean_delta_sq", t.mean_delta_sq()},
                   {"mean_grad_h_sq", t.mean_grad_h_sq()},
                   {"mean_h", t.mean_h()}};
  }
  if (!o.trace.records.empty()) {
    j["final"] = RecordToJson(o.trace.records.back());
    const auto criterion = o.method == MethodKind::OursCor3
                               ? BestIterateCriterion::MaxOfHAndStationarity
                               : BestIterateCriterion::MaxOfGradHAndStationarity;
    const std::int64_t best = best_iterate(o.trace, criterion);
    for (const IterateRecord& r : o.trace.records) {
      if (r.k == best) j["best"] = RecordToJson(r);
    }
  }
  if (o.trace.final_x.size() == problem.oracles.dim_x && !o.diverged && o.error.empty()) {
    json point;
    if (problem.hypergradient) {
      point["hypergradient_norm"] = problem.hypergradient(o.trace.final_x).norm();
    }
    if (problem.test_accuracy) point["test_accuracy"] = problem.test_accuracy(o.trace.final_y);
    if (!point.empty()) j["final_point"] = point;
  }
  return j;
}

void WriteTraces(const fs::path& dir, const std::vector<RunOutcome>& outcomes) {
  for (const RunOutcome& o : outcomes) write_file_atomic(dir / CsvName(o), trace_csv(o.trace));
}

int ExitCode(const std::vector<RunOutcome>& outcomes) {
  int code = kExitOk;
  for (const RunOutcome& o : outcomes) {
    if (o.diverged) return kExitDiverged;
    if (!o.error.empty()) code = kExitFailed;
  }
  return code;
}

}  // namespace

int cmd_run(const std::string& config_path, const GlobalOptions& options, std::ostream& log) {
  const auto loaded = Load(config_path, options, log);
  if (!loaded) return kExitConfig;
  const ExperimentConfig& config = loaded->config;
  const BenchmarkProblem problem = make_problem(config.problem);
  const std::vector<RunOutcome> outcomes = RunAll(problem, config, options.jobs, log);

  WriteTraces(loaded->output_dir, outcomes);
  json summary = {{"config", ConfigToJson(config)},
                  {"problem", problem_to_json(config.problem, problem)},
                  {"runs", json::array()}};
  for (const RunOutcome& o : outcomes) summary["runs"].push_back(RunSummary(problem, o));
  write_file_atomic(loaded->output_dir / "summary.json", summary.dump(2) + "\n");

  if (config.emit_plot_data) {
    std::vector<PlotSeries> stationarity, feasibility;
    for (const RunOutcome& o : outcomes) {
      const std::string label = fmt::format("{} K={}", to_string(o.method), o.K);
      PlotSeries s{label, {}}, h{label, {}};
      for (const IterateRecord& r : o.trace.records) {
        s.points.emplace_back(static_cast<double>(r.k), r.kkt_stationarity);
        h.points.emplace_back(static_cast<double>(r.k), r.h_val);
      }
      stationarity.push_back(std::move(s));
      feasibility.push_back(std::move(h));
    }
    write_file_atomic(loaded->output_dir / "plot_kkt_stationarity.svg",
                      render_svg(problem.name + ": stationarity", "||grad f + lambda grad h||^2",
                                 stationarity));
    write_file_atomic(loaded->output_dir / "plot_h.svg",
                      render_svg(problem.name + ": lower-level residual", "h = ||grad_y g||^2",
                                 feasibility));
  }
  return ExitCode(outcomes);
}

int cmd_rate_sweep(const std::string& config_path, const GlobalOptions& options,
                   std::ostream& log) {
  const auto loaded = Load(config_path, options, log);
  if (!loaded) return kExitConfig;
  const ExperimentConfig& config = loaded->config;
  const auto [k_min, k_max] = std::minmax_element(config.K_list.begin(), config.K_list.end());
  if (config.K_list.size() < 3 || *k_max < 100 * *k_min) {
    log << "error: " << config_path
        << ": rate sweeps need at least 3 K values spanning at least two decades\n";
    return kExitConfig;
  }
  for (const MethodSpec& m : config.methods) {
    if (!IsOurs(m.kind)) {
      log << "error: " << config_path << ": rate sweeps support ours_cor1 and ours_cor3 only\n";
      return kExitConfig;
    }
  }
  const BenchmarkProblem problem = make_problem(config.problem);
  const std::vector<RunOutcome> outcomes = RunAll(problem, config, options.jobs, log);
  WriteTraces(loaded->output_dir, outcomes);
  const int run_code = ExitCode(outcomes);

  json rates = {{"config", ConfigToJson(config)},
                {"problem", problem_to_json(config.problem, problem)},
                {"methods", json::array()}};
  bool all_passed = true;
  for (const MethodSpec& m : config.methods) {
    // cor1 runs are judged on ||Delta||^2 and ||grad h||^2, cor3 runs on
    // ||Delta||^2 and h.
    const bool cor1 = m.kind == MethodKind::OursCor1;
    const double threshold = cor1 ? -0.4 : -0.2;
    const std::vector<std::string> metrics = cor1
        ? std::vector<std::string>{"mean_delta_sq", "mean_grad_h_sq"}
        : std::vector<std::string>{"mean_delta_sq", "mean_h"};
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    json points = json::array();
    for (const RunOutcome& o : outcomes) {
      if (o.method != m.kind || o.trace.totals.iterations == 0) continue;
      const TraceTotals& t = o.trace.totals;
      const double K = static_cast<double>(o.K);
      series["mean_delta_sq"].emplace_back(K, t.mean_delta_sq());
      series["mean_grad_h_sq"].emplace_back(K, t.mean_grad_h_sq());
      series["mean_h"].emplace_back(K, t.mean_h());
      points.push_back({{"K", o.K},
                        {"mean_delta_sq", t.mean_delta_sq()},
                        {"mean_grad_h_sq", t.mean_grad_h_sq()},
                        {"mean_h", t.mean_h()}});
    }
    json entry = {{"method", to_string(m.kind)}, {"points", points}, {"slopes", json::object()}};
    bool passed = run_code == kExitOk;
    for (const std::string& metric : metrics) {
      double slope = std::numeric_limits<double>::quiet_NaN();
      try {
        slope = rate_slope(series[metric]);
      } catch (const ConfigError&) {
      }
      const bool ok = slope <= threshold;
      passed = passed && ok;
      entry["slopes"][metric] = {{"slope", std::isfinite(slope) ? json(slope) : json(nullptr)},
                                 {"threshold", threshold},
                                 {"passed", ok}};
      log << fmt::format("{} slope({}) = {:.4f} (threshold {}) {}\n", to_string(m.kind), metric,
                         slope, threshold, ok ? "PASS" : "FAIL");
    }
    entry["passed"] = passed;
    all_passed = all_passed && passed;
    rates["methods"].push_back(entry);
  }
  rates["passed"] = all_passed;
  write_file_atomic(loaded->output_dir / "rates.json", rates.dump(2) + "\n");
  if (run_code != kExitOk) return run_code;
  return all_passed ? kExitOk : kExitFailed;
}

int cmd_validate(const BenchmarkProblem& problem, std::uint64_t seed, std::ostream& out,
                 std::ostream& log) {
  const ValidationReport report = validate_problem(problem, seed);
  out << report.to_json().dump(2) << "\n";
  if (report.passed()) return kExitOk;
  for (const ValidationCheck& c : report.checks) {
    if (!c.passed) {
      log << fmt::format("check {} failed: {:.3e} > {:.1e}\n", c.name, c.value, c.threshold);
    }
  }
  return kExitFailed;
}

int cmd_validate(const std::string& problem_name, std::uint64_t seed, std::ostream& out,
                 std::ostream& log) {
  if (!kProblemNames.count(problem_name)) {
    log << "error: unknown problem '" << problem_name << "'\n";
    return kExitConfig;
  }
  ProblemSpec spec;
  spec.name = problem_name;
  spec.seed = seed;
  return cmd_validate(make_problem(spec), seed, out, log);
}

}  // namespace bipgd::harness
