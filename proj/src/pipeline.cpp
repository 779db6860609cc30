// SPDX-License-Identifier: Apache-2.0
#include "linkdistill/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "linkdistill/metrics.hpp"
#include "linkdistill/parallel.hpp"
#include "linkdistill/rng.hpp"

namespace linkdistill {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto s = trim(v);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(out))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto s = trim(v);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const auto s = lower(trim(v));
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<double> to_grid(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  if (out.empty()) throw ConfigError(key + ": empty grid");
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(v)) out.push_back(to_size(key, item));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

bool within(const std::vector<double>& values, const std::vector<double>& allowed) {
  return std::all_of(values.begin(), values.end(), [&](double v) {
    return std::find(allowed.begin(), allowed.end(), v) != allowed.end();
  });
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Runs fn(0..n-1) on up to `jobs` threads. Each worker gets an equal share
/// of the OpenMP threads. The first failure, in task order, is rethrown.
template <class Fn>
void run_tasks(std::size_t n, std::size_t jobs, Fn&& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, n));
  std::vector<std::exception_ptr> errors(n);
  if (workers == 1) {
    for (std::size_t t = 0; t < n; ++t) {
      try {
        fn(t);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  } else {
    const int per_worker = std::max(1, par::max_threads() / static_cast<int>(workers));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        par::set_num_threads(per_worker);
        for (std::size_t t = next++; t < n; t = next++) {
          try {
            fn(t);
          } catch (...) {
            errors[t] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

template <class Fn>
auto tagged(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("[") + stage + "] " + e.what());
  }
}

std::map<std::size_t, double> hits_table(std::span<const double> pos, std::span<const double> neg,
                                         std::span<const std::size_t> ks) {
  std::map<std::size_t, double> out;
  for (auto k : ks)
    if (k >= 1 && k <= neg.size()) out[k] = hits_at_k(pos, neg, k);
  return out;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(10);
  ss << v;
  return ss.str();
}

}  // namespace

// ---- config ------------------------------------------------------------------

std::vector<DistillConfig> DistillGrid::expand(const DistillConfig& base) const {
  auto sorted = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  const auto as = sorted(alpha), bs = sorted(beta), ds = sorted(delta);
  if (as.empty() || bs.empty() || ds.empty()) throw ConfigError("distill grid has an empty axis");
  std::vector<DistillConfig> out;
  for (double a : as)
    for (double b : bs)
      for (double d : ds) {
        if (a == 0.0 && d != ds.front()) continue;
        DistillConfig c = base;
        c.alpha = a;
        c.beta = b;
        c.delta = d;
        out.push_back(c);
      }
  return out;
}

void apply_distill_key(DistillConfig& cfg, DistillGrid& grid, const std::string& key,
                       const std::string& value) {
  const std::string k = "distill." + key;
  if (key == "alpha") grid.alpha = to_grid(k, value);
  else if (key == "beta") grid.beta = to_grid(k, value);
  else if (key == "delta") grid.delta = to_grid(k, value);
  else if (key == "temperature") cfg.temperature = to_double(k, value);
  else if (key == "num_nearby") cfg.num_nearby = to_size(k, value);
  else if (key == "walk_length") cfg.walk_length = to_size(k, value);
  else if (key == "num_random") cfg.num_random = to_size(k, value);
  else if (key == "hidden") cfg.hidden = to_sizes(k, value);
  else if (key == "lr") cfg.lr = to_double(k, value);
  else if (key == "epochs") cfg.epochs = to_size(k, value);
  else if (key == "batch_size") cfg.batch_size = to_size(k, value);
  else if (key == "grad_clip") cfg.grad_clip = to_double(k, value);
  else if (key == "eval_k") cfg.eval_k = to_size(k, value);
  else throw ConfigError("unknown key " + k);
}

void apply_config_entry(RunConfig& cfg, const std::string& raw_key, const std::string& value) {
  const std::string key = trim(raw_key);
  if (key == "seed") cfg.seed = to_size(key, value);
  else if (key == "out_dir") cfg.out_dir = trim(value);
  else if (key == "jobs") cfg.jobs = to_size(key, value);
  else if (key == "verbose") cfg.verbose = to_bool(key, value);
  else if (key == "data.linqs_content") cfg.linqs_content = trim(value);
  else if (key == "data.linqs_cites") cfg.linqs_cites = trim(value);
  else if (key == "data.graph") cfg.graph_path = trim(value);
  else if (key == "data.features") cfg.features_path = trim(value);
  else if (key == "data.split_dir") cfg.split_dir = trim(value);
  else if (key == "split.val_frac") cfg.val_frac = to_double(key, value);
  else if (key == "split.test_frac") cfg.test_frac = to_double(key, value);
  else if (key == "heuristics") {
    cfg.heuristics.clear();
    for (const auto& item : split_list(value)) {
      try {
        cfg.heuristics.push_back(HeuristicKind::parse(item));
      } catch (const std::exception& e) {
        throw ConfigError(key + ": " + e.what());
      }
    }
  } else if (key == "guidance.rounds") cfg.guidance_rounds = to_size(key, value);
  else if (key == "baseline.plain") cfg.train_plain_baseline = to_bool(key, value);
  else if (key == "grid.custom") cfg.allow_custom_grid = to_bool(key, value);
  else if (key == "ensemble.lambda") cfg.lambda_grid = to_grid(key, value);
  else if (key == "ensemble.lr") cfg.ensemble.lr = to_double(key, value);
  else if (key == "ensemble.epochs") cfg.ensemble.epochs = to_size(key, value);
  else if (key == "ensemble.batch_size") cfg.ensemble.batch_size = to_size(key, value);
  else if (key == "ensemble.hidden") cfg.ensemble.hidden = to_size(key, value);
  else if (key == "ensemble.grad_clip") cfg.ensemble.grad_clip = to_double(key, value);
  else if (key == "ensemble.eval_k") cfg.ensemble.eval_k = to_size(key, value);
  else if (key == "eval.k") cfg.eval_ks = to_sizes(key, value);
  else if (key == "eval.overlap_k") cfg.overlap_k = to_size(key, value);
  else if (key.rfind("distill.", 0) == 0) {
    const std::string rest = key.substr(8);
    const auto dot = rest.find('.');
    if (dot == std::string::npos) {
      apply_distill_key(cfg.distill, cfg.grid, rest, value);
    } else {
      const std::string name = lower(rest.substr(0, dot));
      const std::string sub = rest.substr(dot + 1);
      DistillConfig scratch;
      DistillGrid scratch_grid;
      apply_distill_key(scratch, scratch_grid, sub, value);
      cfg.heuristic_overrides[name][sub] = value;
    }
  } else {
    throw ConfigError("unknown key " + key);
  }
}

RunConfig parse_run_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    try {
      apply_config_entry(cfg, t.substr(0, eq), t.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_run_config(in);
}

void RunConfig::validate() const {
  if (heuristics.empty()) throw ConfigError("heuristic list is empty");
  std::set<std::string> names;
  for (const auto& h : heuristics)
    if (!names.insert(lower(h.name())).second)
      throw ConfigError("heuristic " + h.name() + " listed twice");
  for (const auto& [name, _] : heuristic_overrides)
    if (!names.count(name)) throw ConfigError("override for unlisted heuristic " + name);
  if (guidance_rounds == 0) throw ConfigError("guidance.rounds must be >= 1");
  if (eval_ks.empty()) throw ConfigError("eval.k is empty");
  if (lambda_grid.empty()) throw ConfigError("ensemble.lambda grid is empty");
  for (double l : lambda_grid)
    if (l < 0) throw ConfigError("ensemble.lambda must be >= 0");
  if (!allow_custom_grid) {
    auto check = [](const DistillGrid& g, const std::string& who) {
      if (!within(g.alpha, kAlphaGrid) || !within(g.beta, kBetaGrid) ||
          !within(g.delta, kDeltaGrid))
        throw ConfigError(who + " grid leaves the default search space; set grid.custom=1");
    };
    for (const auto& h : heuristics) check(distill_space(h).second, "distill." + lower(h.name()));
    if (!within(lambda_grid, kLambdaGrid))
      throw ConfigError("ensemble.lambda grid leaves the default search space; set grid.custom=1");
  }
  for (const auto& h : heuristics) distill_space(h).first.validate();
  ensemble.validate();
}

std::pair<DistillConfig, DistillGrid> RunConfig::distill_space(const HeuristicKind& kind) const {
  DistillConfig c = distill;
  DistillGrid g = grid;
  const auto it = heuristic_overrides.find(lower(kind.name()));
  if (it != heuristic_overrides.end())
    for (const auto& [key, value] : it->second) apply_distill_key(c, g, key, value);
  return {c, g};
}

std::size_t grid_select(std::span<const GridCandidate> candidates) {
  if (candidates.empty()) throw std::invalid_argument("grid_select: no candidates");
  std::size_t best = 0;
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    const auto& c = candidates[k];
    const auto& b = candidates[best];
    if (c.metric > b.metric || (c.metric == b.metric && c.key < b.key)) best = k;
  }
  return best;
}

std::size_t resolve_jobs(std::size_t requested, std::size_t tasks) {
  std::size_t jobs = requested;
  if (jobs == 0) {
    if (const char* env = std::getenv("LINKDISTILL_JOBS")) {
      try {
        jobs = to_size("LINKDISTILL_JOBS", env);
      } catch (const ConfigError&) {
        jobs = 0;
      }
    }
  }
  if (jobs == 0) jobs = tasks;
  return std::max<std::size_t>(1, std::min(jobs, std::max<std::size_t>(1, tasks)));
}

// ---- run ---------------------------------------------------------------------

RunResult run_pipeline(const RunConfig& cfg) {
  const auto t_start = Clock::now();
  tagged("config", [&] {
    cfg.validate();
    return 0;
  });
  const std::filesystem::path out = cfg.out_dir;
  std::filesystem::create_directories(out);
  std::mutex log_mu;
  auto log = [&](const std::string& msg) {
    if (!cfg.verbose) return;
    std::lock_guard lock(log_mu);
    std::clog << msg << '\n';
  };

  Graph g;
  FeatureMatrix x;
  tagged("load", [&] {
    if (!cfg.linqs_content.empty() || !cfg.linqs_cites.empty()) {
      auto ds = load_linqs(cfg.linqs_content, cfg.linqs_cites);
      g = std::move(ds.graph);
      x = std::move(ds.features);
    } else if (!cfg.graph_path.empty() && !cfg.features_path.empty()) {
      x = load_features(cfg.features_path);
      g = load_graph(cfg.graph_path, x.num_nodes());
    } else {
      throw ConfigError("set data.linqs_content/data.linqs_cites or data.graph/data.features");
    }
    if (x.num_nodes() < g.num_nodes())
      throw ShapeError("features cover " + std::to_string(x.num_nodes()) + " of " +
                       std::to_string(g.num_nodes()) + " nodes");
    return 0;
  });

  RunResult result;
  tagged("split", [&] {
    if (!cfg.split_dir.empty() && std::filesystem::exists(std::filesystem::path(cfg.split_dir) / "meta.txt")) {
      result.split = load_split(cfg.split_dir);
      if (result.split.num_nodes != g.num_nodes())
        throw DataError("split node count does not match the graph");
    } else {
      result.split = make_split(g, cfg.val_frac, cfg.test_frac, derive_seed(cfg.seed, "split"));
    }
    save_split(out / "split", result.split);
    return 0;
  });
  const auto& split = result.split;
  const Graph train_graph = split.train_graph();
  const std::size_t h_count = cfg.heuristics.size();
  log("split: " + std::to_string(split.train.size()) + " train edges");

  // Teachers on the test split, scored on the training graph.
  std::vector<PositiveEdgeSet> teacher_sets(h_count);
  const bool overlap_ok = cfg.overlap_k >= 1 && cfg.overlap_k <= split.test_neg.size();
  tagged("teacher", [&] {
    for (std::size_t h = 0; h < h_count; ++h) {
      const auto& kind = cfg.heuristics[h];
      const auto pos = score_values(train_graph, split.test_pos, kind);
      const auto neg = score_values(train_graph, split.test_neg, kind);
      result.teacher_test_hits[kind.name()] = hits_table(pos, neg, cfg.eval_ks);
      if (overlap_ok) teacher_sets[h] = positive_edge_set(pos, neg, cfg.overlap_k);
    }
    return 0;
  });

  // Guidance.
  std::vector<GuidanceSet> guidance(h_count);
  result.students.resize(h_count);
  const std::size_t jobs = resolve_jobs(cfg.jobs, h_count);
  auto t_stage = Clock::now();
  tagged("guidance", [&] {
    run_tasks(h_count, jobs, [&](std::size_t h) {
      const auto t0 = Clock::now();
      const auto& kind = cfg.heuristics[h];
      const auto base = cfg.distill_space(kind).first;
      guidance[h] = build_guidance(train_graph, kind, base, cfg.guidance_rounds,
                                   derive_seed(cfg.seed, "guidance." + kind.spec()));
      result.students[h].guidance_seconds = seconds_since(t0);
      write_guidance(out / ("guidance_" + lower(kind.name()) + ".txt"), guidance[h]);
      log("guidance " + kind.spec() + ": " + std::to_string(guidance[h].num_records()) +
          " records");
    });
    return 0;
  });
  result.timing.guidance = seconds_since(t_stage);

  // Distillation: one task per heuristic, plus the plain baseline.
  const std::uint64_t distill_seed = derive_seed(cfg.seed, "distill");
  std::vector<StudentModel> models(h_count);
  StudentModel plain_model;
  std::optional<StudentOutcome> plain;
  const GuidanceSet no_guidance;
  auto grid_search = [&](const std::string& tag, std::vector<DistillConfig> points,
                         const GuidanceSet& gs, StudentOutcome& outcome, StudentModel& model) {
    const auto t0 = Clock::now();
    std::vector<GridCandidate> cands;
    std::vector<DistillResult> results;
    std::ofstream table(out / ("grid_" + tag + ".tsv"));
    table << "alpha\tbeta\tdelta\tbest_epoch\tvalid_hits\n";
    for (auto& p : points) {
      p.seed = distill_seed;
      auto r = train_student(train_graph, x, gs, split, p);
      table << p.alpha << '\t' << p.beta << '\t' << p.delta << '\t' << r.best_epoch << '\t'
            << fmt(r.best_valid_hits) << '\n';
      log("distill " + tag + " alpha=" + fmt(p.alpha) + " beta=" + fmt(p.beta) +
          " delta=" + fmt(p.delta) + " valid=" + fmt(r.best_valid_hits));
      cands.push_back({{p.alpha, p.beta, p.delta}, r.best_valid_hits});
      results.push_back(std::move(r));
    }
    const auto best = grid_select(cands);
    outcome.config = points[best];
    outcome.valid_hits = results[best].best_valid_hits;
    model = std::move(results[best].model);
    outcome.checkpoint = out / ("student_" + tag + ".bin");
    save_student(outcome.checkpoint, model);
    outcome.distill_seconds = seconds_since(t0);
  };

  t_stage = Clock::now();
  const std::size_t distill_tasks = h_count + (cfg.train_plain_baseline ? 1 : 0);
  if (cfg.train_plain_baseline) plain.emplace();
  tagged("distill", [&] {
    run_tasks(distill_tasks, resolve_jobs(cfg.jobs, distill_tasks), [&](std::size_t t) {
      if (t < h_count) {
        const auto& kind = cfg.heuristics[t];
        const auto [base, grid] = cfg.distill_space(kind);
        result.students[t].kind = kind;
        grid_search(lower(kind.name()), grid.expand(base), guidance[t], result.students[t],
                    models[t]);
      } else {
        DistillConfig base = cfg.distill;
        base.alpha = base.beta = 0.0;
        grid_search("plain", {base}, no_guidance, *plain, plain_model);
      }
    });
    return 0;
  });
  result.timing.distill = seconds_since(t_stage);

  // Ensemble.
  t_stage = Clock::now();
  GateModel gate;
  tagged("ensemble", [&] {
    std::vector<StudentRef> refs;
    for (const auto& s : result.students)
      refs.push_back({s.kind.spec(), s.checkpoint.string(), file_digest(s.checkpoint)});
    std::vector<GridCandidate> cands;
    std::vector<GateResult> gates;
    std::ofstream table(out / "grid_ensemble.tsv");
    table << "lambda\tbest_epoch\tvalid_hits\n";
    for (double lambda : cfg.lambda_grid) {
      EnsembleConfig ec = cfg.ensemble;
      ec.lambda = lambda;
      ec.seed = derive_seed(cfg.seed, "ensemble");
      ec.min_students = 1;
      auto r = train_gate(train_graph, x, models, refs, split, ec);
      table << lambda << '\t' << r.best_epoch << '\t' << fmt(r.best_valid_hits) << '\n';
      log("ensemble lambda=" + fmt(lambda) + " valid=" + fmt(r.best_valid_hits));
      cands.push_back({{lambda}, r.best_valid_hits});
      gates.push_back(std::move(r));
    }
    const auto best = grid_select(cands);
    result.lambda = cfg.lambda_grid[best];
    result.ensemble_valid_hits = gates[best].best_valid_hits;
    gate = std::move(gates[best].gate);
    save_gate(out / "gate.bin", gate);
    return 0;
  });
  result.timing.ensemble = seconds_since(t_stage);

  // Evaluation on the test split.
  tagged("eval", [&] {
    std::vector<StudentTable> tables;
    for (const auto& m : models) tables.emplace_back(m, x);
    for (std::size_t h = 0; h < h_count; ++h) {
      const auto pos = predict_pairs(models[h], x, split.test_pos);
      const auto neg = predict_pairs(models[h], x, split.test_neg);
      auto& s = result.students[h];
      s.test_hits = hits_table(pos, neg, cfg.eval_ks);
      if (overlap_ok)
        s.teacher_subset = subset_ratio(teacher_sets[h], positive_edge_set(pos, neg, cfg.overlap_k));
    }
    if (plain) {
      const auto pos = predict_pairs(plain_model, x, split.test_pos);
      const auto neg = predict_pairs(plain_model, x, split.test_neg);
      plain->test_hits = hits_table(pos, neg, cfg.eval_ks);
      if (overlap_ok) {
        const auto set = positive_edge_set(pos, neg, cfg.overlap_k);
        for (std::size_t h = 0; h < h_count; ++h)
          result.plain_teacher_subset[cfg.heuristics[h].name()] = subset_ratio(teacher_sets[h], set);
      }
    }
    const auto pos = ensemble_predict_pairs(gate, tables, x, split.test_pos);
    const auto neg = ensemble_predict_pairs(gate, tables, x, split.test_neg);
    result.ensemble_test_hits = hits_table(pos, neg, cfg.eval_ks);
    return 0;
  });
  result.plain = plain;
  result.timing.total = seconds_since(t_start);
  for (const auto& s : result.students) {
    result.timing.guidance_serial += s.guidance_seconds;
    result.timing.guidance_max = std::max(result.timing.guidance_max, s.guidance_seconds);
    result.timing.distill_serial += s.distill_seconds;
    result.timing.distill_max = std::max(result.timing.distill_max, s.distill_seconds);
  }

  // Reports. report.txt is deterministic; timings go to timing.txt.
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(cfg.seed);
  kv["num_nodes"] = std::to_string(g.num_nodes());
  kv["num_edges"] = std::to_string(g.num_edges());
  kv["split.train"] = std::to_string(split.train.size());
  kv["split.valid"] = std::to_string(split.valid_pos.size());
  kv["split.test"] = std::to_string(split.test_pos.size());
  for (const auto& [name, hits] : result.teacher_test_hits)
    for (const auto& [k, v] : hits) kv["teacher." + lower(name) + ".test.hits@" + std::to_string(k)] = fmt(v);
  auto put_student = [&](const std::string& tag, const StudentOutcome& s) {
    kv["student." + tag + ".alpha"] = fmt(s.config.alpha);
    kv["student." + tag + ".beta"] = fmt(s.config.beta);
    kv["student." + tag + ".delta"] = fmt(s.config.delta);
    kv["student." + tag + ".valid.hits@" + std::to_string(s.config.eval_k)] = fmt(s.valid_hits);
    for (const auto& [k, v] : s.test_hits)
      kv["student." + tag + ".test.hits@" + std::to_string(k)] = fmt(v);
  };
  for (const auto& s : result.students) {
    const auto tag = lower(s.kind.name());
    put_student(tag, s);
    if (overlap_ok && s.teacher_subset.defined)
      kv["student." + tag + ".subset_ratio@" + std::to_string(cfg.overlap_k)] =
          fmt(s.teacher_subset.value);
  }
  if (plain) {
    put_student("plain", *plain);
    for (const auto& [name, r] : result.plain_teacher_subset)
      if (r.defined)
        kv["student.plain.subset_ratio." + lower(name) + "@" + std::to_string(cfg.overlap_k)] =
            fmt(r.value);
  }
  kv["ehdm.lambda"] = fmt(result.lambda);
  kv["ehdm.valid.hits@" + std::to_string(cfg.ensemble.eval_k)] = fmt(result.ensemble_valid_hits);
  for (const auto& [k, v] : result.ensemble_test_hits)
    kv["ehdm.test.hits@" + std::to_string(k)] = fmt(v);
  result.report = out / "report.txt";
  {
    std::ofstream rep(result.report);
    for (const auto& [k, v] : kv) rep << k << '=' << v << '\n';
    if (!rep) throw std::runtime_error("[report] cannot write " + result.report.string());
  }
  {
    const auto& t = result.timing;
    std::ofstream tim(out / "timing.txt");
    tim << "guidance=" << fmt(t.guidance) << "\ndistill=" << fmt(t.distill)
        << "\nensemble=" << fmt(t.ensemble) << "\ntotal=" << fmt(t.total)
        << "\nguidance.serial=" << fmt(t.guidance_serial) << "\nguidance.max=" << fmt(t.guidance_max)
        << "\ndistill.serial=" << fmt(t.distill_serial) << "\ndistill.max=" << fmt(t.distill_max)
        << "\njobs=" << jobs << '\n';
  }
  return result;
}

}  // namespace linkdistill
