// SPDX-License-Identifier: Apache-2.0
// Command-line front end: split, guidance, distill, ensemble, eval, run.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "linkdistill/data.hpp"
#include "linkdistill/distill.hpp"
#include "linkdistill/ensemble.hpp"
#include "linkdistill/heuristics.hpp"
#include "linkdistill/metrics.hpp"
#include "linkdistill/pipeline.hpp"

using namespace linkdistill;

namespace {

struct DatasetArgs {
  std::string graph;
  std::string features;
  std::string linqs_content;
  std::string linqs_cites;
  std::size_t num_nodes = 0;

  void add(CLI::App* app, bool need_features) {
    app->add_option("--graph", graph, "Edge list file");
    auto* f = app->add_option("--features", features, "Feature file (binary or CSV)");
    app->add_option("--linqs-content", linqs_content, "LINQS .content file");
    app->add_option("--linqs-cites", linqs_cites, "LINQS .cites file");
    app->add_option("--num-nodes", num_nodes, "Node count when the edge list omits isolated nodes");
    if (need_features) f->description("Feature file (binary or CSV); required unless LINQS is given");
  }

  bool linqs() const { return !linqs_content.empty() || !linqs_cites.empty(); }

  Graph load_graph_only() const {
    if (linqs()) return load_linqs(linqs_content, linqs_cites).graph;
    if (graph.empty()) throw std::runtime_error("--graph or --linqs-content/--linqs-cites required");
    std::size_t n = num_nodes;
    if (n == 0 && !features.empty()) n = load_features(features).num_nodes();
    return load_graph(graph, n);
  }

  FeatureMatrix load_features_only() const {
    if (linqs()) return load_linqs(linqs_content, linqs_cites).features;
    if (features.empty()) throw std::runtime_error("--features or --linqs-content/--linqs-cites required");
    return load_features(features);
  }
};

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) ks.push_back(std::stoul(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (ks.empty()) throw std::runtime_error("--k needs at least one cutoff");
  return ks;
}

bool is_gate_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[8] = {};
  in.read(magic, 8);
  return in && std::string(magic, 8) == "EHDMGAT1";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distill graph heuristics into feature-only MLP link predictors"};
  app.require_subcommand(1);

  // split
  auto* split_cmd = app.add_subcommand("split", "Partition edges into train/valid/test");
  DatasetArgs split_data;
  split_data.add(split_cmd, false);
  double val_frac = 0.05, test_frac = 0.15;
  std::uint64_t split_seed = 0;
  std::string split_out;
  split_cmd->add_option("--val", val_frac, "Validation fraction")->capture_default_str();
  split_cmd->add_option("--test", test_frac, "Test fraction")->capture_default_str();
  split_cmd->add_option("--seed", split_seed, "Seed")->capture_default_str();
  split_cmd->add_option("--out", split_out, "Output split directory")->required();

  // guidance
  auto* guide_cmd = app.add_subcommand("guidance", "Sample context sets and score them with a heuristic");
  std::string guide_graph, guide_split, guide_out, guide_heuristic = "CN";
  std::size_t guide_nodes = 0, guide_rounds = 10;
  std::uint64_t guide_seed = 0;
  DistillConfig guide_cfg;
  guide_cmd->add_option("--graph", guide_graph, "Training edge list");
  guide_cmd->add_option("--split", guide_split, "Split directory (uses train.txt)");
  guide_cmd->add_option("--num-nodes", guide_nodes, "Node count");
  guide_cmd->add_option("--heuristic", guide_heuristic, "CN, AA, RA, CSP or CSP:<tau>")->capture_default_str();
  guide_cmd->add_option("--rounds", guide_rounds, "Independent context rounds")->capture_default_str();
  guide_cmd->add_option("--nearby", guide_cfg.num_nearby, "Random walks per anchor")->capture_default_str();
  guide_cmd->add_option("--walk-length", guide_cfg.walk_length, "Maximum walk length")->capture_default_str();
  guide_cmd->add_option("--random", guide_cfg.num_random, "Uniform context nodes per anchor")->capture_default_str();
  guide_cmd->add_option("--seed", guide_seed, "Seed")->capture_default_str();
  guide_cmd->add_option("--out", guide_out, "Guidance file")->required();

  // distill
  auto* dist_cmd = app.add_subcommand("distill", "Train one student");
  DatasetArgs dist_data;
  dist_data.add(dist_cmd, true);
  std::string dist_guidance, dist_split, dist_out, dist_hidden = "256,256";
  DistillConfig dist_cfg;
  dist_cmd->add_option("--guidance", dist_guidance, "Guidance file (omit with --alpha 0 --beta 0)");
  dist_cmd->add_option("--split", dist_split, "Split directory")->required();
  dist_cmd->add_option("--alpha", dist_cfg.alpha, "Ranking loss weight")->capture_default_str();
  dist_cmd->add_option("--beta", dist_cfg.beta, "Distribution loss weight")->capture_default_str();
  dist_cmd->add_option("--delta", dist_cfg.delta, "Ranking margin")->capture_default_str();
  dist_cmd->add_option("--temp", dist_cfg.temperature, "Softmax temperature")->capture_default_str();
  dist_cmd->add_option("--lr", dist_cfg.lr, "Adam learning rate")->capture_default_str();
  dist_cmd->add_option("--epochs", dist_cfg.epochs, "Epochs")->capture_default_str();
  dist_cmd->add_option("--batch", dist_cfg.batch_size, "Positive edges per batch")->capture_default_str();
  dist_cmd->add_option("--hidden", dist_hidden, "Encoder widths")->capture_default_str();
  dist_cmd->add_option("--k", dist_cfg.eval_k, "Validation Hits@K")->capture_default_str();
  dist_cmd->add_option("--seed", dist_cfg.seed, "Seed")->capture_default_str();
  dist_cmd->add_option("--out", dist_out, "Student checkpoint")->required();

  // ensemble
  auto* ens_cmd = app.add_subcommand("ensemble", "Train the gate over frozen students");
  DatasetArgs ens_data;
  ens_data.add(ens_cmd, true);
  std::vector<std::string> ens_students;
  std::string ens_split, ens_out;
  EnsembleConfig ens_cfg;
  ens_cmd->add_option("--students", ens_students, "Student checkpoints, in order")->delimiter(',')->required();
  ens_cmd->add_option("--split", ens_split, "Split directory")->required();
  ens_cmd->add_option("--lambda", ens_cfg.lambda, "L1 weight on gate outputs")->capture_default_str();
  ens_cmd->add_option("--lr", ens_cfg.lr, "Adam learning rate")->capture_default_str();
  ens_cmd->add_option("--epochs", ens_cfg.epochs, "Epochs")->capture_default_str();
  ens_cmd->add_option("--seed", ens_cfg.seed, "Seed")->capture_default_str();
  ens_cmd->add_option("--out", ens_out, "Gate checkpoint")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Hits@K of a student, gate or heuristic on a split");
  DatasetArgs eval_data;
  eval_data.add(eval_cmd, true);
  std::string eval_model, eval_teacher, eval_split, eval_ks = "20", eval_report, eval_scores,
                                                   eval_part = "test";
  auto* model_opt = eval_cmd->add_option("--model", eval_model, "Student or gate checkpoint");
  auto* teacher_opt = eval_cmd->add_option("--teacher", eval_teacher, "Score with a heuristic on the training graph instead");
  model_opt->excludes(teacher_opt);
  eval_cmd->add_option("--split", eval_split, "Split directory")->required();
  eval_cmd->add_option("--part", eval_part, "test or valid")->check(CLI::IsMember({"test", "valid"}))->capture_default_str();
  eval_cmd->add_option("--k", eval_ks, "Comma-separated cutoffs")->capture_default_str();
  eval_cmd->add_option("--report", eval_report, "key=value report path")->required();
  eval_cmd->add_option("--scores", eval_scores, "Optional per-edge scores TSV");

  // run
  auto* run_cmd = app.add_subcommand("run", "Whole pipeline from a config file");
  std::string run_config, run_out;
  std::size_t run_jobs = 0;
  std::uint64_t run_seed = 0;
  bool run_verbose = false;
  run_cmd->add_option("--config", run_config, "key=value config file")->required();
  run_cmd->add_option("--jobs", run_jobs, "Concurrent heuristic students (0: LINKDISTILL_JOBS or all)");
  auto* seed_opt = run_cmd->add_option("--seed", run_seed, "Override the config seed");
  run_cmd->add_option("--out", run_out, "Override the output directory");
  run_cmd->add_flag("-v,--verbose", run_verbose, "Progress on stderr");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*split_cmd) {
      const Graph g = split_data.load_graph_only();
      const auto s = make_split(g, val_frac, test_frac, split_seed);
      save_split(split_out, s);
      std::cout << "train=" << s.train.size() << " valid=" << s.valid_pos.size()
                << " test=" << s.test_pos.size() << '\n';
    } else if (*guide_cmd) {
      Graph g;
      if (!guide_split.empty()) {
        g = load_split(guide_split).train_graph();
      } else if (!guide_graph.empty()) {
        g = load_graph(guide_graph, guide_nodes);
      } else {
        throw std::runtime_error("--graph or --split required");
      }
      const auto kind = HeuristicKind::parse(guide_heuristic);
      const auto gs = build_guidance(g, kind, guide_cfg, guide_rounds, guide_seed);
      write_guidance(guide_out, gs);
      std::cout << "records=" << gs.num_records() << " rounds=" << gs.rounds.size() << '\n';
    } else if (*dist_cmd) {
      const auto x = dist_data.load_features_only();
      const auto split = load_split(dist_split);
      dist_cfg.hidden = parse_ks(dist_hidden);
      GuidanceSet gs;
      if (!dist_guidance.empty()) gs = read_guidance(dist_guidance);
      const Graph train = split.train_graph();
      std::cout << "epoch\tbce\tranking\tdistribution\ttotal\tvalid_hits@" << dist_cfg.eval_k << '\n';
      const auto r = train_student(train, x, gs, split, dist_cfg, [](const EpochStats& e) {
        std::printf("%zu\t%.6f\t%.6f\t%.6f\t%.6f\t%.4f\n", e.epoch, e.loss.bce, e.loss.ranking,
                    e.loss.distribution, e.loss.total, e.valid_hits);
        std::fflush(stdout);
      });
      save_student(dist_out, r.model);
      std::cout << "best_epoch=" << r.best_epoch << " best_valid_hits=" << r.best_valid_hits << '\n';
    } else if (*ens_cmd) {
      const auto x = ens_data.load_features_only();
      const auto split = load_split(ens_split);
      std::vector<StudentModel> students;
      std::vector<StudentRef> refs;
      for (const auto& path : ens_students) {
        students.push_back(load_student(path));
        refs.push_back({std::filesystem::path(path).stem().string(),
                        std::filesystem::absolute(path).string(), file_digest(path)});
      }
      std::cout << "epoch\tbce\tl1\ttotal\tvalid_hits@" << ens_cfg.eval_k << '\n';
      const auto r = train_gate(split.train_graph(), x, students, refs, split, ens_cfg,
                                [](const GateEpochStats& e) {
                                  std::printf("%zu\t%.6f\t%.6f\t%.6f\t%.4f\n", e.epoch, e.loss.bce,
                                              e.loss.l1, e.loss.total, e.valid_hits);
                                  std::fflush(stdout);
                                });
      save_gate(ens_out, r.gate);
      std::cout << "best_epoch=" << r.best_epoch << " best_valid_hits=" << r.best_valid_hits << '\n';
    } else if (*eval_cmd) {
      if (eval_model.empty() && eval_teacher.empty())
        throw std::runtime_error("--model or --teacher required");
      const auto split = load_split(eval_split);
      const auto& pos_pairs = eval_part == "test" ? split.test_pos : split.valid_pos;
      const auto& neg_pairs = eval_part == "test" ? split.test_neg : split.valid_neg;
      std::vector<double> pos, neg;
      std::map<std::string, std::string> extra{{"part", eval_part}};
      if (!eval_teacher.empty()) {
        const auto kind = HeuristicKind::parse(eval_teacher);
        const Graph train = split.train_graph();
        pos = score_values(train, pos_pairs, kind);
        neg = score_values(train, neg_pairs, kind);
        extra["model"] = "teacher:" + kind.spec();
      } else {
        const auto x = eval_data.load_features_only();
        extra["model"] = eval_model;
        if (is_gate_checkpoint(eval_model)) {
          const auto gate = load_gate(eval_model);
          const auto students = load_gate_students(gate);
          std::vector<StudentTable> tables;
          for (const auto& s : students) tables.emplace_back(s, x);
          pos = ensemble_predict_pairs(gate, tables, x, pos_pairs);
          neg = ensemble_predict_pairs(gate, tables, x, neg_pairs);
        } else {
          const auto m = load_student(eval_model);
          pos = predict_pairs(m, x, pos_pairs);
          neg = predict_pairs(m, x, neg_pairs);
        }
      }
      const auto ks = parse_ks(eval_ks);
      const auto report = evaluate(pos, neg, ks);
      write_report(eval_report, report, extra);
      for (const auto& [k, v] : report.hits) std::cout << "hits@" << k << '=' << v << '\n';
      if (!eval_scores.empty()) {
        std::ofstream tsv(eval_scores);
        tsv.precision(9);
        tsv << "i\tj\tlabel\tscore\n";
        for (std::size_t t = 0; t < pos.size(); ++t)
          tsv << pos_pairs[t].first << '\t' << pos_pairs[t].second << "\t1\t" << pos[t] << '\n';
        for (std::size_t t = 0; t < neg.size(); ++t)
          tsv << neg_pairs[t].first << '\t' << neg_pairs[t].second << "\t0\t" << neg[t] << '\n';
      }
    } else if (*run_cmd) {
      auto cfg = load_run_config(run_config);
      if (run_jobs) cfg.jobs = run_jobs;
      if (*seed_opt) cfg.seed = run_seed;
      if (!run_out.empty()) cfg.out_dir = run_out;
      cfg.verbose = cfg.verbose || run_verbose;
      const auto r = run_pipeline(cfg);
      std::ifstream rep(r.report);
      std::cout << rep.rdbuf();
      std::cout << "timing: guidance=" << r.timing.guidance << "s distill=" << r.timing.distill
                << "s ensemble=" << r.timing.ensemble << "s total=" << r.timing.total << "s\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
