// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "linkdistill/ensemble.hpp"

using namespace linkdistill;
using doctest::Approx;

namespace {

std::vector<StudentModel> random_students(std::size_t count, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<StudentModel> out;
  for (std::size_t h = 0; h < count; ++h) out.push_back(StudentModel::init({dim, 12, 6}, rng));
  return out;
}

EnsembleConfig small_config() {
  EnsembleConfig cfg;
  cfg.hidden = 16;
  cfg.epochs = 4;
  cfg.batch_size = 64;
  cfg.lr = 1e-2;
  cfg.seed = 31;
  return cfg;
}

}  // namespace

TEST_CASE("gate_features examples") {
  const std::vector<float> a{1, 2}, b{3, 4};
  CHECK(gate_features(a, b) == std::vector<float>{3, 8, 4, 6});
  const std::vector<float> z{0, 0};
  CHECK(gate_features(z, b) == std::vector<float>{0, 0, 3, 4});
  CHECK(gate_features(a, b) == gate_features(b, a));
}

TEST_CASE("fuse examples") {
  CHECK(fuse(std::vector<double>{0.5, 0.5}, std::vector<double>{0.8, 0.4}) == Approx(0.6));
  CHECK(fuse(std::vector<double>{0, 0}, std::vector<double>{0.8, 0.4}) == kGateEpsilon);
  CHECK(fuse(std::vector<double>{2, 2}, std::vector<double>{0.8, 0.9}) == 1 - kGateEpsilon);
  CHECK(fuse(std::vector<double>{0, 1, 0}, std::vector<double>{0.1, 0.7, 0.3}) == Approx(0.7));
  CHECK(fuse(std::vector<double>{-1, 0.2}, std::vector<double>{0.5, 0.5}) == kGateEpsilon);
}

TEST_CASE("gate loss gradient matches finite differences in double") {
  std::mt19937_64 rng(32);
  const std::size_t f = 5, h = 3, rows = 9;
  for (int trial = 0; trial < 4; ++trial) {
    auto mlp = BasicMlp<double>::kaiming({2 * f, 8, h}, rng);
    for (auto& w : mlp.weight(1)) w *= 0.1;
    std::fill(mlp.bias(1).begin(), mlp.bias(1).end(), 1.0 / h);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> feats(rows * 2 * f);
    for (auto& v : feats) v = u(rng);
    std::vector<double> q(rows * h);
    for (auto& v : q) v = 0.05 + 0.9 * u(rng);
    std::vector<int> labels(rows);
    for (std::size_t r = 0; r < rows; ++r) labels[r] = static_cast<int>(r % 2);
    const double lambda = trial * 0.3;
    BasicMlp<double> grad(mlp.dims());
    const auto loss = gate_batch_loss<double>(mlp, feats, rows, q, labels, lambda, kGateEpsilon,
                                              &grad);
    CHECK(loss.total == Approx(loss.bce + lambda * loss.l1));
    const auto res = gradcheck::check(mlp.blocks(), std::as_const(grad).blocks(), [&] {
      return gate_batch_loss<double>(mlp, feats, rows, q, labels, lambda, kGateEpsilon, nullptr)
          .total;
    });
    CHECK(res.max_rel_error < 1e-4);
  }
}

TEST_CASE("gate loss examples") {
  // zero weights, bias (0.5, 0.5): fused = mean of students
  BasicMlp<double> mlp({2, 2});
  mlp.bias(0) = {0.5, 0.5};
  const std::vector<double> feats{0.3, 0.1};
  const std::vector<double> q{0.8, 0.4};
  const std::vector<int> y{1};
  const auto loss = gate_batch_loss<double>(mlp, feats, 1, q, y, 0.1, kGateEpsilon, nullptr);
  CHECK(loss.bce == Approx(-std::log(0.6)));
  CHECK(loss.l1 == Approx(1.0));
  CHECK(loss.total == Approx(-std::log(0.6) + 0.1));
}

TEST_CASE("train_gate keeps students frozen and is deterministic") {
  const auto fg = fixtures::featured_graph(160, 24, 33);
  const auto split = make_split(fg.graph, 0.1, 0.1, 6);
  const auto train = split.train_graph();
  const auto students = random_students(3, 24, 34);
  const auto before = students;
  const auto cfg = small_config();
  std::size_t calls = 0;
  const auto a = train_gate(train, fg.features, students, {}, split, cfg,
                            [&](const GateEpochStats&) { ++calls; });
  CHECK(calls == cfg.epochs);
  CHECK(students == before);
  const auto b = train_gate(train, fg.features, students, {}, split, cfg);
  CHECK(a.gate == b.gate);
  CHECK(a.gate.num_students() == 3);
  CHECK(a.gate.feature_dim() == 24);
  CHECK(a.history[a.best_epoch].valid_hits == a.best_valid_hits);
}

TEST_CASE("untrained gate starts at the plain student average") {
  const auto fg = fixtures::featured_graph(100, 16, 35);
  const auto split = make_split(fg.graph, 0.1, 0.1, 7);
  const auto students = random_students(2, 16, 36);
  auto cfg = small_config();
  cfg.epochs = 0;
  const auto r = train_gate(split.train_graph(), fg.features, students, {}, split, cfg);
  for (const auto& [i, j] : split.valid_pos) {
    const double avg = 0.5 * (students[0].predict(fg.features.row(i), fg.features.row(j)) +
                              students[1].predict(fg.features.row(i), fg.features.row(j)));
    CHECK(ensemble_predict(r.gate, students, fg.features, i, j) == Approx(avg).epsilon(1e-6));
  }
}

TEST_CASE("ensemble prediction is symmetric and batch-consistent") {
  const auto fg = fixtures::featured_graph(120, 20, 37);
  const auto split = make_split(fg.graph, 0.1, 0.1, 8);
  const auto students = random_students(2, 20, 38);
  const auto r = train_gate(split.train_graph(), fg.features, students, {}, split, small_config());
  std::vector<StudentTable> tables;
  for (const auto& s : students) tables.emplace_back(s, fg.features);
  std::vector<Edge> pairs = split.test_pos;
  pairs.insert(pairs.end(), split.test_neg.begin(), split.test_neg.end());
  REQUIRE(pairs.size() >= 4);
  const auto batch = ensemble_predict_pairs(r.gate, tables, fg.features, pairs);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    const double pij = ensemble_predict(r.gate, students, fg.features, i, j);
    CHECK(pij == ensemble_predict(r.gate, students, fg.features, j, i));
    CHECK(batch[k] == Approx(pij).epsilon(1e-6));
    CHECK(pij >= kGateEpsilon);
    CHECK(pij <= 1 - kGateEpsilon);
  }
}

TEST_CASE("a strong L1 penalty shrinks gate outputs") {
  const auto fg = fixtures::featured_graph(160, 24, 39);
  const auto split = make_split(fg.graph, 0.1, 0.1, 9);
  const auto students = random_students(2, 24, 40);
  auto cfg = small_config();
  cfg.epochs = 6;
  cfg.lambda = 0;
  const auto free = train_gate(split.train_graph(), fg.features, students, {}, split, cfg);
  cfg.lambda = 10;
  const auto tight = train_gate(split.train_graph(), fg.features, students, {}, split, cfg);
  CHECK(tight.history.back().mean_abs_weight < free.history.back().mean_abs_weight);
  CHECK(tight.history.back().mean_abs_weight < tight.history.front().mean_abs_weight);
}

TEST_CASE("gate checkpoint round trip and student digests") {
  const auto fg = fixtures::featured_graph(100, 16, 41);
  const auto split = make_split(fg.graph, 0.1, 0.1, 10);
  const auto students = random_students(2, 16, 42);
  const auto dir = fixtures::temp_dir("gate_ckpt");
  std::vector<StudentRef> refs;
  for (std::size_t h = 0; h < 2; ++h) {
    const auto path = dir / ("s" + std::to_string(h) + ".bin");
    save_student(path, students[h]);
    refs.push_back({h ? "AA" : "CN", path.string(), file_digest(path)});
  }
  auto cfg = small_config();
  cfg.epochs = 1;
  const auto r = train_gate(split.train_graph(), fg.features, students, refs, split, cfg);
  save_gate(dir / "gate.bin", r.gate);
  const auto back = load_gate(dir / "gate.bin");
  CHECK(back == r.gate);
  CHECK(back.students == refs);
  const auto loaded = load_gate_students(back);
  CHECK(loaded == students);

  // a student swapped after the gate was trained is detected
  save_student(dir / "s1.bin", students[0]);
  CHECK_THROWS(load_gate_students(back));
}

TEST_CASE("gate needs enough students") {
  const auto fg = fixtures::featured_graph(80, 16, 43);
  const auto split = make_split(fg.graph, 0.1, 0.1, 11);
  const auto one = random_students(1, 16, 44);
  auto cfg = small_config();
  CHECK_THROWS(train_gate(split.train_graph(), fg.features, one, {}, split, cfg));
  cfg.min_students = 1;
  cfg.epochs = 1;
  CHECK(train_gate(split.train_graph(), fg.features, one, {}, split, cfg).gate.num_students() == 1);
}
