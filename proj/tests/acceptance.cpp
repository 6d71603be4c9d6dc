// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "mcr/bayes.hpp"
#include "mcr/evalkit.hpp"
#include "mcr/losses.hpp"
#include "mcr/optim.hpp"
#include "mcr/report_io.hpp"
#include "mcr/sampler.hpp"
#include "mcr/train.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace mcr;
using mcr::testing::random_matrix;
using mcr::testing::random_unit;
using mcr::testing::random_vector;

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kFdTol = 1e-4;
const std::vector<Index> kSweepMc = {1, 5, 10, 25, 50};
const char* const kHighNoise = "stimulus";
const char* const kLowNoise = "goal";

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Vector as_vector(const Parameter& p) { return p.value.row(0).transpose(); }

// ---------------------------------------------------------------------------
// Trained nets on the hdd-like preset, shared by criteria 4 and 7 to 10.

struct Split {
  Dataset train;
  Dataset test;
};

Split hdd_split(std::uint64_t seed) {
  SynthConfig sc = synth_preset("hdd-like");
  sc.seed = seed;
  Split s;
  s.train = synth_generate(sc);
  sc.split = 1;
  s.test = synth_generate(sc);
  return s;
}

RunConfig hdd_config(std::uint64_t seed) {
  RunConfig c;
  c.seed = seed;
  return c;
}

struct SeedRun {
  Split data;
  ConditionalNet joint;
  std::map<std::string, SweepReport> sweeps;  // by notion, on the test split
  double seconds = 0.0;                         // train plus sweeps
};

std::map<std::uint64_t, SeedRun>& seed_runs() {
  static std::map<std::uint64_t, SeedRun> runs;
  return runs;
}

SweepReport sweep_of(const ConditionalNet& net, const Dataset& test, const std::string& notion, std::uint64_t seed) {
  const auto items = test.inputs();
  const Index data_notion = test.notion_index(notion);
  const auto labels = test.labels(data_notion);
  return mc_sweep(net, {items, labels, test.num_classes(data_notion)}, net.config().notion_index(notion), kSweepMc,
                  seed);
}

SeedRun& seed_run(std::uint64_t seed) {
  auto& runs = seed_runs();
  auto it = runs.find(seed);
  if (it != runs.end()) return it->second;
  const auto start = std::chrono::steady_clock::now();
  SeedRun run;
  run.data = hdd_split(seed);
  run.joint = train(run.data.train, hdd_config(seed));
  for (const auto& n : run.data.test.notions) run.sweeps[n.name] = sweep_of(run.joint, run.data.test, n.name, seed);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return runs.emplace(seed, std::move(run)).first->second;
}

// sweep rows: baseline first, then kSweepMc in order
double baseline_macro(const SweepReport& s) { return s.rows.front().macro_map; }
double mc_macro(const SweepReport& s, Index mc) {
  for (const auto& r : s.rows) {
    if (r.inference == "mc" && r.mc == mc) return r.macro_map;
  }
  fail(ErrorKind::Validation, "sweep lacks mc=" + std::to_string(mc));
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

GradCheckReport check(const std::function<double()>& f, const std::function<void()>& b, std::vector<Parameter*> ps) {
  return grad_check(f, b, ps, kFdStep, kFdTol);
}

struct GradTally {
  int configs = 0;
  int failures = 0;
  double worst = 0.0;
  void add(const GradCheckReport& r) {
    ++configs;
    if (!r.passed) ++failures;
    worst = std::max(worst, r.max_relative_error);
  }
};

GradTally grad_dense(RngStream& rng) {
  GradTally t;
  for (int c = 0; c < 100; ++c) {
    const Index batch = 1 + static_cast<Index>(rng.below(4));
    const Index in = 1 + static_cast<Index>(rng.below(6)), out = 1 + static_cast<Index>(rng.below(6));
    Parameter x("x", random_matrix(batch, in, rng));
    Parameter w("w", random_matrix(in, out, rng)), b("b", random_matrix(1, out, rng), false);
    const Matrix g = random_matrix(batch, out, rng);
    const auto f = [&] { return dense_forward(x.value, w, b).cwiseProduct(g).sum(); };
    const auto back = [&] { x.grad = dense_backward(x.value, g, w, b); };
    t.add(check(f, back, {&x, &w, &b}));
  }
  return t;
}

GradTally grad_rnn(RngStream& rng) {
  GradTally t;
  for (int c = 0; c < 100; ++c) {
    const Index steps = 1 + static_cast<Index>(rng.below(5));
    const Index in = 1 + static_cast<Index>(rng.below(4)), hidden = 1 + static_cast<Index>(rng.below(5));
    RnnLayer rnn("r", in, hidden);
    init_rnn(rnn, rng);
    rnn.bias.value = random_matrix(1, hidden, rng, 0.3);
    Parameter seq("seq", random_matrix(steps, in, rng));
    const RowVector g = random_matrix(1, hidden, rng);
    RngStream unused(0, 0);
    const auto f = [&] { return rnn_forward(seq.value, rnn, {}, unused).dot(g); };
    const auto back = [&] {
      RnnTrace trace;
      rnn_forward(seq.value, rnn, {}, unused, &trace);
      seq.grad = rnn_backward(trace, g, rnn);
    };
    t.add(check(f, back, {&seq, &rnn.input_weight, &rnn.recurrent_weight, &rnn.bias}));
  }
  return t;
}

GradTally grad_normalize(RngStream& rng) {
  GradTally t;
  for (int c = 0; c < 100; ++c) {
    const Index n = 1 + static_cast<Index>(rng.below(8));
    Parameter x("x", random_matrix(1, n, rng, 2.0));
    const RowVector g = random_matrix(1, n, rng);
    const auto f = [&] { return RowVector(l2_normalize(x.value.row(0))).dot(g); };
    const auto back = [&] { x.grad = l2_normalize_backward(x.value.row(0), g); };
    t.add(check(f, back, {&x}));
  }
  return t;
}

/// Small conditional nets with mixed-sign masks kept away from the relu kink.
GradTally grad_mask(RngStream& rng) {
  GradTally t;
  for (int c = 0; c < 100; ++c) {
    NetConfig nc;
    const Index d = 2 + static_cast<Index>(rng.below(4));
    nc.modalities = {{"seq", ModalityKind::Sequence, 4, 2, 1 + static_cast<Index>(rng.below(3)), 2},
                     {"vec", ModalityKind::Vector, 3, 1, static_cast<Index>(rng.below(3)), 1}};
    nc.notions = {"a", "b"};
    nc.embedding_dim = d;
    nc.dropout_rate = 0.2;
    nc.unit_norm = c % 2 == 0;
    ConditionalNet net(nc, 1000 + static_cast<std::uint64_t>(c));
    Matrix m = random_matrix(2, d, rng);
    for (Index i = 0; i < m.size(); ++i) {
      double& v = m.data()[i];
      v = (std::abs(v) < 0.1 ? 0.1 + std::abs(v) : std::abs(v)) * (rng.uniform() < 0.3 ? -1.0 : 1.0);
    }
    m.col(0) = m.col(0).cwiseAbs();
    net.masks().value = m;
    ItemInput item;
    item.payloads.emplace_back(random_matrix(3, 4, rng));
    item.payloads.emplace_back(random_matrix(1, 3, rng));
    if (c % 5 == 4) item.payloads[static_cast<std::size_t>(c % 2)].reset();
    const Index notion = c % 2;
    const Vector g = random_vector(d, rng);
    const std::uint64_t stream = static_cast<std::uint64_t>(c);
    const auto f = [&] {
      RngStream r(7, stream);
      return net.forward(item, notion, ForwardConfig::training(), r).dot(g);
    };
    const auto back = [&] {
      RngStream r(7, stream);
      ConditionalNet::Trace trace;
      net.forward(item, notion, ForwardConfig::training(), r, &trace);
      net.backward(trace, g);
    };
    t.add(check(f, back, net.parameters()));
  }
  return t;
}

/// Unit-norm losses are differentiated through l2_normalize on free inputs.
GradTally grad_triplet(RngStream& rng) {
  GradTally t;
  while (t.configs < 100) {
    const Index d = 2 + static_cast<Index>(rng.below(5));
    std::vector<Parameter> x;
    for (int j = 0; j < 3; ++j) x.emplace_back("x" + std::to_string(j), random_matrix(1, d, rng));
    const auto units = [&] {
      std::vector<Vector> u;
      for (const auto& p : x) u.push_back(l2_normalize(as_vector(p)));
      return u;
    };
    auto u = units();
    if (std::abs(triplet_regression(u[0], u[1], u[2], 0.2).pre_clamp) < 1e-3) continue;
    const auto f = [&] {
      const auto v = units();
      return triplet_regression(v[0], v[1], v[2], 0.2).value;
    };
    const auto back = [&] {
      const auto v = units();
      const LossValue lv = triplet_regression(v[0], v[1], v[2], 0.2);
      for (int j = 0; j < 3; ++j) x[j].grad = l2_normalize_backward(as_vector(x[j]), lv.grads[j]).transpose();
    };
    t.add(check(f, back, {&x[0], &x[1], &x[2]}));
  }
  return t;
}

GradTally grad_ktuplet(RngStream& rng) {
  GradTally t;
  while (t.configs < 100) {
    const Index d = 2 + static_cast<Index>(rng.below(4));
    const std::size_t k = 3 + rng.below(4);
    std::vector<Vector> raw;
    for (std::size_t j = 0; j < k; ++j) raw.push_back(random_vector(d, rng));
    const Vector anchor = l2_normalize(raw[0]);
    std::sort(raw.begin() + 1, raw.end(), [&](const Vector& a, const Vector& b) {
      return (anchor - l2_normalize(a)).norm() < (anchor - l2_normalize(b)).norm();
    });
    bool usable = true;
    for (std::size_t j = 1; j + 1 < k; ++j) {
      const double dj = (anchor - l2_normalize(raw[j])).norm(), dn = (anchor - l2_normalize(raw[j + 1])).norm();
      if (dn - dj < 1e-3 || std::abs(dj - dn + 0.2) < 1e-3) usable = false;
    }
    if (!usable) continue;
    std::vector<Parameter> x;
    for (std::size_t j = 0; j < k; ++j) x.emplace_back("x" + std::to_string(j), Matrix(raw[j].transpose()));
    const auto units = [&] {
      std::vector<Vector> u;
      for (const auto& p : x) u.push_back(l2_normalize(as_vector(p)));
      return u;
    };
    const auto f = [&] { return ktuplet_loss(units(), 0.2).value; };
    const auto back = [&] {
      const LossValue lv = ktuplet_loss(units(), 0.2);
      for (std::size_t j = 0; j < k; ++j) x[j].grad = l2_normalize_backward(as_vector(x[j]), lv.grads[j]).transpose();
    };
    std::vector<Parameter*> ps;
    for (auto& p : x) ps.push_back(&p);
    t.add(check(f, back, ps));
  }
  return t;
}

GradTally grad_softmargin(RngStream& rng) {
  GradTally t;
  while (t.configs < 100) {
    const Index d = 1 + static_cast<Index>(rng.below(6));
    std::vector<Parameter> x;
    for (int j = 0; j < 3; ++j) x.emplace_back("x" + std::to_string(j), random_matrix(1, d, rng, 2.0));
    const auto eval = [&] { return softmargin_triplet(as_vector(x[0]), as_vector(x[1]), as_vector(x[2])); };
    if (std::abs(eval().pre_clamp) < 1e-3) continue;
    const auto f = [&] { return eval().value; };
    const auto back = [&] {
      const LossValue lv = eval();
      for (int j = 0; j < 3; ++j) x[j].grad = lv.grads[j].transpose();
    };
    t.add(check(f, back, {&x[0], &x[1], &x[2]}));
  }
  return t;
}

Outcome criterion1() {
  const auto start = std::chrono::steady_clock::now();
  RngStream rng(101, 0);
  const std::vector<std::pair<std::string, std::function<GradTally(RngStream&)>>> parts = {
      {"dense", grad_dense},     {"rnn", grad_rnn},         {"normalize", grad_normalize},
      {"mask", grad_mask},       {"triplet", grad_triplet}, {"ktuplet", grad_ktuplet},
      {"softmargin", grad_softmargin}};
  bool ok = true;
  int configs = 0;
  std::ostringstream detail;
  for (const auto& [name, fn] : parts) {
    const GradTally t = fn(rng);
    ok = ok && t.failures == 0 && t.configs >= 100;
    configs += t.configs;
    detail << name << " " << t.configs << " worst " << fmt("%.2e", t.worst) << "; ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ok = ok && secs < 30.0;
  detail << configs << " configs in " << fmt("%.1f", secs) << " s";
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 2. Loss-range invariants

Outcome criterion2() {
  RngStream rng(202, 0);
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i < 100000; ++i) {
    const Index d = 2 + static_cast<Index>(rng.below(7));
    const double v = triplet_regression(random_unit(d, rng), random_unit(d, rng), random_unit(d, rng), 0.2).value;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Vector e = Vector::Zero(3);
  e[0] = 1.0;
  const double antipodal = triplet_regression(e, Vector(-e), e, 0.2).value;
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const Index d = 2 + static_cast<Index>(rng.below(7));
    std::vector<Vector> t = {random_unit(d, rng), random_unit(d, rng), random_unit(d, rng)};
    const LossValue a = triplet_regression(t[0], t[1], t[2], 0.2);
    const LossValue b = ktuplet_loss(t, 0.2);
    bool same = a.value == b.value && a.grads.size() == b.grads.size();
    for (std::size_t j = 0; same && j < a.grads.size(); ++j) same = a.grads[j] == b.grads[j];
    if (!same) ++mismatches;
  }
  const bool ok = lo >= 0.0 && hi <= 2.2 && antipodal == 2.2 && mismatches == 0;
  return {ok, fmt("range [%.6f, %.6f] over 1e5, antipodal %.17g, k=3 mismatches %d/10000", lo, hi, antipodal,
                  mismatches)};
}

// ---------------------------------------------------------------------------
// 3. Baseline collapse

Outcome criterion3() {
  const Split s = hdd_split(3);
  const auto items = s.test.inputs();
  int inexact = 0;
  RunConfig small = hdd_config(3);
  small.embedding_dim = 16;
  small.hidden_dim = 8;
  const ConditionalNet net(net_config_for(s.train, small), 33);
  for (std::size_t i = 0; i < 40; ++i) {
    const Vector base = baseline_embed(net, items[i], 1);
    for (Index mc : {Index{1}, Index{50}}) {
      const McEmbedding e = mc_embed(net, items[i], 1, mc, item_seed(3, i), DropoutMode::Disabled);
      if (e.mean != base || !e.var.isZero(0.0)) ++inexact;
    }
  }
  small.dropout = 0.0;
  small.epochs = 10;
  small.decay_epoch = 5;
  const ConditionalNet rate0 = train(s.train, small);
  double worst = 0.0;
  for (const auto& n : s.test.notions) {
    const SweepReport sw = sweep_of(rate0, s.test, n.name, 3);
    for (std::size_t r = 1; r < sw.rows.size(); ++r) {
      worst = std::max({worst, std::abs(sw.rows[r].macro_map - sw.rows[0].macro_map),
                        std::abs(sw.rows[r].micro_map - sw.rows[0].micro_map)});
    }
  }
  const bool ok = inexact == 0 && worst <= 1e-12;
  return {ok, fmt("disabled mc {1,50}: %d/80 inexact; rate 0 sweep max |mAP - baseline| = %.3g", inexact, worst)};
}

// ---------------------------------------------------------------------------
// 4. MC convergence rate

double repetition_variance(const ConditionalNet& net, std::span<const ItemInput> items, Index notion, Index mc) {
  double total = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    Matrix means(20, net.embedding_dim());
    for (std::uint64_t r = 0; r < 20; ++r) {
      const std::uint64_t seed = derive_stream({0xC4, static_cast<std::uint64_t>(mc), i, r});
      means.row(static_cast<Index>(r)) = mc_embed(net, items[i], notion, mc, seed).mean.transpose();
    }
    const Matrix centered = means.rowwise() - means.colwise().mean();
    total += centered.array().square().sum() / (19.0 * static_cast<double>(net.embedding_dim()));
  }
  return total / static_cast<double>(items.size());
}

Outcome criterion4() {
  const SeedRun& run = seed_run(0);
  const auto all = run.data.test.inputs();
  const std::span<const ItemInput> items(all.data(), 25);
  const Index notion = run.joint.config().notion_index(kHighNoise);
  const double v10 = repetition_variance(run.joint, items, notion, 10);
  const double v40 = repetition_variance(run.joint, items, notion, 40);
  const double ratio = v10 / v40;
  return {ratio >= 2.5 && ratio <= 6.0, fmt("var(mc=10) %.3e / var(mc=40) %.3e = %.3f", v10, v40, ratio)};
}

// ---------------------------------------------------------------------------
// 5. Mining oracles

/// Ranks candidates by (value, index); the first of the sorted order wins.
Index extreme(const std::vector<std::pair<double, Index>>& c, bool largest) {
  auto sorted = c;
  std::sort(sorted.begin(), sorted.end(), [&](const auto& x, const auto& y) {
    if (x.first != y.first) return largest ? x.first > y.first : x.first < y.first;
    return x.second < y.second;
  });
  return sorted.front().second;
}

Outcome criterion5() {
  RngStream rng(505, 0);
  int bh_bad = 0, sh_bad = 0;
  long sh_checked = 0;
  for (int b = 0; b < 1000; ++b) {
    const Index P = 2 + static_cast<Index>(rng.below(5));
    const Index K = 2 + static_cast<Index>(rng.below(std::min<std::uint64_t>(7, 50 / P - 1)));
    std::vector<int> labels;
    for (Index p = 0; p < P; ++p) labels.insert(labels.end(), static_cast<std::size_t>(K), static_cast<int>(p * 3));
    for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[rng.below(i)]);
    const auto n = static_cast<Index>(labels.size());
    Matrix emb = random_matrix(n, 1 + static_cast<Index>(rng.below(4)), rng);
    if (b % 2) emb = emb.array().round().matrix();  // coincident points force ties
    const Matrix d = pairwise_distances(emb);

    const auto mined = batch_hard_triplets(emb, labels);
    for (Index a = 0; a < n; ++a) {
      std::vector<std::pair<double, Index>> pos, neg;
      for (Index j = 0; j < n; ++j) {
        if (j == a) continue;
        (labels[j] == labels[a] ? pos : neg).push_back({(emb.row(a) - emb.row(j)).norm(), j});
      }
      const TripletIdx want{a, extreme(pos, true), extreme(neg, false)};
      if (mined[static_cast<std::size_t>(a)] != want) ++bh_bad;
    }

    const double margin = b % 3 ? 0.2 : 0.05 + rng.uniform();
    const auto triplets = semi_hard_triplets(d, labels, margin);
    std::vector<TripletIdx> expected;
    for (Index a = 0; a < n; ++a) {
      for (Index p = 0; p < n; ++p) {
        if (p == a || labels[p] != labels[a]) continue;
        const double dap = d(a, p);
        std::vector<std::pair<double, Index>> window, beyond, all;
        for (Index j = 0; j < n; ++j) {
          if (labels[j] == labels[a]) continue;
          all.push_back({d(a, j), j});
          if (d(a, j) > dap) beyond.push_back({d(a, j), j});
          if (d(a, j) > dap && d(a, j) < dap + margin) window.push_back({d(a, j), j});
        }
        const Index want = !window.empty() ? extreme(window, false)
                           : !beyond.empty() ? extreme(beyond, false)
                                             : extreme(all, true);
        const auto got = select_semi_hard_negative(d, labels, a, p, margin);
        ++sh_checked;
        if (!got || *got != want) ++sh_bad;
        expected.push_back({a, p, want});
      }
    }
    auto sorted = triplets;
    std::sort(sorted.begin(), sorted.end());
    std::sort(expected.begin(), expected.end());
    if (sorted != expected) ++sh_bad;
  }
  return {bh_bad == 0 && sh_bad == 0,
          fmt("1000 batches: batch-hard mismatches %d, semi-hard mismatches %d over %ld pairs", bh_bad, sh_bad,
              sh_checked)};
}

// ---------------------------------------------------------------------------
// 6. mAP oracle

Outcome criterion6() {
  double err = 0.0;
  const auto near = [&](std::optional<double> got, double want) {
    err = std::max(err, got ? std::abs(*got - want) : 1.0);
  };
  near(average_precision(std::vector<int>{1, 0, 0}), 1.0);
  near(average_precision(std::vector<int>{0, 1}), 0.5);
  near(average_precision(std::vector<int>{1, 0, 1}), 5.0 / 6.0);

  // Points 0..4 on a line, labels {0,0,0,1,1}:
  //   q0 [1 1 0 0] 1, q1 [1 1 0 0] 1, q2 [1 0 1 0] 5/6, q3 [0 1 0 0] 1/2, q4 [1 0 0 0] 1
  Matrix pts = Matrix::Zero(5, 2);
  for (Index i = 0; i < 5; ++i) pts(i, 0) = static_cast<double>(i);
  const std::vector<int> labels = {0, 0, 0, 1, 1};
  const RetrievalReport r = evaluate(pts, labels, 2);
  const std::vector<double> aps = {1.0, 1.0, 5.0 / 6.0, 0.5, 1.0};
  for (std::size_t q = 0; q < 5; ++q) near(r.queries[q].ap, aps[q]);
  near(r.micro_map, 13.0 / 15.0);
  near(r.macro_map, ((1.0 + 1.0 + 5.0 / 6.0) / 3.0 + 0.75) / 2.0);
  near(r.top1(), 0.8);

  RngStream rng(606, 0);
  double balanced = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int classes = 2 + static_cast<int>(rng.below(5));
    const int per = 2 + static_cast<int>(rng.below(6));
    std::vector<int> l;
    for (int c = 0; c < classes; ++c) l.insert(l.end(), static_cast<std::size_t>(per), c);
    const RetrievalReport b = evaluate(random_matrix(static_cast<Index>(l.size()), 3, rng), l, classes);
    balanced = std::max(balanced, std::abs(b.micro_map - b.macro_map));
  }
  return {err <= 1e-12 && balanced <= 1e-9,
          fmt("fixture max error %.3g; balanced max |micro - macro| %.3g over 200 sets", err, balanced)};
}

// ---------------------------------------------------------------------------
// 7 to 10. Directional results on the hdd-like preset

Outcome criterion7() {
  double secs = 0.0;
  std::vector<double> high, low;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const SeedRun& run = seed_run(seed);
    high.push_back(mc_macro(run.sweeps.at(kHighNoise), 50) - baseline_macro(run.sweeps.at(kHighNoise)));
    low.push_back(mc_macro(run.sweeps.at(kLowNoise), 50) - baseline_macro(run.sweeps.at(kLowNoise)));
    secs += run.seconds;
  }
  const double mh = median(high), ml = median(low);
  const bool ok = mh >= 0.0 && ml >= 0.0 && mh >= ml && secs < 600.0;
  return {ok, fmt("median macro gain mc50 - baseline: %s %+.4f (%+.4f %+.4f %+.4f), %s %+.4f (%+.4f %+.4f %+.4f); %.0f s",
                  kHighNoise, mh, high[0], high[1], high[2], kLowNoise, ml, low[0], low[1], low[2], secs)};
}

Outcome criterion8() {
  bool ok = true;
  std::ostringstream detail;
  for (const char* notion : {kLowNoise, kHighNoise}) {
    std::vector<double> joint, special;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const SeedRun& run = seed_run(seed);
      joint.push_back(mc_macro(run.sweeps.at(notion), 50));
      RunConfig c = hdd_config(seed);
      c.notions = {notion};
      const ConditionalNet net = train(run.data.train, c);
      special.push_back(mc_macro(sweep_of(net, run.data.test, notion, seed), 50));
    }
    const double mj = median(joint), ms = median(special);
    ok = ok && mj >= ms - 0.02;
    detail << notion << fmt(" joint %.4f vs specialized %.4f (diff %+.4f); ", mj, ms, mj - ms);
  }
  detail << "mc=50 macro mAP, medians over 3 seeds";
  return {ok, detail.str()};
}

Outcome criterion9() {
  std::vector<double> curve;
  for (Index mc : kSweepMc) {
    std::vector<double> v;
    for (std::uint64_t seed = 0; seed < 3; ++seed) v.push_back(mc_macro(seed_run(seed).sweeps.at(kHighNoise), mc));
    curve.push_back(median(v));
  }
  double worst_drop = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) worst_drop = std::max(worst_drop, curve[i - 1] - curve[i]);
  std::ostringstream detail;
  detail << kHighNoise << " median macro mAP at mc {1,5,10,25,50}:";
  for (double v : curve) detail << fmt(" %.4f", v);
  detail << fmt("; largest drop %.4f", worst_drop);
  return {worst_drop <= 0.005, detail.str()};
}

Outcome criterion10() {
  int wins = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const SeedRun& run = seed_run(seed);
    const double h = run.sweeps.at(kHighNoise).rows.back().dataset_uncertainty;
    const double l = run.sweeps.at(kLowNoise).rows.back().dataset_uncertainty;
    if (h > l) ++wins;
    detail << fmt("seed %d: %s %.3e vs %s %.3e; ", static_cast<int>(seed), kHighNoise, h, kLowNoise, l);
  }
  detail << wins << "/3 seeds ordered";
  return {wins >= 2, detail.str()};
}

// ---------------------------------------------------------------------------
// 11. Reproducibility

struct Artifacts {
  std::string checkpoint;
  std::string report;
  std::string sweep;
};

Artifacts full_run(std::uint64_t seed) {
  const Split s = hdd_split(seed);
  RunConfig c = hdd_config(seed);
  c.epochs = 20;
  c.decay_epoch = 10;
  c.embedding_dim = 32;
  c.hidden_dim = 16;
  const ConditionalNet net = checkpoint_from_text(checkpoint_text(train(s.train, c)));
  Artifacts a;
  a.checkpoint = checkpoint_text(net);
  const auto items = s.test.inputs();
  const Index notion = s.test.notion_index(kHighNoise);
  const auto labels = s.test.labels(notion);
  const EvalSet set{items, labels, s.test.num_classes(notion)};
  ReportContext ctx;
  for (const Record& r : s.test.records) ctx.ids.push_back(r.id);
  ctx.class_names = s.test.notions[static_cast<std::size_t>(notion)].classes;
  ctx.run_config = run_config_json(c);
  ctx.seed = seed;
  const auto emb = embed_set(net, items, net.config().notion_index(kHighNoise), 50, seed);
  RetrievalReport r = evaluate(stack_means(emb), labels, set.num_classes);
  r.config = {kHighNoise, "mc", 50, c.dropout, s.test.modality_names(), false};
  a.report = retrieval_json(r, ctx);
  const SweepReport sw = mc_sweep(net, set, net.config().notion_index(kHighNoise), kSweepMc, seed);
  a.sweep = sweep_json(sw, ctx) + sweep_table(sw);
  return a;
}

Outcome criterion11() {
  const Artifacts a = full_run(11), b = full_run(11);
  const bool ok = a.checkpoint == b.checkpoint && a.report == b.report && a.sweep == b.sweep;
  return {ok, fmt("checkpoint %zu bytes %s, retrieval report %zu bytes %s, sweep %zu bytes %s", a.checkpoint.size(),
                  a.checkpoint == b.checkpoint ? "identical" : "DIFFER", a.report.size(),
                  a.report == b.report ? "identical" : "DIFFER", a.sweep.size(),
                  a.sweep == b.sweep ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3, criterion4,
                                                          criterion5, criterion6, criterion7, criterion8,
                                                          criterion9, criterion10, criterion11};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %zu: %s  %s\n", i + 1, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
