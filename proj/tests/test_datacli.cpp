#include "mcr/config.hpp"
#include "mcr/dataset.hpp"
#include "mcr/evalkit.hpp"
#include "mcr/report_io.hpp"
#include "mcr/train.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <nlohmann/json.hpp>

using namespace mcr;

namespace {

RunConfig quick_config() {
  RunConfig c;
  c.epochs = 40;
  c.decay_epoch = 20;
  c.embedding_dim = 16;
  c.hidden_dim = 8;
  c.group_size = 32;
  return c;
}

double map_of(const ConditionalNet& net, const Dataset& data, const std::string& notion, bool baseline, Index mc = 20) {
  const Index s = data.notion_index(notion);
  const auto items = data.inputs();
  const auto labels = data.labels(s);
  const Index ns = net.config().notion_index(notion);
  const Matrix emb = baseline ? baseline_matrix(net, items, ns) : stack_means(embed_set(net, items, ns, mc, 3));
  return evaluate(emb, labels, data.num_classes(s)).macro_map;
}

}  // namespace

TEST(Dataset, RoundTrip) {
  SynthConfig c = synth_preset("hdd-like");
  c.num_items = 60;
  c.min_class_size = 2;
  Dataset data = synth_generate(c);
  data.records[3].input.payloads[1].reset();
  data.records[4].session.reset();
  const std::string text = serialize_dataset(data);
  const Dataset back = parse_dataset_text(text);
  EXPECT_TRUE(back == data);
  EXPECT_EQ(serialize_dataset(back), text);
}

TEST(Dataset, ParseErrorsCarryLineNumbers) {
  const std::string header =
      R"({"format":"mcr-dataset","version":1,"modalities":[{"name":"v","kind":"vector","dim":2,"cells":1}],"notions":[{"name":"n","classes":["a","b"]}]})";
  const std::string good = R"({"id":"x","labels":{"n":"a"},"features":{"v":[1,2]}})";
  const std::vector<std::pair<std::string, std::string>> cases = {
      {header + "\n" + good + "\n{oops\n", "line 3"},
      {header + "\n" + R"({"id":"y","labels":{"n":"zzz"},"features":{"v":[1,2]}})" + "\n", "line 2"},
      {header + "\n" + good + "\n" + R"({"id":"z","labels":{"n":"a"},"features":{"v":[1]}})" + "\n", "line 3"},
      {header + "\n" + R"({"id":"w","labels":{"n":"a"},"features":{"u":[1,2]}})" + "\n", "line 2"},
      {R"({"format":"other"})", "line 1"},
  };
  for (const auto& [text, where] : cases) {
    try {
      parse_dataset_text(text);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Parse);
      EXPECT_NE(std::string(e.what()).find(where), std::string::npos) << e.what();
    }
  }
}

TEST(Dataset, DuplicateIdsRejected) {
  const std::string header =
      R"({"format":"mcr-dataset","version":1,"modalities":[{"name":"v","kind":"vector","dim":1,"cells":1}],"notions":[{"name":"n","classes":["a"]}]})";
  const std::string rec = R"({"id":"x","labels":{"n":"a"},"features":{"v":[1]}})";
  EXPECT_THROW(parse_dataset_text(header + "\n" + rec + "\n" + rec + "\n"), Error);
}

TEST(Synth, PureFunctionOfArguments) {
  const SynthConfig c = synth_preset("hdd-like");
  EXPECT_EQ(serialize_dataset(synth_generate(c)), serialize_dataset(synth_generate(c)));
  SynthConfig other = c;
  other.seed = 1;
  EXPECT_NE(serialize_dataset(synth_generate(c)), serialize_dataset(synth_generate(other)));
}

TEST(Synth, HddLikeClassHistogram) {
  const SynthConfig c = synth_preset("hdd-like");
  const Dataset data = synth_generate(c);
  ASSERT_EQ(data.notions.size(), 2u);
  EXPECT_EQ(data.notions[0].classes.size(), 10u);
  EXPECT_EQ(data.notions[1].classes.size(), 6u);
  for (std::size_t s = 0; s < 2; ++s) {
    std::vector<Index> hist(data.notions[s].classes.size(), 0);
    for (int l : data.labels(static_cast<Index>(s))) ++hist[static_cast<std::size_t>(l)];
    const auto expected = synth_class_sizes(c.num_items, static_cast<Index>(hist.size()), c.notions[s].tail_exponent, c.min_class_size);
    EXPECT_EQ(hist, expected);
    EXPECT_TRUE(std::is_sorted(hist.rbegin(), hist.rend()));
    EXPECT_GT(hist.front(), 2 * hist.back());
  }
}

TEST(Synth, ClassSizesLargestRemainder) {
  EXPECT_EQ(synth_class_sizes(10, 3, 0.0, 2), (std::vector<Index>{4, 3, 3}));
  const auto sizes = synth_class_sizes(100, 4, 1.0, 2);
  Index sum = 0;
  for (Index s : sizes) sum += s;
  EXPECT_EQ(sum, 100);
}

TEST(Synth, DegenerateSizesAreParameterErrors) {
  SynthConfig c = synth_preset("balanced");
  c.notions[0].num_classes = 1;
  EXPECT_THROW(synth_generate(c), Error);
  c = synth_preset("balanced");
  c.min_class_size = 1;
  EXPECT_THROW(synth_generate(c), Error);
  c = synth_preset("balanced");
  c.num_items = 5;
  try {
    synth_generate(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parameter);
  }
}

TEST(Synth, SplitsShareClassStructure) {
  SynthConfig c = synth_preset("noiseless");
  const Dataset train = synth_generate(c);
  c.split = 1;
  const Dataset test = synth_generate(c);
  // Noiseless: items of one (goal, stimulus) pair are identical across splits.
  std::map<std::pair<int, int>, RowVector> proto;
  for (const Record& r : train.records) proto[{r.labels[0], r.labels[1]}] = r.input.payloads[1]->row(0);
  for (const Record& r : test.records) {
    auto it = proto.find({r.labels[0], r.labels[1]});
    if (it != proto.end()) EXPECT_EQ(r.input.payloads[1]->row(0), it->second);
  }
}

TEST(Synth, InformationFreeModalityIsAtChance) {
  SynthConfig c = synth_preset("balanced");
  c.num_items = 240;
  c.modalities[1].noise[1] = 1e9;
  const Dataset data = synth_generate(c);
  // Retrieval straight on the payload of the drowned modality.
  Matrix raw(static_cast<Index>(data.records.size()), c.modalities[1].dim);
  for (std::size_t i = 0; i < data.records.size(); ++i) raw.row(static_cast<Index>(i)) = data.records[i].input.payloads[1]->row(0);
  const auto labels = data.labels(1);
  RngStream rng(0, 0);
  double chance = 0.0;
  for (int r = 0; r < 5; ++r) chance += evaluate(mcr::testing::random_matrix(raw.rows(), 4, rng), labels, 4).micro_map / 5.0;
  EXPECT_NEAR(evaluate(raw, labels, 4).micro_map, chance, 0.03);
}

TEST(Config, DefaultsAndParsing) {
  const RunConfig d;
  EXPECT_EQ(d.margin, 0.2);
  EXPECT_EQ(d.mc, 50);
  EXPECT_EQ(d.dropout, 0.1);
  EXPECT_EQ(d.embedding_dim, 128);
  EXPECT_EQ(d.lr, 0.01);
  EXPECT_EQ(d.decay_epoch, 250);
  EXPECT_EQ(d.epochs, 500);
  EXPECT_EQ(d.batch_size, 512);
  EXPECT_EQ(d.max_triplets, 400);
  EXPECT_EQ(d.P, 18);
  EXPECT_EQ(d.K, 4);
  const RunConfig c = parse_run_config(R"({"margin":0.3,"miner":"batch-hard","loss":"soft-margin","notions":["goal"]})");
  EXPECT_EQ(c.margin, 0.3);
  EXPECT_EQ(c.miner, MinerKind::BatchHard);
  EXPECT_EQ(c.loss, LossKind::SoftMargin);
  EXPECT_EQ(c.notions, (std::vector<std::string>{"goal"}));
  EXPECT_EQ(c.mc, 50);
  EXPECT_EQ(parse_run_config(run_config_json(c)).margin, 0.3);
  EXPECT_EQ(run_config_json(parse_run_config(run_config_json(c))), run_config_json(c));
}

TEST(Config, Violations) {
  for (const std::string bad : {R"({"dropout":1.0})", R"({"dropout":-0.1})", R"({"mc":0})", R"({"unknown":1})",
                                R"({"miner":"random"})", R"({"epochs":10,"decay_epoch":20})", R"({"margin":"x"})"}) {
    try {
      parse_run_config(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Validation) << bad;
    }
  }
  try {
    parse_run_config("{not json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
  }
}

TEST(Train, ReproducibleCheckpoints) {
  const Dataset data = synth_generate(synth_preset("noiseless"));
  RunConfig c = quick_config();
  c.epochs = 6;
  c.decay_epoch = 3;
  const std::string a = checkpoint_text(train(data, c));
  const std::string b = checkpoint_text(train(data, c));
  EXPECT_EQ(a, b);
  c.seed = 9;
  EXPECT_NE(checkpoint_text(train(data, c)), a);
}

TEST(Train, NoiselessReachesPerfectRetrieval) {
  const Dataset data = synth_generate(synth_preset("noiseless"));
  RunConfig c = quick_config();
  c.epochs = 80;
  c.decay_epoch = 40;
  const ConditionalNet net = train(data, c);
  for (const std::string notion : {"goal", "stimulus"}) EXPECT_GE(map_of(net, data, notion, false), 0.99) << notion;
}

TEST(Train, DropoutOneRejectedBeforeTraining) {
  const Dataset data = synth_generate(synth_preset("noiseless"));
  RunConfig c = quick_config();
  c.dropout = 1.0;
  int epochs = 0;
  try {
    train(data, c, [&](const EpochStats&, const ConditionalNet&) { ++epochs; });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
  }
  EXPECT_EQ(epochs, 0);
}

TEST(Train, BatchHardAndSoftMargin) {
  const Dataset data = synth_generate(synth_preset("noiseless"));
  RunConfig c = quick_config();
  c.miner = MinerKind::BatchHard;
  c.P = 3;
  c.K = 4;
  c.steps_per_epoch = 4;
  c.loss = LossKind::SoftMargin;
  std::vector<double> losses;
  const ConditionalNet net = train(data, c, [&](const EpochStats& s, const ConditionalNet&) { losses.push_back(s.mean_loss); });
  EXPECT_FALSE(net.config().unit_norm);
  EXPECT_LT(losses.back(), losses.front());
  EXPECT_GE(map_of(net, data, "goal", true), 0.9);
}

TEST(Train, LrScheduleAndCallbacks) {
  const Dataset data = synth_generate(synth_preset("noiseless"));
  RunConfig c = quick_config();
  c.epochs = 4;
  c.decay_epoch = 2;
  std::vector<double> lrs;
  train(data, c, [&](const EpochStats& s, const ConditionalNet&) { lrs.push_back(s.lr); });
  EXPECT_EQ(lrs, (std::vector<double>{0.01, 0.01, 0.01, 0.005}));
}

TEST(Train, InformativeModalityDropHurtsItsNotion) {
  // camera carries goal only, can carries stimulus only.
  SynthConfig sc = synth_preset("balanced");
  sc.modalities[0].signal = {1.0, 0.0};
  sc.modalities[1].signal = {0.0, 1.0};
  int lower = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    sc.seed = seed;
    const Dataset data = synth_generate(sc);
    RunConfig c = quick_config();
    c.seed = seed;
    const ConditionalNet net = train(data, c);
    const auto items = data.inputs();
    const auto labels = data.labels(0);
    const auto entries = modality_ablation(net, {items, labels, 4}, 0, {{"camera", "can"}, {"can"}}, 10, 1);
    lower += entries[1].baseline.macro_map < entries[0].baseline.macro_map;
  }
  EXPECT_GE(lower, 2);
}

TEST(Train, HighNoiseClassIsMoreUncertain) {
  // One notion; class 0 clean, class 1 drowned in noise.
  std::vector<double> gaps;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthConfig sc;
    sc.notions = {{"n", 2, 0.0}};
    sc.modalities = {{"v", ModalityKind::Vector, 6, 1, 1, {1.0}, {0.0}, 0.0}};
    sc.num_items = 40;
    sc.seed = seed;
    Dataset data = synth_generate(sc);
    RngStream rng(seed, 77);
    for (Record& r : data.records) {
      if (r.labels[0] == 1) *r.input.payloads[0] += mcr::testing::random_matrix(1, 6, rng, 0.8);
    }
    RunConfig c = quick_config();
    c.epochs = 20;
    c.decay_epoch = 10;
    c.seed = seed;
    const ConditionalNet net = train(data, c);
    const auto items = data.inputs();
    const auto rows = per_class_uncertainty(embed_set(net, items, 0, 20, 5), data.labels(0), 0);
    gaps.push_back(rows[1].mean_variance - rows[0].mean_variance);
  }
  std::nth_element(gaps.begin(), gaps.begin() + 10, gaps.end());
  EXPECT_GT(gaps[10], 0.0);
}

TEST(Reports, TableAndExportSchemas) {
  const std::vector<int> labels = {0, 0, 1, 1};
  Matrix emb = Matrix::Zero(4, 2);
  emb.col(0) << 0, 1, 5, 6;
  RetrievalReport r = evaluate(emb, labels, 2);
  r.config = {"goal", "mc", 50, 0.1, {"camera", "can"}, false};
  const std::string row = table_row(r, 0.25);
  EXPECT_EQ(std::count(row.begin(), row.end(), '\t'), static_cast<long>(kTableColumns.size() - 1));
  EXPECT_EQ(table_header().substr(0, 17), "notion\tinference\t");
  EXPECT_NE(row.find("camera+can"), std::string::npos);

  ReportContext ctx;
  ctx.ids = {"a", "b", "c", "d"};
  ctx.class_names = {"x", "y"};
  const auto j = nlohmann::json::parse(retrieval_json(r, ctx));
  EXPECT_EQ(j["report"]["micro_map"], 1.0);
  EXPECT_EQ(j["report"]["queries"][0]["ranking"][0], "b");
  EXPECT_EQ(j["report"]["mc"], 50);

  std::vector<McEmbedding> e = {{Vector::Constant(2, 0.1), Vector::Constant(2, 0.3), 7}};
  const std::vector<std::string> ids = {"a"};
  const auto line = nlohmann::json::parse(embedding_export(e, ids, "goal"));
  EXPECT_EQ(line["id"], "a");
  EXPECT_EQ(line["mc_count"], 7);
  EXPECT_EQ(line["mean"][1], 0.1);
  EXPECT_EQ(line["var"][0], 0.3);
}
