#include "mcr/bayes.hpp"
#include "mcr/config.hpp"
#include "mcr/dataset.hpp"
#include "mcr/error.hpp"
#include "mcr/evalkit.hpp"
#include "mcr/model.hpp"
#include "mcr/report_io.hpp"
#include "mcr/train.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <sstream>

namespace {

using namespace mcr;

enum ExitCode { kOk = 0, kValidation = 2, kParse = 3, kRuntime = 4 };

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation:
    case ErrorKind::Parameter:
      return kValidation;
    case ErrorKind::Parse:
      return kParse;
    default:
      return kRuntime;
  }
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, sep)) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

struct Options {
  std::string config;
  std::string dataset;
  std::string checkpoint;
  std::string notion;
  std::string modalities;
  std::string out;
  std::optional<Index> mc;
  std::optional<std::uint64_t> seed;

  // synth
  std::string preset = "hdd-like";
  std::uint64_t split = 0;
  Index items = 0;

  // retrieve / sweep / ablate
  std::string queries;
  Index top = 10;
  std::string mc_values;
  std::string subsets;
  bool baseline = false;
};

RunConfig run_config(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (o.mc) c.mc = *o.mc;
  if (o.seed) c.seed = *o.seed;
  c.validate();
  return c;
}

/// Everything an inference command needs, loaded and cross-checked.
struct Session {
  RunConfig config;
  Dataset data;
  ConditionalNet net;
  Index notion = 0;          // net notion
  Index data_notion = 0;     // dataset notion
  std::vector<ItemInput> inputs;
  std::vector<int> labels;
  std::vector<std::string> modalities;
  ReportContext ctx;

  EvalSet eval_set() const { return {inputs, labels, data.num_classes(data_notion)}; }
};

Session open_session(const Options& o) {
  if (o.dataset.empty()) fail(ErrorKind::Validation, "--dataset is required");
  if (o.checkpoint.empty()) fail(ErrorKind::Validation, "--checkpoint is required");
  Session s;
  s.config = run_config(o);
  s.data = read_dataset(o.dataset);
  s.net = load_checkpoint(o.checkpoint);
  const NetConfig& nc = s.net.config();
  if (nc.modalities.size() != s.data.modalities.size()) fail(ErrorKind::Validation, "dataset and checkpoint disagree on modalities");
  for (std::size_t m = 0; m < nc.modalities.size(); ++m) {
    const FeatureSpec& f = s.data.modalities[m];
    if (f.name != nc.modalities[m].name || f.kind != nc.modalities[m].kind || f.dim != nc.modalities[m].input_dim) {
      fail(ErrorKind::Validation, "dataset modality " + f.name + " does not match the checkpoint");
    }
  }
  s.notion = o.notion.empty() ? 0 : nc.notion_index(o.notion);
  s.data_notion = s.data.notion_index(nc.notions[static_cast<std::size_t>(s.notion)]);
  s.inputs = s.data.inputs();
  s.labels = s.data.labels(s.data_notion);
  s.modalities = o.modalities.empty() ? s.data.modality_names() : split(o.modalities, ',');
  if (s.modalities.empty()) fail(ErrorKind::Validation, "--modalities lists no modality");
  if (!o.modalities.empty()) {
    std::vector<bool> keep(nc.modalities.size(), false);
    for (const std::string& name : s.modalities) keep[static_cast<std::size_t>(nc.modality_index(name))] = true;
    for (ItemInput& item : s.inputs) {
      item = restrict_modalities(item, keep);
      if (item.available() == 0) fail(ErrorKind::Validation, "an item has none of the selected modalities");
    }
  }
  for (const Record& r : s.data.records) s.ctx.ids.push_back(r.id);
  s.ctx.class_names = s.data.notions[static_cast<std::size_t>(s.data_notion)].classes;
  s.ctx.run_config = run_config_json(s.config);
  s.ctx.seed = s.config.seed;
  return s;
}

void require_out(const Options& o) {
  if (o.out.empty()) fail(ErrorKind::Validation, "--out is required");
}

void cmd_synth(const Options& o) {
  require_out(o);
  SynthConfig c = synth_preset(o.preset);
  if (o.seed) c.seed = *o.seed;
  c.split = o.split;
  if (o.items > 0) c.num_items = o.items;
  write_text_file(o.out, serialize_dataset(synth_generate(c)));
}

void cmd_train(const Options& o) {
  if (o.dataset.empty()) fail(ErrorKind::Validation, "--dataset is required");
  const std::string path = !o.checkpoint.empty() ? o.checkpoint : o.out;
  if (path.empty()) fail(ErrorKind::Validation, "--checkpoint is required");
  const RunConfig config = run_config(o);
  const Dataset data = read_dataset(o.dataset);
  net_config_for(data, config);
  const ConditionalNet net = train(data, config, [&](const EpochStats& s, const ConditionalNet& current) {
    save_checkpoint(current, path);
    std::cerr << "epoch " << s.epoch << " lr " << s.lr << " steps " << s.steps << " loss " << s.mean_loss << " active "
              << s.active_fraction << "\n";
  });
  save_checkpoint(net, path);
}

void cmd_embed(const Options& o) {
  require_out(o);
  Session s = open_session(o);
  const auto embeddings = embed_set(s.net, s.inputs, s.notion, s.config.mc, s.config.seed);
  write_text_file(o.out, embedding_export(embeddings, s.ctx.ids, s.net.config().notions[static_cast<std::size_t>(s.notion)]));
}

void cmd_retrieve(const Options& o) {
  Session s = open_session(o);
  const auto wanted = split(o.queries, ',');
  if (wanted.empty()) fail(ErrorKind::Validation, "--query lists no item id");
  const Matrix emb = o.baseline ? baseline_matrix(s.net, s.inputs, s.notion)
                                : stack_means(embed_set(s.net, s.inputs, s.notion, s.config.mc, s.config.seed),
                                              s.config.renormalize);
  const RetrievalReport r = evaluate(emb, s.labels, s.data.num_classes(s.data_notion), {1, 5}, o.top);
  for (const std::string& id : wanted) {
    auto it = std::find(s.ctx.ids.begin(), s.ctx.ids.end(), id);
    if (it == s.ctx.ids.end()) fail(ErrorKind::Index, "unknown item id '" + id + "'");
    const auto q = static_cast<std::size_t>(it - s.ctx.ids.begin());
    std::cout << id << "\t" << s.ctx.class_names[static_cast<std::size_t>(s.labels[q])];
    for (Index g : r.queries[q].ranking) {
      std::cout << "\t" << s.ctx.ids[static_cast<std::size_t>(g)] << ":"
                << s.ctx.class_names[static_cast<std::size_t>(s.labels[static_cast<std::size_t>(g)])];
    }
    std::cout << "\n";
  }
}

void cmd_eval(const Options& o) {
  require_out(o);
  Session s = open_session(o);
  const std::string notion = s.net.config().notions[static_cast<std::size_t>(s.notion)];
  RetrievalReport r;
  std::optional<double> uncertainty;
  if (o.baseline) {
    r = evaluate(baseline_matrix(s.net, s.inputs, s.notion), s.labels, s.data.num_classes(s.data_notion));
    r.config = {notion, "baseline", 1, s.net.config().dropout_rate, s.modalities, false};
  } else {
    const auto embeddings = embed_set(s.net, s.inputs, s.notion, s.config.mc, s.config.seed);
    r = evaluate(stack_means(embeddings, s.config.renormalize), s.labels, s.data.num_classes(s.data_notion));
    r.config = {notion, "mc", s.config.mc, s.net.config().dropout_rate, s.modalities, s.config.renormalize};
    uncertainty = dataset_uncertainty(embeddings, s.data.num_classes(s.data_notion));
  }
  write_text_file(o.out, retrieval_json(r, s.ctx));
  write_text_file(o.out + ".tsv", table_header() + table_row(r, uncertainty));
}

void cmd_sweep(const Options& o) {
  require_out(o);
  Session s = open_session(o);
  std::vector<Index> values = s.config.sweep_mc;
  if (!o.mc_values.empty()) {
    values.clear();
    for (const std::string& v : split(o.mc_values, ',')) {
      try {
        values.push_back(std::stoll(v));
      } catch (const std::exception&) {
        fail(ErrorKind::Validation, "--mc-values: '" + v + "' is not an integer");
      }
      if (values.back() < 1) fail(ErrorKind::Validation, "--mc-values entries must be >= 1");
    }
  }
  SweepReport sweep = mc_sweep(s.net, s.eval_set(), s.notion, values, s.config.seed, s.config.renormalize);
  for (RetrievalReport& r : sweep.reports) r.config.modalities = s.modalities;
  write_text_file(o.out, sweep_json(sweep, s.ctx));
  write_text_file(o.out + ".tsv", sweep_table(sweep));
}

void cmd_uncertainty(const Options& o) {
  require_out(o);
  Session s = open_session(o);
  const auto embeddings = embed_set(s.net, s.inputs, s.notion, s.config.mc, s.config.seed);
  const auto rows = per_class_uncertainty(embeddings, s.labels, s.notion);
  const double value = dataset_uncertainty(embeddings, s.data.num_classes(s.data_notion));
  const std::string notion = s.net.config().notions[static_cast<std::size_t>(s.notion)];
  write_text_file(o.out, uncertainty_json(rows, value, s.config.mc, notion, s.ctx));
  write_text_file(o.out + ".tsv", uncertainty_table(rows, notion, s.ctx));
}

void cmd_ablate(const Options& o) {
  require_out(o);
  Options full = o;
  full.modalities.clear();
  Session s = open_session(full);
  std::vector<std::vector<std::string>> subsets;
  if (!o.subsets.empty()) {
    for (const std::string& group : split(o.subsets, ';')) subsets.push_back(split(group, ','));
  } else {
    subsets.push_back(s.modalities);
    if (s.modalities.size() > 1) {
      for (const std::string& m : s.modalities) subsets.push_back({m});
    }
  }
  const auto entries = modality_ablation(s.net, s.eval_set(), s.notion, subsets, s.config.mc, s.config.seed);
  write_text_file(o.out, ablation_json(entries, s.ctx));
  write_text_file(o.out + ".tsv", ablation_table(entries));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-notion conditional retrieval with Monte Carlo dropout"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&o](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "Run configuration (flat JSON object)");
    cmd->add_option("--seed", o.seed, "Seed overriding the configuration");
  };
  const auto inference = [&](CLI::App* cmd) {
    common(cmd);
    cmd->add_option("--dataset", o.dataset, "Dataset file")->required();
    cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
    cmd->add_option("--notion", o.notion, "Similarity notion (default: the first)");
    cmd->add_option("--mc", o.mc, "Monte Carlo passes (default 50)");
    cmd->add_option("--modalities", o.modalities, "Comma separated modalities to feed");
  };

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  synth->add_option("--preset", o.preset, "hdd-like | noiseless | balanced");
  synth->add_option("--seed", o.seed, "Prototype and sample seed");
  synth->add_option("--split", o.split, "Sample stream; splits of one seed share classes");
  synth->add_option("--items", o.items, "Item count override");
  synth->add_option("--out", o.out, "Output dataset file")->required();

  auto* train_cmd = app.add_subcommand("train", "Train a conditional network");
  common(train_cmd);
  train_cmd->add_option("--dataset", o.dataset, "Training dataset")->required();
  train_cmd->add_option("--checkpoint,--out", o.checkpoint, "Checkpoint written after every epoch")->required();

  auto* embed_cmd = app.add_subcommand("embed", "Export MC embeddings");
  inference(embed_cmd);
  embed_cmd->add_option("--out", o.out, "Embedding file (JSON lines)")->required();

  auto* retrieve = app.add_subcommand("retrieve", "Print the nearest gallery items of queries");
  inference(retrieve);
  retrieve->add_option("--query", o.queries, "Comma separated query ids")->required();
  retrieve->add_option("--top", o.top, "Gallery items per query");
  retrieve->add_flag("--baseline", o.baseline, "Dropout disabled, single pass");

  auto* eval = app.add_subcommand("eval", "Leave-one-out retrieval evaluation");
  inference(eval);
  eval->add_option("--out", o.out, "Report file; a table goes to <out>.tsv")->required();
  eval->add_flag("--baseline", o.baseline, "Dropout disabled, single pass");

  auto* sweep = app.add_subcommand("sweep", "Baseline and MC evaluation over several mc values");
  inference(sweep);
  sweep->add_option("--mc-values", o.mc_values, "Comma separated mc values");
  sweep->add_option("--out", o.out, "Report file; a table goes to <out>.tsv")->required();

  auto* unc = app.add_subcommand("uncertainty", "Per-class and dataset uncertainty");
  inference(unc);
  unc->add_option("--out", o.out, "Report file; a table goes to <out>.tsv")->required();

  auto* ablate = app.add_subcommand("ablate", "Evaluation with modality subsets");
  inference(ablate);
  ablate->add_option("--subsets", o.subsets, "Subsets as a;b;a,b (default: all, then each alone)");
  ablate->add_option("--out", o.out, "Report file; a table goes to <out>.tsv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[usage]: " << e.what() << "\n";
    return kValidation;
  }

  try {
    if (*synth) cmd_synth(o);
    else if (*train_cmd) cmd_train(o);
    else if (*embed_cmd) cmd_embed(o);
    else if (*retrieve) cmd_retrieve(o);
    else if (*eval) cmd_eval(o);
    else if (*sweep) cmd_sweep(o);
    else if (*unc) cmd_uncertainty(o);
    else if (*ablate) cmd_ablate(o);
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error[runtime]: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
