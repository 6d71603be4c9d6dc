#include "mcr/report_io.hpp"

#include "mcr/error.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mcr {

using nlohmann::ordered_json;

const std::vector<std::string> kTableColumns = {
    "notion", "inference", "mc",   "dropout",       "modalities",
    "micro_map", "macro_map", "top1", "top5", "valid_queries", "excluded_queries", "dataset_uncertainty"};

namespace {

std::string number(double x) { return ordered_json(x).dump(); }

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

std::optional<double> top_at(const RetrievalReport& r, Index k) {
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    if (r.ks[i] == k) return r.top_k[i];
  }
  return std::nullopt;
}

ordered_json config_echo(const ReportContext& ctx) {
  return ctx.run_config.empty() ? ordered_json::object() : ordered_json::parse(ctx.run_config);
}

ordered_json report_body(const RetrievalReport& r, const ReportContext& ctx) {
  ordered_json j;
  j["notion"] = r.config.notion;
  j["inference"] = r.config.inference;
  j["mc"] = r.config.mc;
  j["dropout"] = r.config.dropout_rate;
  j["modalities"] = r.config.modalities;
  j["renormalized"] = r.config.renormalized;
  j["micro_map"] = r.micro_map;
  j["macro_map"] = r.macro_map;
  ordered_json top = ordered_json::object();
  for (std::size_t i = 0; i < r.ks.size(); ++i) top[std::to_string(r.ks[i])] = r.top_k[i];
  j["top_k"] = top;
  j["valid_queries"] = r.valid_queries;
  j["excluded_queries"] = r.excluded_queries;
  ordered_json classes = ordered_json::array();
  for (std::size_t c = 0; c < r.class_ap.size(); ++c) {
    ordered_json row;
    row["class"] = c < ctx.class_names.size() ? ctx.class_names[c] : std::to_string(c);
    row["ap"] = r.class_ap[c] ? ordered_json(*r.class_ap[c]) : ordered_json(nullptr);
    row["queries"] = r.class_queries[c];
    classes.push_back(row);
  }
  j["classes"] = classes;
  const auto id_of = [&ctx](Index i) {
    return static_cast<std::size_t>(i) < ctx.ids.size() ? ctx.ids[static_cast<std::size_t>(i)] : std::to_string(i);
  };
  ordered_json queries = ordered_json::array();
  for (const QueryResult& q : r.queries) {
    ordered_json row;
    row["id"] = id_of(q.query);
    row["ap"] = q.ap ? ordered_json(*q.ap) : ordered_json(nullptr);
    ordered_json ranking = ordered_json::array();
    for (Index g : q.ranking) ranking.push_back(id_of(g));
    row["ranking"] = ranking;
    ordered_json hits = ordered_json::object();
    for (std::size_t i = 0; i < r.ks.size() && i < q.top_hits.size(); ++i) hits[std::to_string(r.ks[i])] = static_cast<bool>(q.top_hits[i]);
    row["hits"] = hits;
    queries.push_back(row);
  }
  j["queries"] = queries;
  return j;
}

}  // namespace

std::string table_header() { return join(kTableColumns, "\t") + "\n"; }

std::string table_row(const RetrievalReport& r, std::optional<double> uncertainty) {
  const auto opt = [](std::optional<double> v) { return v ? number(*v) : std::string(); };
  std::vector<std::string> cells = {
      r.config.notion,
      r.config.inference,
      std::to_string(r.config.mc),
      number(r.config.dropout_rate),
      join(r.config.modalities, "+"),
      number(r.micro_map),
      number(r.macro_map),
      opt(top_at(r, 1)),
      opt(top_at(r, 5)),
      std::to_string(r.valid_queries),
      std::to_string(r.excluded_queries),
      opt(uncertainty),
  };
  return join(cells, "\t") + "\n";
}

std::string retrieval_json(const RetrievalReport& report, const ReportContext& ctx) {
  ordered_json j;
  j["kind"] = "retrieval";
  j["seed"] = ctx.seed;
  j["config"] = config_echo(ctx);
  j["report"] = report_body(report, ctx);
  return j.dump(1) + "\n";
}

std::string sweep_json(const SweepReport& sweep, const ReportContext& ctx) {
  ordered_json j;
  j["kind"] = "sweep";
  j["seed"] = ctx.seed;
  j["config"] = config_echo(ctx);
  ordered_json rows = ordered_json::array();
  for (const SweepRow& r : sweep.rows) {
    rows.push_back({{"inference", r.inference},
                    {"mc", r.mc},
                    {"micro_map", r.micro_map},
                    {"macro_map", r.macro_map},
                    {"top1", r.top1},
                    {"top5", r.top5},
                    {"dataset_uncertainty", r.dataset_uncertainty}});
  }
  j["rows"] = rows;
  ordered_json reports = ordered_json::array();
  for (const RetrievalReport& r : sweep.reports) reports.push_back(report_body(r, ctx));
  j["reports"] = reports;
  return j.dump(1) + "\n";
}

std::string sweep_table(const SweepReport& sweep) {
  std::string out = table_header();
  for (std::size_t i = 0; i < sweep.reports.size(); ++i) {
    const bool mc = sweep.reports[i].config.inference == "mc";
    out += table_row(sweep.reports[i], mc ? std::optional<double>(sweep.rows[i].dataset_uncertainty) : std::nullopt);
  }
  return out;
}

std::string ablation_json(std::span<const AblationEntry> entries, const ReportContext& ctx) {
  ordered_json j;
  j["kind"] = "ablation";
  j["seed"] = ctx.seed;
  j["config"] = config_echo(ctx);
  ordered_json rows = ordered_json::array();
  for (const AblationEntry& e : entries) {
    rows.push_back({{"modalities", e.modalities}, {"baseline", report_body(e.baseline, ctx)}, {"mc", report_body(e.mc, ctx)}});
  }
  j["subsets"] = rows;
  return j.dump(1) + "\n";
}

std::string ablation_table(std::span<const AblationEntry> entries) {
  std::string out = table_header();
  for (const AblationEntry& e : entries) out += table_row(e.baseline) + table_row(e.mc);
  return out;
}

std::string uncertainty_json(std::span<const ClassUncertainty> rows, double dataset_value, Index mc,
                             const std::string& notion, const ReportContext& ctx) {
  ordered_json j;
  j["kind"] = "uncertainty";
  j["seed"] = ctx.seed;
  j["config"] = config_echo(ctx);
  j["notion"] = notion;
  j["mc"] = mc;
  j["dataset_uncertainty"] = dataset_value;
  j["dataset_uncertainty_x1e3"] = dataset_value * 1e3;
  ordered_json classes = ordered_json::array();
  for (const ClassUncertainty& r : rows) {
    const auto c = static_cast<std::size_t>(r.label);
    classes.push_back({{"class", c < ctx.class_names.size() ? ctx.class_names[c] : std::to_string(r.label)},
                       {"size", r.size},
                       {"mean_variance", r.mean_variance},
                       {"mean_variance_x1e3", r.mean_variance * 1e3},
                       {"normalized_variance", r.normalized_variance},
                       {"normalized_variance_x1e3", r.normalized_variance * 1e3}});
  }
  j["classes"] = classes;
  return j.dump(1) + "\n";
}

std::string uncertainty_table(std::span<const ClassUncertainty> rows, const std::string& notion,
                              const ReportContext& ctx) {
  std::string out = "notion\tclass\tsize\tmean_variance_x1e3\tnormalized_variance_x1e3\n";
  for (const ClassUncertainty& r : rows) {
    const auto c = static_cast<std::size_t>(r.label);
    out += notion + "\t" + (c < ctx.class_names.size() ? ctx.class_names[c] : std::to_string(r.label)) + "\t" +
           std::to_string(r.size) + "\t" + number(r.mean_variance * 1e3) + "\t" + number(r.normalized_variance * 1e3) + "\n";
  }
  return out;
}

std::string embedding_export(std::span<const McEmbedding> embeddings, std::span<const std::string> ids,
                             const std::string& notion) {
  if (embeddings.size() != ids.size()) fail(ErrorKind::Dimension, "embedding export: ids and embeddings disagree in count");
  std::string out;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const McEmbedding& e = embeddings[i];
    ordered_json j;
    j["id"] = ids[i];
    j["notion"] = notion;
    j["mc_count"] = e.mc_count;
    j["mean"] = std::vector<double>(e.mean.data(), e.mean.data() + e.mean.size());
    j["var"] = std::vector<double>(e.var.data(), e.var.data() + e.var.size());
    out += j.dump() + "\n";
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path);
    out << text;
    if (!out) fail(ErrorKind::Io, "write failed for " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) fail(ErrorKind::Io, "cannot move " + tmp + " to " + path);
}

}  // namespace mcr
