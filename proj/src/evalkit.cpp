#include "mcr/evalkit.hpp"

#include "mcr/error.hpp"
#include "mcr/sampler.hpp"

#include <algorithm>
#include <numeric>

namespace mcr {

std::optional<double> average_precision(std::span<const int> relevance) {
  double sum = 0.0;
  Index hits = 0;
  for (std::size_t r = 0; r < relevance.size(); ++r) {
    if (relevance[r] == 0) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

double RetrievalReport::top1() const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == 1) return top_k[i];
  }
  return 0.0;
}

RetrievalReport evaluate(const Matrix& embeddings, std::span<const int> labels, Index num_classes,
                         std::vector<Index> ks, Index keep_ranking) {
  const auto n = static_cast<Index>(labels.size());
  if (n < 2) fail(ErrorKind::Input, "evaluation needs at least two items");
  if (embeddings.rows() != n) fail(ErrorKind::Dimension, "embeddings and labels disagree in size");
  for (int l : labels) {
    if (l < 0 || l >= num_classes) fail(ErrorKind::Index, "label " + std::to_string(l) + " outside the class range");
  }

  RetrievalReport report;
  report.ks = std::move(ks);
  report.top_k.assign(report.ks.size(), 0.0);
  std::vector<double> class_sum(static_cast<std::size_t>(num_classes), 0.0);
  report.class_queries.assign(static_cast<std::size_t>(num_classes), 0);

  const Matrix distances = pairwise_distances(embeddings);
  std::vector<Index> order(static_cast<std::size_t>(n - 1));
  std::vector<int> relevance(static_cast<std::size_t>(n - 1));
  double ap_sum = 0.0;
  for (Index q = 0; q < n; ++q) {
    std::iota(order.begin(), order.begin() + q, Index{0});
    std::iota(order.begin() + q, order.end(), q + 1);
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
      const double da = distances(q, a);
      const double db = distances(q, b);
      return da < db || (da == db && a < b);
    });
    for (std::size_t r = 0; r < order.size(); ++r) relevance[r] = labels[static_cast<std::size_t>(order[r])] == labels[static_cast<std::size_t>(q)];

    QueryResult result;
    result.query = q;
    result.ranking.assign(order.begin(), order.begin() + std::min<Index>(keep_ranking, n - 1));
    result.ap = average_precision(relevance);
    if (result.ap) {
      ++report.valid_queries;
      ap_sum += *result.ap;
      const auto c = static_cast<std::size_t>(labels[static_cast<std::size_t>(q)]);
      class_sum[c] += *result.ap;
      ++report.class_queries[c];
      for (std::size_t i = 0; i < report.ks.size(); ++i) {
        const auto depth = std::min<std::size_t>(static_cast<std::size_t>(report.ks[i]), relevance.size());
        const bool hit = std::any_of(relevance.begin(), relevance.begin() + static_cast<std::ptrdiff_t>(depth),
                                     [](int v) { return v != 0; });
        result.top_hits.push_back(hit);
        if (hit) report.top_k[i] += 1.0;
      }
    } else {
      ++report.excluded_queries;
    }
    report.queries.push_back(std::move(result));
  }

  if (report.valid_queries > 0) {
    report.micro_map = ap_sum / static_cast<double>(report.valid_queries);
    for (double& t : report.top_k) t /= static_cast<double>(report.valid_queries);
  }
  double macro_sum = 0.0;
  Index macro_classes = 0;
  report.class_ap.resize(static_cast<std::size_t>(num_classes));
  for (std::size_t c = 0; c < class_sum.size(); ++c) {
    if (report.class_queries[c] == 0) continue;
    report.class_ap[c] = class_sum[c] / static_cast<double>(report.class_queries[c]);
    macro_sum += *report.class_ap[c];
    ++macro_classes;
  }
  if (macro_classes > 0) report.macro_map = macro_sum / static_cast<double>(macro_classes);
  return report;
}

std::vector<McEmbedding> embed_set(const ConditionalNet& net, std::span<const ItemInput> items, Index notion, Index mc,
                                   std::uint64_t seed, DropoutMode mode) {
  std::vector<McEmbedding> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) out.push_back(mc_embed(net, items[i], notion, mc, item_seed(seed, i), mode));
  return out;
}

Matrix baseline_matrix(const ConditionalNet& net, std::span<const ItemInput> items, Index notion) {
  Matrix out(static_cast<Index>(items.size()), net.embedding_dim());
  for (std::size_t i = 0; i < items.size(); ++i) out.row(static_cast<Index>(i)) = baseline_embed(net, items[i], notion).transpose();
  return out;
}

namespace {

ReportConfig echo(const ConditionalNet& net, Index notion, const std::string& inference, Index mc,
                  const std::vector<std::string>& modalities, bool renormalized) {
  ReportConfig c;
  c.notion = net.config().notions.at(static_cast<std::size_t>(notion));
  c.inference = inference;
  c.mc = mc;
  c.dropout_rate = net.config().dropout_rate;
  c.modalities = modalities;
  c.renormalized = renormalized;
  return c;
}

std::vector<std::string> all_modalities(const ConditionalNet& net) {
  std::vector<std::string> out;
  for (const auto& m : net.config().modalities) out.push_back(m.name);
  return out;
}

SweepRow row_of(const RetrievalReport& r, double uncertainty) {
  SweepRow row;
  row.inference = r.config.inference;
  row.mc = r.config.mc;
  row.micro_map = r.micro_map;
  row.macro_map = r.macro_map;
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    if (r.ks[i] == 1) row.top1 = r.top_k[i];
    if (r.ks[i] == 5) row.top5 = r.top_k[i];
  }
  row.dataset_uncertainty = uncertainty;
  return row;
}

}  // namespace

SweepReport mc_sweep(const ConditionalNet& net, const EvalSet& set, Index notion, std::span<const Index> mc_values,
                     std::uint64_t seed, bool renormalize) {
  if (mc_values.empty()) fail(ErrorKind::Input, "sweep needs at least one mc value");
  const Index max_mc = *std::max_element(mc_values.begin(), mc_values.end());
  if (*std::min_element(mc_values.begin(), mc_values.end()) < 1) fail(ErrorKind::Arity, "sweep mc values must be >= 1");
  const auto names = all_modalities(net);

  SweepReport out;
  RetrievalReport base = evaluate(baseline_matrix(net, set.items, notion), set.labels, set.num_classes);
  base.config = echo(net, notion, "baseline", 1, names, false);
  out.rows.push_back(row_of(base, 0.0));
  out.reports.push_back(std::move(base));

  std::vector<std::vector<Vector>> passes;
  passes.reserve(set.items.size());
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    passes.push_back(mc_passes(net, set.items[i], notion, max_mc, item_seed(seed, i)));
  }
  for (Index mc : mc_values) {
    std::vector<McEmbedding> embeddings;
    embeddings.reserve(passes.size());
    for (const auto& p : passes) embeddings.push_back(aggregate_passes(std::span<const Vector>(p).first(static_cast<std::size_t>(mc))));
    RetrievalReport r = evaluate(stack_means(embeddings, renormalize), set.labels, set.num_classes);
    r.config = echo(net, notion, "mc", mc, names, renormalize);
    out.rows.push_back(row_of(r, dataset_uncertainty(embeddings, set.num_classes)));
    out.reports.push_back(std::move(r));
  }
  return out;
}

std::vector<AblationEntry> modality_ablation(const ConditionalNet& net, const EvalSet& set, Index notion,
                                             const std::vector<std::vector<std::string>>& subsets, Index mc,
                                             std::uint64_t seed) {
  std::vector<AblationEntry> out;
  for (const auto& subset : subsets) {
    if (subset.empty()) fail(ErrorKind::Input, "modality subset must be nonempty");
    std::vector<bool> keep(net.config().modalities.size(), false);
    for (const std::string& name : subset) keep[static_cast<std::size_t>(net.config().modality_index(name))] = true;
    std::vector<ItemInput> restricted;
    restricted.reserve(set.items.size());
    for (const ItemInput& item : set.items) {
      restricted.push_back(restrict_modalities(item, keep));
      if (restricted.back().available() == 0) fail(ErrorKind::Input, "an item has none of the selected modalities");
    }
    AblationEntry entry;
    entry.modalities = subset;
    entry.baseline = evaluate(baseline_matrix(net, restricted, notion), set.labels, set.num_classes);
    entry.baseline.config = echo(net, notion, "baseline", 1, subset, false);
    const auto embeddings = embed_set(net, restricted, notion, mc, seed);
    entry.mc = evaluate(stack_means(embeddings), set.labels, set.num_classes);
    entry.mc.config = echo(net, notion, "mc", mc, subset, false);
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace mcr
