#pragma once

#include "mcr/bayes.hpp"
#include "mcr/model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mcr {

/// Non-interpolated average precision of a ranked 0/1 relevance list: the
/// mean of precision@r over relevant ranks r. nullopt if nothing is relevant.
std::optional<double> average_precision(std::span<const int> relevance);

/// Where a report came from; echoed into every file written.
struct ReportConfig {
  std::string notion;
  std::string inference = "baseline";  // "baseline" or "mc"
  Index mc = 1;
  double dropout_rate = 0.0;
  std::vector<std::string> modalities;
  bool renormalized = false;
};

struct QueryResult {
  Index query = 0;
  std::vector<Index> ranking;   // leading gallery items, nearest first
  std::optional<double> ap;     // nullopt when the query's class has no other member
  std::vector<bool> top_hits;   // parallel to RetrievalReport::ks
};

struct RetrievalReport {
  ReportConfig config;
  double micro_map = 0.0;
  double macro_map = 0.0;
  std::vector<Index> ks;
  std::vector<double> top_k;            // hit rate at each k over valid queries
  std::vector<std::optional<double>> class_ap;  // per-class mean AP, nullopt without valid queries
  std::vector<Index> class_queries;     // valid queries per class
  Index valid_queries = 0;
  Index excluded_queries = 0;
  std::vector<QueryResult> queries;

  double top1() const;
};

/// Leave-one-out query-by-example: every item queries all others, ranked by
/// ascending Euclidean distance with ties broken by ascending index.
RetrievalReport evaluate(const Matrix& embeddings, std::span<const int> labels, Index num_classes,
                         std::vector<Index> ks = {1, 5}, Index keep_ranking = 10);

/// Items and labels under one notion.
struct EvalSet {
  std::span<const ItemInput> items;
  std::span<const int> labels;
  Index num_classes = 0;
};

struct SweepRow {
  std::string inference;
  Index mc = 1;
  double micro_map = 0.0;
  double macro_map = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
  double dataset_uncertainty = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;  // baseline first, then mc values in the given order
  std::vector<RetrievalReport> reports;
};

std::vector<McEmbedding> embed_set(const ConditionalNet& net, std::span<const ItemInput> items, Index notion, Index mc,
                                   std::uint64_t seed, DropoutMode mode = DropoutMode::Stochastic);
Matrix baseline_matrix(const ConditionalNet& net, std::span<const ItemInput> items, Index notion);

/// One baseline evaluation (dropout disabled) plus one MC evaluation per
/// entry of mc_values. Passes are shared: mc = k uses the first k passes of
/// the largest count.
SweepReport mc_sweep(const ConditionalNet& net, const EvalSet& set, Index notion, std::span<const Index> mc_values,
                     std::uint64_t seed, bool renormalize = false);

struct AblationEntry {
  std::vector<std::string> modalities;
  RetrievalReport baseline;
  RetrievalReport mc;
};

/// Baseline and MC evaluation feeding only the listed modalities.
std::vector<AblationEntry> modality_ablation(const ConditionalNet& net, const EvalSet& set, Index notion,
                                             const std::vector<std::vector<std::string>>& subsets, Index mc,
                                             std::uint64_t seed);

}  // namespace mcr
