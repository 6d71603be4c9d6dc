#pragma once

#include "mcr/bayes.hpp"
#include "mcr/evalkit.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mcr {

/// Names used to render indices in reports.
struct ReportContext {
  std::vector<std::string> ids;          // item ids, dataset order
  std::vector<std::string> class_names;  // classes of the reported notion
  std::string run_config;                // JSON echo of the run configuration
  std::uint64_t seed = 0;
};

/// Columns of every flat report table, tab separated, in this order:
///   notion inference mc dropout modalities micro_map macro_map top1 top5
///   valid_queries excluded_queries dataset_uncertainty
/// `modalities` is a '+' joined list; empty cells mean not applicable.
extern const std::vector<std::string> kTableColumns;

std::string table_header();
std::string table_row(const RetrievalReport& report, std::optional<double> uncertainty = std::nullopt);

std::string retrieval_json(const RetrievalReport& report, const ReportContext& ctx);
std::string sweep_json(const SweepReport& sweep, const ReportContext& ctx);
std::string sweep_table(const SweepReport& sweep);
std::string ablation_json(std::span<const AblationEntry> entries, const ReportContext& ctx);
std::string ablation_table(std::span<const AblationEntry> entries);

/// Per-class uncertainty columns: notion class size mean_variance_x1e3
/// normalized_variance_x1e3 (both variances multiplied by 1e3).
std::string uncertainty_json(std::span<const ClassUncertainty> rows, double dataset_value, Index mc,
                             const std::string& notion, const ReportContext& ctx);
std::string uncertainty_table(std::span<const ClassUncertainty> rows, const std::string& notion,
                              const ReportContext& ctx);

/// One JSON object per line: {"id","notion","mc_count","mean":[..],"var":[..]}.
std::string embedding_export(std::span<const McEmbedding> embeddings, std::span<const std::string> ids,
                             const std::string& notion);

/// Writes `text` to `path` through a temporary file and rename.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace mcr
