#pragma once

#include "mcr/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mcr {

/// First and second moments of repeated stochastic forward passes.
/// `mean` is the retrieval embedding (not renormalized); `var` is the
/// per-dimension unbiased sample variance, zero for a single pass.
struct McEmbedding {
  Vector mean;
  Vector var;
  Index mc_count = 0;
};

/// The mc stochastic passes for one item; pass i draws from stream seed + i.
std::vector<Vector> mc_passes(const ConditionalNet& net, const ItemInput& item, Index notion, Index mc,
                              std::uint64_t seed, DropoutMode mode = DropoutMode::Stochastic);

/// Two-pass moments, shifted by the first pass: identical passes give that
/// pass back bit for bit and an exactly zero variance.
McEmbedding aggregate_passes(std::span<const Vector> passes);

McEmbedding mc_embed(const ConditionalNet& net, const ItemInput& item, Index notion, Index mc, std::uint64_t seed,
                     DropoutMode mode = DropoutMode::Stochastic);

/// Deterministic single pass with dropout disabled.
Vector baseline_embed(const ConditionalNet& net, const ItemInput& item, Index notion);

/// Per-item base seed used by dataset-level MC embedding.
std::uint64_t item_seed(std::uint64_t seed, std::size_t item_index);

/// Mean over dimensions of the variance.
double scalar_uncertainty(const McEmbedding& e);

struct ClassUncertainty {
  Index notion = 0;
  int label = 0;
  Index size = 0;
  /// Mean scalar_uncertainty over class members.
  double mean_variance = 0.0;
  /// mean_variance / size.
  double normalized_variance = 0.0;
};

/// Rows in class order; classes without members are omitted.
std::vector<ClassUncertainty> per_class_uncertainty(std::span<const McEmbedding> embeddings,
                                                    std::span<const int> labels, Index notion);

/// Mean scalar uncertainty over all embeddings divided by num_classes.
double dataset_uncertainty(std::span<const McEmbedding> embeddings, Index num_classes);

/// Stack the means (optionally renormalized) into an [n, d] retrieval matrix.
Matrix stack_means(std::span<const McEmbedding> embeddings, bool renormalize = false);

}  // namespace mcr
