#include "mcr/bayes.hpp"

#include "mcr/error.hpp"

#include <map>

namespace mcr {

namespace {
constexpr std::uint64_t kMcKey = 0x4d43'd20b;  // fixed seed half of every MC pass stream
}

std::vector<Vector> mc_passes(const ConditionalNet& net, const ItemInput& item, Index notion, Index mc,
                              std::uint64_t seed, DropoutMode mode) {
  if (mc < 1) fail(ErrorKind::Arity, "Monte Carlo embedding needs mc >= 1");
  const ForwardConfig config{mode, FrameSampling::Even};
  std::vector<Vector> passes;
  passes.reserve(static_cast<std::size_t>(mc));
  for (Index i = 0; i < mc; ++i) {
    RngStream rng(kMcKey, seed + static_cast<std::uint64_t>(i));
    passes.push_back(net.forward(item, notion, config, rng));
  }
  return passes;
}

McEmbedding aggregate_passes(std::span<const Vector> passes) {
  if (passes.empty()) fail(ErrorKind::Arity, "cannot aggregate zero Monte Carlo passes");
  const Vector& pivot = passes[0];
  const auto n = static_cast<double>(passes.size());
  Vector shift = Vector::Zero(pivot.size());
  for (const Vector& p : passes) shift += p - pivot;
  McEmbedding out;
  out.mc_count = static_cast<Index>(passes.size());
  out.mean = pivot + shift / n;
  out.var = Vector::Zero(pivot.size());
  if (passes.size() >= 2) {
    for (const Vector& p : passes) out.var += (p - out.mean).cwiseAbs2();
    out.var /= n - 1.0;
  }
  return out;
}

McEmbedding mc_embed(const ConditionalNet& net, const ItemInput& item, Index notion, Index mc, std::uint64_t seed,
                     DropoutMode mode) {
  const std::vector<Vector> passes = mc_passes(net, item, notion, mc, seed, mode);
  return aggregate_passes(passes);
}

Vector baseline_embed(const ConditionalNet& net, const ItemInput& item, Index notion) {
  RngStream unused(kMcKey, 0);
  return net.forward(item, notion, ForwardConfig::deterministic(), unused);
}

std::uint64_t item_seed(std::uint64_t seed, std::size_t item_index) {
  return derive_stream({seed, static_cast<std::uint64_t>(item_index)});
}

double scalar_uncertainty(const McEmbedding& e) { return e.var.size() == 0 ? 0.0 : e.var.mean(); }

std::vector<ClassUncertainty> per_class_uncertainty(std::span<const McEmbedding> embeddings,
                                                    std::span<const int> labels, Index notion) {
  if (embeddings.empty()) fail(ErrorKind::Input, "per-class uncertainty over an empty embedding set");
  if (embeddings.size() != labels.size()) fail(ErrorKind::Input, "embeddings and labels are not aligned");
  std::map<int, std::pair<double, Index>> acc;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    auto& [sum, count] = acc[labels[i]];
    sum += scalar_uncertainty(embeddings[i]);
    ++count;
  }
  std::vector<ClassUncertainty> rows;
  for (const auto& [label, entry] : acc) {
    ClassUncertainty row;
    row.notion = notion;
    row.label = label;
    row.size = entry.second;
    row.mean_variance = entry.first / static_cast<double>(entry.second);
    row.normalized_variance = row.mean_variance / static_cast<double>(entry.second);
    rows.push_back(row);
  }
  return rows;
}

double dataset_uncertainty(std::span<const McEmbedding> embeddings, Index num_classes) {
  if (num_classes < 1) fail(ErrorKind::Parameter, "dataset uncertainty needs num_classes >= 1");
  if (embeddings.empty()) return 0.0;
  double sum = 0.0;
  for (const McEmbedding& e : embeddings) sum += scalar_uncertainty(e);
  return sum / static_cast<double>(embeddings.size()) / static_cast<double>(num_classes);
}

Matrix stack_means(std::span<const McEmbedding> embeddings, bool renormalize) {
  if (embeddings.empty()) return {};
  Matrix out(static_cast<Index>(embeddings.size()), embeddings[0].mean.size());
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const Vector row = renormalize ? Vector(l2_normalize(embeddings[i].mean)) : embeddings[i].mean;
    out.row(static_cast<Index>(i)) = row.transpose();
  }
  return out;
}

}  // namespace mcr
