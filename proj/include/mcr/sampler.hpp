#pragma once

#include "mcr/losses.hpp"
#include "mcr/rng.hpp"
#include "mcr/tensor.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mcr {

/// P identities x K items, grouped by identity, all drawn without replacement.
struct PkBatch {
  Index P = 0;
  Index K = 0;
  std::vector<int> identities;
  std::vector<std::vector<Index>> items;

  std::vector<Index> flat() const;
};

PkBatch pk_sample(std::span<const int> labels, Index P, Index K, RngStream& rng);

/// Symmetric Euclidean distance matrix over the rows of `embeddings`.
template <typename Derived>
Matrix pairwise_distances(const Eigen::MatrixBase<Derived>& embeddings) {
  const Index n = embeddings.rows();
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (embeddings.row(i) - embeddings.row(j)).norm();
    }
  }
  return d;
}

/// One triplet per anchor: its farthest positive and nearest negative in the
/// batch. Ties go to the lowest index. Indices refer to rows of the batch.
std::vector<TripletIdx> batch_hard_triplets(const Matrix& embeddings, std::span<const int> labels);
std::vector<TripletIdx> batch_hard_from_distances(const Matrix& distances, std::span<const int> labels);

/// Negative for the pair (anchor, positive): the nearest n with
/// D(a,p) < D(a,n) < D(a,p) + margin; failing that the nearest n with
/// D(a,n) > D(a,p); failing that the farthest negative. Ties go to the lowest
/// index. Returns nullopt when the rows hold no negative at all.
std::optional<Index> select_semi_hard_negative(const Matrix& distances, std::span<const int> labels, Index anchor,
                                               Index positive, double margin);

/// Triplets for every ordered positive pair (a, p), a != p.
std::vector<TripletIdx> semi_hard_triplets(const Matrix& distances, std::span<const int> labels, double margin);

struct MiningPlan {
  Index sessions_per_draw = 3;
  /// Embedding chunk size (b).
  Index batch_size = 512;
  /// Cap on triplets per draw (N_Tri).
  Index max_triplets = 400;
  /// Group size when the data carries no session ids.
  Index fallback_group_size = 128;

  void validate() const;
};

/// Items partitioned into sessions. Items without a session id are pooled and
/// split into random groups of `fallback_group_size`.
std::vector<std::vector<Index>> group_sessions(std::span<const std::optional<int>> session_ids,
                                               Index fallback_group_size, RngStream& rng);

/// One draw of the semi-hard procedure: the items embedded, the triplets to
/// train on (dataset indices), and bookkeeping.
struct MiningDraw {
  std::size_t step = 0;  // global draw counter, drives the notion schedule
  Index notion = 0;
  std::vector<Index> sessions;
  std::vector<Index> items;
  std::vector<TripletIdx> triplets;
  std::size_t positive_pairs = 0;
  bool truncated = false;
};

struct EpochSummary {
  std::vector<Index> order;  // session visiting order
  std::size_t draws = 0;
  std::size_t emitted = 0;
  std::size_t skipped = 0;
};

/// Maps dataset item indices to an [n, d] embedding matrix under a notion.
using EmbedFn = std::function<Matrix(std::span<const Index>, Index notion)>;
using DrawFn = std::function<void(const MiningDraw&)>;
using WarnFn = std::function<void(const std::string&)>;

/// One epoch of session-wise semi-hard mining. Sessions are visited in a
/// random order, `sessions_per_draw` at a time; each draw is embedded in
/// chunks of `batch_size`, mined over its full distance matrix, capped to
/// `max_triplets` by shuffle-and-truncate, and handed to `on_draw`. Draw d
/// (counted from `first_step`) mines labels of notion d mod M. Draws with no
/// positive pair are skipped with a warning.
EpochSummary semi_hard_epoch(const std::vector<std::vector<Index>>& sessions,
                             std::span<const std::vector<int>> labels_by_notion, const EmbedFn& embed,
                             const MiningPlan& plan, double margin, RngStream& rng, const DrawFn& on_draw,
                             const WarnFn& warn = {}, std::size_t first_step = 0);

}  // namespace mcr
