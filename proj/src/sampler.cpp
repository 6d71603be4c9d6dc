#include "mcr/sampler.hpp"

#include "mcr/error.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <numeric>

namespace mcr {

namespace {

template <typename T>
void shuffle(std::vector<T>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

void require_square(const Matrix& d, std::span<const int> labels) {
  if (d.rows() != d.cols() || d.rows() != static_cast<Index>(labels.size())) {
    fail(ErrorKind::Dimension, "distance matrix and labels disagree in size");
  }
}

}  // namespace

std::vector<Index> PkBatch::flat() const {
  std::vector<Index> out;
  for (const auto& group : items) out.insert(out.end(), group.begin(), group.end());
  return out;
}

PkBatch pk_sample(std::span<const int> labels, Index P, Index K, RngStream& rng) {
  if (P < 1 || K < 1) fail(ErrorKind::Parameter, "PK sampling needs P >= 1 and K >= 1");
  std::map<int, std::vector<Index>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(static_cast<Index>(i));

  std::vector<int> eligible;
  std::vector<int> deficient;
  for (const auto& [label, items] : members) {
    (static_cast<Index>(items.size()) >= K ? eligible : deficient).push_back(label);
  }
  if (static_cast<Index>(eligible.size()) < P) {
    std::string msg = "PK sampling needs " + std::to_string(P) + " identities with >= " + std::to_string(K) +
                      " items, found " + std::to_string(eligible.size()) + "; deficient classes:";
    for (int c : deficient) msg += " " + std::to_string(c) + "(" + std::to_string(members[c].size()) + ")";
    fail(ErrorKind::Sampling, msg);
  }

  PkBatch batch;
  batch.P = P;
  batch.K = K;
  for (Index i = 0; i < P; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.below(eligible.size() - static_cast<std::size_t>(i));
    std::swap(eligible[static_cast<std::size_t>(i)], eligible[j]);
    const int label = eligible[static_cast<std::size_t>(i)];
    std::vector<Index> pool = members[label];
    std::vector<Index> chosen;
    for (Index k = 0; k < K; ++k) {
      const auto r = static_cast<std::size_t>(k) + rng.below(pool.size() - static_cast<std::size_t>(k));
      std::swap(pool[static_cast<std::size_t>(k)], pool[r]);
      chosen.push_back(pool[static_cast<std::size_t>(k)]);
    }
    batch.identities.push_back(label);
    batch.items.push_back(std::move(chosen));
  }
  return batch;
}

std::vector<TripletIdx> batch_hard_from_distances(const Matrix& distances, std::span<const int> labels) {
  require_square(distances, labels);
  const auto n = static_cast<Index>(labels.size());
  std::map<int, Index> counts;
  for (int l : labels) ++counts[l];
  if (counts.size() < 2) fail(ErrorKind::Mining, "batch-hard mining needs at least two labels in the batch");
  for (const auto& [label, count] : counts) {
    if (count < 2) fail(ErrorKind::Mining, "label " + std::to_string(label) + " has a single item in the batch");
  }
  std::vector<TripletIdx> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index a = 0; a < n; ++a) {
    Index pos = -1;
    Index neg = -1;
    for (Index j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[j] == labels[a]) {
        if (pos < 0 || distances(a, j) > distances(a, pos)) pos = j;
      } else if (neg < 0 || distances(a, j) < distances(a, neg)) {
        neg = j;
      }
    }
    out.push_back({a, pos, neg});
  }
  return out;
}

std::vector<TripletIdx> batch_hard_triplets(const Matrix& embeddings, std::span<const int> labels) {
  if (embeddings.rows() != static_cast<Index>(labels.size())) {
    fail(ErrorKind::Dimension, "embeddings and labels disagree in size");
  }
  return batch_hard_from_distances(pairwise_distances(embeddings), labels);
}

std::optional<Index> select_semi_hard_negative(const Matrix& distances, std::span<const int> labels, Index anchor,
                                               Index positive, double margin) {
  const double dap = distances(anchor, positive);
  const auto n = static_cast<Index>(labels.size());
  Index window = -1;
  Index beyond = -1;
  Index farthest = -1;
  for (Index j = 0; j < n; ++j) {
    if (labels[j] == labels[anchor]) continue;
    const double d = distances(anchor, j);
    if (d > dap && d < dap + margin && (window < 0 || d < distances(anchor, window))) window = j;
    if (d > dap && (beyond < 0 || d < distances(anchor, beyond))) beyond = j;
    if (farthest < 0 || d > distances(anchor, farthest)) farthest = j;
  }
  if (window >= 0) return window;
  if (beyond >= 0) return beyond;
  if (farthest >= 0) return farthest;
  return std::nullopt;
}

std::vector<TripletIdx> semi_hard_triplets(const Matrix& distances, std::span<const int> labels, double margin) {
  require_square(distances, labels);
  const auto n = static_cast<Index>(labels.size());
  std::vector<TripletIdx> out;
  for (Index a = 0; a < n; ++a) {
    for (Index p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      if (auto neg = select_semi_hard_negative(distances, labels, a, p, margin)) out.push_back({a, p, *neg});
    }
  }
  return out;
}

void MiningPlan::validate() const {
  if (sessions_per_draw < 1 || batch_size < 1 || max_triplets < 1 || fallback_group_size < 2) {
    fail(ErrorKind::Validation, "mining plan needs sessions_per_draw, batch_size, max_triplets >= 1 and group size >= 2");
  }
}

std::vector<std::vector<Index>> group_sessions(std::span<const std::optional<int>> session_ids,
                                               Index fallback_group_size, RngStream& rng) {
  std::map<int, std::vector<Index>> by_session;
  std::vector<Index> pooled;
  for (std::size_t i = 0; i < session_ids.size(); ++i) {
    if (session_ids[i]) {
      by_session[*session_ids[i]].push_back(static_cast<Index>(i));
    } else {
      pooled.push_back(static_cast<Index>(i));
    }
  }
  std::vector<std::vector<Index>> out;
  for (auto& [id, items] : by_session) out.push_back(std::move(items));
  shuffle(pooled, rng);
  for (std::size_t start = 0; start < pooled.size(); start += static_cast<std::size_t>(fallback_group_size)) {
    const std::size_t stop = std::min(pooled.size(), start + static_cast<std::size_t>(fallback_group_size));
    std::vector<Index> group(pooled.begin() + static_cast<std::ptrdiff_t>(start),
                             pooled.begin() + static_cast<std::ptrdiff_t>(stop));
    std::sort(group.begin(), group.end());
    out.push_back(std::move(group));
  }
  return out;
}

EpochSummary semi_hard_epoch(const std::vector<std::vector<Index>>& sessions,
                             std::span<const std::vector<int>> labels_by_notion, const EmbedFn& embed,
                             const MiningPlan& plan, double margin, RngStream& rng, const DrawFn& on_draw,
                             const WarnFn& warn, std::size_t first_step) {
  plan.validate();
  if (labels_by_notion.empty()) fail(ErrorKind::Input, "semi-hard mining needs labels for at least one notion");
  const auto report = [&warn](const std::string& msg) {
    if (warn) {
      warn(msg);
    } else {
      std::cerr << "warning: " << msg << "\n";
    }
  };
  EpochSummary summary;
  summary.order.resize(sessions.size());
  std::iota(summary.order.begin(), summary.order.end(), Index{0});
  shuffle(summary.order, rng);
  const auto& order = summary.order;

  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(plan.sessions_per_draw)) {
    MiningDraw draw;
    draw.step = first_step + summary.draws++;
    draw.notion = static_cast<Index>(draw.step % labels_by_notion.size());
    const std::vector<int>& labels = labels_by_notion[static_cast<std::size_t>(draw.notion)];
    const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(plan.sessions_per_draw));
    for (std::size_t s = start; s < stop; ++s) {
      draw.sessions.push_back(order[s]);
      const auto& items = sessions[static_cast<std::size_t>(order[s])];
      draw.items.insert(draw.items.end(), items.begin(), items.end());
    }
    const auto n = static_cast<Index>(draw.items.size());
    if (n < 2) {
      ++summary.skipped;
      report("session draw with fewer than two items skipped");
      continue;
    }

    Matrix embeddings;
    for (Index c = 0; c < n; c += plan.batch_size) {
      const Index len = std::min(plan.batch_size, n - c);
      Matrix chunk = embed(std::span<const Index>(draw.items).subspan(static_cast<std::size_t>(c), static_cast<std::size_t>(len)),
                           draw.notion);
      if (embeddings.size() == 0) embeddings.resize(n, chunk.cols());
      embeddings.middleRows(c, len) = chunk;
    }
    const Matrix distances = pairwise_distances(embeddings);
    std::vector<int> local_labels(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) local_labels[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(draw.items[static_cast<std::size_t>(i)])];

    std::vector<TripletIdx> local = semi_hard_triplets(distances, local_labels, margin);
    for (Index a = 0; a < n; ++a) {
      for (Index p = 0; p < n; ++p) {
        if (p != a && local_labels[static_cast<std::size_t>(a)] == local_labels[static_cast<std::size_t>(p)]) ++draw.positive_pairs;
      }
    }
    if (local.empty()) {
      ++summary.skipped;
      report("session draw without usable positive pairs skipped");
      continue;
    }
    if (static_cast<Index>(local.size()) > plan.max_triplets) {
      shuffle(local, rng);
      local.resize(static_cast<std::size_t>(plan.max_triplets));
      draw.truncated = true;
    }
    draw.triplets.reserve(local.size());
    for (const TripletIdx& t : local) {
      draw.triplets.push_back({draw.items[static_cast<std::size_t>(t.anchor)], draw.items[static_cast<std::size_t>(t.positive)],
                               draw.items[static_cast<std::size_t>(t.negative)]});
    }
    ++summary.emitted;
    on_draw(draw);
  }
  return summary;
}

}  // namespace mcr
