#include "mcr/train.hpp"

#include "mcr/error.hpp"
#include "mcr/losses.hpp"
#include "mcr/optim.hpp"
#include "mcr/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace mcr {

namespace {

constexpr std::uint64_t kInitTag = 0x494e;
constexpr std::uint64_t kMineTag = 0x4d49;
constexpr std::uint64_t kStepTag = 0x5354;

struct Trainer {
  const Dataset& data;
  const RunConfig& config;
  ConditionalNet net;
  Adam adam;
  std::vector<ItemInput> inputs;
  std::vector<Index> notion_map;  // net notion -> dataset notion
  std::vector<std::vector<int>> labels;  // per net notion

  double loss_sum = 0.0;
  std::size_t steps = 0;
  std::size_t triplets = 0;
  std::size_t active = 0;

  Trainer(const Dataset& d, const RunConfig& c)
      : data(d),
        config(c),
        net(net_config_for(d, c), derive_stream({kInitTag, c.seed})),
        adam(AdamConfig{0.9, 0.999, 1e-8, c.weight_decay}),
        inputs(d.inputs()) {
    for (const std::string& name : net.config().notions) {
      notion_map.push_back(data.notion_index(name));
      labels.push_back(data.labels(notion_map.back()));
    }
  }

  /// One optimizer step on dataset-indexed triplets under `notion`.
  void step(std::size_t global_step, Index notion, const std::vector<TripletIdx>& batch_triplets, double lr) {
    std::map<Index, std::size_t> slot;
    std::vector<Index> items;
    for (const TripletIdx& t : batch_triplets) {
      for (Index i : {t.anchor, t.positive, t.negative}) {
        if (slot.emplace(i, items.size()).second) items.push_back(i);
      }
    }
    std::vector<ConditionalNet::Trace> traces(items.size());
    std::vector<Vector> embeddings(items.size());
    for (std::size_t k = 0; k < items.size(); ++k) {
      RngStream rng(config.seed, derive_stream({kStepTag, global_step, static_cast<std::uint64_t>(items[k])}));
      embeddings[k] = net.forward(inputs[static_cast<std::size_t>(items[k])], notion, ForwardConfig::training(), rng, &traces[k]);
    }
    apply(batch_triplets, slot, traces, embeddings, lr);
  }

  void apply(const std::vector<TripletIdx>& batch_triplets, const std::map<Index, std::size_t>& slot,
             const std::vector<ConditionalNet::Trace>& traces, const std::vector<Vector>& embeddings, double lr) {
    std::vector<LossValue> losses;
    losses.reserve(batch_triplets.size());
    for (const TripletIdx& t : batch_triplets) {
      const Vector& a = embeddings[slot.at(t.anchor)];
      const Vector& p = embeddings[slot.at(t.positive)];
      const Vector& n = embeddings[slot.at(t.negative)];
      losses.push_back(config.loss == LossKind::UnitMargin ? triplet_regression(a, p, n, config.margin)
                                                            : softmargin_triplet(a, p, n));
    }
    auto params = net.parameters();
    zero_grads(params);
    const BatchObjective objective = batch_objective(losses, params, config.weight_decay);
    if (!std::isfinite(objective.value)) fail(ErrorKind::Divergence, "non-finite training loss");

    std::vector<Vector> grads(embeddings.size());
    for (std::size_t k = 0; k < embeddings.size(); ++k) grads[k] = Vector::Zero(embeddings[k].size());
    for (std::size_t j = 0; j < batch_triplets.size(); ++j) {
      const TripletIdx& t = batch_triplets[j];
      if (losses[j].value > 0.0) ++active;
      const Index roles[3] = {t.anchor, t.positive, t.negative};
      for (int r = 0; r < 3; ++r) grads[slot.at(roles[r])] += objective.triplet_weight * losses[j].grads[static_cast<std::size_t>(r)];
    }
    for (std::size_t k = 0; k < embeddings.size(); ++k) net.backward(traces[k], grads[k]);
    if (config.mask_l1 > 0.0) {
      Parameter& masks = net.masks();
      masks.grad.array() += config.mask_l1 * (masks.value.array() > 0.0).cast<double>();
    }
    adam.step(params, lr);

    loss_sum += objective.value;
    ++steps;
    triplets += batch_triplets.size();
  }

  void batch_hard_epoch(std::size_t& global_step, double lr) {
    Index steps_here = config.steps_per_epoch;
    if (steps_here == 0) steps_here = std::max<Index>(1, static_cast<Index>(inputs.size()) / (config.P * config.K));
    for (Index s = 0; s < steps_here; ++s, ++global_step) {
      const auto notion = static_cast<Index>(global_step % labels.size());
      RngStream rng(config.seed, derive_stream({kMineTag, global_step}));
      const PkBatch batch = pk_sample(labels[static_cast<std::size_t>(notion)], config.P, config.K, rng);
      const std::vector<Index> items = batch.flat();
      std::vector<ConditionalNet::Trace> traces(items.size());
      std::vector<Vector> embeddings(items.size());
      Matrix stacked(static_cast<Index>(items.size()), net.embedding_dim());
      std::vector<int> local_labels;
      std::map<Index, std::size_t> slot;
      for (std::size_t k = 0; k < items.size(); ++k) {
        RngStream item_rng(config.seed, derive_stream({kStepTag, global_step, static_cast<std::uint64_t>(items[k])}));
        embeddings[k] = net.forward(inputs[static_cast<std::size_t>(items[k])], notion, ForwardConfig::training(), item_rng,
                                    &traces[k]);
        stacked.row(static_cast<Index>(k)) = embeddings[k].transpose();
        local_labels.push_back(labels[static_cast<std::size_t>(notion)][static_cast<std::size_t>(items[k])]);
        slot.emplace(static_cast<Index>(k), k);
      }
      apply(batch_hard_triplets(stacked, local_labels), slot, traces, embeddings, lr);
    }
  }

  void semi_hard_epoch_run(int epoch, std::size_t& global_step, double lr) {
    RngStream rng(config.seed, derive_stream({kMineTag, 0xE0, static_cast<std::uint64_t>(epoch)}));
    const auto session_ids = data.sessions();
    const auto sessions = group_sessions(session_ids, config.group_size, rng);
    MiningPlan plan{config.sessions_per_draw, config.batch_size, config.max_triplets, config.group_size};
    const EmbedFn embed_fn = [this](std::span<const Index> items, Index notion) {
      Matrix out(static_cast<Index>(items.size()), net.embedding_dim());
      RngStream unused(0, 0);
      for (std::size_t k = 0; k < items.size(); ++k) {
        out.row(static_cast<Index>(k)) =
            net.forward(inputs[static_cast<std::size_t>(items[k])], notion, ForwardConfig::deterministic(), unused).transpose();
      }
      return out;
    };
    const EpochSummary summary = semi_hard_epoch(
        sessions, labels, embed_fn, plan, config.margin, rng,
        [&](const MiningDraw& draw) { step(draw.step, draw.notion, draw.triplets, lr); }, {}, global_step);
    global_step += summary.draws;
  }
};

}  // namespace

NetConfig net_config_for(const Dataset& data, const RunConfig& config) {
  NetConfig net;
  for (const FeatureSpec& f : data.modalities) {
    ModalitySpec m;
    m.name = f.name;
    m.kind = f.kind;
    m.input_dim = f.dim;
    m.cells = f.cells;
    m.hidden_dim = config.hidden_dim;
    m.samples = config.samples;
    net.modalities.push_back(m);
  }
  if (config.notions.empty()) {
    for (const NotionSpec& n : data.notions) net.notions.push_back(n.name);
  } else {
    for (const std::string& n : config.notions) {
      data.notion_index(n);
      net.notions.push_back(n);
    }
  }
  net.embedding_dim = config.embedding_dim;
  net.dropout_rate = config.dropout;
  net.unit_norm = config.loss == LossKind::UnitMargin;
  net.validate();
  return net;
}

ConditionalNet train(const Dataset& data, const RunConfig& config, const EpochFn& on_epoch) {
  config.validate();
  data.validate();
  if (data.records.size() < 2) fail(ErrorKind::Input, "training needs at least two items");
  Trainer trainer(data, config);
  std::size_t global_step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config.epochs, config.lr, config.decay_epoch);
    trainer.loss_sum = 0.0;
    trainer.steps = trainer.triplets = trainer.active = 0;
    if (config.miner == MinerKind::BatchHard) {
      trainer.batch_hard_epoch(global_step, lr);
    } else {
      trainer.semi_hard_epoch_run(epoch, global_step, lr);
    }
    if (on_epoch) {
      EpochStats stats;
      stats.epoch = epoch;
      stats.lr = lr;
      stats.steps = trainer.steps;
      stats.triplets = trainer.triplets;
      stats.mean_loss = trainer.steps ? trainer.loss_sum / static_cast<double>(trainer.steps) : 0.0;
      stats.active_fraction = trainer.triplets ? static_cast<double>(trainer.active) / static_cast<double>(trainer.triplets) : 0.0;
      on_epoch(stats, trainer.net);
    }
  }
  return std::move(trainer.net);
}

Dataset select_notions(const Dataset& data, const std::vector<std::string>& names) {
  Dataset out;
  out.modalities = data.modalities;
  std::vector<Index> keep;
  for (const std::string& n : names) {
    keep.push_back(data.notion_index(n));
    out.notions.push_back(data.notions[static_cast<std::size_t>(keep.back())]);
  }
  out.records = data.records;
  for (Record& r : out.records) {
    std::vector<int> labels;
    for (Index s : keep) labels.push_back(r.labels[static_cast<std::size_t>(s)]);
    r.labels = std::move(labels);
  }
  return out;
}

}  // namespace mcr
