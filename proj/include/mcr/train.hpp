#pragma once

#include "mcr/config.hpp"
#include "mcr/dataset.hpp"
#include "mcr/model.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mcr {

/// Network architecture for a dataset under a run configuration. Notions are
/// `config.notions` when given, otherwise every notion of the data.
NetConfig net_config_for(const Dataset& data, const RunConfig& config);

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  std::size_t steps = 0;
  std::size_t triplets = 0;
  double mean_loss = 0.0;  // mean batch objective over the epoch's steps
  double active_fraction = 0.0;  // share of triplets with a nonzero hinge
};

using EpochFn = std::function<void(const EpochStats&, const ConditionalNet&)>;

/// Runs `config.epochs` epochs of triplet training with Adam, the linear lr
/// schedule, and a round-robin notion per step. Batch-hard training mines PK
/// batches on their training-mode embeddings; semi-hard training mines
/// session draws on dropout-free embeddings. `on_epoch` runs after each epoch.
/// Fully determined by (data, config).
ConditionalNet train(const Dataset& data, const RunConfig& config, const EpochFn& on_epoch = {});

/// Copy of `data` keeping only the named notions, in the given order.
Dataset select_notions(const Dataset& data, const std::vector<std::string>& names);

}  // namespace mcr
