#pragma once

#include "mcr/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mcr {

enum class MinerKind { BatchHard, SemiHard };
enum class LossKind { UnitMargin, SoftMargin };

const char* to_string(MinerKind kind);
const char* to_string(LossKind kind);

/// Every knob of a run. Loaded from a flat JSON object whose keys are the
/// field names below; absent keys keep their defaults, unknown keys are
/// rejected.
struct RunConfig {
  double margin = 0.2;
  double dropout = 0.1;
  Index embedding_dim = 128;
  Index mc = 50;
  Index P = 18;
  Index K = 4;
  Index batch_size = 512;    // b
  Index max_triplets = 400;  // N_Tri
  int epochs = 500;
  double lr = 0.01;
  int decay_epoch = 250;  // lr decays linearly to 0 from here to `epochs`
  double weight_decay = 1e-5;
  double mask_l1 = 0.0;
  MinerKind miner = MinerKind::SemiHard;
  LossKind loss = LossKind::UnitMargin;
  std::uint64_t seed = 0;

  /// Hidden width of the per-cell frame map and of vector encoders.
  Index hidden_dim = 32;
  /// Frames drawn per sequence item.
  Index samples = 3;
  Index sessions_per_draw = 3;
  Index group_size = 128;
  /// Batch-hard steps per epoch; 0 means one pass worth of PK batches.
  Index steps_per_epoch = 0;
  /// Notions to train (round-robin); empty means every notion in the data.
  std::vector<std::string> notions;
  /// Retrieve on renormalized MC means instead of the raw means.
  bool renormalize = false;
  std::vector<Index> sweep_mc = {1, 5, 10, 25, 50};

  /// Range checks; throws ErrorKind::Validation.
  void validate() const;
};

/// Throws ErrorKind::Parse on malformed JSON, ErrorKind::Validation on bad
/// keys, types, or values.
RunConfig parse_run_config(const std::string& text, const RunConfig& base = {});
RunConfig load_run_config(const std::string& path, const RunConfig& base = {});
/// Flat JSON echo of every field, keys in declaration order.
std::string run_config_json(const RunConfig& config);

}  // namespace mcr
