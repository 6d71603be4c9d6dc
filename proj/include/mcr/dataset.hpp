#pragma once

#include "mcr/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mcr {

/// Header description of one modality's payload.
struct FeatureSpec {
  std::string name;
  ModalityKind kind = ModalityKind::Vector;
  Index dim = 1;    // values per frame
  Index cells = 1;  // spatial positions per frame

  bool operator==(const FeatureSpec&) const = default;
};

struct NotionSpec {
  std::string name;
  std::vector<std::string> classes;

  bool operator==(const NotionSpec&) const = default;
};

struct Record {
  std::string id;
  std::optional<int> session;
  std::vector<int> labels;  // class index per notion
  ItemInput input;
};

bool operator==(const Record& a, const Record& b);

/// Line-delimited JSON: one header object, then one object per item.
///
///   {"format":"mcr-dataset","version":1,"modalities":[{"name":..,"kind":"vector"|"sequence","dim":..,"cells":..}],
///    "notions":[{"name":..,"classes":[..]}]}
///   {"id":..,"session":3,"labels":{"<notion>":"<class>"},"features":{"<modality>":[..] | [[..],..]}}
///
/// "session" is optional; a missing modality key means the modality is
/// unavailable for that item. Decimals use shortest round-trip formatting.
struct Dataset {
  std::vector<FeatureSpec> modalities;
  std::vector<NotionSpec> notions;
  std::vector<Record> records;

  void validate() const;
  Index notion_index(const std::string& name) const;
  Index num_classes(Index notion) const;
  std::vector<int> labels(Index notion) const;
  std::vector<ItemInput> inputs() const;
  std::vector<std::optional<int>> sessions() const;
  std::vector<std::string> modality_names() const;
};

bool operator==(const Dataset& a, const Dataset& b);

std::string serialize_dataset(const Dataset& data);
/// Throws ErrorKind::Parse with the offending line number.
Dataset parse_dataset(std::istream& in);
Dataset parse_dataset_text(const std::string& text);
Dataset read_dataset(const std::string& path);
void write_dataset(const Dataset& data, const std::string& path);

// ---------------------------------------------------------------------------
// Synthetic generator.

struct SynthNotion {
  std::string name;
  Index num_classes = 2;
  /// Class weights fall off as (c + 1)^-tail; 0 gives balanced classes.
  double tail_exponent = 0.0;
};

/// Each payload is split into one block per notion (interleaved over the
/// channels of every cell). Block (m, s) carries signal[s] times a fixed random
/// unit prototype of the item's class under notion s, plus isotropic noise of
/// expected norm noise[s]. Sequence modalities repeat the payload for
/// `length` frames with fresh per-frame noise of expected norm frame_noise.
struct SynthModality {
  std::string name;
  ModalityKind kind = ModalityKind::Vector;
  Index dim = 8;
  Index cells = 1;
  Index length = 6;
  std::vector<double> signal;
  std::vector<double> noise;
  double frame_noise = 0.0;
};

struct SynthConfig {
  std::vector<SynthNotion> notions;
  std::vector<SynthModality> modalities;
  Index num_items = 200;
  Index min_class_size = 2;
  /// Session ids drawn uniformly from [0, sessions); 0 writes no session ids.
  Index sessions = 0;
  /// Prototypes derive from `seed`; items from (`seed`, `split`), so splits of
  /// one seed share their class structure.
  std::uint64_t seed = 0;
  std::uint64_t split = 0;
  std::string id_prefix = "item-";

  void validate() const;
};

Dataset synth_generate(const SynthConfig& config);

/// Class sizes for one notion: min_class_size each, the remainder split by
/// the tail weights with largest-remainder rounding.
std::vector<Index> synth_class_sizes(Index num_items, Index num_classes, double tail_exponent, Index min_class_size);

/// Named presets: "hdd-like" (goal: 10 long-tailed classes, low noise;
/// stimulus: 6 long-tailed classes, high noise on the sensor modality),
/// "noiseless" (two balanced notions, zero noise), "balanced".
SynthConfig synth_preset(const std::string& name);

}  // namespace mcr
