#pragma once

#include "mcr/numcore.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mcr {

enum class ModalityKind { Vector, Sequence };

const char* to_string(ModalityKind kind);
ModalityKind parse_modality_kind(const std::string& s);

/// Architecture of one modality encoder.
///
/// Vector kind: dropout -> dense [-> tanh -> dropout -> dense] to the embedding
/// width. `hidden_dim == 0` gives a single affine layer.
///
/// Sequence kind: `samples` frames are drawn per item. Each frame holds `cells`
/// spatial positions of `input_dim / cells` channels; a dense map shared across
/// cells (a 1x1 convolution) with tanh produces `hidden_dim` features per cell,
/// cells are flattened, and an Elman recurrence with input dropout fuses the
/// frames into the embedding width.
struct ModalitySpec {
  std::string name;
  ModalityKind kind = ModalityKind::Vector;
  Index input_dim = 1;
  Index cells = 1;
  Index hidden_dim = 0;
  Index samples = 3;

  void validate() const;
  Index channels() const { return input_dim / cells; }
};

struct NetConfig {
  std::vector<ModalitySpec> modalities;
  std::vector<std::string> notions;
  Index embedding_dim = 128;
  double dropout_rate = 0.1;
  /// Normalize the masked embedding to unit length (off for soft-margin training).
  bool unit_norm = true;

  void validate() const;
  Index notion_index(const std::string& name) const;
  Index modality_index(const std::string& name) const;
};

/// Per-modality payloads, indexed like NetConfig::modalities. A vector payload
/// is [1, input_dim]; a sequence payload is [T, input_dim] with T >= 1.
struct ItemInput {
  std::vector<std::optional<Matrix>> payloads;

  std::size_t available() const;
};

enum class FrameSampling {
  Random,  // uniform without replacement (with replacement when T < samples)
  Even,    // evenly spaced, deterministic
};

struct ForwardConfig {
  DropoutMode dropout = DropoutMode::Disabled;
  FrameSampling frames = FrameSampling::Even;

  static ForwardConfig training() { return {DropoutMode::Stochastic, FrameSampling::Random}; }
  static ForwardConfig monte_carlo() { return {DropoutMode::Stochastic, FrameSampling::Even}; }
  static ForwardConfig deterministic() { return {DropoutMode::Disabled, FrameSampling::Even}; }
};

std::vector<Index> sample_frames(Index length, Index samples, FrameSampling mode, RngStream& rng);

class ModalityEncoder {
 public:
  struct Trace {
    std::vector<DenseTrace> dense;
    std::vector<Matrix> activations;  // tanh outputs of the non-final dense layers
    RnnTrace rnn;
  };

  ModalityEncoder() = default;
  ModalityEncoder(ModalitySpec spec, Index embedding_dim);

  void initialize(RngStream& rng);

  RowVector forward(const Matrix& payload, const DropoutSpec& drop, FrameSampling frames, RngStream& rng,
                    Trace* trace = nullptr) const;
  void backward(const Trace& trace, const RowVector& grad_out);

  const ModalitySpec& spec() const { return spec_; }
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::vector<DenseLayer>& dense_layers() { return dense_; }
  RnnLayer& rnn() { return rnn_; }

 private:
  ModalitySpec spec_;
  Index embedding_dim_ = 0;
  std::vector<DenseLayer> dense_;
  RnnLayer rnn_;
};

/// Arithmetic mean of the available modality embeddings.
Vector fuse(std::span<const Vector> embeddings);

/// relu(masks[notion]) * fused, then l2-normalized when `unit_norm`.
Vector apply_mask(const Vector& fused, const Parameter& masks, Index notion, bool unit_norm = true);

class ConditionalNet {
 public:
  struct Trace {
    Index notion = 0;
    std::vector<Index> present;
    std::vector<ModalityEncoder::Trace> encoders;  // parallel to `present`
    Vector fused;
    Vector masked;  // before normalization
  };

  ConditionalNet() = default;
  ConditionalNet(NetConfig config, std::uint64_t init_seed);

  /// Encode available modalities, fuse, mask for `notion`, normalize.
  Vector forward(const ItemInput& item, Index notion, const ForwardConfig& mode, RngStream& rng,
                 Trace* trace = nullptr) const;
  /// Accumulate parameter gradients of dL/d(output) = grad_out.
  void backward(const Trace& trace, const Vector& grad_out);

  const NetConfig& config() const { return config_; }
  Index embedding_dim() const { return config_.embedding_dim; }
  Index num_notions() const { return static_cast<Index>(config_.notions.size()); }
  DropoutSpec dropout(DropoutMode mode) const { return {config_.dropout_rate, mode}; }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  Parameter& masks() { return masks_; }
  const Parameter& masks() const { return masks_; }
  ModalityEncoder& encoder(Index m) { return encoders_.at(static_cast<std::size_t>(m)); }

  void validate_item(const ItemInput& item) const;

 private:
  NetConfig config_;
  std::vector<ModalityEncoder> encoders_;
  Parameter masks_;
};

/// Free-function form of ConditionalNet::forward.
Vector embed(const ConditionalNet& net, const ItemInput& item, Index notion, const ForwardConfig& mode,
             RngStream& rng);

/// Copy of `item` keeping only the modalities flagged in `keep`.
ItemInput restrict_modalities(const ItemInput& item, const std::vector<bool>& keep);

/// Checkpoint: one JSON document with the architecture and every named
/// parameter tensor (row-major, shortest round-trip decimals).
void save_checkpoint(const ConditionalNet& net, const std::string& path);
ConditionalNet load_checkpoint(const std::string& path);
std::string checkpoint_text(const ConditionalNet& net);
ConditionalNet checkpoint_from_text(const std::string& text);

}  // namespace mcr
