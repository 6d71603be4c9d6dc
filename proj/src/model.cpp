#include "mcr/model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace mcr {

namespace {

constexpr std::uint64_t kInitTag = 0x1717;

std::string dims(const Matrix& m) { return "[" + std::to_string(m.rows()) + "," + std::to_string(m.cols()) + "]"; }

}  // namespace

const char* to_string(ModalityKind kind) { return kind == ModalityKind::Vector ? "vector" : "sequence"; }

ModalityKind parse_modality_kind(const std::string& s) {
  if (s == "vector") return ModalityKind::Vector;
  if (s == "sequence") return ModalityKind::Sequence;
  fail(ErrorKind::Parse, "unknown modality kind '" + s + "'");
}

void ModalitySpec::validate() const {
  if (name.empty()) fail(ErrorKind::Validation, "modality name must be nonempty");
  if (input_dim < 1 || cells < 1 || input_dim % cells != 0) {
    fail(ErrorKind::Validation, "modality " + name + ": input_dim must be a positive multiple of cells");
  }
  if (hidden_dim < 0) fail(ErrorKind::Validation, "modality " + name + ": negative hidden_dim");
  if (kind == ModalityKind::Sequence && (hidden_dim < 1 || samples < 1)) {
    fail(ErrorKind::Validation, "modality " + name + ": sequence encoders need hidden_dim >= 1 and samples >= 1");
  }
  if (kind == ModalityKind::Vector && cells != 1) {
    fail(ErrorKind::Validation, "modality " + name + ": vector modalities have a single cell");
  }
}

void NetConfig::validate() const {
  if (modalities.empty()) fail(ErrorKind::Validation, "network needs at least one modality");
  if (notions.empty()) fail(ErrorKind::Validation, "network needs at least one similarity notion");
  if (embedding_dim < 1) fail(ErrorKind::Validation, "embedding dimension must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    fail(ErrorKind::Validation, "dropout rate must lie in [0, 1), got " + std::to_string(dropout_rate));
  }
  for (const ModalitySpec& m : modalities) m.validate();
}

Index NetConfig::notion_index(const std::string& name) const {
  auto it = std::find(notions.begin(), notions.end(), name);
  if (it == notions.end()) fail(ErrorKind::Index, "unknown notion '" + name + "'");
  return static_cast<Index>(it - notions.begin());
}

Index NetConfig::modality_index(const std::string& name) const {
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    if (modalities[i].name == name) return static_cast<Index>(i);
  }
  fail(ErrorKind::Index, "unknown modality '" + name + "'");
}

std::size_t ItemInput::available() const {
  return static_cast<std::size_t>(std::count_if(payloads.begin(), payloads.end(), [](const auto& p) { return p.has_value(); }));
}

std::vector<Index> sample_frames(Index length, Index samples, FrameSampling mode, RngStream& rng) {
  if (length < 1) fail(ErrorKind::Input, "cannot sample frames from an empty sequence");
  std::vector<Index> picked;
  picked.reserve(static_cast<std::size_t>(samples));
  if (mode == FrameSampling::Even) {
    for (Index i = 0; i < samples; ++i) {
      picked.push_back(static_cast<Index>((2 * i + 1) * length / (2 * samples)));
    }
    return picked;
  }
  if (length >= samples) {
    std::vector<Index> pool(static_cast<std::size_t>(length));
    std::iota(pool.begin(), pool.end(), Index{0});
    for (Index i = 0; i < samples; ++i) {
      const auto j = static_cast<Index>(i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(length - i))));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
      picked.push_back(pool[static_cast<std::size_t>(i)]);
    }
  } else {
    for (Index i = 0; i < samples; ++i) picked.push_back(static_cast<Index>(rng.below(static_cast<std::uint64_t>(length))));
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

// ---------------------------------------------------------------------------

ModalityEncoder::ModalityEncoder(ModalitySpec spec, Index embedding_dim)
    : spec_(std::move(spec)), embedding_dim_(embedding_dim) {
  spec_.validate();
  if (spec_.kind == ModalityKind::Vector) {
    if (spec_.hidden_dim == 0) {
      dense_.emplace_back(spec_.name + ".dense0", spec_.input_dim, embedding_dim);
    } else {
      dense_.emplace_back(spec_.name + ".dense0", spec_.input_dim, spec_.hidden_dim);
      dense_.emplace_back(spec_.name + ".dense1", spec_.hidden_dim, embedding_dim);
    }
  } else {
    dense_.emplace_back(spec_.name + ".frame", spec_.channels(), spec_.hidden_dim);
    rnn_ = RnnLayer(spec_.name + ".rnn", spec_.cells * spec_.hidden_dim, embedding_dim);
  }
}

void ModalityEncoder::initialize(RngStream& rng) {
  for (DenseLayer& layer : dense_) init_dense(layer, rng);
  if (spec_.kind == ModalityKind::Sequence) init_rnn(rnn_, rng);
}

RowVector ModalityEncoder::forward(const Matrix& payload, const DropoutSpec& drop, FrameSampling frames,
                                   RngStream& rng, Trace* trace) const {
  if (payload.cols() != spec_.input_dim || payload.rows() < 1 ||
      (spec_.kind == ModalityKind::Vector && payload.rows() != 1)) {
    fail(ErrorKind::Input, "modality " + spec_.name + ": payload " + dims(payload) + " does not match input_dim " +
                               std::to_string(spec_.input_dim));
  }
  Trace local;
  Trace& tr = trace ? *trace : local;
  tr.dense.assign(dense_.size(), {});
  tr.activations.clear();

  if (spec_.kind == ModalityKind::Vector) {
    Matrix x = payload;
    for (std::size_t l = 0; l < dense_.size(); ++l) {
      tr.dense[l].dropped_input = dropout_apply(x, drop, rng, &tr.dense[l].mask);
      x = dense_forward(tr.dense[l].dropped_input, dense_[l].weight, dense_[l].bias);
      if (l + 1 < dense_.size()) {
        x = tanh_forward(x);
        tr.activations.push_back(x);
      }
    }
    return x.row(0);
  }

  const std::vector<Index> picked = sample_frames(payload.rows(), spec_.samples, frames, rng);
  const Index n = spec_.samples;
  const Index channels = spec_.channels();
  // [samples, cells * channels] viewed as [samples * cells, channels] (row-major).
  Matrix cells(n * spec_.cells, channels);
  for (Index i = 0; i < n; ++i) {
    cells.middleRows(i * spec_.cells, spec_.cells) =
        Eigen::Map<const Matrix>(payload.row(picked[static_cast<std::size_t>(i)]).data(), spec_.cells, channels);
  }
  tr.dense[0].dropped_input = dropout_apply(cells, drop, rng, &tr.dense[0].mask);
  Matrix features = tanh_forward(dense_forward(tr.dense[0].dropped_input, dense_[0].weight, dense_[0].bias));
  const Matrix steps = Eigen::Map<const Matrix>(features.data(), n, spec_.cells * spec_.hidden_dim);
  tr.activations.push_back(std::move(features));
  return rnn_forward(steps, rnn_, drop, rng, &tr.rnn);
}

void ModalityEncoder::backward(const Trace& trace, const RowVector& grad_out) {
  if (spec_.kind == ModalityKind::Vector) {
    Matrix g = grad_out;
    for (std::size_t l = dense_.size(); l-- > 0;) {
      if (l + 1 < dense_.size()) g = tanh_backward(trace.activations[l], g);
      g = dense_backward(trace.dense[l].dropped_input, g, dense_[l].weight, dense_[l].bias);
      g = dropout_backward(g, trace.dense[l].mask);
    }
    return;
  }
  const Matrix grad_steps = rnn_backward(trace.rnn, grad_out, rnn_);
  const Matrix& features = trace.activations[0];
  const Matrix grad_features =
      tanh_backward(features, Eigen::Map<const Matrix>(grad_steps.data(), features.rows(), features.cols()));
  dense_backward(trace.dense[0].dropped_input, grad_features, dense_[0].weight, dense_[0].bias);
}

std::vector<Parameter*> ModalityEncoder::parameters() {
  std::vector<Parameter*> out;
  for (DenseLayer& l : dense_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  if (spec_.kind == ModalityKind::Sequence) {
    out.push_back(&rnn_.input_weight);
    out.push_back(&rnn_.recurrent_weight);
    out.push_back(&rnn_.bias);
  }
  return out;
}

std::vector<const Parameter*> ModalityEncoder::parameters() const {
  auto mut = const_cast<ModalityEncoder*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

// ---------------------------------------------------------------------------

Vector fuse(std::span<const Vector> embeddings) {
  if (embeddings.empty()) fail(ErrorKind::Input, "fusion needs at least one modality embedding");
  Vector sum = embeddings[0];
  for (std::size_t i = 1; i < embeddings.size(); ++i) {
    if (embeddings[i].size() != sum.size()) fail(ErrorKind::Dimension, "fused embeddings differ in dimension");
    sum += embeddings[i];
  }
  return sum / static_cast<double>(embeddings.size());
}

Vector apply_mask(const Vector& fused, const Parameter& masks, Index notion, bool unit_norm) {
  if (notion < 0 || notion >= masks.value.rows()) {
    fail(ErrorKind::Index, "notion index " + std::to_string(notion) + " out of range [0, " +
                               std::to_string(masks.value.rows()) + ")");
  }
  if (fused.size() != masks.value.cols()) fail(ErrorKind::Dimension, "mask width differs from embedding width");
  const Vector gate = masks.value.row(notion).transpose().cwiseMax(0.0);
  const Vector masked = fused.cwiseProduct(gate);
  return unit_norm ? l2_normalize(masked) : masked;
}

// ---------------------------------------------------------------------------

ConditionalNet::ConditionalNet(NetConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  for (std::size_t m = 0; m < config_.modalities.size(); ++m) {
    encoders_.emplace_back(config_.modalities[m], config_.embedding_dim);
    RngStream rng(init_seed, derive_stream({kInitTag, m}));
    encoders_.back().initialize(rng);
  }
  masks_ = Parameter("masks", Matrix::Ones(num_notions(), config_.embedding_dim), false);
}

void ConditionalNet::validate_item(const ItemInput& item) const {
  if (item.payloads.size() != config_.modalities.size()) {
    fail(ErrorKind::Input, "item carries " + std::to_string(item.payloads.size()) + " modality slots, network has " +
                               std::to_string(config_.modalities.size()));
  }
  if (item.available() == 0) fail(ErrorKind::Input, "item has no available modality");
}

Vector ConditionalNet::forward(const ItemInput& item, Index notion, const ForwardConfig& mode, RngStream& rng,
                               Trace* trace) const {
  validate_item(item);
  if (notion < 0 || notion >= num_notions()) {
    fail(ErrorKind::Index, "notion index " + std::to_string(notion) + " out of range");
  }
  const DropoutSpec drop = dropout(mode.dropout);
  std::vector<Vector> per_modality;
  if (trace) {
    trace->notion = notion;
    trace->present.clear();
    trace->encoders.clear();
  }
  for (std::size_t m = 0; m < encoders_.size(); ++m) {
    if (!item.payloads[m]) continue;
    ModalityEncoder::Trace* enc_trace = nullptr;
    if (trace) {
      trace->present.push_back(static_cast<Index>(m));
      enc_trace = &trace->encoders.emplace_back();
    }
    per_modality.push_back(encoders_[m].forward(*item.payloads[m], drop, mode.frames, rng, enc_trace).transpose());
  }
  Vector fused = fuse(per_modality);
  const Vector gate = masks_.value.row(notion).transpose().cwiseMax(0.0);
  Vector masked = fused.cwiseProduct(gate);
  Vector out = config_.unit_norm ? l2_normalize(masked) : masked;
  if (trace) {
    trace->fused = std::move(fused);
    trace->masked = std::move(masked);
  }
  return out;
}

void ConditionalNet::backward(const Trace& trace, const Vector& grad_out) {
  const Vector grad_masked = config_.unit_norm ? l2_normalize_backward(trace.masked, grad_out) : grad_out;
  const auto mask_row = masks_.value.row(trace.notion).transpose();
  const Vector gate = mask_row.cwiseMax(0.0);
  const Vector active = (mask_row.array() > 0.0).cast<double>().matrix();
  masks_.grad.row(trace.notion) += grad_masked.cwiseProduct(trace.fused).cwiseProduct(active).transpose();
  const Vector grad_fused = grad_masked.cwiseProduct(gate) / static_cast<double>(trace.present.size());
  const RowVector grad_row = grad_fused.transpose();
  for (std::size_t i = 0; i < trace.present.size(); ++i) {
    encoders_[static_cast<std::size_t>(trace.present[i])].backward(trace.encoders[i], grad_row);
  }
}

std::vector<Parameter*> ConditionalNet::parameters() {
  std::vector<Parameter*> out;
  for (ModalityEncoder& e : encoders_) {
    auto p = e.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  out.push_back(&masks_);
  return out;
}

std::vector<const Parameter*> ConditionalNet::parameters() const {
  auto mut = const_cast<ConditionalNet*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

Vector embed(const ConditionalNet& net, const ItemInput& item, Index notion, const ForwardConfig& mode,
             RngStream& rng) {
  return net.forward(item, notion, mode, rng);
}

ItemInput restrict_modalities(const ItemInput& item, const std::vector<bool>& keep) {
  if (keep.size() != item.payloads.size()) fail(ErrorKind::Input, "modality selection has the wrong length");
  ItemInput out;
  out.payloads.resize(item.payloads.size());
  for (std::size_t m = 0; m < keep.size(); ++m) {
    if (keep[m]) out.payloads[m] = item.payloads[m];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint container.

using nlohmann::json;

namespace {

json config_to_json(const NetConfig& c) {
  json mods = json::array();
  for (const ModalitySpec& m : c.modalities) {
    mods.push_back({{"name", m.name},
                    {"kind", to_string(m.kind)},
                    {"input_dim", m.input_dim},
                    {"cells", m.cells},
                    {"hidden_dim", m.hidden_dim},
                    {"samples", m.samples}});
  }
  return {{"modalities", mods},
          {"notions", c.notions},
          {"embedding_dim", c.embedding_dim},
          {"dropout_rate", c.dropout_rate},
          {"unit_norm", c.unit_norm}};
}

NetConfig config_from_json(const json& j) {
  NetConfig c;
  for (const json& m : j.at("modalities")) {
    ModalitySpec s;
    s.name = m.at("name").get<std::string>();
    s.kind = parse_modality_kind(m.at("kind").get<std::string>());
    s.input_dim = m.at("input_dim").get<Index>();
    s.cells = m.at("cells").get<Index>();
    s.hidden_dim = m.at("hidden_dim").get<Index>();
    s.samples = m.at("samples").get<Index>();
    c.modalities.push_back(std::move(s));
  }
  c.notions = j.at("notions").get<std::vector<std::string>>();
  c.embedding_dim = j.at("embedding_dim").get<Index>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.unit_norm = j.at("unit_norm").get<bool>();
  return c;
}

}  // namespace

std::string checkpoint_text(const ConditionalNet& net) {
  json params = json::array();
  for (const Parameter* p : net.parameters()) {
    std::vector<double> data(p->value.data(), p->value.data() + p->value.size());
    params.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}, {"data", data}});
  }
  json doc = {{"format", "mcr-checkpoint"}, {"version", 1}, {"config", config_to_json(net.config())},
              {"parameters", params}};
  return doc.dump() + "\n";
}

ConditionalNet checkpoint_from_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("checkpoint: ") + e.what());
  }
  try {
    if (doc.at("format") != "mcr-checkpoint") fail(ErrorKind::Parse, "checkpoint: unrecognized format tag");
    ConditionalNet net(config_from_json(doc.at("config")), 0);
    std::map<std::string, const json*> by_name;
    for (const json& p : doc.at("parameters")) by_name[p.at("name").get<std::string>()] = &p;
    for (Parameter* p : net.parameters()) {
      auto it = by_name.find(p->name);
      if (it == by_name.end()) fail(ErrorKind::Parse, "checkpoint: missing parameter " + p->name);
      const json& entry = *it->second;
      const auto rows = entry.at("rows").get<Index>();
      const auto cols = entry.at("cols").get<Index>();
      const auto data = entry.at("data").get<std::vector<double>>();
      if (rows != p->value.rows() || cols != p->value.cols() || static_cast<Index>(data.size()) != rows * cols) {
        fail(ErrorKind::Parse, "checkpoint: parameter " + p->name + " has shape [" + std::to_string(rows) + "," +
                                   std::to_string(cols) + "], expected " + dims(p->value));
      }
      p->value = Eigen::Map<const Matrix>(data.data(), rows, cols);
      p->zero_grad();
    }
    return net;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const ConditionalNet& net, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write checkpoint " + tmp);
    out << checkpoint_text(net);
    if (!out) fail(ErrorKind::Io, "failed writing checkpoint " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) fail(ErrorKind::Io, "cannot move checkpoint into " + path);
}

ConditionalNet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_text(ss.str());
}

}  // namespace mcr
