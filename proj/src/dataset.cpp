#include "mcr/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mcr {

using json = nlohmann::ordered_json;

bool operator==(const Record& a, const Record& b) {
  if (a.id != b.id || a.session != b.session || a.labels != b.labels) return false;
  if (a.input.payloads.size() != b.input.payloads.size()) return false;
  for (std::size_t m = 0; m < a.input.payloads.size(); ++m) {
    const auto& pa = a.input.payloads[m];
    const auto& pb = b.input.payloads[m];
    if (pa.has_value() != pb.has_value()) return false;
    if (pa && (pa->rows() != pb->rows() || pa->cols() != pb->cols() || *pa != *pb)) return false;
  }
  return true;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.modalities == b.modalities && a.notions == b.notions && a.records == b.records;
}

void Dataset::validate() const {
  if (modalities.empty()) fail(ErrorKind::Validation, "dataset declares no modality");
  if (notions.empty()) fail(ErrorKind::Validation, "dataset declares no notion");
  for (const FeatureSpec& f : modalities) {
    if (f.dim < 1 || f.cells < 1 || f.dim % f.cells != 0) {
      fail(ErrorKind::Validation, "modality " + f.name + ": dim must be a positive multiple of cells");
    }
  }
  std::set<std::string> ids;
  for (const Record& r : records) {
    if (!ids.insert(r.id).second) fail(ErrorKind::Validation, "duplicate item id " + r.id);
    if (r.labels.size() != notions.size()) fail(ErrorKind::Validation, "item " + r.id + ": label count mismatch");
    for (std::size_t s = 0; s < notions.size(); ++s) {
      if (r.labels[s] < 0 || r.labels[s] >= static_cast<int>(notions[s].classes.size())) {
        fail(ErrorKind::Validation, "item " + r.id + ": label outside the vocabulary of " + notions[s].name);
      }
    }
    if (r.input.payloads.size() != modalities.size()) fail(ErrorKind::Validation, "item " + r.id + ": modality slots mismatch");
    if (r.input.available() == 0) fail(ErrorKind::Validation, "item " + r.id + ": no modality present");
    for (std::size_t m = 0; m < modalities.size(); ++m) {
      const auto& p = r.input.payloads[m];
      if (!p) continue;
      const bool rows_ok = modalities[m].kind == ModalityKind::Vector ? p->rows() == 1 : p->rows() >= 1;
      if (!rows_ok || p->cols() != modalities[m].dim) {
        fail(ErrorKind::Validation, "item " + r.id + ": payload of " + modalities[m].name + " does not match the header");
      }
    }
  }
}

Index Dataset::notion_index(const std::string& name) const {
  for (std::size_t s = 0; s < notions.size(); ++s) {
    if (notions[s].name == name) return static_cast<Index>(s);
  }
  fail(ErrorKind::Index, "unknown notion '" + name + "'");
}

Index Dataset::num_classes(Index notion) const {
  return static_cast<Index>(notions.at(static_cast<std::size_t>(notion)).classes.size());
}

std::vector<int> Dataset::labels(Index notion) const {
  if (notion < 0 || notion >= static_cast<Index>(notions.size())) fail(ErrorKind::Index, "notion index out of range");
  std::vector<int> out;
  out.reserve(records.size());
  for (const Record& r : records) out.push_back(r.labels[static_cast<std::size_t>(notion)]);
  return out;
}

std::vector<ItemInput> Dataset::inputs() const {
  std::vector<ItemInput> out;
  out.reserve(records.size());
  for (const Record& r : records) out.push_back(r.input);
  return out;
}

std::vector<std::optional<int>> Dataset::sessions() const {
  std::vector<std::optional<int>> out;
  out.reserve(records.size());
  for (const Record& r : records) out.push_back(r.session);
  return out;
}

std::vector<std::string> Dataset::modality_names() const {
  std::vector<std::string> out;
  for (const FeatureSpec& f : modalities) out.push_back(f.name);
  return out;
}

// ---------------------------------------------------------------------------

std::string serialize_dataset(const Dataset& data) {
  std::ostringstream os;
  json mods = json::array();
  for (const FeatureSpec& f : data.modalities) {
    mods.push_back({{"name", f.name}, {"kind", to_string(f.kind)}, {"dim", f.dim}, {"cells", f.cells}});
  }
  json notions = json::array();
  for (const NotionSpec& n : data.notions) notions.push_back({{"name", n.name}, {"classes", n.classes}});
  os << json{{"format", "mcr-dataset"}, {"version", 1}, {"modalities", mods}, {"notions", notions}}.dump() << "\n";

  for (const Record& r : data.records) {
    json rec = {{"id", r.id}};
    if (r.session) rec["session"] = *r.session;
    json labels = json::object();
    for (std::size_t s = 0; s < data.notions.size(); ++s) {
      labels[data.notions[s].name] = data.notions[s].classes.at(static_cast<std::size_t>(r.labels[s]));
    }
    rec["labels"] = labels;
    json features = json::object();
    for (std::size_t m = 0; m < data.modalities.size(); ++m) {
      const auto& p = r.input.payloads[m];
      if (!p) continue;
      if (data.modalities[m].kind == ModalityKind::Vector) {
        features[data.modalities[m].name] = std::vector<double>(p->data(), p->data() + p->size());
      } else {
        json frames = json::array();
        for (Index t = 0; t < p->rows(); ++t) frames.push_back(std::vector<double>(p->row(t).data(), p->row(t).data() + p->cols()));
        features[data.modalities[m].name] = frames;
      }
    }
    rec["features"] = features;
    os << rec.dump() << "\n";
  }
  return os.str();
}

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  fail(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what);
}

Matrix frames_from_json(const json& j, const FeatureSpec& spec, std::size_t line) {
  if (spec.kind == ModalityKind::Vector) {
    const auto values = j.get<std::vector<double>>();
    if (static_cast<Index>(values.size()) != spec.dim) parse_fail(line, "modality " + spec.name + " expects " + std::to_string(spec.dim) + " values");
    return Eigen::Map<const Matrix>(values.data(), 1, spec.dim);
  }
  if (!j.is_array() || j.empty()) parse_fail(line, "modality " + spec.name + " expects a nonempty list of frames");
  Matrix out(static_cast<Index>(j.size()), spec.dim);
  for (std::size_t t = 0; t < j.size(); ++t) {
    const auto values = j[t].get<std::vector<double>>();
    if (static_cast<Index>(values.size()) != spec.dim) parse_fail(line, "modality " + spec.name + " frame has the wrong width");
    out.row(static_cast<Index>(t)) = Eigen::Map<const RowVector>(values.data(), spec.dim);
  }
  return out;
}

}  // namespace

Dataset parse_dataset(std::istream& in) {
  Dataset data;
  std::string text;
  std::size_t line = 0;
  bool header_seen = false;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      parse_fail(line, e.what());
    }
    try {
      if (!header_seen) {
        if (j.value("format", "") != "mcr-dataset") parse_fail(line, "missing mcr-dataset header");
        if (j.value("version", 0) != 1) parse_fail(line, "unsupported dataset version");
        for (const json& m : j.at("modalities")) {
          FeatureSpec f;
          f.name = m.at("name").get<std::string>();
          f.kind = parse_modality_kind(m.at("kind").get<std::string>());
          f.dim = m.at("dim").get<Index>();
          f.cells = m.value("cells", Index{1});
          data.modalities.push_back(f);
        }
        for (const json& n : j.at("notions")) {
          data.notions.push_back({n.at("name").get<std::string>(), n.at("classes").get<std::vector<std::string>>()});
        }
        header_seen = true;
        continue;
      }
      Record r;
      r.id = j.at("id").get<std::string>();
      if (j.contains("session") && !j["session"].is_null()) r.session = j["session"].get<int>();
      const json& labels = j.at("labels");
      for (const NotionSpec& n : data.notions) {
        const auto cls = labels.at(n.name).get<std::string>();
        auto it = std::find(n.classes.begin(), n.classes.end(), cls);
        if (it == n.classes.end()) parse_fail(line, "class '" + cls + "' not declared for notion " + n.name);
        r.labels.push_back(static_cast<int>(it - n.classes.begin()));
      }
      const json& features = j.at("features");
      r.input.payloads.resize(data.modalities.size());
      for (std::size_t m = 0; m < data.modalities.size(); ++m) {
        if (features.contains(data.modalities[m].name)) {
          r.input.payloads[m] = frames_from_json(features[data.modalities[m].name], data.modalities[m], line);
        }
      }
      for (const auto& [key, value] : features.items()) {
        const auto names = data.modality_names();
        if (std::find(names.begin(), names.end(), key) == names.end()) parse_fail(line, "undeclared modality '" + key + "'");
      }
      data.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      parse_fail(line, e.what());
    }
  }
  if (!header_seen) fail(ErrorKind::Parse, "line 1: empty dataset file");
  try {
    data.validate();
  } catch (const Error& e) {
    fail(ErrorKind::Parse, e.what());
  }
  return data;
}

Dataset parse_dataset_text(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset(in);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open dataset " + path);
  return parse_dataset(in);
}

void write_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write dataset " + path);
  out << serialize_dataset(data);
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kPrototypeTag = 0x5052;
constexpr std::uint64_t kItemTag = 0x4954;

template <typename T>
void shuffle(std::vector<T>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

void SynthConfig::validate() const {
  if (notions.empty() || modalities.empty()) fail(ErrorKind::Parameter, "synthetic data needs notions and modalities");
  for (const SynthNotion& n : notions) {
    if (n.num_classes < 2) fail(ErrorKind::Parameter, "notion " + n.name + " needs at least two classes");
    if (n.tail_exponent < 0.0) fail(ErrorKind::Parameter, "notion " + n.name + ": negative tail exponent");
  }
  if (min_class_size < 2) fail(ErrorKind::Parameter, "every class needs at least two items");
  for (const SynthNotion& n : notions) {
    if (num_items < n.num_classes * min_class_size) {
      fail(ErrorKind::Parameter, "too few items for " + std::to_string(n.num_classes) + " classes of notion " + n.name);
    }
  }
  const auto m_count = static_cast<Index>(notions.size());
  for (const SynthModality& m : modalities) {
    if (m.cells < 1 || m.dim < 1 || m.dim % m.cells != 0 || m.dim / m.cells < m_count) {
      fail(ErrorKind::Parameter, "modality " + m.name + ": each cell needs at least one channel per notion");
    }
    if (m.kind == ModalityKind::Sequence && m.length < 1) fail(ErrorKind::Parameter, "modality " + m.name + ": length >= 1");
    if (m.kind == ModalityKind::Vector && m.cells != 1) fail(ErrorKind::Parameter, "modality " + m.name + ": vector kind has one cell");
    if (static_cast<Index>(m.signal.size()) != m_count || static_cast<Index>(m.noise.size()) != m_count) {
      fail(ErrorKind::Parameter, "modality " + m.name + ": need one signal and noise level per notion");
    }
    for (double v : m.noise) {
      if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::Parameter, "modality " + m.name + ": noise levels must be finite and >= 0");
    }
  }
  if (sessions < 0) fail(ErrorKind::Parameter, "negative session count");
}

std::vector<Index> synth_class_sizes(Index num_items, Index num_classes, double tail_exponent, Index min_class_size) {
  std::vector<double> weights(static_cast<std::size_t>(num_classes));
  double total = 0.0;
  for (Index c = 0; c < num_classes; ++c) total += weights[static_cast<std::size_t>(c)] = std::pow(static_cast<double>(c + 1), -tail_exponent);
  const Index spare = num_items - num_classes * min_class_size;
  std::vector<Index> sizes(static_cast<std::size_t>(num_classes), min_class_size);
  std::vector<std::pair<double, Index>> remainders;
  Index assigned = 0;
  for (Index c = 0; c < num_classes; ++c) {
    const double share = static_cast<double>(spare) * weights[static_cast<std::size_t>(c)] / total;
    const auto whole = static_cast<Index>(std::floor(share));
    sizes[static_cast<std::size_t>(c)] += whole;
    assigned += whole;
    remainders.emplace_back(share - static_cast<double>(whole), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (Index i = 0; i < spare - assigned; ++i) ++sizes[static_cast<std::size_t>(remainders[static_cast<std::size_t>(i)].second)];
  return sizes;
}

Dataset synth_generate(const SynthConfig& config) {
  config.validate();
  const std::size_t notion_count = config.notions.size();

  Dataset data;
  for (const SynthModality& m : config.modalities) data.modalities.push_back({m.name, m.kind, m.dim, m.cells});
  for (const SynthNotion& n : config.notions) {
    NotionSpec spec{n.name, {}};
    for (Index c = 0; c < n.num_classes; ++c) spec.classes.push_back(n.name + "_" + std::to_string(c));
    data.notions.push_back(std::move(spec));
  }

  // Coordinates of block (m, s): channel k of every cell with k % M == s.
  std::vector<std::vector<std::vector<Index>>> blocks(config.modalities.size());
  for (std::size_t m = 0; m < config.modalities.size(); ++m) {
    const SynthModality& mod = config.modalities[m];
    const Index channels = mod.dim / mod.cells;
    blocks[m].resize(notion_count);
    for (Index i = 0; i < mod.dim; ++i) blocks[m][static_cast<std::size_t>((i % channels) % static_cast<Index>(notion_count))].push_back(i);
  }

  // prototypes[m][s][c]: unit vector over block (m, s).
  std::vector<std::vector<std::vector<Vector>>> prototypes(config.modalities.size());
  for (std::size_t m = 0; m < config.modalities.size(); ++m) {
    prototypes[m].resize(notion_count);
    for (std::size_t s = 0; s < notion_count; ++s) {
      RngStream rng(config.seed, derive_stream({kPrototypeTag, m, s}));
      for (Index c = 0; c < config.notions[s].num_classes; ++c) {
        Vector v(static_cast<Index>(blocks[m][s].size()));
        for (Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
        prototypes[m][s].push_back(l2_normalize(v));
      }
    }
  }

  RngStream rng(config.seed, derive_stream({kItemTag, config.split}));
  std::vector<std::vector<int>> labels(notion_count);
  for (std::size_t s = 0; s < notion_count; ++s) {
    const auto sizes = synth_class_sizes(config.num_items, config.notions[s].num_classes, config.notions[s].tail_exponent,
                                         config.min_class_size);
    for (std::size_t c = 0; c < sizes.size(); ++c) labels[s].insert(labels[s].end(), static_cast<std::size_t>(sizes[c]), static_cast<int>(c));
    shuffle(labels[s], rng);
  }

  for (Index i = 0; i < config.num_items; ++i) {
    Record r;
    r.id = config.id_prefix + std::to_string(i);
    if (config.sessions > 0) r.session = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.sessions)));
    for (std::size_t s = 0; s < notion_count; ++s) r.labels.push_back(labels[s][static_cast<std::size_t>(i)]);
    for (std::size_t m = 0; m < config.modalities.size(); ++m) {
      const SynthModality& mod = config.modalities[m];
      RowVector payload = RowVector::Zero(mod.dim);
      for (std::size_t s = 0; s < notion_count; ++s) {
        const auto& coords = blocks[m][s];
        const Vector& proto = prototypes[m][s][static_cast<std::size_t>(r.labels[s])];
        const double per_coord = mod.noise[s] / std::sqrt(static_cast<double>(coords.size()));
        for (std::size_t k = 0; k < coords.size(); ++k) {
          payload[coords[k]] = mod.signal[s] * proto[static_cast<Index>(k)] + per_coord * rng.normal();
        }
      }
      if (mod.kind == ModalityKind::Vector) {
        r.input.payloads.emplace_back(Matrix(payload));
      } else {
        Matrix frames(mod.length, mod.dim);
        const double per_coord = mod.frame_noise / std::sqrt(static_cast<double>(mod.dim));
        for (Index t = 0; t < mod.length; ++t) {
          for (Index k = 0; k < mod.dim; ++k) frames(t, k) = payload[k] + per_coord * rng.normal();
        }
        r.input.payloads.emplace_back(std::move(frames));
      }
    }
    data.records.push_back(std::move(r));
  }
  return data;
}

SynthConfig synth_preset(const std::string& name) {
  SynthConfig c;
  if (name == "hdd-like") {
    c.notions = {{"goal", 10, 1.0}, {"stimulus", 6, 0.8}};
    c.modalities = {
        {"camera", ModalityKind::Sequence, 16, 2, 6, {1.0, 1.0}, {0.5, 0.9}, 0.2},
        {"can", ModalityKind::Sequence, 8, 1, 6, {1.0, 0.5}, {0.3, 2.0}, 0.2},
    };
    c.num_items = 400;
    c.min_class_size = 4;
    c.sessions = 12;
    return c;
  }
  if (name == "noiseless") {
    c.notions = {{"goal", 4, 0.0}, {"stimulus", 3, 0.0}};
    c.modalities = {
        {"camera", ModalityKind::Sequence, 8, 2, 4, {1.0, 1.0}, {0.0, 0.0}, 0.0},
        {"can", ModalityKind::Vector, 4, 1, 1, {1.0, 1.0}, {0.0, 0.0}, 0.0},
    };
    c.num_items = 96;
    c.min_class_size = 2;
    c.sessions = 4;
    return c;
  }
  if (name == "balanced") {
    c.notions = {{"goal", 4, 0.0}, {"stimulus", 4, 0.0}};
    c.modalities = {
        {"camera", ModalityKind::Sequence, 8, 2, 4, {1.0, 1.0}, {0.4, 0.4}, 0.1},
        {"can", ModalityKind::Vector, 4, 1, 1, {1.0, 1.0}, {0.4, 0.4}, 0.0},
    };
    c.num_items = 160;
    c.min_class_size = 2;
    c.sessions = 4;
    return c;
  }
  fail(ErrorKind::Validation, "unknown synthetic preset '" + name + "'");
}

}  // namespace mcr
