#include "mcr/config.hpp"

#include "mcr/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace mcr {

using nlohmann::ordered_json;

const char* to_string(MinerKind kind) { return kind == MinerKind::BatchHard ? "batch-hard" : "semi-hard"; }
const char* to_string(LossKind kind) { return kind == LossKind::UnitMargin ? "unit-margin" : "soft-margin"; }

namespace {

[[noreturn]] void invalid(const std::string& key, const std::string& why) {
  fail(ErrorKind::Validation, "config '" + key + "': " + why);
}

void require(bool ok, const std::string& key, const std::string& why) {
  if (!ok) invalid(key, why);
}

ordered_json to_json(const RunConfig& c) {
  return ordered_json{
      {"margin", c.margin},
      {"dropout", c.dropout},
      {"embedding_dim", c.embedding_dim},
      {"mc", c.mc},
      {"P", c.P},
      {"K", c.K},
      {"batch_size", c.batch_size},
      {"max_triplets", c.max_triplets},
      {"epochs", c.epochs},
      {"lr", c.lr},
      {"decay_epoch", c.decay_epoch},
      {"weight_decay", c.weight_decay},
      {"mask_l1", c.mask_l1},
      {"miner", to_string(c.miner)},
      {"loss", to_string(c.loss)},
      {"seed", c.seed},
      {"hidden_dim", c.hidden_dim},
      {"samples", c.samples},
      {"sessions_per_draw", c.sessions_per_draw},
      {"group_size", c.group_size},
      {"steps_per_epoch", c.steps_per_epoch},
      {"notions", c.notions},
      {"renormalize", c.renormalize},
      {"sweep_mc", c.sweep_mc},
  };
}

template <typename T>
void read_number(const ordered_json& v, const std::string& key, T& out) {
  if constexpr (std::is_integral_v<T>) {
    require(v.is_number_integer(), key, "expected an integer");
    if constexpr (std::is_unsigned_v<T>) require(v.is_number_unsigned() || v.get<long long>() >= 0, key, "expected >= 0");
  } else {
    require(v.is_number(), key, "expected a number");
  }
  out = v.get<T>();
}

}  // namespace

void RunConfig::validate() const {
  require(std::isfinite(margin) && margin >= 0.0, "margin", "must be finite and >= 0");
  require(dropout >= 0.0 && dropout < 1.0, "dropout", "must lie in [0, 1)");
  require(embedding_dim >= 1, "embedding_dim", "must be >= 1");
  require(mc >= 1, "mc", "must be >= 1");
  require(P >= 2, "P", "must be >= 2");
  require(K >= 2, "K", "must be >= 2");
  require(batch_size >= 1, "batch_size", "must be >= 1");
  require(max_triplets >= 1, "max_triplets", "must be >= 1");
  require(epochs >= 0, "epochs", "must be >= 0");
  require(std::isfinite(lr) && lr > 0.0, "lr", "must be finite and > 0");
  require(decay_epoch >= 0 && decay_epoch <= epochs, "decay_epoch", "must lie in [0, epochs]");
  require(std::isfinite(weight_decay) && weight_decay >= 0.0, "weight_decay", "must be finite and >= 0");
  require(std::isfinite(mask_l1) && mask_l1 >= 0.0, "mask_l1", "must be finite and >= 0");
  require(hidden_dim >= 0, "hidden_dim", "must be >= 0");
  require(samples >= 1, "samples", "must be >= 1");
  require(sessions_per_draw >= 1, "sessions_per_draw", "must be >= 1");
  require(group_size >= 2, "group_size", "must be >= 2");
  require(steps_per_epoch >= 0, "steps_per_epoch", "must be >= 0");
  require(!sweep_mc.empty(), "sweep_mc", "must not be empty");
  for (Index v : sweep_mc) require(v >= 1, "sweep_mc", "entries must be >= 1");
}

RunConfig parse_run_config(const std::string& text, const RunConfig& base) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    fail(ErrorKind::Parse, std::string("config: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::Parse, "config: expected a JSON object");
  RunConfig c = base;
  for (const auto& [key, v] : doc.items()) {
    if (key == "margin") read_number(v, key, c.margin);
    else if (key == "dropout") read_number(v, key, c.dropout);
    else if (key == "embedding_dim") read_number(v, key, c.embedding_dim);
    else if (key == "mc") read_number(v, key, c.mc);
    else if (key == "P") read_number(v, key, c.P);
    else if (key == "K") read_number(v, key, c.K);
    else if (key == "batch_size") read_number(v, key, c.batch_size);
    else if (key == "max_triplets") read_number(v, key, c.max_triplets);
    else if (key == "epochs") read_number(v, key, c.epochs);
    else if (key == "lr") read_number(v, key, c.lr);
    else if (key == "decay_epoch") read_number(v, key, c.decay_epoch);
    else if (key == "weight_decay") read_number(v, key, c.weight_decay);
    else if (key == "mask_l1") read_number(v, key, c.mask_l1);
    else if (key == "seed") read_number(v, key, c.seed);
    else if (key == "hidden_dim") read_number(v, key, c.hidden_dim);
    else if (key == "samples") read_number(v, key, c.samples);
    else if (key == "sessions_per_draw") read_number(v, key, c.sessions_per_draw);
    else if (key == "group_size") read_number(v, key, c.group_size);
    else if (key == "steps_per_epoch") read_number(v, key, c.steps_per_epoch);
    else if (key == "miner") {
      require(v.is_string(), key, "expected a string");
      const auto s = v.get<std::string>();
      if (s == "batch-hard") c.miner = MinerKind::BatchHard;
      else if (s == "semi-hard") c.miner = MinerKind::SemiHard;
      else invalid(key, "expected batch-hard or semi-hard");
    } else if (key == "loss") {
      require(v.is_string(), key, "expected a string");
      const auto s = v.get<std::string>();
      if (s == "unit-margin") c.loss = LossKind::UnitMargin;
      else if (s == "soft-margin") c.loss = LossKind::SoftMargin;
      else invalid(key, "expected unit-margin or soft-margin");
    } else if (key == "notions") {
      require(v.is_array(), key, "expected a list of names");
      c.notions.clear();
      for (const auto& n : v) {
        require(n.is_string(), key, "expected a list of names");
        c.notions.push_back(n.get<std::string>());
      }
    } else if (key == "renormalize") {
      require(v.is_boolean(), key, "expected true or false");
      c.renormalize = v.get<bool>();
    } else if (key == "sweep_mc") {
      require(v.is_array(), key, "expected a list of integers");
      c.sweep_mc.clear();
      for (const auto& n : v) {
        require(n.is_number_integer(), key, "expected a list of integers");
        c.sweep_mc.push_back(n.get<Index>());
      }
    } else {
      invalid(key, "unknown key");
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), base);
}

std::string run_config_json(const RunConfig& config) { return to_json(config).dump(); }

}  // namespace mcr
