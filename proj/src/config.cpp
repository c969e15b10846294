#include "ubct/config.hpp"

#include "ubct/metrics.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace ubct {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return d;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

struct Entry {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define UBCT_DOUBLE(name, field) \
  Entry { name, [](const ExperimentConfig& c) { return format_double(c.field); }, [](ExperimentConfig& c, const std::string& v) { c.field = to_double(name, v); } }
#define UBCT_INT(name, field)                                                                  \
  Entry {                                                                                      \
    name, [](const ExperimentConfig& c) { return std::to_string(c.field); },                   \
        [](ExperimentConfig& c, const std::string& v) { c.field = to_int<decltype(c.field)>(name, v); } \
  }
#define UBCT_BOOL(name, field)                                                               \
  Entry {                                                                                    \
    name, [](const ExperimentConfig& c) { return std::string(c.field ? "true" : "false"); }, \
        [](ExperimentConfig& c, const std::string& v) { c.field = to_bool(name, v); }        \
  }
#define UBCT_STRING(name, field) \
  Entry { name, [](const ExperimentConfig& c) { return c.field; }, [](ExperimentConfig& c, const std::string& v) { c.field = v; } }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      UBCT_INT("seed", seed),
      UBCT_INT("geometry.n", n),
      UBCT_INT("geometry.n_views", n_views),
      UBCT_INT("geometry.n_dets", n_dets),
      UBCT_DOUBLE("geometry.det_spacing", det_spacing),
      Entry{"fbp.filter", [](const ExperimentConfig& c) { return to_string(c.filter); },
            [](ExperimentConfig& c, const std::string& v) {
              try {
                c.filter = parse_filter(v);
              } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("fbp.filter: ") + e.what());
              }
            }},
      UBCT_DOUBLE("noise.i0", i0),
      UBCT_DOUBLE("noise.dose_fraction", dose_fraction),
      UBCT_DOUBLE("noise.elec_var", elec_var),
      UBCT_DOUBLE("noise.atten_scale", atten_scale),
      UBCT_DOUBLE("schedule.beta_min", beta_min),
      UBCT_DOUBLE("schedule.beta_max", beta_max),
      UBCT_INT("schedule.K", K),
      Entry{"data.phantom", [](const ExperimentConfig& c) { return to_string(c.phantom); },
            [](ExperimentConfig& c, const std::string& v) {
              try {
                c.phantom = parse_phantom_kind(v);
              } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("data.phantom: ") + e.what());
              }
            }},
      UBCT_INT("data.train_count", train_count),
      UBCT_INT("data.test_count", test_count),
      UBCT_INT("model.hidden", hidden),
      UBCT_INT("model.embed_dim", embed_dim),
      UBCT_BOOL("model.per_layer_weights", per_layer_weights),
      UBCT_INT("train.epochs", epochs),
      UBCT_INT("train.batch_size", batch_size),
      UBCT_DOUBLE("train.lr", lr),
      UBCT_DOUBLE("train.weight_decay", weight_decay),
      UBCT_DOUBLE("train.sigma_train_scale", sigma_train_scale),
      UBCT_INT("train.checkpoint_every", checkpoint_every),
      UBCT_INT("train.max_steps", max_steps),
      UBCT_DOUBLE("sample.sigma_scale", sigma_scale),
      UBCT_BOOL("sample.final_noise", final_noise),
      UBCT_DOUBLE("metrics.range", metric_range),
      UBCT_STRING("paths.data", data_dir),
      UBCT_STRING("paths.out", out_dir),
  };
  return table;
}

#undef UBCT_DOUBLE
#undef UBCT_INT
#undef UBCT_BOOL
#undef UBCT_STRING

}  // namespace

TrainConfig ExperimentConfig::train(const std::string& dataset) const {
  TrainConfig t;
  t.K = K;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.lr = lr;
  t.weight_decay = weight_decay;
  t.seed = Rng(seed).substream("train").key();
  t.sigma_train_scale = sigma_train_scale;
  t.dataset = dataset;
  t.checkpoint_every = checkpoint_every;
  t.max_steps = max_steps;
  t.per_layer_weights = per_layer_weights;
  return t;
}

void ExperimentConfig::validate() const {
  try {
    geometry();
    noise(0).validate();
    schedule().validate();
    train("").validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (n < 16) throw ConfigError("geometry.n must be >= 16");
  if (train_count < 1 || test_count < 0) throw ConfigError("data counts must be positive");
  if (hidden < 1 || embed_dim < 2 || embed_dim % 2 != 0) throw ConfigError("model.hidden must be >= 1 and model.embed_dim even");
  if (!(sigma_scale >= 0.0)) throw ConfigError("sample.sigma_scale must be >= 0");
  if (!(metric_range > 0.0)) throw ConfigError("metrics.range must be > 0");
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const Entry& e : entries()) {
    if (key == e.key) {
      e.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Entry& e : entries()) keys.emplace_back(e.key);
  return keys;
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  for (const Entry& e : entries()) os << e.key << " = " << e.get(cfg) << '\n';
  return os.str();
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) { return serialize_config(a) == serialize_config(b); }

}  // namespace ubct
