#include "cova/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "cova/errors.hpp"

namespace cova {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  return d;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

struct Key {
  const char* name;
  bool affects_results;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define COVA_INT_KEY(name, field, affects, T)                                               \
  Key {                                                                                     \
    name, affects, [](PipelineConfig& c, const std::string& v) { c.field = to_int<T>(name, v); }, \
        [](const PipelineConfig& c) { return std::to_string(c.field); }                     \
  }
#define COVA_DOUBLE_KEY(name, field)                                                        \
  Key {                                                                                     \
    name, true, [](PipelineConfig& c, const std::string& v) { c.field = to_double(name, v); }, \
        [](const PipelineConfig& c) { return fmt_double(c.field); }                         \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"video_id", false, [](PipelineConfig& c, const std::string& v) { c.video_id = v; },
          [](const PipelineConfig& c) { return c.video_id; }},
      COVA_INT_KEY("worker_count", worker_count, false, int),
      COVA_INT_KEY("chunk_count", chunk_count, true, int),
      COVA_INT_KEY("seed", seed, true, std::uint64_t),
      COVA_INT_KEY("min_blob_cells", min_blob_cells, true, int),
      COVA_INT_KEY("detector_batch", detector_batch, false, int),
      COVA_INT_KEY("queue_capacity", queue_capacity, false, int),
      COVA_DOUBLE_KEY("train.learning_rate", train.learning_rate),
      COVA_INT_KEY("train.epochs", train.epochs, true, int),
      COVA_INT_KEY("train.batch_size", train.batch_size, true, int),
      COVA_INT_KEY("train.temporal_depth", train.temporal_depth, true, int),
      COVA_DOUBLE_KEY("train.threshold", train.threshold),
      COVA_DOUBLE_KEY("train.fraction", train.train_fraction),
      COVA_INT_KEY("train.segment_length", train.segment_length, true, int),
      COVA_INT_KEY("train.burn_in", train.burn_in, true, int),
      COVA_DOUBLE_KEY("train.positive_weight", train.positive_weight),
      COVA_DOUBLE_KEY("tracker.iou_min", tracker.iou_min),
      COVA_INT_KEY("tracker.max_age", tracker.max_age, true, int),
      COVA_INT_KEY("tracker.min_hits", tracker.min_hits, true, int),
      COVA_DOUBLE_KEY("propagation.iou_threshold", propagation.iou_threshold),
      COVA_DOUBLE_KEY("propagation.split_containment", propagation.split_containment),
      COVA_DOUBLE_KEY("propagation.static_iou", propagation.static_iou),
      Key{"propagation.drop_unknown", true,
          [](PipelineConfig& c, const std::string& v) { c.propagation.drop_unknown = to_bool("propagation.drop_unknown", v); },
          [](const PipelineConfig& c) { return std::string(c.propagation.drop_unknown ? "true" : "false"); }},
      COVA_DOUBLE_KEY("oracle.miss_prob", oracle.miss_prob),
      COVA_DOUBLE_KEY("oracle.misclassify_prob", oracle.misclassify_prob),
      COVA_DOUBLE_KEY("oracle.jitter_sigma", oracle.jitter_sigma),
      COVA_DOUBLE_KEY("oracle.small_object_miss_area", oracle.small_object_miss_area),
  };
  return table;
}

#undef COVA_INT_KEY
#undef COVA_DOUBLE_KEY

}  // namespace

ConfigValues parse_config_text(std::string_view text) {
  ConfigValues out;
  std::istringstream in{std::string(text)};
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(std::string_view(t).substr(0, eq));
    std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

ConfigValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void apply_config(PipelineConfig& config, const ConfigValues& values) {
  for (const auto& [k, v] : values) {
    bool known = false;
    for (const auto& key : keys())
      if (k == key.name) {
        key.set(config, v);
        known = true;
        break;
      }
    if (!known) throw ConfigError("unknown config key '" + k + "'");
  }
}

std::optional<std::uint64_t> seed_from_env() {
  const char* env = std::getenv("COVA_SEED");
  if (!env) return std::nullopt;
  const std::string v(env);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) return std::nullopt;
  return out;
}

std::string PipelineConfig::canonical() const {
  std::string out;
  for (const auto& key : keys()) {
    if (!key.affects_results) continue;
    out += key.name;
    out += '=';
    out += key.get(*this);
    out += '\n';
  }
  return out;
}

}  // namespace cova
