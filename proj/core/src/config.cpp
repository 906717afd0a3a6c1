#include "fusegan/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "fusegan/errors.hpp"

namespace fusegan {

namespace {

struct KeyDef {
  const char* key;
  const char* def;
};

// The full key registry with desk-scale defaults.
constexpr std::array<KeyDef, 38> kKeys{{
    {"data.layout", "shapes"},
    {"data.root", ""},
    {"data.resolution", "64"},
    {"model.d_e", "128"},
    {"model.d_z", "100"},
    {"encoder.seed", "17"},
    {"encoder.positional_alpha", "0.1"},
    {"generator.base_channels", "64"},
    {"generator.channel_cap", "512"},
    {"generator.num_upblocks", "4"},
    {"generator.fusion", "df"},
    {"generator.skip_z", "true"},
    {"generator.mlp_hidden", "0"},
    {"generator.init_seed", "101"},
    {"discriminator.base_channels", "64"},
    {"discriminator.channel_cap", "512"},
    {"discriminator.num_downblocks", "4"},
    {"discriminator.head", "one_way"},
    {"discriminator.leaky_slope", "0.2"},
    {"discriminator.init_seed", "202"},
    {"trainer.lr_g", "0.0001"},
    {"trainer.lr_d", "0.0004"},
    {"trainer.adam_beta1", "0.0"},
    {"trainer.adam_beta2", "0.9"},
    {"trainer.adam_eps", "1e-8"},
    {"trainer.batch_size", "32"},
    {"trainer.total_steps", "5000"},
    {"trainer.d_steps_per_g", "1"},
    {"trainer.log_interval", "1"},
    {"trainer.checkpoint_interval", "1000"},
    {"trainer.seed", "1"},
    {"trainer.deterministic", "true"},
    {"penalty.enabled", "true"},
    {"penalty.k", "2.0"},
    {"penalty.p", "6.0"},
    {"sampling.truncation", "2.0"},
    {"eval.num_images", "2000"},
    {"eval.is_splits", "10"},
}};

bool known_key(const std::string& k) {
  return std::any_of(kKeys.begin(), kKeys.end(),
                     [&](const KeyDef& d) { return k == d.key; });
}

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

Config Config::defaults() {
  Config c;
  for (const auto& d : kKeys) c.values_[d.key] = d.def;
  return c;
}

Config Config::from_file(const std::string& path) {
  Config c = defaults();
  c.merge_file(path);
  return c;
}

void Config::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void Config::set_override(const std::string& spec) {
  const size_t eq = spec.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must be key=value, got '" + spec + "'");
  set(trim(spec.substr(0, eq)), trim(spec.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
  if (!known_key(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

int64_t Config::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    size_t pos = 0;
    int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
  }
}

double Config::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
  }
}

bool Config::get_bool(const std::string& key) const {
  std::string v = get(key);
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("config key '" + key + "' expects a boolean, got '" + get(key) + "'");
}

std::string Config::snapshot() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
  return os.str();
}

Config Config::from_snapshot(const std::string& text) {
  Config c = defaults();
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed snapshot line: " + line);
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

}  // namespace fusegan
