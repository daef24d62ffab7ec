// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "desmoke/checkpoint.hpp"
#include "desmoke/error.hpp"

namespace desmoke {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& text, const char* want) {
  fail(ErrorCode::InvalidConfig, "config " + key + ": '" + text + "' is not " + want);
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    bad_value(key, raw, std::is_integral_v<T> ? "an integer" : "a number");
  return v;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  std::string s = trim(raw);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, raw, "a boolean");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

// "a, b, c"
std::vector<double> parse_list(const std::string& key, const std::string& raw) {
  std::vector<double> v;
  for (const auto& part : split(raw, ',')) v.push_back(parse_number<double>(key, part));
  if (v.empty()) bad_value(key, raw, "a non-empty list");
  return v;
}

// "a b; c d" -> rows of fixed width N
template <std::size_t N>
std::vector<std::array<double, N>> parse_rows(const std::string& key, const std::string& raw) {
  std::vector<std::array<double, N>> rows;
  for (const auto& row : split(raw, ';')) {
    std::istringstream in(row);
    std::array<double, N> r{};
    std::string tok;
    std::size_t i = 0;
    while (in >> tok) {
      if (i == N) bad_value(key, raw, "rows of the expected width");
      r[i++] = parse_number<double>(key, tok);
    }
    if (i != N) bad_value(key, raw, "rows of the expected width");
    rows.push_back(r);
  }
  if (rows.empty()) bad_value(key, raw, "a non-empty row list");
  return rows;
}

template <std::size_t N>
std::string rows_text(const std::vector<std::array<double, N>>& rows) {
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i) out << "; ";
    for (std::size_t j = 0; j < N; ++j) out << (j ? " " : "") << rows[i][j];
  }
  return out.str();
}

std::string list_text(const std::vector<double>& v) {
  std::ostringstream out;
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v[i];
  return out.str();
}

struct Field {
  std::string key;
  std::function<void(AppConfig&, const std::string&)> set;
  std::function<nlohmann::json(const AppConfig&)> get;
};

template <typename T, typename Access>
Field scalar(std::string key, Access access) {
  Field f;
  f.key = key;
  f.set = [key, access](AppConfig& c, const std::string& v) {
    T& slot = access(c);
    if constexpr (std::is_same_v<T, bool>)
      slot = parse_bool(key, v);
    else if constexpr (std::is_same_v<T, std::string>)
      slot = trim(v);
    else
      slot = parse_number<T>(key, v);
  };
  f.get = [access](const AppConfig& c) {
    return nlohmann::json(access(const_cast<AppConfig&>(c)));
  };
  return f;
}

#define DSM_FIELD(T, key, member) \
  scalar<T>(key, [](AppConfig& c) -> T& { return c.member; })

std::vector<Field> make_fields() {
  std::vector<Field> f;
  f.push_back({"network.variant",
               [](AppConfig& c, const std::string& v) {
                 const Variant var = parse_variant(trim(v));
                 const bool ref = c.network.use_ref, mask = c.network.use_mask;
                 c.network = var == Variant::Full    ? NetworkConfig::full()
                             : var == Variant::Tiny  ? NetworkConfig::tiny()
                                                     : NetworkConfig::small();
                 c.network.use_ref = ref;
                 c.network.use_mask = mask;
               },
               [](const AppConfig& c) { return nlohmann::json(variant_name(c.network.variant)); }});
  f.push_back(DSM_FIELD(int, "network.channels", network.channels));
  f.push_back(DSM_FIELD(int, "network.enc_blocks", network.enc_blocks));
  f.push_back(DSM_FIELD(int, "network.maskref_blocks", network.maskref_blocks));
  f.push_back(DSM_FIELD(int, "network.fusion_blocks", network.fusion_blocks));
  f.push_back(DSM_FIELD(int, "network.recon_blocks", network.recon_blocks));
  f.push_back(DSM_FIELD(bool, "network.use_ref", network.use_ref));
  f.push_back(DSM_FIELD(bool, "network.use_mask", network.use_mask));
  f.push_back(DSM_FIELD(bool, "network.zero_init_final", network.zero_init_final));
  f.push_back(DSM_FIELD(double, "network.leaky_slope", network.leaky_slope));

  f.push_back(DSM_FIELD(int, "discriminator.base_channels", discriminator.base_channels));
  f.push_back(DSM_FIELD(int, "discriminator.input_size", discriminator.input_size));
  f.push_back(DSM_FIELD(double, "discriminator.leaky_slope", discriminator.leaky_slope));

  f.push_back({"mask.preprocess",
               [](AppConfig& c, const std::string& v) {
                 c.mask.preprocess = parse_mask_preprocess(trim(v));
               },
               [](const AppConfig& c) { return nlohmann::json(mask_preprocess_name(c.mask.preprocess)); }});
  f.push_back(DSM_FIELD(int, "mask.patch_size", mask.patch_size));
  f.push_back(DSM_FIELD(double, "mask.epsilon", mask.epsilon));
  f.push_back(DSM_FIELD(int, "mask.dcp_window", mask.dcp_window));
  f.push_back(DSM_FIELD(int, "mask.blur_kernel", mask.blur_kernel));
  f.push_back(DSM_FIELD(double, "mask.blur_sigma", mask.blur_sigma));

  f.push_back({"flow.backend",
               [](AppConfig& c, const std::string& v) {
                 const std::string s = trim(v);
                 if (s == "blockmatch")
                   c.flow.backend = FlowBackendKind::BlockMatch;
                 else if (s == "external")
                   c.flow.backend = FlowBackendKind::External;
                 else
                   bad_value("flow.backend", v, "blockmatch or external");
               },
               [](const AppConfig& c) {
                 return nlohmann::json(c.flow.backend == FlowBackendKind::BlockMatch ? "blockmatch"
                                                                                     : "external");
               }});
  f.push_back(DSM_FIELD(int, "flow.block_size", flow.block_size));
  f.push_back(DSM_FIELD(int, "flow.search_radius", flow.search_radius));
  f.push_back(DSM_FIELD(std::string, "flow.plugin", flow.plugin_path));
  f.push_back(DSM_FIELD(std::string, "flow.checkpoint", flow.checkpoint_path));

  f.push_back(DSM_FIELD(int, "train.batch_size", train.batch_size));
  f.push_back(DSM_FIELD(int, "train.crop", train.crop));
  f.push_back(DSM_FIELD(bool, "train.flips", train.flips));
  f.push_back(DSM_FIELD(double, "train.beta1", train.adam.beta1));
  f.push_back(DSM_FIELD(double, "train.beta2", train.adam.beta2));
  f.push_back(DSM_FIELD(double, "train.adam_eps", train.adam.eps));
  f.push_back(DSM_FIELD(int, "train.iters", train.iters));
  f.push_back(DSM_FIELD(double, "train.lr_max", train.lr_max));
  f.push_back(DSM_FIELD(double, "train.lr_min", train.lr_min));
  f.push_back(DSM_FIELD(int, "train.finetune_iters", train.finetune_iters));
  f.push_back(DSM_FIELD(double, "train.finetune_lr0", train.finetune_lr0));
  f.push_back(DSM_FIELD(double, "train.lambda_reg", train.weights.lambda_reg));
  f.push_back(DSM_FIELD(double, "train.lambda_gan", train.weights.lambda_gan));
  f.push_back(DSM_FIELD(std::uint64_t, "train.seed", train.seed));
  f.push_back(DSM_FIELD(int, "train.clip_sample_len", train.clip_sample_len));
  f.push_back(DSM_FIELD(double, "train.tau", train.tau));
  f.push_back(DSM_FIELD(int, "train.checkpoint_interval", train.checkpoint_interval));

  f.push_back(DSM_FIELD(double, "deploy.ref_epsilon", deploy.ref_epsilon));
  f.push_back(DSM_FIELD(int, "deploy.chunk_len", deploy.chunk_len));

  f.push_back(DSM_FIELD(int, "synth.clips", synth.clips));
  f.push_back(DSM_FIELD(int, "synth.frames", synth.frames));
  f.push_back(DSM_FIELD(int, "synth.height", synth.height));
  f.push_back(DSM_FIELD(int, "synth.width", synth.width));
  f.push_back(DSM_FIELD(double, "synth.split_ratio", synth.split_ratio));
  f.push_back(DSM_FIELD(std::uint64_t, "synth.seed", synth.seed));
  f.push_back(DSM_FIELD(bool, "synth.instrument", synth.instrument));
  f.push_back(DSM_FIELD(int, "synth.noise_octaves", synth.grid.noise_octaves));
  f.push_back(DSM_FIELD(double, "synth.heterogeneity", synth.grid.heterogeneity));
  f.push_back({"synth.density_peaks",
               [](AppConfig& c, const std::string& v) {
                 c.synth.grid.density_peaks = parse_list("synth.density_peaks", v);
               },
               [](const AppConfig& c) { return nlohmann::json(list_text(c.synth.grid.density_peaks)); }});
  f.push_back({"synth.noise_scales",
               [](AppConfig& c, const std::string& v) {
                 c.synth.grid.noise_scales = parse_list("synth.noise_scales", v);
               },
               [](const AppConfig& c) { return nlohmann::json(list_text(c.synth.grid.noise_scales)); }});
  f.push_back({"synth.drifts",
               [](AppConfig& c, const std::string& v) {
                 c.synth.grid.drifts = parse_rows<2>("synth.drifts", v);
               },
               [](const AppConfig& c) { return nlohmann::json(rows_text(c.synth.grid.drifts)); }});
  f.push_back({"synth.profiles",
               [](AppConfig& c, const std::string& v) {
                 c.synth.grid.profiles = parse_rows<4>("synth.profiles", v);
               },
               [](const AppConfig& c) { return nlohmann::json(rows_text(c.synth.grid.profiles)); }});
  f.push_back({"synth.airlight",
               [](AppConfig& c, const std::string& v) {
                 const auto rows = parse_rows<3>("synth.airlight", v);
                 if (rows.size() != 1) bad_value("synth.airlight", v, "one RGB triple");
                 c.synth.grid.airlight = rows[0];
               },
               [](const AppConfig& c) {
                 return nlohmann::json(rows_text(std::vector{c.synth.grid.airlight}));
               }});

  f.push_back({"eval.target_mode",
               [](AppConfig& c, const std::string& v) { c.eval.mode = parse_target_mode(trim(v)); },
               [](const AppConfig& c) { return nlohmann::json(target_mode_name(c.eval.mode)); }});
  f.push_back(DSM_FIELD(double, "eval.tau", eval.tau));
  return f;
}

#undef DSM_FIELD

const std::vector<Field>& fields() {
  static const std::vector<Field> f = make_fields();
  return f;
}

// Sequences become "a, b"; sequences of sequences become "a b; c d".
std::string flatten_scalar(const YAML::Node& n, const std::string& key) {
  if (n.IsScalar()) return n.Scalar();
  if (n.IsNull()) return {};
  if (!n.IsSequence()) fail(ErrorCode::InvalidConfig, "config " + key + " must be a scalar or list");
  std::ostringstream out;
  bool nested = false;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const YAML::Node& e = n[i];
    if (e.IsSequence()) {
      nested = true;
      if (i) out << "; ";
      for (std::size_t j = 0; j < e.size(); ++j) {
        if (!e[j].IsScalar())
          fail(ErrorCode::InvalidConfig, "config " + key + " nests too deeply");
        out << (j ? " " : "") << e[j].Scalar();
      }
    } else if (e.IsScalar()) {
      if (nested) fail(ErrorCode::InvalidConfig, "config " + key + " mixes lists and scalars");
      out << (i ? ", " : "") << e.Scalar();
    } else {
      fail(ErrorCode::InvalidConfig, "config " + key + " has an unsupported entry");
    }
  }
  return out.str();
}

}  // namespace

void TrainConfig::validate(int patch_size) const {
  require(batch_size >= 1, ErrorCode::InvalidConfig, "train.batch_size must be >= 1");
  require(crop >= Frame::kMinSide && crop % 4 == 0 && patch_size > 0 && crop % patch_size == 0,
          ErrorCode::InvalidConfig, "train.crop must be >= 16 and divisible by 4 and the patch size");
  require(iters > 0, ErrorCode::InvalidConfig, "train.iters must be > 0");
  require(finetune_iters > 0, ErrorCode::InvalidConfig, "train.finetune_iters must be > 0");
  require(lr_max > 0.0 && lr_min >= 0.0 && lr_min <= lr_max, ErrorCode::InvalidConfig,
          "train learning rates must satisfy 0 <= lr_min <= lr_max, lr_max > 0");
  require(finetune_lr0 > 0.0, ErrorCode::InvalidConfig, "train.finetune_lr0 must be > 0");
  require(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 &&
              adam.eps > 0.0,
          ErrorCode::InvalidConfig, "Adam betas must lie in [0,1) and eps > 0");
  require(clip_sample_len >= 1, ErrorCode::InvalidConfig, "train.clip_sample_len must be >= 1");
  require(tau > 0.0 && tau < 1.0, ErrorCode::InvalidConfig, "train.tau must lie in (0,1)");
  require(checkpoint_interval >= 1, ErrorCode::InvalidConfig,
          "train.checkpoint_interval must be >= 1");
  weights.validate();
}

void DeployConfig::validate() const {
  require(ref_epsilon >= 0.0, ErrorCode::InvalidConfig, "deploy.ref_epsilon must be >= 0");
  require(chunk_len >= 1, ErrorCode::InvalidConfig, "deploy.chunk_len must be >= 1");
}

void SynthConfig::validate() const {
  require(clips >= 1, ErrorCode::InvalidConfig, "synth.clips must be >= 1");
  require(frames >= 2, ErrorCode::InvalidConfig, "synth.frames must be >= 2");
  require(height >= Frame::kMinSide && width >= Frame::kMinSide && height % 4 == 0 &&
              width % 4 == 0,
          ErrorCode::InvalidConfig, "synth frame sides must be >= 16 and divisible by 4");
  require(split_ratio >= 0.0 && split_ratio <= 1.0, ErrorCode::InvalidConfig,
          "synth.split_ratio must lie in [0,1]");
}

void AppConfig::validate() const {
  network.validate();
  discriminator.validate();
  mask.validate();
  train.validate(mask.patch_size);
  deploy.validate();
  synth.validate();
  require(eval.tau > 0.0 && eval.tau < 1.0, ErrorCode::InvalidConfig, "eval.tau must lie in (0,1)");
  require(flow.block_size >= 1 && flow.search_radius >= 0, ErrorCode::InvalidConfig,
          "flow.block_size must be >= 1 and flow.search_radius >= 0");
}

FlatConfig read_config_file(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    fail(ErrorCode::IOError, "cannot read config " + path.string());
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::InvalidConfig, "config " + path.string() + ": " + e.what());
  }
  FlatConfig flat;
  if (root.IsNull()) return flat;
  require(root.IsMap(), ErrorCode::InvalidConfig, "config root must be a mapping of sections");
  for (const auto& sec : root) {
    const std::string section = sec.first.as<std::string>();
    require(sec.second.IsMap(), ErrorCode::InvalidConfig,
            "config section '" + section + "' must be a mapping");
    for (const auto& kv : sec.second) {
      const std::string key = section + "." + kv.first.as<std::string>();
      flat[key] = flatten_scalar(kv.second, key);
    }
  }
  return flat;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

std::string env_var_name(const std::string& key) {
  std::string name = "DESMOKE_";
  for (char c : key)
    name += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return name;
}

void apply_env_overrides(FlatConfig& flat) {
  for (const auto& key : config_keys())
    if (const char* v = std::getenv(env_var_name(key).c_str())) flat[key] = v;
}

AppConfig build_config(const FlatConfig& flat) {
  for (const auto& [key, value] : flat)
    require(std::find(config_keys().begin(), config_keys().end(), key) != config_keys().end(),
            ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
  AppConfig cfg;
  // The variant preset goes first so explicit sizes refine it.
  if (auto it = flat.find("network.variant"); it != flat.end()) fields().front().set(cfg, it->second);
  for (const auto& f : fields()) {
    if (f.key == "network.variant") continue;
    if (auto it = flat.find(f.key); it != flat.end()) f.set(cfg, it->second);
  }
  cfg.validate();
  return cfg;
}

AppConfig load_app_config(const std::optional<std::filesystem::path>& path) {
  FlatConfig flat;
  if (path) flat = read_config_file(*path);
  apply_env_overrides(flat);
  return build_config(flat);
}

nlohmann::json to_json(const AppConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    j[f.key.substr(0, dot)][f.key.substr(dot + 1)] = f.get(cfg);
  }
  j["network"] = desmoke::to_json(cfg.network);
  return j;
}

}  // namespace desmoke
