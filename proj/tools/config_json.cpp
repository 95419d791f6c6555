#include "config_json.hpp"

#include <array>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace schedlab {

using nlohmann::json;

namespace {

template <class T>
using Field = std::pair<const char*, T SystemConfig::*>;

const auto kDoubles = std::to_array<Field<double>>({
    {"tx_psd_dbm_hz", &SystemConfig::tx_psd_dbm_hz},
    {"noise_psd_dbm_hz", &SystemConfig::noise_psd_dbm_hz},
    {"tti_seconds", &SystemConfig::tti_seconds},
    {"rb_bandwidth_hz", &SystemConfig::rb_bandwidth_hz},
    {"arrival_prob", &SystemConfig::arrival_prob},
    {"eps_max", &SystemConfig::eps_max},
    {"log_snr_max", &SystemConfig::log_snr_max},
    {"snr_log_base", &SystemConfig::snr_log_base},
    {"cell_radius_m", &SystemConfig::cell_radius_m},
    {"user_speed_mps", &SystemConfig::user_speed_mps},
    {"fade_persistence", &SystemConfig::fade_persistence},
    {"rician_k", &SystemConfig::rician_k},
    {"reward_eps_floor", &SystemConfig::reward_eps_floor},
    {"snr_offset_db", &SystemConfig::snr_offset_db},
    {"fixed_snr_db", &SystemConfig::fixed_snr_db},
    {"sigma", &SystemConfig::sigma},
    {"delta", &SystemConfig::delta},
    {"lr_actor", &SystemConfig::lr_actor},
    {"lr_critic", &SystemConfig::lr_critic},
    {"tau", &SystemConfig::tau},
    {"psi_min", &SystemConfig::psi_min},
    {"psi_max", &SystemConfig::psi_max},
    {"gamma", &SystemConfig::gamma},
    {"initial_weight", &SystemConfig::initial_weight},
    {"weight_floor", &SystemConfig::weight_floor},
    {"momentum", &SystemConfig::momentum},
    {"param_noise_v", &SystemConfig::param_noise_v},
    {"param_noise_lambda", &SystemConfig::param_noise_lambda},
    {"d_other_seconds", &SystemConfig::d_other_seconds},
});

const auto kInts = std::to_array<Field<int>>({
    {"packet_bytes", &SystemConfig::packet_bytes},
    {"d_min", &SystemConfig::d_min},
    {"d_max", &SystemConfig::d_max},
    {"replay_capacity", &SystemConfig::replay_capacity},
    {"batch_size", &SystemConfig::batch_size},
    {"episode_slots", &SystemConfig::episode_slots},
    {"actor_hidden_per_user", &SystemConfig::actor_hidden_per_user},
    {"critic_hidden_per_user", &SystemConfig::critic_hidden_per_user},
    {"upload_batch", &SystemConfig::upload_batch},
    {"users", &SystemConfig::users},
    {"rbs", &SystemConfig::rbs},
    {"episodes", &SystemConfig::episodes},
    {"metrics_window_episodes", &SystemConfig::metrics_window_episodes},
});

template <class E>
struct EnumName {
  E value;
  const char* name;
};

const auto kChannelModels = std::to_array<EnumName<ChannelModel>>({
    {ChannelModel::kMobileRician, "mobile_rician"},
    {ChannelModel::kFixed, "fixed"},
});
const auto kExecPolicies = std::to_array<EnumName<ExecPolicy>>({
    {ExecPolicy::kSerial, "serial"},
    {ExecPolicy::kParallel, "parallel"},
});
const auto kOptimizers = std::to_array<EnumName<OptimizerKind>>({
    {OptimizerKind::kSgd, "sgd"},
    {OptimizerKind::kMomentum, "momentum"},
});
const auto kIsNormalizations = std::to_array<EnumName<IsNormalization>>({
    {IsNormalization::kNone, "none"},
    {IsNormalization::kBatchMax, "max"},
    {IsNormalization::kBatchMean, "mean"},
});
const auto kModes = std::to_array<EnumName<Mode>>({
    {Mode::kStraightforward, "straightforward"},
    {Mode::kTdrl, "tdrl"},
});

template <class E, std::size_t N>
const char* enum_name(const std::array<EnumName<E>, N>& table, E v) {
  for (const auto& e : table)
    if (e.value == v) return e.name;
  return "?";
}

template <class E, std::size_t N>
E enum_value(const std::array<EnumName<E>, N>& table, const json& j, const char* field) {
  if (!j.is_string()) throw ConfigError(field, "expected a string");
  const std::string s = j.get<std::string>();
  std::string allowed;
  for (const auto& e : table) {
    if (s == e.name) return e.value;
    allowed += allowed.empty() ? "" : ", ";
    allowed += e.name;
  }
  throw ConfigError(field, "unknown value '" + s + "' (expected one of " + allowed + ")");
}

double get_double(const json& j, const char* field) {
  if (!j.is_number()) throw ConfigError(field, "expected a number");
  return j.get<double>();
}

int get_int(const json& j, const char* field) {
  if (!j.is_number_integer()) throw ConfigError(field, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(field, "out of range");
  return static_cast<int>(v);
}

bool get_bool(const json& j, const char* field) {
  if (!j.is_boolean()) throw ConfigError(field, "expected true or false");
  return j.get<bool>();
}

}  // namespace

json config_to_json(const SystemConfig& cfg) {
  json j = json::object();
  for (const auto& [name, ptr] : kDoubles) j[name] = cfg.*ptr;
  for (const auto& [name, ptr] : kInts) j[name] = cfg.*ptr;
  j["seed"] = cfg.seed;
  j["mode"] = enum_name(kModes, cfg.mode);
  j["channel_model"] = enum_name(kChannelModels, cfg.channel_model);
  j["optimizer"] = enum_name(kOptimizers, cfg.optimizer);
  j["exec"] = enum_name(kExecPolicies, cfg.exec);
  j["is_normalization"] = enum_name(kIsNormalizations, cfg.is_normalization);
  j["flags"] = {{"multi_head", cfg.flags.multi_head},
                {"reward_shaping", cfg.flags.reward_shaping},
                {"importance_sampling", cfg.flags.importance_sampling}};
  return j;
}

SystemConfig config_from_json(const json& j, const SystemConfig& base) {
  if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
  SystemConfig cfg = base;
  std::set<std::string> known;
  auto take = [&](const char* name) -> const json* {
    known.insert(name);
    auto it = j.find(name);
    return it == j.end() ? nullptr : &*it;
  };
  for (const auto& [name, ptr] : kDoubles)
    if (const json* v = take(name)) cfg.*ptr = get_double(*v, name);
  for (const auto& [name, ptr] : kInts)
    if (const json* v = take(name)) cfg.*ptr = get_int(*v, name);
  if (const json* v = take("seed")) {
    if (!v->is_number_unsigned()) throw ConfigError("seed", "expected a non-negative integer");
    cfg.seed = v->get<std::uint64_t>();
  }
  if (const json* v = take("mode")) cfg.mode = enum_value(kModes, *v, "mode");
  if (const json* v = take("channel_model"))
    cfg.channel_model = enum_value(kChannelModels, *v, "channel_model");
  if (const json* v = take("optimizer")) cfg.optimizer = enum_value(kOptimizers, *v, "optimizer");
  if (const json* v = take("exec")) cfg.exec = enum_value(kExecPolicies, *v, "exec");
  if (const json* v = take("is_normalization"))
    cfg.is_normalization = enum_value(kIsNormalizations, *v, "is_normalization");
  if (const json* v = take("flags")) {
    if (v->is_string()) {
      cfg.flags = parse_flags(v->get<std::string>());
    } else if (v->is_object()) {
      for (const auto& [key, val] : v->items()) {
        const std::string field = "flags." + key;
        if (key == "multi_head") cfg.flags.multi_head = get_bool(val, field.c_str());
        else if (key == "reward_shaping") cfg.flags.reward_shaping = get_bool(val, field.c_str());
        else if (key == "importance_sampling")
          cfg.flags.importance_sampling = get_bool(val, field.c_str());
        else throw ConfigError(field, "unknown field");
      }
    } else {
      throw ConfigError("flags", "expected an object or a string such as \"mh,rs,is\"");
    }
  }
  for (const auto& [key, val] : j.items())
    if (!known.contains(key)) throw ConfigError(key, "unknown field");
  cfg.validate();
  return cfg;
}

SystemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

std::string dump_config(const SystemConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

TrainerFlags parse_flags(const std::string& s) {
  TrainerFlags f;
  std::string token;
  std::string cleaned = s;
  for (char& c : cleaned)
    if (c == ',' || c == '+') c = ' ';
  std::istringstream words(cleaned);
  while (words >> token) {
    if (token == "none") continue;
    if (token == "mh") f.multi_head = true;
    else if (token == "rs") f.reward_shaping = true;
    else if (token == "is") f.importance_sampling = true;
    else throw ConfigError("flags", "unknown flag '" + token + "' (expected mh, rs, is or none)");
  }
  return f;
}

std::string flags_to_string(const TrainerFlags& f) {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ",";
    s += name;
  };
  add(f.multi_head, "mh");
  add(f.reward_shaping, "rs");
  add(f.importance_sampling, "is");
  return s.empty() ? "none" : s;
}

}  // namespace schedlab
