#include "tsctl/config.hpp"

#include <fstream>
#include <sstream>

#include "tsctl/errors.hpp"

namespace tsctl {

using nlohmann::json;

namespace {

/// Expands dotted keys into nested objects.
json normalize(const json& in) {
  if (!in.is_object()) return in;
  json out = json::object();
  for (const auto& [key, value] : in.items()) {
    json* node = &out;
    std::size_t pos = 0;
    std::string k = key;
    for (std::size_t dot; (dot = k.find('.', pos)) != std::string::npos; pos = dot + 1) {
      node = &(*node)[k.substr(pos, dot - pos)];
      if (!node->is_object()) *node = json::object();
    }
    const std::string leaf = k.substr(pos);
    json v = normalize(value);
    if (node->contains(leaf) && (*node)[leaf].is_object() && v.is_object()) {
      (*node)[leaf].merge_patch(v);
    } else {
      (*node)[leaf] = std::move(v);
    }
  }
  return out;
}

const json* find(const json& root, const std::string& path) {
  const json* node = &root;
  std::size_t pos = 0;
  while (true) {
    const auto dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (!node->is_object() || !node->contains(key)) return nullptr;
    node = &(*node)[key];
    if (dot == std::string::npos) return node;
    pos = dot + 1;
  }
}

template <typename T>
T as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + path + "' has the wrong type: " + e.what());
  }
}

class Reader {
 public:
  explicit Reader(const json& root) : root_(root) {}

  bool has(const std::string& path) const { return find(root_, path) != nullptr; }

  template <typename T>
  void read(const std::string& path, T& target) const {
    if (const json* j = find(root_, path)) target = as<T>(*j, path);
  }

  void require(const std::string& path) {
    if (!has(path)) missing_.push_back(path);
  }
  void require_any(const std::vector<std::string>& paths) {
    for (const auto& p : paths) {
      if (has(p)) return;
    }
    std::string joined;
    for (const auto& p : paths) joined += (joined.empty() ? "" : " | ") + p;
    missing_.push_back(joined);
  }
  void note_missing(const std::string& what) { missing_.push_back(what); }

  void finish() const {
    if (missing_.empty()) return;
    std::string msg = "config is missing required keys:";
    for (const auto& m : missing_) msg += " " + m + ";";
    msg.pop_back();
    throw ConfigError(msg);
  }

 private:
  const json& root_;
  std::vector<std::string> missing_;
};

std::vector<double> number_or_list(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>()};
  return as<std::vector<double>>(j, path);
}

MethodSpec default_method(Method m, const Reader& r) {
  MethodSpec spec;
  spec.method = m;
  r.read("smoothing.w_l", spec.ema_window);
  r.read("smoothing.decimals", spec.round_decimals);
  r.read("smoothing.S", spec.is_stages);
  if (r.has("smoothing.mode")) {
    std::string mode;
    r.read("smoothing.mode", mode);
    spec.is_mode = parse_curriculum_mode(mode);
  }
  r.read("smoothing.tis_space", spec.tis_space);
  r.read("il.opd_coef", spec.distill.opd_coef);
  if (r.has("il.mode")) {
    std::string mode;
    r.read("il.mode", mode);
    spec.distill.mode = parse_distill_mode(mode);
  }
  if (r.has("il.oracle")) {
    std::string oracle;
    r.read("il.oracle", oracle);
    spec.distill.oracle = parse_oracle_kind(oracle);
  }
  r.read("il.rl_oracle_steps", spec.distill.rl_oracle_steps);
  return spec;
}

std::string default_label(const MethodSpec& s) {
  switch (s.method) {
    case Method::ema: return "ema" + std::to_string(s.ema_window);
    case Method::is: return "is" + std::to_string(s.is_stages);
    default: return to_string(s.method);
  }
}

MethodSpec parse_method_entry(const json& entry, const Reader& r, Reader& req,
                              std::vector<double> global_sigma,
                              std::vector<double> global_space) {
  std::string name;
  if (entry.is_string()) {
    name = entry.get<std::string>();
  } else if (entry.is_object() && entry.contains("method")) {
    name = as<std::string>(entry["method"], "methods[].method");
  } else {
    throw ConfigError("methods entries must be names or objects with a 'method' key");
  }
  MethodSpec spec = default_method(parse_method(name), r);
  spec.distill.lgn_sigma = std::move(global_sigma);
  spec.sigma_space = std::move(global_space);
  if (entry.is_object()) {
    Reader e(entry);
    e.read("label", spec.label);
    e.read("w_l", spec.ema_window);
    e.read("decimals", spec.round_decimals);
    e.read("S", spec.is_stages);
    e.read("tis_space", spec.tis_space);
    if (e.has("mode")) {
      std::string mode;
      e.read("mode", mode);
      spec.is_mode = parse_curriculum_mode(mode);
    }
    e.read("opd_coef", spec.distill.opd_coef);
    if (const json* j = find(entry, "lgn_sigma")) spec.distill.lgn_sigma = number_or_list(*j, "lgn_sigma");
    e.read("sigma_space", spec.sigma_space);
    if (e.has("oracle")) {
      std::string oracle;
      e.read("oracle", oracle);
      spec.distill.oracle = parse_oracle_kind(oracle);
    }
    e.read("rl_oracle_steps", spec.distill.rl_oracle_steps);
  } else {
    // Method-specific keys that have no sensible default.
    switch (spec.method) {
      case Method::ema: req.require("smoothing.w_l"); break;
      case Method::round: req.require("smoothing.decimals"); break;
      case Method::is: req.require("smoothing.S"); break;
      default: break;
    }
  }
  if (spec.method == Method::dpd_lgn && spec.distill.lgn_sigma.empty() &&
      spec.sigma_space.empty()) {
    req.note_missing("il.lgn_sigma | il.sigma_space");
  }
  if (spec.label.empty()) spec.label = default_label(spec);
  spec.distill.validate();
  return spec;
}

}  // namespace

json algo_to_json(const AlgoConfig& a) {
  json j;
  j["algorithm"] = to_string(a.algorithm);
  j["lr"] = a.lr;
  j["steps_per_update"] = a.steps_per_update;
  j["gamma"] = a.gamma;
  j["gae_lambda"] = a.gae_lambda;
  j["entropy_coef"] = a.entropy_coef;
  j["vf_coef"] = a.vf_coef;
  j["normalize_advantages"] = a.normalize_advantages;
  j["clip_eps"] = a.clip_eps;
  j["epochs"] = a.epochs;
  j["partition_factor"] = a.partition_factor;
  j["cg_max_steps"] = a.cg_max_steps;
  j["hessian_damping"] = a.hessian_damping;
  j["line_search_reduction"] = a.line_search_reduction;
  j["line_search_max_iter"] = a.line_search_max_iter;
  j["critic_updates"] = a.critic_updates;
  j["target_kl"] = a.target_kl;
  j["subsample_factor"] = a.subsample_factor;
  j["kl_slack"] = a.kl_slack;
  j["opt"] = {{"kind", to_string(a.opt.kind)},
              {"max_grad_clip", a.opt.max_grad_clip},
              {"rmsprop_eps", a.opt.rmsprop_eps}};
  j["net"] = {{"hidden", a.hidden}, {"activation", to_string(a.activation)}};
  return j;
}

AlgoConfig algo_from_json(const json& in, AlgoConfig a) {
  const json j = normalize(in);
  Reader r(j);
  if (r.has("algorithm")) {
    std::string name;
    r.read("algorithm", name);
    a.algorithm = parse_algorithm(name);
  }
  r.read("lr", a.lr);
  r.read("steps_per_update", a.steps_per_update);
  r.read("gamma", a.gamma);
  r.read("gae_lambda", a.gae_lambda);
  r.read("entropy_coef", a.entropy_coef);
  r.read("vf_coef", a.vf_coef);
  r.read("normalize_advantages", a.normalize_advantages);
  r.read("clip_eps", a.clip_eps);
  r.read("epochs", a.epochs);
  r.read("partition_factor", a.partition_factor);
  r.read("cg_max_steps", a.cg_max_steps);
  r.read("hessian_damping", a.hessian_damping);
  r.read("line_search_reduction", a.line_search_reduction);
  r.read("line_search_max_iter", a.line_search_max_iter);
  r.read("critic_updates", a.critic_updates);
  r.read("target_kl", a.target_kl);
  r.read("subsample_factor", a.subsample_factor);
  r.read("kl_slack", a.kl_slack);
  if (r.has("opt.kind")) {
    std::string kind;
    r.read("opt.kind", kind);
    a.opt.kind = parse_optimizer_kind(kind);
  }
  r.read("opt.lr", a.lr);
  r.read("opt.max_grad_clip", a.opt.max_grad_clip);
  r.read("opt.rmsprop_eps", a.opt.rmsprop_eps);
  r.read("net.hidden", a.hidden);
  if (r.has("net.activation")) {
    std::string act;
    r.read("net.activation", act);
    a.activation = parse_activation(act);
  }
  return a;
}

json env_to_json(const EnvConfig& e) {
  return {{"state_lag", e.state_lag},
          {"gross_limit", e.gross_limit},
          {"linear_reward", e.linear_reward},
          {"observation", e.observation == EnvConfig::Observation::lagged ? "lagged" : "lookahead"}};
}

EnvConfig env_from_json(const json& in, EnvConfig e) {
  const json j = normalize(in);
  Reader r(j);
  r.read("state_lag", e.state_lag);
  r.read("gross_limit", e.gross_limit);
  r.read("linear_reward", e.linear_reward);
  if (r.has("observation")) {
    std::string obs;
    r.read("observation", obs);
    if (obs == "lagged") e.observation = EnvConfig::Observation::lagged;
    else if (obs == "lookahead") e.observation = EnvConfig::Observation::lookahead;
    else throw ConfigError("env.observation must be lagged or lookahead");
  }
  return e;
}

RunConfig parse_run_config(const json& raw) {
  if (!raw.is_object()) throw ConfigError("config must be a JSON object");
  const json doc = normalize(raw);
  Reader r(doc);
  RunConfig cfg;

  r.require_any({"data.csv", "data.processed_csv", "data.synthetic"});
  r.require("algo.algorithm");
  r.require_any({"methods", "method", "smoothing.method"});
  r.require("seed");
  r.require("exp.seeds");

  // Data source.
  if (r.has("data.csv") || r.has("data.processed_csv")) {
    const bool raw_csv = r.has("data.csv");
    cfg.data.kind = raw_csv ? DataSource::Kind::csv : DataSource::Kind::processed_csv;
    r.read(raw_csv ? "data.csv" : "data.processed_csv", cfg.data.path);
    r.require("data.kinds");
    if (const json* kinds = find(doc, "data.kinds")) {
      for (const auto& [name, kind] : kinds->items()) {
        cfg.data.kinds[name] = parse_feature_kind(as<std::string>(kind, "data.kinds." + name));
      }
    }
    r.read("data.universe", cfg.data.universe);
    if (cfg.data.universe.empty()) r.read("env.universe", cfg.data.universe);
  } else if (r.has("data.synthetic")) {
    cfg.data.kind = DataSource::Kind::synthetic;
    auto& s = cfg.data.synthetic;
    r.read("data.synthetic.n_assets", s.n_assets);
    r.read("data.synthetic.length", s.length);
    r.read("data.synthetic.ar_coef", s.ar_coef);
    r.read("data.synthetic.signal_scale", s.signal_scale);
    r.read("data.synthetic.noise_scale", s.noise_scale);
    r.read("data.synthetic.seed", s.seed);
    r.read("data.synthetic.publish_predictors", s.publish_predictors);
  }
  r.read("split", cfg.split);

  // Learner: profile first, explicit keys override.
  if (r.has("algo.algorithm")) {
    std::string name;
    r.read("algo.algorithm", name);
    cfg.algo.algorithm = parse_algorithm(name);
  }
  r.read("algo.profile", cfg.profile);
  if (!cfg.profile.empty()) {
    const Profile p = load_profile(cfg.profile, cfg.algo.algorithm);
    cfg.algo = p.algo;
    cfg.env = p.env;
  }
  json algo_keys = doc.contains("algo") ? doc["algo"] : json::object();
  if (doc.contains("net")) algo_keys["net"] = doc["net"];
  if (doc.contains("opt")) algo_keys["opt"] = doc["opt"];
  algo_keys.erase("profile");
  cfg.algo = algo_from_json(algo_keys, cfg.algo);
  if (doc.contains("env")) cfg.env = env_from_json(doc["env"], cfg.env);

  // Experiment settings.
  if (const json* seeds = find(doc, "exp.seeds")) {
    if (seeds->is_number_integer()) {
      const auto n = seeds->get<std::int64_t>();
      if (n < 1) throw ConfigError("exp.seeds must be positive");
      r.read("seed", cfg.seed);
      cfg.exp.seeds = replica_seeds(cfg.seed, static_cast<std::size_t>(n));
    } else {
      cfg.exp.seeds = as<std::vector<std::uint64_t>>(*seeds, "exp.seeds");
    }
  }
  r.read("seed", cfg.seed);
  r.read("exp.total_steps", cfg.exp.total_steps);
  r.read("exp.tune_steps", cfg.exp.tune_steps);
  r.read("exp.tune_samples", cfg.exp.tune_samples);
  r.read("exp.workers", cfg.exp.workers);
  if (const json* space = find(doc, "exp.search_space")) {
    for (const auto& [key, grid] : space->items()) {
      cfg.exp.search_space.grids[key] = as<std::vector<double>>(grid, "exp.search_space." + key);
    }
  }
  r.read("out", cfg.out);

  // Methods.
  std::vector<double> sigma, space;
  if (const json* j = find(doc, "il.lgn_sigma")) sigma = number_or_list(*j, "il.lgn_sigma");
  r.read("il.sigma_space", space);
  if (const json* interval = find(doc, "il.sigma_interval")) {
    const auto lohi = as<std::array<double, 2>>(*interval, "il.sigma_interval");
    int count = 8;
    r.read("il.sigma_count", count);
    space = sigma_candidates(lohi[0], lohi[1], count, cfg.seed);
  }
  std::vector<json> entries;
  if (const json* list = find(doc, "methods")) {
    if (!list->is_array()) throw ConfigError("methods must be a list");
    entries.assign(list->begin(), list->end());
  } else if (const json* one = find(doc, "method")) {
    entries.push_back(*one);
  } else if (const json* sm = find(doc, "smoothing.method")) {
    // Single-method shorthand; "none" is the vanilla learner.
    const auto name = as<std::string>(*sm, "smoothing.method");
    entries.push_back(name == "none" ? std::string("baseline") : name);
  }
  for (const auto& e : entries) cfg.methods.push_back(parse_method_entry(e, r, r, sigma, space));

  r.finish();

  cfg.algo.validate();
  cfg.env.validate();
  cfg.exp.search_space.validate();
  if (cfg.exp.total_steps < 0 || cfg.exp.tune_steps < 0) throw ConfigError("step budgets must be non-negative");
  if (cfg.exp.tune_samples < 1) throw ConfigError("exp.tune_samples must be at least 1");
  if (cfg.exp.workers < 1) throw ConfigError("exp.workers must be at least 1");
  std::vector<std::string> labels;
  for (const auto& m : cfg.methods) {
    if (std::find(labels.begin(), labels.end(), m.name()) != labels.end()) {
      throw ConfigError("duplicate method label '" + m.name() + "'");
    }
    labels.push_back(m.name());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_run_config(doc);
}

json to_json(const RunConfig& cfg) {
  json j;
  switch (cfg.data.kind) {
    case DataSource::Kind::csv:
    case DataSource::Kind::processed_csv: {
      j["data"][cfg.data.kind == DataSource::Kind::csv ? "csv" : "processed_csv"] = cfg.data.path;
      json kinds = json::object();
      for (const auto& [name, kind] : cfg.data.kinds) kinds[name] = to_string(kind);
      j["data"]["kinds"] = kinds;
      j["data"]["universe"] = cfg.data.universe;
      break;
    }
    case DataSource::Kind::synthetic: {
      const auto& s = cfg.data.synthetic;
      j["data"]["synthetic"] = {{"n_assets", s.n_assets},         {"length", s.length},
                                {"ar_coef", s.ar_coef},           {"signal_scale", s.signal_scale},
                                {"noise_scale", s.noise_scale},   {"seed", s.seed},
                                {"publish_predictors", s.publish_predictors}};
      break;
    }
  }
  j["split"] = cfg.split;
  json algo = algo_to_json(cfg.algo);
  j["net"] = algo["net"];
  j["opt"] = algo["opt"];
  algo.erase("net");
  algo.erase("opt");
  if (!cfg.profile.empty()) algo["profile"] = cfg.profile;
  j["algo"] = algo;
  j["env"] = env_to_json(cfg.env);
  json methods = json::array();
  for (const auto& m : cfg.methods) {
    json e{{"method", to_string(m.method)},
           {"label", m.name()},
           {"w_l", m.ema_window},
           {"decimals", m.round_decimals},
           {"S", m.is_stages},
           {"mode", to_string(m.is_mode)},
           {"tis_space", m.tis_space},
           {"opd_coef", m.distill.opd_coef},
           {"lgn_sigma", m.distill.lgn_sigma},
           {"sigma_space", m.sigma_space},
           {"oracle", m.distill.oracle == DistillConfig::OracleKind::rl ? "rl" : "analytic"},
           {"rl_oracle_steps", m.distill.rl_oracle_steps}};
    methods.push_back(std::move(e));
  }
  j["methods"] = methods;
  json space = json::object();
  for (const auto& [key, grid] : cfg.exp.search_space.grids) space[key] = grid;
  j["exp"] = {{"seeds", cfg.exp.seeds},
              {"total_steps", cfg.exp.total_steps},
              {"tune_steps", cfg.exp.tune_steps},
              {"tune_samples", cfg.exp.tune_samples},
              {"workers", cfg.exp.workers},
              {"search_space", space}};
  j["seed"] = cfg.seed;
  j["out"] = cfg.out;
  return j;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << value;
  return os.str();
}

std::vector<std::uint64_t> replica_seeds(std::uint64_t master_seed, std::size_t count) {
  std::vector<std::uint64_t> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = derive_seed(master_seed, 1000 + k);
  return out;
}

ExperimentData load_experiment_data(const RunConfig& cfg) {
  ProcessedSeries series;
  switch (cfg.data.kind) {
    case DataSource::Kind::csv:
      series = process_raw(load_csv(cfg.data.path, cfg.data.kinds), cfg.data.universe);
      break;
    case DataSource::Kind::processed_csv:
      series = load_processed_csv(cfg.data.path, cfg.data.kinds, cfg.data.universe);
      break;
    case DataSource::Kind::synthetic:
      series = generate_synthetic(cfg.data.synthetic).first;
      break;
  }
  ExperimentData data;
  data.split = split(series, cfg.split, static_cast<std::size_t>(cfg.env.state_lag) + 1);
  data.series = std::make_shared<const ProcessedSeries>(std::move(series));
  return data;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  json j;
  j["format"] = "tsctl-model";
  j["version"] = kModelFormatVersion;
  j["algo"] = algo_to_json(model.algo);
  j["env"] = env_to_json(model.env);
  j["net"] = {{"input_dim", model.net.input_dim},
              {"n_assets", model.net.n_assets},
              {"hidden", model.algo.hidden},
              {"activation", to_string(model.net.activation)}};
  j["seed"] = model.seed;
  j["steps_trained"] = model.steps_trained;
  const Vector p = model.net.policy.flatten();
  const Vector v = model.net.value.flatten();
  j["policy"] = std::vector<double>(p.data(), p.data() + p.size());
  j["value"] = std::vector<double>(v.data(), v.data() + v.size());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!(out << j.dump() << '\n')) throw IoError("cannot write model " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": not a model file (" + e.what() + ")");
  }
  if (!j.is_object() || j.value("format", "") != "tsctl-model") {
    throw LoadError(path.string() + ": not a model file");
  }
  const int version = j.value("version", -1);
  if (version != kModelFormatVersion) {
    throw LoadError(path.string() + ": model format version " + std::to_string(version) +
                    " differs from the supported version " + std::to_string(kModelFormatVersion));
  }
  try {
    TrainedModel m;
    m.algo = algo_from_json(j.at("algo"));
    m.env = env_from_json(j.at("env"));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.steps_trained = j.at("steps_trained").get<std::int64_t>();
    MlpSpec spec;
    spec.input_dim = j.at("net").at("input_dim").get<std::size_t>();
    spec.n_assets = j.at("net").at("n_assets").get<std::size_t>();
    spec.hidden = j.at("net").at("hidden").get<std::vector<std::size_t>>();
    spec.activation = parse_activation(j.at("net").at("activation").get<std::string>());
    m.net = ActorCritic::create(spec);
    const auto p = j.at("policy").get<std::vector<double>>();
    const auto v = j.at("value").get<std::vector<double>>();
    if (p.size() != m.net.policy.size() || v.size() != m.net.value.size()) {
      throw LoadError(path.string() + ": parameter count does not match the network header");
    }
    m.net.policy.unflatten(Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size())));
    m.net.value.unflatten(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    return m;
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": malformed model file (" + e.what() + ")");
  }
}

void write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                    const RunConfig& cfg, const std::vector<std::string>& artifacts) {
  std::filesystem::create_directories(out_dir);
  json j;
  j["command"] = command;
  j["config_hash"] = hex64(config_hash(cfg));
  j["seed"] = cfg.seed;
  j["artifacts"] = artifacts;
  j["config"] = to_json(cfg);
  std::ofstream out(out_dir / "manifest.json");
  if (!(out << j.dump(1) << '\n')) throw IoError("cannot write manifest in " + out_dir.string());
}

}  // namespace tsctl
