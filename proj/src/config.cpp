#include "fedaudit/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fedaudit {

using nlohmann::json;

namespace {

std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

std::string index(const std::string& parent, std::size_t i) { return parent + "[" + std::to_string(i) + "]"; }

// A JSON object under a key path. Every key read is recorded; finish() rejects
// whatever was left unread.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(join(path_, key), "required key is missing");
    return j_.at(key);
  }
  std::string key_path(const std::string& key) const { return join(path_, key); }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(join(path_, key), "unknown key");
  }

  double number(const std::string& key, double fallback) {
    return has(key) ? as_number(j_.at(key), key_path(key)) : fallback;
  }
  std::size_t count(const std::string& key, std::size_t fallback) {
    return has(key) ? as_count(j_.at(key), key_path(key)) : fallback;
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_boolean()) throw ConfigError(key_path(key), "expected true or false");
    return j_.at(key).get<bool>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    return has(key) ? as_string(j_.at(key), key_path(key)) : fallback;
  }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
    return d;
  }
  static std::uint64_t as_u64(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) throw ConfigError(path, "must be non-negative");
    throw ConfigError(path, "expected a non-negative integer");
  }
  static std::size_t as_count(const json& v, const std::string& path) {
    return static_cast<std::size_t>(as_u64(v, path));
  }
  static std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    return v.get<std::string>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const json& as_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array");
  return v;
}

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ConfigError(path, what);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

ArchSpec parse_arch(Obj o, ArchSpec arch) {
  arch.input_length = o.count("input_length", arch.input_length);
  arch.num_classes = o.count("num_classes", arch.num_classes);
  if (o.has("conv")) {
    arch.conv_layers.clear();
    const auto& arr = as_array(o.at("conv"), o.key_path("conv"));
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Obj c(arr[i], index(o.key_path("conv"), i));
      ConvSpec spec;
      spec.filters = Obj::as_count(c.at("filters"), c.key_path("filters"));
      spec.kernel_size = Obj::as_count(c.at("kernel_size"), c.key_path("kernel_size"));
      spec.stride = c.count("stride", 1);
      c.finish();
      arch.conv_layers.push_back(spec);
    }
  }
  if (o.has("dense")) {
    arch.dense_layers.clear();
    const auto& arr = as_array(o.at("dense"), o.key_path("dense"));
    for (std::size_t i = 0; i < arr.size(); ++i)
      arch.dense_layers.push_back(Obj::as_count(arr[i], index(o.key_path("dense"), i)));
  }
  o.finish();
  require(arch.num_classes >= 2, o.key_path("num_classes"), "need at least 2 classes");
  try {
    arch.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(o.path(), e.what());
  }
  return arch;
}

AttackSpec parse_attack(Obj o, std::size_t& client) {
  client = Obj::as_count(o.at("client"), o.key_path("client"));
  AttackSpec a;
  const auto kind = Obj::as_string(o.at("kind"), o.key_path("kind"));
  try {
    a.kind = parse_attack_kind(kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(o.key_path("kind"), e.what());
  }
  a.fraction = o.number("fraction", a.fraction);
  if (o.has("noise_std")) a.noise_std = Obj::as_number(o.at("noise_std"), o.key_path("noise_std"));
  a.class_a = o.count("class_a", a.class_a);
  a.class_b = o.count("class_b", a.class_b);
  a.constant = o.number("constant", a.constant);
  a.sign_scale = o.number("sign_scale", a.sign_scale);
  if (o.has("seed")) a.seed = Obj::as_u64(o.at("seed"), o.key_path("seed"));
  o.finish();
  require(a.fraction > 0.0 && a.fraction <= 1.0, o.key_path("fraction"), "must lie in (0, 1]");
  if (a.noise_std) {
    require(*a.noise_std >= 0.0, o.key_path("noise_std"), "must be non-negative");
    if (a.kind == AttackKind::kFeaturePoison)
      require(*a.noise_std > 0.0, o.key_path("noise_std"), "must be positive for FP");
  }
  require(a.sign_scale >= 1.0, o.key_path("sign_scale"), "must be at least 1");
  if (a.kind == AttackKind::kLabelSwap) require(a.class_a != a.class_b, o.key_path("class_b"), "must differ from class_a");
  return a;
}

Aggregator parse_aggregator(const json& v, const std::string& path) {
  Aggregator agg;
  std::string kind;
  std::optional<Obj> o;
  if (v.is_string()) {
    kind = v.get<std::string>();
  } else {
    o.emplace(v, path);
    kind = Obj::as_string(o->at("kind"), o->key_path("kind"));
  }
  const std::string kind_path = o ? o->key_path("kind") : path;
  if (kind == "fedavg") {
    agg.kind = Aggregator::Kind::kFedAvg;
  } else if (kind == "krum") {
    agg.kind = Aggregator::Kind::kKrum;
    if (o) agg.f = o->count("f", 0);
  } else if (kind == "coordinate_median") {
    agg.kind = Aggregator::Kind::kCoordinateMedian;
  } else if (kind == "trimmed_mean") {
    agg.kind = Aggregator::Kind::kTrimmedMean;
    agg.trim = o ? o->count("trim", 1) : 1;
  } else {
    throw ConfigError(kind_path, "unknown aggregator '" + kind + "' (fedavg, krum, coordinate_median, trimmed_mean)");
  }
  if (o) o->finish();
  return agg;
}

void check_ranges(ExperimentConfig& cfg) {
  const std::size_t k = cfg.num_clients;
  if (cfg.aggregator.kind == Aggregator::Kind::kKrum)
    require(k >= cfg.aggregator.f + 3, "aggregator.f", "krum needs clients >= f + 3");
  if (cfg.aggregator.kind == Aggregator::Kind::kTrimmedMean)
    require(k > 2 * cfg.aggregator.trim, "aggregator.trim", "trimmed_mean needs clients > 2 * trim");
}

}  // namespace

DetectorOptions DetectorSettings::options() const {
  DetectorOptions d;
  d.ocsvm.nu = nu;
  d.ocsvm.gamma = gamma;
  d.ocsvm.tolerance = tolerance;
  d.scaling = scaling;
  d.alpha = alpha;
  return d;
}

std::size_t ExperimentConfig::attacker_count() const {
  std::size_t n = 0;
  for (const auto& a : attacks) n += a.kind != AttackKind::kNone;
  return n;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  Obj o(root, "");
  ExperimentConfig cfg;
  cfg.seed = Obj::as_u64(o.at("seed"), "seed");
  if (o.has("arch")) cfg.arch = parse_arch(Obj(o.at("arch"), "arch"), cfg.arch);

  bool clients_given = o.has("clients");
  if (clients_given) cfg.num_clients = Obj::as_count(o.at("clients"), "clients");

  {
    Obj d(o.at("data"), "data");
    cfg.test_fraction = d.number("test_fraction", cfg.test_fraction);
    require(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0, "data.test_fraction", "must lie in (0, 1)");
    const bool syn = d.has("synthetic"), csv = d.has("csv");
    require(syn != csv, "data", "exactly one of data.synthetic and data.csv is required");
    if (syn) {
      Obj s(d.at("synthetic"), "data.synthetic");
      SyntheticSource src;
      src.noise_std = s.number("noise_std", src.noise_std);
      src.public_per_class = s.count("public_per_class", src.public_per_class);
      src.client_pool_per_class = s.count("client_pool_per_class", src.client_pool_per_class);
      src.test_per_class = s.count("test_per_class", src.test_per_class);
      require(src.noise_std >= 0.0, s.key_path("noise_std"), "must be non-negative");
      require(src.public_per_class >= 2, s.key_path("public_per_class"), "need at least 2 per class");
      require(src.test_per_class >= 1, s.key_path("test_per_class"), "need at least 1 per class");
      if (s.has("deficits")) {
        src.deficits.clear();
        const auto& arr = as_array(s.at("deficits"), s.key_path("deficits"));
        for (std::size_t i = 0; i < arr.size(); ++i) {
          Obj e(arr[i], index(s.key_path("deficits"), i));
          Deficit def;
          def.client = Obj::as_count(e.at("client"), e.key_path("client"));
          def.cls = Obj::as_count(e.at("class"), e.key_path("class"));
          def.fraction = Obj::as_number(e.at("fraction"), e.key_path("fraction"));
          e.finish();
          require(def.client < cfg.num_clients, e.key_path("client"), "no such client");
          require(def.cls < cfg.arch.num_classes, e.key_path("class"), "no such class");
          require(def.fraction >= 0.0 && def.fraction <= 0.9, e.key_path("fraction"), "must lie in [0, 0.9]");
          src.deficits.push_back(def);
        }
      } else {
        std::erase_if(src.deficits, [&](const Deficit& def) {
          return def.client >= cfg.num_clients || def.cls >= cfg.arch.num_classes;
        });
      }
      require(src.client_pool_per_class >= cfg.num_clients, s.key_path("client_pool_per_class"),
              "need at least one sample per class per client");
      s.finish();
      cfg.synthetic = src;
    } else {
      Obj c(d.at("csv"), "data.csv");
      CsvSource src;
      src.public_path = resolve(base_dir, Obj::as_string(c.at("public"), c.key_path("public")));
      const auto& arr = as_array(c.at("clients"), c.key_path("clients"));
      require(!arr.empty(), c.key_path("clients"), "need at least one client file");
      for (std::size_t i = 0; i < arr.size(); ++i)
        src.client_paths.push_back(resolve(base_dir, Obj::as_string(arr[i], index(c.key_path("clients"), i))));
      if (c.has("test")) src.test_path = resolve(base_dir, Obj::as_string(c.at("test"), c.key_path("test")));
      c.finish();
      if (clients_given)
        require(cfg.num_clients == src.client_paths.size(), "clients", "must equal the number of data.csv.clients");
      cfg.num_clients = src.client_paths.size();
      cfg.csv = src;
    }
    d.finish();
  }
  require(cfg.num_clients >= 1, "clients", "need at least one client");

  cfg.attacks.assign(cfg.num_clients, AttackSpec{});
  if (o.has("attacks")) {
    const auto& arr = as_array(o.at("attacks"), "attacks");
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto path = index("attacks", i);
      std::size_t client = 0;
      auto spec = parse_attack(Obj(arr[i], path), client);
      require(client < cfg.num_clients, path + ".client", "no such client");
      require(seen.insert(client).second, path + ".client", "client attacked twice");
      if (spec.kind == AttackKind::kLabelSwap) {
        require(spec.class_a < cfg.arch.num_classes, path + ".class_a", "no such class");
        require(spec.class_b < cfg.arch.num_classes, path + ".class_b", "no such class");
      }
      cfg.attacks[client] = spec;
    }
  }

  if (o.has("training")) {
    Obj t(o.at("training"), "training");
    cfg.training.epochs = t.count("epochs", cfg.training.epochs);
    cfg.training.lr = t.number("lr", cfg.training.lr);
    cfg.training.batch_size = t.count("batch_size", cfg.training.batch_size);
    t.finish();
    require(cfg.training.epochs >= 1, "training.epochs", "must be at least 1");
    require(cfg.training.lr > 0.0, "training.lr", "must be positive");
    require(cfg.training.batch_size >= 1, "training.batch_size", "must be at least 1");
  }

  if (o.has("detector")) {
    Obj d(o.at("detector"), "detector");
    auto& det = cfg.detector;
    det.enabled = d.boolean("enabled", det.enabled);
    det.alpha = d.number("alpha", det.alpha);
    det.nu = d.number("nu", det.nu);
    det.tolerance = d.number("tolerance", det.tolerance);
    if (d.has("gamma")) {
      const auto& g = d.at("gamma");
      if (g.is_string()) {
        require(g.get<std::string>() == "median", "detector.gamma", "expected \"median\" or a positive number");
        det.gamma = GammaMode::median();
      } else {
        const double v = Obj::as_number(g, "detector.gamma");
        require(v > 0.0, "detector.gamma", "must be positive");
        det.gamma = GammaMode::fixed(v);
      }
    }
    if (d.has("scaling")) {
      try {
        det.scaling = parse_scaling(Obj::as_string(d.at("scaling"), "detector.scaling"));
      } catch (const ConfigError&) {
        throw;
      } catch (const std::invalid_argument& e) {
        throw ConfigError("detector.scaling", e.what());
      }
    }
    d.finish();
    require(det.nu > 0.0 && det.nu < 1.0, "detector.nu", "must lie in (0, 1)");
    require(det.alpha >= 0.0, "detector.alpha", "must be non-negative");
    require(det.tolerance > 0.0, "detector.tolerance", "must be positive");
  }

  if (o.has("aggregator")) cfg.aggregator = parse_aggregator(o.at("aggregator"), "aggregator");
  cfg.rounds = o.count("rounds", cfg.rounds);
  require(cfg.rounds >= 1, "rounds", "must be at least 1");

  if (o.has("output")) {
    Obj out(o.at("output"), "output");
    cfg.output_prefix = out.string("prefix", cfg.output_prefix);
    cfg.write_artifacts = out.boolean("artifacts", cfg.write_artifacts);
    out.finish();
    require(!cfg.output_prefix.empty(), "output.prefix", "must not be empty");
  }
  o.finish();
  check_ranges(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  json conv = json::array();
  for (const auto& c : cfg.arch.conv_layers)
    conv.push_back({{"filters", c.filters}, {"kernel_size", c.kernel_size}, {"stride", c.stride}});
  j["arch"] = {{"input_length", cfg.arch.input_length},
               {"num_classes", cfg.arch.num_classes},
               {"conv", conv},
               {"dense", cfg.arch.dense_layers}};
  json data = {{"test_fraction", cfg.test_fraction}};
  if (cfg.synthetic) {
    const auto& s = *cfg.synthetic;
    json deficits = json::array();
    for (const auto& d : s.deficits) deficits.push_back({{"client", d.client}, {"class", d.cls}, {"fraction", d.fraction}});
    data["synthetic"] = {{"noise_std", s.noise_std},
                         {"public_per_class", s.public_per_class},
                         {"client_pool_per_class", s.client_pool_per_class},
                         {"test_per_class", s.test_per_class},
                         {"deficits", deficits}};
  } else if (cfg.csv) {
    json c = {{"public", cfg.csv->public_path.string()}, {"clients", json::array()}};
    for (const auto& p : cfg.csv->client_paths) c["clients"].push_back(p.string());
    if (cfg.csv->test_path) c["test"] = cfg.csv->test_path->string();
    data["csv"] = c;
  }
  j["data"] = data;
  j["clients"] = cfg.num_clients;
  json attacks = json::array();
  for (std::size_t k = 0; k < cfg.attacks.size(); ++k) {
    const auto& a = cfg.attacks[k];
    if (a.kind == AttackKind::kNone) continue;
    json e = {{"client", k},       {"kind", std::string(attack_name(a.kind))},
              {"fraction", a.fraction}, {"class_a", a.class_a},
              {"class_b", a.class_b},   {"constant", a.constant},
              {"sign_scale", a.sign_scale}, {"seed", a.seed}};
    if (a.noise_std) e["noise_std"] = *a.noise_std;
    attacks.push_back(e);
  }
  j["attacks"] = attacks;
  j["training"] = {{"epochs", cfg.training.epochs}, {"lr", cfg.training.lr}, {"batch_size", cfg.training.batch_size}};
  const auto& det = cfg.detector;
  j["detector"] = {{"enabled", det.enabled},
                   {"alpha", det.alpha},
                   {"nu", det.nu},
                   {"scaling", scaling_name(det.scaling)},
                   {"tolerance", det.tolerance}};
  if (det.gamma.kind == GammaMode::Kind::kFixed)
    j["detector"]["gamma"] = det.gamma.value;
  else
    j["detector"]["gamma"] = "median";
  json agg = {{"kind", cfg.aggregator.name()}};
  if (cfg.aggregator.kind == Aggregator::Kind::kKrum) agg["f"] = cfg.aggregator.f;
  if (cfg.aggregator.kind == Aggregator::Kind::kTrimmedMean) agg["trim"] = cfg.aggregator.trim;
  j["aggregator"] = agg;
  j["rounds"] = cfg.rounds;
  j["output"] = {{"prefix", cfg.output_prefix}, {"artifacts", cfg.write_artifacts}};
  return j.dump(2);
}

}  // namespace fedaudit
