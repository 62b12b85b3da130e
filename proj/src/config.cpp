#include "mcu/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "mcu/checkpoint.hpp"
#include "mcu/error.hpp"

namespace mcu {

Setting parse_setting(const std::string& name) {
  for (Setting s : kAllSettings) {
    if (to_string(s) == name) return s;
  }
  throw ConfigError("unknown setting '" + name +
                    "' (expected rand, rand_cl, rand_so, cl_non_cl, fo_so, met, met_cl, met_so, "
                    "met_cl_non_cl or met_fo_so)");
}

std::string to_string(Setting s) {
  switch (s) {
    case Setting::rand: return "rand";
    case Setting::rand_cl: return "rand_cl";
    case Setting::rand_so: return "rand_so";
    case Setting::cl_non_cl: return "cl_non_cl";
    case Setting::fo_so: return "fo_so";
    case Setting::met: return "met";
    case Setting::met_cl: return "met_cl";
    case Setting::met_so: return "met_so";
    case Setting::met_cl_non_cl: return "met_cl_non_cl";
    case Setting::met_fo_so: return "met_fo_so";
  }
  return "?";
}

bool is_method_setting(Setting s) {
  switch (s) {
    case Setting::met:
    case Setting::met_cl:
    case Setting::met_so:
    case Setting::met_cl_non_cl:
    case Setting::met_fo_so: return true;
    default: return false;
  }
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError(key + ": cannot parse '" + v + "' as a number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

// Builders for common field kinds, addressing members through accessor lambdas.
template <typename Access>
Field dbl(std::string key, Access access) {
  return {key, [access](const ExperimentConfig& c) { return format_double(access(c)); },
          [access, key](ExperimentConfig& c, const std::string& v) { access(c) = parse_number<double>(key, v); }};
}

template <typename T, typename Access>
Field integer(std::string key, Access access) {
  return {key, [access](const ExperimentConfig& c) { return std::to_string(access(c)); },
          [access, key](ExperimentConfig& c, const std::string& v) { access(c) = parse_number<T>(key, v); }};
}

template <typename Access>
Field boolean(std::string key, Access access) {
  return {key, [access](const ExperimentConfig& c) { return std::string(access(c) ? "true" : "false"); },
          [access, key](ExperimentConfig& c, const std::string& v) { access(c) = parse_bool(key, v); }};
}

template <typename Access>
Field text(std::string key, Access access) {
  return {key, [access](const ExperimentConfig& c) { return access(c); },
          [access](ExperimentConfig& c, const std::string& v) { access(c) = v; }};
}

template <typename Access>
Field optimizer_kind(std::string key, Access access) {
  return {key, [access](const ExperimentConfig& c) { return to_string(access(c)); },
          [access](ExperimentConfig& c, const std::string& v) { access(c) = parse_optimizer_kind(v); }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"experiment.setting", [](const C& c) { return to_string(c.setting); },
                 [](C& c, const std::string& v) { c.setting = parse_setting(v); }});
    f.push_back({"experiment.methods",
                 [](const C& c) {
                   std::vector<std::string> s;
                   for (auto m : c.methods) s.push_back(to_string(m));
                   return join(s);
                 },
                 [](C& c, const std::string& v) {
                   c.methods.clear();
                   for (const auto& m : split_list(v)) c.methods.push_back(parse_method(m));
                 }});
    f.push_back({"experiment.seeds",
                 [](const C& c) {
                   return std::to_string(c.seeds.first) + "," + std::to_string(c.seeds.second);
                 },
                 [](C& c, const std::string& v) {
                   auto items = split_list(v);
                   if (items.size() != 2) throw ConfigError("experiment.seeds: expected two seeds");
                   c.seeds = {parse_number<std::uint64_t>("experiment.seeds", items[0]),
                              parse_number<std::uint64_t>("experiment.seeds", items[1])};
                 }});
    f.push_back({"experiment.curves",
                 [](const C& c) {
                   std::vector<std::string> s;
                   for (auto k : c.curves) s.push_back(to_string(k));
                   return join(s);
                 },
                 [](C& c, const std::string& v) {
                   c.curves.clear();
                   for (const auto& k : split_list(v)) c.curves.push_back(parse_curve_kind(k));
                 }});
    f.push_back(integer<int>("experiment.n_points", [](auto& c) -> auto& { return c.n_points; }));
    f.push_back(dbl("experiment.tau", [](auto& c) -> auto& { return c.tau; }));
    f.push_back(dbl("experiment.forget_quality_threshold",
                    [](auto& c) -> auto& { return c.forget_quality_threshold; }));
    f.push_back(integer<int>("experiment.replicates", [](auto& c) -> auto& { return c.replicates; }));
    f.push_back({"experiment.zrf_reference", [](const C& c) { return to_string(c.zrf_reference); },
                 [](C& c, const std::string& v) { c.zrf_reference = parse_zrf_reference(v); }});
    f.push_back({"experiment.forget_statistic",
                 [](const C& c) { return to_string(c.forget_statistic); },
                 [](C& c, const std::string& v) { c.forget_statistic = parse_forget_statistic(v); }});

    f.push_back(text("data.kind", [](auto& c) -> auto& { return c.data.kind; }));
    f.push_back(integer<std::size_t>("data.n", [](auto& c) -> auto& { return c.data.n; }));
    f.push_back(dbl("data.noise", [](auto& c) -> auto& { return c.data.noise; }));
    f.push_back(integer<std::size_t>("data.classes", [](auto& c) -> auto& { return c.data.classes; }));
    f.push_back(dbl("data.spread", [](auto& c) -> auto& { return c.data.spread; }));
    f.push_back(text("data.images", [](auto& c) -> auto& { return c.data.images; }));
    f.push_back(text("data.labels", [](auto& c) -> auto& { return c.data.labels; }));
    f.push_back(integer<std::size_t>("data.limit", [](auto& c) -> auto& { return c.data.limit; }));
    f.push_back(dbl("data.forget_fraction", [](auto& c) -> auto& { return c.data.forget_fraction; }));
    f.push_back(dbl("data.test_fraction", [](auto& c) -> auto& { return c.data.test_fraction; }));
    f.push_back(integer<std::uint64_t>("data.seed", [](auto& c) -> auto& { return c.data.seed; }));

    f.push_back({"model.hidden",
                 [](const C& c) {
                   std::vector<std::string> s;
                   for (auto h : c.hidden) s.push_back(std::to_string(h));
                   return join(s);
                 },
                 [](C& c, const std::string& v) {
                   c.hidden.clear();
                   for (const auto& h : split_list(v)) {
                     c.hidden.push_back(parse_number<std::size_t>("model.hidden", h));
                   }
                 }});
    f.push_back({"model.activation", [](const C& c) { return to_string(c.activation); },
                 [](C& c, const std::string& v) { c.activation = parse_activation(v); }});

    for (const std::string stage : {"base", "retrain"}) {
      auto pick = [stage](auto& c) -> auto& { return stage == "base" ? c.base : c.retrain; };
      f.push_back(integer<int>(stage + ".epochs", [pick](auto& c) -> auto& { return pick(c).schedule.epochs; }));
      f.push_back(integer<std::size_t>(stage + ".batch_size",
                                       [pick](auto& c) -> auto& { return pick(c).schedule.batch_size; }));
      f.push_back(optimizer_kind(stage + ".optimizer",
                                 [pick](auto& c) -> auto& { return pick(c).schedule.optimizer.kind; }));
      f.push_back(dbl(stage + ".lr", [pick](auto& c) -> auto& { return pick(c).schedule.optimizer.lr; }));
      f.push_back(dbl(stage + ".accuracy_floor", [pick](auto& c) -> auto& { return pick(c).accuracy_floor; }));
      f.push_back(integer<std::uint64_t>(stage + ".seed", [pick](auto& c) -> auto& { return pick(c).seed; }));
    }

    f.push_back(integer<int>("unlearn.epochs", [](auto& c) -> auto& { return c.unlearn.epochs; }));
    f.push_back(integer<std::size_t>("unlearn.batch_size", [](auto& c) -> auto& { return c.unlearn.batch_size; }));
    f.push_back(optimizer_kind("unlearn.optimizer", [](auto& c) -> auto& { return c.unlearn.optimizer.kind; }));
    f.push_back(dbl("unlearn.lr", [](auto& c) -> auto& { return c.unlearn.optimizer.lr; }));
    f.push_back({"unlearn.curriculum", [](const C& c) { return to_string(c.curriculum); },
                 [](C& c, const std::string& v) { c.curriculum = parse_curriculum(v); }});
    f.push_back(dbl("unlearn.salun_fraction", [](auto& c) -> auto& { return c.unlearn.salun_fraction; }));
    f.push_back(dbl("unlearn.bt_weight", [](auto& c) -> auto& { return c.unlearn.bt_weight; }));
    f.push_back(boolean("unlearn.bt_maximize", [](auto& c) -> auto& { return c.unlearn.bt_maximize; }));
    f.push_back(dbl("unlearn.npo_beta", [](auto& c) -> auto& { return c.unlearn.npo_beta; }));
    f.push_back(boolean("unlearn.npo_retain_term", [](auto& c) -> auto& { return c.unlearn.npo_retain_term; }));
    f.push_back(dbl("unlearn.rl_retain_fraction", [](auto& c) -> auto& { return c.unlearn.rl_retain_fraction; }));
    f.push_back(dbl("unlearn.gd_forget_weight", [](auto& c) -> auto& { return c.unlearn.gd_forget_weight; }));
    f.push_back(dbl("unlearn.divergence_factor", [](auto& c) -> auto& { return c.unlearn.divergence_factor; }));

    f.push_back(dbl("so.lr", [](auto& c) -> auto& { return c.second_order.lr; }));
    f.push_back(dbl("so.beta1", [](auto& c) -> auto& { return c.second_order.beta1; }));
    f.push_back(dbl("so.curvature_ema", [](auto& c) -> auto& { return c.second_order.curvature_ema; }));
    f.push_back(dbl("so.gamma", [](auto& c) -> auto& { return c.second_order.gamma; }));
    f.push_back(dbl("so.damping", [](auto& c) -> auto& { return c.second_order.damping; }));
    f.push_back(integer<int>("so.curvature_interval", [](auto& c) -> auto& { return c.second_order.curvature_interval; }));
    f.push_back(integer<int>("so.hessian_probes", [](auto& c) -> auto& { return c.second_order.hessian_probes; }));

    f.push_back(integer<int>("curve.steps", [](auto& c) -> auto& { return c.curve.steps; }));
    f.push_back({"curve.optimizer",
                 [](const C& c) {
                   return c.curve.inherit_optimizer ? std::string("inherit") : to_string(c.curve.optimizer.kind);
                 },
                 [](C& c, const std::string& v) {
                   c.curve.inherit_optimizer = v == "inherit";
                   if (!c.curve.inherit_optimizer) c.curve.optimizer.kind = parse_optimizer_kind(v);
                 }});
    f.push_back(dbl("curve.lr", [](auto& c) -> auto& { return c.curve.optimizer.lr; }));
    f.push_back(boolean("curve.arclength", [](auto& c) -> auto& { return c.curve.arclength; }));
    f.push_back(integer<std::uint64_t>("curve.seed", [](auto& c) -> auto& { return c.curve.seed; }));
    return f;
  }();
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  const bool met = is_method_setting(setting);
  if (met) {
    if (methods.size() != 2 || methods[0] == methods[1]) {
      throw ConfigError("experiment.methods: setting " + to_string(setting) +
                        " needs two distinct methods");
    }
  } else {
    if (methods.size() != 1) {
      throw ConfigError("experiment.methods: setting " + to_string(setting) + " needs one method");
    }
    if (seeds.first == seeds.second) {
      throw ConfigError("experiment.seeds: setting " + to_string(setting) +
                        " needs two distinct seeds");
    }
  }
  if (curves.empty()) throw ConfigError("experiment.curves: at least one curve kind required");
  if (std::set<CurveKind>(curves.begin(), curves.end()).size() != curves.size()) {
    throw ConfigError("experiment.curves: duplicate curve kind");
  }
  if (n_points < 2) throw ConfigError("experiment.n_points must be >= 2");
  if (!(tau >= 0.0)) throw ConfigError("experiment.tau must be >= 0");
  if (!(forget_quality_threshold > 0.0 && forget_quality_threshold < 1.0)) {
    throw ConfigError("experiment.forget_quality_threshold must lie in (0, 1)");
  }
  if (replicates < 1) throw ConfigError("experiment.replicates must be >= 1");
  if (data.kind != "moons" && data.kind != "blobs" && data.kind != "idx") {
    throw ConfigError("data.kind: expected moons, blobs or idx, got '" + data.kind + "'");
  }
  if (data.kind == "idx" && (data.images.empty() || data.labels.empty())) {
    throw ConfigError("data.images and data.labels are required for data.kind = idx");
  }
  if (data.kind != "idx" && data.n < 4) throw ConfigError("data.n must be >= 4");
  if (data.kind == "blobs" && data.classes < 2) throw ConfigError("data.classes must be >= 2");
  if (!(data.forget_fraction > 0.0 && data.forget_fraction < 1.0)) {
    throw ConfigError("data.forget_fraction must lie in (0, 1)");
  }
  if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0)) {
    throw ConfigError("data.test_fraction must lie in (0, 1)");
  }
  for (auto h : hidden) {
    if (h < 1) throw ConfigError("model.hidden sizes must be >= 1");
  }
  for (const auto* b : {&base, &retrain}) {
    if (b->schedule.epochs < 0) throw ConfigError("training epochs must be >= 0");
    if (b->schedule.batch_size < 1) throw ConfigError("training batch_size must be >= 1");
    if (!(b->accuracy_floor >= 0.0 && b->accuracy_floor <= 1.0)) {
      throw ConfigError("accuracy_floor must lie in [0, 1]");
    }
    b->schedule.optimizer.validate();
  }
  unlearn.validate();
  second_order.validate();
  if (second_order.kind != OptimizerKind::so_diag) {
    throw ConfigError("so: second-order optimizer must be so_diag");
  }
  if (curve.steps < 0) throw ConfigError("curve.steps must be >= 0");
  if (!curve.inherit_optimizer) curve.optimizer.validate();
}

std::pair<EndpointPlan, EndpointPlan> endpoint_plans(const ExperimentConfig& cfg) {
  cfg.validate();
  EndpointPlan a, b;
  a.method = cfg.methods.front();
  b.method = cfg.methods.back();
  a.seed = cfg.seeds.first;
  b.seed = cfg.seeds.second;
  switch (cfg.setting) {
    case Setting::rand:
    case Setting::met: break;
    case Setting::rand_cl:
    case Setting::met_cl: a.curriculum = b.curriculum = true; break;
    case Setting::rand_so:
    case Setting::met_so: a.second_order = b.second_order = true; break;
    case Setting::cl_non_cl:
    case Setting::met_cl_non_cl: a.curriculum = true; break;
    case Setting::fo_so:
    case Setting::met_fo_so: b.second_order = true; break;
  }
  return {a, b};
}

UnlearnConfig endpoint_config(const ExperimentConfig& cfg, const EndpointPlan& plan) {
  UnlearnConfig u = cfg.unlearn;
  u.method = plan.method;
  u.seed = plan.seed;
  u.curriculum = plan.curriculum ? std::optional(cfg.curriculum) : std::nullopt;
  if (plan.second_order) u.optimizer = cfg.second_order;
  return u;
}

MlpArch experiment_arch(const ExperimentConfig& cfg, std::size_t input_dim, std::size_t classes) {
  MlpArch arch;
  arch.activation = cfg.activation;
  arch.layer_dims.push_back(input_dim);
  arch.layer_dims.insert(arch.layer_dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  arch.layer_dims.push_back(classes);
  arch.validate();
  return arch;
}

KeyValues parse_key_values(const std::string& text, const std::string& source) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + "empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (kv.count(full)) throw ConfigError(where + "duplicate key '" + full + "'");
    kv[full] = trim(line.substr(eq + 1));
  }
  return kv;
}

ExperimentConfig config_from_key_values(const KeyValues& kv, ExperimentConfig base) {
  for (const auto& [key, value] : kv) {
    const Field* match = nullptr;
    for (const auto& f : fields()) {
      if (f.key == key) match = &f;
    }
    if (!match) throw ConfigError("unknown config key '" + key + "'");
    match->set(base, value);
  }
  base.validate();
  return base;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  return config_from_key_values(parse_key_values(text, source));
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

std::string to_text(const ExperimentConfig& cfg) {
  std::string out, section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string sec = f.key.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "" : "\n") + std::string("[") + sec + "]\n";
      section = sec;
    }
    out += f.key.substr(dot + 1) + " = " + f.get(cfg) + "\n";
  }
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string t = to_text(cfg);
  return hash_hex(fnv1a64({reinterpret_cast<const std::uint8_t*>(t.data()), t.size()}));
}

}  // namespace mcu
