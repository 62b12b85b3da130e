#include "mcu/experiment.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>

#include "json.hpp"
#include "mcu/checkpoint.hpp"
#include "mcu/curves.hpp"
#include "mcu/error.hpp"
#include "mcu/eval.hpp"

namespace fs = std::filesystem;

namespace mcu {

using json = nlohmann::ordered_json;

PreparedData prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  Dataset ds;
  if (cfg.data.kind == "moons") {
    ds = make_moons(cfg.data.n, cfg.data.noise, cfg.data.seed);
  } else if (cfg.data.kind == "blobs") {
    ds = make_blobs(cfg.data.n, cfg.data.classes, cfg.data.spread, cfg.data.seed);
  } else {
    ds = load_idx(cfg.data.images, cfg.data.labels, cfg.data.limit).data;
  }
  PreparedData out;
  out.split = split_forget_retain(ds, cfg.data.forget_fraction, cfg.data.test_fraction,
                                  derive_seed(cfg.data.seed, 1));
  out.arch = experiment_arch(cfg, out.split.data.dim(), out.split.data.num_classes);
  return out;
}

TrainOutcome train_base(const MlpArch& arch, const SplitDataset& ds, const BaseConfig& base) {
  const auto idx = ds.train_idx();
  TrainOutcome out = train_supervised(arch, ds, idx, base.schedule, base.seed);
  const double acc = subset_accuracy(arch, out.params, ds, idx);
  if (acc < base.accuracy_floor) {
    throw TrainingError("base model reached train accuracy " + format_double(acc) +
                            " below the floor " + format_double(base.accuracy_floor) + " after " +
                            std::to_string(base.schedule.epochs) + " epochs",
                        out.accuracy_curve);
  }
  return out;
}

ParamVector train_retrain(const MlpArch& arch, const SplitDataset& ds, const BaseConfig& retrain) {
  TrainOutcome out = train_supervised(arch, ds, ds.retain_idx, retrain.schedule, retrain.seed);
  const double acc = subset_accuracy(arch, out.params, ds, ds.retain_idx);
  if (acc < retrain.accuracy_floor) {
    throw TrainingError("retrained model reached retain accuracy " + format_double(acc) +
                            " below the floor " + format_double(retrain.accuracy_floor),
                        out.accuracy_curve);
  }
  return out.params;
}

std::string retrain_cache_key(const ExperimentConfig& cfg) {
  std::string text;
  for (const auto& [k, v] : parse_key_values(to_text(cfg))) {
    if (k.rfind("data.", 0) == 0 || k.rfind("model.", 0) == 0 || k.rfind("retrain.", 0) == 0) {
      text += k + "=" + v + "\n";
    }
  }
  return hash_hex(fnv1a64({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()}));
}

ParamVector make_dumb_model(const MlpArch& arch, const ExperimentConfig& cfg) {
  return init_mlp(arch, dumb_model_seed(cfg.base.seed)).params;
}

// ---------------------------------------------------------------------------
// Manifest

std::string render_manifest(const RunManifest& m) {
  json j;
  j["config_hash"] = m.config_hash;
  j["artifact_version"] = m.artifact_version;
  json ck = json::object();
  for (const auto& [name, e] : m.checkpoints) ck[name] = {{"path", e.path}, {"hash", e.hash}};
  j["checkpoints"] = ck;
  j["base_checkpoint"] = m.base_checkpoint;
  j["endpoint_checkpoints"] = m.endpoint_checkpoints;
  j["curve_checkpoints"] = m.curve_checkpoints;
  j["metric_tables"] = m.metric_tables;
  j["barrier_reports"] = m.barrier_reports;
  j["plots"] = m.plots;
  j["completed_stages"] = m.completed_stages;
  j["resumed_stages"] = m.resumed_stages;
  j["failed_stage"] = m.failed_stage;
  j["error"] = m.error;
  j["complete"] = m.complete;
  j["wall_clock_seconds"] = m.wall_clock_seconds;
  return j.dump(2) + "\n";
}

RunManifest parse_manifest(const std::string& text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    m.config_hash = j.at("config_hash").get<std::string>();
    m.artifact_version = j.at("artifact_version").get<std::string>();
    for (const auto& [name, e] : j.at("checkpoints").items()) {
      m.checkpoints[name] = {e.at("path").get<std::string>(), e.at("hash").get<std::string>()};
    }
    m.base_checkpoint = j.at("base_checkpoint").get<std::string>();
    m.endpoint_checkpoints = j.at("endpoint_checkpoints").get<std::vector<std::string>>();
    m.curve_checkpoints = j.at("curve_checkpoints").get<std::vector<std::string>>();
    m.metric_tables = j.at("metric_tables").get<std::vector<std::string>>();
    m.barrier_reports = j.at("barrier_reports").get<std::vector<std::string>>();
    m.plots = j.at("plots").get<std::vector<std::string>>();
    m.completed_stages = j.at("completed_stages").get<std::vector<std::string>>();
    m.resumed_stages = j.at("resumed_stages").get<std::vector<std::string>>();
    m.failed_stage = j.at("failed_stage").get<std::string>();
    m.error = j.at("error").get<std::string>();
    m.complete = j.at("complete").get<bool>();
    m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

RunManifest load_manifest(const std::string& run_dir) {
  return parse_manifest(read_text_file((fs::path(run_dir) / "manifest.json").string()));
}

namespace {

std::string resolve(const std::string& run_dir, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() ? path : (fs::path(run_dir) / p).string();
}

}  // namespace

void verify_manifest(const RunManifest& m, const std::string& run_dir) {
  for (const auto& [name, e] : m.checkpoints) {
    const std::string path = resolve(run_dir, e.path);
    if (!fs::exists(path)) throw IoError("checkpoint '" + name + "' missing at " + path);
    const std::string actual = hash_hex(checkpoint_hash(path));
    if (actual != e.hash) {
      throw HashMismatchError("checkpoint '" + name + "' at " + path + " has hash " + actual +
                              ", manifest records " + e.hash);
    }
  }
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

/// Completed stages and their metadata, keyed to one config hash.
class StageState {
 public:
  StageState(std::string path, std::string config_hash, bool resume)
      : path_(std::move(path)), hash_(std::move(config_hash)) {
    if (resume && fs::exists(path_)) {
      try {
        json j = json::parse(read_text_file(path_));
        if (j.at("config_hash").get<std::string>() == hash_) stages_ = j.at("stages");
      } catch (const std::exception&) {
        stages_ = json::object();
      }
    }
  }

  const json* done(const std::string& name) const {
    auto it = stages_.find(name);
    return it == stages_.end() ? nullptr : &*it;
  }

  void mark(const std::string& name, json meta) {
    stages_[name] = std::move(meta);
    json j;
    j["config_hash"] = hash_;
    j["stages"] = stages_;
    write_text_file(path_, j.dump(2) + "\n");
  }

 private:
  std::string path_;
  std::string hash_;
  json stages_ = json::object();
};

struct EndpointRun {
  ParamVector params;
  bool diverged = false;
  std::size_t steps = 0;
};

struct CurveRun {
  CurveSpec spec;
  double head = 0.0;
  double tail = 0.0;
};

struct ReplicateRun {
  std::pair<std::uint64_t, std::uint64_t> seeds;
  std::array<EndpointPlan, 2> plans;
  std::array<EndpointRun, 2> endpoints;
  std::vector<CurveRun> curves;
};

std::pair<double, double> head_tail(const std::vector<double>& history) {
  if (history.empty()) return {0.0, 0.0};
  const std::size_t w = std::min<std::size_t>(100, history.size());
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < w; ++i) {
    head += history[i];
    tail += history[history.size() - w + i];
  }
  return {head / w, tail / w};
}

std::string stage_prefix(int replicate) {
  return replicate == 0 ? "" : "rep" + std::to_string(replicate) + ".";
}

std::string ckpt_dir(int replicate) {
  return replicate == 0 ? "ckpt/" : "ckpt/rep" + std::to_string(replicate) + "/";
}

std::pair<std::uint64_t, std::uint64_t> replicate_seeds(const ExperimentConfig& cfg, int r) {
  if (r == 0) return cfg.seeds;
  return {derive_seed(cfg.seeds.first, 100 + r), derive_seed(cfg.seeds.second, 100 + r)};
}

CurveTrainOptions curve_options(const ExperimentConfig& cfg, const UnlearnConfig& row,
                                int replicate) {
  CurveTrainOptions o;
  o.steps = cfg.curve.steps;
  o.optimizer = cfg.curve.inherit_optimizer ? row.optimizer : cfg.curve.optimizer;
  o.seed = derive_seed(cfg.curve.seed, static_cast<std::uint64_t>(replicate));
  o.arclength_weighting = cfg.curve.arclength;
  return o;
}

CurveOutcome evaluate_curve_outcome(const EvalContext& ctx, const ExperimentConfig& cfg,
                                    const CurveRun& run,
                                    const std::pair<MetricRecord, MetricRecord>& ends,
                                    int workers) {
  CurveOutcome out;
  out.kind = run.spec.kind;
  out.records = evaluate_curve(ctx, run.spec, cfg.n_points, workers);
  out.barrier = barrier_profile(out.records, ends, cfg.tau);
  out.mc_barrier = mc_barrier_standard(out.records, ends, cfg.tau);
  out.objective_head = run.head;
  out.objective_tail = run.tail;
  return out;
}

/// Metrics and barrier reports for every replicate from in-memory parameters.
RunResult assemble(const ExperimentConfig& cfg, const PreparedData& data, const ParamVector& base,
                   const ParamVector& dumb, const ParamVector& retrained,
                   const std::vector<ReplicateRun>& reps, int workers) {
  const auto& ds = data.split;
  const ParamVector& reference = cfg.zrf_reference == ZrfReference::random ? dumb : base;
  const EvalContext ctx = EvalContext::make(data.arch, ds, reference, retrained, cfg.forget_statistic);

  RunResult r;
  r.config = cfg;
  r.original = evaluate_point(ctx, base, 0.0);
  r.retrained = evaluate_point(ctx, retrained, 0.0);
  for (std::size_t k = 0; k < reps.size(); ++k) {
    const auto& rep = reps[k];
    const std::pair<MetricRecord, MetricRecord> ends{
        evaluate_point(ctx, rep.endpoints[0].params, 0.0),
        evaluate_point(ctx, rep.endpoints[1].params, 1.0)};
    std::vector<CurveOutcome> curves;
    for (const auto& c : rep.curves) curves.push_back(evaluate_curve_outcome(ctx, cfg, c, ends, workers));
    if (k == 0) {
      for (int e = 0; e < 2; ++e) {
        r.endpoints[e] = {rep.plans[e], e == 0 ? ends.first : ends.second,
                          rep.endpoints[e].diverged, rep.endpoints[e].steps};
      }
      r.curves = std::move(curves);
    } else {
      r.extra_replicates.push_back({static_cast<int>(k), rep.seeds, std::move(curves)});
    }
  }
  return r;
}

}  // namespace

void write_reports(const RunResult& result, const std::string& out_dir, bool plots,
                   RunManifest* manifest) {
  const fs::path dir(out_dir);
  write_text_file((dir / "metrics.csv").string(), render_csv(result));
  write_text_file((dir / "report.json").string(), render_json(result));
  if (manifest) {
    manifest->metric_tables = {"metrics.csv"};
    manifest->barrier_reports = {"report.json"};
    manifest->plots.clear();
  }
  if (!plots) return;
  for (const std::string metric : {"loss_retain", "loss_forget"}) {
    const std::string name = "plot_" + metric + ".svg";
    write_text_file((dir / name).string(), render_svg(result, metric));
    if (manifest) manifest->plots.push_back(name);
  }
}

RunManifest run_setting(const ExperimentConfig& cfg, const RunOptions& options, RunResult* result) {
  const auto start = std::chrono::steady_clock::now();
  if (options.out_dir.empty()) throw ConfigError("run_setting needs an output directory");
  cfg.validate();
  const fs::path out(options.out_dir);
  const std::string cache_dir =
      options.cache_dir.empty() ? (out / "cache").string() : options.cache_dir;

  RunManifest m;
  m.config_hash = config_hash(cfg);
  m.artifact_version = kArtifactVersion;
  std::string current = "config";

  auto finish = [&] {
    m.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_text_file((out / "manifest.json").string(), render_manifest(m));
  };

  try {
    fs::create_directories(out);
    StageState state((out / "state.json").string(), m.config_hash, options.resume);
    write_text_file((out / "config.cfg").string(), to_text(cfg));
    m.completed_stages.push_back(current);

    // Loads a finished stage's checkpoint or produces and persists it.
    auto checkpoint_stage = [&](const std::string& name, const std::string& path,
                                const std::function<std::pair<ParamVector, json>()>& produce)
        -> std::pair<ParamVector, json> {
      current = name;
      std::pair<ParamVector, json> got;
      bool resumed = false;
      if (const json* meta = state.done(name); meta && fs::exists(path)) {
        try {
          got = {load_checkpoint(path), *meta};
          resumed = true;
        } catch (const Error&) {
          resumed = false;
        }
      }
      if (!resumed) {
        got = produce();
        save_checkpoint(got.first, path);
        state.mark(name, got.second);
      } else {
        m.resumed_stages.push_back(name);
      }
      const fs::path p(path);
      const std::string rel = p.is_absolute() && p.string().rfind(out.string(), 0) != 0
                                  ? path
                                  : fs::relative(p, out).string();
      m.checkpoints[name] = {rel, hash_hex(payload_hash(got.first))};
      m.completed_stages.push_back(name);
      return got;
    };

    current = "data";
    const PreparedData data = prepare_data(cfg);
    const auto& ds = data.split;
    m.completed_stages.push_back(current);

    const ParamVector base =
        checkpoint_stage("base", (out / "ckpt/base.ckpt").string(), [&] {
          auto t = train_base(data.arch, ds, cfg.base);
          return std::pair{t.params, json{{"final_accuracy", t.accuracy_curve.empty() ? 0.0 : t.accuracy_curve.back()}}};
        }).first;
    m.base_checkpoint = "base";
    const MlpModel original{data.arch, base};

    const ParamVector dumb = checkpoint_stage("dumb", (out / "ckpt/dumb.ckpt").string(), [&] {
      return std::pair{make_dumb_model(data.arch, cfg), json::object()};
    }).first;

    const std::string retrain_path =
        (fs::path(cache_dir) / ("retrain-" + retrain_cache_key(cfg) + ".ckpt")).string();
    ParamVector retrained;
    current = "retrain";
    if (fs::exists(retrain_path)) {
      try {
        retrained = load_checkpoint(retrain_path);
      } catch (const Error&) {
        retrained = {};
      }
    }
    if (retrained.size() == data.arch.param_count()) {
      m.resumed_stages.push_back("retrain");
    } else {
      retrained = train_retrain(data.arch, ds, cfg.retrain);
      save_checkpoint(retrained, retrain_path);
    }
    {
      const fs::path p(retrain_path);
      const auto rel = fs::relative(p, out).string();
      m.checkpoints["retrain"] = {rel.rfind("..", 0) == 0 ? fs::absolute(p).string() : rel,
                                  hash_hex(payload_hash(retrained))};
    }
    m.completed_stages.push_back("retrain");

    std::vector<ReplicateRun> reps;
    for (int r = 0; r < cfg.replicates; ++r) {
      ExperimentConfig rc = cfg;
      rc.seeds = replicate_seeds(cfg, r);
      const auto plans = endpoint_plans(rc);
      ReplicateRun rep;
      rep.seeds = rc.seeds;
      rep.plans = {plans.first, plans.second};
      const std::string sp = stage_prefix(r), cd = ckpt_dir(r);

      for (int e = 0; e < 2; ++e) {
        const std::string name = sp + "endpoint" + std::to_string(e + 1);
        const UnlearnConfig ucfg = endpoint_config(cfg, rep.plans[e]);
        auto [params, meta] = checkpoint_stage(
            name, (out / (cd + "endpoint" + std::to_string(e + 1) + ".ckpt")).string(), [&] {
              UnlearnResult u = unlearn(original, ds, ucfg, nullptr, &dumb);
              return std::pair{u.params, json{{"diverged", u.diverged}, {"steps", u.steps}}};
            });
        rep.endpoints[e] = {params, meta.value("diverged", false), meta.value("steps", std::size_t{0})};
        if (r == 0) m.endpoint_checkpoints.push_back(name);
      }

      const UnlearnConfig row = endpoint_config(cfg, rep.plans[0]);
      for (CurveKind kind : cfg.curves) {
        if (kind == CurveKind::linear) {
          current = sp + "curve_linear";
          rep.curves.push_back({make_linear(rep.endpoints[0].params, rep.endpoints[1].params)});
          m.completed_stages.push_back(current);
          continue;
        }
        CurveSpec spec = make_bezier(rep.endpoints[0].params, rep.endpoints[1].params);
        const std::string name = sp + "curve_bezier";
        auto [mid, meta] = checkpoint_stage(name, (out / (cd + "bezier_midpoint.ckpt")).string(), [&] {
          const UnlearnObjective objective(data.arch, base, ds, row, &dumb);
          auto trained = train_midpoint(spec, objective, curve_options(cfg, row, r));
          const auto [head, tail] = head_tail(trained.objective_history);
          return std::pair{*trained.spec.theta12, json{{"objective_head", head}, {"objective_tail", tail}}};
        });
        spec.theta12 = mid;
        spec.trained = true;
        rep.curves.push_back({spec, meta.value("objective_head", 0.0), meta.value("objective_tail", 0.0)});
        if (r == 0) m.curve_checkpoints.push_back(name);
      }
      reps.push_back(std::move(rep));
    }

    current = "evaluate";
    RunResult res = assemble(cfg, data, base, dumb, retrained, reps, options.workers);
    for (const auto& [name, e] : m.checkpoints) res.checkpoint_hashes[name] = e.hash;
    m.completed_stages.push_back(current);

    current = "report";
    write_reports(res, out.string(), options.plots, &m);
    m.completed_stages.push_back(current);
    m.complete = true;
    if (result) *result = std::move(res);
  } catch (const std::exception& e) {
    m.failed_stage = current;
    m.error = e.what();
    m.complete = false;
    try {
      finish();
    } catch (const std::exception&) {
      // The original failure is the one worth reporting.
    }
    throw;
  }
  finish();
  return m;
}

RunResult reevaluate(const std::string& run_dir, int workers) {
  const ExperimentConfig cfg =
      load_config((fs::path(run_dir) / "config.cfg").string());
  const RunManifest m = load_manifest(run_dir);
  if (m.config_hash != config_hash(cfg)) {
    throw FormatError("manifest config hash " + m.config_hash + " does not match config.cfg");
  }
  verify_manifest(m, run_dir);
  const PreparedData data = prepare_data(cfg);
  auto load = [&](const std::string& name) {
    auto it = m.checkpoints.find(name);
    if (it == m.checkpoints.end()) throw FormatError("manifest lacks checkpoint '" + name + "'");
    return load_checkpoint(resolve(run_dir, it->second.path));
  };
  json state = json::object();
  if (fs::exists(fs::path(run_dir) / "state.json")) {
    state = json::parse(read_text_file((fs::path(run_dir) / "state.json").string())).value("stages", json::object());
  }
  auto meta = [&](const std::string& name) { return state.value(name, json::object()); };

  const ParamVector base = load("base"), dumb = load("dumb"), retrained = load("retrain");
  std::vector<ReplicateRun> reps;
  for (int r = 0; r < cfg.replicates; ++r) {
    ExperimentConfig rc = cfg;
    rc.seeds = replicate_seeds(cfg, r);
    const auto plans = endpoint_plans(rc);
    ReplicateRun rep;
    rep.seeds = rc.seeds;
    rep.plans = {plans.first, plans.second};
    const std::string sp = stage_prefix(r);
    for (int e = 0; e < 2; ++e) {
      const std::string name = sp + "endpoint" + std::to_string(e + 1);
      const json mj = meta(name);
      rep.endpoints[e] = {load(name), mj.value("diverged", false), mj.value("steps", std::size_t{0})};
    }
    for (CurveKind kind : cfg.curves) {
      if (kind == CurveKind::linear) {
        rep.curves.push_back({make_linear(rep.endpoints[0].params, rep.endpoints[1].params)});
        continue;
      }
      CurveSpec spec = make_bezier(rep.endpoints[0].params, rep.endpoints[1].params);
      spec.theta12 = load(sp + "curve_bezier");
      spec.trained = true;
      const json mj = meta(sp + "curve_bezier");
      rep.curves.push_back({spec, mj.value("objective_head", 0.0), mj.value("objective_tail", 0.0)});
    }
    reps.push_back(std::move(rep));
  }
  RunResult res = assemble(cfg, data, base, dumb, retrained, reps, workers);
  for (const auto& [name, e] : m.checkpoints) res.checkpoint_hashes[name] = e.hash;
  return res;
}

}  // namespace mcu
