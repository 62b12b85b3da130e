// Command-line front end: train-base, unlearn, curve, eval, run, report, plot.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric or training failure, 1 anything else.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mcu/checkpoint.hpp"
#include "mcu/config.hpp"
#include "mcu/curves.hpp"
#include "mcu/error.hpp"
#include "mcu/eval.hpp"
#include "mcu/experiment.hpp"
#include "mcu/report.hpp"
#include "mcu/unlearn.hpp"

namespace fs = std::filesystem;
using namespace mcu;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Experiment config file (key = value with sections)");
  app->add_option("--seed", c.seed, "Seed for this stage");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--set", c.sets, "Override a config key, e.g. --set data.n=200")->take_all();
}

ExperimentConfig load(const Common& c) {
  KeyValues kv;
  if (!c.config.empty()) {
    kv = parse_key_values(read_text_file(c.config), c.config);
  }
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return config_from_key_values(kv);
}

std::string out_path(const Common& c, const std::string& name) {
  fs::create_directories(c.out);
  return (fs::path(c.out) / name).string();
}

void print_record(const std::string& label, const MetricRecord& r) {
  std::cout << label;
  for (const auto& name : metric_names()) std::cout << " " << name << "=" << format_double(metric_value(r, name));
  std::cout << "\n";
}

int cmd_train_base(const Common& c) {
  ExperimentConfig cfg = load(c);
  if (c.seed) cfg.base.seed = *c.seed;
  const auto data = prepare_data(cfg);
  const auto out = train_base(data.arch, data.split, cfg.base);
  const std::string path = out_path(c, "base.ckpt");
  save_checkpoint(out.params, path);
  std::cout << "base model: train accuracy "
            << format_double(subset_accuracy(data.arch, out.params, data.split, data.split.train_idx()))
            << ", " << data.arch.param_count() << " parameters -> " << path << "\n";
  return 0;
}

int cmd_unlearn(const Common& c, const std::string& base_path, const std::string& method,
                bool curriculum, bool second_order) {
  ExperimentConfig cfg = load(c);
  const auto data = prepare_data(cfg);
  const ParamVector base = load_checkpoint(base_path);
  EndpointPlan plan;
  plan.method = parse_method(method);
  plan.seed = c.seed.value_or(cfg.seeds.first);
  plan.curriculum = curriculum;
  plan.second_order = second_order;
  const ParamVector dumb = make_dumb_model(data.arch, cfg);
  const auto result = unlearn({data.arch, base}, data.split, endpoint_config(cfg, plan), nullptr, &dumb);
  const std::string path = out_path(c, "unlearned-" + method + "-" + std::to_string(plan.seed) + ".ckpt");
  save_checkpoint(result.params, path);
  std::cout << method << ": " << result.steps << " steps"
            << (result.diverged ? " (stopped by the divergence guard)" : "") << ", forget acc "
            << format_double(subset_accuracy(data.arch, result.params, data.split, data.split.forget_idx))
            << ", retain acc "
            << format_double(subset_accuracy(data.arch, result.params, data.split, data.split.retain_idx))
            << " -> " << path << "\n";
  return 0;
}

int cmd_curve(const Common& c, const std::string& base_path, const std::string& a,
              const std::string& b, const std::string& method, bool curriculum, bool second_order) {
  ExperimentConfig cfg = load(c);
  if (c.seed) cfg.curve.seed = *c.seed;
  const auto data = prepare_data(cfg);
  const ParamVector base = load_checkpoint(base_path);
  EndpointPlan plan;
  plan.method = parse_method(method);
  plan.seed = cfg.seeds.first;
  plan.curriculum = curriculum;
  plan.second_order = second_order;
  const UnlearnConfig row = endpoint_config(cfg, plan);
  const ParamVector dumb = make_dumb_model(data.arch, cfg);
  const UnlearnObjective objective(data.arch, base, data.split, row, &dumb);
  CurveTrainOptions opts;
  opts.steps = cfg.curve.steps;
  opts.optimizer = cfg.curve.inherit_optimizer ? row.optimizer : cfg.curve.optimizer;
  opts.seed = cfg.curve.seed;
  opts.arclength_weighting = cfg.curve.arclength;
  const auto trained = train_midpoint(make_bezier(load_checkpoint(a), load_checkpoint(b)), objective, opts);
  const std::string path = out_path(c, "bezier_midpoint.ckpt");
  save_checkpoint(*trained.spec.theta12, path);
  std::cout << "bezier midpoint trained for " << opts.steps << " steps -> " << path << "\n";
  return 0;
}

int cmd_eval(const Common& c, const std::string& base_path, const std::string& a,
             const std::string& b, const std::string& mid) {
  ExperimentConfig cfg = load(c);
  if (c.seed) cfg.base.seed = *c.seed;
  const auto data = prepare_data(cfg);
  const ParamVector base = load_checkpoint(base_path);
  const ParamVector dumb = make_dumb_model(data.arch, cfg);
  const ParamVector retrained = train_retrain(data.arch, data.split, cfg.retrain);
  const ParamVector& reference = cfg.zrf_reference == ZrfReference::random ? dumb : base;
  const auto ctx = EvalContext::make(data.arch, data.split, reference, retrained, cfg.forget_statistic);

  RunResult r;
  r.config = cfg;
  r.original = evaluate_point(ctx, base, 0.0);
  r.retrained = evaluate_point(ctx, retrained, 0.0);
  const ParamVector pa = load_checkpoint(a), pb = load_checkpoint(b);
  const std::pair<MetricRecord, MetricRecord> ends{evaluate_point(ctx, pa, 0.0), evaluate_point(ctx, pb, 1.0)};
  r.endpoints[0].metrics = ends.first;
  r.endpoints[1].metrics = ends.second;
  std::vector<CurveSpec> specs{make_linear(pa, pb)};
  if (!mid.empty()) {
    CurveSpec s = make_bezier(pa, pb);
    s.theta12 = load_checkpoint(mid);
    s.trained = true;
    specs.push_back(s);
  }
  for (const auto& s : specs) {
    CurveOutcome o;
    o.kind = s.kind;
    o.records = evaluate_curve(ctx, s, cfg.n_points);
    o.barrier = barrier_profile(o.records, ends, cfg.tau);
    o.mc_barrier = mc_barrier_standard(o.records, ends, cfg.tau);
    std::cout << to_string(s.kind) << ": retain barrier " << format_double(o.barrier.retain_barrier_height)
              << " at t=" << format_double(o.barrier.retain_argmax_t) << ", forget cliff "
              << format_double(o.barrier.forget_cliff_depth) << " at t="
              << format_double(o.barrier.forget_argmax_t) << ", tau " << format_double(cfg.tau)
              << ", mcu " << (o.barrier.mcu_holds ? "holds" : "fails") << "\n";
    r.curves.push_back(std::move(o));
  }
  write_reports(r, c.out, true);
  return 0;
}

int cmd_run(const Common& c, std::optional<int> replicates, std::string cache_dir) {
  ExperimentConfig cfg = load(c);
  if (c.seed) cfg.seeds = {*c.seed, *c.seed + 1};
  if (replicates) cfg.replicates = *replicates;
  cfg.validate();
  RunOptions opts;
  opts.out_dir = c.out;
  opts.cache_dir = std::move(cache_dir);
  RunResult r;
  const auto m = run_setting(cfg, opts, &r);
  print_record("original ", r.original);
  print_record("retrained", r.retrained);
  print_record("endpoint1", r.endpoints[0].metrics);
  print_record("endpoint2", r.endpoints[1].metrics);
  for (const auto& curve : r.curves) {
    std::cout << to_string(curve.kind) << ": retain barrier "
              << format_double(curve.barrier.retain_barrier_height) << ", forget cliff "
              << format_double(curve.barrier.forget_cliff_depth) << ", tau "
              << format_double(curve.barrier.tau) << ", mcu "
              << (curve.barrier.mcu_holds ? "holds" : "fails") << "\n";
  }
  std::cout << "run complete in " << format_double(m.wall_clock_seconds) << " s -> " << c.out << "\n";
  return 0;
}

int cmd_report(const Common& c, const std::string& run_dir) {
  const RunResult r = reevaluate(run_dir);
  write_reports(r, c.out == "." ? run_dir : c.out, true);
  std::cout << "report regenerated from checkpoints in " << run_dir << "\n";
  return 0;
}

int cmd_plot(const Common& c, const std::string& run_dir, const std::string& metric) {
  (void)metric_value(MetricRecord{}, metric);
  const RunResult r = reevaluate(run_dir);
  const std::string path = out_path(c, "plot_" + metric + ".svg");
  write_text_file(path, render_svg(r, metric));
  std::cout << "wrote " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mode connectivity of unlearned models"};
  app.require_subcommand(1);

  Common common;
  std::string base_path, a, b, mid, method = "gd", run_dir, metric = "loss_retain", cache_dir;
  bool curriculum = false, second_order = false;
  std::optional<int> replicates;

  auto* train = app.add_subcommand("train-base", "Train the original model on the full training split");
  add_common(train, common);

  auto* unl = app.add_subcommand("unlearn", "Unlearn the forget set from a base checkpoint");
  add_common(unl, common);
  unl->add_option("--base", base_path, "Base checkpoint")->required();
  unl->add_option("--method", method, "ga, rl, gd, bt, salun or npo");
  unl->add_flag("--curriculum", curriculum, "Order forget samples by the configured curriculum");
  unl->add_flag("--second-order", second_order, "Use the diagonal second-order optimizer");

  auto* curve = app.add_subcommand("curve", "Train a bezier midpoint between two unlearned models");
  add_common(curve, common);
  curve->add_option("--base", base_path, "Base checkpoint")->required();
  curve->add_option("--a", a, "Endpoint at t = 0")->required();
  curve->add_option("--b", b, "Endpoint at t = 1")->required();
  curve->add_option("--method", method, "Unlearning objective used for the curve");
  curve->add_flag("--curriculum", curriculum, "Curriculum ordering for the curve objective");
  curve->add_flag("--second-order", second_order, "Diagonal second-order optimizer for the curve");

  auto* ev = app.add_subcommand("eval", "Evaluate linear (and optionally bezier) curves");
  add_common(ev, common);
  ev->add_option("--base", base_path, "Base checkpoint")->required();
  ev->add_option("--a", a, "Endpoint at t = 0")->required();
  ev->add_option("--b", b, "Endpoint at t = 1")->required();
  ev->add_option("--mid", mid, "Bezier midpoint checkpoint");

  auto* run = app.add_subcommand("run", "Run a full setting end to end");
  add_common(run, common);
  run->add_option("--replicates", replicates, "Number of seed replicates");
  run->add_option("--cache-dir", cache_dir, "Shared cache for retrained models");

  auto* rep = app.add_subcommand("report", "Regenerate CSV and JSON from a run's checkpoints");
  add_common(rep, common);
  rep->add_option("--run", run_dir, "Run directory")->required();

  auto* plot = app.add_subcommand("plot", "Render a metric along the curves as SVG");
  add_common(plot, common);
  plot->add_option("--run", run_dir, "Run directory")->required();
  plot->add_option("--metric", metric, "Metric name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train_base(common);
    if (*unl) return cmd_unlearn(common, base_path, method, curriculum, second_order);
    if (*curve) return cmd_curve(common, base_path, a, b, method, curriculum, second_order);
    if (*ev) return cmd_eval(common, base_path, a, b, mid);
    if (*run) return cmd_run(common, replicates, cache_dir);
    if (*rep) return cmd_report(common, run_dir);
    if (*plot) return cmd_plot(common, run_dir, metric);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const TrainingError& e) {
    std::cerr << "training failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
