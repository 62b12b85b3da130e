// Acceptance checks AC1..AC10. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Thresholds and runtime budgets are pinned below.

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcu/checkpoint.hpp"
#include "mcu/config.hpp"
#include "mcu/curves.hpp"
#include "mcu/error.hpp"
#include "mcu/eval.hpp"
#include "mcu/experiment.hpp"
#include "mcu/losses.hpp"
#include "mcu/mlp.hpp"
#include "mcu/report.hpp"
#include "mcu/rng.hpp"
#include "mcu/unlearn.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace mcu;

namespace {

const std::string kFixtures = MCU_FIXTURE_DIR;

// AC1
constexpr int kGradFixtures = 25;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradAbsTol = 1e-6;
constexpr double kGradBudget = 30.0;
// AC2
constexpr double kLinearMatchTol = 1e-6;
constexpr double kCurveBudget = 5.0;
// AC3
constexpr int kBarrierProfiles = 50;
constexpr double kBarrierTol = 1e-9;
constexpr double kBarrierBudget = 1.0;
// AC4
constexpr int kKsPairs = 100;
constexpr double kKsPTol = 1e-6;
constexpr double kKsBudget = 5.0;
// AC5
constexpr double kMaxForgetAcc = 0.5;
constexpr double kMinRetainRatio = 0.9;
constexpr double kSanityBudget = 120.0;
// AC6
constexpr double kPThreshold = 0.05;
constexpr double kQualityBudget = 60.0;
// AC7
constexpr double kMinLinearBarrier = 0.1;
constexpr double kMinBarrierReduction = 0.25;
constexpr double kCurveTrainBudget = 180.0;
// AC8
constexpr int kMinimalPoints = 8;
constexpr double kGridBudget = 600.0;
// AC9
constexpr double kDeterminismBudget = 60.0;
// AC10
constexpr int kProtocolPoints = 16;
constexpr double kProtocolThreshold = 0.05;

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& why) {
    if (!ok) {
      if (pass) detail = why;
      pass = false;
    }
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mcu_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<char>& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

std::vector<double> to_double(const std::vector<float>& v) { return {v.begin(), v.end()}; }

// AC1: autodiff against central differences of an independent double forward pass.
Outcome gradient_oracle() {
  Outcome o;
  Rng rng(2024);
  double worst = 0.0;
  for (int f = 0; f < kGradFixtures; ++f) {
    MlpArch arch;
    arch.activation = f % 2 ? Activation::tanh : Activation::relu;
    arch.layer_dims.push_back(2 + rng.below(4));
    const std::size_t hidden_layers = 1 + rng.below(2);
    for (std::size_t l = 0; l < hidden_layers; ++l) arch.layer_dims.push_back(3 + rng.below(8));
    const std::size_t classes = 2 + rng.below(3);
    arch.layer_dims.push_back(classes);
    const std::size_t batch = 1 + rng.below(8);

    const auto model = init_mlp(arch, derive_seed(77, f));
    Tensor x(Shape{batch, arch.layer_dims.front()});
    for (auto& v : x.data) v = static_cast<float>(rng.normal());
    std::vector<int> y(batch);
    for (auto& v : y) v = static_cast<int>(rng.below(classes));

    const auto vg = value_and_grad(
        [&](const ad::Var& p) { return softmax_xent(forward_logits(arch, p, x), y); }, model.params);
    auto params = to_double(model.params.values);
    const auto xd = to_double(x.data);
    const bool tanh_act = arch.activation == Activation::tanh;
    auto loss = [&](const std::vector<double>& p) {
      return oracle::mean_xent(oracle::mlp_logits(arch.layer_dims, p, tanh_act, xd, batch), y, classes);
    };
    const double h = 1e-5;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double keep = params[i];
      params[i] = keep + h;
      const double up = loss(params);
      params[i] = keep - h;
      const double down = loss(params);
      params[i] = keep;
      const double fd = (up - down) / (2 * h);
      const double err = std::abs(vg.grad.values[i] - fd);
      worst = std::max(worst, err / (kGradAbsTol + kGradRelTol * std::abs(fd)));
      o.require(err <= kGradAbsTol + kGradRelTol * std::abs(fd),
                "fixture " + std::to_string(f) + " coordinate " + std::to_string(i) + ": autodiff " +
                    fmt(vg.grad.values[i]) + " vs finite difference " + fmt(fd));
    }
  }
  if (o.pass) o.detail = "worst error " + fmt(worst) + " of tolerance over " + std::to_string(kGradFixtures) + " fixtures";
  return o;
}

// AC2: curve identities.
Outcome curve_identities() {
  Outcome o;
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<float> a(300), b(300), mid(300);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = static_cast<float>(rng.normal());
      b[i] = static_cast<float>(rng.normal());
      mid[i] = static_cast<float>(3.0 * rng.normal());
    }
    const auto line = make_linear(make_flat(a), make_flat(b));
    const auto avg = make_bezier(make_flat(a), make_flat(b));
    const CurveSpec bent{CurveKind::bezier, make_flat(a), make_flat(b), make_flat(mid)};
    const CurveSpec mirrored{CurveKind::bezier, make_flat(b), make_flat(a), make_flat(mid)};
    for (const auto* spec : {&line, &avg, &bent}) {
      o.require(curve_point(*spec, 0.0).values == a, "phi(0) differs from theta1");
      o.require(curve_point(*spec, 1.0).values == b, "phi(1) differs from theta2");
    }
    for (double t : curve_grid(kProtocolPoints)) {
      o.require(curve_point(bent, t).values == curve_point(mirrored, 1.0 - t).values,
                "bezier symmetry broken at t = " + fmt(t));
      const auto p = curve_point(line, t), q = curve_point(avg, t);
      for (std::size_t i = 0; i < p.size(); ++i) {
        o.require(std::abs(p.values[i] - q.values[i]) <= kLinearMatchTol,
                  "averaged-midpoint bezier leaves the line at t = " + fmt(t));
      }
    }
  }
  if (o.pass) o.detail = "endpoints and symmetry bit-exact; averaged midpoint on the line at 16 points";
  return o;
}

std::vector<MetricRecord> profile(const std::vector<double>& ts, const std::vector<double>& retain,
                                  const std::vector<double>& forget) {
  std::vector<MetricRecord> out(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    out[i].t = ts[i];
    out[i].loss_retain = retain[i];
    out[i].loss_forget = forget[i];
  }
  return out;
}

// AC3: tents added to (retain) or cut from (forget) the chord; the excess is the tent height.
Outcome barrier_oracle() {
  Outcome o;
  Rng rng(31);
  for (int k = 0; k < kBarrierProfiles; ++k) {
    const int n = 3 + static_cast<int>(rng.below(30));
    const auto ts = curve_grid(n);
    const std::size_t peak = 1 + rng.below(static_cast<std::uint64_t>(n - 2));
    const double r0 = 3 * rng.uniform(), r1 = 3 * rng.uniform();
    const double f0 = 3 * rng.uniform(), f1 = 3 * rng.uniform();
    const double bump = 2 * rng.uniform() - 0.5, dip = 2 * rng.uniform() - 0.5;
    std::vector<double> retain(ts.size()), forget(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double t = ts[i], tp = ts[peak];
      const double tent = t <= tp ? t / tp : (1 - t) / (1 - tp);
      retain[i] = (1 - t) * r0 + t * r1 + bump * tent;
      forget[i] = (1 - t) * f0 + t * f1 - dip * tent;
    }
    retain.front() = r0;
    retain.back() = r1;
    forget.front() = f0;
    forget.back() = f1;
    const auto recs = profile(ts, retain, forget);
    const auto rep = barrier_profile(recs, {recs.front(), recs.back()}, kDefaultBarrierTolerance);
    const double want_h = std::max(bump, 0.0), want_c = std::max(dip, 0.0);
    o.require(std::abs(rep.retain_barrier_height - want_h) <= kBarrierTol,
              "profile " + std::to_string(k) + ": barrier " + fmt(rep.retain_barrier_height) +
                  " vs " + fmt(want_h));
    o.require(std::abs(rep.forget_cliff_depth - want_c) <= kBarrierTol,
              "profile " + std::to_string(k) + ": cliff " + fmt(rep.forget_cliff_depth) + " vs " +
                  fmt(want_c));
    o.require(rep.mcu_holds == (want_h <= kDefaultBarrierTolerance && want_c <= kDefaultBarrierTolerance),
              "profile " + std::to_string(k) + ": mcu flag");
    const auto ends = profile({0.0, 1.0}, {r0, r1}, {f0, f1});
    const auto two = barrier_profile(ends, {ends.front(), ends.back()}, kDefaultBarrierTolerance);
    o.require(two.retain_barrier_height == 0.0 && two.forget_cliff_depth == 0.0,
              "n_points = 2 gives a non-zero height");
  }
  if (o.pass) o.detail = std::to_string(kBarrierProfiles) + " tent profiles matched; endpoint-only profiles give 0";
  return o;
}

// AC4: KS against brute-force ECDFs and the 200-term series.
Outcome ks_oracle() {
  Outcome o;
  Rng rng(41);
  double worst = 0.0;
  for (int k = 0; k < kKsPairs; ++k) {
    const std::size_t n = 10 + rng.below(191), m = 10 + rng.below(191);
    const double shift = 0.6 * rng.uniform();
    const bool ties = k % 3 == 0;
    std::vector<double> a(n), b(m);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal() + shift;
    if (ties) {
      for (auto& v : a) v = std::round(v * 4) / 4;
      for (auto& v : b) v = std::round(v * 4) / 4;
    }
    const auto got = ks_two_sample(a, b);
    const double d = oracle::ks_statistic_bruteforce(a, b);
    const double p = oracle::ks_p_value(d, n, m);
    worst = std::max(worst, std::abs(got.p_value - p));
    o.require(got.statistic == d, "pair " + std::to_string(k) + ": D " + fmt(got.statistic) + " vs " + fmt(d));
    o.require(std::abs(got.p_value - p) <= kKsPTol,
              "pair " + std::to_string(k) + ": p " + fmt(got.p_value) + " vs " + fmt(p));
  }
  std::vector<double> a(50), b(50);
  for (std::size_t i = 0; i < 50; ++i) {
    a[i] = rng.normal();
    b[i] = 100 + rng.normal();
  }
  const auto same = ks_two_sample(a, a);
  o.require(same.statistic == 0.0 && same.p_value == 1.0, "identical samples are not D = 0, p = 1");
  const auto apart = ks_two_sample(a, b);
  o.require(apart.statistic == 1.0, "disjoint supports are not D = 1");
  o.require(std::abs(apart.p_value - oracle::ks_p_value(1.0, 50, 50)) <= kKsPTol, "disjoint p-value");
  if (o.pass) o.detail = std::to_string(kKsPairs) + " pairs, D exact, worst p error " + fmt(worst);
  return o;
}

struct MethodPin {
  UnlearnMethod method;
  OptimizerKind optimizer;
  double lr;
  int epochs;
};

// Per-method hyperparameters for the unlearn_sanity fixture.
constexpr MethodPin kSanityPins[] = {
    {UnlearnMethod::ga, OptimizerKind::sgd, 0.05, 10},
    {UnlearnMethod::gd, OptimizerKind::adam, 0.001, 4},
    {UnlearnMethod::bt, OptimizerKind::adam, 0.01, 40},
    {UnlearnMethod::rl, OptimizerKind::adam, 0.01, 20},
    {UnlearnMethod::salun, OptimizerKind::adam, 0.01, 30},
    {UnlearnMethod::npo, OptimizerKind::adam, 0.02, 80},
};

// AC5: every method forgets D_f on two-moons with |D_f| = 2% and keeps retain accuracy.
Outcome unlearning_sanity() {
  Outcome o;
  const auto cfg = load_config(kFixtures + "/unlearn_sanity.cfg");
  const auto data = prepare_data(cfg);
  const auto& ds = data.split;
  const MlpModel original{data.arch, train_base(data.arch, ds, cfg.base).params};
  const double orig_retain = subset_accuracy(data.arch, original.params, ds, ds.retain_idx);
  std::string summary;
  for (const auto& pin : kSanityPins) {
    UnlearnConfig u = cfg.unlearn;
    u.method = pin.method;
    u.seed = 1;
    u.epochs = pin.epochs;
    u.optimizer.kind = pin.optimizer;
    u.optimizer.lr = pin.lr;
    AccessLog log;
    const auto r = unlearn(original, ds, u, &log);
    const double fa = subset_accuracy(data.arch, r.params, ds, ds.forget_idx);
    const double ra = subset_accuracy(data.arch, r.params, ds, ds.retain_idx);
    const std::string name = to_string(pin.method);
    o.require(fa <= kMaxForgetAcc, name + ": forget accuracy " + fmt(fa));
    o.require(ra >= kMinRetainRatio * orig_retain,
              name + ": retain accuracy " + fmt(ra) + " below " + fmt(kMinRetainRatio * orig_retain));
    if (pin.method == UnlearnMethod::ga) {
      o.require(log.retain_gradient.empty(), "ga touched " + std::to_string(log.retain_gradient.size()) +
                                                 " retain gradients");
    }
    summary += " " + name + " " + fmt(fa) + "/" + fmt(ra);
  }
  if (o.pass) o.detail = "forget/retain acc:" + summary + " (original retain " + fmt(orig_retain) + ")";
  return o;
}

// AC6: two retrain seeds agree; the original model and a retrain do not.
Outcome forget_quality_calibration() {
  Outcome o;
  const auto cfg = load_config(kFixtures + "/forget_quality.cfg");
  const auto data = prepare_data(cfg);
  const auto& ds = data.split;
  const auto base = train_base(data.arch, ds, cfg.base).params;
  const auto r1 = train_retrain(data.arch, ds, cfg.retrain);
  BaseConfig second = cfg.retrain;
  second.seed = cfg.retrain.seed + 1;
  const auto r2 = train_retrain(data.arch, ds, second);
  const double same = forget_quality(r2, r1, data.arch, ds, cfg.forget_statistic);
  const double orig = forget_quality(base, r1, data.arch, ds, cfg.forget_statistic);
  o.require(same > kPThreshold, "two retrain seeds give p = " + fmt(same));
  o.require(orig < kPThreshold, "original vs retrain gives p = " + fmt(orig));
  o.detail = "retrain vs retrain p = " + fmt(same) + ", original vs retrain p = " + fmt(orig);
  return o;
}

double mean_retain_loss(const CurveOutcome& c) {
  double s = 0.0;
  for (const auto& r : c.records) s += r.loss_retain;
  return s / static_cast<double>(c.records.size());
}

const CurveOutcome* find_curve(const RunResult& r, CurveKind kind) {
  for (const auto& c : r.curves) {
    if (c.kind == kind) return &c;
  }
  return nullptr;
}

// AC7: the trained bezier removes a linear retain barrier between two GD endpoints.
// Also keeps the run's report for AC10.
Outcome curve_training(std::string* report_json) {
  Outcome o;
  const auto cfg = load_config(kFixtures + "/gd_barrier.cfg");
  const auto dir = scratch("ac7");
  RunOptions opts;
  opts.out_dir = dir.string();
  opts.resume = false;
  RunResult r;
  run_setting(cfg, opts, &r);
  *report_json = read_text_file((dir / "report.json").string());
  const auto* line = find_curve(r, CurveKind::linear);
  const auto* bez = find_curve(r, CurveKind::bezier);
  if (!line || !bez) {
    o.require(false, "run is missing a linear or bezier curve");
    return o;
  }
  const double hl = line->barrier.retain_barrier_height, hb = bez->barrier.retain_barrier_height;
  const double ml = mean_retain_loss(*line), mb = mean_retain_loss(*bez);
  o.require(hl > kMinLinearBarrier, "linear retain barrier " + fmt(hl) + " is not above " + fmt(kMinLinearBarrier));
  o.require(mb < ml, "bezier mean retain loss " + fmt(mb) + " not below linear " + fmt(ml));
  o.require(hb <= (1 - kMinBarrierReduction) * hl, "bezier barrier " + fmt(hb) + " vs linear " + fmt(hl));
  o.detail = "linear barrier " + fmt(hl) + " -> bezier " + fmt(hb) + "; mean retain loss " + fmt(ml) +
             " -> " + fmt(mb);
  return o;
}

bool svg_well_formed(const fs::path& path, std::size_t points, std::string* why) {
  try {
    boost::property_tree::ptree tree;
    boost::property_tree::read_xml(path.string(), tree);
    std::size_t curves = 0;
    for (const auto& [tag, node] : tree.get_child("svg")) {
      if (tag != "polyline" || node.get<std::string>("<xmlattr>.class", "") != "curve") continue;
      ++curves;
      std::istringstream in(node.get<std::string>("<xmlattr>.points"));
      std::size_t n = 0;
      for (std::string tok; in >> tok;) ++n;
      if (n != points) {
        *why = path.filename().string() + " has a curve with " + std::to_string(n) + " vertices";
        return false;
      }
    }
    if (curves == 0) {
      *why = path.filename().string() + " has no curve";
      return false;
    }
    return true;
  } catch (const std::exception& e) {
    *why = path.filename().string() + ": " + e.what();
    return false;
  }
}

ExperimentConfig minimal_for(Setting s) {
  auto cfg = load_config(kFixtures + "/minimal.cfg");
  cfg.setting = s;
  if (!is_method_setting(s)) cfg.methods.resize(1);
  return cfg;
}

// AC8: the ten settings at minimal scale.
Outcome grid_completeness() {
  Outcome o;
  const auto root = scratch("ac8");
  const std::string cache = (root / "cache").string();
  for (Setting s : kAllSettings) {
    const std::string name = to_string(s);
    const auto cfg = minimal_for(s);
    o.require(cfg.n_points == kMinimalPoints && cfg.data.n == 200 && cfg.base.schedule.epochs == 5,
              "minimal fixture is not at minimal scale");
    const auto dir = root / name;
    RunOptions opts;
    opts.out_dir = dir.string();
    opts.cache_dir = cache;
    try {
      const auto m = run_setting(cfg, opts);
      o.require(m.complete, name + ": manifest incomplete");
      const auto loaded = load_manifest(dir.string());
      o.require(loaded.complete && loaded.config_hash == config_hash(cfg), name + ": manifest on disk");
      verify_manifest(loaded, dir.string());
      std::ifstream csv(dir / "metrics.csv");
      std::string header;
      std::getline(csv, header);
      o.require(header == kCsvHeader, name + ": csv header '" + header + "'");
      std::size_t rows = 0;
      for (std::string line; std::getline(csv, line);) rows += line.empty() ? 0 : 1;
      o.require(rows == cfg.curves.size() * kMinimalPoints, name + ": csv has " + std::to_string(rows) + " rows");
      const auto j = nlohmann::json::parse(read_text_file((dir / "report.json").string()));
      o.require(j.at("curves").size() == cfg.curves.size(), name + ": json curve count");
      for (const auto& c : j.at("curves")) {
        o.require(c.at("barrier").contains("retain_barrier_height") &&
                      c.at("barrier").contains("forget_cliff_depth"),
                  name + ": json barrier report");
      }
      for (const auto& plot : loaded.plots) {
        std::string why;
        o.require(svg_well_formed(dir / plot, kMinimalPoints, &why), name + ": " + why);
      }
      o.require(!loaded.plots.empty(), name + ": no plots");
    } catch (const std::exception& e) {
      o.require(false, name + ": " + e.what());
    }
  }
  if (o.pass) o.detail = "all 10 settings complete with manifest, csv, json and svg";
  return o;
}

// AC9: byte-identical reruns and detected corruption.
Outcome determinism() {
  Outcome o;
  const auto cfg = minimal_for(Setting::met);
  std::vector<fs::path> dirs;
  for (const char* name : {"ac9a", "ac9b"}) {
    dirs.push_back(scratch(name));
    RunOptions opts;
    opts.out_dir = dirs.back().string();
    opts.resume = false;
    run_setting(cfg, opts);
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dirs[0]);
    const auto ext = rel.extension().string();
    if (ext != ".ckpt" && ext != ".csv" && ext != ".svg" && rel != "report.json") continue;
    o.require(fs::exists(dirs[1] / rel), rel.string() + " missing from the rerun");
    o.require(file_bytes(entry.path()) == file_bytes(dirs[1] / rel), rel.string() + " differs between runs");
    ++compared;
  }
  o.require(compared >= 6, "only " + std::to_string(compared) + " artifacts compared");

  const auto m = load_manifest(dirs[1].string());
  const auto path = dirs[1] / m.checkpoints.at("endpoint1").path;
  const auto good = file_bytes(path);
  auto expect_throw = [&](const std::string& what, const std::function<void()>& corrupt,
                          const std::function<bool(const std::exception&)>& kind) {
    corrupt();
    try {
      verify_manifest(m, dirs[1].string());
      o.require(false, what + " went undetected");
    } catch (const std::exception& e) {
      o.require(kind(e), what + " raised the wrong error: " + e.what());
    }
    write_bytes(path, good);
  };
  expect_throw("flipped payload bit", [&] {
    auto b = good;
    b[b.size() - 12] ^= 0x04;
    write_bytes(path, b);
  }, [](const std::exception& e) { return dynamic_cast<const HashMismatchError*>(&e) != nullptr; });
  expect_throw("truncation", [&] {
    auto b = good;
    b.resize(b.size() / 2);
    write_bytes(path, b);
  }, [](const std::exception& e) { return dynamic_cast<const TruncatedFileError*>(&e) != nullptr; });
  expect_throw("bad magic", [&] {
    auto b = good;
    b[1] = 'Z';
    write_bytes(path, b);
  }, [](const std::exception& e) { return dynamic_cast<const MagicMismatchError*>(&e) != nullptr; });
  o.require([&] {
    try {
      verify_manifest(m, dirs[1].string());
      return true;
    } catch (const std::exception&) {
      return false;
    }
  }(), "restored checkpoint does not verify");
  if (o.pass) o.detail = std::to_string(compared) + " artifacts byte-identical; corruption detected";
  return o;
}

// AC10: protocol constants in the default fixture, the built-in defaults and a report.
Outcome protocol_constants(const std::string& report_json) {
  Outcome o;
  const auto cfg = load_config(kFixtures + "/default.cfg");
  o.require(cfg.n_points == kProtocolPoints, "default fixture n_points = " + std::to_string(cfg.n_points));
  o.require(cfg.forget_quality_threshold == kProtocolThreshold, "default fixture threshold");
  const ExperimentConfig builtin;
  o.require(builtin.n_points == kProtocolPoints && kDefaultCurvePoints == kProtocolPoints,
            "built-in n_points");
  o.require(builtin.forget_quality_threshold == kProtocolThreshold &&
                kForgetQualityThreshold == kProtocolThreshold,
            "built-in threshold");
  const std::string text = read_text_file(kFixtures + "/default.cfg");
  o.require(text.find("n_points = 16") != std::string::npos, "default.cfg does not list n_points = 16");
  o.require(text.find("forget_quality_threshold = 0.05") != std::string::npos,
            "default.cfg does not list forget_quality_threshold = 0.05");
  if (report_json.empty()) {
    o.require(false, "no report available");
  } else {
    const auto j = nlohmann::json::parse(report_json);
    o.require(j.at("n_points") == kProtocolPoints, "report n_points");
    o.require(j.at("forget_quality_threshold") == kProtocolThreshold, "report threshold");
    for (const auto& c : j.at("curves")) {
      o.require(c.at("records").size() == static_cast<std::size_t>(kProtocolPoints), "report curve length");
    }
  }
  if (o.pass) o.detail = "n_points 16 and threshold 0.05 in default.cfg, defaults and report.json";
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  std::string report_json;
  auto run = [&](const char* id, const char* title, double budget, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget > 0 && secs > budget) {
      o.pass = false;
      o.detail += " [over budget: " + fmt(secs) + " s > " + fmt(budget) + " s]";
    }
    if (!o.pass) ++failures;
    std::cout << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << title << ": " << o.detail << " ("
              << fmt(secs) << " s)" << std::endl;
  };

  run("AC1", "gradient oracle", kGradBudget, gradient_oracle);
  run("AC2", "curve identities", kCurveBudget, curve_identities);
  run("AC3", "barrier oracle", kBarrierBudget, barrier_oracle);
  run("AC4", "KS oracle", kKsBudget, ks_oracle);
  run("AC5", "unlearning sanity", kSanityBudget, unlearning_sanity);
  run("AC6", "forget-quality calibration", kQualityBudget, forget_quality_calibration);
  run("AC7", "curve training efficacy", kCurveTrainBudget, [&] { return curve_training(&report_json); });
  run("AC8", "grid completeness", kGridBudget, grid_completeness);
  run("AC9", "determinism and persistence", kDeterminismBudget, determinism);
  run("AC10", "protocol constants", 0.0, [&] { return protocol_constants(report_json); });

  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
