#include "mcu/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mcu/error.hpp"

namespace mcu {

using ordered_json = nlohmann::ordered_json;

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + tmp + "' for writing");
    f << content;
    if (!f) throw IoError("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw IoError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string render_csv(const RunResult& result) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& curve : result.curves) {
    for (const auto& r : curve.records) {
      out += format_double(r.t) + "," + to_string(curve.kind);
      for (const auto& name : metric_names()) out += "," + format_double(metric_value(r, name));
      out += "\n";
    }
  }
  return out;
}

namespace {

ordered_json metrics_json(const MetricRecord& r) {
  ordered_json j;
  j["t"] = r.t;
  for (const auto& name : metric_names()) j[name] = metric_value(r, name);
  return j;
}

ordered_json barrier_json(const BarrierReport& b) {
  ordered_json j;
  j["retain_barrier_height"] = b.retain_barrier_height;
  j["retain_argmax_t"] = b.retain_argmax_t;
  j["forget_cliff_depth"] = b.forget_cliff_depth;
  j["forget_argmax_t"] = b.forget_argmax_t;
  j["tau"] = b.tau;
  j["mcu_holds"] = b.mcu_holds;
  return j;
}

ordered_json range_json(const std::vector<double>& v) {
  ordered_json j;
  double sum = 0.0;
  for (double x : v) sum += x;
  j["mean"] = sum / static_cast<double>(v.size());
  j["min"] = *std::min_element(v.begin(), v.end());
  j["max"] = *std::max_element(v.begin(), v.end());
  return j;
}

}  // namespace

std::string render_json(const RunResult& result) {
  const auto& cfg = result.config;
  ordered_json j;
  j["artifact_version"] = kArtifactVersion;
  j["config_hash"] = config_hash(cfg);
  j["setting"] = to_string(cfg.setting);
  j["n_points"] = cfg.n_points;
  j["tau"] = cfg.tau;
  j["forget_quality_threshold"] = cfg.forget_quality_threshold;

  ordered_json config;
  for (const auto& [k, v] : parse_key_values(to_text(cfg))) config[k] = v;
  j["config"] = config;

  j["original"] = metrics_json(result.original);
  j["retrained"] = metrics_json(result.retrained);
  ordered_json endpoints = ordered_json::array();
  for (const auto& e : result.endpoints) {
    ordered_json ej;
    ej["method"] = to_string(e.plan.method);
    ej["seed"] = e.plan.seed;
    ej["curriculum"] = e.plan.curriculum;
    ej["second_order"] = e.plan.second_order;
    ej["diverged"] = e.diverged;
    ej["steps"] = e.steps;
    ej["metrics"] = metrics_json(e.metrics);
    ej["forget_quality_pass"] = e.metrics.forget_quality >= cfg.forget_quality_threshold;
    endpoints.push_back(ej);
  }
  j["endpoints"] = endpoints;

  ordered_json curves = ordered_json::array();
  for (const auto& c : result.curves) {
    ordered_json cj;
    cj["kind"] = to_string(c.kind);
    cj["barrier"] = barrier_json(c.barrier);
    cj["mc_barrier_standard"] = c.mc_barrier;
    if (c.kind == CurveKind::bezier) {
      cj["objective_head"] = c.objective_head;
      cj["objective_tail"] = c.objective_tail;
    }
    ordered_json recs = ordered_json::array();
    for (const auto& r : c.records) recs.push_back(metrics_json(r));
    cj["records"] = recs;
    curves.push_back(cj);
  }
  j["curves"] = curves;

  ordered_json reps;
  reps["count"] = 1 + result.extra_replicates.size();
  ordered_json per_kind = ordered_json::object();
  for (const auto& c : result.curves) {
    std::vector<double> heights{c.barrier.retain_barrier_height};
    std::vector<double> cliffs{c.barrier.forget_cliff_depth};
    int holds = c.barrier.mcu_holds ? 1 : 0;
    for (const auto& rep : result.extra_replicates) {
      for (const auto& rc : rep.curves) {
        if (rc.kind != c.kind) continue;
        heights.push_back(rc.barrier.retain_barrier_height);
        cliffs.push_back(rc.barrier.forget_cliff_depth);
        holds += rc.barrier.mcu_holds ? 1 : 0;
      }
    }
    ordered_json kj;
    kj["retain_barrier_height"] = range_json(heights);
    kj["forget_cliff_depth"] = range_json(cliffs);
    kj["mcu_holds_count"] = holds;
    per_kind[to_string(c.kind)] = kj;
  }
  reps["curves"] = per_kind;
  ordered_json seeds = ordered_json::array();
  for (const auto& rep : result.extra_replicates) {
    seeds.push_back(ordered_json::array({rep.seeds.first, rep.seeds.second}));
  }
  reps["extra_seeds"] = seeds;
  j["replicates"] = reps;

  ordered_json prov = ordered_json::object();
  for (const auto& [path, hash] : result.checkpoint_hashes) prov[path] = hash;
  j["checkpoints"] = prov;
  return j.dump(2) + "\n";
}

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 64, kRight = 24, kTop = 32, kBottom = 48;
const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const RunResult& result, const std::string& metric) {
  (void)metric_value(MetricRecord{}, metric);
  if (result.curves.empty() || result.curves.front().records.empty()) {
    throw ContractViolation("render_svg: no curve records");
  }
  const bool loss = is_loss_metric(metric);
  const double tau = result.config.tau;
  const double v0 = metric_value(result.endpoints[0].metrics, metric);
  const double v1 = metric_value(result.endpoints[1].metrics, metric);
  const double band = !loss ? 0.0 : (metric == "loss_retain" ? tau : -tau);

  double lo = std::min(v0, v1), hi = std::max(v0, v1);
  for (const auto& c : result.curves) {
    for (const auto& r : c.records) {
      const double v = metric_value(r, metric);
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  lo = std::min({lo, v0 + band, v1 + band});
  hi = std::max({hi, v0 + band, v1 + band});
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto x = [&](double t) { return fmt(kLeft + t * pw); };
  auto y = [&](double v) {
    if (!std::isfinite(v)) v = v > 0 ? hi : lo;
    return fmt(kTop + (hi - v) / (hi - lo) * ph);
  };

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  s << "  <rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" fill=\"white\"/>\n";
  s << "  <text x=\"" << fmt(kWidth / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
    << xml_escape(metric + " along the curve (" + to_string(result.config.setting) + ")")
    << "</text>\n";

  if (loss) {
    s << "  <polygon class=\"tau-band\" fill=\"#999999\" fill-opacity=\"0.2\" points=\"" << x(0)
      << "," << y(v0) << " " << x(1) << "," << y(v1) << " " << x(1) << "," << y(v1 + band) << " "
      << x(0) << "," << y(v0 + band) << "\"/>\n";
  }
  s << "  <g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
  s << "    <line x1=\"" << x(0) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\"" << x(1) << "\" y2=\""
    << fmt(kTop + ph) << "\"/>\n";
  s << "    <line x1=\"" << x(0) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << x(0) << "\" y2=\""
    << fmt(kTop + ph) << "\"/>\n";
  s << "  </g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double t = i / 4.0;
    const double v = lo + (hi - lo) * i / 4.0;
    s << "  <text x=\"" << x(t) << "\" y=\"" << fmt(kTop + ph + 16)
      << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(t) << "</text>\n";
    s << "  <text x=\"" << fmt(kLeft - 6) << "\" y=\"" << y(v)
      << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(v) << "</text>\n";
  }
  s << "  <text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 8)
    << "\" text-anchor=\"middle\" font-size=\"12\">t</text>\n";

  s << "  <polyline class=\"interpolant\" fill=\"none\" stroke=\"#555555\" stroke-dasharray=\"6,4\" "
       "points=\""
    << x(0) << "," << y(v0) << " " << x(1) << "," << y(v1) << "\"/>\n";

  for (std::size_t k = 0; k < result.curves.size(); ++k) {
    const auto& c = result.curves[k];
    const char* color = kColors[k % 4];
    s << "  <polyline class=\"curve\" data-kind=\"" << to_string(c.kind)
      << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < c.records.size(); ++i) {
      s << (i ? " " : "") << x(c.records[i].t) << "," << y(metric_value(c.records[i], metric));
    }
    s << "\"/>\n";
    s << "  <text x=\"" << fmt(kWidth - kRight - 80) << "\" y=\"" << fmt(kTop + 14 + 14.0 * k)
      << "\" font-size=\"11\" fill=\"" << color << "\">" << to_string(c.kind) << "</text>\n";
  }
  s << "  <circle class=\"endpoint\" cx=\"" << x(0) << "\" cy=\"" << y(v0)
    << "\" r=\"4\" fill=\"black\"/>\n";
  s << "  <circle class=\"endpoint\" cx=\"" << x(1) << "\" cy=\"" << y(v1)
    << "\" r=\"4\" fill=\"black\"/>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace mcu
