#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mcu/curves.hpp"
#include "mcu/eval.hpp"
#include "mcu/mlp.hpp"
#include "mcu/optim.hpp"
#include "mcu/unlearn.hpp"

namespace mcu {

enum class Setting {
  rand, rand_cl, rand_so, cl_non_cl, fo_so,
  met, met_cl, met_so, met_cl_non_cl, met_fo_so
};

Setting parse_setting(const std::string& name);
std::string to_string(Setting s);
inline constexpr Setting kAllSettings[] = {
    Setting::rand, Setting::rand_cl, Setting::rand_so, Setting::cl_non_cl, Setting::fo_so,
    Setting::met,  Setting::met_cl,  Setting::met_so,  Setting::met_cl_non_cl, Setting::met_fo_so};
/// Settings whose endpoints come from two different methods.
bool is_method_setting(Setting s);

struct DataConfig {
  std::string kind = "moons";  // moons, blobs or idx
  std::size_t n = 400;
  double noise = 0.1;
  std::size_t classes = 2;
  double spread = 0.5;
  std::string images;
  std::string labels;
  std::size_t limit = 1000;
  double forget_fraction = 0.02;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct BaseConfig {
  TrainSchedule schedule;
  double accuracy_floor = 0.97;
  std::uint64_t seed = 0;
};

struct CurveConfig {
  int steps = 500;
  bool inherit_optimizer = true;  // use endpoint 1's optimizer
  OptimizerConfig optimizer;      // used when not inherited
  bool arclength = false;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  Setting setting = Setting::rand;
  std::vector<UnlearnMethod> methods{UnlearnMethod::gd};
  std::pair<std::uint64_t, std::uint64_t> seeds{1, 2};
  std::vector<CurveKind> curves{CurveKind::linear, CurveKind::bezier};
  int n_points = kDefaultCurvePoints;
  double tau = kDefaultBarrierTolerance;
  double forget_quality_threshold = kForgetQualityThreshold;
  int replicates = 1;
  ZrfReference zrf_reference = ZrfReference::random;
  ForgetStatistic forget_statistic = ForgetStatistic::xent;

  DataConfig data;
  std::vector<std::size_t> hidden{16, 16};
  Activation activation = Activation::relu;
  BaseConfig base;
  BaseConfig retrain{TrainSchedule{}, 0.0, 1};
  /// Template for both endpoints; method, seed, curriculum and optimizer are set per endpoint.
  UnlearnConfig unlearn;
  CurriculumDirection curriculum = CurriculumDirection::ascending;
  /// Optimizer used by endpoints the setting marks as second-order.
  OptimizerConfig second_order{OptimizerKind::so_diag, 0.01};
  CurveConfig curve;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// How one endpoint of a setting is produced.
struct EndpointPlan {
  UnlearnMethod method = UnlearnMethod::gd;
  std::uint64_t seed = 0;
  bool curriculum = false;
  bool second_order = false;
};

std::pair<EndpointPlan, EndpointPlan> endpoint_plans(const ExperimentConfig& cfg);
UnlearnConfig endpoint_config(const ExperimentConfig& cfg, const EndpointPlan& plan);
MlpArch experiment_arch(const ExperimentConfig& cfg, std::size_t input_dim, std::size_t classes);

/// Flat "section.key" -> value map in file order of keys.
using KeyValues = std::map<std::string, std::string>;

/// Parses "[section]" headers and "key = value" lines; '#' starts a comment.
KeyValues parse_key_values(const std::string& text, const std::string& source = "<config>");
/// Applies known keys on top of `base`; unknown keys are a ConfigError.
ExperimentConfig config_from_key_values(const KeyValues& kv, ExperimentConfig base = {});
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const ExperimentConfig& cfg);
/// FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Shortest decimal that round-trips a double.
std::string format_double(double v);

}  // namespace mcu
