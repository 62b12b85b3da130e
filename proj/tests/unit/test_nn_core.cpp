#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mcu/autodiff.hpp"
#include "mcu/error.hpp"
#include "mcu/losses.hpp"
#include "mcu/mlp.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

mcu::ad::Var scalar_param(mcu::ad::Tape& tape, float v) {
  return tape.parameter(mcu::Tensor(mcu::Shape{1}, std::vector<float>{v}));
}

}  // namespace

TEST_CASE("forward_logits: identity and zero weights") {
  mcu::MlpArch arch{{2, 2}, mcu::Activation::relu};
  mcu::MlpModel model{arch, mcu::ParamVector{{1, 0, 0, 1, 0, 0}, arch.layout()}};
  const mcu::Tensor x(mcu::Shape{1, 2}, std::vector<float>{1, 2});
  CHECK(mcu::forward_logits(model, x).data == std::vector<float>{1, 2});

  mcu::MlpArch deep{{2, 5, 3}, mcu::Activation::tanh};
  mcu::MlpModel zero{deep, mcu::ParamVector{std::vector<float>(deep.param_count()), deep.layout()}};
  const auto out = mcu::forward_logits(zero, testing::random_tensor({4, 2}, 9));
  for (float v : out.data) CHECK(v == 0.0f);
}

TEST_CASE("forward_logits matches a straight-line forward pass") {
  for (auto act : {mcu::Activation::relu, mcu::Activation::tanh}) {
    const mcu::MlpArch arch{{2, 16, 2}, act};
    const auto model = mcu::init_mlp(arch, 42);
    const auto x = testing::random_tensor({6, 2}, 5);
    const auto got = mcu::forward_logits(model, x);
    const auto want = oracle::mlp_logits(arch.layer_dims, testing::to_double(model.params.values),
                                         act == mcu::Activation::tanh, testing::to_double(x.data), 6);
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK_THAT(got.data[i], WithinAbs(want[i], 1e-5));
    }
  }
}

TEST_CASE("forward_logits rejects a wrong input width") {
  const auto model = mcu::init_mlp(testing::small_arch(), 1);
  CHECK_THROWS_AS(mcu::forward_logits(model, mcu::Tensor(mcu::Shape{2, 3})), mcu::DimensionError);
}

TEST_CASE("parameter count and layout") {
  const mcu::MlpArch arch{{2, 3, 2}, mcu::Activation::relu};
  CHECK(arch.param_count() == 17);
  const auto layout = arch.layout();
  CHECK(layout->total() == 17);
  CHECK(layout->contiguous());
  CHECK(layout->slots.size() == 4);
  CHECK(layout->slots[0].name == "W0");
  CHECK(layout->slots[0].shape == mcu::Shape{2, 3});
  CHECK(layout->slots[3].offset == 15);
  CHECK(layout->slot_name(16) == "b1");
  CHECK_THROWS_AS(mcu::MlpArch({{4}, mcu::Activation::relu}).validate(), mcu::ConfigError);
  CHECK_THROWS_AS(mcu::MlpArch({{4, 0, 2}, mcu::Activation::relu}).validate(), mcu::ConfigError);
}

TEST_CASE("flatten and unflatten round-trip bit-exactly") {
  auto model = mcu::init_mlp(mcu::MlpArch{{3, 7, 4, 2}, mcu::Activation::tanh}, 3);
  const auto v = mcu::flatten(model);
  mcu::unflatten(model, v);
  CHECK(mcu::flatten(model).values == v.values);
  CHECK_THROWS_AS(mcu::unflatten(model, mcu::make_flat(std::vector<float>(3))), mcu::DimensionError);
  const auto arch = mcu::arch_from_layout(*model.arch.layout(), mcu::Activation::tanh);
  CHECK(arch == model.arch);
}

TEST_CASE("initialization is Glorot-uniform with zero biases") {
  const mcu::MlpArch arch{{4, 6, 3}, mcu::Activation::relu};
  const auto a = mcu::init_mlp(arch, 11);
  const auto b = mcu::init_mlp(arch, 11);
  CHECK(a.params.values == b.params.values);
  const double bound0 = std::sqrt(6.0 / (4 + 6));
  for (std::size_t i = 0; i < 24; ++i) CHECK(std::abs(a.params.values[i]) <= bound0);
  for (std::size_t i = 24; i < 30; ++i) CHECK(a.params.values[i] == 0.0f);
}

TEST_CASE("softmax_xent values") {
  const std::vector<int> y0{0};
  CHECK_THAT(mcu::softmax_xent(mcu::Tensor({1, 2}, {0, 0}), y0), WithinRel(std::log(2.0), 1e-12));
  const double sat = mcu::softmax_xent(mcu::Tensor({1, 2}, {1000, 0}), y0);
  CHECK(std::isfinite(sat));
  CHECK(sat >= 0.0);
  CHECK(sat < 1e-12);

  const auto logits = testing::random_tensor({8, 3}, 21, 2.0);
  const auto labels = testing::random_labels(8, 3, 22);
  const double want = oracle::mean_xent(testing::to_double(logits.data), labels, 3);
  CHECK_THAT(mcu::softmax_xent(logits, labels), WithinRel(want, 1e-5));

  const std::vector<int> bad{2};
  CHECK_THROWS_AS(mcu::softmax_xent(mcu::Tensor({1, 2}, {0, 0}), bad), mcu::IndexError);
}

TEST_CASE("kl_divergence values") {
  const auto p = testing::random_tensor({5, 4}, 31);
  CHECK(mcu::kl_divergence(p, p) == 0.0);
  CHECK_THAT(mcu::kl_divergence(mcu::Tensor({1, 2}, {10, -10}), mcu::Tensor({1, 2}, {0, 0})),
             WithinAbs(std::log(2.0), 1e-6));
  const auto q = testing::random_tensor({5, 4}, 32);
  const double want = oracle::mean_kl(testing::to_double(p.data), testing::to_double(q.data), 4);
  CHECK_THAT(mcu::kl_divergence(p, q), WithinRel(want, 1e-5));
  CHECK(mcu::kl_divergence(q, p) >= 0.0);
  CHECK_THROWS_AS(mcu::kl_divergence(p, mcu::Tensor({5, 3})), mcu::DimensionError);
}

TEST_CASE("graph losses agree with plain evaluation") {
  const auto logits = testing::random_tensor({6, 3}, 41);
  const auto other = testing::random_tensor({6, 3}, 42);
  const auto labels = testing::random_labels(6, 3, 43);
  mcu::ad::Tape tape;
  const auto var = tape.parameter(logits);
  CHECK_THAT(mcu::softmax_xent(var, labels).value().item(),
             WithinRel(mcu::softmax_xent(logits, labels), 1e-6));
  CHECK_THAT(mcu::kl_divergence(var, other).value().item(),
             WithinRel(mcu::kl_divergence(logits, other), 1e-5));
}

TEST_CASE("npo_loss equals (2/beta) ln 2 at the reference") {
  const auto logits = testing::random_tensor({5, 2}, 51);
  const auto labels = testing::random_labels(5, 2, 52);
  std::vector<float> ref(5);
  for (std::size_t i = 0; i < 5; ++i) {
    ref[i] = static_cast<float>(-mcu::per_sample_xent(logits, labels)[i]);
  }
  mcu::ad::Tape tape;
  const float beta = 0.1f;
  const auto loss = mcu::npo_loss(tape.parameter(logits), labels, ref, beta);
  CHECK_THAT(loss.value().item(), WithinRel(2.0 / beta * std::log(2.0), 1e-5));
}

TEST_CASE("backward of theta squared") {
  mcu::ad::Tape tape;
  const auto theta = scalar_param(tape, 3.0f);
  const auto unused = scalar_param(tape, 5.0f);
  const auto loss = mcu::ad::sum(mcu::ad::mul(theta, theta));
  const std::vector<mcu::ad::Var> wrt{theta, unused};
  const auto g = tape.grad(loss, wrt);
  CHECK(g[0].value().data[0] == 6.0f);
  CHECK(g[1].value().data[0] == 0.0f);
  CHECK_THROWS_AS(tape.grad(loss, wrt), mcu::ContractViolation);
}

TEST_CASE("backward on a non-scalar is a contract violation") {
  mcu::ad::Tape tape;
  const auto v = tape.parameter(mcu::Tensor(mcu::Shape{3}, 1.0f));
  const std::vector<mcu::ad::Var> wrt{v};
  CHECK_THROWS_AS(tape.grad(mcu::ad::scale(v, 2.0f), wrt), mcu::ContractViolation);
}

TEST_CASE("second derivative through create_graph") {
  mcu::ad::Tape tape;
  const auto theta = scalar_param(tape, 2.0f);
  const auto cube = mcu::ad::sum(mcu::ad::mul(mcu::ad::mul(theta, theta), theta));
  const std::vector<mcu::ad::Var> wrt{theta};
  const auto g = tape.grad(cube, wrt, true)[0];
  CHECK(g.value().data[0] == 12.0f);
  const auto h = tape.grad(mcu::ad::sum(g), wrt)[0];
  CHECK(h.value().data[0] == 12.0f);
}

TEST_CASE("autodiff gradient of a 2-8-2 MLP matches central differences") {
  const mcu::MlpArch arch{{2, 8, 2}, mcu::Activation::tanh};
  const auto model = mcu::init_mlp(arch, 7);
  const auto x = testing::random_tensor({4, 2}, 8);
  const auto labels = testing::random_labels(4, 2, 9);
  const auto vg = mcu::value_and_grad(
      [&](const mcu::ad::Var& p) {
        return mcu::softmax_xent(mcu::forward_logits(arch, p, x), labels);
      },
      model.params);
  auto params = testing::to_double(model.params.values);
  const auto xd = testing::to_double(x.data);
  auto loss = [&](const std::vector<double>& p) {
    return oracle::mean_xent(oracle::mlp_logits(arch.layer_dims, p, true, xd, 4), labels, 2);
  };
  const double h = 1e-3;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = loss(params);
    params[i] = keep - h;
    const double down = loss(params);
    params[i] = keep;
    const double fd = (up - down) / (2 * h);
    CHECK(std::abs(vg.grad.values[i] - fd) <= 1e-6 + 1e-4 * std::abs(fd));
  }
}

TEST_CASE("gradients are bit-identical across runs") {
  const auto arch = testing::small_arch(2, 16, 2);
  const auto model = mcu::init_mlp(arch, 13);
  const auto x = testing::random_tensor({32, 2}, 14);
  const auto labels = testing::random_labels(32, 2, 15);
  auto run = [&] {
    return mcu::value_and_grad(
        [&](const mcu::ad::Var& p) {
          return mcu::softmax_xent(mcu::forward_logits(arch, p, x), labels);
        },
        model.params);
  };
  const auto a = run(), b = run();
  CHECK(a.value == b.value);
  CHECK(a.grad.values == b.grad.values);
}

TEST_CASE("finite-check mode flags a non-finite value") {
  mcu::ad::Tape tape;
  tape.set_check_finite(true);
  const auto v = tape.parameter(mcu::Tensor(mcu::Shape{1}, 100.0f));
  CHECK_THROWS_AS(mcu::ad::exp(v), mcu::NumericError);
}

TEST_CASE("no-grad guard produces constant nodes") {
  mcu::ad::Tape tape;
  const auto v = tape.parameter(mcu::Tensor(mcu::Shape{2}, 1.0f));
  mcu::ad::NoGradGuard guard(tape);
  CHECK_FALSE(mcu::ad::scale(v, 2.0f).requires_grad());
}
