#include <doctest.h>

#include <cmath>

#include "qnode/diff/layers.hpp"
#include "qnode/diff/params.hpp"
#include "qnode/diff/tensor.hpp"
#include "qnode/util/binary_io.hpp"
#include "test_support.hpp"

using namespace qnode;
using namespace qnode::diff;
using qnode::testing::error_kind_of;
using qnode::testing::GradCheck;
using qnode::testing::gradcheck;
using qnode::testing::random_parameter;
using qnode::testing::weighted_sum;

namespace {

constexpr int kInstances = 100;
constexpr double kTol = 1e-4;

// Random (r x c) with r, c in [1, 4].
Shape random_shape(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(1, 4);
  return {d(rng), d(rng)};
}

double worst_over_instances(const std::function<GradCheck(std::mt19937_64&, int)>& one) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int i = 0; i < kInstances; ++i) worst = std::max(worst, one(rng, i).max_rel_err);
  return worst;
}

}  // namespace

TEST_SUITE("diff") {

TEST_CASE("forward values") {
  CHECK(diff::tanh(Tensor::scalar(0.0)).item() == 0.0);
  std::mt19937_64 rng(1);
  const auto a = random_parameter({3, 2}, rng);
  const auto eye = Tensor::constant({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto p = matmul(eye, a);
  for (std::size_t i = 0; i < 6; ++i) CHECK(p.at(i) == a.at(i));
  CHECK(sum(Tensor::filled({2, 2}, 1.0)).item() == 4.0);
  CHECK(mean(Tensor::constant({1, 4}, {1, 2, 3, 6})).item() == 3.0);
  const auto c = concat({Tensor::constant({1, 2}, {1, 2}), Tensor::constant({1, 1}, {3})}, 1);
  CHECK(c.shape() == Shape{1, 3});
  CHECK(c.at(2) == 3.0);
  const auto s = slice(Tensor::constant({3, 2}, {1, 2, 3, 4, 5, 6}), 0, 1, 3);
  CHECK(s.shape() == Shape{2, 2});
  CHECK(s.at(0) == 3.0);
  const auto r = repeat_rows(Tensor::constant({1, 2}, {7, 8}), 3);
  CHECK(r.shape() == Shape{3, 2});
  CHECK(r.at(5) == 8.0);
}

TEST_CASE("shape and value errors") {
  const auto a = Tensor::zeros({2, 3});
  const auto b = Tensor::zeros({3, 2});
  CHECK(error_kind_of([&] { add(a, b); }) == ErrorKind::ShapeMismatch);
  CHECK(error_kind_of([&] { matmul(a, a); }) == ErrorKind::ShapeMismatch);
  CHECK(error_kind_of([&] { diff::log(Tensor::scalar(-1.0)); }) == ErrorKind::NonFinite);
  CHECK(error_kind_of([&] { diff::exp(Tensor::scalar(1e6)); }) == ErrorKind::NonFinite);
}

TEST_CASE("square derivative") {
  auto x = Tensor::parameter({}, {3.0});
  Tape tape;
  {
    Tape::Scope scope(tape);
    tape.backward(square(x));
  }
  CHECK(x.grad()[0] == 6.0);
}

TEST_CASE("backward contracts") {
  auto x = Tensor::parameter({1, 2}, {0.5, -0.5});
  auto unused = Tensor::parameter({1, 1}, {1.0});
  Tape tape;
  Tensor loss;
  {
    Tape::Scope scope(tape);
    loss = sum(square(x));
    tape.backward(loss);
  }
  CHECK(x.grad() == std::vector<double>{1.0, -1.0});
  CHECK(unused.grad() == std::vector<double>{0.0});
  // Constant graph: no tracked path, zero gradients, no error.
  Tape other;
  {
    Tape::Scope scope(other);
    other.backward(sum(Tensor::constant({1, 2}, {1, 2})));
  }
  Tape third;
  CHECK(error_kind_of([&] { third.backward(loss); }) == ErrorKind::MalformedTape);
}

TEST_CASE("gradient checks of primitives") {
  SUBCASE("add/sub/mul") {
    for (int op = 0; op < 3; ++op) {
      const double worst = worst_over_instances([&](std::mt19937_64& rng, int i) {
        const Shape s = random_shape(rng);
        auto a = random_parameter(s, rng);
        auto b = (i % 4 == 0) ? random_parameter({1}, rng) : random_parameter(s, rng);
        return gradcheck({a, b}, [&] {
          const Tensor o = op == 0 ? add(a, b) : op == 1 ? sub(b, a) : mul(a, b);
          return weighted_sum(o, i);
        });
      });
      CHECK(worst < kTol);
    }
  }
  SUBCASE("matmul") {
    const double worst = worst_over_instances([](std::mt19937_64& rng, int i) {
      std::uniform_int_distribution<std::size_t> d(1, 5);
      const std::size_t m = d(rng), k = d(rng), n = d(rng);
      auto a = random_parameter({m, k}, rng);
      auto b = random_parameter({k, n}, rng);
      return gradcheck({a, b}, [&] { return weighted_sum(matmul(a, b), i); });
    });
    CHECK(worst < kTol);
  }
  SUBCASE("unary") {
    using Fn = Tensor (*)(const Tensor&);
    const std::vector<std::pair<Fn, std::pair<double, double>>> ops = {
        {[](const Tensor& t) { return diff::tanh(t); }, {-2.0, 2.0}},
        {[](const Tensor& t) { return sigmoid(t); }, {-3.0, 3.0}},
        {[](const Tensor& t) { return diff::exp(t); }, {-2.0, 2.0}},
        {[](const Tensor& t) { return diff::log(t); }, {0.2, 3.0}},
        {[](const Tensor& t) { return square(t); }, {-2.0, 2.0}},
        {[](const Tensor& t) { return scale(t, -1.7); }, {-2.0, 2.0}},
    };
    for (const auto& [fn, range] : ops) {
      const double worst = worst_over_instances([&](std::mt19937_64& rng, int i) {
        auto a = random_parameter(random_shape(rng), rng, range.first, range.second);
        return gradcheck({a}, [&] { return weighted_sum(fn(a), i); });
      });
      CHECK(worst < kTol);
    }
  }
  SUBCASE("reductions") {
    const double worst = worst_over_instances([](std::mt19937_64& rng, int i) {
      auto a = random_parameter(random_shape(rng), rng);
      return gradcheck({a}, [&] { return i % 2 ? sum(square(a)) : mean(square(a)); });
    });
    CHECK(worst < kTol);
  }
  SUBCASE("concat and slice") {
    const double worst = worst_over_instances([](std::mt19937_64& rng, int i) {
      const std::size_t axis = i % 2;
      Shape s1 = random_shape(rng), s2 = s1;
      s2[axis] = 1 + (s1[axis] % 3);
      auto a = random_parameter(s1, rng);
      auto b = random_parameter(s2, rng);
      return gradcheck({a, b}, [&] {
        const Tensor c = concat({a, b}, axis);
        const std::size_t end = c.shape()[axis];
        return weighted_sum(slice(c, axis, end > 1 ? 1 : 0, end), i);
      });
    });
    CHECK(worst < kTol);
  }
  SUBCASE("clamp") {
    const double worst = worst_over_instances([](std::mt19937_64& rng, int i) {
      // Values kept away from the clamp boundaries, where the derivative jumps.
      std::vector<double> v = qnode::testing::random_values(8, rng, -3.0, 3.0);
      for (auto& x : v) {
        if (std::abs(std::abs(x) - 1.0) < 0.05) x *= 1.2;
      }
      auto a = Tensor::parameter({2, 4}, v);
      return gradcheck({a}, [&] { return weighted_sum(clamp(a, -1.0, 1.0), i); });
    });
    CHECK(worst < kTol);
  }
  SUBCASE("repeat_rows") {
    const double worst = worst_over_instances([](std::mt19937_64& rng, int i) {
      auto a = random_parameter({1, 1 + static_cast<std::size_t>(i % 4)}, rng);
      return gradcheck({a}, [&] { return weighted_sum(repeat_rows(a, 1 + i % 5), i); });
    });
    CHECK(worst < kTol);
  }
}

TEST_CASE("MLP") {
  const std::vector<std::size_t> widths{3, 48, 3};
  ParamStore zero;
  for (const auto& s : mlp_arch("m", widths)) zero.add(s.name, s.shape, std::vector<double>(shape_size(s.shape), 0.0));
  const auto x = Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto yz = mlp_forward(zero, "m", x, widths);
  for (double v : yz.values()) CHECK(v == 0.0);

  ParamStore lin = init_params(mlp_arch("l", {3, 2}), 5);
  const auto y = mlp_forward(lin, "l", x, {3, 2});
  const auto ref = add(matmul(x, lin.get("l.W0")), repeat_rows(lin.get("l.b0"), 2));
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.at(i) == ref.at(i));

  ParamStore net = init_params(mlp_arch("n", widths), 6);
  for (auto& e : net.entries()) {
    std::mt19937_64 rng(e.name.size());
    for (auto& v : e.value.mutable_values()) v += 0.1 * std::uniform_real_distribution<double>(-1, 1)(rng);
  }
  std::mt19937_64 rng(8);
  const auto in = Tensor::constant({4, 3}, qnode::testing::random_values(12, rng));
  const auto out = mlp_forward(net, "n", in, widths);
  for (double v : out.values()) CHECK(std::isfinite(v));
  std::vector<Tensor> leaves;
  for (auto& e : net.entries()) leaves.push_back(e.value);
  CHECK(gradcheck(leaves, [&] { return weighted_sum(mlp_forward(net, "n", in, widths), 3); }).max_rel_err < kTol);
}

TEST_CASE("GRU cell") {
  ParamStore zero;
  for (const auto& s : gru_arch("g", 3, 5)) zero.add(s.name, s.shape, std::vector<double>(shape_size(s.shape), 0.0));
  const auto x = Tensor::constant({1, 3}, {0.3, -0.1, 0.7});
  const auto hz = gru_cell(zero, "g", x, Tensor::zeros({1, 5}));
  for (double v : hz.values()) CHECK(v == 0.0);

  std::mt19937_64 rng(17);
  ParamStore p;
  for (const auto& s : gru_arch("g", 3, 5)) p.add(s.name, s.shape, qnode::testing::random_values(shape_size(s.shape), rng, -2, 2));
  for (int trial = 0; trial < 50; ++trial) {
    const auto h = Tensor::constant({2, 5}, qnode::testing::random_values(10, rng, -0.999, 0.999));
    const auto xi = Tensor::constant({2, 3}, qnode::testing::random_values(6, rng, -5, 5));
    const auto hn = gru_cell(p, "g", xi, h);
    for (double v : hn.values()) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
  }

  const auto seq = Tensor::constant({3, 3}, qnode::testing::random_values(9, rng));
  std::vector<Tensor> leaves;
  for (auto& e : p.entries()) {
    for (auto& v : e.value.mutable_values()) v *= 0.5;
    leaves.push_back(e.value);
  }
  auto unrolled = [&] {
    Tensor h = Tensor::zeros({1, 5});
    for (std::size_t t = 0; t < 3; ++t) h = gru_cell(p, "g", slice(seq, 0, t, t + 1), h);
    return weighted_sum(h, 1);
  };
  CHECK(gradcheck(leaves, unrolled).max_rel_err < kTol);
}

TEST_CASE("RNN cell gradient") {
  std::mt19937_64 rng(23);
  ParamStore p = init_params(rnn_arch("r", 3, 4), 2);
  std::vector<Tensor> leaves;
  for (auto& e : p.entries()) leaves.push_back(e.value);
  const auto seq = Tensor::constant({3, 3}, qnode::testing::random_values(9, rng));
  auto unrolled = [&] {
    Tensor h = Tensor::zeros({1, 4});
    for (std::size_t t = 0; t < 3; ++t) h = rnn_cell(p, "r", slice(seq, 0, t, t + 1), h);
    return weighted_sum(h, 2);
  };
  CHECK(gradcheck(leaves, unrolled).max_rel_err < kTol);
}

TEST_CASE("Adam") {
  ParamStore s;
  s.add("w", {1, 3}, {1.0, -2.0, 0.5});
  const auto before = std::vector<double>(s.get("w").values().begin(), s.get("w").values().end());
  adam_step(s, {{"w", {0.0, 0.0, 0.0}}}, {0.1});
  CHECK(std::vector<double>(s.get("w").values().begin(), s.get("w").values().end()) == before);

  ParamStore t;
  t.add("w", {1, 3}, {0.0, 0.0, 0.0});
  adam_step(t, {{"w", {3.0, -0.02, 1e-3}}}, {0.01});
  CHECK(t.get("w").at(0) == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(t.get("w").at(1) == doctest::Approx(0.01).epsilon(1e-5));
  CHECK(t.get("w").at(2) == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(t.step() == 1);

  ParamStore q;
  q.add("w", {1}, {0.0});
  for (int i = 0; i < 500; ++i) {
    const double w = q.get("w").at(0);
    adam_step(q, {{"w", {2.0 * (w - 5.0)}}}, {0.1});
  }
  CHECK(std::abs(q.get("w").at(0) - 5.0) < 1e-2);

  CHECK(error_kind_of([&] { adam_step(q, {{"w", {1.0, 2.0}}}, {0.1}); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("gradient clipping") {
  GradientMap g{{"a", {3.0}}, {"b", {4.0}}};
  CHECK(global_norm(g) == 5.0);
  clip_global_norm(g, 1.0);
  CHECK(global_norm(g) == doctest::Approx(1.0));
  CHECK(g["a"][0] == doctest::Approx(0.6));
}

TEST_CASE("initialization") {
  const auto arch = mlp_arch("m", {3, 48, 3});
  const ParamStore a = init_params(arch, 42);
  const ParamStore b = init_params(arch, 42);
  CHECK(a == b);
  CHECK(!(a == init_params(arch, 43)));
  for (const auto& spec : arch) {
    const auto& t = a.get(spec.name);
    if (spec.role == ParamRole::Bias) {
      for (double v : t.values()) CHECK(v == 0.0);
    } else {
      const double bound = std::sqrt(6.0 / static_cast<double>(spec.shape[0] + spec.shape[1]));
      for (double v : t.values()) CHECK(std::abs(v) <= bound);
    }
  }
}

TEST_CASE("QNP1 sections") {
  ParamStore s = init_params(mlp_arch("m", {2, 3, 1}), 1);
  adam_step(s, s.gradients(), {0.01});
  s.get("m.W0").mutable_values()[0] = 1.0 / 3.0;
  const auto bytes = encode_sections(store_sections(s, true));
  const ParamStore back = store_from_sections(decode_sections(bytes));
  CHECK(back == s);
  CHECK(back.step() == s.step());

  CHECK(error_kind_of([&] { decode_sections(std::span(bytes).first(bytes.size() - 3)); }) ==
        ErrorKind::CorruptPayload);
  CHECK(error_kind_of([&] { decode_sections(std::span(bytes).first(3)); }) == ErrorKind::CorruptPayload);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK(error_kind_of([&] { decode_sections(trailing); }) == ErrorKind::CorruptPayload);
  auto wrong = bytes;
  wrong[0] = 'X';
  CHECK(error_kind_of([&] { decode_sections(wrong); }) == ErrorKind::FormatVersionMismatch);
}

}  // TEST_SUITE
