#include <cmath>
#include <sstream>

#include "doctest.h"

#include "apc/common/errors.hpp"
#include "apc/nn/adam.hpp"
#include "apc/nn/batch.hpp"
#include "apc/nn/categorical.hpp"
#include "apc/nn/finite_diff.hpp"
#include "apc/nn/network.hpp"
#include "apc/nn/serialize.hpp"

using namespace apc;
using namespace apc::nn;

namespace {

NetworkSpec linear_spec(int in, int out) { return {{in, out}, {Activation::kLinear}, std::nullopt}; }

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vector random_vector(Rng& rng, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = 2.0 * uniform01(rng) - 1.0;
  return v;
}

}  // namespace

TEST_CASE("spec validation and manifest sizes") {
  NetworkSpec spec{{4, 8, 2}, {Activation::kRelu, Activation::kLinear}, std::nullopt};
  CHECK(param_count(spec) == 4 * 8 + 8 + 8 * 2 + 2);

  NetworkSpec rec{{3, 5, 2}, {Activation::kTanh, Activation::kLinear}, 0};
  CHECK(param_count(rec) == 4 * 5 * 3 + 4 * 5 * 5 + 4 * 5 + 5 * 2 + 2);

  CHECK_THROWS_AS((NetworkSpec{{3, 0}, {Activation::kLinear}, std::nullopt}.validate()), ConfigError);
  CHECK_THROWS_AS((NetworkSpec{{3, 2}, {}, std::nullopt}.validate()), ConfigError);
  CHECK_THROWS_AS((NetworkSpec{{3, 2}, {Activation::kRelu}, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((NetworkSpec{{3, 2}, {Activation::kTanh}, 1}.validate()), ConfigError);
}

TEST_CASE("pack(unpack(v)) is the identity for random specs") {
  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    NetworkSpec spec;
    const int layers = 1 + uniform_int(rng, 4);
    for (int i = 0; i <= layers; ++i) spec.widths.push_back(1 + uniform_int(rng, 6));
    for (int i = 0; i < layers; ++i) spec.activations.push_back(static_cast<Activation>(uniform_int(rng, 4)));
    if (uniform01(rng) < 0.5) {
      const int r = uniform_int(rng, layers);
      spec.recurrent_layer = r;
      spec.activations[r] = Activation::kTanh;
    }
    ParamVector pv(spec);
    for (double& v : pv.values()) v = standard_normal(rng);
    CHECK(ParamVector::pack(spec, pv.unpack()) == pv);
  }
}

TEST_CASE("dense_forward identity, zero and hand-computed cases") {
  ParamVector id(linear_spec(2, 2));
  auto layers = id.unpack();
  layers[0].weights = Eigen::MatrixXd::Identity(2, 2);
  id = ParamVector::pack(id.spec(), layers);
  auto fp = dense_forward(id, vec({3, -1}));
  CHECK(fp.output[0] == 3.0);
  CHECK(fp.output[1] == -1.0);

  ParamVector zero(NetworkSpec{{3, 5, 2}, {Activation::kRelu, Activation::kRelu}, std::nullopt});
  CHECK(dense_eval(zero, vec({1, -2, 3})).isZero(0.0));

  // [2, 2, 1]: W1 = [[1, 2], [-1, 0.5]], b1 = [0.5, -1], relu; W2 = [2, -3], b2 = 0.25.
  // x = [1, 2]: z1 = [5.5, -1] -> h = [5.5, 0] -> y = 11.25.
  NetworkSpec spec{{2, 2, 1}, {Activation::kRelu, Activation::kLinear}, std::nullopt};
  std::vector<LayerParams> lp(2);
  lp[0].weights.resize(2, 2);
  lp[0].weights << 1, 2, -1, 0.5;
  lp[0].bias = vec({0.5, -1});
  lp[1].weights.resize(1, 2);
  lp[1].weights << 2, -3;
  lp[1].bias = vec({0.25});
  auto net = ParamVector::pack(spec, lp);
  CHECK(dense_eval(net, vec({1, 2}))[0] == doctest::Approx(11.25).epsilon(1e-15));

  CHECK_THROWS_AS(dense_forward(net, vec({1, 2, 3})), ConfigError);
}

TEST_CASE("recurrent_step zero case, recurrence and hand-computed gate arithmetic") {
  NetworkSpec spec{{2, 3, 2}, {Activation::kTanh, Activation::kLinear}, 0};
  ParamVector zero(spec);
  auto out = recurrent_step(zero, vec({0.7, -0.2}), LstmState::zeros(3));
  CHECK(out.output.isZero(0.0));
  CHECK(out.hidden.h.isZero(0.0));
  CHECK(out.hidden.c.isZero(0.0));

  Rng rng(3);
  auto net = init_params(spec, rng);
  for (double& v : net.values()) v += 0.1;
  const Vector x = Vector::Zero(2);
  auto s1 = recurrent_step(net, x, LstmState::zeros(3));
  auto s2 = recurrent_step(net, x, s1.hidden);
  CHECK((s1.output - s2.output).norm() > 1e-6);
  CHECK((s1.hidden.h - s2.hidden.h).norm() > 1e-6);

  CHECK_THROWS_AS(recurrent_step(net, x, LstmState::zeros(4)), ConfigError);

  // Single LSTM unit, x = 1, h = 0.5, c = 0.2, gates in order [i, f, g, o].
  NetworkSpec cell{{1, 1}, {Activation::kTanh}, 0};
  std::vector<LayerParams> lp(1);
  lp[0].weights = vec({0.5, -0.3, 0.8, 0.1});
  lp[0].recurrent_weights = vec({0.2, 0.4, -0.6, 0.3});
  lp[0].bias = vec({0.1, 0.2, 0.0, -0.1});
  auto unit = ParamVector::pack(cell, lp);
  LstmState h0{vec({0.5}), vec({0.2})};
  auto r = recurrent_step(unit, vec({1.0}), h0);
  CHECK(r.hidden.c[0] == doctest::Approx(0.41377687128604).epsilon(1e-12));
  CHECK(r.hidden.h[0] == doctest::Approx(0.2104977629181962).epsilon(1e-12));
  CHECK(r.output[0] == r.hidden.h[0]);
}

TEST_CASE("backward analytic cases") {
  // y = w * x with w = 3, x = 1; loss y^2 has dL/dw = 2 * 3 = 6.
  ParamVector net(linear_spec(1, 1));
  net.values()[0] = 3.0;
  auto fp = dense_forward(net, vec({1.0}));
  auto g = backward(fp.tape, Vector::Constant(1, 2.0 * fp.output[0]));
  CHECK(g.params[0] == 6.0);
  CHECK(g.params[1] == 6.0);  // bias

  auto fp2 = dense_forward(net, vec({1.0}));
  auto g2 = backward(fp2.tape, Vector::Zero(1));
  for (double v : g2.params) CHECK(v == 0.0);

  CHECK_THROWS_AS(backward(fp2.tape, Vector::Zero(1)), std::logic_error);
  Tape empty;
  CHECK_THROWS_AS(backward(empty, Vector::Zero(1)), std::logic_error);
}

TEST_CASE("backward matches central differences on small dense and recurrent nets") {
  Rng rng(11);
  const double eps = 1e-4;
  SUBCASE("dense [4, 8, 2] with elu and tanh") {
    NetworkSpec spec{{4, 8, 2}, {Activation::kElu, Activation::kTanh}, std::nullopt};
    auto net = init_params(spec, rng);
    for (double& v : net.values()) v += 0.05 * standard_normal(rng);
    const Vector x = random_vector(rng, 4);
    const Vector target = random_vector(rng, 2);
    auto loss = [&](std::span<const double> p) {
      ParamVector q(spec, {p.begin(), p.end()});
      return 0.5 * (dense_eval(q, x) - target).squaredNorm();
    };
    auto fp = dense_forward(net, x);
    auto g = backward(fp.tape, Vector(fp.output - target));
    auto fd = finite_diff_grad(loss, net.values(), eps);
    CHECK(max_relative_error(g.params, fd, 1e-3) < 1e-4);
    CHECK(norm_relative_error(g.params, fd) < 1e-6);
  }
  SUBCASE("recurrent [3, lstm 4, 2] over three steps") {
    NetworkSpec spec{{3, 4, 2}, {Activation::kTanh, Activation::kLinear}, 0};
    auto net = init_params(spec, rng);
    std::vector<Vector> xs = {random_vector(rng, 3), random_vector(rng, 3), random_vector(rng, 3)};
    std::vector<Vector> ts = {random_vector(rng, 2), random_vector(rng, 2), random_vector(rng, 2)};
    auto loss = [&](std::span<const double> p) {
      ParamVector q(spec, {p.begin(), p.end()});
      LstmState h = LstmState::zeros(4);
      double l = 0.0;
      for (int t = 0; t < 3; ++t) {
        auto r = recurrent_step(q, xs[t], h);
        h = r.hidden;
        l += 0.5 * (r.output - ts[t]).squaredNorm();
      }
      return l;
    };
    Tape tape;
    LstmState h = LstmState::zeros(4);
    std::vector<Vector> dys;
    for (int t = 0; t < 3; ++t) {
      auto r = recurrent_step(net, xs[t], h, &tape);
      h = r.hidden;
      dys.push_back(r.output - ts[t]);
    }
    auto g = backward(tape, dys);
    CHECK(tape.consumed());
    auto fd = finite_diff_grad(loss, net.values(), eps);
    CHECK(max_relative_error(g.params, fd, 1e-3) < 1e-4);
  }
}

TEST_CASE("input gradient flows back through the network") {
  Rng rng(5);
  NetworkSpec spec{{3, 6, 2}, {Activation::kTanh, Activation::kLinear}, std::nullopt};
  auto net = init_params(spec, rng);
  const Vector x = random_vector(rng, 3);
  auto fp = dense_forward(net, x);
  auto g = backward(fp.tape, Vector::Ones(2));
  auto fd = finite_diff_grad(
      [&](std::span<const double> xi) {
        return dense_eval(net, Eigen::Map<const Vector>(xi.data(), 3)).sum();
      },
      std::span<const double>(x.data(), 3), 1e-5);
  CHECK(max_relative_error(std::span<const double>(g.inputs[0].data(), 3), fd, 1e-3) < 1e-6);
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters and moments untouched") {
    auto s = AdamState::zeros(3, 1e-3);
    std::vector<double> p = {1.0, -2.0, 3.0};
    std::vector<double> g(3, 0.0);
    adam_step(s, p, g);
    CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
    CHECK(s.first_moment == std::vector<double>(3, 0.0));
    CHECK(s.second_moment == std::vector<double>(3, 0.0));
    CHECK(s.step_count == 1);
  }
  SUBCASE("first step moves by about the learning rate against the gradient sign") {
    auto s = AdamState::zeros(2, 0.01);
    std::vector<double> p = {0.0, 0.0};
    std::vector<double> g = {5.0, -0.2};
    adam_step(s, p, g);
    CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-6));
  }
  SUBCASE("100 steps on x^2 from 5 with lr 0.1") {
    auto s = AdamState::zeros(1, 0.1);
    std::vector<double> x = {5.0};
    for (int i = 0; i < 100; ++i) {
      std::vector<double> g = {2.0 * x[0]};
      adam_step(s, x, g);
    }
    CHECK(std::abs(x[0]) < 0.5);
    // scalar reference loop evaluated independently
    CHECK(x[0] == doctest::Approx(-0.039004031223919475).epsilon(1e-9));
  }
  SUBCASE("non-finite gradient is rejected without touching state") {
    auto s = AdamState::zeros(2, 0.1);
    std::vector<double> p = {1.0, 1.0};
    std::vector<double> g = {1.0, std::nan("")};
    CHECK_THROWS_AS(adam_step(s, p, g), NumericError);
    CHECK(p == std::vector<double>{1.0, 1.0});
    CHECK(s.step_count == 0);
  }
}

TEST_CASE("categorical sampling") {
  Rng rng(42);
  int zero_count = 0;
  for (int i = 0; i < 10000; ++i) zero_count += categorical_sample(vec({1e6, 0, 0, 0}), rng) == 0;
  CHECK(zero_count / 10000.0 > 0.999);

  std::array<int, 4> counts{};
  for (int i = 0; i < 100000; ++i) ++counts[categorical_sample(Vector::Zero(4), rng)];
  for (int c : counts) CHECK(std::abs(c / 100000.0 - 0.25) < 0.02);

  Rng a(9), b(9);
  const Vector logits = vec({0.3, -1.2, 2.0, 0.1});
  for (int i = 0; i < 200; ++i) CHECK(categorical_sample(logits, a) == categorical_sample(logits, b));

  CHECK_THROWS_AS(categorical_sample(vec({0.0, INFINITY}), rng), NumericError);
}

TEST_CASE("categorical log-probabilities") {
  CHECK(categorical_log_prob(Vector::Zero(4), 2) == doctest::Approx(std::log(0.25)).epsilon(1e-12));
  const double lp = categorical_log_prob(vec({10, 0, 0, 0}), 0);
  CHECK(lp < 0.0);
  CHECK(lp > -1e-3);
  CHECK_THROWS_AS(categorical_log_prob(Vector::Zero(4), 4), std::out_of_range);

  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector logits = 5.0 * random_vector(rng, 6);
    double total = 0.0;
    for (int i = 0; i < 6; ++i) total += std::exp(categorical_log_prob(logits, i));
    CHECK(std::abs(total - 1.0) < 1e-9);
  }

  const Vector logits = vec({0.4, -0.7, 1.3});
  auto g = categorical_log_prob_grad(logits, 1);
  auto fd = finite_diff_grad(
      [&](std::span<const double> z) {
        return categorical_log_prob(Eigen::Map<const Vector>(z.data(), 3), 1);
      },
      std::span<const double>(logits.data(), 3), 1e-5);
  CHECK(max_relative_error(std::span<const double>(g.data(), 3), fd, 1e-6) < 1e-8);
}

TEST_CASE("finite_diff_grad basics") {
  auto sq = finite_diff_grad([](std::span<const double> p) { return p[0] * p[0]; }, std::vector<double>{3.0}, 1e-4);
  CHECK(std::abs(sq[0] - 6.0) < 1e-6);
  auto lin = finite_diff_grad([](std::span<const double> p) { return 2.5 * p[0] - 4.0 * p[1]; },
                              std::vector<double>{1.0, -7.0}, 1e-4);
  CHECK(lin[0] == doctest::Approx(2.5).epsilon(1e-10));
  CHECK(lin[1] == doctest::Approx(-4.0).epsilon(1e-10));
}

TEST_CASE("APCP1 round trip is bit exact; truncation is reported") {
  Rng rng(123);
  NetworkSpec spec{{5, 7, 3, 2}, {Activation::kRelu, Activation::kTanh, Activation::kLinear}, 1};
  auto net = init_params(spec, rng);
  net.values()[0] = -0.0;
  net.values()[1] = 1e-310;  // subnormal
  std::stringstream ss;
  write_params(ss, net);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 5) == "APCP1");
  CHECK(bytes.size() == 5 + 4 * (1 + 4 + 3 + 1) + 8 * param_count(spec));
  // little-endian layer count
  CHECK(static_cast<unsigned char>(bytes[5]) == 3);
  CHECK(bytes[6] == 0);

  std::stringstream in(bytes);
  auto back = read_params(in);
  CHECK(back.spec() == spec);
  CHECK(std::memcmp(back.values().data(), net.values().data(), 8 * net.size()) == 0);

  std::stringstream trunc(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_params(trunc), FormatError);
  std::stringstream bad("APCQ1....");
  CHECK_THROWS_AS(read_params(bad), FormatError);
}

TEST_CASE("forward, backward and sampling are deterministic for a fixed seed") {
  auto run = [] {
    Rng rng(2024);
    NetworkSpec spec{{3, 4, 2}, {Activation::kTanh, Activation::kLinear}, 0};
    auto net = init_params(spec, rng);
    Tape tape;
    LstmState h = LstmState::zeros(4);
    std::vector<Vector> dys;
    std::vector<int> samples;
    for (int t = 0; t < 4; ++t) {
      auto r = recurrent_step(net, random_vector(rng, 3), h, &tape);
      h = r.hidden;
      samples.push_back(categorical_sample(r.output, rng));
      dys.push_back(r.output);
    }
    auto g = backward(tape, dys);
    return std::make_pair(g.params, samples);
  };
  auto a = run();
  auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("batch_forward matches column-by-column evaluation") {
  Rng rng(31);
  const NetworkSpec rec{{5, 7, 6, 4, 3}, {Activation::kRelu, Activation::kTanh, Activation::kElu, Activation::kLinear}, 1};
  const auto p = init_params(rec, rng);
  const Matrix x = Matrix::NullaryExpr(5, 4, [&] { return standard_normal(rng); });
  auto bh = BatchLstmState::zeros(6, 4);
  bh.h = Matrix::NullaryExpr(6, 4, [&] { return 0.5 * standard_normal(rng); });
  bh.c = Matrix::NullaryExpr(6, 4, [&] { return 0.5 * standard_normal(rng); });
  const auto h0 = bh;
  Matrix y = batch_forward(p, x, &bh);
  for (int j = 0; j < 4; ++j) {
    auto out = recurrent_step(p, x.col(j), {h0.h.col(j), h0.c.col(j)});
    CHECK((y.col(j) - out.output).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((bh.h.col(j) - out.hidden.h).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((bh.c.col(j) - out.hidden.c).cwiseAbs().maxCoeff() <= 1e-13);
  }
  const std::vector<int> cols = {3, 3, 0};
  auto g = bh.gather(cols);
  CHECK(g.batch() == 3);
  CHECK(g.h.col(1) == bh.h.col(3));
  CHECK(g.c.col(2) == bh.c.col(0));

  const NetworkSpec dense{{3, 4, 2}, {Activation::kTanh, Activation::kLinear}, std::nullopt};
  const auto q = init_params(dense, rng);
  const Matrix xd = Matrix::NullaryExpr(3, 2, [&] { return standard_normal(rng); });
  const Matrix yd = batch_forward(q, xd);
  for (int j = 0; j < 2; ++j) CHECK((yd.col(j) - dense_eval(q, xd.col(j))).cwiseAbs().maxCoeff() <= 1e-13);

  CHECK_THROWS_AS(batch_forward(p, x), ConfigError);
  CHECK_THROWS_AS(batch_forward(q, x), ConfigError);
}
