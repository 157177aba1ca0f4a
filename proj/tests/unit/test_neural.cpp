// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "smle/metrics.hpp"
#include "smle/neural.hpp"

using namespace smle;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix random_matrix(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
  const Signal v = smle::test::gaussian(static_cast<std::size_t>(rows) * cols, seed, scale);
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

// Central differences over every parameter; returns the worst relative error
// |a - f| / max(|a|, |f|, floor).
template <typename Loss>
double worst_relative_error(Network& net, const Vector& analytic, Loss&& loss,
                            double step = 1e-5, double floor = 1e-7) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < net.params().size(); ++i) {
    const double saved = net.params()[i];
    net.params()[i] = saved + step;
    const double up = loss();
    net.params()[i] = saved - step;
    const double down = loss();
    net.params()[i] = saved;
    const double fd = (up - down) / (2 * step);
    const double denom = std::max({std::abs(analytic[i]), std::abs(fd), floor});
    worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
  }
  return worst;
}

}  // namespace

TEST_SUITE("neural") {

TEST_CASE("param_count closed form") {
  CHECK(param_count({513, {128, 128}, 4, OutputActivation::kScaledSoftmax}) == 460804);
  CHECK(param_count({2, {}, 3}) == 9);
  CHECK(param_count({513, {512, 512}, 513}) == 4463617);
  CHECK(param_count({513, {1024, 1024}, 513}) == 15218177);
  for (int h : {1, 8, 16, 64})
    for (int d : {3, 513}) {
      const std::size_t expected = 4u * h * (d + h + 1) + 4u * h * (h + h + 1) + 7u * (h + 1);
      CHECK(param_count({d, {h, h}, 7}) == expected);
      CHECK(Network({d, {h, h}, 7}, 1).param_count() == expected);
    }
  // Gate heads run once per sequence, mask heads once per frame.
  const Complexity gate = complexity({513, {128, 128}, 4, OutputActivation::kScaledSoftmax});
  CHECK(gate.macs_per_frame == 4u * 128 * (513 + 128) + 4u * 128 * 256);
  CHECK_THROWS_AS(Network(Topology{3, {}, 2}, 1), Error);
  CHECK_THROWS_AS(param_count({0, {4}, 2}), Error);
}

TEST_CASE("initialization ranges") {
  const Network net({10, {16, 4}, 3}, 7);
  for (int l = 0; l < 2; ++l) {
    const double bound = 1.0 / std::sqrt(double(net.topology().hidden[l]));
    CHECK(net.lstm_weight(l).cwiseAbs().maxCoeff() <= bound);
    const auto b = net.lstm_bias(l);
    const int h = net.topology().hidden[l];
    for (int k = 0; k < 4 * h; ++k) CHECK(b[k] == (k >= h && k < 2 * h ? 1.0 : 0.0));
  }
  CHECK(net.dense_bias().cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index i = 0; i < net.params().size(); ++i)
    CHECK(net.params()[i] == double(float(net.params()[i])));
  // Same seed, same network.
  CHECK(Network({10, {16, 4}, 3}, 7).params() == net.params());
  CHECK(Network({10, {16, 4}, 3}, 8).params() != net.params());
}

TEST_CASE("zero input and zero parameters give zero hidden output") {
  const Network net = Network::zeros({6, {3, 2}, 4});
  const Matrix h = net.lstm_forward(Matrix::Zero(6, 5), nullptr, nullptr, nullptr);
  CHECK(h.cwiseAbs().maxCoeff() == 0.0);
  const Matrix mask = net.forward_frames(Matrix::Random(6, 5), nullptr);
  CHECK((mask.array() == 0.5).all());
}

TEST_CASE("single LSTM step matches the gate equations") {
  Network net = Network::zeros({1, {2}, 1});
  // rows: i0 i1 f0 f1 g0 g1 o0 o1; cols: x, h0, h1
  Matrix w(8, 3);
  w << 0.5, 0.1, -0.2,
       -0.3, 0.2, 0.4,
       0.8, -0.1, 0.3,
       0.2, 0.5, -0.6,
       1.1, 0.3, 0.1,
       -0.7, -0.2, 0.2,
       0.4, 0.6, -0.3,
       -0.5, 0.1, 0.9;
  Vector b(8);
  b << 0.1, -0.1, 1.0, 1.0, 0.0, 0.2, -0.3, 0.05;
  net.tensor(0) = w;
  net.tensor(1) = b;

  const double x = 0.7;
  const double hp[2] = {0.25, -0.5};
  const double cp[2] = {0.1, 0.3};
  StackState init{{Vector::Map(hp, 2), Vector::Map(cp, 2)}};
  StackState final_state;
  Matrix in(1, 1);
  in << x;
  const Matrix h = net.lstm_forward(in, &init, &final_state, nullptr);

  for (int k = 0; k < 2; ++k) {
    auto pre = [&](int gate) {
      const int r = gate * 2 + k;
      return w(r, 0) * x + w(r, 1) * hp[0] + w(r, 2) * hp[1] + b[r];
    };
    const double i = sig(pre(0)), f = sig(pre(1)), g = std::tanh(pre(2)), o = sig(pre(3));
    const double c = f * cp[k] + i * g;
    CHECK(final_state[0].c[k] == doctest::Approx(c).epsilon(1e-14));
    CHECK(h(k, 0) == doctest::Approx(o * std::tanh(c)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(net.lstm_forward(Matrix::Zero(2, 3), nullptr, nullptr, nullptr), Error);
}

TEST_CASE("carried state splits a sequence without changing it") {
  const Network net({5, {4, 3}, 6}, 3);
  const Matrix x = random_matrix(5, 12, 4);
  const Matrix full = net.forward_frames(x, nullptr);
  StackState state;
  const Matrix a = net.forward_frames(x.leftCols(7), nullptr, nullptr, &state);
  const Matrix b = net.forward_frames(x.rightCols(5), nullptr, &state);
  CHECK((a - full.leftCols(7)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((b - full.rightCols(5)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mask head gradient matches finite differences") {
  Network net({5, {4, 3}, 6}, 11);
  const Matrix x = random_matrix(5, 7, 12);
  const Matrix weights = random_matrix(6, 7, 13);
  auto loss = [&] { return net.forward_frames(x, nullptr).cwiseProduct(weights).sum(); };
  ForwardCache cache;
  net.forward_frames(x, &cache);
  Vector grad = Vector::Zero(net.params().size());
  net.backward_frames(cache, weights, grad);
  CHECK(worst_relative_error(net, grad, loss) < 1e-5);
}

TEST_CASE("LSTM stack gradient with carried state matches finite differences") {
  Network net({4, {3}, 2}, 21);
  const Matrix x = random_matrix(4, 6, 22);
  StackState init{{Vector::Constant(3, 0.2), Vector::Constant(3, -0.4)}};
  const Matrix weights = random_matrix(3, 6, 23);
  auto loss = [&] {
    return net.lstm_forward(x, &init, nullptr, nullptr).cwiseProduct(weights).sum();
  };
  ForwardCache cache;
  net.lstm_forward(x, &init, nullptr, &cache);
  Vector grad = Vector::Zero(net.params().size());
  net.lstm_backward(cache, weights, grad);
  CHECK(worst_relative_error(net, grad, loss) < 1e-5);
}

TEST_CASE("sequence head with scaled softmax and BCE matches finite differences") {
  Network net({5, {4, 4}, 3, OutputActivation::kScaledSoftmax}, 31);
  const Matrix x = random_matrix(5, 8, 32);
  const std::vector<double> target = one_hot(1, 3);
  const double lambda = 10.0;
  auto forward = [&] {
    const Vector logits = net.forward_sequence(x, nullptr);
    return scaled_softmax(std::span(logits.data(), logits.size()), lambda);
  };
  auto loss = [&] { return bce_loss(forward().probs, target); };

  ForwardCache cache;
  const Vector logits = net.forward_sequence(x, &cache);
  const GateVector gate = scaled_softmax(std::span(logits.data(), logits.size()), lambda);
  const std::vector<double> dl = scaled_softmax_backward(gate, bce_grad(gate.probs, target));
  Vector grad = Vector::Zero(net.params().size());
  net.backward_sequence(cache, Vector::Map(dl.data(), dl.size()), grad);
  CHECK(worst_relative_error(net, grad, loss, 1e-6) < 1e-4);
  CHECK_THROWS_AS(net.forward_frames(x, nullptr), Error);
}

TEST_CASE("softmax and BCE at the symmetric point") {
  // o = [0, 0], lambda = 10, target [1, 0]: p = [0.5, 0.5] and
  // dL/do0 = -lambda/2 (1/(1-p) + 1/p - 2) with p = 0.5, i.e. -10.
  const std::vector<double> o{0.0, 0.0};
  const GateVector gate = scaled_softmax(o, 10.0);
  const std::vector<double> t{1.0, 0.0};
  const std::vector<double> dl = scaled_softmax_backward(gate, bce_grad(gate.probs, t));
  const double p = 0.5;
  CHECK(dl[0] == doctest::Approx(-10.0 / 2.0 * (1.0 / (1.0 - p) + 1.0 / p - 2.0)));
  CHECK(dl[1] == doctest::Approx(-dl[0]));
  const double h = 1e-6;
  auto loss = [&](double o0) { return bce_loss(scaled_softmax(std::vector{o0, 0.0}, 10.0).probs, t); };
  CHECK(dl[0] == doctest::Approx((loss(h) - loss(-h)) / (2 * h)).epsilon(1e-6));
}

TEST_CASE("scaled softmax worked examples") {
  auto p = scaled_softmax(std::vector{0.0, 0.0}, 3.0).probs;
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 0.5);
  p = scaled_softmax(std::vector{1.0, 0.0}, 10.0).probs;
  CHECK(p[0] == doctest::Approx(0.9999546).epsilon(1e-7));
  CHECK(p[1] == doctest::Approx(0.0000454).epsilon(1e-3));
  p = scaled_softmax(std::vector{1.0, 0.0}, 1.0).probs;
  CHECK(p[0] == doctest::Approx(0.73106).epsilon(1e-5));
  CHECK(p[1] == doctest::Approx(0.26894).epsilon(1e-5));
  // Huge logits do not overflow.
  p = scaled_softmax(std::vector{1e4, 0.0}, 10.0).probs;
  CHECK(p[0] == 1.0);
  CHECK_THROWS_AS(scaled_softmax(std::vector{1.0}, 10.0), Error);
  CHECK_THROWS_AS(scaled_softmax(std::vector{1.0, 2.0}, 0.0), Error);
}

TEST_CASE("scaled softmax properties on random logits") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> n(0.0, 2.0);
  std::uniform_int_distribution<int> kdist(2, 8);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> o(kdist(rng));
    for (double& v : o) v = n(rng);
    const GateVector g10 = scaled_softmax(o, 10.0);
    double sum = 0.0;
    for (double v : g10.probs) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
    // Shift invariance.
    std::vector<double> shifted = o;
    for (double& v : shifted) v += 3.7;
    const GateVector gs = scaled_softmax(shifted, 10.0);
    for (std::size_t k = 0; k < o.size(); ++k) CHECK(std::abs(gs.probs[k] - g10.probs[k]) < 1e-12);
    // The winner does not depend on lambda.
    CHECK(scaled_softmax(o, 0.1).argmax() == g10.argmax());
    CHECK(scaled_softmax(o, 1.0).argmax() == g10.argmax());
  }
}

TEST_CASE("lambda 10 saturates the gate for unit logit gaps") {
  // With K - 1 rivals all exactly one unit below, max p = 1 / (1 + (K-1) e^-10).
  for (int k = 2; k <= 3; ++k) {
    std::vector<double> o(k, 0.0);
    o[0] = 1.0;
    CHECK(scaled_softmax(o, 10.0).probs[0] >= 0.9999);
  }
  std::vector<double> four{1.0, 0.0, 0.0, 0.0};
  CHECK(scaled_softmax(four, 10.0).probs[0] == doctest::Approx(1.0 / (1.0 + 3.0 * std::exp(-10.0))));
  // Larger gaps only sharpen it.
  CHECK(scaled_softmax(std::vector{2.0, 0.0}, 10.0).probs[0] >
        scaled_softmax(std::vector{1.0, 0.0}, 10.0).probs[0]);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  GateVector g;
  g.probs = {0.1, 0.7, 0.15, 0.05};
  CHECK(g.argmax() == 1);
  g.probs = {0.5, 0.5};
  CHECK(g.argmax() == 0);
  g.probs = {0.2, 0.4, 0.4};
  CHECK(g.argmax() == 1);
}

TEST_CASE("adam step") {
  Vector p(3);
  p << 0.5, -0.25, 1.0;
  const Vector start = p;
  AdamState state(3);
  adam_step(p, Vector::Zero(3), state);
  CHECK(p == start);
  CHECK(state.step == 1);

  // First step moves each weight by about -lr * sign(g).
  AdamState fresh(3, {0.01});
  Vector q = start;
  Vector g(3);
  g << 2.0, -0.003, 0.0;
  adam_step(q, g, fresh);
  CHECK(q[0] == doctest::Approx(start[0] - 0.01).epsilon(1e-6));
  CHECK(q[1] == doctest::Approx(start[1] + 0.01).epsilon(1e-5));
  CHECK(q[2] == start[2]);

  // Two-step oracle with bias correction.
  AdamConfig cfg{0.1, 0.9, 0.999, 1e-8};
  AdamState two(1, cfg);
  Vector w = Vector::Constant(1, 1.0);
  adam_step(w, Vector::Constant(1, 1.0), two);
  adam_step(w, Vector::Constant(1, 3.0), two);
  const double m = 0.9 * 0.1 + 0.1 * 3.0;
  const double v = 0.999 * 0.001 + 0.001 * 9.0;
  const double m_hat = m / (1 - 0.81);
  const double v_hat = v / (1 - 0.999 * 0.999);
  const double expected = float(float(1.0 - 0.1) - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8));
  CHECK(w[0] == doctest::Approx(expected).epsilon(1e-6));
  CHECK(w[0] == double(float(w[0])));

  CHECK_THROWS_AS(adam_step(w, Vector::Zero(2), two), Error);
}

TEST_CASE("adam is deterministic") {
  auto run = [] {
    Network net({4, {3}, 2}, 5);
    AdamState s(net.param_count());
    for (int i = 0; i < 5; ++i) {
      Vector g = Vector::Map(smle::test::gaussian(net.param_count(), 50 + i).data(),
                             static_cast<Eigen::Index>(net.param_count()));
      adam_step(net.params(), g, s);
    }
    return net.params();
  };
  CHECK(run() == run());
}

}  // TEST_SUITE
