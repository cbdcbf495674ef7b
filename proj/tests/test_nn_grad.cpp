#include <catch_amalgamated.hpp>

#include <functional>

#include "adff/lstm.hpp"
#include "adff/metrics.hpp"
#include "adff/model.hpp"
#include "adff/nn.hpp"
#include "oracles.hpp"

using namespace adff;
using nn::ParamRef;

namespace {

constexpr double kTol = 1e-4;

// Scalar probe loss: a fixed random projection of the module output.
struct Probe {
  Tensor weights;
  explicit Probe(const std::vector<int>& shape, Rng& rng)
      : weights(oracle::random_tensor(shape, rng)) {}

  double operator()(const Tensor& y) const {
    double acc = 0.0;
    for (int64_t i = 0; i < y.size(); ++i) acc += weights[i] * y[i];
    return acc;
  }
};

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(101);
  nn::Conv2d conv(3, 4);
  conv.init(rng);
  Tensor x = oracle::random_tensor({2, 3, 5, 6}, rng);
  Probe probe({2, 4, 5, 6}, rng);
  const std::function<double()> loss = [&]() { return probe(conv.forward(x)); };

  conv.forward(x);
  conv.gw.zero();
  conv.gb.zero();
  const Tensor gx = conv.backward(probe.weights);

  CHECK(oracle::max_grad_error(x, gx, loss, rng, 96) < kTol);
  CHECK(oracle::max_grad_error(conv.w, conv.gw, loss, rng, 96) < kTol);
  CHECK(oracle::max_grad_error(conv.b, conv.gb, loss, rng) < kTol);
}

TEST_CASE("batch-norm gradients match finite differences in train mode") {
  Rng rng(102);
  nn::BatchNorm2d bn(3);
  // Random affine so the gradient paths through gamma/beta are exercised.
  for (int c = 0; c < 3; ++c) {
    bn.gamma[c] = rng.uniform(0.5, 1.5);
    bn.beta[c] = rng.uniform(-0.5, 0.5);
  }
  Tensor x = oracle::random_tensor({3, 3, 4, 5}, rng);
  Probe probe({3, 3, 4, 5}, rng);
  // Freeze the running stats so repeated forwards stay equivalent.
  const std::function<double()> loss = [&]() { return probe(bn.forward(x, true)); };

  bn.forward(x, true);
  bn.ggamma.zero();
  bn.gbeta.zero();
  const Tensor gx = bn.backward(probe.weights);

  CHECK(oracle::max_grad_error(x, gx, loss, rng, 96) < kTol);
  CHECK(oracle::max_grad_error(bn.gamma, bn.ggamma, loss, rng) < kTol);
  CHECK(oracle::max_grad_error(bn.beta, bn.gbeta, loss, rng) < kTol);
}

TEST_CASE("batch-norm gradients match finite differences in eval mode") {
  Rng rng(103);
  nn::BatchNorm2d bn(4);
  for (int c = 0; c < 4; ++c) {
    bn.gamma[c] = rng.uniform(0.5, 1.5);
    bn.beta[c] = rng.uniform(-0.5, 0.5);
    bn.run_mean[c] = rng.uniform(-0.3, 0.3);
    bn.run_var[c] = rng.uniform(0.5, 1.5);
  }
  Tensor x = oracle::random_tensor({2, 4, 3, 3}, rng);
  Probe probe({2, 4, 3, 3}, rng);
  const std::function<double()> loss = [&]() { return probe(bn.forward(x, false)); };

  bn.forward(x, false);
  bn.ggamma.zero();
  bn.gbeta.zero();
  const Tensor gx = bn.backward(probe.weights);

  CHECK(oracle::max_grad_error(x, gx, loss, rng, 96) < kTol);
  CHECK(oracle::max_grad_error(bn.gamma, bn.ggamma, loss, rng) < kTol);
  CHECK(oracle::max_grad_error(bn.beta, bn.gbeta, loss, rng) < kTol);
}

TEST_CASE("relu gradient matches finite differences") {
  Rng rng(104);
  nn::ReLU relu;
  Tensor x = oracle::random_tensor({2, 3, 4, 4}, rng);
  Probe probe({2, 3, 4, 4}, rng);
  const std::function<double()> loss = [&]() { return probe(relu.forward(x)); };
  relu.forward(x);
  const Tensor gx = relu.backward(probe.weights);
  CHECK(oracle::max_grad_error(x, gx, loss, rng, 96) < kTol);
}

TEST_CASE("max-pool gradient matches finite differences") {
  Rng rng(105);
  nn::MaxPool2d pool;
  Tensor x = oracle::random_tensor({2, 2, 6, 6}, rng);
  Probe probe({2, 2, 3, 3}, rng);
  const std::function<double()> loss = [&]() { return probe(pool.forward(x)); };
  pool.forward(x);
  const Tensor gx = pool.backward(probe.weights);
  CHECK(oracle::max_grad_error(x, gx, loss, rng, 96) < kTol);
}

TEST_CASE("logistic gradient matches finite differences") {
  Rng rng(106);
  nn::Sigmoid sig;
  Tensor x = oracle::random_tensor({4, 6}, rng, -3.0, 3.0);
  Probe probe({4, 6}, rng);
  const std::function<double()> loss = [&]() { return probe(sig.forward(x)); };
  sig.forward(x);
  const Tensor gx = sig.backward(probe.weights);
  CHECK(oracle::max_grad_error(x, gx, loss, rng) < kTol);
}

TEST_CASE("affine gradients match finite differences") {
  Rng rng(107);
  nn::Linear lin(5, 4);
  lin.init(rng);
  Tensor x = oracle::random_tensor({3, 5}, rng);
  Probe probe({3, 4}, rng);
  const std::function<double()> loss = [&]() { return probe(lin.forward(x)); };
  lin.forward(x);
  lin.gw.zero();
  lin.gb.zero();
  const Tensor gx = lin.backward(probe.weights);
  CHECK(oracle::max_grad_error(x, gx, loss, rng) < kTol);
  CHECK(oracle::max_grad_error(lin.w, lin.gw, loss, rng) < kTol);
  CHECK(oracle::max_grad_error(lin.b, lin.gb, loss, rng) < kTol);
}

TEST_CASE("frequency-mean gradient matches finite differences") {
  Rng rng(108);
  nn::FreqMean fm;
  Tensor x = oracle::random_tensor({2, 3, 4, 5}, rng);
  Probe probe({2, 4, 3}, rng);
  const std::function<double()> loss = [&]() { return probe(fm.forward(x)); };
  fm.forward(x);
  const Tensor gx = fm.backward(probe.weights);
  CHECK(oracle::max_grad_error(x, gx, loss, rng, 96) < kTol);
}

TEST_CASE("lstm cell and sequence gradients match finite differences") {
  Rng rng(109);
  nn::LstmDirection lstm(3, 4);
  lstm.init(rng);
  Tensor x = oracle::random_tensor({2, 5, 3}, rng);
  Probe probe({2, 5, 4}, rng);
  const std::function<double()> loss = [&]() { return probe(lstm.forward(x)); };
  lstm.forward(x);
  lstm.gw_ih.zero();
  lstm.gw_hh.zero();
  lstm.gb.zero();
  const Tensor gx = lstm.backward(probe.weights);
  CHECK(oracle::max_grad_error(x, gx, loss, rng, 96) < kTol);
  CHECK(oracle::max_grad_error(lstm.w_ih, lstm.gw_ih, loss, rng, 96) < kTol);
  CHECK(oracle::max_grad_error(lstm.w_hh, lstm.gw_hh, loss, rng, 96) < kTol);
  CHECK(oracle::max_grad_error(lstm.b, lstm.gb, loss, rng) < kTol);
}

TEST_CASE("bidirectional stack gradient matches finite differences") {
  Rng rng(110);
  nn::BiLstm bi(3, 3, 2);
  bi.init(rng);
  Tensor x = oracle::random_tensor({2, 4, 3}, rng);
  Probe probe({2, 4, 6}, rng);
  const std::function<double()> loss = [&]() { return probe(bi.forward(x)); };
  bi.forward(x);
  std::vector<ParamRef> params;
  bi.collect("bi", params);
  for (auto& p : params) p.grad->zero();
  const Tensor gx = bi.backward(probe.weights);
  CHECK(oracle::max_grad_error(x, gx, loss, rng, 64) < kTol);
  for (auto& p : params)
    CHECK(oracle::max_grad_error(*p.value, *p.grad, loss, rng, 24) < kTol);
}

TEST_CASE("SE squeeze gradient matches finite differences") {
  Rng rng(111);
  nn::SpatialMean sq;
  Tensor x = oracle::random_tensor({2, 3, 4, 4}, rng);
  Probe probe({2, 3}, rng);
  const std::function<double()> loss = [&]() { return probe(sq.forward(x)); };
  sq.forward(x);
  const Tensor gx = sq.backward(probe.weights);
  CHECK(oracle::max_grad_error(x, gx, loss, rng, 96) < kTol);
}

TEST_CASE("SE excitation gradients match finite differences") {
  Rng rng(112);
  SeExcite se(8, 2);
  se.init(rng);
  Tensor z = oracle::random_tensor({3, 8}, rng);
  Probe probe({3, 8}, rng);
  const std::function<double()> loss = [&]() { return probe(se.forward(z)); };
  se.forward(z);
  std::vector<ParamRef> params;
  se.collect("se", params);
  for (auto& p : params) p.grad->zero();
  const Tensor gz = se.backward(probe.weights);
  CHECK(oracle::max_grad_error(z, gz, loss, rng) < kTol);
  for (auto& p : params)
    CHECK(oracle::max_grad_error(*p.value, *p.grad, loss, rng, 48) < kTol);
}

TEST_CASE("SE scale gradients match finite differences") {
  Rng rng(113);
  detail::SeScaleOp scale;
  Tensor s = oracle::random_tensor({2, 3, 4, 4}, rng);
  Tensor a = oracle::random_tensor({2, 3}, rng, 0.1, 0.9);
  Probe probe({2, 3, 4, 4}, rng);
  const std::function<double()> loss = [&]() { return probe(scale.forward(s, a)); };
  scale.forward(s, a);
  Tensor ga;
  const Tensor gs = scale.backward(probe.weights, &ga);
  CHECK(oracle::max_grad_error(s, gs, loss, rng, 96) < kTol);
  CHECK(oracle::max_grad_error(a, ga, loss, rng) < kTol);
}

TEST_CASE("mse loss gradient matches finite differences") {
  Rng rng(114);
  Tensor pred = oracle::random_tensor({4, 2}, rng);
  const Tensor target = oracle::random_tensor({4, 2}, rng);
  Tensor grad;
  mse_loss(pred, target, &grad);
  const std::function<double()> loss = [&]() { return mse_loss(pred, target); };
  CHECK(oracle::max_grad_error(pred, grad, loss, rng) < kTol);
}

TEST_CASE("cross-entropy loss gradient matches finite differences") {
  Rng rng(115);
  Tensor logits = oracle::random_tensor({5, 4}, rng, -2.0, 2.0);
  const std::vector<int> classes = {0, 3, 1, 2, 2};
  Tensor grad;
  ce_loss(logits, classes, &grad);
  const std::function<double()> loss = [&]() { return ce_loss(logits, classes); };
  CHECK(oracle::max_grad_error(logits, grad, loss, rng) < kTol);
}

TEST_CASE("whole-model gradient matches finite differences on a micro config") {
  Rng rng(116);
  ModelConfig cfg;
  cfg.seg_num = 2;
  cfg.width = 0.02;  // minimum channels, floored by se_reduction
  cfg.se_reduction = 4;
  cfg.lstm_hidden = 3;
  cfg.head_dims = {8, 6};
  cfg.task = Task::multi;
  AdffModel model(cfg, 9);

  Tensor x = oracle::random_tensor({2, 2, 32, 32}, rng);
  // 32x32 spatial input needs level channels >= 4; width 0.02 gives (4,4,6,11,11).
  Probe probe({2, 2}, rng);
  const std::function<double()> loss = [&]() { return probe(model.forward(x, true)); };
  model.forward(x, true);
  model.zero_grad();
  const Tensor gx = model.backward(probe.weights);

  CHECK(oracle::max_grad_error(x, gx, loss, rng, 24) < kTol);
  auto params = model.parameters();
  // Spot-check a spread of parameter tensors end to end.
  for (size_t k = 0; k < params.size(); k += 7)
    CHECK(oracle::max_grad_error(*params[k].value, *params[k].grad, loss, rng, 6) < kTol);
}
