#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "phosc/error.hpp"
#include "phosc/net/adam.hpp"
#include "phosc/net/checkpoint.hpp"
#include "phosc/net/kernels.hpp"
#include "phosc/net/sequential.hpp"
#include "phosc/gradsuite.hpp"

using namespace phosc;
using namespace phosc::net;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << i;
}

void expect_grad_ok(const NetSpec& spec, const net::Shape& in, std::uint64_t seed) {
  const auto report = phosc::gradsuite::check_net(spec, in, seed);
  EXPECT_TRUE(report.passed) << report.summary();
  EXPECT_GE(report.checked, 200u);
  EXPECT_LE(report.max_rel_error, 1e-4);
}

}  // namespace

TEST(Kernels, MatmulSerialParallelAgree) {
  Rng rng(1);
  for (auto [m, k, n] : {std::tuple{3, 5, 7}, std::tuple{64, 33, 129}, std::tuple{1, 300, 2}}) {
    const auto a = random_vec(rng, static_cast<std::size_t>(m * k));
    const auto b = random_vec(rng, static_cast<std::size_t>(k * n));
    const auto bt = random_vec(rng, static_cast<std::size_t>(n * k));
    const auto at = random_vec(rng, static_cast<std::size_t>(k * m));
    std::vector<double> c1(static_cast<std::size_t>(m * n), 0.5), c2 = c1;
    kernels::serial::matmul_acc(a.data(), b.data(), c1.data(), m, k, n);
    kernels::parallel::matmul_acc(a.data(), b.data(), c2.data(), m, k, n);
    expect_close(c1, c2, 1e-12);
    kernels::serial::matmul_tn_acc(at.data(), b.data(), c1.data(), m, k, n);
    kernels::parallel::matmul_tn_acc(at.data(), b.data(), c2.data(), m, k, n);
    expect_close(c1, c2, 1e-12);
    kernels::serial::matmul_nt_acc(a.data(), bt.data(), c1.data(), m, k, n);
    kernels::parallel::matmul_nt_acc(a.data(), bt.data(), c2.data(), m, k, n);
    expect_close(c1, c2, 1e-12);
  }
}

TEST(Kernels, ConvSerialParallelAgree) {
  Rng rng(2);
  for (auto [stride, pad, kernel] : {std::tuple{1, 1, 3}, std::tuple{2, 1, 3}, std::tuple{1, 0, 5}, std::tuple{2, 2, 5}}) {
    kernels::ConvGeometry g{3, 17, 23, 4, kernel, stride, pad, 0, 0};
    g.out_h = (g.in_h + 2 * pad - kernel) / stride + 1;
    g.out_w = (g.in_w + 2 * pad - kernel) / stride + 1;
    const auto in = random_vec(rng, static_cast<std::size_t>(g.in_c * g.in_h * g.in_w));
    const auto w = random_vec(rng, static_cast<std::size_t>(g.out_c * g.in_c * kernel * kernel));
    const auto b = random_vec(rng, static_cast<std::size_t>(g.out_c));
    const std::size_t out_n = static_cast<std::size_t>(g.out_c * g.out_h * g.out_w);
    std::vector<double> o1(out_n), o2(out_n);
    kernels::serial::conv2d_forward(g, in.data(), w.data(), b.data(), o1.data());
    kernels::parallel::conv2d_forward(g, in.data(), w.data(), b.data(), o2.data());
    expect_close(o1, o2, 1e-12);

    const auto go = random_vec(rng, out_n);
    std::vector<double> gi1(in.size(), 9.0), gi2(in.size(), -9.0), gw1(w.size(), 0.1), gw2 = gw1, gb1(b.size(), 0.2),
        gb2 = gb1;
    kernels::serial::conv2d_backward(g, in.data(), w.data(), go.data(), gi1.data(), gw1.data(), gb1.data());
    kernels::parallel::conv2d_backward(g, in.data(), w.data(), go.data(), gi2.data(), gw2.data(), gb2.data());
    expect_close(gi1, gi2, 1e-12);
    expect_close(gw1, gw2, 1e-12);
    expect_close(gb1, gb2, 1e-12);
  }
}

TEST(Kernels, ScopedModeRestores) {
  const auto before = kernels::mode();
  {
    kernels::ScopedMode m(kernels::Mode::kSerial);
    EXPECT_EQ(kernels::mode(), kernels::Mode::kSerial);
  }
  EXPECT_EQ(kernels::mode(), before);
}

TEST(GradCheck, Conv) { expect_grad_ok({{Conv{4, 3, 1, 1}}}, {2, 7, 9}, 11); }
TEST(GradCheck, ConvStrided) { expect_grad_ok({{Conv{3, 3, 2, 1}}}, {2, 8, 11}, 12); }
TEST(GradCheck, Dense) { expect_grad_ok({{Dense{17}}}, {23}, 13); }
TEST(GradCheck, MaxPool) { expect_grad_ok({{MaxPool{2}}}, {3, 9, 11}, 14); }
TEST(GradCheck, Spp) { expect_grad_ok({{Spp{{1, 2, 3}}}}, {4, 7, 9}, 15); }
TEST(GradCheck, Relu) { expect_grad_ok({{Activation{ActivationKind::kRelu}}}, {300}, 16); }
TEST(GradCheck, Sigmoid) { expect_grad_ok({{Activation{ActivationKind::kSigmoid}}}, {300}, 17); }
TEST(GradCheck, Tanh) { expect_grad_ok({{Activation{ActivationKind::kTanh}}}, {300}, 18); }
TEST(GradCheck, Softmax) { expect_grad_ok({{Softmax{}}}, {20, 12}, 19); }
TEST(GradCheck, HeightCollapse) { expect_grad_ok({{HeightCollapse{}}}, {4, 5, 12}, 20); }
TEST(GradCheck, BiLstm) { expect_grad_ok({{BiLstm{5, 2}}}, {6, 4}, 21); }
TEST(GradCheck, ConvStack) {
  expect_grad_ok({{Conv{3, 3, 2, 1}, Activation{}, MaxPool{2}, Conv{4, 3, 1, 1}, Activation{ActivationKind::kTanh},
                   Spp{{1, 2}}, Dense{6}, Activation{ActivationKind::kSigmoid}}},
                 {1, 12, 20}, 22);
}

TEST(Spp, SingleLevelIsGlobalMax) {
  Tensor<float> fmap({2, 3, 4});
  for (std::size_t i = 0; i < fmap.size(); ++i) fmap[i] = static_cast<float>((i * 7) % 11);
  const auto out = spp_pool(fmap, {1});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], *std::max_element(fmap.data(), fmap.data() + 12));
  EXPECT_EQ(out[1], *std::max_element(fmap.data() + 12, fmap.data() + 24));
}

TEST(Spp, ConstantMapAndLength) {
  Tensor<float> fmap({5, 8, 8}, 0.25f);
  const auto out = spp_pool(fmap, {1, 2, 4});
  EXPECT_EQ(out.size(), 5u * 21u);
  for (float v : out.values()) EXPECT_EQ(v, 0.25f);
}

TEST(Spp, TooSmallMapRejected) {
  try {
    infer_shape(Spp{{1, 2, 4}}, {3, 3, 8});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooSmall);
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore<double> p;
  p.add("w", {3});
  p[0].values() = {1.0, -2.0, 0.5};
  auto g = p.zeros_like();
  g[0].values() = {0.3, -4.0, 0.0};
  Adam<double> adam(p);
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  adam.step(p, g, cfg);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  EXPECT_NEAR(p[0][0], 1.0 - 0.1 * 0.3 / (0.3 + 1e-8), 1e-12);
  EXPECT_NEAR(p[0][1], -2.0 + 0.1 * 4.0 / (4.0 + 1e-8), 1e-12);
  EXPECT_EQ(p[0][2], 0.5);
  EXPECT_EQ(adam.step_count(), 1);
}

TEST(Adam, DecoupledWeightDecay) {
  ParamStore<double> p;
  p.add("w", {1});
  p[0][0] = 2.0;
  auto g = p.zeros_like();
  Adam<double> adam(p);
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.5;
  adam.step(p, g, cfg);
  EXPECT_NEAR(p[0][0], 2.0 - 0.1 * 0.5 * 2.0, 1e-12);
}

TEST(Adam, MinimizesQuadratic) {
  ParamStore<double> p;
  p.add("w", {2});
  p[0].values() = {3.0, -5.0};
  Adam<double> adam(p);
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  for (int i = 0; i < 2000; ++i) {
    auto g = p.zeros_like();
    g[0][0] = 2 * (p[0][0] - 1.0);
    g[0][1] = 2 * (p[0][1] + 2.0);
    adam.step(p, g, cfg);
  }
  EXPECT_NEAR(p[0][0], 1.0, 1e-3);
  EXPECT_NEAR(p[0][1], -2.0, 1e-3);
}

TEST(Adam, ShapeMismatch) {
  ParamStore<double> p, q;
  p.add("w", {2});
  q.add("w", {3});
  Adam<double> adam(p);
  EXPECT_THROW(adam.step(p, q, {}), Error);
}

TEST(Sequential, DenseIdentity) {
  ParamStore<float> store;
  Sequential<float> net({{Dense{4}}}, {4}, store, "d");
  auto& w = store.at("d.0.weight");
  w.fill(0.0f);
  for (int i = 0; i < 4; ++i) w[static_cast<std::size_t>(i * 4 + i)] = 1.0f;
  Tensor<float> x({4}, std::vector<float>{1, -2, 3.5f, 0});
  EXPECT_EQ(net.forward(store, x).output().values(), x.values());
}

TEST(Sequential, ZeroConvGivesBias) {
  ParamStore<float> store;
  Sequential<float> net({{Conv{2, 3, 1, 1}}}, {1, 5, 5}, store, "c");
  store.at("c.0.bias").values() = {0.5f, -1.0f};
  Tensor<float> x({1, 5, 5}, 3.0f);
  const auto out = net.forward(store, x).output();
  for (int i = 0; i < 25; ++i) {
    EXPECT_EQ(out[static_cast<std::size_t>(i)], 0.5f);
    EXPECT_EQ(out[static_cast<std::size_t>(25 + i)], -1.0f);
  }
}

TEST(Sequential, SeededInitIsDeterministic) {
  auto build = [&](std::uint64_t seed) {
    ParamStore<float> store;
    Sequential<float> net(NetSpec{{Conv{4}, Activation{}, MaxPool{}, HeightCollapse{}, BiLstm{4, 1}, Dense{3}}},
                          {1, 8, 8}, store, "m");
    Rng rng(seed);
    net.init_params(store, rng);
    return store;
  };
  EXPECT_EQ(build(7), build(7));
  EXPECT_FALSE(build(7) == build(8));
  const auto s = build(7);
  // Forget gate block of the LSTM bias is 1, the rest 0.
  const auto& b = s.at("m.4.l0.fwd.bias");
  for (int i = 0; i < 16; ++i) EXPECT_EQ(b[static_cast<std::size_t>(i)], (i >= 4 && i < 8) ? 1.0f : 0.0f);
}

TEST(Sequential, ParallelMatchesSerialForward) {
  ParamStore<float> store;
  Sequential<float> net({{Conv{8, 3, 2, 1}, Activation{}, MaxPool{}, Conv{8}, Spp{{1, 2}}, Dense{5}}}, {1, 30, 60}, store,
                        "m");
  Rng rng(3);
  net.init_params(store, rng);
  Tensor<float> x({1, 30, 60});
  for (auto& v : x.values()) v = static_cast<float>(rng.uniform());
  Tensor<float> a, b;
  {
    kernels::ScopedMode m(kernels::Mode::kSerial);
    a = net.forward(store, x).output();
  }
  {
    kernels::ScopedMode m(kernels::Mode::kParallel);
    b = net.forward(store, x).output();
  }
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-5f);
}

TEST(Sequential, ZeroUpstreamGivesZeroGradients) {
  ParamStore<double> store;
  Sequential<double> net({{Conv{3}, Activation{ActivationKind::kTanh}, Spp{{1, 2}}, Dense{4}}}, {1, 4, 4}, store, "m");
  Rng rng(4);
  net.init_params(store, rng);
  Tensor<double> x({1, 4, 4}, 0.3);
  const auto state = net.forward(store, x);
  auto grads = store.zeros_like();
  const auto gin = net.backward(store, state, Tensor<double>({4}, 0.0), grads);
  for (double v : gin.values()) EXPECT_EQ(v, 0.0);
  for (std::size_t i = 0; i < grads.size(); ++i)
    for (double v : grads[i].values()) EXPECT_EQ(v, 0.0);
}

TEST(Sequential, BackwardIsLinearInUpstream) {
  ParamStore<double> store;
  Sequential<double> net({{Dense{5}, Activation{ActivationKind::kSigmoid}, Dense{3}}}, {4}, store, "m");
  Rng rng(5);
  net.init_params(store, rng);
  Tensor<double> x({4}, random_vec(rng, 4));
  Tensor<double> u({3}, random_vec(rng, 3)), v({3}, random_vec(rng, 3)), w({3});
  for (std::size_t i = 0; i < 3; ++i) w[i] = 2 * u[i] - 3 * v[i];
  const auto state = net.forward(store, x);
  auto gu = store.zeros_like(), gv = store.zeros_like(), gw = store.zeros_like();
  const auto iu = net.backward(store, state, u, gu);
  const auto iv = net.backward(store, state, v, gv);
  const auto iw = net.backward(store, state, w, gw);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(iw[i], 2 * iu[i] - 3 * iv[i], 1e-12);
  for (std::size_t p = 0; p < gw.size(); ++p)
    for (std::size_t i = 0; i < gw[p].size(); ++i) EXPECT_NEAR(gw[p][i], 2 * gu[p][i] - 3 * gv[p][i], 1e-12);
}

TEST(Sequential, ForeignStateRejected) {
  ParamStore<double> s1, s2;
  Sequential<double> a({{Dense{3}}}, {4}, s1, "a");
  Sequential<double> b({{Dense{3}, Dense{2}}}, {4}, s2, "b");
  const auto state = a.forward(s1, Tensor<double>({4}, 1.0));
  auto grads = s2.zeros_like();
  try {
    b.backward(s2, state, Tensor<double>({2}, 1.0), grads);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStateError);
  }
}

TEST(Sequential, WrongInputShapeRejected) {
  ParamStore<float> store;
  Sequential<float> net({{Dense{3}}}, {4}, store, "a");
  EXPECT_THROW(net.forward(store, Tensor<float>({5})), Error);
}

TEST(Spec, ChainCheckRejectsMismatch) {
  try {
    infer_shapes({{Dense{4}, Conv{}}}, {8});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
  }
  const auto shapes = infer_shapes({{Conv{16, 3, 2, 1}, MaxPool{}, HeightCollapse{}, BiLstm{8, 2}, Dense{27}}}, {1, 50, 250});
  EXPECT_EQ(shapes.back(), (net::Shape{62, 27}));
}

TEST(Spec, JsonRoundTrip) {
  const NetSpec spec{{Conv{8, 5, 2, 2}, Activation{ActivationKind::kTanh}, MaxPool{3}, Spp{{1, 3}}, Dense{9}, Softmax{},
                      HeightCollapse{}, BiLstm{7, 1}}};
  EXPECT_EQ(net_from_json(to_json(spec)), spec);
  EXPECT_THROW(layer_from_json(nlohmann::json{{"type", "conv"}, {"bogus", 1}}), Error);
  EXPECT_THROW(layer_from_json(nlohmann::json{{"type", "lstm9"}}), Error);
}

TEST(Checkpoint, RoundTripBitwise) {
  ParamStore<float> store;
  Sequential<float> net({{Conv{4}, Spp{{1}}, Dense{3}}}, {1, 4, 4}, store, "m");
  Rng rng(6);
  net.init_params(store, rng);
  store[0][0] = -0.0f;
  store[0][1] = 1e-40f;  // subnormal
  const nlohmann::json meta{{"kind", "test"}, {"seed", 6}};
  const auto path = std::filesystem::temp_directory_path() / "phosc_ckpt_test.bin";
  save_checkpoint(path, meta, store);
  const auto ck = load_checkpoint(path);
  EXPECT_EQ(ck.meta.at("kind"), "test");
  ASSERT_EQ(ck.params.size(), store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    EXPECT_EQ(ck.params.name(i), store.name(i));
    EXPECT_EQ(std::memcmp(ck.params[i].data(), store[i].data(), store[i].size() * sizeof(float)), 0);
  }
  EXPECT_EQ(serialize_checkpoint(ck.meta, ck.params), serialize_checkpoint(meta, store));
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptInputRejected) {
  ParamStore<float> store;
  store.add("w", {2});
  auto bytes = serialize_checkpoint({}, store);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 1)), Error);
  bytes[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bytes), Error);
  EXPECT_THROW(load_checkpoint("/nonexistent/phosc.ckpt"), Error);
}

TEST(Spp, LengthIndependentOfInputSize) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 4 + static_cast<int>(rng.below(20)), w = 4 + static_cast<int>(rng.below(40));
    Tensor<float> fmap({3, h, w});
    for (auto& v : fmap.values()) v = static_cast<float>(rng.uniform());
    EXPECT_EQ(spp_pool(fmap, {1, 2, 4}).size(), 3u * 21u) << h << "x" << w;
    EXPECT_EQ(infer_shape(Spp{{1, 2, 4}}, {3, h, w}), (net::Shape{63}));
  }
}

TEST(Adam, ZeroGradientWithoutDecayLeavesParams) {
  ParamStore<double> p;
  p.add("w", {4});
  p[0].values() = {1.0, -2.0, 0.0, 3.5};
  const auto before = p;
  Adam<double> adam(p);
  for (int i = 0; i < 5; ++i) adam.step(p, p.zeros_like(), {});
  EXPECT_EQ(p, before);
}

// Linear model with squared loss: exact enough in double that central
// differences agree to 1e-7.
TEST(GradCheck, LinearSquaredLossIsTight) {
  ParamStore<double> store;
  Sequential<double> seq({{Dense{4}}}, {6}, store, "lin");
  Rng rng(41);
  seq.init_params(store, rng);
  Tensor<double> x({6}), y({4});
  for (auto& v : x.values()) v = rng.uniform(-1, 1);
  for (auto& v : y.values()) v = rng.uniform(-1, 1);
  auto loss = [&](const ParamStore<double>& p) {
    const auto out = seq.forward(p, x).output();
    double s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += 0.5 * (out[i] - y[i]) * (out[i] - y[i]);
    return s;
  };
  const auto state = seq.forward(store, x);
  Tensor<double> up(y.shape());
  for (std::size_t i = 0; i < up.size(); ++i) up[i] = state.output()[i] - y[i];
  auto grads = store.zeros_like();
  seq.backward(store, state, up, grads);
  const auto rep = grad_check(store, grads, loss);
  EXPECT_EQ(rep.checked, 28u);
  EXPECT_LE(rep.max_rel_error, 1e-7) << rep.summary();
}

TEST(GradCheck, WrongGradientReportsWorstCoordinates) {
  ParamStore<double> p;
  p.add("a", {3});
  p[0].values() = {0.5, -1.0, 2.0};
  auto g = p.zeros_like();
  g[0].values() = {1.0, -2.0, 4.0};  // true gradient of sum(x^2)
  g[0][1] = 7.0;                      // break one coordinate
  auto loss = [](const ParamStore<double>& q) {
    double s = 0;
    for (double v : q[0].values()) s += v * v;
    return s;
  };
  const auto rep = grad_check(p, g, loss);
  EXPECT_FALSE(rep.passed);
  ASSERT_FALSE(rep.worst.empty());
  EXPECT_EQ(rep.worst.front().tensor, "a");
  EXPECT_EQ(rep.worst.front().index, 1u);
  EXPECT_NEAR(rep.worst.front().numeric, -2.0, 1e-6);
  EXPECT_NE(rep.summary().find("a[1]"), std::string::npos) << rep.summary();
}
