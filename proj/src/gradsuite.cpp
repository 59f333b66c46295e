#include "phosc/gradsuite.hpp"

#include "phosc/net/sequential.hpp"

namespace phosc::gradsuite {

using net::ParamStore;
using net::Tensor;

namespace {

template <class P>
void nudge_biases(P& store, Rng& rng) {
  // Off-zero biases make ReLU and max ties unlikely at the probe point.
  for (std::size_t i = 0; i < store.size(); ++i)
    if (store.name(i).ends_with("bias"))
      for (auto& v : store[i].values()) v += rng.uniform(-0.1, 0.1);
}

Tensor<double> random_tensor(const net::Shape& shape, Rng& rng, double lo, double hi) {
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

net::GradCheckOptions options(std::uint64_t seed, std::size_t samples) {
  net::GradCheckOptions opt;
  opt.samples = samples;
  opt.seed = seed;
  return opt;
}

}  // namespace

net::GradCheckReport check_net(const net::NetSpec& spec, const net::Shape& input_shape, std::uint64_t seed,
                               std::size_t samples) {
  ParamStore<double> store;
  net::Sequential<double> seq(spec, input_shape, store, "net");
  Rng rng(seed);
  seq.init_params(store, rng);
  nudge_biases(store, rng);

  const std::size_t n_params = store.size();
  ParamStore<double> all = store;
  all.add("input", input_shape);
  all.at("input") = random_tensor(input_shape, rng, -1, 1);
  const Tensor<double> weights = random_tensor(seq.output_shape(), rng, -1, 1);

  auto split = [&](const ParamStore<double>& combined) {
    ParamStore<double> p = store.zeros_like();
    for (std::size_t i = 0; i < n_params; ++i) p[i] = combined[i];
    return p;
  };
  auto loss = [&](const ParamStore<double>& combined) {
    const auto state = seq.forward(split(combined), combined.at("input"));
    double s = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * state.output()[i];
    return s;
  };

  const auto params = split(all);
  const auto state = seq.forward(params, all.at("input"));
  ParamStore<double> grads = store.zeros_like();
  const auto grad_in = seq.backward(params, state, weights, grads);
  ParamStore<double> analytic = all.zeros_like();
  for (std::size_t i = 0; i < n_params; ++i) analytic[i] = grads[i];
  analytic.at("input") = grad_in;
  return net::grad_check(all, analytic, loss, options(seed, samples));
}

model::ArchConfig tiny_arch() {
  model::ArchConfig a;
  a.backbone = net::NetSpec{{net::Conv{4, 3, 1, 1}, net::Activation{}, net::MaxPool{2}}};
  a.spp_levels = {1, 2};
  a.head_hidden = 8;
  a.lstm_hidden = 4;
  a.lstm_layers = 2;
  a.input = {1, 8, 40};
  return a;
}

net::GradCheckReport check_phoscnet(std::uint64_t seed, const std::string& word, std::size_t samples) {
  model::PhoscNet<double> m(tiny_arch());
  m.init(seed);
  Rng rng(mix_seed(seed, 99));
  nudge_biases(m.params(), rng);
  const auto image = random_tensor(m.arch().input, rng, 0, 1);
  const auto target = phosc_encode(word, m.phos_config(), m.phoc_config());
  auto loss_of = [&](const ParamStore<double>& p) {
    const auto pass = m.forward(p, image);
    return model::phosc_loss<double>(pass.phoc.output().span(), pass.phos.output().span(), target.phoc, target.phos,
                                     1.0, 4.5);
  };
  const auto pass = m.forward(m.params(), image);
  const auto loss = loss_of(m.params());
  auto grads = m.params().zeros_like();
  m.backward(m.params(), pass, loss.grad_phoc, loss.grad_phos, grads);
  return net::grad_check(
      m.params(), grads, [&](const ParamStore<double>& p) { return loss_of(p).total; }, options(seed, samples));
}

net::GradCheckReport check_ctc(std::uint64_t seed, const std::string& label, std::size_t samples) {
  model::PhoscCtc<double> m(tiny_arch());
  m.init(seed);
  Rng rng(mix_seed(seed, 98));
  nudge_biases(m.params(), rng);
  const auto image = random_tensor(m.arch().input, rng, 0, 1);
  auto grads = m.params().zeros_like();
  m.loss_and_backward(m.params(), image, label, grads);
  auto loss = [&](const ParamStore<double>& p) {
    const auto pass = m.forward(p, image);
    const auto& lg = m.logits(pass).values();
    return ctc::ctc_loss_and_grad(lg, m.time_steps(), std::string_view(label), m.alphabet()).neg_log_prob;
  };
  return net::grad_check(m.params(), grads, loss, options(seed, samples));
}

std::vector<NamedReport> standard_suite(std::uint64_t seed, std::size_t samples) {
  using namespace net;
  std::vector<NamedReport> out;
  auto layer = [&](const char* name, NetSpec spec, net::Shape in) {
    out.push_back({name, check_net(spec, in, seed, samples)});
  };
  layer("conv", {{Conv{4, 3, 1, 1}}}, {2, 7, 9});
  layer("dense", {{Dense{17}}}, {23});
  layer("maxpool", {{MaxPool{2}}}, {3, 9, 11});
  layer("spp", {{Spp{{1, 2, 3}}}}, {4, 7, 9});
  layer("relu", {{Activation{ActivationKind::kRelu}}}, {300});
  layer("sigmoid", {{Activation{ActivationKind::kSigmoid}}}, {300});
  layer("tanh", {{Activation{ActivationKind::kTanh}}}, {300});
  layer("softmax", {{Softmax{}}}, {20, 12});
  layer("height_collapse", {{HeightCollapse{}}}, {4, 5, 12});
  layer("bilstm", {{BiLstm{5, 2}}}, {6, 4});
  out.push_back({"phoscnet_loss", check_phoscnet(seed, "dog", samples)});
  out.push_back({"ctc_loss", check_ctc(seed, "cab", samples)});
  return out;
}

}  // namespace phosc::gradsuite
