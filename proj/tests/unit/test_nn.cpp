#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "retina/core/rng.hpp"
#include "retina/nn/model_io.hpp"
#include "retina/nn/train.hpp"

using namespace retina;
using namespace retina::nn;
namespace fs = std::filesystem;

namespace {

template <class F>
NnErrc error_code(F&& f) {
  try {
    f();
  } catch (const NnError& e) {
    return e.code();
  }
  FAIL("expected NnError");
  return NnErrc::InvalidArgument;
}

Tensor4 random_batch(int n, Shape3 s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor4 t(n, s);
  for (auto& v : t.data) v = static_cast<float>(rng.uniform01());
  return t;
}

std::vector<LabeledImage> tiny_corpus(int per_class, std::uint64_t seed) {
  return dataset::make_synthetic_corpus({.per_class = per_class, .width = 32, .height = 32, .seed = seed});
}

}  // namespace

TEST_CASE("presets") {
  const auto micro = micro_preset();
  CHECK(init_params(micro, 1).parameter_count() == 19685);
  const auto resnet = resnet18_preset(226);
  const auto count = init_params(resnet, 1).parameter_count();
  CHECK(count >= 11'000'000);
  CHECK(count <= 12'500'000);
  CHECK(count == 11'179'077);
  CHECK(preset("resnet18_226") == resnet);
  CHECK(error_code([] { preset("vgg"); }) == NnErrc::InvalidConfig);
  CHECK(infer_shape(resnet.layers, resnet.input) == Shape3{5, 1, 1});
  CHECK(infer_shape({resnet.layers.begin(), resnet.layers.begin() + 4}, resnet.input) == Shape3{64, 57, 57});
}

TEST_CASE("config json round trip and hash") {
  for (const auto& cfg : {micro_preset(), resnet18_preset(226)}) {
    const auto back = config_from_json(nlohmann::json::parse(canonical_json(cfg)));
    CHECK(back == cfg);
    CHECK(config_hash(back) == config_hash(cfg));
  }
  CHECK(config_hash(micro_preset()) != config_hash(resnet18_preset(226)));
  CHECK(error_code([] { config_from_json(nlohmann::json::parse(R"({"input":[3,8,8],"layers":[{"kind":"lstm"}]})")); }) ==
        NnErrc::InvalidConfig);
}

TEST_CASE("config validation") {
  using L = LayerSpec;
  ModelConfig bad{"bad", {3, 8, 8}, 5, {L::conv(4, 8, 3), L::global_avg_pool(), L::dense(8, 5)}};
  CHECK(error_code([&] { validate(bad); }) == NnErrc::ShapeMismatch);
  ModelConfig wrong_head{"head", {3, 8, 8}, 5, {L::global_avg_pool(), L::dense(3, 4)}};
  CHECK(error_code([&] { validate(wrong_head); }) == NnErrc::ShapeMismatch);
  ModelConfig ok{"ok", {3, 8, 8}, 5, {L::global_avg_pool(), L::dense(3, 5), L::softmax()}};
  CHECK_NOTHROW(validate(ok));

  SUBCASE("projection inserted when the branch changes shape") {
    std::vector<L> layers = {L::residual({L::conv(3, 6, 3, 2, 1)})};
    resolve_layers(layers, {3, 8, 8});
    REQUIRE(layers[0].shortcut.size() == 1);
    CHECK(layers[0].shortcut[0] == L::conv(3, 6, 1, 2, 0, true));
    std::vector<L> bn = {L::residual({L::conv(3, 6, 3, 2, 1, false), L::batch_norm(6)})};
    resolve_layers(bn, {3, 9, 9});
    REQUIRE(bn[0].shortcut.size() == 2);
    CHECK(bn[0].shortcut[1].kind == LayerKind::BatchNorm);
    CHECK(infer_shape(bn, {3, 9, 9}) == Shape3{6, 5, 5});
  }
}

TEST_CASE("forward examples") {
  using L = LayerSpec;
  SUBCASE("identity 1x1 conv") {
    std::vector<L> layers = {L::conv(1, 1, 1, 1, 0, false)};
    auto p = make_params<float>(layers);
    p.tensors[0].data = {1.0f};
    CHECK(forward(layers, p, Tensor4(1, 1, 1, 1, 0.37f)).data[0] == 0.37f);
  }
  SUBCASE("zero dense gives zero logits and a uniform softmax") {
    std::vector<L> layers = {L::global_avg_pool(), L::dense(3, 5)};
    auto p = make_params<float>(layers);
    const auto x = random_batch(2, {3, 4, 4}, 1);
    for (float v : forward(layers, p, x).data) CHECK(v == 0.0f);
    layers.push_back(L::softmax());
    for (float v : forward(layers, p, x).data) CHECK(v == doctest::Approx(0.2).epsilon(1e-7));
  }
  SUBCASE("softmax rows sum to one") {
    const std::vector<L> layers = {L::softmax()};
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      Tensor4 x(3, 5, 1, 1);
      for (auto& v : x.data) v = static_cast<float>(rng.normal(0, 10));
      const auto y = forward(layers, make_params<float>(layers), x);
      for (int n = 0; n < 3; ++n) {
        double s = 0.0;
        for (int k = 0; k < 5; ++k) s += y.sample(n)[k];
        CHECK(std::abs(s - 1.0) <= 1e-6);
      }
    }
  }
  SUBCASE("deterministic") {
    const auto cfg = micro_preset();
    const auto p = init_params(cfg, 3);
    const auto x = random_batch(3, cfg.input, 4);
    CHECK(forward(cfg, p, x) == forward(cfg, p, x));
  }
  SUBCASE("errors") {
    const auto cfg = micro_preset();
    const auto p = init_params(cfg, 3);
    CHECK(error_code([&] { forward(cfg, p, random_batch(1, {3, 16, 16}, 1)); }) == NnErrc::ShapeMismatch);
    CHECK(error_code([&] { forward(cfg, p, random_batch(1, {1, 32, 32}, 1)); }) == NnErrc::ShapeMismatch);
    auto x = random_batch(1, cfg.input, 1);
    x.data[7] = std::nanf("");
    CHECK(error_code([&] { forward(cfg, p, x); }) == NnErrc::NonFiniteActivation);
    auto huge = p;
    for (auto& v : huge.tensors[0].data) v = 3e38f;
    CHECK(error_code([&] { forward(cfg, huge, random_batch(1, cfg.input, 1)); }) == NnErrc::NonFiniteActivation);
    auto wrong = p;
    wrong.tensors.pop_back();
    CHECK(error_code([&] { forward(cfg, wrong, random_batch(1, cfg.input, 1)); }) == NnErrc::ShapeMismatch);
  }
}

TEST_CASE("residual block with a zero branch is the identity") {
  using L = LayerSpec;
  std::vector<L> layers = {L::residual({L::conv(2, 2, 3, 1, 1), L::relu(), L::conv(2, 2, 3, 1, 1)})};
  auto p = make_params<double>(layers);  // all zeros
  Rng rng(9);
  Tensor<double> x(2, 2, 5, 5);
  for (auto& v : x.data) v = rng.normal();
  ForwardCache<double> cache;
  CHECK(forward(layers, p, x, Mode::Inference, &cache) == x);
  Tensor<double> g(2, 2, 5, 5);
  for (auto& v : g.data) v = rng.normal();
  const auto back = backward(layers, p, cache, g);
  CHECK(back.input == g);  // the zero branch passes nothing back to x
  double bias_grad = 0.0;
  for (double v : g.data) bias_grad += v;
  // the second conv's bias sees every output gradient of its channel
  const auto& gb = back.params.tensors[3].data;
  CHECK(gb[0] + gb[1] == doctest::Approx(bias_grad));
}

TEST_CASE("softmax cross-entropy") {
  Tensor4 zero(3, 5, 1, 1);
  const std::vector<int> labels = {0, 2, 4};
  const auto r = softmax_cross_entropy(zero, labels);
  CHECK(r.loss == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  CHECK(r.loss == doctest::Approx(1.60944).epsilon(1e-5));

  Tensor4 sat(1, 5, 1, 1);
  sat.data[2] = 1000.0f;
  const std::vector<int> two = {2};
  CHECK(softmax_cross_entropy(sat, two).loss == doctest::Approx(0.0).epsilon(1e-12));
  const std::vector<int> wrong = {0};
  CHECK(softmax_cross_entropy(sat, wrong).loss == doctest::Approx(-std::log(kProbabilityFloor)));

  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor4 z(4, 5, 1, 1);
    for (auto& v : z.data) v = static_cast<float>(rng.normal(0, 5));
    std::vector<int> lab(4);
    for (auto& l : lab) l = static_cast<int>(rng.uniform_int(5));
    const auto res = softmax_cross_entropy(z, lab);
    CHECK(res.loss >= 0.0);
    for (int n = 0; n < 4; ++n) {
      double s = 0.0;
      for (int k = 0; k < 5; ++k) s += res.grad.sample(n)[k];
      CHECK(std::abs(s) < 1e-7);
    }
  }
  const std::vector<int> bad = {5};
  CHECK(error_code([&] { softmax_cross_entropy(Tensor4(1, 5, 1, 1), bad); }) == NnErrc::InvalidArgument);
}

TEST_CASE("backward examples") {
  using L = LayerSpec;
  SUBCASE("zero input through conv: bias gradient is the pooled logit gradient, weight gradient zero") {
    std::vector<L> layers = {L::conv(2, 5, 3, 1, 1), L::global_avg_pool()};
    auto p = make_params<float>(layers);
    Rng rng(2);
    for (auto& v : p.tensors[0].data) v = static_cast<float>(rng.normal());
    for (auto& v : p.tensors[1].data) v = static_cast<float>(rng.normal());
    Tensor4 x(3, 2, 4, 4);
    ForwardCache<float> cache;
    const auto logits = forward(layers, p, x, Mode::Train, &cache);
    const std::vector<int> labels = {1, 4, 0};
    const auto loss = softmax_cross_entropy(logits, labels);
    const auto g = backward(layers, p, cache, loss.grad);
    for (float v : g.params.tensors[0].data) CHECK(v == 0.0f);
    for (int k = 0; k < 5; ++k) {
      double pooled = 0.0;
      for (int n = 0; n < 3; ++n) pooled += loss.grad.sample(n)[k];
      CHECK(g.params.tensors[1].data[static_cast<std::size_t>(k)] == doctest::Approx(pooled).epsilon(1e-6));
    }
  }
  SUBCASE("duplicated sample gives the single-sample gradient") {
    const auto cfg = micro_preset();
    const auto p = init_params(cfg, 8);
    const auto one = random_batch(1, cfg.input, 6);
    Tensor4 two(2, cfg.input);
    std::copy(one.data.begin(), one.data.end(), two.data.begin());
    std::copy(one.data.begin(), one.data.end(), two.data.begin() + static_cast<long>(one.size()));
    auto grad_of = [&](const Tensor4& x, std::vector<int> labels) {
      ForwardCache<float> cache;
      const auto out = forward(cfg, p, x, Mode::Train, &cache);
      return backward(cfg.layers, p, cache, softmax_cross_entropy(out, labels).grad).params;
    };
    const auto g1 = grad_of(one, {3});
    const auto g2 = grad_of(two, {3, 3});
    for (std::size_t t = 0; t < g1.tensors.size(); ++t)
      for (std::size_t i = 0; i < g1.tensors[t].data.size(); ++i)
        CHECK(g2.tensors[t].data[i] == doctest::Approx(g1.tensors[t].data[i]).epsilon(1e-5).scale(1e-6));
  }
}

TEST_CASE("adam") {
  ModelConfig cfg{"d", {2, 1, 1}, 5, {LayerSpec::dense(2, 5)}};
  auto p = make_params<float>(cfg.layers);
  auto g = make_params<float>(cfg.layers);
  g.tensors[0].data[0] = 2.0f;
  g.tensors[0].data[1] = -2.0f;
  AdamState state;
  adam_step(p, g, state, 1e-4);
  CHECK(p.tensors[0].data[0] == doctest::Approx(-1e-4).epsilon(1e-6));
  CHECK(p.tensors[0].data[1] == -p.tensors[0].data[0]);
  for (std::size_t i = 2; i < p.tensors[0].data.size(); ++i) CHECK(p.tensors[0].data[i] == 0.0f);
  for (float v : p.tensors[1].data) CHECK(v == 0.0f);
  CHECK(state.step == 1);

  auto q = init_params(micro_preset(), 1);
  const auto before = q;
  auto zero = make_params<float>(micro_preset().layers);
  AdamState s2;
  for (int i = 0; i < 3; ++i) adam_step(q, zero, s2, 1e-3);
  CHECK(q == before);
}

TEST_CASE("reduce on plateau") {
  ReduceOnPlateau a(1e-4);
  for (double l : {1.0, 0.9, 0.8}) CHECK(a.step(l) == 1e-4);
  ReduceOnPlateau b(1e-4);
  CHECK(b.step(1.0) == 1e-4);
  CHECK(b.step(1.0) == 1e-4);
  CHECK(b.step(1.0) == doctest::Approx(5e-5).epsilon(1e-15));
  ReduceOnPlateau c(1e-6);
  for (int i = 0; i < 10; ++i) CHECK(c.step(1.0) == 1e-6);
  ReduceOnPlateau d(4e-6);
  for (int i = 0; i < 20; ++i) d.step(2.0);
  CHECK(d.lr() == 1e-6);
  CHECK_THROWS_AS(ReduceOnPlateau(1e-4, PlateauConfig{.factor = 1.0}), NnError);
}

TEST_CASE("early stopping") {
  EarlyStopping a;
  for (double l = 1.0; l > 0.5; l -= 0.01) CHECK(a.step(l) == StopDecision::Continue);
  EarlyStopping b;
  CHECK(b.step(0.5) == StopDecision::Continue);
  CHECK(b.step(0.5) == StopDecision::Continue);
  CHECK(b.step(0.5) == StopDecision::Continue);
  CHECK(b.step(0.5) == StopDecision::Stop);
  EarlyStopping c;
  // exactly min_delta better counts; the exact binary values keep the
  // boundary free of rounding
  const double delta = 0.0001220703125;  // 2^-13
  EarlyStopping d(EarlyStopConfig{.patience = 1, .min_delta = delta});
  CHECK(d.step(1.0) == StopDecision::Continue);
  CHECK(d.step(1.0 - delta) == StopDecision::Continue);
  CHECK(d.step(1.0 - delta) == StopDecision::Stop);
  CHECK(improves(0.4999, 0.5, 1e-4));
  CHECK(c.step(1.0) == StopDecision::Continue);
}

TEST_CASE("training") {
  TrainConfig bad;
  bad.epochs = 0;
  CHECK(error_code([&] { bad.validate(); }) == NnErrc::InvalidArgument);
  bad.epochs = 1;
  bad.batch_size = 0;
  CHECK(error_code([&] { bad.validate(); }) == NnErrc::InvalidArgument);

  const auto corpus = tiny_corpus(8, 5);
  std::vector<LabeledImage> tr(corpus.begin(), corpus.begin() + 30), va(corpus.begin() + 30, corpus.end());
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 8;
  tc.seed = 11;
  tc.adam.lr = 1e-3;
  const auto cfg = micro_preset();
  const auto h1 = train(cfg, tc, tr, va);
  const auto h2 = train(cfg, tc, tr, va);
  CHECK(history_csv(h1) == history_csv(h2));
  CHECK(h1.best_params == h2.best_params);
  REQUIRE(h1.epochs.size() <= 3);
  CHECK(h1.best().val_loss == std::min_element(h1.epochs.begin(), h1.epochs.end(), [](auto& a, auto& b) {
                                return a.val_loss < b.val_loss;
                              })->val_loss);
  // the snapshot reproduces the recorded validation loss
  CHECK(evaluate(cfg, h1.best_params, va).loss == h1.best().val_loss);
  const auto csv = history_csv(h1);
  CHECK(csv.rfind("epoch,train_loss,train_acc,val_loss,val_acc,lr\n", 0) == 0);
  tc.seed = 12;
  CHECK(history_csv(train(cfg, tc, tr, va)) != csv);
}

TEST_CASE("batch norm running statistics") {
  const auto cfg = resnet18_preset(32);
  auto p = init_params(cfg, 1);
  const auto x = random_batch(2, cfg.input, 3);
  ForwardCache<float> cache;
  forward(cfg, p, x, Mode::Train, &cache);
  const auto mean0 = cache.layers[1].mean;
  const auto var0 = cache.layers[1].var;
  update_running_stats(cfg.layers, p, cache);
  CHECK(p.tensors[3].role == ParamRole::RunningMean);
  CHECK(p.tensors[3].data[0] == doctest::Approx(0.1 * mean0[0]));
  CHECK(p.tensors[4].data[0] == doctest::Approx(0.9 + 0.1 * var0[0]));
  ForwardCache<float> inf;
  forward(cfg, p, x, Mode::Inference, &inf);
  CHECK(error_code([&] { update_running_stats(cfg.layers, p, inf); }) == NnErrc::InvalidArgument);
}

TEST_CASE("cross validation") {
  const auto corpus = tiny_corpus(4, 2);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.adam.lr = 1e-3;
  SUBCASE("k = 2 structure") {
    std::vector<int> folds(corpus.size());
    for (std::size_t i = 0; i < folds.size(); ++i) folds[i] = static_cast<int>(i % 2);
    const auto rep = cross_validate(micro_preset(), tc, corpus, folds, 2);
    CHECK(rep.folds.size() == 2);
    CHECK(rep.val_acc.size() == 2);
    const auto j = to_json(rep);
    CHECK(j.contains("mean_val_acc"));
    CHECK(j.contains("stdev_val_acc"));
    CHECK(j["val_acc"].size() == 2);
  }
  SUBCASE("identical folds give identical results") {
    std::vector<LabeledImage> doubled(corpus.begin(), corpus.end());
    doubled.insert(doubled.end(), corpus.begin(), corpus.end());
    std::vector<int> folds(doubled.size());
    for (std::size_t i = 0; i < folds.size(); ++i) folds[i] = i < corpus.size() ? 0 : 1;
    const auto rep = cross_validate(micro_preset(), tc, doubled, folds, 2);
    CHECK(rep.val_acc[0] == rep.val_acc[1]);
    CHECK(rep.val_loss[0] == rep.val_loss[1]);
    CHECK(rep.stdev_val_acc == 0.0);
  }
  std::vector<int> one(corpus.size(), 0);
  CHECK(error_code([&] { cross_validate(micro_preset(), tc, corpus, one, 1); }) == NnErrc::InvalidArgument);
  CHECK(error_code([&] { cross_validate(micro_preset(), tc, corpus, one, 2); }) == NnErrc::InvalidArgument);
}

TEST_CASE("RCNN1 files") {
  const auto dir = fs::temp_directory_path() / "retina_test_rcnn";
  fs::remove_all(dir);
  const auto cfg = micro_preset();
  const auto p = init_params(cfg, 4);
  const auto bytes = serialize_model(cfg, p);
  CHECK(std::equal(bytes.begin(), bytes.begin() + 8, kFloatMagic));
  CHECK(bytes.size() >= 4 * p.parameter_count());
  CHECK(deserialize_model(cfg, bytes) == p);

  save_model(dir / "m.rcnn", cfg, p);
  CHECK(fs::file_size(dir / "m.rcnn") == bytes.size());
  const auto loaded = load_model(dir / "m.rcnn");
  CHECK(loaded.config == cfg);
  CHECK(loaded.params == p);

  auto corrupt = bytes;
  corrupt[0] = 'X';
  CHECK(error_code([&] { deserialize_model(cfg, corrupt); }) == NnErrc::FormatError);
  CHECK(error_code([&] { deserialize_model(resnet18_preset(32), bytes); }) == NnErrc::FormatError);
  const Bytes truncated(bytes.begin(), bytes.end() - 3);
  CHECK(error_code([&] { deserialize_model(cfg, truncated); }) == NnErrc::FormatError);
  CHECK(error_code([&] { load_model(dir / "absent.rcnn"); }) == NnErrc::IoError);

  ModelConfig empty{"empty", {5, 1, 1}, 5, {LayerSpec::relu()}};
  CHECK(serialize_model(empty, make_params<float>(empty.layers)).size() == 8 + 8 + 4);
  fs::remove_all(dir);
}
