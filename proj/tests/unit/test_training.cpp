#include <cmath>
#include <numeric>

#include "doctest.h"
#include "test_util.hpp"
#include "wxembed/core/error.hpp"
#include "wxembed/core/rng.hpp"
#include "wxembed/data/synth.hpp"
#include "wxembed/nn/grad_check.hpp"
#include "wxembed/training/loss.hpp"
#include "wxembed/training/trainer.hpp"

using namespace wxe;
using wxe::testing::TempDir;

namespace {

Tensor4<double> tensor(std::size_t b, std::size_t c, std::size_t h, std::size_t w, std::vector<double> v) {
  Tensor4<double> t(b, c, h, w);
  t.data() = std::move(v);
  return t;
}

// 8x16 grid, p = 2, d = L = 32, 2 + 2 layers.
ModelConfig tiny_ae() {
  ModelConfig c;
  c.patch_size = 2;
  c.embed_dim = 32;
  c.latent_dim = 32;
  c.n_blocks = 4;
  c.mlp_ratio = 2.0;
  c.n_encoder_layers = 2;
  c.n_decoder_layers = 2;
  c.in_channels = 54;
  c.out_channels = 54;
  c.grid = GridSpec{8, 16, {}};
  return c;
}

ModelConfig tiny_head(ModelRole role) {
  auto c = tiny_ae();
  c.role = role;
  c.n_layers = 1;
  c.out_channels = 1;
  return c;
}

TrainConfig quick_train(std::size_t epochs) {
  TrainConfig t;
  t.lr0 = 1e-3;
  t.decay_gamma = 0.99;
  t.batch_size = 2;
  t.n_epochs = epochs;
  t.seed = 5;
  return t;
}

struct Fixture {
  Dataset ds = synth_dataset(GridSpec{8, 16, {}}, 6, 7);
  std::vector<std::size_t> times{0, 1, 2, 3, 4, 5};
  ClimStats stats = training_stats(ds, times);
};

}  // namespace

TEST_CASE("masked mean squared error") {
  const auto pred = tensor(1, 1, 1, 2, {1, 3});
  const auto zero = tensor(1, 1, 1, 2, {0, 0});
  const LandSeaMask first(1, 2, {1, 0});
  const auto r = mse_loss(pred, zero, &first);
  CHECK(r.loss == 1.0);
  CHECK(r.grad.data() == std::vector<double>{2.0, 0.0});

  const auto same = mse_loss(pred, pred);
  CHECK(same.loss == 0.0);
  CHECK(same.grad.data() == std::vector<double>{0.0, 0.0});

  // All-ones mask is the unmasked loss exactly.
  Rng rng(3);
  Tensor4<double> a(2, 3, 4, 5), b(2, 3, 4, 5);
  for (auto& v : a.data()) v = rng.normal();
  for (auto& v : b.data()) v = rng.normal();
  const LandSeaMask ones(4, 5, std::vector<std::uint8_t>(20, 1));
  const auto m = mse_loss(a, b, &ones), u = mse_loss(a, b);
  CHECK(m.loss == u.loss);
  CHECK(m.grad == u.grad);

  // Gradient against central differences (quadratic: differences are exact up to roundoff).
  const LandSeaMask half(4, 5, [] {
    std::vector<std::uint8_t> v(20);
    for (std::size_t k = 0; k < 20; ++k) v[k] = k % 3 != 0;
    return v;
  }());
  const auto base = mse_loss(a, b, &half);
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    auto up = a, down = a;
    up.data()[k] += 1e-5;
    down.data()[k] -= 1e-5;
    const double num = (mse_loss(up, b, &half).loss - mse_loss(down, b, &half).loss) / 2e-5;
    worst = std::max(worst, std::abs(num - base.grad.data()[k]));
  }
  CHECK(worst < 1e-8);

  const LandSeaMask none(4, 5, std::vector<std::uint8_t>(20, 0));
  CHECK_THROWS_AS(mse_loss(a, b, &none), UsageError);
  CHECK_THROWS_AS(mse_loss(a, tensor(1, 1, 1, 2, {0, 0})), UsageError);
}

TEST_CASE("Adam update, zero gradients and non-finite gradients") {
  TrainConfig cfg;
  ParamSet<float> ps("p");
  ps.add("w", {1}, Init::Zeros);
  auto grads = ps.zeros_like();
  grads[0].data[0] = 1.0f;
  auto st = OptimizerState::fresh(ps);
  adam_step(ps, grads, st, 1e-3, cfg);
  CHECK(st.t == 1);
  CHECK(ps[0].data[0] == doctest::Approx(-9.99999e-4).epsilon(1e-6));

  ParamSet<float> q("q");
  q.add("w", {3}, Init::Ones);
  q.initialize(1);
  const auto before = q;
  auto qs = OptimizerState::fresh(q);
  adam_step(q, q.zeros_like(), qs, 1e-3, cfg);
  CHECK(q == before);

  auto bad = q.zeros_like();
  bad[0].data[1] = std::nanf("");
  CHECK_THROWS_WITH_AS(adam_step(q, bad, qs, 1e-3, cfg), doctest::Contains("q/w"), NumericError);
  CHECK(q == before);
  CHECK(qs.t == 1);
}

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  CHECK(lr_at(0, cfg) == 2e-4);
  CHECK(lr_at(1, cfg) == doctest::Approx(1.96e-4).epsilon(1e-12));
  for (std::size_t e = 1; e < 50; ++e) CHECK(lr_at(e, cfg) <= lr_at(e - 1, cfg));
  cfg.decay_gamma = 1.0;
  CHECK(lr_at(37, cfg) == cfg.lr0);

  CHECK(train_config_from_json(to_json(cfg)) == cfg);
  auto j = to_json(cfg);
  j["momentum"] = 0.9;
  CHECK_THROWS_WITH_AS(train_config_from_json(j), doctest::Contains("momentum"), UsageError);
  cfg.decay_gamma = 1.5;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("reconstruction-loss gradients match central differences") {
  const auto cfg = grad_check_config();
  const auto enc = make_encoder<double>(cfg);
  const auto dec = make_decoder<double>(cfg);
  auto pe = enc.layout(), pd = dec.layout();
  Rng rng(17);
  for (auto* ps : {&pe, &pd})
    for (auto& t : ps->tensors())
      for (auto& v : t.data) v = 0.4 * rng.normal() + (t.init == Init::Ones ? 1.0 : 0.0);
  Tensor4<double> x(2, cfg.in_channels, cfg.grid->n_lat, cfg.grid->n_lon);
  for (auto& v : x.data()) v = rng.normal();

  GradProblem p;
  p.params = {&pe, &pd};
  p.loss = [&] { return mse_loss(dec.forward(pd, enc.forward(pe, x)), x).loss; };
  p.gradient = [&](std::vector<ParamSet<double>>& g) {
    PatchModel<double>::Cache ce, cd;
    const auto y = dec.forward(pd, enc.forward(pe, x, ce), cd);
    const auto gz = dec.backward(pd, cd, mse_loss(y, x).grad, g[1], true);
    enc.backward(pe, ce, gz, g[0], false);
  };
  const auto rep = run_grad_check(p);
  INFO("worst ", rep.worst_param);
  CHECK(rep.max_rel_error < 1e-3);
}

TEST_CASE("sample preparation normalizes inputs and keeps activated targets physical") {
  Fixture f;
  const auto s = make_samples(f.ds, f.times, f.stats, std::string("tcc"));
  CHECK(s.inputs.shape() == std::array<std::size_t, 4>{6, 54, 8, 16});
  CHECK_FALSE(s.target_normalized);
  CHECK_FALSE(s.loss_mask);
  const auto tcc = f.ds.catalog.index_of("tcc");
  CHECK(s.targets.plane(2, 0)[5] == f.ds.data.plane(2, tcc)[5]);
  double sum = 0.0;
  for (float v : s.inputs.plane(0, 0)) sum += v;
  CHECK(std::isfinite(sum));

  const auto l = make_samples(f.ds, f.times, f.stats, std::string("stl1"));
  CHECK(l.target_normalized);
  REQUIRE(l.loss_mask);
  CHECK(l.loss_mask->land_count() > 0);
  CHECK_FALSE(make_samples(f.ds, f.times, f.stats, std::string("stl1"), LossMaskMode::None).loss_mask);

  CHECK_THROWS_AS(make_samples(f.ds, f.times, f.stats, std::string("t2m")), UsageError);
  CHECK_THROWS_AS(make_samples(f.ds, f.times, f.stats, std::string("nope")), UsageError);
  const std::size_t oob[] = {6};
  CHECK_THROWS_AS(make_samples(f.ds, oob, f.stats, std::nullopt), UsageError);
}

TEST_CASE("autoencoder overfits four samples") {
  const auto ds = synth_dataset(GridSpec{8, 16, {}}, 4, 11);
  const std::vector<std::size_t> times{0, 1, 2, 3};
  const auto data = make_samples(ds, times, training_stats(ds, times), std::nullopt);
  TrainConfig t;
  t.lr0 = 2e-3;
  t.decay_gamma = 0.999;
  t.batch_size = 4;
  t.n_epochs = 2000;
  t.seed = 1;
  // Run in chunks of 100 epochs (one step each) and stop once the target is met.
  TrainingState st = train_autoencoder(data, tiny_ae(), t, {.stop_after_epoch = 100});
  while (st.history.back().loss >= 1e-2 && st.epoch < t.n_epochs) {
    st = train_autoencoder(data, tiny_ae(), t, {.stop_after_epoch = st.epoch + 100}, &st);
  }
  INFO("loss ", st.history.back().loss, " after ", st.step, " steps");
  CHECK(st.history.back().loss < 1e-2);
  CHECK(st.step <= 2000);
  const auto means = epoch_means(st.history);
  CHECK(means.back() < means.front());
}

TEST_CASE("training is deterministic and resumes bit-exactly") {
  Fixture f;
  TempDir dir;
  const auto data = make_samples(f.ds, f.times, f.stats, std::nullopt);
  const auto t = quick_train(4);
  const auto a = train_autoencoder(data, tiny_ae(), t);
  const auto b = train_autoencoder(data, tiny_ae(), t);
  save_checkpoint(a, dir.file("a.wxc"));
  save_checkpoint(b, dir.file("b.wxc"));
  CHECK(testing::read_bytes(dir.file("a.wxc")) == testing::read_bytes(dir.file("b.wxc")));
  CHECK(a.step == 12);
  CHECK(a.history.size() == 12);

  // Interrupt after two epochs, round-trip through disk, resume.
  const auto half = train_autoencoder(data, tiny_ae(), t, {.stop_after_epoch = 2});
  CHECK(half.epoch == 2);
  save_checkpoint(half, dir.file("half.wxc"));
  const auto loaded = load_checkpoint(dir.file("half.wxc"));
  CHECK(loaded == half);
  const auto resumed = train_autoencoder(data, tiny_ae(), t, {}, &loaded);
  CHECK(resumed == a);

  auto other = t;
  other.lr0 = 5e-4;
  CHECK_THROWS_AS(train_autoencoder(data, tiny_ae(), other, {}, &loaded), UsageError);
}

TEST_CASE("checkpoint round trip and corruption detection") {
  Fixture f;
  TempDir dir;
  const auto data = make_samples(f.ds, f.times, f.stats, std::string("tcc"));
  auto ae = train_autoencoder(make_samples(f.ds, f.times, f.stats, std::nullopt), tiny_ae(), quick_train(1));
  const auto ds = train_downstream(data, ae, tiny_head(ModelRole::Downstream), quick_train(1));
  const auto path = dir.file("d.wxc");
  save_checkpoint(ds, path);
  const auto back = load_checkpoint(path);
  CHECK(back == ds);
  CHECK(back.group("encoder").params.fingerprint() == ae.group("encoder").params.fingerprint());
  CHECK_FALSE(back.group("encoder").trainable);
  CHECK(back.target == std::optional<std::string>("tcc"));
  save_checkpoint(back, dir.file("again.wxc"));
  CHECK(testing::read_bytes(path) == testing::read_bytes(dir.file("again.wxc")));

  const auto bytes = testing::read_bytes(path);
  auto tampered = bytes;
  tampered[tampered.size() - 100] ^= 0x01;
  testing::write_bytes(dir.file("t.wxc"), tampered);
  try {
    load_checkpoint(dir.file("t.wxc"));
    FAIL("tampered checkpoint loaded");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::ChecksumMismatch);
  }
  auto magic = bytes;
  magic[3] = '2';
  testing::write_bytes(dir.file("m.wxc"), magic);
  try {
    load_checkpoint(dir.file("m.wxc"));
    FAIL("bad magic loaded");
  } catch (const FormatError& e) {
    CHECK(e.kind() == FormatError::Kind::BadMagic);
  }
  CHECK_THROWS_AS(load_checkpoint(dir.file("missing.wxc")), Error);
  testing::write_bytes(dir.file("short.wxc"), bytes.substr(0, 10));
  CHECK_THROWS_AS(load_checkpoint(dir.file("short.wxc")), FormatError);

  write_loss_csv(ds.history, dir.file("loss.csv"));
  const auto csv = testing::read_bytes(dir.file("loss.csv"));
  CHECK(csv.rfind("epoch,step,lr,loss\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == long(ds.history.size() + 1));
}

TEST_CASE("downstream training leaves the encoder untouched") {
  Fixture f;
  const auto ae = train_autoencoder(make_samples(f.ds, f.times, f.stats, std::nullopt), tiny_ae(), quick_train(2));
  const auto before = ae.group("encoder").params.fingerprint();
  const auto data = make_samples(f.ds, f.times, f.stats, std::string("stl1"));
  const auto head = tiny_head(ModelRole::Downstream);

  auto t = quick_train(3);
  const auto st = train_downstream(data, ae, head, t);
  CHECK(st.group("encoder").params.fingerprint() == before);
  CHECK(ae.group("encoder").params.fingerprint() == before);
  CHECK(st.group("downstream").trainable);
  CHECK(st.target_normalized);
  CHECK(epoch_means(st.history).back() < epoch_means(st.history).front());

  t.cache_latents = true;
  const auto cached = train_downstream(data, ae, head, t);
  CHECK(cached.group("downstream").params == st.group("downstream").params);

  CHECK_THROWS_AS(train_downstream(make_samples(f.ds, f.times, f.stats, std::nullopt), ae, head, quick_train(1)),
                  UsageError);
  const auto bes = train_bespoke(data, tiny_head(ModelRole::Bespoke), quick_train(1));
  CHECK_THROWS_AS(train_downstream(data, bes, head, quick_train(1)), UsageError);
  auto wrong = head;
  wrong.latent_dim = 16;
  CHECK_THROWS_AS(train_downstream(data, ae, wrong, quick_train(1)), UsageError);

  auto tampered = st.group("encoder").params;
  tampered[0].data[0] += 1.0f;
  CHECK_THROWS_AS(verify_frozen(tampered, before), FreezeViolation);
}

TEST_CASE("bespoke training is deterministic and converges") {
  Fixture f;
  const auto data = make_samples(f.ds, f.times, f.stats, std::string("tcc"));
  const auto cfg = tiny_head(ModelRole::Bespoke);
  const auto a = train_bespoke(data, cfg, quick_train(5));
  const auto b = train_bespoke(data, cfg, quick_train(5));
  CHECK(a == b);
  const auto means = epoch_means(a.history);
  CHECK(means.back() < means.front());
  auto ds_cfg = tiny_head(ModelRole::Downstream);
  CHECK(count_params(cfg) > count_params(ds_cfg));
}

TEST_CASE("divergence aborts with the last good state") {
  Fixture f;
  auto data = make_samples(f.ds, f.times, f.stats, std::nullopt);
  data.inputs.data()[123] = std::numeric_limits<float>::infinity();
  try {
    train_autoencoder(data, tiny_ae(), quick_train(2));
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    const auto& last = e.last_good();
    CHECK(last.history.size() == last.step);
    for (const auto& g : last.groups)
      for (const auto& t : g.params.tensors())
        for (float v : t.data) REQUIRE(std::isfinite(v));
  }
}
