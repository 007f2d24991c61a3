#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "wxembed/core/error.hpp"
#include "wxembed/core/rng.hpp"
#include "wxembed/nn/grad_check.hpp"
#include "wxembed/nn/models.hpp"

using namespace wxe;

namespace {

using cplx = std::complex<double>;

// Direct O(n^2) orthonormal 2-D DFT of one feature column on an h x w grid.
std::vector<cplx> naive_dft(const std::vector<cplx>& x, std::size_t h, std::size_t w, bool inverse) {
  std::vector<cplx> out(h * w);
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < h; ++k)
    for (std::size_t l = 0; l < w; ++l) {
      cplx acc = 0;
      for (std::size_t m = 0; m < h; ++m)
        for (std::size_t n = 0; n < w; ++n) {
          const double a = sign * 2.0 * std::numbers::pi *
                           (double(k * m) / double(h) + double(l * n) / double(w));
          acc += x[m * w + n] * cplx(std::cos(a), std::sin(a));
        }
      out[k * w + l] = acc / std::sqrt(double(h * w));
    }
  return out;
}

Mat<double> random_mat(long rows, long cols, std::uint64_t seed) {
  Rng rng(seed);
  Mat<double> m(rows, cols);
  for (long k = 0; k < m.size(); ++k) m.data()[k] = rng.normal();
  return m;
}

template <typename T>
Tensor4<T> random_tensor(std::size_t b, std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  Tensor4<T> t(b, c, h, w);
  for (auto& v : t.data()) v = static_cast<T>(rng.normal());
  return t;
}

ModelConfig small_config() {
  ModelConfig c;
  c.patch_size = 4;
  c.embed_dim = 16;
  c.latent_dim = 12;
  c.n_blocks = 4;
  c.n_encoder_layers = 2;
  c.n_decoder_layers = 1;
  c.n_layers = 2;
  c.in_channels = 3;
  c.out_channels = 3;
  c.grid = GridSpec{16, 32, {}};
  return c;
}

const VariableEntry kTcc{"tcc", {}, Role::Diagnostic, DataRange{0, 1}, Activation::Sigmoid, MaskKind::None};
const VariableEntry kStl1{"stl1", {}, Role::Diagnostic, DataRange{220, 290}, Activation::None, MaskKind::LandSea};

}  // namespace

TEST_CASE("patchify rearranges losslessly and names the offending dimension") {
  const auto x = random_tensor<float>(1, 2, 4, 4, 3);
  const auto tok = patchify(x, 2);
  CHECK(tok.rows() == 1 * 2 * 2);
  CHECK(tok.cols() == 8);
  // token (i=1, j=0), channel 1, offset (u=0, v=1)
  CHECK(tok(2, 1 * 4 + 0 * 2 + 1) == x(0, 1, 2, 1));
  CHECK(depatchify(tok, 1, 2, 4, 4, 2) == x);

  const auto y = random_tensor<double>(3, 5, 16, 24, 4);
  CHECK(depatchify(patchify(y, 8), 3, 5, 16, 24, 8) == y);
  CHECK(tokens_to_grid(grid_to_tokens(y), 3, 16, 24) == y);

  Tensor4<float> bad(1, 1, 10, 16);
  try {
    patchify(bad, 8);
    FAIL("expected divisibility error");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("height 10") != std::string::npos);
  }
  Tensor4<float> bad_w(1, 1, 16, 12);
  CHECK_THROWS_WITH_AS(patchify(bad_w, 8), doctest::Contains("width 12"), UsageError);
}

TEST_CASE("2-D DFT agrees with a direct summation, round-trips and preserves energy") {
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{4, 4}, {3, 5}, {6, 8}}) {
    const long d = 3;
    Dft2d<double> dft(h, w);
    const Mat<double> xr = random_mat(long(h * w), d, 10 + h), xi = random_mat(long(h * w), d, 20 + w);
    Mat<double> zr(long(h * w), d), zi(long(h * w), d);
    dft.forward(xr.data(), xi.data(), d, zr.data(), zi.data());
    for (long c = 0; c < d; ++c) {
      std::vector<cplx> col(h * w);
      for (std::size_t k = 0; k < h * w; ++k) col[k] = {xr(long(k), c), xi(long(k), c)};
      const auto ref = naive_dft(col, h, w, false);
      for (std::size_t k = 0; k < h * w; ++k) {
        CHECK(zr(long(k), c) == doctest::Approx(ref[k].real()).epsilon(1e-12).scale(1));
        CHECK(zi(long(k), c) == doctest::Approx(ref[k].imag()).epsilon(1e-12).scale(1));
      }
    }
    // Parseval: orthonormal transform keeps the squared norm.
    const double e_in = xr.squaredNorm() + xi.squaredNorm(), e_out = zr.squaredNorm() + zi.squaredNorm();
    CHECK(std::abs(e_in - e_out) <= 1e-6 * e_in);

    Mat<double> br(long(h * w), d), bi(long(h * w), d);
    dft.inverse(zr.data(), zi.data(), d, br.data(), bi.data());
    CHECK((br - xr).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((bi - xi).cwiseAbs().maxCoeff() < 1e-6);

    // Real input: the real part of the inverse recovers it.
    dft.forward(xr.data(), nullptr, d, zr.data(), zi.data());
    Mat<double> back(long(h * w), d);
    dft.inverse_real(zr.data(), zi.data(), d, back.data());
    CHECK((back - xr).cwiseAbs().maxCoeff() < 1e-6);
  }

  Dft2d<float> f(4, 4);
  const Mat<float> x = random_mat(16, 5, 77).cast<float>();
  Mat<float> zr(16, 5), zi(16, 5), back(16, 5);
  f.forward(x.data(), nullptr, 5, zr.data(), zi.data());
  f.inverse_real(zr.data(), zi.data(), 5, back.data());
  CHECK((back - x).cwiseAbs().maxCoeff() < 1e-5f);
}

TEST_CASE("kept modes select the lowest signed frequencies per axis") {
  CHECK(kept_modes(4, 8, 1.0).size() == 32);
  // ceil(0.5 * 3) = 2 along h = 4 (frequencies 0, +-1), ceil(0.5 * 5) = 3 along w = 8 (0, +-1, +-2)
  const auto m = kept_modes(4, 8, 0.5);
  CHECK(m.size() == 3 * 5);
  for (auto idx : m) {
    CHECK(std::abs(signed_frequency(idx / 8, 4)) < 2);
    CHECK(std::abs(signed_frequency(idx % 8, 8)) < 3);
  }
  CHECK(kept_modes(4, 8, 1e-6).size() == 1);  // DC always survives
  CHECK_THROWS_AS(kept_modes(4, 8, 0.0), UsageError);
  CHECK_THROWS_AS(kept_modes(4, 8, 1.5), UsageError);
}

TEST_CASE("spectral mixer: zero weights, infinite threshold and energy bound") {
  const std::size_t h = 4, w = 6, d = 8;
  const Mat<double> x = random_mat(long(2 * h * w), long(d), 5);
  {
    ParamSet<double> ps("t");
    SpectralMixer<double> mix(ps, "mix", d, h, w, {2, 0.0, 1.0});
    SpectralMixer<double>::Cache c;
    CHECK(mix.forward(ps, x, c).cwiseAbs().maxCoeff() == 0.0);
  }
  {
    ParamSet<double> ps("t");
    SpectralMixer<double> mix(ps, "mix", d, h, w, {2, 1e30, 1.0});
    ps.initialize(9, 0.5);
    SpectralMixer<double>::Cache c;
    CHECK(mix.forward(ps, x, c).cwiseAbs().maxCoeff() == 0.0);
  }
  for (double keep : {1.0, 0.5}) {
    ParamSet<double> ps("t");
    SpectralMixer<double> mix(ps, "mix", d, h, w, {2, 0.05, keep});
    ps.initialize(11, 0.5);
    SpectralMixer<double>::Cache c;
    const Mat<double> y = mix.forward(ps, x, c);
    const double kept = c.p2r.squaredNorm() + c.p2i.squaredNorm();
    CHECK(y.squaredNorm() <= kept + 1e-12);
  }
  ParamSet<double> ps("t");
  SpectralMixer<double> mix(ps, "mix", d, h, w, {2, 0.01, 1.0});
  Mat<double> bad = x;
  bad(3, 2) = std::nan("");
  SpectralMixer<double>::Cache c;
  CHECK_THROWS_AS(mix.forward(ps, bad, c), NumericError);
  ParamSet<double> ps2("t");
  CHECK_THROWS_AS(SpectralMixer<double>(ps2, "m", d, 1, 6, {}), UsageError);
  CHECK_THROWS_AS(SpectralMixer<double>(ps2, "m", 10, 4, 6, {4, 0.01, 1.0}), UsageError);
}

TEST_CASE("AFNO block with zeroed sub-modules is the identity") {
  const std::size_t h = 3, w = 4, d = 8;
  ParamSet<float> ps("t");
  AfnoBlock<float> block(ps, "b", d, h, w, 32, {2, 0.01, 1.0});
  const Mat<float> x = random_mat(long(2 * h * w), long(d), 6).cast<float>();
  AfnoBlock<float>::Cache c;
  CHECK(block.forward(ps, x, c) == x);  // all-zero weights: both residual branches vanish

  ps.initialize(3);
  const Mat<float> y = block.forward(ps, x, c);
  CHECK(y.rows() == x.rows());
  CHECK(y.cols() == x.cols());
  CHECK(y != x);
}

TEST_CASE("encoder and decoder honour the full-width shape contract") {
  ModelConfig cfg;  // d = L = 768, p = 8
  cfg.n_encoder_layers = 1;
  cfg.n_decoder_layers = 1;
  cfg.grid = GridSpec{32, 64, {}};
  const auto enc = make_encoder<float>(cfg);
  const auto dec = make_decoder<float>(cfg);
  const auto pe = enc.init_params(1), pd = dec.init_params(2);
  const auto x = random_tensor<float>(1, 54, 32, 64, 7);
  const auto z = enc.forward(pe, x);
  CHECK(z.shape() == std::array<std::size_t, 4>{1, 768, 4, 8});
  const auto y = dec.forward(pd, z);
  CHECK(y.shape() == x.shape());
  CHECK(enc.forward(pe, x) == z);  // deterministic

  CHECK_THROWS_AS(enc.forward(pe, random_tensor<float>(1, 53, 32, 64, 1)), UsageError);
  CHECK_THROWS_AS(enc.forward(pd, x), UsageError);
}

TEST_CASE("downstream and bespoke heads produce one full-resolution channel") {
  auto cfg = small_config();
  cfg.in_channels = cfg.out_channels = 5;
  const auto enc = make_encoder<float>(cfg);
  const auto x = random_tensor<float>(2, 5, 16, 32, 8);
  const auto z = enc.forward(enc.init_params(4), x);

  const auto tcc = make_downstream<float>(cfg, kTcc);
  auto pt = tcc.init_params(5);
  for (auto& t : pt.tensors())
    for (auto& v : t.data) v *= 50.0f;  // drive the logits far from zero
  const auto yt = tcc.forward(pt, z);
  CHECK(yt.shape() == std::array<std::size_t, 4>{2, 1, 16, 32});
  for (float v : yt.data()) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }

  const auto stl1 = make_downstream<float>(cfg, kStl1);
  auto ps = stl1.init_params(6);
  for (auto& t : ps.tensors())
    for (auto& v : t.data) v *= 50.0f;
  const auto ys = stl1.forward(ps, z);
  bool outside = false;
  for (float v : ys.data()) outside |= (v < 0.0f || v > 1.0f);
  CHECK(outside);  // no squashing

  const auto bes = make_bespoke<float>(cfg, kStl1);
  CHECK(bes.forward(bes.init_params(7), x).shape() == std::array<std::size_t, 4>{2, 1, 16, 32});
}

TEST_CASE("count_params matches allocation and the closed form") {
  // Patch embed alone: C = 3, p = 2, d = 8 -> 3*4*8 + 8.
  {
    ParamSet<float> ps("t");
    Linear<float> embed(ps, "embed", 3 * 2 * 2, 8);
    CHECK(ps.numel() == 104);
  }
  auto cfg = small_config();
  for (double keep : {1.0, 0.3}) {
    cfg.mode_keep_fraction = keep;
    cfg.role = ModelRole::Autoencoder;
    CHECK(count_encoder_params(cfg) == make_encoder<float>(cfg).layout().numel());
    CHECK(count_decoder_params(cfg) == make_decoder<float>(cfg).layout().numel());
    CHECK(count_params(cfg) == count_encoder_params(cfg) + count_decoder_params(cfg));
    cfg.role = ModelRole::Downstream;
    cfg.out_channels = 1;
    CHECK(count_params(cfg) == make_downstream<float>(cfg, kTcc).layout().numel());
    cfg.role = ModelRole::Bespoke;
    CHECK(count_params(cfg) == make_bespoke<float>(cfg, kTcc).layout().numel());
    cfg.out_channels = cfg.in_channels;
  }
  cfg.role = ModelRole::Autoencoder;
  cfg.grid.reset();
  CHECK_THROWS_AS(count_params(cfg), UsageError);
}

TEST_CASE("full-scale parameter counts land near the published sizes") {
  const double ae = double(count_params(ModelConfig::full_scale(ModelRole::Autoencoder)));
  const double ds = double(count_params(ModelConfig::full_scale(ModelRole::Downstream)));
  const double bs = double(count_params(ModelConfig::full_scale(ModelRole::Bespoke)));
  CHECK(std::abs(ae / 49e6 - 1.0) <= 0.25);
  CHECK(std::abs(ds / 28e6 - 1.0) <= 0.25);
  CHECK(std::abs(bs / 75e6 - 1.0) <= 0.25);
  CHECK(ds < 0.5 * bs);
}

TEST_CASE("model config validation") {
  auto cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.embed_dim = 18;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("n_blocks"), UsageError);
  cfg = small_config();
  cfg.grid = GridSpec{18, 32, {}};
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("n_lat 18"), UsageError);
  cfg = small_config();
  cfg.mode_keep_fraction = 0.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = small_config();
  CHECK(model_config_from_json(to_json(cfg)) == cfg);
  auto j = to_json(cfg);
  j["depth"] = 3;
  CHECK_THROWS_WITH_AS(model_config_from_json(j), doctest::Contains("depth"), UsageError);
}

TEST_CASE("parameter fingerprint tracks every element") {
  const auto enc = make_encoder<float>(small_config());
  auto ps = enc.init_params(21);
  const auto fp = ps.fingerprint();
  CHECK(enc.init_params(21).fingerprint() == fp);
  CHECK(enc.init_params(22).fingerprint() != fp);
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto copy = ps;
    auto& t = copy[std::size_t(rng.integer(0, long(copy.size()) - 1))];
    auto& v = t.data[std::size_t(rng.integer(0, long(t.data.size()) - 1))];
    v = std::nextafter(v, 1e9f);
    CHECK(copy.fingerprint() != fp);
  }
}

TEST_CASE("analytic gradients match central differences") {
  const auto cfg = grad_check_config();
  CHECK(count_params(cfg) <= 10000);

  const auto lin = grad_check(GradTarget::Linear, cfg, 1);
  CHECK(lin.max_rel_error < 1e-8);

  for (auto target : {GradTarget::LayerNorm, GradTarget::Mlp, GradTarget::SpectralMixer, GradTarget::AfnoBlock,
                      GradTarget::Encoder, GradTarget::Decoder, GradTarget::Autoencoder, GradTarget::Downstream,
                      GradTarget::Bespoke}) {
    const auto rep = grad_check(target, cfg, 2);
    INFO(to_string(target), " worst ", rep.worst_param, " analytic ", rep.analytic, " numeric ", rep.numeric);
    CHECK(rep.n_checked > 0);
    CHECK(rep.max_rel_error < 1e-3);
  }

  auto truncated = cfg;
  truncated.mode_keep_fraction = 0.5;
  CHECK(grad_check(GradTarget::SpectralMixer, truncated, 3).max_rel_error < 1e-3);

  // The checker itself must notice a 1% error.
  CHECK(grad_check(GradTarget::Autoencoder, cfg, 2, 1.01).max_rel_error > 1e-3);
  CHECK(grad_check(GradTarget::Linear, cfg, 1, 1.01).max_rel_error > 1e-3);
}
