#include "wxembed/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "wxembed/core/error.hpp"
#include "wxembed/core/rng.hpp"
#include "wxembed/nn/layers.hpp"
#include "wxembed/nn/models.hpp"

namespace wxe {

const char* to_string(GradTarget t) noexcept {
  switch (t) {
    case GradTarget::Linear:
      return "linear";
    case GradTarget::LayerNorm:
      return "layer_norm";
    case GradTarget::Mlp:
      return "mlp";
    case GradTarget::SpectralMixer:
      return "spectral_mixer";
    case GradTarget::AfnoBlock:
      return "afno_block";
    case GradTarget::Encoder:
      return "encoder";
    case GradTarget::Decoder:
      return "decoder";
    case GradTarget::Autoencoder:
      return "autoencoder";
    case GradTarget::Downstream:
      return "downstream";
    case GradTarget::Bespoke:
      return "bespoke";
  }
  return "?";
}

GradCheckReport run_grad_check(const GradProblem& problem, double h, double corrupt) {
  std::vector<ParamSet<double>> grads;
  for (const auto* ps : problem.params) grads.push_back(ps->zeros_like());
  problem.gradient(grads);

  GradCheckReport rep;
  for (std::size_t s = 0; s < problem.params.size(); ++s) {
    ParamSet<double>& ps = *problem.params[s];
    for (std::size_t t = 0; t < ps.size(); ++t) {
      auto& values = ps[t].data;
      for (std::size_t k = 0; k < values.size(); ++k) {
        const double saved = values[k];
        values[k] = saved + h;
        const double up = problem.loss();
        values[k] = saved - h;
        const double down = problem.loss();
        values[k] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = grads[s][t].data[k] * corrupt;
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-5});
        const double rel = std::abs(analytic - numeric) / denom;
        ++rep.n_checked;
        if (rel > rep.max_rel_error || rep.worst_param.empty()) {
          rep.max_rel_error = rel;
          rep.worst_param = ps.role() + "/" + ps[t].name + "[" + std::to_string(k) + "]";
          rep.analytic = analytic;
          rep.numeric = numeric;
        }
      }
    }
  }
  return rep;
}

ModelConfig grad_check_config() {
  ModelConfig c;
  c.patch_size = 4;
  c.embed_dim = 8;
  c.latent_dim = 6;
  c.n_blocks = 2;
  c.mlp_ratio = 2.0;
  c.n_encoder_layers = 1;
  c.n_decoder_layers = 1;
  c.n_layers = 2;
  c.in_channels = 2;
  c.out_channels = 2;
  c.grid = GridSpec{12, 16, {}};
  return c;
}

namespace {

// Parameters well away from zero so every branch (ReLU, shrinkage, sigmoid) is exercised.
void randomize(ParamSet<double>& ps, std::uint64_t seed) {
  Rng rng(seed, {0x9c});
  for (auto& t : ps.tensors())
    for (auto& v : t.data) v = 0.4 * rng.normal() + (t.init == Init::Ones ? 1.0 : 0.0);
}

Mat<double> random_mat(std::size_t rows, std::size_t cols, Rng& rng) {
  Mat<double> m(static_cast<long>(rows), static_cast<long>(cols));
  for (long k = 0; k < m.size(); ++k) m.data()[k] = rng.normal();
  return m;
}

Tensor4<double> random_tensor(std::array<std::size_t, 4> s, Rng& rng) {
  Tensor4<double> t(s[0], s[1], s[2], s[3]);
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

double dot(const Mat<double>& a, const Mat<double>& b) { return (a.array() * b.array()).sum(); }

double dot(const Tensor4<double>& a, const Tensor4<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a.data()[k] * b.data()[k];
  return s;
}

// Token-level layer: loss = sum(r * layer(x)).
template <typename Fwd, typename Bwd>
GradCheckReport check_token_layer(ParamSet<double>& ps, std::size_t rows, std::size_t in, std::size_t out,
                                  std::uint64_t seed, double corrupt, Fwd fwd, Bwd bwd) {
  randomize(ps, seed);
  Rng rng(seed, {0x9d});
  const Mat<double> x = random_mat(rows, in, rng);
  const Mat<double> r = random_mat(rows, out, rng);
  GradProblem p;
  p.params = {&ps};
  p.loss = [&] { return dot(fwd(x), r); };
  p.gradient = [&](std::vector<ParamSet<double>>& g) { bwd(x, r, g[0]); };
  return run_grad_check(p, 1e-5, corrupt);
}

GradCheckReport check_model(const PatchModel<double>& m, const std::array<std::size_t, 4>& in_shape,
                            std::uint64_t seed, double corrupt) {
  ParamSet<double> ps = m.layout();
  randomize(ps, seed);
  Rng rng(seed, {0x9e});
  const Tensor4<double> x = random_tensor(in_shape, rng);
  const Tensor4<double> y0 = m.forward(ps, x);
  const Tensor4<double> r = random_tensor(y0.shape(), rng);
  GradProblem p;
  p.params = {&ps};
  p.loss = [&] { return dot(m.forward(ps, x), r); };
  p.gradient = [&](std::vector<ParamSet<double>>& g) {
    typename PatchModel<double>::Cache c;
    m.forward(ps, x, c);
    m.backward(ps, c, r, g[0], false);
  };
  return run_grad_check(p, 1e-5, corrupt);
}

}  // namespace

GradCheckReport grad_check(GradTarget target, const ModelConfig& cfg, std::uint64_t seed, double corrupt) {
  cfg.validate();
  const std::size_t B = 2, d = cfg.embed_dim, th = cfg.token_h(), tw = cfg.token_w();
  const std::size_t rows = B * th * tw;
  const std::size_t H = cfg.grid->n_lat, W = cfg.grid->n_lon;
  const std::array<std::size_t, 4> field{B, cfg.in_channels, H, W};
  const std::array<std::size_t, 4> latent{B, cfg.latent_dim, th, tw};

  switch (target) {
    case GradTarget::Linear: {
      ParamSet<double> ps("linear");
      Linear<double> l(ps, "lin", d, cfg.latent_dim);
      return check_token_layer(
          ps, rows, d, cfg.latent_dim, seed, corrupt, [&](const Mat<double>& x) { return l.forward(ps, x); },
          [&](const Mat<double>& x, const Mat<double>& r, ParamSet<double>& g) { l.backward(ps, x, r, g, false); });
    }
    case GradTarget::LayerNorm: {
      ParamSet<double> ps("layer_norm");
      LayerNorm<double> l(ps, "ln", d);
      return check_token_layer(
          ps, rows, d, d, seed, corrupt,
          [&](const Mat<double>& x) {
            LayerNorm<double>::Cache c;
            return l.forward(ps, x, c);
          },
          [&](const Mat<double>& x, const Mat<double>& r, ParamSet<double>& g) {
            LayerNorm<double>::Cache c;
            l.forward(ps, x, c);
            l.backward(ps, c, r, g);
          });
    }
    case GradTarget::Mlp: {
      ParamSet<double> ps("mlp");
      Mlp<double> l(ps, "mlp", d, cfg.mlp_hidden());
      return check_token_layer(
          ps, rows, d, d, seed, corrupt,
          [&](const Mat<double>& x) {
            Mlp<double>::Cache c;
            return l.forward(ps, x, c);
          },
          [&](const Mat<double>& x, const Mat<double>& r, ParamSet<double>& g) {
            Mlp<double>::Cache c;
            l.forward(ps, x, c);
            l.backward(ps, c, r, g);
          });
    }
    case GradTarget::SpectralMixer: {
      ParamSet<double> ps("spectral_mixer");
      SpectralMixer<double> l(ps, "mix", d, th, tw, cfg.mixer());
      return check_token_layer(
          ps, rows, d, d, seed, corrupt,
          [&](const Mat<double>& x) {
            SpectralMixer<double>::Cache c;
            return l.forward(ps, x, c);
          },
          [&](const Mat<double>& x, const Mat<double>& r, ParamSet<double>& g) {
            SpectralMixer<double>::Cache c;
            l.forward(ps, x, c);
            l.backward(ps, c, r, g);
          });
    }
    case GradTarget::AfnoBlock: {
      ParamSet<double> ps("afno_block");
      AfnoBlock<double> l(ps, "block", d, th, tw, cfg.mlp_hidden(), cfg.mixer());
      return check_token_layer(
          ps, rows, d, d, seed, corrupt,
          [&](const Mat<double>& x) {
            AfnoBlock<double>::Cache c;
            return l.forward(ps, x, c);
          },
          [&](const Mat<double>& x, const Mat<double>& r, ParamSet<double>& g) {
            AfnoBlock<double>::Cache c;
            l.forward(ps, x, c);
            l.backward(ps, c, r, g);
          });
    }
    case GradTarget::Encoder:
      return check_model(make_encoder<double>(cfg), field, seed, corrupt);
    case GradTarget::Decoder:
      return check_model(make_decoder<double>(cfg), latent, seed, corrupt);
    case GradTarget::Downstream: {
      VariableEntry target{"target", {}, Role::Diagnostic, DataRange{0, 1}, Activation::Sigmoid, MaskKind::None};
      return check_model(make_downstream<double>(cfg, target), latent, seed, corrupt);
    }
    case GradTarget::Bespoke: {
      VariableEntry target{"target", {}, Role::Diagnostic, DataRange{0, 1}, Activation::None, MaskKind::None};
      return check_model(make_bespoke<double>(cfg, target), field, seed, corrupt);
    }
    case GradTarget::Autoencoder: {
      const auto enc = make_encoder<double>(cfg);
      const auto dec = make_decoder<double>(cfg);
      ParamSet<double> pe = enc.layout(), pd = dec.layout();
      randomize(pe, seed);
      randomize(pd, seed + 1);
      Rng rng(seed, {0x9f});
      const Tensor4<double> x = random_tensor(field, rng);
      const Tensor4<double> r = random_tensor(field, rng);
      GradProblem p;
      p.params = {&pe, &pd};
      p.loss = [&] { return dot(dec.forward(pd, enc.forward(pe, x)), r); };
      p.gradient = [&](std::vector<ParamSet<double>>& g) {
        PatchModel<double>::Cache ce, cd;
        const auto z = enc.forward(pe, x, ce);
        dec.forward(pd, z, cd);
        const auto gz = dec.backward(pd, cd, r, g[1], true);
        enc.backward(pe, ce, gz, g[0], false);
      };
      return run_grad_check(p, 1e-5, corrupt);
    }
  }
  throw UsageError("unknown grad check target");
}

}  // namespace wxe
