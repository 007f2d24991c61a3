#include "wxembed/training/trainer.hpp"

#include <cmath>
#include <numeric>

#include "wxembed/core/checksum.hpp"
#include "wxembed/core/error.hpp"
#include "wxembed/core/rng.hpp"
#include "wxembed/training/adam.hpp"
#include "wxembed/training/loss.hpp"

namespace wxe {

namespace {

// Stream ids under TrainConfig::seed.
constexpr std::uint64_t kShuffleStream = 11;
constexpr std::uint64_t kInitStream = 12;

Tensor4<float> gather(const Tensor4<float>& src, std::span<const std::size_t> idx) {
  Tensor4<float> out(idx.size(), src.channels(), src.height(), src.width());
  const std::size_t stride = src.channels() * src.plane();
  for (std::size_t n = 0; n < idx.size(); ++n) {
    std::copy_n(src.data().begin() + static_cast<long>(idx[n] * stride), stride,
                out.data().begin() + static_cast<long>(n * stride));
  }
  return out;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Rng rng(seed, {kShuffleStream, epoch});
  for (std::size_t i = n; i-- > 1;) std::swap(p[i], p[std::size_t(rng.integer(0, std::int64_t(i)))]);
  return p;
}

void check_finite_grads(const std::vector<ParamSet<float>>& grads) {
  for (const auto& g : grads)
    for (const auto& t : g.tensors())
      for (float v : t.data)
        if (!std::isfinite(v)) throw NumericError("non-finite gradient in " + g.role() + "/" + t.name);
}

ParamGroup fresh_group(const ParamSet<float>& layout, std::uint64_t seed, std::uint64_t which) {
  ParamGroup g;
  g.params = layout;
  g.params.initialize(derive_seed(seed, {kInitStream, which}));
  g.trainable = true;
  g.opt = OptimizerState::fresh(g.params);
  return g;
}

void check_resume(const TrainingState& r, ModelRole role, const ModelConfig& cfg, const TrainConfig& train) {
  if (r.role != role) throw UsageError("cannot resume: checkpoint role is " + std::string(to_string(r.role)));
  if (!(r.model == cfg)) throw UsageError("cannot resume: model config differs from the checkpoint");
  TrainConfig a = r.train, b = train;
  a.n_epochs = b.n_epochs;
  a.snapshot_every = b.snapshot_every;
  if (!(a == b)) throw UsageError("cannot resume: train config differs from the checkpoint");
}

// The loop shared by every trainer. `step` computes the batch loss and the gradients of
// every trainable group (in group order); updates are applied here after all checks.
template <typename StepFn>
void run_epochs(TrainingState& st, std::size_t n_samples, const TrainHooks& hooks, StepFn&& step) {
  const TrainConfig& cfg = st.train;
  if (n_samples < cfg.batch_size) {
    throw UsageError("training set has " + std::to_string(n_samples) + " samples, fewer than batch_size " +
                     std::to_string(cfg.batch_size));
  }
  for (std::size_t epoch = st.epoch; epoch < cfg.n_epochs; ++epoch) {
    if (hooks.stop_after_epoch && epoch >= *hooks.stop_after_epoch) return;
    const auto order = epoch_order(n_samples, cfg.seed, epoch);
    const double lr = lr_at(epoch, cfg);
    for (std::size_t start = 0; start < n_samples; start += cfg.batch_size) {
      const std::size_t end = std::min(n_samples, start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      std::vector<ParamSet<float>> grads;
      double loss = 0.0;
      try {
        loss = step(idx, grads);
        if (!std::isfinite(loss)) throw NumericError("loss became non-finite");
        check_finite_grads(grads);
      } catch (const NumericError& e) {
        throw TrainingDiverged(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(st.step + 1),
                               st);
      }
      std::size_t gi = 0;
      for (auto& g : st.groups) {
        if (!g.trainable) continue;
        adam_step(g.params, grads.at(gi++), g.opt, lr, cfg);
      }
      ++st.step;
      st.history.push_back({epoch, st.step, lr, loss});
    }
    st.epoch = epoch + 1;
    if (hooks.on_epoch) hooks.on_epoch(st);
  }
}

TrainingState base_state(ModelRole role, const ModelConfig& cfg, const TrainConfig& train, const SampleSet& data) {
  TrainingState st;
  st.role = role;
  st.model = cfg;
  st.train = train;
  st.stats = data.stats;
  st.dataset_checksum = data.dataset_checksum;
  if (data.target) st.target = data.target->name;
  st.target_normalized = data.target_normalized;
  return st;
}

}  // namespace

Tensor4<float> SampleSet::input_batch(std::span<const std::size_t> idx) const { return gather(inputs, idx); }

Tensor4<float> SampleSet::target_batch(std::span<const std::size_t> idx) const {
  if (targets.size() == 0) throw UsageError("sample set has no target");
  return gather(targets, idx);
}

ClimStats training_stats(const Dataset& ds, std::span<const std::size_t> times) {
  std::vector<std::size_t> all(ds.catalog.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return compute_clim_stats(ds.data, ds.catalog, all, times);
}

SampleSet make_samples(const Dataset& ds, std::span<const std::size_t> times, const ClimStats& stats,
                       const std::optional<std::string>& target, LossMaskMode mask_mode) {
  if (times.empty()) throw UsageError("no timesteps selected");
  for (auto t : times) {
    if (t >= ds.n_times()) {
      throw UsageError("timestep " + std::to_string(t) + " is outside the dataset (" + std::to_string(ds.n_times()) +
                       " steps)");
    }
  }
  SampleSet s;
  s.stats = stats;
  s.times.assign(times.begin(), times.end());
  const auto all_times = ds.timestamps();
  for (auto t : times) s.timestamps.push_back(all_times[t]);

  const auto prog = ds.catalog.indices(Role::Prognostic);
  const std::size_t N = times.size(), H = ds.grid.n_lat, W = ds.grid.n_lon, plane = H * W;
  s.inputs = Tensor4<float>(N, prog.size(), H, W);
  for (std::size_t c = 0; c < prog.size(); ++c) {
    const auto& st = stats.at(ds.catalog[prog[c]].name);
    for (std::size_t n = 0; n < N; ++n) {
      const auto src = ds.data.plane(times[n], prog[c]);
      auto dst = s.inputs.plane(n, c);
      for (std::size_t k = 0; k < plane; ++k) dst[k] = static_cast<float>((src[k] - st.mean) / st.sigma);
    }
  }

  bool want_mask = mask_mode == LossMaskMode::LandSea;
  if (target) {
    const std::size_t ci = ds.catalog.index_of(*target);
    const auto& entry = ds.catalog[ci];
    if (entry.role != Role::Diagnostic) throw UsageError("'" + *target + "' is not a diagnostic variable");
    s.target = entry;
    s.target_normalized = entry.activation == Activation::None;
    const ChannelStat* st = s.target_normalized ? &stats.at(entry.name) : nullptr;
    s.targets = Tensor4<float>(N, 1, H, W);
    for (std::size_t n = 0; n < N; ++n) {
      const auto src = ds.data.plane(times[n], ci);
      auto dst = s.targets.plane(n, 0);
      for (std::size_t k = 0; k < plane; ++k) {
        dst[k] = st ? static_cast<float>((src[k] - st->mean) / st->sigma) : src[k];
      }
    }
    if (mask_mode == LossMaskMode::Catalog) want_mask = entry.mask == MaskKind::LandSea;
  }
  if (want_mask) {
    if (!ds.mask) throw UsageError("a land-sea loss mask was requested but the dataset has no mask");
    s.loss_mask = ds.mask;
  }
  return s;
}

Tensor4<float> encode_samples(const PatchModel<float>& encoder, const ParamSet<float>& params,
                              const Tensor4<float>& inputs) {
  Tensor4<float> out;
  for (std::size_t n = 0; n < inputs.batch(); ++n) {
    const std::size_t one[] = {n};
    const auto z = encoder.forward(params, gather(inputs, one));
    if (n == 0) out = Tensor4<float>(inputs.batch(), z.channels(), z.height(), z.width());
    std::copy(z.data().begin(), z.data().end(), out.data().begin() + static_cast<long>(n * z.size()));
  }
  return out;
}

void verify_frozen(const ParamSet<float>& params, std::uint64_t expected) {
  const auto fp = params.fingerprint();
  if (fp != expected) {
    throw FreezeViolation("frozen '" + params.role() + "' parameters changed: fingerprint " + to_hex(expected) +
                          " became " + to_hex(fp));
  }
}

TrainingState train_autoencoder(const SampleSet& data, const ModelConfig& cfg, const TrainConfig& train,
                                const TrainHooks& hooks, const TrainingState* resume) {
  train.validate();
  if (cfg.role != ModelRole::Autoencoder) throw UsageError("train_autoencoder needs an autoencoder config");
  if (cfg.in_channels != data.inputs.channels()) {
    throw UsageError("model expects " + std::to_string(cfg.in_channels) + " input channels, data has " +
                     std::to_string(data.inputs.channels()));
  }
  const auto enc = make_encoder<float>(cfg);
  const auto dec = make_decoder<float>(cfg);

  TrainingState st;
  if (resume) {
    check_resume(*resume, ModelRole::Autoencoder, cfg, train);
    st = *resume;
    st.train = train;
  } else {
    st = base_state(ModelRole::Autoencoder, cfg, train, data);
    st.target.reset();
    st.groups.push_back(fresh_group(enc.layout(), train.seed, 0));
    st.groups.push_back(fresh_group(dec.layout(), train.seed, 1));
  }
  const LandSeaMask* mask = data.loss_mask ? &*data.loss_mask : nullptr;

  run_epochs(st, data.size(), hooks, [&](std::span<const std::size_t> idx, std::vector<ParamSet<float>>& grads) {
    const auto& pe = st.groups[0].params;
    const auto& pd = st.groups[1].params;
    const auto x = data.input_batch(idx);
    PatchModel<float>::Cache ce, cd;
    const auto z = enc.forward(pe, x, ce);
    const auto y = dec.forward(pd, z, cd);
    auto loss = mse_loss(y, x, mask);
    if (!std::isfinite(loss.loss)) return loss.loss;
    grads.push_back(pe.zeros_like());
    grads.push_back(pd.zeros_like());
    const auto gz = dec.backward(pd, cd, loss.grad, grads[1], true);
    enc.backward(pe, ce, gz, grads[0], false);
    return loss.loss;
  });
  return st;
}

TrainingState train_downstream(const SampleSet& data, const TrainingState& encoder_ckpt, const ModelConfig& head,
                               const TrainConfig& train, const TrainHooks& hooks, const TrainingState* resume) {
  train.validate();
  if (!data.target) throw UsageError("downstream training needs a diagnostic target");
  if (encoder_ckpt.role != ModelRole::Autoencoder) {
    throw UsageError("downstream training needs an autoencoder checkpoint, got " +
                     std::string(to_string(encoder_ckpt.role)));
  }
  const ModelConfig& enc_cfg = encoder_ckpt.model;
  ModelConfig cfg = head;
  cfg.out_channels = 1;
  if (cfg.role != ModelRole::Downstream) throw UsageError("train_downstream needs a downstream config");
  if (cfg.grid != enc_cfg.grid || cfg.patch_size != enc_cfg.patch_size || cfg.latent_dim != enc_cfg.latent_dim) {
    throw UsageError("downstream config must share grid, patch_size and latent_dim with the encoder");
  }
  const auto enc = make_encoder<float>(enc_cfg);
  const auto model = make_downstream<float>(cfg, *data.target);
  const ParamGroup& source = encoder_ckpt.group("encoder");
  const std::uint64_t frozen_fp = source.params.fingerprint();

  TrainingState st;
  if (resume) {
    check_resume(*resume, ModelRole::Downstream, cfg, train);
    if (resume->group("encoder").params != source.params) {
      throw UsageError("cannot resume: checkpoint was trained on a different encoder");
    }
    st = *resume;
    st.train = train;
  } else {
    st = base_state(ModelRole::Downstream, cfg, train, data);
    st.encoder_model = enc_cfg;
    ParamGroup frozen;
    frozen.params = source.params;
    frozen.trainable = false;
    st.groups.push_back(std::move(frozen));
    st.groups.push_back(fresh_group(model.layout(), train.seed, 2));
  }
  const ParamSet<float>& pe = st.groups[0].params;
  const LandSeaMask* mask = data.loss_mask ? &*data.loss_mask : nullptr;

  Tensor4<float> cache;
  if (train.cache_latents) cache = encode_samples(enc, pe, data.inputs);

  run_epochs(st, data.size(), hooks, [&](std::span<const std::size_t> idx, std::vector<ParamSet<float>>& grads) {
    const auto& ph = st.groups[1].params;
    const auto z = train.cache_latents ? gather(cache, idx) : encode_samples(enc, pe, data.input_batch(idx));
    PatchModel<float>::Cache c;
    const auto y = model.forward(ph, z, c);
    auto loss = mse_loss(y, data.target_batch(idx), mask);
    if (!std::isfinite(loss.loss)) return loss.loss;
    grads.push_back(ph.zeros_like());
    model.backward(ph, c, loss.grad, grads[0], false);
    return loss.loss;
  });

  verify_frozen(st.groups[0].params, frozen_fp);
  if (st.groups[0].params != source.params) throw FreezeViolation("frozen encoder bytes changed during training");
  return st;
}

TrainingState train_bespoke(const SampleSet& data, const ModelConfig& cfg_in, const TrainConfig& train,
                            const TrainHooks& hooks, const TrainingState* resume) {
  train.validate();
  if (!data.target) throw UsageError("bespoke training needs a diagnostic target");
  ModelConfig cfg = cfg_in;
  cfg.out_channels = 1;
  if (cfg.role != ModelRole::Bespoke) throw UsageError("train_bespoke needs a bespoke config");
  if (cfg.in_channels != data.inputs.channels()) {
    throw UsageError("model expects " + std::to_string(cfg.in_channels) + " input channels, data has " +
                     std::to_string(data.inputs.channels()));
  }
  const auto model = make_bespoke<float>(cfg, *data.target);

  TrainingState st;
  if (resume) {
    check_resume(*resume, ModelRole::Bespoke, cfg, train);
    st = *resume;
    st.train = train;
  } else {
    st = base_state(ModelRole::Bespoke, cfg, train, data);
    st.groups.push_back(fresh_group(model.layout(), train.seed, 3));
  }
  const LandSeaMask* mask = data.loss_mask ? &*data.loss_mask : nullptr;

  run_epochs(st, data.size(), hooks, [&](std::span<const std::size_t> idx, std::vector<ParamSet<float>>& grads) {
    const auto& ps = st.groups[0].params;
    PatchModel<float>::Cache c;
    const auto y = model.forward(ps, data.input_batch(idx), c);
    auto loss = mse_loss(y, data.target_batch(idx), mask);
    if (!std::isfinite(loss.loss)) return loss.loss;
    grads.push_back(ps.zeros_like());
    model.backward(ps, c, loss.grad, grads[0], false);
    return loss.loss;
  });
  return st;
}

}  // namespace wxe
