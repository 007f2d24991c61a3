#include "wxembed/eval/evaluate.hpp"

#include <algorithm>
#include <limits>

#include "wxembed/core/checksum.hpp"
#include "wxembed/core/error.hpp"
#include "wxembed/nn/models.hpp"
#include "wxembed/training/trainer.hpp"

namespace wxe {
namespace {

Tensor4<float> one_sample(const Tensor4<float>& x, std::size_t n) {
  Tensor4<float> out(1, x.channels(), x.height(), x.width());
  const auto first = x.data().begin() + static_cast<long>(n * out.size());
  std::copy(first, first + static_cast<long>(out.size()), out.data().begin());
  return out;
}

void check_model(const EvalModel& m, const Dataset& ds) {
  const auto& st = m.state;
  if (st.role == ModelRole::Autoencoder) throw UsageError("model '" + m.tag + "' is an autoencoder, not a diagnostic");
  if (!st.target) throw UsageError("model '" + m.tag + "' has no target variable");
  if (!st.stats) throw UsageError("model '" + m.tag + "' carries no normalization statistics");
  if (!ds.catalog.find(*st.target)) {
    throw UsageError("dataset has no truth channel for '" + *st.target + "' (model '" + m.tag + "')");
  }
  const auto& grid = st.role == ModelRole::Downstream && st.encoder_model ? st.encoder_model->grid : st.model.grid;
  if (!grid || grid->n_lat != ds.grid.n_lat || grid->n_lon != ds.grid.n_lon) {
    throw UsageError("model '" + m.tag + "' was built for a different grid than the dataset (" +
                     std::to_string(ds.grid.n_lat) + "x" + std::to_string(ds.grid.n_lon) + ")");
  }
}

}  // namespace

Tensor4<float> predict_diagnostic(const TrainingState& state, const VariableEntry& entry,
                                  const Tensor4<float>& inputs) {
  if (!state.target || *state.target != entry.name) throw UsageError("checkpoint was not trained on '" + entry.name + "'");
  if (!state.stats) throw UsageError("checkpoint carries no normalization statistics");

  Tensor4<float> out(inputs.batch(), 1, inputs.height(), inputs.width());
  std::optional<PatchModel<float>> encoder;
  if (state.role == ModelRole::Downstream) {
    if (!state.encoder_model) throw UsageError("downstream checkpoint lacks its encoder config");
    encoder.emplace(make_encoder<float>(*state.encoder_model));
  }
  const auto model = state.role == ModelRole::Downstream ? make_downstream<float>(state.model, entry)
                                                         : make_bespoke<float>(state.model, entry);
  const auto& head = state.group(state.role == ModelRole::Downstream ? "downstream" : "bespoke").params;
  for (std::size_t n = 0; n < inputs.batch(); ++n) {
    auto x = one_sample(inputs, n);
    if (encoder) x = encoder->forward(state.group("encoder").params, x);
    const auto y = model.forward(head, x);
    std::copy(y.data().begin(), y.data().end(), out.data().begin() + static_cast<long>(n * y.size()));
  }
  if (state.target_normalized) {
    const auto& st = state.stats->at(entry.name);
    for (auto& v : out.data()) v = static_cast<float>(double(v) * st.sigma + st.mean);
  }
  return out;
}

MetricReport evaluate(std::span<const EvalModel> models, const Dataset& ds, const EvalSchedule& schedule,
                      const EvalOptions& opts) {
  for (const auto& m : models) check_model(m, ds);
  for (auto t : schedule.indices) {
    if (t >= ds.n_times()) throw UsageError("schedule index " + std::to_string(t) + " is outside the dataset");
  }
  const std::size_t H = ds.grid.n_lat, W = ds.grid.n_lon, T = schedule.size();
  std::vector<std::string> warnings;
  // records[t * models + m]
  std::vector<MetricRecord> records(T * models.size());
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const auto& st = models[mi].state;
    const std::size_t ci = *ds.catalog.find(*st.target);
    const auto& entry = ds.catalog[ci];
    if (!entry.data_range) throw UsageError("variable '" + entry.name + "' has no data range for SSIM");
    const LandSeaMask* mask = nullptr;
    if (entry.mask == MaskKind::LandSea) {
      if (!ds.mask) throw UsageError("variable '" + entry.name + "' is scored over land but the dataset has no mask");
      mask = &*ds.mask;
    }
    if (opts.dataset_checksum && st.dataset_checksum && *st.dataset_checksum != *opts.dataset_checksum) {
      warnings.push_back("model '" + models[mi].tag + "' was trained on dataset " + to_hex(*st.dataset_checksum));
    }
    const auto samples = make_samples(ds, schedule.indices, *st.stats, std::nullopt, LossMaskMode::None);
    const auto pred = predict_diagnostic(st, entry, samples.inputs);
    for (std::size_t t = 0; t < T; ++t) {
      const FieldView p{pred.plane(t, 0), H, W};
      const FieldView y{ds.data.plane(schedule.indices[t], ci), H, W};
      auto& rec = records[t * models.size() + mi];
      rec.timestamp = format_hour(schedule.timestamps[t]);
      rec.variable = entry.name;
      rec.model_tag = models[mi].tag;
      rec.rmse = rmse(p, y, mask, opts.lat_weighted);
      std::vector<std::string> ssim_warnings;
      rec.ssim = ssim(p, y, entry.data_range->span(), mask, opts.ssim, &ssim_warnings);
      if (t == 0) warnings.insert(warnings.end(), ssim_warnings.begin(), ssim_warnings.end());
    }
  }

  MetricReport report;
  report.records = std::move(records);
  report.aggregates = aggregate(report.records);
  auto& md = report.metadata;
  md["schedule"] = {{"n", T}, {"missing", schedule.missing}};
  md["ssim"] = {{"window", opts.ssim.window}, {"sigma", opts.ssim.sigma}, {"k1", opts.ssim.k1}, {"k2", opts.ssim.k2},
                {"data_range", "catalog span"}};
  md["rmse"] = {{"lat_weighted", opts.lat_weighted}, {"units", "physical"}};
  md["masking"] = "variables with a land-sea mask (stl1) are scored over land cells only";
  if (opts.dataset_checksum) md["dataset_checksum"] = to_hex(*opts.dataset_checksum);
  md["warnings"] = warnings;
  md["reference_full_scale"] = full_scale_reference();
  return report;
}

MetricReport evaluate_reconstruction(const TrainingState& autoencoder, const std::string& tag, const Dataset& ds,
                                     const EvalSchedule& schedule, std::span<const std::string> variables,
                                     const EvalOptions& opts) {
  const auto& st = autoencoder;
  if (st.role != ModelRole::Autoencoder) throw UsageError("model '" + tag + "' is not an autoencoder");
  if (!st.stats) throw UsageError("model '" + tag + "' carries no normalization statistics");
  if (!st.model.grid || *st.model.grid != ds.grid) {
    throw UsageError("model '" + tag + "' was built for a different grid than the dataset");
  }
  const auto prog = ds.catalog.indices(Role::Prognostic);
  std::vector<std::pair<std::size_t, std::size_t>> chans;  // (dataset channel, model channel)
  for (const auto& v : variables) {
    const std::size_t ci = ds.catalog.index_of(v);
    const auto it = std::find(prog.begin(), prog.end(), ci);
    if (it == prog.end()) throw UsageError("'" + v + "' is not a prognostic variable");
    chans.emplace_back(ci, static_cast<std::size_t>(it - prog.begin()));
  }
  const auto enc = make_encoder<float>(st.model);
  const auto dec = make_decoder<float>(st.model);
  const auto samples = make_samples(ds, schedule.indices, *st.stats, std::nullopt, LossMaskMode::None);
  const std::size_t H = ds.grid.n_lat, W = ds.grid.n_lon, T = schedule.size();

  std::vector<double> spans;
  for (const auto& [ci, mc] : chans) {
    float lo = std::numeric_limits<float>::max(), hi = std::numeric_limits<float>::lowest();
    for (auto t : schedule.indices) {
      for (float v : ds.data.plane(t, ci)) lo = std::min(lo, v), hi = std::max(hi, v);
    }
    spans.push_back(hi > lo ? double(hi) - double(lo) : 1.0);
  }

  std::vector<MetricRecord> records;
  std::vector<std::string> warnings;
  std::vector<float> field(H * W);
  for (std::size_t t = 0; t < T; ++t) {
    const auto y = dec.forward(st.group("decoder").params,
                               enc.forward(st.group("encoder").params, one_sample(samples.inputs, t)));
    for (std::size_t k = 0; k < chans.size(); ++k) {
      const auto [ci, mc] = chans[k];
      const auto& cs = st.stats->at(ds.catalog[ci].name);
      const auto src = y.plane(0, mc);
      for (std::size_t q = 0; q < field.size(); ++q) field[q] = static_cast<float>(double(src[q]) * cs.sigma + cs.mean);
      const FieldView p{field, H, W};
      const FieldView truth{ds.data.plane(schedule.indices[t], ci), H, W};
      std::vector<std::string> ssim_warnings;
      records.push_back({format_hour(schedule.timestamps[t]), ds.catalog[ci].name, tag,
                         rmse(p, truth, nullptr, opts.lat_weighted),
                         ssim(p, truth, spans[k], nullptr, opts.ssim, &ssim_warnings)});
      if (t == 0) warnings.insert(warnings.end(), ssim_warnings.begin(), ssim_warnings.end());
    }
  }
  MetricReport report;
  report.records = std::move(records);
  report.aggregates = aggregate(report.records);
  report.metadata["schedule"] = {{"n", T}, {"missing", schedule.missing}};
  report.metadata["ssim_data_range"] = "span of the truth over the scheduled steps";
  report.metadata["warnings"] = warnings;
  return report;
}

nlohmann::json full_scale_reference() {
  auto row = [](double rm, double rs, double sm, double ss) {
    return nlohmann::json{{"rmse_mean", rm}, {"rmse_sigma", rs}, {"ssim_mean", sm}, {"ssim_sigma", ss}};
  };
  return {{"note", "published 0.25-degree results; not reproduced at this scale"},
          {"tcc", {{"bespoke", row(0.1656, 0.0076, 0.5648, 0.0134)}, {"downstream", row(0.1677, 0.0084, 0.5926, 0.0141)}}},
          {"stl1",
           {{"bespoke", row(11.761, 0.14367, 0.9633, 0.00034)}, {"downstream", row(11.784, 0.1645, 0.9632, 0.00036)}}}};
}

}  // namespace wxe
