#include "wxembed/cli/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "wxembed/core/checksum.hpp"
#include "wxembed/core/error.hpp"
#include "wxembed/data/synth.hpp"
#include "wxembed/nn/models.hpp"

namespace wxe {
namespace fs = std::filesystem;

namespace {

std::ostream* g_log = &std::clog;

std::uint64_t file_checksum(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  Fnv1a64 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.digest();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
  out.flush();
  if (!out) throw Error("failed writing " + path);
}

std::string epoch_tag(std::size_t e) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", e);
  return buf;
}

std::string fixed(double v, int prec) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

}  // namespace

void set_log_stream(std::ostream* os) noexcept { g_log = os; }

void log_line(const std::string& msg) {
  if (g_log) *g_log << "[wxe] " << msg << std::endl;
}

Dataset synth_from_config(const DataSection& d) {
  SynthOptions opts;
  opts.start = d.start;
  opts.step_hours = d.step_hours;
  opts.modes_per_channel = d.modes_per_channel;
  return synth_dataset(d.grid, d.n_times, d.seed, opts);
}

std::vector<std::size_t> train_split(std::size_t n_times, const EvalSchedule& test) {
  std::vector<std::size_t> train;
  std::size_t k = 0;
  for (std::size_t t = 0; t < n_times; ++t) {
    if (k < test.indices.size() && test.indices[k] == t) {
      ++k;
      continue;
    }
    train.push_back(t);
  }
  return train;
}

PreparedData prepare_data(const RunConfig& cfg) {
  PreparedData p;
  if (cfg.data.path) {
    p.checksum = dataset_checksum(*cfg.data.path);
    p.ds = read_dataset(*cfg.data.path);
    log_line("read " + *cfg.data.path + " checksum " + to_hex(p.checksum));
  } else {
    p.ds = synth_from_config(cfg.data);
    p.checksum = dataset_checksum(p.ds);
    log_line("synthesized " + std::to_string(p.ds.n_times()) + " steps on " + std::to_string(p.ds.grid.n_lat) + "x" +
             std::to_string(p.ds.grid.n_lon) + ", checksum " + to_hex(p.checksum));
  }
  p.test = build_schedule(p.ds.timestamps(), cfg.eval.year);
  if (p.test.missing > 0) {
    log_line("warning: " + std::to_string(p.test.missing) + " evaluation hours are absent from the dataset");
  }
  p.train = train_split(p.ds.n_times(), p.test);
  if (p.train.empty()) throw UsageError("every dataset step is an evaluation step; nothing is left to train on");
  p.stats = training_stats(p.ds, p.train);
  log_line("split: " + std::to_string(p.train.size()) + " train / " + std::to_string(p.test.size()) + " test steps");
  return p;
}

RunDir::RunDir(const RunConfig& cfg, const std::string& command, bool resume, const std::string& inputs)
    : command_(command), hash_(config_hash(cfg, inputs.empty() ? command : command + "\n" + inputs)) {
  dir_ = fs::path(cfg.paths.runs) / (command + "-" + to_hex(hash_));
  const bool exists = fs::exists(dir_);
  if (exists && !complete() && !resume) {
    throw Error("run directory " + dir_.string() + " holds an unfinished run; pass --resume or remove it");
  }
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error("cannot create run directory " + dir_.string() + ": " + ec.message());
  const auto cfg_path = dir_ / "config.json";
  if (!fs::exists(cfg_path)) write_text(cfg_path.string(), to_json(cfg).dump(2) + "\n");
}

bool RunDir::complete() const { return fs::exists(dir_ / "manifest.json"); }

std::string RunDir::output(const std::string& name) const {
  const auto p = dir_ / name;
  if (fs::exists(p)) throw Error("refusing to overwrite " + p.string());
  return p.string();
}

std::vector<std::string> RunDir::existing(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir_)) {
    const auto n = e.path().filename().string();
    if (n.rfind(prefix, 0) == 0) out.push_back(n);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void RunDir::finalize(const nlohmann::json& extra) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& name : existing("")) {
    if (name == "manifest.json" || name.ends_with(".tmp")) continue;
    const auto p = dir_ / name;
    files.push_back({{"name", name}, {"bytes", fs::file_size(p)}, {"fnv1a64", to_hex(file_checksum(p))}});
  }
  nlohmann::json m{{"command", command_}, {"config_hash", to_hex(hash_)}, {"outputs", files}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  const auto tmp = (dir_ / "manifest.json.tmp").string();
  write_text(tmp, m.dump(2) + "\n");
  fs::rename(tmp, dir_ / "manifest.json");
}

TrainingState run_training(RunDir& dir, const std::string& name, const TrainConfig& train, bool resume,
                           const TrainFn& fn) {
  std::optional<TrainingState> start;
  if (resume && std::filesystem::exists(dir.path() / (name + ".wxc"))) {
    log_line(name + ": already trained, loading " + name + ".wxc");
    return load_checkpoint((dir.path() / (name + ".wxc")).string());
  }
  if (resume) {
    const auto snaps = dir.existing(name + ".e");
    if (!snaps.empty()) {
      start = load_checkpoint((dir.path() / snaps.back()).string());
      log_line(name + ": resuming from " + snaps.back());
    }
  }
  TrainHooks hooks;
  hooks.on_epoch = [&](const TrainingState& st) {
    const auto means = epoch_means(st.history);
    log_line(name + ": epoch " + std::to_string(st.epoch) + "/" + std::to_string(train.n_epochs) + " loss " +
             (means.empty() ? std::string("-") : fixed(means.back(), 6)));
    if (train.snapshot_every > 0 && st.epoch % train.snapshot_every == 0 && st.epoch < train.n_epochs) {
      const auto snap = name + ".e" + epoch_tag(st.epoch) + ".wxc";
      save_checkpoint(st, dir.output(snap));
    }
  };
  TrainingState st;
  try {
    st = fn(hooks, start ? &*start : nullptr);
  } catch (const TrainingDiverged& e) {
    const auto last = name + ".last_good.wxc";
    save_checkpoint(e.last_good(), dir.output(last));
    log_line(name + ": diverged; last good state saved to " + last);
    throw;
  }
  save_checkpoint(st, dir.output(name + ".wxc"));
  write_loss_csv(st.history, dir.output(name + ".loss.csv"));
  return st;
}

TrainingState train_ae_stage(const RunConfig& cfg, const PreparedData& data, RunDir& dir, bool resume) {
  auto samples = make_samples(data.ds, data.train, data.stats, std::nullopt);
  samples.dataset_checksum = data.checksum;
  return run_training(dir, "autoencoder", cfg.train.autoencoder, resume,
                      [&](const TrainHooks& h, const TrainingState* r) {
                        return train_autoencoder(samples, cfg.model.autoencoder, cfg.train.autoencoder, h, r);
                      });
}

TrainingState train_downstream_stage(const RunConfig& cfg, const PreparedData& data, const TrainingState& encoder,
                                     const std::string& target, RunDir& dir, bool resume) {
  auto samples = make_samples(data.ds, data.train, data.stats, target, cfg.train.downstream.loss_mask);
  samples.dataset_checksum = data.checksum;
  return run_training(dir, "downstream-" + target, cfg.train.downstream, resume,
                      [&](const TrainHooks& h, const TrainingState* r) {
                        return train_downstream(samples, encoder, cfg.model.downstream, cfg.train.downstream, h, r);
                      });
}

TrainingState train_bespoke_stage(const RunConfig& cfg, const PreparedData& data, const std::string& target,
                                  RunDir& dir, bool resume) {
  auto samples = make_samples(data.ds, data.train, data.stats, target, cfg.train.bespoke.loss_mask);
  samples.dataset_checksum = data.checksum;
  return run_training(dir, "bespoke-" + target, cfg.train.bespoke, resume,
                      [&](const TrainHooks& h, const TrainingState* r) {
                        return train_bespoke(samples, cfg.model.bespoke, cfg.train.bespoke, h, r);
                      });
}

EvalOptions eval_options(const RunConfig& cfg, std::uint64_t dataset_checksum) {
  EvalOptions o;
  o.ssim = cfg.eval.ssim;
  o.lat_weighted = cfg.eval.lat_weighted;
  o.dataset_checksum = dataset_checksum;
  return o;
}

nlohmann::json ParamAudit::to_json() const {
  return {{"encoder", encoder},
          {"decoder", decoder},
          {"autoencoder", autoencoder},
          {"downstream", downstream},
          {"bespoke", bespoke},
          {"downstream_over_bespoke", downstream_over_bespoke()}};
}

ParamAudit audit_params(const ModelSection& m) {
  ParamAudit a;
  a.encoder = count_encoder_params(m.autoencoder);
  a.decoder = count_decoder_params(m.autoencoder);
  a.autoencoder = count_params(m.autoencoder);
  a.downstream = count_params(m.downstream);
  a.bespoke = count_params(m.bespoke);
  return a;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const PreparedData& data, RunDir& dir, bool resume) {
  auto samples = make_samples(data.ds, data.train, data.stats, std::nullopt);
  samples.dataset_checksum = data.checksum;
  const auto opts = eval_options(cfg, data.checksum);
  std::vector<AblationRow> rows;
  for (const auto& [patch, layers] : kAblationGrid) {
    ModelConfig m = cfg.model.autoencoder;
    m.patch_size = patch;
    m.n_encoder_layers = m.n_decoder_layers = layers;
    m.validate();
    const std::string tag = "patch" + std::to_string(patch) + "-layers" + std::to_string(layers);
    log_line("ablation " + tag + ": " + std::to_string(count_params(m)) + " parameters");
    const auto st = run_training(dir, "ablation-" + tag, cfg.train.autoencoder, resume,
                                 [&](const TrainHooks& h, const TrainingState* r) {
                                   return train_autoencoder(samples, m, cfg.train.autoencoder, h, r);
                                 });
    const auto report = evaluate_reconstruction(st, tag, data.ds, data.test, cfg.eval.ablation_variables, opts);
    emit_report(report, ReportFormat::Csv, dir.output("ablation-" + tag + ".report.csv"));
    rows.push_back({patch, layers, report.aggregates});
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::vector<std::string>& variables,
                        const std::string& path) {
  std::ostringstream os;
  os << "patch,layers";
  for (const auto& v : variables) os << ',' << v << "_rmse_mean," << v << "_rmse_sigma," << v << "_ssim_mean," << v << "_ssim_sigma";
  os << '\n';
  char buf[32];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    os << r.patch << ',' << r.layers;
    for (const auto& a : r.metrics) {
      os << ',' << num(a.rmse_mean) << ',' << num(a.rmse_sigma) << ',' << num(a.ssim_mean) << ',' << num(a.ssim_sigma);
    }
    os << '\n';
  }
  write_text(path, os.str());
}

nlohmann::json ParityResult::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows) {
    rs.push_back({{"variable", r.variable},
                  {"rmse_downstream", r.rmse_downstream},
                  {"rmse_bespoke", r.rmse_bespoke},
                  {"ratio", r.ratio},
                  {"pass", r.pass}});
  }
  return {{"bound", bound},
          {"rows", rs},
          {"params", params.to_json()},
          {"params_ok", params_ok},
          {"pass", pass},
          {"reference_full_scale", full_scale_reference()}};
}

ParityResult run_bench_parity(const RunConfig& cfg, const PreparedData& data, RunDir& dir, bool resume) {
  ParityResult res;
  res.bound = cfg.eval.parity_ratio;
  res.params = audit_params(cfg.model);
  res.params_ok = 2 * res.params.downstream < res.params.bespoke;
  log_line("parameters: downstream " + std::to_string(res.params.downstream) + ", bespoke " +
           std::to_string(res.params.bespoke));

  const auto ae = train_ae_stage(cfg, data, dir, resume);
  std::vector<EvalModel> models;
  for (const auto& v : cfg.eval.variables) {
    models.push_back({"downstream", train_downstream_stage(cfg, data, ae, v, dir, resume)});
    models.push_back({"bespoke", train_bespoke_stage(cfg, data, v, dir, resume)});
  }
  res.report = evaluate(models, data.ds, data.test, eval_options(cfg, data.checksum));
  res.pass = res.params_ok;
  for (const auto& v : cfg.eval.variables) {
    ParityRow row{v};
    for (const auto& a : res.report.aggregates) {
      if (a.variable != v) continue;
      (a.model_tag == "downstream" ? row.rmse_downstream : row.rmse_bespoke) = a.rmse_mean;
    }
    row.ratio = row.rmse_downstream / row.rmse_bespoke;
    row.pass = row.ratio <= res.bound;
    res.pass = res.pass && row.pass;
    res.rows.push_back(row);
  }
  return res;
}

std::string format_aggregates(const std::vector<AggregateRecord>& aggs) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %-12s %5s %12s %12s %9s %9s\n", "variable", "model", "n", "rmse_mean",
                "rmse_sigma", "ssim_mean", "ssim_sig");
  os << line;
  for (const auto& a : aggs) {
    std::snprintf(line, sizeof line, "%-10s %-12s %5zu %12.6g %12.6g %9.4f %9.5f\n", a.variable.c_str(),
                  a.model_tag.c_str(), a.n, a.rmse_mean, a.rmse_sigma, a.ssim_mean, a.ssim_sigma);
    os << line;
  }
  return os.str();
}

}  // namespace wxe
