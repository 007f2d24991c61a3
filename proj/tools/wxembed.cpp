// wxembed: command-line driver for synthesis, training, evaluation and audits.
// Exit codes: 0 success, 1 runtime error (I/O, divergence, corrupt file), 2 usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "wxembed/cli/pipeline.hpp"
#include "wxembed/core/checksum.hpp"
#include "wxembed/core/error.hpp"

namespace fs = std::filesystem;
using namespace wxe;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

struct CommonOpts {
  std::string config;
  std::string data;
  std::string runs;
  bool resume = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_run_dir = true) {
  cmd->add_option("--config", o.config, "RunConfig JSON; omitted sections keep their defaults")
      ->check(CLI::ExistingFile);
  cmd->add_option("--data", o.data, "WXD1 dataset; overrides data.path (default: synthesize from data.*)")
      ->check(CLI::ExistingFile);
  if (with_run_dir) {
    cmd->add_option("--runs", o.runs, "Root of the run directories; overrides paths.runs");
    cmd->add_flag("--resume", o.resume, "Continue an unfinished run from its newest snapshot");
  }
}

RunConfig load_config(const CommonOpts& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (!o.data.empty()) cfg.data.path = o.data;
  if (!o.runs.empty()) cfg.paths.runs = o.runs;
  cfg.validate();
  return cfg;
}

std::string file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path + "'");
  Fnv1a64 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return to_hex(h.digest());
}

void refuse_existing(const std::string& path) {
  if (fs::exists(path)) throw Error("refusing to overwrite " + path);
}

/// Reports a finished run directory; true when the caller should stop.
bool already_complete(const RunDir& dir) {
  if (!dir.complete()) return false;
  log_line("run already complete: " + dir.path().string());
  std::cout << dir.path().string() << "\n";
  return true;
}

int cmd_synth(std::uint64_t seed, const std::string& grid, std::size_t times, const std::string& start,
              int step_hours, std::size_t modes, const std::string& out) {
  DataSection d;
  d.seed = seed;
  d.grid = parse_grid(grid);
  d.n_times = times;
  d.start = parse_hour(start);
  d.step_hours = step_hours;
  d.modes_per_channel = modes;
  if (d.n_times < 1) throw UsageError("--times must be >= 1");
  if (d.step_hours < 1) throw UsageError("--step-hours must be >= 1");
  refuse_existing(out);
  const auto ds = synth_from_config(d);
  const auto sum = write_dataset(ds, out);
  log_line("wrote " + out + " (" + std::to_string(ds.n_times()) + " steps, " + grid + ")");
  std::cout << "checksum " << to_hex(sum) << "\n";
  return kOk;
}

int cmd_stats(const CommonOpts& o, const std::string& out) {
  const auto cfg = load_config(o);
  refuse_existing(out);
  const auto data = prepare_data(cfg);
  write_stats_sidecar(data.stats, out);
  for (const auto& c : data.stats.channels()) {
    std::printf("%-8s mean %14.6g sigma %14.6g\n", c.name.c_str(), c.mean, c.sigma);
  }
  log_line("wrote " + out);
  return kOk;
}

int cmd_train_ae(const CommonOpts& o) {
  const auto cfg = load_config(o);
  RunDir dir(cfg, "train-ae", o.resume);
  if (already_complete(dir)) return kOk;
  const auto data = prepare_data(cfg);
  train_ae_stage(cfg, data, dir, o.resume);
  dir.finalize({{"dataset_checksum", to_hex(data.checksum)}});
  std::cout << (dir.path() / "autoencoder.wxc").string() << "\n";
  return kOk;
}

std::vector<std::string> targets_or_default(const std::vector<std::string>& targets, const RunConfig& cfg) {
  return targets.empty() ? cfg.eval.variables : targets;
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : std::string(1, sep)) + x;
  return s;
}

int cmd_train_downstream(const CommonOpts& o, const std::string& encoder_path, const std::vector<std::string>& t) {
  const auto cfg = load_config(o);
  const auto targets = targets_or_default(t, cfg);
  const auto encoder_hex = file_hex(encoder_path);
  RunDir dir(cfg, "train-downstream", o.resume, "encoder=" + encoder_hex + "\ntargets=" + join(targets, ','));
  if (already_complete(dir)) return kOk;
  const auto encoder = load_checkpoint(encoder_path);
  if (!encoder.has_group("encoder")) throw UsageError("'" + encoder_path + "' holds no encoder parameters");
  const auto data = prepare_data(cfg);
  if (encoder.dataset_checksum && *encoder.dataset_checksum != data.checksum) {
    log_line("warning: encoder was trained on dataset " + to_hex(*encoder.dataset_checksum) + ", not " +
             to_hex(data.checksum));
  }
  const auto& frozen = encoder.group("encoder").params;
  for (const auto& target : targets) {
    const auto st = train_downstream_stage(cfg, data, encoder, target, dir, o.resume);
    const auto& after = st.group("encoder").params;
    if (after.fingerprint() != frozen.fingerprint() || !(after == frozen)) {
      throw FreezeViolation("encoder parameters changed while training downstream-" + target);
    }
  }
  dir.finalize({{"encoder", encoder_path},
                {"encoder_fnv1a64", encoder_hex},
                {"encoder_fingerprint", to_hex(frozen.fingerprint())},
                {"targets", targets},
                {"dataset_checksum", to_hex(data.checksum)}});
  for (const auto& target : targets) std::cout << (dir.path() / ("downstream-" + target + ".wxc")).string() << "\n";
  return kOk;
}

int cmd_train_bespoke(const CommonOpts& o, const std::vector<std::string>& t) {
  const auto cfg = load_config(o);
  const auto targets = targets_or_default(t, cfg);
  RunDir dir(cfg, "train-bespoke", o.resume, "targets=" + join(targets, ','));
  if (already_complete(dir)) return kOk;
  const auto data = prepare_data(cfg);
  for (const auto& target : targets) train_bespoke_stage(cfg, data, target, dir, o.resume);
  dir.finalize({{"targets", targets}, {"dataset_checksum", to_hex(data.checksum)}});
  for (const auto& target : targets) std::cout << (dir.path() / ("bespoke-" + target + ".wxc")).string() << "\n";
  return kOk;
}

int cmd_eval(const CommonOpts& o, const std::vector<std::string>& specs) {
  const auto cfg = load_config(o);
  std::vector<std::pair<std::string, std::string>> models;
  std::string inputs;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) {
      throw UsageError("--model expects tag=path, got '" + s + "'");
    }
    const auto tag = s.substr(0, eq), path = s.substr(eq + 1);
    if (!fs::exists(path)) throw UsageError("--model " + tag + ": no such file '" + path + "'");
    inputs += tag + "=" + file_hex(path) + "\n";
    models.emplace_back(tag, path);
  }
  RunDir dir(cfg, "eval", o.resume, inputs);
  if (already_complete(dir)) return kOk;
  std::vector<EvalModel> loaded;
  for (const auto& [tag, path] : models) loaded.push_back({tag, load_checkpoint(path)});
  const auto data = prepare_data(cfg);
  const auto report = evaluate(loaded, data.ds, data.test, eval_options(cfg, data.checksum));
  for (const auto& w : report.metadata.value("warnings", nlohmann::json::array())) {
    log_line("warning: " + w.get<std::string>());
  }
  emit_report(report, ReportFormat::Csv, dir.output("report.csv"));
  emit_report(report, ReportFormat::Json, dir.output("report.json"));
  emit_aggregates_csv(report.aggregates, dir.output("aggregates.csv"));
  dir.finalize({{"dataset_checksum", to_hex(data.checksum)}});
  std::cout << format_aggregates(report.aggregates);
  return kOk;
}

int cmd_params(const CommonOpts& o, const std::string& role) {
  const auto cfg = load_config(o);
  const auto a = audit_params(cfg.model);
  if (role == "autoencoder") {
    std::cout << a.autoencoder << "\n";
  } else if (role == "encoder") {
    std::cout << a.encoder << "\n";
  } else if (role == "decoder") {
    std::cout << a.decoder << "\n";
  } else if (role == "downstream") {
    std::cout << a.downstream << "\n";
  } else if (role == "bespoke") {
    std::cout << a.bespoke << "\n";
  } else {
    std::printf("%-12s %14s\n", "model", "parameters");
    std::printf("%-12s %14zu\n", "encoder", a.encoder);
    std::printf("%-12s %14zu\n", "decoder", a.decoder);
    std::printf("%-12s %14zu\n", "autoencoder", a.autoencoder);
    std::printf("%-12s %14zu\n", "downstream", a.downstream);
    std::printf("%-12s %14zu\n", "bespoke", a.bespoke);
    std::printf("downstream / bespoke = %.4f\n", a.downstream_over_bespoke());
  }
  return kOk;
}

int cmd_ablate(const CommonOpts& o) {
  const auto cfg = load_config(o);
  RunDir dir(cfg, "ablate", o.resume);
  if (already_complete(dir)) return kOk;
  const auto data = prepare_data(cfg);
  const auto rows = run_ablation(cfg, data, dir, o.resume);
  const auto out = dir.output("ablation.csv");
  write_ablation_csv(rows, cfg.eval.ablation_variables, out);
  dir.finalize({{"dataset_checksum", to_hex(data.checksum)}});
  std::ifstream in(out);
  std::cout << in.rdbuf();
  return kOk;
}

void print_parity(const nlohmann::json& p) {
  std::printf("%-10s %16s %16s %8s %6s\n", "variable", "rmse_downstream", "rmse_bespoke", "ratio", "pass");
  for (const auto& r : p.at("rows")) {
    std::printf("%-10s %16.8g %16.8g %8.4f %6s\n", r.at("variable").get<std::string>().c_str(),
                r.at("rmse_downstream").get<double>(), r.at("rmse_bespoke").get<double>(),
                r.at("ratio").get<double>(), r.at("pass").get<bool>() ? "yes" : "NO");
  }
  const auto& a = p.at("params");
  std::printf("parameters: downstream %zu, bespoke %zu (ratio %.4f, bound 0.5: %s)\n",
              a.at("downstream").get<std::size_t>(), a.at("bespoke").get<std::size_t>(),
              a.at("downstream_over_bespoke").get<double>(), p.at("params_ok").get<bool>() ? "ok" : "VIOLATED");
  std::printf("parity bound %.3f: %s\n", p.at("bound").get<double>(), p.at("pass").get<bool>() ? "PASS" : "FAIL");
}

int cmd_bench_parity(const CommonOpts& o) {
  const auto cfg = load_config(o);
  RunDir dir(cfg, "bench-parity", o.resume);
  nlohmann::json parity;
  if (dir.complete()) {
    log_line("run already complete: " + dir.path().string());
    std::ifstream in(dir.path() / "parity.json");
    if (!in) throw Error("missing parity.json in " + dir.path().string());
    parity = nlohmann::json::parse(in);
  } else {
    const auto data = prepare_data(cfg);
    const auto res = run_bench_parity(cfg, data, dir, o.resume);
    emit_report(res.report, ReportFormat::Csv, dir.output("report.csv"));
    emit_report(res.report, ReportFormat::Json, dir.output("report.json"));
    emit_aggregates_csv(res.report.aggregates, dir.output("aggregates.csv"));
    parity = res.to_json();
    {
      std::ofstream out(dir.output("parity.json"));
      out << parity.dump(2) << "\n";
      if (!out) throw Error("failed writing parity.json");
    }
    dir.finalize({{"dataset_checksum", to_hex(data.checksum)}, {"pass", res.pass}});
    std::cout << format_aggregates(res.report.aggregates);
  }
  print_parity(parity);
  std::cout << dir.path().string() << "\n";
  return parity.at("pass").get<bool>() ? kOk : kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wxembed: embed gridded weather state, train diagnostic heads on the frozen embedding, verify"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.footer("Exit codes: 0 success, 1 runtime error (I/O, divergence, corrupt file, parity violation), 2 usage error.");
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress lines on stderr");

  std::function<int()> run;

  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic WXD1 dataset");
  std::uint64_t seed = 42;
  std::string grid = "32x64", start = format_hour(DataSection{}.start), out;
  std::size_t times = 608, modes = 16;
  int step_hours = 1;
  synth->add_option("--seed", seed, "Master seed")->capture_default_str();
  synth->add_option("--grid", grid, "Grid as HxW")->capture_default_str();
  synth->add_option("--times", times, "Number of timesteps")->capture_default_str();
  synth->add_option("--start", start, "First timestamp, YYYY-MM-DDTHH[:00Z]")->capture_default_str();
  synth->add_option("--step-hours", step_hours, "Hours between timesteps")->capture_default_str();
  synth->add_option("--modes", modes, "Fourier modes per prognostic channel")->capture_default_str();
  synth->add_option("--out", out, "Output path (must not exist)")->required();
  synth->callback([&] { run = [&] { return cmd_synth(seed, grid, times, start, step_hours, modes, out); }; });

  CommonOpts stats_o;
  std::string stats_out;
  auto* stats = app.add_subcommand("stats", "Training-split normalization statistics as a JSON sidecar");
  add_common(stats, stats_o, false);
  stats->add_option("--out", stats_out, "Sidecar path (must not exist)")->required();
  stats->callback([&] { run = [&] { return cmd_stats(stats_o, stats_out); }; });

  CommonOpts ae_o;
  auto* train_ae = app.add_subcommand("train-ae", "Train the autoencoder on the training split");
  add_common(train_ae, ae_o);
  train_ae->callback([&] { run = [&] { return cmd_train_ae(ae_o); }; });

  CommonOpts ds_o;
  std::string encoder;
  std::vector<std::string> ds_targets;
  auto* train_ds = app.add_subcommand("train-downstream", "Train diagnostic heads on a frozen encoder");
  add_common(train_ds, ds_o);
  train_ds->add_option("--encoder", encoder, "Autoencoder checkpoint (WXC1)")->required()->check(CLI::ExistingFile);
  train_ds->add_option("--target", ds_targets, "Diagnostic variable; repeatable (default: eval.variables)");
  train_ds->callback([&] { run = [&] { return cmd_train_downstream(ds_o, encoder, ds_targets); }; });

  CommonOpts bs_o;
  std::vector<std::string> bs_targets;
  auto* train_bs = app.add_subcommand("train-bespoke", "Train end-to-end baselines for diagnostics");
  add_common(train_bs, bs_o);
  train_bs->add_option("--target", bs_targets, "Diagnostic variable; repeatable (default: eval.variables)");
  train_bs->callback([&] { run = [&] { return cmd_train_bespoke(bs_o, bs_targets); }; });

  CommonOpts ev_o;
  std::vector<std::string> model_specs;
  auto* eval = app.add_subcommand("eval", "Score diagnostic checkpoints on the evaluation schedule");
  add_common(eval, ev_o);
  eval->add_option("--model", model_specs, "tag=checkpoint; repeatable")->required();
  eval->callback([&] { run = [&] { return cmd_eval(ev_o, model_specs); }; });

  CommonOpts pa_o;
  std::string role;
  auto* params = app.add_subcommand("params", "Parameter counts of the configured models");
  add_common(params, pa_o, false);
  params->add_option("--role", role, "Print a single count")
      ->check(CLI::IsMember({"encoder", "decoder", "autoencoder", "downstream", "bespoke"}));
  params->callback([&] { run = [&] { return cmd_params(pa_o, role); }; });

  CommonOpts ab_o;
  auto* ablate = app.add_subcommand("ablate", "Autoencoder patch size x depth grid, scored on reconstructions");
  add_common(ablate, ab_o);
  ablate->callback([&] { run = [&] { return cmd_ablate(ab_o); }; });

  CommonOpts bp_o;
  auto* bench = app.add_subcommand("bench-parity", "Full two-stage pipeline against the bespoke baseline");
  add_common(bench, bp_o);
  bench->callback([&] { run = [&] { return cmd_bench_parity(bp_o); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  if (quiet) set_log_stream(nullptr);
  try {
    return run();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}
