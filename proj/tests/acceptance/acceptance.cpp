// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion numbers...] [--parity-config FILE]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <sys/wait.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "wxembed/cli/pipeline.hpp"
#include "wxembed/core/checksum.hpp"
#include "wxembed/core/error.hpp"
#include "wxembed/data/synth.hpp"
#include "wxembed/nn/grad_check.hpp"
#include "wxembed/nn/models.hpp"

using namespace wxe;
using wxe::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int run_cli(const std::string& args, const TempDir& dir) {
  const std::string cmd = "cd '" + dir.path().string() + "' && '" WXE_CLI_PATH "' -q " + args + " >out.txt 2>err.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

// 1. Analytic gradients against central differences, every component, 64-bit.
Outcome grad_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = grad_check_config();
  double worst = 0.0;
  std::string worst_where;
  auto truncated = cfg;
  truncated.mode_keep_fraction = 0.5;
  std::vector<std::pair<GradTarget, const ModelConfig*>> runs;
  for (auto t : {GradTarget::Linear, GradTarget::LayerNorm, GradTarget::Mlp, GradTarget::SpectralMixer,
                 GradTarget::AfnoBlock, GradTarget::Encoder, GradTarget::Decoder, GradTarget::Autoencoder,
                 GradTarget::Downstream, GradTarget::Bespoke}) {
    runs.emplace_back(t, &cfg);
  }
  runs.emplace_back(GradTarget::SpectralMixer, &truncated);
  for (const auto& [target, c] : runs) {
    const auto rep = grad_check(target, *c, 7);
    if (rep.n_checked == 0) return {false, std::string(to_string(target)) + " checked nothing"};
    if (rep.max_rel_error >= worst) {
      worst = rep.max_rel_error;
      worst_where = std::string(to_string(target)) + " " + rep.worst_param;
    }
  }
  // The checker must notice a 1% gradient error.
  const bool sensitive = grad_check(GradTarget::Autoencoder, cfg, 7, 1.01).max_rel_error > 1e-3;
  const double secs = seconds_since(t0);
  return {worst < 1e-3 && sensitive && secs < 120.0,
          fmt("max rel error %.3g at %s; 1%% corruption detected: %s; %.1f s", worst, worst_where.c_str(),
              sensitive ? "yes" : "no", secs)};
}

nlohmann::json tiny_pipeline_config() {
  const nlohmann::json model{{"patch_size", 4}, {"embed_dim", 16}, {"latent_dim", 16}, {"n_blocks", 4},
                             {"mlp_ratio", 2}};
  nlohmann::json ae = model, head = model, bespoke = model;
  ae["n_encoder_layers"] = ae["n_decoder_layers"] = 1;
  head["n_layers"] = 1;
  bespoke["n_layers"] = 3;
  const nlohmann::json train{{"lr0", 2e-3}, {"batch_size", 8}, {"n_epochs", 3}};
  return {{"data", {{"grid", "16x32"}, {"n_times", 96}, {"start", "2019-12-31T00"}}},
          {"model", {{"autoencoder", ae}, {"downstream", head}, {"bespoke", bespoke}}},
          {"train", {{"autoencoder", train}, {"downstream", train}, {"bespoke", train}}}};
}

bool params_bytes_equal(const ParamSet<float>& a, const ParamSet<float>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].shape != b[i].shape || a[i].numel() != b[i].numel()) return false;
    if (std::memcmp(a.data(i), b.data(i), a[i].numel() * sizeof(float)) != 0) return false;
  }
  return true;
}

// 2. The encoder inside every downstream checkpoint is byte-identical to its source.
Outcome freeze_invariant() {
  TempDir tmp;
  std::ofstream(tmp.file("tiny.json")) << tiny_pipeline_config().dump();
  if (run_cli("train-ae --config tiny.json", tmp) != 0) return {false, "train-ae failed"};
  const auto encoder_path = first_line(wxe::testing::read_bytes(tmp.file("out.txt")));
  const auto before = wxe::testing::read_bytes(tmp.file(encoder_path));
  if (run_cli("train-downstream --config tiny.json --encoder " + encoder_path, tmp) != 0) {
    return {false, "train-downstream failed: " + wxe::testing::read_bytes(tmp.file("err.txt"))};
  }
  if (wxe::testing::read_bytes(tmp.file(encoder_path)) != before) return {false, "encoder checkpoint file changed"};
  const auto source = load_checkpoint(tmp.file(encoder_path)).group("encoder").params;
  std::istringstream heads(wxe::testing::read_bytes(tmp.file("out.txt")));
  std::size_t checked = 0;
  for (std::string line; std::getline(heads, line);) {
    const auto st = load_checkpoint(tmp.file(line));
    const auto& enc = st.group("encoder");
    if (enc.trainable) return {false, line + ": encoder group marked trainable"};
    if (enc.params.fingerprint() != source.fingerprint()) return {false, line + ": fingerprint differs"};
    if (!params_bytes_equal(enc.params, source)) return {false, line + ": encoder bytes differ"};
    ++checked;
  }
  return {checked == 2, fmt("%zu downstream checkpoints; encoder fingerprint %s identical in each", checked,
                            to_hex(source.fingerprint()).c_str())};
}

// 3. Downstream heads on the frozen encoder against end-to-end baselines.
Outcome parity(const std::string& config_path) {
  const auto t0 = std::chrono::steady_clock::now();
  TempDir tmp;
  auto cfg = load_run_config(config_path);
  cfg.paths.runs = tmp.file("runs");
  const auto data = prepare_data(cfg);
  const bool split_ok = cfg.data.grid.n_lat == 32 && cfg.data.grid.n_lon == 64 && data.train.size() == 512 &&
                        data.test.size() == 96 && cfg.data.seed == 42 && cfg.data.step_hours == 1;
  RunDir dir(cfg, "bench-parity");
  const auto res = run_bench_parity(cfg, data, dir, false);
  std::string detail = split_ok ? "32x64, 512/96 steps, seed 42" : "WRONG benchmark setup";
  for (const auto& r : res.rows) {
    detail += fmt("; %s %.6g/%.6g = %.4f", r.variable.c_str(), r.rmse_downstream, r.rmse_bespoke, r.ratio);
  }
  const double secs = seconds_since(t0);
  detail += fmt("; params %zu vs %zu (%.3f); %.0f s", res.params.downstream, res.params.bespoke,
                res.params.downstream_over_bespoke(), secs);
  return {split_ok && res.pass && res.rows.size() == 2 && secs <= 1800.0, detail};
}

// 4. Full-scale parameter totals.
Outcome parameter_audit() {
  RunConfig cfg = run_config_from_json({{"data", {{"grid", {720, 1440}}}}});
  const auto a = audit_params(cfg.model);
  const double ae = double(a.autoencoder) / 49e6, ds = double(a.downstream) / 28e6, bs = double(a.bespoke) / 75e6;
  auto within = [](double r) { return r >= 0.75 && r <= 1.25; };
  const bool ok = within(ae) && within(ds) && within(bs) && a.downstream < a.bespoke && 2 * a.downstream < a.bespoke;
  return {ok, fmt("autoencoder %zu (%.3f of 49M), downstream %zu (%.3f of 28M), bespoke %zu (%.3f of 75M), "
                  "downstream/bespoke %.3f",
                  a.autoencoder, ae, a.downstream, ds, a.bespoke, bs, a.downstream_over_bespoke())};
}

// 5. Metrics against brute-force references.
Outcome metric_oracles() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> dim(11, 40);
  std::normal_distribution<float> nd;
  double worst_rmse = 0.0, worst_ssim = 0.0;
  bool identity = true;
  for (int k = 0; k < 100; ++k) {
    const std::size_t h = dim(rng), w = dim(rng);
    std::vector<float> a(h * w), b(h * w);
    const float scale = std::exp(float(k % 7) - 3.0f), offset = float(k % 5) * 10.0f;
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = offset + scale * nd(rng);
      b[i] = a[i] + (k % 3 == 0 ? 0.1f : 1.0f) * scale * nd(rng);
    }
    const double range = 8.0 * scale;
    const FieldView pa{a, h, w}, pb{b, h, w};
    worst_rmse = std::max(worst_rmse, std::abs(rmse(pa, pb) - wxe::testing::oracle_rmse(a, b)));
    worst_ssim = std::max(worst_ssim, std::abs(ssim(pa, pb, range) - wxe::testing::oracle_ssim(a, b, h, w, range)));
    identity = identity && rmse(pa, pa) == 0.0 && ssim(pa, pa, range) == 1.0;
  }
  return {worst_rmse < 1e-9 && worst_ssim < 1e-6 && identity,
          fmt("100 pairs: max |rmse - oracle| %.3g, max |ssim - oracle| %.3g; identities exact: %s", worst_rmse,
              worst_ssim, identity ? "yes" : "no")};
}

// 6. Evaluation schedule sizes.
Outcome schedule() {
  const auto year = hourly_range(make_hour(2020, 1, 1, 0), 366 * 24);
  const auto january = hourly_range(make_hour(2020, 1, 1, 0), 31 * 24);
  const auto ny = build_schedule(year).size(), nj = build_schedule(january).size();
  return {ny == 1152 && nj == 96, fmt("hourly 2020: %zu timestamps; hourly January: %zu", ny, nj)};
}

/// Flips one bit in every byte position in turn; counts loads that did not throw.
template <typename Load>
std::size_t undetected_corruptions(const std::string& bytes, const std::string& path, Load load) {
  std::size_t missed = 0;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    auto c = bytes;
    c[i] = char(c[i] ^ char(1u << (i % 8)));
    wxe::testing::write_bytes(path, c);
    try {
      load(path);
      ++missed;
    } catch (const Error&) {
    }
  }
  return missed;
}

// 7. Determinism, round trips and corruption detection.
Outcome determinism_and_formats() {
  TempDir tmp;
  const GridSpec grid{8, 8, {}};
  const auto ds1 = synth_dataset(grid, 2, 99), ds2 = synth_dataset(grid, 2, 99);
  write_dataset(ds1, tmp.file("a.wxd"));
  write_dataset(ds2, tmp.file("b.wxd"));
  const auto wxd = wxe::testing::read_bytes(tmp.file("a.wxd"));
  const bool ds_same = wxd == wxe::testing::read_bytes(tmp.file("b.wxd"));
  write_dataset(read_dataset(tmp.file("a.wxd")), tmp.file("c.wxd"));
  const bool ds_round = wxd == wxe::testing::read_bytes(tmp.file("c.wxd"));

  ModelConfig m;
  m.patch_size = 2;
  m.embed_dim = m.latent_dim = 4;
  m.n_blocks = 2;
  m.mlp_ratio = 1.0;
  m.n_encoder_layers = m.n_decoder_layers = 1;
  m.in_channels = m.out_channels = 54;
  m.grid = grid;
  TrainConfig t;
  t.n_epochs = 2;
  t.batch_size = 2;
  const std::vector<std::size_t> times{0, 1};
  const auto stats = training_stats(ds1, times);
  const auto st1 = train_autoencoder(make_samples(ds1, times, stats, std::nullopt), m, t);
  const auto st2 = train_autoencoder(make_samples(ds2, times, stats, std::nullopt), m, t);
  save_checkpoint(st1, tmp.file("a.wxc"));
  save_checkpoint(st2, tmp.file("b.wxc"));
  const auto wxc = wxe::testing::read_bytes(tmp.file("a.wxc"));
  const bool ck_same = wxc == wxe::testing::read_bytes(tmp.file("b.wxc"));
  save_checkpoint(load_checkpoint(tmp.file("a.wxc")), tmp.file("c.wxc"));
  const bool ck_round = wxc == wxe::testing::read_bytes(tmp.file("c.wxc"));

  // Reports: two evaluations of identically trained models on identical data.
  auto head = m;
  head.role = ModelRole::Bespoke;
  head.n_layers = 1;
  head.out_channels = 1;
  const auto tcc = make_samples(ds1, times, stats, std::string("tcc"));
  const EvalModel b1{"bespoke", train_bespoke(tcc, head, t)}, b2{"bespoke", train_bespoke(tcc, head, t)};
  const auto sched = build_schedule(ds1.timestamps());
  emit_report(evaluate({&b1, 1}, ds1, sched), ReportFormat::Json, tmp.file("r1.json"));
  emit_report(evaluate({&b2, 1}, ds2, sched), ReportFormat::Json, tmp.file("r2.json"));
  const bool rep_same = wxe::testing::read_bytes(tmp.file("r1.json")) == wxe::testing::read_bytes(tmp.file("r2.json"));

  const auto missed_wxd = undetected_corruptions(wxd, tmp.file("x.wxd"), [](const std::string& p) { read_dataset(p); });
  const auto missed_wxc =
      undetected_corruptions(wxc, tmp.file("x.wxc"), [](const std::string& p) { load_checkpoint(p); });
  const bool ok = ds_same && ds_round && ck_same && ck_round && rep_same && missed_wxd == 0 && missed_wxc == 0;
  return {ok, fmt("datasets identical %d, round trip %d; checkpoints identical %d, round trip %d; reports identical "
                  "%d; corruptions missed %zu/%zu (WXD1), %zu/%zu (WXC1)",
                  ds_same, ds_round, ck_same, ck_round, rep_same, missed_wxd, wxd.size(), missed_wxc, wxc.size())};
}

// 8. A tiny autoencoder memorizes four samples.
Outcome overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  const GridSpec grid{8, 16, {}};
  const auto ds = synth_dataset(grid, 4, 11);
  const std::vector<std::size_t> times{0, 1, 2, 3};
  const auto data = make_samples(ds, times, training_stats(ds, times), std::nullopt);
  ModelConfig m;
  m.patch_size = 2;
  m.embed_dim = m.latent_dim = 32;
  m.n_blocks = 4;
  m.mlp_ratio = 2.0;
  m.n_encoder_layers = m.n_decoder_layers = 2;
  m.in_channels = m.out_channels = 54;
  m.grid = grid;
  TrainConfig t;
  t.lr0 = 2e-3;
  t.decay_gamma = 0.999;
  t.batch_size = 4;  // one step per epoch
  t.n_epochs = 2000;
  t.seed = 1;
  TrainingState st = train_autoencoder(data, m, t, {.stop_after_epoch = 100});
  while (st.history.back().loss >= 1e-2 && st.epoch < t.n_epochs) {
    st = train_autoencoder(data, m, t, {.stop_after_epoch = st.epoch + 100}, &st);
  }
  const auto means = epoch_means(st.history);
  const double secs = seconds_since(t0);
  const bool ok = st.history.back().loss < 1e-2 && st.step <= 2000 && means.back() < means.front() && secs < 300.0;
  return {ok, fmt("MSE %.3g after %llu steps (epoch loss %.3g -> %.3g); %.1f s", st.history.back().loss,
                  static_cast<unsigned long long>(st.step), means.front(), means.back(), secs)};
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

// 9. `ablate` emits the 4-row patch x layers grid.
Outcome ablation_shape() {
  TempDir tmp;
  if (run_cli("ablate --config '" WXE_SOURCE_DIR "/configs/smoke.json'", tmp) != 0) {
    return {false, "ablate failed: " + wxe::testing::read_bytes(tmp.file("err.txt"))};
  }
  std::string csv_path;
  for (const auto& e : fs::recursive_directory_iterator(tmp.path() / "runs")) {
    if (e.path().filename() == "ablation.csv") csv_path = e.path().string();
  }
  if (csv_path.empty()) return {false, "no ablation.csv"};
  std::istringstream in(wxe::testing::read_bytes(csv_path));
  std::string line;
  std::getline(in, line);
  const auto header = split_csv_line(line);
  bool ok = header.size() >= 6 && header[0] == "patch" && header[1] == "layers";
  for (std::size_t i = 2; ok && i < header.size(); i += 4) {
    ok = i + 3 < header.size() && header[i].ends_with("_rmse_mean") && header[i + 1].ends_with("_rmse_sigma") &&
         header[i + 2].ends_with("_ssim_mean") && header[i + 3].ends_with("_ssim_sigma");
  }
  std::set<std::pair<std::string, std::string>> cells;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    const auto f = split_csv_line(line);
    ok = ok && f.size() == header.size();
    for (std::size_t i = 2; ok && i < f.size(); ++i) ok = std::isfinite(std::stod(f[i]));
    if (f.size() >= 2) cells.insert({f[0], f[1]});
    ++rows;
  }
  const std::set<std::pair<std::string, std::string>> want{{"4", "4"}, {"4", "8"}, {"8", "4"}, {"8", "8"}};
  ok = ok && rows == 4 && cells == want;
  return {ok, fmt("%zu rows x %zu columns (%s)", rows, header.size(), header.size() > 2 ? "metric mu,sigma" : "")};
}

}  // namespace

int main(int argc, char** argv) {
  std::string parity_config = WXE_SOURCE_DIR "/configs/bench_parity.json";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--parity-config" && i + 1 < argc) {
      parity_config = argv[++i];
    } else {
      try {
        only.insert(std::stoi(a));
      } catch (const std::exception&) {
        std::cerr << "usage: acceptance [criterion numbers...] [--parity-config FILE]\n";
        return 2;
      }
    }
  }
  set_log_stream(nullptr);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", grad_checks},
      {"freeze invariant", freeze_invariant},
      {"parity", [&] { return parity(parity_config); }},
      {"parameter audit", parameter_audit},
      {"metric oracles", metric_oracles},
      {"evaluation schedule", schedule},
      {"determinism and formats", determinism_and_formats},
      {"overfit smoke", overfit},
      {"ablation harness", ablation_shape},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int n = int(k) + 1;
    if (!only.empty() && !only.count(n)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << n << "] " << criteria[k].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
