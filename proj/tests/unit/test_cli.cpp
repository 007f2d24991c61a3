#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sys/wait.h>

#include "test_util.hpp"
#include "wxembed/cli/pipeline.hpp"
#include "wxembed/core/checksum.hpp"
#include "wxembed/core/error.hpp"

using namespace wxe;
using wxe::testing::TempDir;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const TempDir& dir) {
  const std::string cmd = "cd '" + dir.path().string() + "' && '" WXE_CLI_PATH "' -q " + args + " >out.txt 2>err.txt";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const TempDir& dir, const std::string& name) { return wxe::testing::read_bytes(dir.file(name)); }

/// Tiny models on a 16x32 grid spanning Dec 31 to Jan 3: 48 train and 48 test steps.
nlohmann::json tiny_config_json() {
  const nlohmann::json model{{"patch_size", 4}, {"embed_dim", 8}, {"latent_dim", 8}, {"n_blocks", 2},
                             {"mlp_ratio", 1}};
  nlohmann::json ae = model, head = model, bespoke = model;
  ae["n_encoder_layers"] = ae["n_decoder_layers"] = 1;
  head["n_layers"] = 1;
  bespoke["n_layers"] = 3;
  const nlohmann::json train{{"lr0", 2e-3}, {"batch_size", 16}, {"n_epochs", 2}};
  nlohmann::json ae_train = train;
  ae_train["snapshot_every"] = 1;
  return {{"data", {{"grid", "16x32"}, {"n_times", 96}, {"start", "2019-12-31T00"}}},
          {"model", {{"autoencoder", ae}, {"downstream", head}, {"bespoke", bespoke}}},
          {"train", {{"autoencoder", ae_train}, {"downstream", train}, {"bespoke", train}}}};
}

}  // namespace

TEST_CASE("run config parsing, defaults and validation") {
  const RunConfig defaults = run_config_from_json(nlohmann::json::object());
  CHECK(defaults.data == DataSection{});
  CHECK(defaults.eval == EvalSection{});
  CHECK(defaults.train == TrainSection{});
  CHECK(defaults.model.downstream.n_layers == ModelConfig::full_scale(ModelRole::Downstream).n_layers);
  CHECK(defaults.model.downstream.grid->n_lat == 32);
  CHECK(format_hour(defaults.data.start) == "2019-12-24T00:00Z");

  const auto cfg = run_config_from_json(tiny_config_json());
  CHECK(cfg.data.grid.n_lat == 16);
  CHECK(cfg.model.autoencoder.grid->n_lon == 32);  // model grids follow the data grid
  CHECK(cfg.model.bespoke.role == ModelRole::Bespoke);
  CHECK(cfg.train.autoencoder.snapshot_every == 1);
  CHECK(run_config_from_json(to_json(cfg)) == cfg);

  auto bad = tiny_config_json();
  bad["data"]["colour"] = 1;
  CHECK_THROWS_WITH_AS(run_config_from_json(bad), "unknown config key 'data.colour'", UsageError);
  bad = tiny_config_json();
  bad["model"]["downstream"]["depth"] = 3;
  CHECK_THROWS_AS(run_config_from_json(bad), UsageError);
  bad = tiny_config_json();
  bad["extra"] = true;
  CHECK_THROWS_AS(run_config_from_json(bad), UsageError);
  bad = tiny_config_json();
  bad["model"]["bespoke"]["role"] = "downstream";
  CHECK_THROWS_AS(run_config_from_json(bad), UsageError);
  bad = tiny_config_json();
  bad["data"]["n_times"] = "many";
  CHECK_THROWS_WITH_AS(run_config_from_json(bad), "config field 'data.n_times' has the wrong type", UsageError);
  bad = tiny_config_json();
  bad["model"]["autoencoder"]["patch_size"] = 5;  // 16x32 is not divisible by 5
  CHECK_THROWS_AS(run_config_from_json(bad), UsageError);
  bad = tiny_config_json();
  bad["eval"] = {{"ssim_window", 10}};
  CHECK_THROWS_AS(run_config_from_json(bad), UsageError);
}

TEST_CASE("config hash separates commands and settings") {
  const auto cfg = run_config_from_json(tiny_config_json());
  CHECK(config_hash(cfg, "train-ae") == config_hash(run_config_from_json(to_json(cfg)), "train-ae"));
  CHECK(config_hash(cfg, "train-ae") != config_hash(cfg, "ablate"));
  auto other = cfg;
  other.data.seed = 7;
  CHECK(config_hash(cfg, "train-ae") != config_hash(other, "train-ae"));
}

TEST_CASE("run directories are content addressed and write-once") {
  TempDir tmp;
  auto cfg = run_config_from_json(tiny_config_json());
  cfg.paths.runs = tmp.file("runs");
  {
    RunDir dir(cfg, "train-ae");
    CHECK(dir.path().filename().string() == "train-ae-" + to_hex(config_hash(cfg, "train-ae")));
    CHECK(fs::exists(dir.path() / "config.json"));
    CHECK_FALSE(dir.complete());
    std::ofstream(dir.output("a.txt")) << "alpha";
    CHECK_THROWS_AS(dir.output("a.txt"), Error);
  }
  // An unfinished directory is only reopened on request.
  CHECK_THROWS_AS(RunDir(cfg, "train-ae"), Error);
  RunDir again(cfg, "train-ae", true);
  again.finalize({{"note", "x"}});
  CHECK(again.complete());
  const auto manifest = nlohmann::json::parse(wxe::testing::read_bytes((again.path() / "manifest.json").string()));
  CHECK(manifest.at("note") == "x");
  REQUIRE(manifest.at("outputs").size() == 2);
  CHECK(manifest.at("outputs")[0].at("name") == "a.txt");
  CHECK(manifest.at("outputs")[0].at("bytes") == 5);
  CHECK(manifest.at("outputs")[0].at("fnv1a64") == to_hex(fnv1a64("alpha", 5)));
  // A finished run can be reopened without --resume.
  CHECK_NOTHROW(RunDir(cfg, "train-ae"));
  CHECK(RunDir(cfg, "eval", false, "m=1").path() != RunDir(cfg, "eval", false, "m=2").path());
}

TEST_CASE("training stage resumes from the newest snapshot bit-exactly") {
  TempDir tmp;
  auto cfg = run_config_from_json(tiny_config_json());
  cfg.paths.runs = tmp.file("runs");
  set_log_stream(nullptr);
  const auto data = prepare_data(cfg);
  CHECK(data.train.size() == 48);
  CHECK(data.test.size() == 48);

  RunDir full(cfg, "train-ae");
  const auto reference = train_ae_stage(cfg, data, full, false);

  auto other = cfg;
  other.paths.runs = tmp.file("runs2");
  RunDir partial(other, "train-ae");
  // Keep only the first snapshot, as if the process had died during epoch 2.
  auto samples = make_samples(data.ds, data.train, data.stats, std::nullopt);
  TrainHooks stop;
  stop.stop_after_epoch = 1;
  samples.dataset_checksum = data.checksum;
  save_checkpoint(train_autoencoder(samples, cfg.model.autoencoder, cfg.train.autoencoder, stop),
                  partial.output("autoencoder.e0001.wxc"));
  const auto resumed = train_ae_stage(other, data, partial, true);
  CHECK(resumed == reference);
  CHECK(wxe::testing::read_bytes((partial.path() / "autoencoder.wxc").string()) ==
        wxe::testing::read_bytes((full.path() / "autoencoder.wxc").string()));
  set_log_stream(&std::clog);
}

TEST_CASE("ablation grid layout") {
  REQUIRE(std::size(kAblationGrid) == 4);
  CHECK(kAblationGrid[0] == std::pair<std::size_t, std::size_t>{4, 8});
  CHECK(kAblationGrid[3] == std::pair<std::size_t, std::size_t>{8, 4});
  TempDir tmp;
  AblationRow row{4, 8, {AggregateRecord{"u10", "patch4-layers8", 2, 1.0, 0.5, 0.25, 0.125}}};
  write_ablation_csv({row}, {"u10"}, tmp.file("a.csv"));
  CHECK(wxe::testing::read_bytes(tmp.file("a.csv")) ==
        "patch,layers,u10_rmse_mean,u10_rmse_sigma,u10_ssim_mean,u10_ssim_sigma\n4,8,1,0.5,0.25,0.125\n");
}

TEST_CASE("cli exit codes and artifacts") {
  TempDir tmp;
  CHECK(run_cli("--help", tmp) == 0);
  CHECK(slurp(tmp, "out.txt").find("bench-parity") != std::string::npos);
  for (const char* sub : {"synth", "stats", "train-ae", "train-downstream", "train-bespoke", "eval", "params",
                          "ablate", "bench-parity"}) {
    CHECK(run_cli(std::string(sub) + " --help", tmp) == 0);
    CHECK(slurp(tmp, "out.txt").find("--") != std::string::npos);
  }
  CHECK(run_cli("frobnicate", tmp) == 2);
  CHECK(slurp(tmp, "err.txt").find("Usage") != std::string::npos);
  CHECK(run_cli("", tmp) == 2);
  CHECK(run_cli("synth", tmp) == 2);  // --out is required
  CHECK(run_cli("synth --grid 3y --out x.wxd", tmp) == 2);
  CHECK(run_cli("params --config missing.json", tmp) == 2);

  CHECK(run_cli("synth --seed 42 --grid 16x32 --times 96 --start 2019-12-31T00 --out d.wxd", tmp) == 0);
  CHECK(fs::exists(tmp.file("d.wxd")));
  const auto logged = slurp(tmp, "out.txt");
  CHECK(logged == "checksum " + to_hex(dataset_checksum(tmp.file("d.wxd"))) + "\n");
  CHECK(run_cli("synth --seed 42 --grid 16x32 --times 96 --out d.wxd", tmp) == 1);  // write-once

  std::ofstream(tmp.file("bad.json")) << R"({"data": {"colour": 1}})";
  CHECK(run_cli("params --config bad.json", tmp) == 2);
  CHECK(slurp(tmp, "err.txt").find("data.colour") != std::string::npos);

  std::ofstream(tmp.file("tiny.json")) << tiny_config_json().dump();
  CHECK(run_cli("params --config tiny.json --role bespoke", tmp) == 0);
  CHECK(std::stoul(slurp(tmp, "out.txt")) == audit_params(run_config_from_json(tiny_config_json()).model).bespoke);

  // Data from the file and from the generator are the same bytes, so stats agree.
  CHECK(run_cli("stats --config tiny.json --data d.wxd --out s1.json", tmp) == 0);
  CHECK(run_cli("stats --config tiny.json --out s2.json", tmp) == 0);
  CHECK(slurp(tmp, "s1.json") == slurp(tmp, "s2.json"));

  std::string corrupt = slurp(tmp, "d.wxd");
  corrupt[corrupt.size() / 2] ^= 0x10;
  wxe::testing::write_bytes(tmp.file("corrupt.wxd"), corrupt);
  CHECK(run_cli("stats --config tiny.json --data corrupt.wxd --out s3.json", tmp) == 1);

  CHECK(run_cli("train-ae --config tiny.json", tmp) == 0);
  const auto encoder = slurp(tmp, "out.txt").substr(0, slurp(tmp, "out.txt").find('\n'));
  CHECK(fs::exists(tmp.file(encoder)));
  const auto encoder_bytes = slurp(tmp, encoder);
  CHECK(run_cli("train-ae --config tiny.json", tmp) == 0);  // complete run: reported, not redone
  CHECK(slurp(tmp, encoder) == encoder_bytes);

  CHECK(run_cli("train-downstream --config tiny.json --encoder " + encoder + " --target tcc", tmp) == 0);
  const auto head = slurp(tmp, "out.txt").substr(0, slurp(tmp, "out.txt").find('\n'));
  CHECK(slurp(tmp, encoder) == encoder_bytes);  // inputs are never mutated
  const auto head_state = load_checkpoint(tmp.file(head));
  CHECK(head_state.group("encoder").params == load_checkpoint(tmp.file(encoder)).group("encoder").params);
  CHECK(run_cli("train-downstream --config tiny.json --encoder " + encoder + " --target nope", tmp) == 2);

  CHECK(run_cli("train-bespoke --config tiny.json --target tcc", tmp) == 0);
  const auto bespoke = slurp(tmp, "out.txt").substr(0, slurp(tmp, "out.txt").find('\n'));

  CHECK(run_cli("eval --config tiny.json --model downstream=" + head + " --model bespoke=" + bespoke, tmp) == 0);
  CHECK(slurp(tmp, "out.txt").find("tcc") != std::string::npos);
  CHECK(run_cli("eval --config tiny.json --model downstream", tmp) == 2);
  CHECK(run_cli("eval --config tiny.json --model x=absent.wxc", tmp) == 2);
  std::size_t reports = 0;
  for (const auto& e : fs::directory_iterator(tmp.path() / "runs")) {
    if (e.path().filename().string().rfind("eval-", 0) != 0) continue;
    ++reports;
    const auto csv = wxe::testing::read_bytes((e.path() / "report.csv").string());
    CHECK(csv.rfind(std::string(kReportCsvHeader) + "\n", 0) == 0);
    CHECK(fs::exists(e.path() / "report.json"));
    CHECK(fs::exists(e.path() / "manifest.json"));
  }
  CHECK(reports == 1);
}
