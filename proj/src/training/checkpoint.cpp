#include "wxembed/training/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>

#include "wxembed/core/binary_io.hpp"
#include "wxembed/core/checksum.hpp"
#include "wxembed/core/error.hpp"

namespace wxe {

using FE = FormatError;

const ParamGroup& TrainingState::group(const std::string& role) const {
  for (const auto& g : groups)
    if (g.params.role() == role) return g;
  throw UsageError("checkpoint has no '" + role + "' parameters");
}

ParamGroup& TrainingState::group(const std::string& role) {
  for (auto& g : groups)
    if (g.params.role() == role) return g;
  throw UsageError("checkpoint has no '" + role + "' parameters");
}

bool TrainingState::has_group(const std::string& role) const noexcept {
  for (const auto& g : groups)
    if (g.params.role() == role) return true;
  return false;
}

namespace {

const char* init_name(Init i) {
  switch (i) {
    case Init::Zeros:
      return "zeros";
    case Init::Ones:
      return "ones";
    case Init::TruncNormal:
      return "trunc_normal";
  }
  return "?";
}

Init parse_init(const std::string& s) {
  if (s == "zeros") return Init::Zeros;
  if (s == "ones") return Init::Ones;
  if (s == "trunc_normal") return Init::TruncNormal;
  throw FE(FE::Kind::BadHeader, "unknown init tag '" + s + "'");
}

std::uint64_t parse_hex(const std::string& s) {
  std::size_t used = 0;
  const auto v = std::stoull(s, &used, 16);
  if (used != s.size()) throw FE(FE::Kind::BadHeader, "bad hex value '" + s + "'");
  return v;
}

nlohmann::json manifest(const TrainingState& s) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["role"] = to_string(s.role);
  j["model"] = to_json(s.model);
  j["encoder_model"] = s.encoder_model ? to_json(*s.encoder_model) : nlohmann::json(nullptr);
  j["train"] = to_json(s.train);
  j["target"] = s.target ? nlohmann::json(*s.target) : nlohmann::json(nullptr);
  j["target_normalized"] = s.target_normalized;
  j["stats"] = s.stats ? to_json(*s.stats) : nlohmann::json(nullptr);
  j["dataset_checksum"] = s.dataset_checksum ? nlohmann::json(to_hex(*s.dataset_checksum)) : nlohmann::json(nullptr);
  j["step"] = s.step;
  j["epoch"] = s.epoch;
  j["rng"] = {{"seed", s.train.seed}, {"next_epoch", s.epoch}};
  auto hist = nlohmann::json::array();
  for (const auto& r : s.history) hist.push_back({r.epoch, r.step, r.lr, r.loss});
  j["history"] = hist;
  auto groups = nlohmann::json::array();
  for (const auto& g : s.groups) {
    auto tensors = nlohmann::json::array();
    for (const auto& t : g.params.tensors()) {
      tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"init", init_name(t.init)}});
    }
    groups.push_back({{"role", g.params.role()},
                      {"trainable", g.trainable},
                      {"adam_t", g.opt.t},
                      {"fingerprint", to_hex(g.params.fingerprint())},
                      {"tensors", tensors}});
  }
  j["groups"] = groups;
  return j;
}

void write_set(io::HashingWriter& w, const ParamSet<float>& ps) {
  for (const auto& t : ps.tensors()) w.array<float>(t.data);
}

void read_set(io::Reader& r, ParamSet<float>& ps) {
  for (auto& t : ps.tensors()) r.array<float>(std::span<float>(t.data), "tensor payload");
}

}  // namespace

void save_checkpoint(const TrainingState& state, const std::string& path) {
  for (const auto& g : state.groups) {
    if (g.trainable && (g.opt.m.size() != g.params.size() || g.opt.v.size() != g.params.size())) {
      throw UsageError("optimizer state for '" + g.params.role() + "' does not mirror its parameters");
    }
  }
  const std::string header = manifest(state).dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + tmp);
    io::HashingWriter w(os);
    w.bytes(kCheckpointMagic, 4);
    w.value<std::uint64_t>(header.size());
    w.bytes(header.data(), header.size());
    for (const auto& g : state.groups) {
      write_set(w, g.params);
      if (g.trainable) {
        write_set(w, g.opt.m);
        write_set(w, g.opt.v);
      }
    }
    w.trailer();
    os.close();
    if (!os) throw Error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

TrainingState load_checkpoint(const std::string& path) {
  const auto buf = io::slurp(path);
  if (buf.size() < 4 || std::memcmp(buf.data(), kCheckpointMagic, 4) != 0) {
    throw FE(FE::Kind::BadMagic, path + " is not a WXC1 checkpoint");
  }
  if (buf.size() < 4 + 8 + 8) throw FE(FE::Kind::Truncated, "checkpoint truncated");
  const std::size_t body = buf.size() - 8;
  Fnv1a64 h;
  h.update(std::span<const std::byte>(buf.data(), body));
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + body, 8);
  if (io::to_little(stored) != h.digest()) throw FE(FE::Kind::ChecksumMismatch, "checkpoint checksum mismatch");

  io::Reader r(std::span<const std::byte>(buf.data(), body));
  r.take(4, "magic");
  const auto len = r.value<std::uint64_t>("manifest length");
  if (len > r.remaining()) throw FE(FE::Kind::Truncated, "checkpoint truncated inside manifest");
  const auto raw = r.take(len, "manifest");

  TrainingState s;
  std::vector<std::uint64_t> fingerprints;
  try {
    const auto j = nlohmann::json::parse(std::string(reinterpret_cast<const char*>(raw.data()), raw.size()));
    if (j.at("format_version").get<int>() != 1) throw FE(FE::Kind::BadHeader, "unsupported checkpoint version");
    s.role = parse_model_role(j.at("role").get<std::string>());
    s.model = model_config_from_json(j.at("model"));
    if (!j.at("encoder_model").is_null()) s.encoder_model = model_config_from_json(j["encoder_model"]);
    s.train = train_config_from_json(j.at("train"));
    if (!j.at("target").is_null()) s.target = j["target"].get<std::string>();
    s.target_normalized = j.at("target_normalized").get<bool>();
    if (!j.at("stats").is_null()) s.stats = clim_stats_from_json(j["stats"]);
    if (!j.at("dataset_checksum").is_null()) s.dataset_checksum = parse_hex(j["dataset_checksum"].get<std::string>());
    s.step = j.at("step").get<std::uint64_t>();
    s.epoch = j.at("epoch").get<std::size_t>();
    for (const auto& rec : j.at("history")) {
      s.history.push_back({rec.at(0).get<std::size_t>(), rec.at(1).get<std::uint64_t>(), rec.at(2).get<double>(),
                           rec.at(3).get<double>()});
    }
    for (const auto& gj : j.at("groups")) {
      ParamGroup g;
      g.params = ParamSet<float>(gj.at("role").get<std::string>());
      for (const auto& t : gj.at("tensors")) {
        g.params.add(t.at("name").get<std::string>(), t.at("shape").get<std::vector<std::size_t>>(),
                     parse_init(t.at("init").get<std::string>()));
      }
      g.trainable = gj.at("trainable").get<bool>();
      if (g.trainable) g.opt = OptimizerState::fresh(g.params);
      g.opt.t = gj.at("adam_t").get<std::uint64_t>();
      fingerprints.push_back(parse_hex(gj.at("fingerprint").get<std::string>()));
      s.groups.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FE(FE::Kind::BadHeader, std::string("checkpoint manifest: ") + e.what());
  } catch (const UsageError& e) {
    throw FE(FE::Kind::BadHeader, std::string("checkpoint manifest: ") + e.what());
  }

  std::size_t expected = 0;
  for (const auto& g : s.groups) expected += g.params.numel() * sizeof(float) * (g.trainable ? 3 : 1);
  if (expected != r.remaining()) {
    throw FE(FE::Kind::ShapeMismatch, "checkpoint payload size " + std::to_string(r.remaining()) +
                                          " does not match manifest (" + std::to_string(expected) + ")");
  }
  for (std::size_t i = 0; i < s.groups.size(); ++i) {
    auto& g = s.groups[i];
    read_set(r, g.params);
    if (g.trainable) {
      read_set(r, g.opt.m);
      read_set(r, g.opt.v);
    }
    if (g.params.fingerprint() != fingerprints[i]) {
      throw FE(FE::Kind::ShapeMismatch, "fingerprint of '" + g.params.role() + "' does not match the manifest");
    }
  }
  return s;
}

void write_loss_csv(const std::vector<LossRecord>& history, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write " + path);
  os << "epoch,step,lr,loss\n" << std::setprecision(17);
  for (const auto& r : history) os << r.epoch << ',' << r.step << ',' << r.lr << ',' << r.loss << '\n';
  if (!os) throw Error("write failed for " + path);
}

std::vector<double> epoch_means(const std::vector<LossRecord>& history) {
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (const auto& r : history) {
    auto& [sum, n] = acc[r.epoch];
    sum += r.loss;
    ++n;
  }
  std::vector<double> out;
  for (const auto& [e, sn] : acc) out.push_back(sn.first / static_cast<double>(sn.second));
  return out;
}

}  // namespace wxe
