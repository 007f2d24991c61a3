#include "wxembed/cli/run_config.hpp"

#include <fstream>
#include <set>

#include "wxembed/core/checksum.hpp"
#include "wxembed/core/error.hpp"

namespace wxe {
namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw UsageError("config section '" + where + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw UsageError("unknown config key '" + where + "." + k + "'");
  }
}

template <typename T>
void get(const nlohmann::json& j, const char* key, T& dst, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError("config field '" + where + "." + key + "' has the wrong type");
  }
}

nlohmann::json grid_json(const GridSpec& g) { return {g.n_lat, g.n_lon}; }

GridSpec grid_from_json(const nlohmann::json& j, const std::string& where) {
  try {
    if (j.is_string()) return parse_grid(j.get<std::string>());
    return GridSpec{j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>(), {}};
  } catch (const nlohmann::json::exception&) {
    throw UsageError("config field '" + where + "' must be \"HxW\" or [H, W]");
  }
}

ModelConfig model_from_json(const nlohmann::json* j, ModelRole role, const GridSpec& data_grid,
                            const std::string& where) {
  auto base = to_json(ModelConfig::full_scale(role));
  base["grid"] = grid_json(data_grid);
  if (j) {
    if (!j->is_object()) throw UsageError("config section '" + where + "' must be an object");
    if (j->contains("role") && j->at("role") != to_string(role)) {
      throw UsageError("config field '" + where + ".role' must be \"" + to_string(role) + "\"");
    }
    for (const auto& [k, v] : j->items()) base[k] = k == "grid" ? grid_json(grid_from_json(v, where + ".grid")) : v;
  }
  try {
    return model_config_from_json(base);
  } catch (const UsageError& e) {
    throw UsageError(where + ": " + e.what());
  }
}

TrainConfig train_from_json(const nlohmann::json* j, const std::string& where) {
  if (!j) return {};
  try {
    return train_config_from_json(*j);
  } catch (const UsageError& e) {
    throw UsageError(where + ": " + e.what());
  }
}

const nlohmann::json* child(const nlohmann::json& j, const char* key) {
  return j.contains(key) ? &j.at(key) : nullptr;
}

}  // namespace

void RunConfig::validate() const {
  if (!data.path) {
    data.grid.validate();
    if (data.n_times < 1) throw UsageError("data.n_times must be >= 1");
    if (data.step_hours < 1) throw UsageError("data.step_hours must be >= 1");
    if (data.modes_per_channel < 1) throw UsageError("data.modes_per_channel must be >= 1");
  }
  const std::pair<const ModelConfig*, const char*> models[] = {
      {&model.autoencoder, "model.autoencoder"}, {&model.downstream, "model.downstream"}, {&model.bespoke, "model.bespoke"}};
  for (const auto& [m, name] : models) {
    try {
      m->validate();
    } catch (const UsageError& e) {
      throw UsageError(std::string(name) + ": " + e.what());
    }
  }
  const std::pair<const TrainConfig*, const char*> trains[] = {
      {&train.autoencoder, "train.autoencoder"}, {&train.downstream, "train.downstream"}, {&train.bespoke, "train.bespoke"}};
  for (const auto& [t, name] : trains) {
    try {
      t->validate();
    } catch (const UsageError& e) {
      throw UsageError(std::string(name) + ": " + e.what());
    }
  }
  if (eval.variables.empty()) throw UsageError("eval.variables must name at least one diagnostic");
  if (eval.ssim.window % 2 == 0) throw UsageError("eval.ssim_window must be odd");
  if (!(eval.ssim.sigma > 0.0)) throw UsageError("eval.ssim_sigma must be positive");
  if (!(eval.parity_ratio > 0.0)) throw UsageError("eval.parity_ratio must be positive");
  if (paths.runs.empty()) throw UsageError("paths.runs must not be empty");
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json data{{"seed", c.data.seed},
                      {"grid", grid_json(c.data.grid)},
                      {"n_times", c.data.n_times},
                      {"start", format_hour(c.data.start)},
                      {"step_hours", c.data.step_hours},
                      {"modes_per_channel", c.data.modes_per_channel}};
  if (c.data.path) data["path"] = *c.data.path;
  nlohmann::json eval{{"variables", c.eval.variables},
                      {"ssim_window", c.eval.ssim.window},
                      {"ssim_sigma", c.eval.ssim.sigma},
                      {"ssim_k1", c.eval.ssim.k1},
                      {"ssim_k2", c.eval.ssim.k2},
                      {"lat_weighted", c.eval.lat_weighted},
                      {"parity_ratio", c.eval.parity_ratio},
                      {"ablation_variables", c.eval.ablation_variables}};
  if (c.eval.year) eval["year"] = *c.eval.year;
  return {{"data", data},
          {"model",
           {{"autoencoder", to_json(c.model.autoencoder)},
            {"downstream", to_json(c.model.downstream)},
            {"bespoke", to_json(c.model.bespoke)}}},
          {"train",
           {{"autoencoder", to_json(c.train.autoencoder)},
            {"downstream", to_json(c.train.downstream)},
            {"bespoke", to_json(c.train.bespoke)}}},
          {"eval", eval},
          {"paths", {{"runs", c.paths.runs}}}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"data", "model", "train", "eval", "paths"}, "config");
  RunConfig c;
  if (const auto* d = child(j, "data")) {
    reject_unknown(*d, {"path", "seed", "grid", "n_times", "start", "step_hours", "modes_per_channel"}, "data");
    std::string path;
    get(*d, "path", path, "data");
    if (!path.empty()) c.data.path = path;
    get(*d, "seed", c.data.seed, "data");
    if (d->contains("grid")) c.data.grid = grid_from_json(d->at("grid"), "data.grid");
    get(*d, "n_times", c.data.n_times, "data");
    if (d->contains("start")) {
      std::string s;
      get(*d, "start", s, "data");
      try {
        c.data.start = parse_hour(s);
      } catch (const UsageError& e) {
        throw UsageError(std::string("data.start: ") + e.what());
      }
    }
    get(*d, "step_hours", c.data.step_hours, "data");
    get(*d, "modes_per_channel", c.data.modes_per_channel, "data");
  }
  const nlohmann::json* m = child(j, "model");
  if (m) reject_unknown(*m, {"autoencoder", "downstream", "bespoke"}, "model");
  c.model.autoencoder = model_from_json(m ? child(*m, "autoencoder") : nullptr, ModelRole::Autoencoder, c.data.grid,
                                        "model.autoencoder");
  c.model.downstream = model_from_json(m ? child(*m, "downstream") : nullptr, ModelRole::Downstream, c.data.grid,
                                       "model.downstream");
  c.model.bespoke =
      model_from_json(m ? child(*m, "bespoke") : nullptr, ModelRole::Bespoke, c.data.grid, "model.bespoke");

  if (const auto* t = child(j, "train")) {
    reject_unknown(*t, {"autoencoder", "downstream", "bespoke"}, "train");
    c.train.autoencoder = train_from_json(child(*t, "autoencoder"), "train.autoencoder");
    c.train.downstream = train_from_json(child(*t, "downstream"), "train.downstream");
    c.train.bespoke = train_from_json(child(*t, "bespoke"), "train.bespoke");
  }
  if (const auto* e = child(j, "eval")) {
    reject_unknown(*e,
                   {"variables", "ssim_window", "ssim_sigma", "ssim_k1", "ssim_k2", "lat_weighted", "year",
                    "parity_ratio", "ablation_variables"},
                   "eval");
    get(*e, "variables", c.eval.variables, "eval");
    get(*e, "ssim_window", c.eval.ssim.window, "eval");
    get(*e, "ssim_sigma", c.eval.ssim.sigma, "eval");
    get(*e, "ssim_k1", c.eval.ssim.k1, "eval");
    get(*e, "ssim_k2", c.eval.ssim.k2, "eval");
    get(*e, "lat_weighted", c.eval.lat_weighted, "eval");
    if (e->contains("year")) {
      int y = 0;
      get(*e, "year", y, "eval");
      c.eval.year = y;
    }
    get(*e, "parity_ratio", c.eval.parity_ratio, "eval");
    get(*e, "ablation_variables", c.eval.ablation_variables, "eval");
  }
  if (const auto* p = child(j, "paths")) {
    reject_unknown(*p, {"runs"}, "paths");
    get(*p, "runs", c.paths.runs, "paths");
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

std::uint64_t config_hash(const RunConfig& c, const std::string& command) {
  Fnv1a64 h;
  h.update(command);
  h.update(std::string_view("\n"));
  h.update(to_json(c).dump());
  return h.digest();
}

}  // namespace wxe
