#include "wxembed/data/catalog.hpp"

#include <unordered_set>

#include "wxembed/core/error.hpp"

namespace wxe {

VariableCatalog::VariableCatalog(std::vector<VariableEntry> entries) : entries_(std::move(entries)) {
  std::unordered_set<std::string> seen;
  for (const auto& e : entries_) {
    if (e.name.empty()) throw UsageError("catalog entry with empty name");
    if (!seen.insert(e.name).second) throw UsageError("duplicate catalog entry '" + e.name + "'");
    if (e.role == Role::Diagnostic && !e.data_range) {
      throw UsageError("diagnostic entry '" + e.name + "' has no data_range");
    }
    if (e.data_range && !(e.data_range->hi > e.data_range->lo)) {
      throw UsageError("entry '" + e.name + "' has an empty data_range");
    }
  }
}

std::optional<std::size_t> VariableCatalog::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t VariableCatalog::index_of(const std::string& name) const {
  if (auto i = find(name)) return *i;
  throw UsageError("variable '" + name + "' not in catalog");
}

VariableCatalog VariableCatalog::select(Role role) const {
  std::vector<VariableEntry> out;
  for (const auto& e : entries_) {
    if (e.role == role) out.push_back(e);
  }
  return VariableCatalog(std::move(out));
}

std::vector<std::size_t> VariableCatalog::indices(Role role) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].role == role) out.push_back(i);
  }
  return out;
}

std::size_t VariableCatalog::count(Role role) const { return indices(role).size(); }

VariableCatalog make_default_catalog() {
  std::vector<VariableEntry> entries;
  entries.reserve(56);
  for (const char* name : kSurfaceVariables) {
    entries.push_back({name, std::nullopt, Role::Prognostic, std::nullopt, Activation::None, MaskKind::None});
  }
  for (int level : kPressureLevels) {
    for (const char* var : kLevelVariables) {
      entries.push_back({std::string(var) + std::to_string(level), level, Role::Prognostic, std::nullopt,
                         Activation::None, MaskKind::None});
    }
  }
  entries.push_back({"stl1", std::nullopt, Role::Diagnostic, DataRange{220.0, 290.0}, Activation::None,
                     MaskKind::LandSea});
  entries.push_back({"tcc", std::nullopt, Role::Diagnostic, DataRange{0.0, 1.0}, Activation::Sigmoid,
                     MaskKind::None});
  return VariableCatalog(std::move(entries));
}

const char* to_string(Activation a) noexcept { return a == Activation::Sigmoid ? "sigmoid" : "none"; }
const char* to_string(MaskKind m) noexcept { return m == MaskKind::LandSea ? "land-sea" : "none"; }
const char* to_string(Role r) noexcept { return r == Role::Diagnostic ? "diagnostic" : "prognostic"; }

nlohmann::json to_json(const VariableCatalog& c) {
  auto arr = nlohmann::json::array();
  for (const auto& e : c.entries()) {
    nlohmann::json j;
    j["name"] = e.name;
    j["level"] = e.level_hpa ? nlohmann::json(*e.level_hpa) : nlohmann::json("surface");
    j["role"] = to_string(e.role);
    j["activation"] = to_string(e.activation);
    j["mask"] = to_string(e.mask);
    if (e.data_range) j["data_range"] = {e.data_range->lo, e.data_range->hi};
    arr.push_back(std::move(j));
  }
  return arr;
}

VariableCatalog catalog_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw UsageError("catalog must be a JSON array");
  std::vector<VariableEntry> entries;
  for (const auto& row : j) {
    VariableEntry e;
    e.name = row.at("name").get<std::string>();
    const auto& level = row.at("level");
    if (level.is_number_integer()) {
      e.level_hpa = level.get<int>();
    } else if (level != "surface") {
      throw UsageError("bad level for '" + e.name + "'");
    }
    const auto role = row.at("role").get<std::string>();
    if (role == "diagnostic") {
      e.role = Role::Diagnostic;
    } else if (role != "prognostic") {
      throw UsageError("bad role for '" + e.name + "'");
    }
    const auto act = row.at("activation").get<std::string>();
    if (act == "sigmoid") {
      e.activation = Activation::Sigmoid;
    } else if (act != "none") {
      throw UsageError("bad activation for '" + e.name + "'");
    }
    const auto mask = row.at("mask").get<std::string>();
    if (mask == "land-sea") {
      e.mask = MaskKind::LandSea;
    } else if (mask != "none") {
      throw UsageError("bad mask for '" + e.name + "'");
    }
    if (row.contains("data_range")) {
      const auto& r = row.at("data_range");
      e.data_range = DataRange{r.at(0).get<double>(), r.at(1).get<double>()};
    }
    entries.push_back(std::move(e));
  }
  return VariableCatalog(std::move(entries));
}

}  // namespace wxe
