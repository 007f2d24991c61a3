#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace wxe {

enum class Role { Prognostic, Diagnostic };
enum class Activation { None, Sigmoid };
enum class MaskKind { None, LandSea };

struct DataRange {
  double lo = 0.0;
  double hi = 0.0;
  double span() const noexcept { return hi - lo; }
  bool operator==(const DataRange&) const = default;
};

/// One catalog row. `level_hpa` is empty for surface variables.
struct VariableEntry {
  std::string name;
  std::optional<int> level_hpa;
  Role role = Role::Prognostic;
  std::optional<DataRange> data_range;
  Activation activation = Activation::None;
  MaskKind mask = MaskKind::None;

  bool is_surface() const noexcept { return !level_hpa.has_value(); }
  bool operator==(const VariableEntry&) const = default;
};

/// Ordered variable list binding tensor channels to named variables.
class VariableCatalog {
 public:
  VariableCatalog() = default;
  /// Throws UsageError on duplicate names or a diagnostic entry without a range.
  explicit VariableCatalog(std::vector<VariableEntry> entries);

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<VariableEntry>& entries() const noexcept { return entries_; }
  const VariableEntry& operator[](std::size_t i) const { return entries_.at(i); }

  std::optional<std::size_t> find(const std::string& name) const;
  /// Like find() but throws UsageError naming the variable.
  std::size_t index_of(const std::string& name) const;

  VariableCatalog select(Role role) const;
  std::vector<std::size_t> indices(Role role) const;
  std::size_t count(Role role) const;

  bool operator==(const VariableCatalog&) const = default;

 private:
  std::vector<VariableEntry> entries_;
};

inline constexpr std::array<const char*, 9> kSurfaceVariables = {"u10", "v10", "t2m", "d2m", "msl",
                                                                 "sp",  "u100", "v100", "tcwv"};
inline constexpr std::array<int, 9> kPressureLevels = {1000, 925, 850, 700, 500, 300, 250, 200, 50};
inline constexpr std::array<const char*, 5> kLevelVariables = {"t", "u", "v", "z", "r"};

/// 54 prognostic inputs (surface block, then level-major t/u/v/z/r from 1000 to 50 hPa)
/// followed by the diagnostics stl1 and tcc.
VariableCatalog make_default_catalog();

nlohmann::json to_json(const VariableCatalog& c);
VariableCatalog catalog_from_json(const nlohmann::json& j);

const char* to_string(Activation a) noexcept;
const char* to_string(MaskKind m) noexcept;
const char* to_string(Role r) noexcept;

}  // namespace wxe
