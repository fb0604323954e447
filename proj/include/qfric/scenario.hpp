#ifndef QFRIC_SCENARIO_HPP
#define QFRIC_SCENARIO_HPP

#include "qfric/rates.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace qfric {

inline constexpr const char* kVersion = "0.1.0";

enum class ScenarioKind {
  rate_surface,
  rate_free,
  kk_check,
  identity_check,
  dissipation_check,
  reciprocity_check,
  fresnel,
  sweep,
  finite_time
};

std::string to_string(ScenarioKind k);
ScenarioKind kind_from_string(const std::string& s);

enum class SweepAxis { beta, z0, omega, kx };

struct GridSpec {
  double min = 0.0;
  double max = 0.0;
  int count = 1;
  bool log = false;

  void validate(const std::string& where) const;
  std::vector<double> points() const;
};

struct SweepSpec {
  SweepAxis axis = SweepAxis::z0;
  GridSpec grid;
  ScenarioKind target = ScenarioKind::rate_surface;
};

struct Scenario {
  ScenarioKind kind = ScenarioKind::rate_surface;
  std::string model_file;  // as written
  std::string model_path;  // resolved against the scenario directory
  SusceptibilityModel model;
  double beta = 0.0;
  DetectorSpec detector;
  QuadratureSpec quad;
  std::optional<SweepSpec> sweep;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  /// Reference frequency in rad/s; when set, records carry SI conversion factors.
  std::optional<double> reference_frequency;

  /// Fully defaulted, key-ordered form; model content inlined.
  nlohmann::ordered_json canonical() const;
};

/// Throws DomainError with a field path ("quadrature.rel_tol: ...").
Scenario parse_scenario(const nlohmann::json& doc, const std::string& base_dir);
Scenario load_scenario_file(const std::string& path);

using Cell = std::variant<double, bool, std::string>;

enum class ColumnType { number, flag, text };

struct Column {
  Column() = default;
  Column(std::string n, ColumnType t = ColumnType::number, std::string u = {})
      : name(std::move(n)), type(t), unit(std::move(u)) {}

  std::string name;
  ColumnType type = ColumnType::number;
  std::string unit;  // natural units, in terms of the reference frequency w0 and c
  bool operator==(const Column&) const = default;
};

struct Provenance {
  std::string version = kVersion;
  std::string timestamp;
  nlohmann::ordered_json quad = nlohmann::ordered_json::object();
  bool operator==(const Provenance&) const = default;
};

struct ResultRecord {
  nlohmann::ordered_json scenario;
  std::vector<Column> columns;
  std::vector<std::vector<Cell>> rows;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  std::vector<std::string> diagnostics;
  bool converged = true;
  Provenance provenance;
  double wall_time = 0.0;

  bool operator==(const ResultRecord&) const = default;
};

struct RunOptions {
  unsigned workers = 0;  // 0 = available cores
};

ResultRecord run_scenario(const Scenario& s, const RunOptions& opts = {});

std::string format_number(double x);
std::string to_csv(const ResultRecord& r);
nlohmann::ordered_json to_json(const ResultRecord& r);
ResultRecord record_from_json(const nlohmann::ordered_json& j);

enum class OutputFormat { csv, json };

/// Writes to `path`, or stdout when empty. Throws IoError.
void emit_results(const ResultRecord& r, OutputFormat format, const std::string& path);

}  // namespace qfric

#endif  // QFRIC_SCENARIO_HPP
