#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "abe_cities/attrspace.hpp"
#include "abe_cities/city.hpp"

// Experiment drivers: issue a population of route-based keys, measure how
// revocations spread across users, key and label sizes, and seal time.
namespace abe_cities::citysim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CityConfig {
  std::uint32_t cols = 8;
  std::uint32_t rows = 8;
  double block_length = 200;
  double segment_length = 25;
  std::optional<std::filesystem::path> file;  // overrides the grid when set

  CityModel build() const;
};

struct ExperimentConfig {
  attrspace::Representation representation = attrspace::Representation::segment_tree();
  double route_length = 500;
  std::uint32_t users = 100;
  std::uint32_t subscription_days = 365;
  std::uint32_t lifetime_days = 1826;
  std::uint64_t seed = 1;

  // Throws ConfigError.
  void validate() const;
};

// The users of one run, independent of the representation: a run with the
// same seed, length, user count and subscription draws the same routes and
// validity periods in the same issuance order.
struct UserProfile {
  RouteSpec route;
  attrspace::PolicySpec spec;
};
std::vector<UserProfile> generate_population(const CityModel& city, const ExperimentConfig& config);

struct IssuedPopulation {
  attrspace::AttributeSpace space;
  std::vector<UserProfile> users;
  std::vector<kpabe::AccessPolicy> policies;  // issuance order
};
IssuedPopulation issue_population(const CityModel& city, const ExperimentConfig& config);

struct SweepResult {
  double affected_mean_pct = 0;
  double affected_ci95_pct = 0;
  // affected[u]: other users sharing a road attribute with u's key.
  std::vector<std::vector<std::uint32_t>> affected;
};
// Revokes each user in turn against the full population; every trial sees
// the same issued keys.
SweepResult run_revocation_sweep(const IssuedPopulation& population);

struct KeySizes {
  double road_attrs_mean = 0;
  double time_attrs_mean = 0;
  double road_bytes_mean = 0;  // serialized key component records
  double time_bytes_mean = 0;
  std::uint64_t store_road_bytes = 0;  // what the CSS holds for the population
};
KeySizes measure_key_sizes(const IssuedPopulation& population);

struct LabelSizes {
  std::uint64_t labels = 0;
  std::uint64_t road_total = 0;
  std::uint64_t time_total = 0;
  std::uint64_t all_total = 0;
  std::uint64_t point_rep_total = 0;  // street point-representation sizes
  std::uint64_t mismatched = 0;       // labels where |all| != |road| + |time|

  double mean(std::uint64_t total) const { return labels ? double(total) / double(labels) : 0.0; }
};
// One label per segment of the city, the k-th segment dated day
// 1 + (k mod lifetime) so the time part covers the whole lifetime.
LabelSizes measure_labels(const attrspace::AttributeSpace& space, const CityModel& city);

struct SealBench {
  std::uint32_t devices = 0;
  double seal_ms = 0;  // thread CPU time, best of `repeats`
  std::uint64_t ask_bytes_total = 0;
  double gamma_mean = 0;
};
SealBench bench_seal(const CityModel& city, const ExperimentConfig& config, std::uint32_t devices,
                     int repeats = 3);

// One CSV row. Columns marked timing are excluded from determinism checks.
struct MetricsRow {
  std::uint64_t seed = 0;
  std::string representation;
  std::uint32_t epsilon = 1;
  double route_length = 0;
  std::uint32_t users = 0;
  std::uint32_t subscription_days = 0;
  std::uint32_t lifetime_days = 0;
  double affected_mean_pct = 0;
  double affected_ci95_pct = 0;
  KeySizes keys;
  double gamma_mean = 0;
  double gamma_road_mean = 0;
  double gamma_time_mean = 0;
  double point_rep_mean = 0;
  std::uint32_t devices = 0;
  std::uint64_t ask_bytes_total = 0;
  double seal_ms = 0;     // timing
  double elapsed_ms = 0;  // timing
};

MetricsRow experiment_row(const CityModel& city, const ExperimentConfig& config);
MetricsRow bench_row(const CityModel& city, const ExperimentConfig& config, std::uint32_t devices);

inline constexpr int kMetricsSchemaVersion = 1;
const std::vector<std::string>& metrics_columns();
const std::vector<std::string>& timing_columns();
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);
// Parses a metrics CSV into its header and cells; throws ConfigError unless
// the header matches this build's schema exactly.
std::vector<std::vector<std::string>> read_metrics_csv(std::istream& in);
// The CSV text with the timing columns removed.
std::string strip_timing_columns(const std::string& csv);

// 95% normal-approximation half-width, 1.96 * sd / sqrt(n).
double ci95_half_width(const std::vector<double>& xs);
double mean_of(const std::vector<double>& xs);

}  // namespace abe_cities::citysim
