#include "abe_cities/experiments.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <istream>
#include <ostream>
#include <sstream>

#include "abe_cities/protocol.hpp"

namespace abe_cities::citysim {

using attrspace::AttributeSpace;
using kpabe::Partition;

CityModel CityConfig::build() const {
  if (file) return load_city(*file);
  if (cols == 0 || rows == 0) throw ConfigError("grid needs at least one block in each direction");
  if (!(segment_length > 0) || !(block_length > 0)) throw ConfigError("grid lengths must be positive");
  const double ratio = block_length / segment_length;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    throw ConfigError("segment length must divide block length");
  return generate_grid_city(cols, rows, block_length, segment_length);
}

void ExperimentConfig::validate() const {
  try {
    representation.validate();
  } catch (const attrspace::AttrSpaceError& e) {
    throw ConfigError(e.what());
  }
  if (!(route_length > 0)) throw ConfigError("route length must be positive");
  if (users == 0) throw ConfigError("user count must be positive");
  if (subscription_days == 0 || lifetime_days == 0) throw ConfigError("day counts must be positive");
  if (subscription_days > lifetime_days) throw ConfigError("subscription longer than the system lifetime");
}

namespace {

// splitmix64 finalizer; decorrelates per-run seeds.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// CPU time of the calling thread; unaffected by other load on the machine.
double thread_cpu_ms() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return ts.tv_sec * 1e3 + ts.tv_nsec / 1e6;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<UserProfile> generate_population(const CityModel& city, const ExperimentConfig& config) {
  config.validate();
  Rng rng = Rng::seeded(mix(config.seed ^ mix(std::bit_cast<std::uint64_t>(config.route_length))));
  const std::uint32_t last_join = config.lifetime_days - config.subscription_days + 1;
  std::vector<UserProfile> out;
  out.reserve(config.users);
  for (std::uint32_t u = 0; u < config.users; ++u) {
    UserProfile p;
    try {
      p.route = sample_route(city, config.route_length, rng);
    } catch (const CityError& e) {
      throw ConfigError(e.what());
    }
    const auto join = 1 + static_cast<std::uint32_t>(rng.below(last_join));
    p.spec.intervals = attrspace::intervals_for_path(p.route.path);
    p.spec.validity = {join, join + config.subscription_days - 1};
    out.push_back(std::move(p));
  }
  return out;
}

IssuedPopulation issue_population(const CityModel& city, const ExperimentConfig& config) {
  auto users = generate_population(city, config);
  IssuedPopulation pop{AttributeSpace::build(city, config.representation, {config.lifetime_days}), std::move(users),
                       {}};
  pop.policies.reserve(pop.users.size());
  for (const auto& u : pop.users) pop.policies.push_back(pop.space.policy_for_user(u.spec));
  return pop;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0;
  double s = 0;
  for (double x : xs) s += x;
  return s / double(xs.size());
}

double ci95_half_width(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0;
  const double m = mean_of(xs);
  double ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  return 1.96 * std::sqrt(ss / double(xs.size() - 1)) / std::sqrt(double(xs.size()));
}

SweepResult run_revocation_sweep(const IssuedPopulation& pop) {
  const auto n = static_cast<std::uint32_t>(pop.policies.size());
  std::vector<kpabe::AttributeSet> mu(n);
  std::map<kpabe::AttributeId, std::vector<std::uint32_t>> holders;
  for (std::uint32_t u = 0; u < n; ++u) {
    mu[u] = pop.space.revocation_attribute_set(pop.policies[u]);
    for (auto a : mu[u]) holders[a].push_back(u);
  }
  SweepResult r;
  r.affected.resize(n);
  std::vector<double> pct;
  std::vector<char> hit(n);
  for (std::uint32_t u = 0; u < n; ++u) {
    std::fill(hit.begin(), hit.end(), 0);
    for (auto a : mu[u])
      for (auto v : holders.at(a)) hit[v] = 1;
    hit[u] = 0;
    for (std::uint32_t v = 0; v < n; ++v)
      if (hit[v]) r.affected[u].push_back(v);
    pct.push_back(n > 1 ? 100.0 * double(r.affected[u].size()) / double(n - 1) : 0.0);
  }
  r.affected_mean_pct = mean_of(pct);
  r.affected_ci95_pct = ci95_half_width(pct);
  return r;
}

KeySizes measure_key_sizes(const IssuedPopulation& pop) {
  KeySizes k;
  const auto& u = pop.space.universe();
  for (const auto& policy : pop.policies) {
    for (auto leaf : policy.leaves()) {
      const auto bytes = kpabe::component_record_size(u.name(leaf));
      if (u.partition(leaf) == Partition::road) {
        k.road_attrs_mean += 1;
        k.road_bytes_mean += double(bytes);
        k.store_road_bytes += bytes;
      } else {
        k.time_attrs_mean += 1;
        k.time_bytes_mean += double(bytes);
      }
    }
  }
  if (const double n = double(pop.policies.size()); n > 0) {
    k.road_attrs_mean /= n;
    k.time_attrs_mean /= n;
    k.road_bytes_mean /= n;
    k.time_bytes_mean /= n;
  }
  return k;
}

LabelSizes measure_labels(const AttributeSpace& space, const CityModel& city) {
  LabelSizes s;
  const std::uint32_t lifetime = space.time_config().max_lifetime_days;
  std::uint64_t k = 0;
  for (const auto& street : city.streets()) {
    const auto& tree = space.street_tree(street.id);
    for (std::uint32_t seg = 1; seg <= street.segments; ++seg, ++k) {
      const auto label = space.label_for_device({street.id, seg}, 1 + static_cast<std::uint32_t>(k % lifetime));
      ++s.labels;
      s.road_total += label.road.size();
      s.time_total += label.time.size();
      s.all_total += label.all().size();
      s.point_rep_total += tree.point_rep(seg).size();
      if (label.all().size() != label.road.size() + label.time.size()) ++s.mismatched;
    }
  }
  return s;
}

SealBench bench_seal(const CityModel& city, const ExperimentConfig& config, std::uint32_t devices, int repeats) {
  config.validate();
  Rng rng = Rng::seeded(mix(config.seed ^ 0x5ea1ULL));
  auto placements = devices > 0 ? place_devices(city, devices, rng) : std::vector<DevicePlacement>{};
  std::vector<protocol::DeviceInfo> infos;
  for (const auto& p : placements) infos.push_back({p.id, p.at});
  protocol::Ttp ttp(AttributeSpace::build(city, config.representation, {config.lifetime_days}), infos, rng.fork());

  SealBench b;
  b.devices = devices;
  std::uint64_t gamma = 0;
  for (const auto& p : placements) gamma += ttp.space().label_for_device(p.at, 1).all().size();
  b.gamma_mean = devices ? double(gamma) / devices : 0.0;

  b.seal_ms = -1;
  for (int r = 0; r < std::max(1, repeats); ++r) {
    ttp.set_day(1 + static_cast<std::uint32_t>(r));
    const double t0 = thread_cpu_ms();
    const auto messages = ttp.seal();
    const double ms = thread_cpu_ms() - t0;
    if (b.seal_ms < 0 || ms < b.seal_ms) b.seal_ms = ms;
    if (r == 0) {
      for (const auto& m : messages) {
        const auto msg = protocol::SignedMessage::decode(m);
        ByteReader rd(msg.payload);
        rd.u32();
        rd.u32();
        rd.u32();
        b.ask_bytes_total += rd.blob().size();
      }
    }
  }
  return b;
}

namespace {

MetricsRow base_row(const ExperimentConfig& c) {
  MetricsRow row;
  row.seed = c.seed;
  row.representation = c.representation.name();
  row.epsilon = c.representation.epsilon;
  row.route_length = c.route_length;
  row.subscription_days = c.subscription_days;
  row.lifetime_days = c.lifetime_days;
  return row;
}

}  // namespace

MetricsRow experiment_row(const CityModel& city, const ExperimentConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  MetricsRow row = base_row(config);
  const auto pop = issue_population(city, config);
  row.users = config.users;
  const auto sweep = run_revocation_sweep(pop);
  row.affected_mean_pct = sweep.affected_mean_pct;
  row.affected_ci95_pct = sweep.affected_ci95_pct;
  row.keys = measure_key_sizes(pop);
  const auto labels = measure_labels(pop.space, city);
  if (labels.mismatched) throw std::logic_error("label parts overlap");
  row.gamma_mean = labels.mean(labels.all_total);
  row.gamma_road_mean = labels.mean(labels.road_total);
  row.gamma_time_mean = labels.mean(labels.time_total);
  row.point_rep_mean = labels.mean(labels.point_rep_total);
  row.elapsed_ms = ms_since(t0);
  return row;
}

MetricsRow bench_row(const CityModel& city, const ExperimentConfig& config, std::uint32_t devices) {
  const auto t0 = std::chrono::steady_clock::now();
  MetricsRow row = base_row(config);
  const auto b = bench_seal(city, config, devices);
  row.devices = devices;
  row.gamma_mean = b.gamma_mean;
  row.ask_bytes_total = b.ask_bytes_total;
  row.seal_ms = b.seal_ms;
  row.elapsed_ms = ms_since(t0);
  return row;
}

// ---------------------------------------------------------------------------
// CSV

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols{
      "schema_version",      "seed",              "representation",      "epsilon",
      "route_length_m",      "users",             "subscription_days",   "lifetime_days",
      "affected_mean_pct",   "affected_ci95_pct", "key_road_attrs_mean", "key_time_attrs_mean",
      "key_road_bytes_mean", "key_time_bytes_mean", "store_road_bytes",  "gamma_mean",
      "gamma_road_mean",     "gamma_time_mean",   "point_rep_mean",      "devices",
      "ask_bytes_total",     "seal_ms",           "elapsed_ms"};
  return cols;
}

const std::vector<std::string>& timing_columns() {
  static const std::vector<std::string> cols{"seal_ms", "elapsed_ms"};
  return cols;
}

void write_metrics_header(std::ostream& out) {
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_metrics_row(std::ostream& out, const MetricsRow& r) {
  const std::vector<std::string> cells{std::to_string(kMetricsSchemaVersion),
                                       std::to_string(r.seed),
                                       r.representation,
                                       std::to_string(r.epsilon),
                                       fixed(r.route_length, 1),
                                       std::to_string(r.users),
                                       std::to_string(r.subscription_days),
                                       std::to_string(r.lifetime_days),
                                       fixed(r.affected_mean_pct),
                                       fixed(r.affected_ci95_pct),
                                       fixed(r.keys.road_attrs_mean),
                                       fixed(r.keys.time_attrs_mean),
                                       fixed(r.keys.road_bytes_mean),
                                       fixed(r.keys.time_bytes_mean),
                                       std::to_string(r.keys.store_road_bytes),
                                       fixed(r.gamma_mean),
                                       fixed(r.gamma_road_mean),
                                       fixed(r.gamma_time_mean),
                                       fixed(r.point_rep_mean),
                                       std::to_string(r.devices),
                                       std::to_string(r.ask_bytes_total),
                                       fixed(r.seal_ms, 3),
                                       fixed(r.elapsed_ms, 3)};
  for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
  out << '\n';
}

std::vector<std::vector<std::string>> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("metrics CSV is empty");
  const auto header = split(line);
  if (header != metrics_columns())
    throw ConfigError("metrics CSV header does not match schema version " + std::to_string(kMetricsSchemaVersion));
  std::vector<std::vector<std::string>> rows{header};
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != header.size()) throw ConfigError("metrics CSV line " + std::to_string(n) + ": wrong cell count");
    if (cells[0] != std::to_string(kMetricsSchemaVersion))
      throw ConfigError("metrics CSV line " + std::to_string(n) + ": schema version " + cells[0]);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string strip_timing_columns(const std::string& csv) {
  std::istringstream in(csv);
  const auto rows = read_metrics_csv(in);
  std::vector<bool> keep;
  for (const auto& c : rows[0])
    keep.push_back(std::find(timing_columns().begin(), timing_columns().end(), c) == timing_columns().end());
  std::string out;
  for (const auto& row : rows) {
    bool first = true;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!keep[i]) continue;
      if (!first) out += ',';
      out += row[i];
      first = false;
    }
    out += '\n';
  }
  return out;
}

}  // namespace abe_cities::citysim
