#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "abe_cities/adversary.hpp"
#include "abe_cities/experiments.hpp"
#include "abe_cities/protocol.hpp"
#include "json.hpp"

namespace abe_cities::cli {

using attrspace::Representation;
using citysim::ConfigError;
using nlohmann::json;

namespace {

int g_verbosity = 0;

void log(const std::string& msg, int level = 0) {
  if (g_verbosity >= level) std::cerr << msg << '\n';
}

// Settings shared by all commands; JSON config first, then flags.
struct RunConfig {
  std::uint64_t seed = 7;
  citysim::CityConfig city;
  bool city_set = false;
  std::vector<Representation> representations{Representation::basic(), Representation::segment_tree(),
                                              Representation::attribute_pool(3), Representation::attribute_pool(5)};
  std::vector<double> route_lengths{400, 800, 1600};
  std::uint32_t users = 100;
  std::uint32_t subscription_days = 365;
  std::uint32_t lifetime_days = 1826;
  bool lifetime_set = false;
  std::vector<std::uint32_t> device_counts{10, 50, 100};
};

Representation representation_from(const json& j) {
  if (j.is_string()) return Representation::parse(j.get<std::string>());
  for (const auto& [k, v] : j.items())
    if (k != "rep" && k != "epsilon") throw ConfigError("unknown representation key '" + k + "'");
  return Representation::parse(j.at("rep").get<std::string>(), j.value("epsilon", 1u));
}

void load_json(const std::string& path, RunConfig& c) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  static const std::set<std::string> known{"seed",  "city",           "representations",  "route_lengths",
                                           "users", "subscription_days", "lifetime_days", "device_counts"};
  try {
    for (const auto& [k, v] : j.items())
      if (!known.contains(k)) throw ConfigError(path + ": unknown key '" + k + "'");
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("city")) {
      const auto& cj = j["city"];
      for (const auto& [k, v] : cj.items())
        if (k != "file" && k != "cols" && k != "rows" && k != "block_length" && k != "segment_length")
          throw ConfigError(path + ": unknown city key '" + k + "'");
      if (cj.contains("file")) {
        std::filesystem::path f = cj["file"].get<std::string>();
        if (f.is_relative()) f = std::filesystem::path(path).parent_path() / f;
        c.city.file = f;
      }
      c.city.cols = cj.value("cols", c.city.cols);
      c.city.rows = cj.value("rows", c.city.rows);
      c.city.block_length = cj.value("block_length", c.city.block_length);
      c.city.segment_length = cj.value("segment_length", c.city.segment_length);
      c.city_set = true;
    }
    if (j.contains("representations")) {
      c.representations.clear();
      for (const auto& r : j["representations"]) c.representations.push_back(representation_from(r));
    }
    if (j.contains("route_lengths")) c.route_lengths = j["route_lengths"].get<std::vector<double>>();
    if (j.contains("users")) c.users = j["users"].get<std::uint32_t>();
    if (j.contains("subscription_days")) c.subscription_days = j["subscription_days"].get<std::uint32_t>();
    if (j.contains("lifetime_days")) {
      c.lifetime_days = j["lifetime_days"].get<std::uint32_t>();
      c.lifetime_set = true;
    }
    if (j.contains("device_counts")) c.device_counts = j["device_counts"].get<std::vector<std::uint32_t>>();
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const attrspace::AttrSpaceError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

RunConfig resolve(const CliOptions& o) {
  RunConfig c;
  if (o.config) load_json(*o.config, c);
  if (o.seed) c.seed = *o.seed;
  if (o.epsilon && !o.rep) throw ConfigError("--epsilon needs --rep pool");
  if (o.rep) {
    try {
      c.representations = {Representation::parse(*o.rep, o.epsilon.value_or(1))};
      c.representations.front().validate();
    } catch (const attrspace::AttrSpaceError& e) {
      throw ConfigError(e.what());
    }
  }
  if (o.route_length) c.route_lengths = {*o.route_length};
  if (o.users) c.users = *o.users;
  if (o.devices) c.device_counts = {*o.devices};
  if (c.representations.empty()) throw ConfigError("no representations configured");
  if (c.route_lengths.empty()) throw ConfigError("no route lengths configured");
  return c;
}

void open_out(const std::string& path, std::ofstream& f) {
  f.open(path, std::ios::trunc);
  if (!f) throw ConfigError("cannot write " + path);
}

citysim::ExperimentConfig experiment_config(const RunConfig& c, const Representation& rep, double length) {
  citysim::ExperimentConfig e;
  e.representation = rep;
  e.route_length = length;
  e.users = c.users;
  e.subscription_days = c.subscription_days;
  e.lifetime_days = c.lifetime_days;
  e.seed = c.seed;
  e.validate();
  return e;
}

struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw InvariantViolation(what);
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_demo(const CliOptions& o) {
  RunConfig c = resolve(o);
  const Representation rep = o.rep || o.config ? c.representations.front() : Representation::segment_tree();
  citysim::CityModel city;
  if (c.city_set) {
    city = c.city.build();
  } else {
    city = citysim::generate_grid_city(1, 1, 40, 10, "toy");
    city.set_devices({{1, {1, 2}}, {2, {2, 3}}, {3, {3, 1}}});
  }
  if (city.devices().empty() || o.devices) {
    Rng rng = Rng::seeded(c.seed);
    city.set_devices(citysim::place_devices(city, o.devices.value_or(3), rng));
  }
  const std::uint32_t lifetime = c.lifetime_set ? c.lifetime_days : 30;

  auto& out = std::cout;
  out << "seed " << c.seed << "  representation " << rep.name();
  if (rep.kind == attrspace::RepresentationKind::attribute_pool) out << " epsilon " << rep.epsilon;
  out << "  city " << city.name() << " (" << city.streets().size() << " streets, " << city.devices().size()
      << " devices)\n";

  protocol::System sys({city, rep, {lifetime}, c.seed});
  if (o.fail_inject) {
    if (*o.fail_inject != "tamper-boot") throw ConfigError("unknown --fail-inject mode '" + *o.fail_inject + "'");
    sys.fabric().set_interceptor([](protocol::Envelope& e) {
      if (e.kind == "boot") e.body.back() ^= 0x01;
    });
  }
  auto step = [&out](const std::string& s) { out << "  " << s << '\n'; };

  int status = kOk;
  try {
    const auto& u = sys.ttp().universe();
    step("[setup] " + std::to_string(u.size()) + " attributes, " + std::to_string(sys.css().store().histories().size()) +
         " empty re-encryption key histories at the CSS");

    const auto& d1 = city.devices().front();
    std::uint32_t other_street = d1.at.street;
    for (const auto& s : city.streets())
      if (s.id != d1.at.street) {
        other_street = s.id;
        break;
      }
    const auto full = [&](std::uint32_t street) {
      return attrspace::PolicySpec{{{street, {1, city.street(street).segments}}}, {1, lifetime}};
    };
    const auto alice = sys.add_user(), bob = sys.add_user(), carol = sys.add_user();
    sys.distribute_key(alice, full(d1.at.street));
    sys.distribute_key(bob, full(d1.at.street));
    sys.distribute_key(carol, full(other_street));
    step("[distribute] users " + std::to_string(alice) + "," + std::to_string(bob) + " on street " +
         std::to_string(d1.at.street) + "; user " + std::to_string(carol) + " on street " +
         std::to_string(other_street));

    sys.seal_day();
    step("[seal] day " + std::to_string(sys.day()) + ": " + std::to_string(sys.css().store().all_sealed().size()) +
         " sealed keys, devices booted");

    const auto reading = [](int k) {
      const std::string s = "reading-" + std::to_string(k);
      return Bytes(s.begin(), s.end());
    };
    std::vector<std::uint32_t> before;
    for (int k = 0; k < 3; ++k) before.push_back(sys.produce_data(d1.id, reading(k)).index);
    step("[produce] device " + std::to_string(d1.id) + " stored items with counters 0,1,2");

    auto show = [&](std::uint32_t user, std::uint32_t item) {
      const auto r = sys.consume_data(user, d1.id, sys.day(), item);
      step("[consume] user " + std::to_string(user) + " item " + std::to_string(item) + " -> " +
           (r.status == protocol::ConsumeStatus::ok ? "\"" + std::string(r.plaintext.begin(), r.plaintext.end()) + "\""
            : r.bottom()                            ? std::string("⊥ (") + protocol::to_string(r.status) + ")"
                                                    : std::string(protocol::to_string(r.status))));
      return r;
    };
    for (auto i : before) require(show(alice, i).plaintext == reading(static_cast<int>(i)), "alice lost data");
    if (other_street != d1.at.street) require(show(carol, before[0]).bottom(), "unauthorized user decrypted");

    const auto mu = sys.ttp().space().revocation_attribute_set(*sys.ttp().issued_policy(alice)).size();
    sys.revoke_key(alice);
    step("[revoke] user " + std::to_string(alice) + ": " + std::to_string(mu) +
         " attributes updated, fresh seal appended");
    const auto after = sys.produce_data(d1.id, reading(3)).index;

    require(show(alice, before[0]).bottom(), "revoked user decrypted an old item");
    require(show(alice, after).bottom(), "revoked user decrypted a new item");
    require(show(bob, before[1]).plaintext == reading(1), "bob lost an old item");
    require(show(bob, after).plaintext == reading(3), "bob lost a new item");
    step("[lazy] " + std::to_string(sys.css().lazy_key_updates()) + " key and " +
         std::to_string(sys.css().lazy_ciphertext_updates()) + " ciphertext components refreshed by the CSS");

    sys.css().store().check_invariants();
    const auto eve = adversary::eavesdrop(sys.fabric().transcript(), u);
    step("[eavesdrop] " + std::to_string(eve.candidate_keys) + " forged data keys over " +
         std::to_string(eve.encrypted_items) + " items: " + std::to_string(eve.opened) + " opened");
    require(eve.opened == 0, "eavesdropper opened data");
    out << "demo complete\n";
  } catch (const protocol::BootRejected& e) {
    out << "  [seal] boot material rejected: " << e.what() << '\n';
    log(std::string("MAC failure: ") + e.what());
    status = kInvariantViolation;
  } catch (const InvariantViolation& e) {
    log(std::string("invariant violation: ") + e.what());
    status = kInvariantViolation;
  } catch (const protocol::CssInvariantError& e) {
    log(std::string("invariant violation: ") + e.what());
    status = kInvariantViolation;
  }
  if (o.out) {
    std::ofstream f;
    open_out(*o.out, f);
    sys.write_trace(f);
    log("trace written to " + *o.out, 1);
  }
  return status;
}

int cmd_experiment(const CliOptions& o) {
  const RunConfig c = resolve(o);
  const auto city = c.city.build();
  log("experiment seed=" + std::to_string(c.seed) + " city=" + city.name() + " streets=" +
      std::to_string(city.streets().size()));
  std::vector<citysim::MetricsRow> rows;
  for (double length : c.route_lengths) {
    for (const auto& rep : c.representations) {
      rows.push_back(citysim::experiment_row(city, experiment_config(c, rep, length)));
      const auto& row = rows.back();
      std::ostringstream msg;
      msg << "  " << rep.name() << (rep.kind == attrspace::RepresentationKind::attribute_pool
                                        ? "(" + std::to_string(rep.epsilon) + ")"
                                        : "")
          << " L=" << length << ": affected " << row.affected_mean_pct << "% ± " << row.affected_ci95_pct
          << ", road attrs " << row.keys.road_attrs_mean;
      log(msg.str());
    }
  }
  const std::string path = o.out.value_or("experiment.csv");
  std::ofstream f;
  open_out(path, f);
  citysim::write_metrics_header(f);
  for (const auto& row : rows) citysim::write_metrics_row(f, row);
  log("wrote " + path);
  return kOk;
}

int cmd_bench(const CliOptions& o) {
  const RunConfig c = resolve(o);
  const auto city = c.city.build();
  log("bench seed=" + std::to_string(c.seed) + " city=" + city.name());
  std::vector<citysim::MetricsRow> rows;
  for (const auto& rep : c.representations) {
    for (auto devices : c.device_counts) {
      rows.push_back(citysim::bench_row(city, experiment_config(c, rep, c.route_lengths.front()), devices));
      const auto& row = rows.back();
      std::ostringstream msg;
      msg << "  " << rep.name() << " devices=" << devices << ": seal " << row.seal_ms << " ms, ASK bytes "
          << row.ask_bytes_total << ", mean |gamma| " << row.gamma_mean;
      log(msg.str());
    }
  }
  const std::string path = o.out.value_or("bench.csv");
  std::ofstream f;
  open_out(path, f);
  citysim::write_metrics_header(f);
  for (const auto& row : rows) citysim::write_metrics_row(f, row);
  log("wrote " + path);
  return kOk;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"ABE-Cities: attribute-based encryption for urban sensing"};
  app.require_subcommand(1);
  CliOptions o;
  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Randomness seed");
    sub->add_option("--out", o.out, "Output file");
    sub->add_option("--rep", o.rep, "Representation")->check(CLI::IsMember({"basic", "segtree", "pool"}));
    sub->add_option("--epsilon", o.epsilon, "Pool replicas per node")->check(CLI::PositiveNumber);
    sub->add_option("--route-length", o.route_length, "Route length in meters")->check(CLI::PositiveNumber);
    sub->add_option("--users", o.users, "Number of users")->check(CLI::PositiveNumber);
    sub->add_option("--devices", o.devices, "Number of devices");
    sub->add_flag("-v,--verbose", o.verbosity, "More log output on stderr");
  };
  auto* demo = app.add_subcommand("demo", "Run every system procedure on a toy city");
  add_common(demo);
  demo->add_option("--fail-inject", o.fail_inject, "Inject a fault")->check(CLI::IsMember({"tamper-boot"}));
  auto* experiment = app.add_subcommand("experiment", "Revocation and key-size sweep to CSV");
  add_common(experiment);
  auto* bench = app.add_subcommand("bench", "Seal-time benchmark to CSV");
  add_common(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }
  g_verbosity = o.verbosity;
  try {
    if (*demo) return cmd_demo(o);
    if (*experiment) return cmd_experiment(o);
    return cmd_bench(o);
  } catch (const ConfigError& e) {
    log(std::string("config error: ") + e.what());
    return kConfigError;
  } catch (const citysim::CityError& e) {
    log(std::string("config error: ") + e.what());
    return kConfigError;
  } catch (const attrspace::AttrSpaceError& e) {
    log(std::string("config error: ") + e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return kInvariantViolation;
  }
}

}  // namespace abe_cities::cli
