#include "abe_cities/city.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>

namespace abe_cities::citysim {

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double Street::length() const {
  double total = 0;
  for (std::size_t i = 1; i < polyline.size(); ++i) total += distance(polyline[i - 1], polyline[i]);
  return total;
}

namespace {

Point point_at(const std::vector<Point>& line, double offset) {
  for (std::size_t i = 1; i < line.size(); ++i) {
    const double d = distance(line[i - 1], line[i]);
    if (offset <= d || i + 1 == line.size()) {
      const double t = d > 0 ? std::clamp(offset / d, 0.0, 1.0) : 0.0;
      return {line[i - 1].x + t * (line[i].x - line[i - 1].x),
              line[i - 1].y + t * (line[i].y - line[i - 1].y)};
    }
    offset -= d;
  }
  return line.back();
}

double point_segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, {a.x + t * dx, a.y + t * dy});
}

bool same_point(Point a, Point b) { return distance(a, b) < 1e-6; }

}  // namespace

std::pair<Point, Point> Street::segment_geometry(std::uint32_t k) const {
  if (k < 1 || k > segments) throw CityError("segment " + std::to_string(k) + " outside street " + std::to_string(id));
  const double step = length() / segments;
  return {point_at(polyline, step * (k - 1)), point_at(polyline, step * k)};
}

CityModel::CityModel(std::string name, std::vector<Street> streets,
                     std::vector<DevicePlacement> devices)
    : name_(std::move(name)), streets_(std::move(streets)) {
  if (streets_.empty()) throw CityError("city has no streets");
  min_ = {std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
  max_ = {std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
  for (std::size_t i = 0; i < streets_.size(); ++i) {
    const Street& s = streets_[i];
    if (!index_.emplace(s.id, i).second) throw CityError("duplicate street id " + std::to_string(s.id));
    if (s.segments == 0) throw CityError("street " + std::to_string(s.id) + " has no segments");
    if (s.polyline.size() < 2) throw CityError("street " + std::to_string(s.id) + " needs two points");
    if (!(s.length() > 0)) throw CityError("street " + std::to_string(s.id) + " has zero length");
    for (const Point& p : s.polyline) {
      min_ = {std::min(min_.x, p.x), std::min(min_.y, p.y)};
      max_ = {std::max(max_.x, p.x), std::max(max_.y, p.y)};
    }
  }
  build_graph();
  set_devices(std::move(devices));
}

const Street& CityModel::street(std::uint32_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw CityError("unknown street " + std::to_string(id));
  return streets_[it->second];
}

void CityModel::set_devices(std::vector<DevicePlacement> devices) {
  std::map<std::uint32_t, bool> seen;
  for (const auto& d : devices) {
    if (!seen.emplace(d.id, true).second) throw CityError("duplicate device id " + std::to_string(d.id));
    const Street& s = street(d.at.street);
    if (d.at.segment < 1 || d.at.segment > s.segments)
      throw CityError("device " + std::to_string(d.id) + " placed outside street " + std::to_string(s.id));
  }
  devices_ = std::move(devices);
}

std::size_t CityModel::segment_count() const {
  std::size_t n = 0;
  for (const auto& s : streets_) n += s.segments;
  return n;
}

std::uint32_t CityModel::node_of(SegmentRef s) const {
  const Street& st = street(s.street);
  if (s.segment < 1 || s.segment > st.segments) throw CityError("segment outside street");
  return first_node_[index_.at(s.street)] + s.segment - 1;
}

void CityModel::build_graph() {
  first_node_.clear();
  nodes_.clear();
  for (const Street& s : streets_) {
    first_node_.push_back(static_cast<std::uint32_t>(nodes_.size()));
    for (std::uint32_t k = 1; k <= s.segments; ++k) nodes_.push_back({s.id, k});
  }
  adjacency_.assign(nodes_.size(), {});
  auto link = [&](std::uint32_t a, std::uint32_t b) {
    const double w = distance(segment_midpoint(nodes_[a]), segment_midpoint(nodes_[b]));
    adjacency_[a].push_back({b, w});
    adjacency_[b].push_back({a, w});
  };
  for (std::size_t i = 0; i < streets_.size(); ++i)
    for (std::uint32_t k = 1; k < streets_[i].segments; ++k)
      link(first_node_[i] + k - 1, first_node_[i] + k);

  // Street ends meeting at a common point are joined.
  struct End {
    Point p;
    std::uint32_t node;
  };
  std::vector<End> ends;
  for (std::size_t i = 0; i < streets_.size(); ++i) {
    const Street& s = streets_[i];
    ends.push_back({s.polyline.front(), first_node_[i]});
    ends.push_back({s.polyline.back(), first_node_[i] + s.segments - 1});
  }
  for (std::size_t a = 0; a < ends.size(); ++a)
    for (std::size_t b = a + 1; b < ends.size(); ++b)
      if (ends[a].node != ends[b].node && same_point(ends[a].p, ends[b].p)) link(ends[a].node, ends[b].node);
}

Point CityModel::segment_midpoint(SegmentRef s) const {
  auto [a, b] = street(s.street).segment_geometry(s.segment);
  return {(a.x + b.x) / 2, (a.y + b.y) / 2};
}

SegmentRef CityModel::nearest_segment(Point p) const {
  SegmentRef best{};
  double best_d = std::numeric_limits<double>::max();
  for (const Street& s : streets_) {
    for (std::uint32_t k = 1; k <= s.segments; ++k) {
      auto [a, b] = s.segment_geometry(k);
      const double d = point_segment_distance(p, a, b);
      if (d < best_d - 1e-9) {
        best_d = d;
        best = {s.id, k};
      }
    }
  }
  return best;
}

std::vector<SegmentRef> CityModel::shortest_path(SegmentRef from, SegmentRef to) const {
  const std::uint32_t src = node_of(from), dst = node_of(to);
  std::vector<double> dist(nodes_.size(), std::numeric_limits<double>::infinity());
  std::vector<std::uint32_t> prev(nodes_.size(), std::numeric_limits<std::uint32_t>::max());
  using Entry = std::pair<double, std::uint32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  dist[src] = 0;
  queue.push({0, src});
  while (!queue.empty()) {
    auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    if (u == dst) break;
    for (auto [v, w] : adjacency_[u]) {
      // Strict improvement keeps tie-breaking deterministic.
      if (d + w < dist[v] - 1e-9) {
        dist[v] = d + w;
        prev[v] = u;
        queue.push({dist[v], v});
      }
    }
  }
  if (!std::isfinite(dist[dst])) throw CityError("no path between the requested segments");
  std::vector<SegmentRef> path;
  for (std::uint32_t n = dst; n != src; n = prev[n]) path.push_back(nodes_[n]);
  path.push_back(nodes_[src]);
  std::reverse(path.begin(), path.end());
  return path;
}

CityModel generate_grid_city(std::uint32_t cols, std::uint32_t rows, double block_length,
                             double segment_length, const std::string& name) {
  if (cols == 0 || rows == 0) throw CityError("grid needs at least one block");
  if (!(block_length > 0) || !(segment_length > 0)) throw CityError("lengths must be positive");
  const double ratio = block_length / segment_length;
  const auto rho = static_cast<std::uint32_t>(std::llround(ratio));
  if (rho == 0 || std::abs(ratio - rho) > 1e-9) throw CityError("segment length must divide block length");

  std::vector<Street> streets;
  std::uint32_t id = 1;
  for (std::uint32_t j = 0; j <= rows; ++j)
    for (std::uint32_t i = 0; i < cols; ++i)
      streets.push_back({id++, rho, {{i * block_length, j * block_length}, {(i + 1) * block_length, j * block_length}}});
  for (std::uint32_t i = 0; i <= cols; ++i)
    for (std::uint32_t j = 0; j < rows; ++j)
      streets.push_back({id++, rho, {{i * block_length, j * block_length}, {i * block_length, (j + 1) * block_length}}});
  return CityModel(name, std::move(streets));
}

std::vector<DevicePlacement> place_devices(const CityModel& city, std::uint32_t count, Rng& rng) {
  std::vector<SegmentRef> all;
  for (const auto& s : city.streets())
    for (std::uint32_t k = 1; k <= s.segments; ++k) all.push_back({s.id, k});
  std::vector<DevicePlacement> out;
  for (std::uint32_t d = 1; d <= count; ++d) out.push_back({d, all[rng.below(all.size())]});
  return out;
}

namespace {

[[noreturn]] void line_error(std::size_t line, const std::string& what) {
  throw CityError("line " + std::to_string(line) + ": " + what);
}

Point parse_point(const std::string& token, std::size_t line) {
  const auto comma = token.find(',');
  if (comma == std::string::npos) line_error(line, "expected x,y coordinate, got '" + token + "'");
  try {
    std::size_t used = 0;
    const double x = std::stod(token.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument("x");
    const std::string ys = token.substr(comma + 1);
    const double y = std::stod(ys, &used);
    if (used != ys.size()) throw std::invalid_argument("y");
    return {x, y};
  } catch (const std::exception&) {
    line_error(line, "bad coordinate '" + token + "'");
  }
}

std::uint32_t parse_uint(const std::string& token, std::size_t line, const char* what) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(token, &used);
    if (used != token.size() || token.front() == '-' || v > std::numeric_limits<std::uint32_t>::max())
      throw std::invalid_argument(what);
    return static_cast<std::uint32_t>(v);
  } catch (const std::exception&) {
    line_error(line, std::string("bad ") + what + " '" + token + "'");
  }
}

}  // namespace

CityModel parse_city(std::istream& in) {
  std::string name;
  std::vector<Street> streets;
  std::vector<DevicePlacement> devices;
  std::map<std::uint32_t, std::size_t> street_lines;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0] == "city") {
      if (!name.empty()) line_error(line, "duplicate city header");
      if (tok.size() != 2) line_error(line, "expected 'city <name>'");
      if (!streets.empty()) line_error(line, "city header must come first");
      name = tok[1];
    } else if (tok[0] == "street") {
      if (name.empty()) line_error(line, "street before city header");
      if (tok.size() < 5) line_error(line, "expected 'street <id> <rho> <x,y> <x,y> ...'");
      Street s;
      s.id = parse_uint(tok[1], line, "street id");
      s.segments = parse_uint(tok[2], line, "segment count");
      if (s.segments == 0) line_error(line, "street " + tok[1] + " has zero segments");
      if (!street_lines.emplace(s.id, line).second)
        line_error(line, "duplicate street id " + tok[1] + " (first defined on line " +
                             std::to_string(street_lines[s.id]) + ")");
      for (std::size_t i = 3; i < tok.size(); ++i) s.polyline.push_back(parse_point(tok[i], line));
      if (!(s.length() > 0)) line_error(line, "street " + tok[1] + " has zero length");
      streets.push_back(std::move(s));
    } else if (tok[0] == "device") {
      if (tok.size() != 4) line_error(line, "expected 'device <id> <street-id> <segment>'");
      devices.push_back({parse_uint(tok[1], line, "device id"),
                         {parse_uint(tok[2], line, "street id"), parse_uint(tok[3], line, "segment")}});
    } else {
      line_error(line, "unknown record '" + tok[0] + "'");
    }
  }
  if (name.empty()) throw CityError("missing 'city <name>' header");
  try {
    return CityModel(name, std::move(streets), std::move(devices));
  } catch (const CityError& e) {
    throw CityError(std::string("invalid city: ") + e.what());
  }
}

CityModel load_city(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw CityError("cannot open " + file.string());
  return parse_city(in);
}

void write_city(std::ostream& out, const CityModel& city) {
  out << "city " << city.name() << '\n';
  out << std::setprecision(17);
  for (const auto& s : city.streets()) {
    out << "street " << s.id << ' ' << s.segments;
    for (const auto& p : s.polyline) out << ' ' << p.x << ',' << p.y;
    out << '\n';
  }
  for (const auto& d : city.devices()) out << "device " << d.id << ' ' << d.at.street << ' ' << d.at.segment << '\n';
}

RouteSpec sample_route(const CityModel& city, double length, Rng& rng, int max_attempts) {
  if (!(length > 0)) throw CityError("route length must be positive");
  const Point lo = city.min_corner(), hi = city.max_corner();
  if (length > city.diameter()) throw CityError("route length exceeds the map diameter");
  auto inside = [&](Point p) { return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y; };

  constexpr int kAnglesPerSource = 64;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const Point src{lo.x + rng.unit() * (hi.x - lo.x), lo.y + rng.unit() * (hi.y - lo.y)};
    for (int k = 0; k < kAnglesPerSource; ++k) {
      const double theta = rng.unit() * 2 * std::numbers::pi;
      const Point dst{src.x + length * std::cos(theta), src.y + length * std::sin(theta)};
      if (!inside(dst)) continue;
      RouteSpec route;
      route.source = src;
      route.destination = dst;
      route.length = length;
      route.path = city.shortest_path(city.nearest_segment(src), city.nearest_segment(dst));
      return route;
    }
  }
  throw CityError("no destination at distance " + std::to_string(length) + " found");
}

}  // namespace abe_cities::citysim
