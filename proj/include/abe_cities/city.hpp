#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "abe_cities/rng.hpp"

namespace abe_cities::citysim {

struct Point {
  double x = 0;
  double y = 0;
};

double distance(Point a, Point b);

// A road segment: 1-based position `segment` along street `street`.
struct SegmentRef {
  std::uint32_t street = 0;
  std::uint32_t segment = 0;

  auto operator<=>(const SegmentRef&) const = default;
};

struct Street {
  std::uint32_t id = 0;
  std::uint32_t segments = 0;  // rho
  std::vector<Point> polyline;

  double length() const;
  // Endpoints of segment k (1-based); segments split the polyline evenly.
  std::pair<Point, Point> segment_geometry(std::uint32_t k) const;
};

struct DevicePlacement {
  std::uint32_t id = 0;
  SegmentRef at;
};

class CityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Planar street network. Streets meet where polyline endpoints coincide.
class CityModel {
 public:
  CityModel() = default;
  // Validates ids, segment counts and geometry; throws CityError.
  CityModel(std::string name, std::vector<Street> streets, std::vector<DevicePlacement> devices = {});

  const std::string& name() const { return name_; }
  const std::vector<Street>& streets() const { return streets_; }
  const Street& street(std::uint32_t id) const;
  bool has_street(std::uint32_t id) const { return index_.contains(id); }
  const std::vector<DevicePlacement>& devices() const { return devices_; }
  void set_devices(std::vector<DevicePlacement> devices);
  std::size_t segment_count() const;

  Point min_corner() const { return min_; }
  Point max_corner() const { return max_; }
  double diameter() const { return distance(min_, max_); }

  Point segment_midpoint(SegmentRef s) const;
  // Segment whose geometry lies closest to p (ties: lowest street id, segment).
  SegmentRef nearest_segment(Point p) const;
  // Shortest path between two segments over the segment adjacency graph,
  // weighted by midpoint distance; both endpoints included. Throws CityError
  // when disconnected.
  std::vector<SegmentRef> shortest_path(SegmentRef from, SegmentRef to) const;

 private:
  void build_graph();
  std::uint32_t node_of(SegmentRef s) const;

  std::string name_;
  std::vector<Street> streets_;
  std::vector<DevicePlacement> devices_;
  std::map<std::uint32_t, std::size_t> index_;
  std::vector<std::uint32_t> first_node_;  // per street index: graph id of segment 1
  std::vector<SegmentRef> nodes_;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adjacency_;
  Point min_{}, max_{};
};

// n x m blocks; every block side is one street split into segments of
// `segment_length`, which must divide `block_length`. Street ids are assigned
// row by row for horizontal streets, then column by column for vertical ones.
CityModel generate_grid_city(std::uint32_t cols, std::uint32_t rows, double block_length,
                             double segment_length, const std::string& name = "grid");

// Places `count` devices on uniformly chosen segments.
std::vector<DevicePlacement> place_devices(const CityModel& city, std::uint32_t count, Rng& rng);

// Text format, one record per line, '#' starts a comment:
//   city <name>
//   street <id> <rho> <x,y> <x,y> [<x,y> ...]
//   device <id> <street-id> <segment>
// Errors name the offending line.
CityModel parse_city(std::istream& in);
CityModel load_city(const std::filesystem::path& file);
void write_city(std::ostream& out, const CityModel& city);

struct RouteSpec {
  Point source;
  Point destination;
  double length = 0;                 // requested line-of-sight distance
  std::vector<SegmentRef> path;      // ordered, connected
};

// Source uniform over the map's bounding box, destination uniform on the
// circle of radius `length` around it clipped to the box, path the shortest
// segment path between the nearest segments. Throws CityError for
// non-positive lengths, lengths beyond the map diameter, or when no
// destination is found after `max_attempts` sources.
RouteSpec sample_route(const CityModel& city, double length, Rng& rng, int max_attempts = 200);

}  // namespace abe_cities::citysim
