#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "abe_cities/city.hpp"
#include "abe_cities/kpabe.hpp"
#include "abe_cities/segment_tree.hpp"

// Maps streets, road segments and days onto KP-ABE attributes.
//
// Road attributes are named "s<street>_<node>" (node labels from the street's
// segment tree, or "l<k>" per segment in the basic representation), replicas
// of the pool representation add "@<replica>", and time attributes are
// "x_<node>" over a segment tree of days.
namespace abe_cities::attrspace {

using citysim::CityModel;
using citysim::SegmentRef;
using kpabe::AccessPolicy;
using kpabe::AttributeId;
using kpabe::AttributeSet;
using segtree::Interval;

class AttrSpaceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RepresentationKind { basic, segment_tree, attribute_pool };

struct Representation {
  RepresentationKind kind = RepresentationKind::segment_tree;
  std::uint32_t epsilon = 1;  // replicas per node; pool only

  static Representation basic() { return {RepresentationKind::basic, 1}; }
  static Representation segment_tree() { return {RepresentationKind::segment_tree, 1}; }
  static Representation attribute_pool(std::uint32_t epsilon) {
    return {RepresentationKind::attribute_pool, epsilon};
  }

  // Throws AttrSpaceError when epsilon is inconsistent with the kind.
  void validate() const;
  // "basic", "segtree", "pool"
  std::string name() const;
  static Representation parse(const std::string& name, std::uint32_t epsilon = 1);

  bool operator==(const Representation&) const = default;
};

struct TimeConfig {
  std::uint32_t max_lifetime_days = 365;
};

struct EncryptionLabel {
  AttributeSet road;
  AttributeSet time;

  AttributeSet all() const;
};

struct StreetInterval {
  std::uint32_t street = 0;
  Interval segments;
};

struct PolicySpec {
  std::vector<StreetInterval> intervals;
  Interval validity;  // [join day, expiry day]
};

// One interval per maximal run of consecutive segments per street, streets
// in ascending id order.
std::vector<StreetInterval> intervals_for_path(const std::vector<SegmentRef>& path);

// Usage counters of pool replicas: number of issued, non-revoked keys that
// hold each replica.
class AttributePool {
 public:
  std::int64_t count(AttributeId replica) const;
  void acquire(AttributeId replica) { ++counts_[replica]; }
  // Throws AttrSpaceError when the counter is already zero.
  void release(AttributeId replica);
  const std::map<AttributeId, std::int64_t>& counters() const { return counts_; }

 private:
  std::map<AttributeId, std::int64_t> counts_;
};

// Where an attribute comes from.
struct AttributeOrigin {
  kpabe::Partition partition = kpabe::Partition::road;
  std::uint32_t street = 0;  // road only
  segtree::NodeIndex node = 0;  // index in the street's or the time tree
  std::uint32_t replica = 0;    // 1-based, pool only; 0 otherwise
};

class AttributeSpace {
 public:
  // Throws AttrSpaceError for an empty city, a bad representation or a zero
  // lifetime.
  static AttributeSpace build(const CityModel& city, Representation rep, TimeConfig time);

  const kpabe::Universe& universe() const { return universe_; }
  const Representation& representation() const { return rep_; }
  const TimeConfig& time_config() const { return time_; }
  const segtree::SegmentTree& street_tree(std::uint32_t street) const;
  const segtree::SegmentTree& time_tree() const { return time_tree_; }
  const AttributeOrigin& origin(AttributeId id) const { return origins_.at(id.value); }
  std::uint32_t segments_of(std::uint32_t street) const;

  AttributePool& pool() { return pool_; }
  const AttributePool& pool() const { return pool_; }

  // Replicas (or the single attribute) for a node of a street's tree. In the
  // basic representation `node` is the segment number minus one.
  const std::vector<AttributeId>& road_attributes(std::uint32_t street, segtree::NodeIndex node) const;
  AttributeId time_attribute(segtree::NodeIndex node) const { return time_ids_.at(node); }

  // Throws AttrSpaceError for an unknown segment or a day outside the lifetime.
  EncryptionLabel label_for_device(SegmentRef at, std::uint32_t day) const;

  // AND(road subtree, time subtree). Pool replicas are chosen least-used
  // first, lowest replica on ties, and their counters incremented. Throws
  // AttrSpaceError for empty or invalid specs.
  AccessPolicy policy_for_user(const PolicySpec& spec);
  // Same policy without touching the pool counters (pool picks the replica
  // that policy_for_user would pick now).
  AccessPolicy preview_policy(const PolicySpec& spec) const;
  // Returns the key's pool replicas to the pool.
  void release_policy(const AccessPolicy& policy);

  // Road leaves of a key: the attributes re-keyed when it is revoked.
  AttributeSet revocation_attribute_set(const AccessPolicy& policy) const;
  AttributeSet road_part(const AttributeSet& attrs) const;
  AttributeSet time_part(const AttributeSet& attrs) const;

 private:
  AccessPolicy make_policy(const PolicySpec& spec, AttributePool* counters) const;

  Representation rep_;
  TimeConfig time_;
  kpabe::Universe universe_;
  std::map<std::uint32_t, segtree::SegmentTree> street_trees_;
  // street -> node index -> attribute ids (epsilon replicas)
  std::map<std::uint32_t, std::vector<std::vector<AttributeId>>> road_ids_;
  std::vector<AttributeId> time_ids_;
  std::vector<AttributeOrigin> origins_;
  segtree::SegmentTree time_tree_ = segtree::SegmentTree::build(1);
  AttributePool pool_;
};

// Users other than `revoked` whose road attributes intersect the revoked
// user's. Keys are user ids.
std::vector<std::uint32_t> affected_users(std::uint32_t revoked,
                                          const std::map<std::uint32_t, AttributeSet>& road_attributes);

}  // namespace abe_cities::attrspace
