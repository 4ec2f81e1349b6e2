#include "abe_cities/attrspace.hpp"

#include <algorithm>
#include <set>

namespace abe_cities::attrspace {

using kpabe::Partition;
using kpabe::PolicyNode;

void Representation::validate() const {
  if (epsilon < 1) throw AttrSpaceError("epsilon must be at least 1");
  if (kind != RepresentationKind::attribute_pool && epsilon != 1)
    throw AttrSpaceError("epsilon applies to the attribute pool only");
}

std::string Representation::name() const {
  switch (kind) {
    case RepresentationKind::basic: return "basic";
    case RepresentationKind::segment_tree: return "segtree";
    case RepresentationKind::attribute_pool: return "pool";
  }
  return "?";
}

Representation Representation::parse(const std::string& name, std::uint32_t epsilon) {
  Representation r;
  if (name == "basic") r = basic();
  else if (name == "segtree" || name == "segment_tree") r = segment_tree();
  else if (name == "pool" || name == "attribute_pool") r = attribute_pool(epsilon);
  else throw AttrSpaceError("unknown representation '" + name + "'");
  r.validate();
  return r;
}

AttributeSet EncryptionLabel::all() const {
  AttributeSet out = road;
  out.insert(time.begin(), time.end());
  return out;
}

std::vector<StreetInterval> intervals_for_path(const std::vector<SegmentRef>& path) {
  std::map<std::uint32_t, std::set<std::uint32_t>> by_street;
  for (const auto& s : path) by_street[s.street].insert(s.segment);
  std::vector<StreetInterval> out;
  for (const auto& [street, segs] : by_street) {
    auto it = segs.begin();
    while (it != segs.end()) {
      std::uint32_t lo = *it, hi = *it;
      for (++it; it != segs.end() && *it == hi + 1; ++it) hi = *it;
      out.push_back({street, {lo, hi}});
    }
  }
  return out;
}

std::int64_t AttributePool::count(AttributeId replica) const {
  auto it = counts_.find(replica);
  return it == counts_.end() ? 0 : it->second;
}

void AttributePool::release(AttributeId replica) {
  auto it = counts_.find(replica);
  if (it == counts_.end() || it->second == 0) throw AttrSpaceError("pool counter underflow");
  --it->second;
}

AttributeSpace AttributeSpace::build(const CityModel& city, Representation rep, TimeConfig time) {
  rep.validate();
  if (city.streets().empty()) throw AttrSpaceError("city has no streets");
  if (time.max_lifetime_days < 1) throw AttrSpaceError("lifetime must be at least one day");

  AttributeSpace space;
  space.rep_ = rep;
  space.time_ = time;
  auto add = [&](std::string name, AttributeOrigin origin) {
    const AttributeId id = space.universe_.add(std::move(name), origin.partition);
    space.origins_.push_back(origin);
    return id;
  };

  std::vector<std::uint32_t> ids;
  for (const auto& s : city.streets()) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  for (std::uint32_t street : ids) {
    const std::uint32_t rho = city.street(street).segments;
    auto tree = segtree::SegmentTree::build(rho);
    const std::string prefix = "s" + std::to_string(street) + "_";
    auto& table = space.road_ids_[street];
    if (rep.kind == RepresentationKind::basic) {
      for (std::uint32_t k = 1; k <= rho; ++k)
        table.push_back({add(prefix + "l" + std::to_string(k), {Partition::road, street, k - 1, 0})});
    } else {
      for (segtree::NodeIndex n = 0; n < tree.size(); ++n) {
        const std::string base = prefix + tree.node(n).id.label();
        std::vector<AttributeId> replicas;
        if (rep.kind == RepresentationKind::segment_tree) {
          replicas.push_back(add(base, {Partition::road, street, n, 0}));
        } else {
          for (std::uint32_t w = 1; w <= rep.epsilon; ++w)
            replicas.push_back(add(base + "@" + std::to_string(w), {Partition::road, street, n, w}));
        }
        table.push_back(std::move(replicas));
      }
    }
    space.street_trees_.emplace(street, std::move(tree));
  }

  space.time_tree_ = segtree::SegmentTree::build(time.max_lifetime_days);
  for (segtree::NodeIndex n = 0; n < space.time_tree_.size(); ++n)
    space.time_ids_.push_back(add("x_" + space.time_tree_.node(n).id.label(), {Partition::time, 0, n, 0}));
  return space;
}

const segtree::SegmentTree& AttributeSpace::street_tree(std::uint32_t street) const {
  auto it = street_trees_.find(street);
  if (it == street_trees_.end()) throw AttrSpaceError("unknown street " + std::to_string(street));
  return it->second;
}

std::uint32_t AttributeSpace::segments_of(std::uint32_t street) const {
  return street_tree(street).range_max();
}

const std::vector<AttributeId>& AttributeSpace::road_attributes(std::uint32_t street,
                                                                segtree::NodeIndex node) const {
  auto it = road_ids_.find(street);
  if (it == road_ids_.end()) throw AttrSpaceError("unknown street " + std::to_string(street));
  return it->second.at(node);
}

EncryptionLabel AttributeSpace::label_for_device(SegmentRef at, std::uint32_t day) const {
  const auto& tree = street_tree(at.street);
  if (at.segment < 1 || at.segment > tree.range_max())
    throw AttrSpaceError("segment " + std::to_string(at.segment) + " outside street " + std::to_string(at.street));
  if (day < 1 || day > time_.max_lifetime_days)
    throw AttrSpaceError("day " + std::to_string(day) + " outside the system lifetime");
  EncryptionLabel label;
  if (rep_.kind == RepresentationKind::basic) {
    label.road.insert(road_attributes(at.street, at.segment - 1).front());
  } else {
    for (auto n : tree.point_rep(at.segment))
      for (auto id : road_attributes(at.street, n)) label.road.insert(id);
  }
  for (auto n : time_tree_.point_rep(day)) label.time.insert(time_ids_[n]);
  return label;
}

namespace {

PolicyNode any_of_or_single(std::vector<PolicyNode> nodes) {
  if (nodes.size() == 1) return std::move(nodes.front());
  return PolicyNode::any_of(std::move(nodes));
}

}  // namespace

AccessPolicy AttributeSpace::make_policy(const PolicySpec& spec, AttributePool* counters) const {
  if (spec.intervals.empty()) throw AttrSpaceError("policy authorizes no road segment");
  if (spec.validity.lo < 1 || spec.validity.hi > time_.max_lifetime_days)
    throw AttrSpaceError("validity period outside the system lifetime");
  if (spec.validity.hi < spec.validity.lo) throw AttrSpaceError("expiry precedes join date");

  std::map<std::uint32_t, std::set<std::uint32_t>> segments;  // basic
  std::map<std::uint32_t, std::set<segtree::NodeIndex>> nodes;
  for (const auto& si : spec.intervals) {
    const auto& tree = street_tree(si.street);
    if (si.segments.lo < 1 || si.segments.hi > tree.range_max() || si.segments.hi < si.segments.lo)
      throw AttrSpaceError("interval outside street " + std::to_string(si.street));
    if (rep_.kind == RepresentationKind::basic) {
      for (auto k = si.segments.lo; k <= si.segments.hi; ++k) segments[si.street].insert(k);
    } else {
      for (auto n : tree.interval_rep(si.segments)) nodes[si.street].insert(n);
    }
  }

  std::vector<PolicyNode> road;
  if (rep_.kind == RepresentationKind::basic) {
    for (const auto& [street, ks] : segments)
      for (auto k : ks) road.push_back(PolicyNode::leaf(road_attributes(street, k - 1).front()));
  } else {
    for (const auto& [street, ns] : nodes) {
      std::vector<PolicyNode> per_street;
      for (auto n : ns) {
        const auto& replicas = road_attributes(street, n);
        AttributeId pick = replicas.front();
        if (rep_.kind == RepresentationKind::attribute_pool) {
          for (auto r : replicas)
            if (pool_.count(r) < pool_.count(pick)) pick = r;
          if (counters) counters->acquire(pick);
        }
        per_street.push_back(PolicyNode::leaf(pick));
      }
      road.push_back(any_of_or_single(std::move(per_street)));
    }
  }

  std::vector<PolicyNode> time;
  for (auto n : time_tree_.interval_rep(spec.validity)) time.push_back(PolicyNode::leaf(time_ids_[n]));

  return AccessPolicy(PolicyNode::all_of({any_of_or_single(std::move(road)), any_of_or_single(std::move(time))}));
}

AccessPolicy AttributeSpace::policy_for_user(const PolicySpec& spec) {
  // Validate fully before touching the counters.
  make_policy(spec, nullptr);
  return make_policy(spec, &pool_);
}

AccessPolicy AttributeSpace::preview_policy(const PolicySpec& spec) const { return make_policy(spec, nullptr); }

void AttributeSpace::release_policy(const AccessPolicy& policy) {
  if (rep_.kind != RepresentationKind::attribute_pool) return;
  for (auto a : policy.leaves())
    if (origin(a).partition == Partition::road) pool_.release(a);
}

AttributeSet AttributeSpace::revocation_attribute_set(const AccessPolicy& policy) const {
  return road_part(policy.leaf_set());
}

AttributeSet AttributeSpace::road_part(const AttributeSet& attrs) const {
  AttributeSet out;
  for (auto a : attrs)
    if (universe_.partition(a) == Partition::road) out.insert(a);
  return out;
}

AttributeSet AttributeSpace::time_part(const AttributeSet& attrs) const {
  AttributeSet out;
  for (auto a : attrs)
    if (universe_.partition(a) == Partition::time) out.insert(a);
  return out;
}

std::vector<std::uint32_t> affected_users(std::uint32_t revoked,
                                          const std::map<std::uint32_t, AttributeSet>& road_attributes) {
  const AttributeSet& mine = road_attributes.at(revoked);
  std::vector<std::uint32_t> out;
  for (const auto& [user, attrs] : road_attributes) {
    if (user == revoked) continue;
    // Both sets are ordered; a linear merge finds any common element.
    auto a = mine.begin();
    auto b = attrs.begin();
    while (a != mine.end() && b != attrs.end()) {
      if (*a < *b) ++a;
      else if (*b < *a) ++b;
      else {
        out.push_back(user);
        break;
      }
    }
  }
  return out;
}

}  // namespace abe_cities::attrspace
