#pragma once

// Networks of hosts offering services, candidate products per (host, service)
// slot, product assignments, and configuration constraints.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "divnet/error.hpp"
#include "divnet/random.hpp"
#include "divnet/similarity.hpp"

namespace divnet {

struct Link {
  std::size_t a;
  std::size_t b;
};

/// Candidate products for one service on one host.
struct Slot {
  std::size_t host;
  std::size_t service;
  std::vector<ProductId> candidates;
};

class Network {
 public:
  std::size_t add_host(std::string id) {
    if (id.empty()) fail(ErrorKind::validation, "empty host id");
    if (host_index_.count(id)) fail(ErrorKind::validation, "duplicate host '" + id + "'");
    host_index_.emplace(id, hosts_.size());
    hosts_.push_back(std::move(id));
    host_slots_.emplace_back();
    return hosts_.size() - 1;
  }

  /// Returns the existing index when the service is already known.
  std::size_t add_service(std::string id) {
    if (id.empty()) fail(ErrorKind::validation, "empty service id");
    auto [it, added] = service_index_.emplace(fold(id), services_.size());
    if (added) services_.push_back(std::move(id));
    return it->second;
  }

  /// Links are stored as given; validate_network reports bad ones.
  void add_link(std::size_t a, std::size_t b) { links_.push_back({a, b}); }

  void add_link(std::string_view a, std::string_view b) {
    add_link(require_host(a), require_host(b));
  }

  std::size_t set_candidates(std::size_t host, std::size_t service, std::vector<ProductId> products) {
    if (host >= hosts_.size()) fail(ErrorKind::lookup, "host index out of range");
    if (service >= services_.size()) fail(ErrorKind::lookup, "service index out of range");
    if (auto s = find_slot(host, service)) {
      slots_[*s].candidates = std::move(products);
      return *s;
    }
    slots_.push_back({host, service, std::move(products)});
    const std::size_t idx = slots_.size() - 1;
    slot_index_.emplace(key(host, service), idx);
    auto& hs = host_slots_[host];
    hs.insert(std::upper_bound(hs.begin(), hs.end(), idx,
                               [&](std::size_t x, std::size_t y) {
                                 return slots_[x].service < slots_[y].service;
                               }),
              idx);
    return idx;
  }

  /// Convenience form: products are tagged with the service name.
  std::size_t set_candidates(std::string_view host, std::string_view service,
                             const std::vector<std::string>& products) {
    const std::size_t s = add_service(std::string(service));
    std::vector<ProductId> ids;
    ids.reserve(products.size());
    for (const auto& p : products) ids.push_back({services_[s], p});
    return set_candidates(require_host(host), s, std::move(ids));
  }

  const std::vector<std::string>& hosts() const noexcept { return hosts_; }
  const std::vector<std::string>& services() const noexcept { return services_; }
  const std::vector<Link>& links() const noexcept { return links_; }
  const std::vector<Slot>& slots() const noexcept { return slots_; }
  const Slot& slot(std::size_t i) const { return slots_[i]; }

  /// Slot indices of a host, ordered by service index.
  const std::vector<std::size_t>& host_slots(std::size_t host) const { return host_slots_[host]; }

  std::optional<std::size_t> host_index(std::string_view id) const {
    auto it = host_index_.find(std::string(id));
    if (it == host_index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::size_t> service_index(std::string_view id) const {
    auto it = service_index_.find(fold(id));
    if (it == service_index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t require_host(std::string_view id) const {
    if (auto h = host_index(id)) return *h;
    fail(ErrorKind::lookup, "unknown host '" + std::string(id) + "'");
  }

  std::size_t require_service(std::string_view id) const {
    if (auto s = service_index(id)) return *s;
    fail(ErrorKind::lookup, "unknown service '" + std::string(id) + "'");
  }

  std::optional<std::size_t> find_slot(std::size_t host, std::size_t service) const {
    auto it = slot_index_.find(key(host, service));
    if (it == slot_index_.end()) return std::nullopt;
    return it->second;
  }

  /// Sorted, deduplicated neighbor lists; self-loops and dangling links skipped.
  std::vector<std::vector<std::size_t>> adjacency() const {
    std::vector<std::vector<std::size_t>> adj(hosts_.size());
    for (const auto& l : links_) {
      if (l.a == l.b || l.a >= hosts_.size() || l.b >= hosts_.size()) continue;
      adj[l.a].push_back(l.b);
      adj[l.b].push_back(l.a);
    }
    for (auto& n : adj) {
      std::sort(n.begin(), n.end());
      n.erase(std::unique(n.begin(), n.end()), n.end());
    }
    return adj;
  }

 private:
  static std::uint64_t key(std::size_t host, std::size_t service) {
    return (static_cast<std::uint64_t>(host) << 32) | static_cast<std::uint64_t>(service);
  }

  std::vector<std::string> hosts_;
  std::vector<std::string> services_;
  std::vector<Link> links_;
  std::vector<Slot> slots_;
  std::vector<std::vector<std::size_t>> host_slots_;
  std::unordered_map<std::string, std::size_t> host_index_;
  std::unordered_map<std::string, std::size_t> service_index_;
  std::unordered_map<std::uint64_t, std::size_t> slot_index_;
};

/// One chosen candidate index per slot of the network it was made for.
struct Assignment {
  std::vector<std::size_t> choice;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

inline const ProductId& assigned_product(const Network& n, const Assignment& a, std::size_t slot) {
  return n.slot(slot).candidates.at(a.choice.at(slot));
}

/// Product assigned to (host, service), or nullptr when the host lacks the service.
inline const ProductId* assigned_product(const Network& n, const Assignment& a, std::size_t host,
                                         std::size_t service) {
  const auto s = n.find_slot(host, service);
  return s ? &assigned_product(n, a, *s) : nullptr;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  enum class Kind {
    dangling_link,
    self_loop,
    duplicate_link,
    empty_candidates,
    service_mismatch,
    duplicate_candidate,
  };
  Kind kind;
  std::string locus;
  std::string message;
};

inline std::vector<Violation> validate_network(const Network& n) {
  std::vector<Violation> out;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& l : n.links()) {
    const std::size_t h = n.hosts().size();
    auto name = [&](std::size_t i) { return i < h ? n.hosts()[i] : "#" + std::to_string(i); };
    const std::string locus = "link (" + name(l.a) + ", " + name(l.b) + ")";
    if (l.a >= h || l.b >= h) {
      out.push_back({Violation::Kind::dangling_link, locus, "references an unknown host"});
      continue;
    }
    if (l.a == l.b) {
      out.push_back({Violation::Kind::self_loop, locus, "self-loop"});
      continue;
    }
    if (!seen.emplace(std::min(l.a, l.b), std::max(l.a, l.b)).second)
      out.push_back({Violation::Kind::duplicate_link, locus, "duplicate link"});
  }
  for (const auto& s : n.slots()) {
    const std::string locus = "(" + n.hosts()[s.host] + ", " + n.services()[s.service] + ")";
    if (s.candidates.empty())
      out.push_back({Violation::Kind::empty_candidates, locus, "empty candidate list"});
    std::set<std::string> names;
    for (const auto& p : s.candidates) {
      if (fold(p.service) != fold(n.services()[s.service]))
        out.push_back({Violation::Kind::service_mismatch, locus,
                       "product '" + p.name + "' belongs to service '" + p.service + "'"});
      if (!names.insert(fold(p.name)).second)
        out.push_back({Violation::Kind::duplicate_candidate, locus,
                       "product '" + p.name + "' listed twice"});
    }
  }
  return out;
}

inline void require_valid(const Network& n) {
  const auto v = validate_network(n);
  if (v.empty()) return;
  std::string msg = std::to_string(v.size()) + " network violation(s)";
  for (const auto& x : v) msg += "\n  " + x.locus + ": " + x.message;
  fail(ErrorKind::validation, msg);
}

/// Throws when the assignment does not cover every slot with a listed candidate.
inline void validate_assignment(const Network& n, const Assignment& a) {
  if (a.choice.size() != n.slots().size())
    fail(ErrorKind::validation, "assignment covers " + std::to_string(a.choice.size()) +
                                    " slots, network has " + std::to_string(n.slots().size()));
  for (std::size_t s = 0; s < a.choice.size(); ++s) {
    if (a.choice[s] >= n.slot(s).candidates.size())
      fail(ErrorKind::validation, "assignment for (" + n.hosts()[n.slot(s).host] + ", " +
                                      n.services()[n.slot(s).service] +
                                      ") is not a listed candidate");
  }
}

/// Resolves product names per slot into an assignment.
inline Assignment assignment_from_names(
    const Network& n, const std::map<std::string, std::map<std::string, std::string>>& names) {
  Assignment a;
  a.choice.assign(n.slots().size(), 0);
  for (std::size_t s = 0; s < n.slots().size(); ++s) {
    const Slot& slot = n.slot(s);
    const std::string& host = n.hosts()[slot.host];
    const std::string& service = n.services()[slot.service];
    auto h = names.find(host);
    const std::string* product = nullptr;
    if (h != names.end()) {
      for (const auto& [svc, prod] : h->second)
        if (fold(svc) == fold(service)) product = &prod;
    }
    if (!product) fail(ErrorKind::validation, "assignment lacks (" + host + ", " + service + ")");
    auto it = std::find_if(slot.candidates.begin(), slot.candidates.end(),
                           [&](const ProductId& p) { return fold(p.name) == fold(*product); });
    if (it == slot.candidates.end())
      fail(ErrorKind::validation, "product '" + *product + "' is not a candidate for (" + host +
                                      ", " + service + ")");
    a.choice[s] = static_cast<std::size_t>(it - slot.candidates.begin());
  }
  return a;
}

// ---------------------------------------------------------------------------
// Constraints and clamps

enum class Polarity { desirable, undesirable };

/// If `trigger` is assigned at a host in scope then `consequent` must
/// (desirable) or must not (undesirable) be assigned there as well.
struct Constraint {
  std::optional<std::string> host;  // nullopt: every host
  ProductId trigger;
  ProductId consequent;
  Polarity polarity = Polarity::undesirable;
};

struct Clamp {
  std::string host;
  std::string service;
  std::string product;
};

struct ConstraintViolation {
  std::size_t constraint;
  std::size_t host;

  friend bool operator==(const ConstraintViolation&, const ConstraintViolation&) = default;
};

/// Services and host of a constraint resolved against a network.
struct ResolvedConstraint {
  std::optional<std::size_t> host;
  std::size_t trigger_service;
  std::size_t consequent_service;
};

inline ResolvedConstraint resolve(const Network& n, const Constraint& c) {
  ResolvedConstraint r{};
  const auto ts = n.service_index(c.trigger.service);
  const auto cs = n.service_index(c.consequent.service);
  if (!ts) fail(ErrorKind::validation, "constraint references unknown service '" + c.trigger.service + "'");
  if (!cs) fail(ErrorKind::validation, "constraint references unknown service '" + c.consequent.service + "'");
  if (*ts == *cs) fail(ErrorKind::validation, "constraint trigger and consequent share service '" +
                                                  c.trigger.service + "'");
  if (c.host) {
    const auto h = n.host_index(*c.host);
    if (!h) fail(ErrorKind::validation, "constraint references unknown host '" + *c.host + "'");
    r.host = *h;
  }
  r.trigger_service = *ts;
  r.consequent_service = *cs;
  return r;
}

/// Every (constraint, host) pair the assignment breaks, ordered by constraint
/// then host.
inline std::vector<ConstraintViolation> check_constraints(const Network& n, const Assignment& a,
                                                          const std::vector<Constraint>& cs) {
  validate_assignment(n, a);
  std::vector<ConstraintViolation> out;
  for (std::size_t ci = 0; ci < cs.size(); ++ci) {
    const Constraint& c = cs[ci];
    const ResolvedConstraint r = resolve(n, c);
    auto check_host = [&](std::size_t h) {
      const ProductId* t = assigned_product(n, a, h, r.trigger_service);
      const ProductId* q = assigned_product(n, a, h, r.consequent_service);
      if (!t || !q || fold(t->name) != fold(c.trigger.name)) return;
      const bool same = fold(q->name) == fold(c.consequent.name);
      if ((c.polarity == Polarity::undesirable) == same) out.push_back({ci, h});
    };
    if (r.host) {
      check_host(*r.host);
    } else {
      for (std::size_t h = 0; h < n.hosts().size(); ++h) check_host(h);
    }
  }
  return out;
}

/// Restricts each clamped slot to its required product.
inline Network apply_clamps(const Network& n, const std::vector<Clamp>& clamps) {
  Network out = n;
  std::map<std::size_t, std::string> fixed;
  for (const auto& c : clamps) {
    const auto h = n.host_index(c.host);
    const auto s = n.service_index(c.service);
    if (!h || !s) fail(ErrorKind::validation, "clamp references unknown host/service (" + c.host + ", " + c.service + ")");
    const auto slot = n.find_slot(*h, *s);
    if (!slot) fail(ErrorKind::validation, "clamp on (" + c.host + ", " + c.service + "): host lacks that service");
    if (auto it = fixed.find(*slot); it != fixed.end()) {
      if (fold(it->second) != fold(c.product))
        fail(ErrorKind::build, "conflicting clamps on (" + c.host + ", " + c.service + "): '" +
                                   it->second + "' vs '" + c.product + "'");
      continue;
    }
    const auto& cand = n.slot(*slot).candidates;
    auto it = std::find_if(cand.begin(), cand.end(),
                           [&](const ProductId& p) { return fold(p.name) == fold(c.product); });
    if (it == cand.end())
      fail(ErrorKind::validation, "clamp product '" + c.product + "' is not a candidate for (" +
                                      c.host + ", " + c.service + ")");
    fixed.emplace(*slot, c.product);
    out.set_candidates(*h, *s, {*it});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Baseline assignments

/// Every host takes, per service, the first preferred product it can run;
/// hosts that can run none of them keep their first candidate.
inline Assignment mono_assignment(const Network& n,
                                  const std::map<std::string, std::vector<std::string>>& preference) {
  std::vector<const std::vector<std::string>*> pref(n.services().size(), nullptr);
  for (const auto& [svc, order] : preference) {
    if (auto s = n.service_index(svc)) pref[*s] = &order;
  }
  Assignment a;
  a.choice.assign(n.slots().size(), 0);
  for (std::size_t s = 0; s < n.slots().size(); ++s) {
    const Slot& slot = n.slot(s);
    const auto* order = pref[slot.service];
    if (!order)
      fail(ErrorKind::validation, "preference order lacks service '" + n.services()[slot.service] + "'");
    for (const auto& want : *order) {
      auto it = std::find_if(slot.candidates.begin(), slot.candidates.end(),
                             [&](const ProductId& p) { return fold(p.name) == fold(want); });
      if (it != slot.candidates.end()) {
        a.choice[s] = static_cast<std::size_t>(it - slot.candidates.begin());
        break;
      }
    }
  }
  return a;
}

/// Preference order listing, per service, products by how many slots offer
/// them (most common first, ties by first appearance).
inline std::map<std::string, std::vector<std::string>> default_preference(const Network& n) {
  std::vector<std::vector<std::pair<std::string, std::size_t>>> counts(n.services().size());
  for (const auto& slot : n.slots()) {
    auto& c = counts[slot.service];
    for (const auto& p : slot.candidates) {
      auto it = std::find_if(c.begin(), c.end(), [&](const auto& e) { return fold(e.first) == fold(p.name); });
      if (it == c.end()) c.emplace_back(p.name, 1);
      else ++it->second;
    }
  }
  std::map<std::string, std::vector<std::string>> out;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    auto& c = counts[s];
    std::stable_sort(c.begin(), c.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
    auto& order = out[n.services()[s]];
    for (auto& e : c) order.push_back(e.first);
  }
  return out;
}

inline Assignment random_assignment(const Network& n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "random-assignment"));
  Assignment a;
  a.choice.reserve(n.slots().size());
  for (const auto& slot : n.slots()) a.choice.push_back(static_cast<std::size_t>(rng.below(slot.candidates.size())));
  return a;
}

}  // namespace divnet
