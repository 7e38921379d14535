#pragma once

// Random network generation and experiment sweeps.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "divnet/bayes.hpp"
#include "divnet/error.hpp"
#include "divnet/mrf.hpp"
#include "divnet/netmodel.hpp"
#include "divnet/parallel.hpp"
#include "divnet/random.hpp"
#include "divnet/similarity.hpp"

namespace divnet {

struct GenSpec {
  std::size_t hosts = 30;
  double degree = 3.0;  // average degree
  std::size_t services = 3;
  std::size_t products = 3;
  double sim_lo = 0.05;
  double sim_hi = 0.95;
  std::uint64_t seed = 42;
};

struct Instance {
  Network network;
  TableSet tables;
};

inline std::size_t edge_target(const GenSpec& s) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(s.hosts) * s.degree / 2.0));
}

inline void validate(const GenSpec& s) {
  if (s.hosts < 2) fail(ErrorKind::validation, "at least 2 hosts are required");
  if (!(s.degree >= 1.0 && s.degree < static_cast<double>(s.hosts)))
    fail(ErrorKind::validation, "degree must satisfy 1 <= degree < hosts");
  if (s.services < 1 || s.products < 1) fail(ErrorKind::validation, "services and products must be positive");
  if (!(0.0 <= s.sim_lo && s.sim_lo <= s.sim_hi && s.sim_hi <= 1.0))
    fail(ErrorKind::validation, "similarity range must satisfy 0 <= lo <= hi <= 1");
  const std::size_t e = edge_target(s);
  if (e < s.hosts - 1) fail(ErrorKind::validation, "degree too low for a connected network");
  if (e > s.hosts * (s.hosts - 1) / 2) fail(ErrorKind::validation, "degree too high for a simple graph");
}

inline std::string service_name(std::size_t s) { return "s" + std::to_string(s); }
inline std::string product_name(std::size_t s, std::size_t p) { return "s" + std::to_string(s) + "_p" + std::to_string(p); }
inline std::string host_name(std::size_t h) { return "h" + std::to_string(h); }

/// Similarity between products i and j of a service; depends only on the
/// seed and the indices, so tables for more products extend smaller ones.
inline double generated_similarity(const GenSpec& s, std::size_t service, std::size_t i, std::size_t j) {
  if (i == j) return 1.0;
  if (i > j) std::swap(i, j);
  std::uint64_t k = derive_seed(s.seed, "tables");
  k = derive_seed(k, service);
  k = derive_seed(k, i);
  k = derive_seed(k, j);
  return s.sim_lo + (s.sim_hi - s.sim_lo) * to_unit(mix64(k));
}

inline void add_random_edges(Network& n, std::size_t count, std::uint64_t seed) {
  const std::size_t h = n.hosts().size();
  const std::size_t limit = h * (h - 1) / 2;
  std::unordered_set<std::uint64_t> seen;
  for (const auto& l : n.links()) seen.insert(static_cast<std::uint64_t>(std::min(l.a, l.b)) * h + std::max(l.a, l.b));
  if (seen.size() + count > limit) fail(ErrorKind::validation, "not enough free host pairs for the extra edges");
  Rng rng(seed);
  for (std::size_t added = 0; added < count;) {
    std::size_t a = rng.below(h), b = rng.below(h);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!seen.insert(static_cast<std::uint64_t>(a) * h + b).second) continue;
    n.add_link(a, b);
    ++added;
  }
}

inline Instance gen_network(const GenSpec& s) {
  validate(s);
  Instance in;
  Network& n = in.network;
  for (std::size_t i = 0; i < s.services; ++i) n.add_service(service_name(i));
  for (std::size_t h = 0; h < s.hosts; ++h) n.add_host(host_name(h));
  std::vector<std::vector<ProductId>> cands(s.services);
  for (std::size_t i = 0; i < s.services; ++i)
    for (std::size_t p = 0; p < s.products; ++p) cands[i].push_back({service_name(i), product_name(i, p)});
  for (std::size_t h = 0; h < s.hosts; ++h)
    for (std::size_t i = 0; i < s.services; ++i) n.set_candidates(h, i, cands[i]);

  Rng tree(derive_seed(s.seed, "topology"));
  for (std::size_t h = 1; h < s.hosts; ++h) n.add_link(tree.below(h), h);
  add_random_edges(n, edge_target(s) - (s.hosts - 1), derive_seed(s.seed, "extra-edges"));

  for (std::size_t i = 0; i < s.services; ++i) {
    std::vector<std::string> names;
    for (const auto& c : cands[i]) names.push_back(c.name);
    SimilarityTable t(service_name(i), names);
    for (std::size_t a = 0; a < s.products; ++a)
      for (std::size_t b = a + 1; b < s.products; ++b) t.set(a, b, generated_similarity(s, i, a, b));
    in.tables.add(std::move(t));
  }
  return in;
}

inline std::vector<std::size_t> routing_nodes(const Network& n) {
  std::vector<std::size_t> out;
  const auto adj = n.adjacency();
  for (std::size_t h = 0; h < adj.size(); ++h)
    if (adj[h].size() >= 3) out.push_back(h);
  return out;
}

struct PathCount {
  std::uint64_t count = 0;
  bool capped = false;  // true: at least `count` paths exist
};

/// Simple paths from entry to target, counted exactly up to `cap`.
inline PathCount count_attack_paths(const Network& n, std::size_t entry, std::size_t target,
                                    std::uint64_t cap = 1000000) {
  if (entry >= n.hosts().size() || target >= n.hosts().size()) fail(ErrorKind::lookup, "unknown host");
  PathCount r;
  if (entry == target) {
    r.count = 1;
    return r;
  }
  const auto adj = n.adjacency();
  std::vector<char> on_path(adj.size(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> stack{{entry, 0}};
  on_path[entry] = 1;
  while (!stack.empty()) {
    auto& [u, i] = stack.back();
    if (i == adj[u].size()) {
      on_path[u] = 0;
      stack.pop_back();
      continue;
    }
    const std::size_t v = adj[u][i++];
    if (on_path[v]) continue;
    if (v == target) {
      if (++r.count >= cap) {
        r.capped = true;
        return r;
      }
      continue;
    }
    on_path[v] = 1;
    stack.emplace_back(v, 0);
  }
  return r;
}

/// The first three hosts (fewer on tiny networks).
inline std::vector<std::size_t> default_entries(const Network& n) {
  std::vector<std::size_t> out;
  for (std::size_t h = 0; h < std::min<std::size_t>(3, n.hosts().size() - 1); ++h) out.push_back(h);
  return out;
}

/// Host farthest (by hops) from the nearest entry; highest index on ties.
inline std::size_t farthest_host(const Network& n, const std::vector<std::size_t>& entries) {
  const auto adj = n.adjacency();
  std::vector<std::size_t> dist(adj.size(), SIZE_MAX);
  std::vector<std::size_t> queue;
  for (std::size_t e : entries) {
    dist[e] = 0;
    queue.push_back(e);
  }
  for (std::size_t i = 0; i < queue.size(); ++i)
    for (std::size_t v : adj[queue[i]])
      if (dist[v] == SIZE_MAX) {
        dist[v] = dist[queue[i]] + 1;
        queue.push_back(v);
      }
  std::size_t best = entries.empty() ? 0 : entries.front();
  std::size_t far = 0;
  for (std::size_t h = 0; h < dist.size(); ++h)
    if (dist[h] != SIZE_MAX && dist[h] >= far) {
      far = dist[h];
      best = h;
    }
  return best;
}

/// One local constraint contradicting `a` on a random host: either forbids
/// the host's current product pair or forces a different consequent.
inline Constraint conflicting_constraint(const Network& n, const Assignment& a, Rng& rng) {
  for (std::size_t attempt = 0; attempt < 100000; ++attempt) {
    const std::size_t h = rng.below(n.hosts().size());
    const auto& slots = n.host_slots(h);
    if (slots.size() < 2) continue;
    const std::size_t m = rng.below(slots.size());
    std::size_t k = rng.below(slots.size() - 1);
    if (k >= m) ++k;
    const ProductId& t = assigned_product(n, a, slots[m]);
    const ProductId& q = assigned_product(n, a, slots[k]);
    const auto& alt = n.slot(slots[k]).candidates;
    if (alt.size() < 2 || rng.bernoulli(0.5)) return {n.hosts()[h], t, q, Polarity::undesirable};
    std::size_t j = rng.below(alt.size() - 1);
    if (alt[j] == q) j = alt.size() - 1;
    return {n.hosts()[h], t, alt[j], Polarity::desirable};
  }
  fail(ErrorKind::validation, "no host offers two services");
}

/// Constraints generated one at a time, each against the optimum under the
/// ones before it. Counts are nested: the first k constraints of a longer
/// list equal the list for k.
inline std::vector<Constraint> conflicting_constraints(const Network& n, const TableSet& tables, std::size_t count,
                                                       std::uint64_t seed, const SolverConfig& cfg = {}) {
  std::vector<Constraint> out;
  Rng rng(derive_seed(seed, "constraints"));
  while (out.size() < count) {
    const SolveResult cur = optimize(n, tables, out, {}, cfg);
    out.push_back(conflicting_constraint(n, cur.assignment, rng));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Evaluation {
  double log10_p_prime = std::numeric_limits<double>::quiet_NaN();
  double log10_p = std::numeric_limits<double>::quiet_NaN();
  double d_bn = std::numeric_limits<double>::quiet_NaN();
};

/// d_bn of an assignment with every service in the exploit kit and prior-1
/// entries.
inline Evaluation evaluate_assignment(const Network& n, const TableSet& tables, const Assignment& a,
                                      const std::vector<std::size_t>& entries, std::size_t target, double p_avg,
                                      Method method = Method::factored) {
  std::vector<RootPrior> roots;
  for (std::size_t e : entries) roots.push_back({n.hosts()[e], 1.0});
  const BayesNet bn = build_bn(n, a, roots, n.hosts()[target], {n.services()}, p_avg, tables);
  InferenceOptions opt;
  opt.method = method;
  const InferenceResult r = infer(bn, opt);
  Evaluation e;
  e.log10_p = std::log10(r.p[target]);
  e.log10_p_prime = std::log10(r.p_prime[target]);
  if (r.p[target] > 0.0) e.d_bn = r.p_prime[target] / r.p[target];
  return e;
}

// ---------------------------------------------------------------------------
// Experiments

enum class Family { structure, variety, constraints, scale };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::structure: return "structure";
    case Family::variety: return "variety";
    case Family::constraints: return "constraints";
    case Family::scale: return "scale";
  }
  return "structure";
}

inline Family parse_family(std::string_view s) {
  if (s == "structure") return Family::structure;
  if (s == "variety") return Family::variety;
  if (s == "constraints") return Family::constraints;
  if (s == "scale") return Family::scale;
  fail(ErrorKind::validation, "unknown experiment family '" + std::string(s) + "'");
}

/// Rows are the cartesian product of the lists, repeated per seed.
struct ExperimentConfig {
  Family family = Family::variety;
  std::vector<std::size_t> hosts{30};
  std::vector<double> degrees{3.0};
  std::vector<std::size_t> services{3};
  std::vector<std::size_t> products{3};
  std::vector<std::size_t> constraints{0};
  std::vector<std::size_t> extra_edges{0};
  std::size_t repeats = 1;
  std::uint64_t seed = 42;
  double p_avg = 0.08;
  double sim_lo = 0.05;
  double sim_hi = 0.95;
  SolverConfig solver;
  unsigned threads = 1;
  double budget_ms = 0.0;  // 0: unlimited
};

struct ExperimentRow {
  std::string family;
  std::size_t hosts = 0;
  double degree = 0.0;
  std::size_t services = 0;
  std::size_t products = 0;
  std::size_t constraints = 0;
  Evaluation eval;
  double energy = 0.0;
  double gap = 0.0;
  double solve_ms = 0.0;
  std::uint64_t seed = 0;
  std::size_t extra_edges = 0;
  std::size_t routing_nodes = 0;
  bool done = false;
};

struct ExperimentReport {
  Family family = Family::variety;
  std::vector<ExperimentRow> rows;
  bool partial = false;
};

inline ExperimentRow run_row(Family family, const GenSpec& spec, std::size_t extra, std::size_t constraints,
                             const ExperimentConfig& cfg) {
  ExperimentRow row;
  row.family = std::string(to_string(family));
  row.hosts = spec.hosts;
  row.services = spec.services;
  row.products = spec.products;
  row.constraints = constraints;
  row.seed = spec.seed;
  row.extra_edges = extra;
  Instance in = gen_network(spec);
  if (extra > 0) add_random_edges(in.network, extra, derive_seed(spec.seed, "structure-edges"));
  row.degree = 2.0 * static_cast<double>(in.network.links().size()) / static_cast<double>(spec.hosts);
  row.routing_nodes = routing_nodes(in.network).size();

  SolverConfig sc = cfg.solver;
  sc.threads = 1;
  std::vector<Constraint> cs;
  if (constraints > 0) cs = conflicting_constraints(in.network, in.tables, constraints, spec.seed, sc);
  const auto t0 = std::chrono::steady_clock::now();
  const SolveResult r = optimize(in.network, in.tables, cs, {}, sc);
  row.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  row.energy = r.energy;
  row.gap = r.gap;
  if (family != Family::scale) {
    const auto entries = default_entries(in.network);
    row.eval = evaluate_assignment(in.network, in.tables, r.assignment, entries,
                                   farthest_host(in.network, entries), cfg.p_avg);
  }
  row.done = true;
  return row;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.hosts.empty() || cfg.degrees.empty() || cfg.services.empty() || cfg.products.empty() ||
      cfg.constraints.empty() || cfg.extra_edges.empty() || cfg.repeats == 0)
    fail(ErrorKind::validation, "experiment sweep is empty");
  struct Job {
    GenSpec spec;
    std::size_t extra, constraints;
  };
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < cfg.repeats; ++r)
    for (std::size_t h : cfg.hosts)
      for (double d : cfg.degrees)
        for (std::size_t s : cfg.services)
          for (std::size_t p : cfg.products)
            for (std::size_t c : cfg.constraints)
              for (std::size_t x : cfg.extra_edges) {
                GenSpec g{h, d, s, p, cfg.sim_lo, cfg.sim_hi, cfg.repeats == 1 ? cfg.seed : derive_seed(cfg.seed, r)};
                validate(g);
                jobs.push_back({g, x, c});
              }
  ExperimentReport rep;
  rep.family = cfg.family;
  rep.rows.resize(jobs.size());
  const auto start = std::chrono::steady_clock::now();
  ThreadPool pool(cfg.threads);
  pool.parallel_for(jobs.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const double elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      if (cfg.budget_ms > 0.0 && elapsed > cfg.budget_ms) continue;
      rep.rows[i] = run_row(cfg.family, jobs[i].spec, jobs[i].extra, jobs[i].constraints, cfg);
    }
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (rep.rows[i].done) continue;
    rep.partial = true;
    auto& row = rep.rows[i];
    row.family = std::string(to_string(cfg.family));
    row.hosts = jobs[i].spec.hosts;
    row.degree = jobs[i].spec.degree;
    row.services = jobs[i].spec.services;
    row.products = jobs[i].spec.products;
    row.constraints = jobs[i].constraints;
    row.seed = jobs[i].spec.seed;
    row.extra_edges = jobs[i].extra;
  }
  return rep;
}

inline constexpr std::string_view kReportCsvHeader =
    "family,hosts,degree,services,products,constraints,log10_p_prime,log10_p,d_bn,energy,gap,solve_ms,seed";

namespace detail {
inline std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

/// Rows skipped by the budget have empty metric fields.
inline void write_csv(const ExperimentReport& rep, std::ostream& out, bool with_times = true) {
  out << kReportCsvHeader << '\n';
  for (const auto& r : rep.rows) {
    out << r.family << ',' << r.hosts << ',' << detail::num(r.degree) << ',' << r.services << ',' << r.products << ','
        << r.constraints << ',';
    if (r.done) {
      out << detail::num(r.eval.log10_p_prime) << ',' << detail::num(r.eval.log10_p) << ','
          << detail::num(r.eval.d_bn) << ',' << detail::num(r.energy) << ',' << detail::num(r.gap) << ','
          << (with_times ? detail::num(r.solve_ms) : std::string()) << ',';
    } else {
      out << ",,,,,,";
    }
    out << r.seed << '\n';
  }
}

inline nlohmann::json to_json(const ExperimentReport& rep, bool with_times = true) {
  nlohmann::json rows = nlohmann::json::array();
  auto opt = [](double v) { return std::isnan(v) || std::isinf(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  for (const auto& r : rep.rows) {
    nlohmann::json j{{"family", r.family},
                     {"hosts", r.hosts},
                     {"degree", r.degree},
                     {"services", r.services},
                     {"products", r.products},
                     {"constraints", r.constraints},
                     {"extra_edges", r.extra_edges},
                     {"seed", r.seed},
                     {"completed", r.done}};
    if (r.done) {
      j["log10_p_prime"] = opt(r.eval.log10_p_prime);
      j["log10_p"] = opt(r.eval.log10_p);
      j["d_bn"] = opt(r.eval.d_bn);
      j["energy"] = r.energy;
      j["gap"] = r.gap;
      j["routing_nodes"] = r.routing_nodes;
      if (with_times) j["solve_ms"] = r.solve_ms;
    }
    rows.push_back(std::move(j));
  }
  return {{"experiment", std::string(to_string(rep.family))}, {"partial", rep.partial}, {"rows", rows}};
}

}  // namespace divnet
