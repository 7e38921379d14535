#pragma once

// Pairwise discrete MRF over (host, service) slots, TRW-S energy
// minimization, and an exhaustive oracle.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "divnet/error.hpp"
#include "divnet/netmodel.hpp"
#include "divnet/parallel.hpp"
#include "divnet/similarity.hpp"

namespace divnet {

/// Dense row-major cost matrix; rows index the lower node's labels.
struct CostBlock {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  CostBlock() = default;
  CostBlock(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

  double operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }

  double max() const { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

  CostBlock transposed() const {
    CostBlock t(cols, rows);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
  }
};

enum class Schedule { sequential, parallel };

struct SolverConfig {
  int max_iterations = 2000;
  double tolerance = 1e-6;
  double big_penalty = 1e6;
  std::uint64_t seed = 42;  // reserved; ties are broken by lowest label index
  Schedule schedule = Schedule::sequential;
  unsigned threads = 1;
  bool polish = true;  // ICM descent on the returned labeling
};

struct MrfEdge {
  std::uint32_t s;  // lower node
  std::uint32_t t;  // higher node
  std::uint32_t block;
};

class MrfProblem {
 public:
  std::size_t add_node(std::size_t labels) {
    if (labels == 0) fail(ErrorKind::build, "node with empty label set");
    unary_.emplace_back(labels, 0.0);
    return unary_.size() - 1;
  }

  std::size_t add_block(CostBlock b) {
    blocks_.push_back(std::move(b));
    return blocks_.size() - 1;
  }

  /// Adds an edge using an existing block oriented as (a labels) x (b labels).
  void add_edge(std::size_t a, std::size_t b, std::size_t block) {
    if (a == b) fail(ErrorKind::build, "edge joins a node to itself");
    if (a >= size() || b >= size()) fail(ErrorKind::build, "edge references an unknown node");
    const CostBlock& c = blocks_.at(block);
    if (c.rows != labels(a) || c.cols != labels(b)) fail(ErrorKind::build, "cost block shape mismatch");
    if (a > b) {
      blocks_.push_back(c.transposed());
      block = blocks_.size() - 1;
      std::swap(a, b);
    }
    edges_.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                      static_cast<std::uint32_t>(block)});
  }

  void add_edge(std::size_t a, std::size_t b, CostBlock c) { add_edge(a, b, add_block(std::move(c))); }

  std::size_t size() const noexcept { return unary_.size(); }
  std::size_t labels(std::size_t node) const { return unary_[node].size(); }

  std::vector<double>& unary(std::size_t node) { return unary_[node]; }
  const std::vector<double>& unary(std::size_t node) const { return unary_[node]; }

  const std::vector<MrfEdge>& edges() const noexcept { return edges_; }
  const std::vector<CostBlock>& blocks() const noexcept { return blocks_; }
  const CostBlock& block(const MrfEdge& e) const { return blocks_[e.block]; }

  /// Penalty used for constraint entries.
  double big() const noexcept { return big_; }

  // Mapping back to the network the problem was built from (empty for
  // hand-built problems).
  std::vector<std::size_t> node_slot;
  std::vector<std::vector<std::size_t>> node_candidates;
  std::size_t slot_count = 0;

 private:
  friend MrfProblem build_problem(const Network&, const TableSet&, const std::vector<Constraint>&,
                                  const std::vector<Clamp>&, const SolverConfig&);

  std::vector<std::vector<double>> unary_;
  std::vector<MrfEdge> edges_;
  std::vector<CostBlock> blocks_;
  double big_ = 0.0;
};

using Labeling = std::vector<std::size_t>;

struct SolveResult {
  Labeling labels;
  Assignment assignment;  // filled when the problem came from a network
  double energy = 0.0;
  double lower_bound = 0.0;
  double gap = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
  double wall_ms = 0.0;
};

// ---------------------------------------------------------------------------
// Construction

namespace detail {

/// Interns identical candidate lists so equal cost blocks are stored once.
class ListInterner {
 public:
  std::size_t intern(std::size_t service, const std::vector<ProductId>& cands) {
    std::string key = std::to_string(service);
    for (const auto& p : cands) {
      key += '\x1f';
      key += fold(p.name);
    }
    auto [it, added] = ids_.emplace(std::move(key), lists_.size());
    if (added) lists_.push_back(&cands);
    return it->second;
  }
  const std::vector<ProductId>& list(std::size_t id) const { return *lists_[id]; }

 private:
  std::unordered_map<std::string, std::size_t> ids_;
  std::vector<const std::vector<ProductId>*> lists_;
};

}  // namespace detail

inline MrfProblem build_problem(const Network& net, const TableSet& tables,
                                const std::vector<Constraint>& cs, const std::vector<Clamp>& clamps,
                                const SolverConfig& config) {
  require_valid(net);
  const Network n = apply_clamps(net, clamps);

  // Nodes ordered by host, then service.
  MrfProblem p;
  p.slot_count = n.slots().size();
  std::vector<std::size_t> node_of_slot(n.slots().size());
  for (std::size_t h = 0; h < n.hosts().size(); ++h) {
    for (std::size_t s : n.host_slots(h)) {
      node_of_slot[s] = p.add_node(n.slot(s).candidates.size());
      p.node_slot.push_back(s);
      std::vector<std::size_t> map;
      for (const auto& c : n.slot(s).candidates) {
        const auto& orig = net.slot(s).candidates;
        map.push_back(static_cast<std::size_t>(
            std::find(orig.begin(), orig.end(), c) - orig.begin()));
      }
      p.node_candidates.push_back(std::move(map));
    }
  }

  // Every service offering two distinct products needs a table.
  std::vector<std::vector<std::string>> distinct(n.services().size());
  for (const auto& slot : n.slots()) {
    auto& d = distinct[slot.service];
    for (const auto& c : slot.candidates) {
      if (std::none_of(d.begin(), d.end(), [&](const std::string& x) { return fold(x) == fold(c.name); }))
        d.push_back(c.name);
    }
  }
  for (std::size_t s = 0; s < distinct.size(); ++s) {
    if (distinct[s].size() < 2) continue;
    const SimilarityTable* t = tables.find(n.services()[s]);
    if (!t) fail(ErrorKind::build, "no similarity table for service '" + n.services()[s] + "'");
    for (const auto& name : distinct[s])
      if (!t->index_of(name))
        fail(ErrorKind::build, "similarity table for '" + n.services()[s] + "' lacks product '" + name + "'");
  }

  // Inter-host edges, one per shared service per link.
  detail::ListInterner lists;
  std::vector<std::size_t> slot_list(n.slots().size());
  for (std::size_t s = 0; s < n.slots().size(); ++s)
    slot_list[s] = lists.intern(n.slot(s).service, n.slot(s).candidates);
  std::unordered_map<std::uint64_t, std::pair<std::size_t, double>> block_of;
  double pairwise_mass = 0.0;
  for (const auto& link : n.links()) {
    const std::size_t lo = std::min(link.a, link.b);
    const std::size_t hi = std::max(link.a, link.b);
    const auto& ls = n.host_slots(lo);
    const auto& hs = n.host_slots(hi);
    for (std::size_t i = 0, j = 0; i < ls.size() && j < hs.size();) {
      const std::size_t si = n.slot(ls[i]).service;
      const std::size_t sj = n.slot(hs[j]).service;
      if (si < sj) { ++i; continue; }
      if (sj < si) { ++j; continue; }
      const std::size_t la = slot_list[ls[i]];
      const std::size_t lb = slot_list[hs[j]];
      const std::uint64_t key = (static_cast<std::uint64_t>(la) << 32) | lb;
      auto it = block_of.find(key);
      if (it == block_of.end()) {
        const auto& ca = lists.list(la);
        const auto& cb = lists.list(lb);
        CostBlock b(ca.size(), cb.size());
        const std::string& svc = n.services()[si];
        for (std::size_t x = 0; x < ca.size(); ++x)
          for (std::size_t y = 0; y < cb.size(); ++y) b(x, y) = tables.similarity(svc, ca[x].name, cb[y].name);
        const double mx = b.max();
        it = block_of.emplace(key, std::make_pair(p.add_block(std::move(b)), mx)).first;
      }
      p.add_edge(node_of_slot[ls[i]], node_of_slot[hs[j]], it->second.first);
      pairwise_mass += it->second.second;
      ++i;
      ++j;
    }
  }

  double big = config.big_penalty;
  if (!(big > pairwise_mass)) big = std::pow(10.0, std::ceil(std::log10(pairwise_mass + 1.0)) + 1.0);
  p.big_ = big;

  // Intra-host constraint edges, merged per node pair.
  std::map<std::pair<std::size_t, std::size_t>, CostBlock> patches;
  for (const auto& c : cs) {
    const ResolvedConstraint r = resolve(n, c);
    auto patch_host = [&](std::size_t h) {
      const auto ts = n.find_slot(h, r.trigger_service);
      const auto qs = n.find_slot(h, r.consequent_service);
      if (!ts || !qs) return;
      const auto& tc = n.slot(*ts).candidates;
      const auto& qc = n.slot(*qs).candidates;
      auto index = [](const std::vector<ProductId>& v, const std::string& name) {
        for (std::size_t i = 0; i < v.size(); ++i)
          if (fold(v[i].name) == fold(name)) return i;
        return v.size();
      };
      const std::size_t j = index(tc, c.trigger.name);
      if (j == tc.size()) return;  // trigger cannot fire here
      const std::size_t k = index(qc, c.consequent.name);
      const std::size_t a = node_of_slot[*ts];
      const std::size_t b = node_of_slot[*qs];
      const bool flip = a > b;
      auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = patches.find(key);
      if (it == patches.end())
        it = patches.emplace(key, CostBlock(p.labels(key.first), p.labels(key.second))).first;
      auto add = [&](std::size_t x, std::size_t y) {
        if (flip) it->second(y, x) += big;
        else it->second(x, y) += big;
      };
      if (c.polarity == Polarity::undesirable) {
        if (k < qc.size()) add(j, k);
      } else {
        for (std::size_t q = 0; q < qc.size(); ++q)
          if (q != k) add(j, q);
      }
    };
    if (r.host) patch_host(*r.host);
    else for (std::size_t h = 0; h < n.hosts().size(); ++h) patch_host(h);
  }
  for (auto& [key, block] : patches) {
    // Entries hit by several constraints still cost exactly one penalty.
    for (auto& v : block.v) v = std::min(v, big);
    p.add_edge(key.first, key.second, std::move(block));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Evaluation

inline double energy(const MrfProblem& p, const Labeling& x) {
  if (x.size() != p.size()) fail(ErrorKind::validation, "labeling size differs from node count");
  double e = 0.0;
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (x[s] >= p.labels(s)) fail(ErrorKind::validation, "label outside node " + std::to_string(s) + "'s set");
    e += p.unary(s)[x[s]];
  }
  for (const auto& ed : p.edges()) e += p.block(ed)(x[ed.s], x[ed.t]);
  return e;
}

inline Labeling to_labeling(const MrfProblem& p, const Assignment& a) {
  if (a.choice.size() != p.slot_count) fail(ErrorKind::validation, "assignment does not match the problem");
  Labeling x(p.size());
  for (std::size_t s = 0; s < p.size(); ++s) {
    const auto& map = p.node_candidates[s];
    auto it = std::find(map.begin(), map.end(), a.choice[p.node_slot[s]]);
    if (it == map.end()) fail(ErrorKind::validation, "assignment uses a product outside the clamped label set");
    x[s] = static_cast<std::size_t>(it - map.begin());
  }
  return x;
}

inline Assignment to_assignment(const MrfProblem& p, const Labeling& x) {
  Assignment a;
  a.choice.assign(p.slot_count, 0);
  for (std::size_t s = 0; s < p.node_slot.size(); ++s) a.choice[p.node_slot[s]] = p.node_candidates[s][x[s]];
  return a;
}

inline double energy(const MrfProblem& p, const Assignment& a) { return energy(p, to_labeling(p, a)); }

/// Iterated conditional modes: relabels one node at a time, in node order,
/// while some move strictly lowers the energy. Returns the number of moves.
inline std::size_t icm(const MrfProblem& p, Labeling& x, int max_sweeps = 100) {
  const std::size_t n = p.size();
  std::vector<std::vector<std::uint32_t>> inc(n);
  for (std::size_t e = 0; e < p.edges().size(); ++e) {
    inc[p.edges()[e].s].push_back(static_cast<std::uint32_t>(e));
    inc[p.edges()[e].t].push_back(static_cast<std::uint32_t>(e));
  }
  std::size_t moves = 0;
  std::vector<double> local;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (std::size_t s = 0; s < n; ++s) {
      local.assign(p.unary(s).begin(), p.unary(s).end());
      for (std::uint32_t e : inc[s]) {
        const auto& ed = p.edges()[e];
        const CostBlock& b = p.block(ed);
        for (std::size_t l = 0; l < local.size(); ++l) local[l] += ed.s == s ? b(l, x[ed.t]) : b(x[ed.s], l);
      }
      std::size_t best = x[s];
      for (std::size_t l = 0; l < local.size(); ++l)
        if (local[l] < local[best] - 1e-12) best = l;
      if (best != x[s]) {
        x[s] = best;
        changed = true;
        ++moves;
      }
    }
    if (!changed) break;
  }
  return moves;
}

// ---------------------------------------------------------------------------
// Exhaustive oracle

inline std::pair<Labeling, double> brute_force(const MrfProblem& p, double guard = 1e7) {
  double states = 1.0;
  for (std::size_t s = 0; s < p.size(); ++s) states *= static_cast<double>(p.labels(s));
  if (states > guard)
    fail(ErrorKind::refusal, "state space of " + std::to_string(states) + " labelings exceeds the guard");
  const std::size_t n = p.size();
  if (n == 0) return {{}, 0.0};

  // Edges grouped by their higher node, so a partial energy is complete
  // once that node is labelled.
  std::vector<std::vector<std::size_t>> closing(n);
  for (std::size_t e = 0; e < p.edges().size(); ++e) closing[p.edges()[e].t].push_back(e);

  // Optimistic bound on what the unlabelled suffix can still add.
  std::vector<double> rest(n + 1, 0.0);
  for (std::size_t s = n; s-- > 0;) {
    double m = *std::min_element(p.unary(s).begin(), p.unary(s).end());
    for (std::size_t e : closing[s]) {
      const auto& v = p.block(p.edges()[e]).v;
      m += *std::min_element(v.begin(), v.end());
    }
    rest[s] = rest[s + 1] + m;
  }

  Labeling x(n, 0), best;
  double best_e = std::numeric_limits<double>::infinity();
  std::vector<double> partial(n + 1, 0.0);
  std::size_t depth = 0;
  std::vector<std::size_t> next(n, 0);
  while (true) {
    if (next[depth] >= p.labels(depth)) {
      if (depth == 0) break;
      next[depth] = 0;
      --depth;
      continue;
    }
    const std::size_t l = next[depth]++;
    x[depth] = l;
    double e = partial[depth] + p.unary(depth)[l];
    for (std::size_t ei : closing[depth]) {
      const auto& ed = p.edges()[ei];
      e += p.block(ed)(x[ed.s], l);
    }
    if (e + rest[depth + 1] >= best_e) continue;
    if (depth + 1 == n) {
      best = x;
      best_e = e;
      continue;
    }
    partial[depth + 1] = e;
    ++depth;
  }
  return {best, energy(p, best)};
}

// ---------------------------------------------------------------------------
// TRW-S

class TrwsSolver {
 public:
  TrwsSolver(const MrfProblem& p, const SolverConfig& cfg) : p_(p), cfg_(cfg) {
    const std::size_t n = p.size();
    const auto& edges = p.edges();
    label_off_.assign(n + 1, 0);
    for (std::size_t s = 0; s < n; ++s) label_off_[s + 1] = label_off_[s] + p.labels(s);
    msg_off_.resize(edges.size());
    std::size_t total = 0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      msg_off_[e] = total;
      total += p.labels(edges[e].s) + p.labels(edges[e].t);
    }
    msg_.assign(total, 0.0);

    std::vector<std::size_t> deg(n + 1, 0);
    in_.assign(n, 0);
    out_.assign(n, 0);
    for (const auto& e : edges) {
      ++deg[e.s];
      ++deg[e.t];
      ++out_[e.s];
      ++in_[e.t];
    }
    adj_off_.assign(n + 1, 0);
    for (std::size_t s = 0; s < n; ++s) adj_off_[s + 1] = adj_off_[s] + deg[s];
    adj_.resize(adj_off_[n]);
    std::vector<std::size_t> fill(adj_off_.begin(), adj_off_.end() - 1);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      adj_[fill[edges[e].s]++] = static_cast<std::uint32_t>(e);
      adj_[fill[edges[e].t]++] = static_cast<std::uint32_t>(e);
    }
    gamma_.resize(n);
    for (std::size_t s = 0; s < n; ++s) gamma_[s] = 1.0 / static_cast<double>(std::max<std::size_t>({1, in_[s], out_[s]}));

    if (cfg.schedule == Schedule::parallel && cfg.threads > 1) {
      fwd_levels_ = levels(true);
      bwd_levels_ = levels(false);
    }
  }

  SolveResult run() {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t n = p_.size();
    SolveResult r;
    r.lower_bound = -std::numeric_limits<double>::infinity();
    r.energy = std::numeric_limits<double>::infinity();
    Labeling x(n, 0);
    contrib_.assign(n, 0.0);
    ThreadPool pool(cfg_.schedule == Schedule::parallel ? cfg_.threads : 1);
    const int max_it = std::max(1, cfg_.max_iterations);
    for (int it = 1; it <= max_it; ++it) {
      pass(true, x, pool);
      const double e = energy(p_, x);
      if (e < r.energy) {
        r.energy = e;
        r.labels = x;
      }
      pass(false, x, pool);
      double lb = 0.0;
      for (double c : contrib_) lb += c;
      r.trace.push_back(lb);
      const double prev = r.lower_bound;
      r.lower_bound = std::max(r.lower_bound, lb);
      r.iterations = it;
      const double scale = std::max(1.0, std::abs(r.lower_bound));
      if (r.energy - r.lower_bound <= cfg_.tolerance * scale ||
          (it >= 2 && r.lower_bound - prev < cfg_.tolerance * scale)) {
        r.converged = true;
        break;
      }
    }
    if (cfg_.polish && n > 0 && icm(p_, r.labels) > 0) r.energy = energy(p_, r.labels);
    if (n == 0) {
      r.energy = 0.0;
      r.lower_bound = 0.0;
    }
    r.gap = r.energy - r.lower_bound;
    if (!p_.node_slot.empty()) r.assignment = to_assignment(p_, r.labels);
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return r;
  }

 private:
  /// Wavefronts: a node's level exceeds that of every neighbor processed
  /// before it, so nodes sharing a level are never adjacent.
  std::vector<std::vector<std::uint32_t>> levels(bool forward) const {
    const std::size_t n = p_.size();
    std::vector<std::size_t> level(n, 0);
    std::size_t top = 0;
    auto visit = [&](std::size_t s) {
      std::size_t l = 0;
      for (std::size_t k = adj_off_[s]; k < adj_off_[s + 1]; ++k) {
        const auto& e = p_.edges()[adj_[k]];
        const std::size_t o = e.s == s ? e.t : e.s;
        if (forward ? o < s : o > s) l = std::max(l, level[o] + 1);
      }
      level[s] = l;
      top = std::max(top, l);
    };
    if (forward) for (std::size_t s = 0; s < n; ++s) visit(s);
    else for (std::size_t s = n; s-- > 0;) visit(s);
    std::vector<std::vector<std::uint32_t>> out(n ? top + 1 : 0);
    for (std::size_t s = 0; s < n; ++s) out[level[s]].push_back(static_cast<std::uint32_t>(s));
    return out;
  }

  void pass(bool forward, Labeling& x, ThreadPool& pool) {
    const std::size_t n = p_.size();
    if (pool.size() <= 1 || (forward ? fwd_levels_ : bwd_levels_).empty()) {
      std::vector<double> scratch;
      if (forward) for (std::size_t s = 0; s < n; ++s) update(s, true, x, scratch);
      else for (std::size_t s = n; s-- > 0;) update(s, false, x, scratch);
      return;
    }
    for (const auto& level : forward ? fwd_levels_ : bwd_levels_) {
      pool.parallel_for(level.size(), [&](std::size_t b, std::size_t e) {
        std::vector<double> scratch;
        for (std::size_t i = b; i < e; ++i) update(level[i], forward, x, scratch);
      });
    }
  }

  double* to_higher(std::size_t e) { return &msg_[msg_off_[e] + p_.labels(p_.edges()[e].s)]; }
  double* to_lower(std::size_t e) { return &msg_[msg_off_[e]]; }

  void update(std::size_t s, bool forward, Labeling& x, std::vector<double>& theta) {
    const std::size_t L = p_.labels(s);
    theta.assign(p_.unary(s).begin(), p_.unary(s).end());
    for (std::size_t k = adj_off_[s]; k < adj_off_[s + 1]; ++k) {
      const std::size_t e = adj_[k];
      const double* m = p_.edges()[e].s == s ? to_lower(e) : to_higher(e);
      for (std::size_t i = 0; i < L; ++i) theta[i] += m[i];
    }

    if (forward) {
      // Label from already-fixed lower neighbors plus messages from above.
      std::vector<double>& score = score_buf();
      score.assign(p_.unary(s).begin(), p_.unary(s).end());
      for (std::size_t k = adj_off_[s]; k < adj_off_[s + 1]; ++k) {
        const std::size_t e = adj_[k];
        const auto& ed = p_.edges()[e];
        if (ed.t == s) {
          const CostBlock& b = p_.block(ed);
          for (std::size_t i = 0; i < L; ++i) score[i] += b(x[ed.s], i);
        } else {
          const double* m = to_lower(e);
          for (std::size_t i = 0; i < L; ++i) score[i] += m[i];
        }
      }
      x[s] = static_cast<std::size_t>(std::min_element(score.begin(), score.end()) - score.begin());
    }

    const double g = gamma_[s];
    double delta_sum = 0.0;
    std::vector<double>& a = a_buf();
    for (std::size_t k = adj_off_[s]; k < adj_off_[s + 1]; ++k) {
      const std::size_t e = adj_[k];
      const auto& ed = p_.edges()[e];
      const bool outgoing = forward ? ed.s == s : ed.t == s;
      if (!outgoing) continue;
      const CostBlock& b = p_.block(ed);
      double* back = forward ? to_lower(e) : to_higher(e);
      double* out = forward ? to_higher(e) : to_lower(e);
      a.resize(L);
      for (std::size_t i = 0; i < L; ++i) a[i] = g * theta[i] - back[i];
      const std::size_t M = forward ? b.cols : b.rows;
      double lo = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < M; ++j) {
        double m = std::numeric_limits<double>::infinity();
        if (forward) {
          for (std::size_t i = 0; i < L; ++i) m = std::min(m, a[i] + b(i, j));
        } else {
          const double* row = &b.v[j * b.cols];
          for (std::size_t i = 0; i < L; ++i) m = std::min(m, a[i] + row[i]);
        }
        out[j] = m;
        lo = std::min(lo, m);
      }
      for (std::size_t j = 0; j < M; ++j) out[j] -= lo;
      delta_sum += lo;
    }
    const std::size_t n_s = std::max<std::size_t>({1, in_[s], out_[s]});
    const std::size_t ends = n_s - (forward ? out_[s] : in_[s]);
    double term = 0.0;
    if (ends > 0)
      term = static_cast<double>(ends) / static_cast<double>(n_s) * *std::min_element(theta.begin(), theta.end());
    contrib_[s] = delta_sum + term;
  }

  static std::vector<double>& score_buf() {
    thread_local std::vector<double> v;
    return v;
  }
  static std::vector<double>& a_buf() {
    thread_local std::vector<double> v;
    return v;
  }

  const MrfProblem& p_;
  SolverConfig cfg_;
  std::vector<std::size_t> label_off_;
  std::vector<std::size_t> msg_off_;
  std::vector<double> msg_;
  std::vector<std::size_t> in_, out_;
  std::vector<std::size_t> adj_off_;
  std::vector<std::uint32_t> adj_;
  std::vector<double> gamma_;
  std::vector<double> contrib_;
  std::vector<std::vector<std::uint32_t>> fwd_levels_, bwd_levels_;
};

inline SolveResult solve_trws(const MrfProblem& p, const SolverConfig& cfg = {}) {
  if (cfg.max_iterations < 1) fail(ErrorKind::validation, "max_iterations must be at least 1");
  if (!(cfg.tolerance > 0)) fail(ErrorKind::validation, "tolerance must be positive");
  return TrwsSolver(p, cfg).run();
}

/// Builds and solves in one step.
inline SolveResult optimize(const Network& n, const TableSet& tables, const std::vector<Constraint>& cs,
                            const std::vector<Clamp>& clamps, const SolverConfig& cfg = {}) {
  return solve_trws(build_problem(n, tables, cs, clamps, cfg), cfg);
}

}  // namespace divnet
