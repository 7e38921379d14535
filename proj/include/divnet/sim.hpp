#pragma once

// Discrete-time malware propagation over a diversified network and mean
// time-to-compromise estimation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "divnet/bayes.hpp"
#include "divnet/error.hpp"
#include "divnet/netmodel.hpp"
#include "divnet/parallel.hpp"
#include "divnet/random.hpp"
#include "divnet/similarity.hpp"

namespace divnet {

enum class Policy { greedy, uniform };

struct ServiceRate {
  std::size_t service;
  double rate;
};

/// Success probabilities for attacking `to` from `from`.
struct DirectedRate {
  std::size_t from;
  std::size_t to;
  double best = 0.0;
  std::vector<ServiceRate> per_service;
};

struct EdgeRates {
  std::vector<DirectedRate> arcs;  // two per link: a->b then b->a
};

inline EdgeRates edge_rates(const Network& n, const Assignment& a, const TableSet& tables, const ExploitKit& kit,
                            double p_avg) {
  validate_assignment(n, a);
  std::vector<std::size_t> kit_services;
  for (const auto& s : kit.services) {
    const auto idx = n.service_index(s);
    if (!idx) fail(ErrorKind::validation, "exploit kit names unknown service '" + s + "'");
    kit_services.push_back(*idx);
  }
  std::sort(kit_services.begin(), kit_services.end());
  kit_services.erase(std::unique(kit_services.begin(), kit_services.end()), kit_services.end());

  auto arc = [&](std::size_t u, std::size_t v) {
    DirectedRate d{u, v, 0.0, {}};
    for (std::size_t s : kit_services) {
      const ProductId* dst = assigned_product(n, a, v, s);
      if (!dst) continue;
      const ProductId* src = assigned_product(n, a, u, s);
      const double r = src ? tables.similarity(n.services()[s], src->name, dst->name) : p_avg;
      d.per_service.push_back({s, r});
      d.best = std::max(d.best, r);
    }
    return d;
  };
  EdgeRates out;
  for (const auto& l : n.links()) {
    out.arcs.push_back(arc(l.a, l.b));
    out.arcs.push_back(arc(l.b, l.a));
  }
  return out;
}

struct SimScenario {
  Network network;
  Assignment assignment;
  TableSet tables;
  std::string entry;
  std::string target;
  ExploitKit kit;
  double p_avg = 0.08;
  Policy policy = Policy::greedy;
  int max_ticks = 10000;
  int runs = 1000;
};

struct RunOutcome {
  std::optional<int> ticks;                       // nullopt: censored
  std::vector<std::pair<int, std::size_t>> trace;  // (tick, host) infections
};

struct SimReport {
  double mttc_mean = std::numeric_limits<double>::quiet_NaN();
  double mttc_std = std::numeric_limits<double>::quiet_NaN();
  std::size_t success_count = 0;
  std::size_t censored_count = 0;
  std::vector<std::optional<int>> ticks;
  std::uint64_t seed = 0;
  bool mean_defined = false;

  double standard_error() const {
    return success_count > 1 ? mttc_std / std::sqrt(static_cast<double>(success_count))
                             : std::numeric_limits<double>::quiet_NaN();
  }
};

/// Adjacency view of a scenario with rates resolved once.
class Propagation {
 public:
  explicit Propagation(const SimScenario& s) : policy_(s.policy), max_ticks_(s.max_ticks) {
    if (s.max_ticks < 1) fail(ErrorKind::validation, "max_ticks must be at least 1");
    if (s.runs < 1) fail(ErrorKind::validation, "runs must be at least 1");
    entry_ = s.network.require_host(s.entry);
    target_ = s.network.require_host(s.target);
    if (entry_ == target_) fail(ErrorKind::validation, "entry and target must differ");
    const EdgeRates er = edge_rates(s.network, s.assignment, s.tables, s.kit, s.p_avg);
    out_.assign(s.network.hosts().size(), {});
    for (const auto& arc : er.arcs) {
      if (arc.from == arc.to) continue;
      Arc a{arc.to, arc.best, {}};
      for (const auto& r : arc.per_service) a.rates.push_back(r.rate);
      out_[arc.from].push_back(std::move(a));
    }
  }

  RunOutcome run(std::uint64_t seed, bool keep_trace = false) const {
    Rng rng(seed);
    const std::size_t n = out_.size();
    std::vector<char> infected(n, 0);
    std::vector<std::size_t> order{entry_};
    infected[entry_] = 1;
    RunOutcome r;
    if (keep_trace) r.trace.emplace_back(0, entry_);
    for (int tick = 1; tick <= max_ticks_; ++tick) {
      bool live = false;
      for (std::size_t u : order)
        for (const auto& a : out_[u]) live |= !infected[a.to] && a.best > 0.0;
      if (!live) return r;
      const std::size_t frontier = order.size();
      for (std::size_t i = 0; i < frontier; ++i) {
        for (const auto& a : out_[order[i]]) {
          if (infected[a.to]) continue;
          double p = a.best;
          if (policy_ == Policy::uniform) {
            if (a.rates.empty()) continue;
            p = a.rates[rng.below(a.rates.size())];
          }
          if (p > 0.0 && rng.bernoulli(p)) {
            infected[a.to] = 2;
            order.push_back(a.to);
            if (keep_trace) r.trace.emplace_back(tick, a.to);
          }
        }
      }
      for (std::size_t i = frontier; i < order.size(); ++i) infected[order[i]] = 1;
      if (infected[target_]) {
        r.ticks = tick;
        return r;
      }
    }
    return r;
  }

 private:
  struct Arc {
    std::size_t to;
    double best;
    std::vector<double> rates;
  };
  std::vector<std::vector<Arc>> out_;
  std::size_t entry_ = 0, target_ = 0;
  Policy policy_;
  int max_ticks_;
};

inline RunOutcome run_once(const SimScenario& s, std::uint64_t seed, bool keep_trace = false) {
  return Propagation(s).run(seed, keep_trace);
}

inline SimReport mttc(const SimScenario& s, std::uint64_t master_seed, unsigned threads = 1,
                      std::vector<RunOutcome>* traces = nullptr) {
  const Propagation prop(s);
  SimReport rep;
  rep.seed = master_seed;
  const std::size_t runs = static_cast<std::size_t>(s.runs);
  std::vector<RunOutcome> outcomes(runs);
  ThreadPool pool(threads);
  pool.parallel_for(runs, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) outcomes[i] = prop.run(derive_seed(master_seed, i), traces != nullptr);
  });
  double sum = 0.0;
  for (const auto& o : outcomes) {
    rep.ticks.push_back(o.ticks);
    if (o.ticks) {
      ++rep.success_count;
      sum += *o.ticks;
    } else {
      ++rep.censored_count;
    }
  }
  if (rep.success_count > 0) {
    rep.mean_defined = true;
    rep.mttc_mean = sum / static_cast<double>(rep.success_count);
    double ss = 0.0;
    for (const auto& t : rep.ticks)
      if (t) ss += (*t - rep.mttc_mean) * (*t - rep.mttc_mean);
    rep.mttc_std = rep.success_count > 1 ? std::sqrt(ss / static_cast<double>(rep.success_count - 1)) : 0.0;
  }
  if (traces) *traces = std::move(outcomes);
  return rep;
}

/// Hop distance between two hosts, or nullopt when disconnected.
inline std::optional<std::size_t> hop_distance(const Network& n, std::size_t from, std::size_t to) {
  const auto adj = n.adjacency();
  std::vector<std::size_t> dist(adj.size(), SIZE_MAX);
  std::vector<std::size_t> queue{from};
  dist[from] = 0;
  for (std::size_t i = 0; i < queue.size(); ++i) {
    for (std::size_t v : adj[queue[i]]) {
      if (dist[v] != SIZE_MAX) continue;
      dist[v] = dist[queue[i]] + 1;
      queue.push_back(v);
    }
  }
  if (dist[to] == SIZE_MAX) return std::nullopt;
  return dist[to];
}

}  // namespace divnet
