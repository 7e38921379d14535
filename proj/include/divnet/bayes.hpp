#pragma once

// Attack Bayesian network over a diversified network: attack nodes choose
// which destination product to exploit, host nodes combine their attack
// parents by noisy-OR with similarity-dependent reuse probabilities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "divnet/error.hpp"
#include "divnet/netmodel.hpp"
#include "divnet/parallel.hpp"
#include "divnet/random.hpp"
#include "divnet/similarity.hpp"

namespace divnet {

struct ExploitKit {
  std::vector<std::string> services;
};

struct RootPrior {
  std::string host;
  double prior = 1.0;
};

inline double noisy_or(const std::vector<double>& probs) {
  double miss = 1.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::validation, "noisy-OR input outside [0,1]");
    miss *= 1.0 - p;
  }
  return 1.0 - miss;
}

/// Success probability of exploiting `cur` after `prev` was exploited on the
/// way in (nullopt: the attack starts at an entry host).
inline double infection_prob(const std::optional<ProductId>& prev, const ProductId& cur,
                             const TableSet& tables, double p_avg) {
  if (!prev || fold(prev->service) != fold(cur.service)) return p_avg;
  return tables.similarity(cur.service, prev->name, cur.name);
}

struct AttackNode {
  std::size_t source;
  std::size_t dest;
  std::vector<ProductId> domain;  // exploitable products; value domain.size() is none
  /// Attack nodes into `source`, each with its reuse matrix
  /// (pred value x own value) of infection probabilities.
  std::vector<std::pair<std::size_t, std::vector<double>>> second_order;

  std::size_t none() const noexcept { return domain.size(); }
};

class BayesNet {
 public:
  std::size_t host_count() const noexcept { return host_names_.size(); }
  const std::vector<std::string>& host_names() const noexcept { return host_names_; }
  const std::vector<AttackNode>& attack_nodes() const noexcept { return attacks_; }
  const AttackNode& attack(std::size_t a) const { return attacks_[a]; }

  /// BFS layer of each host; SIZE_MAX when unreachable from every root.
  const std::vector<std::size_t>& layers() const noexcept { return layer_; }
  const std::vector<std::size_t>& parents(std::size_t host) const { return parents_[host]; }
  const std::vector<std::size_t>& children(std::size_t host) const { return children_[host]; }
  bool is_root(std::size_t host) const { return prior_[host].has_value(); }
  double prior(std::size_t host) const { return prior_[host].value_or(0.0); }
  double p_avg() const noexcept { return p_avg_; }
  std::size_t target() const noexcept { return target_; }
  const std::vector<bool>& ancestors() const noexcept { return ancestor_; }
  const std::vector<std::pair<std::string, std::string>>& dropped_edges() const noexcept { return dropped_; }

  /// Attack nodes whose states appear in the host's CPT: its parents and
  /// their predecessor attack nodes.
  std::vector<std::size_t> cpt_scope(std::size_t host) const {
    std::vector<std::size_t> out = parents_[host];
    for (std::size_t a : parents_[host])
      for (const auto& [b, m] : attacks_[a].second_order) out.push_back(b);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// P(e = v | source state), v over domain then none.
  std::vector<double> attack_cpt(std::size_t a, bool source_compromised) const {
    const AttackNode& e = attacks_[a];
    std::vector<double> d(e.domain.size() + 1, 0.0);
    if (!source_compromised || e.domain.empty()) {
      d.back() = 1.0;
    } else {
      for (std::size_t i = 0; i < e.domain.size(); ++i) d[i] = 1.0 / static_cast<double>(e.domain.size());
    }
    return d;
  }

  /// P(host = T | attack-node values) under the similarity-aware CPT, or
  /// the similarity-blind one when `aware` is false. `values` is indexed by
  /// attack node id.
  double host_cpt(std::size_t host, bool aware, const std::vector<std::size_t>& values) const {
    double miss = 1.0;
    for (std::size_t a : parents_[host]) {
      const AttackNode& e = attacks_[a];
      const std::size_t v = values[a];
      if (v == e.none()) continue;
      if (!aware || is_root(e.source)) {
        miss *= 1.0 - p_avg_;
        continue;
      }
      double fail_all = 1.0;
      for (const auto& [b, r] : e.second_order) {
        const std::size_t m = values[b];
        if (m == attacks_[b].none()) continue;
        fail_all *= 1.0 - r[m * e.domain.size() + v];
      }
      miss *= fail_all;
    }
    return 1.0 - miss;
  }

 private:
  friend BayesNet build_bn(const Network&, const Assignment&, const std::vector<RootPrior>&,
                           const std::string&, const ExploitKit&, double, const TableSet&);

  std::vector<std::string> host_names_;
  std::vector<AttackNode> attacks_;
  std::vector<std::size_t> layer_;
  std::vector<std::vector<std::size_t>> parents_, children_;
  std::vector<std::optional<double>> prior_;
  std::vector<bool> ancestor_;
  std::vector<std::pair<std::string, std::string>> dropped_;
  double p_avg_ = 0.08;
  std::size_t target_ = 0;
};

inline BayesNet build_bn(const Network& n, const Assignment& a, const std::vector<RootPrior>& roots,
                         const std::string& target, const ExploitKit& kit, double p_avg,
                         const TableSet& tables) {
  validate_assignment(n, a);
  if (!(p_avg > 0.0 && p_avg <= 1.0)) fail(ErrorKind::validation, "p_avg must lie in (0, 1]");
  if (roots.empty()) fail(ErrorKind::validation, "at least one entry host is required");
  if (kit.services.empty()) fail(ErrorKind::validation, "exploit kit is empty");
  std::vector<bool> in_kit(n.services().size(), false);
  for (const auto& s : kit.services) {
    const auto idx = n.service_index(s);
    if (!idx) fail(ErrorKind::validation, "exploit kit names unknown service '" + s + "'");
    in_kit[*idx] = true;
  }

  BayesNet bn;
  const std::size_t h = n.hosts().size();
  bn.host_names_ = n.hosts();
  bn.p_avg_ = p_avg;
  bn.prior_.assign(h, std::nullopt);
  const auto t = n.host_index(target);
  if (!t) fail(ErrorKind::validation, "unknown target host '" + target + "'");
  bn.target_ = *t;

  std::vector<std::size_t>& layer = bn.layer_;
  layer.assign(h, std::numeric_limits<std::size_t>::max());
  std::deque<std::size_t> queue;
  for (const auto& r : roots) {
    const auto idx = n.host_index(r.host);
    if (!idx) fail(ErrorKind::validation, "unknown entry host '" + r.host + "'");
    if (!(r.prior >= 0.0 && r.prior <= 1.0)) fail(ErrorKind::validation, "root prior outside [0,1]");
    if (bn.prior_[*idx]) fail(ErrorKind::validation, "entry host '" + r.host + "' listed twice");
    bn.prior_[*idx] = r.prior;
    layer[*idx] = 0;
    queue.push_back(*idx);
  }
  const auto adj = n.adjacency();
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v : adj[u]) {
      if (layer[v] == std::numeric_limits<std::size_t>::max()) {
        layer[v] = layer[u] + 1;
        queue.push_back(v);
      }
    }
  }
  if (layer[bn.target_] == std::numeric_limits<std::size_t>::max())
    fail(ErrorKind::build, "target '" + target + "' is unreachable from every entry host");

  // Attack nodes, one per edge into the next layer, ordered by destination
  // layer, destination, then source.
  std::vector<std::pair<std::size_t, std::size_t>> directed;
  for (std::size_t u = 0; u < h; ++u) {
    if (layer[u] == std::numeric_limits<std::size_t>::max()) continue;
    for (std::size_t v : adj[u]) {
      if (layer[v] == layer[u] + 1) directed.emplace_back(u, v);
      else if (layer[v] == layer[u] && u < v) bn.dropped_.emplace_back(n.hosts()[u], n.hosts()[v]);
    }
  }
  std::sort(directed.begin(), directed.end(), [&](const auto& x, const auto& y) {
    return std::tuple(layer[x.second], x.second, x.first) < std::tuple(layer[y.second], y.second, y.first);
  });
  bn.parents_.assign(h, {});
  bn.children_.assign(h, {});
  for (const auto& [u, v] : directed) {
    AttackNode e{u, v, {}, {}};
    for (std::size_t s : n.host_slots(v))
      if (in_kit[n.slot(s).service]) e.domain.push_back(assigned_product(n, a, s));
    bn.parents_[v].push_back(bn.attacks_.size());
    bn.children_[u].push_back(bn.attacks_.size());
    bn.attacks_.push_back(std::move(e));
  }
  for (auto& e : bn.attacks_) {
    if (bn.is_root(e.source)) continue;
    for (std::size_t b : bn.parents_[e.source]) {
      const AttackNode& pred = bn.attacks_[b];
      std::vector<double> r(pred.domain.size() * e.domain.size());
      for (std::size_t m = 0; m < pred.domain.size(); ++m)
        for (std::size_t p = 0; p < e.domain.size(); ++p)
          r[m * e.domain.size() + p] = infection_prob(pred.domain[m], e.domain[p], tables, p_avg);
      e.second_order.emplace_back(b, std::move(r));
    }
  }

  bn.ancestor_.assign(h, false);
  std::vector<std::size_t> stack{bn.target_};
  bn.ancestor_[bn.target_] = true;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t e : bn.parents_[u]) {
      const std::size_t s = bn.attacks_[e].source;
      if (!bn.ancestor_[s]) {
        bn.ancestor_[s] = true;
        stack.push_back(s);
      }
    }
  }
  return bn;
}

// ---------------------------------------------------------------------------
// Inference

enum class Method { automatic, exact, sample, factored };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::automatic: return "auto";
    case Method::exact: return "exact";
    case Method::sample: return "sample";
    case Method::factored: return "factored";
  }
  return "auto";
}

struct InferenceOptions {
  Method method = Method::automatic;
  std::size_t samples = 100000;
  std::uint64_t seed = 42;
  unsigned threads = 1;
  double guard = 1e7;
};

/// Per-host compromise marginals with (p) and without (p_prime) similarity
/// reuse. Hosts that cannot influence the target are NaN.
struct InferenceResult {
  Method method = Method::exact;
  std::vector<double> p;
  std::vector<double> p_prime;
  std::size_t samples = 0;
  std::vector<double> se;
  std::vector<double> se_prime;
};

namespace detail {

/// Hosts of the target's ancestor set grouped by layer.
inline std::vector<std::vector<std::size_t>> ancestor_layers(const BayesNet& bn) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t k = 0; k < bn.host_count(); ++k) {
    if (!bn.ancestors()[k]) continue;
    const std::size_t l = bn.layers()[k];
    if (out.size() <= l) out.resize(l + 1);
    out[l].push_back(k);
  }
  return out;
}

/// Layered variable elimination for one CPT family.
inline std::vector<double> exact_marginals(const BayesNet& bn, bool aware, double guard) {
  const auto layers = ancestor_layers(bn);
  std::vector<double> marg(bn.host_count(), std::numeric_limits<double>::quiet_NaN());
  std::vector<std::size_t> values(bn.attack_nodes().size(), 0);
  for (std::size_t a = 0; a < values.size(); ++a) values[a] = bn.attack(a).none();

  // Frontier: joint over (attack nodes into the layer, host states of the
  // layer), keyed by a mixed-radix index.
  std::vector<std::size_t> in_edges;  // attack nodes into current layer
  std::vector<std::size_t> hosts = layers.empty() ? std::vector<std::size_t>{} : layers[0];
  std::map<std::uint64_t, double> frontier;
  {
    const std::size_t m = hosts.size();
    if (std::ldexp(1.0, static_cast<int>(m)) > guard)
      fail(ErrorKind::refusal, "exact inference exceeds the state guard; use sampling");
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << m); ++bits) {
      double w = 1.0;
      for (std::size_t i = 0; i < m; ++i) w *= (bits >> i & 1) ? bn.prior(hosts[i]) : 1.0 - bn.prior(hosts[i]);
      if (w > 0.0) frontier[bits] = w;
    }
  }
  auto record = [&](const std::vector<std::size_t>& hs, std::size_t offset_bits_base,
                    const std::map<std::uint64_t, double>& f) {
    for (std::size_t i = 0; i < hs.size(); ++i) {
      double s = 0.0;
      for (const auto& [key, w] : f)
        if ((key / offset_bits_base) >> i & 1) s += w;
      marg[hs[i]] = s;
    }
  };
  auto radix_of = [&](const std::vector<std::size_t>& edges) {
    std::uint64_t r = 1;
    for (std::size_t a : edges) r *= bn.attack(a).domain.size() + 1;
    return r;
  };
  record(hosts, 1, frontier);

  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const auto& next_hosts = layers[l + 1];
    std::vector<std::size_t> next_edges;
    for (std::size_t k : next_hosts)
      for (std::size_t a : bn.parents(k)) next_edges.push_back(a);
    const double combos = static_cast<double>(radix_of(next_edges));
    const double work = static_cast<double>(frontier.size()) * combos *
                        std::ldexp(1.0, static_cast<int>(next_hosts.size()));
    if (work > guard)
      fail(ErrorKind::refusal, "exact inference exceeds the state guard (" + std::to_string(work) +
                                   " joint states); use sampling");

    const std::uint64_t in_radix = radix_of(in_edges);
    const std::uint64_t out_radix = radix_of(next_edges);
    std::map<std::uint64_t, double> next;
    std::vector<std::size_t> host_pos(bn.host_count(), 0);
    for (std::size_t i = 0; i < hosts.size(); ++i) host_pos[hosts[i]] = i;

    for (const auto& [key, w] : frontier) {
      // Decode the current frontier state.
      std::uint64_t rest = key % in_radix;
      for (std::size_t a : in_edges) {
        const std::uint64_t r = bn.attack(a).domain.size() + 1;
        values[a] = static_cast<std::size_t>(rest % r);
        rest /= r;
      }
      const std::uint64_t bits = key / in_radix;

      // Enumerate attack-node values for edges into the next layer.
      std::vector<std::vector<double>> dist;
      for (std::size_t a : next_edges)
        dist.push_back(bn.attack_cpt(a, bits >> host_pos[bn.attack(a).source] & 1));
      std::vector<std::size_t> pick(next_edges.size(), 0);
      while (true) {
        double we = w;
        std::uint64_t ekey = 0, mult = 1;
        for (std::size_t i = 0; i < next_edges.size(); ++i) {
          we *= dist[i][pick[i]];
          values[next_edges[i]] = pick[i];
          ekey += pick[i] * mult;
          mult *= dist[i].size();
        }
        if (we > 0.0) {
          std::vector<double> pt(next_hosts.size());
          for (std::size_t i = 0; i < next_hosts.size(); ++i) pt[i] = bn.host_cpt(next_hosts[i], aware, values);
          for (std::uint64_t hb = 0; hb < (std::uint64_t{1} << next_hosts.size()); ++hb) {
            double wh = we;
            for (std::size_t i = 0; i < next_hosts.size(); ++i) wh *= (hb >> i & 1) ? pt[i] : 1.0 - pt[i];
            if (wh > 0.0) next[ekey + hb * out_radix] += wh;
          }
        }
        std::size_t i = 0;
        for (; i < pick.size(); ++i) {
          if (++pick[i] < dist[i].size()) break;
          pick[i] = 0;
        }
        if (i == pick.size()) break;
      }
    }
    frontier = std::move(next);
    in_edges = std::move(next_edges);
    hosts = next_hosts;
    record(hosts, out_radix, frontier);
  }
  return marg;
}

/// Layer-by-layer propagation of per-host marginals and per-edge joint
/// (exploited product, destination compromised) masses. Exact on trees.
inline std::pair<std::vector<double>, std::vector<double>> factored_marginals(const BayesNet& bn) {
  const auto layers = ancestor_layers(bn);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> pi(bn.host_count(), nan), pi_prime(bn.host_count(), nan);
  std::vector<std::vector<double>> joint(bn.attack_nodes().size());
  const double p_avg = bn.p_avg();
  for (const auto& layer : layers) {
    for (std::size_t k : layer) {
      if (bn.is_root(k)) {
        pi[k] = pi_prime[k] = bn.prior(k);
        continue;
      }
      const auto& par = bn.parents(k);
      std::vector<std::vector<double>> S(par.size());
      std::vector<double> beta(par.size(), 0.0);
      double miss_prime = 1.0;
      for (std::size_t i = 0; i < par.size(); ++i) {
        const AttackNode& e = bn.attack(par[i]);
        const std::size_t j = e.source;
        const std::size_t X = e.domain.size();
        S[i].assign(X, 1.0);
        if (X == 0) continue;
        miss_prime *= 1.0 - pi_prime[j] * p_avg;
        if (!(pi[j] > 0.0)) continue;
        for (std::size_t p = 0; p < X; ++p) {
          if (bn.is_root(j)) {
            S[i][p] = 1.0 - p_avg;
            continue;
          }
          double s = 1.0;
          for (const auto& [b, r] : e.second_order) {
            const auto& jb = joint[b];
            double hit = 0.0;
            for (std::size_t m = 0; m < jb.size(); ++m) hit += jb[m] / pi[j] * r[m * X + p];
            s *= 1.0 - hit;
          }
          S[i][p] = s;
        }
        double sum = 0.0;
        for (double v : S[i]) sum += 1.0 - v;
        beta[i] = pi[j] / static_cast<double>(X) * sum;
      }
      double miss = 1.0;
      for (double b : beta) miss *= 1.0 - b;
      pi[k] = 1.0 - miss;
      pi_prime[k] = 1.0 - miss_prime;
      for (std::size_t i = 0; i < par.size(); ++i) {
        const AttackNode& e = bn.attack(par[i]);
        const std::size_t X = e.domain.size();
        joint[par[i]].assign(X, 0.0);
        if (X == 0 || !(pi[e.source] > 0.0)) continue;
        double others = 1.0;
        for (std::size_t q = 0; q < par.size(); ++q)
          if (q != i) others *= 1.0 - beta[q];
        for (std::size_t p = 0; p < X; ++p)
          joint[par[i]][p] = pi[e.source] / static_cast<double>(X) * (1.0 - S[i][p] * others);
      }
    }
  }
  return {pi, pi_prime};
}

inline double exact_work(const BayesNet& bn) {
  const auto layers = ancestor_layers(bn);
  double frontier = layers.empty() ? 1.0 : std::ldexp(1.0, static_cast<int>(layers[0].size()));
  double worst = frontier;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    double combos = 1.0;
    for (std::size_t k : layers[l + 1])
      for (std::size_t a : bn.parents(k)) combos *= static_cast<double>(bn.attack(a).domain.size() + 1);
    const double next = combos * std::ldexp(1.0, static_cast<int>(layers[l + 1].size()));
    worst = std::max(worst, frontier * next);
    frontier = next;
  }
  return worst;
}

}  // namespace detail

inline InferenceResult infer(const BayesNet& bn, const InferenceOptions& opt = {}) {
  InferenceResult r;
  Method method = opt.method;
  if (method == Method::automatic)
    method = detail::exact_work(bn) <= opt.guard ? Method::exact : Method::factored;
  r.method = method;
  const std::size_t h = bn.host_count();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  switch (method) {
    case Method::exact:
      r.p = detail::exact_marginals(bn, true, opt.guard);
      r.p_prime = detail::exact_marginals(bn, false, opt.guard);
      break;
    case Method::factored:
      std::tie(r.p, r.p_prime) = detail::factored_marginals(bn);
      break;
    case Method::sample: {
      if (opt.samples == 0) fail(ErrorKind::validation, "sample count must be positive");
      const auto layers = detail::ancestor_layers(bn);
      std::vector<std::size_t> order;
      for (const auto& l : layers) order.insert(order.end(), l.begin(), l.end());
      constexpr std::size_t kChunk = 10000;
      const std::size_t chunks = (opt.samples + kChunk - 1) / kChunk;
      std::vector<std::vector<std::uint64_t>> hits(chunks, std::vector<std::uint64_t>(2 * h, 0));
      ThreadPool pool(opt.threads);
      pool.parallel_for(chunks, [&](std::size_t b, std::size_t e) {
        std::vector<std::size_t> values(bn.attack_nodes().size());
        std::vector<char> state(h);
        for (std::size_t c = b; c < e; ++c) {
          Rng rng(derive_seed(derive_seed(opt.seed, "bn-sample"), c));
          const std::size_t n = std::min(kChunk, opt.samples - c * kChunk);
          for (std::size_t s = 0; s < n; ++s) {
            for (int world = 0; world < 2; ++world) {
              for (std::size_t k : order) {
                double pk;
                if (bn.is_root(k)) {
                  pk = bn.prior(k);
                } else {
                  for (std::size_t a : bn.parents(k)) {
                    const AttackNode& ed = bn.attack(a);
                    values[a] = state[ed.source] && !ed.domain.empty()
                                    ? static_cast<std::size_t>(rng.below(ed.domain.size()))
                                    : ed.none();
                  }
                  pk = bn.host_cpt(k, world == 0, values);
                }
                state[k] = rng.bernoulli(pk);
                if (state[k]) ++hits[c][world * h + k];
              }
            }
          }
        }
      });
      r.samples = opt.samples;
      r.p.assign(h, nan);
      r.p_prime.assign(h, nan);
      r.se.assign(h, nan);
      r.se_prime.assign(h, nan);
      const double n = static_cast<double>(opt.samples);
      for (std::size_t k : order) {
        std::uint64_t a = 0, b = 0;
        for (const auto& c : hits) {
          a += c[k];
          b += c[h + k];
        }
        r.p[k] = static_cast<double>(a) / n;
        r.p_prime[k] = static_cast<double>(b) / n;
        r.se[k] = std::sqrt(r.p[k] * (1.0 - r.p[k]) / n);
        r.se_prime[k] = std::sqrt(r.p_prime[k] * (1.0 - r.p_prime[k]) / n);
      }
      break;
    }
    case Method::automatic:
      break;
  }
  return r;
}

/// d_bn = P'(target) / P(target).
inline double diversity_metric(const InferenceResult& r, std::size_t target) {
  const double p = r.p.at(target);
  const double q = r.p_prime.at(target);
  if (std::isnan(p) || std::isnan(q)) fail(ErrorKind::undefined, "target marginal not computed");
  if (!(p > 0.0)) fail(ErrorKind::undefined, "target compromise probability is zero");
  return q / p;
}

/// d_bn from base-10 log marginals.
inline double diversity_from_logs(double log10_p_prime, double log10_p) {
  return std::pow(10.0, log10_p_prime - log10_p);
}

}  // namespace divnet
