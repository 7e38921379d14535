#pragma once

// JSON file formats: scenarios, assignments and reports.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "divnet/bayes.hpp"
#include "divnet/error.hpp"
#include "divnet/mrf.hpp"
#include "divnet/netmodel.hpp"
#include "divnet/sim.hpp"
#include "divnet/similarity.hpp"

namespace divnet {

using ojson = nlohmann::ordered_json;

struct Scenario {
  Network network;
  std::vector<Constraint> constraints;
  std::vector<Clamp> clamps;
  TableSet tables;
  std::vector<std::string> warnings;  // unknown keys in lenient mode
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot read '" + path.string() + "'");
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::io, "error reading '" + path.string() + "'");
  return s;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) fail(ErrorKind::io, "error writing '" + path.string() + "'");
}

inline ojson parse_json(const std::string& text, const std::string& what) {
  try {
    return ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    fail(ErrorKind::parse, what + ": " + e.what());
  }
}

namespace detail {

class KeyCheck {
 public:
  KeyCheck(bool strict, std::vector<std::string>& warnings) : strict_(strict), warnings_(warnings) {}

  void check(const ojson& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    for (const auto& [k, v] : obj.items()) {
      bool ok = false;
      for (const char* a : allowed) ok |= k == a;
      if (ok) continue;
      const std::string msg = "unknown key '" + k + "' in " + where;
      if (strict_) fail(ErrorKind::format, msg);
      warnings_.push_back(msg);
    }
  }

 private:
  bool strict_;
  std::vector<std::string>& warnings_;
};

inline const ojson& field(const ojson& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorKind::format, where + " lacks '" + key + "'");
  return *it;
}

inline std::string string_field(const ojson& obj, const char* key, const std::string& where) {
  const ojson& v = field(obj, key, where);
  if (!v.is_string()) fail(ErrorKind::format, where + " field '" + key + "' must be a string");
  return v.get<std::string>();
}

inline ProductId product_ref(const ojson& v, const std::string& where, KeyCheck& keys) {
  if (!v.is_object()) fail(ErrorKind::format, where + " must be an object");
  keys.check(v, {"service", "product"}, where);
  return {string_field(v, "service", where), string_field(v, "product", where)};
}

}  // namespace detail

/// Parses a scenario document. Relative table paths resolve against `base`.
inline Scenario scenario_from_json(const ojson& doc, const std::filesystem::path& base = {}, bool strict = false) {
  using detail::field;
  using detail::string_field;
  Scenario sc;
  detail::KeyCheck keys(strict, sc.warnings);
  if (!doc.is_object()) fail(ErrorKind::format, "scenario must be a JSON object");
  keys.check(doc, {"hosts", "links", "constraints", "clamps", "tables"}, "scenario");

  const ojson& hosts = field(doc, "hosts", "scenario");
  if (!hosts.is_array()) fail(ErrorKind::format, "scenario field 'hosts' must be an array");
  for (std::size_t i = 0; i < hosts.size(); ++i) {
    const std::string where = "hosts[" + std::to_string(i) + "]";
    const ojson& h = hosts[i];
    if (!h.is_object()) fail(ErrorKind::format, where + " must be an object");
    keys.check(h, {"id", "services"}, where);
    sc.network.add_host(string_field(h, "id", where));
  }
  for (std::size_t i = 0; i < hosts.size(); ++i) {
    const std::string where = "hosts[" + std::to_string(i) + "]";
    const ojson& svc = field(hosts[i], "services", where);
    if (!svc.is_object()) fail(ErrorKind::format, where + " field 'services' must be an object");
    for (const auto& [service, products] : svc.items()) {
      if (!products.is_array()) fail(ErrorKind::format, where + " service '" + service + "' must list products");
      std::vector<std::string> names;
      for (const auto& p : products) {
        if (!p.is_string()) fail(ErrorKind::format, where + " service '" + service + "' lists a non-string");
        names.push_back(p.get<std::string>());
      }
      sc.network.set_candidates(sc.network.hosts()[i], service, names);
    }
  }

  if (auto it = doc.find("links"); it != doc.end()) {
    if (!it->is_array()) fail(ErrorKind::format, "scenario field 'links' must be an array");
    for (const auto& l : *it) {
      if (!l.is_array() || l.size() != 2 || !l[0].is_string() || !l[1].is_string())
        fail(ErrorKind::format, "each link must be a pair of host ids");
      sc.network.add_link(l[0].get<std::string>(), l[1].get<std::string>());
    }
  }

  if (auto it = doc.find("constraints"); it != doc.end()) {
    if (!it->is_array()) fail(ErrorKind::format, "scenario field 'constraints' must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string where = "constraints[" + std::to_string(i) + "]";
      const ojson& c = (*it)[i];
      if (!c.is_object()) fail(ErrorKind::format, where + " must be an object");
      keys.check(c, {"scope", "trigger", "consequent", "polarity"}, where);
      Constraint con;
      const std::string scope = c.contains("scope") ? string_field(c, "scope", where) : "ALL";
      if (scope != "ALL") {
        sc.network.require_host(scope);
        con.host = scope;
      }
      con.trigger = detail::product_ref(field(c, "trigger", where), where + ".trigger", keys);
      con.consequent = detail::product_ref(field(c, "consequent", where), where + ".consequent", keys);
      const std::string pol = string_field(c, "polarity", where);
      if (pol == "desirable" || pol == "+")
        con.polarity = Polarity::desirable;
      else if (pol == "undesirable" || pol == "-")
        con.polarity = Polarity::undesirable;
      else
        fail(ErrorKind::format, where + " has unknown polarity '" + pol + "'");
      sc.constraints.push_back(std::move(con));
    }
  }

  if (auto it = doc.find("clamps"); it != doc.end()) {
    if (!it->is_array()) fail(ErrorKind::format, "scenario field 'clamps' must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string where = "clamps[" + std::to_string(i) + "]";
      const ojson& c = (*it)[i];
      if (!c.is_object()) fail(ErrorKind::format, where + " must be an object");
      keys.check(c, {"host", "service", "product"}, where);
      sc.clamps.push_back(
          {string_field(c, "host", where), string_field(c, "service", where), string_field(c, "product", where)});
    }
  }

  if (auto it = doc.find("tables"); it != doc.end()) {
    if (!it->is_array()) fail(ErrorKind::format, "scenario field 'tables' must be an array");
    for (const auto& t : *it) {
      if (t.is_string()) {
        std::filesystem::path p = t.get<std::string>();
        if (p.is_relative()) p = base / p;
        std::istringstream in(read_file(p));
        for (auto& table : load_tables(in)) sc.tables.add(std::move(table));
      } else {
        sc.tables.add(table_from_json(nlohmann::json::parse(t.dump())));
      }
    }
  }
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path, bool strict = false) {
  return scenario_from_json(parse_json(read_file(path), "scenario '" + path.string() + "'"), path.parent_path(),
                            strict);
}

/// Scenario document with inline tables.
inline ojson scenario_to_json(const Network& n, const TableSet& tables, const std::vector<Constraint>& cs = {},
                              const std::vector<Clamp>& clamps = {}) {
  ojson doc;
  ojson hosts = ojson::array();
  for (std::size_t h = 0; h < n.hosts().size(); ++h) {
    ojson svc = ojson::object();
    for (std::size_t s : n.host_slots(h)) {
      ojson products = ojson::array();
      for (const auto& p : n.slot(s).candidates) products.push_back(p.name);
      svc[n.services()[n.slot(s).service]] = std::move(products);
    }
    hosts.push_back({{"id", n.hosts()[h]}, {"services", std::move(svc)}});
  }
  doc["hosts"] = std::move(hosts);
  ojson links = ojson::array();
  for (const auto& l : n.links()) links.push_back({n.hosts()[l.a], n.hosts()[l.b]});
  doc["links"] = std::move(links);
  ojson con = ojson::array();
  for (const auto& c : cs) {
    con.push_back({{"scope", c.host ? *c.host : std::string("ALL")},
                   {"trigger", {{"service", c.trigger.service}, {"product", c.trigger.name}}},
                   {"consequent", {{"service", c.consequent.service}, {"product", c.consequent.name}}},
                   {"polarity", c.polarity == Polarity::desirable ? "desirable" : "undesirable"}});
  }
  doc["constraints"] = std::move(con);
  ojson cl = ojson::array();
  for (const auto& c : clamps) cl.push_back({{"host", c.host}, {"service", c.service}, {"product", c.product}});
  doc["clamps"] = std::move(cl);
  ojson tab = ojson::array();
  for (const auto& t : tables.tables()) tab.push_back(ojson::parse(table_to_json(t).dump()));
  doc["tables"] = std::move(tab);
  return doc;
}

// ---------------------------------------------------------------------------
// Assignments

inline ojson assignment_to_json(const Network& n, const Assignment& a) {
  validate_assignment(n, a);
  ojson out = ojson::object();
  for (std::size_t h = 0; h < n.hosts().size(); ++h) {
    ojson svc = ojson::object();
    for (std::size_t s : n.host_slots(h)) svc[n.services()[n.slot(s).service]] = assigned_product(n, a, s).name;
    out[n.hosts()[h]] = std::move(svc);
  }
  return out;
}

inline Assignment assignment_from_json(const Network& n, const ojson& doc) {
  if (!doc.is_object()) fail(ErrorKind::format, "assignment must be a JSON object");
  std::map<std::string, std::map<std::string, std::string>> names;
  for (const auto& [host, svc] : doc.items()) {
    n.require_host(host);
    if (!svc.is_object()) fail(ErrorKind::format, "assignment entry for '" + host + "' must be an object");
    for (const auto& [service, product] : svc.items()) {
      if (!product.is_string())
        fail(ErrorKind::format, "assignment product for (" + host + ", " + service + ") must be a string");
      names[host][service] = product.get<std::string>();
    }
  }
  return assignment_from_names(n, names);
}

inline Assignment load_assignment(const Network& n, const std::filesystem::path& path) {
  return assignment_from_json(n, parse_json(read_file(path), "assignment '" + path.string() + "'"));
}

// ---------------------------------------------------------------------------
// Reports

namespace detail {

/// JSON number, or null when not finite.
inline ojson json_num(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

}  // namespace detail

inline ojson solve_report_json(const SolveResult& r, bool with_time = true) {
  ojson out;
  out["energy"] = detail::json_num(r.energy);
  out["lower_bound"] = detail::json_num(r.lower_bound);
  out["gap"] = detail::json_num(r.gap);
  out["iterations"] = r.iterations;
  out["converged"] = r.converged;
  if (with_time) out["wall_ms"] = r.wall_ms;
  return out;
}

inline ojson evaluation_json(const BayesNet& bn, const InferenceResult& r) {
  const std::size_t t = bn.target();
  const double p = r.p[t], q = r.p_prime[t];
  ojson out;
  out["target"] = bn.host_names()[t];
  out["method"] = std::string(to_string(r.method));
  if (r.method == Method::sample) {
    out["samples"] = r.samples;
    out["se"] = detail::json_num(r.se[t]);
    out["se_prime"] = detail::json_num(r.se_prime[t]);
  }
  out["p_marginal"] = detail::json_num(p);
  out["p_prime_marginal"] = detail::json_num(q);
  out["log10_p"] = detail::json_num(std::log10(p));
  out["log10_p_prime"] = detail::json_num(std::log10(q));
  out["d_bn"] = p > 0.0 ? detail::json_num(q / p) : ojson(nullptr);
  ojson dropped = ojson::array();
  for (const auto& [a, b] : bn.dropped_edges()) dropped.push_back({a, b});
  out["dropped_edges"] = std::move(dropped);
  return out;
}

inline ojson sim_report_json(const SimReport& r) {
  ojson out;
  out["mttc_mean"] = detail::json_num(r.mttc_mean);
  out["mttc_std"] = detail::json_num(r.mttc_std);
  out["standard_error"] = detail::json_num(r.standard_error());
  out["mean_defined"] = r.mean_defined;
  out["success_count"] = r.success_count;
  out["censored_count"] = r.censored_count;
  out["runs"] = r.ticks.size();
  out["seed"] = r.seed;
  ojson ticks = ojson::array();
  for (const auto& t : r.ticks) ticks.push_back(t ? ojson(*t) : ojson(nullptr));
  out["ticks"] = std::move(ticks);
  return out;
}

}  // namespace divnet
