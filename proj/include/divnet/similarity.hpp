#pragma once

// Vulnerability catalogs, Jaccard similarity between products, and the
// per-service similarity tables that drive the optimizer.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "divnet/error.hpp"

namespace divnet {

inline std::string fold(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

struct ProductId {
  std::string service;
  std::string name;

  friend bool operator==(const ProductId& a, const ProductId& b) {
    return fold(a.service) == fold(b.service) && fold(a.name) == fold(b.name);
  }
};

// ---------------------------------------------------------------------------
// CPE matching

/// Splits a CPE 2.2 URI ("cpe:/a:vendor:product:version") or CPE 2.3
/// formatted string ("cpe:2.3:a:vendor:product:...") into case-folded
/// components, dropping trailing ANY ("*" or empty) components. Strings that
/// are not CPEs become a single component.
inline std::vector<std::string> cpe_components(std::string_view cpe) {
  std::string s = fold(cpe);
  std::string_view body;
  if (s.rfind("cpe:2.3:", 0) == 0) {
    body = std::string_view(s).substr(8);
  } else if (s.rfind("cpe:/", 0) == 0) {
    body = std::string_view(s).substr(5);
  } else {
    return {s};
  }
  std::vector<std::string> parts;
  std::string cur;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '\\' && i + 1 < body.size()) {
      cur += body[++i];
    } else if (c == ':') {
      parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(std::move(cur));
  while (!parts.empty() && (parts.back() == "*" || parts.back().empty())) parts.pop_back();
  return parts;
}

/// Component-wise prefix match: every filter component must equal the entry's
/// component at the same position, where "*" on either side (or a missing
/// entry component) matches anything. In exact mode both must have the same
/// components.
inline bool cpe_matches(const std::vector<std::string>& filter,
                        const std::vector<std::string>& entry, bool exact) {
  if (exact) return filter == entry;
  for (std::size_t i = 0; i < filter.size(); ++i) {
    const std::string& f = filter[i];
    if (i >= entry.size()) return true;
    const std::string& e = entry[i];
    if (f == "*" || e == "*" || f.empty() || e.empty()) continue;
    if (f != e) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Catalog

inline bool is_cve_id(std::string_view id) {
  static const std::regex pattern(R"(CVE-\d{4}-\d{4,})", std::regex::icase);
  return std::regex_match(id.begin(), id.end(), pattern);
}

/// Product -> sorted, deduplicated set of CVE ids.
class VulnCatalog {
 public:
  VulnCatalog() = default;

  std::string source_meta;

  void add_product(const ProductId& p) {
    if (find(p.name)) return;
    index_.emplace(fold(p.name), products_.size());
    products_.push_back(p);
    sets_.emplace_back();
  }

  void add_vulnerability(const ProductId& p, const std::string& cve) {
    if (!is_cve_id(cve)) fail(ErrorKind::validation, "not a CVE identifier: '" + cve + "'");
    add_product(p);
    auto& set = sets_[*find(p.name)];
    const std::string id = upper(cve);
    auto it = std::lower_bound(set.begin(), set.end(), id);
    if (it == set.end() || *it != id) set.insert(it, id);
  }

  const std::vector<ProductId>& products() const noexcept { return products_; }

  bool contains(std::string_view name) const { return find(name).has_value(); }

  const std::vector<std::string>& vulnerabilities(std::string_view name) const {
    const auto i = find(name);
    if (!i) fail(ErrorKind::lookup, "product not in catalog: '" + std::string(name) + "'");
    return sets_[*i];
  }

  const ProductId& product(std::string_view name) const {
    const auto i = find(name);
    if (!i) fail(ErrorKind::lookup, "product not in catalog: '" + std::string(name) + "'");
    return products_[*i];
  }

 private:
  static std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return s;
  }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = index_.find(fold(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<ProductId> products_;
  std::vector<std::vector<std::string>> sets_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Feed ingestion

enum class FeedFormat { automatic, cve_map, nvd_json };

struct IngestOptions {
  FeedFormat format = FeedFormat::automatic;
  bool exact_match = false;
};

namespace detail {

inline std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

inline void collect_nvd_cpes(const nlohmann::json& node, std::vector<std::string>& out) {
  if (!node.is_object()) return;
  if (auto it = node.find("cpe_match"); it != node.end() && it->is_array()) {
    for (const auto& m : *it) {
      if (!m.is_object()) continue;
      for (const char* key : {"cpe23Uri", "cpeUri"}) {
        if (auto u = m.find(key); u != m.end() && u->is_string()) out.push_back(u->get<std::string>());
      }
    }
  }
  if (auto it = node.find("children"); it != node.end() && it->is_array()) {
    for (const auto& child : *it) collect_nvd_cpes(child, out);
  }
}

}  // namespace detail

/// Reads a vulnerability feed and keeps the vulnerabilities of the filtered
/// products. Every filtered product appears in the result, possibly with an
/// empty set.
inline VulnCatalog ingest_feed(std::string_view feed, const std::vector<ProductId>& filter,
                               const IngestOptions& options = {}) {
  using nlohmann::json;
  if (filter.empty()) fail(ErrorKind::validation, "product filter is empty");

  json doc;
  try {
    doc = json::parse(feed.begin(), feed.end());
  } catch (const json::parse_error& e) {
    fail(ErrorKind::parse, "feed line " + std::to_string(detail::line_of(feed, e.byte)) +
                               " (byte " + std::to_string(e.byte) + "): " + e.what());
  }

  FeedFormat format = options.format;
  if (format == FeedFormat::automatic) {
    if (doc.is_object() && doc.contains("CVE_Items")) {
      format = FeedFormat::nvd_json;
    } else if (doc.is_object()) {
      format = FeedFormat::cve_map;
    } else {
      fail(ErrorKind::format, "unrecognized feed format: top level must be a JSON object");
    }
  }

  // (cve id, cpe strings) per record, in feed order.
  std::vector<std::pair<std::string, std::vector<std::string>>> records;
  if (format == FeedFormat::cve_map) {
    if (!doc.is_object()) fail(ErrorKind::format, "CVE-map feed must be a JSON object");
    std::size_t n = 0;
    for (const auto& [id, cpes] : doc.items()) {
      ++n;
      if (!is_cve_id(id))
        fail(ErrorKind::parse, "record " + std::to_string(n) + ": bad CVE id '" + id + "'");
      if (!cpes.is_array())
        fail(ErrorKind::parse, "record " + std::to_string(n) + " (" + id + "): expected array");
      std::vector<std::string> list;
      for (const auto& c : cpes) {
        if (!c.is_string())
          fail(ErrorKind::parse,
               "record " + std::to_string(n) + " (" + id + "): CPE entries must be strings");
        list.push_back(c.get<std::string>());
      }
      records.emplace_back(id, std::move(list));
    }
  } else {
    const auto items = doc.find("CVE_Items");
    if (items == doc.end() || !items->is_array())
      fail(ErrorKind::format, "NVD feed without a CVE_Items array");
    std::size_t n = 0;
    for (const auto& item : *items) {
      ++n;
      const json* id = nullptr;
      if (item.is_object() && item.contains("cve") && item["cve"].is_object() &&
          item["cve"].contains("CVE_data_meta") && item["cve"]["CVE_data_meta"].is_object()) {
        auto it = item["cve"]["CVE_data_meta"].find("ID");
        if (it != item["cve"]["CVE_data_meta"].end()) id = &*it;
      }
      if (!id || !id->is_string() || !is_cve_id(id->get<std::string>()))
        fail(ErrorKind::parse, "CVE_Items record " + std::to_string(n) +
                                   ": missing or invalid cve.CVE_data_meta.ID");
      std::vector<std::string> list;
      if (auto cfg = item.find("configurations"); cfg != item.end() && cfg->is_object()) {
        if (auto nodes = cfg->find("nodes"); nodes != cfg->end() && nodes->is_array()) {
          for (const auto& node : *nodes) detail::collect_nvd_cpes(node, list);
        }
      }
      records.emplace_back(id->get<std::string>(), std::move(list));
    }
  }

  VulnCatalog catalog;
  std::vector<std::vector<std::string>> filter_parts;
  for (const auto& p : filter) {
    if (p.name.empty()) fail(ErrorKind::validation, "empty product identifier in filter");
    catalog.add_product(p);
    filter_parts.push_back(cpe_components(p.name));
  }
  for (const auto& [id, cpes] : records) {
    for (const auto& cpe : cpes) {
      const auto parts = cpe_components(cpe);
      for (std::size_t i = 0; i < filter.size(); ++i) {
        if (cpe_matches(filter_parts[i], parts, options.exact_match))
          catalog.add_vulnerability(filter[i], id);
      }
    }
  }
  catalog.source_meta = format == FeedFormat::cve_map ? "cve-map feed" : "nvd-json feed";
  return catalog;
}

// ---------------------------------------------------------------------------
// Jaccard

struct OverlapCounts {
  std::size_t shared = 0;
  std::size_t total_a = 0;
  std::size_t total_b = 0;
};

/// Counts shared elements of two sorted ranges.
template <class RangeA, class RangeB>
OverlapCounts overlap(const RangeA& a, const RangeB& b) {
  OverlapCounts c{0, static_cast<std::size_t>(std::size(a)), static_cast<std::size_t>(std::size(b))};
  auto ia = std::begin(a);
  auto ib = std::begin(b);
  while (ia != std::end(a) && ib != std::end(b)) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++c.shared;
      ++ia;
      ++ib;
    }
  }
  return c;
}

/// |A ∩ B| / |A ∪ B|; 0 when both are empty.
inline double jaccard(const OverlapCounts& c) {
  const std::size_t uni = c.total_a + c.total_b - c.shared;
  return uni == 0 ? 0.0 : static_cast<double>(c.shared) / static_cast<double>(uni);
}

/// Similarity of two catalog products. Identical products are 1 by
/// convention, even when their recorded set is empty.
inline double jaccard(const VulnCatalog& catalog, std::string_view a, std::string_view b) {
  const auto& va = catalog.vulnerabilities(a);
  const auto& vb = catalog.vulnerabilities(b);
  if (fold(a) == fold(b)) return 1.0;
  return jaccard(overlap(va, vb));
}

// ---------------------------------------------------------------------------
// Similarity tables

class SimilarityTable {
 public:
  struct Counts {
    std::vector<std::size_t> shared;  // n*n
    std::vector<std::size_t> totals;  // n
  };

  SimilarityTable() = default;

  /// Identity table (all off-diagonal similarities 0).
  SimilarityTable(std::string service, std::vector<std::string> products)
      : service_(std::move(service)), products_(std::move(products)) {
    const std::size_t n = products_.size();
    values_.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) values_[i * n + i] = 1.0;
    reindex();
  }

  const std::string& service() const noexcept { return service_; }
  const std::vector<std::string>& products() const noexcept { return products_; }
  std::size_t size() const noexcept { return products_.size(); }
  const std::optional<Counts>& counts() const noexcept { return counts_; }

  double at(std::size_t i, std::size_t j) const { return values_[i * size() + j]; }

  /// Sets both (i,j) and (j,i).
  void set(std::size_t i, std::size_t j, double v) {
    values_[i * size() + j] = v;
    values_[j * size() + i] = v;
  }

  void set_counts(Counts c) { counts_ = std::move(c); }

  std::optional<std::size_t> index_of(std::string_view product) const {
    auto it = index_.find(fold(product));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  double similarity(std::string_view a, std::string_view b) const {
    const auto i = index_of(a);
    const auto j = index_of(b);
    if (!i || !j) {
      if (fold(a) == fold(b)) return 1.0;
      fail(ErrorKind::lookup, "no similarity entry for (" + std::string(a) + ", " +
                                  std::string(b) + ") in service '" + service_ + "'");
    }
    return at(*i, *j);
  }

  /// Lists every invariant violation; empty when the table is well-formed.
  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    const std::size_t n = size();
    if (values_.size() != n * n) {
      out.push_back("matrix is not " + std::to_string(n) + "x" + std::to_string(n));
      return out;
    }
    if (index_.size() != n) out.push_back("duplicate product names");
    for (std::size_t i = 0; i < n; ++i) {
      if (at(i, i) != 1.0) out.push_back("diagonal entry for '" + products_[i] + "' is not 1");
      for (std::size_t j = 0; j < n; ++j) {
        const double v = at(i, j);
        if (!(v >= 0.0 && v <= 1.0))
          out.push_back("range: value for (" + products_[i] + ", " + products_[j] +
                        ") outside [0,1]");
        if (j > i && v != at(j, i))
          out.push_back("symmetry: (" + products_[i] + ", " + products_[j] + ") differs");
      }
    }
    if (counts_) {
      if (counts_->shared.size() != n * n || counts_->totals.size() != n) {
        out.push_back("count matrices have the wrong shape");
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) {
            const std::size_t s = counts_->shared[i * n + j];
            const OverlapCounts c{s, counts_->totals[i], counts_->totals[j]};
            if (s > std::min(c.total_a, c.total_b))
              out.push_back("counts: shared exceeds a total for (" + products_[i] + ", " +
                            products_[j] + ")");
            else if (std::abs(jaccard(c) - at(i, j)) > 1e-9)
              out.push_back("counts: similarity for (" + products_[i] + ", " + products_[j] +
                            ") disagrees with its counts");
          }
        }
      }
    }
    return out;
  }

 private:
  friend SimilarityTable build_table(const VulnCatalog&, const std::string&,
                                     const std::vector<std::string>&);
  friend SimilarityTable table_from_json(const nlohmann::json&);

  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < products_.size(); ++i) index_.emplace(fold(products_[i]), i);
  }

  std::string service_;
  std::vector<std::string> products_;
  std::vector<double> values_;
  std::optional<Counts> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline SimilarityTable build_table(const VulnCatalog& catalog, const std::string& service,
                                   const std::vector<std::string>& products) {
  if (products.empty()) fail(ErrorKind::validation, "no products given for the table");
  for (const auto& p : products) {
    const ProductId& id = catalog.product(p);
    if (fold(id.service) != fold(service))
      fail(ErrorKind::validation,
           "product '" + p + "' belongs to service '" + id.service + "', not '" + service + "'");
  }
  SimilarityTable t(service, products);
  if (t.index_.size() != products.size()) fail(ErrorKind::validation, "duplicate product in list");
  const std::size_t n = products.size();
  SimilarityTable::Counts counts{std::vector<std::size_t>(n * n, 0), std::vector<std::size_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto& vi = catalog.vulnerabilities(products[i]);
    counts.totals[i] = vi.size();
    counts.shared[i * n + i] = vi.size();
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto c = overlap(vi, catalog.vulnerabilities(products[j]));
      counts.shared[i * n + j] = counts.shared[j * n + i] = c.shared;
      t.set(i, j, jaccard(c));
    }
  }
  t.set_counts(std::move(counts));
  return t;
}

// ---------------------------------------------------------------------------
// CSV persistence

inline constexpr std::string_view kTableCsvHeader =
    "service,product_a,product_b,similarity,shared,total_a,total_b";

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// One row per unordered pair, diagonal included; similarity printed with 17
/// significant digits so that loading reproduces the table bit-exactly.
inline void save_table(const SimilarityTable& t, std::ostream& out) {
  out << kTableCsvHeader << '\n';
  const std::size_t n = t.size();
  const auto& c = t.counts();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      out << detail::csv_field(t.service()) << ',' << detail::csv_field(t.products()[i]) << ','
          << detail::csv_field(t.products()[j]) << ',' << detail::format_double(t.at(i, j)) << ',';
      if (c) out << c->shared[i * n + j] << ',' << c->totals[i] << ',' << c->totals[j];
      else out << ",,";
      out << '\n';
    }
  }
}

/// Loads every table in a CSV stream (one per distinct service column).
inline std::vector<SimilarityTable> load_tables(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::format, "table CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTableCsvHeader)
    fail(ErrorKind::format, "table CSV header must be '" + std::string(kTableCsvHeader) + "'");

  struct Cell {
    double value;
    std::optional<std::size_t> shared, total_a, total_b;
  };
  struct Pending {
    std::string service;
    std::vector<std::string> products;
    std::map<std::string, std::size_t> index;
    std::map<std::pair<std::size_t, std::size_t>, Cell> cells;
  };
  std::vector<Pending> pending;
  std::map<std::string, std::size_t> by_service;

  auto parse_count = [](const std::string& s, std::size_t row,
                        const char* field) -> std::optional<std::size_t> {
    if (s.empty()) return std::nullopt;
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(s, &pos);
      if (pos != s.size() || v < 0) throw std::invalid_argument(s);
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      fail(ErrorKind::format, "row " + std::to_string(row) + ": field '" + field +
                                  "' is not a non-negative integer");
    }
  };

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::csv_split(line);
    const std::string at_row = "row " + std::to_string(row) + ": ";
    if (f.size() != 7) fail(ErrorKind::format, at_row + "expected 7 fields");
    if (f[0].empty()) fail(ErrorKind::format, at_row + "field 'service' is empty");
    if (f[1].empty()) fail(ErrorKind::format, at_row + "field 'product_a' is empty");
    if (f[2].empty()) fail(ErrorKind::format, at_row + "field 'product_b' is empty");
    Cell cell{};
    try {
      std::size_t pos = 0;
      cell.value = std::stod(f[3], &pos);
      if (pos != f[3].size()) throw std::invalid_argument(f[3]);
    } catch (const std::exception&) {
      fail(ErrorKind::format, at_row + "field 'similarity' is not a number");
    }
    if (!(cell.value >= 0.0 && cell.value <= 1.0))
      fail(ErrorKind::format,
           "range error at " + at_row + "field 'similarity' = " + f[3] + " outside [0,1]");
    cell.shared = parse_count(f[4], row, "shared");
    cell.total_a = parse_count(f[5], row, "total_a");
    cell.total_b = parse_count(f[6], row, "total_b");

    auto [sit, fresh] = by_service.emplace(fold(f[0]), pending.size());
    if (fresh) pending.push_back(Pending{f[0], {}, {}, {}});
    Pending& p = pending[sit->second];
    auto intern = [&p](const std::string& name) {
      auto [it, added] = p.index.emplace(fold(name), p.products.size());
      if (added) p.products.push_back(name);
      return it->second;
    };
    const std::size_t a = intern(f[1]);
    const std::size_t b = intern(f[2]);
    if (a == b && cell.value != 1.0)
      fail(ErrorKind::format, at_row + "diagonal similarity must be 1");
    if (!p.cells.emplace(std::make_pair(a, b), cell).second)
      fail(ErrorKind::format, at_row + "duplicate pair");
    if (a != b) {
      auto mirror = p.cells.find({b, a});
      if (mirror != p.cells.end() && mirror->second.value != cell.value)
        fail(ErrorKind::format, "symmetry error at " + at_row + "(" + f[1] + ", " + f[2] +
                                    ") differs from its mirror");
    }
  }

  std::vector<SimilarityTable> tables;
  for (Pending& p : pending) {
    const std::size_t n = p.products.size();
    SimilarityTable t(p.service, p.products);
    bool all_counts = true;
    SimilarityTable::Counts counts{std::vector<std::size_t>(n * n, 0),
                                   std::vector<std::size_t>(n, 0)};
    std::vector<bool> total_seen(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const Cell* c = nullptr;
        bool flipped = false;
        if (auto it = p.cells.find({i, j}); it != p.cells.end()) {
          c = &it->second;
        } else if (auto it2 = p.cells.find({j, i}); it2 != p.cells.end()) {
          c = &it2->second;
          flipped = true;
        }
        if (!c) {
          if (i == j) {
            all_counts = false;
            continue;
          }
          fail(ErrorKind::format, "service '" + p.service + "': missing row for pair (" +
                                      p.products[i] + ", " + p.products[j] + ")");
        }
        if (i != j) t.set(i, j, c->value);
        if (!c->shared || !c->total_a || !c->total_b) {
          all_counts = false;
          continue;
        }
        const std::size_t ti = flipped ? *c->total_b : *c->total_a;
        const std::size_t tj = flipped ? *c->total_a : *c->total_b;
        counts.shared[i * n + j] = counts.shared[j * n + i] = *c->shared;
        for (auto [k, tot] : {std::pair{i, ti}, std::pair{j, tj}}) {
          if (total_seen[k] && counts.totals[k] != tot)
            fail(ErrorKind::format, "service '" + p.service + "': inconsistent total_a/total_b for '" +
                                        p.products[k] + "'");
          counts.totals[k] = tot;
          total_seen[k] = true;
        }
      }
    }
    if (all_counts) t.set_counts(std::move(counts));
    if (auto v = t.violations(); !v.empty()) fail(ErrorKind::format, v.front());
    tables.push_back(std::move(t));
  }
  return tables;
}

/// Loads a stream that must hold exactly one table.
inline SimilarityTable load_table(std::istream& in) {
  auto tables = load_tables(in);
  if (tables.size() != 1)
    fail(ErrorKind::format, "expected one service in table CSV, found " + std::to_string(tables.size()));
  return std::move(tables.front());
}

/// Inline table form used in scenario files:
/// {"service": s, "products": [...], "values": [[...], ...]}.
inline SimilarityTable table_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::format, "inline table must be an object");
  for (const char* key : {"service", "products", "values"})
    if (!j.contains(key)) fail(ErrorKind::format, std::string("inline table lacks field '") + key + "'");
  if (!j["service"].is_string()) fail(ErrorKind::format, "inline table field 'service' must be a string");
  if (!j["products"].is_array()) fail(ErrorKind::format, "inline table field 'products' must be an array");
  std::vector<std::string> products;
  for (const auto& p : j["products"]) {
    if (!p.is_string()) fail(ErrorKind::format, "inline table field 'products' must hold strings");
    products.push_back(p.get<std::string>());
  }
  SimilarityTable t(j["service"].get<std::string>(), products);
  const auto& values = j["values"];
  const std::size_t n = products.size();
  if (!values.is_array() || values.size() != n)
    fail(ErrorKind::format, "inline table field 'values' must be a " + std::to_string(n) + "x" +
                                std::to_string(n) + " matrix");
  for (std::size_t i = 0; i < n; ++i) {
    if (!values[i].is_array() || values[i].size() != n)
      fail(ErrorKind::format, "inline table field 'values' row " + std::to_string(i) + " has wrong length");
    for (std::size_t k = 0; k < n; ++k) {
      if (!values[i][k].is_number())
        fail(ErrorKind::format, "inline table field 'values' holds a non-number");
      t.values_[i * n + k] = values[i][k].get<double>();
    }
  }
  if (t.index_.size() != n) fail(ErrorKind::format, "inline table has duplicate products");
  if (auto v = t.violations(); !v.empty()) fail(ErrorKind::format, v.front());
  return t;
}

inline nlohmann::json table_to_json(const SimilarityTable& t) {
  nlohmann::json values = nlohmann::json::array();
  for (std::size_t i = 0; i < t.size(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (std::size_t k = 0; k < t.size(); ++k) r.push_back(t.at(i, k));
    values.push_back(std::move(r));
  }
  return {{"service", t.service()}, {"products", t.products()}, {"values", std::move(values)}};
}

/// Similarity tables keyed by service (case-insensitive).
class TableSet {
 public:
  TableSet() = default;
  explicit TableSet(std::vector<SimilarityTable> tables) {
    for (auto& t : tables) add(std::move(t));
  }

  void add(SimilarityTable t) {
    const std::string key = fold(t.service());
    if (index_.count(key)) fail(ErrorKind::validation, "two tables for service '" + t.service() + "'");
    index_.emplace(key, tables_.size());
    tables_.push_back(std::move(t));
  }

  const SimilarityTable* find(std::string_view service) const {
    auto it = index_.find(fold(service));
    return it == index_.end() ? nullptr : &tables_[it->second];
  }

  /// sim(a, b) within a service; identical products are 1 even without a table.
  double similarity(std::string_view service, std::string_view a, std::string_view b) const {
    if (const auto* t = find(service)) return t->similarity(a, b);
    if (fold(a) == fold(b)) return 1.0;
    fail(ErrorKind::lookup, "no similarity table for service '" + std::string(service) + "'");
  }

  const std::vector<SimilarityTable>& tables() const noexcept { return tables_; }

 private:
  std::vector<SimilarityTable> tables_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace divnet
