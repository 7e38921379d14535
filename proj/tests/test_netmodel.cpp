#include <gtest/gtest.h>

#include <filesystem>

#include "divnet/random.hpp"
#include "divnet/scenario.hpp"

using namespace divnet;

namespace {

Network two_hosts() {
  Network n;
  n.add_host("h1");
  n.add_host("h2");
  n.set_candidates("h1", "OS", {"Ubuntu14.04", "Windows7", "Debian8.0"});
  n.set_candidates("h1", "WB", {"IE10", "Chrome50"});
  n.set_candidates("h2", "OS", {"Ubuntu14.04", "Windows7"});
  n.set_candidates("h2", "WB", {"IE10", "Chrome50"});
  n.add_link("h1", "h2");
  return n;
}

Assignment pick(const Network& n, const std::map<std::string, std::map<std::string, std::string>>& names) {
  return assignment_from_names(n, names);
}

/// Direct evaluation of the conditional rule for every (constraint, host) pair.
std::vector<ConstraintViolation> oracle_violations(const Network& n, const Assignment& a,
                                                   const std::vector<Constraint>& cs) {
  std::vector<ConstraintViolation> out;
  for (std::size_t ci = 0; ci < cs.size(); ++ci) {
    for (std::size_t h = 0; h < n.hosts().size(); ++h) {
      if (cs[ci].host && *cs[ci].host != n.hosts()[h]) continue;
      std::string t, q;
      bool has_t = false, has_q = false;
      for (std::size_t s : n.host_slots(h)) {
        const std::string& svc = n.services()[n.slot(s).service];
        if (svc == cs[ci].trigger.service) {
          t = assigned_product(n, a, s).name;
          has_t = true;
        }
        if (svc == cs[ci].consequent.service) {
          q = assigned_product(n, a, s).name;
          has_q = true;
        }
      }
      if (!has_t || !has_q || t != cs[ci].trigger.name) continue;
      const bool broken = cs[ci].polarity == Polarity::undesirable ? q == cs[ci].consequent.name
                                                                    : q != cs[ci].consequent.name;
      if (broken) out.push_back({ci, h});
    }
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Validation

TEST(Network, WellFormedHasNoViolations) { EXPECT_TRUE(validate_network(two_hosts()).empty()); }

TEST(Network, SelfLoop) {
  Network n = two_hosts();
  n.add_link("h1", "h1");
  const auto v = validate_network(n);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::self_loop);
  EXPECT_NE(v[0].locus.find("h1"), std::string::npos);
}

TEST(Network, EmptyCandidates) {
  Network n = two_hosts();
  n.set_candidates("h1", "OS", {});
  const auto v = validate_network(n);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::empty_candidates);
  EXPECT_EQ(v[0].locus, "(h1, OS)");
}

TEST(Network, DuplicateAndDanglingLinks) {
  Network n = two_hosts();
  n.add_link("h2", "h1");
  n.add_link(0, 7);
  const auto v = validate_network(n);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].kind, Violation::Kind::duplicate_link);
  EXPECT_EQ(v[1].kind, Violation::Kind::dangling_link);
}

TEST(Network, ServiceMismatch) {
  Network n = two_hosts();
  n.set_candidates(0, *n.service_index("OS"), {{"WB", "Chrome50"}});
  const auto v = validate_network(n);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::service_mismatch);
}

TEST(Network, HostsMayLackServices) {
  Network n;
  n.add_host("a");
  n.add_host("b");
  n.set_candidates("a", "OS", {"x"});
  n.set_candidates("b", "WB", {"y"});
  n.add_link("a", "b");
  EXPECT_TRUE(validate_network(n).empty());
}

TEST(Network, DuplicateHostRejected) {
  Network n;
  n.add_host("a");
  EXPECT_THROW(n.add_host("a"), Error);
}

// ---------------------------------------------------------------------------
// Constraints

TEST(Constraints, GlobalUndesirableFires) {
  const Network n = two_hosts();
  const std::vector<Constraint> cs{{std::nullopt, {"OS", "Ubuntu14.04"}, {"WB", "IE10"}, Polarity::undesirable}};
  const auto a = pick(n, {{"h1", {{"OS", "Windows7"}, {"WB", "IE10"}}}, {"h2", {{"OS", "Ubuntu14.04"}, {"WB", "IE10"}}}});
  const auto v = check_constraints(n, a, cs);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], (ConstraintViolation{0, 1}));
}

TEST(Constraints, InactiveTrigger) {
  const Network n = two_hosts();
  const std::vector<Constraint> cs{{std::nullopt, {"OS", "Ubuntu14.04"}, {"WB", "IE10"}, Polarity::undesirable}};
  const auto a = pick(n, {{"h1", {{"OS", "Windows7"}, {"WB", "IE10"}}}, {"h2", {{"OS", "Windows7"}, {"WB", "IE10"}}}});
  EXPECT_TRUE(check_constraints(n, a, cs).empty());
}

TEST(Constraints, LocalDesirable) {
  const Network n = two_hosts();
  const std::vector<Constraint> cs{{"h1", {"OS", "Debian8.0"}, {"WB", "Chrome50"}, Polarity::desirable}};
  auto a = pick(n, {{"h1", {{"OS", "Debian8.0"}, {"WB", "IE10"}}}, {"h2", {{"OS", "Windows7"}, {"WB", "IE10"}}}});
  EXPECT_EQ(check_constraints(n, a, cs), (std::vector<ConstraintViolation>{{0, 0}}));
  a = pick(n, {{"h1", {{"OS", "Debian8.0"}, {"WB", "Chrome50"}}}, {"h2", {{"OS", "Windows7"}, {"WB", "IE10"}}}});
  EXPECT_TRUE(check_constraints(n, a, cs).empty());
}

TEST(Constraints, UnknownServiceRejected) {
  const Network n = two_hosts();
  const auto a = random_assignment(n, 1);
  try {
    check_constraints(n, a, {{std::nullopt, {"DB", "x"}, {"WB", "IE10"}, Polarity::undesirable}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
  }
}

TEST(Constraints, AgreeWithOracle) {
  Rng rng(5);
  const std::vector<std::string> os{"o0", "o1", "o2"}, wb{"w0", "w1", "w2"}, db{"d0", "d1"};
  for (int trial = 0; trial < 100; ++trial) {
    Network n;
    const std::size_t hosts = 2 + rng.below(6);
    for (std::size_t h = 0; h < hosts; ++h) {
      const std::string id = "h" + std::to_string(h);
      n.add_host(id);
      n.set_candidates(id, "os", os);
      if (rng.bernoulli(0.8)) n.set_candidates(id, "wb", wb);
      if (rng.bernoulli(0.5)) n.set_candidates(id, "db", db);
    }
    n.add_service("wb");
    n.add_service("db");
    std::vector<Constraint> cs;
    const std::vector<std::pair<std::string, const std::vector<std::string>*>> svc{
        {"os", &os}, {"wb", &wb}, {"db", &db}};
    for (int k = 0; k < 6; ++k) {
      const std::size_t m = rng.below(3);
      std::size_t c = rng.below(2);
      if (c >= m) ++c;
      Constraint con;
      if (rng.bernoulli(0.5)) con.host = "h" + std::to_string(rng.below(hosts));
      con.trigger = {svc[m].first, (*svc[m].second)[rng.below(svc[m].second->size())]};
      con.consequent = {svc[c].first, (*svc[c].second)[rng.below(svc[c].second->size())]};
      con.polarity = rng.bernoulli(0.5) ? Polarity::desirable : Polarity::undesirable;
      cs.push_back(con);
    }
    const auto a = random_assignment(n, static_cast<std::uint64_t>(trial));
    EXPECT_EQ(check_constraints(n, a, cs), oracle_violations(n, a, cs));
  }
}

// ---------------------------------------------------------------------------
// Baseline assignments

TEST(Mono, SharedCandidatesGiveOneProduct) {
  Network n;
  for (int h = 0; h < 4; ++h) {
    n.add_host("h" + std::to_string(h));
    n.set_candidates("h" + std::to_string(h), "os", {"a", "b", "c"});
  }
  const auto a = mono_assignment(n, {{"os", {"b", "a"}}});
  for (std::size_t s = 0; s < n.slots().size(); ++s) EXPECT_EQ(assigned_product(n, a, s).name, "b");
}

TEST(Mono, HostWithoutPreferredProduct) {
  Network n;
  n.add_host("x");
  n.add_host("y");
  n.add_host("z");
  n.set_candidates("x", "os", {"a", "b"});
  n.set_candidates("y", "os", {"c", "d", "b"});
  n.set_candidates("z", "os", {"c", "d"});
  const auto a = mono_assignment(n, {{"os", {"a", "b"}}});
  EXPECT_EQ(assigned_product(n, a, 0).name, "a");
  EXPECT_EQ(assigned_product(n, a, 1).name, "b");
  EXPECT_EQ(assigned_product(n, a, 2).name, "c");
}

TEST(Mono, SingleHostAndMissingService) {
  Network n;
  n.add_host("x");
  n.set_candidates("x", "os", {"a", "b"});
  EXPECT_EQ(assigned_product(n, mono_assignment(n, {{"os", {"b"}}}), 0).name, "b");
  EXPECT_THROW(mono_assignment(n, {{"wb", {"b"}}}), Error);
}

TEST(Random, DeterministicAndValid) {
  const Network n = two_hosts();
  EXPECT_EQ(random_assignment(n, 9).choice, random_assignment(n, 9).choice);
  EXPECT_NO_THROW(validate_assignment(n, random_assignment(n, 9)));
}

TEST(Random, SingleCandidates) {
  Network n;
  n.add_host("x");
  n.set_candidates("x", "os", {"only"});
  for (std::uint64_t s = 0; s < 20; ++s) EXPECT_EQ(random_assignment(n, s).choice, std::vector<std::size_t>{0});
}

TEST(Random, UniformOverTwoCandidates) {
  Network n;
  n.add_host("x");
  n.set_candidates("x", "os", {"a", "b"});
  int first = 0;
  for (std::uint64_t s = 0; s < 10000; ++s) first += random_assignment(n, s).choice[0] == 0;
  EXPECT_NEAR(first, 5000, 200);
}

// ---------------------------------------------------------------------------
// Clamps

TEST(Clamps, GeneratedAssignmentsRespectThem) {
  const Network n = two_hosts();
  const Network c = apply_clamps(n, {{"h1", "OS", "Debian8.0"}, {"h2", "WB", "Chrome50"}});
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = random_assignment(c, s);
    EXPECT_EQ(assigned_product(c, a, 0, *c.service_index("OS"))->name, "Debian8.0");
    EXPECT_EQ(assigned_product(c, a, 1, *c.service_index("WB"))->name, "Chrome50");
  }
  const auto m = mono_assignment(c, default_preference(c));
  EXPECT_EQ(assigned_product(c, m, 0, *c.service_index("OS"))->name, "Debian8.0");
}

TEST(Clamps, ConflictIsBuildError) {
  try {
    apply_clamps(two_hosts(), {{"h1", "OS", "Debian8.0"}, {"h1", "OS", "Windows7"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::build);
  }
}

TEST(Clamps, NonCandidateRejected) {
  try {
    apply_clamps(two_hosts(), {{"h2", "OS", "Debian8.0"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
  }
}

// ---------------------------------------------------------------------------
// Files

TEST(Scenario, JsonRoundTrip) {
  Network n = two_hosts();
  SimilarityTable t("OS", {"Ubuntu14.04", "Windows7", "Debian8.0"});
  t.set(0, 2, 0.208);
  TableSet tables;
  tables.add(t);
  const std::vector<Constraint> cs{{std::nullopt, {"OS", "Ubuntu14.04"}, {"WB", "IE10"}, Polarity::undesirable},
                                   {"h1", {"OS", "Debian8.0"}, {"WB", "Chrome50"}, Polarity::desirable}};
  const std::vector<Clamp> clamps{{"h2", "OS", "Windows7"}};
  const ojson doc = scenario_to_json(n, tables, cs, clamps);
  const Scenario back = scenario_from_json(doc, {}, true);
  EXPECT_EQ(back.network.hosts(), n.hosts());
  EXPECT_EQ(back.network.slots().size(), n.slots().size());
  EXPECT_EQ(back.network.links().size(), 1u);
  ASSERT_EQ(back.constraints.size(), 2u);
  EXPECT_FALSE(back.constraints[0].host);
  EXPECT_EQ(*back.constraints[1].host, "h1");
  EXPECT_EQ(back.constraints[1].polarity, Polarity::desirable);
  EXPECT_EQ(back.clamps.size(), 1u);
  EXPECT_EQ(back.tables.similarity("os", "Debian8.0", "Ubuntu14.04"), 0.208);
  EXPECT_EQ(scenario_to_json(back.network, back.tables, back.constraints, back.clamps).dump(), doc.dump());
}

TEST(Scenario, UnknownKeysStrictVersusLenient) {
  ojson doc = scenario_to_json(two_hosts(), {});
  doc["colour"] = "blue";
  EXPECT_THROW(scenario_from_json(doc, {}, true), Error);
  const Scenario sc = scenario_from_json(doc, {}, false);
  ASSERT_EQ(sc.warnings.size(), 1u);
  EXPECT_NE(sc.warnings[0].find("colour"), std::string::npos);
}

TEST(Scenario, TablePathsResolveAgainstScenarioFile) {
  const auto dir = std::filesystem::temp_directory_path() / "divnet_scenario_test";
  std::filesystem::create_directories(dir / "t");
  SimilarityTable t("OS", {"Ubuntu14.04", "Windows7"});
  t.set(0, 1, 0.5);
  std::ostringstream csv;
  save_table(t, csv);
  write_file(dir / "t" / "os.csv", csv.str());
  ojson doc = scenario_to_json(two_hosts(), {});
  doc["tables"] = ojson::array({"t/os.csv"});
  write_file(dir / "s.json", doc.dump());
  const Scenario sc = load_scenario(dir / "s.json", true);
  EXPECT_EQ(sc.tables.similarity("OS", "Windows7", "Ubuntu14.04"), 0.5);
  try {
    load_scenario(dir / "missing.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
  std::filesystem::remove_all(dir);
}

TEST(Scenario, AssignmentRoundTrip) {
  const Network n = two_hosts();
  const Assignment a = random_assignment(n, 3);
  EXPECT_EQ(assignment_from_json(n, assignment_to_json(n, a)).choice, a.choice);
  ojson bad = assignment_to_json(n, a);
  bad["h1"]["OS"] = "Fedora";
  EXPECT_THROW(assignment_from_json(n, bad), Error);
}
