#include <gtest/gtest.h>

#include "divnet/mrf.hpp"
#include "problem_gen.hpp"

using namespace divnet;

namespace {

SimilarityTable two_products(const std::string& service, double ab) {
  SimilarityTable t(service, {"a", "b"});
  t.set(0, 1, ab);
  return t;
}

Network pair_network() {
  Network n;
  n.add_host("h1");
  n.add_host("h2");
  n.set_candidates("h1", "os", {"a", "b"});
  n.set_candidates("h2", "os", {"a", "b"});
  n.add_link("h1", "h2");
  return n;
}

Network triangle() {
  Network n;
  for (auto h : {"h1", "h2", "h3"}) {
    n.add_host(h);
    n.set_candidates(h, "os", {"a", "b"});
  }
  n.add_link("h1", "h2");
  n.add_link("h2", "h3");
  n.add_link("h1", "h3");
  return n;
}

TableSet host_tables() {
  return TableSet({SimilarityTable("os", {"ubuntu", "windows"}),
                   SimilarityTable("wb", {"ie10", "chrome", "firefox"})});
}

Network two_service_host() {
  Network n;
  n.add_host("h1");
  n.set_candidates("h1", "os", {"ubuntu", "windows"});
  n.set_candidates("h1", "wb", {"ie10", "chrome", "firefox"});
  return n;
}

}  // namespace

TEST(BuildProblem, SingleLinkUsesSimilarityMatrix) {
  TableSet ts({two_products("os", 0.2)});
  const MrfProblem p = build_problem(pair_network(), ts, {}, {}, {});
  ASSERT_EQ(p.size(), 2u);
  ASSERT_EQ(p.edges().size(), 1u);
  const CostBlock& b = p.block(p.edges()[0]);
  EXPECT_EQ(b.v, (std::vector<double>{1, 0.2, 0.2, 1}));
  EXPECT_EQ(p.unary(0), (std::vector<double>{0, 0}));
}

TEST(BuildProblem, UndesirableConstraintSetsOnePenalty) {
  const Network n = two_service_host();
  const Constraint c{std::nullopt, {"os", "ubuntu"}, {"wb", "ie10"}, Polarity::undesirable};
  const MrfProblem p = build_problem(n, host_tables(), {c}, {}, {});
  ASSERT_EQ(p.edges().size(), 1u);
  const CostBlock& b = p.block(p.edges()[0]);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < b.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      if (b(i, j) != 0.0) {
        ++hits;
        EXPECT_EQ(b(i, j), p.big());
        EXPECT_EQ(i, 0u);
        EXPECT_EQ(j, 0u);
      }
    }
  EXPECT_EQ(hits, 1u);
  EXPECT_EQ(p.big(), 1e6);
}

TEST(BuildProblem, DesirableConstraintPenalizesOtherConsequents) {
  const Network n = two_service_host();
  const Constraint c{"h1", {"os", "windows"}, {"wb", "chrome"}, Polarity::desirable};
  const MrfProblem p = build_problem(n, host_tables(), {c}, {}, {});
  const CostBlock& b = p.block(p.edges()[0]);
  EXPECT_EQ(b.v, (std::vector<double>{0, 0, 0, 1e6, 0, 1e6}));
}

TEST(BuildProblem, ConstraintWithReversedServiceOrder) {
  const Network n = two_service_host();
  const Constraint c{std::nullopt, {"wb", "firefox"}, {"os", "ubuntu"}, Polarity::undesirable};
  const MrfProblem p = build_problem(n, host_tables(), {c}, {}, {});
  const CostBlock& b = p.block(p.edges()[0]);
  EXPECT_EQ(b(0, 2), 1e6);
  EXPECT_EQ(b.max(), 1e6);
  EXPECT_EQ(std::count(b.v.begin(), b.v.end(), 0.0), 5);
}

TEST(BuildProblem, ClampedSlotHasOneLabel) {
  TableSet ts({two_products("os", 0.2)});
  const MrfProblem p = build_problem(pair_network(), ts, {}, {{"h2", "os", "b"}}, {});
  EXPECT_EQ(p.labels(0), 2u);
  EXPECT_EQ(p.labels(1), 1u);
  const SolveResult r = solve_trws(p);
  EXPECT_EQ(r.assignment.choice, (std::vector<std::size_t>{0, 1}));
}

TEST(BuildProblem, Errors) {
  try {
    build_problem(pair_network(), TableSet{}, {}, {}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::build);
  }
  TableSet ts({two_products("os", 0.2)});
  try {
    build_problem(pair_network(), ts, {}, {{"h1", "os", "a"}, {"h1", "os", "b"}}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::build);
  }
}

TEST(BuildProblem, PenaltyRaisedAboveSimilarityMass) {
  TableSet ts({two_products("os", 0.2)});
  SolverConfig cfg;
  cfg.big_penalty = 0.5;
  const MrfProblem p = build_problem(pair_network(), ts, {}, {}, cfg);
  EXPECT_GT(p.big(), 1.0);
}

TEST(Energy, Examples) {
  TableSet ts({two_products("os", 0.2)});
  const MrfProblem p = build_problem(pair_network(), ts, {}, {}, {});
  EXPECT_DOUBLE_EQ(energy(p, Labeling{0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(energy(p, Labeling{0, 1}), 0.2);
  const MrfProblem t = build_problem(triangle(), ts, {}, {}, {});
  EXPECT_DOUBLE_EQ(energy(t, Labeling{0, 0, 1}), 1.4);
  EXPECT_THROW(energy(t, Labeling{0, 0, 2}), Error);
}

TEST(Energy, AssignmentOverload) {
  TableSet ts({two_products("os", 0.2)});
  const Network n = pair_network();
  const MrfProblem p = build_problem(n, ts, {}, {}, {});
  EXPECT_DOUBLE_EQ(energy(p, Assignment{{1, 1}}), 1.0);
}

TEST(Solve, AntiCorrelatedPair) {
  TableSet ts({two_products("os", 0.0)});
  const MrfProblem p = build_problem(pair_network(), ts, {}, {}, {});
  const SolveResult r = solve_trws(p);
  EXPECT_EQ(r.energy, 0.0);
  EXPECT_NEAR(r.gap, 0.0, 1e-12);
  EXPECT_TRUE(r.converged);
  EXPECT_NE(r.assignment.choice[0], r.assignment.choice[1]);
}

TEST(Solve, TriangleMatchesBruteForce) {
  TableSet ts({two_products("os", 0.2)});
  const MrfProblem p = build_problem(triangle(), ts, {}, {}, {});
  const SolveResult r = solve_trws(p);
  const auto [x, e] = brute_force(p);
  EXPECT_NEAR(e, 1.4, 1e-12);
  EXPECT_NEAR(r.energy, 1.4, 1e-12);
  EXPECT_LE(r.lower_bound, r.energy + 1e-9);
}

TEST(BruteForce, SingleNodeUnary) {
  MrfProblem p;
  p.add_node(3);
  p.unary(0) = {3, 1, 2};
  const auto [x, e] = brute_force(p);
  EXPECT_EQ(x, Labeling{1});
  EXPECT_EQ(e, 1.0);
}

TEST(BruteForce, LexicographicTieBreak) {
  MrfProblem p;
  p.add_node(2);
  p.add_node(2);
  p.add_edge(0, 1, CostBlock(2, 2, 0.5));
  EXPECT_EQ(brute_force(p).first, (Labeling{0, 0}));
}

TEST(BruteForce, GuardRefuses) {
  MrfProblem p;
  for (int i = 0; i < 12; ++i) p.add_node(4);
  try {
    brute_force(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::refusal);
  }
}

TEST(Solve, TreesAreExact) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const MrfProblem p = gen::random_tree(seed);
    const SolveResult r = solve_trws(p);
    const auto opt = brute_force(p).second;
    EXPECT_LE(r.gap, 1e-6) << "seed " << seed;
    EXPECT_NEAR(r.energy, opt, 1e-6) << "seed " << seed;
  }
}

TEST(Solve, LoopyBoundsAndMonotoneTrace) {
  int exact = 0;
  const int count = 200;
  for (std::uint64_t seed = 0; seed < count; ++seed) {
    const MrfProblem p = gen::random_loopy(seed);
    const SolveResult r = solve_trws(p);
    const auto opt = brute_force(p).second;
    EXPECT_LE(r.lower_bound, opt + 1e-9) << "seed " << seed;
    EXPECT_LE(opt, r.energy + 1e-12) << "seed " << seed;
    for (std::size_t i = 1; i < r.trace.size(); ++i)
      EXPECT_GE(r.trace[i], r.trace[i - 1] - 1e-9) << "seed " << seed << " iter " << i;
    if (r.gap <= 1e-6) EXPECT_NEAR(r.energy, opt, 1e-6);
    exact += std::abs(r.energy - opt) <= 1e-6;
  }
  EXPECT_GE(exact, count * 9 / 10);
}

TEST(Solve, BoundBelowRandomAssignments) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MrfProblem p = gen::random_loopy(1000 + seed);
    const SolveResult r = solve_trws(p);
    Rng rng(seed);
    for (int k = 0; k < 1000; ++k) {
      Labeling x(p.size());
      for (std::size_t s = 0; s < p.size(); ++s) x[s] = rng.below(p.labels(s));
      ASSERT_LE(r.lower_bound, energy(p, x) + 1e-9);
    }
  }
}

TEST(Solve, DeterministicAndScheduleIndependent) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MrfProblem p = gen::random_loopy(500 + seed, 30, 5);
    SolverConfig seq;
    seq.max_iterations = 50;
    SolverConfig par = seq;
    par.schedule = Schedule::parallel;
    par.threads = 4;
    const SolveResult a = solve_trws(p, seq);
    const SolveResult b = solve_trws(p, seq);
    const SolveResult c = solve_trws(p, par);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(a.labels, c.labels);
    EXPECT_EQ(a.trace, c.trace);
    EXPECT_EQ(a.energy, c.energy);
    EXPECT_EQ(a.iterations, c.iterations);
  }
}

TEST(Solve, ConstantUnaryShiftKeepsLabeling) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    MrfProblem p = gen::random_loopy(2000 + seed);
    const SolveResult a = solve_trws(p);
    const std::size_t node = seed % p.size();
    for (auto& u : p.unary(node)) u += 5.0;
    const SolveResult b = solve_trws(p);
    EXPECT_EQ(a.labels, b.labels) << "seed " << seed;
    EXPECT_NEAR(b.energy, a.energy + 5.0, 1e-9);
  }
}

TEST(Solve, FeasibleConstraintsAreRespected) {
  // Ring of hosts each running os+wb, with random constraints.
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    Network n;
    const std::size_t h = 4;
    for (std::size_t i = 0; i < h; ++i) {
      const std::string id = "h" + std::to_string(i);
      n.add_host(id);
      n.set_candidates(id, "os", {"o1", "o2", "o3"});
      n.set_candidates(id, "wb", {"w1", "w2"});
    }
    for (std::size_t i = 0; i < h; ++i) n.add_link(i, (i + 1) % h);
    SimilarityTable os("os", {"o1", "o2", "o3"});
    SimilarityTable wb("wb", {"w1", "w2"});
    os.set(0, 1, rng.uniform());
    os.set(0, 2, rng.uniform());
    os.set(1, 2, rng.uniform());
    wb.set(0, 1, rng.uniform());
    TableSet ts({os, wb});
    std::vector<Constraint> cs;
    for (int k = 0; k < 4; ++k) {
      const std::string host = "h" + std::to_string(rng.below(h));
      const std::string o = "o" + std::to_string(1 + rng.below(3));
      const std::string w = "w" + std::to_string(1 + rng.below(2));
      cs.push_back({rng.bernoulli(0.5) ? std::optional<std::string>(host) : std::nullopt, {"os", o}, {"wb", w},
                    rng.bernoulli(0.5) ? Polarity::desirable : Polarity::undesirable});
    }
    const MrfProblem p = build_problem(n, ts, cs, {}, {});
    const auto [x, opt] = brute_force(p);
    const SolveResult r = solve_trws(p);
    if (opt < p.big()) {
      EXPECT_LT(r.energy, p.big()) << "seed " << seed;
      EXPECT_TRUE(check_constraints(n, r.assignment, cs).empty()) << "seed " << seed;
    }
  }
}
