// divnet command-line front end.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "divnet/divnet.hpp"

namespace {

using namespace divnet;

enum Exit { ok = 0, invalid = 1, not_converged = 2, io_failure = 3 };

struct Common {
  std::uint64_t seed = 42;
  int threads = 0;
  bool strict = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--threads", c.threads, "Worker threads (default: DIVNET_THREADS or 1)");
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text << std::flush;
  else
    write_file(path, text);
}

Scenario open_scenario(const std::string& path, bool strict) {
  Scenario sc = load_scenario(path, strict);
  for (const auto& w : sc.warnings) std::cerr << "warning: " << w << "\n";
  const auto violations = validate_network(sc.network);
  if (!violations.empty()) {
    for (const auto& v : violations) std::cerr << "violation: " << v.locus << ": " << v.message << "\n";
    fail(ErrorKind::validation, std::to_string(violations.size()) + " network violation(s)");
  }
  return sc;
}

ExploitKit make_kit(const Network& n, const std::vector<std::string>& kit) {
  if (!kit.empty()) return {kit};
  return {n.services()};
}

// ---------------------------------------------------------------------------

struct SimtabArgs {
  std::string feed, service, out, format = "auto";
  std::vector<std::string> products;
  bool exact = false;
};

int run_simtab(const SimtabArgs& a) {
  std::vector<ProductId> filter;
  std::vector<std::string> names;
  for (const auto& p : a.products) {
    if (p.empty()) continue;
    filter.push_back({a.service, p});
    names.push_back(p);
  }
  if (filter.empty()) fail(ErrorKind::validation, "product filter is empty");
  IngestOptions opt;
  opt.exact_match = a.exact;
  if (a.format == "cve-map")
    opt.format = FeedFormat::cve_map;
  else if (a.format == "nvd")
    opt.format = FeedFormat::nvd_json;
  const std::string text = read_file(a.feed);
  const VulnCatalog cat = ingest_feed(text, filter, opt);
  const SimilarityTable t = build_table(cat, a.service, names);
  std::ostringstream out;
  save_table(t, out);
  emit(a.out, out.str());
  std::cerr << "pairs: " << t.size() * (t.size() - 1) / 2 << "\n";
  return ok;
}

// ---------------------------------------------------------------------------

struct OptimizeArgs {
  Common c;
  std::string scenario, out, report;
  int max_iters = 2000;
  double tol = 1e-6;
  bool no_polish = false;
};

int run_optimize(const OptimizeArgs& a) {
  const Scenario sc = open_scenario(a.scenario, a.c.strict);
  SolverConfig cfg;
  cfg.max_iterations = a.max_iters;
  cfg.tolerance = a.tol;
  cfg.seed = a.c.seed;
  cfg.threads = resolve_threads(a.c.threads);
  cfg.schedule = cfg.threads > 1 ? Schedule::parallel : Schedule::sequential;
  cfg.polish = !a.no_polish;
  const SolveResult r = optimize(sc.network, sc.tables, sc.constraints, sc.clamps, cfg);
  emit(a.out, assignment_to_json(sc.network, r.assignment).dump(2) + "\n");
  if (!a.report.empty()) write_file(a.report, solve_report_json(r).dump(2) + "\n");
  std::fprintf(stderr, "energy %.6g  lower bound %.6g  gap %.3g  iterations %d  %s\n", r.energy, r.lower_bound,
               r.gap, r.iterations, r.converged ? "converged" : "not converged");
  if (a.c.strict && !r.converged) {
    std::cerr << "error: solver did not converge within " << a.max_iters << " iterations\n";
    return not_converged;
  }
  return ok;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  Common c;
  std::string scenario, assignment, target, method = "auto", out;
  std::vector<std::string> entries, kit;
  std::size_t samples = 100000;
  double p_avg = 0.08;
};

int run_evaluate(const EvaluateArgs& a) {
  const Scenario sc = open_scenario(a.scenario, a.c.strict);
  const Assignment asg = load_assignment(sc.network, a.assignment);
  std::vector<RootPrior> roots;
  for (const auto& e : a.entries) roots.push_back({e, 1.0});
  const BayesNet bn = build_bn(sc.network, asg, roots, a.target, make_kit(sc.network, a.kit), a.p_avg, sc.tables);
  InferenceOptions opt;
  if (a.method == "exact")
    opt.method = Method::exact;
  else if (a.method == "sample")
    opt.method = Method::sample;
  else if (a.method == "factored")
    opt.method = Method::factored;
  else if (a.method == "auto")
    opt.method = Method::automatic;
  else
    fail(ErrorKind::validation, "unknown method '" + a.method + "'");
  opt.samples = a.samples;
  opt.seed = a.c.seed;
  opt.threads = resolve_threads(a.c.threads);
  const InferenceResult r = infer(bn, opt);
  emit(a.out, evaluation_json(bn, r).dump(2) + "\n");
  const std::size_t t = bn.target();
  std::fprintf(stderr, "%s: P %.6g  P' %.6g  d_bn %.6g\n", std::string(to_string(r.method)).c_str(), r.p[t],
               r.p_prime[t], r.p[t] > 0 ? r.p_prime[t] / r.p[t] : std::nan(""));
  for (const auto& [x, y] : bn.dropped_edges()) std::cerr << "dropped edge " << x << " -> " << y << "\n";
  return ok;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Common c;
  std::string scenario, assignment, entry, target, policy = "greedy", out, trace;
  std::vector<std::string> kit;
  int runs = 1000, max_ticks = 10000;
  double p_avg = 0.08;
};

int run_simulate(const SimulateArgs& a) {
  Scenario sc = open_scenario(a.scenario, a.c.strict);
  SimScenario s;
  s.assignment = load_assignment(sc.network, a.assignment);
  s.kit = make_kit(sc.network, a.kit);
  s.network = std::move(sc.network);
  s.tables = std::move(sc.tables);
  s.entry = a.entry;
  s.target = a.target;
  s.p_avg = a.p_avg;
  if (a.policy == "greedy")
    s.policy = Policy::greedy;
  else if (a.policy == "uniform")
    s.policy = Policy::uniform;
  else
    fail(ErrorKind::validation, "unknown policy '" + a.policy + "'");
  s.runs = a.runs;
  s.max_ticks = a.max_ticks;
  std::vector<RunOutcome> traces;
  const SimReport r = mttc(s, a.c.seed, resolve_threads(a.c.threads), a.trace.empty() ? nullptr : &traces);
  emit(a.out, sim_report_json(r).dump(2) + "\n");
  if (!a.trace.empty()) {
    std::ostringstream csv;
    csv << "run,tick,host\n";
    for (std::size_t i = 0; i < traces.size(); ++i)
      for (const auto& [tick, host] : traces[i].trace) csv << i << ',' << tick << ',' << s.network.hosts()[host] << '\n';
    write_file(a.trace, csv.str());
  }
  if (r.mean_defined)
    std::fprintf(stderr, "MTTC %.4g ticks (std %.4g, %zu successes, %zu censored)\n", r.mttc_mean, r.mttc_std,
                 r.success_count, r.censored_count);
  else
    std::fprintf(stderr, "MTTC undefined: all %zu runs censored\n", r.censored_count);
  return ok;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  Common c;
  GenSpec spec;
  std::size_t constraints = 0;
  std::string out;
};

int run_gen(GenArgs a) {
  a.spec.seed = a.c.seed;
  const Instance in = gen_network(a.spec);
  std::vector<Constraint> cs;
  if (a.constraints > 0) cs = conflicting_constraints(in.network, in.tables, a.constraints, a.spec.seed);
  emit(a.out, scenario_to_json(in.network, in.tables, cs).dump(2) + "\n");
  std::cerr << "hosts " << in.network.hosts().size() << "  links " << in.network.links().size() << "  services "
            << in.network.services().size() << "\n";
  return ok;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  Common c;
  std::string family, out, json;
  std::vector<std::size_t> hosts, services, products, constraints, extra_edges;
  std::vector<double> degrees;
  std::size_t repeats = 1;
  double p_avg = 0.08, budget_ms = 0.0;
  int max_iters = 2000;
  double tol = 1e-6;
  bool no_times = false;
};

int run_bench(const BenchArgs& a) {
  ExperimentConfig cfg;
  cfg.family = parse_family(a.family);
  switch (cfg.family) {
    case Family::variety: cfg.products = {3, 4, 5, 6, 7}; break;
    case Family::constraints: cfg.constraints = {0, 5, 10, 15}; break;
    case Family::structure: cfg.extra_edges = {0, 5, 10, 15, 20}; break;
    case Family::scale: cfg.hosts = {100, 1000}; break;
  }
  if (!a.hosts.empty()) cfg.hosts = a.hosts;
  if (!a.degrees.empty()) cfg.degrees = a.degrees;
  if (!a.services.empty()) cfg.services = a.services;
  if (!a.products.empty()) cfg.products = a.products;
  if (!a.constraints.empty()) cfg.constraints = a.constraints;
  if (!a.extra_edges.empty()) cfg.extra_edges = a.extra_edges;
  cfg.repeats = a.repeats;
  cfg.seed = a.c.seed;
  cfg.p_avg = a.p_avg;
  cfg.budget_ms = a.budget_ms;
  cfg.solver.max_iterations = a.max_iters;
  cfg.solver.tolerance = a.tol;
  cfg.threads = resolve_threads(a.c.threads);
  const ExperimentReport rep = run_experiment(cfg);
  std::ostringstream csv;
  write_csv(rep, csv, !a.no_times);
  emit(a.out, csv.str());
  if (!a.json.empty()) write_file(a.json, to_json(rep, !a.no_times).dump(2) + "\n");
  std::cerr << rep.rows.size() << " rows" << (rep.partial ? " (partial: time budget exhausted)" : "") << "\n";
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Product-diversity assignment for networked hosts"};
  app.require_subcommand(1);
  int code = ok;

  SimtabArgs st;
  auto* simtab = app.add_subcommand("simtab", "Build a similarity table from a vulnerability feed");
  simtab->add_option("--feed", st.feed, "Feed file (CVE map or NVD JSON)")->required();
  simtab->add_option("--service", st.service, "Service the products provide")->required();
  simtab->add_option("--products", st.products, "CPE prefixes, comma separated or repeated")
      ->required()
      ->delimiter(',');
  simtab->add_option("--out", st.out, "Output CSV ('-' for stdout)")->required();
  simtab->add_option("--format", st.format, "Feed format")
      ->check(CLI::IsMember({"auto", "cve-map", "nvd"}))
      ->capture_default_str();
  simtab->add_flag("--exact", st.exact, "Match CPEs exactly instead of by prefix");
  simtab->callback([&] { code = run_simtab(st); });

  OptimizeArgs op;
  auto* optimize_cmd = app.add_subcommand("optimize", "Compute a maximally diverse assignment");
  add_common(optimize_cmd, op.c);
  optimize_cmd->add_option("--scenario", op.scenario, "Scenario JSON")->required();
  optimize_cmd->add_option("--out", op.out, "Assignment JSON ('-' for stdout)");
  optimize_cmd->add_option("--report", op.report, "Solve report JSON");
  optimize_cmd->add_option("--max-iters", op.max_iters, "Iteration cap")->capture_default_str();
  optimize_cmd->add_option("--tol", op.tol, "Convergence tolerance")->capture_default_str();
  optimize_cmd->add_flag("--strict", op.c.strict, "Reject unknown keys; exit 2 when not converged");
  optimize_cmd->add_flag("--no-polish", op.no_polish, "Skip local descent on the solver labeling");
  optimize_cmd->callback([&] { code = run_optimize(op); });

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Compute the diversity metric of an assignment");
  add_common(evaluate, ev.c);
  evaluate->add_option("--scenario", ev.scenario, "Scenario JSON")->required();
  evaluate->add_option("--assignment", ev.assignment, "Assignment JSON")->required();
  evaluate->add_option("--entry", ev.entries, "Entry host (repeatable)")->required();
  evaluate->add_option("--target", ev.target, "Target host")->required();
  evaluate->add_option("--method", ev.method, "Inference method")
      ->check(CLI::IsMember({"auto", "exact", "sample", "factored"}))
      ->capture_default_str();
  evaluate->add_option("--samples", ev.samples, "Sample count")->capture_default_str();
  evaluate->add_option("--p-avg", ev.p_avg, "Zero-day success probability")->capture_default_str();
  evaluate->add_option("--kit", ev.kit, "Exploit-kit services (default: all)")->delimiter(',');
  evaluate->add_option("--out", ev.out, "Evaluation report JSON ('-' for stdout)");
  evaluate->add_flag("--strict", ev.c.strict, "Reject unknown scenario keys");
  evaluate->callback([&] { code = run_evaluate(ev); });

  SimulateArgs si;
  auto* simulate = app.add_subcommand("simulate", "Estimate mean time to compromise");
  add_common(simulate, si.c);
  simulate->add_option("--scenario", si.scenario, "Scenario JSON")->required();
  simulate->add_option("--assignment", si.assignment, "Assignment JSON")->required();
  simulate->add_option("--entry", si.entry, "Entry host")->required();
  simulate->add_option("--target", si.target, "Target host")->required();
  simulate->add_option("--runs", si.runs, "Simulation runs")->capture_default_str();
  simulate->add_option("--max-ticks", si.max_ticks, "Censoring horizon")->capture_default_str();
  simulate->add_option("--policy", si.policy, "Attacker policy")
      ->check(CLI::IsMember({"greedy", "uniform"}))
      ->capture_default_str();
  simulate->add_option("--p-avg", si.p_avg, "Zero-day success probability")->capture_default_str();
  simulate->add_option("--kit", si.kit, "Exploit-kit services (default: all)")->delimiter(',');
  simulate->add_option("--out", si.out, "SimReport JSON ('-' for stdout)");
  simulate->add_option("--trace", si.trace, "Per-run infection trace CSV");
  simulate->add_flag("--strict", si.c.strict, "Reject unknown scenario keys");
  simulate->callback([&] { code = run_simulate(si); });

  GenArgs ge;
  auto* gen = app.add_subcommand("gen", "Generate a random scenario");
  add_common(gen, ge.c);
  gen->add_option("--hosts", ge.spec.hosts, "Host count")->capture_default_str();
  gen->add_option("--degree", ge.spec.degree, "Average degree")->capture_default_str();
  gen->add_option("--services", ge.spec.services, "Services per host")->capture_default_str();
  gen->add_option("--products", ge.spec.products, "Products per service")->capture_default_str();
  gen->add_option("--sim-lo", ge.spec.sim_lo, "Lowest generated similarity")->capture_default_str();
  gen->add_option("--sim-hi", ge.spec.sim_hi, "Highest generated similarity")->capture_default_str();
  gen->add_option("--constraints", ge.constraints, "Conflicting constraints to add")->capture_default_str();
  gen->add_option("--out", ge.out, "Scenario JSON ('-' for stdout)");
  gen->callback([&] { code = run_gen(ge); });

  BenchArgs be;
  auto* bench = app.add_subcommand("bench", "Run an experiment sweep");
  add_common(bench, be.c);
  bench->add_option("family", be.family, "structure, variety, constraints or scale")
      ->required()
      ->check(CLI::IsMember({"structure", "variety", "constraints", "scale"}));
  bench->add_option("--hosts", be.hosts, "Host counts")->delimiter(',');
  bench->add_option("--degree", be.degrees, "Average degrees")->delimiter(',');
  bench->add_option("--services", be.services, "Service counts")->delimiter(',');
  bench->add_option("--products", be.products, "Products per service")->delimiter(',');
  bench->add_option("--constraints", be.constraints, "Constraint counts")->delimiter(',');
  bench->add_option("--extra-edges", be.extra_edges, "Added edge counts")->delimiter(',');
  bench->add_option("--repeats", be.repeats, "Seeds per configuration")->capture_default_str();
  bench->add_option("--p-avg", be.p_avg, "Zero-day success probability")->capture_default_str();
  bench->add_option("--max-iters", be.max_iters, "Solver iteration cap")->capture_default_str();
  bench->add_option("--tol", be.tol, "Solver tolerance")->capture_default_str();
  bench->add_option("--budget-ms", be.budget_ms, "Stop starting rows after this wall time (0: none)");
  bench->add_option("--out", be.out, "Report CSV ('-' for stdout)");
  bench->add_option("--json", be.json, "Report JSON");
  bench->add_flag("--no-times", be.no_times, "Omit wall-time columns");
  bench->callback([&] { code = run_bench(be); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return invalid;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::io ? io_failure : invalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return invalid;
  }
  return code;
}
