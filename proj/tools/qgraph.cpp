// Command-line front end: spectra, gap reports, control operators, moment problems, steering.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qgraph/control_lab.hpp"
#include "qgraph/control_operator.hpp"
#include "qgraph/gaps.hpp"
#include "qgraph/graph_io.hpp"
#include "qgraph/moments.hpp"
#include "qgraph/propagator.hpp"
#include "qgraph/report.hpp"
#include "qgraph/spectrum.hpp"

namespace fs = std::filesystem;
using namespace qg;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  int threads = 1;
};

struct Outcome {
  int code = kExitOk;
  std::vector<std::string> outputs;
};

fs::path out_path(const Globals& g, const std::string& name) { return fs::path(g.out_dir) / name; }

ControlField field_for(const json& graph_doc, const MetricGraph& g, const std::string& preset) {
  if (!preset.empty()) return build_field(json{{"preset", preset}}, g);
  if (graph_doc.contains("field")) return build_field(graph_doc.at("field"), g);
  throw InputError("no control field: pass --field or add a \"field\" entry to the graph document");
}

nlohmann::json arithmetic_json(const LengthArithmetic& a) {
  json pairs = json::array();
  for (auto [i, j] : a.rational_pairs) pairs.push_back({i + 1, j + 1});
  return {{"declared", a.declared},
          {"ratios_irrational", a.ratios_irrational},
          {"independent_with_one", a.independent_with_one},
          {"rational_pairs", pairs}};
}

// ---- spectrum -------------------------------------------------------------------------------

struct SpectrumArgs {
  std::string graph;
  int K = 50;
};

Outcome cmd_spectrum(const Globals& G, const SpectrumArgs& a) {
  const MetricGraph g = load_graph(a.graph);
  const SpectralBasis b = compute_spectrum(g, a.K);
  Outcome o;
  write_spectrum_csv(b, out_path(G, "spectrum.csv"));
  write_json_file(out_path(G, "weyl.json"), to_json(b.weyl));
  o.outputs = {"spectrum.csv", "weyl.json"};
  if (b.K() >= 5) {
    const GapReport r = search_gap_constants(b.lambdas(), std::min(6, b.K() - 2));
    write_json_file(out_path(G, "gaps.json"), to_json(r));
    o.outputs.push_back("gaps.json");
  }
  return o;
}

// ---- gaps -----------------------------------------------------------------------------------

struct GapsArgs {
  std::string graph;
  int K = 200;
  int M = 0;
  int M_max = 6;
};

Outcome cmd_gaps(const Globals& G, const GapsArgs& a) {
  const json doc = read_json_file(a.graph);
  const MetricGraph g = build_graph(doc);
  const SpectralBasis b = compute_spectrum(g, a.K);
  const CollapsedSpectrum c = collapse_multiplicities(b.lambdas());
  GapReport r;
  if (a.M > 0) {
    r = fit_gap_constants(c.values, a.M);
    r.collapse_map = c.members;
  } else {
    r = search_gap_constants(b.lambdas(), a.M_max);
  }
  json j = to_json(r);
  const LengthArithmetic ar = declared_arithmetic(g);
  j["arithmetic"] = arithmetic_json(ar);
  bool degenerate = false;
  for (const auto& m : c.members) degenerate = degenerate || m.size() > 1;
  j["degenerate_levels"] = degenerate;
  if (g.edge_count() > 1 && !g.disjoint_family()) {
    const auto dec = dirichlet_decoupled_spectrum(g, b.K());
    j["interlacing_violations"] = interlacing_violations(b.lambdas(), dec);
  }
  Outcome o;
  write_json_file(out_path(G, "gaps.json"), j);
  o.outputs = {"gaps.json"};
  const bool rational = ar.declared && !ar.rational_pairs.empty();
  if (!r.violations.empty() || degenerate || rational) {
    std::cerr << "gap hypotheses fail on the checked range";
    if (rational) std::cerr << " (declared rational length ratio)";
    if (degenerate) std::cerr << " (degenerate levels collapsed)";
    std::cerr << '\n';
    o.code = kExitHypothesis;
  }
  return o;
}

// ---- operator -------------------------------------------------------------------------------

struct OperatorArgs {
  std::string graph;
  std::string field;
  int K = 50;
  double exponent = 4.1;
  double tol = 1e-9;
};

Outcome cmd_operator(const Globals& G, const OperatorArgs& a) {
  const json doc = read_json_file(a.graph);
  const MetricGraph g = build_graph(doc);
  const ControlField f = field_for(doc, g, a.field);
  const SpectralBasis b = compute_spectrum(g, a.K);
  const ControlMatrix M = matrix_elements(f, b);
  {
    std::FILE* fp = std::fopen(out_path(G, "operator.csv").string().c_str(), "w");
    if (!fp) throw InputError("cannot write operator.csv");
    std::fprintf(fp, "j,k,re,im\n");
    for (int j = 1; j <= M.K(); ++j)
      for (int k = 1; k <= M.K(); ++k) std::fprintf(fp, "%d,%d,%.17g,%.17g\n", j, k, M(j, k).real(), M(j, k).imag());
    std::fclose(fp);
  }
  const I1Report i1 = assumption_I1_check(M, a.exponent);
  const auto quads = assumption_I2_check(M, b.lambdas(), a.tol, M.K() > 40);
  json j;
  j["field"] = f.preset;
  j["K"] = M.K();
  j["I1"] = {{"exponent", i1.exponent}, {"C_fit", i1.C_fit}, {"argmin", i1.argmin}, {"violations", i1.violations}};
  json q = json::array();
  for (const auto& x : quads) q.push_back({{"quadruple", {x.j, x.k, x.l, x.m}}, {"freq_mismatch", x.freq_mismatch},
                                           {"b_difference", x.b_difference}});
  j["I2_violations"] = q;
  json orders = json::object();
  for (int v = 0; v < g.vertex_count(); ++v) orders[g.vertex(v).id] = vertex_vanishing_order(f, g, v);
  j["vertex_vanishing_order"] = orders;
  write_json_file(out_path(G, "operator.json"), j);
  Outcome o;
  o.outputs = {"operator.csv", "operator.json"};
  return o;
}

// ---- moments --------------------------------------------------------------------------------

struct MomentsArgs {
  std::string config;
};

Outcome cmd_moments(const Globals& G, const MomentsArgs& a) {
  const json cfg = read_json_file(a.config);
  MomentProblem p;
  int samples = 0;
  try {
    p.omegas = cfg.at("frequencies").get<std::vector<double>>();
    p.T = cfg.at("T").get<double>();
    for (const auto& t : cfg.at("targets")) {
      if (t.is_number())
        p.targets.emplace_back(t.get<double>(), 0.0);
      else
        p.targets.emplace_back(t.at(0).get<double>(), t.at(1).get<double>());
    }
    samples = cfg.value("samples", 0);
  } catch (const json::exception& ex) {
    throw InputError(std::string("malformed moment config: ") + ex.what());
  }
  const ControlSignal s = solve_moments(p, samples);
  write_signal_csv(s, out_path(G, "control.csv").string());
  write_json_file(out_path(G, "control.json"), to_json(s));
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
  Outcome o;
  o.outputs = {"control.csv", "control.json"};
  return o;
}

// ---- steer ----------------------------------------------------------------------------------

struct SteerArgs {
  std::string config;
};

Outcome cmd_steer(const Globals& G, const SteerArgs& a) {
  const json cfg = read_json_file(a.config);
  std::string graph_file, preset;
  int K = 30, max_iters = 5, steps = 0;
  double T = 0.0, eps = 0.0, s = 4.1;
  std::uint64_t seed = G.seed;
  json field_doc;
  try {
    graph_file = cfg.at("graph").get<std::string>();
    if (fs::path(graph_file).is_relative()) graph_file = (fs::path(a.config).parent_path() / graph_file).string();
    if (cfg.contains("field")) field_doc = cfg.at("field");
    K = cfg.value("K", K);
    T = cfg.value("T", T);
    eps = cfg.at("epsilon").get<double>();
    s = cfg.value("s", s);
    max_iters = cfg.value("max_iters", max_iters);
    steps = cfg.value("steps", steps);
    seed = cfg.value("seed", seed);
  } catch (const json::exception& ex) {
    throw InputError(std::string("malformed steering config: ") + ex.what());
  }
  if (K < 2 || max_iters < 0 || eps < 0.0 || s < 0.0) throw InputError("steering config out of range");
  const json gdoc = read_json_file(graph_file);
  const MetricGraph g = build_graph(gdoc);
  const ControlField f = field_doc.is_null() ? field_for(gdoc, g, "") : build_field(field_doc, g);
  const SpectralBasis b = compute_spectrum(g, K);
  const ControlMatrix M = matrix_elements(f, b);
  const auto lam = b.lambdas();
  if (T <= 0.0) T = default_horizon(lam);
  const StateVector target = random_tangent_target(lam, T, eps, s, seed);
  const SteeringProblem p = make_steering_problem(lam, M.B, T, target, eps, s, steps);
  const SteerResult r = steer(p, max_iters);

  json j = to_json(r);
  j["T"] = T;
  j["steps"] = p.steps;
  j["epsilon"] = eps;
  j["s"] = s;
  j["K"] = K;
  if (r.history.size() > 1 && r.history[1] > 0.0) j["first_reduction"] = r.history[0] / r.history[1];
  write_json_file(out_path(G, "steer.json"), j);
  {
    std::FILE* fp = std::fopen(out_path(G, "steer_history.csv").string().c_str(), "w");
    if (!fp) throw InputError("cannot write steer_history.csv");
    std::fprintf(fp, "iteration,error,damping\n");
    for (std::size_t i = 0; i < r.history.size(); ++i)
      std::fprintf(fp, "%zu,%.17g,%.17g\n", i, r.history[i], i == 0 ? 0.0 : r.damping[i - 1]);
    std::fclose(fp);
  }
  ControlSignal u = r.u;
  if (u.t.size() < 2) u = zero_signal(T, 32 * K);
  write_signal_csv(u, out_path(G, "control.csv").string());
  const Field uf = as_field(r.u);
  const Trajectory tr = propagate(basis_state(K, 1), uf, lam, M.B, T, p.steps);
  write_json_file(out_path(G, "trajectory.json"), summary_json(tr, duhamel_residual(tr, uf, lam, M.B)));
  Outcome o;
  o.outputs = {"steer.json", "steer_history.csv", "control.csv", "trajectory.json"};
  if (r.status == SteerStatus::Diverged) {
    std::cerr << "steering diverged after " << r.iterations << " iterations\n";
    o.code = kExitDiverged;
  }
  return o;
}

// ---- lie-rank -------------------------------------------------------------------------------

struct LieArgs {
  int N1 = 0;
  std::string pairs;
  std::string graph;
  std::string field;
  int K = 30;
  double tol = 1e-9;
};

std::vector<std::pair<int, int>> parse_pairs(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-');
    if (dash == std::string::npos) throw InputError("pair '" + item + "' is not of the form j-k");
    try {
      out.emplace_back(std::stoi(item.substr(0, dash)), std::stoi(item.substr(dash + 1)));
    } catch (const std::exception&) {
      throw InputError("pair '" + item + "' is not of the form j-k");
    }
  }
  return out;
}

Outcome cmd_lie_rank(const Globals& G, const LieArgs& a) {
  if (a.N1 < 2) throw InputError("--N1 must be at least 2");
  std::vector<std::pair<int, int>> pairs;
  json j;
  if (!a.graph.empty()) {
    const json doc = read_json_file(a.graph);
    const MetricGraph g = build_graph(doc);
    const SpectralBasis b = compute_spectrum(g, std::max(a.K, a.N1));
    const ControlMatrix M = matrix_elements(field_for(doc, g, a.field), b);
    pairs = resonant_pairs(b.lambdas(), M.B, a.N1, a.tol);
    j["source"] = "field";
  } else {
    pairs = parse_pairs(a.pairs);
    j["source"] = "pairs";
  }
  const int rank = lie_rank(generators_for(a.N1, pairs));
  j["N1"] = a.N1;
  j["pairs"] = pairs;
  j["rank"] = rank;
  j["full"] = rank == a.N1 * a.N1 - 1;
  write_json_file(out_path(G, "lie_rank.json"), j);
  std::cout << "rank " << rank << " of " << a.N1 * a.N1 - 1 << '\n';
  Outcome o;
  o.outputs = {"lie_rank.json"};
  return o;
}

// ---- report ---------------------------------------------------------------------------------

Outcome cmd_report(const Globals& G) {
  const auto runs = read_run_records(G.out_dir);
  json by = json::object();
  for (const auto& r : runs) {
    auto& e = by[r.at("command").get<std::string>()];
    if (e.is_null()) e = {{"runs", 0}, {"failures", 0}};
    e["runs"] = e["runs"].get<int>() + 1;
    if (r.value("exit_code", 0) != 0) e["failures"] = e["failures"].get<int>() + 1;
    e["last_config_hash"] = r.at("config_hash");
  }
  json j = {{"runs", runs.size()}, {"commands", by}};
  write_json_file(out_path(G, "report.json"), j);
  std::printf("%-10s %6s %9s\n", "command", "runs", "failures");
  for (auto it = by.begin(); it != by.end(); ++it)
    std::printf("%-10s %6d %9d\n", it.key().c_str(), it.value()["runs"].get<int>(), it.value()["failures"].get<int>());
  Outcome o;
  o.outputs = {"report.json"};
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral and control computations on compact quantum graphs"};
  app.require_subcommand(1);
  Globals G;
  app.add_option("--seed", G.seed, "Random seed")->capture_default_str();
  app.add_option("--out-dir", G.out_dir, "Directory for all outputs")->capture_default_str();
  app.add_option("--threads", G.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  SpectrumArgs sa;
  auto* sp = app.add_subcommand("spectrum", "Eigenvalues and Weyl constants");
  sp->add_option("--graph", sa.graph, "Graph document")->required();
  sp->add_option("--K", sa.K, "Number of eigenvalues")->check(CLI::PositiveNumber);

  GapsArgs ga;
  auto* gp = app.add_subcommand("gaps", "Gap constants and arithmetic of the lengths");
  gp->add_option("--graph", ga.graph, "Graph document")->required();
  gp->add_option("--K", ga.K, "Number of eigenvalues")->check(CLI::PositiveNumber);
  gp->add_option("--M", ga.M, "Fixed M (0 searches 1..M-max)");
  gp->add_option("--M-max", ga.M_max, "Largest M tried")->check(CLI::PositiveNumber);

  OperatorArgs oa;
  auto* op = app.add_subcommand("operator", "Control matrix elements and their checks");
  op->add_option("--graph", oa.graph, "Graph document")->required();
  op->add_option("--field", oa.field, "Field preset (thm1.2, thm1.3, remark6.1)");
  op->add_option("--K", oa.K, "Truncation")->check(CLI::PositiveNumber);
  op->add_option("--exponent", oa.exponent, "Decay exponent for the first-row fit");
  op->add_option("--tol", oa.tol, "Resonance tolerance");

  MomentsArgs ma;
  auto* mp = app.add_subcommand("moments", "Solve a trigonometric moment problem");
  mp->add_option("--config", ma.config, "Moment problem document")->required();

  SteerArgs st;
  auto* sp2 = app.add_subcommand("steer", "Local steering experiment");
  sp2->add_option("--config", st.config, "Experiment document")->required();

  LieArgs la;
  auto* lp = app.add_subcommand("lie-rank", "Rank of the Lie algebra of the pair generators");
  lp->add_option("--N1", la.N1, "Dimension")->required();
  lp->add_option("--pairs", la.pairs, "Pairs as j-k,j-k,...");
  lp->add_option("--graph", la.graph, "Graph document; pairs come from the field");
  lp->add_option("--field", la.field, "Field preset");
  lp->add_option("--K", la.K, "Truncation used for the resonance scan");

  auto* rp = app.add_subcommand("report", "Summarize runs.jsonl in the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  set_thread_count(G.threads);
  RunRecord rec;
  rec.started = utc_timestamp();
  json config = {{"seed", G.seed}};
  Outcome o;
  try {
    fs::create_directories(G.out_dir);
    if (sp->parsed()) {
      rec.command = "spectrum";
      config["graph"] = read_json_file(sa.graph);
      config["K"] = sa.K;
      o = cmd_spectrum(G, sa);
    } else if (gp->parsed()) {
      rec.command = "gaps";
      config["graph"] = read_json_file(ga.graph);
      config["K"] = ga.K;
      config["M"] = ga.M;
      config["M_max"] = ga.M_max;
      o = cmd_gaps(G, ga);
    } else if (op->parsed()) {
      rec.command = "operator";
      config["graph"] = read_json_file(oa.graph);
      config["field"] = oa.field;
      config["K"] = oa.K;
      config["exponent"] = oa.exponent;
      config["tol"] = oa.tol;
      o = cmd_operator(G, oa);
    } else if (mp->parsed()) {
      rec.command = "moments";
      config["config"] = read_json_file(ma.config);
      o = cmd_moments(G, ma);
    } else if (sp2->parsed()) {
      rec.command = "steer";
      config["config"] = read_json_file(st.config);
      o = cmd_steer(G, st);
    } else if (lp->parsed()) {
      rec.command = "lie-rank";
      config["N1"] = la.N1;
      config["pairs"] = la.pairs;
      config["graph"] = la.graph.empty() ? json() : read_json_file(la.graph);
      config["field"] = la.field;
      config["K"] = la.K;
      o = cmd_lie_rank(G, la);
    } else if (rp->parsed()) {
      rec.command = "report";
      o = cmd_report(G);
    }
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    o.code = kExitInput;
  } catch (const HypothesisError& e) {
    std::cerr << "hypothesis failed: " << e.what() << '\n';
    o.code = kExitHypothesis;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    o.code = kExitInternal;
  }
  rec.config = config;
  rec.finished = utc_timestamp();
  rec.outputs = o.outputs;
  rec.exit_code = o.code;
  try {
    append_run_record(G.out_dir, rec);
  } catch (const std::exception& e) {
    std::cerr << "warning: " << e.what() << '\n';
  }
  return o.code;
}
