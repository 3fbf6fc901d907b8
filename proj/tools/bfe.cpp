// bfe: command-line driver. Exit codes: 0 success, 1 verification failure
// or failed computation, 2 input error.

#include "bfe/bfe.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

using namespace bfe;
namespace fs = std::filesystem;

namespace {

LaplaceParameter parse_s(const std::string& text) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) return LaplaceParameter(std::stod(text), 0.0);
    return LaplaceParameter(std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1)));
  } catch (const std::invalid_argument&) {
    throw ConfigError("--s expects RE,IM, got '" + text + "'");
  }
}

std::string out_path(const std::string& dir, const std::string& name) {
  if (!dir.empty()) fs::create_directories(dir);
  return (fs::path(dir.empty() ? "." : dir) / name).string();
}

void print_warnings(const ProblemConfig& cfg) {
  for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << "\n";
}

void write_solution(const std::string& path, const CoupledSolution& sol) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  const auto& L = sol.layout;
  auto block = [&](int i) {
    if (i < L.theta) return "u";
    if (i < L.phi) return "theta";
    if (i < L.mult) return "phi";
    if (i < L.g) return "multiplier";
    if (i < L.lam) return "phi_gamma";
    return "lambda_gamma";
  };
  out << "index,block,re,im\n" << std::setprecision(15);
  for (int i = 0; i < L.size; ++i) out << i << ',' << block(i) << ',' << sol.x[i].real() << ',' << sol.x[i].imag() << "\n";
}

void write_pressure(const std::string& path, const ProbeSet& set, const VectorXc& p) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "probe,tag,x,y,z,distance,re,im\n" << std::setprecision(12);
  int k = 0;
  for (const auto& pr : set.probes) {
    if (pr.tag != ProbeTag::Exterior) continue;
    out << pr.label << ',' << probe_tag_name(pr.tag) << ',' << pr.x[0] << ',' << pr.x[1] << ',' << pr.x[2] << ','
        << pr.distance << ',' << p[k].real() << ',' << p[k].imag() << "\n";
    ++k;
  }
}

void write_derived(const std::string& path, const std::vector<DerivedField>& f) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "cell,x,y,z,field,re,im\n" << std::setprecision(12);
  const char* comp[3] = {"x", "y", "z"};
  for (std::size_t t = 0; t < f.size(); ++t) {
    const auto& d = f[t];
    auto row = [&](const std::string& name, Complex v) {
      out << t << ',' << d.centroid[0] << ',' << d.centroid[1] << ',' << d.centroid[2] << ',' << name << ','
          << v.real() << ',' << v.imag() << "\n";
    };
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) row(std::string("sigma_") + comp[i] + comp[j], d.stress(i, j));
    row("entropy", d.entropy);
    for (int i = 0; i < 3; ++i) row(std::string("D_") + comp[i], d.displacement[i]);
  }
}

ProbeSet exterior_only(const ProbeSet& set) {
  ProbeSet e;
  for (const auto& p : set.probes)
    if (p.tag == ProbeTag::Exterior) e.probes.push_back(p);
  return e;
}

CoupledMesh mesh_or_desk(const std::string& path) { return path.empty() ? meshgen::ball(1, 1) : load_mesh(path); }

// ---------------------------------------------------------------------------

int solve_laplace(const std::string& cfg_path, const std::string& mesh_path, const std::string& s_text, bool dump,
                  const std::string& dir) {
  auto cfg = load_config(cfg_path);
  print_warnings(cfg);
  const auto ctx = CoupledContext::build(load_mesh(mesh_path), cfg.material);
  const auto s = parse_s(s_text);
  const auto set = ProbeSet::build(ctx, cfg.probes);
  const auto sys = assemble_system(ctx, s);
  if (dump) write_matrix_market(out_path(dir, "matrix.mtx"), sys.A);
  const auto sol = solve(sys, assemble_rhs(ctx, cfg, s), cfg.solver);
  write_solution(out_path(dir, "solution.csv"), sol);
  const auto ext = exterior_only(set);
  write_pressure(out_path(dir, "pressure.csv"), ext, reconstruct_pressure(ctx, sol, ext));
  Report rep{"solve-laplace", {}};
  rep.at_most("relative residual", "solver residual within tolerance", sol.diag.residual, cfg.solver.tol);
  rep.add("rcond", "reciprocal condition estimate (" + sol.diag.method + ")", 0, sol.diag.rcond, 0);
  rep.add("unknowns", detail::s_string(s), 0, sol.layout.size, 0);
  write_report(rep, out_path(dir, "report.json"));
  std::cout << "solved " << sol.layout.size << " unknowns at " << detail::s_string(s) << ", residual "
            << sol.diag.residual << "\n";
  return 0;
}

int solve_time(const std::string& cfg_path, const std::string& mesh_path, const std::string& rule, double dt,
               int steps, const std::string& dir) {
  auto cfg = load_config(cfg_path);
  print_warnings(cfg);
  if (!rule.empty()) cfg.cq.rule = rule;
  if (dt > 0) cfg.cq.dt = dt;
  if (steps > 0) cfg.cq.steps = steps;
  const auto ctx = CoupledContext::build(load_mesh(mesh_path), cfg.material);
  const auto set = ProbeSet::build(ctx, cfg.probes);
  const auto plan = CQPlan::make(cfg.cq);
  const auto ext = ExteriorLayer::build(ctx.mesh);
  const auto a = audit_time_domain(ctx, ext, cfg, plan);
  write_timeseries(probe_timeseries(ctx, a.run, set), out_path(dir, "probes.csv"));

  Report rep{"solve-time", {}};
  rep.at_most("causality residual before onset", "output vanishes before the data arrive",
              a.run.causality_residual(), 1e-6);
  rep.at_most("imaginary residue", "inverse transform is real", a.run.imag_residual, 1e-10);
  rep.at_most("max frequency residual", "per-frequency solver residual", a.run.solver_residual, cfg.solver.tol);
  if (!a.audit.zero_data) {
    rep.add("max ratio (primary shape)", "t^2/(1+t) max(1,t^6) bound shape", 0, a.audit.max_ratio_primary,
            std::isfinite(a.audit.max_ratio_primary) ? 0.0 : -1.0);
    rep.add("max ratio (secondary shape)", "t^(3/2)/(1+t)^(1/2) max(1,t^(13/2)) bound shape", 0,
            a.audit.max_ratio_secondary, std::isfinite(a.audit.max_ratio_secondary) ? 0.0 : -1.0);
    rep.at_most("ratio tail slope (primary shape)", "ratio does not grow late in the run", a.audit.tail_slope_primary,
                0.0);
  }
  write_report(rep, out_path(dir, "audit.json"));
  std::ofstream audit_csv(out_path(dir, "audit.csv"));
  audit_csv << "t,solution_norm,data_norm,integral,ratio_primary,ratio_secondary\n" << std::setprecision(12);
  for (std::size_t n = 0; n < a.audit.rows.size(); ++n) {
    const auto& r = a.audit.rows[n];
    audit_csv << r.t << ',' << r.solution << ',' << a.data_norm[n] << ',' << r.integral << ',' << r.ratio_primary
              << ',' << r.ratio_secondary << "\n";
  }
  std::cout << plan.samples() << " time steps (" << cq_rule_name(plan.rule) << ", dt = " << plan.dt << "), "
            << plan.independent() << " frequency solves in " << a.run.seconds << " s\n";
  return rep.pass() ? 0 : 1;
}

int run_verify(const std::string& suite, std::uint64_t seed, int level, const std::string& mesh_path,
               const std::string& cfg_path, const std::string& report_path) {
  verify::VerifyOptions opt;
  opt.seed = seed;
  opt.level = level;
  if (!mesh_path.empty()) opt.mesh = load_mesh(mesh_path);
  if (!cfg_path.empty()) {
    const auto cfg = load_config(cfg_path);
    print_warnings(cfg);
    opt.material = cfg.material;
  }
  const auto rep = verify::run_suite(suite, opt, [](const verify::CheckOutcome& c) {
    std::cout << (c.report.pass() ? "PASS " : "FAIL ") << c.check->id << " (" << std::fixed << std::setprecision(2)
              << c.seconds << " s)" << std::defaultfloat << "\n";
    for (const auto& e : c.report.entries)
      if (!e.pass) std::cout << "    " << e.quantity << ": actual " << e.actual << ", bound " << e.expected
                             << ", slack " << e.slack << "\n";
    std::cout.flush();
  });
  write_report(rep, report_path);
  std::cout << (rep.pass() ? "all checks passed" : "verification failed") << " (" << rep.entries.size()
            << " entries, report " << report_path << ")\n";
  return rep.pass() ? 0 : 1;
}

int estimate_symbol(const std::string& cfg_path, const std::string& mesh_path, const std::string& op,
                    std::vector<double> sigmas, double w0, double w1, int samples, const std::string& json_path) {
  const MaterialParams mat = cfg_path.empty() ? verify::desk_material() : load_config(cfg_path).material;
  const auto ctx = CoupledContext::build(mesh_or_desk(mesh_path), mat);
  const auto g = SurrogateNorms::build(ctx);
  SymbolSweep sw;
  sw.sigma_lines = std::move(sigmas);
  sw.omega_min = w0;
  sw.omega_max = w1;
  sw.samples = samples;
  std::function<double(const LaplaceParameter&)> norm;
  std::optional<ExteriorLayer> layer;
  if (op == "S" || op == "D") {
    layer = offset_layer(ctx);
    const bool single = op == "S";
    norm = [&, single](const LaplaceParameter& s) {
      const auto n = layer_potential_norms(ctx, *layer, g, s);
      return single ? n.single_layer : n.double_layer;
    };
  } else {
    norm = [&](const LaplaceParameter& s) { return inverse_operator_norm(assemble_system(ctx, s), g); };
  }
  const auto r = estimate_symbol_index(norm, sw);
  nlohmann::ordered_json j;
  j["operator"] = op;
  j["mu_hat"] = r.mu_hat;
  j["m_hat"] = r.m_hat;
  j["r2_min"] = r.r2_min;
  j["claimed"] = r.claimed();
  j["lines"] = nlohmann::ordered_json::array();
  for (const auto& l : r.lines) {
    nlohmann::ordered_json line{{"sigma", l.sigma}, {"slope", l.fit.slope}, {"r2", l.fit.r2},
                                {"raw_slope", l.raw_fit.slope}, {"omega", nlohmann::ordered_json::array()},
                                {"norm", l.norm}};
    for (const auto& s : l.s) line["omega"].push_back(s.imag());
    j["lines"].push_back(line);
  }
  std::cout << j.dump(2) << "\n";
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    if (!out) throw IoError("cannot write '" + json_path + "'");
    out << j.dump(2) << "\n";
  }
  return 0;
}

int reconstruct(const std::string& cfg_path, const std::string& mesh_path, const std::string& s_text, bool time,
                const std::string& dir) {
  auto cfg = load_config(cfg_path);
  print_warnings(cfg);
  const auto ctx = CoupledContext::build(load_mesh(mesh_path), cfg.material);
  const auto set = ProbeSet::build(ctx, cfg.probes);
  if (time) {
    const auto r = solve_time_domain(ctx, cfg, CQPlan::make(cfg.cq));
    write_timeseries(probe_timeseries(ctx, r, set), out_path(dir, "probes.csv"));
    write_derived(out_path(dir, "derived.csv"), derived_fields(ctx, r.x.bottomRows(1).transpose().cast<Complex>()));
    std::cout << "time series at " << set.probes.size() << " probes, derived fields at t = " << r.plan.time(r.plan.n_steps)
              << "\n";
    return 0;
  }
  if (s_text.empty()) throw ConfigError("reconstruct needs --s RE,IM or --time");
  const auto s = parse_s(s_text);
  const auto sol = solve(assemble_system(ctx, s), assemble_rhs(ctx, cfg, s), cfg.solver);
  const auto ext = exterior_only(set);
  write_pressure(out_path(dir, "pressure.csv"), ext, reconstruct_pressure(ctx, sol, ext));
  {
    std::ofstream out(out_path(dir, "interior.csv"));
    out << "probe,field,re,im\n" << std::setprecision(12);
    for (const auto& p : set.probes) {
      if (p.tag != ProbeTag::Interior) continue;
      const auto v = interpolate_interior(ctx, sol.x, p);
      const char* names[3] = {"u_x", "u_y", "u_z"};
      for (int i = 0; i < 3; ++i) out << p.label << ',' << names[i] << ',' << v.u[i].real() << ',' << v.u[i].imag() << "\n";
      out << p.label << ",theta," << v.theta.real() << ',' << v.theta.imag() << "\n";
      out << p.label << ",phi," << v.phi.real() << ',' << v.phi.imag() << "\n";
    }
  }
  write_derived(out_path(dir, "derived.csv"), derived_fields(ctx, sol));
  std::cout << "pressure at " << ext.probes.size() << " exterior probes, derived fields on " << ctx.mesh.num_tets()
            << " cells at " << detail::s_string(s) << "\n";
  return 0;
}

int make_mesh(const std::string& shape, int level, int shells, int n, const std::string& path) {
  CoupledMesh m;
  if (shape == "ball") m = meshgen::ball(level, shells);
  else if (shape == "cube") m = meshgen::cube(n);
  else if (shape == "tet") m = meshgen::reference_tet();
  else throw ConfigError("unknown shape '" + shape + "' (ball, cube, tet)");
  save_mesh(path, m);
  std::cout << m.num_vertices() << " vertices, " << m.num_tets() << " tets, " << m.num_boundary_tris()
            << " boundary triangles -> " << path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled piezo-thermo-elastic / acoustic scattering: FEM-BEM solver in the Laplace and time domains"};
  app.require_subcommand(1);

  std::string cfg_path, mesh_path, s_text, dir = ".", rule, suite, report_path = "report.json", op = "Ainv", json_path,
                                         shape = "ball";
  bool dump = false, time = false;
  double dt = 0, w0 = 1, w1 = 8;
  int steps = 0, level = 1, samples = 8, shells = 1, n = 1;
  std::uint64_t seed = 0;
  std::vector<double> sigmas{1.0};

  auto* sl = app.add_subcommand("solve-laplace", "Solve the coupled system at one Laplace parameter s");
  sl->add_option("--config", cfg_path, "Problem configuration (JSON)")->required();
  sl->add_option("--mesh", mesh_path, "Tetrahedral mesh")->required();
  sl->add_option("--s", s_text, "Laplace parameter RE,IM with RE > 0")->required();
  sl->add_flag("--dump-matrix", dump, "Also write the system matrix (Matrix Market)");
  sl->add_option("--out", dir, "Output directory")->capture_default_str();

  auto* st = app.add_subcommand("solve-time", "Time-domain run by convolution quadrature, with probe CSV and audit");
  st->add_option("--config", cfg_path, "Problem configuration (JSON)")->required();
  st->add_option("--mesh", mesh_path, "Tetrahedral mesh")->required();
  st->add_option("--rule", rule, "bdf1 | bdf2 | trapezoidal (default: from config)");
  st->add_option("--dt", dt, "Time step (default: from config)");
  st->add_option("--steps", steps, "Number of steps N (default: from config)");
  st->add_option("--out", dir, "Output directory")->capture_default_str();

  auto* vf = app.add_subcommand("verify", "Run a verification suite and write a JSON report");
  vf->add_option("suite", suite, "kernel | boundary | interior | coupled | cq | norms | all")->required();
  vf->add_option("--seed", seed, "Seed for randomized checks")->capture_default_str();
  vf->add_option("--level", level, "Base refinement level")->capture_default_str()->check(CLI::Range(1, 4));
  vf->add_option("--mesh", mesh_path, "Mesh replacing the default ball in the interior, norms and coupled checks");
  vf->add_option("--config", cfg_path, "Take the material from this configuration");
  vf->add_option("--report", report_path, "Report path")->capture_default_str();

  auto* es = app.add_subcommand("estimate-symbol", "Fit the growth exponent of |S(s)|, |D(s)| or |A(s)^-1|");
  es->add_option("--operator", op, "S | D | Ainv")->capture_default_str()->check(CLI::IsMember({"S", "D", "Ainv"}));
  es->add_option("--config", cfg_path, "Take the material from this configuration");
  es->add_option("--mesh", mesh_path, "Mesh (default: ball level 1)");
  es->add_option("--sigma", sigmas, "Real parts of the sampled lines")->capture_default_str();
  es->add_option("--omega-min", w0, "Smallest imaginary part")->capture_default_str();
  es->add_option("--omega-max", w1, "Largest imaginary part")->capture_default_str();
  es->add_option("--samples", samples, "Samples per line (>= 8)")->capture_default_str();
  es->add_option("--json", json_path, "Also write the result to this file");

  auto* rc = app.add_subcommand("reconstruct", "Pressure at exterior probes, interior fields and derived outputs");
  rc->add_option("--config", cfg_path, "Problem configuration (JSON)")->required();
  rc->add_option("--mesh", mesh_path, "Tetrahedral mesh")->required();
  auto* s_opt = rc->add_option("--s", s_text, "Laplace parameter RE,IM");
  rc->add_flag("--time", time, "Time series over the CQ settings of the configuration")->excludes(s_opt);
  rc->add_option("--out", dir, "Output directory")->capture_default_str();

  auto* mm = app.add_subcommand("make-mesh", "Write a generated mesh");
  mm->add_option("--shape", shape, "ball | cube | tet")->capture_default_str();
  mm->add_option("--level", level, "Icosphere level of the ball")->capture_default_str();
  mm->add_option("--shells", shells, "Prism shells of the ball")->capture_default_str();
  mm->add_option("--n", n, "Cube subdivisions per axis")->capture_default_str();
  mm->add_option("--out", report_path, "Mesh path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sl) return solve_laplace(cfg_path, mesh_path, s_text, dump, dir);
    if (*st) return solve_time(cfg_path, mesh_path, rule, dt, steps, dir);
    if (*vf) return run_verify(suite, seed, level, mesh_path, cfg_path, report_path);
    if (*es) return estimate_symbol(cfg_path, mesh_path, op, sigmas, w0, w1, samples, json_path);
    if (*rc) return reconstruct(cfg_path, mesh_path, s_text, time, dir);
    if (*mm) return make_mesh(shape, level, shells, n, report_path);
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
