// strang-lab: command-line front end for the study harness.
//
// Exit codes: 0 ok, 1 bound slack failure or invalid mesh, 2 unknown
// scheme/case or bad arguments, 3 TPFA mesh not K-admissible, 4 scheme not
// coercive (report still written).

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "strang/study.hpp"

using namespace strang;

namespace {

struct Common {
  StudySpec spec;
  std::string family = "cartesian";
  std::string levels = "8:4";
  std::string mpfa;
  std::string out;
  double eps = 1.0;
  double contrast = 4.0;
  bool serial = false;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--scheme", c.spec.scheme, "tpfa|hmm|mpfa-uniform|mpfa-l|mpfa-g|vem1|vem2|dg1|dg2|dg3");
  app->add_option("--case", c.spec.case_name, "affine|smooth-sine|quadratic|layered");
  app->add_option("--k", c.spec.k, "degree for vem/dg when the scheme name has none");
  app->add_option("--mesh", c.family, "cartesian | perturbed:amplitude:seed");
  app->add_option("--levels", c.levels, "N0:L, L levels starting from N0 x N0");
  app->add_option("--perturb", c.spec.perturb, "vertex perturbation amplitude");
  app->add_option("--seed", c.seed, "random seed (default: STRANG_LAB_SEED or 0)");
  app->add_option("--eta", c.spec.eta, "DG penalty");
  app->add_option("--stab-scale", c.spec.stab_scale, "HMM stabilisation scale");
  app->add_option("--mpfa-strategy", c.mpfa, "uniform|l|g");
  app->add_option("--eps", c.eps, "K = diag(1, eps) for constant-coefficient cases");
  app->add_option("--contrast", c.contrast, "right/left diffusivity of the layered case");
  app->add_option("--out", c.out, "CSV output path (default stdout)");
  app->add_flag("--serial", c.serial, "serial reference kernels");
}

StudySpec finish(Common& c) {
  StudySpec& s = c.spec;
  // Seed precedence: --seed, then the family string, then STRANG_LAB_SEED.
  const double perturb = s.perturb;
  s.seed = default_seed();
  apply_mesh_family(s, c.family);
  if (c.family == "cartesian") s.perturb = perturb;
  if (c.seed) s.seed = *c.seed;
  const auto colon = c.levels.find(':');
  try {
    s.n0 = std::stoul(c.levels.substr(0, colon));
    s.levels = colon == std::string::npos ? 1 : std::stoul(c.levels.substr(colon + 1));
  } catch (const std::exception&) {
    throw StudyError("bad --levels '" + c.levels + "'", 2);
  }
  if (s.n0 == 0) throw StudyError("bad --levels '" + c.levels + "'", 2);
  if (!c.mpfa.empty()) {
    if (c.mpfa == "uniform")
      s.mpfa = MpfaStrategy::uniform;
    else if (c.mpfa == "l")
      s.mpfa = MpfaStrategy::l_proxy;
    else if (c.mpfa == "g")
      s.mpfa = MpfaStrategy::g_proxy;
    else
      throw StudyError("unknown mpfa strategy '" + c.mpfa + "'", 2);
  }
  if (!(c.eps > 0.0) || !(c.contrast > 0.0)) throw StudyError("eps and contrast must be positive", 2);
  s.params.K = make_tensor(1.0, 0.0, c.eps);
  s.params.k_right = c.contrast;
  s.exec = c.serial ? Exec::serial : Exec::parallel;
  return s;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw StudyError("cannot write " + path, 2);
  f << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polytopal discretisation lab for -div(K grad u) = f"};
  app.require_subcommand(1);

  Common study_opts;
  bool markdown = false;
  CLI::App* study = app.add_subcommand("study", "convergence table over a mesh sequence");
  add_common(study, study_opts);
  study->add_flag("--markdown", markdown, "also print a Markdown table to stdout");

  Common audit_opts;
  CLI::App* audit = app.add_subcommand("bound-audit", "energy bound slacks and the duality identity per level");
  add_common(audit, audit_opts);

  Common sweep_opts;
  std::vector<double> eps_list{1.0, 1e-2, 1e-4};
  sweep_opts.levels = "8:3";
  sweep_opts.spec.scheme = "vem1";
  CLI::App* sweep = app.add_subcommand("sweep", "anisotropy sweep with K = diag(1, eps)");
  add_common(sweep, sweep_opts);
  sweep->add_option("--eps-list", eps_list, "eps values");

  ProjectorSpec proj;
  std::string proj_kind = "oblique", closure = "cell-mean", proj_out, proj_levels = "4:4";
  CLI::App* rates = app.add_subcommand("projector-rates", "approximation rates of the L2 and oblique projectors");
  rates->add_option("--projector", proj_kind, "l2|oblique");
  rates->add_option("--k", proj.k, "degree");
  rates->add_option("--eps", proj.eps, "K = diag(1, eps)");
  rates->add_option("--function", proj.function, "sine|affine|wave");
  rates->add_option("--levels", proj_levels, "N0:L");
  rates->add_option("--closure", closure, "cell-mean|boundary-mean");
  rates->add_option("--out", proj_out, "CSV output path (default stdout)");

  CLI::App* mesh_cmd = app.add_subcommand("mesh", "mesh utilities");
  mesh_cmd->require_subcommand(1);
  std::string validate_path;
  CLI::App* validate = mesh_cmd->add_subcommand("validate", "check invariants and print regularity metrics as JSON");
  validate->add_option("path", validate_path, "mesh file")->required();
  std::size_t gen_nx = 8, gen_ny = 0, gen_strips = 1;
  double gen_perturb = 0.0;
  std::optional<std::uint64_t> gen_seed;
  std::string gen_out;
  CLI::App* gen = mesh_cmd->add_subcommand("gen", "write a Cartesian or perturbed mesh");
  gen->add_option("--nx", gen_nx, "cells in x");
  gen->add_option("--ny", gen_ny, "cells in y (default nx)");
  gen->add_option("--strips", gen_strips, "vertical subdomain strips");
  gen->add_option("--perturb", gen_perturb, "vertex perturbation amplitude");
  gen->add_option("--seed", gen_seed, "random seed (default: STRANG_LAB_SEED or 0)");
  gen->add_option("--out", gen_out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*study) {
      const ConvergenceReport r = run_convergence(finish(study_opts));
      emit(study_opts.out, convergence_csv(r));
      if (markdown) std::cout << convergence_markdown(r);
      for (const ConvergenceRow& row : r.rows)
        for (const std::string& w : row.warnings) std::cerr << "warning: " << w << '\n';
      return r.exit_code();
    }
    if (*audit) {
      const AuditReport r = run_bound_audit(finish(audit_opts));
      emit(audit_opts.out, audit_csv(r));
      return r.exit_code();
    }
    if (*sweep) {
      const SweepReport r = run_anisotropy_sweep(finish(sweep_opts), eps_list);
      emit(sweep_opts.out, sweep_csv(r));
      return 0;
    }
    if (*rates) {
      if (proj_kind == "l2")
        proj.kind = ProjectorKind::l2;
      else if (proj_kind == "oblique")
        proj.kind = ProjectorKind::oblique;
      else
        throw StudyError("unknown projector '" + proj_kind + "'", 2);
      if (closure == "cell-mean")
        proj.closure = Closure::cell_mean;
      else if (closure == "boundary-mean")
        proj.closure = Closure::boundary_mean;
      else
        throw StudyError("unknown closure '" + closure + "'", 2);
      const auto colon = proj_levels.find(':');
      proj.n0 = std::stoul(proj_levels.substr(0, colon));
      proj.levels = colon == std::string::npos ? 1 : std::stoul(proj_levels.substr(colon + 1));
      emit(proj_out, projector_csv(run_projector_rates(proj)));
      return 0;
    }
    if (*validate) {
      nlohmann::json j;
      j["path"] = validate_path;
      try {
        const Mesh m = read_mesh(validate_path);
        const RegularityMetrics rm = regularity_metrics(m);
        j["valid"] = true;
        j["cells"] = m.num_cells();
        j["faces"] = m.num_faces();
        j["vertices"] = m.num_vertices();
        j["h"] = rm.h;
        j["theta"] = rm.theta;
        j["eta_jump"] = rm.eta_jump;
        j["max_faces_per_cell"] = rm.max_faces_per_cell;
      } catch (const MeshError& e) {
        j["valid"] = false;
        j["error"] = e.what();
      }
      std::cout << j.dump(2) << '\n';
      return j["valid"].get<bool>() ? 0 : 1;
    }
    if (*gen) {
      Mesh m = build_cartesian(gen_nx, gen_ny == 0 ? gen_nx : gen_ny, {}, gen_strips);
      if (gen_perturb > 0.0) m = perturb(m, gen_perturb, gen_seed ? *gen_seed : default_seed());
      emit(gen_out, format_mesh(m));
      return 0;
    }
  } catch (const StudyError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
