#include "strang/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <set>
#include <sstream>

namespace strang {

namespace {

constexpr double kExactThreshold = 1e-9;

std::string num(double x) {
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9e", x);
  return buf;
}

std::string num(const std::optional<double>& x) { return x ? num(*x) : "-"; }

std::string eoc_text(const Eoc& e) {
  if (e.exact) return "exact";
  if (!e.value) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *e.value);
  return buf;
}

std::vector<Eoc> eocs(const std::vector<double>& h, const std::vector<std::optional<double>>& e) {
  std::vector<Eoc> out(h.size());
  for (std::size_t i = 1; i < h.size(); ++i) {
    if (!e[i - 1] || !e[i]) continue;
    if (std::max(std::abs(*e[i - 1]), std::abs(*e[i])) <= kExactThreshold) {
      out[i].exact = true;
    } else {
      out[i].value = eoc(*e[i - 1], *e[i], h[i - 1], h[i]);
    }
  }
  return out;
}

template <class Row, class Get>
std::vector<Eoc> column_eocs(const std::vector<Row>& rows, Get get) {
  std::vector<double> h;
  std::vector<std::optional<double>> e;
  for (const Row& r : rows) {
    h.push_back(r.h);
    e.push_back(get(r));
  }
  return eocs(h, e);
}

struct SchemeName {
  enum Family { tpfa, hmm, mpfa, vem, dg } family;
  int k = 1;
  MpfaStrategy strategy = MpfaStrategy::uniform;
};

SchemeName parse_scheme(const StudySpec& spec) {
  const std::string& s = spec.scheme;
  SchemeName out{SchemeName::tpfa};
  auto degree = [&](const std::string& prefix, int lo, int hi) {
    const std::string rest = s.substr(prefix.size());
    int k = spec.k;
    if (!rest.empty()) {
      if (rest.size() != 1 || rest[0] < '0' || rest[0] > '9') throw StudyError("unknown scheme '" + s + "'", 2);
      k = rest[0] - '0';
      if (spec.k != 0 && spec.k != k) throw StudyError("degree " + std::to_string(spec.k) + " conflicts with " + s, 2);
    }
    if (k < lo || k > hi) throw StudyError(prefix + ": degree must be in [" + std::to_string(lo) + ", " +
                                               std::to_string(hi) + "]", 2);
    return k;
  };
  if (s == "tpfa") {
    out.family = SchemeName::tpfa;
  } else if (s == "hmm") {
    out.family = SchemeName::hmm;
  } else if (s.rfind("mpfa-", 0) == 0) {
    out.family = SchemeName::mpfa;
    const std::string v = s.substr(5);
    if (v == "uniform")
      out.strategy = MpfaStrategy::uniform;
    else if (v == "l")
      out.strategy = MpfaStrategy::l_proxy;
    else if (v == "g")
      out.strategy = MpfaStrategy::g_proxy;
    else
      throw StudyError("unknown scheme '" + s + "'", 2);
    if (spec.mpfa) out.strategy = *spec.mpfa;
  } else if (s.rfind("vem", 0) == 0) {
    out.family = SchemeName::vem;
    out.k = degree("vem", 1, 2);
  } else if (s.rfind("dg", 0) == 0) {
    out.family = SchemeName::dg;
    out.k = degree("dg", 1, 3);
  } else {
    throw StudyError("unknown scheme '" + s + "'", 2);
  }
  return out;
}

ScalarField projector_function(const std::string& name) {
  using std::numbers::pi;
  if (name == "sine")
    return {[](const Point& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); },
            [](const Point& x) {
              return Point(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()), pi * std::sin(pi * x.x()) * std::cos(pi * x.y()));
            }};
  if (name == "affine")
    return {[](const Point& x) { return 1.0 + 2.0 * x.x() - 3.0 * x.y(); }, [](const Point&) { return Point(2.0, -3.0); }};
  if (name == "wave")
    return {[](const Point& x) { return std::sin(2.0 * x.x() + 0.5) * std::exp(x.y()); },
            [](const Point& x) {
              return Point(2.0 * std::cos(2.0 * x.x() + 0.5) * std::exp(x.y()), std::sin(2.0 * x.x() + 0.5) * std::exp(x.y()));
            }};
  throw StudyError("unknown function '" + name + "'", 2);
}

}  // namespace

void apply_mesh_family(StudySpec& spec, const std::string& family) {
  if (family == "cartesian") {
    spec.perturb = 0.0;
    return;
  }
  if (family.rfind("perturbed:", 0) == 0) {
    const std::string rest = family.substr(10);
    const auto colon = rest.find(':');
    try {
      spec.perturb = std::stod(rest.substr(0, colon));
      if (colon != std::string::npos) spec.seed = std::stoull(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw StudyError("bad mesh family '" + family + "'", 2);
    }
    if (!(spec.perturb >= 0.0)) throw StudyError("bad mesh family '" + family + "'", 2);
    return;
  }
  throw StudyError("unknown mesh family '" + family + "'", 2);
}

std::uint64_t default_seed() {
  const char* env = std::getenv("STRANG_LAB_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    return std::stoull(env);
  } catch (const std::exception&) {
    throw StudyError(std::string("STRANG_LAB_SEED is not an unsigned integer: ") + env, 2);
  }
}

std::vector<std::string> scheme_names() {
  return {"tpfa", "hmm", "mpfa-uniform", "mpfa-l", "mpfa-g", "vem1", "vem2", "dg1", "dg2", "dg3"};
}

ManufacturedCase study_case(const StudySpec& spec) {
  try {
    return make_case(spec.case_name, spec.params);
  } catch (const std::invalid_argument& e) {
    throw StudyError(e.what(), 2);
  }
}

std::shared_ptr<const Mesh> study_mesh(const StudySpec& spec, std::size_t level) {
  const std::size_t n = spec.n0 << level;
  const ManufacturedCase c = study_case(spec);
  const auto strips = std::size_t(c.field.num_subdomains());
  if (n % strips != 0) throw StudyError("mesh size " + std::to_string(n) + " does not resolve the subdomains", 2);
  Mesh mesh = build_cartesian(n, n, {}, strips);
  if (spec.perturb > 0.0) mesh = perturb(mesh, spec.perturb, spec.seed + level);
  return std::make_shared<const Mesh>(std::move(mesh));
}

BuiltScheme build_scheme(const StudySpec& spec, std::shared_ptr<const Mesh> mesh, const ManufacturedCase& c) {
  const SchemeName name = parse_scheme(spec);
  BuiltScheme out;
  switch (name.family) {
    case SchemeName::tpfa:
      try {
        out.fluxes = tpfa_fluxes(*mesh, c.field, spec.exec);
      } catch (const FvError& e) {
        throw StudyError(e.what(), 3);
      }
      out.scheme = assemble_hybrid_fv(mesh, *out.fluxes, c);
      break;
    case SchemeName::hmm:
      out.fluxes = hmm_fluxes(*mesh, c.field, spec.stab_scale, spec.exec);
      out.scheme = assemble_hybrid_fv(mesh, *out.fluxes, c);
      break;
    case SchemeName::mpfa:
      out.fluxes = mpfa_fluxes(*mesh, c.field, name.strategy, spec.exec);
      out.scheme = assemble_cellcentred_fv(mesh, *out.fluxes, c);
      break;
    case SchemeName::vem:
      out.scheme = assemble_vem(mesh, name.k, c, spec.exec);
      out.degree = name.k;
      out.polynomial_reconstruction = true;
      break;
    case SchemeName::dg:
      out.scheme = assemble_swip(mesh, name.k, spec.eta, c, spec.exec);
      out.degree = name.k;
      out.polynomial_reconstruction = true;
      break;
  }
  return out;
}

std::vector<Eoc> ConvergenceReport::eoc_energy() const {
  return column_eocs(rows, [](const ConvergenceRow& r) { return std::optional<double>(r.err_energy); });
}
std::vector<Eoc> ConvergenceReport::eoc_energy_recons() const {
  return column_eocs(rows, [](const ConvergenceRow& r) { return r.err_energy_recons; });
}
std::vector<Eoc> ConvergenceReport::eoc_l2() const {
  return column_eocs(rows, [](const ConvergenceRow& r) { return std::optional<double>(r.err_l2); });
}
std::vector<Eoc> ConvergenceReport::eoc_cons_dual() const {
  return column_eocs(rows, [](const ConvergenceRow& r) { return std::optional<double>(r.cons_dual); });
}

bool ConvergenceReport::all_coercive() const {
  return std::all_of(rows.begin(), rows.end(), [](const ConvergenceRow& r) { return r.coercive; });
}

bool ConvergenceReport::slacks_ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const ConvergenceRow& r) { return !r.coercive || r.bound_ok; });
}

int ConvergenceReport::exit_code() const {
  if (!all_coercive()) return 4;
  return slacks_ok() ? 0 : 1;
}

ConvergenceReport run_convergence(const StudySpec& spec) {
  if (spec.levels < 2) throw StudyError("at least two levels are needed for rates", 2);
  const ManufacturedCase c = study_case(spec);
  ConvergenceReport report;
  report.spec = spec;
  for (std::size_t level = 0; level < spec.levels; ++level) {
    const auto mesh = study_mesh(spec, level);
    const BuiltScheme built = build_scheme(spec, mesh, c);
    const DiscreteScheme& s = built.scheme;
    ConvergenceRow row;
    row.level = level;
    row.n = spec.n0 << level;
    row.h = regularity_metrics(*mesh).h;
    row.ndof = s.ndof();
    row.warnings = s.warnings;

    const Stability st = stability_constant(s, spec.seed);
    row.gamma_num = st.gamma;
    row.gamma_theory = st.theory;
    row.coercive = st.coercive;
    VectorXd u_h;
    if (st.coercive) {
      const BoundReport br = verify_energy_bound(s, c, spec.seed, st);
      u_h = br.u_h;
      row.err_energy = br.err_norm;
      row.cons_dual = br.cons_dual;
      row.slack_upper = br.slack_upper;
      row.slack_lower = br.slack_lower;
      row.bound_ok = br.ok;
    } else {
      u_h = solve_scheme(s);
      const VectorXd w = u_h - s.interpolate(c);
      row.err_energy = std::sqrt(std::max(0.0, w.dot(s.NX * w)));
      row.cons_dual = consistency_dual_norm(s, c);
    }
    const FieldErrors fe = reconstruction_errors(*mesh, s.reconstruct(s.expand(u_h, true)), c);
    row.err_l2 = fe.l2;
    if (built.polynomial_reconstruction) row.err_energy_recons = fe.energy;
    report.rows.push_back(std::move(row));
  }
  return report;
}

double lsq_slope(const std::vector<double>& h, const std::vector<double>& e) {
  const std::size_t n = h.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(h[i]), y = std::log(e[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (double(n) * sxy - sx * sy) / (double(n) * sxx - sx * sx);
}

std::string convergence_csv(const ConvergenceReport& r) {
  std::ostringstream out;
  out << "level,h,ndof,err_energy,err_energy_recons,err_l2,cons_dual,gamma_num,gamma_theory,slack_upper,slack_lower,"
         "eoc_energy,eoc_l2\n";
  const std::vector<Eoc> ee = r.eoc_energy(), el = r.eoc_l2();
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const ConvergenceRow& row = r.rows[i];
    out << row.level << ',' << num(row.h) << ',' << row.ndof << ',' << num(row.err_energy) << ','
        << num(row.err_energy_recons) << ',' << num(row.err_l2) << ',' << num(row.cons_dual) << ','
        << num(row.gamma_num) << ',' << num(row.gamma_theory) << ',' << num(row.slack_upper) << ','
        << num(row.slack_lower) << ',' << eoc_text(ee[i]) << ',' << eoc_text(el[i]) << '\n';
  }
  return out.str();
}

std::string convergence_markdown(const ConvergenceReport& r) {
  std::ostringstream out;
  out << "### " << r.spec.scheme << " / " << r.spec.case_name << "\n\n";
  out << "| level | n | h | ndof | err_energy | eoc | err_energy_recons | eoc | err_l2 | eoc | cons_dual | eoc | gamma |\n";
  out << "|---|---|---|---|---|---|---|---|---|---|---|---|---|\n";
  const std::vector<Eoc> ee = r.eoc_energy(), er = r.eoc_energy_recons(), el = r.eoc_l2(), ec = r.eoc_cons_dual();
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const ConvergenceRow& row = r.rows[i];
    out << "| " << row.level << " | " << row.n << " | " << num(row.h) << " | " << row.ndof << " | "
        << num(row.err_energy) << " | " << eoc_text(ee[i]) << " | " << num(row.err_energy_recons) << " | "
        << eoc_text(er[i]) << " | " << num(row.err_l2) << " | " << eoc_text(el[i]) << " | " << num(row.cons_dual)
        << " | " << eoc_text(ec[i]) << " | " << num(row.gamma_num) << " |\n";
  }
  std::vector<double> h, e, l;
  for (const ConvergenceRow& row : r.rows) {
    h.push_back(row.h);
    e.push_back(row.err_energy);
    l.push_back(row.err_l2);
  }
  if (std::all_of(e.begin(), e.end(), [](double x) { return x > kExactThreshold; }))
    out << "\nleast-squares slope, energy: " << eoc_text({lsq_slope(h, e), false}) << '\n';
  if (std::all_of(l.begin(), l.end(), [](double x) { return x > kExactThreshold; }))
    out << "least-squares slope, L2: " << eoc_text({lsq_slope(h, l), false}) << '\n';
  std::set<std::string> seen;
  for (const ConvergenceRow& row : r.rows)
    for (const std::string& w : row.warnings)
      if (seen.insert(w).second) out << "\nwarning: " << w << '\n';
  return out.str();
}

std::vector<Eoc> AuditReport::eoc_primal_dual() const {
  return column_eocs(rows, [](const AuditRow& r) {
    return r.duality ? std::optional<double>(std::abs(r.duality->primal_dual)) : std::nullopt;
  });
}

int AuditReport::exit_code() const {
  bool coercive = true, ok = true;
  for (const AuditRow& r : rows) {
    coercive = coercive && r.coercive;
    ok = ok && (!r.coercive || r.bound.ok);
  }
  if (!coercive) return 4;
  return ok ? 0 : 1;
}

AuditReport run_bound_audit(const StudySpec& spec) {
  const ManufacturedCase c = study_case(spec);
  const bool constant_field = c.field.num_subdomains() == 1;
  const ManufacturedCase z = case_smooth_sine(constant_field ? c.field.tensor(0) : Matrix2d::Identity());
  AuditReport report;
  report.spec = spec;
  for (std::size_t level = 0; level < spec.levels; ++level) {
    const auto mesh = study_mesh(spec, level);
    const BuiltScheme built = build_scheme(spec, mesh, c);
    const DiscreteScheme& s = built.scheme;
    AuditRow row;
    row.level = level;
    row.h = regularity_metrics(*mesh).h;
    const Stability st = stability_constant(s, spec.seed);
    row.coercive = st.coercive;
    if (st.coercive) {
      row.bound = verify_energy_bound(s, c, spec.seed, st);
    } else {
      row.bound.gamma = st.gamma;
      row.bound.gamma_theory = st.theory;
    }
    if (s.symmetric && s.reconstruct && constant_field) row.duality = aubin_nitsche_identity(s, c, z);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string audit_csv(const AuditReport& r) {
  std::ostringstream out;
  out << "level,h,ndof,err_energy,cons_dual,gamma_num,gamma_theory,form_norm,slack_upper,slack_lower,defect,ok,"
         "an_residual,primal_dual,eoc_primal_dual\n";
  const std::vector<Eoc> pd = r.eoc_primal_dual();
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const AuditRow& row = r.rows[i];
    const BoundReport& b = row.bound;
    out << row.level << ',' << num(row.h) << ',' << b.u_h.size() << ',' << num(b.err_norm) << ','
        << num(b.cons_dual) << ',' << num(b.gamma) << ',' << num(b.gamma_theory) << ',' << num(b.form_norm) << ','
        << (row.coercive ? num(b.slack_upper) : "-") << ',' << (row.coercive ? num(b.slack_lower) : "-") << ','
        << num(b.defect) << ',' << (row.coercive ? (b.ok ? "pass" : "FAILED") : "not-coercive") << ','
        << (row.duality ? num(row.duality->residual) : "-") << ','
        << (row.duality ? num(row.duality->primal_dual) : "-") << ',' << eoc_text(pd[i]) << '\n';
  }
  return out.str();
}

SweepReport run_anisotropy_sweep(const StudySpec& spec, const std::vector<double>& eps) {
  if (eps.empty()) throw StudyError("empty eps list", 2);
  SweepReport report;
  for (double e : eps) {
    if (!(e > 0.0)) throw StudyError("eps must be positive", 2);
    StudySpec s = spec;
    s.case_name = "smooth-sine";
    s.params.K = make_tensor(1.0, 0.0, e);
    const ManufacturedCase c = study_case(s);
    const TensorInfo info = tensor_info(s.params.K);
    SweepRow row;
    row.eps = e;
    for (std::size_t level = 0; level < s.levels; ++level) {
      const auto mesh = study_mesh(s, level);
      const BuiltScheme built = build_scheme(s, mesh, c);
      const VectorXd w = solve_scheme(built.scheme) - built.scheme.interpolate(c);
      const double h = regularity_metrics(*mesh).h;
      const double err = std::sqrt(w.dot(built.scheme.NX * w));
      row.h.push_back(h);
      row.err.push_back(err);
      row.normalized.push_back(err / (std::sqrt(info.alpha() * info.lambda_max) * std::pow(h, built.degree)));
    }
    report.rows.push_back(std::move(row));
  }
  double lo = INFINITY, hi = 0.0;
  for (const SweepRow& r : report.rows) {
    lo = std::min(lo, r.normalized.back());
    hi = std::max(hi, r.normalized.back());
  }
  report.ratio = hi / lo;
  return report;
}

std::string sweep_csv(const SweepReport& r) {
  std::ostringstream out;
  out << "eps,level,h,err_energy,normalized\n";
  for (const SweepRow& row : r.rows)
    for (std::size_t i = 0; i < row.h.size(); ++i)
      out << num(row.eps) << ',' << i << ',' << num(row.h[i]) << ',' << num(row.err[i]) << ','
          << num(row.normalized[i]) << '\n';
  out << "# ratio," << num(r.ratio) << '\n';
  return out.str();
}

std::vector<ProjectorRateRow> run_projector_rates(const ProjectorSpec& spec) {
  if (!(spec.eps > 0.0)) throw StudyError("eps must be positive", 2);
  if (spec.k < 0 || spec.k > 4) throw StudyError("projector degree must be in [0, 4]", 2);
  std::vector<std::size_t> sizes;
  for (std::size_t l = 0; l < spec.levels; ++l) sizes.push_back(spec.n0 << l);
  return projector_rate_study(spec.kind, make_tensor(1.0, 0.0, spec.eps), projector_function(spec.function), spec.k,
                              sizes, spec.closure);
}

std::string projector_csv(const std::vector<ProjectorRateRow>& rows) {
  std::ostringstream out;
  out << "n,h,err_l2,err_h1,err_weighted,err_trace,eoc_l2,eoc_h1,eoc_weighted,eoc_trace\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ProjectorRateRow& r = rows[i];
    auto rate = [&](double v, double e0, double e1) {
      if (i == 0) return std::string("-");
      if (std::max(e0, e1) <= kExactThreshold) return std::string("exact");
      return eoc_text({v, false});
    };
    const ProjectorRateRow* p = i > 0 ? &rows[i - 1] : &r;
    out << r.n << ',' << num(r.h) << ',' << num(r.err_l2) << ',' << num(r.err_h1) << ',' << num(r.err_weighted) << ','
        << num(r.err_trace) << ',' << rate(r.eoc_l2, p->err_l2, r.err_l2) << ','
        << rate(r.eoc_h1, p->err_h1, r.err_h1) << ',' << rate(r.eoc_weighted, p->err_weighted, r.err_weighted) << ','
        << rate(r.eoc_trace, p->err_trace, r.err_trace) << '\n';
  }
  return out.str();
}

}  // namespace strang
