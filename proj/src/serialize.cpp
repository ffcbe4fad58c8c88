#include "minimax/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace minimax {

std::string format_real(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Json json_real(Real v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

Json matrix_json(const Matrix& m) {
  Json data = Json::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const Json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto& data = j.at("data");
  if (static_cast<Index>(data.size()) != rows * cols)
    throw InvalidArgument("matrix_from_json: data length does not match rows*cols");
  Matrix m(rows, cols);
  Index i = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(i++)].get<Real>();
  return m;
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const Json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<Real>();
  return v;
}

Json xi_point_json(const XiPoint& p) {
  return Json{{"index", p.index}, {"coords", vector_json(p.coords)}};
}

Json solution_json(const MinimaxSolution& sol) {
  Json inner = Json::array();
  for (const auto& ip : sol.inner_maximizers)
    inner.push_back(Json{{"xi", xi_point_json(ip.xi)}, {"value", ip.value}});
  return Json{{"gamma_hat", vector_json(sol.gamma_hat)},
              {"theta_hat", sol.theta_hat},
              {"status", to_string(sol.status)},
              {"iterations", sol.iterations},
              {"kkt_residual", json_real(sol.kkt_residual)},
              {"inner_maximizers", std::move(inner)},
              {"source",
               Json{{"kind", sol.source.kind == SourceTag::Kind::population ? "population"
                                                                            : "sample"},
                    {"N", sol.source.N},
                    {"seed", sol.source.seed},
                    {"synthetic", sol.source.synthetic}}}};
}

Json certificate_json(const Certificate& c) {
  return Json{{"name", c.name},
              {"applicable", c.applicable},
              {"pass", c.pass},
              {"witness", json_real(c.witness)},
              {"detail", c.detail}};
}

Json reduction_json(const ReductionData& rd) {
  Json active = Json::array();
  for (const auto& p : rd.active)
    active.push_back(Json{{"xi", xi_point_json(p.xi)},
                          {"value", p.value},
                          {"isolated", p.isolated}});
  Json phi = Json::array();
  for (const auto& d : rd.phi)
    phi.push_back(Json{{"grad", vector_json(d.grad)}, {"hess", matrix_json(d.hess)}});
  Json mult{{"unique", rd.multipliers.unique},
            {"residual", json_real(rd.multipliers.residual)},
            {"min_sigma_differenced", json_real(rd.multipliers.min_sigma_differenced)}};
  if (rd.multipliers.unique)
    mult["lambda"] = vector_json(rd.multipliers.lambda);
  else
    mult["vertices"] = matrix_json(rd.multipliers.vertices);
  Json certs = Json::array();
  for (const auto& c : rd.certificates) certs.push_back(certificate_json(c));
  return Json{{"gamma_star", vector_json(rd.gamma_star)},
              {"active", std::move(active)},
              {"phi", std::move(phi)},
              {"multipliers", std::move(mult)},
              {"index_sets",
               Json{{"I_plus", rd.index_sets.I_plus},
                    {"I_zero", rd.index_sets.I_zero},
                    {"L_basis", matrix_json(rd.index_sets.L_basis)}}},
              {"H", matrix_json(rd.H)},
              {"certificates", std::move(certs)},
              {"min_active_separation", json_real(rd.min_active_separation)},
              {"strict_complementarity", rd.strict_complementarity},
              {"degenerate_k_n_plus_1", rd.degenerate_k_n_plus_1}};
}

Json solution_model_json(const SolutionLimitModel& model) {
  return Json{{"mode", to_string(model.mode)},
              {"sigma", matrix_json(model.sigma)},
              {"sigma_source", to_string(model.sigma_source)},
              {"plug_in_point", model.plug_in_point},
              {"gaussian_cov", matrix_json(model.gaussian_cov)},
              {"reduction", reduction_json(model.reduction)}};
}

Json value_model_json(const ValueLimitModel& model) {
  Json mins = Json::array();
  for (const auto& vm : model.minimizers) {
    Json active = Json::array();
    for (const auto& p : vm.active) active.push_back(xi_point_json(p.xi));
    Json entry{{"gamma_star", vector_json(vm.gamma_star)},
               {"active", std::move(active)},
               {"unique_lambda", vm.unique_lambda}};
    if (vm.unique_lambda)
      entry["lambda"] = vector_json(vm.lambda);
    else
      entry["vertices"] = matrix_json(vm.vertices);
    mins.push_back(std::move(entry));
  }
  return Json{{"mode", to_string(model.mode)},
              {"minimizers", std::move(mins)},
              {"covF", matrix_json(model.covF)},
              {"sigma2", model.sigma2},
              {"source", to_string(model.source)},
              {"plug_in_point", model.plug_in_point}};
}

Json dirderiv_json(const DirDerivEstimate& fd, const DirDerivFormula* formula) {
  Json out{{"t_grid", fd.t_grid},
           {"quotients", fd.quotients},
           {"base_value", fd.base_value},
           {"estimate", fd.estimate},
           {"monotone", fd.monotone}};
  if (formula != nullptr) {
    Json entries = Json::array();
    for (const auto& e : formula->entries) {
      Json je{{"gamma_star", vector_json(e.gamma_star)},
              {"eta_values", e.eta_values},
              {"minsup", e.minsup}};
      if (e.weighted) je["weighted"] = *e.weighted;
      entries.push_back(std::move(je));
    }
    Json jf{{"entries", std::move(entries)}, {"minsup", formula->minsup}};
    if (formula->weighted) jf["weighted"] = *formula->weighted;
    out["formula"] = std::move(jf);
  }
  return out;
}

Json replication_summary_json(const ReplicationSet& set) {
  Index max_iter = 0, boundary = 0;
  for (auto s : set.statuses) {
    if (s == SolveStatus::max_iter) ++max_iter;
    if (s == SolveStatus::boundary_hit) ++boundary;
  }
  return Json{{"problem", set.problem_id},
              {"N", set.N},
              {"R", set.R},
              {"master_seed", set.master_seed},
              {"converged", set.converged_count},
              {"max_iter", max_iter},
              {"boundary_hit", boundary},
              {"exact_recovery_count", set.exact_recovery_count}};
}

Json comparison_json(const ComparisonReport& report) {
  Json cols = Json::array();
  for (const auto& c : report.columns)
    cols.push_back(Json{{"label", c.label},
                        {"n_empirical", c.n_empirical},
                        {"n_theoretical", c.n_theoretical},
                        {"ks", c.ks},
                        {"mean_empirical", c.mean_empirical},
                        {"mean_theoretical", c.mean_theoretical},
                        {"var_empirical", c.var_empirical},
                        {"var_theoretical", c.var_theoretical},
                        {"zero_mass_empirical", c.zero_mass_empirical},
                        {"zero_mass_theoretical", c.zero_mass_theoretical},
                        {"pass", c.pass},
                        {"failure", c.failure}});
  return Json{{"columns", std::move(cols)}, {"pass", report.pass}};
}

std::string dataset_csv(const Dataset& data) {
  std::ostringstream out;
  out << "j";
  for (Index c = 0; c < data.dim(); ++c) out << ",x" << (c + 1);
  out << "\n";
  for (Index j = 0; j < data.N(); ++j) {
    out << j;
    for (Index c = 0; c < data.dim(); ++c) out << "," << format_real(data.draws(j, c));
    out << "\n";
  }
  return out.str();
}

std::string draws_csv(const Matrix& draws) {
  std::ostringstream out;
  out << "s";
  for (Index c = 0; c < draws.cols(); ++c) out << ",eta" << (c + 1);
  out << "\n";
  for (Index s = 0; s < draws.rows(); ++s) {
    out << s;
    for (Index c = 0; c < draws.cols(); ++c) out << "," << format_real(draws(s, c));
    out << "\n";
  }
  return out.str();
}

std::string value_draws_csv(const Vector& draws) {
  std::ostringstream out;
  out << "s,value\n";
  for (Index s = 0; s < draws.size(); ++s) out << s << "," << format_real(draws(s)) << "\n";
  return out.str();
}

std::string replications_csv(const ReplicationSet& set) {
  std::ostringstream out;
  out << "r,status,sqrtN_value_err";
  for (Index c = 0; c < set.scaled_gamma_errors.cols(); ++c)
    out << ",sqrtN_gamma_err_" << (c + 1);
  out << "\n";
  for (Index r = 0; r < set.R; ++r) {
    out << r << "," << to_string(set.statuses[static_cast<std::size_t>(r)]) << ","
        << format_real(set.scaled_value_errors(r));
    for (Index c = 0; c < set.scaled_gamma_errors.cols(); ++c)
      out << "," << format_real(set.scaled_gamma_errors(r, c));
    out << "\n";
  }
  return out.str();
}

namespace {

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string short_real(Real v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string render_comparison_table(const ComparisonReport& report) {
  std::ostringstream out;
  out << pad("column", 12) << pad("ks", 10) << pad("mean_emp", 12) << pad("mean_theo", 12)
      << pad("var_emp", 12) << pad("var_theo", 12) << pad("zero_emp", 10)
      << pad("zero_theo", 10) << pad("pass", 6) << "failure\n";
  for (const auto& c : report.columns) {
    out << pad(c.label, 12) << pad(short_real(c.ks), 10) << pad(short_real(c.mean_empirical), 12)
        << pad(short_real(c.mean_theoretical), 12) << pad(short_real(c.var_empirical), 12)
        << pad(short_real(c.var_theoretical), 12) << pad(short_real(c.zero_mass_empirical), 10)
        << pad(short_real(c.zero_mass_theoretical), 10) << pad(c.pass ? "yes" : "no", 6)
        << c.failure << "\n";
  }
  out << "overall: " << (report.pass ? "pass" : "fail") << "\n";
  return out.str();
}

std::string render_certificates_table(const std::vector<Certificate>& certs) {
  std::ostringstream out;
  out << pad("certificate", 32) << pad("applicable", 12) << pad("pass", 6) << pad("witness", 14)
      << "detail\n";
  for (const auto& c : certs)
    out << pad(c.name, 32) << pad(c.applicable ? "yes" : "no", 12) << pad(c.pass ? "yes" : "no", 6)
        << pad(short_real(c.witness), 14) << c.detail << "\n";
  return out.str();
}

std::string render_dirderiv_table(const DirDerivEstimate& fd, const DirDerivFormula* formula) {
  std::ostringstream out;
  out << "directional derivative of the optimal value\n";
  out << pad("t", 14) << "quotient\n";
  for (std::size_t i = 0; i < fd.t_grid.size(); ++i)
    out << pad(short_real(fd.t_grid[i]), 14) << format_real(fd.quotients[i]) << "\n";
  out << pad("extrapolated", 14) << format_real(fd.estimate) << "\n";
  out << pad("monotone", 14) << (fd.monotone ? "yes" : "no") << "\n";
  if (formula != nullptr) {
    out << pad("formula_minsup", 18) << format_real(formula->minsup) << "\n";
    if (formula->weighted)
      out << pad("formula_weighted", 18) << format_real(*formula->weighted) << "\n";
    else
      out << pad("formula_weighted", 18) << "unavailable (multipliers not unique)\n";
  }
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  out << content;
  if (!out) throw Error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace minimax
