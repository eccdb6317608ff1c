#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mi2sl/dataset.hpp"
#include "mi2sl/simulate.hpp"

using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

double normal_p_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

const char* stars(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

std::string sig(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

// JSON output carries 6 significant digits.
double sig6(double v) { return std::stod(sig(v, 6)); }

std::string fmt_z(double z) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g%s", z, stars(normal_p_two_sided(z)));
  return buf;
}

struct SwmSource {
  std::string matrix_file;
  std::string coords_file;
  double cutoff_km = 0.0;
};

// Raw SWM for Moran statistics plus the normalized one whose eigenvectors
// feed the Lasso steps.
struct LoadedSwm {
  mi2sl::SpatialWeights raw;
  mi2sl::SpatialWeights normalized;
};

LoadedSwm load_swm(const SwmSource& src) {
  mi2sl::SpatialWeights raw;
  if (!src.matrix_file.empty()) {
    raw = mi2sl::read_swm_csv(src.matrix_file);
  } else if (!src.coords_file.empty()) {
    raw = mi2sl::build_distance_cutoff(mi2sl::read_coords_csv(src.coords_file),
                                       src.cutoff_km);
  } else {
    throw mi2sl::InvalidParameterError("no SWM source given (--swm or --coords)");
  }
  return {raw, mi2sl::normalize_max_row_sum(raw)};
}

void check_alignment(const mi2sl::Dataset& data, const mi2sl::SpatialWeights& w) {
  if (data.n() != w.n())
    throw mi2sl::InvalidParameterError(
        "data has " + std::to_string(data.n()) + " rows but SWM is " +
        std::to_string(w.n()) + "x" + std::to_string(w.n()));
}

int cmd_swm(const SwmSource& src, int sw_n, int sw_k, double sw_p, std::uint64_t sw_seed,
            bool normalize, const std::string& out, const std::string& eigenvalues_out) {
  mi2sl::SpatialWeights w;
  if (sw_n > 0) {
    w = mi2sl::generate_small_world(sw_n, sw_k, sw_p, sw_seed);
  } else {
    w = load_swm(src).raw;
  }
  if (normalize) w = mi2sl::normalize_max_row_sum(w);
  if (!out.empty()) mi2sl::write_swm_csv(w, out);
  if (!eigenvalues_out.empty()) {
    const mi2sl::EigenBasis basis = mi2sl::spectral_decompose(w);
    std::ofstream f(eigenvalues_out);
    if (!f) throw mi2sl::ParseError("cannot write file: " + eigenvalues_out);
    for (int j = 0; j < basis.eigenvalues.size(); ++j)
      f << sig(basis.eigenvalues[j], 17) << '\n';
  }
  std::cout << "n=" << w.n() << " checksum=" << mi2sl::fnv1a_checksum(w.weights)
            << " max_row_sum=" << sig(w.weights.rowwise().sum().maxCoeff(), 6)
            << "\n";
  return 0;
}

void print_moran_line(const std::string& label, const mi2sl::MoranResult& r,
                      bool csv) {
  const double p = normal_p_two_sided(r.z);
  if (csv) {
    std::cout << label << ',' << sig(r.m, 4) << ',' << sig(r.expected_m, 4) << ','
              << sig(r.variance_m, 4) << ',' << sig(r.z, 4) << ',' << sig(p, 4)
              << '\n';
  } else {
    std::cout << label << ": m=" << sig(r.m, 4) << " E[m]=" << sig(r.expected_m, 4)
              << " Var(m)=" << sig(r.variance_m, 4) << " z=" << fmt_z(r.z)
              << " p=" << sig(p, 4) << '\n';
  }
}

int cmd_moran(const std::string& data_file, const mi2sl::EstimationSpec& spec,
              const SwmSource& src, bool csv) {
  const mi2sl::Dataset data = mi2sl::read_dataset_csv(data_file);
  const LoadedSwm swm = load_swm(src);
  check_alignment(data, swm.raw);
  const mi2sl::RegressionData rd = mi2sl::build_regression_data(data, spec);

  const int n = data.n();
  mi2sl::Matrix h(n, 1 + rd.X1.cols() + rd.Z2.cols());
  h << mi2sl::Vector::Ones(n), rd.X1, rd.Z2;
  const auto [rx, qh] = mi2sl::annihilator_residuals(rd.x2, h);
  const mi2sl::MoranResult first = mi2sl::standardized_moran(rx, h, swm.raw);

  // Plain first stage for the fitted endogenous regressor.
  const mi2sl::Vector x2hat = rd.x2 - rx;
  mi2sl::Matrix xhat(n, 2 + rd.X1.cols());
  xhat << mi2sl::Vector::Ones(n), rd.X1, x2hat;
  const auto [hy, qx] = mi2sl::annihilator_residuals(rd.y, xhat);
  const mi2sl::MoranResult second = mi2sl::standardized_moran(hy, xhat, swm.raw);

  if (csv) std::cout << "stage,m,expected_m,variance_m,z,p\n";
  print_moran_line(csv ? "first" : "first stage", first, csv);
  print_moran_line(csv ? "second" : "second stage", second, csv);
  return 0;
}

json fit_to_json(const mi2sl::FitResult& fit) {
  json j;
  j["coefficients"] = json::object();
  for (int i = 0; i < fit.coefs.size(); ++i) {
    const std::string name = i < static_cast<int>(fit.coef_names.size())
                                 ? fit.coef_names[i]
                                 : "b" + std::to_string(i);
    j["coefficients"][name] = {
        {"estimate", sig6(fit.coefs[i])},
        {"se_classical", sig6(std::sqrt(fit.vcov_classical(i, i)))},
        {"se_robust", sig6(std::sqrt(fit.vcov_robust(i, i)))}};
  }
  j["sigma2"] = sig6(fit.sigma2);
  j["n"] = fit.n;
  j["p"] = fit.p;
  return j;
}

int cmd_estimate(const std::string& data_file, const mi2sl::EstimationSpec& spec,
                 const SwmSource& src, const std::string& out_file) {
  const mi2sl::Dataset data = mi2sl::read_dataset_csv(data_file);
  const LoadedSwm swm = load_swm(src);
  check_alignment(data, swm.raw);
  const mi2sl::RegressionData rd = mi2sl::build_regression_data(data, spec);

  const mi2sl::EigenBasis basis = mi2sl::spectral_decompose(swm.normalized);
  mi2sl::Mi2SLConfig cfg;
  cfg.variant = spec.variant;
  const mi2sl::Mi2SLFit fit = mi2sl::fit_mi2sl(rd, basis, swm.raw, cfg);

  const int n = data.n();
  const int k1 = static_cast<int>(rd.X1.cols());
  mi2sl::Matrix X(n, 2 + k1), Z(n, 1 + k1 + rd.Z2.cols());
  X << mi2sl::Vector::Ones(n), rd.X1, rd.x2;
  Z << mi2sl::Vector::Ones(n), rd.X1, rd.Z2;
  const mi2sl::FitResult plain = mi2sl::tsls(rd.y, X, Z);

  const int idx = 1 + k1;  // position of the endogenous coefficient
  const auto& vc = spec.robust ? fit.final.vcov_robust : fit.final.vcov_classical;
  const auto& vp = spec.robust ? plain.vcov_robust : plain.vcov_classical;
  std::cout << spec.endogenous << " (Mi-2SL"
            << (spec.variant == mi2sl::FittedVariant::lasso ? "l" : "pl")
            << "): " << sig(fit.final.coefs[idx], 6) << " ("
            << sig(std::sqrt(vc(idx, idx)), 6) << ")\n"
            << spec.endogenous << " (2SLS):   " << sig(plain.coefs[idx], 6) << " ("
            << sig(std::sqrt(vp(idx, idx)), 6) << ")\n"
            << "First stage F: " << sig(fit.first_stage.f_full, 6)
            << "  Partial F: " << sig(fit.first_stage.f_partial, 6) << '\n'
            << "Moran z (first, second): " << fmt_z(fit.z_first) << ", "
            << fmt_z(fit.z_second) << '\n'
            << "Selected vectors: " << fit.selected_union.size() << '['
            << fit.selected_first.size() << ',' << fit.selected_second.size()
            << "]\n";

  if (!out_file.empty()) {
    json j;
    j["schema_version"] = 1;
    j["estimator"] = spec.variant == mi2sl::FittedVariant::lasso ? "mi2sl-lasso"
                                                                 : "mi2sl-post-lasso";
    j["fit"] = fit_to_json(fit.final);
    j["plain_tsls"] = fit_to_json(plain);
    j["moran_z"] = {{"first", sig6(fit.z_first)}, {"second", sig6(fit.z_second)}};
    j["selected"] = {{"first", fit.selected_first},
                     {"second", fit.selected_second},
                     {"union", fit.selected_union}};
    j["first_stage"] = {{"f_full", sig6(fit.first_stage.f_full)},
                        {"f_partial", sig6(fit.first_stage.f_partial)},
                        {"perfect_fit", fit.first_stage.perfect_fit}};
    std::ofstream f(out_file);
    if (!f) throw mi2sl::ParseError("cannot write file: " + out_file);
    f << j.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moran's I 2-stage Lasso estimation toolkit"};
  app.require_subcommand(1);

  // --- swm ---
  auto* swm_cmd = app.add_subcommand("swm", "Build, normalize, decompose a spatial weights matrix");
  SwmSource swm_src;
  int sw_n = 0, sw_k = 10;
  double sw_p = 0.0;
  std::uint64_t sw_seed = 1;
  bool sw_norm = false;
  std::string swm_out, eig_out;
  swm_cmd->add_option("--in", swm_src.matrix_file, "SWM CSV file (no header)");
  swm_cmd->add_option("--coords", swm_src.coords_file, "coordinates CSV (id,lat,lon)");
  swm_cmd->add_option("--cutoff", swm_src.cutoff_km, "distance cutoff in km");
  swm_cmd->add_option("--small-world-n", sw_n, "generate small-world SWM with n units");
  swm_cmd->add_option("--k-neighbors", sw_k, "neighbors per node (even)");
  swm_cmd->add_option("--rewire", sw_p, "rewiring probability");
  swm_cmd->add_option("--seed", sw_seed, "generator seed");
  swm_cmd->add_flag("--normalize", sw_norm, "normalize by largest row sum");
  swm_cmd->add_option("--out", swm_out, "write the SWM as CSV");
  swm_cmd->add_option("--eigenvalues-out", eig_out, "write eigenvalues, one per line");

  // shared estimation options
  mi2sl::EstimationSpec spec;
  std::string data_file, variant_name = "lasso", out_file;
  SwmSource est_src;
  bool moran_csv = false;
  auto add_spec_options = [&](CLI::App* cmd, bool need_spec) {
    cmd->add_option("--data", data_file, "dataset CSV with header")->required();
    auto* o = cmd->add_option("--outcome", spec.outcome, "outcome column");
    auto* e = cmd->add_option("--endogenous", spec.endogenous, "endogenous column");
    auto* i = cmd->add_option("--instruments", spec.instruments, "instrument columns");
    if (need_spec) { o->required(); e->required(); i->required(); }
    cmd->add_option("--exogenous", spec.exogenous, "exogenous columns");
    cmd->add_option("--swm", est_src.matrix_file, "SWM CSV file");
    cmd->add_option("--coords", est_src.coords_file, "coordinates CSV (id,lat,lon)");
    cmd->add_option("--cutoff", est_src.cutoff_km, "distance cutoff in km");
  };

  auto* moran_cmd = app.add_subcommand("moran", "Standardized Moran's I of first/second stage residuals");
  add_spec_options(moran_cmd, true);
  moran_cmd->add_flag("--csv", moran_csv, "machine-readable one-line-per-stage CSV");

  auto* est_cmd = app.add_subcommand("estimate", "Mi-2SL estimation");
  add_spec_options(est_cmd, true);
  est_cmd->add_option("--variant", variant_name, "lasso | post-lasso")
      ->check(CLI::IsMember({"lasso", "post-lasso"}));
  est_cmd->add_flag("--classical", [&spec](std::int64_t) { spec.robust = false; },
                    "report classical instead of robust SEs");
  est_cmd->add_option("--out", out_file, "write JSON report");

  // --- simulate ---
  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo experiment");
  mi2sl::DGPConfig dgp;
  int reps = 1000, threads = 0;
  std::uint64_t base_seed = 20240101;
  std::string estimators_arg = "SimpOLS,SimpIV,2SLS-SAR,Mi-2SLl,Mi-2SLpl";
  std::string sim_out, sim_format = "csv";
  sim_cmd->add_option("--n", dgp.n, "sample size");
  sim_cmd->add_option("--rho", dgp.rho, "SAR coefficient of the outcome");
  sim_cmd->add_option("--zeta31", dgp.zeta31, "first-order SAR coefficient of x2");
  sim_cmd->add_option("--zeta32", dgp.zeta32, "second-order SAR coefficient of x2");
  sim_cmd->add_option("--omega", dgp.omega, "spatial-lag coefficient of the covariates");
  sim_cmd->add_option("--rewire", dgp.rewire_prob, "small-world rewiring probability");
  sim_cmd->add_option("--k-neighbors", dgp.k_neighbors, "small-world neighbors per node");
  sim_cmd->add_option("--swm-seed", dgp.swm_seed, "SWM generator seed");
  sim_cmd->add_flag("--redraw-swm", dgp.redraw_swm, "regenerate the SWM each replication");
  sim_cmd->add_option("--reps", reps, "Monte Carlo replications");
  sim_cmd->add_option("--seed", base_seed, "base replication seed");
  sim_cmd->add_option("--estimators", estimators_arg, "comma-separated estimator names");
  sim_cmd->add_option("--threads", threads, "worker threads (0 = all cores)");
  sim_cmd->add_option("--out", sim_out, "output file (default stdout)");
  sim_cmd->add_option("--format", sim_format, "csv | text")
      ->check(CLI::IsMember({"csv", "text"}));
  std::string draw_out, draw_swm_out;
  sim_cmd->add_option("--draw-out", draw_out,
                      "write a single draw (rep seed = --seed) as a dataset CSV and exit");
  sim_cmd->add_option("--swm-out", draw_swm_out, "with --draw-out: write the raw SWM CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (swm_cmd->parsed())
      return cmd_swm(swm_src, sw_n, sw_k, sw_p, sw_seed, sw_norm, swm_out, eig_out);
    if (moran_cmd->parsed()) return cmd_moran(data_file, spec, est_src, moran_csv);
    if (est_cmd->parsed()) {
      spec.variant = variant_name == "lasso" ? mi2sl::FittedVariant::lasso
                                             : mi2sl::FittedVariant::post_lasso;
      return cmd_estimate(data_file, spec, est_src, out_file);
    }
    if (sim_cmd->parsed()) {
      if (!draw_out.empty()) {
        const mi2sl::SpatialWeights w = mi2sl::make_experiment_swm(dgp);
        const mi2sl::SimDraw draw = mi2sl::gen_draw(dgp, w, base_seed);
        std::ofstream f(draw_out);
        if (!f) throw mi2sl::ParseError("cannot write file: " + draw_out);
        f << "y,x1,x2,z2\n" << std::setprecision(17);
        for (int i = 0; i < dgp.n; ++i)
          f << draw.data.y[i] << ',' << draw.data.X1(i, 0) << ','
            << draw.data.x2[i] << ',' << draw.data.Z2(i, 0) << '\n';
        if (!draw_swm_out.empty()) mi2sl::write_swm_csv(w, draw_swm_out);
        return 0;
      }
      std::vector<mi2sl::EstimatorKind> kinds;
      std::istringstream is(estimators_arg);
      std::string name;
      while (std::getline(is, name, ',')) {
        if (name == "SimpOLS") kinds.push_back(mi2sl::EstimatorKind::simp_ols);
        else if (name == "SimpIV") kinds.push_back(mi2sl::EstimatorKind::simp_iv);
        else if (name == "2SLS-SAR") kinds.push_back(mi2sl::EstimatorKind::tsls_sar);
        else if (name == "Mi-2SLl") kinds.push_back(mi2sl::EstimatorKind::mi2sl_lasso);
        else if (name == "Mi-2SLpl") kinds.push_back(mi2sl::EstimatorKind::mi2sl_post_lasso);
        else throw mi2sl::InvalidParameterError("unknown estimator: " + name);
      }
      const auto rows = mi2sl::run_experiment(dgp, kinds, reps, base_seed, threads);
      const auto text = mi2sl::emit_table(
          rows, sim_format == "csv" ? mi2sl::TableFormat::csv
                                    : mi2sl::TableFormat::aligned_text);
      if (sim_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream f(sim_out);
        if (!f) throw mi2sl::ParseError("cannot write file: " + sim_out);
        f << text;
      }
      return 0;
    }
  } catch (const mi2sl::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const mi2sl::InvalidParameterError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const mi2sl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
