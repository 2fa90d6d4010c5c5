// Command-line front end: estimation on CSV panels, simulation studies,
// instrument-relevance diagnostics and elasticity matrices. Every command
// echoes its effective settings into the JSON output so runs can be
// reproduced from the artifacts alone.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "lsmd/diagnostics.hpp"
#include "lsmd/elasticity.hpp"
#include "lsmd/errors.hpp"
#include "lsmd/estimator.hpp"
#include "lsmd/inference.hpp"
#include "lsmd/linalg.hpp"
#include "lsmd/montecarlo.hpp"
#include "lsmd/panel_data.hpp"
#include "lsmd/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DataArgs {
  std::string path;
  std::string market_col = "market", product_col = "product",
              share_col = "share";
  std::vector<std::string> x_cols, z_cols;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", path, "panel CSV path")->required();
    cmd->add_option("--market-col", market_col, "market id column");
    cmd->add_option("--product-col", product_col, "product id column");
    cmd->add_option("--share-col", share_col, "share column");
    cmd->add_option("--x-cols", x_cols,
                    "regressor columns (default: x_* headers)")
        ->delimiter(',');
    cmd->add_option("--z-cols", z_cols,
                    "instrument columns (default: z_* headers)")
        ->delimiter(',');
  }

  lsmd::PanelData load() const {
    lsmd::CsvSchema schema;
    schema.market = market_col;
    schema.product = product_col;
    schema.share = share_col;
    schema.x_cols = x_cols;
    schema.z_cols = z_cols;
    return lsmd::load_panel_csv(path, schema);
  }
};

struct ModelArgs {
  int R = 0;
  std::string weight = "identity";
  std::vector<double> alpha_bounds;
  std::vector<std::string> rc_cols;
  std::vector<std::string> endogenous;
  std::vector<double> endo_bounds;
  int bandwidth = 2;
  int nodes = 64;
  std::string out_dir = ".";

  void attach(CLI::App* cmd) {
    cmd->add_option("--factors,-R", R, "number of interactive factors");
    cmd->add_option("--weight", weight,
                    "identity | optimal | blp-empirical | file:PATH");
    cmd->add_option("--alpha-bounds", alpha_bounds,
                    "search box lo,hi for the taste scale")
        ->delimiter(',')
        ->expected(2)
        ->required();
    cmd->add_option("--rc", rc_cols,
                    "regressors carrying a random coefficient "
                    "(default: first regressor)")
        ->delimiter(',');
    cmd->add_option("--endogenous", endogenous,
                    "regressor columns treated as endogenous")
        ->delimiter(',');
    cmd->add_option("--endo-bounds", endo_bounds,
                    "coefficient box lo,hi per endogenous regressor")
        ->delimiter(',');
    cmd->add_option("--bandwidth", bandwidth,
                    "bias-correction bandwidth h (negative: floor(T^{1/5}))");
    cmd->add_option("--nodes", nodes, "quadrature nodes per dimension");
    cmd->add_option("--out", out_dir, "output directory");
  }
};

int column_index(const lsmd::PanelData& panel, const std::string& name) {
  for (int k = 0; k < panel.K(); ++k)
    if (panel.x_names[k] == name) return k;
  throw lsmd::Error("no regressor column named '" + name + "'");
}

lsmd::RandomCoeffSpec make_spec(const lsmd::PanelData& panel,
                                const ModelArgs& args) {
  lsmd::RandomCoeffSpec spec;
  if (args.rc_cols.empty()) {
    spec.rc_index = {0};
  } else {
    for (const auto& c : args.rc_cols)
      spec.rc_index.push_back(column_index(panel, c));
  }
  spec.n_nodes = args.nodes;
  const int L = spec.L();
  spec.alpha_lo = lsmd::VectorXd::Constant(L, args.alpha_bounds[0]);
  spec.alpha_hi = lsmd::VectorXd::Constant(L, args.alpha_bounds[1]);
  spec.validate(panel.K());
  return spec;
}

lsmd::WeightMatrix make_weight(const lsmd::PanelData& panel,
                               const std::string& kind) {
  if (kind == "identity") return lsmd::WeightMatrix::identity(panel.M());
  if (kind == "blp-empirical") return lsmd::blp_empirical_weight(panel);
  if (kind.rfind("file:", 0) == 0) {
    std::ifstream in(kind.substr(5));
    if (!in) throw lsmd::Error("cannot open weight file " + kind.substr(5));
    lsmd::MatrixXd W(panel.M(), panel.M());
    for (int i = 0; i < panel.M(); ++i)
      for (int j = 0; j < panel.M(); ++j)
        if (!(in >> W(i, j)))
          throw lsmd::Error("weight file: expected M x M numeric entries");
    lsmd::WeightMatrix wm{W, lsmd::WeightMatrix::Kind::user};
    wm.validate();
    return wm;
  }
  if (kind == "optimal")
    return lsmd::WeightMatrix::identity(panel.M());  // first stage; refined below
  throw lsmd::Error("unknown weight kind '" + kind + "'");
}

json settings_json(const DataArgs& data, const ModelArgs& model) {
  return {{"data", data.path},
          {"factors", model.R},
          {"weight", model.weight},
          {"alpha_bounds", model.alpha_bounds},
          {"rc", model.rc_cols},
          {"endogenous", model.endogenous},
          {"bandwidth", model.bandwidth},
          {"nodes", model.nodes}};
}

struct FitBundle {
  lsmd::LsmdEstimate fit;
  lsmd::WeightMatrix weight{lsmd::MatrixXd(), lsmd::WeightMatrix::Kind::identity};
  lsmd::RandomCoeffSpec spec;
};

FitBundle run_fit(const lsmd::PanelData& panel, const ModelArgs& model) {
  FitBundle out;
  out.spec = make_spec(panel, model);
  out.weight = make_weight(panel, model.weight);
  lsmd::EstimatorOpts opts;

  auto run_once = [&](const lsmd::WeightMatrix& W) {
    if (model.endogenous.empty()) return lsmd::estimate(panel, out.spec, model.R, W, opts);
    lsmd::PanelData flagged = panel;
    std::vector<int> endo;
    for (const auto& c : model.endogenous) {
      int k = column_index(panel, c);
      flagged.exogenous[k] = false;
      endo.push_back(k);
    }
    const int K2 = static_cast<int>(endo.size());
    lsmd::VectorXd lo, hi;
    if (model.endo_bounds.size() == 2 * static_cast<size_t>(K2)) {
      lo.resize(K2);
      hi.resize(K2);
      for (int i = 0; i < K2; ++i) {
        lo(i) = model.endo_bounds[2 * i];
        hi(i) = model.endo_bounds[2 * i + 1];
      }
    } else if (model.endo_bounds.empty()) {
      lo = lsmd::VectorXd::Constant(K2, -20.0);
      hi = lsmd::VectorXd::Constant(K2, 20.0);
    } else {
      throw lsmd::Error("--endo-bounds needs lo,hi per endogenous regressor");
    }
    return lsmd::estimate_endogenous(flagged, out.spec, model.R, W, lo, hi, opts);
  };

  out.fit = run_once(out.weight);
  if (model.weight == "optimal") {
    out.weight = lsmd::optimal_weight(panel, model.R, out.fit);
    out.fit = run_once(out.weight);
  }
  return out;
}

json estimate_json(const lsmd::PanelData& panel, const FitBundle& bundle,
                   const lsmd::InferenceReport& inf) {
  const lsmd::LsmdEstimate& fit = bundle.fit;
  json j;
  j["alpha"] = std::vector<double>(fit.alpha.data(),
                                   fit.alpha.data() + fit.alpha.size());
  j["beta"] = std::vector<double>(fit.beta.data(),
                                  fit.beta.data() + fit.beta.size());
  j["beta_names"] = panel.x_names;
  j["step2_value"] = fit.step2_value;
  j["boundary"] = fit.boundary;
  j["outer_evaluations"] = fit.outer_evaluations;

  json inference;
  inference["names"] = inf.names;
  auto vec = [](const lsmd::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  inference["raw"] = vec(inf.raw);
  inference["bias_corrected"] = vec(inf.corrected);
  inference["se"] = vec(inf.se);
  inference["t_stats"] = vec(inf.t_stats);
  inference["B0"] = vec(inf.B.col(0));
  inference["B1"] = vec(inf.B.col(1));
  inference["B2"] = vec(inf.B.col(2));
  inference["bandwidth"] = inf.bandwidth;
  inference["cond_GWG"] = inf.cond_GWG;
  j["inference"] = inference;

  // spectrum of the residual including the fitted factor part; a sharp
  // drop after R factors supports the chosen rank
  lsmd::MatrixXd xi = fit.delta_hat;
  for (int k = 0; k < panel.K(); ++k) xi -= fit.beta(k) * panel.X[k];
  lsmd::VectorXd mu =
      lsmd::gram_eigenvalues(xi) / (static_cast<double>(panel.J) * panel.T);
  j["residual_factor_spectrum"] = vec(mu.head(std::min<long>(10, mu.size())));
  return j;
}

int cmd_estimate(const DataArgs& data, const ModelArgs& model) {
  lsmd::PanelData panel = data.load();
  FitBundle bundle = run_fit(panel, model);
  lsmd::InferenceOpts iopts;
  iopts.bandwidth = model.bandwidth >= 0 ? model.bandwidth
                                         : lsmd::auto_bandwidth(panel.T);
  lsmd::InferenceReport inf =
      lsmd::bias_variance(bundle.fit, panel, bundle.spec, bundle.weight, iopts);

  fs::create_directories(model.out_dir);
  json j = estimate_json(panel, bundle, inf);
  j["settings"] = settings_json(data, model);
  std::ofstream out(fs::path(model.out_dir) / "estimate.json");
  out << j.dump(2) << "\n";
  std::cout << "estimate: alpha =";
  for (int l = 0; l < bundle.fit.alpha.size(); ++l)
    std::cout << " " << bundle.fit.alpha(l);
  std::cout << ", beta =";
  for (int k = 0; k < bundle.fit.beta.size(); ++k)
    std::cout << " " << bundle.fit.beta(k);
  std::cout << "\nwrote " << (fs::path(model.out_dir) / "estimate.json").string()
            << std::endl;
  if (bundle.fit.boundary) {
    std::cerr << "warning: solution on the alpha search boundary" << std::endl;
    return 2;
  }
  return 0;
}

int cmd_simulate(lsmd::McConfig config, const std::string& config_file,
                 const std::string& out_dir) {
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) throw lsmd::Error("cannot open config file " + config_file);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(0, eq), val = line.substr(eq + 1);
      auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t"));
        s.erase(s.find_last_not_of(" \t") + 1);
        return s;
      };
      key = trim(key);
      val = trim(val);
      if (key == "J") config.J = std::stoi(val);
      else if (key == "T") config.T = std::stoi(val);
      else if (key == "R_est") config.R_est = std::stoi(val);
      else if (key == "R_true") config.R_true = std::stoi(val);
      else if (key == "reps") config.reps = std::stoi(val);
      else if (key == "seed") config.base_seed = std::stoull(val);
      else if (key == "alpha0") config.alpha0 = std::stod(val);
      else if (key == "beta0") config.beta0 = std::stod(val);
      else if (key == "nodes") config.n_nodes = std::stoi(val);
      else if (key == "alpha_lo") config.alpha_lo = std::stod(val);
      else if (key == "alpha_hi") config.alpha_hi = std::stod(val);
      else if (key == "bias_correction") config.bias_correction = (val == "1" || val == "true");
      else if (key == "bandwidth") config.bandwidth = std::stoi(val);
      else if (key == "threads") config.threads = std::stoi(val);
      else throw lsmd::Error("config file: unknown key '" + key + "'");
    }
  }
  lsmd::McReport report = lsmd::run_study(config);
  fs::create_directories(out_dir);
  lsmd::write_report_csv(report, (fs::path(out_dir) / "mc_report.csv").string());
  lsmd::write_rep_log_json(config, report,
                           (fs::path(out_dir) / "mc_reps.json").string());
  std::cout << "simulate: bias(alpha) = " << report.bias(0)
            << ", std(alpha) = " << report.std_dev(0)
            << ", bias(beta) = " << report.bias(1)
            << ", std(beta) = " << report.std_dev(1) << "\n"
            << "wrote " << (fs::path(out_dir) / "mc_report.csv").string()
            << std::endl;
  return 0;
}

int cmd_diagnose(const DataArgs& data, const ModelArgs& model,
                 std::vector<double> alpha_ref, std::vector<double> beta_ref,
                 std::vector<double> alpha_grid_spec,
                 std::vector<double> beta_grid_spec, int beta_index,
                 int threads) {
  lsmd::PanelData panel = data.load();
  lsmd::RandomCoeffSpec spec = make_spec(panel, model);
  if (static_cast<int>(alpha_ref.size()) != spec.L())
    throw lsmd::Error("--alpha-ref needs L values");
  if (static_cast<int>(beta_ref.size()) != panel.K())
    throw lsmd::Error("--beta-ref needs K values");
  lsmd::ReferencePoint ref;
  ref.alpha = Eigen::Map<lsmd::VectorXd>(alpha_ref.data(), alpha_ref.size());
  ref.beta = Eigen::Map<lsmd::VectorXd>(beta_ref.data(), beta_ref.size());

  auto linspace = [](const std::vector<double>& s) {
    int n = static_cast<int>(s[2]);
    lsmd::VectorXd g(n);
    for (int i = 0; i < n; ++i)
      g(i) = s[0] + (s[1] - s[0]) * i / std::max(1, n - 1);
    return g;
  };
  lsmd::VectorXd a_grid = linspace(alpha_grid_spec);
  lsmd::VectorXd b_grid = linspace(beta_grid_spec);

  // reference loadings: principal components of the reference residual
  lsmd::ShareInversionOpts inv;
  lsmd::MatrixXd d_ref = lsmd::invert_shares_all(panel, ref.alpha, spec, inv);
  lsmd::MatrixXd xi_ref = d_ref;
  for (int k = 0; k < panel.K(); ++k) xi_ref -= ref.beta(k) * panel.X[k];
  lsmd::MatrixXd lambda0 =
      model.R > 0 ? lsmd::principal_components(xi_ref, model.R).lambda
                  : lsmd::MatrixXd(panel.J, 0);

  lsmd::RelevanceSurface surf = lsmd::relevance_surface(
      panel, spec, ref, lambda0, a_grid, b_grid, model.R, beta_index, threads);
  fs::create_directories(model.out_dir);
  lsmd::write_surface_csv(surf,
                          (fs::path(model.out_dir) / "relevance.csv").string());

  // profiled-objective scan in the scanned coefficient, at the reference
  lsmd::MatrixXd Y = d_ref;
  for (int k = 0; k < panel.K(); ++k)
    if (k != beta_index) Y -= ref.beta(k) * panel.X[k];
  lsmd::VectorXd prof =
      lsmd::objective_profile(Y, panel.X[beta_index], b_grid, model.R);
  std::ofstream pout(fs::path(model.out_dir) / "objective_profile.csv");
  pout << "beta,objective\n";
  for (int i = 0; i < b_grid.size(); ++i)
    pout << b_grid(i) << ',' << prof(i) << '\n';

  std::cout << "diagnose: wrote relevance.csv and objective_profile.csv in "
            << model.out_dir << std::endl;
  return 0;
}

int cmd_elasticity(const DataArgs& data, const ModelArgs& model,
                   const std::string& market, const std::string& price_col) {
  lsmd::PanelData panel = data.load();
  FitBundle bundle = run_fit(panel, model);
  int t = panel.T - 1;
  if (!market.empty()) {
    auto it = std::find(panel.market_labels.begin(), panel.market_labels.end(),
                        market);
    if (it == panel.market_labels.end())
      throw lsmd::InvalidMarket("no market labeled '" + market + "'");
    t = static_cast<int>(it - panel.market_labels.begin());
  }
  int price_index = price_col.empty() ? 0 : column_index(panel, price_col);
  lsmd::ElasticityMatrix em =
      lsmd::elasticity_matrix(bundle.fit, panel, bundle.spec, t, price_index);
  fs::create_directories(model.out_dir);
  std::string path =
      (fs::path(model.out_dir) / ("elasticity_" + em.market_label + ".csv"))
          .string();
  lsmd::write_elasticity_csv(em, path);
  std::cout << "elasticity: market " << em.market_label << ", wrote " << path
            << std::endl;
  return bundle.fit.boundary ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-coefficients logit demand with interactive fixed "
               "effects (LS-MD estimator)"};
  app.require_subcommand(1);

  DataArgs est_data, diag_data, elas_data;
  ModelArgs est_model, diag_model, elas_model;

  CLI::App* est = app.add_subcommand("estimate", "fit the model on a panel");
  est_data.attach(est);
  est_model.attach(est);

  lsmd::McConfig mc;
  std::string mc_config_file, mc_out = ".";
  CLI::App* sim = app.add_subcommand("simulate", "run a simulation study");
  sim->add_option("--config", mc_config_file, "key=value study config file");
  sim->add_option("-J", mc.J, "products per market");
  sim->add_option("-T", mc.T, "markets");
  sim->add_option("--r-est", mc.R_est, "factors used in estimation");
  sim->add_option("--r-true", mc.R_true, "factors in the design");
  sim->add_option("--reps", mc.reps, "replications");
  sim->add_option("--seed", mc.base_seed, "base seed");
  sim->add_option("--alpha0", mc.alpha0, "true taste scale");
  sim->add_option("--beta0", mc.beta0, "true price coefficient");
  sim->add_option("--nodes", mc.n_nodes, "quadrature nodes");
  std::vector<double> mc_alpha_bounds;
  sim->add_option("--alpha-bounds", mc_alpha_bounds, "search box lo,hi")
      ->delimiter(',')
      ->expected(2);
  bool no_bc = false;
  sim->add_flag("--no-bias-correction", no_bc,
                "skip per-rep bias correction and inference");
  sim->add_option("--bandwidth", mc.bandwidth, "bias-correction bandwidth");
  sim->add_option("--threads", mc.threads, "worker threads (0 = auto)");
  sim->add_option("--out", mc_out, "output directory");

  CLI::App* diag = app.add_subcommand("diagnose",
                                      "instrument relevance surfaces");
  diag_data.attach(diag);
  diag_model.attach(diag);
  std::vector<double> alpha_ref, beta_ref;
  std::vector<double> a_grid{0.25, 1.75, 10}, b_grid{-4.5, -1.5, 10};
  int beta_index = 0, diag_threads = 0;
  diag->add_option("--alpha-ref", alpha_ref, "reference taste parameters")
      ->delimiter(',')
      ->required();
  diag->add_option("--beta-ref", beta_ref, "reference coefficients")
      ->delimiter(',')
      ->required();
  diag->add_option("--alpha-grid", a_grid, "lo,hi,n")->delimiter(',')->expected(3);
  diag->add_option("--beta-grid", b_grid, "lo,hi,n")->delimiter(',')->expected(3);
  diag->add_option("--beta-index", beta_index, "coefficient scanned by the beta axis");
  diag->add_option("--threads", diag_threads, "worker threads (0 = auto)");

  CLI::App* elas = app.add_subcommand("elasticity",
                                      "own/cross price elasticity matrix");
  elas_data.attach(elas);
  elas_model.attach(elas);
  std::string market, price_col;
  elas->add_option("--market", market, "market label (default: last market)");
  elas->add_option("--price", price_col, "price column (default: first regressor)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (est->parsed()) return cmd_estimate(est_data, est_model);
    if (sim->parsed()) {
      if (mc_alpha_bounds.size() == 2) {
        mc.alpha_lo = mc_alpha_bounds[0];
        mc.alpha_hi = mc_alpha_bounds[1];
      }
      if (no_bc) mc.bias_correction = false;
      return cmd_simulate(mc, mc_config_file, mc_out);
    }
    if (diag->parsed())
      return cmd_diagnose(diag_data, diag_model, alpha_ref, beta_ref, a_grid,
                          b_grid, beta_index, diag_threads);
    if (elas->parsed()) return cmd_elasticity(elas_data, elas_model, market,
                                              price_col);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}
