#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "lsmd/quadrature.hpp"

namespace lsmd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Balanced J x T panel of market shares, regressors and instruments.
// Products and markets are ordered lexicographically by label; that
// ordering is part of the contract (loading rows align with labels).
// Immutable after construction and safe to share across threads.
struct PanelData {
  int J = 0;
  int T = 0;
  MatrixXd shares;               // J x T, each entry in (0,1), column sums < 1
  std::vector<MatrixXd> X;       // K regressor matrices, J x T each
  std::vector<MatrixXd> Z;       // M instrument matrices, J x T each
  std::vector<bool> exogenous;   // per regressor, w.r.t. the idiosyncratic error
  std::vector<std::string> product_labels;
  std::vector<std::string> market_labels;
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;

  int K() const { return static_cast<int>(X.size()); }
  int M() const { return static_cast<int>(Z.size()); }

  // JT x K / JT x M designs with columns vec(X_k), vec(Z_m).
  MatrixXd design_x() const;
  MatrixXd design_z() const;
  // K x J slice of regressor values for market t.
  MatrixXd x_slice(int t) const;

  // Throws InvalidShare / DimensionError / UnbalancedPanel on violations.
  void validate() const;
};

// Taste distribution: an independent mean-zero normal coefficient on each
// regressor listed in rc_index, with scale alpha[l] >= 0. L = rc_index.size().
struct RandomCoeffSpec {
  std::vector<int> rc_index;
  QuadratureKind quadrature = QuadratureKind::automatic;
  int n_nodes = 64;  // per dimension for Gauss-Hermite
  VectorXd alpha_lo, alpha_hi;  // box for the outer search

  int L() const { return static_cast<int>(rc_index.size()); }
  QuadratureRule rule() const { return make_rule(quadrature, n_nodes, L()); }
  void validate(int K) const;
};

struct CsvSchema {
  std::string market = "market";
  std::string product = "product";
  std::string share = "share";
  // Explicit column lists; when empty, every header of the form x_* / z_*
  // is picked up in file order.
  std::vector<std::string> x_cols;
  std::vector<std::string> z_cols;
};

// Reads a long-format CSV (one row per product-market cell), pivots to
// J x T matrices and validates. Deterministic: identical files produce
// bit-identical panels.
PanelData load_panel_csv(const std::string& path, const CsvSchema& schema = {});

// Writes the same long format with full double precision, so a reload
// reproduces the panel exactly.
void save_panel_csv(const PanelData& panel, const std::string& path);

}  // namespace lsmd
