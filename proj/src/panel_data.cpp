#include "lsmd/panel_data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lsmd/errors.hpp"

namespace lsmd {

MatrixXd PanelData::design_x() const {
  MatrixXd x(static_cast<long>(J) * T, K());
  for (int k = 0; k < K(); ++k)
    x.col(k) = Eigen::Map<const VectorXd>(X[k].data(), J * T);
  return x;
}

MatrixXd PanelData::design_z() const {
  MatrixXd z(static_cast<long>(J) * T, M());
  for (int m = 0; m < M(); ++m)
    z.col(m) = Eigen::Map<const VectorXd>(Z[m].data(), J * T);
  return z;
}

MatrixXd PanelData::x_slice(int t) const {
  MatrixXd s(K(), J);
  for (int k = 0; k < K(); ++k) s.row(k) = X[k].col(t).transpose();
  return s;
}

void PanelData::validate() const {
  if (J < 1 || T < 1) throw DimensionError("panel: need J >= 1 and T >= 1");
  if (K() < 1) throw DimensionError("panel: need at least one regressor");
  auto check_dims = [&](const MatrixXd& m, const char* what) {
    if (m.rows() != J || m.cols() != T)
      throw DimensionError(std::string("panel: ") + what + " is not J x T");
  };
  check_dims(shares, "share matrix");
  for (const auto& xk : X) check_dims(xk, "regressor");
  for (const auto& zm : Z) check_dims(zm, "instrument");
  if (static_cast<int>(exogenous.size()) != K())
    throw DimensionError("panel: exogeneity flags do not match K");
  for (int t = 0; t < T; ++t) {
    double sum = 0.0;
    for (int j = 0; j < J; ++j) {
      double s = shares(j, t);
      if (!(s > 0.0 && s < 1.0))
        throw InvalidShare("share out of (0,1) at product " + std::to_string(j) +
                           ", market " + std::to_string(t));
      sum += s;
    }
    if (!(sum < 1.0))
      throw InvalidShare("inside shares sum to " + std::to_string(sum) +
                         " >= 1 in market " + std::to_string(t) +
                         " (outside good needs positive share)");
  }
}

void RandomCoeffSpec::validate(int K) const {
  if (rc_index.empty())
    throw DimensionError("taste spec: need at least one random coefficient");
  for (int k : rc_index)
    if (k < 0 || k >= K)
      throw DimensionError("taste spec: random-coefficient index out of range");
  if (alpha_lo.size() != L() || alpha_hi.size() != L())
    throw DimensionError("taste spec: alpha bounds must have length L");
  for (int l = 0; l < L(); ++l) {
    if (alpha_lo(l) < 0.0)
      throw DimensionError("taste spec: scale parameters require alpha_lo >= 0");
    if (!(alpha_lo(l) < alpha_hi(l)))
      throw DimensionError("taste spec: need alpha_lo < alpha_hi");
  }
  if (n_nodes < 1) throw DimensionError("taste spec: need n_nodes >= 1");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, int line_no) {
  double v;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error("csv: cannot parse number '" + s + "' on line " +
                std::to_string(line_no));
  return v;
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end())
    throw Error("csv: required column '" + name + "' not found in header");
  return static_cast<int>(it - header.begin());
}

}  // namespace

PanelData load_panel_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw Error("csv: empty file '" + path + "'");
  std::vector<std::string> header = split_line(line);

  std::vector<std::string> x_cols = schema.x_cols;
  std::vector<std::string> z_cols = schema.z_cols;
  if (x_cols.empty())
    for (const auto& h : header)
      if (h.rfind("x_", 0) == 0) x_cols.push_back(h);
  if (z_cols.empty())
    for (const auto& h : header)
      if (h.rfind("z_", 0) == 0) z_cols.push_back(h);
  if (x_cols.empty()) throw Error("csv: no regressor columns found");

  int mkt_col = find_column(header, schema.market);
  int prod_col = find_column(header, schema.product);
  int share_col = find_column(header, schema.share);
  std::vector<int> x_idx, z_idx;
  for (const auto& c : x_cols) x_idx.push_back(find_column(header, c));
  for (const auto& c : z_cols) z_idx.push_back(find_column(header, c));

  struct Row {
    std::string product, market;
    double share;
    std::vector<double> x, z;
  };
  std::vector<Row> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> f = split_line(line);
    if (f.size() != header.size())
      throw Error("csv: line " + std::to_string(line_no) + " has " +
                  std::to_string(f.size()) + " fields, header has " +
                  std::to_string(header.size()));
    Row r;
    r.market = f[mkt_col];
    r.product = f[prod_col];
    r.share = parse_double(f[share_col], line_no);
    for (int c : x_idx) r.x.push_back(parse_double(f[c], line_no));
    for (int c : z_idx) r.z.push_back(parse_double(f[c], line_no));
    rows.push_back(std::move(r));
  }

  std::map<std::string, int> products, markets;  // sorted by label
  for (const auto& r : rows) {
    products.emplace(r.product, 0);
    markets.emplace(r.market, 0);
  }
  int idx = 0;
  for (auto& [label, i] : products) i = idx++;
  idx = 0;
  for (auto& [label, i] : markets) i = idx++;

  PanelData panel;
  panel.J = static_cast<int>(products.size());
  panel.T = static_cast<int>(markets.size());
  const int K = static_cast<int>(x_cols.size());
  const int M = static_cast<int>(z_cols.size());
  panel.shares.setZero(panel.J, panel.T);
  panel.X.assign(K, MatrixXd::Zero(panel.J, panel.T));
  panel.Z.assign(M, MatrixXd::Zero(panel.J, panel.T));
  panel.exogenous.assign(K, true);
  panel.x_names = x_cols;
  panel.z_names = z_cols;
  for (const auto& [label, i] : products) panel.product_labels.push_back(label);
  for (const auto& [label, i] : markets) panel.market_labels.push_back(label);

  Eigen::MatrixXi seen = Eigen::MatrixXi::Zero(panel.J, panel.T);
  for (const auto& r : rows) {
    int j = products[r.product];
    int t = markets[r.market];
    if (seen(j, t)++)
      throw UnbalancedPanel("duplicate cell for product '" + r.product +
                            "', market '" + r.market + "'");
    panel.shares(j, t) = r.share;
    for (int k = 0; k < K; ++k) panel.X[k](j, t) = r.x[k];
    for (int m = 0; m < M; ++m) panel.Z[m](j, t) = r.z[m];
  }
  if (static_cast<long>(rows.size()) != static_cast<long>(panel.J) * panel.T) {
    for (int j = 0; j < panel.J; ++j)
      for (int t = 0; t < panel.T; ++t)
        if (!seen(j, t))
          throw UnbalancedPanel("missing cell for product '" +
                                panel.product_labels[j] + "', market '" +
                                panel.market_labels[t] + "'");
  }

  panel.validate();
  return panel;
}

void save_panel_csv(const PanelData& panel, const std::string& path) {
  for (const auto& lbl : panel.product_labels)
    if (lbl.find(',') != std::string::npos)
      throw Error("csv: labels containing commas are not supported");
  std::ofstream out(path);
  if (!out) throw Error("csv: cannot write '" + path + "'");
  std::vector<std::string> x_names = panel.x_names, z_names = panel.z_names;
  for (int k = static_cast<int>(x_names.size()); k < panel.K(); ++k)
    x_names.push_back("x_" + std::to_string(k + 1));
  for (int m = static_cast<int>(z_names.size()); m < panel.M(); ++m)
    z_names.push_back("z_" + std::to_string(m + 1));
  out << "market,product,share";
  for (const auto& n : x_names) out << ',' << n;
  for (const auto& n : z_names) out << ',' << n;
  out << '\n';
  char buf[32];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << ',' << buf;
  };
  for (int t = 0; t < panel.T; ++t)
    for (int j = 0; j < panel.J; ++j) {
      out << panel.market_labels[t] << ',' << panel.product_labels[j];
      std::snprintf(buf, sizeof(buf), "%.17g", panel.shares(j, t));
      out << ',' << buf;
      for (const auto& xk : panel.X) emit(xk(j, t));
      for (const auto& zm : panel.Z) emit(zm(j, t));
      out << '\n';
    }
}

}  // namespace lsmd
