#include "econ.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "error.hpp"

namespace hecon {

double qaly(const std::vector<double>& u, const std::vector<double>& fractions) {
  if (u.size() != fractions.size() + 1) fail(ErrorCode::Shape, "need one time-unit fraction per follow-up");
  double e = 0.0;
  for (std::size_t j = 1; j < u.size(); ++j) e += (u[j] + u[j - 1]) * fractions[j - 1] / 2.0;
  return e;
}

double total_cost(const std::vector<double>& c, bool include_baseline) {
  if (c.empty()) fail(ErrorCode::Shape, "empty cost vector");
  double s = include_baseline ? c[0] : 0.0;
  for (std::size_t j = 1; j < c.size(); ++j) s += c[j];
  return s;
}

ArmEcon aggregate_qaly_cost(const TimeMeans& means, const std::vector<double>& fractions, bool include_baseline) {
  if (means.scale != UtilityScale::Original) fail(ErrorCode::Unit, "QALYs need utility means on the original scale");
  ArmEcon out;
  for (std::size_t d = 0; d < means.n_draws(); ++d) {
    out.mu_e.push_back(qaly(means.u[d], fractions));
    out.mu_c.push_back(total_cost(means.c[d], include_baseline));
  }
  return out;
}

std::vector<double> k_grid(double k_max, double k_step) {
  if (!(k_step > 0.0) || !(k_max >= 0.0)) fail(ErrorCode::Config, "k grid needs k_max >= 0 and k_step > 0");
  const auto n = static_cast<std::size_t>(std::floor(k_max / k_step + 1e-9)) + 1;
  std::vector<double> ks(n);
  for (std::size_t i = 0; i < n; ++i) ks[i] = static_cast<double>(i) * k_step;
  return ks;
}

double icer(const std::vector<double>& delta_e, const std::vector<double>& delta_c) {
  if (delta_e.empty() || delta_e.size() != delta_c.size()) fail(ErrorCode::Shape, "ICER needs paired, nonempty draws");
  double se = 0.0, sc = 0.0;
  for (std::size_t i = 0; i < delta_e.size(); ++i) {
    se += delta_e[i];
    sc += delta_c[i];
  }
  const double n = static_cast<double>(delta_e.size());
  if (se == 0.0) fail(ErrorCode::Numeric, "ICER is undefined: mean effectiveness increment is 0");
  return (sc / n) / (se / n);
}

std::vector<CeacPoint> ceac(const std::vector<double>& delta_e, const std::vector<double>& delta_c,
                            const std::vector<double>& ks) {
  if (delta_e.empty() || delta_e.size() != delta_c.size()) fail(ErrorCode::Shape, "CEAC needs paired, nonempty draws");
  std::vector<CeacPoint> out;
  for (double k : ks) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < delta_e.size(); ++i) hit += k * delta_e[i] - delta_c[i] > 0.0;
    out.push_back({k, static_cast<double>(hit) / static_cast<double>(delta_e.size())});
  }
  return out;
}

std::vector<CepPoint> cep_export(const std::vector<double>& delta_e, const std::vector<double>& delta_c, double k) {
  if (delta_e.size() != delta_c.size()) fail(ErrorCode::Shape, "CEP needs paired draws");
  std::vector<CepPoint> out;
  for (std::size_t i = 0; i < delta_e.size(); ++i)
    out.push_back({delta_e[i], delta_c[i], k * delta_e[i] - delta_c[i] > 0.0});
  return out;
}

EconSummary summarize_econ(const ArmEcon& control, const ArmEcon& intervention, const std::vector<double>& ks) {
  if (control.mu_e.size() != intervention.mu_e.size()) fail(ErrorCode::Shape, "arm draws must be aligned");
  EconSummary s;
  s.arms[0] = control;
  s.arms[1] = intervention;
  for (std::size_t d = 0; d < control.mu_e.size(); ++d) {
    s.delta_e.push_back(intervention.mu_e[d] - control.mu_e[d]);
    s.delta_c.push_back(intervention.mu_c[d] - control.mu_c[d]);
  }
  s.icer = icer(s.delta_e, s.delta_c);
  s.ceac = ceac(s.delta_e, s.delta_c, ks);
  return s;
}

ComparatorResult cross_sectional_comparator(const TrialDataset& data, std::size_t n_draws, std::uint64_t seed,
                                            bool include_baseline) {
  if (n_draws < 1) fail(ErrorCode::InvalidArgument, "comparator needs at least one draw");
  std::vector<const SubjectRecord*> rows;
  std::size_t per_arm[2] = {0, 0};
  for (const auto& s : data.subjects)
    if (s.completer()) {
      rows.push_back(&s);
      ++per_arm[s.arm - 1];
    }
  for (int a = 0; a < 2; ++a)
    if (per_arm[a] < 3)
      fail(ErrorCode::Validation, "cross-sectional comparator: arm " + std::to_string(a + 1) + " has " +
                                      std::to_string(per_arm[a]) + " completers (need at least 3)");
  constexpr int p = 4, q = 2;
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n < p + q) fail(ErrorCode::Validation, "cross-sectional comparator needs at least 6 completers");

  Eigen::MatrixXd X(n, p), Y(n, q);
  double mu0 = 0.0, mc0 = 0.0;
  for (const auto* s : rows) {
    mu0 += *s->utilities[0];
    mc0 += *s->costs[0];
  }
  mu0 /= static_cast<double>(n);
  mc0 /= static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = *rows[static_cast<std::size_t>(i)];
    std::vector<double> u, c;
    for (const auto& v : s.utilities) u.push_back(*v);
    for (const auto& v : s.costs) c.push_back(*v);
    X(i, 0) = 1.0;
    X(i, 1) = s.arm == 2 ? 1.0 : 0.0;
    X(i, 2) = u[0] - mu0;
    X(i, 3) = c[0] - mc0;
    Y(i, 0) = qaly(u, data.time_unit_fractions);
    Y(i, 1) = total_cost(c, include_baseline);
  }

  const Eigen::MatrixXd XtX = X.transpose() * X;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(XtX);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-12)
    fail(ErrorCode::Numeric, "cross-sectional comparator: design matrix is singular");
  const Eigen::MatrixXd Bhat = ldlt.solve(X.transpose() * Y);
  const Eigen::MatrixXd R = Y - X * Bhat;
  const Eigen::MatrixXd S = R.transpose() * R;
  const Eigen::MatrixXd XtX_inv = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd Lx = Eigen::LLT<Eigen::MatrixXd>(XtX_inv).matrixL();
  Eigen::LLT<Eigen::MatrixXd> s_llt(S.inverse());
  if (s_llt.info() != Eigen::Success) fail(ErrorCode::Numeric, "cross-sectional comparator: residual matrix is singular");
  const Eigen::MatrixXd Ls = s_llt.matrixL();
  const double nu = static_cast<double>(n - p);

  ComparatorResult out;
  out.coefficient_mean.assign(p * q, 0.0);
  for (int a = 0; a < q * p; ++a) out.coefficient_mean[static_cast<std::size_t>(a)] = Bhat(a / q, a % q);
  Rng rng = make_rng(seed, Stream::Comparator);
  for (std::size_t d = 0; d < n_draws; ++d) {
    // Sigma ~ Inverse-Wishart(nu, S) via Bartlett factor of Wishart(nu, S^{-1}).
    Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
    for (int i = 0; i < q; ++i) A(i, i) = std::sqrt(2.0 * gamma_draw(rng, (nu - i) / 2.0));
    A(1, 0) = std_normal(rng);
    const Eigen::Matrix2d LA = Ls * A;
    const Eigen::Matrix2d W = LA * LA.transpose();
    const Eigen::Matrix2d Sigma = W.inverse();
    const Eigen::Matrix2d Lsig = Eigen::LLT<Eigen::Matrix2d>(Sigma).matrixL();
    Eigen::MatrixXd Z(p, q);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < q; ++j) Z(i, j) = std_normal(rng);
    const Eigen::MatrixXd B = Bhat + Lx * Z * Lsig.transpose();
    out.arms[0].mu_e.push_back(B(0, 0));
    out.arms[0].mu_c.push_back(B(0, 1));
    out.arms[1].mu_e.push_back(B(0, 0) + B(1, 0));
    out.arms[1].mu_c.push_back(B(0, 1) + B(1, 1));
  }
  return out;
}

}  // namespace hecon
