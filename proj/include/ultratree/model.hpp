#pragma once

// Zero-mean Gaussian model with ultrametric covariance: sufficient
// statistics, log-likelihood, edge-length gradient and data generation.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "tree.hpp"
#include "ultrametric.hpp"

namespace ultratree {

enum class Distribution { normal, student_t };

struct DataSet {
  Eigen::MatrixXd x;  // n rows, p columns
  Distribution distribution = Distribution::normal;
  int df = 0;

  int n() const { return static_cast<int>(x.rows()); }
  int p() const { return static_cast<int>(x.cols()); }
};

struct SufficientStats {
  int n = 0;
  int p = 0;
  Eigen::MatrixXd s;  // sum of x_i x_i^T

  // No observations; the likelihood is identically zero.
  static SufficientStats empty(int p) { return {0, p, Eigen::MatrixXd::Zero(p, p)}; }
};

// Scatter matrix with compensated summation per entry.
inline SufficientStats suff_stats(const DataSet& data) {
  const int n = data.n();
  const int p = data.p();
  if (!data.x.allFinite()) throw DataError("suff_stats: non-finite observation");
  SufficientStats out{n, p, Eigen::MatrixXd::Zero(p, p)};
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b <= a; ++b) {
      double sum = 0.0, comp = 0.0;
      for (int i = 0; i < n; ++i) {
        const double term = data.x(i, a) * data.x(i, b);
        const double t = sum + term;
        comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
        sum = t;
      }
      out.s(a, b) = out.s(b, a) = sum + comp;
    }
  }
  return out;
}

namespace detail {

inline Eigen::LLT<Eigen::MatrixXd> factor(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("covariance is not positive definite");
  return llt;
}

inline double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  double s = 0.0;
  const auto& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

inline void check_dims(const SufficientStats& stats, int p) {
  if (stats.p != p) throw DimensionError("data dimension differs from the covariance dimension");
}

}  // namespace detail

inline double gaussian_loglik(const SufficientStats& stats, const Eigen::MatrixXd& sigma) {
  detail::check_dims(stats, static_cast<int>(sigma.rows()));
  if (stats.n == 0) return 0.0;
  const auto llt = detail::factor(sigma);
  const double n = stats.n;
  const double p = stats.p;
  const double trace = llt.solve(stats.s).trace();
  return -0.5 * n * p * std::log(2.0 * std::numbers::pi) - 0.5 * n * detail::log_det(llt) - 0.5 * trace;
}

inline double gaussian_loglik(const SufficientStats& stats, const UltrametricMatrix& m) {
  return gaussian_loglik(stats, m.matrix());
}

inline double gaussian_loglik(const SufficientStats& stats, const Tree& t) {
  return gaussian_loglik(stats, tree_to_dense(t));
}

// d loglik / d length for each listed edge; `edges` may hold zero lengths as
// long as the covariance they build stays positive definite.
inline std::vector<double> loglik_gradient(const SufficientStats& stats, int p, const std::vector<Edge>& edges) {
  detail::check_dims(stats, p);
  std::vector<double> grad(edges.size(), 0.0);
  if (stats.n == 0) return grad;
  const auto llt = detail::factor(dense_from_edges(p, edges));
  const Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd wsw = w * stats.s * w;
  const double n = stats.n;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    double qw = 0.0, qs = 0.0;
    for (std::uint64_t x = edges[k].split.bits(); x != 0; x &= x - 1) {
      const int a = std::countr_zero(x);
      for (std::uint64_t y = edges[k].split.bits(); y != 0; y &= y - 1) {
        const int b = std::countr_zero(y);
        qw += w(a, b);
        qs += wsw(a, b);
      }
    }
    grad[k] = -0.5 * n * qw + 0.5 * qs;
  }
  return grad;
}

// Aligned with t.edges().
inline std::vector<double> loglik_gradient(const SufficientStats& stats, const Tree& t) {
  return loglik_gradient(stats, t.p(), t.edges());
}

inline DataSet sample_gaussian(const UltrametricMatrix& m, int n, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("sample_gaussian: n must be positive");
  const int p = m.dim();
  const Eigen::MatrixXd l = detail::factor(m.matrix()).matrixL();
  DataSet out;
  out.x.resize(n, p);
  Eigen::VectorXd z(p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) z(j) = rng.normal();
    out.x.row(i) = (l * z).transpose();
  }
  return out;
}

// Multivariate t: z sqrt(df / w) with z ~ N(0, m), w ~ chi-square(df).
inline DataSet sample_t(const UltrametricMatrix& m, int df, int n, RngStream& rng) {
  if (df < 3) throw std::invalid_argument("sample_t: df must be at least 3");
  if (n < 1) throw std::invalid_argument("sample_t: n must be positive");
  const int p = m.dim();
  const Eigen::MatrixXd l = detail::factor(m.matrix()).matrixL();
  DataSet out;
  out.distribution = Distribution::student_t;
  out.df = df;
  out.x.resize(n, p);
  Eigen::VectorXd z(p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) z(j) = rng.normal();
    const double w = rng.chi_square(df);
    out.x.row(i) = (l * z).transpose() * std::sqrt(df / w);
  }
  return out;
}

}  // namespace ultratree
