#pragma once

// Independent reference computations for the tests: adaptive quadrature
// against beta densities, high-order finite differences and values frozen
// from 50-digit mpmath evaluations.

#include "betarobust/dataset.hpp"
#include "betarobust/model.hpp"

#include <boost/math/distributions/beta.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <string>

namespace oracle {

/// Integral of h over (0, 1).
inline double integrate01(const std::function<double(double)>& h, double tol = 1e-13) {
  thread_local boost::math::quadrature::tanh_sinh<double> rule;
  auto guarded = [&](double y) { return (y > 0.0 && y < 1.0) ? h(y) : 0.0; };
  return rule.integrate(guarded, 0.0, 1.0, tol);
}

/// Beta(a, b) density evaluated with Boost (independent of the library).
inline double beta_pdf(double y, double a, double b) {
  return boost::math::pdf(boost::math::beta_distribution<double>(a, b), y);
}

/// E[h(Y)] with Y ~ Beta(a, b).
inline double expect(const std::function<double(double)>& h, double a, double b) {
  return integrate01([&](double y) { return h(y) * beta_pdf(y, a, b); });
}

/// Componentwise E[h(Y)] for a vector-valued h.
inline Eigen::VectorXd expect_vector(const std::function<Eigen::VectorXd(double)>& h, Eigen::Index size, double a,
                                     double b) {
  Eigen::VectorXd out(size);
  for (Eigen::Index k = 0; k < size; ++k) out[k] = expect([&](double y) { return h(y)[k]; }, a, b);
  return out;
}

/// Fourth-order central difference gradient.
inline Eigen::VectorXd gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                double step = 1e-3) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = step * std::max(1.0, std::abs(x[k]));
    auto at = [&](double d) {
      Eigen::VectorXd z = x;
      z[k] += d;
      return f(z);
    };
    g[k] = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
  }
  return g;
}

/// Fourth-order central difference Jacobian of a vector map (columns are
/// derivatives with respect to x_k).
inline Eigen::MatrixXd jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                const Eigen::VectorXd& x, double step = 1e-3) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = step * std::max(1.0, std::abs(x[k]));
    auto at = [&](double d) {
      Eigen::VectorXd z = x;
      z[k] += d;
      return f(z);
    };
    J.col(k) = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
  }
  return J;
}

inline std::string data_path(const std::string& name) { return std::string(BETAROBUST_DATA_DIR) + "/" + name; }

/// 37 rowing athletes: body fat proportion on lean body mass, constant precision.
inline betarobust::ModelSpec ais() {
  return betarobust::load_csv(data_path("ais_rowing.csv"), "BFP", {"LBM"}, {});
}

/// Single-observation intercept-only design at (mu, phi).
inline betarobust::ModelSpec intercept_only(double y = 0.5) {
  betarobust::ModelSpec spec;
  spec.y = Eigen::VectorXd::Constant(1, y);
  spec.X = Eigen::MatrixXd::Ones(1, 1);
  spec.Z = Eigen::MatrixXd::Ones(1, 1);
  return spec;
}

inline betarobust::Theta intercept_theta(double mu, double phi) {
  return {Eigen::VectorXd::Constant(1, std::log(mu / (1.0 - mu))), Eigen::VectorXd::Constant(1, std::log(phi))};
}

// psi(x) and psi'(x) at 20 significant digits (mpmath, 50-digit precision).
struct PolygammaValue {
  double x;
  double digamma;
  double trigamma;
};

inline constexpr PolygammaValue kPolygamma[] = {
    {1e-6, -1000000.5772140199687, 1000000000001.6449317},
    {1e-4, -10000.577051183514335, 100000001.64469368793},
    {0.5, -1.9635100260214234794, 4.9348022005446793094},
    {1.0, -0.57721566490153286061, 1.6449340668482264365},
    {2.0, 0.42278433509846713939, 0.64493406684822643647},
    {5.5, 1.6110931485817511237, 0.19934238698962765913},
    {6.0, 1.7061176684318004727, 0.18132295573711532536},
    {10.0, 2.2517525890667211076, 0.10516633568168574612},
    {123.456, 4.8118293238289853873, 0.0081329458342781980101},
    {1e4, 9.2102903711428494036, 0.00010000500016666666633},
};

// log B(a, b) (mpmath).
inline constexpr double kLogBeta45_45 = -63.01828765116527153277;
inline constexpr double kLogBeta1e6_2e6 = -1909548.290968532956511;
inline constexpr double kLogBeta03_72 = 0.5182818379476825396384;

// log of the integral of f(y; 0.3, 10)^1.5 (mpmath quadrature).
inline constexpr double kPoweredLogIntegral = 0.3355667274532366865448;

}  // namespace oracle
