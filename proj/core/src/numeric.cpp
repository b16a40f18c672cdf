#include "betarobust/numeric.hpp"

#include "betarobust/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace betarobust {

namespace {

constexpr double kAsymptoticThreshold = 6.0;

// B_{2k} / (2k), k = 1..10, for the digamma asymptotic series in 1/x^2.
constexpr std::array<double, 10> kDigammaSeries = {
    1.0 / 12.0,        -1.0 / 120.0,       1.0 / 252.0,         -1.0 / 240.0,
    1.0 / 132.0,       -691.0 / 32760.0,   1.0 / 12.0,          -3617.0 / 8160.0,
    43867.0 / 14364.0, -174611.0 / 6600.0,
};

// B_{2k}, k = 1..10, for the trigamma asymptotic series.
constexpr std::array<double, 10> kBernoulli = {
    1.0 / 6.0,     -1.0 / 30.0,     1.0 / 42.0,        -1.0 / 30.0,   5.0 / 66.0,
    -691.0 / 2730.0, 7.0 / 6.0,     -3617.0 / 510.0, 43867.0 / 798.0, -174611.0 / 330.0,
};

[[noreturn]] void throw_domain(const char* fn, double x) {
  std::ostringstream os;
  os << fn << ": argument " << x << " outside domain";
  throw DomainError(os.str());
}

}  // namespace

const char* to_string(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::domain: return "domain";
    case ErrorCategory::input: return "input";
    case ErrorCategory::infeasible: return "infeasible";
    case ErrorCategory::convergence: return "convergence";
    case ErrorCategory::numerical: return "numerical";
  }
  return "unknown";
}

InfeasibleError::InfeasibleError(const std::string& what, std::vector<std::size_t> rows)
    : Error(ErrorCategory::infeasible, [&] {
        std::ostringstream os;
        os << what << " (rows:";
        const std::size_t shown = std::min<std::size_t>(rows.size(), 10);
        for (std::size_t i = 0; i < shown; ++i) os << ' ' << rows[i] + 1;
        if (rows.size() > shown) os << " ... " << rows.size() - shown << " more";
        os << ')';
        return os.str();
      }()),
      rows_(std::move(rows)) {}

Rng substream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw_domain("digamma", x);
  double shift = 0.0;
  while (x < kAsymptoticThreshold) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv2 = 1.0 / (x * x);
  double series = 0.0;
  for (auto it = kDigammaSeries.rbegin(); it != kDigammaSeries.rend(); ++it) {
    series = (series + *it) * inv2;
  }
  return shift + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw_domain("trigamma", x);
  double shift = 0.0;
  while (x < kAsymptoticThreshold) {
    shift += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = 0.0;
  for (auto it = kBernoulli.rbegin(); it != kBernoulli.rend(); ++it) {
    series = (series + *it) * inv2;
  }
  // 1/x + 1/(2x^2) + sum B_2k / x^(2k+1)
  return shift + inv + 0.5 * inv2 + series * inv;
}

double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw_domain("log_gamma", x);
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

double log_beta_fn(ShapePair s) {
  if (!(s.a > 0.0) || !(s.b > 0.0)) {
    std::ostringstream os;
    os << "log_beta_fn: nonpositive shape (" << s.a << ", " << s.b << ")";
    throw DomainError(os.str());
  }
  return log_gamma(s.a) + log_gamma(s.b) - log_gamma(s.a + s.b);
}

double beta_logpdf(double y, double mu, double phi) {
  if (!(y > 0.0 && y < 1.0)) throw_domain("beta_logpdf (y)", y);
  if (!(mu > 0.0 && mu < 1.0)) throw_domain("beta_logpdf (mu)", mu);
  if (!(phi > 0.0)) throw_domain("beta_logpdf (phi)", phi);
  const ShapePair s = ShapePair::from_mean_precision(mu, phi);
  return (s.a - 1.0) * std::log(y) + (s.b - 1.0) * std::log1p(-y) - log_beta_fn(s);
}

ShapePair powered_shapes(double mu, double phi, double c) noexcept {
  const ShapePair s = ShapePair::from_mean_precision(mu, phi);
  return {c * (s.a - 1.0) + 1.0, c * (s.b - 1.0) + 1.0};
}

double powered_density_log_integral(double mu, double phi, double c) {
  if (!(c > 0.0)) throw_domain("powered_density_log_integral (c)", c);
  if (!(mu > 0.0 && mu < 1.0)) throw_domain("powered_density_log_integral (mu)", mu);
  if (!(phi > 0.0)) throw_domain("powered_density_log_integral (phi)", phi);
  if (c == 1.0) return 0.0;
  const ShapePair powered = powered_shapes(mu, phi, c);
  if (!(powered.a > 0.0) || !(powered.b > 0.0)) {
    throw InfeasibleError("powered beta density is not integrable", {});
  }
  return log_beta_fn(powered) - c * log_beta_fn(ShapePair::from_mean_precision(mu, phi));
}

namespace {

// log of a Gamma(shape, 1) variate. Shapes below one use the identity
// Gamma(a) = Gamma(a + 1) * U^(1/a) so tiny shapes do not underflow.
double log_gamma_variate(double shape, Rng& rng) {
  if (shape >= 1.0) {
    std::gamma_distribution<double> gamma(shape, 1.0);
    return std::log(gamma(rng));
  }
  std::gamma_distribution<double> gamma(shape + 1.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  while (u <= 0.0) u = unif(rng);
  return std::log(gamma(rng)) + std::log(u) / shape;
}

}  // namespace

double sample_beta(double mu, double phi, Rng& rng) {
  if (!(mu > 0.0 && mu < 1.0)) throw_domain("sample_beta (mu)", mu);
  if (!(phi > 0.0)) throw_domain("sample_beta (phi)", phi);
  const ShapePair s = ShapePair::from_mean_precision(mu, phi);
  const double log_x = log_gamma_variate(s.a, rng);
  const double log_y = log_gamma_variate(s.b, rng);
  // x / (x + y) = 1 / (1 + exp(log_y - log_x))
  double draw = 1.0 / (1.0 + std::exp(log_y - log_x));
  constexpr double kTiny = std::numeric_limits<double>::min();
  if (draw <= 0.0) draw = kTiny;
  if (draw >= 1.0) draw = std::nextafter(1.0, 0.0);
  return draw;
}

LogitMoments logit_moments(ShapePair s) {
  const double ta = trigamma(s.a);
  const double tb = trigamma(s.b);
  const double tab = trigamma(s.a + s.b);
  const double db = digamma(s.b);
  return {digamma(s.a) - db, db - digamma(s.a + s.b), ta + tb, tb - tab, -tb};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw_domain("normal_quantile", p);
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double chi2_1_upper_tail(double statistic) {
  if (!(statistic >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::erfc(std::sqrt(statistic) / std::sqrt(2.0));
}

}  // namespace betarobust
