#pragma once

#include "betarobust/estimation.hpp"
#include "betarobust/model.hpp"

#include <Eigen/Core>

#include <optional>
#include <vector>

namespace betarobust {

struct TuningConfig {
  double grid_spacing = 0.02;
  int m = 3;  // consecutive SQV comparisons per grid (m + 1 grid points)
  double q_min = 0.5;
  double threshold = 0.02;

  /// Throws InputError when a field is out of range.
  void validate() const;
};

/// One grid examined by the selector.
struct GridRecord {
  std::vector<double> q;    // m + 1 decreasing values
  std::vector<double> sqv;  // m values; NaN where a fit failed
  bool stable = false;
};

struct TuningTrace {
  std::vector<double> visited_q;               // distinct q values fitted, in visit order
  std::vector<Eigen::VectorXd> z;              // standardized estimates per visited q (empty on failure)
  std::vector<GridRecord> grids;
  double q_star = 1.0;
  bool fallback_to_mle = false;
  int sqv_per_grid = 0;
};

/// z_j = theta_j / (sqrt(n) se_j).
Eigen::VectorXd standardized_vector(const FitResult& fit, Eigen::Index n);

/// p^-1 ||z1 - z2||.
double sqv(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2);

struct Selection {
  double q_star;
  TuningTrace trace;
  FitResult fit;  // fit at q_star (the MLE when q_star = 1)
};

/// Data-driven choice of q for the SMLE or MDPDE. Grids of m + 1 points
/// descend from q = 1 in steps of grid_spacing; a grid is stable when all m
/// consecutive SQVs are below the threshold, and q* is then its largest q.
/// An unstable grid restarts at the lower end of its lowest violating pair.
/// When a grid would pass below q_min the selector returns q* = 1.
Selection select_q(const ModelSpec& spec, EstimatorKind::Family family, const TuningConfig& config = {},
                   const FitOptions& options = {});

}  // namespace betarobust
