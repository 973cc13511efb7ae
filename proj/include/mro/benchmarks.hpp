#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mro/algorithms.hpp"
#include "mro/domain.hpp"
#include "mro/kernels.hpp"

namespace mro {

/// normalized = (raw - offset) / range
struct Normalization {
  double offset = 0.0;
  double range = 1.0;
};

struct GeneratedTable {
  PayoffTable table;  // normalized, num_x by num_theta
  Normalization norm;
};

/// Affinely map a raw table onto [0,1]. A constant table maps to all zeros
/// with range 1.
GeneratedTable normalize_table(const Eigen::MatrixXd& raw);

/// L xi where L L^T = gram(points) + jitter I, jitter escalating from
/// kGramJitter. `normals` supplies one standard normal per point.
Eigen::VectorXd draw_gp_raw(const Kernel& kernel, const Eigen::MatrixXd& points,
                            const Eigen::Ref<const Eigen::VectorXd>& normals);

/// One GP(0, k) draw over `joint_inputs` (x-major, num_theta per x),
/// normalized to [0,1].
GeneratedTable sample_gp_function(const Kernel& kernel, const Eigen::MatrixXd& joint_inputs,
                                  Index num_theta, std::uint64_t seed);

/// Monomial x^i y^j with coefficient c.
struct PolyTerm {
  int x_power;
  int y_power;
  double coefficient;
};

/// Coefficients of the robust-optimization test polynomial, read once from
/// the data directory and checked against a pinned FNV-1a checksum.
const std::vector<PolyTerm>& g_poly_terms();
std::uint64_t fnv1a64(std::string_view bytes);

/// Negated test polynomial, so the task is maximization. Natural domain
/// [-0.95, 3.2] x [-0.45, 4.4].
double g_poly(const Eigen::Ref<const Eigen::Vector2d>& x);

struct Box2 {
  double lo_x = -0.95, hi_x = 3.2;
  double lo_y = -0.45, hi_y = 4.4;
};

/// Oracle with eval_exact(x, theta) = g_poly(x - theta) normalized over the
/// full grid x Theta product.
struct PerturbedObjective {
  ObjectiveOracle oracle;
  Normalization norm;
};
PerturbedObjective build_perturbed_objective(const DecisionGrid& grid, const ParamSet& params,
                                             double noise_sigma_raw);

/// n i.i.d. uniform points in the radius-`radius` ball of R^dim, as columns.
Eigen::MatrixXd sample_unit_ball(Index n, Eigen::Index dim, std::uint64_t seed,
                                 double radius = 1.0);

/// Performance of the strategy the run would report after each checkpoint.
std::vector<double> evaluate_run(const RunTrace& trace, const PayoffTable& table,
                                 const std::vector<Index>& checkpoints);

// ------------------------------------------------------------ instances

struct BenchmarkInstance {
  std::string name;
  Problem problem;
  DecisionGrid grid;
  ParamSet params;
  Normalization norm;
};

struct Synth1dSpec {
  Index grid_x = 100;
  Index grid_theta = 30;
  double lengthscale = 0.2;
  double noise_sigma = 1.0;  // raw units
};

/// Linear times SE kernel, both on the joint input (x, theta) in [-1,1]^2.
/// The GP runs under this true prior with lambda = noise_sigma^2.
Kernel synth_1d_kernel(double lengthscale);
BenchmarkInstance make_synth_1d(const Synth1dSpec& spec, std::uint64_t seed);

struct HyperFit {
  double nu = 2.5;
  double lengthscale = 1.0;
  double lambda = 1.0;
  double log_likelihood = 0.0;
};

/// Grid-search maximum likelihood for a Matern kernel on the standardized
/// samples (inputs as columns).
HyperFit fit_matern_hyperparameters(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                                    const std::vector<double>& nus,
                                    const std::vector<double>& lengthscales,
                                    const std::vector<double>& lambdas);

struct PolySpec {
  Index grid_side = 20;  // grid_side^2 decision points
  Index num_theta = 20;
  double ball_radius = 1.0;
  double noise_sigma = 1.0;  // raw units
  Box2 domain;                  // natural domain of the polynomial
  bool shrink_by_radius = true;  // keep every x - theta inside `domain`
  Index fit_samples = 100;
  bool perturbed_input = true;  // GP input x - theta; false uses the joint (x, theta)
};

/// g_poly(x - theta) on a uniform grid. The GP input for (x, theta) is the
/// perturbed point x - theta (or the 4-D joint input); Matern
/// hyperparameters are fitted by maximum likelihood on noisy samples.
BenchmarkInstance make_poly_robust(const PolySpec& spec, std::uint64_t seed, HyperFit* fit = nullptr);

}  // namespace mro
