#include "mro/benchmarks.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <string_view>
#include <sstream>

namespace mro {

namespace {

constexpr std::uint64_t kGPolyChecksum = 0xf1fbd3ffdd124cadULL;
constexpr std::uint32_t kFitStream = 3;

Rng seeded(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return Rng(seq);
}

std::vector<PolyTerm> parse_terms(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != "x_power,y_power,coefficient") throw DomainError("g_poly data: unexpected header");
  std::vector<PolyTerm> terms;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    PolyTerm t{};
    char c1 = 0, c2 = 0;
    std::istringstream row(line);
    if (!(row >> t.x_power >> c1 >> t.y_power >> c2 >> t.coefficient) || c1 != ',' || c2 != ',') {
      throw DomainError("g_poly data: malformed row '" + line + "'");
    }
    terms.push_back(t);
  }
  return terms;
}

}  // namespace

GeneratedTable normalize_table(const Eigen::MatrixXd& raw) {
  if (raw.size() == 0) throw DomainError("normalize_table: empty table");
  if (!raw.allFinite()) throw NumericError("normalize_table: non-finite entries");
  const double lo = raw.minCoeff();
  double range = raw.maxCoeff() - lo;
  if (!(range > 0.0)) range = 1.0;
  GeneratedTable g{((raw.array() - lo) / range).matrix(), {lo, range}};
  // Guard the endpoints against rounding so the table lies exactly in [0,1].
  g.table = g.table.cwiseMax(0.0).cwiseMin(1.0);
  return g;
}

Eigen::VectorXd draw_gp_raw(const Kernel& kernel, const Eigen::MatrixXd& points,
                            const Eigen::Ref<const Eigen::VectorXd>& normals) {
  if (points.cols() == 0) throw DomainError("draw_gp_raw: empty grid");
  if (normals.size() != points.cols()) throw DomainError("draw_gp_raw: one normal per point");
  const Eigen::MatrixXd k = gram(kernel, points);
  for (double jitter : {kGramJitter, 1e-6, 1e-4}) {
    Eigen::MatrixXd a = k;
    a.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) return llt.matrixL() * normals;
  }
  throw NumericError("draw_gp_raw: Gram factorization failed");
}

GeneratedTable sample_gp_function(const Kernel& kernel, const Eigen::MatrixXd& joint_inputs,
                                  Index num_theta, std::uint64_t seed) {
  if (num_theta == 0 || joint_inputs.cols() % static_cast<Eigen::Index>(num_theta) != 0) {
    throw DomainError("sample_gp_function: column count must be a multiple of num_theta");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd xi(joint_inputs.cols());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
  const Eigen::VectorXd f = draw_gp_raw(kernel, joint_inputs, xi);
  const auto m = static_cast<Eigen::Index>(num_theta);
  // f is x-major, which is row-major storage of the num_x by m table.
  Eigen::MatrixXd raw(f.size() / m, m);
  for (Eigen::Index j = 0; j < f.size(); ++j) raw(j / m, j % m) = f(j);
  return normalize_table(raw);
}

// ------------------------------------------------------------------ g_poly

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

const std::vector<PolyTerm>& g_poly_terms() {
  static const std::vector<PolyTerm> terms = [] {
    const std::string path = std::string(MRO_DATA_DIR) + "/g_poly_coefficients.csv";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("g_poly data: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    if (fnv1a64(text) != kGPolyChecksum) throw DomainError("g_poly data: checksum mismatch");
    return parse_terms(text);
  }();
  return terms;
}

double g_poly(const Eigen::Ref<const Eigen::Vector2d>& x) {
  double f = 0.0;
  for (const auto& t : g_poly_terms()) {
    f += t.coefficient * std::pow(x(0), t.x_power) * std::pow(x(1), t.y_power);
  }
  return -f;
}

PerturbedObjective build_perturbed_objective(const DecisionGrid& grid, const ParamSet& params,
                                             double noise_sigma_raw) {
  if (grid.dim() != 2 || params.dim() != 2) {
    throw DomainError("build_perturbed_objective: grid and parameters must be 2-D");
  }
  if (!(noise_sigma_raw >= 0.0)) throw DomainError("build_perturbed_objective: noise must be >= 0");
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(params.size()));
  for (Index x = 0; x < grid.size(); ++x) {
    for (Index t = 0; t < params.size(); ++t) {
      raw(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(t)) =
          g_poly(Eigen::Vector2d(grid.point(x) - params.value(t)));
    }
  }
  auto g = normalize_table(raw);
  return {ObjectiveOracle(std::move(g.table), noise_sigma_raw / g.norm.range), g.norm};
}

Eigen::MatrixXd sample_unit_ball(Index n, Eigen::Index dim, std::uint64_t seed, double radius) {
  if (dim < 1) throw DomainError("sample_unit_ball: dim must be >= 1");
  if (!(radius > 0.0)) throw DomainError("sample_unit_ball: radius must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Eigen::MatrixXd pts(dim, static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    Eigen::VectorXd d(dim);
    do {
      for (Eigen::Index k = 0; k < dim; ++k) d(k) = normal(rng);
    } while (d.norm() == 0.0);
    const double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(dim));
    pts.col(i) = r * d / d.norm();
  }
  return pts;
}

std::vector<double> evaluate_run(const RunTrace& trace, const PayoffTable& table,
                                 const std::vector<Index>& checkpoints) {
  std::vector<double> curve;
  curve.reserve(checkpoints.size());
  for (Index t : checkpoints) curve.push_back(performance(trace.strategy_at(t), table));
  return curve;
}

// --------------------------------------------------------------- synth-1d

Kernel synth_1d_kernel(double lengthscale) {
  return Kernel::product({Kernel::linear({0, 2}), Kernel::squared_exponential(lengthscale, {0, 2})});
}

BenchmarkInstance make_synth_1d(const Synth1dSpec& spec, std::uint64_t seed) {
  if (spec.grid_x == 0 || spec.grid_theta == 0) throw DomainError("synth-1d: sizes must be >= 1");
  if (!(spec.noise_sigma > 0.0)) throw DomainError("synth-1d: noise_sigma must be positive");
  auto grid = DecisionGrid::uniform_1d(spec.grid_x, -1.0, 1.0);
  auto params = ParamSet(DecisionGrid::uniform_1d(spec.grid_theta, -1.0, 1.0).points());
  const Kernel kernel = synth_1d_kernel(spec.lengthscale);
  Eigen::MatrixXd joint = concat_joint_inputs(grid, params);
  auto g = sample_gp_function(kernel, joint, params.size(), seed);
  ObjectiveOracle oracle(std::move(g.table), spec.noise_sigma / g.norm.range);
  GpPrior prior{kernel, spec.noise_sigma * spec.noise_sigma, {g.norm.offset, g.norm.range}};
  return {"synth-1d", Problem{std::move(oracle), std::move(joint), std::move(prior)},
          std::move(grid), std::move(params), g.norm};
}

// ------------------------------------------------------------- PolyRobust

HyperFit fit_matern_hyperparameters(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                                    const std::vector<double>& nus,
                                    const std::vector<double>& lengthscales,
                                    const std::vector<double>& lambdas) {
  if (inputs.cols() == 0 || inputs.cols() != targets.size()) {
    throw DomainError("fit_matern_hyperparameters: need matching, nonempty samples");
  }
  HyperFit best;
  best.log_likelihood = -std::numeric_limits<double>::infinity();
  const Slice all{0, inputs.rows()};
  for (double nu : nus) {
    for (double l : lengthscales) {
      for (double lambda : lambdas) {
        const auto gp = GpState::fit(Kernel::matern(nu, l, all), lambda, inputs, targets);
        const double ll = gp.log_marginal_likelihood();
        if (ll > best.log_likelihood) best = {nu, l, lambda, ll};
      }
    }
  }
  return best;
}

BenchmarkInstance make_poly_robust(const PolySpec& spec, std::uint64_t seed, HyperFit* fit_out) {
  if (spec.grid_side < 2 || spec.num_theta == 0) throw DomainError("poly: sizes too small");
  if (spec.fit_samples < 2) throw DomainError("poly: fit_samples must be >= 2");
  Box2 b = spec.domain;
  if (spec.shrink_by_radius) {
    const double r = spec.ball_radius;
    b = {b.lo_x + r, b.hi_x - r, b.lo_y + r, b.hi_y - r};
    if (!(b.lo_x < b.hi_x && b.lo_y < b.hi_y)) throw DomainError("poly: ball radius exceeds the domain");
  }
  auto grid = DecisionGrid::uniform_2d(spec.grid_side, b.lo_x, b.hi_x, spec.grid_side, b.lo_y, b.hi_y);
  auto params = ParamSet(sample_unit_ball(spec.num_theta, 2, seed, spec.ball_radius));
  auto objective = build_perturbed_objective(grid, params, spec.noise_sigma);

  const auto m = static_cast<Eigen::Index>(params.size());
  Eigen::MatrixXd joint;
  if (spec.perturbed_input) {
    joint.resize(2, static_cast<Eigen::Index>(grid.size()) * m);
    for (Index x = 0; x < grid.size(); ++x) {
      for (Index t = 0; t < params.size(); ++t) {
        joint.col(static_cast<Eigen::Index>(x) * m + static_cast<Eigen::Index>(t)) =
            grid.point(x) - params.value(t);
      }
    }
  } else {
    joint = concat_joint_inputs(grid, params);
  }
  const Eigen::Index d = joint.rows();

  // Noisy samples at random pairs, standardized, for the likelihood fit.
  Rng rng = seeded(seed, kFitStream);
  std::uniform_int_distribution<Eigen::Index> pick(0, joint.cols() - 1);
  const auto n = static_cast<Eigen::Index>(spec.fit_samples);
  Eigen::MatrixXd z(d, n);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = pick(rng);
    z.col(i) = joint.col(j);
    y(i) = objective.oracle.eval_noisy(static_cast<Index>(j / m), static_cast<Index>(j % m), rng);
  }
  const double mean = y.mean();
  double sd = std::sqrt((y.array() - mean).square().sum() / static_cast<double>(n - 1));
  if (!(sd > 0.0)) sd = 1.0;
  const Eigen::VectorXd ys = (y.array() - mean) / sd;

  const HyperFit fit = fit_matern_hyperparameters(
      z, ys, {1.5, 2.5}, {0.25, 0.35, 0.5, 0.7, 1.0, 1.4, 2.0, 2.8},
      {1e-4, 1e-3, 1e-2, 3e-2, 0.1, 0.3});
  if (fit_out) *fit_out = fit;

  GpPrior prior{Kernel::matern(fit.nu, fit.lengthscale, {0, d}), fit.lambda, {-mean / sd, 1.0 / sd}};
  return {"synth-poly", Problem{std::move(objective.oracle), std::move(joint), std::move(prior)},
          std::move(grid), std::move(params), objective.norm};
}

}  // namespace mro
