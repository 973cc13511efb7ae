#pragma once

#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mro/domain.hpp"

namespace mro {

/// Contiguous coordinate range [begin, begin + size) of a joint input.
struct Slice {
  Eigen::Index begin = 0;
  Eigen::Index size = 0;
  Eigen::Index end() const { return begin + size; }
  bool operator==(const Slice&) const = default;
};

enum class KernelType { Linear, SquaredExponential, Matern, Sum, Product };

/// Symbolic kernel on the joint space X x Theta.
///
/// Leaves read only their slice of the input vector. Sum composites return
/// the mean of their children so a sum of unit-bounded kernels stays
/// unit-bounded; Product composites multiply. The linear kernel divides the
/// dot product by scale^2, where scale is the radius of the input region.
class Kernel {
 public:
  static Kernel linear(Slice slice, double scale = 1.0);
  static Kernel squared_exponential(double lengthscale, Slice slice);
  static Kernel matern(double nu, double lengthscale, Slice slice);
  static Kernel sum(std::vector<Kernel> children);
  static Kernel product(std::vector<Kernel> children);

  KernelType type() const { return type_; }
  double lengthscale() const { return lengthscale_; }
  double nu() const { return nu_; }
  double scale() const { return scale_; }
  const Slice& slice() const { return slice_; }
  const std::vector<Kernel>& children() const { return children_; }

  /// Input dimension this kernel expects (end of its slice).
  Eigen::Index input_dim() const { return slice_.end(); }

  /// k(a, b). Throws DomainError unless both have size input_dim().
  double eval(const Eigen::Ref<const Eigen::VectorXd>& a,
              const Eigen::Ref<const Eigen::VectorXd>& b) const;

  /// Same as eval, without the dimension check. For hot loops.
  double operator()(const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& b) const;

  bool operator==(const Kernel&) const = default;

 private:
  Kernel() = default;

  KernelType type_ = KernelType::Linear;
  double lengthscale_ = 1.0;
  double nu_ = 2.5;
  double scale_ = 1.0;
  Slice slice_;
  std::vector<Kernel> children_;
};

/// Matern correlation for distance r via the modified Bessel function of
/// the second kind. Half-integer nu in {1/2, 3/2, 5/2} use closed forms.
double matern_correlation(double r, double nu, double lengthscale);

/// Gram matrix of the columns of `points`. Exactly symmetric.
Eigen::MatrixXd gram(const Kernel& kernel, const Eigen::MatrixXd& points);

/// Cross-covariance K(a_i, b_j) between the columns of `a` and `b`.
Eigen::MatrixXd cross_covariance(const Kernel& kernel, const Eigen::MatrixXd& a,
                                 const Eigen::MatrixXd& b);

/// Diagonal k(z_i, z_i) for each column.
Eigen::VectorXd prior_variance(const Kernel& kernel, const Eigen::MatrixXd& points);

/// Diagonal jitter added before factorizing a bare Gram matrix.
inline constexpr double kGramJitter = 1e-8;

// Config-file form: {type, lengthscale?, nu?, scale?, slice: [begin, size], children?}
nlohmann::json kernel_to_json(const Kernel& kernel);
Kernel kernel_from_json(const nlohmann::json& j);

}  // namespace mro
