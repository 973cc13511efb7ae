#include "mro/kernels.hpp"

#include <cmath>
#include <string>

namespace mro {

namespace {

Slice hull(const std::vector<Kernel>& children) {
  Eigen::Index lo = children.front().slice().begin;
  Eigen::Index hi = children.front().slice().end();
  for (const auto& c : children) {
    lo = std::min(lo, c.slice().begin);
    hi = std::max(hi, c.slice().end());
  }
  return {lo, hi - lo};
}

void check_slice(const Slice& s) {
  if (s.begin < 0 || s.size <= 0) throw DomainError("kernel slice must be a nonempty range");
}

}  // namespace

Kernel Kernel::linear(Slice slice, double scale) {
  check_slice(slice);
  if (!(scale > 0.0)) throw DomainError("linear kernel: scale must be positive");
  Kernel k;
  k.type_ = KernelType::Linear;
  k.scale_ = scale;
  k.slice_ = slice;
  return k;
}

Kernel Kernel::squared_exponential(double lengthscale, Slice slice) {
  check_slice(slice);
  if (!(lengthscale > 0.0)) throw DomainError("SE kernel: lengthscale must be positive");
  Kernel k;
  k.type_ = KernelType::SquaredExponential;
  k.lengthscale_ = lengthscale;
  k.slice_ = slice;
  return k;
}

Kernel Kernel::matern(double nu, double lengthscale, Slice slice) {
  check_slice(slice);
  if (!(lengthscale > 0.0)) throw DomainError("Matern kernel: lengthscale must be positive");
  if (!(nu > 0.0)) throw DomainError("Matern kernel: nu must be positive");
  Kernel k;
  k.type_ = KernelType::Matern;
  k.nu_ = nu;
  k.lengthscale_ = lengthscale;
  k.slice_ = slice;
  return k;
}

Kernel Kernel::sum(std::vector<Kernel> children) {
  if (children.size() < 2) throw DomainError("sum kernel needs at least two children");
  Kernel k;
  k.type_ = KernelType::Sum;
  k.slice_ = hull(children);
  k.children_ = std::move(children);
  return k;
}

Kernel Kernel::product(std::vector<Kernel> children) {
  if (children.size() < 2) throw DomainError("product kernel needs at least two children");
  Kernel k;
  k.type_ = KernelType::Product;
  k.slice_ = hull(children);
  k.children_ = std::move(children);
  return k;
}

double matern_correlation(double r, double nu, double lengthscale) {
  const double u = r / lengthscale;
  if (nu == 0.5) return std::exp(-u);
  if (nu == 1.5) {
    const double s = std::sqrt(3.0) * u;
    return (1.0 + s) * std::exp(-s);
  }
  if (nu == 2.5) {
    const double s = std::sqrt(5.0) * u;
    return (1.0 + s + s * s / 3.0) * std::exp(-s);
  }
  if (u == 0.0) return 1.0;
  const double s = std::sqrt(2.0 * nu) * u;
  // Beyond this the Bessel factor underflows; the correlation is zero anyway.
  if (s > 700.0) return 0.0;
  return std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(s, nu) * std::cyl_bessel_k(nu, s);
}

double Kernel::operator()(const Eigen::Ref<const Eigen::VectorXd>& a,
                          const Eigen::Ref<const Eigen::VectorXd>& b) const {
  switch (type_) {
    case KernelType::Linear:
      return a.segment(slice_.begin, slice_.size).dot(b.segment(slice_.begin, slice_.size)) /
             (scale_ * scale_);
    case KernelType::SquaredExponential: {
      const double d2 =
          (a.segment(slice_.begin, slice_.size) - b.segment(slice_.begin, slice_.size))
              .squaredNorm();
      return std::exp(-d2 / (2.0 * lengthscale_ * lengthscale_));
    }
    case KernelType::Matern: {
      const double r =
          (a.segment(slice_.begin, slice_.size) - b.segment(slice_.begin, slice_.size)).norm();
      return matern_correlation(r, nu_, lengthscale_);
    }
    case KernelType::Sum: {
      double acc = 0.0;
      for (const auto& c : children_) acc += c(a, b);
      return acc / static_cast<double>(children_.size());
    }
    case KernelType::Product: {
      double acc = 1.0;
      for (const auto& c : children_) acc *= c(a, b);
      return acc;
    }
  }
  return 0.0;
}

double Kernel::eval(const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& b) const {
  if (a.size() != input_dim() || b.size() != input_dim()) {
    throw DomainError("kernel eval: expected inputs of dimension " + std::to_string(input_dim()));
  }
  return (*this)(a, b);
}

Eigen::MatrixXd gram(const Kernel& kernel, const Eigen::MatrixXd& points) {
  if (points.rows() != kernel.input_dim()) throw DomainError("gram: dimension mismatch");
  const Eigen::Index n = points.cols();
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      const double v = kernel(points.col(i), points.col(j));
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

Eigen::MatrixXd cross_covariance(const Kernel& kernel, const Eigen::MatrixXd& a,
                                 const Eigen::MatrixXd& b) {
  if (a.rows() != kernel.input_dim() || b.rows() != kernel.input_dim()) {
    throw DomainError("cross_covariance: dimension mismatch");
  }
  Eigen::MatrixXd k(a.cols(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.cols(); ++i) k(i, j) = kernel(a.col(i), b.col(j));
  }
  return k;
}

Eigen::VectorXd prior_variance(const Kernel& kernel, const Eigen::MatrixXd& points) {
  if (points.rows() != kernel.input_dim()) throw DomainError("prior_variance: dimension mismatch");
  Eigen::VectorXd d(points.cols());
  for (Eigen::Index i = 0; i < points.cols(); ++i) d(i) = kernel(points.col(i), points.col(i));
  return d;
}

// ------------------------------------------------------------ serialization

nlohmann::json kernel_to_json(const Kernel& kernel) {
  nlohmann::json j;
  j["slice"] = {kernel.slice().begin, kernel.slice().size};
  switch (kernel.type()) {
    case KernelType::Linear:
      j["type"] = "linear";
      j["scale"] = kernel.scale();
      break;
    case KernelType::SquaredExponential:
      j["type"] = "se";
      j["lengthscale"] = kernel.lengthscale();
      break;
    case KernelType::Matern:
      j["type"] = "matern";
      j["lengthscale"] = kernel.lengthscale();
      j["nu"] = kernel.nu();
      break;
    case KernelType::Sum:
    case KernelType::Product:
      j["type"] = kernel.type() == KernelType::Sum ? "sum" : "product";
      j["children"] = nlohmann::json::array();
      for (const auto& c : kernel.children()) j["children"].push_back(kernel_to_json(c));
      break;
  }
  return j;
}

Kernel kernel_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type")) throw DomainError("kernel: missing 'type'");
  const auto type = j.at("type").get<std::string>();
  if (type == "sum" || type == "product") {
    if (!j.contains("children") || !j.at("children").is_array()) {
      throw DomainError("kernel." + type + ": missing 'children'");
    }
    std::vector<Kernel> children;
    for (const auto& c : j.at("children")) children.push_back(kernel_from_json(c));
    Kernel k = type == "sum" ? Kernel::sum(std::move(children)) : Kernel::product(std::move(children));
    if (j.contains("slice")) {
      const auto s = j.at("slice");
      if (Slice{s.at(0).get<Eigen::Index>(), s.at(1).get<Eigen::Index>()} != k.slice()) {
        throw DomainError("kernel." + type + ": children do not cover the declared slice");
      }
    }
    return k;
  }
  if (!j.contains("slice") || !j.at("slice").is_array() || j.at("slice").size() != 2) {
    throw DomainError("kernel." + type + ": 'slice' must be [begin, size]");
  }
  const Slice slice{j.at("slice").at(0).get<Eigen::Index>(), j.at("slice").at(1).get<Eigen::Index>()};
  if (type == "linear") return Kernel::linear(slice, j.value("scale", 1.0));
  if (type == "se") return Kernel::squared_exponential(j.at("lengthscale").get<double>(), slice);
  if (type == "matern") {
    return Kernel::matern(j.value("nu", 2.5), j.at("lengthscale").get<double>(), slice);
  }
  throw DomainError("kernel: unknown type '" + type + "'");
}

}  // namespace mro
