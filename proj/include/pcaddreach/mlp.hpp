#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace pcaddreach {

/// Componentwise map x -> scale . x + offset.
template <typename Scalar>
struct AffineScaling {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector scale;
  Vector offset;

  Vector apply(const Vector& x) const { return scale.cwiseProduct(x) + offset; }
};

template <typename Scalar>
AffineScaling<Scalar> identity_scaling(Eigen::Index dim) {
  AffineScaling<Scalar> s;
  s.scale = AffineScaling<Scalar>::Vector::Ones(dim);
  s.offset = AffineScaling<Scalar>::Vector::Zero(dim);
  return s;
}

/// Fully connected ReLU network. weights[l] is widths[l+1] x widths[l]; ReLU
/// follows every layer except the last. Input and output scalings fold the
/// training-time normalization into the model so callers see raw units.
template <typename Scalar>
struct Mlp {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  std::vector<Eigen::Index> layer_widths;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  AffineScaling<Scalar> input_scaling;
  AffineScaling<Scalar> output_scaling;

  Eigen::Index input_dim() const { return layer_widths.front(); }
  Eigen::Index output_dim() const { return layer_widths.back(); }

  Vector forward(const Vector& x) const {
    if (x.size() != input_dim()) throw std::invalid_argument("forward: input dimension mismatch");
    Vector h = input_scaling.apply(x);
    for (std::size_t l = 0; l < weights.size(); ++l) {
      h = weights[l] * h + biases[l];
      if (l + 1 < weights.size()) h = h.cwiseMax(Scalar(0));
    }
    return output_scaling.apply(h);
  }

  /// Batch forward; columns are samples.
  Matrix forward(const Matrix& x) const {
    if (x.rows() != input_dim()) throw std::invalid_argument("forward: input dimension mismatch");
    Matrix h = ((x.array().colwise() * input_scaling.scale.array()).colwise() +
                input_scaling.offset.array())
                   .matrix();
    for (std::size_t l = 0; l < weights.size(); ++l) {
      h = (weights[l] * h).colwise() + biases[l];
      if (l + 1 < weights.size()) h = h.cwiseMax(Scalar(0));
    }
    return ((h.array().colwise() * output_scaling.scale.array()).colwise() +
            output_scaling.offset.array())
        .matrix();
  }
};

namespace detail {

template <typename Scalar>
bool same_scaling(const AffineScaling<Scalar>& a, const AffineScaling<Scalar>& b) {
  return a.scale.size() == b.scale.size() && a.scale == b.scale && a.offset == b.offset;
}

}  // namespace detail

/// Parameter-space blend (1 - lambda) * a + lambda * b. Both networks must
/// share the architecture and the exact same normalizers, otherwise the blend
/// has no meaning in raw units.
template <typename Scalar>
Mlp<Scalar> interpolate(const Mlp<Scalar>& a, const Mlp<Scalar>& b, Scalar lambda) {
  if (a.layer_widths != b.layer_widths)
    throw std::invalid_argument("interpolate: architecture mismatch");
  if (!detail::same_scaling(a.input_scaling, b.input_scaling) ||
      !detail::same_scaling(a.output_scaling, b.output_scaling))
    throw std::invalid_argument("interpolate: normalizer mismatch");
  Mlp<Scalar> out = a;
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    out.weights[l] = (Scalar(1) - lambda) * a.weights[l] + lambda * b.weights[l];
    out.biases[l] = (Scalar(1) - lambda) * a.biases[l] + lambda * b.biases[l];
  }
  return out;
}

using Mlpd = Mlp<double>;
using AffineScalingd = AffineScaling<double>;

}  // namespace pcaddreach
