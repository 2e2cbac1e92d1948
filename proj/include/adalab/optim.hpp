#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace adalab {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Step size, momentum, stabilizer and horizon shared by every method.
struct HyperParams {
  double eta = 0.1;
  double beta = 0.0;
  double epsilon = 1e-8;
  std::size_t horizon = 1000;

  void validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be positive");
    if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in [0, 1)");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw std::invalid_argument("epsilon must be positive");
    if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  }
};

enum class Method { AdagradMomentum, Adagrad, AdagradNorm, Sgd };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);

/// Iterate, accumulator and momentum of one running optimizer.
/// `v` has length d for coordinate-wise methods and length 1 for AdaGrad-Norm.
template <typename Scalar>
struct OptimizerState {
  Vector<Scalar> x;
  Vector<Scalar> v;
  Vector<Scalar> m;
  std::size_t step = 0;

  static OptimizerState initial(const Vector<Scalar>& x1, bool scalar_accumulator = false) {
    OptimizerState s;
    s.x = x1;
    s.v = Vector<Scalar>::Zero(scalar_accumulator ? 1 : x1.size());
    s.m = Vector<Scalar>::Zero(x1.size());
    return s;
  }
};

namespace detail {

template <typename Scalar>
void require_finite(const Vector<Scalar>& g) {
  if (!g.allFinite()) throw std::invalid_argument("stochastic gradient has a non-finite coordinate");
}

template <typename Scalar>
void require_dims(const OptimizerState<Scalar>& s, const Vector<Scalar>& g, Eigen::Index v_size) {
  if (g.size() != s.x.size() || s.m.size() != s.x.size() || s.v.size() != v_size)
    throw std::invalid_argument("dimension mismatch between gradient and optimizer state");
}

}  // namespace detail

/// One step of AdaGrad with heavy-ball momentum:
///   v' = v + g*g,  m' = beta*m - eta*g/(sqrt(v') + eps),  x' = x + m'.
template <typename Scalar>
OptimizerState<Scalar> adagrad_momentum_step(const OptimizerState<Scalar>& state,
                                              const Vector<Scalar>& g, const HyperParams& hyper) {
  detail::require_dims(state, g, state.x.size());
  detail::require_finite(g);
  const Scalar eta(hyper.eta), beta(hyper.beta), eps(hyper.epsilon);
  OptimizerState<Scalar> next;
  next.v = state.v + g.cwiseAbs2();
  next.m = beta * state.m - eta * g.cwiseQuotient((next.v.cwiseSqrt().array() + eps).matrix());
  next.x = state.x + next.m;
  next.step = state.step + 1;
  return next;
}

/// AdaGrad-Norm: a single accumulator of squared gradient norms.
template <typename Scalar>
OptimizerState<Scalar> adagrad_norm_step(const OptimizerState<Scalar>& state,
                                         const Vector<Scalar>& g, const HyperParams& hyper) {
  detail::require_dims(state, g, 1);
  detail::require_finite(g);
  const Scalar eta(hyper.eta), beta(hyper.beta), eps(hyper.epsilon);
  OptimizerState<Scalar> next;
  next.v = state.v;
  next.v(0) += g.squaredNorm();
  using std::sqrt;
  next.m = beta * state.m - (eta / (sqrt(next.v(0)) + eps)) * g;
  next.x = state.x + next.m;
  next.step = state.step + 1;
  return next;
}

template <typename Scalar>
OptimizerState<Scalar> sgd_step(const OptimizerState<Scalar>& state, const Vector<Scalar>& g,
                                double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (g.size() != state.x.size()) throw std::invalid_argument("dimension mismatch");
  detail::require_finite(g);
  OptimizerState<Scalar> next = state;
  next.x = state.x - Scalar(lr) * g;
  next.step = state.step + 1;
  return next;
}

/// Dispatches on `method`. Plain AdaGrad runs the momentum rule with beta = 0;
/// SGD uses eta as its learning rate.
template <typename Scalar>
OptimizerState<Scalar> optimizer_step(Method method, const OptimizerState<Scalar>& state,
                                      const Vector<Scalar>& g, const HyperParams& hyper) {
  switch (method) {
    case Method::AdagradMomentum:
      return adagrad_momentum_step(state, g, hyper);
    case Method::Adagrad: {
      HyperParams plain = hyper;
      plain.beta = 0.0;
      return adagrad_momentum_step(state, g, plain);
    }
    case Method::AdagradNorm:
      return adagrad_norm_step(state, g, hyper);
    case Method::Sgd:
      return sgd_step(state, g, hyper.eta);
  }
  throw std::invalid_argument("unknown method");
}

inline bool uses_scalar_accumulator(Method method) { return method == Method::AdagradNorm; }

/// Momentum actually applied by `method` (AdaGrad and SGD ignore hyper.beta).
inline double effective_beta(Method method, const HyperParams& hyper) {
  return (method == Method::AdagradMomentum || method == Method::AdagradNorm) ? hyper.beta : 0.0;
}

}  // namespace adalab
