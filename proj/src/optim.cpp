#include "adalab/optim.hpp"

#include <string>

namespace adalab {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::AdagradMomentum:
      return "adagrad-m";
    case Method::Adagrad:
      return "adagrad";
    case Method::AdagradNorm:
      return "adagrad-norm";
    case Method::Sgd:
      return "sgd";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::AdagradMomentum, Method::Adagrad, Method::AdagradNorm, Method::Sgd})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

}  // namespace adalab
