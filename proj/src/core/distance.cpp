#include "uda/core/distance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace uda {

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine_distance: length mismatch");
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0 && nv == 0) throw std::domain_error("degenerate embedding");
  if (nu == 0 || nv == 0) return 1.0;
  const double d = 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(d, 0.0, 2.0);
}

double squared_euclidean(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("euclidean: length mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    acc += d * d;
  }
  return acc;
}

double euclidean_distance(std::span<const double> u, std::span<const double> v) {
  return std::sqrt(squared_euclidean(u, v));
}

}  // namespace uda
