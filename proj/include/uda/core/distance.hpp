#pragma once

#include <span>

namespace uda {

/// 1 - cos(u,v), in [0,2]. One all-zero vector is treated as maximally
/// dissimilar (returns 1); both all-zero throws std::domain_error
/// ("degenerate embedding").
double cosine_distance(std::span<const double> u, std::span<const double> v);

double euclidean_distance(std::span<const double> u, std::span<const double> v);
double squared_euclidean(std::span<const double> u, std::span<const double> v);

}  // namespace uda
