#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bilimit/hom_core.hpp"

namespace bilimit {

/// Deterministic quasi-uniform directions on the Euclidean unit sphere in R^dim.
/// dim 1 alternates +-1, dim 2 uses equally spaced angles, higher dimensions map a
/// Halton sequence through the inverse normal CDF. The seed shifts the sequence.
std::vector<Point> euclidean_sphere_samples(std::size_t dim, std::size_t count, std::uint64_t seed);

/// Points on the homogeneous unit sphere S_r obtained by polar-mapping Euclidean samples.
std::vector<Point> sphere_samples(const WeightVector& r, std::size_t count, std::uint64_t seed);

/// Log-spaced values lo, ..., hi (count >= 2).
std::vector<double> log_ladder(double lo, double hi, std::size_t count);

/// Deterministic points with hom_norm log-uniform in [norm_lo, norm_hi].
std::vector<Point> random_initial_conditions(const WeightVector& r, std::size_t count,
                                             double norm_lo, double norm_hi, std::uint64_t seed);

}  // namespace bilimit
