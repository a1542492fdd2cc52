#include "bilimit/sampling.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/special_functions/erf.hpp>

namespace bilimit {

namespace {

constexpr unsigned kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,
                                37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79};

double radical_inverse(std::uint64_t index, unsigned base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (index > 0) {
        r += f * static_cast<double>(index % base);
        index /= base;
        f *= inv;
    }
    return r;
}

double inverse_normal(double u) {
    return std::numbers::sqrt2 * boost::math::erf_inv(2.0 * u - 1.0);
}

}  // namespace

std::vector<Point> euclidean_sphere_samples(std::size_t dim, std::size_t count, std::uint64_t seed) {
    if (dim == 0) throw PreconditionError("sphere sampling needs dimension >= 1");
    if (dim > std::size(kPrimes)) throw PreconditionError("sphere sampling dimension too large");
    std::vector<Point> pts;
    pts.reserve(count);
    if (dim == 1) {
        for (std::size_t k = 0; k < count; ++k) pts.push_back({(k + seed) % 2 == 0 ? 1.0 : -1.0});
        return pts;
    }
    if (dim == 2) {
        const double offset = std::fmod(static_cast<double>(seed) * 0.6180339887498949, 1.0);
        for (std::size_t k = 0; k < count; ++k) {
            const double a = 2.0 * std::numbers::pi * (static_cast<double>(k) + offset) /
                             static_cast<double>(count);
            pts.push_back({std::cos(a), std::sin(a)});
        }
        return pts;
    }
    const std::uint64_t start = 1 + seed * 104729;
    for (std::size_t k = 0; k < count; ++k) {
        Point g(dim);
        double norm2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            double u = radical_inverse(start + k, kPrimes[j]);
            u = std::clamp(u, 1e-12, 1.0 - 1e-12);
            g[j] = inverse_normal(u);
            norm2 += g[j] * g[j];
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& v : g) v *= inv;
        pts.push_back(std::move(g));
    }
    return pts;
}

std::vector<Point> sphere_samples(const WeightVector& r, std::size_t count, std::uint64_t seed) {
    std::vector<Point> pts = euclidean_sphere_samples(r.size(), count, seed);
    for (Point& p : pts) p = polar_decompose(p, r).theta;
    return pts;
}

std::vector<double> log_ladder(double lo, double hi, std::size_t count) {
    if (count < 2 || !(lo > 0.0) || !(hi > lo)) throw PreconditionError("invalid log ladder");
    std::vector<double> out(count);
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t k = 0; k < count; ++k)
        out[k] = std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

std::vector<Point> random_initial_conditions(const WeightVector& r, std::size_t count,
                                             double norm_lo, double norm_hi, std::uint64_t seed) {
    if (!(norm_lo > 0.0) || norm_hi < norm_lo) throw PreconditionError("invalid norm range");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Point> out;
    out.reserve(count);
    const double a = std::log(norm_lo), b = std::log(norm_hi);
    for (std::size_t k = 0; k < count; ++k) {
        Point g(r.size());
        double n2 = 0.0;
        do {
            n2 = 0.0;
            for (double& v : g) {
                v = normal(rng);
                n2 += v * v;
            }
        } while (n2 == 0.0);
        const Point theta = polar_decompose(g, r).theta;
        const double lambda = std::exp(a + (b - a) * unit(rng));
        out.push_back(dilate(lambda, r, theta));
    }
    return out;
}

}  // namespace bilimit
