#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "zerolocus/linalg.hpp"
#include "zerolocus/network.hpp"

namespace zerolocus::testing {

inline DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DenseMatrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = u(rng);
    return m;
}

inline DenseMatrix random_symmetric(std::mt19937_64& rng, std::size_t n) {
    DenseMatrix m = random_matrix(rng, n, n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < r; ++c) m(r, c) = m(c, r);
    return m;
}

/// d points with inputs uniform in [lo, hi]^p and labels uniform in [lo, hi]^l.
inline Dataset random_dataset(std::mt19937_64& rng, std::size_t d, std::size_t p, std::size_t l, double lo = -10.0,
                              double hi = 10.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Dataset data;
    while (data.size() < d) {
        std::vector<double> x(p);
        for (double& v : x) v = u(rng);
        bool dup = false;
        for (const auto& other : data.inputs) dup = dup || other == x;
        if (dup) continue;
        std::vector<double> y(l);
        for (double& v : y) v = u(rng);
        data.inputs.push_back(std::move(x));
        data.labels.push_back(std::move(y));
    }
    return data;
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace zerolocus::testing
