#pragma once
#include <algorithm>
#include <cmath>
#include <random>

#include "detbench/tensor.hpp"

namespace testutil {

inline void fill_uniform(detbench::Tensor& t, std::mt19937& rng,
                         float lo = -1.f, float hi = 1.f) {
    std::uniform_real_distribution<float> d(lo, hi);
    for (float& v : t.data) v = d(rng);
}

inline void fill_uniform(std::vector<float>& v, std::mt19937& rng,
                         float lo = -1.f, float hi = 1.f) {
    std::uniform_real_distribution<float> d(lo, hi);
    for (float& x : v) x = d(rng);
}

// Max-norm relative error: max|a-b| / max(|b|_inf, eps).
inline double rel_err(const detbench::Tensor& a, const detbench::Tensor& b) {
    if (!a.same_shape(b)) return 1e30;
    double max_diff = 0, max_ref = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        max_diff = std::max(max_diff,
                            std::abs(double(a.data[i]) - double(b.data[i])));
        max_ref = std::max(max_ref, std::abs(double(b.data[i])));
    }
    return max_diff / std::max(max_ref, 1e-20);
}

inline double max_abs_diff(const detbench::Tensor& a,
                           const detbench::Tensor& b) {
    if (!a.same_shape(b)) return 1e30;
    double m = 0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(double(a.data[i]) - double(b.data[i])));
    return m;
}

inline bool all_finite(const detbench::Tensor& t) {
    for (float v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace testutil
