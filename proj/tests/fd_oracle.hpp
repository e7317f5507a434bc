#pragma once

// Central finite-difference oracle for gradient checks. Deliberately
// independent of the autodiff tape: it only ever re-runs a forward pass.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tgan/tensor.hpp"

namespace fd {

// f evaluates the scalar loss from the current contents of `param`.
inline double derivative(const std::function<double()>& f, tgan::Tensor& param,
                         std::size_t index, double step = 1e-6) {
    auto vals = param.values_mut();
    const double keep = vals[index];
    vals[index] = keep + step;
    const double fp = f();
    vals[index] = keep - step;
    const double fm = f();
    vals[index] = keep;
    return (fp - fm) / (2.0 * step);
}

struct CheckResult {
    double max_rel_err = 0.0;
    std::string worst;  // "param[i]" of the worst coordinate
};

// Compares autodiff gradients already accumulated in the params against
// finite differences of `forward`. rel err = |ad - fd| / max(1, |fd|).
inline CheckResult compare(const std::function<double()>& forward,
                           std::vector<std::pair<std::string, tgan::Tensor>> params,
                           double step = 1e-6) {
    CheckResult res;
    for (auto& [name, p] : params) {
        auto grad = p.grad();
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double fdv = derivative(forward, p, i, step);
            const double rel = std::abs(grad[i] - fdv) / std::max(1.0, std::abs(fdv));
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return res;
}

}  // namespace fd
