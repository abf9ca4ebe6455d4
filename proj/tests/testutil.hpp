#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "ovmae/rng.hpp"
#include "ovmae/tape.hpp"
#include "ovmae/tensor.hpp"

namespace ovmae::test {

inline Tensor random_tensor(std::vector<std::size_t> dims, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
    Tensor t(std::move(dims));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = lo + (hi - lo) * rng.next_uniform();
    return t;
}

// Central-difference gradient check, independent of the tape's backward
// rules: the builder is re-run from scratch for every probe evaluation.
// Returns the max of |analytic - numeric| / max(1, |analytic|).
using LossBuilder = std::function<Value(Tape&, const std::vector<Value>&)>;

inline double gradcheck_max_rel_err(const std::vector<Tensor>& inputs, const LossBuilder& build,
                                    double step = 1e-6) {
    // Analytic gradients.
    Tape tape;
    std::vector<Value> leaves;
    leaves.reserve(inputs.size());
    for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t, true));
    Value loss = build(tape, leaves);
    tape.backward(loss);

    auto eval = [&](const std::vector<Tensor>& pts) {
        Tape t2;
        std::vector<Value> l2;
        for (const Tensor& t : pts) l2.push_back(t2.leaf(t, true));
        return t2.value(build(t2, l2))[0];
    };

    double worst = 0.0;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        const Tensor& analytic = tape.grad(leaves[ti]);
        for (std::size_t i = 0; i < inputs[ti].size(); ++i) {
            std::vector<Tensor> plus = inputs, minus = inputs;
            plus[ti][i] += step;
            minus[ti][i] -= step;
            const double numeric = (eval(plus) - eval(minus)) / (2.0 * step);
            const double err =
                std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

} // namespace ovmae::test
