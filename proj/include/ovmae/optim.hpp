#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ovmae/model.hpp"
#include "ovmae/tensor.hpp"

namespace ovmae {

// AdamW with linear warmup. Decay shape after warmup is cosine-to-zero.
struct OptimSpec {
    double peak_lr = 3e-4;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    std::size_t warmup_epochs = 40;
    std::size_t total_epochs = 800;
    std::size_t batch_size = 2048;

    void validate() const {
        if (warmup_epochs > total_epochs)
            throw ParamError("optim: warmup must not exceed total epochs");
        if (peak_lr < 0.0) throw ParamError("optim: lr must be >= 0");
        if (batch_size == 0) throw ParamError("optim: batch size must be positive");
    }
};

// Linear ramp 0 -> peak over the warmup steps, then cosine from peak to 0 at
// the final step.
inline double lr_at(std::size_t step, const OptimSpec& spec, std::size_t steps_per_epoch) {
    spec.validate();
    if (steps_per_epoch == 0) throw ParamError("lr_at: steps_per_epoch must be positive");
    const double warmup = static_cast<double>(spec.warmup_epochs * steps_per_epoch);
    const double total = static_cast<double>(spec.total_epochs * steps_per_epoch);
    const double s = static_cast<double>(step);
    if (s < warmup) return spec.peak_lr * s / warmup;
    if (total <= warmup) return spec.peak_lr;
    const double progress = std::min(1.0, (s - warmup) / (total - warmup));
    return spec.peak_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

// Decoupled AdamW over the model's canonical parameter order. Weight decay
// is skipped for layernorm gains/biases and the mask token.
class AdamW {
public:
    void reset(ModelParams& params) {
        m_.clear();
        v_.clear();
        step_ = 0;
        visit_params(params, [&](const std::string&, bool, Tensor& t) {
            m_.emplace_back(t.dims());
            v_.emplace_back(t.dims());
        });
    }

    bool initialized() const { return !m_.empty(); }
    std::size_t step_count() const { return step_; }
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }

    // grads must follow the same canonical order (one tensor per parameter).
    void apply(ModelParams& params, const std::vector<Tensor>& grads, double lr,
               const OptimSpec& spec) {
        if (!initialized()) reset(params);
        ++step_;
        const double bc1 = 1.0 - std::pow(spec.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(spec.beta2, static_cast<double>(step_));
        std::size_t i = 0;
        visit_params(params, [&](const std::string& name, bool decay, Tensor& t) {
            if (i >= grads.size() || !grads[i].same_shape(t))
                throw ShapeError("adamw: gradient list does not match parameters at " + name);
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            const Tensor& g = grads[i];
            const double keep = 1.0 - lr * spec.weight_decay;
            for (std::size_t j = 0; j < t.size(); ++j) {
                m[j] = spec.beta1 * m[j] + (1.0 - spec.beta1) * g[j];
                v[j] = spec.beta2 * v[j] + (1.0 - spec.beta2) * g[j] * g[j];
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                // Decay applies to the pre-step value, as a pure rescale.
                if (decay) t[j] *= keep;
                t[j] -= lr * mhat / (std::sqrt(vhat) + spec.eps);
            }
            ++i;
        });
        if (i != grads.size()) throw ShapeError("adamw: gradient count mismatch");
    }

private:
    std::vector<Tensor> m_, v_;
    std::size_t step_ = 0;
};

} // namespace ovmae
