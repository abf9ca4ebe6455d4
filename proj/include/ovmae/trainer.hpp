#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ovmae/masking.hpp"
#include "ovmae/model.hpp"
#include "ovmae/objective.hpp"
#include "ovmae/optim.hpp"
#include "ovmae/rng.hpp"
#include "ovmae/tape.hpp"

namespace ovmae {

// One training example plus the seed its mask is generated from. Replicated
// samples share pixels but never a mask seed.
struct Sample {
    VisualTensor x;
    std::uint64_t mask_seed = 0;
};

struct TrainState {
    ModelConfig cfg;
    ModelParams params;
    AdamW opt;
    std::size_t step = 0;
    std::size_t epoch = 0;
    std::uint64_t seed = 0;
    Rng mask_stream; // for callers that draw per-step mask seeds

    TrainState() = default;
};

inline TrainState make_train_state(const ModelConfig& cfg, std::uint64_t seed) {
    TrainState st;
    st.cfg = cfg;
    st.params = init_params(cfg, seed);
    st.opt.reset(st.params);
    st.seed = seed;
    st.mask_stream = Rng(seed, "step-masks");
    return st;
}

namespace detail {

inline std::vector<Tensor> collect_grads(Tape& tape, ModelParams& params, ModelValues& values) {
    std::vector<Tensor> grads;
    zip_params(params, values, [&](const std::string&, bool, Tensor&, Value& v) {
        grads.push_back(tape.grad(v));
    });
    return grads;
}

} // namespace detail

// Mean of the per-sample masked reconstruction losses over one
// single-modality mini-batch; used for both training and re-evaluation.
inline double eval_batch_loss(const ModelConfig& cfg, ModelParams& params,
                              const std::vector<Sample>& batch, MaskKind kind, double ratio) {
    if (batch.empty()) throw UsageError("batch must not be empty");
    Tape tape;
    ModelValues mv = bind_params(tape, params);
    double total = 0;
    for (const Sample& s : batch) {
        MaskSpec spec{kind, ratio, s.mask_seed};
        ForwardResult fr = forward(tape, s.x, spec, cfg, mv);
        NormalizedTargets targets = normalize_targets(fr.grid);
        total += tape.value(masked_mse(tape, fr.predictions, targets, fr.mask))[0];
    }
    return total / static_cast<double>(batch.size());
}

// Forwards every sample with its own mask, accumulates the mean loss,
// backpropagates once, and applies one AdamW update. Returns the loss at the
// pre-update parameters. Deterministic given (state, batch, lr).
inline double train_step(TrainState& st, const std::vector<Sample>& batch, MaskKind kind,
                         double ratio, const OptimSpec& spec, double lr) {
    if (batch.empty()) throw UsageError("train_step: batch must not be empty");
    const Modality modality = batch.front().x.modality;
    for (const Sample& s : batch)
        if (s.x.modality != modality)
            throw UsageError("train_step: mixed modalities in one batch");

    Tape tape;
    ModelValues mv = bind_params(tape, st.params);
    Value loss_sum{};
    for (const Sample& s : batch) {
        MaskSpec mspec{kind, ratio, s.mask_seed};
        ForwardResult fr = forward(tape, s.x, mspec, st.cfg, mv);
        NormalizedTargets targets = normalize_targets(fr.grid);
        Value l = masked_mse(tape, fr.predictions, targets, fr.mask);
        loss_sum = loss_sum.valid() ? tape.add(loss_sum, l) : l;
    }
    Value loss = tape.scale(loss_sum, 1.0 / static_cast<double>(batch.size()));
    const double loss_value = tape.value(loss)[0];
    tape.backward(loss);
    const std::vector<Tensor> grads = detail::collect_grads(tape, st.params, mv);
    st.opt.apply(st.params, grads, lr, spec);
    ++st.step;
    return loss_value;
}

// Repeatedly steps on a fixed tiny dataset; the capacity smoke test. Each
// step uses the whole dataset as one batch, optionally with several replicas
// of every sample under distinct masks (replication smooths the mask noise
// that otherwise dominates tiny-batch gradients). The schedule's warmup/total
// epochs are interpreted as steps here.
inline std::vector<double> overfit(TrainState& st, const std::vector<VisualTensor>& dataset,
                                   std::size_t steps, const OptimSpec& spec, MaskKind kind,
                                   double ratio, std::size_t replicas = 1) {
    if (replicas == 0) throw ParamError("overfit: replicas must be >= 1");
    std::vector<double> trace;
    trace.reserve(steps);
    for (std::size_t s = 0; s < steps; ++s) {
        std::vector<Sample> batch;
        batch.reserve(dataset.size() * replicas);
        for (const VisualTensor& x : dataset)
            for (std::size_t r = 0; r < replicas; ++r)
                batch.push_back(Sample{x, st.mask_stream.next_u64()});
        const double lr = lr_at(s, spec, /*steps_per_epoch=*/1);
        trace.push_back(train_step(st, batch, kind, ratio, spec, lr));
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Gradient verification: tape gradients vs central finite differences over a
// random coordinate probe of every parameter tensor.

struct GradCheckOptions {
    std::size_t probes_per_tensor = 64;
    double fd_step = 1e-5;
    double fault_scale = 1.0; // != 1 corrupts the matmul backward rule (negative control)
    std::uint64_t param_seed = 1234;
    std::uint64_t probe_seed = 99;
};

inline double grad_check(const ModelConfig& cfg, const VisualTensor& x, const MaskSpec& spec,
                         const GradCheckOptions& opts = {}) {
    ModelParams params = init_params(cfg, opts.param_seed);

    auto eval = [&](ModelParams& p) {
        Tape tape;
        ModelValues mv = bind_params(tape, p);
        ForwardResult fr = forward(tape, x, spec, cfg, mv);
        NormalizedTargets targets = normalize_targets(fr.grid);
        return tape.value(masked_mse(tape, fr.predictions, targets, fr.mask))[0];
    };

    // Analytic gradients (optionally with the corrupted backward rule).
    Tape tape;
    tape.set_matmul_backward_fault(opts.fault_scale);
    ModelValues mv = bind_params(tape, params);
    ForwardResult fr = forward(tape, x, spec, cfg, mv);
    NormalizedTargets targets = normalize_targets(fr.grid);
    tape.backward(masked_mse(tape, fr.predictions, targets, fr.mask));

    Rng probe_root(opts.probe_seed, "gradcheck");
    double worst = 0.0;
    detail::zip_params(params, mv, [&](const std::string& name, bool, Tensor& t, Value& v) {
        const Tensor& analytic = tape.grad(v);
        Rng probes = probe_root.child(name);
        const std::size_t count = std::min<std::size_t>(opts.probes_per_tensor, t.size());
        for (std::size_t k = 0; k < count; ++k) {
            const std::size_t i = count == t.size()
                                      ? k
                                      : static_cast<std::size_t>(probes.next_below(t.size()));
            const double saved = t[i];
            t[i] = saved + opts.fd_step;
            const double up = eval(params);
            t[i] = saved - opts.fd_step;
            const double down = eval(params);
            t[i] = saved;
            const double numeric = (up - down) / (2.0 * opts.fd_step);
            const double err =
                std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
            worst = std::max(worst, err);
        }
    });
    return worst;
}

} // namespace ovmae
