#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "ovmae/tensor.hpp"

namespace ovmae {

// Handle to a value recorded on a Tape.
struct Value {
    std::size_t idx = std::numeric_limits<std::size_t>::max();
    bool valid() const { return idx != std::numeric_limits<std::size_t>::max(); }
};

// Eager reverse-mode tape. Forward ops execute immediately and append one
// node each; creation order is a topological order, so the backward pass is
// a single reverse sweep that visits every node exactly once.
//
// The tape also meters multiply-accumulates: every matmul adds m*k*n to a
// counter, which the compute-accounting layer compares against its
// analytical model. Element-wise ops (softmax, layernorm, bias, gelu) are
// deliberately not counted.
class Tape {
public:
    Value leaf(Tensor t, bool requires_grad = false) {
        Node n;
        n.value = std::move(t);
        n.requires_grad = requires_grad;
        if (requires_grad) n.grad = Tensor(n.value.dims());
        nodes_.push_back(std::move(n));
        return Value{nodes_.size() - 1};
    }

    Value constant(Tensor t) { return leaf(std::move(t), false); }

    const Tensor& value(Value v) const { return node(v).value; }

    const Tensor& grad(Value v) const {
        const Node& n = node(v);
        if (!n.requires_grad) throw UsageError("tape: gradient requested for non-grad value");
        return n.grad;
    }

    std::uint64_t mac_count() const { return mac_count_; }
    void reset_mac_count() { mac_count_ = 0; }

    // Test hook: scales both outputs of the matmul backward rule. Used by
    // the gradient checker's negative control; 1.0 in normal operation.
    void set_matmul_backward_fault(double s) { matmul_backward_fault_ = s; }

    std::size_t node_count() const { return nodes_.size(); }

    // -- ops ----------------------------------------------------------------

    Value matmul(Value av, Value bv) {
        const Tensor& a = value(av);
        const Tensor& b = value(bv);
        Tensor c = ovmae::matmul(a, b);
        mac_count_ += static_cast<std::uint64_t>(a.dim(0)) * a.dim(1) * b.dim(1);
        return record({av, bv}, std::move(c), [this, av, bv](Tape& t, const Node& out) {
            const Tensor& a = t.value(av);
            const Tensor& b = t.value(bv);
            const double fault = matmul_backward_fault_;
            if (t.node(av).requires_grad) {
                Tensor da = ovmae::matmul(out.grad, transpose2d(b));
                if (fault != 1.0) da = ovmae::scale(da, fault);
                t.accumulate(av, da);
            }
            if (t.node(bv).requires_grad) {
                Tensor db = ovmae::matmul(transpose2d(a), out.grad);
                if (fault != 1.0) db = ovmae::scale(db, fault);
                t.accumulate(bv, db);
            }
        });
    }

    Value add(Value av, Value bv) {
        Tensor c = ovmae::add(value(av), value(bv));
        return record({av, bv}, std::move(c), [av, bv](Tape& t, const Node& out) {
            if (t.node(av).requires_grad) t.accumulate(av, out.grad);
            if (t.node(bv).requires_grad) t.accumulate(bv, out.grad);
        });
    }

    // a + v broadcast over the last dim (bias add).
    Value add_rowvec(Value av, Value vv) {
        Tensor c = ovmae::add_rowvec(value(av), value(vv));
        return record({av, vv}, std::move(c), [av, vv](Tape& t, const Node& out) {
            if (t.node(av).requires_grad) t.accumulate(av, out.grad);
            if (t.node(vv).requires_grad) {
                const std::size_t n = out.grad.last_dim(), rows = out.grad.row_count();
                Tensor dv({n});
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < n; ++j) dv[j] += out.grad[r * n + j];
                t.accumulate(vv, dv);
            }
        });
    }

    Value scale(Value av, double s) {
        Tensor c = ovmae::scale(value(av), s);
        return record({av}, std::move(c), [av, s](Tape& t, const Node& out) {
            if (t.node(av).requires_grad) t.accumulate(av, ovmae::scale(out.grad, s));
        });
    }

    Value gelu(Value av) {
        Tensor c = ovmae::gelu(value(av));
        return record({av}, std::move(c), [av](Tape& t, const Node& out) {
            if (!t.node(av).requires_grad) return;
            const Tensor& x = t.value(av);
            Tensor dx = out.grad;
            for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= gelu_grad_scalar(x[i]);
            t.accumulate(av, dx);
        });
    }

    Value softmax_lastdim(Value av) {
        Tensor y = ovmae::softmax_lastdim(value(av));
        return record({av}, std::move(y), [av](Tape& t, const Node& out) {
            if (!t.node(av).requires_grad) return;
            const Tensor& y = out.value;
            const std::size_t n = y.last_dim(), rows = y.row_count();
            Tensor dx(y.dims());
            for (std::size_t r = 0; r < rows; ++r) {
                double dot = 0;
                for (std::size_t j = 0; j < n; ++j) dot += out.grad[r * n + j] * y[r * n + j];
                for (std::size_t j = 0; j < n; ++j)
                    dx[r * n + j] = (out.grad[r * n + j] - dot) * y[r * n + j];
            }
            t.accumulate(av, dx);
        });
    }

    Value layernorm(Value xv, Value gv, Value bv, double eps) {
        Tensor y = ovmae::layernorm(value(xv), value(gv), value(bv), eps);
        return record({xv, gv, bv}, std::move(y), [xv, gv, bv, eps](Tape& t, const Node& out) {
            const Tensor& x = t.value(xv);
            const Tensor& g = t.value(gv);
            const std::size_t n = x.last_dim(), rows = x.row_count();
            const bool need_x = t.node(xv).requires_grad;
            const bool need_g = t.node(gv).requires_grad;
            const bool need_b = t.node(bv).requires_grad;
            Tensor dx(x.dims()), dg({n}), db({n});
            for (std::size_t r = 0; r < rows; ++r) {
                const double* xr = x.data() + r * n;
                const double* dyr = out.grad.data() + r * n;
                double mean = 0;
                for (std::size_t j = 0; j < n; ++j) mean += xr[j];
                mean /= static_cast<double>(n);
                double var = 0;
                for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mean) * (xr[j] - mean);
                var /= static_cast<double>(n);
                const double inv = 1.0 / std::sqrt(var + eps);
                if (need_g || need_b) {
                    for (std::size_t j = 0; j < n; ++j) {
                        dg[j] += dyr[j] * (xr[j] - mean) * inv;
                        db[j] += dyr[j];
                    }
                }
                if (need_x) {
                    // dxhat = dy * g; dx via the standard two-reduction form.
                    double sum_dxhat = 0, sum_dxhat_xhat = 0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double xhat = (xr[j] - mean) * inv;
                        const double dxhat = dyr[j] * g[j];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                    }
                    for (std::size_t j = 0; j < n; ++j) {
                        const double xhat = (xr[j] - mean) * inv;
                        const double dxhat = dyr[j] * g[j];
                        dx[r * n + j] = inv * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) /
                                                           static_cast<double>(n));
                    }
                }
            }
            if (need_x) t.accumulate(xv, dx);
            if (need_g) t.accumulate(gv, dg);
            if (need_b) t.accumulate(bv, db);
        });
    }

    Value transpose(Value av) {
        Tensor c = transpose2d(value(av));
        return record({av}, std::move(c), [av](Tape& t, const Node& out) {
            if (t.node(av).requires_grad) t.accumulate(av, transpose2d(out.grad));
        });
    }

    Value slice_cols(Value av, std::size_t c0, std::size_t c1) {
        Tensor c = ovmae::slice_cols(value(av), c0, c1);
        return record({av}, std::move(c), [av, c0, c1](Tape& t, const Node& out) {
            if (!t.node(av).requires_grad) return;
            const Tensor& a = t.value(av);
            const std::size_t m = a.dim(0), n = a.dim(1), w = c1 - c0;
            Tensor da({m, n});
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < w; ++j) da[i * n + c0 + j] = out.grad[i * w + j];
            t.accumulate(av, da);
        });
    }

    Value concat_cols(const std::vector<Value>& parts) {
        if (parts.empty()) throw ShapeError("concat_cols: no parts");
        const std::size_t m = value(parts[0]).dim(0);
        std::size_t total = 0;
        for (Value p : parts) {
            if (value(p).ndim() != 2 || value(p).dim(0) != m)
                throw ShapeError("concat_cols: row counts disagree");
            total += value(p).dim(1);
        }
        Tensor c({m, total});
        std::size_t off = 0;
        for (Value p : parts) {
            const Tensor& t = value(p);
            const std::size_t w = t.dim(1);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < w; ++j) c[i * total + off + j] = t[i * w + j];
            off += w;
        }
        std::vector<Value> ins = parts;
        return record(ins, std::move(c), [ins, m, total](Tape& t, const Node& out) {
            std::size_t off = 0;
            for (Value p : ins) {
                const std::size_t w = t.value(p).dim(1);
                if (t.node(p).requires_grad) {
                    Tensor dp({m, w});
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < w; ++j)
                            dp[i * w + j] = out.grad[i * total + off + j];
                    t.accumulate(p, dp);
                }
                off += w;
            }
        });
    }

    // Scatters `kept` rows to `row_of[r]` in an output of `total_rows` rows
    // and fills every other row with `token`. The decoder's input assembly.
    Value scatter_rows_fill(Value keptv, Value tokenv, const std::vector<std::size_t>& row_of,
                            std::size_t total_rows) {
        const Tensor& kept = value(keptv);
        const Tensor& token = value(tokenv);
        if (kept.ndim() != 2 || token.ndim() != 1 || token.dim(0) != kept.dim(1))
            throw ShapeError("scatter_rows_fill: token/kept width mismatch");
        if (kept.dim(0) != row_of.size())
            throw ShapeError("scatter_rows_fill: row index count mismatch");
        const std::size_t w = kept.dim(1);
        Tensor out({total_rows, w});
        std::vector<char> is_kept(total_rows, 0);
        for (std::size_t r = 0; r < row_of.size(); ++r) {
            if (row_of[r] >= total_rows) throw IndexError("scatter_rows_fill: row out of range");
            is_kept[row_of[r]] = 1;
            for (std::size_t j = 0; j < w; ++j) out[row_of[r] * w + j] = kept[r * w + j];
        }
        for (std::size_t i = 0; i < total_rows; ++i)
            if (!is_kept[i])
                for (std::size_t j = 0; j < w; ++j) out[i * w + j] = token[j];
        return record({keptv, tokenv}, std::move(out),
                      [keptv, tokenv, row_of, total_rows, w](Tape& t, const Node& out) {
                          std::vector<char> is_kept(total_rows, 0);
                          for (std::size_t r : row_of) is_kept[r] = 1;
                          if (t.node(keptv).requires_grad) {
                              Tensor dk({row_of.size(), w});
                              for (std::size_t r = 0; r < row_of.size(); ++r)
                                  for (std::size_t j = 0; j < w; ++j)
                                      dk[r * w + j] = out.grad[row_of[r] * w + j];
                              t.accumulate(keptv, dk);
                          }
                          if (t.node(tokenv).requires_grad) {
                              Tensor dt({w});
                              for (std::size_t i = 0; i < total_rows; ++i)
                                  if (!is_kept[i])
                                      for (std::size_t j = 0; j < w; ++j)
                                          dt[j] += out.grad[i * w + j];
                              t.accumulate(tokenv, dt);
                          }
                      });
    }

    Value sum(Value av) {
        Tensor s = Tensor::scalar(ovmae::sum(value(av)));
        return record({av}, std::move(s), [av](Tape& t, const Node& out) {
            if (!t.node(av).requires_grad) return;
            Tensor da(t.value(av).dims());
            for (std::size_t i = 0; i < da.size(); ++i) da[i] = out.grad[0];
            t.accumulate(av, da);
        });
    }

    // Mean over `masked_rows` of the per-element squared error against a
    // constant target. Rows outside `masked_rows` contribute nothing, so
    // their gradient is exactly zero.
    Value masked_mse(Value predv, Tensor targets, std::vector<std::size_t> masked_rows) {
        const Tensor& pred = value(predv);
        if (!pred.same_shape(targets))
            throw ShapeError("masked_mse: prediction/target shapes disagree: " +
                             pred.shape_str() + " vs " + targets.shape_str());
        if (masked_rows.empty()) throw ParamError("masked_mse: empty masked set");
        const std::size_t p = pred.last_dim();
        const std::size_t m = masked_rows.size();
        double loss = 0;
        for (std::size_t r : masked_rows) {
            if (r >= pred.row_count()) throw IndexError("masked_mse: row out of range");
            double rowsum = 0;
            for (std::size_t j = 0; j < p; ++j) {
                const double d = pred[r * p + j] - targets[r * p + j];
                rowsum += d * d;
            }
            loss += rowsum / static_cast<double>(p);
        }
        loss /= static_cast<double>(m);
        auto tgt = std::make_shared<Tensor>(std::move(targets));
        auto rows = std::make_shared<std::vector<std::size_t>>(std::move(masked_rows));
        return record({predv}, Tensor::scalar(loss),
                      [predv, tgt, rows, p, m](Tape& t, const Node& out) {
                          if (!t.node(predv).requires_grad) return;
                          const Tensor& pred = t.value(predv);
                          Tensor dp(pred.dims());
                          const double c = 2.0 * out.grad[0] / (static_cast<double>(m) *
                                                                static_cast<double>(p));
                          for (std::size_t r : *rows)
                              for (std::size_t j = 0; j < p; ++j)
                                  dp[r * p + j] = c * (pred[r * p + j] - (*tgt)[r * p + j]);
                          t.accumulate(predv, dp);
                      });
    }

    // -- backward -----------------------------------------------------------

    void backward(Value lossv) {
        Node& loss = node(lossv);
        if (loss.value.size() != 1)
            throw ShapeError("backward: loss must be scalar, got " + loss.value.shape_str());
        if (!loss.requires_grad)
            throw UsageError("backward: loss does not depend on any parameter");
        if (backward_done_) throw UsageError("backward: tape already swept");
        backward_done_ = true;
        loss.grad.fill(0.0);
        loss.grad[0] = 1.0;
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            Node& n = nodes_[i];
            if (n.requires_grad && n.backprop) n.backprop(*this, n);
        }
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Tape&, const Node&)> backprop;
    };

    Node& node(Value v) {
        if (!v.valid() || v.idx >= nodes_.size()) throw IndexError("tape: invalid value handle");
        return nodes_[v.idx];
    }
    const Node& node(Value v) const {
        if (!v.valid() || v.idx >= nodes_.size()) throw IndexError("tape: invalid value handle");
        return nodes_[v.idx];
    }

    Value record(const std::vector<Value>& inputs, Tensor out,
                 std::function<void(Tape&, const Node&)> backprop) {
        bool needs = false;
        for (Value in : inputs) needs = needs || node(in).requires_grad;
        Node n;
        n.value = std::move(out);
        n.requires_grad = needs;
        if (needs) {
            n.grad = Tensor(n.value.dims());
            n.backprop = std::move(backprop);
        }
        nodes_.push_back(std::move(n));
        return Value{nodes_.size() - 1};
    }

    void accumulate(Value v, const Tensor& g) {
        Node& n = node(v);
        if (!n.grad.same_shape(g)) throw ShapeError("tape: gradient shape mismatch");
        for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
    }

    std::vector<Node> nodes_;
    std::uint64_t mac_count_ = 0;
    double matmul_backward_fault_ = 1.0;
    bool backward_done_ = false;
};

} // namespace ovmae
