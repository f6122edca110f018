#include "osr/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

namespace osr {

namespace {

std::atomic<std::uint64_t> g_seq{0};

std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::shared_ptr<GraphNode> make_node(Shape shape, std::vector<double> value,
                                     std::vector<std::shared_ptr<GraphNode>> parents,
                                     std::function<void(GraphNode&)> backprop) {
    auto n = std::make_shared<GraphNode>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
    n->leaf = n->parents.empty();
    for (const auto& p : n->parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    n->seq = ++g_seq;
    return n;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                       " vs " + shape_str(b.shape()));
    }
}

void check_2d(const char* op, const Tensor& a) {
    if (a.ndim() != 2) {
        throw DimError(std::string(op) + ": expected 2-D tensor, got " +
                       shape_str(a.shape()));
    }
}

// Guarded accumulate: parents that do not require grad have no buffer.
bool wants_grad(const GraphNode& p) { return p.requires_grad; }

} // namespace

std::string shape_str(const Shape& s) {
    if (s.empty()) return "scalar";
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out;
}

Tensor Tensor::zeros(Shape shape) {
    std::size_t n = numel(shape);
    return Tensor(make_node(std::move(shape), std::vector<double>(n, 0.0), {}, nullptr));
}

Tensor Tensor::full(Shape shape, double v) {
    std::size_t n = numel(shape);
    return Tensor(make_node(std::move(shape), std::vector<double>(n, v), {}, nullptr));
}

Tensor Tensor::scalar(double v) { return full({1}, v); }

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
    if (numel(shape) != data.size()) {
        throw DimError("from_data: shape " + shape_str(shape) + " does not match " +
                       std::to_string(data.size()) + " values");
    }
    return Tensor(make_node(std::move(shape), std::move(data), {}, nullptr));
}

Tensor Tensor::param(Shape shape, std::vector<double> data) {
    Tensor t = from_data(std::move(shape), std::move(data));
    t.set_requires_grad(true);
    return t;
}

std::size_t Tensor::rows() const {
    if (ndim() != 2) throw DimError("rows: not a 2-D tensor: " + shape_str(shape()));
    return node_->shape[0];
}

std::size_t Tensor::cols() const {
    if (ndim() != 2) throw DimError("cols: not a 2-D tensor: " + shape_str(shape()));
    return node_->shape[1];
}

void Tensor::set_requires_grad(bool b) {
    if (!node_) throw ContractError("set_requires_grad: undefined tensor");
    if (!node_->leaf) throw ContractError("set_requires_grad: only leaves may change");
    node_->requires_grad = b;
}

double Tensor::value() const {
    if (!node_ || node_->size() != 1) {
        throw ContractError("value(): tensor is not scalar");
    }
    return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    if (ndim() != 2) throw DimError("at: not a 2-D tensor");
    return node_->value[r * node_->shape[1] + c];
}

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw ContractError("grad(): no gradient populated");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_) return;
    node_->grad.assign(node_->size(), 0.0);
}

void Tensor::backward() const {
    if (!node_) throw ContractError("backward: undefined tensor");
    if (node_->size() != 1) {
        throw ContractError("backward: root must be scalar, got " + shape_str(shape()));
    }
    if (!node_->requires_grad) return; // no trainable leaf reachable

    // Collect every requires_grad node reachable from the root. Subgraphs
    // behind non-requires_grad nodes cannot hold trainable leaves, so they
    // are skipped entirely.
    std::vector<GraphNode*> order;
    std::unordered_set<GraphNode*> seen;
    std::vector<GraphNode*> stack{node_.get()};
    seen.insert(node_.get());
    while (!stack.empty()) {
        GraphNode* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) {
                stack.push_back(p.get());
            }
        }
    }
    std::sort(order.begin(), order.end(),
              [](const GraphNode* a, const GraphNode* b) { return a->seq > b->seq; });

    // Intermediates restart at zero each pass; leaf gradients persist so
    // repeated backward calls accumulate.
    for (GraphNode* n : order) {
        if (n->leaf) {
            if (n->grad.empty()) n->grad.assign(n->size(), 0.0);
        } else {
            n->grad.assign(n->size(), 0.0);
        }
    }
    node_->grad[0] += 1.0;
    for (GraphNode* n : order) {
        if (n->backprop) n->backprop(*n);
    }
}

// ---- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_2d("matmul", a);
    check_2d("matmul", b);
    const std::size_t m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
    if (k != k2) {
        throw DimError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                       " vs " + shape_str(b.shape()));
    }
    std::vector<double> out(m * n, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                out[i * n + j] += aip * bv[p * n + j];
            }
        }
    }
    auto node = make_node({m, n}, std::move(out), {a.node(), b.node()},
                          [m, k, n](GraphNode& self) {
                              auto& pa = *self.parents[0];
                              auto& pb = *self.parents[1];
                              if (wants_grad(pa)) {
                                  // dA += dC · Bᵀ
                                  for (std::size_t i = 0; i < m; ++i)
                                      for (std::size_t j = 0; j < n; ++j) {
                                          const double g = self.grad[i * n + j];
                                          if (g == 0.0) continue;
                                          for (std::size_t p = 0; p < k; ++p)
                                              pa.grad[i * k + p] += g * pb.value[p * n + j];
                                      }
                              }
                              if (wants_grad(pb)) {
                                  // dB += Aᵀ · dC
                                  for (std::size_t i = 0; i < m; ++i)
                                      for (std::size_t p = 0; p < k; ++p) {
                                          const double av_ = pa.value[i * k + p];
                                          if (av_ == 0.0) continue;
                                          for (std::size_t j = 0; j < n; ++j)
                                              pb.grad[p * n + j] += av_ * self.grad[i * n + j];
                                      }
                              }
                          });
    return Tensor(node);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_2d("matmul_nt", a);
    check_2d("matmul_nt", b);
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    if (k != b.cols()) {
        throw DimError("matmul_nt: inner dimensions disagree, " + shape_str(a.shape()) +
                       " vs " + shape_str(b.shape()));
    }
    std::vector<double> out(m * n, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += av[i * k + p] * bv[j * k + p];
            out[i * n + j] = s;
        }
    auto node = make_node({m, n}, std::move(out), {a.node(), b.node()},
                          [m, k, n](GraphNode& self) {
                              auto& pa = *self.parents[0];
                              auto& pb = *self.parents[1];
                              for (std::size_t i = 0; i < m; ++i)
                                  for (std::size_t j = 0; j < n; ++j) {
                                      const double g = self.grad[i * n + j];
                                      if (g == 0.0) continue;
                                      if (wants_grad(pa))
                                          for (std::size_t p = 0; p < k; ++p)
                                              pa.grad[i * k + p] += g * pb.value[j * k + p];
                                      if (wants_grad(pb))
                                          for (std::size_t p = 0; p < k; ++p)
                                              pb.grad[j * k + p] += g * pa.value[i * k + p];
                                  }
                          });
    return Tensor(node);
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    return Tensor(make_node(a.shape(), std::move(out), {a.node(), b.node()},
                            [](GraphNode& self) {
                                for (int s = 0; s < 2; ++s) {
                                    auto& p = *self.parents[s];
                                    if (!wants_grad(p)) continue;
                                    for (std::size_t i = 0; i < self.size(); ++i)
                                        p.grad[i] += self.grad[i];
                                }
                            }));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
    return Tensor(make_node(a.shape(), std::move(out), {a.node(), b.node()},
                            [](GraphNode& self) {
                                auto& pa = *self.parents[0];
                                auto& pb = *self.parents[1];
                                for (std::size_t i = 0; i < self.size(); ++i) {
                                    if (wants_grad(pa)) pa.grad[i] += self.grad[i];
                                    if (wants_grad(pb)) pb.grad[i] -= self.grad[i];
                                }
                            }));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
    return Tensor(make_node(a.shape(), std::move(out), {a.node(), b.node()},
                            [](GraphNode& self) {
                                auto& pa = *self.parents[0];
                                auto& pb = *self.parents[1];
                                for (std::size_t i = 0; i < self.size(); ++i) {
                                    if (wants_grad(pa)) pa.grad[i] += self.grad[i] * pb.value[i];
                                    if (wants_grad(pb)) pb.grad[i] += self.grad[i] * pa.value[i];
                                }
                            }));
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + c;
    return Tensor(make_node(a.shape(), std::move(out), {a.node()}, [](GraphNode& self) {
        auto& p = *self.parents[0];
        if (!wants_grad(p)) return;
        for (std::size_t i = 0; i < self.size(); ++i) p.grad[i] += self.grad[i];
    }));
}

Tensor mul_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * c;
    return Tensor(make_node(a.shape(), std::move(out), {a.node()}, [c](GraphNode& self) {
        auto& p = *self.parents[0];
        if (!wants_grad(p)) return;
        for (std::size_t i = 0; i < self.size(); ++i) p.grad[i] += self.grad[i] * c;
    }));
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
    return Tensor(make_node(a.shape(), std::move(out), {a.node()}, [](GraphNode& self) {
        auto& p = *self.parents[0];
        if (!wants_grad(p)) return;
        for (std::size_t i = 0; i < self.size(); ++i)
            if (p.value[i] > 0.0) p.grad[i] += self.grad[i]; // grad at 0 stays 0
    }));
}

Tensor square(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * a.values()[i];
    return Tensor(make_node(a.shape(), std::move(out), {a.node()}, [](GraphNode& self) {
        auto& p = *self.parents[0];
        if (!wants_grad(p)) return;
        for (std::size_t i = 0; i < self.size(); ++i)
            p.grad[i] += 2.0 * p.value[i] * self.grad[i];
    }));
}

Tensor tanh(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.values()[i]);
    return Tensor(make_node(a.shape(), std::move(out), {a.node()}, [](GraphNode& self) {
        auto& p = *self.parents[0];
        if (!wants_grad(p)) return;
        for (std::size_t i = 0; i < self.size(); ++i)
            p.grad[i] += (1.0 - self.value[i] * self.value[i]) * self.grad[i];
    }));
}

Tensor add_rowvec(const Tensor& a, const Tensor& b) {
    check_2d("add_rowvec", a);
    if (b.ndim() != 1 || b.size() != a.cols()) {
        throw DimError("add_rowvec: " + shape_str(a.shape()) + " + " + shape_str(b.shape()));
    }
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.values()[i * n + j] + b.values()[j];
    return Tensor(make_node({m, n}, std::move(out), {a.node(), b.node()},
                            [m, n](GraphNode& self) {
                                auto& pa = *self.parents[0];
                                auto& pb = *self.parents[1];
                                for (std::size_t i = 0; i < m; ++i)
                                    for (std::size_t j = 0; j < n; ++j) {
                                        const double g = self.grad[i * n + j];
                                        if (wants_grad(pa)) pa.grad[i * n + j] += g;
                                        if (wants_grad(pb)) pb.grad[j] += g;
                                    }
                            }));
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return Tensor(make_node({1}, {s}, {a.node()}, [](GraphNode& self) {
        auto& p = *self.parents[0];
        if (!wants_grad(p)) return;
        for (std::size_t i = 0; i < p.size(); ++i) p.grad[i] += self.grad[0];
    }));
}

Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw ContractError("mean: empty tensor");
    return mul_scalar(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum_axis0(const Tensor& a) {
    check_2d("sum_axis0", a);
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += a.values()[i * n + j];
    return Tensor(make_node({n}, std::move(out), {a.node()}, [m, n](GraphNode& self) {
        auto& p = *self.parents[0];
        if (!wants_grad(p)) return;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += self.grad[j];
    }));
}

Tensor sum_axis1(const Tensor& a) {
    check_2d("sum_axis1", a);
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i] += a.values()[i * n + j];
    return Tensor(make_node({m}, std::move(out), {a.node()}, [m, n](GraphNode& self) {
        auto& p = *self.parents[0];
        if (!wants_grad(p)) return;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += self.grad[i];
    }));
}

Tensor row(const Tensor& a, std::size_t i) {
    check_2d("row", a);
    const std::size_t m = a.rows(), n = a.cols();
    if (i >= m) throw DimError("row: index " + std::to_string(i) + " out of " + std::to_string(m));
    std::vector<double> out(a.values().begin() + static_cast<std::ptrdiff_t>(i * n),
                            a.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    return Tensor(make_node({n}, std::move(out), {a.node()}, [i, n](GraphNode& self) {
        auto& p = *self.parents[0];
        if (!wants_grad(p)) return;
        for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += self.grad[j];
    }));
}

Tensor gather(const Tensor& a, const std::vector<int>& idx) {
    check_2d("gather", a);
    const std::size_t m = a.rows(), n = a.cols();
    if (idx.size() != m) {
        throw DimError("gather: " + std::to_string(idx.size()) + " indices for " +
                       std::to_string(m) + " rows");
    }
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= n) {
            throw DataError("gather: index " + std::to_string(idx[i]) + " out of [0," +
                            std::to_string(n) + ") at row " + std::to_string(i));
        }
        out[i] = a.values()[i * n + static_cast<std::size_t>(idx[i])];
    }
    return Tensor(make_node({m}, std::move(out), {a.node()},
                            [idx, n](GraphNode& self) {
                                auto& p = *self.parents[0];
                                if (!wants_grad(p)) return;
                                for (std::size_t i = 0; i < self.size(); ++i)
                                    p.grad[i * n + static_cast<std::size_t>(idx[i])] += self.grad[i];
                            }));
}

Tensor dot(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 1 || b.ndim() != 1) {
        throw DimError("dot: expects 1-D tensors, got " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()));
    }
    check_same_shape("dot", a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
    return Tensor(make_node({1}, {s}, {a.node(), b.node()}, [](GraphNode& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const double g = self.grad[0];
        for (std::size_t i = 0; i < pa.size(); ++i) {
            if (wants_grad(pa)) pa.grad[i] += g * pb.value[i];
            if (wants_grad(pb)) pb.grad[i] += g * pa.value[i];
        }
    }));
}

Tensor l1_norm(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += std::abs(v);
    return Tensor(make_node({1}, {s}, {a.node()}, [](GraphNode& self) {
        auto& p = *self.parents[0];
        if (!wants_grad(p)) return;
        const double g = self.grad[0];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double v = p.value[i];
            if (v > 0.0)
                p.grad[i] += g;
            else if (v < 0.0)
                p.grad[i] -= g; // subgradient of |x| at 0 is 0
        }
    }));
}

Tensor l2_norm(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    const double norm = std::sqrt(s);
    return Tensor(make_node({1}, {norm}, {a.node()}, [](GraphNode& self) {
        auto& p = *self.parents[0];
        if (!wants_grad(p)) return;
        const double norm_ = self.value[0];
        if (norm_ == 0.0) return; // gradient at the zero vector is 0
        const double g = self.grad[0] / norm_;
        for (std::size_t i = 0; i < p.size(); ++i) p.grad[i] += g * p.value[i];
    }));
}

std::pair<Tensor, Tensor> norms(const Tensor& a) { return {l1_norm(a), l2_norm(a)}; }

Tensor log_softmax(const Tensor& a) {
    if (a.ndim() != 1 && a.ndim() != 2) {
        throw DimError("log_softmax: expects 1-D or 2-D, got " + shape_str(a.shape()));
    }
    const std::size_t m = a.ndim() == 2 ? a.rows() : 1;
    const std::size_t n = a.ndim() == 2 ? a.cols() : a.size();
    if (n == 0) throw DimError("log_softmax: empty input");
    for (double v : a.values()) {
        if (!std::isfinite(v)) throw NumericError("log_softmax: non-finite input");
    }
    std::vector<double> out(m * n);
    const auto& av = a.values();
    for (std::size_t i = 0; i < m; ++i) {
        const double* x = av.data() + i * n;
        double mx = x[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        double lse = 0.0;
        for (std::size_t j = 0; j < n; ++j) lse += std::exp(x[j] - mx);
        lse = mx + std::log(lse);
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[j] - lse;
    }
    return Tensor(make_node(a.shape(), std::move(out), {a.node()},
                            [m, n](GraphNode& self) {
                                auto& p = *self.parents[0];
                                if (!wants_grad(p)) return;
                                for (std::size_t i = 0; i < m; ++i) {
                                    double gsum = 0.0;
                                    for (std::size_t j = 0; j < n; ++j) gsum += self.grad[i * n + j];
                                    for (std::size_t j = 0; j < n; ++j) {
                                        const std::size_t k = i * n + j;
                                        p.grad[k] += self.grad[k] - std::exp(self.value[k]) * gsum;
                                    }
                                }
                            }));
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double step) {
    if (step <= 0.0) throw ContractError("grad_check: step must be positive");
    const Shape shape = x.shape();
    const std::vector<double> base = x.values();

    Tensor probe = Tensor::param(shape, base);
    Tensor y = f(probe);
    if (y.size() != 1) throw ContractError("grad_check: f must be scalar-valued");
    if (!std::isfinite(y.value())) throw NumericError("grad_check: f(x) is not finite");
    y.backward();
    std::vector<double> analytic(base.size(), 0.0);
    if (probe.has_grad()) analytic = probe.grad();

    auto eval = [&](const std::vector<double>& v) {
        const double r = f(Tensor::from_data(shape, v)).value();
        if (!std::isfinite(r)) throw NumericError("grad_check: perturbed f(x) is not finite");
        return r;
    };

    double max_err = 0.0;
    std::vector<double> pert = base;
    for (std::size_t i = 0; i < base.size(); ++i) {
        pert[i] = base[i] + step;
        const double fp = eval(pert);
        pert[i] = base[i] - step;
        const double fm = eval(pert);
        pert[i] = base[i];
        const double numeric = (fp - fm) / (2.0 * step);
        const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

} // namespace osr
