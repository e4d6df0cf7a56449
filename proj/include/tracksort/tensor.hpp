#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace tracksort {

/// Dense row-major tensor of rank 1 or 2 (scalars are rank 1, length 1).
template <class T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, T fill = T(0))
        : shape(std::move(s)),
          data(std::accumulate(shape.begin(), shape.end(), std::size_t(1), std::multiplies<>()), fill) {
        if (shape.empty()) throw std::invalid_argument("Tensor: rank-0 shape");
    }

    static Tensor zeros(std::initializer_list<std::size_t> s) { return Tensor(std::vector<std::size_t>(s)); }

    static Tensor scalar(T v) {
        Tensor t({1});
        t.data[0] = v;
        return t;
    }

    static Tensor from_rows(std::initializer_list<std::initializer_list<T>> rows) {
        Tensor t({rows.size(), rows.begin()->size()});
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != t.cols()) throw std::invalid_argument("Tensor::from_rows: ragged rows");
            for (T v : row) t.data[i++] = v;
        }
        return t;
    }

    static Tensor vector_of(std::initializer_list<T> vs) {
        Tensor t({vs.size()});
        std::size_t i = 0;
        for (T v : vs) t.data[i++] = v;
        return t;
    }

    std::size_t rank() const { return shape.size(); }
    std::size_t numel() const { return data.size(); }
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return rank() == 1 ? 1 : shape.at(1); }

    T& at(std::size_t i) { return data.at(i); }
    T at(std::size_t i) const { return data.at(i); }
    T& at(std::size_t i, std::size_t j) { return data.at(i * shape.at(1) + j); }
    T at(std::size_t i, std::size_t j) const { return data.at(i * shape.at(1) + j); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <class U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

namespace detail {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<Mat<T>>;
template <class T>
using CMatMap = Eigen::Map<const Mat<T>>;

template <class T>
MatMap<T> as_matrix(Tensor<T>& t) {
    return MatMap<T>(t.data.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

template <class T>
CMatMap<T> as_matrix(const Tensor<T>& t) {
    return CMatMap<T>(t.data.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

} // namespace detail

/// Records a forward computation and replays it in reverse for gradients.
/// Node ids are indices into the creation-ordered node list, so reverse
/// iteration is a valid topological order of the backward pass.
template <class T>
class Tape {
public:
    using NodeId = std::size_t;

    NodeId leaf(Tensor<T> value, bool requires_grad = false) {
        return push(std::move(value), requires_grad, nullptr);
    }

    const Tensor<T>& value(NodeId id) const { return nodes_.at(id).value; }

    const Tensor<T>& grad(NodeId id) const {
        const Node& n = nodes_.at(id);
        if (!n.needs_grad) throw std::logic_error("Tape::grad: node does not track gradients");
        return n.grad;
    }

    std::size_t size() const { return nodes_.size(); }

    // ---- differentiable operations -------------------------------------

    /// [m,k] x [k,n] -> [m,n]
    NodeId matmul(NodeId a, NodeId b) {
        const auto& A = value(a);
        const auto& B = value(b);
        detail::require(A.rank() == 2 && B.rank() == 2, "matmul: rank-2 tensors required");
        detail::require(A.cols() == B.rows(), "matmul: inner extents differ (" + std::to_string(A.cols()) +
                                                  " vs " + std::to_string(B.rows()) + ")");
        Tensor<T> out({A.rows(), B.cols()});
        detail::as_matrix(out).noalias() = detail::as_matrix(A) * detail::as_matrix(B);
        return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, NodeId self) {
            const auto G = detail::as_matrix(t.nodes_[self].grad);
            if (t.needs(a))
                detail::as_matrix(t.nodes_[a].grad).noalias() += G * detail::as_matrix(t.value(b)).transpose();
            if (t.needs(b))
                detail::as_matrix(t.nodes_[b].grad).noalias() += detail::as_matrix(t.value(a)).transpose() * G;
        });
    }

    /// a x b^T: [m,k] x [n,k] -> [m,n]
    NodeId matmul_nt(NodeId a, NodeId b) {
        const auto& A = value(a);
        const auto& B = value(b);
        detail::require(A.rank() == 2 && B.rank() == 2, "matmul_nt: rank-2 tensors required");
        detail::require(A.cols() == B.cols(), "matmul_nt: column extents differ");
        Tensor<T> out({A.rows(), B.rows()});
        detail::as_matrix(out).noalias() = detail::as_matrix(A) * detail::as_matrix(B).transpose();
        return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, NodeId self) {
            const auto G = detail::as_matrix(t.nodes_[self].grad);
            if (t.needs(a))
                detail::as_matrix(t.nodes_[a].grad).noalias() += G * detail::as_matrix(t.value(b));
            if (t.needs(b))
                detail::as_matrix(t.nodes_[b].grad).noalias() += G.transpose() * detail::as_matrix(t.value(a));
        });
    }

    NodeId add(NodeId a, NodeId b) {
        const auto& A = value(a);
        const auto& B = value(b);
        detail::require(A.same_shape(B), "add: shape mismatch");
        Tensor<T> out = A;
        for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += B.data[i];
        return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, NodeId self) {
            const auto& g = t.nodes_[self].grad.data;
            if (t.needs(a)) {
                auto& da = t.nodes_[a].grad.data;
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
            }
            if (t.needs(b)) {
                auto& db = t.nodes_[b].grad.data;
                for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i];
            }
        });
    }

    /// [m,n] + [n], the bias applied to every row.
    NodeId add_row(NodeId a, NodeId bias) {
        const auto& A = value(a);
        const auto& B = value(bias);
        detail::require(A.rank() == 2 && B.rank() == 1 && A.cols() == B.numel(),
                        "add_row: need [m,n] and [n]");
        Tensor<T> out = A;
        for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = 0; j < A.cols(); ++j) out.at(i, j) += B.at(j);
        return push(std::move(out), needs(a) || needs(bias), [a, bias](Tape& t, NodeId self) {
            const auto& G = t.nodes_[self].grad;
            if (t.needs(a)) {
                auto& da = t.nodes_[a].grad.data;
                for (std::size_t i = 0; i < G.numel(); ++i) da[i] += G.data[i];
            }
            if (t.needs(bias)) {
                auto& db = t.nodes_[bias].grad;
                for (std::size_t i = 0; i < G.rows(); ++i)
                    for (std::size_t j = 0; j < G.cols(); ++j) db.at(j) += G.at(i, j);
            }
        });
    }

    NodeId mul(NodeId a, NodeId b) {
        const auto& A = value(a);
        const auto& B = value(b);
        detail::require(A.same_shape(B), "mul: shape mismatch");
        Tensor<T> out = A;
        for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= B.data[i];
        return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, NodeId self) {
            const auto& g = t.nodes_[self].grad.data;
            if (t.needs(a)) {
                auto& da = t.nodes_[a].grad.data;
                const auto& vb = t.value(b).data;
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * vb[i];
            }
            if (t.needs(b)) {
                auto& db = t.nodes_[b].grad.data;
                const auto& va = t.value(a).data;
                for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * va[i];
            }
        });
    }

    NodeId scale(NodeId a, T s) {
        Tensor<T> out = value(a);
        for (T& v : out.data) v *= s;
        return push(std::move(out), needs(a), [a, s](Tape& t, NodeId self) {
            if (!t.needs(a)) return;
            const auto& g = t.nodes_[self].grad.data;
            auto& da = t.nodes_[a].grad.data;
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += s * g[i];
        });
    }

    /// Stacks two matrices along axis 0.
    NodeId concat_rows(NodeId a, NodeId b) {
        const auto& A = value(a);
        const auto& B = value(b);
        detail::require(A.rank() == 2 && B.rank() == 2 && A.cols() == B.cols(),
                        "concat_rows: column extents differ");
        Tensor<T> out({A.rows() + B.rows(), A.cols()});
        std::copy(A.data.begin(), A.data.end(), out.data.begin());
        std::copy(B.data.begin(), B.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(A.numel()));
        return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, NodeId self) {
            const auto& G = t.nodes_[self].grad;
            const std::size_t na = t.value(a).numel();
            if (t.needs(a)) {
                auto& da = t.nodes_[a].grad.data;
                for (std::size_t i = 0; i < na; ++i) da[i] += G.data[i];
            }
            if (t.needs(b)) {
                auto& db = t.nodes_[b].grad.data;
                for (std::size_t i = 0; i < db.size(); ++i) db[i] += G.data[na + i];
            }
        });
    }

    /// Column window [c0, c1) of a matrix.
    NodeId slice_cols(NodeId a, std::size_t c0, std::size_t c1) {
        const auto& A = value(a);
        detail::require(A.rank() == 2 && c0 < c1 && c1 <= A.cols(), "slice_cols: bad window");
        Tensor<T> out({A.rows(), c1 - c0});
        for (std::size_t i = 0; i < A.rows(); ++i)
            for (std::size_t j = c0; j < c1; ++j) out.at(i, j - c0) = A.at(i, j);
        return push(std::move(out), needs(a), [a, c0](Tape& t, NodeId self) {
            if (!t.needs(a)) return;
            const auto& G = t.nodes_[self].grad;
            auto& da = t.nodes_[a].grad;
            for (std::size_t i = 0; i < G.rows(); ++i)
                for (std::size_t j = 0; j < G.cols(); ++j) da.at(i, c0 + j) += G.at(i, j);
        });
    }

    NodeId concat_cols(const std::vector<NodeId>& parts) {
        detail::require(!parts.empty(), "concat_cols: no inputs");
        const std::size_t m = value(parts[0]).rows();
        std::size_t total = 0;
        bool any_grad = false;
        for (NodeId p : parts) {
            const auto& P = value(p);
            detail::require(P.rank() == 2 && P.rows() == m, "concat_cols: row extents differ");
            total += P.cols();
            any_grad = any_grad || needs(p);
        }
        Tensor<T> out({m, total});
        std::size_t off = 0;
        for (NodeId p : parts) {
            const auto& P = value(p);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < P.cols(); ++j) out.at(i, off + j) = P.at(i, j);
            off += P.cols();
        }
        return push(std::move(out), any_grad, [parts](Tape& t, NodeId self) {
            const auto& G = t.nodes_[self].grad;
            std::size_t off = 0;
            for (NodeId p : parts) {
                const std::size_t w = t.value(p).cols();
                if (t.needs(p)) {
                    auto& dp = t.nodes_[p].grad;
                    for (std::size_t i = 0; i < G.rows(); ++i)
                        for (std::size_t j = 0; j < w; ++j) dp.at(i, j) += G.at(i, off + j);
                }
                off += w;
            }
        });
    }

    NodeId relu(NodeId a) {
        Tensor<T> out = value(a);
        for (T& v : out.data)
            if (v < T(0)) v = T(0);
        return push(std::move(out), needs(a), [a](Tape& t, NodeId self) {
            if (!t.needs(a)) return;
            const auto& g = t.nodes_[self].grad.data;
            const auto& x = t.value(a).data;
            auto& da = t.nodes_[a].grad.data;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x[i] > T(0)) da[i] += g[i];
        });
    }

    /// Row-wise softmax with max subtraction. -inf entries act as mask
    /// sentinels and map to exactly 0; a fully masked row is an error.
    NodeId softmax_rows(NodeId a) {
        const auto& A = value(a);
        detail::require(A.rank() == 2, "softmax_rows: rank-2 tensor required");
        Tensor<T> out({A.rows(), A.cols()});
        for (std::size_t i = 0; i < A.rows(); ++i) {
            T mx = -std::numeric_limits<T>::infinity();
            for (std::size_t j = 0; j < A.cols(); ++j) mx = std::max(mx, A.at(i, j));
            if (std::isinf(static_cast<double>(mx)) && mx < T(0))
                throw std::runtime_error("softmax_rows: row " + std::to_string(i) + " fully masked");
            T denom = T(0);
            for (std::size_t j = 0; j < A.cols(); ++j) {
                T x = A.at(i, j);
                T e = std::isinf(static_cast<double>(x)) && x < T(0) ? T(0) : std::exp(x - mx);
                out.at(i, j) = e;
                denom += e;
            }
            for (std::size_t j = 0; j < A.cols(); ++j) out.at(i, j) /= denom;
        }
        return push(std::move(out), needs(a), [a](Tape& t, NodeId self) {
            if (!t.needs(a)) return;
            const auto& Y = t.nodes_[self].value;
            const auto& G = t.nodes_[self].grad;
            auto& da = t.nodes_[a].grad;
            for (std::size_t i = 0; i < Y.rows(); ++i) {
                T dot = T(0);
                for (std::size_t j = 0; j < Y.cols(); ++j) dot += G.at(i, j) * Y.at(i, j);
                for (std::size_t j = 0; j < Y.cols(); ++j)
                    da.at(i, j) += Y.at(i, j) * (G.at(i, j) - dot);
            }
        });
    }

    /// Normalizes each row to zero mean / unit variance, then applies the
    /// per-column affine (gain, bias).
    NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, T eps) {
        const auto& X = value(x);
        const auto& Gm = value(gain);
        const auto& Bv = value(bias);
        detail::require(eps > T(0), "layer_norm: eps must be positive");
        detail::require(X.rank() == 2 && Gm.rank() == 1 && Bv.rank() == 1 && Gm.numel() == X.cols() &&
                            Bv.numel() == X.cols(),
                        "layer_norm: need [m,n], gain [n], bias [n]");
        const std::size_t m = X.rows(), n = X.cols();
        Tensor<T> xhat({m, n});
        std::vector<T> inv_std(m);
        for (std::size_t i = 0; i < m; ++i) {
            T mean = T(0);
            for (std::size_t j = 0; j < n; ++j) mean += X.at(i, j);
            mean /= static_cast<T>(n);
            T var = T(0);
            for (std::size_t j = 0; j < n; ++j) {
                T d = X.at(i, j) - mean;
                var += d * d;
            }
            var /= static_cast<T>(n);
            inv_std[i] = T(1) / std::sqrt(var + eps);
            for (std::size_t j = 0; j < n; ++j) xhat.at(i, j) = (X.at(i, j) - mean) * inv_std[i];
        }
        Tensor<T> out({m, n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out.at(i, j) = xhat.at(i, j) * Gm.at(j) + Bv.at(j);
        return push(std::move(out), needs(x) || needs(gain) || needs(bias),
                    [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, NodeId self) {
                        const auto& G = t.nodes_[self].grad;
                        const std::size_t m = G.rows(), n = G.cols();
                        const auto& gm = t.value(gain);
                        if (t.needs(gain)) {
                            auto& dg = t.nodes_[gain].grad;
                            for (std::size_t i = 0; i < m; ++i)
                                for (std::size_t j = 0; j < n; ++j) dg.at(j) += G.at(i, j) * xhat.at(i, j);
                        }
                        if (t.needs(bias)) {
                            auto& db = t.nodes_[bias].grad;
                            for (std::size_t i = 0; i < m; ++i)
                                for (std::size_t j = 0; j < n; ++j) db.at(j) += G.at(i, j);
                        }
                        if (t.needs(x)) {
                            auto& dx = t.nodes_[x].grad;
                            for (std::size_t i = 0; i < m; ++i) {
                                T mean_dxh = T(0), mean_dxh_xh = T(0);
                                for (std::size_t j = 0; j < n; ++j) {
                                    T dxh = G.at(i, j) * gm.at(j);
                                    mean_dxh += dxh;
                                    mean_dxh_xh += dxh * xhat.at(i, j);
                                }
                                mean_dxh /= static_cast<T>(n);
                                mean_dxh_xh /= static_cast<T>(n);
                                for (std::size_t j = 0; j < n; ++j) {
                                    T dxh = G.at(i, j) * gm.at(j);
                                    dx.at(i, j) +=
                                        inv_std[i] * (dxh - mean_dxh - xhat.at(i, j) * mean_dxh_xh);
                                }
                            }
                        }
                    });
    }

    /// Gathers rows of an embedding table: out[i,:] = table[ids[i],:].
    NodeId embedding_rows(NodeId table, std::vector<int> ids) {
        const auto& Tb = value(table);
        detail::require(Tb.rank() == 2, "embedding_rows: table must be [V,d]");
        detail::require(!ids.empty(), "embedding_rows: empty id list");
        for (int id : ids)
            if (id < 0 || static_cast<std::size_t>(id) >= Tb.rows())
                throw std::out_of_range("embedding_rows: id " + std::to_string(id) + " out of range");
        Tensor<T> out({ids.size(), Tb.cols()});
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = 0; j < Tb.cols(); ++j) out.at(i, j) = Tb.at(static_cast<std::size_t>(ids[i]), j);
        return push(std::move(out), needs(table), [table, ids = std::move(ids)](Tape& t, NodeId self) {
            if (!t.needs(table)) return;
            const auto& G = t.nodes_[self].grad;
            auto& dt = t.nodes_[table].grad;
            for (std::size_t i = 0; i < ids.size(); ++i)
                for (std::size_t j = 0; j < G.cols(); ++j)
                    dt.at(static_cast<std::size_t>(ids[i]), j) += G.at(i, j);
        });
    }

    /// Mean token-level cross entropy of [m,V] logits against integer
    /// targets; rows whose target equals ignore_id are excluded.
    NodeId cross_entropy(NodeId logits, std::vector<int> targets, int ignore_id) {
        const auto& L = value(logits);
        detail::require(L.rank() == 2, "cross_entropy: logits must be [m,V]");
        detail::require(targets.size() == L.rows(), "cross_entropy: one target per logit row");
        std::size_t count = 0;
        for (int tgt : targets) {
            if (tgt == ignore_id) continue;
            if (tgt < 0 || static_cast<std::size_t>(tgt) >= L.cols())
                throw std::out_of_range("cross_entropy: target " + std::to_string(tgt) + " out of range");
            ++count;
        }
        if (count == 0) throw std::invalid_argument("cross_entropy: every position is ignored");
        Tensor<T> probs({L.rows(), L.cols()});
        T loss = T(0);
        for (std::size_t i = 0; i < L.rows(); ++i) {
            T mx = L.at(i, 0);
            for (std::size_t j = 1; j < L.cols(); ++j) mx = std::max(mx, L.at(i, j));
            T denom = T(0);
            for (std::size_t j = 0; j < L.cols(); ++j) {
                T e = std::exp(L.at(i, j) - mx);
                probs.at(i, j) = e;
                denom += e;
            }
            for (std::size_t j = 0; j < L.cols(); ++j) probs.at(i, j) /= denom;
            if (targets[i] != ignore_id) {
                T logp = L.at(i, static_cast<std::size_t>(targets[i])) - mx - std::log(denom);
                loss -= logp;
            }
        }
        loss /= static_cast<T>(count);
        return push(Tensor<T>::scalar(loss), needs(logits),
                    [logits, targets = std::move(targets), ignore_id, probs = std::move(probs),
                     count](Tape& t, NodeId self) {
                        if (!t.needs(logits)) return;
                        const T g = t.nodes_[self].grad.data[0] / static_cast<T>(count);
                        auto& dl = t.nodes_[logits].grad;
                        for (std::size_t i = 0; i < probs.rows(); ++i) {
                            if (targets[i] == ignore_id) continue;
                            for (std::size_t j = 0; j < probs.cols(); ++j) {
                                T p = probs.at(i, j);
                                dl.at(i, j) += g * (p - (static_cast<std::size_t>(targets[i]) == j ? T(1) : T(0)));
                            }
                        }
                    });
    }

    NodeId sum(NodeId a) {
        T s = T(0);
        for (T v : value(a).data) s += v;
        return push(Tensor<T>::scalar(s), needs(a), [a](Tape& t, NodeId self) {
            if (!t.needs(a)) return;
            const T g = t.nodes_[self].grad.data[0];
            for (T& v : t.nodes_[a].grad.data) v += g;
        });
    }

    /// Seeds d(loss)/d(loss) = 1 and pulls gradients down to the leaves.
    void backward(NodeId loss) {
        Node& ln = nodes_.at(loss);
        if (ln.value.numel() != 1)
            throw std::invalid_argument("backward: loss must be scalar");
        if (!ln.needs_grad)
            throw std::invalid_argument("backward: loss does not depend on any gradient leaf");
        ln.grad.data[0] = T(1);
        for (std::size_t i = loss + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.needs_grad && n.pull) n.pull(*this, i);
        }
    }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool needs_grad = false;
        std::function<void(Tape&, NodeId)> pull;
    };

    bool needs(NodeId id) const { return nodes_[id].needs_grad; }

    NodeId push(Tensor<T> value, bool needs_grad, std::function<void(Tape&, NodeId)> pull) {
        Node n;
        n.value = std::move(value);
        n.needs_grad = needs_grad;
        if (needs_grad) n.grad = Tensor<T>(n.value.shape, T(0));
        n.pull = std::move(pull);
        nodes_.push_back(std::move(n));
        return nodes_.size() - 1;
    }

    std::vector<Node> nodes_;
};

} // namespace tracksort
