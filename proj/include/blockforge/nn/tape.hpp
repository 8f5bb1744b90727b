#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "blockforge/nn/mat.hpp"

namespace blockforge::nn {

// Reverse-mode tape over Mat values. Creation order is the topological
// order; backward walks it in reverse accumulating into parent grads.
class Tape {
public:
    using Ref = int;

    Ref leaf(Mat v, bool needs_grad = false) {
        nodes_.push_back({std::move(v), {}, needs_grad, nullptr});
        return static_cast<Ref>(nodes_.size() - 1);
    }

    const Mat& val(Ref r) const { return nodes_[r].v; }
    const Mat& grad(Ref r) const { return nodes_[r].g; }

    Ref matmul(Ref a, Ref b) {
        const Mat &A = val(a), &B = val(b);
        Mat out(A.rows, B.cols);
        matmul_acc(A, B, out);
        return make(std::move(out), {a, b}, [a, b](Tape& t, Ref self) {
            const Mat& g = t.nodes_[self].g;
            if (t.wants(a)) matmul_tB_acc(g, t.val(b), t.gref(a));
            if (t.wants(b)) matmul_tA_acc(t.val(a), g, t.gref(b));
        });
    }

    Ref add(Ref a, Ref b) {
        const Mat &A = val(a), &B = val(b);
        assert(A.same_shape(B));
        Mat out = A;
        for (size_t i = 0; i < out.size(); ++i) out.a[i] += B.a[i];
        return make(std::move(out), {a, b}, [a, b](Tape& t, Ref self) {
            const Mat& g = t.nodes_[self].g;
            for (Ref p : {a, b})
                if (t.wants(p)) {
                    Mat& pg = t.gref(p);
                    for (size_t i = 0; i < g.size(); ++i) pg.a[i] += g.a[i];
                }
        });
    }

    // Broadcast a 1 x C row (bias) over every row of a.
    Ref add_row(Ref a, Ref row) {
        const Mat &A = val(a), &R = val(row);
        assert(R.rows == 1 && R.cols == A.cols);
        Mat out = A;
        for (int i = 0; i < out.rows; ++i)
            for (int j = 0; j < out.cols; ++j) out(i, j) += R(0, j);
        return make(std::move(out), {a, row}, [a, row](Tape& t, Ref self) {
            const Mat& g = t.nodes_[self].g;
            if (t.wants(a)) {
                Mat& pg = t.gref(a);
                for (size_t i = 0; i < g.size(); ++i) pg.a[i] += g.a[i];
            }
            if (t.wants(row)) {
                Mat& rg = t.gref(row);
                for (int i = 0; i < g.rows; ++i)
                    for (int j = 0; j < g.cols; ++j) rg(0, j) += g(i, j);
            }
        });
    }

    Ref mul(Ref a, Ref b) {
        const Mat &A = val(a), &B = val(b);
        assert(A.same_shape(B));
        Mat out = A;
        for (size_t i = 0; i < out.size(); ++i) out.a[i] *= B.a[i];
        return make(std::move(out), {a, b}, [a, b](Tape& t, Ref self) {
            const Mat& g = t.nodes_[self].g;
            if (t.wants(a)) {
                Mat& pg = t.gref(a);
                const Mat& B2 = t.val(b);
                for (size_t i = 0; i < g.size(); ++i) pg.a[i] += g.a[i] * B2.a[i];
            }
            if (t.wants(b)) {
                Mat& pg = t.gref(b);
                const Mat& A2 = t.val(a);
                for (size_t i = 0; i < g.size(); ++i) pg.a[i] += g.a[i] * A2.a[i];
            }
        });
    }

    Ref one_minus(Ref a) {
        Mat out = val(a);
        for (auto& x : out.a) x = 1.0 - x;
        return make(std::move(out), {a}, [a](Tape& t, Ref self) {
            if (!t.wants(a)) return;
            const Mat& g = t.nodes_[self].g;
            Mat& pg = t.gref(a);
            for (size_t i = 0; i < g.size(); ++i) pg.a[i] -= g.a[i];
        });
    }

    Ref relu(Ref a) {
        Mat out = val(a);
        if (trace_signs_) {
            std::uint64_t h = 0xcbf29ce484222325ull;
            for (double x : out.a) {
                h ^= (x > 0.0) ? 0x9eull : 0x31ull;
                h *= 0x100000001b3ull;
            }
            sign_trace_.push_back(h);
        }
        for (auto& x : out.a) x = x > 0.0 ? x : 0.0;
        return make(std::move(out), {a}, [a](Tape& t, Ref self) {
            if (!t.wants(a)) return;
            const Mat& g = t.nodes_[self].g;
            const Mat& v = t.nodes_[self].v;
            Mat& pg = t.gref(a);
            for (size_t i = 0; i < g.size(); ++i)
                if (v.a[i] > 0.0) pg.a[i] += g.a[i];
        });
    }

    Ref sigmoid(Ref a) {
        Mat out = val(a);
        for (auto& x : out.a) x = 1.0 / (1.0 + std::exp(-x));
        return make(std::move(out), {a}, [a](Tape& t, Ref self) {
            if (!t.wants(a)) return;
            const Mat& g = t.nodes_[self].g;
            const Mat& v = t.nodes_[self].v;
            Mat& pg = t.gref(a);
            for (size_t i = 0; i < g.size(); ++i) pg.a[i] += g.a[i] * v.a[i] * (1.0 - v.a[i]);
        });
    }

    Ref tanh_act(Ref a) {
        Mat out = val(a);
        for (auto& x : out.a) x = std::tanh(x);
        return make(std::move(out), {a}, [a](Tape& t, Ref self) {
            if (!t.wants(a)) return;
            const Mat& g = t.nodes_[self].g;
            const Mat& v = t.nodes_[self].v;
            Mat& pg = t.gref(a);
            for (size_t i = 0; i < g.size(); ++i) pg.a[i] += g.a[i] * (1.0 - v.a[i] * v.a[i]);
        });
    }

    Ref concat_cols(const std::vector<Ref>& parts) {
        assert(!parts.empty());
        int rows = val(parts[0]).rows, cols = 0;
        for (Ref p : parts) {
            assert(val(p).rows == rows);
            cols += val(p).cols;
        }
        Mat out(rows, cols);
        int at = 0;
        for (Ref p : parts) {
            const Mat& P = val(p);
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < P.cols; ++j) out(i, at + j) = P(i, j);
            at += P.cols;
        }
        return make(std::move(out), parts, [parts](Tape& t, Ref self) {
            const Mat& g = t.nodes_[self].g;
            int at = 0;
            for (Ref p : parts) {
                int pc = t.val(p).cols;
                if (t.wants(p)) {
                    Mat& pg = t.gref(p);
                    for (int i = 0; i < g.rows; ++i)
                        for (int j = 0; j < pc; ++j) pg(i, j) += g(i, at + j);
                }
                at += pc;
            }
        });
    }

    // out.row(i) = src.row(idx[i])
    Ref gather_rows(Ref src, std::vector<int> idx) {
        const Mat& S = val(src);
        Mat out(static_cast<int>(idx.size()), S.cols);
        for (size_t i = 0; i < idx.size(); ++i)
            for (int j = 0; j < S.cols; ++j) out(static_cast<int>(i), j) = S(idx[i], j);
        return make(std::move(out), {src},
                    [src, idx = std::move(idx)](Tape& t, Ref self) {
                        if (!t.wants(src)) return;
                        const Mat& g = t.nodes_[self].g;
                        Mat& pg = t.gref(src);
                        for (size_t i = 0; i < idx.size(); ++i)
                            for (int j = 0; j < g.cols; ++j)
                                pg(idx[i], j) += g(static_cast<int>(i), j);
                    });
    }

    // out.row(idx[i]) += src.row(i); sum aggregation over segments.
    Ref scatter_sum_rows(Ref src, std::vector<int> idx, int out_rows) {
        const Mat& S = val(src);
        assert(static_cast<int>(idx.size()) == S.rows);
        Mat out(out_rows, S.cols);
        for (int i = 0; i < S.rows; ++i)
            for (int j = 0; j < S.cols; ++j) out(idx[i], j) += S(i, j);
        return make(std::move(out), {src},
                    [src, idx = std::move(idx)](Tape& t, Ref self) {
                        if (!t.wants(src)) return;
                        const Mat& g = t.nodes_[self].g;
                        Mat& pg = t.gref(src);
                        for (int i = 0; i < pg.rows; ++i)
                            for (int j = 0; j < g.cols; ++j) pg(i, j) += g(idx[i], j);
                    });
    }

    // Selected entries as a column vector.
    Ref pick_entries(Ref src, std::vector<std::pair<int, int>> cells) {
        const Mat& S = val(src);
        Mat out(static_cast<int>(cells.size()), 1);
        for (size_t i = 0; i < cells.size(); ++i)
            out(static_cast<int>(i), 0) = S(cells[i].first, cells[i].second);
        return make(std::move(out), {src},
                    [src, cells = std::move(cells)](Tape& t, Ref self) {
                        if (!t.wants(src)) return;
                        const Mat& g = t.nodes_[self].g;
                        Mat& pg = t.gref(src);
                        for (size_t i = 0; i < cells.size(); ++i)
                            pg(cells[i].first, cells[i].second) += g(static_cast<int>(i), 0);
                    });
    }

    Ref sum_all(Ref a) {
        Mat out(1, 1);
        for (double x : val(a).a) out(0, 0) += x;
        return make(std::move(out), {a}, [a](Tape& t, Ref self) {
            if (!t.wants(a)) return;
            double g = t.nodes_[self].g(0, 0);
            Mat& pg = t.gref(a);
            for (auto& x : pg.a) x += g;
        });
    }

    // Mean Huber loss between a column vector and a constant target.
    Ref huber_vs(Ref pred, Mat target, double delta) {
        const Mat& P = val(pred);
        assert(P.cols == 1 && P.same_shape(target));
        Mat out(1, 1);
        int n = P.rows;
        for (int i = 0; i < n; ++i) {
            double e = P(i, 0) - target(i, 0);
            double ae = std::abs(e);
            out(0, 0) += (ae <= delta) ? 0.5 * e * e : delta * (ae - 0.5 * delta);
        }
        out(0, 0) /= n;
        return make(std::move(out), {pred},
                    [pred, target = std::move(target), delta](Tape& t, Ref self) {
                        if (!t.wants(pred)) return;
                        double g = t.nodes_[self].g(0, 0);
                        const Mat& P = t.val(pred);
                        Mat& pg = t.gref(pred);
                        int n = P.rows;
                        for (int i = 0; i < n; ++i) {
                            double e = P(i, 0) - target(i, 0);
                            double cl = e > delta ? delta : (e < -delta ? -delta : e);
                            pg(i, 0) += g * cl / n;
                        }
                    });
    }

    // Backpropagate from a 1x1 root.
    void backward(Ref root) {
        assert(val(root).rows == 1 && val(root).cols == 1);
        for (auto& n : nodes_)
            if (n.needs_grad) n.g = Mat(n.v.rows, n.v.cols);
        nodes_[root].g(0, 0) = 1.0;
        for (Ref r = root; r >= 0; --r)
            if (nodes_[r].back && nodes_[r].needs_grad) nodes_[r].back(*this, r);
    }

    void set_sign_tracing(bool on) {
        trace_signs_ = on;
        sign_trace_.clear();
    }
    const std::vector<std::uint64_t>& sign_trace() const { return sign_trace_; }

private:
    struct Node {
        Mat v;
        Mat g;
        bool needs_grad = false;
        std::function<void(Tape&, Ref)> back;
    };

    bool wants(Ref r) const { return nodes_[r].needs_grad; }
    Mat& gref(Ref r) { return nodes_[r].g; }

    Ref make(Mat v, const std::vector<Ref>& parents, std::function<void(Tape&, Ref)> back) {
        bool needs = false;
        for (Ref p : parents) needs |= nodes_[p].needs_grad;
        nodes_.push_back({std::move(v), {}, needs, needs ? std::move(back) : nullptr});
        return static_cast<Ref>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
    bool trace_signs_ = false;
    std::vector<std::uint64_t> sign_trace_;
};

}  // namespace blockforge::nn
