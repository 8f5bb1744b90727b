#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace blockforge::nn {

// Dense row-major matrix of doubles. Zero rows are legal (empty edge sets).
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return a.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// C += A * B
inline void matmul_acc(const Mat& A, const Mat& B, Mat& C) {
    assert(A.cols == B.rows && C.rows == A.rows && C.cols == B.cols);
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = &A.a[static_cast<size_t>(i) * A.cols];
        double* crow = &C.a[static_cast<size_t>(i) * C.cols];
        for (int k = 0; k < A.cols; ++k) {
            double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = &B.a[static_cast<size_t>(k) * B.cols];
            for (int j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
        }
    }
}

// C += A^T * B
inline void matmul_tA_acc(const Mat& A, const Mat& B, Mat& C) {
    assert(A.rows == B.rows && C.rows == A.cols && C.cols == B.cols);
    for (int k = 0; k < A.rows; ++k) {
        const double* arow = &A.a[static_cast<size_t>(k) * A.cols];
        const double* brow = &B.a[static_cast<size_t>(k) * B.cols];
        for (int i = 0; i < A.cols; ++i) {
            double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = &C.a[static_cast<size_t>(i) * C.cols];
            for (int j = 0; j < B.cols; ++j) crow[j] += aki * brow[j];
        }
    }
}

// C += A * B^T
inline void matmul_tB_acc(const Mat& A, const Mat& B, Mat& C) {
    assert(A.cols == B.cols && C.rows == A.rows && C.cols == B.rows);
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = &A.a[static_cast<size_t>(i) * A.cols];
        double* crow = &C.a[static_cast<size_t>(i) * C.cols];
        for (int j = 0; j < B.rows; ++j) {
            const double* brow = &B.a[static_cast<size_t>(j) * B.cols];
            double s = 0.0;
            for (int k = 0; k < A.cols; ++k) s += arow[k] * brow[k];
            crow[j] += s;
        }
    }
}

}  // namespace blockforge::nn
