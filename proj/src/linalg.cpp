#include "cfdg/linalg.hpp"

#include <cmath>

namespace cfdg {

Mat from_row(const Vec& v) {
    Mat m(1, static_cast<int>(v.size()));
    m.a = v;
    return m;
}

Vec to_vec_row(const Mat& m, int r) {
    return Vec(m.row(r), m.row(r) + m.cols);
}

void addmm_nt(const Mat& x, const Mat& w, Mat& y) {
    if (x.cols != w.cols || y.rows != x.rows || y.cols != w.rows) {
        throw ValidationError("addmm_nt: shape mismatch");
    }
    const int B = x.rows, N = w.rows, M = x.cols;
    for (int b = 0; b < B; ++b) {
        const double* xb = x.row(b);
        double* yb = y.row(b);
        for (int j = 0; j < N; ++j) {
            const double* wj = w.row(j);
            double acc = 0.0;
            for (int m = 0; m < M; ++m) acc += xb[m] * wj[m];
            yb[j] += acc;
        }
    }
}

void addmm_tn(const Mat& gy, const Mat& x, Mat& gw) {
    if (gy.rows != x.rows || gw.rows != gy.cols || gw.cols != x.cols) {
        throw ValidationError("addmm_tn: shape mismatch");
    }
    const int B = gy.rows, N = gy.cols, M = x.cols;
    for (int b = 0; b < B; ++b) {
        const double* gyb = gy.row(b);
        const double* xb = x.row(b);
        for (int j = 0; j < N; ++j) {
            const double c = gyb[j];
            if (c == 0.0) continue;
            double* gwj = gw.row(j);
            for (int m = 0; m < M; ++m) gwj[m] += c * xb[m];
        }
    }
}

void addmm_nn(const Mat& gy, const Mat& w, Mat& gx) {
    if (gy.cols != w.rows || gx.rows != gy.rows || gx.cols != w.cols) {
        throw ValidationError("addmm_nn: shape mismatch");
    }
    const int B = gy.rows, N = gy.cols, M = w.cols;
    for (int b = 0; b < B; ++b) {
        const double* gyb = gy.row(b);
        double* gxb = gx.row(b);
        for (int j = 0; j < N; ++j) {
            const double c = gyb[j];
            if (c == 0.0) continue;
            const double* wj = w.row(j);
            for (int m = 0; m < M; ++m) gxb[m] += c * wj[m];
        }
    }
}

void add_row_vector(Mat& m, const Vec& b) {
    if (static_cast<size_t>(m.cols) != b.size()) {
        throw ValidationError("add_row_vector: length mismatch");
    }
    for (int r = 0; r < m.rows; ++r) {
        double* mr = m.row(r);
        for (int c = 0; c < m.cols; ++c) mr[c] += b[c];
    }
}

void col_sums(const Mat& m, Vec& out) {
    if (out.size() != static_cast<size_t>(m.cols)) {
        throw ValidationError("col_sums: length mismatch");
    }
    for (int r = 0; r < m.rows; ++r) {
        const double* mr = m.row(r);
        for (int c = 0; c < m.cols; ++c) out[c] += mr[c];
    }
}

bool all_finite(const double* p, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(p[i])) return false;
    }
    return true;
}

}  // namespace cfdg
