#pragma once

#include <cstddef>
#include <vector>

#include "cfdg/common.hpp"

namespace cfdg {

// Dense row-major matrix. For batched network passes rows are samples.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }
    size_t size() const { return a.size(); }
    void fill(double v) { std::fill(a.begin(), a.end(), v); }
};

Mat from_row(const Vec& v);
Vec to_vec_row(const Mat& m, int r);

// y(B,N) += x(B,M) * w(N,M)^T   (layer forward)
void addmm_nt(const Mat& x, const Mat& w, Mat& y);

// gw(N,M) += gy(B,N)^T * x(B,M) (weight gradient)
void addmm_tn(const Mat& gy, const Mat& x, Mat& gw);

// gx(B,M) += gy(B,N) * w(N,M)   (input gradient)
void addmm_nn(const Mat& gy, const Mat& w, Mat& gx);

void add_row_vector(Mat& m, const Vec& b);       // m.row(i) += b
void col_sums(const Mat& m, Vec& out);           // out[j] += sum_i m(i,j)

bool all_finite(const double* p, size_t n);

}  // namespace cfdg
