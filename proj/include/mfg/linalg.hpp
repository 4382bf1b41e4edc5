#pragma once

#include <Eigen/Dense>

namespace mfg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Symmetric part (M + M^T)/2.
inline Mat sym(const Mat& m) { return 0.5 * (m + m.transpose()); }

inline double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// Moore-Penrose pseudo-inverse. Singular values below tol * s_max are
// treated as zero; tol <= 0 selects the default 1e-12.
Mat pinv(const Mat& m, double tol = 1e-12);

// max |(I - M M^t) v_col| / |v_col| over the columns of V; zero columns count
// as perfectly represented. Used for range-inclusion checks R(V) <= R(M).
double range_defect(const Mat& m, const Mat& m_pinv, const Mat& v);

// Kronecker product, dense.
Mat kron(const Mat& a, const Mat& b);

// Smallest eigenvalue of a symmetric matrix.
double min_eig_sym(const Mat& m);

// Largest real part over the spectrum of a general square matrix.
double max_real_eig(const Mat& m);

inline bool is_hurwitz(const Mat& m, double tol = 0.0) { return max_real_eig(m) < -tol; }

} // namespace mfg
