#include "mfg/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace mfg {

Mat pinv(const Mat& m, double tol) {
    if (m.size() == 0) return m.transpose();
    if (tol <= 0.0) tol = 1e-12;
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cutoff = sv.size() ? tol * sv(0) : 0.0;
    Vec inv_sv = Vec::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff && sv(i) > 0.0) inv_sv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

double range_defect(const Mat& m, const Mat& m_pinv, const Mat& v) {
    if (v.size() == 0) return 0.0;
    const Mat proj = Mat::Identity(m.rows(), m.rows()) - m * m_pinv;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        const double norm = v.col(j).norm();
        if (norm == 0.0) continue;
        worst = std::max(worst, (proj * v.col(j)).norm() / norm);
    }
    return worst;
}

Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

double min_eig_sym(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(sym(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double max_real_eig(const Mat& m) {
    Eigen::EigenSolver<Mat> es(m, /*computeEigenvectors=*/false);
    return es.eigenvalues().real().maxCoeff();
}

} // namespace mfg
