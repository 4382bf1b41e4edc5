#include "mfg/kernels.hpp"

namespace mfg {

KernelModel KernelModel::pack(const Mat& A, const Mat& B, const Mat& G, const Mat& C, const Mat& D,
                              const Mat& F, const Mat& C0, const Mat& D0, const Mat& F0) {
    KernelModel km;
    km.n = int(A.rows());
    km.r = int(B.cols());
    auto flat = [](const Mat& m) {
        std::vector<double> out(size_t(m.rows()) * m.cols());
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) out[size_t(i) * m.cols() + j] = m(i, j);
        return out;
    };
    km.A = flat(A);
    km.B = flat(B);
    km.G = flat(G);
    km.C = flat(C);
    km.D = flat(D);
    km.F = flat(F);
    km.C0 = flat(C0);
    km.D0 = flat(D0);
    km.F0 = flat(F0);
    return km;
}

void controls_scalar(const KernelModel& km, const ControlInputs& in, const double* x, int N,
                     int stride, double* u) {
    const int n = km.n, r = km.r;
    for (int k = 0; k < r; ++k) {
        const double* gain_row = in.self_gain + size_t(k) * n;
        double* u_row = u + size_t(k) * stride;
        for (int a = 0; a < N; ++a) {
            double acc = in.ubar[k];
            for (int c = 0; c < n; ++c)
                acc += gain_row[c] * (x[size_t(c) * stride + a] - in.xbar[c]);
            u_row[a] = acc;
        }
    }
}

void advance_scalar(const KernelModel& km, const AdvanceInputs& in, const double* x,
                    const double* u, int N, int stride, double* x_next) {
    const int n = km.n, r = km.r;
    for (int c = 0; c < n; ++c) {
        const double* a_row = km.A.data() + size_t(c) * n;
        const double* g_row = km.C.data() + size_t(c) * n;
        const double* g0_row = km.C0.data() + size_t(c) * n;
        const double* b_row = km.B.data() + size_t(c) * r;
        const double* d_row = km.D.data() + size_t(c) * r;
        const double* d0_row = km.D0.data() + size_t(c) * r;
        double* out_row = x_next + size_t(c) * stride;
        const double* self_row = x + size_t(c) * stride;
        for (int a = 0; a < N; ++a) {
            double drift = in.drift_const[c];
            double diff = in.diff_const[c];
            double diff0 = in.diff0_const[c];
            for (int j = 0; j < n; ++j) {
                const double xj = x[size_t(j) * stride + a];
                drift += a_row[j] * xj;
                diff += g_row[j] * xj;
                diff0 += g0_row[j] * xj;
            }
            for (int k = 0; k < r; ++k) {
                const double uk = u[size_t(k) * stride + a];
                drift += b_row[k] * uk;
                diff += d_row[k] * uk;
                diff0 += d0_row[k] * uk;
            }
            out_row[a] = self_row[a] + drift * in.dt + diff * in.dwi[a] + diff0 * in.dw0;
        }
    }
}

KernelBackend resolve_backend(KernelBackend requested) {
    if (requested == KernelBackend::auto_detect)
        return avx2_supported() ? KernelBackend::avx2 : KernelBackend::scalar;
    return requested;
}

} // namespace mfg
