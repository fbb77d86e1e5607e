#include "snsce/bcrb.hpp"

#include <Eigen/Eigenvalues>

namespace snsce {

BcrbResult bcrb_bound(const BcrbInput& in) {
    if (in.V.rows() != in.V.cols() || in.Psi.cols() != in.V.rows())
        throw std::invalid_argument("BCRB inputs have inconsistent shapes");
    if (!(in.sigma2 > 0.0)) throw std::invalid_argument("noise variance must be positive");
    if (in.M < 1) throw std::invalid_argument("M must be positive");

    const CMatrix V = 0.5 * (in.V + in.V.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(V, Eigen::EigenvaluesOnly);
    BcrbResult out;
    const double vmax = es.eigenvalues().cwiseAbs().maxCoeff();
    out.singular_prior = es.eigenvalues().minCoeff() <= 1e-12 * vmax;

    const Eigen::Index E = in.Psi.rows();
    const CMatrix B = in.Psi * V;  // Psi V
    CMatrix C = in.sigma2 * CMatrix::Identity(E, E) + B * in.Psi.adjoint();
    C = 0.5 * (C + C.adjoint());
    const Eigen::LLT<CMatrix> llt(C);
    if (llt.info() != Eigen::Success) throw NumericalError("BCRB system is singular");
    const double reduction = std::real((B.adjoint() * llt.solve(B)).trace());
    out.bound = std::max(0.0, in.M * (std::real(V.trace()) - reduction));
    return out;
}

}  // namespace snsce
