#pragma once

#include "snsce/types.hpp"

namespace snsce {

struct BcrbInput {
    CMatrix Psi;     ///< P_eff x N_sub
    CMatrix V;       ///< N_sub x N_sub prior covariance
    double sigma2 = 1.0;
    int M = 1;
};

struct BcrbResult {
    double bound = 0.0;
    bool singular_prior = false;  ///< V was rank deficient (bound still exact via Woodbury)
};

/// M tr[(sigma^-2 Psi^H Psi + V^-1)^-1], evaluated as M tr[V - V Psi^H (sigma^2 I + Psi V Psi^H)^-1 Psi V].
BcrbResult bcrb_bound(const BcrbInput& in);

}  // namespace snsce
