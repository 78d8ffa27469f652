#pragma once

#include <vector>

#include "ddlqr/sdp.hpp"

namespace ddlqr::sdp::detail {

// Conic standard form of an SdpProblem:
//   minimize    c'x
//   subject to  A x = b
//               G x + s = h,  s in a product of PSD cones (svec coordinates)
// x stacks each variable's scalar components: svec for symmetric variables,
// column-major vec for general ones.
struct StandardForm {
    Vector c;
    Matrix A;
    Vector b;
    Matrix G;
    Vector h;
    std::vector<int> block_dims;       // matrix dimension per PSD block
    std::vector<int> block_offsets;    // svec offset per block
    std::vector<int> var_offsets;      // component offset per variable
    int num_vars = 0;                  // total scalar components

    int cone_size() const { return static_cast<int>(h.size()); }
};

StandardForm compile(const SdpProblem& p);

// Scatters a standard-form point back into per-variable matrices.
std::map<VarId, Matrix> unpack(const SdpProblem& p, const StandardForm& sf,
                               const Vector& x);

}  // namespace ddlqr::sdp::detail
