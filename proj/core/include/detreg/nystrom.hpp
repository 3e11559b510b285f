#pragma once

#include "detreg/dpp.hpp"
#include "detreg/kernels.hpp"
#include "detreg/linalg.hpp"

namespace detreg {

/// Low-rank surrogate of the projected kernel built from the subset blocks of
/// K only; the full projected kernel never has to be formed. Materialization
/// of the n x n approximation is on demand.
struct NystromFactor {
  Subset subset;
  OrthonormalBasis complement;  // B(C), k x (k-p)
  Matrix xi;                    // B(C)^T K_CC B(C)
  Matrix cross;                 // P_{V-perp} K_C^T B(C), n x (k-p)
  Index lowrank_rank;

  /// cross * pinv(xi) * cross^T.
  Matrix materialize() const;
};

/// Throws InfeasibleSize for |C| <= p, RankDeficient when V_C loses rank.
NystromFactor projected_nystrom(const NonNegativePair& nnp, const Subset& c);

/// Classic Nystrom approximation K_C^T K_CC^+ K_C of a psd matrix.
Matrix common_nystrom(const Matrix& k, const Subset& c);

/// || K~ - L~(C) ||_F / || K~ ||_F.
double nystrom_relative_error(const NonNegativePair& nnp, const NystromFactor& factor);

/// Largest violation of 0 <= L~(C) <= K~ in eigenvalue terms
/// (0 when the sandwich holds exactly).
double sandwich_violation(const NonNegativePair& nnp, const NystromFactor& factor);

}  // namespace detreg
