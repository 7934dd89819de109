#pragma once

// Static condensation of the cellwise block-diagonal strain unknowns. The
// strain block occupies the leading rows and columns of the monolithic
// matrix and couples only to unknowns of the same cell, so its Schur
// complement is formed cell by cell.

#include <vector>

#include "poromix/assembly.hpp"

namespace poromix::detail {

class StrainCondensation {
public:
    /// Builds the condensed pattern; `block` is the number of strain unknowns per cell.
    void setup(const SparseMatrix& m, int num_strain, int block);
    bool matches(const SparseMatrix& m, int num_strain, int block) const;

    /// Forms the Schur complement for the values of `m` (same pattern as setup).
    void factor_blocks(const SparseMatrix& m);
    const SparseMatrix& reduced() const { return s_; }

    /// Reduced right-hand side b_r - A_re A_ee^{-1} b_e.
    VectorXd reduce_rhs(const VectorXd& b) const;
    /// Full solution from the reduced one.
    VectorXd expand(const VectorXd& b, const VectorXd& xr) const;

private:
    int ne_ = 0;
    int nr_ = 0;
    int block_ = 0;
    int cells_ = 0;
    std::vector<int> outer_;  // pattern signature of the source matrix
    std::vector<int> inner_;

    std::vector<std::vector<int>> rest_;     // per cell: coupled reduced indices
    std::vector<std::vector<int>> s_slots_;  // per cell: slots of rest x rest in s_
    std::vector<std::pair<int, int>> copy_;  // source value index -> s_ value index
    SparseMatrix s_;

    std::vector<MatrixXd> inv_;   // A_ee^{-1}
    std::vector<MatrixXd> left_;  // A_re A_ee^{-1}
    std::vector<MatrixXd> right_; // A_ee^{-1} A_er
};

} // namespace poromix::detail
