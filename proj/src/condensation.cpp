#include "condensation.hpp"

#include <algorithm>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace poromix::detail {

bool StrainCondensation::matches(const SparseMatrix& m, int num_strain, int block) const
{
    return num_strain == ne_ && block == block_ && outer_.size() == static_cast<std::size_t>(m.cols()) + 1
           && inner_.size() == static_cast<std::size_t>(m.nonZeros())
           && std::equal(outer_.begin(), outer_.end(), m.outerIndexPtr())
           && std::equal(inner_.begin(), inner_.end(), m.innerIndexPtr());
}

void StrainCondensation::setup(const SparseMatrix& m, int num_strain, int block)
{
    if (block <= 0 || num_strain % block != 0) throw std::invalid_argument("condensation: bad strain block size");
    ne_ = num_strain;
    block_ = block;
    cells_ = num_strain / block;
    nr_ = static_cast<int>(m.cols()) - ne_;
    outer_.assign(m.outerIndexPtr(), m.outerIndexPtr() + m.cols() + 1);
    inner_.assign(m.innerIndexPtr(), m.innerIndexPtr() + m.nonZeros());
    const int* outer = m.outerIndexPtr();
    const int* inner = m.innerIndexPtr();

    rest_.assign(static_cast<std::size_t>(cells_), {});
    for (int c = 0; c < cells_; ++c) {
        auto& r = rest_[static_cast<std::size_t>(c)];
        for (int j = c * block_; j < (c + 1) * block_; ++j) {
            for (int k = outer[j]; k < outer[j + 1]; ++k) {
                if (inner[k] >= ne_) r.push_back(inner[k] - ne_);
                else if (inner[k] < c * block_ || inner[k] >= (c + 1) * block_) {
                    throw std::invalid_argument("condensation: strain couples across cells");
                }
            }
        }
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
    }

    std::vector<std::vector<int>> cols(static_cast<std::size_t>(nr_));
    for (int j = 0; j < nr_; ++j) {
        for (int k = outer[ne_ + j]; k < outer[ne_ + j + 1]; ++k) {
            if (inner[k] >= ne_) cols[static_cast<std::size_t>(j)].push_back(inner[k] - ne_);
        }
    }
    for (const auto& r : rest_) {
        for (int j : r) cols[static_cast<std::size_t>(j)].insert(cols[static_cast<std::size_t>(j)].end(), r.begin(), r.end());
    }
    long nnz = 0;
    for (auto& c : cols) {
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end()), c.end());
        nnz += static_cast<long>(c.size());
    }
    s_ = SparseMatrix(nr_, nr_);
    s_.reserve(nnz);
    for (int j = 0; j < nr_; ++j) {
        s_.startVec(j);
        for (int i : cols[static_cast<std::size_t>(j)]) s_.insertBack(i, j) = 0.0;
        std::vector<int>().swap(cols[static_cast<std::size_t>(j)]);
    }
    s_.finalize();
    s_.makeCompressed();

    const int* so = s_.outerIndexPtr();
    const int* si = s_.innerIndexPtr();
    auto slot = [&](int row, int col) {
        const int* it = std::lower_bound(si + so[col], si + so[col + 1], row);
        return static_cast<int>(it - si);
    };
    copy_.clear();
    for (int j = 0; j < nr_; ++j) {
        for (int k = outer[ne_ + j]; k < outer[ne_ + j + 1]; ++k) {
            if (inner[k] >= ne_) copy_.emplace_back(k, slot(inner[k] - ne_, j));
        }
    }
    s_slots_.assign(static_cast<std::size_t>(cells_), {});
    for (int c = 0; c < cells_; ++c) {
        const auto& r = rest_[static_cast<std::size_t>(c)];
        auto& sl = s_slots_[static_cast<std::size_t>(c)];
        sl.reserve(r.size() * r.size());
        for (int j : r) {
            for (int i : r) sl.push_back(slot(i, j));
        }
    }
    inv_.assign(static_cast<std::size_t>(cells_), MatrixXd());
    left_.assign(static_cast<std::size_t>(cells_), MatrixXd());
    right_.assign(static_cast<std::size_t>(cells_), MatrixXd());
}

void StrainCondensation::factor_blocks(const SparseMatrix& m)
{
    const int* outer = m.outerIndexPtr();
    const int* inner = m.innerIndexPtr();
    const double* val = m.valuePtr();
    double* sv = s_.valuePtr();
    std::fill(sv, sv + s_.nonZeros(), 0.0);
    for (const auto& [from, to] : copy_) sv[to] += val[from];

    bool failed = false;
    // A_re A_ee^{-1} A_er per cell, merged serially in cell order afterwards
    std::vector<MatrixXd> update(static_cast<std::size_t>(cells_));
#pragma omp parallel for schedule(static)
    for (int c = 0; c < cells_; ++c) {
        const auto& r = rest_[static_cast<std::size_t>(c)];
        const int nr = static_cast<int>(r.size());
        const int e0 = c * block_;
        MatrixXd aee = MatrixXd::Zero(block_, block_);
        MatrixXd are = MatrixXd::Zero(nr, block_);
        MatrixXd aer = MatrixXd::Zero(block_, nr);
        for (int j = 0; j < block_; ++j) {
            for (int k = outer[e0 + j]; k < outer[e0 + j + 1]; ++k) {
                const int i = inner[k];
                if (i < ne_) {
                    aee(i - e0, j) = val[k];
                } else {
                    const auto pos = std::lower_bound(r.begin(), r.end(), i - ne_) - r.begin();
                    are(pos, j) = val[k];
                }
            }
        }
        for (int jj = 0; jj < nr; ++jj) {
            const int col = ne_ + r[static_cast<std::size_t>(jj)];
            const int* first = inner + outer[col];
            const int* last = inner + outer[col + 1];
            for (const int* it = std::lower_bound(first, last, e0); it != last && *it < e0 + block_; ++it) {
                aer(*it - e0, jj) = val[it - inner];
            }
        }
        const Eigen::LLT<MatrixXd> llt(aee);
        if (llt.info() != Eigen::Success) {
#pragma omp atomic write
            failed = true;
            continue;
        }
        MatrixXd inv = llt.solve(MatrixXd::Identity(block_, block_));
        right_[static_cast<std::size_t>(c)] = inv * aer;
        left_[static_cast<std::size_t>(c)] = are * inv;
        update[static_cast<std::size_t>(c)] = left_[static_cast<std::size_t>(c)] * aer;
        inv_[static_cast<std::size_t>(c)] = std::move(inv);
    }
    if (failed) throw SolverError("condensation: a cellwise strain block is not positive definite");

    for (int c = 0; c < cells_; ++c) {
        const auto& sl = s_slots_[static_cast<std::size_t>(c)];
        const MatrixXd& prod = update[static_cast<std::size_t>(c)];
        const Eigen::Index nr = prod.rows();
        std::size_t s = 0;
        for (Eigen::Index j = 0; j < nr; ++j) {
            for (Eigen::Index i = 0; i < nr; ++i) sv[sl[s++]] -= prod(i, j);
        }
    }
}

VectorXd StrainCondensation::reduce_rhs(const VectorXd& b) const
{
    VectorXd br = b.tail(nr_);
    for (int c = 0; c < cells_; ++c) {
        const auto& r = rest_[static_cast<std::size_t>(c)];
        const VectorXd t = left_[static_cast<std::size_t>(c)] * b.segment(c * block_, block_);
        for (std::size_t i = 0; i < r.size(); ++i) br(r[i]) -= t(static_cast<Eigen::Index>(i));
    }
    return br;
}

VectorXd StrainCondensation::expand(const VectorXd& b, const VectorXd& xr) const
{
    VectorXd x(ne_ + nr_);
    x.tail(nr_) = xr;
    for (int c = 0; c < cells_; ++c) {
        const auto& r = rest_[static_cast<std::size_t>(c)];
        VectorXd xl(static_cast<Eigen::Index>(r.size()));
        for (std::size_t i = 0; i < r.size(); ++i) xl(static_cast<Eigen::Index>(i)) = xr(r[i]);
        x.segment(c * block_, block_) = inv_[static_cast<std::size_t>(c)] * b.segment(c * block_, block_)
                                        - right_[static_cast<std::size_t>(c)] * xl;
    }
    return x;
}

} // namespace poromix::detail
