#pragma once

// Factor-once / solve-many sparse LU.
//
// Left-looking Gilbert-Peierls elimination on a column-compressed matrix.
// Columns are pre-ordered with COLAMD (deterministic for a given pattern).
// Rows use threshold partial pivoting: the candidate on the original
// diagonal is kept when its magnitude is at least kDiagonalPreference times
// the largest candidate in the column, otherwise the largest one is taken.

#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>

#include "helm/error.hpp"

namespace helm::linsolve {

template <typename Scalar>
using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>;

/// Process-wide operation counters, used to check factorization reuse.
struct Counters {
    std::atomic<std::size_t> factorizations{0};
    std::atomic<std::size_t> solves{0};
};

inline Counters& counters() {
    static Counters instance;
    return instance;
}

inline constexpr double kDiagonalPreference = 0.1;

template <typename Scalar>
class Factorization;

template <typename Scalar>
Factorization<Scalar> factor(const SparseMatrix<Scalar>& matrix);

template <typename Scalar>
class Factorization {
public:
    using value_type = Scalar;

    std::size_t dimension() const noexcept { return static_cast<std::size_t>(n_); }
    std::size_t fill() const noexcept { return l_val_.size() + u_val_.size(); }

    std::vector<Scalar> solve(std::span<const Scalar> rhs) const {
        if (rhs.size() != dimension()) {
            throw Error("linsolve: right-hand side has " + std::to_string(rhs.size()) +
                        " entries, factorization has dimension " + std::to_string(n_));
        }
        counters().solves.fetch_add(1, std::memory_order_relaxed);

        std::vector<Scalar> y(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) y[static_cast<std::size_t>(row_perm_[i])] = rhs[static_cast<std::size_t>(i)];

        for (int j = 0; j < n_; ++j) {
            const Scalar yj = y[static_cast<std::size_t>(j)];
            if (yj == Scalar{}) continue;
            for (int p = l_ptr_[j]; p < l_ptr_[j + 1]; ++p) {
                y[static_cast<std::size_t>(l_idx_[p])] -= l_val_[p] * yj;
            }
        }
        for (int j = n_ - 1; j >= 0; --j) {
            const int diag = u_ptr_[j + 1] - 1;
            Scalar& yj = y[static_cast<std::size_t>(j)];
            yj /= u_val_[diag];
            if (yj == Scalar{}) continue;
            for (int p = u_ptr_[j]; p < diag; ++p) {
                y[static_cast<std::size_t>(u_idx_[p])] -= u_val_[p] * yj;
            }
        }

        std::vector<Scalar> x(static_cast<std::size_t>(n_));
        for (int k = 0; k < n_; ++k) x[static_cast<std::size_t>(col_perm_[k])] = y[static_cast<std::size_t>(k)];
        return x;
    }

private:
    friend Factorization factor<Scalar>(const SparseMatrix<Scalar>& matrix);

    int n_ = 0;
    std::vector<int> col_perm_;  // pivot step k eliminates original column col_perm_[k]
    std::vector<int> row_perm_;  // original row i becomes pivot row row_perm_[i]
    // Unit lower factor without its diagonal; rows in pivot numbering.
    std::vector<int> l_ptr_, l_idx_;
    std::vector<Scalar> l_val_;
    // Upper factor; rows in pivot numbering, diagonal stored last per column.
    std::vector<int> u_ptr_, u_idx_;
    std::vector<Scalar> u_val_;
};

/// LU-factor a square sparse matrix.
/// Throws SingularMatrixError naming the elimination step with no usable pivot.
template <typename Scalar>
Factorization<Scalar> factor(const SparseMatrix<Scalar>& input) {
    using std::abs;
    if (input.rows() != input.cols()) {
        throw Error("linsolve: matrix is " + std::to_string(input.rows()) + "x" + std::to_string(input.cols()) +
                    ", expected square");
    }
    counters().factorizations.fetch_add(1, std::memory_order_relaxed);

    SparseMatrix<Scalar> a = input;
    a.makeCompressed();
    const int n = static_cast<int>(a.cols());

    Factorization<Scalar> f;
    f.n_ = n;
    f.col_perm_.resize(static_cast<std::size_t>(n));
    if (n > 0) {
        Eigen::COLAMDOrdering<int> ordering;
        Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm;
        ordering(a, perm);
        // perm maps original column -> position; invert it.
        for (int c = 0; c < n; ++c) f.col_perm_[static_cast<std::size_t>(perm.indices()(c))] = c;
    }

    double norm1 = 0.0;
    for (int col = 0; col < n; ++col) {
        double sum = 0.0;
        for (typename SparseMatrix<Scalar>::InnerIterator it(a, col); it; ++it) sum += abs(it.value());
        norm1 = std::max(norm1, sum);
    }
    const double negligible = std::numeric_limits<double>::epsilon() * std::max(n, 1) * norm1;

    const int* ap = a.outerIndexPtr();
    const int* ai = a.innerIndexPtr();
    const Scalar* ax = a.valuePtr();

    std::vector<int> pinv(static_cast<std::size_t>(n), -1);
    std::vector<Scalar> x(static_cast<std::size_t>(n), Scalar{});
    std::vector<int> stack(static_cast<std::size_t>(2 * n));
    std::vector<int> mark(static_cast<std::size_t>(n), -1);

    auto& lp = f.l_ptr_;
    auto& li = f.l_idx_;
    auto& lx = f.l_val_;
    auto& up = f.u_ptr_;
    auto& ui = f.u_idx_;
    auto& ux = f.u_val_;
    lp.assign(1, 0);
    up.assign(1, 0);
    li.reserve(static_cast<std::size_t>(a.nonZeros()) * 2);
    lx.reserve(static_cast<std::size_t>(a.nonZeros()) * 2);
    ui.reserve(static_cast<std::size_t>(a.nonZeros()) * 2);
    ux.reserve(static_cast<std::size_t>(a.nonZeros()) * 2);

    int* xi = stack.data();
    int* pstack = stack.data() + n;

    for (int k = 0; k < n; ++k) {
        const int col = f.col_perm_[static_cast<std::size_t>(k)];

        // Nonzero pattern of L \ A(:, col) in topological order, in xi[top, n).
        int top = n;
        for (int p = ap[col]; p < ap[col + 1]; ++p) {
            const int start = ai[p];
            if (mark[static_cast<std::size_t>(start)] == k) continue;
            int head = 0;
            xi[0] = start;
            while (head >= 0) {
                const int j = xi[head];
                const int jnew = pinv[static_cast<std::size_t>(j)];
                if (mark[static_cast<std::size_t>(j)] != k) {
                    mark[static_cast<std::size_t>(j)] = k;
                    pstack[head] = jnew < 0 ? 0 : lp[static_cast<std::size_t>(jnew)];
                }
                bool done = true;
                const int end = jnew < 0 ? 0 : lp[static_cast<std::size_t>(jnew) + 1];
                for (int q = pstack[head]; q < end; ++q) {
                    const int child = li[static_cast<std::size_t>(q)];
                    if (mark[static_cast<std::size_t>(child)] == k) continue;
                    pstack[head] = q + 1;
                    xi[++head] = child;
                    done = false;
                    break;
                }
                if (done) {
                    --head;
                    xi[--top] = j;
                }
            }
        }

        for (int p = top; p < n; ++p) x[static_cast<std::size_t>(xi[p])] = Scalar{};
        for (int p = ap[col]; p < ap[col + 1]; ++p) x[static_cast<std::size_t>(ai[p])] = ax[p];
        for (int p = top; p < n; ++p) {
            const int j = xi[p];
            const int jnew = pinv[static_cast<std::size_t>(j)];
            if (jnew < 0) continue;
            const Scalar xj = x[static_cast<std::size_t>(j)];
            for (int q = lp[static_cast<std::size_t>(jnew)]; q < lp[static_cast<std::size_t>(jnew) + 1]; ++q) {
                x[static_cast<std::size_t>(li[static_cast<std::size_t>(q)])] -= lx[static_cast<std::size_t>(q)] * xj;
            }
        }

        int ipiv = -1;
        double amax = -1.0;
        for (int p = top; p < n; ++p) {
            const int i = xi[p];
            if (pinv[static_cast<std::size_t>(i)] < 0) {
                const double t = abs(x[static_cast<std::size_t>(i)]);
                if (t > amax) {
                    amax = t;
                    ipiv = i;
                }
            } else {
                ui.push_back(pinv[static_cast<std::size_t>(i)]);
                ux.push_back(x[static_cast<std::size_t>(i)]);
            }
        }
        if (ipiv < 0 || !(amax > negligible)) {
            throw SingularMatrixError(static_cast<std::size_t>(k),
                                      "linsolve: matrix is numerically singular at pivot " + std::to_string(k));
        }
        if (pinv[static_cast<std::size_t>(col)] < 0 && mark[static_cast<std::size_t>(col)] == k &&
            abs(x[static_cast<std::size_t>(col)]) >= kDiagonalPreference * amax) {
            ipiv = col;
        }

        const Scalar pivot = x[static_cast<std::size_t>(ipiv)];
        ui.push_back(k);
        ux.push_back(pivot);
        up.push_back(static_cast<int>(ui.size()));
        pinv[static_cast<std::size_t>(ipiv)] = k;

        for (int p = top; p < n; ++p) {
            const int i = xi[p];
            if (pinv[static_cast<std::size_t>(i)] < 0) {
                li.push_back(i);
                lx.push_back(x[static_cast<std::size_t>(i)] / pivot);
            }
            x[static_cast<std::size_t>(i)] = Scalar{};
        }
        lp.push_back(static_cast<int>(li.size()));
    }

    for (auto& row : li) row = pinv[static_cast<std::size_t>(row)];
    f.row_perm_ = std::move(pinv);
    return f;
}

template <typename Scalar>
std::vector<Scalar> solve(const Factorization<Scalar>& f, std::span<const Scalar> rhs) {
    return f.solve(rhs);
}

}  // namespace helm::linsolve
