#ifndef KSC_COLLOCATION_HPP
#define KSC_COLLOCATION_HPP

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "ksc/errors.hpp"
#include "ksc/kernels.hpp"
#include "ksc/param_space.hpp"

namespace ksc {

/// Dense symmetric kernel matrix A_ij = k(y_i, y_j) over a collocation set.
template <typename Scalar = double>
class GramMatrix {
public:
    GramMatrix(MatrixX<Scalar> matrix, KernelSpec<Scalar> kernel, CollocationSet<Scalar> points,
               Eigen::Index duplicate_pairs)
        : matrix_(std::move(matrix)),
          kernel_(std::move(kernel)),
          points_(std::move(points)),
          duplicate_pairs_(duplicate_pairs) {}

    Eigen::Index size() const { return matrix_.rows(); }
    const MatrixX<Scalar>& matrix() const { return matrix_; }
    const KernelSpec<Scalar>& kernel() const { return kernel_; }
    const CollocationSet<Scalar>& points() const { return points_; }

    // Number of index pairs i < j with coinciding points. Nonzero means the
    // unregularized system is singular.
    Eigen::Index duplicate_pairs() const { return duplicate_pairs_; }

    // Leading n x n block: the Gram matrix of the first n points.
    GramMatrix leading(Eigen::Index n) const {
        if (n < 0 || n > size()) throw DomainError("leading block larger than Gram matrix");
        Eigen::Index dups = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < j; ++i)
                if (points_.point(i) == points_.point(j)) ++dups;
        return GramMatrix(matrix_.topLeftCorner(n, n), kernel_, points_.prefix(n), dups);
    }

    // Column of kernel values (k(z, y_1), ..., k(z, y_N)).
    template <typename Derived>
    VectorX<Scalar> cross_column(const Eigen::MatrixBase<Derived>& z) const {
        VectorX<Scalar> col(size());
        for (Eigen::Index i = 0; i < size(); ++i) col(i) = kernel_(z, points_.point(i));
        return col;
    }

private:
    MatrixX<Scalar> matrix_;
    KernelSpec<Scalar> kernel_;
    CollocationSet<Scalar> points_;
    Eigen::Index duplicate_pairs_ = 0;
};

template <typename Scalar>
GramMatrix<Scalar> assemble_gram(const KernelSpec<Scalar>& spec, const CollocationSet<Scalar>& points) {
    const Eigen::Index n = points.size();
    MatrixX<Scalar> a(n, n);
    Eigen::Index dups = 0;
    const Scalar diag = spec.value_at_zero();
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < j; ++i) {
            const Scalar v = spec(points.point(i), points.point(j));
            a(i, j) = v;
            a(j, i) = v;
            if (points.point(i) == points.point(j)) ++dups;
        }
        a(j, j) = diag;
    }
    return GramMatrix<Scalar>(std::move(a), spec, points, dups);
}

/// How the Gram system is stabilized before solving.
struct Regularization {
    enum class Kind { none, tikhonov, tsvd };

    Kind kind = Kind::none;
    // eps_reg for Tikhonov, relative drop tolerance for TSVD.
    double value = 0.0;

    static Regularization none() { return {}; }
    static Regularization tikhonov(double eps_reg) {
        if (!(eps_reg > 0)) throw DomainError("Tikhonov parameter must be positive");
        return {Kind::tikhonov, eps_reg};
    }
    static Regularization tsvd(double drop_tol) {
        if (!(drop_tol > 0)) throw DomainError("TSVD drop tolerance must be positive");
        return {Kind::tsvd, drop_tol};
    }

    std::string describe() const {
        std::ostringstream os;
        switch (kind) {
        case Kind::none: os << "none"; break;
        case Kind::tikhonov: os << "tikhonov(" << value << ")"; break;
        case Kind::tsvd: os << "tsvd(" << value << ")"; break;
        }
        return os.str();
    }

    friend bool operator==(const Regularization&, const Regularization&) = default;
};

/// Eigendecomposition A = Q diag(lambda) Q^T of a Gram matrix. Because A is
/// symmetric, its singular values are |lambda| and the truncated pseudo-inverse
/// is Q diag(1/lambda_kept) Q^T. Shareable across several drop tolerances.
template <typename Scalar = double>
class SpectralDecomposition {
public:
    explicit SpectralDecomposition(const GramMatrix<Scalar>& gram, bool with_vectors = true)
        : solver_(gram.matrix(), with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly),
          has_vectors_(with_vectors) {
        if (solver_.info() != Eigen::Success) throw NumericalError("symmetric eigensolver did not converge");
    }

    const VectorX<Scalar>& eigenvalues() const { return solver_.eigenvalues(); }
    const MatrixX<Scalar>& eigenvectors() const {
        if (!has_vectors_) throw DomainError("spectral decomposition was computed without eigenvectors");
        return solver_.eigenvectors();
    }
    bool has_vectors() const { return has_vectors_; }
    Eigen::Index size() const { return solver_.eigenvalues().size(); }

    Scalar sigma_max() const { return size() == 0 ? Scalar(0) : eigenvalues().cwiseAbs().maxCoeff(); }
    Scalar sigma_min() const { return size() == 0 ? Scalar(0) : eigenvalues().cwiseAbs().minCoeff(); }

private:
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver_;
    bool has_vectors_;
};

/// One factorization of the (regularized) Gram matrix, reused for every
/// right-hand side: data channels, Lagrange values and moment weights.
template <typename Scalar = double>
class GramSolver {
public:
    GramSolver(const GramMatrix<Scalar>& gram, Regularization reg) : reg_(reg), size_(gram.size()) {
        switch (reg.kind) {
        case Regularization::Kind::none: factor_unregularized(gram); break;
        case Regularization::Kind::tikhonov: factor_tikhonov(gram); break;
        case Regularization::Kind::tsvd:
            spectrum_ = std::make_shared<const SpectralDecomposition<Scalar>>(gram);
            select_modes();
            break;
        }
    }

    // TSVD on a precomputed decomposition.
    GramSolver(std::shared_ptr<const SpectralDecomposition<Scalar>> spectrum, Regularization reg)
        : reg_(reg), size_(spectrum->size()), spectrum_(std::move(spectrum)) {
        if (reg.kind != Regularization::Kind::tsvd) throw DomainError("spectral solver requires TSVD regularization");
        select_modes();
    }

    const Regularization& regularization() const { return reg_; }
    Eigen::Index size() const { return size_; }

    // Number of retained modes for TSVD; the full size otherwise.
    Eigen::Index rank() const { return reg_.kind == Regularization::Kind::tsvd ? kept_.size() : size_; }

    template <typename Derived>
    VectorX<Scalar> solve(const Eigen::MatrixBase<Derived>& rhs) const {
        if (rhs.cols() != 1 || rhs.rows() != size_) throw DomainError("right-hand side has wrong size");
        const VectorX<Scalar> b = rhs;
        return solve_vector(b);
    }

    // Columns are solved one at a time through the same path as a single
    // vector, so a channel's result does not depend on its neighbours.
    template <typename Derived>
    MatrixX<Scalar> solve_columns(const Eigen::MatrixBase<Derived>& rhs) const {
        if (rhs.rows() != size_) throw DomainError("right-hand side row count does not match Gram size");
        MatrixX<Scalar> out(size_, rhs.cols());
        VectorX<Scalar> col(size_);
        for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
            col = rhs.col(c);
            out.col(c) = solve_vector(col);
        }
        return out;
    }

private:
    using Llt = Eigen::LLT<MatrixX<Scalar>>;
    using Lu = Eigen::PartialPivLU<MatrixX<Scalar>>;

    void factor_unregularized(const GramMatrix<Scalar>& gram) {
        if (size_ == 0) return;
        Llt llt(gram.matrix());
        if (llt.info() != Eigen::Success)
            throw NumericalError("unregularized Gram matrix is not numerically positive definite"
                                 " (singular or duplicate collocation points); use Tikhonov or TSVD regularization");
        const Scalar rcond = llt.rcond();
        if (!(rcond > std::numeric_limits<Scalar>::epsilon())) {
            std::ostringstream os;
            os << "unregularized Gram matrix is numerically singular (reciprocal condition estimate " << rcond
               << "); use Tikhonov or TSVD regularization";
            throw NumericalError(os.str());
        }
        factor_ = std::move(llt);
    }

    void factor_tikhonov(const GramMatrix<Scalar>& gram) {
        if (size_ == 0) return;
        MatrixX<Scalar> shifted = gram.matrix();
        shifted.diagonal().array() += static_cast<Scalar>(reg_.value);
        Llt llt(shifted);
        if (llt.info() == Eigen::Success) {
            factor_ = std::move(llt);
            return;
        }
        // A + eps I is SPD in exact arithmetic; rounding in A can push its
        // smallest eigenvalues below -eps for tiny eps.
        factor_ = Lu(shifted);
    }

    void select_modes() {
        const auto& lambda = spectrum_->eigenvalues();
        const Scalar cutoff = static_cast<Scalar>(reg_.value) * spectrum_->sigma_max();
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < lambda.size(); ++i)
            if (std::abs(lambda(i)) >= cutoff && lambda(i) != Scalar(0)) keep.push_back(i);
        kept_ = Eigen::Map<const Eigen::Matrix<Eigen::Index, Eigen::Dynamic, 1>>(keep.data(),
                                                                              static_cast<Eigen::Index>(keep.size()));
        const auto& q = spectrum_->eigenvectors();
        basis_.resize(size_, kept_.size());
        inv_lambda_.resize(kept_.size());
        for (Eigen::Index k = 0; k < kept_.size(); ++k) {
            basis_.col(k) = q.col(kept_(k));
            inv_lambda_(k) = Scalar(1) / lambda(kept_(k));
        }
    }

    VectorX<Scalar> solve_vector(const VectorX<Scalar>& b) const {
        if (size_ == 0) return b;
        if (reg_.kind == Regularization::Kind::tsvd) {
            const VectorX<Scalar> coeff = (basis_.transpose() * b).cwiseProduct(inv_lambda_);
            return basis_ * coeff;
        }
        return std::visit(
            [&](const auto& f) -> VectorX<Scalar> {
                if constexpr (std::is_same_v<std::decay_t<decltype(f)>, std::monostate>) {
                    throw NumericalError("Gram solver is not initialized");
                } else {
                    return f.solve(b);
                }
            },
            factor_);
    }

    Regularization reg_;
    Eigen::Index size_;
    std::variant<std::monostate, Llt, Lu> factor_;
    std::shared_ptr<const SpectralDecomposition<Scalar>> spectrum_;
    Eigen::Matrix<Eigen::Index, Eigen::Dynamic, 1> kept_;
    MatrixX<Scalar> basis_;
    VectorX<Scalar> inv_lambda_;
};

/// Kernel interpolant f(y) ~ sum_i alpha_i k(y, y_i) with one coefficient
/// column per output channel.
template <typename Scalar = double>
class Interpolant {
public:
    Interpolant(MatrixX<Scalar> coefficients, CollocationSet<Scalar> points, KernelSpec<Scalar> kernel,
                Regularization reg)
        : coefficients_(std::move(coefficients)),
          points_(std::move(points)),
          kernel_(std::move(kernel)),
          reg_(reg) {}

    const MatrixX<Scalar>& coefficients() const { return coefficients_; }
    const CollocationSet<Scalar>& points() const { return points_; }
    const KernelSpec<Scalar>& kernel() const { return kernel_; }
    const Regularization& regularization() const { return reg_; }
    Eigen::Index channels() const { return coefficients_.cols(); }

    template <typename Derived>
    VectorX<Scalar> operator()(const Eigen::MatrixBase<Derived>& y) const {
        if (y.size() != points_.dims()) throw DomainError("evaluation point has wrong dimension");
        VectorX<Scalar> kv(points_.size());
        for (Eigen::Index i = 0; i < points_.size(); ++i) kv(i) = kernel_(y, points_.point(i));
        VectorX<Scalar> out(channels());
        for (Eigen::Index c = 0; c < channels(); ++c) {
            Scalar acc = 0;
            for (Eigen::Index i = 0; i < points_.size(); ++i) acc += kv(i) * coefficients_(i, c);
            out(c) = acc;
        }
        return out;
    }

private:
    MatrixX<Scalar> coefficients_;
    CollocationSet<Scalar> points_;
    KernelSpec<Scalar> kernel_;
    Regularization reg_;
};

/// Coefficients for every data column (N x M) from one factorization.
template <typename Scalar, typename Derived>
Interpolant<Scalar> solve(const GramMatrix<Scalar>& gram, const Eigen::MatrixBase<Derived>& data, Regularization reg) {
    if (data.rows() != gram.size()) throw DomainError("data row count does not match number of collocation points");
    GramSolver<Scalar> solver(gram, reg);
    return Interpolant<Scalar>(solver.solve_columns(data), gram.points(), gram.kernel(), reg);
}

template <typename Scalar, typename Derived>
VectorX<Scalar> eval_interpolant(const Interpolant<Scalar>& interp, const Eigen::MatrixBase<Derived>& y) {
    return interp(y);
}

/// (L_1(z), ..., L_N(z)) = A_reg^{-1} (k(z, y_1), ..., k(z, y_N)).
template <typename Scalar, typename Derived>
VectorX<Scalar> lagrange_values(const GramSolver<Scalar>& solver, const GramMatrix<Scalar>& gram,
                                const Eigen::MatrixBase<Derived>& z) {
    return solver.solve(gram.cross_column(z));
}

template <typename Scalar, typename Derived>
VectorX<Scalar> lagrange_values(const GramMatrix<Scalar>& gram, Regularization reg, const Eigen::MatrixBase<Derived>& z) {
    return lagrange_values(GramSolver<Scalar>(gram, reg), gram, z);
}

template <typename Scalar = double>
struct ConditionReport {
    Scalar sigma_min = 0;
    Scalar sigma_max = 0;
    // sigma_max / sigma_min; +inf once sigma_min is at rounding level.
    Scalar condition = 0;
};

template <typename Scalar>
ConditionReport<Scalar> condition_report(const SpectralDecomposition<Scalar>& spectrum) {
    ConditionReport<Scalar> report;
    report.sigma_max = spectrum.sigma_max();
    report.sigma_min = spectrum.sigma_min();
    const Scalar floor = static_cast<Scalar>(spectrum.size()) * std::numeric_limits<Scalar>::epsilon() * report.sigma_max;
    report.condition = report.sigma_min <= floor ? std::numeric_limits<Scalar>::infinity()
                                                 : report.sigma_max / report.sigma_min;
    return report;
}

template <typename Scalar>
ConditionReport<Scalar> condition_report(const GramMatrix<Scalar>& gram) {
    return condition_report(SpectralDecomposition<Scalar>(gram, false));
}

} // namespace ksc

#endif // KSC_COLLOCATION_HPP
