#ifndef KSC_QUADRATURE_HPP
#define KSC_QUADRATURE_HPP

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ksc/collocation.hpp"
#include "ksc/errors.hpp"
#include "ksc/kernels.hpp"
#include "ksc/param_space.hpp"

namespace ksc {

inline constexpr double kDefaultQuadratureCap = 1e8;

/// Clenshaw-Curtis nodes and weights on [-1, 1] with n >= 2 nodes
/// (Chebyshev extrema, ascending). Nodes are built from sin() so the rule is
/// exactly symmetric and the midpoint is exactly zero for odd n.
template <typename Scalar = double>
std::pair<VectorX<Scalar>, VectorX<Scalar>> clenshaw_curtis(Eigen::Index n) {
    if (n < 2) throw DomainError("Clenshaw-Curtis rule needs at least two nodes");
    const Eigen::Index intervals = n - 1;
    const Scalar pi = std::numbers::pi_v<Scalar>;
    VectorX<Scalar> x(n), w(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        using std::cos;
        using std::sin;
        x(j) = sin(pi * static_cast<Scalar>(2 * j - intervals) / static_cast<Scalar>(2 * intervals));
        const Scalar theta = pi * static_cast<Scalar>(j) / static_cast<Scalar>(intervals);
        Scalar s = 0;
        for (Eigen::Index k = 1; 2 * k <= intervals; ++k) {
            const Scalar b = (2 * k == intervals) ? Scalar(1) : Scalar(2);
            s += b / static_cast<Scalar>(4 * k * k - 1) * cos(static_cast<Scalar>(2 * k) * theta);
        }
        const Scalar c = (j == 0 || j == intervals) ? Scalar(1) : Scalar(2);
        w(j) = c / static_cast<Scalar>(intervals) * (Scalar(1) - s);
    }
    // Enforce exact mirror symmetry of the weights.
    for (Eigen::Index j = 0; j < n / 2; ++j) {
        const Scalar avg = (w(j) + w(n - 1 - j)) / Scalar(2);
        w(j) = avg;
        w(n - 1 - j) = avg;
    }
    return {x, w};
}

// Nodes per dimension at level l: 2^(l-1)+1, and 2 at level one.
inline Eigen::Index cc_nodes_at_level(int level) {
    if (level < 1) throw DomainError("quadrature level must be >= 1");
    if (level > 30) throw DomainError("quadrature level too large");
    return level == 1 ? 2 : (Eigen::Index{1} << (level - 1)) + 1;
}

/// Full tensor product of one-dimensional Clenshaw-Curtis rules mapped onto a
/// parameter box. Weights carry the interval lengths (they sum to the box
/// volume); the uniform density is applied separately.
template <typename Scalar = double>
class TensorRule {
public:
    TensorRule(int level, std::vector<VectorX<Scalar>> nodes, std::vector<VectorX<Scalar>> weights)
        : level_(level), nodes_(std::move(nodes)), weights_(std::move(weights)) {}

    int level() const { return level_; }
    Eigen::Index dims() const { return static_cast<Eigen::Index>(nodes_.size()); }
    const VectorX<Scalar>& nodes(Eigen::Index d) const { return nodes_[static_cast<std::size_t>(d)]; }
    const VectorX<Scalar>& weights(Eigen::Index d) const { return weights_[static_cast<std::size_t>(d)]; }

    Eigen::Index size() const {
        Eigen::Index total = 1;
        for (const auto& n : nodes_) total *= n.size();
        return total;
    }

    // Node and weight of flat index q; dimension 0 varies fastest.
    Scalar node(Eigen::Index q, VectorX<Scalar>& z) const {
        z.resize(dims());
        Scalar w = 1;
        for (std::size_t d = 0; d < nodes_.size(); ++d) {
            const Eigen::Index n = nodes_[d].size();
            const Eigen::Index i = q % n;
            q /= n;
            z(static_cast<Eigen::Index>(d)) = nodes_[d](i);
            w *= weights_[d](i);
        }
        return w;
    }

    /// Visits nodes in flat-index order in blocks of at most `block` nodes:
    /// f(const MatrixX& z /* D x b */, const VectorX& w /* b */).
    template <typename F>
    void for_each_block(Eigen::Index block, F&& f) const {
        const Eigen::Index total = size();
        MatrixX<Scalar> z(dims(), std::min(block, total));
        VectorX<Scalar> w(z.cols());
        VectorX<Scalar> tmp;
        for (Eigen::Index start = 0; start < total; start += block) {
            const Eigen::Index b = std::min(block, total - start);
            if (b != z.cols()) {
                z.resize(dims(), b);
                w.resize(b);
            }
            for (Eigen::Index k = 0; k < b; ++k) {
                w(k) = node(start + k, tmp);
                z.col(k) = tmp;
            }
            f(static_cast<const MatrixX<Scalar>&>(z), static_cast<const VectorX<Scalar>&>(w));
        }
    }

private:
    int level_;
    std::vector<VectorX<Scalar>> nodes_;
    std::vector<VectorX<Scalar>> weights_;
};

template <typename Scalar>
TensorRule<Scalar> cc_rule(const ParameterDomain<Scalar>& domain, int level, double max_points = kDefaultQuadratureCap) {
    const Eigen::Index n = cc_nodes_at_level(level);
    const double total = std::pow(static_cast<double>(n), static_cast<double>(domain.dims()));
    if (total > max_points)
        throw NumericalError("tensor Clenshaw-Curtis rule at level " + std::to_string(level) + " in " +
                             std::to_string(domain.dims()) + " dimensions needs " + std::to_string(total) +
                             " points (cap " + std::to_string(max_points) +
                             "); lower the level or use a sparse-grid rule");
    const auto [x, w] = clenshaw_curtis<Scalar>(n);
    std::vector<VectorX<Scalar>> nodes, weights;
    for (Eigen::Index d = 0; d < domain.dims(); ++d) {
        const Scalar lo = domain.lower()(d);
        const Scalar half = (domain.upper()(d) - lo) / Scalar(2);
        nodes.push_back(((x.array() + Scalar(1)) * half + lo).matrix());
        weights.push_back(w * half);
    }
    return TensorRule<Scalar>(level, std::move(nodes), std::move(weights));
}

/// sum_q w_q rho(z_q) f(z_q) for f returning a scalar.
template <typename Scalar, typename F>
Scalar integrate(const TensorRule<Scalar>& rule, const ParameterDomain<Scalar>& domain, F&& f) {
    const Scalar rho = Scalar(1) / domain.volume();
    Scalar sum = 0;
    rule.for_each_block(4096, [&](const MatrixX<Scalar>& z, const VectorX<Scalar>& w) {
        for (Eigen::Index k = 0; k < z.cols(); ++k) sum += w(k) * rho * f(z.col(k));
    });
    return sum;
}

/// b_j = sum_q w_q rho(z_q) k(z_q, y_j): the kernel integrals against the density.
template <typename Scalar>
VectorX<Scalar> kernel_moments(const KernelSpec<Scalar>& spec, const CollocationSet<Scalar>& points,
                               const TensorRule<Scalar>& rule, const ParameterDomain<Scalar>& domain) {
    if (rule.dims() != domain.dims() || points.dims() != domain.dims())
        throw DomainError("quadrature rule, points and domain dimensions differ");
    const Scalar rho = Scalar(1) / domain.volume();
    const Eigen::Index n = points.size();
    VectorX<Scalar> b = VectorX<Scalar>::Zero(n);
    rule.for_each_block(8192, [&](const MatrixX<Scalar>& z, const VectorX<Scalar>& w) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto yj = points.point(j);
            Scalar acc = 0;
            for (Eigen::Index k = 0; k < z.cols(); ++k) acc += w(k) * spec(z.col(k), yj);
            b(j) += acc;
        }
    });
    return b * rho;
}

/// Quadrature weights omega = A_reg^{-1} b for first-moment estimation, i.e.
/// the density-weighted integrals of the Lagrange basis.
template <typename Scalar = double>
struct MomentWeights {
    VectorX<Scalar> omega;
    VectorX<Scalar> moments;
};

template <typename Scalar, typename Derived>
MomentWeights<Scalar> moment_weights(const GramSolver<Scalar>& solver, const Eigen::MatrixBase<Derived>& b) {
    if (b.size() != solver.size()) throw DomainError("kernel moment vector does not match Gram size");
    return {solver.solve(b), b};
}

template <typename Scalar, typename Derived>
MomentWeights<Scalar> moment_weights(const GramMatrix<Scalar>& gram, Regularization reg,
                                     const Eigen::MatrixBase<Derived>& b) {
    return moment_weights(GramSolver<Scalar>(gram, reg), b);
}

/// Mean estimate sum_i omega_i samples(i, :) for an N x M sample table.
template <typename Scalar, typename Derived>
VectorX<Scalar> estimate_mean(const MomentWeights<Scalar>& weights, const Eigen::MatrixBase<Derived>& samples) {
    if (samples.rows() != weights.omega.size()) throw DomainError("sample row count does not match weight count");
    // Plain per-channel loops: a channel's value does not depend on how many
    // other channels share the table.
    VectorX<Scalar> mean(samples.cols());
    for (Eigen::Index c = 0; c < samples.cols(); ++c) {
        Scalar acc = 0;
        for (Eigen::Index i = 0; i < samples.rows(); ++i) acc += weights.omega(i) * samples(i, c);
        mean(c) = acc;
    }
    return mean;
}

} // namespace ksc

#endif // KSC_QUADRATURE_HPP
