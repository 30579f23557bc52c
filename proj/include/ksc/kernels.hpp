#ifndef KSC_KERNELS_HPP
#define KSC_KERNELS_HPP

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "ksc/errors.hpp"
#include "ksc/param_space.hpp"

namespace ksc {

/// Scaled, optionally anisotropic Euclidean norm: zeta * ||(w_1 y_1, ..., w_D y_D)||_2.
/// An empty weight vector means all weights equal one.
template <typename Scalar = double>
class NormSpec {
public:
    NormSpec() = default;
    explicit NormSpec(Scalar zeta, VectorX<Scalar> weights = {}) : zeta_(zeta), weights_(std::move(weights)) {
        if (!(zeta_ > Scalar(0))) throw DomainError("norm scale zeta must be positive");
        if (weights_.size() > 0 && !(weights_.array() > Scalar(0)).all())
            throw DomainError("anisotropic norm weights must be positive");
    }

    Scalar zeta() const { return zeta_; }
    const VectorX<Scalar>& weights() const { return weights_; }
    bool isotropic() const { return weights_.size() == 0; }

    // Weighted 2-norm of the difference, without the zeta factor.
    template <typename A, typename B>
    Scalar unscaled_distance(const Eigen::MatrixBase<A>& y, const Eigen::MatrixBase<B>& y2) const {
        if (y.size() != y2.size()) throw DomainError("kernel arguments differ in dimension");
        if (isotropic()) return (y - y2).norm();
        if (weights_.size() != y.size()) throw DomainError("norm weight count does not match point dimension");
        return (y - y2).cwiseProduct(weights_).norm();
    }

    template <typename A, typename B>
    Scalar distance(const Eigen::MatrixBase<A>& y, const Eigen::MatrixBase<B>& y2) const {
        return zeta_ * unscaled_distance(y, y2);
    }

private:
    Scalar zeta_ = Scalar(1);
    VectorX<Scalar> weights_;
};

enum class KernelFamily {
    gaussian,
    wendland,
    matern12, // beta = (D+1)/2: exp(-r)
    matern32, // beta = (D+3)/2: (1+r) exp(-r)
};

/// A radial kernel k(y, y') = phi(||y - y'||) together with its norm.
///
/// Wendland kernels phi_{D,k} are the minimal-degree compactly supported
/// functions with support radius one in the scaled norm, normalized to
/// phi(0) = 1. The two Matern variants are the closed forms for half-integer
/// smoothness, without the dimension-dependent constant.
template <typename Scalar = double>
class KernelSpec {
public:
    static KernelSpec gaussian(Scalar epsilon, NormSpec<Scalar> norm = {}) {
        if (!(epsilon > Scalar(0))) throw DomainError("Gaussian shape parameter must be positive");
        KernelSpec spec(KernelFamily::gaussian, std::move(norm));
        spec.epsilon_ = epsilon;
        return spec;
    }

    static KernelSpec wendland(int space_dims, int smoothness, NormSpec<Scalar> norm = {}) {
        if (space_dims < 1) throw DomainError("Wendland dimension must be >= 1");
        if (smoothness < 0 || smoothness > 3) throw DomainError("Wendland smoothness k must be in 0..3");
        KernelSpec spec(KernelFamily::wendland, std::move(norm));
        spec.wendland_dims_ = space_dims;
        spec.wendland_k_ = smoothness;
        spec.init_wendland();
        return spec;
    }

    static KernelSpec matern12(NormSpec<Scalar> norm = {}) { return KernelSpec(KernelFamily::matern12, std::move(norm)); }
    static KernelSpec matern32(NormSpec<Scalar> norm = {}) { return KernelSpec(KernelFamily::matern32, std::move(norm)); }

    KernelFamily family() const { return family_; }
    const NormSpec<Scalar>& norm() const { return norm_; }
    Scalar epsilon() const { return epsilon_; }
    int wendland_dims() const { return wendland_dims_; }
    int wendland_k() const { return wendland_k_; }

    // Config-file name: gaussian, wendland0..wendland3, matern12, matern32.
    std::string name() const {
        switch (family_) {
        case KernelFamily::gaussian: return "gaussian";
        case KernelFamily::wendland: return "wendland" + std::to_string(wendland_k_);
        case KernelFamily::matern12: return "matern12";
        case KernelFamily::matern32: return "matern32";
        }
        return "unknown";
    }

    // Support radius in the unscaled weighted norm; infinite for global kernels.
    Scalar support_radius() const {
        if (family_ == KernelFamily::wendland) return Scalar(1) / norm_.zeta();
        return std::numeric_limits<Scalar>::infinity();
    }

    /// Radial profile phi at scaled distance r >= 0.
    Scalar profile(Scalar r) const {
        using std::exp;
        switch (family_) {
        case KernelFamily::gaussian: {
            const Scalar t = epsilon_ * r;
            return exp(-t * t);
        }
        case KernelFamily::wendland: return wendland_profile(r);
        case KernelFamily::matern12: return exp(-r);
        case KernelFamily::matern32: return (Scalar(1) + r) * exp(-r);
        }
        return Scalar(0);
    }

    template <typename A, typename B>
    Scalar operator()(const Eigen::MatrixBase<A>& y, const Eigen::MatrixBase<B>& y2) const {
        const Scalar s = norm_.unscaled_distance(y, y2);
        if (family_ == KernelFamily::gaussian) {
            // epsilon and zeta enter as one product so Gaussian(eps) at scale zeta
            // and Gaussian(eps*zeta) at unit scale agree bit for bit.
            using std::exp;
            const Scalar t = (epsilon_ * norm_.zeta()) * s;
            return exp(-t * t);
        }
        return profile(norm_.zeta() * s);
    }

    // Value on the diagonal of any Gram matrix.
    Scalar value_at_zero() const { return profile(Scalar(0)); }

private:
    KernelSpec(KernelFamily family, NormSpec<Scalar> norm) : family_(family), norm_(std::move(norm)) {}

    void init_wendland() {
        const int l = wendland_dims_ / 2 + wendland_k_ + 1;
        const Scalar L = static_cast<Scalar>(l);
        coeffs_.fill(Scalar(0));
        switch (wendland_k_) {
        case 0:
            power_ = l;
            coeffs_[0] = 1;
            break;
        case 1:
            power_ = l + 1;
            coeffs_[0] = 1;
            coeffs_[1] = L + 1;
            break;
        case 2:
            power_ = l + 2;
            coeffs_[0] = 3;
            coeffs_[1] = 3 * L + 6;
            coeffs_[2] = L * L + 4 * L + 3;
            break;
        case 3:
            power_ = l + 3;
            coeffs_[0] = 15;
            coeffs_[1] = 15 * L + 45;
            coeffs_[2] = 6 * L * L + 36 * L + 45;
            coeffs_[3] = L * L * L + 9 * L * L + 23 * L + 15;
            break;
        }
        const Scalar c0 = coeffs_[0];
        for (auto& c : coeffs_) c /= c0;
    }

    Scalar wendland_profile(Scalar r) const {
        if (!(r < Scalar(1))) return Scalar(0);
        const Scalar t = Scalar(1) - r;
        Scalar tp = Scalar(1);
        for (int i = 0; i < power_; ++i) tp *= t;
        Scalar poly = coeffs_[static_cast<std::size_t>(wendland_k_)];
        for (int i = wendland_k_ - 1; i >= 0; --i) poly = poly * r + coeffs_[static_cast<std::size_t>(i)];
        return tp * poly;
    }

    KernelFamily family_;
    NormSpec<Scalar> norm_;
    Scalar epsilon_ = Scalar(1);
    int wendland_dims_ = 0;
    int wendland_k_ = 0;
    int power_ = 0;
    std::array<Scalar, 4> coeffs_{};
};

/// Builds a kernel from its config-file name. Wendland kernels take the
/// space dimension D from `space_dims`.
template <typename Scalar = double>
KernelSpec<Scalar> make_kernel(std::string_view name, int space_dims, Scalar epsilon, NormSpec<Scalar> norm) {
    if (name == "gaussian") return KernelSpec<Scalar>::gaussian(epsilon, std::move(norm));
    if (name == "matern12") return KernelSpec<Scalar>::matern12(std::move(norm));
    if (name == "matern32" || name == "matern") return KernelSpec<Scalar>::matern32(std::move(norm));
    if (name.size() == 9 && name.substr(0, 8) == "wendland" && name[8] >= '0' && name[8] <= '3')
        return KernelSpec<Scalar>::wendland(space_dims, name[8] - '0', std::move(norm));
    throw DomainError("unknown kernel name '" + std::string(name) + "'");
}

template <typename Scalar, typename A, typename B>
Scalar kernel_eval(const KernelSpec<Scalar>& spec, const Eigen::MatrixBase<A>& y, const Eigen::MatrixBase<B>& y2) {
    return spec(y, y2);
}

/// sum_j sum_k alpha_j alpha_k k(y_j, y_k). Positive for distinct points and
/// nonzero alpha when the kernel is strictly positive definite.
template <typename Scalar, typename Derived>
Scalar quadratic_form(const KernelSpec<Scalar>& spec, const CollocationSet<Scalar>& points,
                      const Eigen::MatrixBase<Derived>& alpha) {
    if (alpha.size() != points.size()) throw DomainError("coefficient count does not match point count");
    Scalar sum = 0;
    for (Eigen::Index j = 0; j < points.size(); ++j) {
        Scalar row = 0;
        for (Eigen::Index k = 0; k < points.size(); ++k) row += alpha(k) * spec(points.point(j), points.point(k));
        sum += alpha(j) * row;
    }
    return sum;
}

} // namespace ksc

#endif // KSC_KERNELS_HPP
