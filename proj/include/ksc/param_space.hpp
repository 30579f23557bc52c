#ifndef KSC_PARAM_SPACE_HPP
#define KSC_PARAM_SPACE_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>

#include <Eigen/Core>

#include "ksc/errors.hpp"

namespace ksc {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Coprime bases for the Halton construction, one per parameter dimension.
inline constexpr std::array<std::uint64_t, 64> kHaltonBases = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,  53,
    59,  61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107, 109, 113, 127, 131,
    137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223,
    227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307, 311};

/// Axis-aligned box with independent uniform marginals on each axis.
///
/// The product density is 1/volume inside the closed box and zero outside.
template <typename Scalar = double>
class ParameterDomain {
public:
    using Vector = VectorX<Scalar>;

    ParameterDomain(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
        if (lower_.size() < 1) throw DomainError("parameter domain needs at least one dimension");
        if (lower_.size() != upper_.size()) throw DomainError("lower/upper bound dimension mismatch");
        for (Eigen::Index d = 0; d < lower_.size(); ++d) {
            if (!(lower_(d) < upper_(d)))
                throw DomainError("interval " + std::to_string(d) + " has nonpositive length");
        }
    }

    static ParameterDomain unit_cube(Eigen::Index dims) {
        return ParameterDomain(Vector::Zero(dims), Vector::Ones(dims));
    }

    // [-h, h]^dims
    static ParameterDomain symmetric(Eigen::Index dims, Scalar half_width) {
        return ParameterDomain(Vector::Constant(dims, -half_width), Vector::Constant(dims, half_width));
    }

    Eigen::Index dims() const { return lower_.size(); }
    const Vector& lower() const { return lower_; }
    const Vector& upper() const { return upper_; }
    Vector widths() const { return upper_ - lower_; }
    Scalar volume() const { return widths().prod(); }

    template <typename Derived>
    bool contains(const Eigen::MatrixBase<Derived>& y) const {
        return y.size() == dims() && (y.array() >= lower_.array()).all() && (y.array() <= upper_.array()).all();
    }

    // Affine image of a point of [0,1)^D.
    template <typename Derived>
    Vector from_unit(const Eigen::MatrixBase<Derived>& u) const {
        return lower_ + (widths().array() * u.array()).matrix();
    }

    friend bool operator==(const ParameterDomain& a, const ParameterDomain& b) {
        return a.lower_ == b.lower_ && a.upper_ == b.upper_;
    }

private:
    Vector lower_;
    Vector upper_;
};

struct HaltonSource {
    std::uint64_t start_index = 1;
    friend bool operator==(const HaltonSource&, const HaltonSource&) = default;
};

struct ExplicitSource {
    friend bool operator==(const ExplicitSource&, const ExplicitSource&) = default;
};

using PointSource = std::variant<HaltonSource, ExplicitSource>;

/// Ordered collocation points, stored one point per column (D x N).
template <typename Scalar = double>
class CollocationSet {
public:
    using Matrix = MatrixX<Scalar>;

    CollocationSet() = default;
    explicit CollocationSet(Matrix points, PointSource source = ExplicitSource{})
        : points_(std::move(points)), source_(source) {}

    Eigen::Index size() const { return points_.cols(); }
    Eigen::Index dims() const { return points_.rows(); }
    bool empty() const { return points_.cols() == 0; }

    auto point(Eigen::Index i) const { return points_.col(i); }
    const Matrix& matrix() const { return points_; }
    const PointSource& source() const { return source_; }

    // First n points. Halton sets keep their provenance since a prefix of a
    // Halton run is the Halton run of the shorter length.
    CollocationSet prefix(Eigen::Index n) const {
        if (n < 0 || n > size()) throw DomainError("prefix length exceeds collocation set size");
        return CollocationSet(points_.leftCols(n), source_);
    }

private:
    Matrix points_;
    PointSource source_ = ExplicitSource{};
};

/// R-adic radical inverse of i.
///
/// The digit reversal is carried out in integers and divided once, so the
/// result is the correctly rounded value whenever R^(digits of i) < 2^53.
/// Larger inputs fall back to floating accumulation.
template <typename Scalar = double>
Scalar radical_inverse(std::uint64_t i, std::uint64_t base) {
    if (i == 0) throw DomainError("radical inverse index must be >= 1");
    if (base < 2) throw DomainError("radical inverse base must be >= 2");

    constexpr std::uint64_t kExactLimit = std::uint64_t{1} << std::numeric_limits<double>::digits;
    std::uint64_t reversed = 0;
    std::uint64_t denom = 1;
    std::uint64_t n = i;
    while (n > 0 && denom <= kExactLimit / base) {
        reversed = reversed * base + n % base;
        denom *= base;
        n /= base;
    }
    if (n == 0) return static_cast<Scalar>(reversed) / static_cast<Scalar>(denom);

    Scalar value = static_cast<Scalar>(reversed) / static_cast<Scalar>(denom);
    Scalar scale = Scalar(1) / static_cast<Scalar>(denom);
    const Scalar inv_base = Scalar(1) / static_cast<Scalar>(base);
    while (n > 0) {
        scale *= inv_base;
        value += static_cast<Scalar>(n % base) * scale;
        n /= base;
    }
    // Rounding can reach 1 for indices near 2^64.
    return value < Scalar(1) ? value : Scalar(1) - std::numeric_limits<Scalar>::epsilon() / 2;
}

/// Halton points with indices start_index .. start_index+N-1, bases equal to
/// the first D primes, mapped affinely onto the domain.
template <typename Scalar>
CollocationSet<Scalar> halton_points(const ParameterDomain<Scalar>& domain, Eigen::Index count,
                                     std::uint64_t start_index = 1) {
    const Eigen::Index dims = domain.dims();
    if (dims > static_cast<Eigen::Index>(kHaltonBases.size()))
        throw DomainError("Halton sequence supports at most " + std::to_string(kHaltonBases.size()) +
                          " dimensions, got " + std::to_string(dims));
    if (count < 0) throw DomainError("negative point count");
    if (start_index == 0) throw DomainError("Halton start index must be >= 1");

    MatrixX<Scalar> pts(dims, count);
    VectorX<Scalar> unit(dims);
    for (Eigen::Index i = 0; i < count; ++i) {
        const auto index = start_index + static_cast<std::uint64_t>(i);
        for (Eigen::Index d = 0; d < dims; ++d)
            unit(d) = radical_inverse<Scalar>(index, kHaltonBases[static_cast<std::size_t>(d)]);
        pts.col(i) = domain.from_unit(unit);
    }
    return CollocationSet<Scalar>(std::move(pts), HaltonSource{start_index});
}

template <typename Scalar, typename Derived>
Scalar density_at(const ParameterDomain<Scalar>& domain, const Eigen::MatrixBase<Derived>& y) {
    if (!domain.contains(y)) return Scalar(0);
    return Scalar(1) / domain.volume();
}

} // namespace ksc

#endif // KSC_PARAM_SPACE_HPP
