#pragma once

// Dense polynomial helpers. Coefficients are stored in descending powers,
// p(x) = p[0] x^n + ... + p[n].

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>

namespace sea {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

namespace poly {

/// Drops leading zeros; the zero polynomial is returned as [0].
template <typename Derived>
Vec<typename Derived::Scalar> trim(const Eigen::MatrixBase<Derived>& p)
{
    using Scalar = typename Derived::Scalar;
    Eigen::Index first = 0;
    while (first < p.size() && p(first) == Scalar(0))
        ++first;
    if (first == p.size())
        return Vec<Scalar>::Zero(1);
    return p.tail(p.size() - first);
}

template <typename Derived>
bool is_zero(const Eigen::MatrixBase<Derived>& p)
{
    return (p.array() == typename Derived::Scalar(0)).all();
}

template <typename Scalar>
Eigen::Index degree(const Vec<Scalar>& p)
{
    return trim(p).size() - 1;
}

template <typename Scalar>
Vec<Scalar> mul(const Vec<Scalar>& a, const Vec<Scalar>& b)
{
    Vec<Scalar> out = Vec<Scalar>::Zero(a.size() + b.size() - 1);
    for (Eigen::Index i = 0; i < a.size(); ++i)
        out.segment(i, b.size()) += a(i) * b;
    return out;
}

template <typename Scalar>
Vec<Scalar> add(const Vec<Scalar>& a, const Vec<Scalar>& b)
{
    const Eigen::Index n = std::max(a.size(), b.size());
    Vec<Scalar> out = Vec<Scalar>::Zero(n);
    out.tail(a.size()) += a;
    out.tail(b.size()) += b;
    return trim(out);
}

/// Horner evaluation at a (possibly complex) point.
template <typename Scalar, typename Point>
Point eval(const Vec<Scalar>& p, Point x)
{
    Point acc(0);
    for (Eigen::Index i = 0; i < p.size(); ++i)
        acc = acc * x + Point(p(i));
    return acc;
}

/// Sum of |p_k| |x|^k; the natural scale for judging whether p(x) vanished.
template <typename Scalar>
Scalar eval_scale(const Vec<Scalar>& p, Scalar abs_x)
{
    Scalar acc(0);
    for (Eigen::Index i = 0; i < p.size(); ++i)
        acc = acc * abs_x + std::abs(p(i));
    return acc;
}

/// Roots through the eigenvalues of the companion matrix.
template <typename Scalar>
Vec<std::complex<Scalar>> roots(const Vec<Scalar>& p_in)
{
    const Vec<Scalar> p = trim(p_in);
    const Eigen::Index n = p.size() - 1;
    if (n < 1)
        return {};
    // Strip roots at the origin first; the companion solve is exact for those.
    Eigen::Index zeros = 0;
    while (zeros < n && p(n - zeros) == Scalar(0))
        ++zeros;
    const Eigen::Index m = n - zeros;
    Vec<std::complex<Scalar>> out(n);
    out.tail(zeros).setZero();
    if (m == 0)
        return out;
    Mat<Scalar> companion = Mat<Scalar>::Zero(m, m);
    companion.row(0) = -p.segment(1, m).transpose() / p(0);
    if (m > 1)
        companion.bottomLeftCorner(m - 1, m - 1).setIdentity();
    Eigen::EigenSolver<Mat<Scalar>> solver(companion, false);
    out.head(m) = solver.eigenvalues();
    return out;
}

/// (x + c)^k expanded.
template <typename Scalar>
Vec<Scalar> binomial_power(Scalar c, Eigen::Index k)
{
    Vec<Scalar> out = Vec<Scalar>::Ones(1);
    Vec<Scalar> factor(2);
    factor << Scalar(1), c;
    for (Eigen::Index i = 0; i < k; ++i)
        out = mul(out, factor);
    return out;
}

} // namespace poly
} // namespace sea
