#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace infinitas {

using Exponent = std::vector<int>;

/// Largest exponent accepted per variable, both in literals and after expansion.
inline constexpr int kMaxExponent = 30;

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t position)
        : std::runtime_error(what + " at position " + std::to_string(position)),
          position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// Value, gradient and Hessian of a polynomial at a point.
struct Jet2 {
    Eigen::VectorXd point;
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;
};

/// Sparse multivariate polynomial with real coefficients over a fixed, ordered
/// list of variable names. Terms with zero coefficient are never stored.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<std::string> variables);

    static Polynomial constant(std::vector<std::string> variables, double c);
    static Polynomial variable(std::vector<std::string> variables, std::size_t index);

    const std::vector<std::string>& variables() const noexcept { return variables_; }
    std::size_t arity() const noexcept { return variables_.size(); }
    const std::map<Exponent, double>& terms() const noexcept { return terms_; }

    /// Adds c * x^e to the polynomial, dropping the term if it cancels to zero.
    void add_term(const Exponent& e, double c);

    bool is_zero() const noexcept { return terms_.empty(); }
    bool is_constant() const;
    int degree() const;
    double coefficient(const Exponent& e) const;
    /// Sum of absolute coefficients; a crude scale for tolerances.
    double l1_norm() const;

    double operator()(std::span<const double> x) const;
    double operator()(const Eigen::VectorXd& x) const {
        return (*this)(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    }

    Polynomial& operator+=(const Polynomial& other);
    Polynomial& operator-=(const Polynomial& other);
    Polynomial& operator*=(double s);
    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
    friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
    Polynomial operator-() const { return *this * -1.0; }
    Polynomial pow(int k) const;

    /// Drops terms whose magnitude is at most `threshold`.
    void prune(double threshold);

    /// Canonical text form, parseable by parse_polynomial with the same variables.
    std::string to_string() const;

    friend bool operator==(const Polynomial& a, const Polynomial& b) {
        return a.variables_ == b.variables_ && a.terms_ == b.terms_;
    }

private:
    void check_compatible(const Polynomial& other) const;

    std::vector<std::string> variables_;
    std::map<Exponent, double> terms_;
};

/// Parses an expression over +, -, *, / (by constants only), ^ (non-negative
/// integer literal), parentheses, decimal numbers and declared variable names.
/// Throws ParseError on any violation.
Polynomial parse_polynomial(const std::string& text, const std::vector<std::string>& variables);

/// Exact formal partial derivative with respect to variable `var`.
Polynomial differentiate(const Polynomial& p, std::size_t var);

/// Value, gradient and Hessian at `point`. Throws std::invalid_argument on a
/// dimension mismatch.
Jet2 evaluate_jet(const Polynomial& p, const Eigen::VectorXd& point);

/// Gradient only; the hot path of the optimizers and the tracer.
Eigen::VectorXd evaluate_gradient(const Polynomial& p, const Eigen::VectorXd& point);

/// Substitutes x = basis * u, basis an n x l matrix with orthonormal columns.
/// The result is a polynomial in fresh variables u1..ul; an identically zero
/// result means the plane lies in the zero set (callers flag it). Throws
/// std::invalid_argument when the columns are not orthonormal to 1e-12.
Polynomial restrict_to_plane(const Polynomial& p, const Eigen::MatrixXd& basis);

/// Substitutes only the first basis.rows() variables, keeping the remaining
/// ones (parameters) as they are. Used for sections of families in x-space.
Polynomial restrict_leading_variables(const Polynomial& p, const Eigen::MatrixXd& basis);

/// Standard variable names: prefix1..prefixN.
std::vector<std::string> numbered_variables(const std::string& prefix, std::size_t count);

}  // namespace infinitas
