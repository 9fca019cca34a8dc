#include "infinitas/poly.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace infinitas {

Polynomial::Polynomial(std::vector<std::string> variables) : variables_(std::move(variables)) {}

Polynomial Polynomial::constant(std::vector<std::string> variables, double c) {
    Polynomial p(std::move(variables));
    p.add_term(Exponent(p.arity(), 0), c);
    return p;
}

Polynomial Polynomial::variable(std::vector<std::string> variables, std::size_t index) {
    Polynomial p(std::move(variables));
    if (index >= p.arity()) throw std::out_of_range("variable index out of range");
    Exponent e(p.arity(), 0);
    e[index] = 1;
    p.add_term(e, 1.0);
    return p;
}

void Polynomial::add_term(const Exponent& e, double c) {
    if (e.size() != arity()) throw std::invalid_argument("exponent length does not match variable count");
    if (c == 0.0) return;
    auto [it, inserted] = terms_.try_emplace(e, c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0.0) terms_.erase(it);
    }
}

bool Polynomial::is_constant() const {
    return terms_.empty() || (terms_.size() == 1 &&
                              std::all_of(terms_.begin()->first.begin(), terms_.begin()->first.end(),
                                          [](int k) { return k == 0; }));
}

int Polynomial::degree() const {
    int d = 0;
    for (const auto& [e, c] : terms_) {
        int t = 0;
        for (int k : e) t += k;
        d = std::max(d, t);
    }
    return terms_.empty() ? -1 : d;
}

double Polynomial::coefficient(const Exponent& e) const {
    auto it = terms_.find(e);
    return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::l1_norm() const {
    double s = 0.0;
    for (const auto& [e, c] : terms_) s += std::abs(c);
    return s;
}

double Polynomial::operator()(std::span<const double> x) const {
    if (x.size() != arity()) throw std::invalid_argument("evaluation point has wrong dimension");
    double v = 0.0;
    for (const auto& [e, c] : terms_) {
        double m = c;
        for (std::size_t i = 0; i < e.size(); ++i)
            for (int k = 0; k < e[i]; ++k) m *= x[i];
        v += m;
    }
    return v;
}

void Polynomial::check_compatible(const Polynomial& other) const {
    if (variables_ != other.variables_) throw std::invalid_argument("polynomials over different variables");
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
    check_compatible(other);
    for (const auto& [e, c] : other.terms_) add_term(e, c);
    return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
    check_compatible(other);
    for (const auto& [e, c] : other.terms_) add_term(e, -c);
    return *this;
}

Polynomial& Polynomial::operator*=(double s) {
    if (s == 0.0) {
        terms_.clear();
        return *this;
    }
    for (auto& [e, c] : terms_) c *= s;
    return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    a.check_compatible(b);
    Polynomial r(a.variables_);
    Exponent e(a.arity());
    for (const auto& [ea, ca] : a.terms_) {
        for (const auto& [eb, cb] : b.terms_) {
            for (std::size_t i = 0; i < e.size(); ++i) {
                e[i] = ea[i] + eb[i];
                if (e[i] > kMaxExponent) throw std::overflow_error("exponent overflow");
            }
            r.add_term(e, ca * cb);
        }
    }
    return r;
}

Polynomial Polynomial::pow(int k) const {
    if (k < 0) throw std::invalid_argument("negative power");
    Polynomial result = constant(variables_, 1.0);
    for (int i = 0; i < k; ++i) result = result * *this;
    return result;
}

void Polynomial::prune(double threshold) {
    std::erase_if(terms_, [threshold](const auto& kv) { return std::abs(kv.second) <= threshold; });
}

std::string Polynomial::to_string() const {
    if (terms_.empty()) return "0";
    std::ostringstream out;
    bool first = true;
    // Highest exponent vectors first reads more naturally.
    for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
        const auto& [e, c] = *it;
        std::string monomial;
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (e[i] == 0) continue;
            if (!monomial.empty()) monomial += '*';
            monomial += variables_[i];
            if (e[i] > 1) monomial += '^' + std::to_string(e[i]);
        }
        const double mag = std::abs(c);
        if (first) {
            if (c < 0) out << '-';
        } else {
            out << (c < 0 ? " - " : " + ");
        }
        first = false;
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", mag);
        if (monomial.empty()) {
            out << buf;
        } else if (mag == 1.0) {
            out << monomial;
        } else {
            out << buf << '*' << monomial;
        }
    }
    return out.str();
}

namespace {

class Parser {
public:
    Parser(const std::string& text, const std::vector<std::string>& variables)
        : text_(text), vars_(variables) {}

    Polynomial run() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
        Polynomial p = expr();
        skip_ws();
        if (pos_ != text_.size()) throw ParseError(std::string("unexpected character '") + text_[pos_] + "'", pos_);
        return p;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char ch) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ch) {
            ++pos_;
            return true;
        }
        return false;
    }

    Polynomial multiply(const Polynomial& a, const Polynomial& b, std::size_t at) {
        try {
            return a * b;
        } catch (const std::overflow_error&) {
            throw ParseError("exponent overflow (> " + std::to_string(kMaxExponent) + ")", at);
        }
    }

    Polynomial expr() {
        Polynomial acc = term();
        for (;;) {
            if (accept('+')) {
                acc += term();
            } else if (accept('-')) {
                acc -= term();
            } else {
                return acc;
            }
        }
    }

    Polynomial term() {
        Polynomial acc = unary();
        for (;;) {
            skip_ws();
            const std::size_t at = pos_;
            if (accept('*')) {
                acc = multiply(acc, unary(), at);
            } else if (accept('/')) {
                Polynomial d = unary();
                if (!d.is_constant()) throw ParseError("division by a non-constant expression", at);
                const double c = d.coefficient(Exponent(vars_.size(), 0));
                if (c == 0.0) throw ParseError("division by zero", at);
                acc *= 1.0 / c;
            } else {
                return acc;
            }
        }
    }

    Polynomial unary() {
        if (accept('-')) return -unary();
        if (accept('+')) return unary();
        return power();
    }

    Polynomial power() {
        Polynomial base = primary();
        skip_ws();
        const std::size_t at = pos_;
        if (!accept('^')) return base;
        skip_ws();
        const std::size_t digits_at = pos_;
        long k = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            k = k * 10 + (text_[pos_] - '0');
            if (k > kMaxExponent) throw ParseError("exponent overflow (> " + std::to_string(kMaxExponent) + ")", digits_at);
            ++pos_;
        }
        if (pos_ == digits_at) throw ParseError("expected a non-negative integer exponent", digits_at);
        try {
            return base.pow(static_cast<int>(k));
        } catch (const std::overflow_error&) {
            throw ParseError("exponent overflow (> " + std::to_string(kMaxExponent) + ")", at);
        }
    }

    Polynomial primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
        const char ch = text_[pos_];
        if (ch == '(') {
            ++pos_;
            Polynomial inner = expr();
            if (!accept(')')) throw ParseError("expected ')'", pos_);
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') return identifier();
        throw ParseError(std::string("unexpected character '") + ch + "'", pos_);
    }

    Polynomial number() {
        const std::size_t start = pos_;
        bool digits = false;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_, digits = true;
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_, digits = true;
        }
        if (!digits) throw ParseError("malformed number", start);
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t save = pos_++;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            const std::size_t exp_digits = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            if (pos_ == exp_digits) pos_ = save;  // 'e' belongs to something else
        }
        const std::string lexeme = text_.substr(start, pos_ - start);
        const double value = std::strtod(lexeme.c_str(), nullptr);
        if (!std::isfinite(value)) throw ParseError("number out of range", start);
        return Polynomial::constant(vars_, value);
    }

    Polynomial identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string name = text_.substr(start, pos_ - start);
        auto it = std::find(vars_.begin(), vars_.end(), name);
        if (it == vars_.end()) throw ParseError("undeclared variable '" + name + "'", start);
        return Polynomial::variable(vars_, static_cast<std::size_t>(it - vars_.begin()));
    }

    const std::string& text_;
    const std::vector<std::string>& vars_;
    std::size_t pos_ = 0;
};

void check_orthonormal(const Eigen::MatrixXd& basis) {
    if (basis.cols() == 0 || basis.cols() > basis.rows())
        throw std::invalid_argument("plane basis must have 1..n columns");
    const Eigen::MatrixXd gram = basis.transpose() * basis;
    const double err = (gram - Eigen::MatrixXd::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff();
    if (!(err <= 1e-12)) throw std::invalid_argument("plane basis is not orthonormal");
}

Polynomial substitute_linear(const Polynomial& p, const std::vector<Polynomial>& images,
                             std::vector<std::string> new_vars) {
    std::vector<std::vector<Polynomial>> powers(images.size());
    Polynomial result(new_vars);
    for (const auto& [e, c] : p.terms()) {
        Polynomial m = Polynomial::constant(new_vars, c);
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (e[i] == 0) continue;
            auto& cache = powers[i];
            if (cache.empty()) cache.push_back(Polynomial::constant(new_vars, 1.0));
            while (static_cast<int>(cache.size()) <= e[i]) cache.push_back(cache.back() * images[i]);
            m = m * cache[static_cast<std::size_t>(e[i])];
        }
        result += m;
    }
    // Cancellation residue from floating-point substitution.
    result.prune(1e-14 * p.l1_norm());
    return result;
}

}  // namespace

Polynomial parse_polynomial(const std::string& text, const std::vector<std::string>& variables) {
    return Parser(text, variables).run();
}

Polynomial differentiate(const Polynomial& p, std::size_t var) {
    if (var >= p.arity()) throw std::out_of_range("differentiation variable out of range");
    Polynomial d(p.variables());
    for (const auto& [e, c] : p.terms()) {
        if (e[var] == 0) continue;
        Exponent f = e;
        f[var] -= 1;
        d.add_term(f, c * e[var]);
    }
    return d;
}

Jet2 evaluate_jet(const Polynomial& p, const Eigen::VectorXd& point) {
    const auto n = static_cast<Eigen::Index>(p.arity());
    if (point.size() != n) throw std::invalid_argument("jet point has wrong dimension");
    Jet2 jet;
    jet.point = point;
    jet.gradient = Eigen::VectorXd::Zero(n);
    jet.hessian = Eigen::MatrixXd::Zero(n, n);
    std::vector<double> pw(static_cast<std::size_t>(n)), d1(pw.size()), d2(pw.size());
    for (const auto& [e, c] : p.terms()) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const int k = e[static_cast<std::size_t>(i)];
            const double x = point[i];
            double a = 1.0, b = 0.0, cc = 0.0;
            for (int j = 0; j < k; ++j) {
                cc = cc * x + 2.0 * b;
                b = b * x + a;
                a *= x;
            }
            pw[static_cast<std::size_t>(i)] = a;  // x^k
            d1[static_cast<std::size_t>(i)] = b;  // k x^(k-1)
            d2[static_cast<std::size_t>(i)] = cc; // k(k-1) x^(k-2)
        }
        auto product_except = [&](Eigen::Index skip1, Eigen::Index skip2) {
            double m = c;
            for (Eigen::Index i = 0; i < n; ++i)
                if (i != skip1 && i != skip2) m *= pw[static_cast<std::size_t>(i)];
            return m;
        };
        jet.value += product_except(-1, -1);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (e[static_cast<std::size_t>(j)] == 0) continue;
            const double rest = product_except(j, -1);
            jet.gradient[j] += rest * d1[static_cast<std::size_t>(j)];
            jet.hessian(j, j) += rest * d2[static_cast<std::size_t>(j)];
            for (Eigen::Index k = j + 1; k < n; ++k) {
                if (e[static_cast<std::size_t>(k)] == 0) continue;
                const double h = product_except(j, k) * d1[static_cast<std::size_t>(j)] * d1[static_cast<std::size_t>(k)];
                jet.hessian(j, k) += h;
                jet.hessian(k, j) += h;
            }
        }
    }
    return jet;
}

Eigen::VectorXd evaluate_gradient(const Polynomial& p, const Eigen::VectorXd& point) {
    const auto n = static_cast<Eigen::Index>(p.arity());
    if (point.size() != n) throw std::invalid_argument("gradient point has wrong dimension");
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    for (const auto& [e, c] : p.terms()) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const int kj = e[static_cast<std::size_t>(j)];
            if (kj == 0) continue;
            double m = c * kj;
            for (Eigen::Index i = 0; i < n; ++i) {
                const int k = e[static_cast<std::size_t>(i)] - (i == j ? 1 : 0);
                for (int r = 0; r < k; ++r) m *= point[i];
            }
            g[j] += m;
        }
    }
    return g;
}

std::vector<std::string> numbered_variables(const std::string& prefix, std::size_t count) {
    std::vector<std::string> v;
    v.reserve(count);
    for (std::size_t i = 1; i <= count; ++i) v.push_back(prefix + std::to_string(i));
    return v;
}

Polynomial restrict_to_plane(const Polynomial& p, const Eigen::MatrixXd& basis) {
    if (static_cast<std::size_t>(basis.rows()) != p.arity())
        throw std::invalid_argument("plane basis rows must equal the variable count");
    check_orthonormal(basis);
    auto uvars = numbered_variables("u", static_cast<std::size_t>(basis.cols()));
    std::vector<Polynomial> images;
    for (Eigen::Index i = 0; i < basis.rows(); ++i) {
        Polynomial li(uvars);
        for (Eigen::Index j = 0; j < basis.cols(); ++j) {
            Exponent e(uvars.size(), 0);
            e[static_cast<std::size_t>(j)] = 1;
            li.add_term(e, basis(i, j));
        }
        images.push_back(std::move(li));
    }
    return substitute_linear(p, images, uvars);
}

Polynomial restrict_leading_variables(const Polynomial& p, const Eigen::MatrixXd& basis) {
    const auto n = static_cast<std::size_t>(basis.rows());
    if (n > p.arity()) throw std::invalid_argument("plane basis has more rows than variables");
    check_orthonormal(basis);
    const auto l = static_cast<std::size_t>(basis.cols());
    auto vars = numbered_variables("u", l);
    for (std::size_t i = n; i < p.arity(); ++i) vars.push_back(p.variables()[i]);
    std::vector<Polynomial> images;
    for (std::size_t i = 0; i < p.arity(); ++i) {
        Polynomial li(vars);
        if (i < n) {
            for (std::size_t j = 0; j < l; ++j) {
                Exponent e(vars.size(), 0);
                e[j] = 1;
                li.add_term(e, basis(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            }
        } else {
            li = Polynomial::variable(vars, l + (i - n));
        }
        images.push_back(std::move(li));
    }
    return substitute_linear(p, images, vars);
}

}  // namespace infinitas
