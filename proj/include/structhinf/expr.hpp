#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace structhinf {

/// Closed interval with outward-rounded arithmetic.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Immutable scalar expression over a parameter vector.
///
/// Supported nodes: numeric literal, parameter reference, + - * /, unary minus,
/// integer power, sin, cos, exp. Every node is continuously differentiable
/// wherever denominators stay away from zero, which `check_on_box` certifies.
class Expr {
public:
    enum class Kind { Constant, Param, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Exp };

    Expr();  // the constant 0

    static Expr constant(double value);
    static Expr param(std::size_t index);

    friend Expr operator+(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a, const Expr& b);
    friend Expr operator*(const Expr& a, const Expr& b);
    friend Expr operator/(const Expr& a, const Expr& b);
    friend Expr operator-(const Expr& a);
    static Expr pow(const Expr& base, int exponent);
    static Expr sin(const Expr& arg);
    static Expr cos(const Expr& arg);
    static Expr exp(const Expr& arg);

    Kind kind() const;
    double value() const;            // Constant only
    std::size_t param_index() const; // Param only
    int exponent() const;            // Pow only

    bool is_constant() const { return kind() == Kind::Constant; }
    bool is_zero() const { return is_constant() && value() == 0.0; }

    double eval(std::span<const double> alpha) const;
    double eval(const Eigen::VectorXd& alpha) const {
        return eval(std::span<const double>(alpha.data(), static_cast<std::size_t>(alpha.size())));
    }

    /// Enclosure of the image over a box. Throws ValidationError when a
    /// denominator (or a negative power base) may vanish on the box.
    Interval eval_interval(std::span<const Interval> box) const;

    /// Exact partial derivative with respect to parameter `index`.
    Expr diff(std::size_t index) const;

    /// Sorted parameter indices referenced textually by the expression. Parsed
    /// expressions keep every name in the source even when it folds away.
    const std::vector<std::size_t>& dependencies() const;
    bool depends_on(std::size_t index) const;

    /// Fully parenthesised text that `parse_expr` maps back to the same tree.
    std::string to_string(const std::vector<std::string>& names) const;

    struct Node;  // opaque tree node

    /// Same expression with `extra` added to its dependency set.
    Expr with_dependencies(const std::vector<std::size_t>& extra) const;

private:
    explicit Expr(std::shared_ptr<const Node> node);
    std::shared_ptr<const Node> node_;
};

/// Parses `source` against the declared parameter names.
/// Throws ParseError (syntax, unknown identifier, unsupported function).
Expr parse_expr(std::string_view source, const std::vector<std::string>& params);

/// Throws ValidationError if any division in `e` may divide by zero on the box.
void check_on_box(const Expr& e, std::span<const Interval> box);

enum class BasisRole { Plant, Strategy };

/// Ordered basis functions with their exact partial derivatives.
class BasisSet {
public:
    BasisSet() = default;
    BasisSet(std::vector<Expr> functions, std::vector<std::string> params, BasisRole role);

    /// Parses each source string. Throws ParseError with the function index in the message.
    static BasisSet parse(const std::vector<std::string>& sources, std::vector<std::string> params,
                          BasisRole role);

    std::size_t size() const { return functions_.size(); }
    std::size_t num_params() const { return params_.size(); }
    BasisRole role() const { return role_; }
    const std::vector<std::string>& params() const { return params_; }
    const Expr& operator[](std::size_t l) const { return functions_[l]; }
    const std::vector<Expr>& functions() const { return functions_; }
    const std::vector<std::size_t>& dependencies(std::size_t l) const {
        return functions_[l].dependencies();
    }

    Eigen::VectorXd eval(const Eigen::VectorXd& alpha) const;
    /// Row l holds the gradient of function l (size() x num_params()).
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& alpha) const;
    const Expr& derivative(std::size_t l, std::size_t i) const { return derivatives_[l][i]; }

    void check_on_box(std::span<const Interval> box) const;

private:
    std::vector<Expr> functions_;
    std::vector<std::vector<Expr>> derivatives_;
    std::vector<std::string> params_;
    BasisRole role_ = BasisRole::Plant;
};

}  // namespace structhinf
