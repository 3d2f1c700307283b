#include "structhinf/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "structhinf/errors.hpp"

namespace structhinf {

struct Expr::Node {
    Kind kind = Kind::Constant;
    double value = 0.0;
    std::size_t index = 0;
    int exponent = 0;
    std::shared_ptr<const Node> a;
    std::shared_ptr<const Node> b;
    std::vector<std::size_t> deps;
};

namespace {

std::vector<std::size_t> merge_deps(const std::vector<std::size_t>& x, const std::vector<std::size_t>& y) {
    std::vector<std::size_t> out;
    out.reserve(x.size() + y.size());
    std::set_union(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(out));
    return out;
}

double down(double x) { return std::nextafter(x, -std::numeric_limits<double>::infinity()); }
double up(double x) { return std::nextafter(x, std::numeric_limits<double>::infinity()); }

Interval widen(double lo, double hi) { return {down(lo), up(hi)}; }

Interval imul(const Interval& x, const Interval& y) {
    const double p[4] = {x.lo * y.lo, x.lo * y.hi, x.hi * y.lo, x.hi * y.hi};
    return widen(*std::min_element(p, p + 4), *std::max_element(p, p + 4));
}

Interval ipow(const Interval& x, int n) {
    if (n == 0) return {1.0, 1.0};
    if (n < 0) {
        if (x.contains(0.0)) throw ValidationError("negative power of a base that may vanish on the parameter box");
        const Interval p = ipow(x, -n);
        return widen(1.0 / p.hi, 1.0 / p.lo);
    }
    const double a = std::pow(x.lo, n);
    const double b = std::pow(x.hi, n);
    if (n % 2 == 1) return widen(a, b);
    if (x.contains(0.0)) return widen(0.0, std::max(a, b));
    return widen(std::min(a, b), std::max(a, b));
}

// Range of sin over [lo, hi]; extremes at pi/2 + 2k pi (max) and -pi/2 + 2k pi (min).
Interval isin_shifted(double lo, double hi, double phase) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (!(hi - lo < two_pi)) return {-1.0, 1.0};
    auto f = [phase](double t) { return std::sin(t + phase); };
    double mn = std::min(f(lo), f(hi));
    double mx = std::max(f(lo), f(hi));
    auto hits = [&](double target) {
        const double k = std::ceil((lo + phase - target) / two_pi - 1e-12);
        return target + k * two_pi <= hi + phase + 1e-12;
    };
    if (hits(std::numbers::pi / 2)) mx = 1.0;
    if (hits(-std::numbers::pi / 2)) mn = -1.0;
    return {std::max(-1.0, down(mn)), std::min(1.0, up(mx))};
}

}  // namespace

Expr::Expr() : Expr(constant(0.0)) {}

Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr Expr::constant(double value) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Constant;
    n->value = value;
    return Expr(std::move(n));
}

Expr Expr::param(std::size_t index) {
    auto n = std::make_shared<Node>();
    n->kind = Kind::Param;
    n->index = index;
    n->deps = {index};
    return Expr(std::move(n));
}

Expr operator+(const Expr& a, const Expr& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() + b.value());
    auto n = std::make_shared<Expr::Node>();
    n->kind = Expr::Kind::Add;
    n->a = a.node_;
    n->b = b.node_;
    n->deps = merge_deps(a.node_->deps, b.node_->deps);
    return Expr(std::move(n));
}

Expr operator-(const Expr& a, const Expr& b) {
    if (b.is_zero()) return a;
    if (a.is_zero()) return -b;
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() - b.value());
    auto n = std::make_shared<Expr::Node>();
    n->kind = Expr::Kind::Sub;
    n->a = a.node_;
    n->b = b.node_;
    n->deps = merge_deps(a.node_->deps, b.node_->deps);
    return Expr(std::move(n));
}

Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_zero() || b.is_zero()) return Expr::constant(0.0);
    if (a.is_constant() && a.value() == 1.0) return b;
    if (b.is_constant() && b.value() == 1.0) return a;
    if (a.is_constant() && b.is_constant()) return Expr::constant(a.value() * b.value());
    auto n = std::make_shared<Expr::Node>();
    n->kind = Expr::Kind::Mul;
    n->a = a.node_;
    n->b = b.node_;
    n->deps = merge_deps(a.node_->deps, b.node_->deps);
    return Expr(std::move(n));
}

Expr operator/(const Expr& a, const Expr& b) {
    if (b.is_constant() && b.value() == 1.0) return a;
    if (a.is_constant() && b.is_constant() && b.value() != 0.0) return Expr::constant(a.value() / b.value());
    // 0/b stays a node so that the box check still sees the denominator.
    auto n = std::make_shared<Expr::Node>();
    n->kind = Expr::Kind::Div;
    n->a = a.node_;
    n->b = b.node_;
    n->deps = merge_deps(a.node_->deps, b.node_->deps);
    return Expr(std::move(n));
}

Expr operator-(const Expr& a) {
    if (a.is_constant()) return Expr::constant(-a.value());
    if (a.kind() == Expr::Kind::Neg) return Expr(a.node_->a);
    auto n = std::make_shared<Expr::Node>();
    n->kind = Expr::Kind::Neg;
    n->a = a.node_;
    n->deps = a.node_->deps;
    return Expr(std::move(n));
}

Expr Expr::pow(const Expr& base, int exponent) {
    if (exponent == 0) return constant(1.0);
    if (exponent == 1) return base;
    if (base.is_constant() && (exponent > 0 || base.value() != 0.0))
        return constant(std::pow(base.value(), exponent));
    auto n = std::make_shared<Node>();
    n->kind = Kind::Pow;
    n->a = base.node_;
    n->exponent = exponent;
    n->deps = base.node_->deps;
    return Expr(std::move(n));
}

Expr Expr::sin(const Expr& arg) {
    if (arg.is_constant()) return constant(std::sin(arg.value()));
    auto n = std::make_shared<Node>();
    n->kind = Kind::Sin;
    n->a = arg.node_;
    n->deps = arg.node_->deps;
    return Expr(std::move(n));
}

Expr Expr::cos(const Expr& arg) {
    if (arg.is_constant()) return constant(std::cos(arg.value()));
    auto n = std::make_shared<Node>();
    n->kind = Kind::Cos;
    n->a = arg.node_;
    n->deps = arg.node_->deps;
    return Expr(std::move(n));
}

Expr Expr::exp(const Expr& arg) {
    if (arg.is_constant()) return constant(std::exp(arg.value()));
    auto n = std::make_shared<Node>();
    n->kind = Kind::Exp;
    n->a = arg.node_;
    n->deps = arg.node_->deps;
    return Expr(std::move(n));
}

Expr::Kind Expr::kind() const { return node_->kind; }
double Expr::value() const { return node_->value; }
std::size_t Expr::param_index() const { return node_->index; }
int Expr::exponent() const { return node_->exponent; }

Expr Expr::with_dependencies(const std::vector<std::size_t>& extra) const {
    std::vector<std::size_t> merged = merge_deps(node_->deps, extra);
    if (merged == node_->deps) return *this;
    auto n = std::make_shared<Node>(*node_);
    n->deps = std::move(merged);
    return Expr(std::move(n));
}

const std::vector<std::size_t>& Expr::dependencies() const { return node_->deps; }

bool Expr::depends_on(std::size_t index) const {
    return std::binary_search(node_->deps.begin(), node_->deps.end(), index);
}

namespace {

double eval_node(const Expr::Node& n, std::span<const double> alpha) {
    switch (n.kind) {
    case Expr::Kind::Constant: return n.value;
    case Expr::Kind::Param: return alpha[n.index];
    case Expr::Kind::Add: return eval_node(*n.a, alpha) + eval_node(*n.b, alpha);
    case Expr::Kind::Sub: return eval_node(*n.a, alpha) - eval_node(*n.b, alpha);
    case Expr::Kind::Mul: return eval_node(*n.a, alpha) * eval_node(*n.b, alpha);
    case Expr::Kind::Div: return eval_node(*n.a, alpha) / eval_node(*n.b, alpha);
    case Expr::Kind::Neg: return -eval_node(*n.a, alpha);
    case Expr::Kind::Pow: return std::pow(eval_node(*n.a, alpha), n.exponent);
    case Expr::Kind::Sin: return std::sin(eval_node(*n.a, alpha));
    case Expr::Kind::Cos: return std::cos(eval_node(*n.a, alpha));
    case Expr::Kind::Exp: return std::exp(eval_node(*n.a, alpha));
    }
    return 0.0;
}

Interval interval_node(const Expr::Node& n, std::span<const Interval> box) {
    switch (n.kind) {
    case Expr::Kind::Constant: return {n.value, n.value};
    case Expr::Kind::Param: return box[n.index];
    case Expr::Kind::Add: {
        const Interval x = interval_node(*n.a, box), y = interval_node(*n.b, box);
        return widen(x.lo + y.lo, x.hi + y.hi);
    }
    case Expr::Kind::Sub: {
        const Interval x = interval_node(*n.a, box), y = interval_node(*n.b, box);
        return widen(x.lo - y.hi, x.hi - y.lo);
    }
    case Expr::Kind::Mul: return imul(interval_node(*n.a, box), interval_node(*n.b, box));
    case Expr::Kind::Div: {
        const Interval x = interval_node(*n.a, box), y = interval_node(*n.b, box);
        if (y.contains(0.0))
            throw ValidationError("denominator may vanish on the parameter box (image [" +
                                  std::to_string(y.lo) + ", " + std::to_string(y.hi) + "])");
        return imul(x, widen(1.0 / y.hi, 1.0 / y.lo));
    }
    case Expr::Kind::Neg: {
        const Interval x = interval_node(*n.a, box);
        return {-x.hi, -x.lo};
    }
    case Expr::Kind::Pow: return ipow(interval_node(*n.a, box), n.exponent);
    case Expr::Kind::Sin: {
        const Interval x = interval_node(*n.a, box);
        return isin_shifted(x.lo, x.hi, 0.0);
    }
    case Expr::Kind::Cos: {
        const Interval x = interval_node(*n.a, box);
        return isin_shifted(x.lo, x.hi, std::numbers::pi / 2);
    }
    case Expr::Kind::Exp: {
        const Interval x = interval_node(*n.a, box);
        return {std::max(0.0, down(std::exp(x.lo))), up(std::exp(x.hi))};
    }
    }
    return {};
}

}  // namespace

double Expr::eval(std::span<const double> alpha) const { return eval_node(*node_, alpha); }

Interval Expr::eval_interval(std::span<const Interval> box) const { return interval_node(*node_, box); }

Expr Expr::diff(std::size_t index) const {
    if (!depends_on(index)) return constant(0.0);
    const Node& n = *node_;
    const Expr a = n.a ? Expr(n.a) : Expr();
    const Expr b = n.b ? Expr(n.b) : Expr();
    switch (n.kind) {
    case Kind::Constant: return constant(0.0);
    case Kind::Param: return constant(n.index == index ? 1.0 : 0.0);
    case Kind::Add: return a.diff(index) + b.diff(index);
    case Kind::Sub: return a.diff(index) - b.diff(index);
    case Kind::Mul: return a.diff(index) * b + a * b.diff(index);
    case Kind::Div: return (a.diff(index) * b - a * b.diff(index)) / pow(b, 2);
    case Kind::Neg: return -a.diff(index);
    case Kind::Pow: return constant(n.exponent) * pow(a, n.exponent - 1) * a.diff(index);
    case Kind::Sin: return cos(a) * a.diff(index);
    case Kind::Cos: return -(sin(a) * a.diff(index));
    case Kind::Exp: return exp(a) * a.diff(index);
    }
    return constant(0.0);
}

namespace {

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void print_node(const Expr::Node& n, const std::vector<std::string>& names, std::string& out) {
    auto binary = [&](const char* op) {
        out += '(';
        print_node(*n.a, names, out);
        out += op;
        print_node(*n.b, names, out);
        out += ')';
    };
    auto call = [&](const char* fn) {
        out += fn;
        out += '(';
        print_node(*n.a, names, out);
        out += ')';
    };
    switch (n.kind) {
    case Expr::Kind::Constant:
        if (std::signbit(n.value)) {
            out += "(-" + format_number(-n.value) + ")";
        } else {
            out += format_number(n.value);
        }
        break;
    case Expr::Kind::Param: out += names.at(n.index); break;
    case Expr::Kind::Add: binary(" + "); break;
    case Expr::Kind::Sub: binary(" - "); break;
    case Expr::Kind::Mul: binary(" * "); break;
    case Expr::Kind::Div: binary(" / "); break;
    case Expr::Kind::Neg:
        out += "(-";
        print_node(*n.a, names, out);
        out += ')';
        break;
    case Expr::Kind::Pow:
        out += '(';
        print_node(*n.a, names, out);
        out += n.exponent < 0 ? "^(" + std::to_string(n.exponent) + "))" : "^" + std::to_string(n.exponent) + ")";
        break;
    case Expr::Kind::Sin: call("sin"); break;
    case Expr::Kind::Cos: call("cos"); break;
    case Expr::Kind::Exp: call("exp"); break;
    }
}

class Parser {
public:
    Parser(std::string_view src, const std::vector<std::string>& params) : src_(src), params_(params) {}

    Expr parse() {
        Expr e = expression();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError("syntax error: " + msg, pos_); }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= src_.size()) fail(std::string("expected '") + c + "' before end of input");
            fail(std::string("expected '") + c + "'");
        }
    }

    Expr expression() {
        Expr lhs = term();
        for (;;) {
            if (accept('+')) {
                lhs = lhs + term();
            } else if (accept('-')) {
                lhs = lhs - term();
            } else {
                return lhs;
            }
        }
    }

    Expr term() {
        Expr lhs = unary();
        for (;;) {
            if (accept('*')) {
                lhs = lhs * unary();
            } else if (accept('/')) {
                lhs = lhs / unary();
            } else {
                return lhs;
            }
        }
    }

    Expr unary() {
        if (accept('-')) return -unary();
        if (accept('+')) return unary();
        return power();
    }

    Expr power() {
        Expr base = primary();
        while (accept('^')) base = Expr::pow(base, integer_exponent());
        return base;
    }

    int integer_exponent() {
        const bool paren = accept('(');
        skip_ws();
        bool negative = false;
        if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) {
            negative = src_[pos_] == '-';
            ++pos_;
            skip_ws();
        }
        const std::size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (start == pos_) fail("expected integer exponent");
        if (pos_ < src_.size() && (src_[pos_] == '.' || src_[pos_] == 'e' || src_[pos_] == 'E'))
            fail("exponent must be an integer");
        int value = 0;
        const auto res = std::from_chars(src_.data() + start, src_.data() + pos_, value);
        if (res.ec != std::errc()) fail("exponent out of range");
        if (paren) expect(')');
        return negative ? -value : value;
    }

    Expr primary() {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of input");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = expression();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        fail("unexpected '" + std::string(1, c) + "'");
    }

    Expr number() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
            if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
                pos_ = p;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            }
        }
        double value = 0.0;
        const auto res = std::from_chars(src_.data() + start, src_.data() + pos_, value);
        if (res.ec != std::errc() || res.ptr != src_.data() + pos_) {
            pos_ = start;
            fail("malformed number");
        }
        return Expr::constant(value);
    }

    Expr identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
        const std::string name(src_.substr(start, pos_ - start));
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == '(') {
            Expr (*fn)(const Expr&) = nullptr;
            if (name == "sin") fn = &Expr::sin;
            else if (name == "cos") fn = &Expr::cos;
            else if (name == "exp") fn = &Expr::exp;
            else throw ParseError("unsupported function '" + name + "'", start);
            ++pos_;
            Expr arg = expression();
            expect(')');
            return fn(arg);
        }
        const auto it = std::find(params_.begin(), params_.end(), name);
        if (it == params_.end()) throw ParseError("unknown identifier '" + name + "'", start);
        seen.push_back(static_cast<std::size_t>(it - params_.begin()));
        return Expr::param(seen.back());
    }

public:
    std::vector<std::size_t> seen;  // every parameter named in the source

private:

    std::string_view src_;
    const std::vector<std::string>& params_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string Expr::to_string(const std::vector<std::string>& names) const {
    std::string out;
    print_node(*node_, names, out);
    return out;
}

Expr parse_expr(std::string_view source, const std::vector<std::string>& params) {
    Parser p(source, params);
    const Expr e = p.parse();
    std::sort(p.seen.begin(), p.seen.end());
    p.seen.erase(std::unique(p.seen.begin(), p.seen.end()), p.seen.end());
    return e.with_dependencies(p.seen);
}

void check_on_box(const Expr& e, std::span<const Interval> box) { (void)e.eval_interval(box); }

BasisSet::BasisSet(std::vector<Expr> functions, std::vector<std::string> params, BasisRole role)
    : functions_(std::move(functions)), params_(std::move(params)), role_(role) {
    derivatives_.resize(functions_.size());
    for (std::size_t l = 0; l < functions_.size(); ++l) {
        for (std::size_t d : functions_[l].dependencies()) {
            if (d >= params_.size()) throw ValidationError("basis function references an undeclared parameter");
        }
        derivatives_[l].reserve(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) derivatives_[l].push_back(functions_[l].diff(i));
    }
}

BasisSet BasisSet::parse(const std::vector<std::string>& sources, std::vector<std::string> params, BasisRole role) {
    std::vector<Expr> fns;
    fns.reserve(sources.size());
    for (std::size_t l = 0; l < sources.size(); ++l) {
        try {
            fns.push_back(parse_expr(sources[l], params));
        } catch (const ParseError& e) {
            throw ParseError(std::string(role == BasisRole::Plant ? "xi" : "eta") + "[" + std::to_string(l) +
                                 "] \"" + sources[l] + "\": " + e.what(),
                             e.position());
        }
    }
    return BasisSet(std::move(fns), std::move(params), role);
}

Eigen::VectorXd BasisSet::eval(const Eigen::VectorXd& alpha) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(functions_.size()));
    for (std::size_t l = 0; l < functions_.size(); ++l) v(static_cast<Eigen::Index>(l)) = functions_[l].eval(alpha);
    return v;
}

Eigen::MatrixXd BasisSet::jacobian(const Eigen::VectorXd& alpha) const {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(functions_.size()),
                                              static_cast<Eigen::Index>(params_.size()));
    for (std::size_t l = 0; l < functions_.size(); ++l) {
        for (std::size_t i : functions_[l].dependencies())
            j(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(i)) = derivatives_[l][i].eval(alpha);
    }
    return j;
}

void BasisSet::check_on_box(std::span<const Interval> box) const {
    for (std::size_t l = 0; l < functions_.size(); ++l) {
        try {
            structhinf::check_on_box(functions_[l], box);
        } catch (const ValidationError& e) {
            throw ValidationError(std::string(role_ == BasisRole::Plant ? "xi" : "eta") + "[" + std::to_string(l) +
                                  "] = " + functions_[l].to_string(params_) + ": " + e.what());
        }
    }
}

}  // namespace structhinf
