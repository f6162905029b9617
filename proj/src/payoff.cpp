#include "superhedge/payoff.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace superhedge::payoff {

namespace {

std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

NodePtr make(NodeKind kind, double value, NodePtr lhs, NodePtr rhs, std::size_t offset) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->value = value;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    n->offset = offset;
    return n;
}

// Recursive descent over the payoff grammar. Offsets are 1-based.
class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    NodePtr parse() {
        NodePtr e = expr();
        skip_ws();
        if (pos_ < text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { fail_at(pos_ + 1, msg); }

    [[noreturn]] void fail_at(std::size_t offset, const std::string& msg) const {
        throw PayoffError(PayoffError::Kind::Syntax, offset,
                          "syntax error at offset " + std::to_string(offset) + ": " + msg);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool peek(char c) {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    void expect(char c) {
        if (!peek(c)) {
            if (pos_ >= text_.size()) fail(std::string("expected '") + c + "' before end of input");
            fail(std::string("expected '") + c + "'");
        }
        ++pos_;
    }

    NodePtr expr() {
        NodePtr lhs = term();
        while (true) {
            skip_ws();
            if (pos_ >= text_.size()) return lhs;
            const char c = text_[pos_];
            if (c != '+' && c != '-') return lhs;
            const std::size_t at = ++pos_;
            NodePtr rhs = term();
            lhs = make(c == '+' ? NodeKind::Add : NodeKind::Sub, 0.0, lhs, rhs, at);
        }
    }

    NodePtr term() {
        NodePtr lhs = factor();
        while (peek('*')) {
            const std::size_t at = ++pos_;
            NodePtr rhs = factor();
            lhs = make(NodeKind::Mul, 0.0, lhs, rhs, at);
        }
        return lhs;
    }

    double number(bool allow_sign) {
        skip_ws();
        const std::size_t start = pos_;
        std::size_t end = pos_;
        if (allow_sign && end < text_.size() && (text_[end] == '-' || text_[end] == '+')) ++end;
        const std::size_t digits_from = end;
        while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
        if (end < text_.size() && text_[end] == '.') {
            ++end;
            while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
        }
        if (end == digits_from || (end == digits_from + 1 && text_[digits_from] == '.'))
            fail("expected a number");
        if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
            std::size_t exp = end + 1;
            if (exp < text_.size() && (text_[exp] == '-' || text_[exp] == '+')) ++exp;
            if (exp < text_.size() && std::isdigit(static_cast<unsigned char>(text_[exp]))) {
                end = exp;
                while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
            }
        }
        std::string_view lit = text_.substr(start, end - start);
        if (!lit.empty() && lit.front() == '+') lit.remove_prefix(1);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(lit.data(), lit.data() + lit.size(), v);
        if (ec != std::errc() || ptr != lit.data() + lit.size()) fail_at(start + 1, "bad number literal");
        if (!std::isfinite(v)) fail_at(start + 1, "number out of range");
        pos_ = end;
        return v;
    }

    NodePtr factor() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const std::size_t at = pos_ + 1;
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return make(NodeKind::Const, number(false), nullptr, nullptr, at);
        }
        if (c == '(') {
            ++pos_;
            NodePtr e = expr();
            expect(')');
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t end = pos_;
            while (end < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_'))
                ++end;
            const std::string_view word = text_.substr(pos_, end - pos_);
            pos_ = end;
            if (word == "x") return make(NodeKind::Var, 0.0, nullptr, nullptr, at);
            if (word == "max" || word == "min") {
                expect('(');
                NodePtr a = expr();
                expect(',');
                NodePtr b = expr();
                expect(')');
                return make(word == "max" ? NodeKind::Max : NodeKind::Min, 0.0, a, b, at);
            }
            if (word == "pos") {
                expect('(');
                NodePtr a = expr();
                expect(')');
                return make(NodeKind::Pos, 0.0, a, nullptr, at);
            }
            if (word == "ind_gt" || word == "ind_ge") {
                expect('(');
                NodePtr a = expr();
                expect(',');
                const double level = number(true);
                expect(')');
                return make(word == "ind_gt" ? NodeKind::IndGt : NodeKind::IndGe, level, a, nullptr, at);
            }
            fail_at(at, "unknown identifier '" + std::string(word) + "'");
        }
        fail(std::string("unexpected '") + c + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

void collect_ind_ge(const Node& n, std::vector<const Node*>& out) {
    if (n.kind == NodeKind::IndGe) out.push_back(&n);
    if (n.lhs) collect_ind_ge(*n.lhs, out);
    if (n.rhs) collect_ind_ge(*n.rhs, out);
}

std::string ind_ge_warning(const Node& n) {
    std::ostringstream os;
    os << "ind_ge at offset " << n.offset << " (level " << format_number(n.value)
       << "): payoff may fail lower semicontinuity at the level; it differs from ind_gt only "
          "there and the concave envelope is unchanged";
    return os.str();
}

NodePtr rewrite_ind_ge(const NodePtr& n) {
    if (!n) return n;
    NodePtr lhs = rewrite_ind_ge(n->lhs);
    NodePtr rhs = rewrite_ind_ge(n->rhs);
    const NodeKind kind = n->kind == NodeKind::IndGe ? NodeKind::IndGt : n->kind;
    if (kind == n->kind && lhs == n->lhs && rhs == n->rhs) return n;
    return make(kind, n->value, lhs, rhs, n->offset);
}

constexpr double kNegativityTolerance = 1e-12;

}  // namespace

NodePtr constant(double c) { return make(NodeKind::Const, c, nullptr, nullptr, 0); }
NodePtr spot() { return make(NodeKind::Var, 0.0, nullptr, nullptr, 0); }

NodePtr binary(NodeKind kind, NodePtr lhs, NodePtr rhs) {
    switch (kind) {
        case NodeKind::Add:
        case NodeKind::Sub:
        case NodeKind::Mul:
        case NodeKind::Max:
        case NodeKind::Min:
            return make(kind, 0.0, std::move(lhs), std::move(rhs), 0);
        default:
            throw std::invalid_argument("binary() needs a binary node kind");
    }
}

NodePtr positive_part(NodePtr e) { return make(NodeKind::Pos, 0.0, std::move(e), nullptr, 0); }
NodePtr indicator_gt(NodePtr e, double level) { return make(NodeKind::IndGt, level, std::move(e), nullptr, 0); }
NodePtr indicator_ge(NodePtr e, double level) { return make(NodeKind::IndGe, level, std::move(e), nullptr, 0); }

PayoffError::PayoffError(Kind kind, std::size_t offset, const std::string& what, double suggested_shift)
    : std::runtime_error(what), kind_(kind), offset_(offset), suggested_shift_(suggested_shift) {}

PiecewiseAffine to_piecewise(const Node& n) {
    switch (n.kind) {
        case NodeKind::Const:
            return PiecewiseAffine::constant(n.value);
        case NodeKind::Var:
            return PiecewiseAffine::identity();
        case NodeKind::Add:
            return to_piecewise(*n.lhs) + to_piecewise(*n.rhs);
        case NodeKind::Sub:
            return to_piecewise(*n.lhs) - to_piecewise(*n.rhs);
        case NodeKind::Mul: {
            const PiecewiseAffine a = to_piecewise(*n.lhs);
            const PiecewiseAffine b = to_piecewise(*n.rhs);
            if (!a.is_piecewise_constant() && !b.is_piecewise_constant()) {
                throw PayoffError(PayoffError::Kind::NonAffineProduct, n.offset,
                                  "non-affine product at offset " + std::to_string(n.offset) + ": '" +
                                      to_string(n) +
                                      "' multiplies two spot-dependent slopes; one factor must be "
                                      "piecewise constant (a number or an indicator)");
            }
            return a * b;
        }
        case NodeKind::Max:
            return pointwise_max(to_piecewise(*n.lhs), to_piecewise(*n.rhs));
        case NodeKind::Min:
            return pointwise_min(to_piecewise(*n.lhs), to_piecewise(*n.rhs));
        case NodeKind::Pos:
            return pointwise_max(to_piecewise(*n.lhs), PiecewiseAffine::constant(0.0));
        case NodeKind::IndGt:
            return indicator(to_piecewise(*n.lhs), n.value, true);
        case NodeKind::IndGe:
            return indicator(to_piecewise(*n.lhs), n.value, false);
    }
    throw std::logic_error("unknown payoff node");
}

PiecewiseAffine to_piecewise(const PayoffAst& ast) { return ast.piecewise(); }

double eval_node(const Node& n, double x) {
    switch (n.kind) {
        case NodeKind::Const:
            return n.value;
        case NodeKind::Var:
            return x;
        case NodeKind::Add:
            return eval_node(*n.lhs, x) + eval_node(*n.rhs, x);
        case NodeKind::Sub:
            return eval_node(*n.lhs, x) - eval_node(*n.rhs, x);
        case NodeKind::Mul:
            return eval_node(*n.lhs, x) * eval_node(*n.rhs, x);
        case NodeKind::Max:
            return std::max(eval_node(*n.lhs, x), eval_node(*n.rhs, x));
        case NodeKind::Min:
            return std::min(eval_node(*n.lhs, x), eval_node(*n.rhs, x));
        case NodeKind::Pos:
            return std::max(eval_node(*n.lhs, x), 0.0);
        case NodeKind::IndGt:
            return eval_node(*n.lhs, x) > n.value ? 1.0 : 0.0;
        case NodeKind::IndGe:
            return eval_node(*n.lhs, x) >= n.value ? 1.0 : 0.0;
    }
    throw std::logic_error("unknown payoff node");
}

double eval_payoff(const PayoffAst& ast, double x) {
    if (!(x >= 0.0)) throw std::domain_error("payoff argument must be >= 0");
    return eval_node(ast.root(), x);
}

double PayoffAst::operator()(double x) const { return eval_payoff(*this, x); }

PayoffAst PayoffAst::from_root(NodePtr root, std::string text) {
    if (!root) throw std::invalid_argument("payoff root is null");
    PiecewiseAffine pa = to_piecewise(*root);

    const double inf = pa.infimum();
    double scale = 1.0;
    for (const auto& k : pa.nodes()) scale = std::max(scale, std::abs(k.upper()));
    if (inf < -kNegativityTolerance * scale) {
        if (std::isinf(inf)) {
            throw PayoffError(PayoffError::Kind::Negative, 0,
                              "payoff is negative and unbounded below (tail slope " +
                                  format_number(pa.tail_slope()) + "); no cash shift can fix it");
        }
        throw PayoffError(PayoffError::Kind::Negative, 0,
                          "payoff is negative somewhere (minimum " + format_number(inf) +
                              "); it is bounded below, so adding cash " + format_number(-inf) +
                              " makes it nonnegative and the price shifts back by the same amount",
                          -inf);
    }

    PayoffAst ast;
    ast.root_ = std::move(root);
    ast.text_ = text.empty() ? to_string(*ast.root_) : std::move(text);

    std::vector<const Node*> ge;
    collect_ind_ge(*ast.root_, ge);
    for (const Node* n : ge) ast.warnings_.push_back(ind_ge_warning(*n));
    if (ge.empty()) {
        for (double x : pa.lsc_failures()) {
            ast.warnings_.push_back("payoff is not lower semicontinuous at x = " + format_number(x) +
                                    "; only its upper closure affects the concave envelope");
        }
    }
    ast.piecewise_ = std::make_shared<const PiecewiseAffine>(std::move(pa));
    return ast;
}

PayoffAst parse_payoff(std::string_view text) {
    return PayoffAst::from_root(Parser(text).parse(), std::string(text));
}

ShiftedPayoff parse_payoff_shifted(std::string_view text) {
    NodePtr root = Parser(text).parse();
    try {
        return {PayoffAst::from_root(root, std::string(text)), 0.0};
    } catch (const PayoffError& e) {
        if (e.kind() != PayoffError::Kind::Negative || e.suggested_shift() <= 0.0) throw;
        const double shift = e.suggested_shift();
        NodePtr shifted = make(NodeKind::Add, 0.0, root, constant(shift), 0);
        return {PayoffAst::from_root(shifted, "(" + std::string(text) + ")+" + format_number(shift)), shift};
    }
}

NormalizedPayoff lsc_normalize(const PayoffAst& ast) {
    std::vector<const Node*> ge;
    collect_ind_ge(ast.root(), ge);
    if (ge.empty()) return {ast, {}};
    std::vector<std::string> warnings;
    for (const Node* n : ge) {
        warnings.push_back("ind_ge at offset " + std::to_string(n->offset) + " rewritten to ind_gt (level " +
                           format_number(n->value) +
                           "); the payoffs differ only at that point and have identical concave envelopes");
    }
    NodePtr root = rewrite_ind_ge(ast.root_ptr());
    return {PayoffAst::from_root(root), std::move(warnings)};
}

std::string to_string(const Node& n) {
    switch (n.kind) {
        case NodeKind::Const:
            return format_number(n.value);
        case NodeKind::Var:
            return "x";
        case NodeKind::Add:
            return "(" + to_string(*n.lhs) + "+" + to_string(*n.rhs) + ")";
        case NodeKind::Sub:
            return "(" + to_string(*n.lhs) + "-" + to_string(*n.rhs) + ")";
        case NodeKind::Mul:
            return to_string(*n.lhs) + "*" + to_string(*n.rhs);
        case NodeKind::Max:
            return "max(" + to_string(*n.lhs) + "," + to_string(*n.rhs) + ")";
        case NodeKind::Min:
            return "min(" + to_string(*n.lhs) + "," + to_string(*n.rhs) + ")";
        case NodeKind::Pos:
            return "pos(" + to_string(*n.lhs) + ")";
        case NodeKind::IndGt:
            return "ind_gt(" + to_string(*n.lhs) + "," + format_number(n.value) + ")";
        case NodeKind::IndGe:
            return "ind_ge(" + to_string(*n.lhs) + "," + format_number(n.value) + ")";
    }
    return {};
}

}  // namespace superhedge::payoff
