#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "superhedge/piecewise.hpp"

namespace superhedge::payoff {

enum class NodeKind { Const, Var, Add, Sub, Mul, Max, Min, Pos, IndGt, IndGe };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

/// Expression node. `value` is the constant for Const and the level for the
/// indicators; `offset` is the 1-based source position (0 if built in code).
struct Node {
    NodeKind kind = NodeKind::Const;
    double value = 0.0;
    NodePtr lhs;
    NodePtr rhs;
    std::size_t offset = 0;
};

NodePtr constant(double c);
NodePtr spot();
NodePtr binary(NodeKind kind, NodePtr lhs, NodePtr rhs);
NodePtr positive_part(NodePtr e);
NodePtr indicator_gt(NodePtr e, double level);
NodePtr indicator_ge(NodePtr e, double level);

/// Validated payoff expression g: R+ -> R+.
///
/// Construction goes through `parse_payoff` or `PayoffAst::from_root`, both of
/// which enforce the product restriction and nonnegativity. The canonical
/// piecewise-affine form is computed once and cached.
class PayoffAst {
public:
    static PayoffAst from_root(NodePtr root, std::string text = {});

    const Node& root() const { return *root_; }
    NodePtr root_ptr() const { return root_; }
    const std::string& text() const { return text_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    const PiecewiseAffine& piecewise() const { return *piecewise_; }

    double operator()(double x) const;

private:
    PayoffAst() = default;

    NodePtr root_;
    std::string text_;
    std::vector<std::string> warnings_;
    std::shared_ptr<const PiecewiseAffine> piecewise_;
};

class PayoffError : public std::runtime_error {
public:
    enum class Kind { Syntax, NonAffineProduct, Negative };

    PayoffError(Kind kind, std::size_t offset, const std::string& what, double suggested_shift = 0.0);

    Kind kind() const { return kind_; }
    /// 1-based character offset into the source text, 0 when not applicable.
    std::size_t offset() const { return offset_; }
    /// Cash amount that makes a bounded-below payoff nonnegative; 0 if unbounded
    /// below or not a nonnegativity error.
    double suggested_shift() const { return suggested_shift_; }

private:
    Kind kind_;
    std::size_t offset_;
    double suggested_shift_;
};

PayoffAst parse_payoff(std::string_view text);

/// Payoff bounded from below, made nonnegative by adding `shift` in cash.
struct ShiftedPayoff {
    PayoffAst payoff;
    double shift = 0.0;
};

/// Like parse_payoff, but a payoff that is negative somewhere yet bounded
/// below is accepted after adding the smallest cash amount that makes it
/// nonnegative.
ShiftedPayoff parse_payoff_shifted(std::string_view text);

double eval_payoff(const PayoffAst& ast, double x);
double eval_node(const Node& node, double x);

/// Builds the canonical form from the tree. Throws PayoffError on a
/// non-affine product.
PiecewiseAffine to_piecewise(const Node& node);
PiecewiseAffine to_piecewise(const PayoffAst& ast);

struct NormalizedPayoff {
    PayoffAst payoff;
    std::vector<std::string> warnings;
};

/// Rewrites every ind_ge into ind_gt. The two only differ at the indicator
/// level and share the same concave envelope.
NormalizedPayoff lsc_normalize(const PayoffAst& ast);

/// Prints the tree back in the payoff grammar.
std::string to_string(const Node& node);

}  // namespace superhedge::payoff
