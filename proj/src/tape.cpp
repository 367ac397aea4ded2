#include "ana/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ana {

const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::Neg: return "neg";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sqrt: return "sqrt";
        case Op::Square: return "square";
        case Op::Tanh: return "tanh";
        case Op::Sigmoid: return "sigmoid";
        case Op::Relu: return "relu";
        case Op::Clamp: return "clamp";
        case Op::MatMul: return "matmul";
        case Op::Sum: return "sum";
        case Op::Mean: return "mean";
        case Op::ConcatRows: return "concat_rows";
        case Op::SliceRows: return "slice_rows";
        case Op::Custom: return "custom";
    }
    return "?";
}

namespace {

// Numerically stable logistic function: never exponentiates a positive argument.
double stable_sigmoid(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

// Index into a possibly-broadcast operand: a dimension of extent 1 is pinned.
inline int bcast_index(int r, int c, int rows, int cols) {
    return (rows == 1 ? 0 : r) * cols + (cols == 1 ? 0 : c);
}

}  // namespace

const Tape::Node& Tape::node(Var v) const {
    check_var(v);
    return nodes_[static_cast<std::size_t>(v.id)];
}

void Tape::check_var(Var v) const {
    if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw ContractError("Var does not refer to a live node of this tape");
}

Var Tape::push(Op op, int rows, int cols, std::int32_t p0, std::int32_t p1,
               double aux0, double aux1) {
    if (rows <= 0 || cols <= 0)
        throw ShapeError(std::string(op_name(op)) + ": non-positive shape " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    Node n;
    n.op = op;
    n.rows = rows;
    n.cols = cols;
    n.parent0 = p0;
    n.parent1 = p1;
    n.val_off = val_.size();
    n.adj_off = n.val_off;
    n.aux0 = aux0;
    n.aux1 = aux1;
    val_.resize(val_.size() + static_cast<std::size_t>(rows) * cols, 0.0);
    nodes_.push_back(n);
    return Var{this, static_cast<std::int32_t>(nodes_.size()) - 1};
}

std::span<double> Tape::mut_value(std::int32_t id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    return {val_.data() + n.val_off, static_cast<std::size_t>(n.size())};
}

std::span<double> Tape::mut_adjoint(std::int32_t id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    return {adj_.data() + n.adj_off, static_cast<std::size_t>(n.size())};
}

std::span<const double> Tape::value(Var v) const {
    const Node& n = node(v);
    return {val_.data() + n.val_off, static_cast<std::size_t>(n.size())};
}

std::span<const double> Tape::adjoint(Var v) const {
    const Node& n = node(v);
    if (adj_.size() != val_.size())
        throw ContractError("adjoint read before backward()");
    return {adj_.data() + n.adj_off, static_cast<std::size_t>(n.size())};
}

double Tape::value_scalar(Var v) const {
    const Node& n = node(v);
    if (n.size() != 1) throw ContractError("value_scalar on a non-scalar node");
    return val_[n.val_off];
}

double Tape::adjoint_scalar(Var v) const {
    auto a = adjoint(v);
    if (a.size() != 1) throw ContractError("adjoint_scalar on a non-scalar node");
    return a[0];
}

Var Tape::leaf(double value) {
    Var v = push(Op::Leaf, 1, 1, -1, -1);
    mut_value(v.id)[0] = value;
    return v;
}

Var Tape::leaf(int rows, int cols, std::span<const double> values) {
    if (static_cast<std::size_t>(rows) * cols != values.size())
        throw ShapeError("leaf: " + std::to_string(values.size()) + " values for a " +
                         std::to_string(rows) + "x" + std::to_string(cols) + " node");
    Var v = push(Op::Leaf, rows, cols, -1, -1);
    std::copy(values.begin(), values.end(), mut_value(v.id).begin());
    return v;
}

Var Tape::leaf_fill(int rows, int cols, double fill) {
    Var v = push(Op::Leaf, rows, cols, -1, -1);
    auto out = mut_value(v.id);
    std::fill(out.begin(), out.end(), fill);
    return v;
}

Var Tape::unary(Op op, Var a) {
    check_var(a);
    const Node& pa = nodes_[a.id];
    Var v = push(op, pa.rows, pa.cols, a.id, -1);
    auto in = value(a);
    auto out = mut_value(v.id);
    switch (op) {
        case Op::Neg:
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = -in[i];
            break;
        case Op::Exp:
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::exp(in[i]);
            break;
        case Op::Log:
            for (std::size_t i = 0; i < in.size(); ++i) {
                if (!(in[i] > 0.0)) throw DomainError("log of non-positive input", in[i]);
                out[i] = std::log(in[i]);
            }
            break;
        case Op::Sqrt:
            for (std::size_t i = 0; i < in.size(); ++i) {
                if (in[i] < 0.0) throw DomainError("sqrt of negative input", in[i]);
                out[i] = std::sqrt(in[i]);
            }
            break;
        case Op::Square:
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * in[i];
            break;
        case Op::Tanh:
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
            break;
        case Op::Sigmoid:
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = stable_sigmoid(in[i]);
            break;
        case Op::Relu:
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
            break;
        default:
            throw ContractError("unary: bad op");
    }
    return v;
}

Var Tape::binary(Op op, Var a, Var b) {
    check_var(a);
    check_var(b);
    // Copy the shapes out: push() may reallocate nodes_.
    const int ar = nodes_[a.id].rows, ac = nodes_[a.id].cols;
    const int br = nodes_[b.id].rows, bc = nodes_[b.id].cols;
    // Elementwise with broadcasting: each dimension must match or be 1.
    if (!((ar == br || ar == 1 || br == 1) && (ac == bc || ac == 1 || bc == 1)))
        throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " +
                         std::to_string(ar) + "x" + std::to_string(ac) + " and " +
                         std::to_string(br) + "x" + std::to_string(bc));
    int rows = std::max(ar, br);
    int cols = std::max(ac, bc);
    Var v = push(op, rows, cols, a.id, b.id);
    auto va = value(a);
    auto vb = value(b);
    auto out = mut_value(v.id);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            double x = va[bcast_index(r, c, ar, ac)];
            double y = vb[bcast_index(r, c, br, bc)];
            double z;
            switch (op) {
                case Op::Add: z = x + y; break;
                case Op::Sub: z = x - y; break;
                case Op::Mul: z = x * y; break;
                case Op::Div: z = x / y; break;
                default: throw ContractError("binary: bad op");
            }
            out[r * cols + c] = z;
        }
    }
    return v;
}

Var Tape::clamp(Var a, double lo, double hi, long* clamped_count) {
    check_var(a);
    if (!(lo < hi)) throw ShapeError("clamp: lo must be < hi");
    const Node& na = nodes_[a.id];
    Var v = push(Op::Clamp, na.rows, na.cols, a.id, -1, lo, hi);
    auto in = value(a);
    auto out = mut_value(v.id);
    long clamped = 0;
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] < lo) {
            out[i] = lo;
            ++clamped;
        } else if (in[i] > hi) {
            out[i] = hi;
            ++clamped;
        } else {
            out[i] = in[i];
        }
    }
    if (clamped_count) *clamped_count += clamped;
    return v;
}

Var Tape::matmul(Var a, Var b) {
    check_var(a);
    check_var(b);
    const Node& na = nodes_[a.id];
    const Node& nb = nodes_[b.id];
    if (na.cols != nb.rows)
        throw ShapeError("matmul: inner dimensions " + std::to_string(na.cols) + " and " +
                         std::to_string(nb.rows) + " differ");
    int m = na.rows, k = na.cols, n = nb.cols;
    Var v = push(Op::MatMul, m, n, a.id, b.id);
    auto va = value(a);
    auto vb = value(b);
    auto out = mut_value(v.id);
    for (int i = 0; i < m; ++i) {
        double* outp = out.data() + static_cast<std::size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            double ail = va[static_cast<std::size_t>(i) * k + l];
            const double* bp = vb.data() + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) outp[j] += ail * bp[j];
        }
    }
    return v;
}

Var Tape::sum(Var a) {
    check_var(a);
    Var v = push(Op::Sum, 1, 1, a.id, -1);
    auto in = value(a);
    double s = 0.0;
    for (double x : in) s += x;
    mut_value(v.id)[0] = s;
    return v;
}

Var Tape::mean(Var a) {
    check_var(a);
    Var v = push(Op::Mean, 1, 1, a.id, -1);
    auto in = value(a);
    double s = 0.0;
    for (double x : in) s += x;
    mut_value(v.id)[0] = s / static_cast<double>(in.size());
    return v;
}

Var Tape::concat_rows(Var a, Var b) {
    check_var(a);
    check_var(b);
    const Node& na = nodes_[a.id];
    const Node& nb = nodes_[b.id];
    if (na.cols != nb.cols)
        throw ShapeError("concat_rows: column counts " + std::to_string(na.cols) + " and " +
                         std::to_string(nb.cols) + " differ");
    Var v = push(Op::ConcatRows, na.rows + nb.rows, na.cols, a.id, b.id);
    auto va = value(a);
    auto vb = value(b);
    auto out = mut_value(v.id);
    std::copy(va.begin(), va.end(), out.begin());
    std::copy(vb.begin(), vb.end(), out.begin() + va.size());
    return v;
}

Var Tape::slice_rows(Var a, int first_row, int row_count) {
    check_var(a);
    const int ar = nodes_[a.id].rows, ac = nodes_[a.id].cols;
    if (first_row < 0 || row_count <= 0 || first_row + row_count > ar)
        throw ShapeError("slice_rows: rows [" + std::to_string(first_row) + ", " +
                         std::to_string(first_row + row_count) + ") out of 0.." +
                         std::to_string(ar));
    Var v = push(Op::SliceRows, row_count, ac, a.id, -1, static_cast<double>(first_row));
    auto in = value(a);
    auto out = mut_value(v.id);
    std::copy(in.begin() + static_cast<std::size_t>(first_row) * ac,
              in.begin() + static_cast<std::size_t>(first_row + row_count) * ac,
              out.begin());
    return v;
}

Var Tape::custom(Var input, int rows, int cols, std::span<const double> values,
                 BackwardHook hook) {
    check_var(input);
    if (static_cast<std::size_t>(rows) * cols != values.size())
        throw ShapeError("custom: value count does not match declared shape");
    Var v = push(Op::Custom, rows, cols, input.id, -1);
    std::copy(values.begin(), values.end(), mut_value(v.id).begin());
    hooks_.emplace_back(v.id, std::move(hook));
    return v;
}

void Tape::backward(Var root) {
    const Node& rn = node(root);
    if (rn.size() != 1)
        throw ContractError("backward: root must be scalar, got " + std::to_string(rn.rows) +
                            "x" + std::to_string(rn.cols));
    adj_.assign(val_.size(), 0.0);
    adj_[rn.adj_off] = 1.0;
    for (std::int32_t i = root.id; i >= 0; --i) backward_node(i);
}

void Tape::backward_node(std::int32_t id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.op == Op::Leaf) return;
    auto gout = mut_adjoint(id);
    // Skip nodes the root does not depend on; their adjoint stayed zero.
    bool all_zero = true;
    for (double g : gout)
        if (g != 0.0) {
            all_zero = false;
            break;
        }
    if (all_zero) return;

    auto vout = mut_value(id);
    switch (n.op) {
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: {
            const Node& na = nodes_[n.parent0];
            const Node& nb = nodes_[n.parent1];
            auto va = mut_value(n.parent0);
            auto vb = mut_value(n.parent1);
            auto ga = mut_adjoint(n.parent0);
            auto gb = mut_adjoint(n.parent1);
            for (int r = 0; r < n.rows; ++r) {
                for (int c = 0; c < n.cols; ++c) {
                    double g = gout[r * n.cols + c];
                    if (g == 0.0) continue;
                    int ia = bcast_index(r, c, na.rows, na.cols);
                    int ib = bcast_index(r, c, nb.rows, nb.cols);
                    switch (n.op) {
                        case Op::Add:
                            ga[ia] += g;
                            gb[ib] += g;
                            break;
                        case Op::Sub:
                            ga[ia] += g;
                            gb[ib] -= g;
                            break;
                        case Op::Mul:
                            ga[ia] += g * vb[ib];
                            gb[ib] += g * va[ia];
                            break;
                        case Op::Div:
                            ga[ia] += g / vb[ib];
                            gb[ib] -= g * va[ia] / (vb[ib] * vb[ib]);
                            break;
                        default: break;
                    }
                }
            }
            break;
        }
        case Op::Neg: {
            auto ga = mut_adjoint(n.parent0);
            for (std::size_t i = 0; i < gout.size(); ++i) ga[i] -= gout[i];
            break;
        }
        case Op::Exp: {
            auto ga = mut_adjoint(n.parent0);
            for (std::size_t i = 0; i < gout.size(); ++i) ga[i] += gout[i] * vout[i];
            break;
        }
        case Op::Log: {
            auto va = mut_value(n.parent0);
            auto ga = mut_adjoint(n.parent0);
            for (std::size_t i = 0; i < gout.size(); ++i) ga[i] += gout[i] / va[i];
            break;
        }
        case Op::Sqrt: {
            auto ga = mut_adjoint(n.parent0);
            for (std::size_t i = 0; i < gout.size(); ++i)
                ga[i] += gout[i] * 0.5 / vout[i];
            break;
        }
        case Op::Square: {
            auto va = mut_value(n.parent0);
            auto ga = mut_adjoint(n.parent0);
            for (std::size_t i = 0; i < gout.size(); ++i) ga[i] += gout[i] * 2.0 * va[i];
            break;
        }
        case Op::Tanh: {
            auto ga = mut_adjoint(n.parent0);
            for (std::size_t i = 0; i < gout.size(); ++i)
                ga[i] += gout[i] * (1.0 - vout[i] * vout[i]);
            break;
        }
        case Op::Sigmoid: {
            auto ga = mut_adjoint(n.parent0);
            for (std::size_t i = 0; i < gout.size(); ++i)
                ga[i] += gout[i] * vout[i] * (1.0 - vout[i]);
            break;
        }
        case Op::Relu: {
            auto va = mut_value(n.parent0);
            auto ga = mut_adjoint(n.parent0);
            // Subgradient 0 at the kink.
            for (std::size_t i = 0; i < gout.size(); ++i)
                if (va[i] > 0.0) ga[i] += gout[i];
            break;
        }
        case Op::Clamp: {
            auto va = mut_value(n.parent0);
            auto ga = mut_adjoint(n.parent0);
            for (std::size_t i = 0; i < gout.size(); ++i)
                if (va[i] >= n.aux0 && va[i] <= n.aux1) ga[i] += gout[i];
            break;
        }
        case Op::MatMul: {
            const Node& na = nodes_[n.parent0];
            int m = na.rows, k = na.cols, cols = n.cols;
            auto va = mut_value(n.parent0);
            auto vb = mut_value(n.parent1);
            auto ga = mut_adjoint(n.parent0);
            auto gb = mut_adjoint(n.parent1);
            // dA = dC * B^T ; dB = A^T * dC
            for (int i = 0; i < m; ++i) {
                const double* gp = gout.data() + static_cast<std::size_t>(i) * cols;
                for (int l = 0; l < k; ++l) {
                    const double* bp = vb.data() + static_cast<std::size_t>(l) * cols;
                    double acc = 0.0;
                    for (int j = 0; j < cols; ++j) acc += gp[j] * bp[j];
                    ga[static_cast<std::size_t>(i) * k + l] += acc;
                }
            }
            for (int l = 0; l < k; ++l) {
                double* gbp = gb.data() + static_cast<std::size_t>(l) * cols;
                for (int i = 0; i < m; ++i) {
                    double ail = va[static_cast<std::size_t>(i) * k + l];
                    if (ail == 0.0) continue;
                    const double* gp = gout.data() + static_cast<std::size_t>(i) * cols;
                    for (int j = 0; j < cols; ++j) gbp[j] += ail * gp[j];
                }
            }
            break;
        }
        case Op::Sum: {
            auto ga = mut_adjoint(n.parent0);
            double g = gout[0];
            for (auto& x : ga) x += g;
            break;
        }
        case Op::Mean: {
            auto ga = mut_adjoint(n.parent0);
            double g = gout[0] / static_cast<double>(ga.size());
            for (auto& x : ga) x += g;
            break;
        }
        case Op::ConcatRows: {
            auto ga = mut_adjoint(n.parent0);
            auto gb = mut_adjoint(n.parent1);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i];
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gout[ga.size() + i];
            break;
        }
        case Op::SliceRows: {
            auto ga = mut_adjoint(n.parent0);
            std::size_t off = static_cast<std::size_t>(n.aux0) * n.cols;
            for (std::size_t i = 0; i < gout.size(); ++i) ga[off + i] += gout[i];
            break;
        }
        case Op::Custom: {
            // Hooks are rare (a handful per tape); linear scan is fine.
            for (auto& [hid, fn] : hooks_) {
                if (hid == id) {
                    fn(vout, gout, mut_value(n.parent0), mut_adjoint(n.parent0));
                    break;
                }
            }
            break;
        }
        case Op::Leaf:
            break;
    }
}

void Tape::reset() {
    nodes_.clear();
    val_.clear();
    adj_.clear();
    hooks_.clear();
}

Var operator+(Var a, Var b) { return a.tape->add(a, b); }
Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
Var operator/(Var a, Var b) { return a.tape->div(a, b); }
Var operator+(Var a, double b) { return a.tape->add(a, a.tape->leaf(b)); }
Var operator-(Var a, double b) { return a.tape->sub(a, a.tape->leaf(b)); }
Var operator*(Var a, double b) { return a.tape->mul(a, a.tape->leaf(b)); }
Var operator/(Var a, double b) { return a.tape->div(a, a.tape->leaf(b)); }
Var operator+(double a, Var b) { return b.tape->add(b.tape->leaf(a), b); }
Var operator-(double a, Var b) { return b.tape->sub(b.tape->leaf(a), b); }
Var operator*(double a, Var b) { return b.tape->mul(b.tape->leaf(a), b); }
Var operator/(double a, Var b) { return b.tape->div(b.tape->leaf(a), b); }
Var operator-(Var a) { return a.tape->neg(a); }

}  // namespace ana
