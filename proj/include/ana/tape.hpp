#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ana/errors.hpp"

namespace ana {

// Reverse-mode automatic differentiation on a dynamic tape.
//
// Every op appends a node holding its value (a rows x cols array of doubles,
// row-major; scalars are 1x1) and evaluates eagerly.  backward() seeds the
// root adjoint with 1 and sweeps the tape in reverse construction order,
// which is already a topological order because the tape is append-only.

enum class Op : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Sqrt,
    Square,
    Tanh,
    Sigmoid,
    Relu,  // elementwise max with zero
    Clamp,
    MatMul,  // covers the matrix-vector product (cols == 1)
    Sum,
    Mean,
    ConcatRows,
    SliceRows,
    Custom,
};

const char* op_name(Op op);

class Tape;

// Cheap handle to a tape node.  Invalidated by Tape::reset().
struct Var {
    Tape* tape = nullptr;
    std::int32_t id = -1;
};

class Tape {
public:
    // Adjoint rule for a single-input Custom node: accumulate into in_adj
    // given the node's value, its incoming adjoint and the input's value.
    using BackwardHook = std::function<void(std::span<const double> out_val,
                                            std::span<const double> out_adj,
                                            std::span<const double> in_val,
                                            std::span<double> in_adj)>;

    // -- leaves ------------------------------------------------------------
    Var leaf(double value);
    Var leaf(int rows, int cols, std::span<const double> values);
    Var leaf_fill(int rows, int cols, double fill);
    Var constant(double value) { return leaf(value); }

    // -- ops ---------------------------------------------------------------
    Var add(Var a, Var b) { return binary(Op::Add, a, b); }
    Var sub(Var a, Var b) { return binary(Op::Sub, a, b); }
    Var mul(Var a, Var b) { return binary(Op::Mul, a, b); }
    Var div(Var a, Var b) { return binary(Op::Div, a, b); }
    Var neg(Var a) { return unary(Op::Neg, a); }
    Var exp(Var a) { return unary(Op::Exp, a); }
    Var log(Var a) { return unary(Op::Log, a); }
    Var sqrt(Var a) { return unary(Op::Sqrt, a); }
    Var square(Var a) { return unary(Op::Square, a); }
    Var tanh(Var a) { return unary(Op::Tanh, a); }
    Var sigmoid(Var a) { return unary(Op::Sigmoid, a); }
    Var relu(Var a) { return unary(Op::Relu, a); }

    // Clamp into [lo, hi]; gradient is zero where the input was clamped.
    // When clamped_count is given it receives the number of clamped entries.
    Var clamp(Var a, double lo, double hi, long* clamped_count = nullptr);

    Var matmul(Var a, Var b);
    Var sum(Var a);
    Var mean(Var a);
    Var concat_rows(Var a, Var b);
    Var slice_rows(Var a, int first_row, int row_count);

    // Custom op with a caller-supplied adjoint rule (single input).
    Var custom(Var input, int rows, int cols, std::span<const double> values,
               BackwardHook hook);

    // -- access ------------------------------------------------------------
    int rows(Var v) const { return node(v).rows; }
    int cols(Var v) const { return node(v).cols; }
    int size(Var v) const { return node(v).rows * node(v).cols; }
    std::span<const double> value(Var v) const;
    std::span<const double> adjoint(Var v) const;
    double value_scalar(Var v) const;
    double adjoint_scalar(Var v) const;

    // Runs the reverse sweep from a scalar root.  Adjoints from any previous
    // sweep are discarded.
    void backward(Var root);

    std::size_t node_count() const { return nodes_.size(); }

    // Drops all nodes but keeps allocated capacity, so per-iteration graph
    // rebuilds do not churn the allocator.  Outstanding Vars become invalid.
    void reset();

private:
    struct Node {
        Op op;
        std::int32_t rows, cols;
        std::int32_t parent0, parent1;
        std::size_t val_off, adj_off;
        double aux0, aux1;
        int size() const { return rows * cols; }
    };

    std::vector<Node> nodes_;
    std::vector<double> val_;
    std::vector<double> adj_;
    std::vector<std::pair<std::int32_t, BackwardHook>> hooks_;

    const Node& node(Var v) const;
    Var push(Op op, int rows, int cols, std::int32_t p0, std::int32_t p1,
             double aux0 = 0.0, double aux1 = 0.0);
    Var unary(Op op, Var a);
    Var binary(Op op, Var a, Var b);
    void check_var(Var v) const;
    void backward_node(std::int32_t i);

    std::span<double> mut_value(std::int32_t id);
    std::span<double> mut_adjoint(std::int32_t id);
};

// Operator sugar so model code reads like the math it implements.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator+(Var a, double b);
Var operator-(Var a, double b);
Var operator*(Var a, double b);
Var operator/(Var a, double b);
Var operator+(double a, Var b);
Var operator-(double a, Var b);
Var operator*(double a, Var b);
Var operator/(double a, Var b);
Var operator-(Var a);

inline Var exp(Var a) { return a.tape->exp(a); }
inline Var log(Var a) { return a.tape->log(a); }
inline Var sqrt(Var a) { return a.tape->sqrt(a); }
inline Var square(Var a) { return a.tape->square(a); }
inline Var tanh(Var a) { return a.tape->tanh(a); }
inline Var sigmoid(Var a) { return a.tape->sigmoid(a); }
inline Var relu(Var a) { return a.tape->relu(a); }
inline Var max_with_zero(Var a) { return a.tape->relu(a); }
inline Var matmul(Var a, Var b) { return a.tape->matmul(a, b); }
inline Var sum(Var a) { return a.tape->sum(a); }
inline Var mean(Var a) { return a.tape->mean(a); }
inline Var concat_rows(Var a, Var b) { return a.tape->concat_rows(a, b); }

}  // namespace ana
