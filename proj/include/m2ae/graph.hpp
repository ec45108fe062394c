#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "m2ae/array.hpp"

namespace m2ae {

using NodeId = std::size_t;
using Bindings = std::map<std::string, Array>;

struct GraphOptions {
    bool training = false;          // dropout active iff true
    std::uint64_t dropout_seed = 0; // fixes every dropout mask in this graph
};

// Reverse-mode autodiff over a DAG of dense arrays. Nodes are created in
// topological order by construction; shapes are resolved eagerly so shape
// mismatches fail at build time with the offending node named. Forward
// values are cached per node and reused by gradients(); dropout masks are
// drawn once per node from (dropout_seed, node id) so repeated evaluation
// of the same graph is bit-identical.
class Graph {
public:
    explicit Graph(GraphOptions options = {});

    // Named input. Calling leaf() again with the same name returns the
    // original node (shape must agree), so one parameter can feed many
    // sub-graphs and its gradient accumulates across all uses.
    NodeId leaf(const std::string& name, Shape shape);
    NodeId constant(Array value);

    // a and b share a shape, or b broadcasts as a 1 x cols row or a 1 x 1
    // scalar against a rank-2 a.
    NodeId add(NodeId a, NodeId b);
    NodeId subtract(NodeId a, NodeId b);
    NodeId multiply(NodeId a, NodeId b);

    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId reshape(NodeId a, Shape shape);
    NodeId concat_rows(const std::vector<NodeId>& parts);
    NodeId gather_rows(NodeId a, std::vector<std::size_t> indices);
    // Places row j of `a` at row indices[j] of a zero-filled out_rows x cols
    // result. Indices must be distinct.
    NodeId scatter_rows(NodeId a, std::vector<std::size_t> indices, std::size_t out_rows);

    NodeId reduce_sum(NodeId a, int axis);   // axis 0 -> 1 x d, axis 1 -> n x 1
    NodeId reduce_mean(NodeId a, int axis);
    NodeId sum_all(NodeId a);                // 1 x 1
    NodeId scalar_mul(NodeId a, double factor);

    // Row-wise normalization to zero mean / unit variance (epsilon inside
    // the square root), then gamma * xhat + beta with 1 x d gamma, beta.
    NodeId row_norm(NodeId x, NodeId gamma, NodeId beta, double eps = 1e-5);
    NodeId softmax(NodeId a);                // row-wise, max-shifted
    NodeId row_lse(NodeId a);                // row-wise log-sum-exp, n x 1, max-shifted
    NodeId gelu(NodeId a);                   // tanh form
    NodeId exp(NodeId a);
    NodeId log(NodeId a);
    NodeId sum_squares(NodeId a);            // 1 x 1
    NodeId dropout(NodeId a, double rate);   // identity when !training

    // Runs the forward pass for every ancestor of root. Pure: identical
    // bindings give bit-identical results.
    Array evaluate(NodeId root, const Bindings& bindings);

    // Forward value cached by the most recent evaluate()/gradients() call.
    Array value_of(NodeId node) const;

    // d(root)/d(leaf) for each requested leaf name; root must be scalar.
    std::map<std::string, Array> gradients(NodeId root, const Bindings& bindings,
                                           const std::set<std::string>& wrt);

    // Central finite differences of root w.r.t. one leaf, (f(x+h) - f(x-h)) / 2h
    // per coordinate. Only the sub-graph downstream of the leaf is
    // re-evaluated per probe. Test oracle; never used by training code.
    Array finite_difference(NodeId root, const Bindings& bindings,
                            const std::string& leaf_name, double h = 1e-5);

    // Central finite differences at selected flat coordinates of one leaf;
    // returns one slope per requested coordinate. Shares the
    // partial-recompute strategy above. Audit oracle; never used by
    // training code.
    std::vector<double> finite_difference_coords(NodeId root, const Bindings& bindings,
                                                 const std::string& leaf_name,
                                                 const std::vector<std::size_t>& coords,
                                                 double h = 1e-5);

    bool has_leaf(const std::string& name) const;
    const Shape& shape_of(NodeId node) const;
    std::size_t node_count() const { return nodes_.size(); }
    bool training_mode() const { return options_.training; }

private:
    enum class Op : std::uint8_t {
        Leaf, Constant, Add, Sub, Mul, MatMul, Transpose, Reshape, ConcatRows,
        GatherRows, ScatterRows, SumAxis, MeanAxis, ScalarMul, RowNorm,
        Softmax, RowLse, Gelu, Exp, Log, SumSquares, Dropout
    };

    struct Node {
        Op op;
        std::vector<NodeId> inputs;
        Shape shape;
        std::vector<double> value;    // preallocated, size == product(shape)
        std::vector<double> adjoint;  // allocated on demand during backward
        std::string name;             // leaves only
        std::vector<std::size_t> indices;
        std::size_t out_rows = 0;
        int axis = 0;
        double factor = 0.0;
        double eps = 0.0;
        double rate = 0.0;
        std::vector<double> aux;      // row_norm stats / dropout mask
        bool mask_ready = false;
    };

    NodeId push_node(Node node);
    Node& node(NodeId id) { return nodes_[id]; }
    const Node& node(NodeId id) const { return nodes_[id]; }
    std::string describe(NodeId id) const;
    void check_rank2(NodeId id, const char* op_name) const;

    void bind_leaves(const Bindings& bindings, const std::vector<char>& needed);
    std::vector<char> ancestors_of(NodeId root) const;
    std::vector<char> descendants_of(NodeId start) const;
    void forward_node(NodeId id);
    void backward_node(NodeId id, const std::vector<char>& needed);
    void ensure_dropout_mask(Node& n, NodeId id);

    GraphOptions options_;
    std::vector<Node> nodes_;
    std::map<std::string, NodeId> leaf_ids_;
};

}  // namespace m2ae
