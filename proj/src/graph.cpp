#include "m2ae/graph.hpp"

#include <algorithm>
#include <cmath>

#include "m2ae/errors.hpp"
#include "m2ae/rng.hpp"

namespace m2ae {

namespace {

constexpr double kGeluC0 = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluC1 = 0.044715;

// C = A(n x k) * B(k x m), overwriting C.
void mm_nn(const double* a, const double* b, double* c,
           std::size_t n, std::size_t k, std::size_t m) {
    std::fill(c, c + n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * m;
        for (std::size_t l = 0; l < k; ++l) {
            double av = arow[l];
            const double* brow = b + l * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

// OUT(n x k) += G(n x m) * B(k x m)^T
void mm_nt_acc(const double* g, const double* b, double* out,
               std::size_t n, std::size_t m, std::size_t k) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* grow = g + i * m;
        double* orow = out + i * k;
        for (std::size_t l = 0; l < k; ++l) {
            const double* brow = b + l * m;
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
            orow[l] += acc;
        }
    }
}

// OUT(k x m) += A(n x k)^T * G(n x m)
void mm_tn_acc(const double* a, const double* g, double* out,
               std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* arow = a + i * k;
        const double* grow = g + i * m;
        for (std::size_t l = 0; l < k; ++l) {
            double av = arow[l];
            if (av == 0.0) continue;
            double* orow = out + l * m;
            for (std::size_t j = 0; j < m; ++j) orow[j] += av * grow[j];
        }
    }
}

std::size_t shape_count(const Shape& shape) {
    std::size_t count = 1;
    for (std::size_t extent : shape) count *= extent;
    return count;
}

}  // namespace

namespace {

const char* op_label(int op) {
    static const char* names[] = {
        "leaf", "constant", "add", "subtract", "multiply", "matmul",
        "transpose", "reshape", "concat_rows", "gather_rows", "scatter_rows",
        "reduce_sum", "reduce_mean", "scalar_mul", "row_norm", "softmax",
        "row_lse", "gelu", "exp", "log", "sum_squares", "dropout"};
    return names[op];
}

}  // namespace

Graph::Graph(GraphOptions options) : options_(options) {}

std::string Graph::describe(NodeId id) const {
    const Node& n = nodes_[id];
    std::string out = "node#" + std::to_string(id) + "(" + op_label(static_cast<int>(n.op)) + ")";
    if (!n.name.empty()) out += " '" + n.name + "'";
    return out;
}

void Graph::check_rank2(NodeId id, const char* op_name) const {
    if (nodes_[id].shape.size() != 2) {
        throw ShapeError(std::string(op_name) + " requires rank-2 input, got " +
                         shape_to_string(nodes_[id].shape) + " at " + describe(id));
    }
}

NodeId Graph::push_node(Node n) {
    n.value.assign(shape_count(n.shape), 0.0);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

NodeId Graph::leaf(const std::string& name, Shape shape) {
    auto it = leaf_ids_.find(name);
    if (it != leaf_ids_.end()) {
        if (nodes_[it->second].shape != shape) {
            throw ShapeError("leaf '" + name + "' redeclared with shape " +
                             shape_to_string(shape) + ", previously " +
                             shape_to_string(nodes_[it->second].shape));
        }
        return it->second;
    }
    if (shape.size() != 2) throw ShapeError("leaf '" + name + "' must be rank 2");
    Node n;
    n.op = Op::Leaf;
    n.shape = std::move(shape);
    n.name = name;
    NodeId id = push_node(std::move(n));
    leaf_ids_[name] = id;
    return id;
}

NodeId Graph::constant(Array value) {
    if (value.rank() != 2) throw ShapeError("constant must be rank 2");
    Node n;
    n.op = Op::Constant;
    n.shape = value.shape();
    NodeId id = push_node(std::move(n));
    nodes_[id].value = value.values();
    return id;
}

namespace {

enum class BroadcastKind { Same, Row, Scalar };

}  // namespace

NodeId Graph::add(NodeId a, NodeId b) {
    check_rank2(a, "add");
    check_rank2(b, "add");
    const Shape& sa = nodes_[a].shape;
    const Shape& sb = nodes_[b].shape;
    bool ok = sa == sb || (sb[0] == 1 && sb[1] == sa[1]) || (sb[0] == 1 && sb[1] == 1);
    if (!ok) {
        throw ShapeError("add: incompatible shapes " + shape_to_string(sa) + " and " +
                         shape_to_string(sb) + " at " + describe(b));
    }
    Node n;
    n.op = Op::Add;
    n.inputs = {a, b};
    n.shape = sa;
    return push_node(std::move(n));
}

NodeId Graph::subtract(NodeId a, NodeId b) {
    NodeId id = add(a, b);
    nodes_[id].op = Op::Sub;
    return id;
}

NodeId Graph::multiply(NodeId a, NodeId b) {
    NodeId id = add(a, b);
    nodes_[id].op = Op::Mul;
    return id;
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    const Shape& sa = nodes_[a].shape;
    const Shape& sb = nodes_[b].shape;
    if (sa[1] != sb[0]) {
        throw ShapeError("matmul: inner extents differ, " + shape_to_string(sa) + " vs " +
                         shape_to_string(sb) + " at " + describe(b));
    }
    Node n;
    n.op = Op::MatMul;
    n.inputs = {a, b};
    n.shape = {sa[0], sb[1]};
    return push_node(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
    check_rank2(a, "transpose");
    Node n;
    n.op = Op::Transpose;
    n.inputs = {a};
    n.shape = {nodes_[a].shape[1], nodes_[a].shape[0]};
    return push_node(std::move(n));
}

NodeId Graph::reshape(NodeId a, Shape shape) {
    if (shape.size() != 2 || shape[0] == 0 || shape[1] == 0) {
        throw ShapeError("reshape target must be rank 2 with positive extents");
    }
    if (shape_count(shape) != shape_count(nodes_[a].shape)) {
        throw ShapeError("reshape: size mismatch, " + shape_to_string(nodes_[a].shape) +
                         " to " + shape_to_string(shape) + " at " + describe(a));
    }
    Node n;
    n.op = Op::Reshape;
    n.inputs = {a};
    n.shape = std::move(shape);
    return push_node(std::move(n));
}

NodeId Graph::concat_rows(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    check_rank2(parts[0], "concat_rows");
    std::size_t cols = nodes_[parts[0]].shape[1];
    std::size_t rows = 0;
    for (NodeId p : parts) {
        check_rank2(p, "concat_rows");
        if (nodes_[p].shape[1] != cols) {
            throw ShapeError("concat_rows: column mismatch at " + describe(p));
        }
        rows += nodes_[p].shape[0];
    }
    Node n;
    n.op = Op::ConcatRows;
    n.inputs = parts;
    n.shape = {rows, cols};
    return push_node(std::move(n));
}

NodeId Graph::gather_rows(NodeId a, std::vector<std::size_t> indices) {
    check_rank2(a, "gather_rows");
    if (indices.empty()) throw ShapeError("gather_rows: empty index set at " + describe(a));
    for (std::size_t idx : indices) {
        if (idx >= nodes_[a].shape[0]) {
            throw ShapeError("gather_rows: index " + std::to_string(idx) + " out of range at " +
                             describe(a));
        }
    }
    Node n;
    n.op = Op::GatherRows;
    n.inputs = {a};
    n.shape = {indices.size(), nodes_[a].shape[1]};
    n.indices = std::move(indices);
    return push_node(std::move(n));
}

NodeId Graph::scatter_rows(NodeId a, std::vector<std::size_t> indices, std::size_t out_rows) {
    check_rank2(a, "scatter_rows");
    if (indices.size() != nodes_[a].shape[0]) {
        throw ShapeError("scatter_rows: index count differs from input rows at " + describe(a));
    }
    std::vector<char> seen(out_rows, 0);
    for (std::size_t idx : indices) {
        if (idx >= out_rows) throw ShapeError("scatter_rows: index out of range at " + describe(a));
        if (seen[idx]) throw ShapeError("scatter_rows: duplicate index at " + describe(a));
        seen[idx] = 1;
    }
    Node n;
    n.op = Op::ScatterRows;
    n.inputs = {a};
    n.shape = {out_rows, nodes_[a].shape[1]};
    n.indices = std::move(indices);
    n.out_rows = out_rows;
    return push_node(std::move(n));
}

NodeId Graph::reduce_sum(NodeId a, int axis) {
    check_rank2(a, "reduce_sum");
    if (axis != 0 && axis != 1) throw ShapeError("reduce axis must be 0 or 1");
    Node n;
    n.op = Op::SumAxis;
    n.inputs = {a};
    n.axis = axis;
    n.shape = axis == 0 ? Shape{1, nodes_[a].shape[1]} : Shape{nodes_[a].shape[0], 1};
    return push_node(std::move(n));
}

NodeId Graph::reduce_mean(NodeId a, int axis) {
    NodeId id = reduce_sum(a, axis);
    nodes_[id].op = Op::MeanAxis;
    return id;
}

NodeId Graph::sum_all(NodeId a) {
    return reduce_sum(reduce_sum(a, 0), 1);
}

NodeId Graph::scalar_mul(NodeId a, double factor) {
    check_rank2(a, "scalar_mul");
    if (!std::isfinite(factor)) throw NumericError("scalar_mul: non-finite factor");
    Node n;
    n.op = Op::ScalarMul;
    n.inputs = {a};
    n.shape = nodes_[a].shape;
    n.factor = factor;
    return push_node(std::move(n));
}

NodeId Graph::row_norm(NodeId x, NodeId gamma, NodeId beta, double eps) {
    check_rank2(x, "row_norm");
    const Shape& sx = nodes_[x].shape;
    for (NodeId p : {gamma, beta}) {
        check_rank2(p, "row_norm");
        if (nodes_[p].shape != Shape{1, sx[1]}) {
            throw ShapeError("row_norm: scale/shift must be 1x" + std::to_string(sx[1]) +
                             ", got " + shape_to_string(nodes_[p].shape) + " at " + describe(p));
        }
    }
    if (eps <= 0.0) throw NumericError("row_norm: eps must be positive");
    Node n;
    n.op = Op::RowNorm;
    n.inputs = {x, gamma, beta};
    n.shape = sx;
    n.eps = eps;
    return push_node(std::move(n));
}

NodeId Graph::softmax(NodeId a) {
    check_rank2(a, "softmax");
    Node n;
    n.op = Op::Softmax;
    n.inputs = {a};
    n.shape = nodes_[a].shape;
    return push_node(std::move(n));
}

NodeId Graph::row_lse(NodeId a) {
    check_rank2(a, "row_lse");
    Node n;
    n.op = Op::RowLse;
    n.inputs = {a};
    n.shape = {nodes_[a].shape[0], 1};
    return push_node(std::move(n));
}

NodeId Graph::gelu(NodeId a) {
    check_rank2(a, "gelu");
    Node n;
    n.op = Op::Gelu;
    n.inputs = {a};
    n.shape = nodes_[a].shape;
    return push_node(std::move(n));
}

NodeId Graph::exp(NodeId a) {
    check_rank2(a, "exp");
    Node n;
    n.op = Op::Exp;
    n.inputs = {a};
    n.shape = nodes_[a].shape;
    return push_node(std::move(n));
}

NodeId Graph::log(NodeId a) {
    check_rank2(a, "log");
    Node n;
    n.op = Op::Log;
    n.inputs = {a};
    n.shape = nodes_[a].shape;
    return push_node(std::move(n));
}

NodeId Graph::sum_squares(NodeId a) {
    check_rank2(a, "sum_squares");
    Node n;
    n.op = Op::SumSquares;
    n.inputs = {a};
    n.shape = {1, 1};
    return push_node(std::move(n));
}

NodeId Graph::dropout(NodeId a, double rate) {
    check_rank2(a, "dropout");
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
    Node n;
    n.op = Op::Dropout;
    n.inputs = {a};
    n.shape = nodes_[a].shape;
    n.rate = rate;
    return push_node(std::move(n));
}

bool Graph::has_leaf(const std::string& name) const {
    return leaf_ids_.count(name) > 0;
}

const Shape& Graph::shape_of(NodeId id) const {
    if (id >= nodes_.size()) throw ShapeError("shape_of: bad node id");
    return nodes_[id].shape;
}

Array Graph::value_of(NodeId id) const {
    if (id >= nodes_.size()) throw ShapeError("value_of: bad node id");
    return Array(nodes_[id].shape, nodes_[id].value);
}

std::vector<char> Graph::ancestors_of(NodeId root) const {
    std::vector<char> mark(nodes_.size(), 0);
    mark[root] = 1;
    for (std::size_t id = root + 1; id-- > 0;) {
        if (!mark[id]) continue;
        for (NodeId in : nodes_[id].inputs) mark[in] = 1;
    }
    return mark;
}

std::vector<char> Graph::descendants_of(NodeId start) const {
    std::vector<char> mark(nodes_.size(), 0);
    mark[start] = 1;
    for (std::size_t id = start + 1; id < nodes_.size(); ++id) {
        for (NodeId in : nodes_[id].inputs) {
            if (mark[in]) {
                mark[id] = 1;
                break;
            }
        }
    }
    return mark;
}

void Graph::bind_leaves(const Bindings& bindings, const std::vector<char>& needed) {
    for (const auto& [name, id] : leaf_ids_) {
        if (!needed[id]) continue;
        auto it = bindings.find(name);
        if (it == bindings.end()) throw ConfigError("unbound leaf '" + name + "'");
        const Array& value = it->second;
        if (value.shape() != nodes_[id].shape) {
            throw ShapeError("binding for leaf '" + name + "' has shape " +
                             shape_to_string(value.shape()) + ", expected " +
                             shape_to_string(nodes_[id].shape));
        }
        nodes_[id].value = value.values();
    }
}

void Graph::ensure_dropout_mask(Node& n, NodeId id) {
    if (n.mask_ready) return;
    n.aux.resize(n.value.size());
    if (!options_.training || n.rate == 0.0) {
        std::fill(n.aux.begin(), n.aux.end(), 1.0);
    } else {
        Rng rng(mix_seed(options_.dropout_seed, static_cast<std::uint64_t>(id)));
        double keep_scale = 1.0 / (1.0 - n.rate);
        for (double& m : n.aux) m = rng.uniform01() >= n.rate ? keep_scale : 0.0;
    }
    n.mask_ready = true;
}

void Graph::forward_node(NodeId id) {
    Node& n = nodes_[id];
    double* out = n.value.data();
    std::size_t out_size = n.value.size();
    switch (n.op) {
        case Op::Leaf:
        case Op::Constant:
            return;
        case Op::Add:
        case Op::Sub:
        case Op::Mul: {
            const Node& a = nodes_[n.inputs[0]];
            const Node& b = nodes_[n.inputs[1]];
            const double* av = a.value.data();
            const double* bv = b.value.data();
            std::size_t rows = n.shape[0], cols = n.shape[1];
            bool row_bc = b.shape[0] == 1 && b.shape[1] == cols && a.shape != b.shape;
            bool scalar_bc = b.shape[0] == 1 && b.shape[1] == 1 && !(rows == 1 && cols == 1);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < cols; ++c) {
                    std::size_t i = r * cols + c;
                    double bval = scalar_bc ? bv[0] : (row_bc ? bv[c] : bv[i]);
                    out[i] = n.op == Op::Add ? av[i] + bval
                           : n.op == Op::Sub ? av[i] - bval
                                             : av[i] * bval;
                }
            }
            break;
        }
        case Op::MatMul: {
            const Node& a = nodes_[n.inputs[0]];
            const Node& b = nodes_[n.inputs[1]];
            mm_nn(a.value.data(), b.value.data(), out, a.shape[0], a.shape[1], b.shape[1]);
            break;
        }
        case Op::Transpose: {
            const Node& a = nodes_[n.inputs[0]];
            std::size_t rows = a.shape[0], cols = a.shape[1];
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = a.value[r * cols + c];
            break;
        }
        case Op::Reshape: {
            const Node& a = nodes_[n.inputs[0]];
            std::copy(a.value.begin(), a.value.end(), out);
            break;
        }
        case Op::ConcatRows: {
            std::size_t offset = 0;
            for (NodeId in : n.inputs) {
                const Node& p = nodes_[in];
                std::copy(p.value.begin(), p.value.end(), out + offset);
                offset += p.value.size();
            }
            break;
        }
        case Op::GatherRows: {
            const Node& a = nodes_[n.inputs[0]];
            std::size_t cols = n.shape[1];
            for (std::size_t r = 0; r < n.indices.size(); ++r) {
                const double* src = a.value.data() + n.indices[r] * cols;
                std::copy(src, src + cols, out + r * cols);
            }
            break;
        }
        case Op::ScatterRows: {
            const Node& a = nodes_[n.inputs[0]];
            std::size_t cols = n.shape[1];
            std::fill(out, out + out_size, 0.0);
            for (std::size_t r = 0; r < n.indices.size(); ++r) {
                const double* src = a.value.data() + r * cols;
                std::copy(src, src + cols, out + n.indices[r] * cols);
            }
            break;
        }
        case Op::SumAxis:
        case Op::MeanAxis: {
            const Node& a = nodes_[n.inputs[0]];
            std::size_t rows = a.shape[0], cols = a.shape[1];
            if (n.axis == 0) {
                std::fill(out, out + cols, 0.0);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) out[c] += a.value[r * cols + c];
                if (n.op == Op::MeanAxis)
                    for (std::size_t c = 0; c < cols; ++c) out[c] /= static_cast<double>(rows);
            } else {
                for (std::size_t r = 0; r < rows; ++r) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) acc += a.value[r * cols + c];
                    out[r] = n.op == Op::MeanAxis ? acc / static_cast<double>(cols) : acc;
                }
            }
            break;
        }
        case Op::ScalarMul: {
            const Node& a = nodes_[n.inputs[0]];
            for (std::size_t i = 0; i < out_size; ++i) out[i] = a.value[i] * n.factor;
            break;
        }
        case Op::RowNorm: {
            const Node& x = nodes_[n.inputs[0]];
            const Node& gamma = nodes_[n.inputs[1]];
            const Node& beta = nodes_[n.inputs[2]];
            std::size_t rows = n.shape[0], cols = n.shape[1];
            n.aux.resize(2 * rows);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* xr = x.value.data() + r * cols;
                double mean = 0.0;
                for (std::size_t c = 0; c < cols; ++c) mean += xr[c];
                mean /= static_cast<double>(cols);
                double var = 0.0;
                for (std::size_t c = 0; c < cols; ++c) {
                    double d = xr[c] - mean;
                    var += d * d;
                }
                var /= static_cast<double>(cols);
                double inv = 1.0 / std::sqrt(var + n.eps);
                n.aux[2 * r] = mean;
                n.aux[2 * r + 1] = inv;
                double* orow = out + r * cols;
                for (std::size_t c = 0; c < cols; ++c) {
                    orow[c] = gamma.value[c] * ((xr[c] - mean) * inv) + beta.value[c];
                }
            }
            break;
        }
        case Op::Softmax: {
            const Node& a = nodes_[n.inputs[0]];
            std::size_t rows = n.shape[0], cols = n.shape[1];
            for (std::size_t r = 0; r < rows; ++r) {
                const double* xr = a.value.data() + r * cols;
                double* orow = out + r * cols;
                double m = xr[0];
                for (std::size_t c = 1; c < cols; ++c) m = std::max(m, xr[c]);
                double sum = 0.0;
                for (std::size_t c = 0; c < cols; ++c) {
                    orow[c] = std::exp(xr[c] - m);
                    sum += orow[c];
                }
                for (std::size_t c = 0; c < cols; ++c) orow[c] /= sum;
            }
            break;
        }
        case Op::RowLse: {
            const Node& a = nodes_[n.inputs[0]];
            std::size_t rows = a.shape[0], cols = a.shape[1];
            for (std::size_t r = 0; r < rows; ++r) {
                const double* xr = a.value.data() + r * cols;
                double m = xr[0];
                for (std::size_t c = 1; c < cols; ++c) m = std::max(m, xr[c]);
                double sum = 0.0;
                for (std::size_t c = 0; c < cols; ++c) sum += std::exp(xr[c] - m);
                out[r] = m + std::log(sum);
            }
            break;
        }
        case Op::Gelu: {
            const Node& a = nodes_[n.inputs[0]];
            for (std::size_t i = 0; i < out_size; ++i) {
                double x = a.value[i];
                double u = kGeluC0 * (x + kGeluC1 * x * x * x);
                out[i] = 0.5 * x * (1.0 + std::tanh(u));
            }
            break;
        }
        case Op::Exp: {
            const Node& a = nodes_[n.inputs[0]];
            for (std::size_t i = 0; i < out_size; ++i) out[i] = std::exp(a.value[i]);
            break;
        }
        case Op::Log: {
            const Node& a = nodes_[n.inputs[0]];
            for (std::size_t i = 0; i < out_size; ++i) out[i] = std::log(a.value[i]);
            break;
        }
        case Op::SumSquares: {
            const Node& a = nodes_[n.inputs[0]];
            double acc = 0.0;
            for (double v : a.value) acc += v * v;
            out[0] = acc;
            break;
        }
        case Op::Dropout: {
            ensure_dropout_mask(n, id);
            const Node& a = nodes_[n.inputs[0]];
            for (std::size_t i = 0; i < out_size; ++i) out[i] = a.value[i] * n.aux[i];
            break;
        }
    }
    if (!all_finite(out, out_size)) {
        throw NumericError("non-finite result at " + describe(id));
    }
}

Array Graph::evaluate(NodeId root, const Bindings& bindings) {
    if (root >= nodes_.size()) throw ShapeError("evaluate: bad node id");
    std::vector<char> needed = ancestors_of(root);
    bind_leaves(bindings, needed);
    for (std::size_t id = 0; id <= root; ++id) {
        if (needed[id]) forward_node(id);
    }
    return Array(nodes_[root].shape, nodes_[root].value);
}

void Graph::backward_node(NodeId id, const std::vector<char>& needed) {
    Node& n = nodes_[id];
    if (n.adjoint.empty()) return;
    const double* g = n.adjoint.data();
    auto grad_of = [&](NodeId in) -> double* {
        Node& m = nodes_[in];
        if (m.adjoint.empty()) m.adjoint.assign(m.value.size(), 0.0);
        return m.adjoint.data();
    };
    switch (n.op) {
        case Op::Leaf:
        case Op::Constant:
            return;
        case Op::Add:
        case Op::Sub:
        case Op::Mul: {
            NodeId ia = n.inputs[0], ib = n.inputs[1];
            const Node& a = nodes_[ia];
            const Node& b = nodes_[ib];
            std::size_t rows = n.shape[0], cols = n.shape[1];
            bool row_bc = b.shape[0] == 1 && b.shape[1] == cols && a.shape != b.shape;
            bool scalar_bc = b.shape[0] == 1 && b.shape[1] == 1 && !(rows == 1 && cols == 1);
            double sign = n.op == Op::Sub ? -1.0 : 1.0;
            if (needed[ia]) {
                double* da = grad_of(ia);
                if (n.op == Op::Mul) {
                    const double* bv = b.value.data();
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < cols; ++c) {
                            std::size_t i = r * cols + c;
                            double bval = scalar_bc ? bv[0] : (row_bc ? bv[c] : bv[i]);
                            da[i] += g[i] * bval;
                        }
                } else {
                    for (std::size_t i = 0; i < n.value.size(); ++i) da[i] += g[i];
                }
            }
            if (needed[ib]) {
                double* db = grad_of(ib);
                const double* av = a.value.data();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) {
                        std::size_t i = r * cols + c;
                        double contrib = n.op == Op::Mul ? g[i] * av[i] : sign * g[i];
                        std::size_t target = scalar_bc ? 0 : (row_bc ? c : i);
                        db[target] += contrib;
                    }
            }
            break;
        }
        case Op::MatMul: {
            NodeId ia = n.inputs[0], ib = n.inputs[1];
            const Node& a = nodes_[ia];
            const Node& b = nodes_[ib];
            std::size_t nn = a.shape[0], kk = a.shape[1], mm = b.shape[1];
            if (needed[ia]) mm_nt_acc(g, b.value.data(), grad_of(ia), nn, mm, kk);
            if (needed[ib]) mm_tn_acc(a.value.data(), g, grad_of(ib), nn, kk, mm);
            break;
        }
        case Op::Transpose: {
            NodeId ia = n.inputs[0];
            if (!needed[ia]) break;
            double* da = grad_of(ia);
            std::size_t rows = n.shape[0], cols = n.shape[1];  // transposed dims
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) da[c * rows + r] += g[r * cols + c];
            break;
        }
        case Op::Reshape: {
            NodeId ia = n.inputs[0];
            if (!needed[ia]) break;
            double* da = grad_of(ia);
            for (std::size_t i = 0; i < n.value.size(); ++i) da[i] += g[i];
            break;
        }
        case Op::ConcatRows: {
            std::size_t offset = 0;
            for (NodeId in : n.inputs) {
                std::size_t len = nodes_[in].value.size();
                if (needed[in]) {
                    double* da = grad_of(in);
                    for (std::size_t i = 0; i < len; ++i) da[i] += g[offset + i];
                }
                offset += len;
            }
            break;
        }
        case Op::GatherRows: {
            NodeId ia = n.inputs[0];
            if (!needed[ia]) break;
            double* da = grad_of(ia);
            std::size_t cols = n.shape[1];
            for (std::size_t r = 0; r < n.indices.size(); ++r) {
                double* dst = da + n.indices[r] * cols;
                const double* src = g + r * cols;
                for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
            }
            break;
        }
        case Op::ScatterRows: {
            NodeId ia = n.inputs[0];
            if (!needed[ia]) break;
            double* da = grad_of(ia);
            std::size_t cols = n.shape[1];
            for (std::size_t r = 0; r < n.indices.size(); ++r) {
                const double* src = g + n.indices[r] * cols;
                double* dst = da + r * cols;
                for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
            }
            break;
        }
        case Op::SumAxis:
        case Op::MeanAxis: {
            NodeId ia = n.inputs[0];
            if (!needed[ia]) break;
            double* da = grad_of(ia);
            const Node& a = nodes_[ia];
            std::size_t rows = a.shape[0], cols = a.shape[1];
            if (n.axis == 0) {
                double scale = n.op == Op::MeanAxis ? 1.0 / static_cast<double>(rows) : 1.0;
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) da[r * cols + c] += g[c] * scale;
            } else {
                double scale = n.op == Op::MeanAxis ? 1.0 / static_cast<double>(cols) : 1.0;
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) da[r * cols + c] += g[r] * scale;
            }
            break;
        }
        case Op::ScalarMul: {
            NodeId ia = n.inputs[0];
            if (!needed[ia]) break;
            double* da = grad_of(ia);
            for (std::size_t i = 0; i < n.value.size(); ++i) da[i] += g[i] * n.factor;
            break;
        }
        case Op::RowNorm: {
            NodeId ix = n.inputs[0], ig = n.inputs[1], ib = n.inputs[2];
            const Node& x = nodes_[ix];
            const Node& gamma = nodes_[ig];
            std::size_t rows = n.shape[0], cols = n.shape[1];
            double inv_cols = 1.0 / static_cast<double>(cols);
            double* dx = needed[ix] ? grad_of(ix) : nullptr;
            double* dgamma = needed[ig] ? grad_of(ig) : nullptr;
            double* dbeta = needed[ib] ? grad_of(ib) : nullptr;
            for (std::size_t r = 0; r < rows; ++r) {
                double mean = n.aux[2 * r];
                double inv = n.aux[2 * r + 1];
                const double* xr = x.value.data() + r * cols;
                const double* gr = g + r * cols;
                double sum1 = 0.0, sum2 = 0.0;
                for (std::size_t c = 0; c < cols; ++c) {
                    double xhat = (xr[c] - mean) * inv;
                    double dxhat = gr[c] * gamma.value[c];
                    sum1 += dxhat;
                    sum2 += dxhat * xhat;
                    if (dgamma) dgamma[c] += gr[c] * xhat;
                    if (dbeta) dbeta[c] += gr[c];
                }
                if (dx) {
                    double* dxr = dx + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) {
                        double xhat = (xr[c] - mean) * inv;
                        double dxhat = gr[c] * gamma.value[c];
                        dxr[c] += inv * (dxhat - inv_cols * sum1 - xhat * inv_cols * sum2);
                    }
                }
            }
            break;
        }
        case Op::Softmax: {
            NodeId ia = n.inputs[0];
            if (!needed[ia]) break;
            double* da = grad_of(ia);
            std::size_t rows = n.shape[0], cols = n.shape[1];
            for (std::size_t r = 0; r < rows; ++r) {
                const double* yr = n.value.data() + r * cols;
                const double* gr = g + r * cols;
                double dot = 0.0;
                for (std::size_t c = 0; c < cols; ++c) dot += gr[c] * yr[c];
                double* dar = da + r * cols;
                for (std::size_t c = 0; c < cols; ++c) dar[c] += yr[c] * (gr[c] - dot);
            }
            break;
        }
        case Op::RowLse: {
            NodeId ia = n.inputs[0];
            if (!needed[ia]) break;
            double* da = grad_of(ia);
            const Node& a = nodes_[ia];
            std::size_t rows = a.shape[0], cols = a.shape[1];
            for (std::size_t r = 0; r < rows; ++r) {
                const double* xr = a.value.data() + r * cols;
                double lse = n.value[r];
                double* dar = da + r * cols;
                for (std::size_t c = 0; c < cols; ++c) dar[c] += g[r] * std::exp(xr[c] - lse);
            }
            break;
        }
        case Op::Gelu: {
            NodeId ia = n.inputs[0];
            if (!needed[ia]) break;
            double* da = grad_of(ia);
            const Node& a = nodes_[ia];
            for (std::size_t i = 0; i < n.value.size(); ++i) {
                double x = a.value[i];
                double u = kGeluC0 * (x + kGeluC1 * x * x * x);
                double t = std::tanh(u);
                double du = kGeluC0 * (1.0 + 3.0 * kGeluC1 * x * x);
                da[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du);
            }
            break;
        }
        case Op::Exp: {
            NodeId ia = n.inputs[0];
            if (!needed[ia]) break;
            double* da = grad_of(ia);
            for (std::size_t i = 0; i < n.value.size(); ++i) da[i] += g[i] * n.value[i];
            break;
        }
        case Op::Log: {
            NodeId ia = n.inputs[0];
            if (!needed[ia]) break;
            double* da = grad_of(ia);
            const Node& a = nodes_[ia];
            for (std::size_t i = 0; i < n.value.size(); ++i) da[i] += g[i] / a.value[i];
            break;
        }
        case Op::SumSquares: {
            NodeId ia = n.inputs[0];
            if (!needed[ia]) break;
            double* da = grad_of(ia);
            const Node& a = nodes_[ia];
            for (std::size_t i = 0; i < a.value.size(); ++i) da[i] += 2.0 * a.value[i] * g[0];
            break;
        }
        case Op::Dropout: {
            NodeId ia = n.inputs[0];
            if (!needed[ia]) break;
            double* da = grad_of(ia);
            for (std::size_t i = 0; i < n.value.size(); ++i) da[i] += g[i] * n.aux[i];
            break;
        }
    }
}

std::map<std::string, Array> Graph::gradients(NodeId root, const Bindings& bindings,
                                              const std::set<std::string>& wrt) {
    if (root >= nodes_.size()) throw ShapeError("gradients: bad node id");
    if (shape_count(nodes_[root].shape) != 1) {
        throw ShapeError("gradients requires a scalar root, got " +
                         shape_to_string(nodes_[root].shape) + " at " + describe(root));
    }
    std::vector<NodeId> wrt_ids;
    for (const std::string& name : wrt) {
        auto it = leaf_ids_.find(name);
        if (it == leaf_ids_.end()) throw ConfigError("gradients: unknown leaf '" + name + "'");
        wrt_ids.push_back(it->second);
    }

    evaluate(root, bindings);

    std::vector<char> anc = ancestors_of(root);
    std::vector<char> desc(nodes_.size(), 0);
    for (NodeId id : wrt_ids) desc[id] = 1;
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        if (desc[id]) continue;
        for (NodeId in : nodes_[id].inputs) {
            if (desc[in]) {
                desc[id] = 1;
                break;
            }
        }
    }
    std::vector<char> needed(nodes_.size(), 0);
    for (std::size_t id = 0; id < nodes_.size(); ++id) needed[id] = anc[id] && desc[id];

    for (Node& n : nodes_) n.adjoint.clear();
    nodes_[root].adjoint.assign(1, 1.0);
    for (std::size_t id = root + 1; id-- > 0;) {
        if (anc[id]) backward_node(id, needed);
    }

    std::map<std::string, Array> out;
    for (std::size_t i = 0; i < wrt_ids.size(); ++i) {
        const Node& leaf_node = nodes_[wrt_ids[i]];
        auto name_it = wrt.begin();
        std::advance(name_it, i);
        if (leaf_node.adjoint.empty()) {
            out.emplace(*name_it, Array::zeros(leaf_node.shape));
        } else {
            out.emplace(*name_it, Array(leaf_node.shape, leaf_node.adjoint));
        }
    }
    return out;
}

Array Graph::finite_difference(NodeId root, const Bindings& bindings,
                               const std::string& leaf_name, double h) {
    if (root >= nodes_.size()) throw ShapeError("finite_difference: bad node id");
    if (shape_count(nodes_[root].shape) != 1) {
        throw ShapeError("finite_difference requires a scalar root");
    }
    auto it = leaf_ids_.find(leaf_name);
    if (it == leaf_ids_.end()) {
        throw ConfigError("finite_difference: unknown leaf '" + leaf_name + "'");
    }
    NodeId leaf_id = it->second;

    evaluate(root, bindings);

    std::vector<char> anc = ancestors_of(root);
    if (!anc[leaf_id]) return Array::zeros(nodes_[leaf_id].shape);

    std::vector<char> desc = descendants_of(leaf_id);
    std::vector<NodeId> affected;
    for (std::size_t id = 0; id <= root; ++id) {
        if (anc[id] && desc[id] && nodes_[id].op != Op::Leaf && nodes_[id].op != Op::Constant) {
            affected.push_back(id);
        }
    }
    auto recompute = [&]() {
        for (NodeId id : affected) forward_node(id);
        return nodes_[root].value[0];
    };

    Node& leaf_node = nodes_[leaf_id];
    std::vector<double> grad(leaf_node.value.size(), 0.0);
    for (std::size_t c = 0; c < grad.size(); ++c) {
        double orig = leaf_node.value[c];
        leaf_node.value[c] = orig + h;
        double f_plus = recompute();
        leaf_node.value[c] = orig - h;
        double f_minus = recompute();
        leaf_node.value[c] = orig;
        grad[c] = (f_plus - f_minus) / (2.0 * h);
    }
    recompute();  // restore cached values for the unperturbed bindings
    return Array(leaf_node.shape, std::move(grad));
}

std::vector<double> Graph::finite_difference_coords(NodeId root, const Bindings& bindings,
                                                    const std::string& leaf_name,
                                                    const std::vector<std::size_t>& coords,
                                                    double h) {
    if (root >= nodes_.size()) throw ShapeError("finite_difference: bad node id");
    if (shape_count(nodes_[root].shape) != 1) {
        throw ShapeError("finite_difference requires a scalar root");
    }
    auto it = leaf_ids_.find(leaf_name);
    if (it == leaf_ids_.end()) {
        throw ConfigError("finite_difference: unknown leaf '" + leaf_name + "'");
    }
    NodeId leaf_id = it->second;

    evaluate(root, bindings);

    std::vector<double> slopes(coords.size(), 0.0);
    std::vector<char> anc = ancestors_of(root);
    if (!anc[leaf_id]) return slopes;

    std::vector<char> desc = descendants_of(leaf_id);
    std::vector<NodeId> affected;
    for (std::size_t id = 0; id <= root; ++id) {
        if (anc[id] && desc[id] && nodes_[id].op != Op::Leaf && nodes_[id].op != Op::Constant) {
            affected.push_back(id);
        }
    }
    auto recompute = [&]() {
        for (NodeId id : affected) forward_node(id);
        return nodes_[root].value[0];
    };

    Node& leaf_node = nodes_[leaf_id];
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const std::size_t c = coords[i];
        if (c >= leaf_node.value.size()) {
            throw ShapeError("finite_difference: coordinate out of range for '" + leaf_name + "'");
        }
        const double orig = leaf_node.value[c];
        leaf_node.value[c] = orig + h;
        const double f_plus = recompute();
        leaf_node.value[c] = orig - h;
        const double f_minus = recompute();
        leaf_node.value[c] = orig;
        slopes[i] = (f_plus - f_minus) / (2.0 * h);
    }
    recompute();
    return slopes;
}

}  // namespace m2ae
