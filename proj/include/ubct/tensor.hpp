#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ubct {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string to_string(const Shape& shape);
Index numel(const Shape& shape);

/// Dense row-major f64 tensor with an optional gradient buffer.
struct Tensor {
  Shape shape;
  Eigen::ArrayXd data;
  std::optional<Eigen::ArrayXd> grad;

  Tensor() = default;
  explicit Tensor(Shape s);
  Tensor(Shape s, Eigen::ArrayXd values);

  static Tensor scalar(double v) { return Tensor({}, Eigen::ArrayXd::Constant(1, v)); }

  Index numel() const { return data.size(); }
  Index dim(std::size_t i) const { return shape.at(i); }
  double item() const;

  void zero_grad() { grad.reset(); }
  void accumulate_grad(const Eigen::ArrayXd& g);
};

class Tape;

/// Handle to a value recorded on a Tape. Invalidated when the tape is cleared.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  const Eigen::ArrayXd& data() const { return value().data; }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id, std::uint64_t generation) : tape_(tape), id_(id), generation_(generation) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
  std::uint64_t generation_ = 0;
};

/// Dynamic reverse-mode tape.
///
/// Every differentiable op appends one node holding its output and, when any
/// input requires a gradient, a closure that pushes the output adjoint back to
/// its inputs. A non-recording tape evaluates the same ops without storing
/// closures (the "no grad" phase). backward() walks nodes in reverse order,
/// accumulates leaf adjoints into the bound parameters' grad buffers and then
/// clears the tape.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Eigen::ArrayXd& out_adjoint)>;

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape no_grad() { return Tape(false); }

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  /// Bind a trainable parameter. Its grad receives the adjoint on backward().
  Var leaf(Tensor& param);
  Var constant(Tensor value);

  /// Append an op output. `back` is dropped unless some parent requires grad.
  Var push(Tensor value, std::initializer_list<Var> parents, Backward back);
  Var push(Tensor value, const std::vector<Var>& parents, Backward back);

  void backward(const Var& loss);

  const Tensor& value(const Var& v) const;
  bool requires_grad(const Var& v) const;

  /// Adjoint accumulator of a node, for use inside Backward closures.
  Eigen::ArrayXd& adjoint(const Var& v);

  /// Node ids visited by the most recent backward(), in visiting order.
  const std::vector<std::size_t>& last_backward_order() const { return last_order_; }

 private:
  struct Node {
    Tensor value;
    Eigen::ArrayXd adjoint;
    Tensor* param = nullptr;
    bool requires_grad = false;
    Backward back;
  };

  const Node& node(const Var& v) const;
  Node& node(const Var& v);

  bool recording_;
  std::uint64_t generation_ = 1;
  std::vector<Node> nodes_;
  std::vector<std::size_t> last_order_;
};

// Differentiable ops. Each records on the tape of its first operand.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// a * s where s is a 0-d Var.
Var scale_by(const Var& a, const Var& s);
Var silu(const Var& a);
Var sum(const Var& a);
Var mse_loss(const Var& a, const Var& b);

/// Same-padded 2-D convolution: input [C_in,H,W], kernel [C_out,C_in,k,k], bias [C_out].
Var conv2d(const Var& input, const Var& kernel, const Var& bias);
/// weight [m,n] * input [n] + bias [m].
Var linear(const Var& input, const Var& weight, const Var& bias);
/// Adds bias[c] to every pixel of channel c of x [C,H,W].
Var add_channel_bias(const Var& x, const Var& bias);
/// Stacks [1,H,W] or [H,W] images into [C,H,W].
Var stack_channels(const std::vector<Var>& channels);
Var reshape(const Var& a, Shape shape);

/// Sinusoidal embedding: [sin(w_j t)..., cos(w_j t)...], w_j = base * 100^(j / (dim/2)).
Tensor time_embedding(double t, Index dim, double base_frequency = 1.0);

}  // namespace ubct
