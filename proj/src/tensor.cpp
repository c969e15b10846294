#include "ubct/tensor.hpp"

#include <cmath>
#include <sstream>

namespace ubct {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

Tape& tape_of(const Var& a) {
  if (a.tape() == nullptr) throw std::logic_error("op on a Var that is not bound to a tape");
  return *a.tape();
}

void require_same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape()) throw std::logic_error("operands recorded on different tapes");
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// cols[(c*k + di)*k + dj, y*W + x] = input[c, y + di - p, x + dj - p]
void im2col(const double* in, Index channels, Index h, Index w, Index k, double* cols) {
  const Index pad = k / 2;
  const Index hw = h * w;
  for (Index c = 0; c < channels; ++c) {
    for (Index di = 0; di < k; ++di) {
      for (Index dj = 0; dj < k; ++dj) {
        double* row = cols + ((c * k + di) * k + dj) * hw;
        for (Index y = 0; y < h; ++y) {
          const Index sy = y + di - pad;
          double* dst = row + y * w;
          if (sy < 0 || sy >= h) {
            std::fill(dst, dst + w, 0.0);
            continue;
          }
          const double* src = in + (c * h + sy) * w;
          for (Index x = 0; x < w; ++x) {
            const Index sx = x + dj - pad;
            dst[x] = (sx >= 0 && sx < w) ? src[sx] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* cols, Index channels, Index h, Index w, Index k, double* out) {
  const Index pad = k / 2;
  const Index hw = h * w;
  for (Index c = 0; c < channels; ++c) {
    for (Index di = 0; di < k; ++di) {
      for (Index dj = 0; dj < k; ++dj) {
        const double* row = cols + ((c * k + di) * k + dj) * hw;
        for (Index y = 0; y < h; ++y) {
          const Index sy = y + di - pad;
          if (sy < 0 || sy >= h) continue;
          double* dst = out + (c * h + sy) * w;
          const double* src = row + y * w;
          for (Index x = 0; x < w; ++x) {
            const Index sx = x + dj - pad;
            if (sx >= 0 && sx < w) dst[sx] += src[x];
          }
        }
      }
    }
  }
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) {
    if (e < 0) throw ShapeError("negative extent in " + to_string(shape));
    n *= e;
  }
  return n;
}

Tensor::Tensor(Shape s) : shape(std::move(s)), data(Eigen::ArrayXd::Zero(ubct::numel(shape))) {}

Tensor::Tensor(Shape s, Eigen::ArrayXd values) : shape(std::move(s)), data(std::move(values)) {
  if (ubct::numel(shape) != data.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " + to_string(shape));
  }
}

double Tensor::item() const {
  if (data.size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape));
  return data[0];
}

void Tensor::accumulate_grad(const Eigen::ArrayXd& g) {
  if (g.size() != data.size()) throw ShapeError("gradient size does not match tensor " + to_string(shape));
  if (grad) {
    *grad += g;
  } else {
    grad = g;
  }
}

const Tensor& Var::value() const { return tape_of(*this).value(*this); }
bool Var::requires_grad() const { return tape_of(*this).requires_grad(*this); }

const Tape::Node& Tape::node(const Var& v) const {
  if (v.tape_ != this || v.generation_ != generation_ || v.id_ >= nodes_.size()) {
    throw std::logic_error("stale Var: its tape was cleared by backward() or it belongs to another tape");
  }
  return nodes_[v.id_];
}

Tape::Node& Tape::node(const Var& v) { return const_cast<Node&>(std::as_const(*this).node(v)); }

const Tensor& Tape::value(const Var& v) const { return node(v).value; }
bool Tape::requires_grad(const Var& v) const { return node(v).requires_grad; }

Var Tape::leaf(Tensor& param) {
  Node n;
  n.value = Tensor(param.shape, param.data);
  n.param = &param;
  n.requires_grad = recording_;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1, generation_);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1, generation_);
}

Var Tape::push(Tensor value, std::initializer_list<Var> parents, Backward back) {
  return push(std::move(value), std::vector<Var>(parents), std::move(back));
}

Var Tape::push(Tensor value, const std::vector<Var>& parents, Backward back) {
  Node n;
  n.value = std::move(value);
  if (recording_) {
    for (const Var& p : parents) {
      if (node(p).requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.back = std::move(back);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1, generation_);
}

Eigen::ArrayXd& Tape::adjoint(const Var& v) {
  Node& n = node(v);
  if (n.adjoint.size() == 0) n.adjoint = Eigen::ArrayXd::Zero(n.value.numel());
  return n.adjoint;
}

void Tape::backward(const Var& loss) {
  if (loss.tape_ == nullptr) throw std::logic_error("backward() on a value that was never recorded");
  const Node& root = node(loss);
  if (!recording_) throw std::logic_error("backward() on a non-recording tape");
  if (!root.value.shape.empty() || root.value.numel() != 1) {
    throw std::logic_error("backward() requires a 0-d loss, got " + to_string(root.value.shape));
  }
  last_order_.clear();
  adjoint(loss).setOnes();
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.adjoint.size() == 0) continue;
    last_order_.push_back(i);
    if (n.back) {
      // The closure may touch other nodes' adjoints but never this one.
      const Eigen::ArrayXd adj = std::move(n.adjoint);
      n.back(*this, adj);
    }
  }
  for (Node& n : nodes_) {
    if (n.param == nullptr) continue;
    if (n.adjoint.size() == 0) {
      if (!n.param->grad) n.param->grad = Eigen::ArrayXd::Zero(n.param->numel());
    } else {
      n.param->accumulate_grad(n.adjoint);
    }
  }
  nodes_.clear();
  ++generation_;
}

Var add(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "add");
  Tape& t = tape_of(a);
  return t.push(Tensor(a.shape(), a.data() + b.data()), {a, b}, [a, b](Tape& tp, const Eigen::ArrayXd& g) {
    if (tp.requires_grad(a)) tp.adjoint(a) += g;
    if (tp.requires_grad(b)) tp.adjoint(b) += g;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "sub");
  Tape& t = tape_of(a);
  return t.push(Tensor(a.shape(), a.data() - b.data()), {a, b}, [a, b](Tape& tp, const Eigen::ArrayXd& g) {
    if (tp.requires_grad(a)) tp.adjoint(a) += g;
    if (tp.requires_grad(b)) tp.adjoint(b) -= g;
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "mul");
  Tape& t = tape_of(a);
  return t.push(Tensor(a.shape(), a.data() * b.data()), {a, b}, [a, b](Tape& tp, const Eigen::ArrayXd& g) {
    if (tp.requires_grad(a)) tp.adjoint(a) += g * b.data();
    if (tp.requires_grad(b)) tp.adjoint(b) += g * a.data();
  });
}

Var scale(const Var& a, double s) {
  Tape& t = tape_of(a);
  return t.push(Tensor(a.shape(), a.data() * s), {a}, [a, s](Tape& tp, const Eigen::ArrayXd& g) {
    tp.adjoint(a) += g * s;
  });
}

Var scale_by(const Var& a, const Var& s) {
  require_same_tape(a, s);
  if (s.value().numel() != 1) throw ShapeError("scale_by: scalar operand has shape " + to_string(s.shape()));
  Tape& t = tape_of(a);
  const double sv = s.data()[0];
  return t.push(Tensor(a.shape(), a.data() * sv), {a, s}, [a, s, sv](Tape& tp, const Eigen::ArrayXd& g) {
    if (tp.requires_grad(a)) tp.adjoint(a) += g * sv;
    if (tp.requires_grad(s)) tp.adjoint(s)[0] += (g * a.data()).sum();
  });
}

Var silu(const Var& a) {
  Tape& t = tape_of(a);
  const Eigen::ArrayXd sig = a.data().unaryExpr(&sigmoid);
  Tensor out(a.shape(), a.data() * sig);
  return t.push(std::move(out), {a}, [a, sig](Tape& tp, const Eigen::ArrayXd& g) {
    // d/dx x*s(x) = s(x) * (1 + x * (1 - s(x)))
    tp.adjoint(a) += g * sig * (1.0 + a.data() * (1.0 - sig));
  });
}

Var sum(const Var& a) {
  Tape& t = tape_of(a);
  return t.push(Tensor::scalar(a.data().sum()), {a}, [a](Tape& tp, const Eigen::ArrayXd& g) {
    tp.adjoint(a) += g[0];
  });
}

Var mse_loss(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "mse_loss");
  Tape& t = tape_of(a);
  const Eigen::ArrayXd diff = a.data() - b.data();
  const double n = static_cast<double>(diff.size());
  return t.push(Tensor::scalar(diff.square().sum() / n), {a, b}, [a, b, diff, n](Tape& tp, const Eigen::ArrayXd& g) {
    const Eigen::ArrayXd d = (2.0 * g[0] / n) * diff;
    if (tp.requires_grad(a)) tp.adjoint(a) += d;
    if (tp.requires_grad(b)) tp.adjoint(b) -= d;
  });
}

Var conv2d(const Var& input, const Var& kernel, const Var& bias) {
  require_same_tape(input, kernel);
  require_same_tape(input, bias);
  const Shape& is = input.shape();
  const Shape& ks = kernel.shape();
  if (is.size() != 3) throw ShapeError("conv2d: input must be [C,H,W], got " + to_string(is));
  if (ks.size() != 4 || ks[2] != ks[3]) throw ShapeError("conv2d: kernel must be [C_out,C_in,k,k], got " + to_string(ks));
  if (ks[1] != is[0]) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(ks[1]) + " input channels, input has " + std::to_string(is[0]));
  }
  if (ks[2] % 2 == 0) throw ShapeError("conv2d: kernel size must be odd");
  if (bias.shape() != Shape{ks[0]}) throw ShapeError("conv2d: bias must be [C_out], got " + to_string(bias.shape()));

  const Index cin = is[0], h = is[1], w = is[2], cout = ks[0], k = ks[2];
  const Index patch = cin * k * k;
  const Index hw = h * w;

  RowMat cols(patch, hw);
  im2col(input.data().data(), cin, h, w, k, cols.data());
  ConstRowMap kmat(kernel.data().data(), cout, patch);

  Tensor out({cout, h, w});
  RowMap omat(out.data.data(), cout, hw);
  omat.noalias() = kmat * cols;
  omat.colwise() += bias.data().matrix();

  Tape& t = tape_of(input);
  const bool keep = t.recording();
  return t.push(std::move(out), {input, kernel, bias},
                [input, kernel, bias, cols = keep ? std::move(cols) : RowMat(), cin, h, w, cout, k, patch, hw](
                    Tape& tp, const Eigen::ArrayXd& g) {
                  ConstRowMap gmat(g.data(), cout, hw);
                  if (tp.requires_grad(kernel)) {
                    RowMap dk(tp.adjoint(kernel).data(), cout, patch);
                    dk.noalias() += gmat * cols.transpose();
                  }
                  if (tp.requires_grad(bias)) tp.adjoint(bias) += gmat.rowwise().sum().array();
                  if (tp.requires_grad(input)) {
                    ConstRowMap kmat(kernel.data().data(), cout, patch);
                    RowMat dcols = kmat.transpose() * gmat;
                    col2im(dcols.data(), cin, h, w, k, tp.adjoint(input).data());
                  }
                });
}

Var linear(const Var& input, const Var& weight, const Var& bias) {
  require_same_tape(input, weight);
  require_same_tape(input, bias);
  const Shape& ws = weight.shape();
  if (ws.size() != 2) throw ShapeError("linear: weight must be [m,n], got " + to_string(ws));
  if (input.shape() != Shape{ws[1]}) throw ShapeError("linear: input " + to_string(input.shape()) + " vs weight " + to_string(ws));
  if (bias.shape() != Shape{ws[0]}) throw ShapeError("linear: bias must be [m], got " + to_string(bias.shape()));
  const Index m = ws[0], n = ws[1];
  ConstRowMap wmat(weight.data().data(), m, n);
  Tensor out({m}, (wmat * input.data().matrix()).array() + bias.data());
  Tape& t = tape_of(input);
  return t.push(std::move(out), {input, weight, bias}, [input, weight, bias, m, n](Tape& tp, const Eigen::ArrayXd& g) {
    if (tp.requires_grad(weight)) {
      RowMap dw(tp.adjoint(weight).data(), m, n);
      dw.noalias() += g.matrix() * input.data().matrix().transpose();
    }
    if (tp.requires_grad(bias)) tp.adjoint(bias) += g;
    if (tp.requires_grad(input)) {
      ConstRowMap wmat(weight.data().data(), m, n);
      tp.adjoint(input) += (wmat.transpose() * g.matrix()).array();
    }
  });
}

Var add_channel_bias(const Var& x, const Var& bias) {
  require_same_tape(x, bias);
  const Shape& xs = x.shape();
  if (xs.size() != 3 || bias.shape() != Shape{xs[0]}) {
    throw ShapeError("add_channel_bias: " + to_string(xs) + " with bias " + to_string(bias.shape()));
  }
  const Index c = xs[0], hw = xs[1] * xs[2];
  Tensor out(xs, x.data());
  RowMap omat(out.data.data(), c, hw);
  omat.colwise() += bias.data().matrix();
  Tape& t = tape_of(x);
  return t.push(std::move(out), {x, bias}, [x, bias, c, hw](Tape& tp, const Eigen::ArrayXd& g) {
    if (tp.requires_grad(x)) tp.adjoint(x) += g;
    if (tp.requires_grad(bias)) tp.adjoint(bias) += ConstRowMap(g.data(), c, hw).rowwise().sum().array();
  });
}

Var stack_channels(const std::vector<Var>& channels) {
  if (channels.empty()) throw ShapeError("stack_channels: no inputs");
  const Shape& first = channels.front().shape();
  Index h = 0, w = 0;
  if (first.size() == 2) {
    h = first[0];
    w = first[1];
  } else if (first.size() == 3 && first[0] == 1) {
    h = first[1];
    w = first[2];
  } else {
    throw ShapeError("stack_channels: expected [H,W] or [1,H,W], got " + to_string(first));
  }
  const Index hw = h * w;
  Tensor out({static_cast<Index>(channels.size()), h, w});
  for (std::size_t i = 0; i < channels.size(); ++i) {
    require_same_tape(channels[0], channels[i]);
    if (channels[i].data().size() != hw) throw ShapeError("stack_channels: channel " + std::to_string(i) + " has wrong size");
    out.data.segment(static_cast<Index>(i) * hw, hw) = channels[i].data();
  }
  Tape& t = tape_of(channels[0]);
  return t.push(std::move(out), channels, [channels, hw](Tape& tp, const Eigen::ArrayXd& g) {
    for (std::size_t i = 0; i < channels.size(); ++i) {
      if (tp.requires_grad(channels[i])) tp.adjoint(channels[i]) += g.segment(static_cast<Index>(i) * hw, hw);
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  if (numel(shape) != a.value().numel()) throw ShapeError("reshape: " + to_string(a.shape()) + " -> " + to_string(shape));
  Tape& t = tape_of(a);
  return t.push(Tensor(std::move(shape), a.data()), {a}, [a](Tape& tp, const Eigen::ArrayXd& g) { tp.adjoint(a) += g; });
}

Tensor time_embedding(double t, Index dim, double base_frequency) {
  if (dim <= 0 || dim % 2 != 0) throw std::invalid_argument("time_embedding: dim must be positive and even");
  const Index half = dim / 2;
  Tensor out({dim});
  for (Index j = 0; j < half; ++j) {
    const double w = base_frequency * std::pow(100.0, static_cast<double>(j) / static_cast<double>(half));
    out.data[j] = std::sin(w * t);
    out.data[half + j] = std::cos(w * t);
  }
  return out;
}

}  // namespace ubct
