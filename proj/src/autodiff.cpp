// Copyright 2026 The robustprune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "robustprune/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

#include "robustprune/errors.hpp"

namespace robustprune::ad {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;
using CVec = Eigen::Map<const Eigen::VectorXd>;
using Vec = Eigen::Map<Eigen::VectorXd>;

void require_same_graph(const Var& a, const Var& b, const char* op) {
  if (&a.graph() != &b.graph()) {
    throw Error(std::string(op) + ": operands belong to different graphs");
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

void require_labels(std::span<const int> labels, std::size_t batch, std::size_t classes,
                    const char* op) {
  if (labels.size() != batch) {
    throw ShapeError(std::string(op) + ": " + std::to_string(labels.size()) +
                     " labels for a batch of " + std::to_string(batch));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ConfigError(std::string(op) + ": label " + std::to_string(y) + " outside [0, " +
                        std::to_string(classes) + ")");
    }
  }
}

// Unrolls one [C, H, W] image into columns [C*k*k, Ho*Wo].
void im2col(const double* image, std::size_t channels, std::size_t height, std::size_t width,
            const ConvGeometry& g, std::size_t out_h, std::size_t out_w, double* cols) {
  const std::size_t k = g.kernel;
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        double* row = cols + ((c * k + ki) * k + kj) * plane;
        for (std::size_t oh = 0; oh < out_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) -
                          static_cast<std::ptrdiff_t>(g.padding);
          for (std::size_t ow = 0; ow < out_w; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) -
                            static_cast<std::ptrdiff_t>(g.padding);
            const bool inside = ih >= 0 && iw >= 0 && ih < static_cast<std::ptrdiff_t>(height) &&
                                iw < static_cast<std::ptrdiff_t>(width);
            row[oh * out_w + ow] =
                inside ? image[(c * height + static_cast<std::size_t>(ih)) * width +
                               static_cast<std::size_t>(iw)]
                       : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters column gradients back onto the image.
void col2im(const double* cols, std::size_t channels, std::size_t height, std::size_t width,
            const ConvGeometry& g, std::size_t out_h, std::size_t out_w, double* image) {
  const std::size_t k = g.kernel;
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const double* row = cols + ((c * k + ki) * k + kj) * plane;
        for (std::size_t oh = 0; oh < out_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) -
                          static_cast<std::ptrdiff_t>(g.padding);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(height)) continue;
          for (std::size_t ow = 0; ow < out_w; ++ow) {
            const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride + kj) -
                            static_cast<std::ptrdiff_t>(g.padding);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(width)) continue;
            image[(c * height + static_cast<std::size_t>(ih)) * width +
                  static_cast<std::size_t>(iw)] += row[oh * out_w + ow];
          }
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Var / Graph

const Tensor& Var::value() const { return graph_->value(id_); }

std::span<const double> Var::grad() const { return graph_->grad(id_); }

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.op = "constant";
  return push(std::move(n));
}

Var Graph::constant_ref(const Tensor& value) {
  Node n;
  n.ref = &value;
  n.op = "constant";
  return push(std::move(n));
}

Var Graph::variable(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  n.op = "variable";
  return push(std::move(n));
}

Var Graph::parameter(Tensor& tensor) {
  Node n;
  n.ref = &tensor;
  n.sink = &tensor;
  n.requires_grad = true;
  n.op = "parameter";
  return push(std::move(n));
}

Var Graph::emit(const char* op, Tensor value, std::span<const Var> parents, BackwardFn backward) {
  if (!value.all_finite()) {
    throw NumericalError(std::string("non-finite value produced by '") + op + "'");
  }
  Node n;
  n.owned = std::move(value);
  n.op = op;
  for (const Var& p : parents) {
    if (&p.graph() != this) throw Error(std::string(op) + ": operand from a different graph");
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Tensor& Graph::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.owned;
}

double* Graph::grad_target(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad.assign(value(id).numel(), 0.0);
  return n.grad.data();
}

void Graph::backward(Var loss) {
  if (&loss.graph() != this) throw Error("backward: loss from a different graph");
  if (value(loss.id()).numel() != 1) {
    throw ShapeError("backward: loss must hold a single element, got shape " +
                     shape_to_string(value(loss.id()).shape()));
  }
  for (Node& n : nodes_) n.grad.clear();
  if (!nodes_[loss.id()].requires_grad) return;
  grad_target(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.sink) {
      auto g = n.sink->grad();
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += n.grad[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Geometry

std::size_t ConvGeometry::output_extent(std::size_t input) const {
  if (kernel == 0 || stride == 0) throw ShapeError("conv: kernel and stride must be positive");
  const std::size_t padded = input + 2 * padding;
  if (padded < kernel) {
    throw ShapeError("conv: kernel " + std::to_string(kernel) + " larger than padded input " +
                     std::to_string(padded));
  }
  return (padded - kernel) / stride + 1;
}

// ---------------------------------------------------------------------------
// Operations

Var linear(Var x, Var w, std::optional<Var> b) {
  require_same_graph(x, w, "linear");
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1)) {
    throw ShapeError("linear: input " + shape_to_string(xv.shape()) + " incompatible with weight " +
                     shape_to_string(wv.shape()));
  }
  const std::size_t batch = xv.dim(0), in = xv.dim(1), out = wv.dim(0);
  if (b && (b->value().numel() != out)) {
    throw ShapeError("linear: bias " + shape_to_string(b->value().shape()) + " for " +
                     std::to_string(out) + " outputs");
  }
  Tensor y({batch, out});
  MapR ym(y.data(), batch, out);
  ym.noalias() = CMapR(xv.data(), batch, in) * CMapR(wv.data(), out, in).transpose();
  if (b) ym.rowwise() += CVec(b->value().data(), out).transpose();

  std::vector<Var> parents{x, w};
  if (b) parents.push_back(*b);
  const std::size_t xi = x.id(), wi = w.id();
  const std::optional<std::size_t> bi = b ? std::optional<std::size_t>(b->id()) : std::nullopt;
  return x.graph().emit("linear", std::move(y), parents,
                        [xi, wi, bi, batch, in, out](Graph& g, std::size_t self) {
                          CMapR gy(g.grad(self).data(), batch, out);
                          if (double* gx = g.grad_target(xi)) {
                            MapR(gx, batch, in).noalias() += gy * CMapR(g.value(wi).data(), out, in);
                          }
                          if (double* gw = g.grad_target(wi)) {
                            MapR(gw, out, in).noalias() +=
                                gy.transpose() * CMapR(g.value(xi).data(), batch, in);
                          }
                          if (bi) {
                            if (double* gb = g.grad_target(*bi)) {
                              Vec(gb, out) += gy.colwise().sum().transpose();
                            }
                          }
                        });
}

Var conv2d(Var x, Var w, std::optional<Var> b, const ConvGeometry& geo) {
  require_same_graph(x, w, "conv2d");
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  if (xv.rank() != 4 || wv.rank() != 4 || wv.dim(1) != xv.dim(1) || wv.dim(2) != geo.kernel ||
      wv.dim(3) != geo.kernel) {
    throw ShapeError("conv2d: input " + shape_to_string(xv.shape()) + " incompatible with weight " +
                     shape_to_string(wv.shape()));
  }
  const std::size_t batch = xv.dim(0), channels = xv.dim(1), height = xv.dim(2),
                    width = xv.dim(3);
  const std::size_t filters = wv.dim(0);
  const std::size_t out_h = geo.output_extent(height), out_w = geo.output_extent(width);
  const std::size_t patch = channels * geo.kernel * geo.kernel;
  const std::size_t plane = out_h * out_w;
  if (b && b->value().numel() != filters) {
    throw ShapeError("conv2d: bias " + shape_to_string(b->value().shape()) + " for " +
                     std::to_string(filters) + " filters");
  }

  Tensor y({batch, filters, out_h, out_w});
  std::vector<double> cols(patch * plane);
  CMapR wm(wv.data(), filters, patch);
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(xv.data() + n * channels * height * width, channels, height, width, geo, out_h, out_w,
           cols.data());
    MapR yn(y.data() + n * filters * plane, filters, plane);
    yn.noalias() = wm * CMapR(cols.data(), patch, plane);
    if (b) yn.colwise() += CVec(b->value().data(), filters);
  }

  std::vector<Var> parents{x, w};
  if (b) parents.push_back(*b);
  const std::size_t xi = x.id(), wi = w.id();
  const std::optional<std::size_t> bi = b ? std::optional<std::size_t>(b->id()) : std::nullopt;
  return x.graph().emit(
      "conv2d", std::move(y), parents,
      [=](Graph& g, std::size_t self) {
        const double* gy = g.grad(self).data();
        const double* xd = g.value(xi).data();
        CMapR wmat(g.value(wi).data(), filters, patch);
        double* gx = g.grad_target(xi);
        double* gw = g.grad_target(wi);
        double* gb = bi ? g.grad_target(*bi) : nullptr;
        std::vector<double> buf(patch * plane);
        for (std::size_t n = 0; n < batch; ++n) {
          CMapR gyn(gy + n * filters * plane, filters, plane);
          if (gw) {
            im2col(xd + n * channels * height * width, channels, height, width, geo, out_h, out_w,
                   buf.data());
            MapR(gw, filters, patch).noalias() +=
                gyn * CMapR(buf.data(), patch, plane).transpose();
          }
          if (gb) Vec(gb, filters) += gyn.rowwise().sum();
          if (gx) {
            MapR(buf.data(), patch, plane).noalias() = wmat.transpose() * gyn;
            col2im(buf.data(), channels, height, width, geo, out_h, out_w,
                   gx + n * channels * height * width);
          }
        }
      });
}

Var relu(Var x) {
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) y[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  const std::size_t xi = x.id();
  return x.graph().emit("relu", std::move(y), std::span<const Var>(&x, 1),
                        [xi](Graph& g, std::size_t self) {
                          double* gx = g.grad_target(xi);
                          const auto gy = g.grad(self);
                          const Tensor& xv = g.value(xi);
                          for (std::size_t i = 0; i < gy.size(); ++i) {
                            if (xv[i] > 0.0) gx[i] += gy[i];
                          }
                        });
}

Var abs(Var x) {
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) y[i] = std::fabs(xv[i]);
  const std::size_t xi = x.id();
  return x.graph().emit("abs", std::move(y), std::span<const Var>(&x, 1),
                        [xi](Graph& g, std::size_t self) {
                          double* gx = g.grad_target(xi);
                          const auto gy = g.grad(self);
                          const Tensor& xv = g.value(xi);
                          for (std::size_t i = 0; i < gy.size(); ++i) {
                            if (xv[i] > 0.0) {
                              gx[i] += gy[i];
                            } else if (xv[i] < 0.0) {
                              gx[i] -= gy[i];
                            }
                          }
                        });
}

namespace {

template <typename Forward, typename DerivA, typename DerivB>
Var binary(const char* op, Var a, Var b, Forward f, DerivA da, DerivB db) {
  require_same_graph(a, b, op);
  require_same_shape(a, b, op);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor y(av.shape());
  for (std::size_t i = 0; i < av.numel(); ++i) y[i] = f(av[i], bv[i]);
  const std::size_t ai = a.id(), bi = b.id();
  const Var parents[] = {a, b};
  return a.graph().emit(op, std::move(y), parents, [ai, bi, da, db](Graph& g, std::size_t self) {
    const auto gy = g.grad(self);
    const Tensor& av = g.value(ai);
    const Tensor& bv = g.value(bi);
    if (double* ga = g.grad_target(ai)) {
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * da(av[i], bv[i]);
    }
    if (double* gb = g.grad_target(bi)) {
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * db(av[i], bv[i]);
    }
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var scale(Var x, double factor) {
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) y[i] = xv[i] * factor;
  const std::size_t xi = x.id();
  return x.graph().emit("scale", std::move(y), std::span<const Var>(&x, 1),
                        [xi, factor](Graph& g, std::size_t self) {
                          double* gx = g.grad_target(xi);
                          const auto gy = g.grad(self);
                          for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * factor;
                        });
}

Var reshape(Var x, Shape shape) {
  Tensor y = x.value().reshaped(std::move(shape));
  const std::size_t xi = x.id();
  return x.graph().emit("reshape", std::move(y), std::span<const Var>(&x, 1),
                        [xi](Graph& g, std::size_t self) {
                          double* gx = g.grad_target(xi);
                          const auto gy = g.grad(self);
                          for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
                        });
}

Var flatten(Var x) {
  const Shape& s = x.shape();
  if (s.empty()) throw ShapeError("flatten: scalar input");
  return reshape(x, {s[0], x.value().numel() / s[0]});
}

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  const std::size_t xi = x.id();
  return x.graph().emit("sum", Tensor::scalar(total), std::span<const Var>(&x, 1),
                        [xi](Graph& g, std::size_t self) {
                          double* gx = g.grad_target(xi);
                          const double gy = g.grad(self)[0];
                          const std::size_t n = g.value(xi).numel();
                          for (std::size_t i = 0; i < n; ++i) gx[i] += gy;
                        });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  if (z.rank() != 2) throw ShapeError("cross_entropy: logits must be [B, C]");
  const std::size_t batch = z.dim(0), classes = z.dim(1);
  require_labels(labels, batch, classes, "cross_entropy");

  // Softmax probabilities are kept for the backward pass.
  auto probs = std::make_shared<std::vector<double>>(batch * classes);
  double total = 0.0;
  for (std::size_t n = 0; n < batch; ++n) {
    const double* row = z.data() + n * classes;
    const double peak = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(row[c] - peak);
    const double log_denom = std::log(denom);
    for (std::size_t c = 0; c < classes; ++c) {
      (*probs)[n * classes + c] = std::exp(row[c] - peak - log_denom);
    }
    total += log_denom + peak - row[labels[n]];
  }
  const std::size_t zi = logits.id();
  std::vector<int> y(labels.begin(), labels.end());
  return logits.graph().emit(
      "cross_entropy", Tensor::scalar(total / static_cast<double>(batch)),
      std::span<const Var>(&logits, 1),
      [zi, probs, y = std::move(y), batch, classes](Graph& g, std::size_t self) {
        double* gz = g.grad_target(zi);
        const double coeff = g.grad(self)[0] / static_cast<double>(batch);
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t c = 0; c < classes; ++c) {
            const double target = static_cast<int>(c) == y[n] ? 1.0 : 0.0;
            gz[n * classes + c] += coeff * ((*probs)[n * classes + c] - target);
          }
        }
      });
}

Var squared_error(Var out, const Tensor& target) {
  const Tensor& o = out.value();
  if (o.shape() != target.shape()) {
    throw ShapeError("squared_error: output " + shape_to_string(o.shape()) + " vs target " +
                     shape_to_string(target.shape()));
  }
  const auto batch = static_cast<double>(o.dim(0));
  double total = 0.0;
  for (std::size_t i = 0; i < o.numel(); ++i) {
    const double d = o[i] - target[i];
    total += d * d;
  }
  const std::size_t oi = out.id();
  return out.graph().emit("squared_error", Tensor::scalar(0.5 * total / batch),
                          std::span<const Var>(&out, 1),
                          [oi, target, batch](Graph& g, std::size_t self) {
                            double* go = g.grad_target(oi);
                            const Tensor& o = g.value(oi);
                            const double coeff = g.grad(self)[0] / batch;
                            for (std::size_t i = 0; i < o.numel(); ++i) {
                              go[i] += coeff * (o[i] - target[i]);
                            }
                          });
}

Var select_by_label(Var on_label, Var off_label, std::span<const int> labels) {
  require_same_graph(on_label, off_label, "select_by_label");
  require_same_shape(on_label, off_label, "select_by_label");
  const Tensor& a = on_label.value();
  const Tensor& b = off_label.value();
  if (a.rank() != 2) throw ShapeError("select_by_label: operands must be [B, C]");
  const std::size_t batch = a.dim(0), classes = a.dim(1);
  require_labels(labels, batch, classes, "select_by_label");
  Tensor y(a.shape());
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t i = n * classes + c;
      y[i] = static_cast<int>(c) == labels[n] ? a[i] : b[i];
    }
  }
  const std::size_t ai = on_label.id(), bi = off_label.id();
  std::vector<int> ys(labels.begin(), labels.end());
  const Var parents[] = {on_label, off_label};
  return on_label.graph().emit(
      "select_by_label", std::move(y), parents,
      [ai, bi, ys = std::move(ys), classes](Graph& g, std::size_t self) {
        const auto gy = g.grad(self);
        double* ga = g.grad_target(ai);
        double* gb = g.grad_target(bi);
        for (std::size_t n = 0; n < ys.size(); ++n) {
          for (std::size_t c = 0; c < classes; ++c) {
            const std::size_t i = n * classes + c;
            if (static_cast<int>(c) == ys[n]) {
              if (ga) ga[i] += gy[i];
            } else if (gb) {
              gb[i] += gy[i];
            }
          }
        }
      });
}

Var masked(Var theta, const Tensor& mask) {
  const Tensor& t = theta.value();
  if (t.shape() != mask.shape()) {
    throw ShapeError("masked: weight " + shape_to_string(t.shape()) + " vs mask " +
                     shape_to_string(mask.shape()));
  }
  Tensor y(t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i) y[i] = t[i] * mask[i];
  const std::size_t ti = theta.id();
  return theta.graph().emit("masked", std::move(y), std::span<const Var>(&theta, 1),
                            [ti, mask](Graph& g, std::size_t self) {
                              double* gt = g.grad_target(ti);
                              const auto gy = g.grad(self);
                              for (std::size_t i = 0; i < gy.size(); ++i) gt[i] += gy[i] * mask[i];
                            });
}

Var straight_through(Var theta, Var scores, const Tensor& mask) {
  require_same_graph(theta, scores, "straight_through");
  require_same_shape(theta, scores, "straight_through");
  const Tensor& t = theta.value();
  if (t.shape() != mask.shape()) {
    throw ShapeError("straight_through: weight " + shape_to_string(t.shape()) + " vs mask " +
                     shape_to_string(mask.shape()));
  }
  Tensor y(t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i) y[i] = t[i] * mask[i];
  const std::size_t ti = theta.id(), si = scores.id();
  const Var parents[] = {theta, scores};
  return theta.graph().emit("straight_through", std::move(y), parents,
                            [ti, si, mask](Graph& g, std::size_t self) {
                              const auto gy = g.grad(self);
                              if (double* gs = g.grad_target(si)) {
                                const Tensor& t = g.value(ti);
                                for (std::size_t i = 0; i < gy.size(); ++i) gs[i] += gy[i] * t[i];
                              }
                              if (double* gt = g.grad_target(ti)) {
                                for (std::size_t i = 0; i < gy.size(); ++i) {
                                  gt[i] += gy[i] * mask[i];
                                }
                              }
                            });
}

Var straight_through_filters(Var theta, Var filter_scores, const Tensor& filter_mask) {
  require_same_graph(theta, filter_scores, "straight_through_filters");
  const Tensor& t = theta.value();
  const std::size_t filters = t.rank() ? t.dim(0) : 0;
  if (filters == 0 || filter_scores.value().numel() != filters ||
      filter_mask.numel() != filters) {
    throw ShapeError("straight_through_filters: need one score and mask entry per filter of " +
                     shape_to_string(t.shape()));
  }
  const std::size_t per = t.numel() / filters;
  Tensor y(t.shape());
  for (std::size_t f = 0; f < filters; ++f) {
    for (std::size_t j = 0; j < per; ++j) y[f * per + j] = t[f * per + j] * filter_mask[f];
  }
  const std::size_t ti = theta.id(), si = filter_scores.id();
  const Var parents[] = {theta, filter_scores};
  return theta.graph().emit(
      "straight_through_filters", std::move(y), parents,
      [ti, si, filter_mask, filters, per](Graph& g, std::size_t self) {
        const auto gy = g.grad(self);
        const Tensor& t = g.value(ti);
        if (double* gs = g.grad_target(si)) {
          for (std::size_t f = 0; f < filters; ++f) {
            double acc = 0.0;
            for (std::size_t j = 0; j < per; ++j) acc += gy[f * per + j] * t[f * per + j];
            gs[f] += acc;
          }
        }
        if (double* gt = g.grad_target(ti)) {
          for (std::size_t f = 0; f < filters; ++f) {
            for (std::size_t j = 0; j < per; ++j) gt[f * per + j] += gy[f * per + j] * filter_mask[f];
          }
        }
      });
}

}  // namespace robustprune::ad
