#include "pairnas/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pairnas/error.hpp"

namespace pairnas::ad {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Expands a broadcastable mask to the full shape of `shape`.
std::vector<double> expand_mask(const Tensor& mask, const Shape& shape) {
  const Shape& ms = mask.shape();
  require(ms.size() == shape.size(),
          "mask " + shape_string(ms) + " has different rank than " + shape_string(shape));
  for (std::size_t d = 0; d < ms.size(); ++d) {
    require(ms[d] == shape[d] || ms[d] == 1,
            "mask " + shape_string(ms) + " not broadcastable to " + shape_string(shape));
  }
  const std::size_t n = num_elements(shape);
  std::vector<double> out(n);
  std::vector<std::size_t> mstride(ms.size());
  std::size_t s = 1;
  for (int d = static_cast<int>(ms.size()) - 1; d >= 0; --d) {
    mstride[d] = ms[d] == 1 ? 0 : s;
    s *= static_cast<std::size_t>(ms[d]);
  }
  auto m = mask.data();
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t rem = flat, midx = 0;
    for (int d = static_cast<int>(shape.size()) - 1; d >= 0; --d) {
      const auto dim = static_cast<std::size_t>(shape[d]);
      midx += (rem % dim) * mstride[d];
      rem /= dim;
    }
    const double v = m[midx];
    if (v != 0.0 && v != 1.0) throw DimensionError("mask values must be 0 or 1");
    out[flat] = v;
  }
  return out;
}

struct AxisSplit {
  std::size_t outer, len, inner;
};

AxisSplit split_axis(const Shape& shape, int axis) {
  AxisSplit s{1, static_cast<std::size_t>(shape[axis]), 1};
  for (int d = 0; d < axis; ++d) s.outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
  return s;
}

int normalize_axis(const Tensor& a, int axis) {
  if (axis < 0) axis += a.rank();
  require(axis >= 0 && axis < a.rank(), "axis out of range for " + shape_string(a.shape()));
  return axis;
}

Shape drop_axis(const Shape& shape, int axis) {
  Shape out;
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (static_cast<int>(d) != axis) out.push_back(shape[d]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

std::size_t last_dim(const Tensor& a) { return static_cast<std::size_t>(a.shape().back()); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2,
          "matmul expects matrices, got " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(static_cast<std::size_t>(b.dim(0)) == k,
          "matmul inner dimensions differ: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  std::vector<double> out(m * n, 0.0);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return make_result("matmul", {static_cast<int>(m), static_cast<int>(n)}, std::move(out), {a, b},
                     [m, k, n](Node& self) {
                       const auto& g = self.grad;
                       Node& pa = *self.parents[0];
                       Node& pb = *self.parents[1];
                       if (pa.requires_grad) {
                         auto& ga = pa.grad_buffer();
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double acc = 0.0;
                             const double* grow = g.data() + i * n;
                             const double* brow = pb.value.data() + p * n;
                             for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                             ga[i * k + p] += acc;
                           }
                       }
                       if (pb.requires_grad) {
                         auto& gb = pb.grad_buffer();
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double av = pa.value[i * k + p];
                             const double* grow = g.data() + i * n;
                             double* gbrow = gb.data() + p * n;
                             for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                           }
                       }
                     });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  require(a.rank() == 3 && b.rank() == 3, "bmm expects rank-3 tensors");
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  require(static_cast<std::size_t>(b.dim(0)) == batch && static_cast<std::size_t>(b.dim(1)) == k,
          "bmm shape mismatch: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  std::vector<double> out(batch * m * n, 0.0);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double av = A[(s * m + i) * k + p];
        for (std::size_t j = 0; j < n; ++j) out[(s * m + i) * n + j] += av * B[(s * k + p) * n + j];
      }
  return make_result("bmm", {static_cast<int>(batch), static_cast<int>(m), static_cast<int>(n)},
                     std::move(out), {a, b}, [batch, m, k, n](Node& self) {
                       const auto& g = self.grad;
                       Node& pa = *self.parents[0];
                       Node& pb = *self.parents[1];
                       for (std::size_t s = 0; s < batch; ++s)
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const std::size_t ai = (s * m + i) * k + p;
                             double acc = 0.0;
                             for (std::size_t j = 0; j < n; ++j) {
                               const double gv = g[(s * m + i) * n + j];
                               acc += gv * pb.value[(s * k + p) * n + j];
                               if (pb.requires_grad) pb.grad_buffer()[(s * k + p) * n + j] += pa.value[ai] * gv;
                             }
                             if (pa.requires_grad) pa.grad_buffer()[ai] += acc;
                           }
                     });
}

Tensor transpose_last(const Tensor& a) {
  require(a.rank() == 3, "transpose_last expects a rank-3 tensor");
  const std::size_t batch = a.dim(0), m = a.dim(1), n = a.dim(2);
  std::vector<double> out(a.size());
  auto A = a.data();
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[(s * n + j) * m + i] = A[(s * m + i) * n + j];
  return make_result("transpose", {static_cast<int>(batch), static_cast<int>(n), static_cast<int>(m)},
                     std::move(out), {a}, [batch, m, n](Node& self) {
                       auto& ga = self.parents[0]->grad_buffer();
                       for (std::size_t s = 0; s < batch; ++s)
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < n; ++j)
                             ga[(s * m + i) * n + j] += self.grad[(s * n + j) * m + i];
                     });
}

Tensor elementwise(UnaryOp op, const Tensor& a) {
  std::vector<double> out(a.data().begin(), a.data().end());
  const char* name = "identity";
  switch (op) {
    case UnaryOp::Tanh:
      name = "tanh";
      for (double& v : out) v = std::tanh(v);
      break;
    case UnaryOp::Relu:
      name = "relu";
      for (double& v : out) v = v > 0.0 ? v : 0.0;
      break;
    case UnaryOp::Sigmoid:
      name = "sigmoid";
      for (double& v : out) v = sigmoid_scalar(v);
      break;
    case UnaryOp::Abs:
      name = "abs";
      for (double& v : out) v = std::fabs(v);
      break;
    case UnaryOp::Identity:
      break;
  }
  return make_result(name, a.shape(), std::move(out), {a}, [op](Node& self) {
    Node& p = *self.parents[0];
    auto& gp = p.grad_buffer();
    const auto& g = self.grad;
    const auto& y = self.value;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double d = 1.0;
      switch (op) {
        case UnaryOp::Tanh: d = 1.0 - y[i] * y[i]; break;
        case UnaryOp::Relu: d = p.value[i] > 0.0 ? 1.0 : 0.0; break;
        case UnaryOp::Sigmoid: d = y[i] * (1.0 - y[i]); break;
        case UnaryOp::Abs: d = p.value[i] > 0.0 ? 1.0 : (p.value[i] < 0.0 ? -1.0 : 0.0); break;
        case UnaryOp::Identity: break;
      }
      gp[i] += d * g[i];
    }
  });
}

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "elementwise shape mismatch: " + shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
  std::vector<double> out(a.size());
  auto A = a.data();
  auto B = b.data();
  const char* name = "add";
  switch (op) {
    case BinaryOp::Add:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
      break;
    case BinaryOp::Sub:
      name = "sub";
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
      break;
    case BinaryOp::Mul:
      name = "mul";
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
      break;
  }
  return make_result(name, a.shape(), std::move(out), {a, b}, [op](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const auto& g = self.grad;
    if (pa.requires_grad) {
      auto& ga = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += op == BinaryOp::Mul ? g[i] * pb.value[i] : g[i];
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        switch (op) {
          case BinaryOp::Add: gb[i] += g[i]; break;
          case BinaryOp::Sub: gb[i] -= g[i]; break;
          case BinaryOp::Mul: gb[i] += g[i] * pa.value[i]; break;
        }
      }
    }
  });
}

Tensor affine(const Tensor& a, double alpha, double beta) {
  std::vector<double> out(a.size());
  auto A = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * A[i] + beta;
  return make_result("affine", a.shape(), std::move(out), {a}, [alpha](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) gp[i] += alpha * self.grad[i];
  });
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  require(s.size() == 1, "scale_by expects a single-element scale");
  const double sv = s.data()[0];
  std::vector<double> out(a.size());
  auto A = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sv * A[i];
  return make_result("scale_by", a.shape(), std::move(out), {a, s}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& ps = *self.parents[1];
    const auto& g = self.grad;
    if (pa.requires_grad) {
      auto& ga = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += ps.value[0] * g[i];
    }
    if (ps.requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += pa.value[i] * g[i];
      ps.grad_buffer()[0] += acc;
    }
  });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  const std::size_t n = last_dim(a);
  require(bias.size() == n, "bias of size " + std::to_string(bias.size()) + " does not match " +
                                shape_string(a.shape()));
  std::vector<double> out(a.data().begin(), a.data().end());
  auto Bv = bias.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += Bv[i % n];
  return make_result("add_bias", a.shape(), std::move(out), {a, bias}, [n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const auto& g = self.grad;
    if (pa.requires_grad) {
      auto& ga = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(num_elements(shape) == a.size(),
          "cannot reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {a}, [](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) gp[i] += self.grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat of zero tensors");
  Shape lead = parts[0].shape();
  lead.pop_back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape l = p.shape();
    const std::size_t w = static_cast<std::size_t>(l.back());
    l.pop_back();
    require(l == lead, "concat leading dimensions differ");
    widths.push_back(w);
    total += w;
  }
  const std::size_t rows = num_elements(lead);
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto P = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(P.data() + r * widths[k], widths[k], out.data() + r * total + offset);
    offset += widths[k];
  }
  Shape shape = lead;
  shape.push_back(static_cast<int>(total));
  return make_result("concat", std::move(shape), std::move(out), parts, [rows, total, widths](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      Node& p = *self.parents[k];
      if (p.requires_grad) {
        auto& gp = p.grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c) gp[r * widths[k] + c] += self.grad[r * total + off + c];
      }
      off += widths[k];
    }
  });
}

Tensor slice_last(const Tensor& a, int begin, int length) {
  const std::size_t width = last_dim(a);
  require(begin >= 0 && length > 0 && static_cast<std::size_t>(begin + length) <= width,
          "slice out of range for " + shape_string(a.shape()));
  const std::size_t rows = a.size() / width;
  std::vector<double> out(rows * length);
  auto A = a.data();
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(A.data() + r * width + begin, length, out.data() + r * length);
  Shape shape = a.shape();
  shape.back() = length;
  const std::size_t b = begin, len = length;
  return make_result("slice", std::move(shape), std::move(out), {a}, [rows, width, b, len](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < len; ++c) gp[r * width + b + c] += self.grad[r * len + c];
  });
}

Tensor time_step(const Tensor& a, int t) {
  require(a.rank() == 3, "time_step expects [B x T x D]");
  const std::size_t batch = a.dim(0), steps = a.dim(1), d = a.dim(2);
  require(t >= 0 && static_cast<std::size_t>(t) < steps, "time index out of range");
  std::vector<double> out(batch * d);
  auto A = a.data();
  for (std::size_t i = 0; i < batch; ++i) std::copy_n(A.data() + (i * steps + t) * d, d, out.data() + i * d);
  const std::size_t ts = t;
  return make_result("time_step", {static_cast<int>(batch), static_cast<int>(d)}, std::move(out), {a},
                     [batch, steps, d, ts](Node& self) {
                       auto& gp = self.parents[0]->grad_buffer();
                       for (std::size_t i = 0; i < batch; ++i)
                         for (std::size_t c = 0; c < d; ++c) gp[(i * steps + ts) * d + c] += self.grad[i * d + c];
                     });
}

Tensor stack_time(const std::vector<Tensor>& steps) {
  require(!steps.empty(), "stack_time of zero steps");
  const Shape& s0 = steps[0].shape();
  require(s0.size() == 2, "stack_time expects [B x D] steps");
  for (const auto& s : steps) require(s.shape() == s0, "stack_time step shapes differ");
  const std::size_t batch = s0[0], d = s0[1], count = steps.size();
  std::vector<double> out(batch * count * d);
  for (std::size_t t = 0; t < count; ++t) {
    auto S = steps[t].data();
    for (std::size_t i = 0; i < batch; ++i) std::copy_n(S.data() + i * d, d, out.data() + (i * count + t) * d);
  }
  return make_result("stack_time", {static_cast<int>(batch), static_cast<int>(count), static_cast<int>(d)},
                     std::move(out), steps, [batch, count, d](Node& self) {
                       for (std::size_t t = 0; t < count; ++t) {
                         Node& p = *self.parents[t];
                         if (!p.requires_grad) continue;
                         auto& gp = p.grad_buffer();
                         for (std::size_t i = 0; i < batch; ++i)
                           for (std::size_t c = 0; c < d; ++c) gp[i * d + c] += self.grad[(i * count + t) * d + c];
                       }
                     });
}

Tensor select_rows(std::span<const double> keep, const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape() && a.rank() == 2, "select_rows expects equal [B x D] tensors");
  const std::size_t batch = a.dim(0), d = a.dim(1);
  require(keep.size() == batch, "select_rows mask length differs from batch");
  std::vector<double> flags(keep.begin(), keep.end());
  std::vector<double> out(a.size());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < batch; ++i) {
    const double* src = flags[i] != 0.0 ? A.data() : B.data();
    std::copy_n(src + i * d, d, out.data() + i * d);
  }
  return make_result("select_rows", a.shape(), std::move(out), {a, b}, [flags, d](Node& self) {
    for (std::size_t i = 0; i < flags.size(); ++i) {
      Node& p = *self.parents[flags[i] != 0.0 ? 0 : 1];
      if (!p.requires_grad) continue;
      auto& gp = p.grad_buffer();
      for (std::size_t c = 0; c < d; ++c) gp[i * d + c] += self.grad[i * d + c];
    }
  });
}

Tensor reduce(Reduction op, const Tensor& a, int axis, const Tensor* mask) {
  axis = normalize_axis(a, axis);
  const AxisSplit s = split_axis(a.shape(), axis);
  const std::vector<double> m = mask ? expand_mask(*mask, a.shape()) : std::vector<double>(a.size(), 1.0);
  auto A = a.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  auto idx = [&](std::size_t o, std::size_t l, std::size_t i) { return (o * s.len + l) * s.inner + i; };

  if (op == Reduction::Max) {
    std::vector<std::size_t> arg(out.size());
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t where = SIZE_MAX;
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t k = idx(o, l, i);
          if (m[k] != 0.0 && (where == SIZE_MAX || A[k] > best)) {
            best = A[k];
            where = k;
          }
        }
        if (where == SIZE_MAX) throw DegenerateError("masked max over a fully masked row");
        out[o * s.inner + i] = best;
        arg[o * s.inner + i] = where;
      }
    return make_result("masked_max", drop_axis(a.shape(), axis), std::move(out), {a}, [arg](Node& self) {
      auto& gp = self.parents[0]->grad_buffer();
      for (std::size_t r = 0; r < arg.size(); ++r) gp[arg[r]] += self.grad[r];
    });
  }

  std::vector<double> scale(out.size(), 1.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      double acc = 0.0, count = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const std::size_t k = idx(o, l, i);
        acc += m[k] * A[k];
        count += m[k];
      }
      if (op == Reduction::Mean) {
        if (count == 0.0) throw DegenerateError("masked mean over a fully masked row");
        scale[o * s.inner + i] = 1.0 / count;
        acc /= count;
      }
      out[o * s.inner + i] = acc;
    }
  return make_result(op == Reduction::Mean ? "masked_mean" : "masked_sum", drop_axis(a.shape(), axis),
                     std::move(out), {a}, [s, m, scale](Node& self) {
                       auto& gp = self.parents[0]->grad_buffer();
                       for (std::size_t o = 0; o < s.outer; ++o)
                         for (std::size_t l = 0; l < s.len; ++l)
                           for (std::size_t i = 0; i < s.inner; ++i) {
                             const std::size_t k = (o * s.len + l) * s.inner + i;
                             gp[k] += m[k] * scale[o * s.inner + i] * self.grad[o * s.inner + i];
                           }
                     });
}

Tensor softmax(const Tensor& a, int axis, const Tensor* mask) {
  axis = normalize_axis(a, axis);
  const AxisSplit s = split_axis(a.shape(), axis);
  const std::vector<double> m = mask ? expand_mask(*mask, a.shape()) : std::vector<double>(a.size(), 1.0);
  auto A = a.data();
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      double hi = -std::numeric_limits<double>::infinity();
      bool any = false;
      for (std::size_t l = 0; l < s.len; ++l) {
        const std::size_t k = (o * s.len + l) * s.inner + i;
        if (m[k] != 0.0) {
          hi = any ? std::max(hi, A[k]) : A[k];
          any = true;
        }
      }
      if (!any) throw DegenerateError("softmax over a fully masked row");
      double z = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const std::size_t k = (o * s.len + l) * s.inner + i;
        if (m[k] != 0.0) {
          out[k] = std::exp(A[k] - hi);
          z += out[k];
        }
      }
      for (std::size_t l = 0; l < s.len; ++l) out[(o * s.len + l) * s.inner + i] /= z;
    }
  return make_result("softmax", a.shape(), std::move(out), {a}, [s](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    const auto& p = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        double dot = 0.0;
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t k = (o * s.len + l) * s.inner + i;
          dot += p[k] * g[k];
        }
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t k = (o * s.len + l) * s.inner + i;
          gp[k] += p[k] * (g[k] - dot);
        }
      }
  });
}

Tensor log_softmax(const Tensor& a, int axis, const Tensor* mask) {
  axis = normalize_axis(a, axis);
  const AxisSplit s = split_axis(a.shape(), axis);
  const std::vector<double> m = mask ? expand_mask(*mask, a.shape()) : std::vector<double>(a.size(), 1.0);
  auto A = a.data();
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      double hi = 0.0;
      bool any = false;
      for (std::size_t l = 0; l < s.len; ++l) {
        const std::size_t k = (o * s.len + l) * s.inner + i;
        if (m[k] != 0.0) {
          hi = any ? std::max(hi, A[k]) : A[k];
          any = true;
        }
      }
      if (!any) throw DegenerateError("log_softmax over a fully masked row");
      double z = 0.0;
      for (std::size_t l = 0; l < s.len; ++l) {
        const std::size_t k = (o * s.len + l) * s.inner + i;
        if (m[k] != 0.0) z += std::exp(A[k] - hi);
      }
      const double log_z = hi + std::log(z);
      for (std::size_t l = 0; l < s.len; ++l) {
        const std::size_t k = (o * s.len + l) * s.inner + i;
        if (m[k] != 0.0) out[k] = A[k] - log_z;
      }
    }
  return make_result("log_softmax", a.shape(), std::move(out), {a}, [s, m](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        double total = 0.0;
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t k = (o * s.len + l) * s.inner + i;
          if (m[k] != 0.0) total += g[k];
        }
        for (std::size_t l = 0; l < s.len; ++l) {
          const std::size_t k = (o * s.len + l) * s.inner + i;
          if (m[k] != 0.0) gp[k] += g[k] - std::exp(y[k]) * total;
        }
      }
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return make_result("sum", {1}, {acc}, {a}, [](Node& self) {
    auto& gp = self.parents[0]->grad_buffer();
    for (double& v : gp) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return affine(sum(a), 1.0 / static_cast<double>(a.size()), 0.0); }

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require(pred.size() == target.size(), "mse: prediction and target sizes differ");
  const std::size_t n = pred.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = pred[i] - target[i];
    acc += r * r;
  }
  return make_result("mse", {1}, {acc / n}, {pred, target}, [n](Node& self) {
    Node& pp = *self.parents[0];
    Node& pt = *self.parents[1];
    for (std::size_t i = 0; i < n; ++i) {
      const double d = 2.0 * (pp.value[i] - pt.value[i]) / n * self.grad[0];
      if (pp.requires_grad) pp.grad_buffer()[i] += d;
      if (pt.requires_grad) pt.grad_buffer()[i] -= d;
    }
  });
}

Tensor mae_loss(const Tensor& pred, const Tensor& target) {
  require(pred.size() == target.size(), "mae: prediction and target sizes differ");
  const std::size_t n = pred.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(pred[i] - target[i]);
  return make_result("mae", {1}, {acc / n}, {pred, target}, [n](Node& self) {
    Node& pp = *self.parents[0];
    Node& pt = *self.parents[1];
    for (std::size_t i = 0; i < n; ++i) {
      const double r = pp.value[i] - pt.value[i];
      const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
      const double d = sign / n * self.grad[0];
      if (pp.requires_grad) pp.grad_buffer()[i] += d;
      if (pt.requires_grad) pt.grad_buffer()[i] -= d;
    }
  });
}

Tensor cross_entropy_loss(const Tensor& logits, std::span<const int> classes) {
  require(logits.rank() == 2, "cross_entropy expects [B x C] logits");
  const std::size_t batch = logits.dim(0), c = logits.dim(1);
  require(classes.size() == batch, "cross_entropy: one class index per row required");
  auto L = logits.data();
  std::vector<double> probs(batch * c);
  std::vector<int> cls(classes.begin(), classes.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    if (cls[i] < 0 || static_cast<std::size_t>(cls[i]) >= c) {
      throw DimensionError("class index " + std::to_string(cls[i]) + " out of range for " + std::to_string(c) +
                           " classes");
    }
    const double* row = L.data() + i * c;
    const double hi = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - hi);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - hi) / z;
    acc += hi + std::log(z) - row[cls[i]];
  }
  return make_result("cross_entropy", {1}, {acc / batch}, {logits},
                     [probs = std::move(probs), cls = std::move(cls), batch, c](Node& self) {
                       auto& gp = self.parents[0]->grad_buffer();
                       const double scale = self.grad[0] / batch;
                       for (std::size_t i = 0; i < batch; ++i)
                         for (std::size_t j = 0; j < c; ++j) {
                           const double onehot = static_cast<int>(j) == cls[i] ? 1.0 : 0.0;
                           gp[i * c + j] += (probs[i * c + j] - onehot) * scale;
                         }
                     });
}

Tensor dropout(DropoutKind kind, const Tensor& a, double rate, bool training, std::mt19937_64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return a;
  const double keep = 1.0 - rate;
  std::bernoulli_distribution coin(keep);
  std::vector<double> mask(a.size());
  if (kind == DropoutKind::Standard) {
    for (double& v : mask) v = coin(rng) ? 1.0 / keep : 0.0;
  } else {
    require(a.rank() == 3, "variational dropout expects [B x T x D]");
    const std::size_t batch = a.dim(0), steps = a.dim(1), d = a.dim(2);
    std::vector<double> per_seq(batch * d);
    for (double& v : per_seq) v = coin(rng) ? 1.0 / keep : 0.0;
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t t = 0; t < steps; ++t) std::copy_n(per_seq.data() + i * d, d, mask.data() + (i * steps + t) * d);
  }
  return mul(a, Tensor(a.shape(), std::move(mask)));
}

std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::Mse: return "mse";
    case LossKind::Mae: return "mae";
    case LossKind::CrossEntropy: return "cross_entropy";
  }
  return "?";
}

LossKind parse_loss(std::string_view name) {
  if (name == "mse") return LossKind::Mse;
  if (name == "mae") return LossKind::Mae;
  if (name == "cross_entropy") return LossKind::CrossEntropy;
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

}  // namespace pairnas::ad
