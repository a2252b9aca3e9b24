// SPDX-License-Identifier: Apache-2.0
#include "sunet/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "sunet/errors.hpp"

namespace sunet::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

void require_rank(const char* op, const Var& a, std::size_t rank) {
  if (a.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(a.shape()));
  }
}

bool wants(Tape& t, const Var& v) { return t.requires_grad(v.id()); }

// Elementwise unary op; `dfdx(x, y)` is the local derivative given input and output.
template <typename F, typename D>
Var unary(const Var& a, F f, D dfdx) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  Tape& tape = a.tape();
  const std::size_t out_id = tape.size();
  return tape.record(std::move(y), {a}, [a, out_id, dfdx](Tape& t, const Tensor& g) {
    const Tensor& xv = t.value(a.id());
    const Tensor& yv = t.value(out_id);
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(xv[i], yv[i]);
  });
}

// Splits a shape around `axis` into (outer, axis extent, inner) for strided loops.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor y = a.value();
  y += b.value();
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (wants(t, a)) t.grad_buffer(a) += g;
    if (wants(t, b)) t.grad_buffer(b) += g;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (wants(t, a)) t.grad_buffer(a) += g;
    if (wants(t, b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const Tensor& av2 = t.value(a.id());
    const Tensor& bv2 = t.value(b.id());
    if (wants(t, a)) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
    }
    if (wants(t, b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
    }
  });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var add_constant(const Var& a, const Tensor& c) {
  if (a.shape() != c.shape()) {
    throw ShapeError("add_constant: shape " + shape_string(a.shape()) + " vs " + shape_string(c.shape()));
  }
  Tensor y = a.value();
  y += c;
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor& g) { t.grad_buffer(a) += g; });
}

Var sigmoid(const Var& a) {
  return unary(
      a,
      [](double x) {
        // Split on sign so exp never overflows.
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  for (double v : a.value().values()) {
    if (!(v > 0)) throw NumericalError("log of non-positive value " + std::to_string(v));
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var clamp_min(const Var& a, double floor) {
  return unary(
      a, [floor](double x) { return std::max(x, floor); }, [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Var softmax(const Var& a, std::size_t axis) {
  const Tensor& x = a.value();
  if (axis >= x.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for shape " + shape_string(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  Tensor y(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      double mx = x[base];
      for (std::size_t k = 1; k < s.extent; ++k) mx = std::max(mx, x[base + k * s.inner]);
      double z = 0;
      for (std::size_t k = 0; k < s.extent; ++k) {
        const double e = std::exp(x[base + k * s.inner] - mx);
        y[base + k * s.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < s.extent; ++k) y[base + k * s.inner] /= z;
    }
  }
  Tape& tape = a.tape();
  const std::size_t out_id = tape.size();
  return tape.record(std::move(y), {a}, [a, out_id, s](Tape& t, const Tensor& g) {
    const Tensor& yv = t.value(out_id);
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.extent * s.inner + in;
        double dot = 0;
        for (std::size_t k = 0; k < s.extent; ++k) dot += g[base + k * s.inner] * yv[base + k * s.inner];
        for (std::size_t k = 0; k < s.extent; ++k) {
          const std::size_t i = base + k * s.inner;
          ga[i] += yv[i] * (g[i] - dot);
        }
      }
    }
  });
}

Var sum(const Var& a) {
  double total = 0;
  for (double v : a.value().values()) total += v;
  return a.tape().record(Tensor::scalar(total), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    const double gv = g[0];
    for (double& v : ga.values()) v += gv;
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var matmul(const Var& a, const Var& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor y(Shape{m, n});
  MatMap(y.data(), m, n).noalias() = ConstMatMap(a.value().data(), m, k) * ConstMatMap(b.value().data(), k, n);
  return a.tape().record(std::move(y), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g) {
    ConstMatMap gm(g.data(), m, n);
    if (wants(t, a)) {
      MatMap(t.grad_buffer(a).data(), m, k).noalias() += gm * ConstMatMap(t.value(b.id()).data(), k, n).transpose();
    }
    if (wants(t, b)) {
      MatMap(t.grad_buffer(b).data(), k, n).noalias() += ConstMatMap(t.value(a.id()).data(), m, k).transpose() * gm;
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank("linear", x, 2);
  require_rank("linear", weight, 2);
  const std::size_t batch = x.shape()[0], in = x.shape()[1], out = weight.shape()[0];
  const bool has_bias = bias.valid();
  if (weight.shape()[1] != in || (has_bias && bias.shape() != Shape{out})) {
    throw ShapeError("linear: input " + shape_string(x.shape()) + ", weight " + shape_string(weight.shape()) +
                     (has_bias ? ", bias " + shape_string(bias.shape()) : std::string()));
  }
  Tensor y(Shape{batch, out});
  MatMap ym(y.data(), batch, out);
  ym.noalias() = ConstMatMap(x.value().data(), batch, in) * ConstMatMap(weight.value().data(), out, in).transpose();
  std::vector<Var> inputs{x, weight};
  if (has_bias) {
    ym.rowwise() += ConstVecMap(bias.value().data(), out).transpose();
    inputs.push_back(bias);
  }
  return x.tape().record(std::move(y), inputs, [x, weight, bias, has_bias, batch, in, out](Tape& t, const Tensor& g) {
    ConstMatMap gm(g.data(), batch, out);
    if (wants(t, x)) {
      MatMap(t.grad_buffer(x).data(), batch, in).noalias() += gm * ConstMatMap(t.value(weight.id()).data(), out, in);
    }
    if (wants(t, weight)) {
      MatMap(t.grad_buffer(weight).data(), out, in).noalias() +=
          gm.transpose() * ConstMatMap(t.value(x.id()).data(), batch, in);
    }
    if (has_bias && wants(t, bias)) VecMap(t.grad_buffer(bias).data(), out) += gm.colwise().sum().transpose();
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) throw ShapeError("concat: " + shape_string(s) + " incompatible with " + shape_string(first));
    out_shape[axis] += s[axis];
  }
  const AxisSplit os = split_at(out_shape, axis);
  Tensor y(out_shape);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    offsets.push_back(offset);
    const Tensor& v = p.value();
    const std::size_t width = v.shape()[axis] * os.inner;
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(v.data() + o * width, width, y.data() + o * os.extent * os.inner + offset * os.inner);
    }
    offset += v.shape()[axis];
  }
  return parts.front().tape().record(std::move(y), parts, [parts, offsets, axis, os](Tape& t, const Tensor& g) {
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      const Var& p = parts[pi];
      if (!wants(t, p)) continue;
      Tensor& gp = t.grad_buffer(p);
      const std::size_t width = p.shape()[axis] * os.inner;
      for (std::size_t o = 0; o < os.outer; ++o) {
        const double* src = g.data() + o * os.extent * os.inner + offsets[pi] * os.inner;
        double* dst = gp.data() + o * width;
        for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
      }
    }
  });
}

Var narrow(const Var& a, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& in_shape = a.shape();
  if (axis >= in_shape.size() || start + length > in_shape[axis] || length == 0) {
    throw ShapeError("narrow: [" + std::to_string(start) + ", +" + std::to_string(length) + ") on axis " +
                     std::to_string(axis) + " of " + shape_string(in_shape));
  }
  const AxisSplit s = split_at(in_shape, axis);
  Shape out_shape = in_shape;
  out_shape[axis] = length;
  Tensor y(out_shape);
  const std::size_t width = length * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(a.value().data() + o * s.extent * s.inner + start * s.inner, width, y.data() + o * width);
  }
  return a.tape().record(std::move(y), {a}, [a, s, start, width](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* dst = ga.data() + o * s.extent * s.inner + start * s.inner;
      const double* src = g.data() + o * width;
      for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor y = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(y), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var conv2d(const Var& input, const Var& kernel, const Var& bias, Conv2dOptions opts) {
  require_rank("conv2d input", input, 4);
  require_rank("conv2d kernel", kernel, 4);
  const bool has_bias = bias.valid();
  if (has_bias) require_rank("conv2d bias", bias, 1);
  const Shape& is = input.shape();
  const Shape& ks = kernel.shape();
  const std::size_t n = is[0], c = is[1], h = is[2], w = is[3];
  const std::size_t co = ks[0], kh = ks[2], kw = ks[3];
  const auto [ph, pw] = opts.padding;
  const auto [sh, sw] = opts.stride;
  if (ks[1] != c) {
    throw ShapeError("conv2d: kernel " + shape_string(ks) + " expects " + std::to_string(ks[1]) +
                     " input channels, input is " + shape_string(is));
  }
  if (has_bias && bias.shape()[0] != co) throw ShapeError("conv2d: bias " + shape_string(bias.shape()) + " for " + shape_string(ks));
  if (sh == 0 || sw == 0) throw ShapeError("conv2d: stride must be positive");
  if (kh > h + 2 * ph || kw > w + 2 * pw) {
    throw ShapeError("conv2d: kernel " + shape_string(ks) + " larger than padded input " + shape_string(is));
  }
  const std::size_t ho = (h + 2 * ph - kh) / sh + 1;
  const std::size_t wo = (w + 2 * pw - kw) / sw + 1;
  const std::size_t patch = c * kh * kw;
  const std::size_t positions = ho * wo;

  // im2col per sample; kept for the kernel gradient.
  auto cols = std::make_shared<AlignedBuffer>(n * patch * positions, 0.0);
  const Tensor& x = input.value();
  for (std::size_t b = 0; b < n; ++b) {
    double* col = cols->data() + b * patch * positions;
    for (std::size_t ci = 0; ci < c; ++ci) {
      const double* plane = x.data() + (b * c + ci) * h * w;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        for (std::size_t kx = 0; kx < kw; ++kx) {
          double* row = col + ((ci * kh + ky) * kw + kx) * positions;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * sh + ky) - static_cast<std::ptrdiff_t>(ph);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * sw + kx) - static_cast<std::ptrdiff_t>(pw);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              row[oy * wo + ox] = plane[iy * w + ix];
            }
          }
        }
      }
    }
  }

  Tensor y(Shape{n, co, ho, wo});
  ConstMatMap km(kernel.value().data(), co, patch);
  for (std::size_t b = 0; b < n; ++b) {
    MatMap ym(y.data() + b * co * positions, co, positions);
    ym.noalias() = km * ConstMatMap(cols->data() + b * patch * positions, patch, positions);
    if (has_bias) ym.colwise() += ConstVecMap(bias.value().data(), co);
  }
  std::vector<Var> inputs{input, kernel};
  if (has_bias) inputs.push_back(bias);

  return input.tape().record(
      std::move(y), inputs,
      [=](Tape& t, const Tensor& g) {
        if (has_bias && wants(t, bias)) {
          VecMap gb(t.grad_buffer(bias).data(), co);
          for (std::size_t b = 0; b < n; ++b) gb += ConstMatMap(g.data() + b * co * positions, co, positions).rowwise().sum();
        }
        if (wants(t, kernel)) {
          MatMap gk(t.grad_buffer(kernel).data(), co, patch);
          for (std::size_t b = 0; b < n; ++b) {
            gk.noalias() += ConstMatMap(g.data() + b * co * positions, co, positions) *
                            ConstMatMap(cols->data() + b * patch * positions, patch, positions).transpose();
          }
        }
        if (wants(t, input)) {
          Tensor& gi = t.grad_buffer(input);
          ConstMatMap kmat(t.value(kernel.id()).data(), co, patch);
          RowMat dcol(patch, positions);
          for (std::size_t b = 0; b < n; ++b) {
            dcol.noalias() = kmat.transpose() * ConstMatMap(g.data() + b * co * positions, co, positions);
            for (std::size_t ci = 0; ci < c; ++ci) {
              double* plane = gi.data() + (b * c + ci) * h * w;
              for (std::size_t ky = 0; ky < kh; ++ky) {
                for (std::size_t kx = 0; kx < kw; ++kx) {
                  const double* row = dcol.data() + ((ci * kh + ky) * kw + kx) * positions;
                  for (std::size_t oy = 0; oy < ho; ++oy) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oy * sh + ky) - static_cast<std::ptrdiff_t>(ph);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t ox = 0; ox < wo; ++ox) {
                      const std::ptrdiff_t ix =
                          static_cast<std::ptrdiff_t>(ox * sw + kx) - static_cast<std::ptrdiff_t>(pw);
                      if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                      plane[iy * w + ix] += row[oy * wo + ox];
                    }
                  }
                }
              }
            }
          }
        }
      });
}

Var max_pool2d(const Var& x, std::size_t window) {
  require_rank("max_pool2d", x, 4);
  const Shape& s = x.shape();
  if (window == 0 || s[2] % window != 0 || s[3] % window != 0) {
    throw ShapeError("max_pool2d: window " + std::to_string(window) + " does not tile " + shape_string(s));
  }
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  const std::size_t ho = h / window, wo = w / window;
  Tensor y(Shape{s[0], s[1], ho, wo});
  auto argmax = std::make_shared<std::vector<std::size_t>>(y.size());
  const Tensor& xv = x.value();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = p * h * w + oy * window * w + ox * window;
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::size_t idx = p * h * w + (oy * window + dy) * w + ox * window + dx;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        const std::size_t o = (p * ho + oy) * wo + ox;
        y[o] = xv[best];
        (*argmax)[o] = best;
      }
    }
  }
  return x.tape().record(std::move(y), {x}, [x, argmax](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t o = 0; o < g.size(); ++o) gx[(*argmax)[o]] += g[o];
  });
}

Var upsample2d(const Var& x, std::size_t factor) {
  require_rank("upsample2d", x, 4);
  if (factor == 0) throw ShapeError("upsample2d: factor must be positive");
  const Shape& s = x.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  const std::size_t ho = h * factor, wo = w * factor;
  Tensor y(Shape{s[0], s[1], ho, wo});
  const Tensor& xv = x.value();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        y[(p * ho + oy) * wo + ox] = xv[(p * h + oy / factor) * w + ox / factor];
      }
    }
  }
  return x.tape().record(std::move(y), {x}, [x, planes, h, w, ho, wo, factor](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t oy = 0; oy < ho; ++oy) {
        for (std::size_t ox = 0; ox < wo; ++ox) {
          gx[(p * h + oy / factor) * w + ox / factor] += g[(p * ho + oy) * wo + ox];
        }
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  require_rank("global_avg_pool", x, 4);
  const Shape& s = x.shape();
  const std::size_t planes = s[0] * s[1], area = s[2] * s[3];
  Tensor y(Shape{s[0], s[1]});
  for (std::size_t p = 0; p < planes; ++p) {
    double acc = 0;
    for (std::size_t i = 0; i < area; ++i) acc += x.value()[p * area + i];
    y[p] = acc / static_cast<double>(area);
  }
  return x.tape().record(std::move(y), {x}, [x, planes, area](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    const double inv = 1.0 / static_cast<double>(area);
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t i = 0; i < area; ++i) gx[p * area + i] += g[p] * inv;
    }
  });
}

Var broadcast_spatial(const Var& v, std::size_t height, std::size_t width) {
  require_rank("broadcast_spatial", v, 2);
  const std::size_t planes = v.shape()[0] * v.shape()[1], area = height * width;
  Tensor y(Shape{v.shape()[0], v.shape()[1], height, width});
  for (std::size_t p = 0; p < planes; ++p) std::fill_n(y.data() + p * area, area, v.value()[p]);
  return v.tape().record(std::move(y), {v}, [v, planes, area](Tape& t, const Tensor& g) {
    Tensor& gv = t.grad_buffer(v);
    for (std::size_t p = 0; p < planes; ++p) {
      double acc = 0;
      for (std::size_t i = 0; i < area; ++i) acc += g[p * area + i];
      gv[p] += acc;
    }
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
               BatchNormOptions opts) {
  const Shape& s = x.shape();
  if (s.size() != 2 && s.size() != 4) throw ShapeError("batch_norm: expected [N,C] or [N,C,H,W], got " + shape_string(s));
  const std::size_t n = s[0], c = s[1];
  const std::size_t inner = s.size() == 4 ? s[2] * s[3] : 1;
  const Shape channel_shape{c};
  if (gamma.shape() != channel_shape || beta.shape() != channel_shape || running_mean.shape() != channel_shape ||
      running_var.shape() != channel_shape) {
    throw ShapeError("batch_norm: per-channel parameters must have shape " + shape_string(channel_shape));
  }
  const std::size_t count = n * inner;
  if (opts.training && count < 2) throw ShapeError("batch_norm: training needs more than one value per channel");

  const Tensor& xv = x.value();
  auto idx = [c, inner](std::size_t b, std::size_t ch, std::size_t i) { return (b * c + ch) * inner + i; };

  std::vector<double> mu(c), inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (opts.training) {
      double m = 0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < inner; ++i) m += xv[idx(b, ch, i)];
      m /= static_cast<double>(count);
      double var = 0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < inner; ++i) var += (xv[idx(b, ch, i)] - m) * (xv[idx(b, ch, i)] - m);
      var /= static_cast<double>(count);
      mu[ch] = m;
      inv_std[ch] = 1.0 / std::sqrt(var + opts.eps);
      const double unbiased = var * static_cast<double>(count) / static_cast<double>(count - 1);
      running_mean[ch] = (1 - opts.momentum) * running_mean[ch] + opts.momentum * m;
      running_var[ch] = (1 - opts.momentum) * running_var[ch] + opts.momentum * unbiased;
    } else {
      mu[ch] = running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(running_var[ch] + opts.eps);
    }
  }

  auto xhat = std::make_shared<Tensor>(s);
  Tensor y(s);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t k = idx(b, ch, i);
        (*xhat)[k] = (xv[k] - mu[ch]) * inv_std[ch];
        y[k] = gamma.value()[ch] * (*xhat)[k] + beta.value()[ch];
      }
    }
  }

  const bool training = opts.training;
  return x.tape().record(std::move(y), {x, gamma, beta},
                         [=, inv_std = std::move(inv_std)](Tape& t, const Tensor& g) {
                           std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
                           for (std::size_t b = 0; b < n; ++b)
                             for (std::size_t ch = 0; ch < c; ++ch)
                               for (std::size_t i = 0; i < inner; ++i) {
                                 const std::size_t k = idx(b, ch, i);
                                 sum_g[ch] += g[k];
                                 sum_gx[ch] += g[k] * (*xhat)[k];
                               }
                           if (wants(t, gamma)) {
                             Tensor& gg = t.grad_buffer(gamma);
                             for (std::size_t ch = 0; ch < c; ++ch) gg[ch] += sum_gx[ch];
                           }
                           if (wants(t, beta)) {
                             Tensor& gb = t.grad_buffer(beta);
                             for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += sum_g[ch];
                           }
                           if (!wants(t, x)) return;
                           const Tensor& gam = t.value(gamma.id());
                           Tensor& gx = t.grad_buffer(x);
                           const double m = static_cast<double>(count);
                           for (std::size_t b = 0; b < n; ++b)
                             for (std::size_t ch = 0; ch < c; ++ch)
                               for (std::size_t i = 0; i < inner; ++i) {
                                 const std::size_t k = idx(b, ch, i);
                                 if (training) {
                                   gx[k] += gam[ch] * inv_std[ch] *
                                            (g[k] - sum_g[ch] / m - (*xhat)[k] * sum_gx[ch] / m);
                                 } else {
                                   gx[k] += gam[ch] * inv_std[ch] * g[k];
                                 }
                               }
                         });
}

Var straight_through(const Var& soft) {
  const Tensor& sv = soft.value();
  if (sv.rank() == 0 || sv.empty()) throw ShapeError("straight_through: empty input");
  const std::size_t width = sv.shape().back();
  Tensor y(sv.shape(), 0.0);
  for (std::size_t r = 0; r < sv.size() / width; ++r) {
    const double* row = sv.data() + r * width;
    y[r * width + static_cast<std::size_t>(std::max_element(row, row + width) - row)] = 1.0;
  }
  return soft.tape().record(std::move(y), {soft}, [soft](Tape& t, const Tensor& g) { t.grad_buffer(soft) += g; });
}

}  // namespace sunet::ops
