#include "ugpl/numerics/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace ugpl::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

Tensor& grad_of(Node& n) { return n.grad_buffer(); }

// Index maps from an output element to the contributing input elements.
struct Broadcast {
  enum class Kind { kSame, kRepeatB, kRepeatA, kGeneral };
  Shape out;
  Kind kind = Kind::kSame;
  std::size_t na = 0;
  std::size_t nb = 0;
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ib;

  std::size_t a_index(std::size_t i) const {
    switch (kind) {
      case Kind::kSame:
      case Kind::kRepeatB:
        return i;
      case Kind::kRepeatA:
        return i % na;
      case Kind::kGeneral:
        return ia[i];
    }
    return 0;
  }
  std::size_t b_index(std::size_t i) const {
    switch (kind) {
      case Kind::kSame:
      case Kind::kRepeatA:
        return i;
      case Kind::kRepeatB:
        return i % nb;
      case Kind::kGeneral:
        return ib[i];
    }
    return 0;
  }
};

Shape strip_leading_ones(const Shape& s) {
  std::size_t k = 0;
  while (k < s.size() && s[k] == 1) ++k;
  return Shape(s.begin() + static_cast<std::ptrdiff_t>(k), s.end());
}

bool is_suffix(const Shape& part, const Shape& whole) {
  if (part.size() > whole.size()) return false;
  return std::equal(part.begin(), part.end(), whole.end() - static_cast<std::ptrdiff_t>(part.size()));
}

Broadcast make_broadcast(const std::string& op, const Shape& a, const Shape& b) {
  Broadcast bc;
  const std::size_t r = std::max(a.size(), b.size());
  bc.out.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da == db || db == 1) {
      bc.out[i] = da;
    } else if (da == 1) {
      bc.out[i] = db;
    } else {
      throw ShapeError(op, a, b);
    }
  }
  bc.na = shape_numel(a);
  bc.nb = shape_numel(b);
  const std::size_t n = shape_numel(bc.out);
  if (a == b) {
    bc.kind = Broadcast::Kind::kSame;
  } else if (bc.na == n && bc.nb > 0 && is_suffix(strip_leading_ones(b), bc.out)) {
    bc.kind = Broadcast::Kind::kRepeatB;
  } else if (bc.nb == n && bc.na > 0 && is_suffix(strip_leading_ones(a), bc.out)) {
    bc.kind = Broadcast::Kind::kRepeatA;
  } else {
    bc.kind = Broadcast::Kind::kGeneral;
    auto strides_for = [&](const Shape& s) {
      std::vector<std::size_t> st(r, 0);
      std::size_t acc = 1;
      for (std::size_t k = 0; k < s.size(); ++k) {
        const std::size_t axis = s.size() - 1 - k;
        const std::size_t out_axis = r - 1 - k;
        st[out_axis] = s[axis] == 1 ? 0 : acc;
        acc *= s[axis];
      }
      return st;
    };
    const auto sa = strides_for(a);
    const auto sb = strides_for(b);
    bc.ia.resize(n);
    bc.ib.resize(n);
    std::vector<std::size_t> idx(r, 0);
    std::size_t oa = 0;
    std::size_t ob = 0;
    for (std::size_t i = 0; i < n; ++i) {
      bc.ia[i] = oa;
      bc.ib[i] = ob;
      for (std::size_t k = r; k-- > 0;) {
        ++idx[k];
        oa += sa[k];
        ob += sb[k];
        if (idx[k] < bc.out[k]) break;
        oa -= sa[k] * idx[k];
        ob -= sb[k] * idx[k];
        idx[k] = 0;
      }
    }
  }
  return bc;
}

template <class F, class DA, class DB>
Var binary(const char* name, const Var& a, const Var& b, F f, DA dfa, DB dfb) {
  auto bc = std::make_shared<Broadcast>(make_broadcast(name, a.shape(), b.shape()));
  Tensor out(bc->out);
  const auto& av = a.value().storage();
  const auto& bv = b.value().storage();
  auto& ov = out.storage();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = f(av[bc->a_index(i)], bv[bc->b_index(i)]);
  return Var::from_op(std::move(out), name, {a, b}, [bc, dfa, dfb](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const auto& av = pa.value.storage();
    const auto& bv = pb.value.storage();
    const auto& ov = self.value.storage();
    const auto& g = self.grad.storage();
    if (pa.requires_grad) {
      auto& ga = grad_of(pa).storage();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t ia = bc->a_index(i);
        ga[ia] += g[i] * dfa(av[ia], bv[bc->b_index(i)], ov[i]);
      }
    }
    if (pb.requires_grad) {
      auto& gb = grad_of(pb).storage();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t ib = bc->b_index(i);
        gb[ib] += g[i] * dfb(av[bc->a_index(i)], bv[ib], ov[i]);
      }
    }
  });
}

template <class F, class D>
Var unary(const char* name, const Var& x, F f, D df) {
  Tensor out(x.shape());
  const auto& xv = x.value().storage();
  auto& ov = out.storage();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = f(xv[i]);
  return Var::from_op(std::move(out), name, {x}, [df](Node& self) {
    Node& p = *self.parents[0];
    const auto& xv = p.value.storage();
    const auto& ov = self.value.storage();
    const auto& g = self.grad.storage();
    auto& gx = grad_of(p).storage();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv[i], ov[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const char* op, const Shape& s, std::size_t axis) {
  if (axis >= s.size()) {
    throw ShapeError(op, "axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  AxisSplit sp;
  for (std::size_t i = 0; i < axis; ++i) sp.outer *= s[i];
  sp.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) sp.inner *= s[i];
  return sp;
}

Shape reduced_shape(const Shape& s, std::size_t axis, bool keepdim) {
  Shape out = s;
  if (keepdim) {
    out[axis] = 1;
  } else {
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  return out;
}

Var extremum(const char* name, const Var& x, std::size_t axis, bool keepdim, bool take_max) {
  const AxisSplit sp = split_axis(name, x.shape(), axis);
  if (sp.n == 0) throw ShapeError(name, "empty reduction axis");
  Tensor out(reduced_shape(x.shape(), axis, keepdim));
  auto arg = std::make_shared<std::vector<std::size_t>>(out.size());
  const auto& xv = x.value().storage();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      std::size_t best = o * sp.n * sp.inner + in;
      for (std::size_t k = 1; k < sp.n; ++k) {
        const std::size_t idx = (o * sp.n + k) * sp.inner + in;
        if (take_max ? xv[idx] > xv[best] : xv[idx] < xv[best]) best = idx;
      }
      out[o * sp.inner + in] = xv[best];
      (*arg)[o * sp.inner + in] = best;
    }
  }
  return Var::from_op(std::move(out), name, {x}, [arg](Node& self) {
    auto& gx = grad_of(*self.parents[0]).storage();
    const auto& g = self.grad.storage();
    for (std::size_t i = 0; i < g.size(); ++i) gx[(*arg)[i]] += g[i];
  });
}

struct ConvGeom {
  std::size_t n, h, w, ci, kh, kw, co, stride, pad, ho, wo;
  std::size_t rows() const { return n * ho * wo; }
  std::size_t cols() const { return kh * kw * ci; }
};

void im2col(const ConvGeom& g, const double* x, double* col) {
  const std::size_t k = g.cols();
  for (std::size_t b = 0; b < g.n; ++b) {
    for (std::size_t oy = 0; oy < g.ho; ++oy) {
      for (std::size_t ox = 0; ox < g.wo; ++ox) {
        double* dst = col + ((b * g.ho + oy) * g.wo + ox) * k;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t kx = 0; kx < g.kw; ++kx, dst += g.ci) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.h) || ix >= static_cast<std::ptrdiff_t>(g.w)) {
              std::fill(dst, dst + g.ci, 0.0);
            } else {
              const double* src = x + ((b * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)) * g.ci;
              std::copy(src, src + g.ci, dst);
            }
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeom& g, const double* col, double* dx) {
  const std::size_t k = g.cols();
  for (std::size_t b = 0; b < g.n; ++b) {
    for (std::size_t oy = 0; oy < g.ho; ++oy) {
      for (std::size_t ox = 0; ox < g.wo; ++ox) {
        const double* src = col + ((b * g.ho + oy) * g.wo + ox) * k;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t kx = 0; kx < g.kw; ++kx, src += g.ci) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.h) || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            double* dst = dx + ((b * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)) * g.ci;
            for (std::size_t c = 0; c < g.ci; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
}

void require_rank(const char* op, const Var& x, std::size_t rank) {
  if (x.shape().size() != rank) {
    throw ShapeError(op, "expected rank " + std::to_string(rank) + ", got " + shape_str(x.shape()));
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Var div(const Var& a, const Var& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double o) { return -o / y; });
}

Var affine(const Var& x, double a, double b) {
  return unary(
      "affine", x, [a, b](double v) { return a * v + b; }, [a](double, double) { return a; });
}

Var relu(const Var& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
  return unary("sigmoid", x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var& x) {
  return unary(
      "softplus", x,
      [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](double v, double) { return stable_sigmoid(v); });
}

Var exp(const Var& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(const Var& x) {
  for (double v : x.value().storage()) {
    if (!(v > 0.0)) throw DomainError("log: non-positive input " + std::to_string(v));
  }
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var sqrt(const Var& x) {
  for (double v : x.value().storage()) {
    if (!(v >= 0.0)) throw DomainError("sqrt: negative input " + std::to_string(v));
  }
  return unary(
      "sqrt", x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Var square(const Var& x) {
  return unary(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var softmax(const Var& x) {
  if (x.shape().empty()) throw ShapeError("softmax", "scalar input");
  const std::size_t n = x.shape().back();
  const std::size_t rows = n == 0 ? 0 : x.size() / n;
  Tensor out(x.shape());
  const auto& xv = x.value().storage();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double* o = out.storage().data() + r * n;
    const double m = *std::max_element(in, in + n);
    double z = 0.0;
    for (std::size_t k = 0; k < n; ++k) z += (o[k] = std::exp(in[k] - m));
    for (std::size_t k = 0; k < n; ++k) o[k] /= z;
  }
  return Var::from_op(std::move(out), "softmax", {x}, [n, rows](Node& self) {
    auto& gx = grad_of(*self.parents[0]).storage();
    const auto& y = self.value.storage();
    const auto& g = self.grad.storage();
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += g[r * n + k] * y[r * n + k];
      for (std::size_t k = 0; k < n; ++k) gx[r * n + k] += y[r * n + k] * (g[r * n + k] - dot);
    }
  });
}

Var log_softmax(const Var& x) {
  if (x.shape().empty()) throw ShapeError("log_softmax", "scalar input");
  const std::size_t n = x.shape().back();
  const std::size_t rows = n == 0 ? 0 : x.size() / n;
  Tensor out(x.shape());
  const auto& xv = x.value().storage();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double* o = out.storage().data() + r * n;
    const double m = *std::max_element(in, in + n);
    double z = 0.0;
    for (std::size_t k = 0; k < n; ++k) z += std::exp(in[k] - m);
    const double lse = m + std::log(z);
    for (std::size_t k = 0; k < n; ++k) o[k] = in[k] - lse;
  }
  return Var::from_op(std::move(out), "log_softmax", {x}, [n, rows](Node& self) {
    auto& gx = grad_of(*self.parents[0]).storage();
    const auto& y = self.value.storage();
    const auto& g = self.grad.storage();
    for (std::size_t r = 0; r < rows; ++r) {
      double gsum = 0.0;
      for (std::size_t k = 0; k < n; ++k) gsum += g[r * n + k];
      for (std::size_t k = 0; k < n; ++k) gx[r * n + k] += g[r * n + k] - std::exp(y[r * n + k]) * gsum;
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul", a.shape(), b.shape());
  }
  const auto m = static_cast<Eigen::Index>(a.shape()[0]);
  const auto k = static_cast<Eigen::Index>(a.shape()[1]);
  const auto n = static_cast<Eigen::Index>(b.shape()[1]);
  Tensor out(Shape{a.shape()[0], b.shape()[1]});
  MapMat(out.storage().data(), m, n).noalias() =
      ConstMapMat(a.value().storage().data(), m, k) * ConstMapMat(b.value().storage().data(), k, n);
  return Var::from_op(std::move(out), "matmul", {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    ConstMapMat g(self.grad.storage().data(), m, n);
    if (pa.requires_grad) {
      MapMat(grad_of(pa).storage().data(), m, k).noalias() +=
          g * ConstMapMat(pb.value.storage().data(), k, n).transpose();
    }
    if (pb.requires_grad) {
      MapMat(grad_of(pb).storage().data(), k, n).noalias() +=
          ConstMapMat(pa.value.storage().data(), m, k).transpose() * g;
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  Var y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

Var conv2d(const Var& x, const Var& weight, std::size_t stride, std::size_t padding) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", weight, 4);
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws[2] != xs[3]) throw ShapeError("conv2d", xs, ws);
  if (stride == 0) throw ShapeError("conv2d", "stride must be positive");
  if (xs[1] + 2 * padding < ws[0] || xs[2] + 2 * padding < ws[1]) throw ShapeError("conv2d", xs, ws);
  auto geom = std::make_shared<ConvGeom>(ConvGeom{xs[0], xs[1], xs[2], xs[3], ws[0], ws[1], ws[3], stride, padding,
                                                  (xs[1] + 2 * padding - ws[0]) / stride + 1,
                                                  (xs[2] + 2 * padding - ws[1]) / stride + 1});
  const auto rows = static_cast<Eigen::Index>(geom->rows());
  const auto cols = static_cast<Eigen::Index>(geom->cols());
  const auto co = static_cast<Eigen::Index>(geom->co);
  std::vector<double> col(geom->rows() * geom->cols());
  im2col(*geom, x.value().storage().data(), col.data());
  Tensor out(Shape{geom->n, geom->ho, geom->wo, geom->co});
  MapMat(out.storage().data(), rows, co).noalias() =
      ConstMapMat(col.data(), rows, cols) * ConstMapMat(weight.value().storage().data(), cols, co);
  return Var::from_op(std::move(out), "conv2d", {x, weight}, [geom, rows, cols, co](Node& self) {
    Node& px = *self.parents[0];
    Node& pw = *self.parents[1];
    ConstMapMat g(self.grad.storage().data(), rows, co);
    if (pw.requires_grad) {
      std::vector<double> col(geom->rows() * geom->cols());
      im2col(*geom, px.value.storage().data(), col.data());
      MapMat(grad_of(pw).storage().data(), cols, co).noalias() += ConstMapMat(col.data(), rows, cols).transpose() * g;
    }
    if (px.requires_grad) {
      std::vector<double> dcol(geom->rows() * geom->cols());
      MapMat(dcol.data(), rows, cols).noalias() = g * ConstMapMat(pw.value.storage().data(), cols, co).transpose();
      col2im_add(*geom, dcol.data(), grad_of(px).storage().data());
    }
  });
}

Var max_pool2x2(const Var& x) {
  require_rank("max_pool2x2", x, 4);
  const Shape& s = x.shape();
  const std::size_t n = s[0], h = s[1], w = s[2], c = s[3];
  const std::size_t ho = h / 2, wo = w / 2;
  if (ho == 0 || wo == 0) throw ShapeError("max_pool2x2", "spatial size too small: " + shape_str(s));
  Tensor out(Shape{n, ho, wo, c});
  auto arg = std::make_shared<std::vector<std::size_t>>(out.size());
  const auto& xv = x.value().storage();
  std::size_t o = 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        for (std::size_t ch = 0; ch < c; ++ch, ++o) {
          std::size_t best = ((b * h + 2 * oy) * w + 2 * ox) * c + ch;
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = ((b * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch;
              if (xv[idx] > xv[best]) best = idx;
            }
          }
          out[o] = xv[best];
          (*arg)[o] = best;
        }
      }
    }
  }
  return Var::from_op(std::move(out), "max_pool2x2", {x}, [arg](Node& self) {
    auto& gx = grad_of(*self.parents[0]).storage();
    const auto& g = self.grad.storage();
    for (std::size_t i = 0; i < g.size(); ++i) gx[(*arg)[i]] += g[i];
  });
}

Var global_avg_pool(const Var& x) {
  require_rank("global_avg_pool", x, 4);
  const Shape& s = x.shape();
  const std::size_t n = s[0], hw = s[1] * s[2], c = s[3];
  Tensor out(Shape{n, c});
  const auto& xv = x.value().storage();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < hw; ++p) {
      for (std::size_t ch = 0; ch < c; ++ch) out[b * c + ch] += xv[(b * hw + p) * c + ch];
    }
    for (std::size_t ch = 0; ch < c; ++ch) out[b * c + ch] /= static_cast<double>(hw);
  }
  return Var::from_op(std::move(out), "global_avg_pool", {x}, [n, hw, c](Node& self) {
    auto& gx = grad_of(*self.parents[0]).storage();
    const auto& g = self.grad.storage();
    const double inv = 1.0 / static_cast<double>(hw);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t p = 0; p < hw; ++p) {
        for (std::size_t ch = 0; ch < c; ++ch) gx[(b * hw + p) * c + ch] += g[b * c + ch] * inv;
      }
    }
  });
}

Var adaptive_avg_pool1x1(const Var& x) {
  Var pooled = global_avg_pool(x);
  return reshape(pooled, Shape{x.shape()[0], 1, 1, x.shape()[3]});
}

Var reshape(const Var& x, Shape shape) {
  if (shape_numel(shape) != x.size()) throw ShapeError("reshape", x.shape(), shape);
  return Var::from_op(x.value().reshaped(std::move(shape)), "reshape", {x}, [](Node& self) {
    auto& gx = grad_of(*self.parents[0]).storage();
    const auto& g = self.grad.storage();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat", "no inputs");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw ShapeError("concat", "axis out of range for " + shape_str(ref));
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != ref.size()) throw ShapeError("concat", ref, s);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != ref[i]) throw ShapeError("concat", ref, s);
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit sp = split_axis("concat", out_shape, axis);
  Tensor out(out_shape);
  auto offsets = std::make_shared<std::vector<std::size_t>>();
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets->push_back(off);
    const std::size_t len = p.shape()[axis];
    const auto& pv = p.value().storage();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(pv.data() + o * len * sp.inner, len * sp.inner, out.storage().data() + (o * sp.n + off) * sp.inner);
    }
    off += len;
  }
  return Var::from_op(std::move(out), "concat", parts, [sp, axis, offsets](Node& self) {
    const auto& g = self.grad.storage();
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      Node& p = *self.parents[i];
      if (!p.requires_grad) continue;
      const std::size_t len = p.value.shape()[axis];
      auto& gp = grad_of(p).storage();
      for (std::size_t o = 0; o < sp.outer; ++o) {
        const double* src = g.data() + (o * sp.n + (*offsets)[i]) * sp.inner;
        double* dst = gp.data() + o * len * sp.inner;
        for (std::size_t k = 0; k < len * sp.inner; ++k) dst[k] += src[k];
      }
    }
  });
}

Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const AxisSplit sp = split_axis("slice", x.shape(), axis);
  if (begin > end || end > sp.n) {
    throw ShapeError("slice", "range [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                                  std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t len = end - begin;
  Tensor out(out_shape);
  const auto& xv = x.value().storage();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(xv.data() + (o * sp.n + begin) * sp.inner, len * sp.inner, out.storage().data() + o * len * sp.inner);
  }
  return Var::from_op(std::move(out), "slice", {x}, [sp, begin, len](Node& self) {
    auto& gx = grad_of(*self.parents[0]).storage();
    const auto& g = self.grad.storage();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      double* dst = gx.data() + (o * sp.n + begin) * sp.inner;
      const double* src = g.data() + o * len * sp.inner;
      for (std::size_t k = 0; k < len * sp.inner; ++k) dst[k] += src[k];
    }
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().storage()) s += v;
  return Var::from_op(Tensor::scalar(s), "sum", {x}, [](Node& self) {
    auto& gx = grad_of(*self.parents[0]).storage();
    const double g = self.grad[0];
    for (double& v : gx) v += g;
  });
}

Var mean(const Var& x) {
  if (x.size() == 0) throw ShapeError("mean", "empty input");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Var sum(const Var& x, std::size_t axis, bool keepdim) {
  const AxisSplit sp = split_axis("sum", x.shape(), axis);
  Tensor out(reduced_shape(x.shape(), axis, keepdim));
  const auto& xv = x.value().storage();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t k = 0; k < sp.n; ++k) {
      for (std::size_t in = 0; in < sp.inner; ++in) out[o * sp.inner + in] += xv[(o * sp.n + k) * sp.inner + in];
    }
  }
  return Var::from_op(std::move(out), "sum_axis", {x}, [sp](Node& self) {
    auto& gx = grad_of(*self.parents[0]).storage();
    const auto& g = self.grad.storage();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t k = 0; k < sp.n; ++k) {
        for (std::size_t in = 0; in < sp.inner; ++in) gx[(o * sp.n + k) * sp.inner + in] += g[o * sp.inner + in];
      }
    }
  });
}

Var mean(const Var& x, std::size_t axis, bool keepdim) {
  const AxisSplit sp = split_axis("mean", x.shape(), axis);
  if (sp.n == 0) throw ShapeError("mean", "empty reduction axis");
  return scale(sum(x, axis, keepdim), 1.0 / static_cast<double>(sp.n));
}

Var max(const Var& x, std::size_t axis, bool keepdim) { return extremum("max", x, axis, keepdim, true); }
Var min(const Var& x, std::size_t axis, bool keepdim) { return extremum("min", x, axis, keepdim, false); }

Var mse(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) throw ShapeError("mse", a.shape(), b.shape());
  return mean(square(sub(a, b)));
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, bool training) {
  if (x.shape().empty()) throw ShapeError("batch_norm", "scalar input");
  const std::size_t c = x.shape().back();
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) throw ShapeError("batch_norm", x.shape(), gamma.shape());
  if (state.running_mean.size() != c) throw ShapeError("batch_norm", x.shape(), state.running_mean.shape());
  const std::size_t rows = x.size() / c;
  if (training && rows < 2) throw ShapeError("batch_norm", "training mode needs more than one value per channel");
  const auto& xv = x.value().storage();

  auto mean_v = std::make_shared<std::vector<double>>(c, 0.0);
  auto invstd = std::make_shared<std::vector<double>>(c, 0.0);
  if (training) {
    std::vector<double> var(c, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < c; ++k) (*mean_v)[k] += xv[r * c + k];
    }
    for (double& m : *mean_v) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < c; ++k) {
        const double d = xv[r * c + k] - (*mean_v)[k];
        var[k] += d * d;
      }
    }
    for (std::size_t k = 0; k < c; ++k) {
      const double biased = var[k] / static_cast<double>(rows);
      const double unbiased = var[k] / static_cast<double>(rows - 1);
      (*invstd)[k] = 1.0 / std::sqrt(biased + state.eps);
      state.running_mean[k] = (1.0 - state.momentum) * state.running_mean[k] + state.momentum * (*mean_v)[k];
      state.running_var[k] = (1.0 - state.momentum) * state.running_var[k] + state.momentum * unbiased;
    }
  } else {
    for (std::size_t k = 0; k < c; ++k) {
      (*mean_v)[k] = state.running_mean[k];
      (*invstd)[k] = 1.0 / std::sqrt(state.running_var[k] + state.eps);
    }
  }

  const auto& gv = gamma.value().storage();
  const auto& bv = beta.value().storage();
  Tensor out(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < c; ++k) {
      const std::size_t i = r * c + k;
      (*xhat)[i] = (xv[i] - (*mean_v)[k]) * (*invstd)[k];
      out[i] = (*xhat)[i] * gv[k] + bv[k];
    }
  }
  return Var::from_op(std::move(out), training ? "batch_norm_train" : "batch_norm_eval", {x, gamma, beta},
                      [rows, c, training, xhat, invstd](Node& self) {
                        Node& px = *self.parents[0];
                        Node& pg = *self.parents[1];
                        Node& pb = *self.parents[2];
                        const auto& g = self.grad.storage();
                        std::vector<double> sum_dy(c, 0.0);
                        std::vector<double> sum_dy_xhat(c, 0.0);
                        for (std::size_t r = 0; r < rows; ++r) {
                          for (std::size_t k = 0; k < c; ++k) {
                            sum_dy[k] += g[r * c + k];
                            sum_dy_xhat[k] += g[r * c + k] * (*xhat)[r * c + k];
                          }
                        }
                        if (pg.requires_grad) {
                          auto& gg = grad_of(pg).storage();
                          for (std::size_t k = 0; k < c; ++k) gg[k] += sum_dy_xhat[k];
                        }
                        if (pb.requires_grad) {
                          auto& gb = grad_of(pb).storage();
                          for (std::size_t k = 0; k < c; ++k) gb[k] += sum_dy[k];
                        }
                        if (px.requires_grad) {
                          auto& gx = grad_of(px).storage();
                          const auto& gamma_v = pg.value.storage();
                          const double inv_rows = 1.0 / static_cast<double>(rows);
                          for (std::size_t r = 0; r < rows; ++r) {
                            for (std::size_t k = 0; k < c; ++k) {
                              const std::size_t i = r * c + k;
                              const double scale_k = gamma_v[k] * (*invstd)[k];
                              if (training) {
                                gx[i] += scale_k * (g[i] - inv_rows * sum_dy[k] - (*xhat)[i] * inv_rows * sum_dy_xhat[k]);
                              } else {
                                gx[i] += scale_k * g[i];
                              }
                            }
                          }
                        }
                      });
}

}  // namespace ugpl::ops
