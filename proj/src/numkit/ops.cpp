#include "scapv/numkit/ops.hpp"

// Eigen's coefficient-based kernel for small products peels on the runtime
// alignment of its operands, so the same product could round differently
// from one heap layout to the next. The blocked kernel packs its inputs and
// does not.
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 0
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "scapv/numkit/errors.hpp"

namespace scapv::numkit {

namespace {

using detail::Node;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using MapM = Eigen::Map<RowMat>;

void require_finite(const char* op, const std::vector<double>& v) {
  // x - x is NaN exactly for NaN and +-Inf; the branch-free form vectorizes.
  bool finite = true;
  for (double x : v) finite &= (x - x == 0.0);
  if (!finite) throw NumericError(std::string("non-finite output in ") + op);
}

std::shared_ptr<Node> node_of(const Tensor& t) {
  if (!t.defined()) throw ContractError("use of undefined tensor");
  return t.node();
}

template <typename Inputs>
Tensor make_result(const char* op, Shape shape, std::vector<double> value, const Inputs& inputs,
                   std::function<void(Node&)> backward_fn) {
  require_finite(op, value);
  auto out = std::make_shared<Node>();
  out->shape = std::move(shape);
  out->value = std::move(value);
  out->op = op;
  bool track = false;
  if (grad_enabled()) {
    for (const Tensor& t : inputs) track = track || t.requires_grad();
  }
  if (track) {
    out->requires_grad = true;
    for (const Tensor& t : inputs) out->parents.push_back(node_of(t));
    out->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(out));
}

Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::initializer_list<Tensor> inputs, std::function<void(Node&)> backward_fn) {
  return make_result<std::initializer_list<Tensor>>(op, std::move(shape), std::move(value), inputs,
                                                    std::move(backward_fn));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                       shape_str(b));
}

// Outer/axis/inner extents for reductions and axis-wise ops.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                         shape_str(s));
  }
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

Shape reduced_shape(const Shape& s, std::size_t axis, bool keepdim) {
  Shape out = s;
  if (keepdim) {
    out[axis] = 1;
  } else {
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
    if (out.empty()) out.push_back(1);
  }
  return out;
}

// Trailing-dimension broadcast check: returns size of b's block.
std::size_t broadcast_block(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return shape_numel(b);
  if (b.size() > a.size() || !std::equal(b.rbegin(), b.rend(), a.rbegin())) shape_error(op, a, b);
  return shape_numel(b);
}

template <typename F>
Tensor unary(const char* op, const Tensor& a, F&& f, std::function<void(Node&)> backward_fn) {
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return make_result(op, a.shape(), std::move(out), {a}, std::move(backward_fn));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) shape_error("matmul", sa, sb);
  const auto m = static_cast<Eigen::Index>(sa[0]);
  const auto k = static_cast<Eigen::Index>(sa[1]);
  const auto n = static_cast<Eigen::Index>(sb[1]);
  std::vector<double> out(static_cast<std::size_t>(m * n));
  MapM(out.data(), m, n).noalias() = MapC(a.data().data(), m, k) * MapC(b.data().data(), k, n);
  return make_result("matmul", {sa[0], sb[1]}, std::move(out), {a, b}, [m, k, n](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    MapC g(self.grad.data(), m, n);
    if (pa.requires_grad) {
      MapM(pa.ensure_grad().data(), m, k).noalias() += g * MapC(pb.value.data(), k, n).transpose();
    }
    if (pb.requires_grad) {
      MapM(pb.ensure_grad().data(), k, n).noalias() += MapC(pa.value.data(), m, k).transpose() * g;
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const std::size_t nb = broadcast_block("add", a.shape(), b.shape());
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t base = 0; base < av.size(); base += nb) {
    for (std::size_t j = 0; j < nb; ++j) {
      const std::size_t i = base + j;
      out[i] = av[i] + bv[j];
    }
  }
  return make_result("add", a.shape(), std::move(out), {a, b}, [nb](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& ga = pa.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      for (std::size_t base = 0; base < self.grad.size(); base += nb) {
        for (std::size_t j = 0; j < nb; ++j) {
          const std::size_t i = base + j;
          gb[j] += self.grad[i];
        }
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const std::size_t nb = broadcast_block("sub", a.shape(), b.shape());
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t base = 0; base < av.size(); base += nb) {
    for (std::size_t j = 0; j < nb; ++j) {
      const std::size_t i = base + j;
      out[i] = av[i] - bv[j];
    }
  }
  return make_result("sub", a.shape(), std::move(out), {a, b}, [nb](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& ga = pa.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      for (std::size_t base = 0; base < self.grad.size(); base += nb) {
        for (std::size_t j = 0; j < nb; ++j) {
          const std::size_t i = base + j;
          gb[j] -= self.grad[i];
        }
      }
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const std::size_t nb = broadcast_block("mul", a.shape(), b.shape());
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t base = 0; base < av.size(); base += nb) {
    for (std::size_t j = 0; j < nb; ++j) {
      const std::size_t i = base + j;
      out[i] = av[i] * bv[j];
    }
  }
  return make_result("mul", a.shape(), std::move(out), {a, b}, [nb](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& ga = pa.ensure_grad();
      for (std::size_t base = 0; base < ga.size(); base += nb) {
        for (std::size_t j = 0; j < nb; ++j) {
          const std::size_t i = base + j;
          ga[i] += self.grad[i] * pb.value[j];
        }
      }
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      for (std::size_t base = 0; base < self.grad.size(); base += nb) {
        for (std::size_t j = 0; j < nb; ++j) {
          const std::size_t i = base + j;
          gb[j] += self.grad[i] * pa.value[i];
        }
      }
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(s0));
  }
  Shape out_shape = s0;
  out_shape[axis] = 0;
  std::vector<std::size_t> lens;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != s0.size()) shape_error("concat", s0, s);
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != s0[d]) shape_error("concat", s0, s);
    }
    out_shape[axis] += s[axis];
    lens.push_back(s[axis]);
  }
  const AxisSplit sp = split_at(out_shape, axis, "concat");
  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& v = parts[p].data();
    const std::size_t block = lens[p] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(v.data() + o * block, block, out.data() + o * sp.len * sp.inner + offset);
    }
    offset += block;
  }
  return make_result("concat", out_shape, std::move(out), parts, [sp, lens](Node& self) {
    std::size_t off = 0;
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      const std::size_t block = lens[p] * sp.inner;
      auto& parent = *self.parents[p];
      if (parent.requires_grad) {
        auto& g = parent.ensure_grad();
        for (std::size_t o = 0; o < sp.outer; ++o) {
          const double* src = self.grad.data() + o * sp.len * sp.inner + off;
          double* dst = g.data() + o * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
      off += block;
    }
  });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor sum(const Tensor& a, std::size_t axis, bool keepdim) {
  const AxisSplit sp = split_at(a.shape(), axis, "sum");
  const auto& av = a.data();
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t l = 0; l < sp.len; ++l) {
      const double* src = av.data() + (o * sp.len + l) * sp.inner;
      double* dst = out.data() + o * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
    }
  }
  return make_result("sum", reduced_shape(a.shape(), axis, keepdim), std::move(out), {a},
                     [sp](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t o = 0; o < sp.outer; ++o) {
                         for (std::size_t l = 0; l < sp.len; ++l) {
                           double* dst = g.data() + (o * sp.len + l) * sp.inner;
                           const double* src = self.grad.data() + o * sp.inner;
                           for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
                         }
                       }
                     });
}

Tensor mean(const Tensor& a, std::size_t axis, bool keepdim) {
  const AxisSplit sp = split_at(a.shape(), axis, "mean");
  const auto& av = a.data();
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t l = 0; l < sp.len; ++l) {
      const double* src = av.data() + (o * sp.len + l) * sp.inner;
      double* dst = out.data() + o * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(sp.len);
  for (double& x : out) x *= inv;
  return make_result("mean", reduced_shape(a.shape(), axis, keepdim), std::move(out), {a},
                     [sp, inv](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t o = 0; o < sp.outer; ++o) {
                         for (std::size_t l = 0; l < sp.len; ++l) {
                           double* dst = g.data() + (o * sp.len + l) * sp.inner;
                           const double* src = self.grad.data() + o * sp.inner;
                           for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += inv * src[i];
                         }
                       }
                     });
}

MaxResult max_with_argmax(const Tensor& a, std::size_t axis, bool keepdim) {
  const AxisSplit sp = split_at(a.shape(), axis, "max");
  const auto& av = a.data();
  std::vector<double> out(sp.outer * sp.inner);
  std::vector<std::uint32_t> arg(sp.outer * sp.inner, 0);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    const double* base = av.data() + o * sp.len * sp.inner;
    double* dst = out.data() + o * sp.inner;
    std::uint32_t* idx = arg.data() + o * sp.inner;
    std::copy_n(base, sp.inner, dst);
    for (std::size_t l = 1; l < sp.len; ++l) {
      const double* src = base + l * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) {
        if (src[i] > dst[i]) {
          dst[i] = src[i];
          idx[i] = static_cast<std::uint32_t>(l);
        }
      }
    }
  }
  MaxResult r;
  r.argmax = arg;
  r.values = make_result("max", reduced_shape(a.shape(), axis, keepdim), std::move(out), {a},
                         [sp, arg = std::move(arg)](Node& self) {
                           auto& g = self.parents[0]->ensure_grad();
                           for (std::size_t o = 0; o < sp.outer; ++o) {
                             for (std::size_t i = 0; i < sp.inner; ++i) {
                               const std::size_t j = o * sp.inner + i;
                               g[(o * sp.len + arg[j]) * sp.inner + i] += self.grad[j];
                             }
                           }
                         });
  return r;
}

Tensor max(const Tensor& a, std::size_t axis, bool keepdim) {
  return max_with_argmax(a, axis, keepdim).values;
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](Node& self) {
    auto& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (p.value[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const AxisSplit sp = split_at(a.shape(), axis, "softmax");
  const auto& av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.len * sp.inner + i;
      double hi = av[base];
      for (std::size_t l = 1; l < sp.len; ++l) hi = std::max(hi, av[base + l * sp.inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) {
        const double e = std::exp(av[base + l * sp.inner] - hi);
        out[base + l * sp.inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < sp.len; ++l) out[base + l * sp.inner] /= z;
    }
  }
  return make_result("softmax", a.shape(), std::move(out), {a}, [sp](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    const auto& y = self.value;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t base = o * sp.len * sp.inner + i;
        double dot = 0.0;
        for (std::size_t l = 0; l < sp.len; ++l) {
          dot += self.grad[base + l * sp.inner] * y[base + l * sp.inner];
        }
        for (std::size_t l = 0; l < sp.len; ++l) {
          const std::size_t j = base + l * sp.inner;
          g[j] += y[j] * (self.grad[j] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& a, std::size_t axis, double eps) {
  const AxisSplit sp = split_at(a.shape(), axis, "layer_norm");
  const auto& av = a.data();
  std::vector<double> out(av.size());
  std::vector<double> inv_std(sp.outer * sp.inner);
  const double n = static_cast<double>(sp.len);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.len * sp.inner + i;
      double mu = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) mu += av[base + l * sp.inner];
      mu /= n;
      double var = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) {
        const double d = av[base + l * sp.inner] - mu;
        var += d * d;
      }
      var /= n;
      const double r = 1.0 / std::sqrt(var + eps);
      inv_std[o * sp.inner + i] = r;
      for (std::size_t l = 0; l < sp.len; ++l) {
        out[base + l * sp.inner] = (av[base + l * sp.inner] - mu) * r;
      }
    }
  }
  return make_result("layer_norm", a.shape(), std::move(out), {a},
                     [sp, n, inv_std = std::move(inv_std)](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       const auto& y = self.value;
                       for (std::size_t o = 0; o < sp.outer; ++o) {
                         for (std::size_t i = 0; i < sp.inner; ++i) {
                           const std::size_t base = o * sp.len * sp.inner + i;
                           double gm = 0.0, gy = 0.0;
                           for (std::size_t l = 0; l < sp.len; ++l) {
                             const std::size_t j = base + l * sp.inner;
                             gm += self.grad[j];
                             gy += self.grad[j] * y[j];
                           }
                           gm /= n;
                           gy /= n;
                           const double r = inv_std[o * sp.inner + i];
                           for (std::size_t l = 0; l < sp.len; ++l) {
                             const std::size_t j = base + l * sp.inner;
                             g[j] += r * (self.grad[j] - gm - y[j] * gy);
                           }
                         }
                       }
                     });
}

Tensor acos(const Tensor& a, double clamp) {
  const double lo = -1.0 + clamp;
  const double hi = 1.0 - clamp;
  return unary("acos", a, [lo, hi](double x) { return std::acos(std::clamp(x, lo, hi)); },
               [lo, hi](Node& self) {
                 auto& p = *self.parents[0];
                 auto& g = p.ensure_grad();
                 for (std::size_t i = 0; i < g.size(); ++i) {
                   const double x = p.value[i];
                   if (x < lo || x > hi) continue;
                   g[i] -= self.grad[i] / std::sqrt(1.0 - x * x);
                 }
               });
}

Tensor cos(const Tensor& a) {
  return unary("cos", a, [](double x) { return std::cos(x); }, [](Node& self) {
    auto& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * std::sin(p.value[i]);
  });
}

Tensor sqrt(const Tensor& a) {
  return unary("sqrt", a, [](double x) { return std::sqrt(x); }, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / (2.0 * self.value[i]);
  });
}

Tensor log(const Tensor& a) {
  return unary("log", a, [](double x) { return std::log(x); }, [](Node& self) {
    auto& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / p.value[i];
  });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.value[i];
  });
}

Tensor l2_normalize(const Tensor& a, std::size_t axis) {
  const AxisSplit sp = split_at(a.shape(), axis, "l2_normalize");
  const auto& av = a.data();
  std::vector<double> out(av.size());
  std::vector<double> norms(sp.outer * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.len * sp.inner + i;
      double ss = 0.0;
      for (std::size_t l = 0; l < sp.len; ++l) ss += av[base + l * sp.inner] * av[base + l * sp.inner];
      const double nrm = std::sqrt(ss);
      norms[o * sp.inner + i] = nrm;
      for (std::size_t l = 0; l < sp.len; ++l) out[base + l * sp.inner] = av[base + l * sp.inner] / nrm;
    }
  }
  return make_result("l2_normalize", a.shape(), std::move(out), {a},
                     [sp, norms = std::move(norms)](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       const auto& y = self.value;
                       for (std::size_t o = 0; o < sp.outer; ++o) {
                         for (std::size_t i = 0; i < sp.inner; ++i) {
                           const std::size_t base = o * sp.len * sp.inner + i;
                           double dot = 0.0;
                           for (std::size_t l = 0; l < sp.len; ++l) {
                             dot += self.grad[base + l * sp.inner] * y[base + l * sp.inner];
                           }
                           const double nrm = norms[o * sp.inner + i];
                           for (std::size_t l = 0; l < sp.len; ++l) {
                             const std::size_t j = base + l * sp.inner;
                             g[j] += (self.grad[j] - y[j] * dot) / nrm;
                           }
                         }
                       }
                     });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) shape_error("reshape", a.shape(), shape);
  for (auto d : shape) {
    if (d == 0) shape_error("reshape", a.shape(), shape);
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {a}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor permute(const Tensor& a, std::span<const std::size_t> axes) {
  const Shape& s = a.shape();
  const std::size_t r = s.size();
  if (axes.size() != r) throw DimensionError("permute: " + std::to_string(axes.size()) +
                                             " axes for " + shape_str(s));
  std::vector<bool> used(r, false);
  for (auto ax : axes) {
    if (ax >= r || used[ax]) throw DimensionError("permute: invalid axis list for " + shape_str(s));
    used[ax] = true;
  }
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t d = r - 1; d > 0; --d) in_stride[d - 1] = in_stride[d] * s[d];
  Shape out_shape(r);
  std::vector<std::size_t> src_stride(r);
  for (std::size_t d = 0; d < r; ++d) {
    out_shape[d] = s[axes[d]];
    src_stride[d] = in_stride[axes[d]];
  }
  // map[out_flat] = in_flat
  const std::size_t n = a.numel();
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t src = 0;
  for (std::size_t k = 0; k < n; ++k) {
    map[k] = src;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      src += src_stride[d];
      if (idx[d] < out_shape[d]) break;
      src -= src_stride[d] * idx[d];
      idx[d] = 0;
    }
  }
  const auto& av = a.data();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = av[map[k]];
  return make_result("permute", out_shape, std::move(out), {a}, [map = std::move(map)](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t k = 0; k < map.size(); ++k) g[map[k]] += self.grad[k];
  });
}

Tensor permute(const Tensor& a, std::initializer_list<std::size_t> axes) {
  return permute(a, std::span<const std::size_t>(axes.begin(), axes.size()));
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose needs a 2-D tensor, got " + shape_str(a.shape()));
  return permute(a, {1, 0});
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisSplit sp = split_at(a.shape(), axis, "slice");
  if (length == 0 || start + length > sp.len) {
    throw DimensionError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                         ") out of range on axis " + std::to_string(axis) + " of " +
                         shape_str(a.shape()));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  const auto& av = a.data();
  const std::size_t block = length * sp.inner;
  std::vector<double> out(sp.outer * block);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(av.data() + (o * sp.len + start) * sp.inner, block, out.data() + o * block);
  }
  return make_result("slice", out_shape, std::move(out), {a}, [sp, start, block](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      double* dst = g.data() + (o * sp.len + start) * sp.inner;
      const double* src = self.grad.data() + o * block;
      for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
    }
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::int64_t> rows) {
  if (a.rank() != 2) throw DimensionError("gather_rows needs a 2-D tensor, got " + shape_str(a.shape()));
  if (rows.empty()) throw DimensionError("gather_rows with no indices");
  const std::size_t n = a.dim(0);
  const std::size_t w = a.dim(1);
  const auto& av = a.data();
  std::vector<double> out(rows.size() * w, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = rows[r];
    if (src < -1 || src >= static_cast<std::int64_t>(n)) {
      throw DimensionError("gather_rows: index " + std::to_string(src) + " out of range for " +
                           shape_str(a.shape()));
    }
    if (src >= 0) std::copy_n(av.data() + static_cast<std::size_t>(src) * w, w, out.data() + r * w);
  }
  std::vector<std::int64_t> idx(rows.begin(), rows.end());
  return make_result("gather_rows", {rows.size(), w}, std::move(out), {a},
                     [w, idx = std::move(idx)](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                         if (idx[r] < 0) continue;
                         double* dst = g.data() + static_cast<std::size_t>(idx[r]) * w;
                         const double* src = self.grad.data() + r * w;
                         for (std::size_t i = 0; i < w; ++i) dst[i] += src[i];
                       }
                     });
}

}  // namespace scapv::numkit
