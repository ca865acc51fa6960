#include "relnov/numerics/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace relnov {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
ConstMapMat<T> as_matrix(const Tensor<T>& t) {
  return ConstMapMat<T>(t.storage().data(), static_cast<Eigen::Index>(t.rows()),
                        static_cast<Eigen::Index>(t.cols()));
}

template <typename T>
ConstMapMat<T> as_matrix(const std::vector<T>& buf, std::size_t rows, std::size_t cols) {
  return ConstMapMat<T>(buf.data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}

template <typename T>
MapMat<T> as_matrix(std::vector<T>& buf, std::size_t rows, std::size_t cols) {
  return MapMat<T>(buf.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

Shape matrix_shape(std::size_t rows, std::size_t cols) { return {rows, cols}; }

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  }
}

void require_matrix(const Shape& s, const char* op) {
  if (s.size() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(s));
}

template <typename T>
void accumulate(std::vector<T>& dst, const std::vector<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Shared per-row layer-norm statistics, kept for the backward pass.
template <typename T>
struct NormStats {
  std::vector<T> xhat;
  std::vector<T> rstd;
};

template <typename T>
Tensor<T> layer_norm_forward(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                             T eps, NormStats<T>* stats) {
  const std::size_t d = x.cols();
  if (gain.size() != d || bias.size() != d) {
    throw DimensionError("layer_norm: last axis " + std::to_string(d) + " vs gain " +
                         shape_str(gain.shape()) + " / bias " + shape_str(bias.shape()));
  }
  if (!(eps > T{0})) throw ContractError("layer_norm: eps must be positive");
  const std::size_t rows = x.rows();
  Tensor<T> out(x.shape());
  if (stats) {
    stats->xhat.assign(x.size(), T{0});
    stats->rstd.assign(rows, T{0});
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.storage().data() + r * d;
    T mu = 0;
    for (std::size_t c = 0; c < d; ++c) mu += in[c];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t c = 0; c < d; ++c) var += (in[c] - mu) * (in[c] - mu);
    var /= static_cast<T>(d);
    const T rstd = T{1} / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      const T xh = (in[c] - mu) * rstd;
      out[r * d + c] = xh * gain[c] + bias[c];
      if (stats) stats->xhat[r * d + c] = xh;
    }
    if (stats) stats->rstd[r] = rstd;
  }
  return out;
}

template <typename T>
void softmax_row(const T* in, T* out, std::size_t n) {
  T mx = in[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, in[i]);
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(in[i] - mx);
    total += out[i];
  }
  for (std::size_t i = 0; i < n; ++i) out[i] /= total;
}

template <typename T>
T gelu_grad_scalar(T x) {
  const T cdf = T{0.5} * (T{1} + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T{-0.5} * x * x) / std::sqrt(T{2} * std::numbers::pi_v<T>);
  return cdf + x * pdf;
}

}  // namespace

// ---- pure kernels ----

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a.shape(), "matmul");
  require_matrix(b.shape(), "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  }
  Tensor<T> out(matrix_shape(a.dim(0), b.dim(1)));
  as_matrix(out.storage(), a.dim(0), b.dim(1)).noalias() = as_matrix(a) * as_matrix(b);
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  return layer_norm_forward(x, gain, bias, eps, static_cast<NormStats<T>*>(nullptr));
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  if (!x.all_finite()) throw NumericError("softmax: non-finite input");
  if (x.size() == 0) return x;
  const bool along_rows = axis == -1 || axis == static_cast<int>(x.rank()) - 1;
  if (along_rows) {
    Tensor<T> out(x.shape());
    const std::size_t n = x.cols();
    for (std::size_t r = 0; r < x.rows(); ++r) {
      softmax_row(x.storage().data() + r * n, out.storage().data() + r * n, n);
    }
    return out;
  }
  if (axis != 0 || x.rank() != 2) {
    throw DimensionError("softmax: unsupported axis " + std::to_string(axis) + " for " +
                         shape_str(x.shape()));
  }
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  Tensor<T> out(x.shape());
  std::vector<T> column(rows), result(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) column[r] = x.at(r, c);
    softmax_row(column.data(), result.data(), rows);
    for (std::size_t r = 0; r < rows; ++r) out.at(r, c) = result[r];
  }
  return out;
}

template <typename T>
T gelu_scalar(T x) {
  return T{0.5} * x * (T{1} + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = gelu_scalar(x[i]);
  return out;
}

// ---- tape ops ----

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Tensor<T> out = matmul(a.value(), b.value());
  const std::size_t m = a.value().dim(0), k = a.value().dim(1), n = b.value().dim(1);
  return a.tape->record(std::move(out), {a.id, b.id}, [=](Tape<T>& tape, std::size_t self) {
    const auto g = as_matrix(tape.grad(self), m, n);
    if (tape.needs_grad(a.id)) {
      as_matrix(tape.grad(a.id), m, k).noalias() += g * as_matrix(tape.value(b.id)).transpose();
    }
    if (tape.needs_grad(b.id)) {
      as_matrix(tape.grad(b.id), k, n).noalias() += as_matrix(tape.value(a.id)).transpose() * g;
    }
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape->record(std::move(out), {a.id, b.id}, [=](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    if (tape.needs_grad(a.id)) accumulate(tape.grad(a.id), g);
    if (tape.needs_grad(b.id)) accumulate(tape.grad(b.id), g);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape->record(std::move(out), {a.id, b.id}, [=](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    if (tape.needs_grad(a.id)) accumulate(tape.grad(a.id), g);
    if (tape.needs_grad(b.id)) {
      auto& gb = tape.grad(b.id);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape->record(std::move(out), {a.id, b.id}, [=](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    const auto& av = tape.value(a.id);
    const auto& bv = tape.value(b.id);
    if (tape.needs_grad(a.id)) {
      auto& ga = tape.grad(a.id);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tape.needs_grad(b.id)) {
      auto& gb = tape.grad(b.id);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.storage()) v *= factor;
  return a.tape->record(std::move(out), {a.id}, [=](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    auto& ga = tape.grad(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * g[i];
  });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (bias.value().size() != cols) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match " +
                         shape_str(x.shape()));
  }
  Tensor<T> out = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bias.value()[c];
  }
  return x.tape->record(std::move(out), {x.id, bias.id}, [=](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    if (tape.needs_grad(x.id)) accumulate(tape.grad(x.id), g);
    if (tape.needs_grad(bias.id)) {
      auto& gb = tape.grad(bias.id);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
      }
    }
  });
}

template <typename T>
Var<T> gelu(Var<T> x) {
  return x.tape->record(gelu(x.value()), {x.id}, [=](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    const auto& xv = tape.value(x.id);
    auto& gx = tape.grad(x.id);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * gelu_grad_scalar(xv[i]);
  });
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(x.value()[i]);
  return x.tape->record(std::move(out), {x.id}, [=](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    const auto& y = tape.value(self);
    auto& gx = tape.grad(x.id);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * y[i] * (T{1} - y[i]);
  });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
  NormStats<T> stats;
  Tensor<T> out = layer_norm_forward(x.value(), gain.value(), bias.value(), eps, &stats);
  const std::size_t rows = x.rows(), d = x.cols();
  return x.tape->record(
      std::move(out), {x.id, gain.id, bias.id},
      [=, stats = std::move(stats)](Tape<T>& tape, std::size_t self) {
        const auto& g = tape.grad(self);
        const auto& gv = tape.value(gain.id);
        const bool want_x = tape.needs_grad(x.id);
        const bool want_gain = tape.needs_grad(gain.id);
        const bool want_bias = tape.needs_grad(bias.id);
        std::vector<T> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* gr = g.data() + r * d;
          const T* xh = stats.xhat.data() + r * d;
          if (want_gain) {
            auto& gg = tape.grad(gain.id);
            for (std::size_t c = 0; c < d; ++c) gg[c] += gr[c] * xh[c];
          }
          if (want_bias) {
            auto& gb = tape.grad(bias.id);
            for (std::size_t c = 0; c < d; ++c) gb[c] += gr[c];
          }
          if (!want_x) continue;
          T mean_dxhat = 0, mean_dxhat_xhat = 0;
          for (std::size_t c = 0; c < d; ++c) {
            dxhat[c] = gr[c] * gv[c];
            mean_dxhat += dxhat[c];
            mean_dxhat_xhat += dxhat[c] * xh[c];
          }
          mean_dxhat /= static_cast<T>(d);
          mean_dxhat_xhat /= static_cast<T>(d);
          auto& gx = tape.grad(x.id);
          for (std::size_t c = 0; c < d; ++c) {
            gx[r * d + c] += stats.rstd[r] * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
          }
        }
      });
}

template <typename T>
Var<T> softmax(Var<T> x) {
  const std::size_t rows = x.rows(), n = x.cols();
  return x.tape->record(softmax(x.value(), -1), {x.id}, [=](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    const auto& y = tape.value(self);
    auto& gx = tape.grad(x.id);
    for (std::size_t r = 0; r < rows; ++r) {
      T dot = 0;
      for (std::size_t c = 0; c < n; ++c) dot += g[r * n + c] * y[r * n + c];
      for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += y[r * n + c] * (g[r * n + c] - dot);
    }
  });
}

template <typename T>
Var<T> sum(Var<T> x) {
  T total = 0;
  for (T v : x.value().storage()) total += v;
  return x.tape->record(Tensor<T>({1}, std::vector<T>{total}), {x.id},
                        [=](Tape<T>& tape, std::size_t self) {
                          const T g = tape.grad(self)[0];
                          for (auto& v : tape.grad(x.id)) v += g;
                        });
}

template <typename T>
Var<T> mean(Var<T> x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(x), T{1} / static_cast<T>(n));
}

template <typename T>
Var<T> maximum(Var<T> a, Var<T> b) {
  require_same_shape(a.shape(), b.shape(), "maximum");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a.value()[i], b.value()[i]);
  // Ties route the gradient to the first argument.
  return a.tape->record(std::move(out), {a.id, b.id}, [=](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    const auto& av = tape.value(a.id);
    const auto& bv = tape.value(b.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool first = av[i] >= bv[i];
      if (first && tape.needs_grad(a.id)) tape.grad(a.id)[i] += g[i];
      if (!first && tape.needs_grad(b.id)) tape.grad(b.id)[i] += g[i];
    }
  });
}

template <typename T>
Var<T> concat_cols(Var<T> a, Var<T> b) {
  const std::size_t rows = a.rows(), ca = a.cols(), cb = b.cols();
  if (b.rows() != rows) {
    throw DimensionError("concat_cols: row mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  Tensor<T> out(matrix_shape(rows, ca + cb));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.value().storage().data() + r * ca, ca, out.storage().data() + r * (ca + cb));
    std::copy_n(b.value().storage().data() + r * cb, cb,
                out.storage().data() + r * (ca + cb) + ca);
  }
  return a.tape->record(std::move(out), {a.id, b.id}, [=](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    for (std::size_t r = 0; r < rows; ++r) {
      if (tape.needs_grad(a.id)) {
        auto& ga = tape.grad(a.id);
        for (std::size_t c = 0; c < ca; ++c) ga[r * ca + c] += g[r * (ca + cb) + c];
      }
      if (tape.needs_grad(b.id)) {
        auto& gb = tape.grad(b.id);
        for (std::size_t c = 0; c < cb; ++c) gb[r * cb + c] += g[r * (ca + cb) + ca + c];
      }
    }
  });
}

template <typename T>
Var<T> concat_rows(Var<T> a, Var<T> b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("concat_rows: column mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  const std::size_t na = a.value().size();
  std::vector<T> data(a.value().storage());
  data.insert(data.end(), b.value().storage().begin(), b.value().storage().end());
  Tensor<T> out(matrix_shape(a.rows() + b.rows(), a.cols()), std::move(data));
  return a.tape->record(std::move(out), {a.id, b.id}, [=](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    if (tape.needs_grad(a.id)) {
      auto& ga = tape.grad(a.id);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    }
    if (tape.needs_grad(b.id)) {
      auto& gb = tape.grad(b.id);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
    }
  });
}

template <typename T>
Var<T> slice_rows(Var<T> x, std::size_t begin, std::size_t count) {
  const std::size_t cols = x.cols();
  if (begin + count > x.rows()) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") exceeds " + shape_str(x.shape()));
  }
  const auto first = x.value().storage().begin() + static_cast<std::ptrdiff_t>(begin * cols);
  Tensor<T> out(matrix_shape(count, cols),
                std::vector<T>(first, first + static_cast<std::ptrdiff_t>(count * cols)));
  return x.tape->record(std::move(out), {x.id}, [=](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    auto& gx = tape.grad(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) gx[begin * cols + i] += g[i];
  });
}

template <typename T>
Var<T> take_rows(Var<T> x, std::size_t offset, std::size_t stride) {
  if (stride == 0) throw ContractError("take_rows: stride must be positive");
  const std::size_t cols = x.cols();
  const std::size_t count = x.rows() > offset ? (x.rows() - offset + stride - 1) / stride : 0;
  Tensor<T> out(matrix_shape(count, cols));
  for (std::size_t i = 0; i < count; ++i) {
    std::copy_n(x.value().storage().data() + (offset + i * stride) * cols, cols,
                out.storage().data() + i * cols);
  }
  return x.tape->record(std::move(out), {x.id}, [=](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    auto& gx = tape.grad(x.id);
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t c = 0; c < cols; ++c) gx[(offset + i * stride) * cols + c] += g[i * cols + c];
    }
  });
}

template <typename T>
Var<T> select_col(Var<T> x, std::size_t col) {
  const std::size_t rows = x.rows(), cols = x.cols();
  if (col >= cols) throw DimensionError("select_col: column out of range for " + shape_str(x.shape()));
  Tensor<T> out(matrix_shape(rows, 1));
  for (std::size_t r = 0; r < rows; ++r) out[r] = x.value()[r * cols + col];
  return x.tape->record(std::move(out), {x.id}, [=](Tape<T>& tape, std::size_t self) {
    const auto& g = tape.grad(self);
    auto& gx = tape.grad(x.id);
    for (std::size_t r = 0; r < rows; ++r) gx[r * cols + col] += g[r];
  });
}

template <typename T>
Var<T> pair_sequence(Var<T> token, Var<T> a, Var<T> b) {
  require_same_shape(a.shape(), b.shape(), "pair_sequence");
  const std::size_t d = a.cols(), pairs = a.rows();
  if (token.value().size() != d) {
    throw DimensionError("pair_sequence: token " + shape_str(token.shape()) +
                         " does not match features " + shape_str(a.shape()));
  }
  Tensor<T> out(matrix_shape(3 * pairs, d));
  T* dst = out.storage().data();
  for (std::size_t m = 0; m < pairs; ++m) {
    std::copy_n(token.value().storage().data(), d, dst + (3 * m) * d);
    std::copy_n(a.value().storage().data() + m * d, d, dst + (3 * m + 1) * d);
    std::copy_n(b.value().storage().data() + m * d, d, dst + (3 * m + 2) * d);
  }
  return a.tape->record(
      std::move(out), {token.id, a.id, b.id}, [=](Tape<T>& tape, std::size_t self) {
        const auto& g = tape.grad(self);
        for (std::size_t m = 0; m < pairs; ++m) {
          if (tape.needs_grad(token.id)) {
            auto& gt = tape.grad(token.id);
            for (std::size_t c = 0; c < d; ++c) gt[c] += g[(3 * m) * d + c];
          }
          if (tape.needs_grad(a.id)) {
            auto& ga = tape.grad(a.id);
            for (std::size_t c = 0; c < d; ++c) ga[m * d + c] += g[(3 * m + 1) * d + c];
          }
          if (tape.needs_grad(b.id)) {
            auto& gb = tape.grad(b.id);
            for (std::size_t c = 0; c < d; ++c) gb[m * d + c] += g[(3 * m + 2) * d + c];
          }
        }
      });
}

template <typename T>
Var<T> self_attention(Var<T> qkv, std::size_t seq_len, std::size_t heads) {
  const std::size_t rows = qkv.rows(), width = qkv.cols();
  if (seq_len == 0 || rows % seq_len != 0) {
    throw DimensionError("self_attention: " + std::to_string(rows) +
                         " rows do not split into sequences of " + std::to_string(seq_len));
  }
  if (width % 3 != 0 || heads == 0 || (width / 3) % heads != 0) {
    throw DimensionError("self_attention: width " + std::to_string(width) +
                         " is not 3 x heads x head_dim for " + std::to_string(heads) + " heads");
  }
  const std::size_t d = width / 3, head_dim = d / heads, groups = rows / seq_len;
  const T inv_scale = T{1} / std::sqrt(static_cast<T>(head_dim));
  const T* src = qkv.value().storage().data();
  auto q_at = [=](const T* base, std::size_t row, std::size_t h) { return base + row * width + h * head_dim; };
  auto k_at = [=](const T* base, std::size_t row, std::size_t h) { return base + row * width + d + h * head_dim; };
  auto v_at = [=](const T* base, std::size_t row, std::size_t h) { return base + row * width + 2 * d + h * head_dim; };

  // probs[(group, head, i, j)]
  std::vector<T> probs(groups * heads * seq_len * seq_len);
  Tensor<T> out(matrix_shape(rows, d));
  std::vector<T> logits(seq_len);
  for (std::size_t grp = 0; grp < groups; ++grp) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < seq_len; ++i) {
        const std::size_t ri = grp * seq_len + i;
        const T* q = q_at(src, ri, h);
        for (std::size_t j = 0; j < seq_len; ++j) {
          const T* k = k_at(src, grp * seq_len + j, h);
          T dot = 0;
          for (std::size_t c = 0; c < head_dim; ++c) dot += q[c] * k[c];
          logits[j] = dot * inv_scale;
        }
        T* p = probs.data() + ((grp * heads + h) * seq_len + i) * seq_len;
        softmax_row(logits.data(), p, seq_len);
        T* o = out.storage().data() + ri * d + h * head_dim;
        for (std::size_t j = 0; j < seq_len; ++j) {
          const T* v = v_at(src, grp * seq_len + j, h);
          for (std::size_t c = 0; c < head_dim; ++c) o[c] += p[j] * v[c];
        }
      }
    }
  }
  for (const T v : out.storage()) {
    if (!std::isfinite(v)) throw NumericError("self_attention: non-finite activations");
  }

  return qkv.tape->record(
      std::move(out), {qkv.id},
      [=, probs = std::move(probs)](Tape<T>& tape, std::size_t self) {
        const auto& g = tape.grad(self);
        const T* x = tape.value(qkv.id).storage().data();
        T* gx = tape.grad(qkv.id).data();
        std::vector<T> dp(seq_len);
        for (std::size_t grp = 0; grp < groups; ++grp) {
          for (std::size_t h = 0; h < heads; ++h) {
            for (std::size_t i = 0; i < seq_len; ++i) {
              const std::size_t ri = grp * seq_len + i;
              const T* p = probs.data() + ((grp * heads + h) * seq_len + i) * seq_len;
              const T* go = g.data() + ri * d + h * head_dim;
              T weighted = 0;
              for (std::size_t j = 0; j < seq_len; ++j) {
                const std::size_t rj = grp * seq_len + j;
                const T* v = v_at(x, rj, h);
                T* gv = gx + rj * width + 2 * d + h * head_dim;
                T dot = 0;
                for (std::size_t c = 0; c < head_dim; ++c) {
                  gv[c] += p[j] * go[c];
                  dot += go[c] * v[c];
                }
                dp[j] = dot;
                weighted += p[j] * dot;
              }
              const T* q = q_at(x, ri, h);
              T* gq = gx + ri * width + h * head_dim;
              for (std::size_t j = 0; j < seq_len; ++j) {
                const std::size_t rj = grp * seq_len + j;
                const T ds = p[j] * (dp[j] - weighted) * inv_scale;
                const T* k = k_at(x, rj, h);
                T* gk = gx + rj * width + d + h * head_dim;
                for (std::size_t c = 0; c < head_dim; ++c) {
                  gq[c] += ds * k[c];
                  gk[c] += ds * q[c];
                }
              }
            }
          }
        }
      });
}

template <typename T>
Var<T> mse_loss(Var<T> pred, const Tensor<T>& target) {
  const std::size_t n = pred.value().size();
  if (target.size() != n) {
    throw DimensionError("mse_loss: " + std::to_string(n) + " predictions vs " +
                         std::to_string(target.size()) + " labels");
  }
  if (n == 0) throw DimensionError("mse_loss: empty batch");
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T diff = pred.value()[i] - target[i];
    total += diff * diff;
  }
  const T inv_n = T{1} / static_cast<T>(n);
  return pred.tape->record(
      Tensor<T>({1}, std::vector<T>{total * inv_n}), {pred.id},
      [=, target = target](Tape<T>& tape, std::size_t self) {
        const T g = tape.grad(self)[0];
        const auto& p = tape.value(pred.id);
        auto& gp = tape.grad(pred.id);
        for (std::size_t i = 0; i < n; ++i) gp[i] += g * T{2} * (p[i] - target[i]) * inv_n;
      });
}

template <typename T>
Var<T> bce_with_logits(Var<T> logits, const Tensor<T>& target) {
  const std::size_t n = logits.value().size();
  if (target.size() != n) {
    throw DimensionError("bce_with_logits: " + std::to_string(n) + " logits vs " +
                         std::to_string(target.size()) + " labels");
  }
  if (n == 0) throw DimensionError("bce_with_logits: empty batch");
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T z = logits.value()[i];
    total += std::max(z, T{0}) - z * target[i] + std::log1p(std::exp(-std::abs(z)));
  }
  const T inv_n = T{1} / static_cast<T>(n);
  return logits.tape->record(
      Tensor<T>({1}, std::vector<T>{total * inv_n}), {logits.id},
      [=, target = target](Tape<T>& tape, std::size_t self) {
        const T g = tape.grad(self)[0];
        const auto& z = tape.value(logits.id);
        auto& gz = tape.grad(logits.id);
        for (std::size_t i = 0; i < n; ++i) gz[i] += g * (sigmoid_scalar(z[i]) - target[i]) * inv_n;
      });
}

#define RELNOV_INSTANTIATE_OPS(T)                                                       \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
  template Tensor<T> softmax(const Tensor<T>&, int);                                    \
  template Tensor<T> gelu(const Tensor<T>&);                                            \
  template T gelu_scalar(T);                                                            \
  template T sigmoid_scalar(T);                                                         \
  template Var<T> matmul(Var<T>, Var<T>);                                               \
  template Var<T> add(Var<T>, Var<T>);                                                  \
  template Var<T> sub(Var<T>, Var<T>);                                                  \
  template Var<T> mul(Var<T>, Var<T>);                                                  \
  template Var<T> scale(Var<T>, T);                                                     \
  template Var<T> add_bias(Var<T>, Var<T>);                                             \
  template Var<T> gelu(Var<T>);                                                         \
  template Var<T> sigmoid(Var<T>);                                                      \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                \
  template Var<T> softmax(Var<T>);                                                      \
  template Var<T> sum(Var<T>);                                                          \
  template Var<T> mean(Var<T>);                                                         \
  template Var<T> maximum(Var<T>, Var<T>);                                              \
  template Var<T> concat_cols(Var<T>, Var<T>);                                          \
  template Var<T> concat_rows(Var<T>, Var<T>);                                          \
  template Var<T> slice_rows(Var<T>, std::size_t, std::size_t);                         \
  template Var<T> take_rows(Var<T>, std::size_t, std::size_t);                          \
  template Var<T> select_col(Var<T>, std::size_t);                                      \
  template Var<T> pair_sequence(Var<T>, Var<T>, Var<T>);                                \
  template Var<T> self_attention(Var<T>, std::size_t, std::size_t);                     \
  template Var<T> mse_loss(Var<T>, const Tensor<T>&);                                   \
  template Var<T> bce_with_logits(Var<T>, const Tensor<T>&);

RELNOV_INSTANTIATE_OPS(float)
RELNOV_INSTANTIATE_OPS(double)

#undef RELNOV_INSTANTIATE_OPS

}  // namespace relnov
