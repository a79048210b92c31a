#include <algorithm>
#include <cmath>

#include "tsact/error.hpp"
#include "tsact/tape.hpp"

namespace tsact {

namespace {

void expect_rank(const Array& a, std::size_t rank, const char* what) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(what) + " expects rank " + std::to_string(rank) +
                     ", got " + shape_str(a.shape()));
  }
}

std::size_t input_id(const Tape& tape, std::size_t self, std::size_t k) {
  return tape.node(self).inputs[k];
}

// Four interleaved partial sums: fixed summation order, and the compiler can
// keep them in vector registers.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < n; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

Var affine(Tape& tape, Var x, Var weight, Var bias) {
  const Array& X = tape.value(x);
  const Array& W = tape.value(weight);
  const Array& b = tape.value(bias);
  expect_rank(X, 2, "affine input");
  expect_rank(W, 2, "affine weight");
  expect_rank(b, 1, "affine bias");
  const std::size_t B = X.dim(0), n = X.dim(1), m = W.dim(1);
  if (W.dim(0) != n || b.dim(0) != m) {
    throw ShapeError("affine: " + shape_str(X.shape()) + " x " + shape_str(W.shape()) + " + " +
                     shape_str(b.shape()));
  }
  Array out({B, m});
  const double* xp = X.ptr();
  const double* wp = W.ptr();
  for (std::size_t i = 0; i < B; ++i) std::copy(b.ptr(), b.ptr() + m, out.ptr() + i * m);
  // k outermost so each weight row is read once per batch; every output
  // still accumulates over k in ascending order.
  for (std::size_t k = 0; k < n; ++k) {
    const double* __restrict wk = wp + k * m;
    for (std::size_t i = 0; i < B; ++i) {
      const double xv = xp[i * n + k];
      if (xv == 0.0) continue;
      double* __restrict o = out.ptr() + i * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += xv * wk[j];
    }
  }
  return tape.push("affine", std::move(out), {x, weight, bias}, [B, n, m](Tape& t, std::size_t self) {
    const std::size_t ix = input_id(t, self, 0), iw = input_id(t, self, 1),
                      ib = input_id(t, self, 2);
    const Array& g = t.node(self).grad;
    const Array& Xv = t.node(ix).value;
    const Array& Wv = t.node(iw).value;
    if (t.requires_grad(iw)) {
      Array& dW = t.grad_buffer(iw);
      for (std::size_t k = 0; k < n; ++k) {
        double* __restrict dwk = dW.ptr() + k * m;
        for (std::size_t i = 0; i < B; ++i) {
          const double xv = Xv[i * n + k];
          if (xv == 0.0) continue;
          const double* __restrict gi = g.ptr() + i * m;
          for (std::size_t j = 0; j < m; ++j) dwk[j] += xv * gi[j];
        }
      }
    }
    if (t.requires_grad(ib)) {
      Array& db = t.grad_buffer(ib);
      for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < m; ++j) db[j] += g[i * m + j];
      }
    }
    if (t.requires_grad(ix)) {
      Array& dX = t.grad_buffer(ix);
      for (std::size_t k = 0; k < n; ++k) {
        const double* wk = Wv.ptr() + k * m;
        for (std::size_t i = 0; i < B; ++i) {
          dX[i * n + k] += dot(g.ptr() + i * m, wk, m);
        }
      }
    }
  });
}

Var conv1d_same(Tape& tape, Var x, Var kernel, Var bias) {
  const Array& X = tape.value(x);
  const Array& Kw = tape.value(kernel);
  const Array& b = tape.value(bias);
  expect_rank(X, 3, "conv1d input");
  expect_rank(Kw, 3, "conv1d kernel");
  expect_rank(b, 1, "conv1d bias");
  const std::size_t B = X.dim(0), Cin = X.dim(1), L = X.dim(2);
  const std::size_t Cout = Kw.dim(0), K = Kw.dim(2);
  if (Kw.dim(1) != Cin || b.dim(0) != Cout) {
    throw ShapeError("conv1d: input " + shape_str(X.shape()) + ", kernel " +
                     shape_str(Kw.shape()) + ", bias " + shape_str(b.shape()));
  }
  const long pad_left = static_cast<long>((K - 1) / 2);
  const long len = static_cast<long>(L);

  // For tap q the input offset is s = q - pad_left; output t reads x[t + s]
  // for t in [max(0, -s), min(L, L - s)).
  Array out({B, Cout, L});
  for (std::size_t bi = 0; bi < B; ++bi) {
    for (std::size_t o = 0; o < Cout; ++o) {
      double* out_row = out.ptr() + (bi * Cout + o) * L;
      std::fill(out_row, out_row + L, b[o]);
      for (std::size_t c = 0; c < Cin; ++c) {
        const double* x_row = X.ptr() + (bi * Cin + c) * L;
        const double* taps = Kw.ptr() + (o * Cin + c) * K;
        for (std::size_t q = 0; q < K; ++q) {
          const long s = static_cast<long>(q) - pad_left;
          const long t0 = std::max(0L, -s), t1 = std::min(len, len - s);
          const double w = taps[q];
          for (long ti = t0; ti < t1; ++ti) out_row[ti] += w * x_row[ti + s];
        }
      }
    }
  }
  return tape.push(
      "conv1d_same", std::move(out), {x, kernel, bias},
      [B, Cin, Cout, K, L, pad_left, len](Tape& t, std::size_t self) {
        const std::size_t ix = input_id(t, self, 0), ik = input_id(t, self, 1),
                          ib = input_id(t, self, 2);
        const Array& g = t.node(self).grad;
        const Array& Xv = t.node(ix).value;
        const Array& Kv = t.node(ik).value;
        const bool need_x = t.requires_grad(ix), need_k = t.requires_grad(ik);
        Array* dX = need_x ? &t.grad_buffer(ix) : nullptr;
        Array* dK = need_k ? &t.grad_buffer(ik) : nullptr;
        if (t.requires_grad(ib)) {
          Array& db = t.grad_buffer(ib);
          for (std::size_t bi = 0; bi < B; ++bi) {
            for (std::size_t o = 0; o < Cout; ++o) {
              const double* g_row = g.ptr() + (bi * Cout + o) * L;
              double acc = 0.0;
              for (std::size_t ti = 0; ti < L; ++ti) acc += g_row[ti];
              db[o] += acc;
            }
          }
        }
        if (!need_x && !need_k) return;
        for (std::size_t bi = 0; bi < B; ++bi) {
          for (std::size_t o = 0; o < Cout; ++o) {
            const double* g_row = g.ptr() + (bi * Cout + o) * L;
            for (std::size_t c = 0; c < Cin; ++c) {
              const double* x_row = Xv.ptr() + (bi * Cin + c) * L;
              const double* taps = Kv.ptr() + (o * Cin + c) * K;
              for (std::size_t q = 0; q < K; ++q) {
                const long s = static_cast<long>(q) - pad_left;
                const long t0 = std::max(0L, -s), t1 = std::min(len, len - s);
                if (need_k) {
                  double acc = 0.0;
                  for (long ti = t0; ti < t1; ++ti) acc += g_row[ti] * x_row[ti + s];
                  (*dK)[(o * Cin + c) * K + q] += acc;
                }
                if (need_x) {
                  double* dx_row = dX->ptr() + (bi * Cin + c) * L;
                  const double w = taps[q];
                  for (long ti = t0; ti < t1; ++ti) dx_row[ti + s] += w * g_row[ti];
                }
              }
            }
          }
        }
      });
}

Var global_avg_pool(Tape& tape, Var x) {
  const Array& X = tape.value(x);
  expect_rank(X, 3, "global_avg_pool input");
  const std::size_t B = X.dim(0), C = X.dim(1), L = X.dim(2);
  Array out({B, C});
  for (std::size_t r = 0; r < B * C; ++r) {
    double acc = 0.0;
    for (std::size_t ti = 0; ti < L; ++ti) acc += X[r * L + ti];
    out[r] = acc / static_cast<double>(L);
  }
  return tape.push("global_avg_pool", std::move(out), {x}, [B, C, L](Tape& t, std::size_t self) {
    const std::size_t ix = input_id(t, self, 0);
    const Array& g = t.node(self).grad;
    Array& dX = t.grad_buffer(ix);
    const double inv = 1.0 / static_cast<double>(L);
    for (std::size_t r = 0; r < B * C; ++r) {
      const double v = g[r] * inv;
      for (std::size_t ti = 0; ti < L; ++ti) dX[r * L + ti] += v;
    }
  });
}

Var batch_norm1d(Tape& tape, Var x, Var gamma, Var beta, BatchNormStats& stats, Mode mode,
                 double momentum, double eps) {
  const Array& X = tape.value(x);
  if (X.rank() != 2 && X.rank() != 3) {
    throw ShapeError("batch_norm1d expects (B, C) or (B, C, L), got " + shape_str(X.shape()));
  }
  const std::size_t B = X.dim(0), C = X.dim(1), L = X.rank() == 3 ? X.dim(2) : 1;
  const Array& G = tape.value(gamma);
  const Array& Be = tape.value(beta);
  if (G.size() != C || Be.size() != C || stats.mean.size() != C || stats.var.size() != C) {
    throw ShapeError("batch_norm1d: channel count mismatch for " + shape_str(X.shape()));
  }
  const std::size_t count = B * L;
  Array xhat(X.shape());
  Array inv_std({C});
  Array out(X.shape());
  if (mode == Mode::Train) {
    if (count <= 1) throw ContractError("batch_norm1d in training mode needs B*L > 1");
    for (std::size_t c = 0; c < C; ++c) {
      double mean = 0.0;
      for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t ti = 0; ti < L; ++ti) mean += X[(bi * C + c) * L + ti];
      mean /= static_cast<double>(count);
      double var = 0.0;
      for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t ti = 0; ti < L; ++ti) {
          const double d = X[(bi * C + c) * L + ti] - mean;
          var += d * d;
        }
      const double biased = var / static_cast<double>(count);
      const double unbiased = var / static_cast<double>(count - 1);
      inv_std[c] = 1.0 / std::sqrt(biased + eps);
      for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t ti = 0; ti < L; ++ti) {
          const std::size_t idx = (bi * C + c) * L + ti;
          xhat[idx] = (X[idx] - mean) * inv_std[c];
          out[idx] = G[c] * xhat[idx] + Be[c];
        }
      stats.mean[c] = (1.0 - momentum) * stats.mean[c] + momentum * mean;
      stats.var[c] = (1.0 - momentum) * stats.var[c] + momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      inv_std[c] = 1.0 / std::sqrt(stats.var[c] + eps);
      for (std::size_t bi = 0; bi < B; ++bi)
        for (std::size_t ti = 0; ti < L; ++ti) {
          const std::size_t idx = (bi * C + c) * L + ti;
          xhat[idx] = (X[idx] - stats.mean[c]) * inv_std[c];
          out[idx] = G[c] * xhat[idx] + Be[c];
        }
    }
  }
  const bool train = mode == Mode::Train;
  return tape.push(
      "batch_norm1d", std::move(out), {x, gamma, beta},
      [B, C, L, count, train, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape& t, std::size_t self) {
        const std::size_t ix = input_id(t, self, 0), ig = input_id(t, self, 1),
                          ibe = input_id(t, self, 2);
        const Array& g = t.node(self).grad;
        const Array& Gv = t.node(ig).value;
        Array* dG = t.requires_grad(ig) ? &t.grad_buffer(ig) : nullptr;
        Array* dB = t.requires_grad(ibe) ? &t.grad_buffer(ibe) : nullptr;
        Array* dX = t.requires_grad(ix) ? &t.grad_buffer(ix) : nullptr;
        const double n = static_cast<double>(count);
        for (std::size_t c = 0; c < C; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t bi = 0; bi < B; ++bi)
            for (std::size_t ti = 0; ti < L; ++ti) {
              const std::size_t idx = (bi * C + c) * L + ti;
              sum_g += g[idx];
              sum_gx += g[idx] * xhat[idx];
            }
          if (dG) (*dG)[c] += sum_gx;
          if (dB) (*dB)[c] += sum_g;
          if (!dX) continue;
          const double scale = Gv[c] * inv_std[c];
          for (std::size_t bi = 0; bi < B; ++bi)
            for (std::size_t ti = 0; ti < L; ++ti) {
              const std::size_t idx = (bi * C + c) * L + ti;
              if (train) {
                (*dX)[idx] += scale * (g[idx] - sum_g / n - xhat[idx] * sum_gx / n);
              } else {
                (*dX)[idx] += scale * g[idx];
              }
            }
        }
      });
}

Var dropout(Tape& tape, Var x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout probability must be in [0, 1)");
  if (mode == Mode::Infer || p == 0.0) return x;
  const Array& X = tape.value(x);
  Array mask(X.shape());
  Array out(X.shape());
  const double scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < X.size(); ++i) {
    mask[i] = rng.uniform() < p ? 0.0 : scale;
    out[i] = X[i] * mask[i];
  }
  return tape.push("dropout", std::move(out), {x}, [mask = std::move(mask)](Tape& t, std::size_t self) {
    const std::size_t ix = input_id(t, self, 0);
    const Array& g = t.node(self).grad;
    Array& dX = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) dX[i] += g[i] * mask[i];
  });
}

Var activation(Tape& tape, Var x, const ActivationKind& kind, std::optional<Var> channel_param,
               bool poison) {
  kind.validate();
  const Array& X = tape.value(x);
  const Activation a = kind.variant();
  std::size_t C = 1, inner = 1;
  if (channel_param) {
    if (X.rank() < 2) throw ShapeError("per-channel activation needs a (B, C, ...) input");
    C = X.dim(1);
    for (std::size_t d = 2; d < X.rank(); ++d) inner *= X.dim(d);
    if (tape.value(*channel_param).size() != C) {
      throw ShapeError("activation parameter has " +
                       std::to_string(tape.value(*channel_param).size()) + " entries for " +
                       std::to_string(C) + " channels");
    }
  }
  const double scalar_p = kind.param();
  Array out(X.shape());
  if (channel_param) {
    const Array& P = tape.value(*channel_param);
    for (std::size_t i = 0; i < X.size(); ++i) out[i] = activate(a, X[i], P[(i / inner) % C]);
  } else {
    for (std::size_t i = 0; i < X.size(); ++i) out[i] = activate(a, X[i], scalar_p);
  }
  if (poison) out.fill(std::numeric_limits<double>::infinity());

  std::vector<Var> inputs{x};
  if (channel_param) inputs.push_back(*channel_param);
  const bool per_channel = channel_param.has_value();
  return tape.push(std::string("act:") + std::string(kind.name()), std::move(out),
                   std::move(inputs),
                   [a, C, inner, per_channel, scalar_p](Tape& t, std::size_t self) {
                     const std::size_t ix = input_id(t, self, 0);
                     const Array& g = t.node(self).grad;
                     const Array& Xv = t.node(ix).value;
                     const Array* P = per_channel ? &t.node(input_id(t, self, 1)).value : nullptr;
                     if (t.requires_grad(ix)) {
                       Array& dX = t.grad_buffer(ix);
                       for (std::size_t i = 0; i < Xv.size(); ++i) {
                         const double p = P ? (*P)[(i / inner) % C] : scalar_p;
                         dX[i] += g[i] * activate_slope(a, Xv[i], p);
                       }
                     }
                     if (P && t.requires_grad(input_id(t, self, 1))) {
                       Array& dP = t.grad_buffer(input_id(t, self, 1));
                       for (std::size_t i = 0; i < Xv.size(); ++i) {
                         const std::size_t c = (i / inner) % C;
                         dP[c] += g[i] * activate_param_slope(a, Xv[i], (*P)[c]);
                       }
                     }
                   });
}

Array softmax(const Array& logits) {
  expect_rank(logits, 2, "softmax");
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  Array out(logits.shape());
  for (std::size_t i = 0; i < B; ++i) {
    const double* row = logits.ptr() + i * C;
    const double mx = *std::max_element(row, row + C);
    double z = 0.0;
    for (std::size_t j = 0; j < C; ++j) {
      out[i * C + j] = std::exp(row[j] - mx);
      z += out[i * C + j];
    }
    for (std::size_t j = 0; j < C; ++j) out[i * C + j] /= z;
  }
  return out;
}

Var softmax_xent(Tape& tape, Var logits, std::span<const int> labels) {
  const Array& Z = tape.value(logits);
  expect_rank(Z, 2, "softmax_xent logits");
  const std::size_t B = Z.dim(0), C = Z.dim(1);
  if (C < 2) throw ShapeError("softmax_xent needs at least 2 classes");
  if (labels.size() != B) throw ShapeError("softmax_xent: label count does not match batch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= C) {
      throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(C) + ")");
    }
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    const double* row = Z.ptr() + i * C;
    const double mx = *std::max_element(row, row + C);
    double z = 0.0;
    for (std::size_t j = 0; j < C; ++j) z += std::exp(row[j] - mx);
    loss += (std::log(z) + mx) - row[labels[i]];
  }
  loss /= static_cast<double>(B);
  std::vector<int> ys(labels.begin(), labels.end());
  return tape.push("softmax_xent", Array::scalar(loss), {logits},
                   [ys = std::move(ys), B, C](Tape& t, std::size_t self) {
                     const std::size_t iz = input_id(t, self, 0);
                     const double g = t.node(self).grad[0];
                     const Array p = softmax(t.node(iz).value);
                     Array& dZ = t.grad_buffer(iz);
                     const double scale = g / static_cast<double>(B);
                     for (std::size_t i = 0; i < B; ++i) {
                       for (std::size_t j = 0; j < C; ++j) {
                         const double onehot = static_cast<std::size_t>(ys[i]) == j ? 1.0 : 0.0;
                         dZ[i * C + j] += scale * (p[i * C + j] - onehot);
                       }
                     }
                   });
}

Var sigmoid_bce(Tape& tape, Var logit, std::span<const int> labels) {
  const Array& Z = tape.value(logit);
  expect_rank(Z, 2, "sigmoid_bce logit");
  const std::size_t B = Z.dim(0);
  if (Z.dim(1) != 1) throw ShapeError("sigmoid_bce expects (B, 1) logits");
  if (labels.size() != B) throw ShapeError("sigmoid_bce: label count does not match batch");
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("binary label " + std::to_string(y) + " not in {0, 1}");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    const double z = Z[i];
    // log(1 + e^z) - y z, written to avoid overflow.
    loss += std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
  }
  loss /= static_cast<double>(B);
  std::vector<int> ys(labels.begin(), labels.end());
  return tape.push("sigmoid_bce", Array::scalar(loss), {logit},
                   [ys = std::move(ys), B](Tape& t, std::size_t self) {
                     const std::size_t iz = input_id(t, self, 0);
                     const double g = t.node(self).grad[0];
                     const Array& Zv = t.node(iz).value;
                     Array& dZ = t.grad_buffer(iz);
                     for (std::size_t i = 0; i < B; ++i) {
                       const double s = activate(Activation::Sigmoid, Zv[i], 0.0);
                       dZ[i] += g * (s - ys[i]) / static_cast<double>(B);
                     }
                   });
}

Var mse(Tape& tape, Var pred, const Array& target) {
  const Array& P = tape.value(pred);
  if (P.size() != target.size()) throw ShapeError("mse: prediction and target sizes differ");
  double loss = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double d = P[i] - target[i];
    loss += d * d;
  }
  const double n = static_cast<double>(P.size());
  return tape.push("mse", Array::scalar(loss / n), {pred}, [target, n](Tape& t, std::size_t self) {
    const std::size_t ip = input_id(t, self, 0);
    const double g = t.node(self).grad[0];
    const Array& Pv = t.node(ip).value;
    Array& dP = t.grad_buffer(ip);
    for (std::size_t i = 0; i < Pv.size(); ++i) dP[i] += g * 2.0 * (Pv[i] - target[i]) / n;
  });
}

Var sum(Tape& tape, Var x) {
  const Array& X = tape.value(x);
  double s = 0.0;
  for (double v : X.data()) s += v;
  return tape.push("sum", Array::scalar(s), {x}, [](Tape& t, std::size_t self) {
    const std::size_t ix = input_id(t, self, 0);
    const double g = t.node(self).grad[0];
    Array& dX = t.grad_buffer(ix);
    for (auto& v : dX.data()) v += g;
  });
}

}  // namespace tsact
