#include "pgn/kernels.hpp"

#include <cblas.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "pgn/errors.hpp"

namespace pgn::kernels {
namespace {

void check_4d(const Tensor& t, const char* what) {
  if (t.ndim() != 4) {
    throw DimensionError("diffcore", std::string(what) + " must be 4-d NCHW, got shape " + t.shape_str());
  }
}

// col layout: (C*K*K) x (outH*outW), col[(c*K+kh)*K+kw][oh*outW+ow] = x[c][oh*s-p+kh][ow*s-p+kw].
void im2col(const float* x, int C, int H, int W, int K, int stride, int pad, int outH, int outW,
            float* col) {
  for (int c = 0; c < C; ++c) {
    for (int kh = 0; kh < K; ++kh) {
      for (int kw = 0; kw < K; ++kw) {
        float* dst = col + (static_cast<std::int64_t>((c * K + kh) * K + kw)) * outH * outW;
        for (int oh = 0; oh < outH; ++oh) {
          const int ih = oh * stride - pad + kh;
          if (ih < 0 || ih >= H) {
            std::memset(dst + static_cast<std::int64_t>(oh) * outW, 0, sizeof(float) * static_cast<std::size_t>(outW));
            continue;
          }
          const float* src_row = x + (static_cast<std::int64_t>(c) * H + ih) * W;
          for (int ow = 0; ow < outW; ++ow) {
            const int iw = ow * stride - pad + kw;
            dst[static_cast<std::int64_t>(oh) * outW + ow] =
                (iw >= 0 && iw < W) ? src_row[iw] : 0.0f;
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col into a (C,H,W) target.
void col2im(const float* col, int C, int H, int W, int K, int stride, int pad, int srcH, int srcW,
            float* x) {
  for (int c = 0; c < C; ++c) {
    for (int kh = 0; kh < K; ++kh) {
      for (int kw = 0; kw < K; ++kw) {
        const float* src = col + (static_cast<std::int64_t>((c * K + kh) * K + kw)) * srcH * srcW;
        for (int oh = 0; oh < srcH; ++oh) {
          const int ih = oh * stride - pad + kh;
          if (ih < 0 || ih >= H) continue;
          float* dst_row = x + (static_cast<std::int64_t>(c) * H + ih) * W;
          for (int ow = 0; ow < srcW; ++ow) {
            const int iw = ow * stride - pad + kw;
            if (iw >= 0 && iw < W) dst_row[iw] += src[static_cast<std::int64_t>(oh) * srcW + ow];
          }
        }
      }
    }
  }
}

void sgemm(bool trans_a, bool trans_b, int m, int n, int k, const float* a, int lda,
           const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0f, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace

int conv_out_size(int in, int kernel, int stride, int padding) {
  const int eff = in + 2 * padding - kernel;
  if (eff < 0 || stride < 1) {
    throw DimensionError("diffcore", "conv geometry invalid: input " + std::to_string(in) +
                                         ", kernel " + std::to_string(kernel) + ", stride " +
                                         std::to_string(stride) + ", padding " + std::to_string(padding));
  }
  return eff / stride + 1;  // floor division: trailing rows may be unused
}

int conv_transpose_out_size(int in, int kernel, int stride, int padding) {
  const int out = (in - 1) * stride - 2 * padding + kernel;
  if (out <= 0) {
    throw DimensionError("diffcore", "conv_transpose geometry invalid: input " + std::to_string(in) +
                                         ", kernel " + std::to_string(kernel) + ", stride " +
                                         std::to_string(stride) + ", padding " + std::to_string(padding));
  }
  return out;
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
  check_4d(x, "conv2d input");
  check_4d(w, "conv2d weight");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = w.dim(0), K = w.dim(2);
  if (w.dim(1) != C) {
    throw DimensionError("diffcore", "conv2d channel mismatch: input has " + std::to_string(C) +
                                         " channels, weight expects " + std::to_string(w.dim(1)));
  }
  if (w.dim(2) != w.dim(3)) throw DimensionError("diffcore", "conv2d kernel must be square, got " + w.shape_str());
  if (b.numel() != O) throw DimensionError("diffcore", "conv2d bias length must equal output channels");
  const int outH = conv_out_size(H, K, stride, padding);
  const int outW = conv_out_size(W, K, stride, padding);

  Tensor y({N, O, outH, outW});
  const int ckk = C * K * K;
  const int spatial = outH * outW;
  std::vector<float> col(static_cast<std::size_t>(ckk) * spatial);
  for (int n = 0; n < N; ++n) {
    const float* xn = x.data() + static_cast<std::int64_t>(n) * C * H * W;
    float* yn = y.data() + static_cast<std::int64_t>(n) * O * spatial;
    im2col(xn, C, H, W, K, stride, padding, outH, outW, col.data());
    sgemm(false, false, O, spatial, ckk, w.data(), ckk, col.data(), spatial, 0.0f, yn, spatial);
    for (int o = 0; o < O; ++o) {
      const float bo = b[o];
      float* row = yn + static_cast<std::int64_t>(o) * spatial;
      for (int i = 0; i < spatial; ++i) row[i] += bo;
    }
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& gout, int stride, int padding,
                     Tensor* gx, Tensor* gw, Tensor* gb) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = w.dim(0), K = w.dim(2);
  const int outH = gout.dim(2), outW = gout.dim(3);
  const int ckk = C * K * K;
  const int spatial = outH * outW;

  std::vector<float> col(static_cast<std::size_t>(ckk) * spatial);
  for (int n = 0; n < N; ++n) {
    const float* gn = gout.data() + static_cast<std::int64_t>(n) * O * spatial;
    if (gx) {
      sgemm(true, false, ckk, spatial, O, w.data(), ckk, gn, spatial, 0.0f, col.data(), spatial);
      col2im(col.data(), C, H, W, K, stride, padding, outH, outW,
             gx->data() + static_cast<std::int64_t>(n) * C * H * W);
    }
    if (gw) {
      const float* xn = x.data() + static_cast<std::int64_t>(n) * C * H * W;
      im2col(xn, C, H, W, K, stride, padding, outH, outW, col.data());
      sgemm(false, true, O, ckk, spatial, gn, spatial, col.data(), spatial, 1.0f, gw->data(), ckk);
    }
    if (gb) {
      for (int o = 0; o < O; ++o) {
        double acc = 0.0;
        const float* row = gn + static_cast<std::int64_t>(o) * spatial;
        for (int i = 0; i < spatial; ++i) acc += row[i];
        (*gb)[o] += static_cast<float>(acc);
      }
    }
  }
}

Tensor conv_transpose2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                                int padding) {
  check_4d(x, "conv_transpose2d input");
  check_4d(w, "conv_transpose2d weight");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (w.dim(0) != C) {
    throw DimensionError("diffcore", "conv_transpose2d channel mismatch: input has " + std::to_string(C) +
                                         " channels, weight expects " + std::to_string(w.dim(0)));
  }
  const int O = w.dim(1), K = w.dim(2);
  if (w.dim(2) != w.dim(3)) throw DimensionError("diffcore", "conv_transpose2d kernel must be square");
  if (b.numel() != O) throw DimensionError("diffcore", "conv_transpose2d bias length must equal output channels");
  const int outH = conv_transpose_out_size(H, K, stride, padding);
  const int outW = conv_transpose_out_size(W, K, stride, padding);

  // Permute (C,O,K,K) -> Wm (O*K*K, C) so each sample is a single GEMM.
  const int okk = O * K * K;
  std::vector<float> wm(static_cast<std::size_t>(okk) * C);
  for (int c = 0; c < C; ++c)
    for (int o = 0; o < O; ++o)
      for (int kh = 0; kh < K; ++kh)
        for (int kw = 0; kw < K; ++kw)
          wm[static_cast<std::size_t>(((o * K + kh) * K + kw)) * C + c] =
              w[((static_cast<std::int64_t>(c) * O + o) * K + kh) * K + kw];

  Tensor y({N, O, outH, outW});
  const int in_spatial = H * W;
  std::vector<float> col(static_cast<std::size_t>(okk) * in_spatial);
  for (int n = 0; n < N; ++n) {
    const float* xn = x.data() + static_cast<std::int64_t>(n) * C * in_spatial;
    float* yn = y.data() + static_cast<std::int64_t>(n) * O * outH * outW;
    sgemm(false, false, okk, in_spatial, C, wm.data(), C, xn, in_spatial, 0.0f, col.data(), in_spatial);
    col2im(col.data(), O, outH, outW, K, stride, padding, H, W, yn);
    for (int o = 0; o < O; ++o) {
      const float bo = b[o];
      float* plane = yn + static_cast<std::int64_t>(o) * outH * outW;
      for (int i = 0; i < outH * outW; ++i) plane[i] += bo;
    }
  }
  return y;
}

void conv_transpose2d_backward(const Tensor& x, const Tensor& w, const Tensor& gout, int stride,
                               int padding, Tensor* gx, Tensor* gw, Tensor* gb) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = w.dim(1), K = w.dim(2);
  const int outH = gout.dim(2), outW = gout.dim(3);
  const int okk = O * K * K;
  const int in_spatial = H * W;

  std::vector<float> wm;
  if (gx) {
    wm.resize(static_cast<std::size_t>(okk) * C);
    for (int c = 0; c < C; ++c)
      for (int o = 0; o < O; ++o)
        for (int kh = 0; kh < K; ++kh)
          for (int kw = 0; kw < K; ++kw)
            wm[static_cast<std::size_t>(((o * K + kh) * K + kw)) * C + c] =
                w[((static_cast<std::int64_t>(c) * O + o) * K + kh) * K + kw];
  }
  std::vector<float> gwm;
  if (gw) gwm.assign(static_cast<std::size_t>(okk) * C, 0.0f);

  std::vector<float> col(static_cast<std::size_t>(okk) * in_spatial);
  for (int n = 0; n < N; ++n) {
    const float* gn = gout.data() + static_cast<std::int64_t>(n) * O * outH * outW;
    // Gather gout back onto the input grid; shared by both gradient paths.
    im2col(gn, O, outH, outW, K, stride, padding, H, W, col.data());
    if (gx) {
      sgemm(true, false, C, in_spatial, okk, wm.data(), C, col.data(), in_spatial, 1.0f,
            gx->data() + static_cast<std::int64_t>(n) * C * in_spatial, in_spatial);
    }
    if (gw) {
      const float* xn = x.data() + static_cast<std::int64_t>(n) * C * in_spatial;
      sgemm(false, true, okk, C, in_spatial, col.data(), in_spatial, xn, in_spatial, 1.0f,
            gwm.data(), C);
    }
    if (gb) {
      for (int o = 0; o < O; ++o) {
        double acc = 0.0;
        const float* plane = gn + static_cast<std::int64_t>(o) * outH * outW;
        for (int i = 0; i < outH * outW; ++i) acc += plane[i];
        (*gb)[o] += static_cast<float>(acc);
      }
    }
  }
  if (gw) {
    for (int c = 0; c < C; ++c)
      for (int o = 0; o < O; ++o)
        for (int kh = 0; kh < K; ++kh)
          for (int kw = 0; kw < K; ++kw)
            (*gw)[((static_cast<std::int64_t>(c) * O + o) * K + kh) * K + kw] +=
                gwm[static_cast<std::size_t>(((o * K + kh) * K + kw)) * C + c];
  }
}

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 2 || w.ndim() != 2) {
    throw DimensionError("diffcore", "dense expects 2-d input and weight, got " + x.shape_str() +
                                         " and " + w.shape_str());
  }
  const int N = x.dim(0), F = x.dim(1), O = w.dim(0);
  if (w.dim(1) != F) {
    throw DimensionError("diffcore", "dense feature mismatch: input has " + std::to_string(F) +
                                         " features, weight expects " + std::to_string(w.dim(1)));
  }
  if (b.numel() != O) throw DimensionError("diffcore", "dense bias length must equal output units");
  Tensor y({N, O});
  sgemm(false, true, N, O, F, x.data(), F, w.data(), F, 0.0f, y.data(), O);
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o) y.at2(n, o) += b[o];
  return y;
}

void dense_backward(const Tensor& x, const Tensor& w, const Tensor& gout, Tensor* gx, Tensor* gw,
                    Tensor* gb) {
  const int N = x.dim(0), F = x.dim(1), O = w.dim(0);
  if (gx) sgemm(false, false, N, F, O, gout.data(), O, w.data(), F, 1.0f, gx->data(), F);
  if (gw) sgemm(true, false, O, F, N, gout.data(), O, x.data(), F, 1.0f, gw->data(), F);
  if (gb) {
    for (int o = 0; o < O; ++o) {
      double acc = 0.0;
      for (int n = 0; n < N; ++n) acc += gout.at2(n, o);
      (*gb)[o] += static_cast<float>(acc);
    }
  }
}

Tensor avg_pool2d_forward(const Tensor& x, int k) {
  check_4d(x, "avg_pool2d input");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (k <= 0 || H % k != 0 || W % k != 0) {
    throw DimensionError("diffcore", "avg_pool2d kernel " + std::to_string(k) +
                                         " must evenly divide spatial dims of " + x.shape_str());
  }
  const int outH = H / k, outW = W / k;
  Tensor y({N, C, outH, outW});
  const double inv = 1.0 / (k * k);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < outH; ++oh)
        for (int ow = 0; ow < outW; ++ow) {
          double acc = 0.0;
          for (int ih = oh * k; ih < (oh + 1) * k; ++ih)
            for (int iw = ow * k; iw < (ow + 1) * k; ++iw) acc += x.at4(n, c, ih, iw);
          y.at4(n, c, oh, ow) = static_cast<float>(acc * inv);
        }
  return y;
}

void avg_pool2d_backward(const Tensor& x, const Tensor& gout, int k, Tensor* gx) {
  const int N = x.dim(0), C = x.dim(1);
  const int outH = gout.dim(2), outW = gout.dim(3);
  const float inv = 1.0f / static_cast<float>(k * k);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < outH; ++oh)
        for (int ow = 0; ow < outW; ++ow) {
          const float g = gout.at4(n, c, oh, ow) * inv;
          for (int ih = oh * k; ih < (oh + 1) * k; ++ih)
            for (int iw = ow * k; iw < (ow + 1) * k; ++iw) gx->at4(n, c, ih, iw) += g;
        }
}

Tensor softmax_forward(const Tensor& logits) {
  if (logits.ndim() != 2) {
    throw DimensionError("diffcore", "softmax expects a 2-d (N,K) tensor, got " + logits.shape_str());
  }
  const int N = logits.dim(0), K = logits.dim(1);
  Tensor y({N, K});
  for (int n = 0; n < N; ++n) {
    float mx = logits.at2(n, 0);
    for (int k = 1; k < K; ++k) mx = std::max(mx, logits.at2(n, k));
    double z = 0.0;
    for (int k = 0; k < K; ++k) {
      const float e = std::exp(logits.at2(n, k) - mx);
      y.at2(n, k) = e;
      z += e;
    }
    const float inv = static_cast<float>(1.0 / z);
    for (int k = 0; k < K; ++k) y.at2(n, k) *= inv;
  }
  return y;
}

}  // namespace pgn::kernels
