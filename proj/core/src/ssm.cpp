#include "cams/ssm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cams/ops.hpp"
#include "op_support.hpp"

namespace cams {

namespace {

struct ScanDims {
  std::int64_t batch, len, ch, st;
};

template <typename T>
ScanDims check_scan_args(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& b_seq,
                         const Tensor<T>& c_seq, const Tensor<T>& a, const Tensor<T>& skip_d) {
  if (u.ndim() != 3) {
    throw std::invalid_argument("selective_scan: u must be [batch, len, channels], got " +
                                shape_str(u.shape()));
  }
  if (delta.shape() != u.shape()) {
    throw std::invalid_argument("selective_scan: delta shape " + shape_str(delta.shape()) +
                                " does not match u " + shape_str(u.shape()));
  }
  if (b_seq.ndim() != 3 || b_seq.dim(0) != u.dim(0) || b_seq.dim(1) != u.dim(1)) {
    throw std::invalid_argument("selective_scan: B sequence shape " + shape_str(b_seq.shape()) +
                                " does not match u " + shape_str(u.shape()));
  }
  if (c_seq.shape() != b_seq.shape()) {
    throw std::invalid_argument("selective_scan: C sequence shape " + shape_str(c_seq.shape()) +
                                " does not match B " + shape_str(b_seq.shape()));
  }
  if (a.ndim() != 2 || a.dim(0) != u.dim(2) || a.dim(1) != b_seq.dim(2)) {
    throw std::invalid_argument("selective_scan: A must be [channels, states] = [" +
                                std::to_string(u.dim(2)) + ", " + std::to_string(b_seq.dim(2)) +
                                "], got " + shape_str(a.shape()));
  }
  if (skip_d.defined() && (skip_d.ndim() != 1 || skip_d.dim(0) != u.dim(2))) {
    throw std::invalid_argument("selective_scan: skip must be [channels], got " +
                                shape_str(skip_d.shape()));
  }
  for (T v : delta.values()) {
    if (!(v > T(0))) {
      throw std::invalid_argument("selective_scan: delta must be strictly positive");
    }
  }
  return {u.dim(0), u.dim(1), u.dim(2), b_seq.dim(2)};
}

// One pass of the recurrence. Chunking only restarts the time loop at chunk
// boundaries while the hidden state carries over, so any chunk size produces
// bit-identical output. When hs is non-null the hidden states of batch
// element `hs_batch` are saved as [len + 1, ch, st] with hs[0] = 0.
template <typename T>
void scan_forward(const T* u, const T* delta, const T* bs, const T* cs, const T* a, const T* skip,
                  ScanDims d, std::int64_t chunk, T* y, T* hs = nullptr,
                  std::int64_t hs_batch = -1) {
  const std::int64_t cs_sz = d.ch * d.st;
  std::vector<T> h(static_cast<std::size_t>(cs_sz));
  for (std::int64_t b = 0; b < d.batch; ++b) {
    if (hs && b != hs_batch) continue;
    std::fill(h.begin(), h.end(), T(0));
    for (std::int64_t t0 = 0; t0 < d.len; t0 += chunk) {
      const std::int64_t t1 = std::min(d.len, t0 + chunk);
      for (std::int64_t t = t0; t < t1; ++t) {
        const std::int64_t row = b * d.len + t;
        const T* ut = u + row * d.ch;
        const T* dt = delta + row * d.ch;
        const T* bt = bs + row * d.st;
        const T* ct = cs + row * d.st;
        T* yt = y + row * d.ch;
        for (std::int64_t c = 0; c < d.ch; ++c) {
          T* hc = h.data() + c * d.st;
          const T* ac = a + c * d.st;
          const T du = dt[c] * ut[c];
          T acc = T(0);
          for (std::int64_t s = 0; s < d.st; ++s) {
            hc[s] = std::exp(dt[c] * ac[s]) * hc[s] + du * bt[s];
            acc += ct[s] * hc[s];
          }
          yt[c] = skip ? acc + skip[c] * ut[c] : acc;
        }
        if (hs) std::copy(h.begin(), h.end(), hs + (t + 1) * cs_sz);
      }
    }
  }
}

// Reverse sweep via backprop through time. Hidden states are recomputed one
// batch element at a time instead of being saved by the forward pass, so the
// node stores nothing beyond its inputs. Null grad pointers skip that input.
template <typename T>
void scan_backward(const T* u, const T* delta, const T* bs, const T* cs, const T* a,
                   const T* skip, const T* gy, ScanDims d, T* gu, T* gdelta, T* gb, T* gc, T* ga,
                   T* gskip) {
  const std::int64_t cs_sz = d.ch * d.st;
  std::vector<T> hs(static_cast<std::size_t>((d.len + 1) * cs_sz));
  std::vector<T> carry(static_cast<std::size_t>(cs_sz));
  std::vector<T> ydump(static_cast<std::size_t>(d.batch * d.len * d.ch));
  for (std::int64_t b = 0; b < d.batch; ++b) {
    std::fill(hs.begin(), hs.begin() + cs_sz, T(0));
    scan_forward(u, delta, bs, cs, a, skip, d, d.len, ydump.data(), hs.data(), b);
    std::fill(carry.begin(), carry.end(), T(0));
    for (std::int64_t t = d.len; t-- > 0;) {
      const std::int64_t row = b * d.len + t;
      const T* ut = u + row * d.ch;
      const T* dt = delta + row * d.ch;
      const T* bt = bs + row * d.st;
      const T* ct = cs + row * d.st;
      const T* gyt = gy + row * d.ch;
      const T* h_prev = hs.data() + t * cs_sz;
      const T* h_cur = hs.data() + (t + 1) * cs_sz;
      for (std::int64_t c = 0; c < d.ch; ++c) {
        const T gyc = gyt[c];
        const T* ac = a + c * d.st;
        T* carry_c = carry.data() + c * d.st;
        T gd_acc = T(0);
        T gu_acc = T(0);
        for (std::int64_t s = 0; s < d.st; ++s) {
          const std::int64_t k = c * d.st + s;
          const T da = std::exp(dt[c] * ac[s]);
          const T gh = gyc * ct[s] + carry_c[s];
          const T gda = gh * h_prev[k];
          if (gc) gc[row * d.st + s] += gyc * h_cur[k];
          if (gb) gb[row * d.st + s] += gh * dt[c] * ut[c];
          if (ga) ga[k] += gda * dt[c] * da;
          gd_acc += gda * ac[s] * da + gh * ut[c] * bt[s];
          gu_acc += gh * dt[c] * bt[s];
          carry_c[s] = da * gh;
        }
        if (gdelta) gdelta[row * d.ch + c] += gd_acc;
        if (gu) gu[row * d.ch + c] += gu_acc + (skip ? skip[c] * gyc : T(0));
        if (gskip) gskip[c] += gyc * ut[c];
      }
    }
  }
}

template <typename T>
Tensor<T> scan_impl(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& b_seq,
                    const Tensor<T>& c_seq, const Tensor<T>& a, const Tensor<T>& skip_d,
                    std::int64_t chunk) {
  const ScanDims dims = check_scan_args(u, delta, b_seq, c_seq, a, skip_d);
  Tensor<T> y(u.shape());
  const T* skip_ptr = skip_d.defined() ? skip_d.values().data() : nullptr;
  scan_forward(u.values().data(), delta.values().data(), b_seq.values().data(),
               c_seq.values().data(), a.values().data(), skip_ptr, dims, chunk,
               y.values().data());

  const bool any_grad = u.requires_grad() || delta.requires_grad() || b_seq.requires_grad() ||
                        c_seq.requires_grad() || a.requires_grad() ||
                        (skip_d.defined() && skip_d.requires_grad());
  if (Tape<T>::active() && any_grad) {
    auto ui = u.impl();
    auto di = delta.impl();
    auto bi = b_seq.impl();
    auto ci = c_seq.impl();
    auto ai = a.impl();
    auto si = skip_d.defined() ? skip_d.impl() : nullptr;
    auto yi = y.impl();
    std::vector<std::shared_ptr<detail::TensorImpl<T>>> inputs = {ui, di, bi, ci, ai};
    if (si) inputs.push_back(si);
    Tape<T>::active()->record("selective_scan", std::move(inputs), y.impl(),
                              [ui, di, bi, ci, ai, si, yi, dims]() {
      auto grad_of = [](auto& impl) -> T* {
        if (!impl || !impl->requires_grad) return nullptr;
        impl->ensure_grad();
        return impl->grad.data();
      };
      scan_backward(ui->data.data(), di->data.data(), bi->data.data(), ci->data.data(),
                    ai->data.data(), si ? si->data.data() : nullptr, yi->grad.data(), dims,
                    grad_of(ui), grad_of(di), grad_of(bi), grad_of(ci), grad_of(ai),
                    grad_of(si));
    });
  }
  return y;
}

}  // namespace

template <typename T>
Discretized<T> discretize(const Tensor<T>& u, const SsmParams<T>& p) {
  if (u.ndim() != 3 || u.dim(2) != p.d_inner) {
    throw std::invalid_argument("discretize: u must be [batch, len, " +
                                std::to_string(p.d_inner) + "], got " + shape_str(u.shape()));
  }
  Tensor<T> packed = p.x_proj_bias.defined() ? linear(u, p.w_x_proj, p.x_proj_bias)
                                             : linear(u, p.w_x_proj);
  Tensor<T> dt_low = narrow(packed, -1, 0, p.dt_rank);
  Discretized<T> out;
  out.b_seq = narrow(packed, -1, p.dt_rank, p.d_state);
  out.c_seq = narrow(packed, -1, p.dt_rank + p.d_state, p.d_state);
  Tensor<T> dt = p.dt_bias.defined() ? linear(dt_low, p.w_dt_proj, p.dt_bias)
                                     : linear(dt_low, p.w_dt_proj);
  // The floor keeps delta representable when a very negative step logit
  // (the model gating an input out) underflows softplus to zero at f32.
  out.delta = add_scalar(softplus(dt), T(1e-20));
  return out;
}

template <typename T>
Tensor<T> selective_scan(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& b_seq,
                         const Tensor<T>& c_seq, const Tensor<T>& a, const Tensor<T>& skip_d) {
  return scan_impl(u, delta, b_seq, c_seq, a, skip_d, u.dim(1) > 0 ? u.dim(1) : 1);
}

template <typename T>
Tensor<T> selective_scan_chunked(const Tensor<T>& u, const Tensor<T>& delta,
                                 const Tensor<T>& b_seq, const Tensor<T>& c_seq,
                                 const Tensor<T>& a, const Tensor<T>& skip_d,
                                 std::int64_t chunk_size) {
  if (chunk_size < 1) {
    throw std::invalid_argument("selective_scan_chunked: chunk_size must be >= 1, got " +
                                std::to_string(chunk_size));
  }
  return scan_impl(u, delta, b_seq, c_seq, a, skip_d, chunk_size);
}

template <typename T>
Tensor<T> ssm_forward(const Tensor<T>& u, const SsmParams<T>& p, std::int64_t chunk_size) {
  Discretized<T> dc = discretize(u, p);
  Tensor<T> a = neg(exp(p.a_log));
  if (chunk_size > 0) {
    return selective_scan_chunked(u, dc.delta, dc.b_seq, dc.c_seq, a, p.skip_d, chunk_size);
  }
  return selective_scan(u, dc.delta, dc.b_seq, dc.c_seq, a, p.skip_d);
}

#define CAMS_INSTANTIATE_SSM(T)                                                                \
  template Discretized<T> discretize(const Tensor<T>&, const SsmParams<T>&);                   \
  template Tensor<T> selective_scan(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                    const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> selective_scan_chunked(const Tensor<T>&, const Tensor<T>&,                \
                                            const Tensor<T>&, const Tensor<T>&,                \
                                            const Tensor<T>&, const Tensor<T>&, std::int64_t); \
  template Tensor<T> ssm_forward(const Tensor<T>&, const SsmParams<T>&, std::int64_t);

CAMS_INSTANTIATE_SSM(float)
CAMS_INSTANTIATE_SSM(double)

#undef CAMS_INSTANTIATE_SSM

}  // namespace cams
