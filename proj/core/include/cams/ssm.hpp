#pragma once

#include <cstdint>

#include "cams/param_store.hpp"
#include "cams/tensor.hpp"

namespace cams {

// Per-channel state-space parameters of one block. All tensors live in a
// ParamStore; x_proj_bias is optional and disabled when undefined.
template <typename T>
struct SsmParams {
  Tensor<T> a_log;        // [d_inner, d_state]; A = -exp(a_log)
  Tensor<T> skip_d;       // [d_inner]; undefined disables the direct feedthrough
  Tensor<T> w_x_proj;     // [d_inner, dt_rank + 2 * d_state]
  Tensor<T> x_proj_bias;  // [dt_rank + 2 * d_state], optional
  Tensor<T> w_dt_proj;    // [dt_rank, d_inner]
  Tensor<T> dt_bias;      // [d_inner], optional
  std::int64_t d_inner = 0;
  std::int64_t d_state = 0;
  std::int64_t dt_rank = 0;
};

template <typename T>
struct Discretized {
  Tensor<T> delta;  // [B, L, d_inner], strictly positive
  Tensor<T> b_seq;  // [B, L, d_state]
  Tensor<T> c_seq;  // [B, L, d_state]
};

// Input-dependent discretization: split(u . W_x) -> (dt_low, B, C) and
// delta = softplus(dt_low . W_dt + dt_bias), floored at 1e-20 so a gated-out
// step cannot underflow to an exactly zero delta at f32.
template <typename T>
Discretized<T> discretize(const Tensor<T>& u, const SsmParams<T>& p);

// Linear-time selective scan over u: [B, L, d_inner] with h_0 = 0:
//   h_t = exp(delta_t (x) A) (.) h_{t-1} + delta_t (.) u_t (.) B_t
//   y_t[c] = sum_s C_t[s] h_t[c, s] (+ skip_d[c] u_t[c])
// a: [d_inner, d_state] (negative for stability), skip_d optional.
// Rejects non-positive delta entries.
template <typename T>
Tensor<T> selective_scan(const Tensor<T>& u, const Tensor<T>& delta, const Tensor<T>& b_seq,
                         const Tensor<T>& c_seq, const Tensor<T>& a, const Tensor<T>& skip_d);

// Identical recurrence evaluated chunk by chunk with the hidden state carried
// across chunk boundaries. Matches selective_scan to the last bit.
template <typename T>
Tensor<T> selective_scan_chunked(const Tensor<T>& u, const Tensor<T>& delta,
                                 const Tensor<T>& b_seq, const Tensor<T>& c_seq,
                                 const Tensor<T>& a, const Tensor<T>& skip_d,
                                 std::int64_t chunk_size);

// discretize + scan with A = -exp(a_log). chunk_size 0 selects the
// single-sweep reference path.
template <typename T>
Tensor<T> ssm_forward(const Tensor<T>& u, const SsmParams<T>& p, std::int64_t chunk_size = 0);

}  // namespace cams
