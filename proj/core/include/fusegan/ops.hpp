#pragma once

#include "fusegan/autodiff.hpp"

namespace fusegan {

/// Number of worker threads for batch-parallel kernels (convolutions).
/// Results are identical for any value; this is a speed knob only.
void set_compute_threads(int n);
int compute_threads();

namespace ops {

// ---- elementwise ----------------------------------------------------------
Var add(const Var& a, const Var& b);   // broadcasting, right-aligned
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);   // broadcasting
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double c);
Var pow_scalar(const Var& a, double e);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var min_zero(const Var& a);  // min(0, a)

// ---- shape ----------------------------------------------------------------
Var reshape(const Var& a, Shape shape);
Var transpose2(const Var& a);                    // 2-D transpose
Var broadcast_to(const Var& a, Shape shape);
Var sum_to(const Var& a, Shape shape);           // reduce-sum onto shape
Var sum_all(const Var& a);                       // -> scalar
Var mean_all(const Var& a);
Var concat(const std::vector<Var>& xs, int64_t axis);
Var slice(const Var& a, int64_t axis, int64_t start, int64_t len);
Var detach(const Var& a);

// ---- linear algebra -------------------------------------------------------
Var matmul(const Var& a, const Var& b);          // [M,K] x [K,N]

// ---- convolution family (NCHW) --------------------------------------------
// y = conv2d(x, w): correlation with zero padding. The three kernels are
// mutually adjoint, which closes the set under differentiation.
Var conv2d(const Var& x, const Var& w, int stride, int pad);
Var conv2d_input_grad(const Var& gy, const Var& w, Shape x_shape, int stride, int pad);
Var conv2d_weight_grad(const Var& x, const Var& gy, Shape w_shape, int stride, int pad);

// ---- resampling -----------------------------------------------------------
Var upsample_nearest2(const Var& x);   // doubles H and W
Var pool_sum2(const Var& x);           // sums 2x2 windows, halves H and W
Var avg_pool2(const Var& x);

}  // namespace ops
}  // namespace fusegan
