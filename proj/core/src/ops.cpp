#include "fusegan/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "fusegan/errors.hpp"

namespace fusegan {

namespace {

std::atomic<int> g_compute_threads{0};

int detect_threads() {
  if (const char* env = std::getenv("FUSEGAN_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::min<unsigned>(hw == 0 ? 1 : hw, 2));
}

// Batch-level parallelism with single-threaded BLAS underneath keeps every
// result bit-identical regardless of the thread count.
void apply_blas_threads() { openblas_set_num_threads(1); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  int k = compute_threads();
  if (k <= 1 || n <= 1) {
    fn(0, n);
    return;
  }
  k = static_cast<int>(std::min<int64_t>(k, n));
  const int64_t chunk = (n + k - 1) / k;
  std::vector<std::thread> workers;
  workers.reserve(static_cast<size_t>(k - 1));
  for (int t = 1; t < k; ++t) {
    const int64_t lo = t * chunk;
    const int64_t hi = std::min<int64_t>(n, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back(fn, lo, hi);
  }
  fn(0, std::min<int64_t>(n, chunk));
  for (auto& w : workers) w.join();
}

}  // namespace

void set_compute_threads(int n) {
  g_compute_threads.store(std::max(1, n));
  apply_blas_threads();
}

int compute_threads() {
  int n = g_compute_threads.load();
  if (n == 0) {
    n = detect_threads();
    g_compute_threads.store(n);
    apply_blas_threads();
  }
  return n;
}

namespace ops {

namespace {

Shape aligned(const Shape& s, size_t rank) {
  if (s.size() > rank) throw ShapeError("cannot align " + shape_str(s));
  Shape out(rank, 1);
  std::copy(s.begin(), s.end(), out.begin() + (rank - s.size()));
  return out;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const size_t rank = std::max(a.size(), b.size());
  Shape sa = aligned(a, rank), sb = aligned(b, rank), out(rank);
  for (size_t i = 0; i < rank; ++i) {
    if (sa[i] == sb[i]) {
      out[i] = sa[i];
    } else if (sa[i] == 1) {
      out[i] = sb[i];
    } else if (sb[i] == 1) {
      out[i] = sa[i];
    } else {
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
  }
  return out;
}

std::vector<int64_t> contiguous_strides(const Shape& s) {
  std::vector<int64_t> st(s.size(), 0);
  int64_t acc = 1;
  for (size_t i = s.size(); i-- > 0;) {
    st[i] = acc;
    acc *= s[i];
  }
  return st;
}

// Strides of `s` viewed under broadcast to `out` (0 where broadcast).
std::vector<int64_t> broadcast_strides(const Shape& s, const Shape& out) {
  Shape sa = aligned(s, out.size());
  auto st = contiguous_strides(sa);
  for (size_t i = 0; i < out.size(); ++i)
    if (sa[i] == 1 && out[i] != 1) st[i] = 0;
  return st;
}

template <typename F>
void binary_kernel_general(const Tensor& a, const Tensor& b, Tensor& out, F f) {
  const Shape& os = out.shape();
  auto sa = broadcast_strides(a.shape(), os);
  auto sb = broadcast_strides(b.shape(), os);
  const float* pa = a.data();
  const float* pb = b.data();
  float* po = out.data();
  std::vector<int64_t> idx(os.size(), 0);
  int64_t offa = 0, offb = 0;
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) {
    po[i] = f(pa[offa], pb[offb]);
    for (size_t d = os.size(); d-- > 0;) {
      ++idx[d];
      offa += sa[d];
      offb += sb[d];
      if (idx[d] < os[d]) break;
      offa -= sa[d] * os[d];
      offb -= sb[d] * os[d];
      idx[d] = 0;
    }
  }
}

// Longest trailing run of dims over which `st` is constant (stride 0 or
// trivial dim).
size_t const_suffix(const std::vector<int64_t>& st, const Shape& os) {
  size_t t = 0;
  while (t < os.size()) {
    const size_t d = os.size() - 1 - t;
    if (os[d] != 1 && st[d] != 0) break;
    ++t;
  }
  return t;
}

template <typename F>
Tensor binary_forward(const Tensor& a, const Tensor& b, F f) {
  Shape os = broadcast_shape(a.shape(), b.shape());
  Tensor out(os);
  const float* pa = a.data();
  const float* pb = b.data();
  float* po = out.data();
  const int64_t n = out.numel();
  if (a.shape() == b.shape()) {
    for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
    return out;
  }
  if (b.numel() == 1) {
    const float s = pb[0];
    for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i], s);
    return out;
  }
  if (a.numel() == 1) {
    const float s = pa[0];
    for (int64_t i = 0; i < n; ++i) po[i] = f(s, pb[i]);
    return out;
  }
  auto sa = broadcast_strides(a.shape(), os);
  auto sb = broadcast_strides(b.shape(), os);
  const size_t rank = os.size();
  const size_t za = const_suffix(sa, os);
  const size_t zb = const_suffix(sb, os);
  size_t t = std::max(za, zb);
  const bool b_is_const = zb >= za;
  // The varying side must be dense over the block (no broadcast dims inside).
  const auto& svar = b_is_const ? sa : sb;
  for (size_t i = 0; i < t; ++i) {
    const size_t d = rank - 1 - i;
    if (os[d] != 1 && svar[d] == 0) {
      t = i;
      break;
    }
  }
  if (t == 0) {
    binary_kernel_general(a, b, out, f);
    return out;
  }
  int64_t inner = 1;
  for (size_t i = 0; i < t; ++i) inner *= os[rank - 1 - i];
  const size_t split = rank - t;
  std::vector<int64_t> idx(split, 0);
  int64_t offa = 0, offb = 0;
  const int64_t outer = n / inner;
  for (int64_t o = 0; o < outer; ++o) {
    float* dst = po + o * inner;
    if (b_is_const) {
      const float s = pb[offb];
      const float* src = pa + offa;
      for (int64_t i = 0; i < inner; ++i) dst[i] = f(src[i], s);
    } else {
      const float s = pa[offa];
      const float* src = pb + offb;
      for (int64_t i = 0; i < inner; ++i) dst[i] = f(s, src[i]);
    }
    for (size_t d = split; d-- > 0;) {
      ++idx[d];
      offa += sa[d];
      offb += sb[d];
      if (idx[d] < os[d]) break;
      offa -= sa[d] * os[d];
      offb -= sb[d] * os[d];
      idx[d] = 0;
    }
  }
  return out;
}

template <typename F>
Tensor unary_forward(const Tensor& a, F f) {
  Tensor out(a.shape());
  const float* pa = a.data();
  float* po = out.data();
  for (int64_t i = 0; i < a.numel(); ++i) po[i] = f(pa[i]);
  return out;
}

Tensor sum_to_tensor(const Tensor& a, const Shape& target) {
  if (a.shape() == target) return a;
  if (target.size() > a.shape().size())
    throw ShapeError("sum_to cannot raise rank " + shape_str(a.shape()) + " -> " +
                     shape_str(target));
  Shape ts = aligned(target, a.shape().size());
  for (size_t i = 0; i < ts.size(); ++i)
    if (ts[i] != a.shape()[i] && ts[i] != 1)
      throw ShapeError("sum_to " + shape_str(a.shape()) + " -> " + shape_str(target));
  Tensor out(target);
  std::vector<double> acc(static_cast<size_t>(out.numel()), 0.0);
  auto so = broadcast_strides(ts, a.shape());
  const float* pa = a.data();
  std::vector<int64_t> idx(a.shape().size(), 0);
  int64_t offo = 0;
  const int64_t n = a.numel();
  const Shape& as = a.shape();
  for (int64_t i = 0; i < n; ++i) {
    acc[static_cast<size_t>(offo)] += pa[i];
    for (size_t d = as.size(); d-- > 0;) {
      ++idx[d];
      offo += so[d];
      if (idx[d] < as[d]) break;
      offo -= so[d] * as[d];
      idx[d] = 0;
    }
  }
  float* po = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) po[i] = static_cast<float>(acc[static_cast<size_t>(i)]);
  return out;
}

Tensor broadcast_to_tensor(const Tensor& a, const Shape& target) {
  if (a.shape() == target) return a;
  Tensor out(target);
  float* po = out.data();
  const float* pa = a.data();
  const int64_t n = out.numel();
  if (a.numel() == 1) {
    std::fill(po, po + n, pa[0]);
    return out;
  }
  auto sa = broadcast_strides(a.shape(), target);
  const size_t rank = target.size();
  size_t t = const_suffix(sa, target);
  int64_t inner = 1;
  for (size_t i = 0; i < t; ++i) inner *= target[rank - 1 - i];
  const size_t split = rank - t;
  std::vector<int64_t> idx(split, 0);
  int64_t offa = 0;
  const int64_t outer = n / inner;
  for (int64_t o = 0; o < outer; ++o) {
    if (inner > 1)
      std::fill(po + o * inner, po + (o + 1) * inner, pa[offa]);
    else
      po[o] = pa[offa];
    for (size_t d = split; d-- > 0;) {
      ++idx[d];
      offa += sa[d];
      if (idx[d] < target[d]) break;
      offa -= sa[d] * target[d];
      idx[d] = 0;
    }
  }
  return out;
}

void check_finite_shape(const Var& v, const char* who) {
  if (!v) throw ContractViolation(std::string(who) + ": null operand");
}

}  // namespace

// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  check_finite_shape(a, "add");
  check_finite_shape(b, "add");
  Tensor out = binary_forward(a->value, b->value, [](float x, float y) { return x + y; });
  Var n = make_op(std::move(out), {a, b}, "add");
  if (n->requires_grad) {
    Shape as = a->shape(), bs = b->shape();
    n->vjp = [as, bs](const Var& g) -> std::vector<Var> {
      return {sum_to(g, as), sum_to(g, bs)};
    };
  }
  return n;
}

Var sub(const Var& a, const Var& b) {
  Tensor out = binary_forward(a->value, b->value, [](float x, float y) { return x - y; });
  Var n = make_op(std::move(out), {a, b}, "sub");
  if (n->requires_grad) {
    Shape as = a->shape(), bs = b->shape();
    n->vjp = [as, bs](const Var& g) -> std::vector<Var> {
      return {sum_to(g, as), sum_to(neg(g), bs)};
    };
  }
  return n;
}

Var mul(const Var& a, const Var& b) {
  Tensor out = binary_forward(a->value, b->value, [](float x, float y) { return x * y; });
  Var n = make_op(std::move(out), {a, b}, "mul");
  if (n->requires_grad) {
    Shape as = a->shape(), bs = b->shape();
    Var ca = a, cb = b;
    n->vjp = [as, bs, ca, cb](const Var& g) -> std::vector<Var> {
      return {sum_to(mul(g, cb), as), sum_to(mul(g, ca), bs)};
    };
  }
  return n;
}

Var neg(const Var& a) {
  Tensor out = unary_forward(a->value, [](float x) { return -x; });
  Var n = make_op(std::move(out), {a}, "neg");
  if (n->requires_grad)
    n->vjp = [](const Var& g) -> std::vector<Var> { return {neg(g)}; };
  return n;
}

Var scale(const Var& a, double s) {
  const float fs = static_cast<float>(s);
  Tensor out = unary_forward(a->value, [fs](float x) { return x * fs; });
  Var n = make_op(std::move(out), {a}, "scale");
  if (n->requires_grad)
    n->vjp = [s](const Var& g) -> std::vector<Var> { return {scale(g, s)}; };
  return n;
}

Var add_scalar(const Var& a, double c) {
  const float fc = static_cast<float>(c);
  Tensor out = unary_forward(a->value, [fc](float x) { return x + fc; });
  Var n = make_op(std::move(out), {a}, "add_scalar");
  if (n->requires_grad)
    n->vjp = [](const Var& g) -> std::vector<Var> { return {g}; };
  return n;
}

Var pow_scalar(const Var& a, double e) {
  if (e == 1.0) return a;
  const float fe = static_cast<float>(e);
  Tensor out = unary_forward(a->value, [fe](float x) { return std::pow(x, fe); });
  Var n = make_op(std::move(out), {a}, "pow_scalar");
  if (n->requires_grad) {
    Var ca = a;
    n->vjp = [ca, e](const Var& g) -> std::vector<Var> {
      if (e == 2.0) return {mul(g, scale(ca, 2.0))};
      return {mul(g, scale(pow_scalar(ca, e - 1.0), e))};
    };
  }
  return n;
}

Var exp(const Var& a) {
  Tensor out = unary_forward(a->value, [](float x) { return std::exp(x); });
  Var n = make_op(std::move(out), {a}, "exp");
  if (n->requires_grad) {
    std::weak_ptr<Node> self = n;
    n->vjp = [self](const Var& g) -> std::vector<Var> {
      return {mul(g, self.lock())};
    };
  }
  return n;
}

Var log(const Var& a) {
  Tensor out = unary_forward(a->value, [](float x) { return std::log(x); });
  Var n = make_op(std::move(out), {a}, "log");
  if (n->requires_grad) {
    Var ca = a;
    n->vjp = [ca](const Var& g) -> std::vector<Var> {
      return {mul(g, pow_scalar(ca, -1.0))};
    };
  }
  return n;
}

Var sqrt(const Var& a) {
  Tensor out = unary_forward(a->value, [](float x) { return std::sqrt(x); });
  Var n = make_op(std::move(out), {a}, "sqrt");
  if (n->requires_grad) {
    std::weak_ptr<Node> self = n;
    n->vjp = [self](const Var& g) -> std::vector<Var> {
      return {mul(g, scale(pow_scalar(self.lock(), -1.0), 0.5))};
    };
  }
  return n;
}

Var tanh(const Var& a) {
  Tensor out = unary_forward(a->value, [](float x) { return std::tanh(x); });
  Var n = make_op(std::move(out), {a}, "tanh");
  if (n->requires_grad) {
    std::weak_ptr<Node> self = n;
    n->vjp = [self](const Var& g) -> std::vector<Var> {
      Var y = self.lock();
      return {mul(g, add_scalar(neg(mul(y, y)), 1.0))};
    };
  }
  return n;
}

namespace {
Var masked_grad(const Var& a, double pos, double neg_slope, const char* name) {
  const float fp = static_cast<float>(pos), fn = static_cast<float>(neg_slope);
  Tensor out = unary_forward(a->value, [fp, fn](float x) { return x > 0 ? fp * x : fn * x; });
  Var n = make_op(std::move(out), {a}, name);
  if (n->requires_grad) {
    // Derivative mask is piecewise constant; kept as a constant so higher
    // derivatives treat it correctly.
    Tensor mask = unary_forward(a->value, [fp, fn](float x) { return x > 0 ? fp : fn; });
    n->vjp = [mask](const Var& g) -> std::vector<Var> {
      return {mul(g, constant(mask))};
    };
  }
  return n;
}
}  // namespace

Var relu(const Var& a) { return masked_grad(a, 1.0, 0.0, "relu"); }

Var leaky_relu(const Var& a, double slope) { return masked_grad(a, 1.0, slope, "leaky_relu"); }

Var min_zero(const Var& a) { return neg(relu(neg(a))); }

// ---------------------------------------------------------------------------

Var reshape(const Var& a, Shape shape) {
  // Support one free dimension marked -1.
  int64_t known = 1, free_idx = -1;
  for (size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (free_idx >= 0) throw ShapeError("reshape: more than one -1");
      free_idx = static_cast<int64_t>(i);
    } else {
      known *= shape[i];
    }
  }
  if (free_idx >= 0) {
    if (known == 0 || a->numel() % known != 0)
      throw ShapeError("reshape: cannot infer free dimension");
    shape[static_cast<size_t>(free_idx)] = a->numel() / known;
  }
  Tensor out = a->value.reshape(shape);
  Var n = make_op(std::move(out), {a}, "reshape");
  if (n->requires_grad) {
    Shape as = a->shape();
    n->vjp = [as](const Var& g) -> std::vector<Var> { return {reshape(g, as)}; };
  }
  return n;
}

Var transpose2(const Var& a) {
  if (a->value.ndim() != 2) throw ShapeError("transpose2 expects 2-D");
  const int64_t r = a->value.dim(0), c = a->value.dim(1);
  Tensor out(Shape{c, r});
  const float* pa = a->value.data();
  float* po = out.data();
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) po[j * r + i] = pa[i * c + j];
  Var n = make_op(std::move(out), {a}, "transpose2");
  if (n->requires_grad)
    n->vjp = [](const Var& g) -> std::vector<Var> { return {transpose2(g)}; };
  return n;
}

Var broadcast_to(const Var& a, Shape shape) {
  if (a->shape() == shape) return a;
  Tensor out = broadcast_to_tensor(a->value, shape);
  Var n = make_op(std::move(out), {a}, "broadcast_to");
  if (n->requires_grad) {
    Shape as = a->shape();
    n->vjp = [as](const Var& g) -> std::vector<Var> { return {sum_to(g, as)}; };
  }
  return n;
}

Var sum_to(const Var& a, Shape shape) {
  if (a->shape() == shape) return a;
  Tensor out = sum_to_tensor(a->value, shape);
  Var n = make_op(std::move(out), {a}, "sum_to");
  if (n->requires_grad) {
    Shape as = a->shape();
    n->vjp = [as](const Var& g) -> std::vector<Var> { return {broadcast_to(g, as)}; };
  }
  return n;
}

Var sum_all(const Var& a) { return sum_to(a, Shape{}); }

Var mean_all(const Var& a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a->numel()));
}

Var concat(const std::vector<Var>& xs, int64_t axis) {
  if (xs.empty()) throw InvalidInputError("concat: empty input list");
  const Shape& s0 = xs[0]->shape();
  if (axis < 0 || axis >= static_cast<int64_t>(s0.size()))
    throw ShapeError("concat: bad axis");
  Shape os = s0;
  int64_t total = 0;
  for (const auto& x : xs) {
    const Shape& s = x->shape();
    if (s.size() != s0.size()) throw ShapeError("concat: rank mismatch");
    for (size_t i = 0; i < s.size(); ++i)
      if (static_cast<int64_t>(i) != axis && s[i] != s0[i])
        throw ShapeError("concat: shape mismatch at axis " + std::to_string(i));
    total += s[static_cast<size_t>(axis)];
  }
  os[static_cast<size_t>(axis)] = total;

  int64_t outer = 1, inner = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= s0[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s0.size(); ++i) inner *= s0[i];

  Tensor out(os);
  float* po = out.data();
  const int64_t out_stride = total * inner;
  int64_t off = 0;
  for (const auto& x : xs) {
    const int64_t ax = x->shape()[static_cast<size_t>(axis)];
    const float* px = x->value.data();
    for (int64_t o = 0; o < outer; ++o)
      std::memcpy(po + o * out_stride + off, px + o * ax * inner,
                  static_cast<size_t>(ax * inner) * sizeof(float));
    off += ax * inner;
  }

  std::vector<Var> parents(xs.begin(), xs.end());
  Var n = make_op(std::move(out), std::move(parents), "concat");
  if (n->requires_grad) {
    std::vector<int64_t> sizes;
    sizes.reserve(xs.size());
    for (const auto& x : xs) sizes.push_back(x->shape()[static_cast<size_t>(axis)]);
    n->vjp = [sizes, axis](const Var& g) -> std::vector<Var> {
      std::vector<Var> grads;
      grads.reserve(sizes.size());
      int64_t start = 0;
      for (int64_t len : sizes) {
        grads.push_back(slice(g, axis, start, len));
        start += len;
      }
      return grads;
    };
  }
  return n;
}

namespace {
// Adjoint of slice: embed g into a zero tensor of the parent's shape.
Var pad_slice(const Var& g, Shape parent_shape, int64_t axis, int64_t start);
}  // namespace

Var slice(const Var& a, int64_t axis, int64_t start, int64_t len) {
  const Shape& s = a->shape();
  if (axis < 0 || axis >= static_cast<int64_t>(s.size())) throw ShapeError("slice: bad axis");
  const int64_t ax = s[static_cast<size_t>(axis)];
  if (start < 0 || len < 0 || start + len > ax) throw ShapeError("slice: bad range");
  Shape os = s;
  os[static_cast<size_t>(axis)] = len;
  int64_t outer = 1, inner = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
  Tensor out(os);
  const float* pa = a->value.data();
  float* po = out.data();
  for (int64_t o = 0; o < outer; ++o)
    std::memcpy(po + o * len * inner, pa + (o * ax + start) * inner,
                static_cast<size_t>(len * inner) * sizeof(float));
  Var n = make_op(std::move(out), {a}, "slice");
  if (n->requires_grad) {
    Shape as = s;
    n->vjp = [as, axis, start](const Var& g) -> std::vector<Var> {
      return {pad_slice(g, as, axis, start)};
    };
  }
  return n;
}

namespace {
Var pad_slice(const Var& g, Shape parent_shape, int64_t axis, int64_t start) {
  const Shape& gs = g->shape();
  const int64_t len = gs[static_cast<size_t>(axis)];
  const int64_t ax = parent_shape[static_cast<size_t>(axis)];
  int64_t outer = 1, inner = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= parent_shape[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < parent_shape.size(); ++i)
    inner *= parent_shape[i];
  Tensor out(parent_shape);  // zero-initialized
  const float* pg = g->value.data();
  float* po = out.data();
  for (int64_t o = 0; o < outer; ++o)
    std::memcpy(po + (o * ax + start) * inner, pg + o * len * inner,
                static_cast<size_t>(len * inner) * sizeof(float));
  Var n = make_op(std::move(out), {g}, "pad_slice");
  if (n->requires_grad) {
    n->vjp = [axis, start, len](const Var& gg) -> std::vector<Var> {
      return {slice(gg, axis, start, len)};
    };
  }
  return n;
}
}  // namespace

Var detach(const Var& a) { return constant(a->value); }

// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  if (a->value.ndim() != 2 || b->value.ndim() != 2)
    throw ShapeError("matmul expects 2-D operands");
  const int64_t m = a->value.dim(0), k = a->value.dim(1);
  const int64_t k2 = b->value.dim(0), nn = b->value.dim(1);
  if (k != k2)
    throw ShapeError("matmul: inner dims " + std::to_string(k) + " vs " + std::to_string(k2));
  compute_threads();  // ensure BLAS thread setup
  Tensor out(Shape{m, nn});
  cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(m),
              static_cast<int>(nn), static_cast<int>(k), 1.0f, a->value.data(),
              static_cast<int>(k), b->value.data(), static_cast<int>(nn), 0.0f,
              out.data(), static_cast<int>(nn));
  Var n = make_op(std::move(out), {a, b}, "matmul");
  if (n->requires_grad) {
    Var ca = a, cb = b;
    n->vjp = [ca, cb](const Var& g) -> std::vector<Var> {
      return {matmul(g, transpose2(cb)), matmul(transpose2(ca), g)};
    };
  }
  return n;
}

// ---------------------------------------------------------------------------
// Convolution family. All three kernels are built on per-image im2col plus
// SGEMM, parallelized over the batch.

namespace {

struct ConvDims {
  int64_t B, Cin, H, W, Cout, kh, kw, Ho, Wo;
  int stride, pad;
};

ConvDims conv_dims(const Shape& xs, const Shape& ws, int stride, int pad) {
  if (xs.size() != 4 || ws.size() != 4) throw ShapeError("conv2d expects 4-D x and w");
  if (xs[1] != ws[1])
    throw ShapeError("conv2d: channel mismatch x" + shape_str(xs) + " w" + shape_str(ws));
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  ConvDims d;
  d.B = xs[0];
  d.Cin = xs[1];
  d.H = xs[2];
  d.W = xs[3];
  d.Cout = ws[0];
  d.kh = ws[2];
  d.kw = ws[3];
  d.stride = stride;
  d.pad = pad;
  d.Ho = (d.H + 2 * pad - d.kh) / stride + 1;
  d.Wo = (d.W + 2 * pad - d.kw) / stride + 1;
  if (d.Ho < 1 || d.Wo < 1) throw ShapeError("conv2d: kernel larger than padded input");
  return d;
}

void im2col(const float* x, const ConvDims& d, float* col) {
  const int64_t HoWo = d.Ho * d.Wo;
  for (int64_t ck = 0; ck < d.Cin * d.kh * d.kw; ++ck) {
    const int64_t c = ck / (d.kh * d.kw);
    const int64_t rem = ck % (d.kh * d.kw);
    const int64_t ki = rem / d.kw, kj = rem % d.kw;
    const float* xc = x + c * d.H * d.W;
    float* row = col + ck * HoWo;
    for (int64_t oh = 0; oh < d.Ho; ++oh) {
      const int64_t ih = oh * d.stride - d.pad + ki;
      float* dst = row + oh * d.Wo;
      if (ih < 0 || ih >= d.H) {
        std::memset(dst, 0, static_cast<size_t>(d.Wo) * sizeof(float));
        continue;
      }
      const float* src = xc + ih * d.W;
      for (int64_t ow = 0; ow < d.Wo; ++ow) {
        const int64_t iw = ow * d.stride - d.pad + kj;
        dst[ow] = (iw >= 0 && iw < d.W) ? src[iw] : 0.0f;
      }
    }
  }
}

void col2im(const float* col, const ConvDims& d, float* x) {
  const int64_t HoWo = d.Ho * d.Wo;
  for (int64_t ck = 0; ck < d.Cin * d.kh * d.kw; ++ck) {
    const int64_t c = ck / (d.kh * d.kw);
    const int64_t rem = ck % (d.kh * d.kw);
    const int64_t ki = rem / d.kw, kj = rem % d.kw;
    float* xc = x + c * d.H * d.W;
    const float* row = col + ck * HoWo;
    for (int64_t oh = 0; oh < d.Ho; ++oh) {
      const int64_t ih = oh * d.stride - d.pad + ki;
      if (ih < 0 || ih >= d.H) continue;
      float* dst = xc + ih * d.W;
      const float* src = row + oh * d.Wo;
      for (int64_t ow = 0; ow < d.Wo; ++ow) {
        const int64_t iw = ow * d.stride - d.pad + kj;
        if (iw >= 0 && iw < d.W) dst[iw] += src[ow];
      }
    }
  }
}

Tensor conv_forward_tensor(const Tensor& x, const Tensor& w, int stride, int pad) {
  ConvDims d = conv_dims(x.shape(), w.shape(), stride, pad);
  compute_threads();
  Tensor out(Shape{d.B, d.Cout, d.Ho, d.Wo});
  const int64_t K = d.Cin * d.kh * d.kw;
  const int64_t N = d.Ho * d.Wo;
  parallel_for(d.B, [&](int64_t lo, int64_t hi) {
    std::vector<float> col(static_cast<size_t>(K * N));
    for (int64_t b = lo; b < hi; ++b) {
      im2col(x.data() + b * d.Cin * d.H * d.W, d, col.data());
      cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(d.Cout),
                  static_cast<int>(N), static_cast<int>(K), 1.0f, w.data(),
                  static_cast<int>(K), col.data(), static_cast<int>(N), 0.0f,
                  out.data() + b * d.Cout * N, static_cast<int>(N));
    }
  });
  return out;
}

Tensor conv_input_grad_tensor(const Tensor& gy, const Tensor& w, const Shape& x_shape,
                              int stride, int pad) {
  ConvDims d = conv_dims(x_shape, w.shape(), stride, pad);
  if (gy.shape() != Shape{d.B, d.Cout, d.Ho, d.Wo})
    throw ShapeError("conv2d_input_grad: gy shape " + shape_str(gy.shape()) +
                     " incompatible with x " + shape_str(x_shape));
  compute_threads();
  Tensor gx(x_shape);  // zeros
  const int64_t K = d.Cin * d.kh * d.kw;
  const int64_t N = d.Ho * d.Wo;
  parallel_for(d.B, [&](int64_t lo, int64_t hi) {
    std::vector<float> col(static_cast<size_t>(K * N));
    for (int64_t b = lo; b < hi; ++b) {
      // col = w^T [K,Cout] * gy_b [Cout,N]
      cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, static_cast<int>(K),
                  static_cast<int>(N), static_cast<int>(d.Cout), 1.0f, w.data(),
                  static_cast<int>(K), gy.data() + b * d.Cout * N, static_cast<int>(N),
                  0.0f, col.data(), static_cast<int>(N));
      col2im(col.data(), d, gx.data() + b * d.Cin * d.H * d.W);
    }
  });
  return gx;
}

Tensor conv_weight_grad_tensor(const Tensor& x, const Tensor& gy, const Shape& w_shape,
                               int stride, int pad) {
  ConvDims d = conv_dims(x.shape(), w_shape, stride, pad);
  if (gy.shape() != Shape{d.B, d.Cout, d.Ho, d.Wo})
    throw ShapeError("conv2d_weight_grad: bad gy shape " + shape_str(gy.shape()));
  compute_threads();
  const int64_t K = d.Cin * d.kh * d.kw;
  const int64_t N = d.Ho * d.Wo;
  const int nthreads = std::max(1, std::min<int>(compute_threads(), static_cast<int>(d.B)));
  std::vector<Tensor> partial;
  partial.reserve(static_cast<size_t>(nthreads));
  for (int t = 0; t < nthreads; ++t) partial.emplace_back(Shape{d.Cout, K});
  const int64_t chunk = (d.B + nthreads - 1) / nthreads;
  parallel_for(d.B, [&](int64_t lo, int64_t hi) {
    const int slot = static_cast<int>(lo / chunk);
    float* acc = partial[static_cast<size_t>(slot)].data();
    std::vector<float> col(static_cast<size_t>(K * N));
    for (int64_t b = lo; b < hi; ++b) {
      im2col(x.data() + b * d.Cin * d.H * d.W, d, col.data());
      // acc += gy_b [Cout,N] * col^T [N,K]
      cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(d.Cout),
                  static_cast<int>(K), static_cast<int>(N), 1.0f,
                  gy.data() + b * d.Cout * N, static_cast<int>(N), col.data(),
                  static_cast<int>(N), 1.0f, acc, static_cast<int>(K));
    }
  });
  // Merge partials in fixed order for determinism.
  Tensor gw(w_shape);
  float* pw = gw.data();
  for (int t = 0; t < nthreads; ++t) {
    const float* ps = partial[static_cast<size_t>(t)].data();
    for (int64_t i = 0; i < gw.numel(); ++i) pw[i] += ps[i];
  }
  return gw;
}

}  // namespace

Var conv2d(const Var& x, const Var& w, int stride, int pad) {
  Tensor out = conv_forward_tensor(x->value, w->value, stride, pad);
  Var n = make_op(std::move(out), {x, w}, "conv2d");
  if (n->requires_grad) {
    Var cx = x, cw = w;
    Shape xs = x->shape(), ws = w->shape();
    n->vjp = [cx, cw, xs, ws, stride, pad](const Var& g) -> std::vector<Var> {
      return {conv2d_input_grad(g, cw, xs, stride, pad),
              conv2d_weight_grad(cx, g, ws, stride, pad)};
    };
  }
  return n;
}

Var conv2d_input_grad(const Var& gy, const Var& w, Shape x_shape, int stride, int pad) {
  Tensor out = conv_input_grad_tensor(gy->value, w->value, x_shape, stride, pad);
  Var n = make_op(std::move(out), {gy, w}, "conv2d_input_grad");
  if (n->requires_grad) {
    Var cgy = gy, cw = w;
    Shape ws = w->shape();
    n->vjp = [cgy, cw, ws, stride, pad](const Var& u) -> std::vector<Var> {
      return {conv2d(u, cw, stride, pad),
              conv2d_weight_grad(u, cgy, ws, stride, pad)};
    };
  }
  return n;
}

Var conv2d_weight_grad(const Var& x, const Var& gy, Shape w_shape, int stride, int pad) {
  Tensor out = conv_weight_grad_tensor(x->value, gy->value, w_shape, stride, pad);
  Var n = make_op(std::move(out), {x, gy}, "conv2d_weight_grad");
  if (n->requires_grad) {
    Var cx = x, cgy = gy;
    Shape xs = x->shape();
    n->vjp = [cx, cgy, xs, stride, pad](const Var& v) -> std::vector<Var> {
      return {conv2d_input_grad(cgy, v, xs, stride, pad), conv2d(cx, v, stride, pad)};
    };
  }
  return n;
}

// ---------------------------------------------------------------------------

Var upsample_nearest2(const Var& x) {
  const Shape& s = x->shape();
  if (s.size() != 4) throw ShapeError("upsample_nearest2 expects 4-D");
  const int64_t B = s[0], C = s[1], H = s[2], W = s[3];
  Tensor out(Shape{B, C, H * 2, W * 2});
  const float* px = x->value.data();
  float* po = out.data();
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const float* src = px + bc * H * W;
    float* dst = po + bc * 4 * H * W;
    for (int64_t h = 0; h < H; ++h) {
      float* r0 = dst + (2 * h) * 2 * W;
      float* r1 = r0 + 2 * W;
      const float* sr = src + h * W;
      for (int64_t w = 0; w < W; ++w) {
        const float v = sr[w];
        r0[2 * w] = v;
        r0[2 * w + 1] = v;
        r1[2 * w] = v;
        r1[2 * w + 1] = v;
      }
    }
  }
  Var n = make_op(std::move(out), {x}, "upsample_nearest2");
  if (n->requires_grad)
    n->vjp = [](const Var& g) -> std::vector<Var> { return {pool_sum2(g)}; };
  return n;
}

Var pool_sum2(const Var& x) {
  const Shape& s = x->shape();
  if (s.size() != 4) throw ShapeError("pool_sum2 expects 4-D");
  if (s[2] % 2 || s[3] % 2) throw ShapeError("pool_sum2 expects even H and W");
  const int64_t B = s[0], C = s[1], H = s[2] / 2, W = s[3] / 2;
  Tensor out(Shape{B, C, H, W});
  const float* px = x->value.data();
  float* po = out.data();
  for (int64_t bc = 0; bc < B * C; ++bc) {
    const float* src = px + bc * 4 * H * W;
    float* dst = po + bc * H * W;
    for (int64_t h = 0; h < H; ++h) {
      const float* r0 = src + (2 * h) * 2 * W;
      const float* r1 = r0 + 2 * W;
      float* dr = dst + h * W;
      for (int64_t w = 0; w < W; ++w)
        dr[w] = r0[2 * w] + r0[2 * w + 1] + r1[2 * w] + r1[2 * w + 1];
    }
  }
  Var n = make_op(std::move(out), {x}, "pool_sum2");
  if (n->requires_grad)
    n->vjp = [](const Var& g) -> std::vector<Var> { return {upsample_nearest2(g)}; };
  return n;
}

Var avg_pool2(const Var& x) { return scale(pool_sum2(x), 0.25); }

}  // namespace ops
}  // namespace fusegan
