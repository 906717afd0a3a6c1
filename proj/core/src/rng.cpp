#include "fusegan/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "fusegan/errors.hpp"

namespace fusegan {

int64_t Rng::uniform_int(int64_t n) {
  if (n <= 0) throw InvalidInputError("uniform_int: n must be positive");
  // Rejection sampling over the top bits; unbiased and platform-stable.
  const uint64_t un = static_cast<uint64_t>(n);
  const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t v;
  do {
    v = gen_();
  } while (v >= limit);
  return static_cast<int64_t>(v % un);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

void Rng::fill_normal(Tensor& t, float mean, float stddev) {
  float* p = t.data();
  for (int64_t i = 0; i < t.numel(); ++i)
    p[i] = mean + stddev * static_cast<float>(normal());
}

void Rng::fill_uniform(Tensor& t, float lo, float hi) {
  float* p = t.data();
  for (int64_t i = 0; i < t.numel(); ++i)
    p[i] = lo + (hi - lo) * static_cast<float>(uniform());
}

std::vector<int64_t> Rng::permutation(int64_t n) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  for (int64_t i = n - 1; i > 0; --i) {
    int64_t j = uniform_int(i + 1);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
  return idx;
}

std::string Rng::state() const {
  std::ostringstream os;
  os << gen_ << " " << (has_spare_ ? 1 : 0) << " ";
  os.precision(17);
  os << spare_;
  return os.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream is(s);
  int has = 0;
  is >> gen_ >> has >> spare_;
  if (is.fail()) throw InvalidInputError("Rng::set_state: malformed state string");
  has_spare_ = has != 0;
}

}  // namespace fusegan
