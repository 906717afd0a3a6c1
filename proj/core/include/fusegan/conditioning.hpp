#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fusegan/rng.hpp"
#include "fusegan/serialize.hpp"
#include "fusegan/tensor.hpp"

namespace fusegan {

struct EncoderConfig {
  int64_t d_e = 128;
  uint64_t seed = 17;
  double positional_alpha = 0.1;
};

/// Frozen embedding-bag sentence encoder: mean of seeded word vectors with a
/// linear positional weight, which makes it order-sensitive. Deterministic
/// for a fixed (vocab, seed). Stands in for a pretrained text encoder; any
/// drop-in producing fixed-length vectors fits the same call sites.
class TextEncoder {
 public:
  TextEncoder(std::vector<std::string> vocab, EncoderConfig cfg);

  /// Unknown tokens map to the reserved <unk> row.
  std::vector<float> encode(const std::vector<std::string>& tokens) const;
  Tensor encode_batch(const std::vector<std::vector<std::string>>& captions) const;

  int64_t dim() const { return cfg_.d_e; }
  const std::vector<std::string>& vocab() const { return vocab_; }

  static std::vector<std::string> load_vocab(const std::string& path);
  static void save_vocab(const std::vector<std::string>& vocab, const std::string& path);

  void save(BinaryWriter& w) const;
  static TextEncoder load(BinaryReader& r);

 private:
  EncoderConfig cfg_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int64_t> index_;  // token -> row (1-based; 0 = <unk>)
  Tensor table_;                                    // [V+1, d_e]
};

/// Batch of i.i.d. standard normal latent vectors, reproducible per seed.
Tensor sample_noise(int64_t batch, int64_t d_z, Rng& rng);

/// Resamples entries with |v| > threshold from N(0,1) until within range;
/// entries already inside are untouched.
Tensor truncate_noise(const Tensor& z, double threshold, Rng& rng);

/// [e ; z] concatenation along the feature axis.
Tensor skip_z_concat(const Tensor& e, const Tensor& z);

}  // namespace fusegan
