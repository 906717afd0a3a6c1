#include "fusegan/conditioning.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "fusegan/errors.hpp"

namespace fusegan {

TextEncoder::TextEncoder(std::vector<std::string> vocab, EncoderConfig cfg)
    : cfg_(cfg), vocab_(std::move(vocab)) {
  if (cfg_.d_e < 0) throw InvalidInputError("encoder dimension must be >= 0");
  for (size_t i = 0; i < vocab_.size(); ++i) {
    if (vocab_[i].empty()) throw InvalidInputError("empty token in vocabulary");
    if (!index_.emplace(vocab_[i], static_cast<int64_t>(i) + 1).second)
      throw InvalidInputError("duplicate token in vocabulary: " + vocab_[i]);
  }
  table_ = Tensor(Shape{static_cast<int64_t>(vocab_.size()) + 1, cfg_.d_e});
  Rng rng(cfg_.seed);
  const float std = cfg_.d_e > 0
                        ? 1.0f / std::sqrt(static_cast<float>(cfg_.d_e))
                        : 1.0f;
  rng.fill_normal(table_, 0.0f, std);
}

std::vector<float> TextEncoder::encode(const std::vector<std::string>& tokens) const {
  if (tokens.empty())
    throw InvalidInputError("encode_sentence: empty token sequence");
  std::vector<double> acc(static_cast<size_t>(cfg_.d_e), 0.0);
  for (size_t i = 0; i < tokens.size(); ++i) {
    auto it = index_.find(tokens[i]);
    const int64_t row = it == index_.end() ? 0 : it->second;
    const float* v = table_.data() + row * cfg_.d_e;
    const double w = 1.0 + cfg_.positional_alpha * static_cast<double>(i);
    for (int64_t d = 0; d < cfg_.d_e; ++d) acc[static_cast<size_t>(d)] += w * v[d];
  }
  std::vector<float> out(static_cast<size_t>(cfg_.d_e));
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (int64_t d = 0; d < cfg_.d_e; ++d)
    out[static_cast<size_t>(d)] = static_cast<float>(acc[static_cast<size_t>(d)] * inv);
  return out;
}

Tensor TextEncoder::encode_batch(const std::vector<std::vector<std::string>>& captions) const {
  if (captions.empty()) throw InvalidInputError("encode_batch: empty caption batch");
  Tensor out(Shape{static_cast<int64_t>(captions.size()), cfg_.d_e});
  for (size_t b = 0; b < captions.size(); ++b) {
    auto e = encode(captions[b]);
    std::memcpy(out.data() + static_cast<int64_t>(b) * cfg_.d_e, e.data(),
                e.size() * sizeof(float));
  }
  return out;
}

std::vector<std::string> TextEncoder::load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file: " + path);
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) vocab.push_back(line);
  }
  return vocab;
}

void TextEncoder::save_vocab(const std::vector<std::string>& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary file: " + path);
  for (const auto& t : vocab) out << t << "\n";
}

void TextEncoder::save(BinaryWriter& w) const {
  w.i64(cfg_.d_e);
  w.u64(cfg_.seed);
  w.f64(cfg_.positional_alpha);
  w.u64(vocab_.size());
  for (const auto& t : vocab_) w.str(t);
  w.tensor(table_);
}

TextEncoder TextEncoder::load(BinaryReader& r) {
  EncoderConfig cfg;
  cfg.d_e = r.i64();
  cfg.seed = r.u64();
  cfg.positional_alpha = r.f64();
  const uint64_t n = r.u64();
  std::vector<std::string> vocab(n);
  for (auto& t : vocab) t = r.str();
  TextEncoder enc(std::move(vocab), cfg);
  Tensor table = r.tensor();
  if (table.shape() != enc.table_.shape())
    throw IoError("encoder table shape mismatch in checkpoint");
  enc.table_ = table;
  return enc;
}

Tensor sample_noise(int64_t batch, int64_t d_z, Rng& rng) {
  if (batch < 1) throw InvalidInputError("sample_noise: batch must be >= 1");
  if (d_z < 1) throw InvalidInputError("sample_noise: dimension must be >= 1");
  Tensor z(Shape{batch, d_z});
  rng.fill_normal(z);
  return z;
}

Tensor truncate_noise(const Tensor& z, double threshold, Rng& rng) {
  if (!(threshold > 0.0))
    throw InvalidInputError("truncate_noise: threshold must be positive");
  Tensor out = z.clone();
  float* p = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) {
    while (std::abs(p[i]) > threshold)
      p[i] = static_cast<float>(rng.normal());
  }
  return out;
}

Tensor skip_z_concat(const Tensor& e, const Tensor& z) {
  if (e.ndim() != 2 || z.ndim() != 2)
    throw ShapeError("skip_z_concat expects [B,D_e] and [B,D_z]");
  if (e.dim(0) != z.dim(0))
    throw InvalidInputError("skip_z_concat: batch mismatch " + std::to_string(e.dim(0)) +
                            " vs " + std::to_string(z.dim(0)));
  if (!e.all_finite() || !z.all_finite())
    throw InvalidInputError("skip_z_concat: non-finite input");
  const int64_t b = e.dim(0), de = e.dim(1), dz = z.dim(1);
  Tensor out(Shape{b, de + dz});
  for (int64_t i = 0; i < b; ++i) {
    std::memcpy(out.data() + i * (de + dz), e.data() + i * de,
                static_cast<size_t>(de) * sizeof(float));
    std::memcpy(out.data() + i * (de + dz) + de, z.data() + i * dz,
                static_cast<size_t>(dz) * sizeof(float));
  }
  return out;
}

}  // namespace fusegan
