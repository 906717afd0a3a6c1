#include "fusegan/serialize.hpp"

#include <cstring>

#include "fusegan/errors.hpp"

namespace fusegan {

BinaryWriter::BinaryWriter(const std::string& path)
    : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw IoError("cannot open for write: " + path);
}

void BinaryWriter::raw(const void* p, size_t n) {
  out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!out_) throw IoError("write failed: " + path_);
}

void BinaryWriter::u32(uint32_t v) { raw(&v, sizeof v); }
void BinaryWriter::u64(uint64_t v) { raw(&v, sizeof v); }
void BinaryWriter::i64(int64_t v) { raw(&v, sizeof v); }
void BinaryWriter::f32(float v) { raw(&v, sizeof v); }
void BinaryWriter::f64(double v) { raw(&v, sizeof v); }

void BinaryWriter::str(const std::string& s) {
  u64(s.size());
  if (!s.empty()) raw(s.data(), s.size());
}

void BinaryWriter::tensor(const Tensor& t) {
  u32(static_cast<uint32_t>(t.ndim()));
  for (int64_t d : t.shape()) i64(d);
  if (t.numel() > 0) raw(t.data(), static_cast<size_t>(t.numel()) * sizeof(float));
}

void BinaryWriter::close() {
  out_.close();
  if (!out_) throw IoError("close failed: " + path_);
}

BinaryReader::BinaryReader(const std::string& path)
    : in_(path, std::ios::binary), path_(path) {
  if (!in_) throw IoError("cannot open for read: " + path);
}

void BinaryReader::raw(void* p, size_t n) {
  in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in_) throw IoError("read failed (truncated?): " + path_);
}

uint32_t BinaryReader::u32() {
  uint32_t v;
  raw(&v, sizeof v);
  return v;
}
uint64_t BinaryReader::u64() {
  uint64_t v;
  raw(&v, sizeof v);
  return v;
}
int64_t BinaryReader::i64() {
  int64_t v;
  raw(&v, sizeof v);
  return v;
}
float BinaryReader::f32() {
  float v;
  raw(&v, sizeof v);
  return v;
}
double BinaryReader::f64() {
  double v;
  raw(&v, sizeof v);
  return v;
}

std::string BinaryReader::str() {
  uint64_t n = u64();
  std::string s(n, '\0');
  if (n) raw(s.data(), n);
  return s;
}

Tensor BinaryReader::tensor() {
  uint32_t nd = u32();
  if (nd > 8) throw IoError("tensor rank " + std::to_string(nd) + " in " + path_);
  Shape shape(nd);
  for (auto& d : shape) d = i64();
  Tensor t(shape);
  if (t.numel() > 0) raw(t.data(), static_cast<size_t>(t.numel()) * sizeof(float));
  return t;
}

uint64_t tensor_hash(const Tensor& t, uint64_t seed) {
  const unsigned char* p = reinterpret_cast<const unsigned char*>(t.data());
  const size_t n = static_cast<size_t>(t.numel()) * sizeof(float);
  uint64_t h = seed;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace fusegan
