#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "fusegan/tensor.hpp"

namespace fusegan {

/// Little-endian binary stream writer for checkpoints and fixtures.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void i64(int64_t v);
  void f32(float v);
  void f64(double v);
  void str(const std::string& s);
  void tensor(const Tensor& t);
  void close();

 private:
  void raw(const void* p, size_t n);
  std::ofstream out_;
  std::string path_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path);
  uint32_t u32();
  uint64_t u64();
  int64_t i64();
  float f32();
  double f64();
  std::string str();
  Tensor tensor();

 private:
  void raw(void* p, size_t n);
  std::ifstream in_;
  std::string path_;
};

/// FNV-1a over a tensor's raw bytes; used by step-isolation checks.
uint64_t tensor_hash(const Tensor& t, uint64_t seed = 1469598103934665603ull);

}  // namespace fusegan
