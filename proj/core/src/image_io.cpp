#include "fusegan/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "fusegan/errors.hpp"

namespace fusegan {

namespace {
unsigned char to_byte(float v) {
  const float t = (std::clamp(v, -1.0f, 1.0f) + 1.0f) * 0.5f * 255.0f;
  return static_cast<unsigned char>(std::lround(t));
}
float to_float(unsigned char b) {
  return static_cast<float>(b) / 255.0f * 2.0f - 1.0f;
}
}  // namespace

void write_ppm(const std::string& path, const Tensor& image) {
  if (image.ndim() != 3 || image.dim(0) != 3)
    throw ShapeError("write_ppm expects [3,H,W], got " + shape_str(image.shape()));
  const int64_t h = image.dim(1), w = image.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
  const float* p = image.data();
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c)
        row[static_cast<size_t>(x * 3 + c)] = to_byte(p[(c * h + y) * w + x]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("short write: " + path);
}

Tensor read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6") throw IoError("not a P6 PPM: " + path);
  auto next_int = [&]() {
    // skip whitespace and '#' comments
    while (true) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    int64_t v;
    in >> v;
    return v;
  };
  const int64_t w = next_int(), h = next_int(), maxval = next_int();
  if (maxval != 255) throw IoError("unsupported maxval in " + path);
  in.get();  // single whitespace after header
  std::vector<unsigned char> raw(static_cast<size_t>(w * h * 3));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw IoError("truncated image: " + path);
  Tensor img(Shape{3, h, w});
  float* p = img.data();
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c)
        p[(c * h + y) * w + x] = to_float(raw[static_cast<size_t>((y * w + x) * 3 + c)]);
  return img;
}

Tensor tile_grid(const Tensor& images, int64_t cols) {
  if (images.ndim() != 4 || images.dim(1) != 3)
    throw ShapeError("tile_grid expects [N,3,H,W]");
  if (cols < 1) throw InvalidInputError("tile_grid: cols must be >= 1");
  const int64_t n = images.dim(0), h = images.dim(2), w = images.dim(3);
  const int64_t rows = (n + cols - 1) / cols;
  const int64_t pad = 2;
  const int64_t gh = rows * (h + pad) + pad, gw = cols * (w + pad) + pad;
  Tensor grid(Shape{3, gh, gw}, 0.0f);  // mid-gray separators
  for (int64_t i = 0; i < n; ++i) {
    const int64_t r = i / cols, c = i % cols;
    const int64_t oy = pad + r * (h + pad), ox = pad + c * (w + pad);
    for (int64_t ch = 0; ch < 3; ++ch)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
          grid.data()[(ch * gh + oy + y) * gw + ox + x] =
              images.data()[((i * 3 + ch) * h + y) * w + x];
  }
  return grid;
}

Tensor resize_bilinear(const Tensor& image, int64_t out_h, int64_t out_w) {
  if (image.ndim() != 3) throw ShapeError("resize_bilinear expects [C,H,W]");
  const int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h == out_h && w == out_w) return image;
  Tensor out(Shape{c, out_h, out_w});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int64_t ch = 0; ch < c; ++ch) {
    const float* src = image.data() + ch * h * w;
    float* dst = out.data() + ch * out_h * out_w;
    for (int64_t y = 0; y < out_h; ++y) {
      const double fy = (y + 0.5) * sy - 0.5;
      const int64_t y0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(fy)), 0, h - 1);
      const int64_t y1 = std::min<int64_t>(y0 + 1, h - 1);
      const double wy = std::clamp(fy - y0, 0.0, 1.0);
      for (int64_t x = 0; x < out_w; ++x) {
        const double fx = (x + 0.5) * sx - 0.5;
        const int64_t x0 = std::clamp<int64_t>(static_cast<int64_t>(std::floor(fx)), 0, w - 1);
        const int64_t x1 = std::min<int64_t>(x0 + 1, w - 1);
        const double wx = std::clamp(fx - x0, 0.0, 1.0);
        const double v = (1 - wy) * ((1 - wx) * src[y0 * w + x0] + wx * src[y0 * w + x1]) +
                         wy * ((1 - wx) * src[y1 * w + x0] + wx * src[y1 * w + x1]);
        dst[y * out_w + x] = static_cast<float>(v);
      }
    }
  }
  return out;
}

Tensor center_crop(const Tensor& image, int64_t size) {
  const int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h < size || w < size) throw ShapeError("center_crop: image smaller than crop");
  if (h == size && w == size) return image;
  const int64_t oy = (h - size) / 2, ox = (w - size) / 2;
  Tensor out(Shape{c, size, size});
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < size; ++y)
      for (int64_t x = 0; x < size; ++x)
        out.data()[(ch * size + y) * size + x] =
            image.data()[(ch * h + oy + y) * w + ox + x];
  return out;
}

Tensor resize_and_crop(const Tensor& image, int64_t size) {
  const int64_t h = image.dim(1), w = image.dim(2);
  if (h == size && w == size) return image;
  int64_t nh, nw;
  if (h <= w) {
    nh = size;
    nw = std::max<int64_t>(size, (w * size + h / 2) / h);
  } else {
    nw = size;
    nh = std::max<int64_t>(size, (h * size + w / 2) / w);
  }
  return center_crop(resize_bilinear(image, nh, nw), size);
}

}  // namespace fusegan
