#pragma once

#include <string>
#include <vector>

#include "laviter/core/tensor.hpp"

namespace laviter {

struct Image {
  int width = 0, height = 0;
  std::vector<unsigned char> rgb;  // interleaved, row-major

  unsigned char& at(int x, int y, int c) { return rgb[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  unsigned char at(int x, int y, int c) const {
    return rgb[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
};

Image make_image(int width, int height, unsigned char r, unsigned char g, unsigned char b);

// Binary PPM (P6), written atomically via a temp file.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

// (3,H,W) tensor with values in [-1, 1].
Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t);

// Replaces the file at `path` with `bytes` via write-temp-then-rename.
void atomic_write(const std::string& path, const std::string& bytes);

}  // namespace laviter
