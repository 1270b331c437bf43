#include "laviter/data/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace laviter {

Image make_image(int width, int height, unsigned char r, unsigned char g, unsigned char b) {
  Image img;
  img.width = width;
  img.height = height;
  img.rgb.resize(static_cast<size_t>(width) * height * 3);
  for (size_t i = 0; i < img.rgb.size(); i += 3) {
    img.rgb[i] = r;
    img.rgb[i + 1] = g;
    img.rgb[i + 2] = b;
  }
  return img;
}

void atomic_write(const std::string& path, const std::string& bytes) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot move " + tmp + " into place");
}

void write_ppm(const std::string& path, const Image& img) {
  std::ostringstream out;
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
  atomic_write(path, out.str());
}

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read image " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6") throw DataError(path + " is not a P6 raster");
  int w = 0, h = 0, maxval = 0;
  in >> w >> h >> maxval;
  if (!in || w <= 0 || h <= 0 || maxval != 255)
    throw DataError(path + " has an unsupported raster header");
  in.get();  // single whitespace after the header
  Image img;
  img.width = w;
  img.height = h;
  img.rgb.resize(static_cast<size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(img.rgb.data()),
          static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size()))
    throw DataError(path + " is truncated");
  return img;
}

Tensor image_to_tensor(const Image& img) {
  int h = img.height, w = img.width;
  std::vector<double> data(static_cast<size_t>(3) * h * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        data[(static_cast<size_t>(c) * h + y) * w + x] = img.at(x, y, c) / 127.5 - 1.0;
  return Tensor::from_data({3, h, w}, std::move(data));
}

Image tensor_to_image(const Tensor& t) {
  if (t.ndim() != 3 || t.dim(0) != 3)
    throw ShapeError("tensor_to_image expects (3,H,W), got " + shape_to_string(t.shape()));
  int h = t.dim(1), w = t.dim(2);
  Image img = make_image(w, h, 0, 0, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = t.at(c, y, x);
        v = std::min(1.0, std::max(-1.0, v));
        img.at(x, y, c) = static_cast<unsigned char>(std::lround((v + 1.0) * 127.5));
      }
  return img;
}

}  // namespace laviter
