#include "onnpic/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace onnpic {

namespace {

int read_pnm_token(std::span<const uint8_t> b, size_t* pos) {
  // skips whitespace and '#' comments, then parses a nonnegative int
  while (*pos < b.size()) {
    uint8_t c = b[*pos];
    if (c == '#') {
      while (*pos < b.size() && b[*pos] != '\n') ++*pos;
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++*pos;
    } else {
      break;
    }
  }
  if (*pos >= b.size() || b[*pos] < '0' || b[*pos] > '9') {
    throw DecodeError("malformed PNM header");
  }
  int v = 0;
  while (*pos < b.size() && b[*pos] >= '0' && b[*pos] <= '9') {
    v = v * 10 + (b[*pos] - '0');
    ++*pos;
  }
  return v;
}

}  // namespace

Tensor decode_ppm(std::span<const uint8_t> b) {
  if (b.size() < 2 || b[0] != 'P' || (b[1] != '6' && b[1] != '5')) {
    throw DecodeError("not a binary PPM (P6) or PGM (P5) file");
  }
  bool gray = b[1] == '5';
  size_t pos = 2;
  int w = read_pnm_token(b, &pos);
  int h = read_pnm_token(b, &pos);
  int maxval = read_pnm_token(b, &pos);
  if (maxval != 255) throw DecodeError("only maxval 255 PNM supported");
  if (pos >= b.size()) throw DecodeError("truncated PNM header");
  ++pos;  // single whitespace after maxval
  size_t need = size_t(w) * h * (gray ? 1 : 3);
  if (b.size() - pos < need) throw DecodeError("truncated PNM pixel data");
  Tensor img = Tensor::zeros({1, 3, h, w});
  double* p = img.mutable_data().data();
  const double inv = 1.0 / 255.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        uint8_t v = gray ? b[pos + size_t(y) * w + x]
                         : b[pos + (size_t(y) * w + x) * 3 + c];
        p[img.shape().index(0, c, y, x)] = v * inv;
      }
    }
  }
  return img;
}

std::vector<uint8_t> encode_ppm(const Tensor& img) {
  const Shape& s = img.shape();
  if (s.n != 1 || s.c != 3) {
    throw ArgumentError("encode_ppm expects a (1,3,H,W) image");
  }
  char header[64];
  int hn = std::snprintf(header, sizeof header, "P6\n%d %d\n255\n", s.w, s.h);
  std::vector<uint8_t> out(header, header + hn);
  out.reserve(out.size() + size_t(s.w) * s.h * 3);
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = img.at(0, c, y, x);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        out.push_back(static_cast<uint8_t>(std::lround(v * 255.0)));
      }
    }
  }
  return out;
}

Tensor read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ArgumentError("cannot open image " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return decode_ppm(bytes);
}

void write_ppm(const std::string& path, const Tensor& img) {
  auto bytes = encode_ppm(img);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ArgumentError("cannot write image " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

namespace {

void add_gradient(Tensor* img, Rng& rng) {
  const Shape& s = img->shape();
  double* p = img->mutable_data().data();
  double gx[3], gy[3], base[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.15, 0.85);
    gx[c] = rng.uniform(-0.6, 0.6) / s.w;
    gy[c] = rng.uniform(-0.6, 0.6) / s.h;
  }
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        p[s.index(0, c, y, x)] += base[c] + gx[c] * x + gy[c] * y;
      }
    }
  }
}

void add_stripes(Tensor* img, Rng& rng) {
  const Shape& s = img->shape();
  double* p = img->mutable_data().data();
  double period = rng.uniform(6.0, 40.0);
  double angle = rng.uniform(0.0, 3.14159265);
  double ca = std::cos(angle), sa = std::sin(angle);
  double amp = rng.uniform(0.1, 0.35);
  bool square = rng.coin();  // checker-like hard edges vs sinusoid
  double phase = rng.uniform(0.0, 6.2831853);
  for (int c = 0; c < 3; ++c) {
    double camp = amp * rng.uniform(0.5, 1.0);
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        double u = (ca * x + sa * y) * 6.2831853 / period + phase;
        double v = std::sin(u);
        if (square) v = v >= 0 ? 1.0 : -1.0;
        p[s.index(0, c, y, x)] += camp * v;
      }
    }
  }
}

void add_texture(Tensor* img, Rng& rng) {
  const Shape& s = img->shape();
  // low-pass filtered white noise: separable box blur applied a few times
  std::vector<double> noise(size_t(s.h) * s.w);
  for (double& v : noise) v = rng.uniform(-1.0, 1.0);
  int radius = static_cast<int>(rng.uniform_int(1, 6));
  std::vector<double> tmp(noise.size());
  for (int pass = 0; pass < 3; ++pass) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        double acc = 0.0;
        int cnt = 0;
        for (int k = -radius; k <= radius; ++k) {
          int xx = x + k;
          if (xx >= 0 && xx < s.w) {
            acc += noise[size_t(y) * s.w + xx];
            ++cnt;
          }
        }
        tmp[size_t(y) * s.w + x] = acc / cnt;
      }
    }
    for (int x = 0; x < s.w; ++x) {
      for (int y = 0; y < s.h; ++y) {
        double acc = 0.0;
        int cnt = 0;
        for (int k = -radius; k <= radius; ++k) {
          int yy = y + k;
          if (yy >= 0 && yy < s.h) {
            acc += tmp[size_t(yy) * s.w + x];
            ++cnt;
          }
        }
        noise[size_t(y) * s.w + x] = acc / cnt;
      }
    }
  }
  double peak = 1e-9;
  for (double v : noise) peak = std::max(peak, std::fabs(v));
  double amp = rng.uniform(0.15, 0.4) / peak;
  double* p = img->mutable_data().data();
  for (int c = 0; c < 3; ++c) {
    double camp = amp * rng.uniform(0.6, 1.0);
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        p[s.index(0, c, y, x)] += camp * noise[size_t(y) * s.w + x];
      }
    }
  }
}

void add_disc(Tensor* img, Rng& rng) {
  const Shape& s = img->shape();
  double* p = img->mutable_data().data();
  double cx = rng.uniform(0.2, 0.8) * s.w;
  double cy = rng.uniform(0.2, 0.8) * s.h;
  double r = rng.uniform(0.1, 0.3) * std::min(s.w, s.h);
  double delta[3];
  for (int c = 0; c < 3; ++c) delta[c] = rng.uniform(-0.35, 0.35);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        double d = std::hypot(x - cx, y - cy);
        if (d < r) p[s.index(0, c, y, x)] += delta[c];
      }
    }
  }
}

}  // namespace

Tensor synthetic_image(int width, int height, Rng& rng) {
  Tensor img = Tensor::zeros({1, 3, height, width});
  int kind = static_cast<int>(rng.uniform_int(0, 3));
  add_gradient(&img, rng);
  switch (kind) {
    case 0:
      break;  // smooth gradient only
    case 1:
      add_stripes(&img, rng);
      break;
    case 2:
      add_texture(&img, rng);
      break;
    default:
      add_stripes(&img, rng);
      add_texture(&img, rng);
      add_disc(&img, rng);
      break;
  }
  if (rng.coin()) add_disc(&img, rng);
  for (double& v : img.mutable_data()) {
    v = v < 0.02 ? 0.02 : (v > 0.98 ? 0.98 : v);
  }
  return img;
}

std::vector<std::string> generate_dataset(const std::string& dir, int count,
                                          int size, uint64_t seed) {
  if (count < 1) throw ArgumentError("generate_dataset: count must be >= 1");
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;
  for (int i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(i)));
    Tensor img = synthetic_image(size, size, rng);
    char name[64];
    std::snprintf(name, sizeof name, "img_%04d.ppm", i);
    std::string path = dir + "/" + name;
    write_ppm(path, img);
    paths.push_back(path);
  }
  return paths;
}

std::vector<std::string> list_images(const std::string& dir) {
  std::vector<std::string> out;
  if (!std::filesystem::is_directory(dir)) {
    throw ArgumentError("not a directory: " + dir);
  }
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    if (ext == ".ppm" || ext == ".pgm") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Tensor pad_reflect(const Tensor& img, int multiple, int* pad_right,
                   int* pad_bottom) {
  const Shape& s = img.shape();
  int pr = (multiple - s.w % multiple) % multiple;
  int pb = (multiple - s.h % multiple) % multiple;
  if (pad_right) *pad_right = pr;
  if (pad_bottom) *pad_bottom = pb;
  if (pr == 0 && pb == 0) return img;
  if (s.w < 2 || s.h < 2) throw ArgumentError("image too small to pad");
  Tensor out = Tensor::zeros({s.n, s.c, s.h + pb, s.w + pr});
  double* p = out.mutable_data().data();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < s.h + pb; ++y) {
        int sy = y < s.h ? y : 2 * s.h - 2 - y;
        for (int x = 0; x < s.w + pr; ++x) {
          int sx = x < s.w ? x : 2 * s.w - 2 - x;
          p[out.shape().index(n, c, y, x)] = img.at(n, c, sy, sx);
        }
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& img, int x0, int y0, int w, int h) {
  const Shape& s = img.shape();
  if (x0 < 0 || y0 < 0 || x0 + w > s.w || y0 + h > s.h) {
    throw ArgumentError("crop outside image");
  }
  Tensor out = Tensor::zeros({s.n, s.c, h, w});
  double* p = out.mutable_data().data();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          p[out.shape().index(n, c, y, x)] = img.at(n, c, y0 + y, x0 + x);
        }
      }
    }
  }
  return out;
}

}  // namespace onnpic
