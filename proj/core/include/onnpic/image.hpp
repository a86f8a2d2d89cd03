#pragma once

#include <string>
#include <vector>

#include "onnpic/tensor.hpp"

namespace onnpic {

// Images are (1,3,H,W) tensors with values in [0,1]. Only binary PPM (P6)
// and PGM (P5) with maxval 255 are supported; PGM loads as replicated gray.
Tensor read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor& img);
std::vector<uint8_t> encode_ppm(const Tensor& img);
Tensor decode_ppm(std::span<const uint8_t> bytes);

// Structured synthetic images (smooth gradients, checkers/stripes, low-pass
// filtered noise textures and mixtures) so training and evaluation run with
// zero downloads. Deterministic per rng state.
Tensor synthetic_image(int width, int height, Rng& rng);
// Writes `count` images named img_0000.ppm.. into dir (created if missing).
std::vector<std::string> generate_dataset(const std::string& dir, int count,
                                          int size, uint64_t seed);

// All .ppm/.pgm files in a directory, sorted by name.
std::vector<std::string> list_images(const std::string& dir);

// Reflective padding on the right/bottom to reach multiples of `multiple`.
Tensor pad_reflect(const Tensor& img, int multiple, int* pad_right,
                   int* pad_bottom);
Tensor crop(const Tensor& img, int x0, int y0, int w, int h);

}  // namespace onnpic
