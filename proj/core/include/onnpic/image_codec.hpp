#pragma once

#include "onnpic/bitstream.hpp"
#include "onnpic/codec.hpp"

namespace onnpic {

struct EncodeResult {
  std::vector<uint8_t> bytes;   // full ONNP container
  double est_bits_y = 0.0;      // inference-mode likelihood estimates
  double est_bits_z = 0.0;
  int64_t clamped_y = 0;        // symbols absorbed by the tail bins
  int64_t clamped_z = 0;
  Tensor x_hat;                 // encoder-side reconstruction (padded, raw)
};

struct DecodeResult {
  Tensor image;  // clipped to [0,1], cropped to the original dims
  Tensor x_hat;  // raw synthesis output before clip/crop
};

// Pads the image reflectively to multiples of 16, runs the inference-mode
// analysis (optionally bypassing the denoisers), rounds and clamps the
// latents into the coder alphabet and writes the ONNP container.
EncodeResult encode_image(const Model& model, const Tensor& image,
                          bool denoise = true);

// Exact inverse; throws DecodeError on corrupt input or when the bitstream's
// quality index does not match the checkpoint.
DecodeResult decode_image(const Model& model,
                          std::span<const uint8_t> bytes);

Tensor clip01(const Tensor& t);

}  // namespace onnpic
