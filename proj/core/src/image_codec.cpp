#include "onnpic/image_codec.hpp"

#include <cmath>

#include "onnpic/image.hpp"
#include "onnpic/rangecoder.hpp"

namespace onnpic {

namespace {

// Both latent streams use the fixed alphabet with channel-major, row-major
// scan order, which for a single-image NCHW tensor is simply the flat
// storage order.
std::vector<int32_t> to_symbols(const Tensor& t, int64_t* clamped) {
  std::vector<int32_t> out(t.numel());
  int64_t n = 0;
  const double* p = t.data().data();
  for (int64_t i = 0; i < t.numel(); ++i) {
    int32_t v = static_cast<int32_t>(std::llround(p[i]));
    if (v < kSymbolMin) {
      v = kSymbolMin;
      ++n;
    } else if (v > kSymbolMax) {
      v = kSymbolMax;
      ++n;
    }
    out[i] = v;
  }
  if (clamped) *clamped = n;
  return out;
}

Tensor from_symbols(std::span<const int32_t> sym, const Shape& s) {
  Tensor t = Tensor::zeros(s);
  double* p = t.mutable_data().data();
  for (int64_t i = 0; i < s.numel(); ++i) p[i] = sym[i];
  return t;
}

std::vector<CdfTable> prior_tables(const Model& model) {
  std::vector<CdfTable> tables;
  int cz = model.config().hyper_channels;
  tables.reserve(cz);
  for (int c = 0; c < cz; ++c) {
    tables.push_back(build_cdf_logistic(model.prior_location(c),
                                        model.prior_scale(c), kSymbolMin,
                                        kSymbolMax));
  }
  return tables;
}

double total_rate_bits(const Tensor& likelihoods) {
  double bits = 0.0;
  constexpr double kInvLn2 = 1.4426950408889634074;
  for (double p : likelihoods.data()) bits -= std::log(p) * kInvLn2;
  return bits;
}

}  // namespace

Tensor clip01(const Tensor& t) {
  Tensor out = Tensor::zeros(t.shape());
  const double* a = t.data().data();
  double* b = out.mutable_data().data();
  for (int64_t i = 0; i < t.numel(); ++i) {
    b[i] = a[i] < 0.0 ? 0.0 : (a[i] > 1.0 ? 1.0 : a[i]);
  }
  return out;
}

EncodeResult encode_image(const Model& model, const Tensor& image,
                          bool denoise) {
  const Shape& s = image.shape();
  if (s.n != 1 || s.c != 3) {
    throw ArgumentError("encode_image expects a (1,3,H,W) image");
  }
  if (s.h > 0xFFFF || s.w > 0xFFFF) {
    throw ArgumentError("image dims exceed the u16 header fields");
  }
  int pad_right = 0, pad_bottom = 0;
  Tensor padded = pad_reflect(image, 16, &pad_right, &pad_bottom);

  Tape t(false);
  Tensor f0 = model.analysis0(t, padded);
  Tensor y0 = denoise ? add(t, f0, model.d0().forward(t, f0)) : f0;
  Tensor f1 = model.analysis1(t, y0);
  Tensor y1 = denoise ? add(t, f1, model.d1().forward(t, f1)) : f1;
  Tensor z = model.hyper_analysis(t, y1);

  EncodeResult res;
  std::vector<int32_t> z_sym = to_symbols(round_tensor(z), &res.clamped_z);
  Tensor z_hat = from_symbols(z_sym, z.shape());
  auto [mu, sigma] =
      model.hyper_synthesis(t, z_hat, y1.shape().h, y1.shape().w);
  std::vector<int32_t> y_sym = to_symbols(round_tensor(y1), &res.clamped_y);
  Tensor y_hat = from_symbols(y_sym, y1.shape());

  res.est_bits_y = total_rate_bits(
      gaussian_likelihood(t, y_hat, mu, sigma, kSigmaMin, kPMin));
  res.est_bits_z = total_rate_bits(model.prior_likelihood(t, z_hat));
  res.x_hat = model.synthesize(t, y_hat);

  auto z_tables = prior_tables(model);
  int cz = model.config().hyper_channels;
  int64_t z_plane = z.numel() / cz;
  std::vector<uint8_t> z_stream = rc_encode(
      z_sym,
      [&](size_t i) -> const CdfTable& { return z_tables[i / z_plane]; },
      kSymbolMin);

  const double* pmu = mu.data().data();
  const double* psg = sigma.data().data();
  std::vector<CdfTable> y_tables(y_sym.size());
  for (size_t i = 0; i < y_sym.size(); ++i) {
    y_tables[i] = build_cdf(pmu[i], psg[i], kSymbolMin, kSymbolMax);
  }
  std::vector<uint8_t> y_stream = rc_encode(
      y_sym, [&](size_t i) -> const CdfTable& { return y_tables[i]; },
      kSymbolMin);

  Container c;
  c.header.q_index = static_cast<uint8_t>(model.config().quality);
  c.header.height = static_cast<uint16_t>(s.h);
  c.header.width = static_cast<uint16_t>(s.w);
  c.header.pad_right = static_cast<uint8_t>(pad_right);
  c.header.pad_bottom = static_cast<uint8_t>(pad_bottom);
  c.z_stream = std::move(z_stream);
  c.y_stream = std::move(y_stream);
  res.bytes = write_container(c);
  return res;
}

DecodeResult decode_image(const Model& model, std::span<const uint8_t> bytes) {
  Container c = read_container(bytes);
  if (c.header.q_index != model.config().quality) {
    throw DecodeError("bitstream q" + std::to_string(c.header.q_index) +
                      " does not match checkpoint q" +
                      std::to_string(model.config().quality));
  }
  int W = c.header.width + c.header.pad_right;
  int H = c.header.height + c.header.pad_bottom;
  if (W % 16 != 0 || H % 16 != 0 || W == 0 || H == 0) {
    throw DecodeError("bitstream dims are not padded to multiples of 16");
  }
  const int C = model.config().channels;
  const int Cz = model.config().hyper_channels;
  Shape y_shape{1, C, H / 16, W / 16};
  // ha applies two ceil-halving stride-2 convs to the y grid
  Shape z_shape{1, Cz, (y_shape.h + 3) / 4, (y_shape.w + 3) / 4};

  auto z_tables = prior_tables(model);
  int64_t z_plane = z_shape.numel() / Cz;
  std::vector<int32_t> z_sym = rc_decode(
      c.z_stream, z_shape.numel(),
      [&](size_t i) -> const CdfTable& { return z_tables[i / z_plane]; },
      kSymbolMin);
  Tensor z_hat = from_symbols(z_sym, z_shape);

  Tape t(false);
  auto [mu, sigma] =
      model.hyper_synthesis(t, z_hat, y_shape.h, y_shape.w);
  const double* pmu = mu.data().data();
  const double* psg = sigma.data().data();
  // Tables must be built in scan order exactly as the encoder did.
  std::vector<int32_t> y_sym(y_shape.numel());
  {
    RangeDecoder dec(c.y_stream);
    for (int64_t i = 0; i < y_shape.numel(); ++i) {
      CdfTable table = build_cdf(pmu[i], psg[i], kSymbolMin, kSymbolMax);
      y_sym[i] = dec.decode_symbol(table) + kSymbolMin;
    }
  }
  Tensor y_hat = from_symbols(y_sym, y_shape);

  DecodeResult res;
  res.x_hat = model.synthesize(t, y_hat);
  Tensor clipped = clip01(res.x_hat);
  res.image = crop(clipped, 0, 0, c.header.width, c.header.height);
  return res;
}

}  // namespace onnpic
