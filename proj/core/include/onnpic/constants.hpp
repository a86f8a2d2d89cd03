#pragma once

namespace onnpic {

// Entropy-model floors shared by the training likelihood and the coder's
// table builder. kSigmaMin keeps discretized-Gaussian bins wide enough to be
// representable in 16-bit tables; kPMin is the 1/2^16 minimum symbol mass.
inline constexpr double kSigmaMin = 0.11;
inline constexpr double kPMin = 1.0 / 65536.0;

}  // namespace onnpic
