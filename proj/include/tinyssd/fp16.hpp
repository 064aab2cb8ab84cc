#pragma once

#include <cstdint>

namespace tinyssd {

inline constexpr float kHalfMax = 65504.0f;

/// IEEE-754 binary16 encoding with round-to-nearest-even. Subnormals are kept;
/// magnitudes above 65504 saturate to +/-65504 instead of becoming infinity.
/// NaN maps to a quiet NaN.
std::uint16_t float_to_half(float value) noexcept;

float half_to_float(std::uint16_t bits) noexcept;

/// float -> half -> float.
inline float round_to_half(float value) noexcept { return half_to_float(float_to_half(value)); }

}  // namespace tinyssd
