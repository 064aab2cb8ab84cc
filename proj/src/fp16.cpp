#include "tinyssd/fp16.hpp"

#include <bit>
#include <cmath>

namespace tinyssd {

std::uint16_t float_to_half(float value) noexcept {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
  const auto sign = static_cast<std::uint16_t>((bits >> 16) & 0x8000u);
  const std::uint32_t exponent = (bits >> 23) & 0xFFu;
  const std::uint32_t mantissa = bits & 0x7FFFFFu;

  if (exponent == 0xFFu && mantissa != 0) return static_cast<std::uint16_t>(sign | 0x7E00u);
  if (std::fabs(value) > kHalfMax) return static_cast<std::uint16_t>(sign | 0x7BFFu);

  const int e = static_cast<int>(exponent) - 127;
  if (e >= -14) {
    // Normal range. Carry out of the mantissa correctly bumps the exponent.
    std::uint32_t h = (static_cast<std::uint32_t>(e + 15) << 10) | (mantissa >> 13);
    const std::uint32_t rest = mantissa & 0x1FFFu;
    if (rest > 0x1000u || (rest == 0x1000u && (h & 1u))) ++h;
    return static_cast<std::uint16_t>(sign | h);
  }

  // Subnormal half: units of 2^-24.
  const int shift = -(e + 1);
  if (shift >= 26) return sign;
  const std::uint32_t full = mantissa | 0x800000u;
  std::uint32_t q = full >> shift;
  const std::uint32_t rest = full & ((1u << shift) - 1u);
  const std::uint32_t halfway = 1u << (shift - 1);
  if (rest > halfway || (rest == halfway && (q & 1u))) ++q;
  return static_cast<std::uint16_t>(sign | q);
}

float half_to_float(std::uint16_t bits) noexcept {
  const bool negative = (bits & 0x8000u) != 0;
  const int exponent = (bits >> 10) & 0x1F;
  const int mantissa = bits & 0x3FF;
  float magnitude;
  if (exponent == 0) {
    magnitude = std::ldexp(static_cast<float>(mantissa), -24);
  } else if (exponent == 0x1F) {
    magnitude = mantissa == 0 ? INFINITY : NAN;
  } else {
    magnitude = std::ldexp(static_cast<float>(1024 + mantissa), exponent - 25);
  }
  return negative ? -magnitude : magnitude;
}

}  // namespace tinyssd
