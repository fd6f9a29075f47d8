#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "turing/error.hpp"

namespace turing::detail {

template <typename T>
using Bits = std::conditional_t<
    sizeof(T) == 8, std::uint64_t,
    std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;

template <typename T>
void put_le(std::ostream& out, T value) {
  auto bits = std::bit_cast<Bits<T>>(value);
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>(bits & 0xffu);
    if constexpr (sizeof(T) > 1) bits = static_cast<Bits<T>>(bits >> 8);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in, const char* what = "file") {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw FormatError(std::string(what) + " is truncated");
  Bits<T> bits = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) {
    if constexpr (sizeof(T) > 1) bits = static_cast<Bits<T>>(bits << 8);
    bits = static_cast<Bits<T>>(bits | bytes[i]);
  }
  return std::bit_cast<T>(bits);
}

}  // namespace turing::detail
