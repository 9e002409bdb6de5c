#include "scadatwin/rng.hpp"

#include "scadatwin/bytes.hpp"
#include "scadatwin/error.hpp"

namespace scadatwin {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t stable_hash(std::string_view key) noexcept {
  // FNV-1a, 64 bit
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed, std::string_view key)
    : engine_(splitmix64(seed ^ splitmix64(stable_hash(key)))) {}

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi <= lo) return lo;
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  // rejection sampling keeps the draw unbiased
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return lo + static_cast<std::int64_t>(x % span);
}

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::MalformedModel: return "MalformedModel";
    case ErrorCode::UnknownAsset: return "UnknownAsset";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ConnectionClosed: return "ConnectionClosed";
    case ErrorCode::Refused: return "Refused";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::UnknownTap: return "UnknownTap";
    case ErrorCode::InvalidCombination: return "InvalidCombination";
    case ErrorCode::Malformed: return "Malformed";
    case ErrorCode::AuthFailed: return "AuthFailed";
    case ErrorCode::UnknownCommand: return "UnknownCommand";
    case ErrorCode::BlacklistViolation: return "BlacklistViolation";
    case ErrorCode::ScriptInvariantBroken: return "ScriptInvariantBroken";
    case ErrorCode::Unimplemented: return "Unimplemented";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MalformedTrace: return "MalformedTrace";
  }
  return "Unknown";
}

std::string to_hex(std::span<const std::uint8_t> data) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error(ErrorCode::Malformed, "odd-length hex string");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw Error(ErrorCode::Malformed, std::string("bad hex digit '") + c + "'");
  };
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  return out;
}

}  // namespace scadatwin
