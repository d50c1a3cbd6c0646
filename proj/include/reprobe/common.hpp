#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace reprobe {

// Base of every error raised by the harness. Subsystems throw the derived
// types below so callers can distinguish bad input from transport trouble.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

// SplitMix64. Small, counter-friendly and identical on every platform, which
// std::mt19937 + std distributions are not.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t uniform_index(std::uint64_t n);

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal();

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) {
    state_ = s;
    has_spare_ = false;
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent stream seed for element `index` of a seeded family.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// FNV-1a 64-bit, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::vector<std::string> split(std::string_view s, char delim);
std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);

// Parses a full string as a double; returns false on trailing garbage.
bool parse_double(std::string_view s, double& out);

// Shortest round-trip decimal rendering of a double.
std::string format_double(double v);

}  // namespace reprobe
