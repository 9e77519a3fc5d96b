#pragma once

// Named, hierarchical seeding. Every random stream in an experiment is
// derived from one master seed plus a path (stream name, cell, trial), so
// results do not depend on how trials are scheduled across threads.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>


namespace ngrc {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a of a stream name.
constexpr std::uint64_t stream_id(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p));
  return s;
}

inline Rng child_stream(std::uint64_t master, std::string_view name,
                        std::initializer_list<std::uint64_t> path = {}) {
  std::uint64_t s = derive_seed(master, {stream_id(name)});
  for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p));
  return Rng(s);
}

}  // namespace ngrc
