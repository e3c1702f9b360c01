#include "gwe/common.hpp"

#include <iostream>
#include <mutex>

namespace gwe {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

WarningSink& sink_slot() {
  static WarningSink sink = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return sink;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (sink_slot()) sink_slot()(message);
}

WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard lock(sink_mutex());
  auto previous = std::move(sink_slot());
  sink_slot() = std::move(sink);
  return previous;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  // FNV-1a over the tag, then mixed with the seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(seed) ^ h);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) + 0x632be59bd9b4e019ULL * (index + 1));
}

void require(bool condition, std::string_view message) {
  if (!condition) throw Error(std::string(message));
}

}  // namespace gwe
