#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "stnet/localize.hpp"
#include "stnet/network.hpp"

namespace stnet::testing {

inline constexpr std::size_t kDetectorSize = 64;
inline constexpr std::size_t kSquareClass = 0;
inline constexpr std::size_t kBackgroundClass = 1;

// Hand-weighted bright-square detector on 64x64 gray images:
//   conv1 3x3 {bright, dark} -> relu -> pool1 2x2
//   conv2 3x3 {bright - dark, dark - bright} -> relu -> pool2 2x2
//   global 16x16 conv {square, background} -> flatten -> fc (identity) -> softmax
// "square" = sum(bright) - 0.1 sum(dark); "background" = 0.1 sum(dark) - sum(bright).
Network make_detector_net();

struct SquareScene {
  FeatureVolume image;
  BBox square;
  std::optional<BBox> distractor;
};

// Uniform bright square (18-28 px) on low-intensity noise, optionally with a
// smaller bright distractor patch well separated from it.
SquareScene make_square_scene(std::mt19937& rng, bool with_distractor);

// n scenes; every `distractor_every`-th one (0 = never) carries a distractor.
std::vector<Sample> make_square_suite(std::size_t n, std::uint32_t seed,
                                      std::size_t distractor_every = 3);

// Writes img_XXX.pgm files plus manifest.jsonl; returns the manifest path.
std::filesystem::path write_suite(const std::vector<Sample>& suite, const std::filesystem::path& dir);

// Writes detector.json + detector.stnt into dir.
void write_detector(const std::filesystem::path& dir);

}  // namespace stnet::testing
