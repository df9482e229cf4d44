#pragma once

// Synthetic dataset fixtures shared by the unit tests and the acceptance
// binary.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "ptseg/datasets.hpp"
#include "ptseg/image_io.hpp"

namespace ptseg::fixture {

/// A MOTS-style sequence: 150 tracks as 2x2 blocks on a 60x12 canvas, each
/// appearing at its own frame and staying to the end. Five tracks are crowd
/// or ignored regions.
struct MotsFixture {
  std::vector<LabelMap> instances;
  std::vector<MotsTrack> tracks;
  /// Track id and first frame of the objects a correct conversion keeps, in
  /// object-id order.
  std::vector<std::pair<std::uint32_t, int>> expected;
};

inline MotsFixture mots_fixture(int num_tracks = 150, int num_frames = 12) {
  MotsFixture f;
  const int w = 60;
  const int h = 12;
  f.instances.assign(static_cast<std::size_t>(num_frames), LabelMap(w, h));
  std::vector<std::tuple<int, std::uint32_t>> kept;
  for (int k = 0; k < num_tracks; ++k) {
    MotsTrack tr;
    tr.value = static_cast<std::uint8_t>(k + 1);
    tr.track_id = 1000 + static_cast<std::uint32_t>((k * 37) % num_tracks);
    tr.crowd = k == 3 || k == 77;
    tr.ignored = k == 10 || k == 11 || k == 140;
    const int first = (k * 7) % num_frames;
    const int x0 = (k % 30) * 2;
    const int y0 = (k / 30) * 2;
    for (int t = first; t < num_frames; ++t) {
      for (int y = y0; y < y0 + 2; ++y) {
        for (int x = x0; x < x0 + 2; ++x) f.instances[t].set(x, y, tr.value);
      }
    }
    f.tracks.push_back(tr);
    if (!tr.crowd && !tr.ignored) kept.emplace_back(first, tr.track_id);
  }
  std::sort(kept.begin(), kept.end());
  for (std::size_t i = 0; i < kept.size() && i < 100; ++i) {
    f.expected.emplace_back(std::get<1>(kept[i]), std::get<0>(kept[i]));
  }
  return f;
}

inline void write_mots_fixture(const std::filesystem::path& root, const std::string& seq,
                               const MotsFixture& f) {
  const auto dir = root / seq;
  std::filesystem::create_directories(dir / "instances");
  const auto stems = default_stems(static_cast<int>(f.instances.size()));
  for (std::size_t t = 0; t < f.instances.size(); ++t) {
    write_indexed_png((dir / "instances" / (stems[t] + ".png")).string(), f.instances[t]);
  }
  auto tracks = nlohmann::json::array();
  for (const auto& tr : f.tracks) {
    tracks.push_back({{"value", tr.value}, {"track_id", tr.track_id}, {"ignored", tr.ignored},
                      {"crowd", tr.crowd}});
  }
  std::ofstream(dir / "tracks.json") << nlohmann::json{{"tracks", tracks}}.dump();
}

}  // namespace ptseg::fixture
