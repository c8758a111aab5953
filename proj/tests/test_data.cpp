#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "trajdiff/data.hpp"
#include "trajdiff/errors.hpp"
#include "trajdiff/rng.hpp"

using namespace trajdiff;
namespace fs = std::filesystem;

namespace {

fs::path write_tmp(const std::string& name, const std::string& content) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream f(p);
  f << content;
  return p;
}

Scene scene_with_frames(const std::vector<std::pair<long, long>>& ped_frames) {
  Scene s;
  s.name = "t";
  s.frame_step = 1;
  for (auto [ped, frame] : ped_frames) {
    s.records.push_back({frame, ped, static_cast<double>(frame), 0.0});
  }
  std::sort(s.records.begin(), s.records.end(), [](const SceneRecord& a, const SceneRecord& b) {
    return a.pedestrian != b.pedestrian ? a.pedestrian < b.pedestrian : a.frame < b.frame;
  });
  return s;
}

// brute-force oracle: enumerate contiguous runs, count sliding windows
long window_count_oracle(const Scene& s, int len, int stride) {
  std::map<long, std::vector<long>> frames;
  for (const auto& r : s.records) frames[r.pedestrian].push_back(r.frame);
  long total = 0;
  for (auto& [ped, fr] : frames) {
    std::sort(fr.begin(), fr.end());
    size_t i = 0;
    while (i < fr.size()) {
      size_t j = i + 1;
      while (j < fr.size() && fr[j] - fr[j - 1] == 1) ++j;
      long run = static_cast<long>(j - i);
      if (run >= len) total += (run - len) / stride + 1;
      i = j;
    }
  }
  return total;
}

}  // namespace

TEST_CASE("load_scene parses the 4-column ethucy format") {
  auto p = write_tmp("scene_basic.txt", "0 1 0.0 0.0\n10 1 0.4 0.0\n");
  Scene s = load_scene(p.string(), SceneFormat::ethucy);
  REQUIRE(s.records.size() == 2);
  CHECK(s.records[0].pedestrian == 1);
  CHECK(s.records[1].frame == 10);
  CHECK(s.records[1].x == doctest::Approx(0.4));
  CHECK(s.frame_interval == doctest::Approx(0.4));
  CHECK(s.frame_step == 10);
}

TEST_CASE("load_scene reports the offending line for malformed input") {
  auto p = write_tmp("scene_bad.txt", "0 1 0.0 0.0\n10 1 oops 0.0\n");
  try {
    load_scene(p.string(), SceneFormat::ethucy);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line_number == 2);
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("load_scene rejects empty files and duplicate records") {
  auto p = write_tmp("scene_empty.txt", "\n\n");
  CHECK_THROWS_AS(load_scene(p.string(), SceneFormat::ethucy), DataError);
  auto q = write_tmp("scene_dup.txt", "0 1 0.0 0.0\n0 1 1.0 1.0\n");
  CHECK_THROWS_AS(load_scene(q.string(), SceneFormat::ethucy), DataError);
}

TEST_CASE("load_scene pedestrian count matches an independent recount") {
  // multi-pedestrian file in the community format; the oracle recounts ids
  // with a plain scan, independent of the Scene machinery
  std::ostringstream file;
  Rng rng(42);
  std::set<long> expected_ids;
  for (long ped = 1; ped <= 23; ++ped) {
    int frames = 2 + static_cast<int>(rng.below(30));
    for (int f = 0; f < frames; ++f) {
      file << (f * 10) << " " << ped << ".0 " << rng.uniform(-10, 10) << " "
           << rng.uniform(-10, 10) << "\n";
      expected_ids.insert(ped);
    }
  }
  auto p = write_tmp("scene_multi.txt", file.str());
  Scene s = load_scene(p.string(), SceneFormat::ethucy);
  std::set<long> got_ids;
  for (const auto& r : s.records) got_ids.insert(r.pedestrian);
  CHECK(got_ids == expected_ids);
}

TEST_CASE("load_scene reduces SDD annotations to pedestrian centroids at 0.4 s") {
  std::string content =
      "0 100 200 120 240 0 0 0 0 \"Pedestrian\"\n"   // centroid (110, 220)
      "0 100 200 120 240 6 0 0 0 \"Pedestrian\"\n"   // frame 6 dropped (not a 12th)
      "0 102 202 122 242 12 0 0 0 \"Pedestrian\"\n"  // kept
      "0 104 204 124 244 24 1 0 0 \"Pedestrian\"\n"  // lost flag
      "1 0 0 10 10 0 0 0 0 \"Biker\"\n";             // other label
  auto p = write_tmp("scene_sdd.txt", content);
  Scene s = load_scene(p.string(), SceneFormat::sdd);
  REQUIRE(s.records.size() == 2);
  CHECK(s.records[0].x == doctest::Approx(110.0));
  CHECK(s.records[0].y == doctest::Approx(220.0));
  CHECK(s.records[1].frame == 1);  // frame ids renumbered by the 12-frame stride
}

TEST_CASE("window_scene slides over contiguous runs") {
  std::vector<std::pair<long, long>> recs;
  for (long f = 0; f < 20; ++f) recs.push_back({1, f});
  Scene s = scene_with_frames(recs);
  CHECK(window_scene(s).size() == 1);

  recs.push_back({1, 20});
  Scene s2 = scene_with_frames(recs);
  auto w2 = window_scene(s2);
  REQUIRE(w2.size() == 2);
  CHECK(w2[0].obs.size() == 8);
  CHECK(w2[0].fut.size() == 12);
  CHECK(w2[1].obs.front().x == doctest::Approx(1.0));  // slid by one frame
}

TEST_CASE("windows never straddle a frame gap") {
  // runs of 12 and 13 around a gap: too short for any window
  std::vector<std::pair<long, long>> recs;
  for (long f = 0; f < 12; ++f) recs.push_back({1, f});
  for (long f = 13; f < 26; ++f) recs.push_back({1, f});
  Scene s = scene_with_frames(recs);
  auto ws = window_scene(s);
  CHECK(static_cast<long>(ws.size()) == window_count_oracle(s, 20, 1));
  CHECK(ws.empty());

  // extend the second run to 20 frames: exactly one window, entirely after the gap
  for (long f = 26; f < 33; ++f) recs.push_back({1, f});
  Scene s2 = scene_with_frames(recs);
  auto ws2 = window_scene(s2);
  REQUIRE(static_cast<long>(ws2.size()) == window_count_oracle(s2, 20, 1));
  REQUIRE(ws2.size() == 1);
  CHECK(ws2[0].obs.front().x == doctest::Approx(13.0));
}

TEST_CASE("window count matches the brute-force run enumeration") {
  Rng rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::pair<long, long>> recs;
    long peds = 1 + static_cast<long>(rng.below(5));
    for (long ped = 0; ped < peds; ++ped) {
      long f = 0;
      int segments = 1 + static_cast<int>(rng.below(3));
      for (int seg = 0; seg < segments; ++seg) {
        long run = 1 + static_cast<long>(rng.below(45));
        for (long i = 0; i < run; ++i) recs.push_back({ped, f++});
        f += 1 + static_cast<long>(rng.below(4));  // gap
      }
    }
    Scene s = scene_with_frames(recs);
    int stride = 1 + static_cast<int>(rng.below(3));
    auto ws = window_scene(s, 8, 12, stride);
    CHECK(static_cast<long>(ws.size()) == window_count_oracle(s, 20, stride));
    for (const auto& w : ws) {
      REQUIRE(w.obs.size() == 8);
      REQUIRE(w.fut.size() == 12);
    }
  }
}

TEST_CASE("window_scene validates parameters") {
  Scene s = scene_with_frames({{1, 0}, {1, 1}, {1, 2}});
  CHECK_THROWS_AS(window_scene(s, 1, 12, 1), DataError);
  CHECK_THROWS_AS(window_scene(s, 8, 0, 1), DataError);
  CHECK_THROWS_AS(window_scene(s, 8, 12, 0), DataError);
}

TEST_CASE("normalize_window centers on the last observed position") {
  TrajectoryWindow w;
  for (int i = 0; i < 8; ++i) w.obs.push_back({3.0 - 0.1 * i, -1.0});
  w.obs.back() = {3.0, -1.0};
  for (int i = 0; i < 12; ++i) w.fut.push_back({4.0 + i, 2.0});
  auto [nw, offset] = normalize_window(w);
  CHECK(offset.x == 3.0);
  CHECK(offset.y == -1.0);
  CHECK(nw.obs.back().x == 0.0);
  CHECK(nw.obs.back().y == 0.0);
  CHECK(nw.fut[0].x == doctest::Approx(1.0));

  // already-centered window is unchanged
  auto [nw2, offset2] = normalize_window(nw);
  CHECK(offset2.x == 0.0);
  CHECK(offset2.y == 0.0);
  for (size_t i = 0; i < nw.obs.size(); ++i) CHECK(nw2.obs[i] == nw.obs[i]);
}

TEST_CASE("normalize then denormalize round-trips exactly on grid coordinates") {
  // dyadic 1/1024-grid coordinates keep the centering subtraction exact, so
  // the round-trip is bitwise
  Rng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    TrajectoryWindow w;
    auto grid = [&] {
      return static_cast<double>(static_cast<long>(rng.below(40960)) - 20480) / 1024.0;
    };
    for (int i = 0; i < 8; ++i) w.obs.push_back({grid(), grid()});
    for (int i = 0; i < 12; ++i) w.fut.push_back({grid(), grid()});
    auto [nw, offset] = normalize_window(w);
    TrajectoryWindow back = denormalize_window(nw, offset);
    for (size_t i = 0; i < w.obs.size(); ++i) CHECK(back.obs[i] == w.obs[i]);
    for (size_t i = 0; i < w.fut.size(); ++i) CHECK(back.fut[i] == w.fut[i]);
  }
}
