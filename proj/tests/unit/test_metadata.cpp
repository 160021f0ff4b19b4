#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "cova/errors.hpp"
#include "cova/metadata.hpp"
#include "doctest.h"

using namespace cova;

namespace {

FrameMeta make_frame(std::int64_t index, FrameType type, int gop, int rows = 2, int cols = 3) {
  FrameMeta f;
  f.frame_index = index;
  f.type = type;
  f.gop_index = gop;
  const MbType mb = type == FrameType::I ? MbType::I : (type == FrameType::B ? MbType::B : MbType::P);
  f.grid = Grid<MacroblockMeta>(rows, cols, MacroblockMeta{mb, 0, {}});
  return f;
}

MetadataStream stream_with_iframes(int n, const std::vector<int>& iframes) {
  MetadataStream s;
  s.header = StreamHeader{1, "synthetic-h264", 48, 32, 50};
  int gop = -1;
  for (int t = 0; t < n; ++t) {
    const bool is_i = std::find(iframes.begin(), iframes.end(), t) != iframes.end();
    if (is_i) ++gop;
    s.frames.push_back(make_frame(t, is_i ? FrameType::I : FrameType::P, gop));
  }
  return s;
}

MetadataStream random_stream(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(1, 5), len(0, 30), gop_len(2, 8), mode(0, 5), mv(-kMaxMvComponent, kMaxMvComponent);
  std::bernoulli_distribution moving(0.3), bframe(0.3);
  MetadataStream s;
  const int rows = dim(rng), cols = dim(rng), g = gop_len(rng);
  s.header = StreamHeader{1, "synthetic-h264", cols * 16, rows * 16, g};
  const int n = len(rng);
  for (int t = 0; t < n; ++t) {
    const int pos = t % g;
    const FrameType type = pos == 0 ? FrameType::I : (bframe(rng) ? FrameType::B : FrameType::P);
    FrameMeta f = make_frame(t, type, t / g, rows, cols);
    if (type != FrameType::I)
      for (auto& mb : f.grid.data) {
        mb.partition_mode = static_cast<std::uint8_t>(std::min(mode(rng), type == FrameType::B ? 4 : 5));
        if (moving(rng)) mb.mv = {mv(rng), mv(rng)};
      }
    s.frames.push_back(std::move(f));
  }
  return s;
}

}  // namespace

TEST_CASE("combo table") {
  CHECK(ComboTable::index(MbType::I, 0) == 0);
  CHECK(ComboTable::index(MbType::P, 0) == 1);
  CHECK(ComboTable::index(MbType::P, 5) == 6);
  CHECK(ComboTable::index(MbType::B, 0) == 7);
  CHECK(ComboTable::index(MbType::B, 4) == 11);
  CHECK_THROWS_AS(ComboTable::index(MbType::I, 1), InputError);
  CHECK_THROWS_AS(ComboTable::index(MbType::B, 5), InputError);
  std::set<int> seen;
  for (auto t : {MbType::I, MbType::P, MbType::B})
    for (int m = 0; m <= 5; ++m)
      if (ComboTable::valid(t, m)) seen.insert(ComboTable::index(t, m));
  CHECK(seen.size() == 12);
}

TEST_CASE("stream round trip") {
  SUBCASE("header only") {
    MetadataStream s;
    s.header = StreamHeader{1, "synthetic-h264", 64, 32, 10};
    std::istringstream in(serialize_stream(s));
    CHECK(parse_stream(in) == s);
  }
  SUBCASE("three frames") {
    MetadataStream s = stream_with_iframes(3, {0});
    s.frames[1].grid.at(1, 2).mv = {-8, 3};
    s.frames[1].grid.at(1, 2).partition_mode = 4;
    std::istringstream in(serialize_stream(s));
    CHECK(parse_stream(in) == s);
  }
  SUBCASE("randomized streams are bit exact") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 200; ++i) {
      const MetadataStream s = random_stream(rng);
      const std::string text = serialize_stream(s);
      std::istringstream in(text);
      const MetadataStream back = parse_stream(in);
      REQUIRE(back == s);
      CHECK(serialize_stream(back) == text);
    }
  }
  SUBCASE("file round trip") {
    const MetadataStream s = stream_with_iframes(7, {0, 4});
    const auto path = std::filesystem::temp_directory_path() / "cova_test_meta.jsonl";
    write_stream(s, path);
    CHECK(read_stream(path) == s);
    std::filesystem::remove(path);
  }
}

TEST_CASE("parse errors name the frame") {
  const MetadataStream s = stream_with_iframes(3, {0});
  const std::string text = serialize_stream(s);
  std::vector<std::string> lines;
  std::istringstream split(text);
  for (std::string l; std::getline(split, l);) lines.push_back(l);

  SUBCASE("gap") {
    std::istringstream in(lines[0] + "\n" + lines[1] + "\n" + lines[3] + "\n");
    try {
      parse_stream(in);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("gap at index 1") != std::string::npos);
    }
  }
  SUBCASE("non-monotone") {
    std::istringstream in(lines[0] + "\n" + lines[1] + "\n" + lines[2] + "\n" + lines[2] + "\n");
    CHECK_THROWS_AS(parse_stream(in), ParseError);
  }
  SUBCASE("dimension mismatch") {
    MetadataStream taller = s;
    taller.header.height_px = 48;
    for (auto& f : taller.frames) f.grid = Grid<MacroblockMeta>(3, 3, f.grid.data.front());
    std::istringstream other(serialize_stream(taller));
    std::string foreign;
    for (int i = 0; i < 4; ++i) std::getline(other, foreign);
    std::istringstream in(lines[0] + "\n" + lines[1] + "\n" + lines[2] + "\n" + foreign + "\n");
    try {
      parse_stream(in);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("frame 2") != std::string::npos);
    }
  }
  SUBCASE("malformed record") {
    std::istringstream in(lines[0] + "\n{not json\n");
    CHECK_THROWS_AS(parse_stream(in), ParseError);
  }
  SUBCASE("I-frame carrying motion") {
    MetadataStream bad = s;
    bad.frames[0].grid.at(0, 0).mv = {4, 0};
    CHECK_THROWS_AS(validate_stream(bad), ParseError);
  }
}

TEST_CASE("split_gops") {
  SUBCASE("regular") {
    const auto s = stream_with_iframes(200, {0, 50, 100, 150});
    const auto gops = split_gops(s);
    REQUIRE(gops.size() == 4);
    for (const auto& g : gops) CHECK(g.size() == 50);
  }
  SUBCASE("single I-frame") {
    const auto s = stream_with_iframes(1, {0});
    const auto gops = split_gops(s);
    REQUIRE(gops.size() == 1);
    CHECK(gops[0].size() == 1);
  }
  SUBCASE("irregular") {
    const auto s = stream_with_iframes(100, {0, 30});
    const auto gops = split_gops(s);
    REQUIRE(gops.size() == 2);
    CHECK(gops[0].size() == 30);
    CHECK(gops[1].size() == 70);
  }
  SUBCASE("must open with an I-frame") {
    auto s = stream_with_iframes(5, {0});
    s.frames[0] = make_frame(0, FrameType::P, 0);
    CHECK_THROWS_AS(split_gops(s), StructureError);
  }
  SUBCASE("flattening reproduces the stream") {
    const auto s = stream_with_iframes(77, {0, 9, 10, 40, 76});
    std::vector<FrameMeta> flat;
    for (const auto& g : split_gops(s)) {
      CHECK(g.frames.front().type == FrameType::I);
      for (std::size_t k = 1; k < g.frames.size(); ++k) CHECK(g.frames[k].type != FrameType::I);
      flat.insert(flat.end(), g.frames.begin(), g.frames.end());
    }
    CHECK(flat == s.frames);
  }
}

TEST_CASE("dependent_frames") {
  const auto s = stream_with_iframes(20, {0});
  const GoP g = split_gops(s)[0];
  CHECK(dependent_frames(g, 0).empty());
  CHECK(dependent_frames(g, 5) == std::vector<int>{0, 1, 2, 3, 4});
  for (int k = 0; k < g.size(); ++k) CHECK(dependent_frames(g, k).size() == static_cast<std::size_t>(k));
  CHECK(dependent_frames(g, 19).size() == 19);
  CHECK_THROWS_AS(dependent_frames(g, 20), BoundsError);
  CHECK_THROWS_AS(dependent_frames(g, -1), BoundsError);

  SUBCASE("B-frames also need the next reference") {
    MetadataStream b = stream_with_iframes(6, {0});
    b.frames[1] = make_frame(1, FrameType::B, 0);
    b.frames[3] = make_frame(3, FrameType::B, 0);
    const GoP gb = split_gops(b)[0];
    CHECK(dependent_frames(gb, 1) == std::vector<int>{0, 2});
    CHECK(dependent_frames(gb, 3) == std::vector<int>{0, 1, 2, 4});
    CHECK(dependent_frames(gb, 4) == std::vector<int>{0, 1, 2, 3});
  }
}

TEST_CASE("chunk_at_iframes") {
  auto sizes = [](const std::vector<Chunk>& cs) {
    std::vector<std::size_t> out;
    for (const auto& c : cs) out.push_back(c.gops.size());
    return out;
  };
  const auto four = stream_with_iframes(200, {0, 50, 100, 150});
  CHECK(sizes(chunk_at_iframes(four, 2)) == std::vector<std::size_t>{2, 2});
  const auto five = stream_with_iframes(250, {0, 50, 100, 150, 200});
  CHECK(sizes(chunk_at_iframes(five, 2)) == std::vector<std::size_t>{3, 2});
  const auto one = stream_with_iframes(50, {0});
  CHECK(sizes(chunk_at_iframes(one, 4)) == std::vector<std::size_t>{1});
  CHECK_THROWS_AS(chunk_at_iframes(one, 0), ConfigError);

  for (int workers = 1; workers <= 7; ++workers) {
    const auto chunks = chunk_at_iframes(five, workers);
    std::int64_t next = 0;
    std::size_t lo = 99, hi = 0;
    for (const auto& c : chunks) {
      CHECK(c.first_frame() == next);
      next = c.last_frame() + 1;
      lo = std::min(lo, c.gops.size());
      hi = std::max(hi, c.gops.size());
    }
    CHECK(next == 250);
    CHECK(hi - lo <= 1);
  }
}
