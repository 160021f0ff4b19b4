#include "cova/metadata.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>

#include "cova/errors.hpp"
#include "json.hpp"

namespace cova {
namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "cova-meta";
constexpr int kFormatVersion = 1;

MbType mb_type_from(const std::string& s, std::int64_t frame) {
  if (s == "I") return MbType::I;
  if (s == "P") return MbType::P;
  if (s == "B") return MbType::B;
  throw ParseError("unknown macroblock type '" + s + "'", frame);
}

FrameType frame_type_from(const std::string& s, std::int64_t frame) {
  if (s == "I") return FrameType::I;
  if (s == "P") return FrameType::P;
  if (s == "B") return FrameType::B;
  throw ParseError("unknown frame type '" + s + "'", frame);
}

json header_to_json(const StreamHeader& h) {
  json j;
  j["format"] = kFormatTag;
  j["version"] = h.version;
  j["codec"] = h.codec;
  j["width"] = h.width_px;
  j["height"] = h.height_px;
  j["gop_length"] = h.gop_length;
  return j;
}

json frame_to_json(const FrameMeta& f) {
  json rle = json::array();
  const auto& cells = f.grid.data;
  std::size_t i = 0;
  while (i < cells.size()) {
    std::size_t j = i + 1;
    while (j < cells.size() && cells[j] == cells[i]) ++j;
    const auto& mb = cells[i];
    rle.push_back(json::array({static_cast<std::int64_t>(j - i), std::string(1, to_char(mb.type)),
                               static_cast<int>(mb.partition_mode), mb.mv.dx, mb.mv.dy}));
    i = j;
  }
  json j;
  j["i"] = f.frame_index;
  j["type"] = std::string(1, to_char(f.type));
  j["gop"] = f.gop_index;
  j["rle"] = std::move(rle);
  return j;
}

void check_header(const StreamHeader& h) {
  if (h.version != kFormatVersion) throw ParseError("unsupported container version " + std::to_string(h.version));
  if (h.width_px <= 0 || h.height_px <= 0 || h.width_px % kMacroblockSize != 0 ||
      h.height_px % kMacroblockSize != 0)
    throw ParseError("frame dimensions must be positive multiples of 16");
  if (h.gop_length < 1) throw ParseError("gop_length must be >= 1");
}

void check_macroblock(const MacroblockMeta& mb, std::int64_t frame) {
  if (!ComboTable::valid(mb.type, mb.partition_mode))
    throw ParseError("partition mode " + std::to_string(mb.partition_mode) + " invalid for macroblock type " +
                         std::string(1, to_char(mb.type)),
                     frame);
  if (mb.type == MbType::I && !mb.mv.is_zero()) throw ParseError("I macroblock with nonzero motion vector", frame);
  if (std::abs(mb.mv.dx) > kMaxMvComponent || std::abs(mb.mv.dy) > kMaxMvComponent)
    throw ParseError("motion vector out of range", frame);
}

void check_frame(const FrameMeta& f, const StreamHeader& h, std::int64_t expected_index) {
  if (f.frame_index != expected_index) {
    if (f.frame_index > expected_index) throw ParseError("gap at index " + std::to_string(expected_index), f.frame_index);
    throw ParseError("non-monotone frame index " + std::to_string(f.frame_index), f.frame_index);
  }
  if (f.grid.rows != h.mb_rows() || f.grid.cols != h.mb_cols() ||
      f.grid.size() != static_cast<std::size_t>(h.mb_rows()) * h.mb_cols())
    throw ParseError("dimension mismatch", f.frame_index);
  if (f.gop_index < 0) throw ParseError("negative gop index", f.frame_index);
  for (const auto& mb : f.grid.data) {
    check_macroblock(mb, f.frame_index);
    if (f.type == FrameType::I && mb.type != MbType::I)
      throw ParseError("I-frame contains non-I macroblock", f.frame_index);
    if (f.type == FrameType::P && mb.type == MbType::B)
      throw ParseError("P-frame contains B macroblock", f.frame_index);
  }
}

FrameMeta frame_from_json(const json& j, const StreamHeader& h, std::int64_t expected_index) {
  FrameMeta f;
  try {
    f.frame_index = j.at("i").get<std::int64_t>();
    f.type = frame_type_from(j.at("type").get<std::string>(), f.frame_index);
    f.gop_index = j.at("gop").get<int>();
    if (f.frame_index != expected_index) check_frame(f, h, expected_index);
    f.grid = Grid<MacroblockMeta>(h.mb_rows(), h.mb_cols());
    const std::size_t total = f.grid.size();
    std::size_t pos = 0;
    for (const auto& run : j.at("rle")) {
      if (!run.is_array() || run.size() != 5) throw ParseError("malformed run", f.frame_index);
      const auto count = run[0].get<std::int64_t>();
      if (count <= 0) throw ParseError("non-positive run length", f.frame_index);
      MacroblockMeta mb;
      mb.type = mb_type_from(run[1].get<std::string>(), f.frame_index);
      const int mode = run[2].get<int>();
      if (mode < 0 || mode > kMaxPartitionMode) throw ParseError("partition mode out of range", f.frame_index);
      mb.partition_mode = static_cast<std::uint8_t>(mode);
      mb.mv = {run[3].get<int>(), run[4].get<int>()};
      if (pos + static_cast<std::size_t>(count) > total) throw ParseError("dimension mismatch", f.frame_index);
      std::fill_n(f.grid.data.begin() + static_cast<std::ptrdiff_t>(pos), count, mb);
      pos += static_cast<std::size_t>(count);
    }
    if (pos != total) throw ParseError("dimension mismatch", f.frame_index);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed record: ") + e.what(), expected_index);
  }
  check_frame(f, h, expected_index);
  return f;
}

}  // namespace

char to_char(MbType t) noexcept {
  switch (t) {
    case MbType::I: return 'I';
    case MbType::P: return 'P';
    case MbType::B: return 'B';
  }
  return '?';
}

char to_char(FrameType t) noexcept {
  switch (t) {
    case FrameType::I: return 'I';
    case FrameType::P: return 'P';
    case FrameType::B: return 'B';
  }
  return '?';
}

bool ComboTable::valid(MbType type, int mode) noexcept {
  switch (type) {
    case MbType::I: return mode >= 0 && mode <= kMaxIMode;
    case MbType::P: return mode >= 0 && mode <= kMaxPMode;
    case MbType::B: return mode >= 0 && mode <= kMaxBMode;
  }
  return false;
}

int ComboTable::index(MbType type, int mode) {
  if (!valid(type, mode))
    throw InputError("no combo index for macroblock type " + std::string(1, to_char(type)) + " mode " +
                     std::to_string(mode));
  switch (type) {
    case MbType::I: return kIBase + mode;
    case MbType::P: return kPBase + mode;
    case MbType::B: return kBBase + mode;
  }
  return 0;
}

void validate_stream(const MetadataStream& stream) {
  check_header(stream.header);
  for (std::size_t i = 0; i < stream.frames.size(); ++i)
    check_frame(stream.frames[i], stream.header, static_cast<std::int64_t>(i));
}

std::string serialize_stream(const MetadataStream& stream) {
  validate_stream(stream);
  std::string out = header_to_json(stream.header).dump();
  out += '\n';
  for (const auto& f : stream.frames) {
    out += frame_to_json(f).dump();
    out += '\n';
  }
  return out;
}

namespace {
std::atomic<std::int64_t> g_stream_reads{0};
}

std::int64_t stream_reads() noexcept { return g_stream_reads.load(); }

MetadataStream parse_stream(std::istream& in) {
  ++g_stream_reads;
  MetadataStream stream;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty metadata container");
  try {
    const json h = json::parse(line);
    if (h.at("format").get<std::string>() != kFormatTag) throw ParseError("not a cova metadata container");
    stream.header.version = h.at("version").get<int>();
    stream.header.codec = h.at("codec").get<std::string>();
    stream.header.width_px = h.at("width").get<int>();
    stream.header.height_px = h.at("height").get<int>();
    stream.header.gop_length = h.at("gop_length").get<int>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed header: ") + e.what());
  }
  check_header(stream.header);

  std::int64_t expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw ParseError("malformed record", expected);
    }
    stream.frames.push_back(frame_from_json(j, stream.header, expected));
    ++expected;
  }
  return stream;
}

void write_stream(const MetadataStream& stream, const std::filesystem::path& path) {
  const std::string text = serialize_stream(stream);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

MetadataStream read_stream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open metadata stream " + path.string());
  return parse_stream(in);
}

std::vector<GoP> split_gops(const MetadataStream& stream) {
  std::vector<GoP> gops;
  const auto& frames = stream.frames;
  if (frames.empty()) return gops;
  if (frames.front().type != FrameType::I) throw StructureError("stream does not start with an I-frame");
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= frames.size(); ++i) {
    if (i == frames.size() || frames[i].type == FrameType::I) {
      gops.push_back(GoP{static_cast<int>(gops.size()), std::span<const FrameMeta>(frames).subspan(begin, i - begin)});
      begin = i;
    }
  }
  return gops;
}

std::vector<int> dependent_frames(const GoP& gop, int k) {
  if (k < 0 || k >= gop.size())
    throw BoundsError("position " + std::to_string(k) + " outside GoP of size " + std::to_string(gop.size()));
  std::vector<int> deps;
  deps.reserve(static_cast<std::size_t>(k) + 1);
  for (int i = 0; i < k; ++i) deps.push_back(i);
  if (gop.frames[static_cast<std::size_t>(k)].type == FrameType::B) {
    for (int i = k + 1; i < gop.size(); ++i) {
      if (gop.frames[static_cast<std::size_t>(i)].type != FrameType::B) {
        deps.push_back(i);
        break;
      }
    }
  }
  return deps;
}

std::vector<Chunk> chunk_at_iframes(const MetadataStream& stream, int chunk_count) {
  if (chunk_count < 1) throw ConfigError("chunk count must be >= 1");
  auto gops = split_gops(stream);
  std::vector<Chunk> chunks;
  if (gops.empty()) return chunks;
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(chunk_count), gops.size());
  const std::size_t base = gops.size() / n;
  const std::size_t extra = gops.size() % n;
  std::size_t next = 0;
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t take = base + (c < extra ? 1 : 0);
    Chunk chunk;
    chunk.chunk_index = static_cast<int>(c);
    chunk.gops.assign(gops.begin() + static_cast<std::ptrdiff_t>(next),
                      gops.begin() + static_cast<std::ptrdiff_t>(next + take));
    next += take;
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

}  // namespace cova
