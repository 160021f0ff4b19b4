#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cova/geometry.hpp"

namespace cova {

inline constexpr int kMacroblockSize = 16;
inline constexpr int kMaxMvComponent = 2048;
inline constexpr int kMaxPartitionMode = 5;

enum class MbType : std::uint8_t { I = 0, P = 1, B = 2 };
enum class FrameType : std::uint8_t { I = 0, P = 1, B = 2 };

char to_char(MbType t) noexcept;
char to_char(FrameType t) noexcept;

/// Offset to the reference block, quarter-pixel units.
struct MotionVector {
  int dx = 0;
  int dy = 0;

  bool is_zero() const noexcept { return dx == 0 && dy == 0; }
  friend bool operator==(const MotionVector&, const MotionVector&) = default;
};

/// The (macroblock type, partition mode) -> embedding index table.
///
/// Twelve combinations: I x {0}, P x {0..5}, B x {0..4}. The mapping is kept in
/// this one place so a codec-specific table can be swapped in.
struct ComboTable {
  static constexpr int kSize = 12;
  static constexpr int kIBase = 0;
  static constexpr int kPBase = 1;
  static constexpr int kBBase = 7;
  static constexpr int kMaxIMode = 0;
  static constexpr int kMaxPMode = 5;
  static constexpr int kMaxBMode = 4;

  static bool valid(MbType type, int mode) noexcept;
  /// Throws InputError for combinations outside the table.
  static int index(MbType type, int mode);
};

struct MacroblockMeta {
  MbType type = MbType::I;
  std::uint8_t partition_mode = 0;
  MotionVector mv{};

  int combo_index() const { return ComboTable::index(type, partition_mode); }
  friend bool operator==(const MacroblockMeta&, const MacroblockMeta&) = default;
};

struct FrameMeta {
  std::int64_t frame_index = 0;
  FrameType type = FrameType::I;
  int gop_index = 0;
  Grid<MacroblockMeta> grid;

  friend bool operator==(const FrameMeta&, const FrameMeta&) = default;
};

struct StreamHeader {
  int version = 1;
  std::string codec = "synthetic-h264";
  int width_px = 0;
  int height_px = 0;
  int gop_length = 0;

  int mb_cols() const noexcept { return width_px / kMacroblockSize; }
  int mb_rows() const noexcept { return height_px / kMacroblockSize; }
  friend bool operator==(const StreamHeader&, const StreamHeader&) = default;
};

struct MetadataStream {
  StreamHeader header;
  std::vector<FrameMeta> frames;

  friend bool operator==(const MetadataStream&, const MetadataStream&) = default;
};

/// A view over one group of pictures inside an immutable stream.
struct GoP {
  int gop_index = 0;
  std::span<const FrameMeta> frames;

  std::int64_t first_frame() const { return frames.front().frame_index; }
  std::int64_t last_frame() const { return frames.back().frame_index; }
  int size() const noexcept { return static_cast<int>(frames.size()); }
  bool contains(std::int64_t frame) const { return frame >= first_frame() && frame <= last_frame(); }
};

/// A run of whole GoPs processed by one worker.
struct Chunk {
  int chunk_index = 0;
  std::vector<GoP> gops;

  std::int64_t first_frame() const { return gops.front().first_frame(); }
  std::int64_t last_frame() const { return gops.back().last_frame(); }
  std::int64_t frame_count() const { return last_frame() - first_frame() + 1; }
};

/// Checks every stream invariant; throws ParseError naming the frame on failure.
void validate_stream(const MetadataStream& stream);

/// JSON Lines container: one header line, then one line per frame with a
/// run-length-encoded macroblock grid. Output is canonical (sorted keys).
std::string serialize_stream(const MetadataStream& stream);
MetadataStream parse_stream(std::istream& in);

void write_stream(const MetadataStream& stream, const std::filesystem::path& path);
MetadataStream read_stream(const std::filesystem::path& path);
/// Number of metadata containers parsed by this process so far.
std::int64_t stream_reads() noexcept;

std::vector<GoP> split_gops(const MetadataStream& stream);

/// Positions inside `gop` that must be decoded before position `k` can be.
/// I/P frames depend on every earlier position; a B-frame additionally needs
/// the next reference frame. Result is sorted ascending.
std::vector<int> dependent_frames(const GoP& gop, int k);

/// Groups whole GoPs into at most `chunk_count` contiguous chunks whose sizes
/// differ by at most one GoP, earlier chunks taking the remainder.
std::vector<Chunk> chunk_at_iframes(const MetadataStream& stream, int chunk_count);

}  // namespace cova
