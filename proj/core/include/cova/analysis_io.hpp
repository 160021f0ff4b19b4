#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "cova/propagation.hpp"

namespace cova {

struct AnalysisHeader {
  int version = 1;
  std::string video_id;
  std::string config_hash;  ///< 16 hex digits
  int width_px = 0;
  int height_px = 0;

  friend bool operator==(const AnalysisHeader&, const AnalysisHeader&) = default;
};

struct StoredAnalysis {
  AnalysisHeader header;
  FrameAnalysis analysis;

  friend bool operator==(const StoredAnalysis&, const StoredAnalysis&) = default;
};

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);

/// JSON Lines: one header line, then one line per frame. Output is canonical.
std::string serialize_analysis(const StoredAnalysis& stored);
StoredAnalysis parse_analysis(std::istream& in);
void write_analysis(const StoredAnalysis& stored, const std::filesystem::path& path);
StoredAnalysis read_analysis(const std::filesystem::path& path);

}  // namespace cova
