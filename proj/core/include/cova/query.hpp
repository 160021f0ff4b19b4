#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cova/propagation.hpp"
#include "cova/scene.hpp"

namespace cova {

/// Normalized rectangle [x0,x1] x [y0,y1] inside the unit square.
struct Region {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

  void validate() const;
  /// Whether the centre of `box` lies inside the region (bounds inclusive).
  bool contains_center(const Box& box, int width_px, int height_px) const noexcept;

  static Region full() { return {}; }
  static Region upper_left() { return {0.0, 0.0, 0.5, 0.5}; }
  static Region upper_right() { return {0.5, 0.0, 1.0, 0.5}; }
  static Region lower_left() { return {0.0, 0.5, 0.5, 1.0}; }
  static Region lower_right() { return {0.5, 0.5, 1.0, 1.0}; }

  friend bool operator==(const Region&, const Region&) = default;
};

/// "upper-left", "upper-right", "lower-left", "lower-right", "full", or
/// "x0,y0,x1,y1". Throws ConfigError otherwise.
Region parse_region(std::string_view text);

enum class QueryKind : std::uint8_t { BP, CNT, LBP, LCNT };

std::string_view kind_name(QueryKind k) noexcept;
/// Case-insensitive; throws ConfigError for unknown kinds.
QueryKind parse_kind(std::string_view text);
inline bool is_local(QueryKind k) noexcept { return k == QueryKind::LBP || k == QueryKind::LCNT; }
inline bool is_count(QueryKind k) noexcept { return k == QueryKind::CNT || k == QueryKind::LCNT; }

struct Query {
  QueryKind kind = QueryKind::BP;
  std::string label;
  std::optional<Region> region;  ///< required for LBP/LCNT, absent otherwise

  void validate() const;
};

struct QueryResult {
  QueryKind kind = QueryKind::BP;
  std::vector<std::int64_t> frames;  ///< BP/LBP, ascending
  double average = 0.0;              ///< CNT/LCNT
  std::int64_t total_frames = 0;
  bool unknown_label = false;  ///< label never appears in the analysis

  friend bool operator==(const QueryResult&, const QueryResult&) = default;
};

QueryResult run_query(const FrameAnalysis& analysis, const Query& q, int width_px, int height_px);

/// The scene's objects as a FrameAnalysis covering every frame.
FrameAnalysis ground_truth_analysis(const Scene& scene);

/// BP/LBP: fraction of frames classified correctly. CNT/LCNT: absolute
/// difference of the per-frame means. Throws EvaluationError when the two
/// results cover different frame counts or kinds.
double evaluate(const QueryResult& result, const QueryResult& truth);

}  // namespace cova
