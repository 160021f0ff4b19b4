#include "cova/query.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "cova/errors.hpp"

namespace cova {

void Region::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!(in_unit(x0) && in_unit(y0) && in_unit(x1) && in_unit(y1)) || !(x0 < x1) || !(y0 < y1))
    throw ConfigError("region must satisfy 0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1");
}

bool Region::contains_center(const Box& box, int width_px, int height_px) const noexcept {
  const double cx = box.center_x() / width_px, cy = box.center_y() / height_px;
  return cx >= x0 && cx <= x1 && cy >= y0 && cy <= y1;
}

Region parse_region(std::string_view text) {
  if (text == "upper-left") return Region::upper_left();
  if (text == "upper-right") return Region::upper_right();
  if (text == "lower-left") return Region::lower_left();
  if (text == "lower-right") return Region::lower_right();
  if (text == "full") return Region::full();
  std::string s(text);
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  Region r;
  std::string extra;
  if (!(in >> r.x0 >> r.y0 >> r.x1 >> r.y1) || (in >> extra))
    throw ConfigError("unknown region '" + std::string(text) + "'");
  r.validate();
  return r;
}

std::string_view kind_name(QueryKind k) noexcept {
  switch (k) {
    case QueryKind::BP: return "bp";
    case QueryKind::CNT: return "cnt";
    case QueryKind::LBP: return "lbp";
    case QueryKind::LCNT: return "lcnt";
  }
  return "bp";
}

QueryKind parse_kind(std::string_view text) {
  std::string s(text);
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto k : {QueryKind::BP, QueryKind::CNT, QueryKind::LBP, QueryKind::LCNT})
    if (s == kind_name(k)) return k;
  throw ConfigError("unknown query kind '" + std::string(text) + "'");
}

void Query::validate() const {
  if (label.empty()) throw ConfigError("query label must not be empty");
  if (is_local(kind) != region.has_value())
    throw ConfigError(is_local(kind) ? "local queries need a region" : "only local queries take a region");
  if (region) region->validate();
}

QueryResult run_query(const FrameAnalysis& analysis, const Query& q, int width_px, int height_px) {
  q.validate();
  QueryResult r;
  r.kind = q.kind;
  r.total_frames = analysis.frame_count();
  std::int64_t total_count = 0;
  bool seen = false;
  for (std::int64_t k = 0; k < analysis.frame_count(); ++k) {
    int count = 0;
    for (const auto& o : analysis.frames[static_cast<std::size_t>(k)]) {
      if (o.label != q.label) continue;
      seen = true;
      if (q.region && !q.region->contains_center(o.bbox, width_px, height_px)) continue;
      ++count;
    }
    if (count > 0 && !is_count(q.kind)) r.frames.push_back(analysis.first_frame + k);
    total_count += count;
  }
  if (is_count(q.kind) && r.total_frames > 0)
    r.average = static_cast<double>(total_count) / static_cast<double>(r.total_frames);
  r.unknown_label = !seen;
  return r;
}

FrameAnalysis ground_truth_analysis(const Scene& scene) {
  FrameAnalysis fa;
  fa.frames.resize(static_cast<std::size_t>(scene.config.num_frames));
  for (const auto& obj : scene.objects)
    for (int t = obj.first_frame; t <= obj.last_frame; ++t)
      fa.frames[static_cast<std::size_t>(t)].push_back(
          AnalyzedObject{obj.object_id, obj.label, obj.at(t).bbox, ObjectSource::GroundTruth});
  return fa;
}

double evaluate(const QueryResult& result, const QueryResult& truth) {
  if (result.total_frames != truth.total_frames)
    throw EvaluationError("frame count mismatch: result covers " + std::to_string(result.total_frames) +
                          " frames, ground truth " + std::to_string(truth.total_frames));
  if (result.kind != truth.kind) throw EvaluationError("query kind mismatch");
  if (is_count(result.kind)) return std::abs(result.average - truth.average);
  if (truth.total_frames == 0) return 1.0;
  const std::set<std::int64_t> predicted(result.frames.begin(), result.frames.end());
  const std::set<std::int64_t> actual(truth.frames.begin(), truth.frames.end());
  std::int64_t wrong = 0;
  for (auto f : predicted)
    if (!actual.contains(f)) ++wrong;
  for (auto f : actual)
    if (!predicted.contains(f)) ++wrong;
  return static_cast<double>(truth.total_frames - wrong) / static_cast<double>(truth.total_frames);
}

}  // namespace cova
