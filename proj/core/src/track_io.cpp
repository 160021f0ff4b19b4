#include <fstream>
#include <string>

#include "cova/errors.hpp"
#include "cova/tracking.hpp"
#include "json.hpp"

namespace cova {

using nlohmann::json;

namespace {

const char* status_name(TrackStatus s) {
  switch (s) {
    case TrackStatus::Tentative: return "tentative";
    case TrackStatus::Confirmed: return "confirmed";
    case TrackStatus::Dead: return "dead";
  }
  return "dead";
}

TrackStatus parse_status(const std::string& s) {
  if (s == "tentative") return TrackStatus::Tentative;
  if (s == "confirmed") return TrackStatus::Confirmed;
  if (s == "dead") return TrackStatus::Dead;
  throw ParseError("unknown track status '" + s + "'");
}

}  // namespace

void write_tracks(const std::vector<Track>& tracks, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << json{{"format", "cova-tracks"}, {"version", 1}, {"count", tracks.size()}}.dump() << '\n';
  for (const auto& t : tracks) {
    json boxes = json::array();
    for (const auto& b : t.boxes) boxes.push_back({b.x, b.y, b.w, b.h});
    json j{{"id", t.track_id},         {"status", status_name(t.status)}, {"start", t.start_frame},
           {"end", t.end_frame},       {"anchored", t.anchor_assigned},   {"boxes", std::move(boxes)}};
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<Track> read_tracks(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tracks file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty tracks file");
  std::vector<Track> tracks;
  try {
    const json h = json::parse(line);
    if (h.value("format", "") != "cova-tracks") throw ParseError("not a tracks file");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      Track t;
      t.track_id = j.at("id").get<int>();
      t.status = parse_status(j.at("status").get<std::string>());
      t.start_frame = j.at("start").get<std::int64_t>();
      t.end_frame = j.at("end").get<std::int64_t>();
      t.anchor_assigned = j.at("anchored").get<bool>();
      for (const auto& b : j.at("boxes"))
        t.boxes.push_back(Box{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()});
      if (t.end_frame < t.start_frame ||
          static_cast<std::int64_t>(t.boxes.size()) != t.end_frame - t.start_frame + 1)
        throw ParseError("track " + std::to_string(t.track_id) + " has a history that does not cover its span");
      tracks.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed track record: ") + e.what());
  }
  return tracks;
}

}  // namespace cova
