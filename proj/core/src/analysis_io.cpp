#include "cova/analysis_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cova/errors.hpp"
#include "json.hpp"

namespace cova {

using nlohmann::json;

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string serialize_analysis(const StoredAnalysis& stored) {
  const auto& h = stored.header;
  const auto& a = stored.analysis;
  std::string out = json{{"format", "cova-analysis"},
                         {"version", h.version},
                         {"video_id", h.video_id},
                         {"config_hash", h.config_hash},
                         {"width", h.width_px},
                         {"height", h.height_px},
                         {"first_frame", a.first_frame},
                         {"num_frames", a.frame_count()}}
                        .dump();
  out += '\n';
  for (std::int64_t k = 0; k < a.frame_count(); ++k) {
    json objs = json::array();
    for (const auto& o : a.frames[static_cast<std::size_t>(k)])
      objs.push_back({{"id", o.track_id},
                      {"label", o.label},
                      {"box", {o.bbox.x, o.bbox.y, o.bbox.w, o.bbox.h}},
                      {"src", source_name(o.source)}});
    out += json{{"f", a.first_frame + k}, {"objects", std::move(objs)}}.dump();
    out += '\n';
  }
  return out;
}

StoredAnalysis parse_analysis(std::istream& in) {
  StoredAnalysis s;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty analysis file");
  std::int64_t expected_frames = 0;
  try {
    const json h = json::parse(line);
    if (h.value("format", "") != "cova-analysis") throw ParseError("not an analysis file");
    s.header.version = h.at("version").get<int>();
    if (s.header.version != 1) throw ParseError("unsupported analysis version " + std::to_string(s.header.version));
    s.header.video_id = h.at("video_id").get<std::string>();
    s.header.config_hash = h.at("config_hash").get<std::string>();
    s.header.width_px = h.at("width").get<int>();
    s.header.height_px = h.at("height").get<int>();
    s.analysis.first_frame = h.at("first_frame").get<std::int64_t>();
    expected_frames = h.at("num_frames").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed analysis header: ") + e.what());
  }
  std::int64_t next = s.analysis.first_frame;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const auto f = j.at("f").get<std::int64_t>();
      if (f != next) throw ParseError(f > next ? "gap at index " + std::to_string(next) : "non-monotone frame index", f);
      std::vector<AnalyzedObject> objs;
      for (const auto& o : j.at("objects")) {
        const auto& b = o.at("box");
        objs.push_back(AnalyzedObject{o.at("id").get<int>(), o.at("label").get<std::string>(),
                                      Box{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                                          b.at(3).get<double>()},
                                      parse_source(o.at("src").get<std::string>())});
      }
      s.analysis.frames.push_back(std::move(objs));
      ++next;
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed analysis record: ") + e.what(), next);
    }
  }
  if (s.analysis.frame_count() != expected_frames)
    throw ParseError("analysis holds " + std::to_string(s.analysis.frame_count()) + " frames, header says " +
                     std::to_string(expected_frames));
  return s;
}

void write_analysis(const StoredAnalysis& stored, const std::filesystem::path& path) {
  const std::string text = serialize_analysis(stored);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

StoredAnalysis read_analysis(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open analysis " + path.string());
  return parse_analysis(in);
}

}  // namespace cova
