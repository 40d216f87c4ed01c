#pragma once

#include "lfcal/calibrate.hpp"
#include "lfcal/image.hpp"
#include "lfcal/pattern.hpp"
#include "lfcal/rectify.hpp"
#include "lfcal/tracks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace lfcal {

// ---------------------------------------------------------------------------
// Number formatting. 17 significant digits round-trip every finite double
// exactly through strtod, which is the losslessness contract of every text
// format below.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline double parse_double(const std::string& token, int line_no) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0' || !std::isfinite(v))
    fail("ParseError", "line " + std::to_string(line_no) + ": expected a finite number, got '" +
                           token + "'");
  return v;
}

inline long parse_int(const std::string& token, int line_no) {
  char* end = nullptr;
  const long v = std::strtol(token.c_str(), &end, 10);
  if (end == token.c_str() || *end != '\0')
    fail("ParseError",
         "line " + std::to_string(line_no) + ": expected an integer, got '" + token + "'");
  return v;
}

/// Splits a text document into whitespace-tokenized lines, dropping blank
/// lines and '#' comments but keeping original line numbers for messages.
struct TokenLine {
  int line_no = 0;
  std::vector<std::string> tokens;
};

inline std::vector<TokenLine> tokenize_lines(const std::string& text) {
  std::vector<TokenLine> lines;
  std::istringstream in(text);
  std::string raw;
  for (int line_no = 1; std::getline(in, raw); ++line_no) {
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::istringstream cells(raw);
    TokenLine line;
    line.line_no = line_no;
    std::string token;
    while (cells >> token) line.tokens.push_back(token);
    if (!line.tokens.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Atomic file writes: content lands under a temporary name in the target
// directory and is renamed into place, so readers never observe a partial
// file and a crashed writer leaves the previous version intact.
// ---------------------------------------------------------------------------

inline void write_file_atomic(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail("IoError", "cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail("IoError", "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail("IoError", "cannot move temporary file into '" + path + "'");
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("IoError", "cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// Calibration files: a line-oriented keyword format holding the full
// light-field calibration and, optionally, the rectification solution.
// ---------------------------------------------------------------------------

struct CalibrationDocument {
  int width = 0;
  int height = 0;
  LightFieldCalibration calibration;

  bool has_rectification = false;
  IntrinsicMatrix k_r;
  Vec3 r_r_rvec = Vec3::Zero();       // rectifying rotation, Rodrigues form
  double t_r_x = 0.0;                 // per-axis one-step baseline
  double t_r_y = 0.0;
  std::vector<Vec3> t_p;              // per-view target translations

  /// Copies the rectification solution out of a freshly computed result.
  void set_rectification(const RectificationResult& rect, const ViewGrid& grid) {
    has_rectification = true;
    k_r = rect.k_r;
    r_r_rvec = matrix_to_rodrigues(rect.r_r);
    t_r_x = rect.t_r_x;
    t_r_y = rect.t_r_y;
    t_p.clear();
    for (int i = 0; i < grid.size(); ++i)
      t_p.push_back(per_view_target_translation(rect.t_r_x, rect.t_r_y, i, grid));
  }
};

inline std::string calibration_to_string(const CalibrationDocument& doc) {
  const LightFieldCalibration& c = doc.calibration;
  c.grid.validate();
  if (static_cast<int>(c.per_view.size()) != c.grid.size() ||
      static_cast<int>(c.poses_rel_reference.size()) != c.grid.size())
    fail("SizeMismatch", "calibration does not cover the full grid");
  if (doc.has_rectification && static_cast<int>(doc.t_p.size()) != c.grid.size())
    fail("SizeMismatch", "rectification block does not cover the full grid");

  std::ostringstream out;
  out << "lfcal-calibration 1\n";
  out << "views " << c.grid.size() << "\n";
  out << "grid " << c.grid.rows_a << " " << c.grid.cols_b << "\n";
  out << "reference " << c.grid.ref_a << " " << c.grid.ref_b << "\n";
  out << "image " << doc.width << " " << doc.height << "\n";
  out << "rms_pnp " << format_double(c.rms_pnp) << "\n";
  for (int i = 0; i < c.grid.size(); ++i) {
    const ViewCalibration& v = c.per_view[i];
    const ViewPose& pose = c.poses_rel_reference[i];
    out << "view " << i << "\n";
    out << "fx " << format_double(v.k.fx) << "\n";
    out << "fy " << format_double(v.k.fy) << "\n";
    out << "cx " << format_double(v.k.cx) << "\n";
    out << "cy " << format_double(v.k.cy) << "\n";
    out << "skew " << format_double(v.k.skew) << "\n";
    out << "k1 " << format_double(v.d.k1) << "\n";
    out << "k2 " << format_double(v.d.k2) << "\n";
    out << "center " << format_double(v.d.center_x) << " " << format_double(v.d.center_y) << "\n";
    out << "rms_mono " << format_double(v.rms_mono) << "\n";
    out << "rvec " << format_double(pose.rvec.x()) << " " << format_double(pose.rvec.y()) << " "
        << format_double(pose.rvec.z()) << "\n";
    out << "tvec " << format_double(pose.tvec.x()) << " " << format_double(pose.tvec.y()) << " "
        << format_double(pose.tvec.z()) << "\n";
  }
  if (doc.has_rectification) {
    out << "rectification\n";
    out << "k_r " << format_double(doc.k_r.fx) << " " << format_double(doc.k_r.fy) << " "
        << format_double(doc.k_r.cx) << " " << format_double(doc.k_r.cy) << " "
        << format_double(doc.k_r.skew) << "\n";
    out << "r_r " << format_double(doc.r_r_rvec.x()) << " " << format_double(doc.r_r_rvec.y())
        << " " << format_double(doc.r_r_rvec.z()) << "\n";
    out << "t_r " << format_double(doc.t_r_x) << " " << format_double(doc.t_r_y) << "\n";
    for (int i = 0; i < c.grid.size(); ++i)
      out << "t_p " << i << " " << format_double(doc.t_p[i].x()) << " "
          << format_double(doc.t_p[i].y()) << " " << format_double(doc.t_p[i].z()) << "\n";
  }
  return out.str();
}

namespace detail {

/// Strict sequential reader over tokenized lines with positional messages.
struct LineCursor {
  const std::vector<TokenLine>& lines;
  size_t next = 0;

  bool done() const { return next >= lines.size(); }

  const TokenLine& peek() const {
    if (done()) fail("ParseError", "unexpected end of file");
    return lines[next];
  }

  /// Consumes one line that must start with `keyword` and carry exactly
  /// `arity` arguments after it.
  const TokenLine& expect(const char* keyword, size_t arity) {
    const TokenLine& line = peek();
    if (line.tokens[0] != keyword || line.tokens.size() != arity + 1)
      fail("ParseError", "line " + std::to_string(line.line_no) + ": expected '" +
                             std::string(keyword) + "' with " + std::to_string(arity) +
                             " value(s)");
    ++next;
    return line;
  }
};

inline Vec3 parse_vec3(const TokenLine& line, size_t offset) {
  return Vec3(parse_double(line.tokens[offset], line.line_no),
              parse_double(line.tokens[offset + 1], line.line_no),
              parse_double(line.tokens[offset + 2], line.line_no));
}

}  // namespace detail

inline CalibrationDocument calibration_from_string(const std::string& text) {
  const std::vector<detail::TokenLine> lines = detail::tokenize_lines(text);
  detail::LineCursor cur{lines};

  {
    const auto& magic = cur.expect("lfcal-calibration", 1);
    if (magic.tokens[1] != "1")
      fail("ParseError", "line " + std::to_string(magic.line_no) +
                             ": unsupported format version '" + magic.tokens[1] + "'");
  }
  CalibrationDocument doc;
  const long views = detail::parse_int(cur.expect("views", 1).tokens[1], 0);
  {
    const auto& grid = cur.expect("grid", 2);
    doc.calibration.grid.rows_a = static_cast<int>(detail::parse_int(grid.tokens[1], grid.line_no));
    doc.calibration.grid.cols_b = static_cast<int>(detail::parse_int(grid.tokens[2], grid.line_no));
    const auto& ref = cur.expect("reference", 2);
    doc.calibration.grid.ref_a = static_cast<int>(detail::parse_int(ref.tokens[1], ref.line_no));
    doc.calibration.grid.ref_b = static_cast<int>(detail::parse_int(ref.tokens[2], ref.line_no));
    doc.calibration.grid.validate();
    if (views != doc.calibration.grid.size())
      fail("ParseError", "line " + std::to_string(grid.line_no) +
                             ": view count does not match the grid dimensions");
    const auto& image = cur.expect("image", 2);
    doc.width = static_cast<int>(detail::parse_int(image.tokens[1], image.line_no));
    doc.height = static_cast<int>(detail::parse_int(image.tokens[2], image.line_no));
    if (doc.width < 1 || doc.height < 1)
      fail("ParseError",
           "line " + std::to_string(image.line_no) + ": image dimensions must be positive");
  }
  {
    const auto& rms = cur.expect("rms_pnp", 1);
    doc.calibration.rms_pnp = detail::parse_double(rms.tokens[1], rms.line_no);
  }

  for (long i = 0; i < views; ++i) {
    const auto& head = cur.expect("view", 1);
    if (detail::parse_int(head.tokens[1], head.line_no) != i)
      fail("ParseError",
           "line " + std::to_string(head.line_no) + ": view blocks must appear in index order");
    ViewCalibration v;
    ViewPose pose;
    auto scalar = [&](const char* key) {
      const auto& line = cur.expect(key, 1);
      return detail::parse_double(line.tokens[1], line.line_no);
    };
    v.k.fx = scalar("fx");
    v.k.fy = scalar("fy");
    v.k.cx = scalar("cx");
    v.k.cy = scalar("cy");
    v.k.skew = scalar("skew");
    v.d.k1 = scalar("k1");
    v.d.k2 = scalar("k2");
    {
      const auto& center = cur.expect("center", 2);
      v.d.center_x = detail::parse_double(center.tokens[1], center.line_no);
      v.d.center_y = detail::parse_double(center.tokens[2], center.line_no);
    }
    v.rms_mono = scalar("rms_mono");
    pose.rvec = detail::parse_vec3(cur.expect("rvec", 3), 1);
    pose.tvec = detail::parse_vec3(cur.expect("tvec", 3), 1);
    doc.calibration.per_view.push_back(v);
    doc.calibration.poses_rel_reference.push_back(pose);
  }

  if (!cur.done()) {
    cur.expect("rectification", 0);
    doc.has_rectification = true;
    {
      const auto& k = cur.expect("k_r", 5);
      doc.k_r.fx = detail::parse_double(k.tokens[1], k.line_no);
      doc.k_r.fy = detail::parse_double(k.tokens[2], k.line_no);
      doc.k_r.cx = detail::parse_double(k.tokens[3], k.line_no);
      doc.k_r.cy = detail::parse_double(k.tokens[4], k.line_no);
      doc.k_r.skew = detail::parse_double(k.tokens[5], k.line_no);
    }
    doc.r_r_rvec = detail::parse_vec3(cur.expect("r_r", 3), 1);
    {
      const auto& t = cur.expect("t_r", 2);
      doc.t_r_x = detail::parse_double(t.tokens[1], t.line_no);
      doc.t_r_y = detail::parse_double(t.tokens[2], t.line_no);
    }
    for (long i = 0; i < views; ++i) {
      const auto& tp = cur.expect("t_p", 4);
      if (detail::parse_int(tp.tokens[1], tp.line_no) != i)
        fail("ParseError",
             "line " + std::to_string(tp.line_no) + ": t_p lines must appear in view order");
      doc.t_p.push_back(detail::parse_vec3(tp, 2));
    }
  }
  if (!cur.done())
    fail("ParseError",
         "line " + std::to_string(cur.peek().line_no) + ": trailing content after the document");
  return doc;
}

inline void write_calibration(const std::string& path, const CalibrationDocument& doc) {
  write_file_atomic(path, calibration_to_string(doc));
}

inline CalibrationDocument read_calibration(const std::string& path) {
  return calibration_from_string(read_file(path));
}

// ---------------------------------------------------------------------------
// Track files: one observation per line, "track_id view_index x y".
// Tracks missing some views round-trip through the `present` mask.
// ---------------------------------------------------------------------------

inline std::string tracks_to_string(const std::vector<Track>& tracks) {
  std::ostringstream out;
  out << "# track_id view_index x y\n";
  for (const Track& t : tracks)
    for (size_t view = 0; view < t.obs.size(); ++view) {
      if (!t.present.empty() && !t.present[view]) continue;
      out << t.id << " " << view << " " << format_double(t.obs[view].x) << " "
          << format_double(t.obs[view].y) << "\n";
    }
  return out.str();
}

inline std::vector<Track> tracks_from_string(const std::string& text, int n_views) {
  if (n_views < 1) fail("EmptyInput", "track files need a positive view count");
  std::map<long, Track> by_id;
  for (const auto& line : detail::tokenize_lines(text)) {
    if (line.tokens.size() != 4)
      fail("ParseError", "line " + std::to_string(line.line_no) +
                             ": expected 'track_id view_index x y'");
    const long id = detail::parse_int(line.tokens[0], line.line_no);
    const long view = detail::parse_int(line.tokens[1], line.line_no);
    if (id < 0)
      fail("ParseError", "line " + std::to_string(line.line_no) + ": negative track id");
    if (view < 0 || view >= n_views)
      fail("ParseError", "line " + std::to_string(line.line_no) + ": view index " +
                             std::to_string(view) + " outside [0, " + std::to_string(n_views) +
                             ")");
    Track& t = by_id[id];
    if (t.obs.empty()) {
      t.id = static_cast<int>(id);
      t.obs.resize(n_views);
      t.present.assign(n_views, false);
    }
    if (t.present[view])
      fail("ParseError", "line " + std::to_string(line.line_no) + ": duplicate observation for track " +
                             std::to_string(id) + " view " + std::to_string(view));
    t.obs[view].x = detail::parse_double(line.tokens[2], line.line_no);
    t.obs[view].y = detail::parse_double(line.tokens[3], line.line_no);
    t.present[view] = true;
  }
  std::vector<Track> tracks;
  tracks.reserve(by_id.size());
  for (auto& [id, t] : by_id) {
    // A full track drops the mask, matching how the matcher emits them.
    if (t.complete()) t.present.clear();
    tracks.push_back(std::move(t));
  }
  return tracks;
}

inline void write_tracks(const std::string& path, const std::vector<Track>& tracks) {
  write_file_atomic(path, tracks_to_string(tracks));
}

inline std::vector<Track> read_tracks(const std::string& path, int n_views) {
  return tracks_from_string(read_file(path), n_views);
}

// ---------------------------------------------------------------------------
// Observation files: one checkerboard corner per line,
// "frame view corner_index x y". Corner indices within one (frame, view)
// block must form 0..K-1; blocks may be interleaved.
// ---------------------------------------------------------------------------

inline std::string observations_to_string(const std::vector<PatternObservation>& obs) {
  std::ostringstream out;
  out << "# frame view corner_index x y\n";
  for (const PatternObservation& o : obs)
    for (size_t c = 0; c < o.corners.size(); ++c)
      out << o.frame_index << " " << o.view_index << " " << c << " "
          << format_double(o.corners[c].x) << " " << format_double(o.corners[c].y) << "\n";
  return out.str();
}

inline std::vector<PatternObservation> observations_from_string(const std::string& text) {
  std::map<std::pair<long, long>, std::map<long, PixelPoint>> groups;
  for (const auto& line : detail::tokenize_lines(text)) {
    if (line.tokens.size() != 5)
      fail("ParseError",
           "line " + std::to_string(line.line_no) + ": expected 'frame view corner_index x y'");
    const long frame = detail::parse_int(line.tokens[0], line.line_no);
    const long view = detail::parse_int(line.tokens[1], line.line_no);
    const long corner = detail::parse_int(line.tokens[2], line.line_no);
    if (frame < 0 || view < 0 || corner < 0)
      fail("ParseError", "line " + std::to_string(line.line_no) + ": indices must be non-negative");
    const PixelPoint p{detail::parse_double(line.tokens[3], line.line_no),
                       detail::parse_double(line.tokens[4], line.line_no)};
    if (!groups[{frame, view}].emplace(corner, p).second)
      fail("ParseError", "line " + std::to_string(line.line_no) + ": duplicate corner " +
                             std::to_string(corner) + " in frame " + std::to_string(frame) +
                             " view " + std::to_string(view));
  }
  std::vector<PatternObservation> result;
  for (const auto& [key, corners] : groups) {
    PatternObservation o;
    o.frame_index = static_cast<int>(key.first);
    o.view_index = static_cast<int>(key.second);
    long expected = 0;
    for (const auto& [index, p] : corners) {
      if (index != expected)
        fail("ParseError", "frame " + std::to_string(key.first) + " view " +
                               std::to_string(key.second) + ": corner indices must form 0.." +
                               std::to_string(corners.size() - 1) + " (missing " +
                               std::to_string(expected) + ")");
      ++expected;
      o.corners.push_back(p);
    }
    result.push_back(std::move(o));
  }
  return result;
}

inline void write_observations(const std::string& path,
                               const std::vector<PatternObservation>& obs) {
  write_file_atomic(path, observations_to_string(obs));
}

inline std::vector<PatternObservation> read_observations(const std::string& path) {
  return observations_from_string(read_file(path));
}

// ---------------------------------------------------------------------------
// Lookup-table files: magic "LFLUT1", little-endian u32 width and height,
// then height*width little-endian float32 pairs (src_x, src_y), row-major
// over destination pixels, sentinel (-1, -1) for unmapped pixels. The file
// is exactly 14 + 8*w*h bytes.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32(const std::string& in, size_t at) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(in[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + 3])) << 24;
}

inline void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u32(out, bits);
}

inline float get_f32(const std::string& in, size_t at) {
  const std::uint32_t bits = get_u32(in, at);
  float v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace detail

inline std::string lut_to_bytes(const LookupTable& lut) {
  if (lut.width < 1 || lut.height < 1 ||
      lut.map.size() != static_cast<size_t>(lut.width) * lut.height)
    fail("SizeMismatch", "lookup table dimensions do not match its map");
  std::string out;
  out.reserve(14 + 8 * lut.map.size());
  out += "LFLUT1";
  detail::put_u32(out, static_cast<std::uint32_t>(lut.width));
  detail::put_u32(out, static_cast<std::uint32_t>(lut.height));
  for (const PixelPoint& p : lut.map) {
    detail::put_f32(out, static_cast<float>(p.x));
    detail::put_f32(out, static_cast<float>(p.y));
  }
  return out;
}

inline LookupTable lut_from_bytes(const std::string& bytes) {
  if (bytes.size() < 14 || bytes.compare(0, 6, "LFLUT1") != 0)
    fail("ParseError", "not a lookup-table file (bad magic)");
  LookupTable lut;
  lut.width = static_cast<int>(detail::get_u32(bytes, 6));
  lut.height = static_cast<int>(detail::get_u32(bytes, 10));
  if (lut.width < 1 || lut.height < 1)
    fail("ParseError", "lookup-table dimensions must be positive");
  const size_t expected = 14 + 8 * static_cast<size_t>(lut.width) * lut.height;
  if (bytes.size() != expected)
    fail("ParseError", "lookup-table payload is " + std::to_string(bytes.size()) +
                           " bytes, expected " + std::to_string(expected));
  lut.map.resize(static_cast<size_t>(lut.width) * lut.height);
  for (size_t i = 0; i < lut.map.size(); ++i) {
    lut.map[i].x = detail::get_f32(bytes, 14 + 8 * i);
    lut.map[i].y = detail::get_f32(bytes, 14 + 8 * i + 4);
  }
  return lut;
}

inline void write_lut(const std::string& path, const LookupTable& lut) {
  write_file_atomic(path, lut_to_bytes(lut));
}

inline LookupTable read_lut(const std::string& path) { return lut_from_bytes(read_file(path)); }

// ---------------------------------------------------------------------------
// Images: binary PGM (P5, one channel) and PPM (P6, three channels) with
// maxval 255, the zero-dependency bit-exact fixture formats. Image carries
// doubles; writing rounds and clamps to [0, 255], so byte values round-trip
// exactly.
// ---------------------------------------------------------------------------

inline std::string image_to_bytes(const Image& img) {
  if (img.width < 1 || img.height < 1 || (img.channels != 1 && img.channels != 3) ||
      img.data.size() != static_cast<size_t>(img.width) * img.height * img.channels)
    fail("SizeMismatch", "image dimensions do not match its pixel buffer");
  std::ostringstream head;
  head << (img.channels == 1 ? "P5" : "P6") << "\n" << img.width << " " << img.height << "\n255\n";
  std::string out = head.str();
  out.reserve(out.size() + img.data.size());
  for (double v : img.data)
    out.push_back(static_cast<char>(
        static_cast<std::uint8_t>(std::lround(std::min(std::max(v, 0.0), 255.0)))));
  return out;
}

inline Image image_from_bytes(const std::string& bytes) {
  size_t at = 0;
  auto next_token = [&]() -> std::string {
    // Header tokens are separated by whitespace; '#' starts a comment that
    // runs to the end of the line.
    while (at < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[at]))) {
        ++at;
      } else if (bytes[at] == '#') {
        while (at < bytes.size() && bytes[at] != '\n') ++at;
      } else {
        break;
      }
    }
    const size_t start = at;
    while (at < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[at]))) ++at;
    if (start == at) fail("ParseError", "truncated image header");
    return bytes.substr(start, at - start);
  };

  const std::string magic = next_token();
  if (magic != "P5" && magic != "P6") fail("ParseError", "not a P5/P6 image (bad magic)");
  const int channels = magic == "P5" ? 1 : 3;
  const int width = static_cast<int>(detail::parse_int(next_token(), 0));
  const int height = static_cast<int>(detail::parse_int(next_token(), 0));
  const long maxval = detail::parse_int(next_token(), 0);
  if (width < 1 || height < 1) fail("ParseError", "image dimensions must be positive");
  if (maxval != 255) fail("ParseError", "only maxval 255 images are supported");
  ++at;  // the single whitespace byte after maxval
  Image img(width, height, channels);
  if (bytes.size() - at != img.data.size())
    fail("ParseError", "image payload is " + std::to_string(bytes.size() - at) +
                           " bytes, expected " + std::to_string(img.data.size()));
  for (size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = static_cast<double>(static_cast<unsigned char>(bytes[at + i]));
  return img;
}

inline void write_image(const std::string& path, const Image& img) {
  write_file_atomic(path, image_to_bytes(img));
}

inline Image read_image(const std::string& path) { return image_from_bytes(read_file(path)); }

}  // namespace lfcal
