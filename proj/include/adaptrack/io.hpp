#pragma once

// Plain-text file formats. Input files are line-delimited and use either
// whitespace or commas between fields; one file must stick to one
// delimiter. Blank lines and lines starting with '#' are ignored. All
// writers emit single-space separated fields.
//
//   detections: id frame x y w h score F f_1..f_F C c_1..c_C
//   shots:      shot_id start_frame end_frame
//   tracklets:  tracklet_id shot_id n det_1..det_n
//   trajectories: identity tracklet_1..tracklet_k
//   assignments:  detection_id identity
//   ground truth: detection_id identity

#include "adaptrack/constraints.hpp"
#include "adaptrack/core.hpp"
#include "adaptrack/linker.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace adaptrack::io {

enum class Delimiter { whitespace, comma };

/// Tokenizes line-delimited records and enforces a single delimiter per
/// file.
class RecordReader {
 public:
  RecordReader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  /// Next non-empty record, or nullopt at end of input.
  std::optional<std::vector<std::string>> next() {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      const Delimiter mode = line.find(',') != std::string::npos ? Delimiter::comma : Delimiter::whitespace;
      if (!delim_) {
        delim_ = mode;
      } else if (*delim_ != mode) {
        fail("mixed delimiters");
      }
      return mode == Delimiter::comma ? split_comma(line) : split_ws(line);
    }
    return std::nullopt;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::validation, source_ + ":" + std::to_string(line_no_) + ": " + what);
  }

  std::size_t line() const { return line_no_; }

 private:
  static std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    for (std::string tok; ss >> tok;) out.push_back(tok);
    return out;
  }

  std::vector<std::string> split_comma(const std::string& line) const {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = line.find(',', start);
      std::string field = line.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
      const auto b = field.find_first_not_of(" \t");
      const auto e = field.find_last_not_of(" \t");
      field = b == std::string::npos ? std::string() : field.substr(b, e - b + 1);
      if (field.empty() || field.find_first_of(" \t") != std::string::npos) fail("mixed delimiters");
      out.push_back(field);
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    return out;
  }

  std::istream& is_;
  std::string source_;
  std::size_t line_no_ = 0;
  std::optional<Delimiter> delim_;
};

namespace detail {

inline long long to_int(const RecordReader& r, const std::string& s) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  r.fail("expected integer, got '" + s + "'");
}

inline double to_double(const RecordReader& r, const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  r.fail("expected number, got '" + s + "'");
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

inline std::vector<Detection> read_detections(std::istream& is, const std::string& source = "detections") {
  RecordReader r(is, source);
  std::vector<Detection> out;
  while (auto rec = r.next()) {
    const auto& f = *rec;
    if (f.size() < 8) r.fail("detection record needs at least 8 fields");
    Detection d;
    d.id = static_cast<int>(detail::to_int(r, f[0]));
    d.frame = static_cast<int>(detail::to_int(r, f[1]));
    d.bbox = {detail::to_double(r, f[2]), detail::to_double(r, f[3]), detail::to_double(r, f[4]),
              detail::to_double(r, f[5])};
    d.score = detail::to_double(r, f[6]);
    const long long fd = detail::to_int(r, f[7]);
    if (fd < 0 || f.size() < 9 + static_cast<std::size_t>(fd)) r.fail("feature count does not match F");
    d.feature.resize(fd);
    for (long long i = 0; i < fd; ++i) d.feature(i) = detail::to_double(r, f[8 + static_cast<std::size_t>(i)]);
    const std::size_t cpos = 8 + static_cast<std::size_t>(fd);
    const long long cd = detail::to_int(r, f[cpos]);
    if (cd < 0 || f.size() != cpos + 1 + static_cast<std::size_t>(cd)) r.fail("context count does not match C");
    d.context_feature.resize(cd);
    for (long long i = 0; i < cd; ++i) d.context_feature(i) = detail::to_double(r, f[cpos + 1 + static_cast<std::size_t>(i)]);
    out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<Shot> read_shots(std::istream& is, const std::string& source = "shots") {
  RecordReader r(is, source);
  std::vector<Shot> out;
  while (auto rec = r.next()) {
    if (rec->size() != 3) r.fail("shot record needs 3 fields");
    out.push_back({static_cast<int>(detail::to_int(r, (*rec)[0])), static_cast<int>(detail::to_int(r, (*rec)[1])),
                   static_cast<int>(detail::to_int(r, (*rec)[2]))});
  }
  return out;
}

/// detection_id -> integer label (ground truth or identity assignment).
inline std::map<int, int> read_labels(std::istream& is, const std::string& source = "labels") {
  RecordReader r(is, source);
  std::map<int, int> out;
  while (auto rec = r.next()) {
    if (rec->size() != 2) r.fail("label record needs 2 fields");
    const int id = static_cast<int>(detail::to_int(r, (*rec)[0]));
    if (!out.emplace(id, static_cast<int>(detail::to_int(r, (*rec)[1]))).second) r.fail("duplicate id");
  }
  return out;
}

/// Tracklets; frames are filled from the sequence.
inline std::vector<Tracklet> read_tracklets(std::istream& is, const Sequence& seq,
                                            const std::string& source = "tracklets") {
  RecordReader r(is, source);
  std::vector<Tracklet> out;
  while (auto rec = r.next()) {
    const auto& f = *rec;
    if (f.size() < 3) r.fail("tracklet record needs at least 3 fields");
    Tracklet t;
    t.tracklet_id = static_cast<int>(detail::to_int(r, f[0]));
    t.shot_id = static_cast<int>(detail::to_int(r, f[1]));
    const long long n = detail::to_int(r, f[2]);
    if (n < 1 || f.size() != 3 + static_cast<std::size_t>(n)) r.fail("tracklet length does not match n");
    for (long long i = 0; i < n; ++i) {
      const int id = static_cast<int>(detail::to_int(r, f[3 + static_cast<std::size_t>(i)]));
      if (!seq.contains(id)) r.fail("unknown detection id " + std::to_string(id));
      t.detections.push_back(id);
      t.frames.push_back(seq.detection(id).frame);
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<Trajectory> read_trajectories(std::istream& is, const std::string& source = "trajectories") {
  RecordReader r(is, source);
  std::vector<Trajectory> out;
  while (auto rec = r.next()) {
    Trajectory t;
    t.identity = static_cast<int>(detail::to_int(r, (*rec)[0]));
    for (std::size_t i = 1; i < rec->size(); ++i) t.tracklet_ids.push_back(static_cast<int>(detail::to_int(r, (*rec)[i])));
    out.push_back(std::move(t));
  }
  return out;
}

inline void write_detections(std::ostream& os, const std::vector<Detection>& dets) {
  for (const auto& d : dets) {
    os << d.id << ' ' << d.frame << ' ' << detail::fmt(d.bbox.x) << ' ' << detail::fmt(d.bbox.y) << ' '
       << detail::fmt(d.bbox.w) << ' ' << detail::fmt(d.bbox.h) << ' ' << detail::fmt(d.score) << ' '
       << d.feature.size();
    for (Eigen::Index i = 0; i < d.feature.size(); ++i) os << ' ' << detail::fmt(d.feature(i));
    os << ' ' << d.context_feature.size();
    for (Eigen::Index i = 0; i < d.context_feature.size(); ++i) os << ' ' << detail::fmt(d.context_feature(i));
    os << '\n';
  }
}

inline void write_shots(std::ostream& os, const std::vector<Shot>& shots) {
  for (const auto& s : shots) os << s.shot_id << ' ' << s.start_frame << ' ' << s.end_frame << '\n';
}

inline void write_labels(std::ostream& os, const std::map<int, int>& labels) {
  for (const auto& [id, label] : labels) os << id << ' ' << label << '\n';
}

inline void write_tracklets(std::ostream& os, const std::vector<Tracklet>& tracks) {
  for (const auto& t : tracks) {
    os << t.tracklet_id << ' ' << t.shot_id << ' ' << t.size();
    for (int id : t.detections) os << ' ' << id;
    os << '\n';
  }
}

inline void write_trajectories(std::ostream& os, const std::vector<Trajectory>& trajs) {
  for (const auto& t : trajs) {
    os << t.identity;
    for (int id : t.tracklet_ids) os << ' ' << id;
    os << '\n';
  }
}

/// Sections POS, NEG, TRIPLET, TRACKLET_POS, TRACKLET_NEG; each header line
/// carries the record count.
inline void write_constraints(std::ostream& os, const ConstraintSet& cs) {
  os << "POS " << cs.positives.size() << '\n';
  for (const auto& [a, b] : cs.positives) os << a << ' ' << b << '\n';
  os << "NEG " << cs.negatives.size() << '\n';
  for (const auto& [a, b] : cs.negatives) os << a << ' ' << b << '\n';
  os << "TRIPLET " << cs.triplets.size() << '\n';
  for (const auto& t : cs.triplets) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "TRACKLET_POS " << cs.tracklet_pos.size() << '\n';
  for (const auto& [a, b] : cs.tracklet_pos) os << a << ' ' << b << '\n';
  os << "TRACKLET_NEG " << cs.tracklet_neg.size() << '\n';
  for (const auto& [a, b] : cs.tracklet_neg) os << a << ' ' << b << '\n';
}

inline ConstraintSet read_constraints(std::istream& is) {
  ConstraintSet cs;
  std::string section;
  std::size_t count = 0;
  while (is >> section >> count) {
    for (std::size_t i = 0; i < count; ++i) {
      int a = 0, b = 0, c = 0;
      if (section == "TRIPLET") {
        if (!(is >> a >> b >> c)) throw Error(ErrorKind::io, "constraint dump: truncated TRIPLET section");
        cs.triplets.push_back({a, b, c});
        continue;
      }
      if (!(is >> a >> b)) throw Error(ErrorKind::io, "constraint dump: truncated " + section + " section");
      if (section == "POS") cs.positives.push_back({a, b});
      else if (section == "NEG") cs.negatives.push_back({a, b});
      else if (section == "TRACKLET_POS") cs.tracklet_pos.insert({a, b});
      else if (section == "TRACKLET_NEG") cs.tracklet_neg.insert({a, b});
      else throw Error(ErrorKind::io, "constraint dump: unknown section " + section);
    }
  }
  return cs;
}

inline void write_loss_trace(std::ostream& os, const std::vector<double>& epoch_loss) {
  os << "epoch,mean_loss\n";
  for (std::size_t e = 0; e < epoch_loss.size(); ++e) os << e + 1 << ',' << detail::fmt(epoch_loss[e]) << '\n';
}

struct PurityPoint {
  std::size_t num_clusters = 0;
  double weighted_purity = 0.0;
};

inline void write_purity_curve(std::ostream& os, const std::vector<PurityPoint>& curve) {
  os << "num_clusters,weighted_purity\n";
  for (const auto& p : curve) os << p.num_clusters << ',' << detail::fmt(p.weighted_purity) << '\n';
}

inline std::vector<PurityPoint> read_purity_curve(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header.rfind("num_clusters", 0) != 0) {
    throw Error(ErrorKind::io, "purity curve: missing header");
  }
  RecordReader r(is, "purity curve");
  std::vector<PurityPoint> out;
  while (auto rec = r.next()) {
    if (rec->size() != 2) r.fail("purity record needs 2 fields");
    out.push_back({static_cast<std::size_t>(detail::to_int(r, (*rec)[0])), detail::to_double(r, (*rec)[1])});
  }
  return out;
}

}  // namespace adaptrack::io
