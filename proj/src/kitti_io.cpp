#include "lst/kitti_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lst/error.hpp"

namespace lst {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

std::string read_bytes(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return std::move(ss).str();
}

void write_bytes(const fs::path& path, const void* data, std::size_t size) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!f) throw DataError("short write to '" + path.string() + "'");
}

std::vector<float> read_floats(const fs::path& path, std::size_t record) {
  const std::string bytes = read_bytes(path);
  const std::size_t rec_bytes = record * sizeof(float);
  if (bytes.size() % rec_bytes != 0)
    throw FormatError(fmt::format("'{}': size {} is not a multiple of {} bytes", path.string(),
                                  bytes.size(), rec_bytes));
  std::vector<float> out(bytes.size() / sizeof(float));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!std::isfinite(out[i]))
      throw FormatError(fmt::format("'{}': non-finite value in record {}", path.string(), i / record));
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::optional<double> to_double(std::string_view tok) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    fn(std::string_view(text).substr(pos, end - pos), line_no);
    pos = end + 1;
  }
}

}  // namespace

void write_text_file(const fs::path& path, std::string_view text) { write_bytes(path, text.data(), text.size()); }

std::string read_text_file(const fs::path& path) { return read_bytes(path); }

PointCloud read_point_bin(const fs::path& path) {
  const auto raw = read_floats(path, 4);
  PointCloud cloud(raw.size() / 4);
  for (std::size_t i = 0; i < cloud.size(); ++i)
    cloud[i] = {raw[4 * i], raw[4 * i + 1], raw[4 * i + 2], raw[4 * i + 3]};
  return cloud;
}

void write_point_bin(const fs::path& path, const PointCloud& cloud) {
  std::vector<float> raw;
  raw.reserve(cloud.size() * 4);
  for (const Point3& p : cloud) {
    raw.push_back(static_cast<float>(p.x));
    raw.push_back(static_cast<float>(p.y));
    raw.push_back(static_cast<float>(p.z));
    raw.push_back(static_cast<float>(p.intensity));
  }
  write_bytes(path, raw.data(), raw.size() * sizeof(float));
}

PPScores read_pp_bin(const fs::path& path) {
  const auto raw = read_floats(path, 1);
  return PPScores(raw.begin(), raw.end());
}

void write_pp_bin(const fs::path& path, const PPScores& pp) {
  std::vector<float> raw(pp.begin(), pp.end());
  write_bytes(path, raw.data(), raw.size() * sizeof(float));
}

std::string format_label_line(const LabeledBox& lb) {
  const Box3D& b = lb.box;
  std::string line = fmt::format("{} 0.00 0 -10.00 -1.00 -1.00 -1.00 -1.00 {:.4f} {:.4f} {:.4f} {:.4f} {:.4f} {:.4f} {:.4f}",
                                 kDynamicClass, b.height, b.width, b.length, b.cx, b.cy, b.cz,
                                 normalize_angle(b.yaw));
  if (lb.score) line += fmt::format(" {:.4f}", *lb.score);
  return line;
}

LabeledBox parse_label_line(std::string_view line, std::size_t line_no) {
  const auto tok = split_ws(line);
  if (tok.size() != 15 && tok.size() != 16)
    throw FormatError(fmt::format("line {}: expected 15 or 16 fields, got {}", line_no, tok.size()));
  std::array<double, 15> v{};
  for (std::size_t i = 1; i < tok.size(); ++i) {
    const auto d = to_double(tok[i]);
    if (!d) throw FormatError(fmt::format("line {}: field {} ('{}') is not a number", line_no, i + 1, tok[i]));
    v[i - 1] = *d;
  }
  LabeledBox lb;
  lb.box.height = v[7];
  lb.box.width = v[8];
  lb.box.length = v[9];
  lb.box.cx = v[10];
  lb.box.cy = v[11];
  lb.box.cz = v[12];
  lb.box.yaw = normalize_angle(v[13]);
  if (!is_valid(lb.box)) throw FormatError(fmt::format("line {}: box dimensions must be positive", line_no));
  if (tok.size() == 16) {
    if (v[14] < 0.0 || v[14] > 1.0) throw FormatError(fmt::format("line {}: score outside [0, 1]", line_no));
    lb.score = v[14];
  }
  return lb;
}

std::vector<LabeledBox> read_label_file(const fs::path& path) {
  const std::string text = read_bytes(path);
  std::vector<LabeledBox> out;
  try {
    for_each_line(text, [&](std::string_view line, std::size_t n) {
      if (!is_blank(line)) out.push_back(parse_label_line(line, n));
    });
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return out;
}

void write_label_file(const fs::path& path, const std::vector<LabeledBox>& labels) {
  std::string text;
  for (const auto& lb : labels) {
    text += format_label_line(lb);
    text += '\n';
  }
  write_text_file(path, text);
}

LabelSet read_label_dir(const fs::path& dir, int round) {
  if (!fs::is_directory(dir)) throw DataError("label directory '" + dir.string() + "' does not exist");
  LabelSet out;
  out.round = round;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".txt") continue;
    out.samples[e.path().stem().string()] = read_label_file(e.path());
  }
  return out;
}

void write_label_dir(const fs::path& dir, const LabelSet& labels) {
  fs::create_directories(dir);
  for (const auto& [id, boxes] : labels.samples) write_label_file(dir / (id + ".txt"), boxes);
}

std::vector<Pose> read_pose_file(const fs::path& path) {
  const std::string text = read_bytes(path);
  std::vector<Pose> out;
  for_each_line(text, [&](std::string_view line, std::size_t n) {
    if (is_blank(line)) return;
    const auto tok = split_ws(line);
    if (tok.size() != 16)
      throw FormatError(fmt::format("{}: line {}: expected 16 values, got {}", path.string(), n, tok.size()));
    std::array<double, 16> m{};
    for (std::size_t i = 0; i < 16; ++i) {
      const auto d = to_double(tok[i]);
      if (!d) throw FormatError(fmt::format("{}: line {}: value {} is not a number", path.string(), n, i + 1));
      m[i] = *d;
    }
    constexpr std::array<double, 4> kLastRow{0, 0, 0, 1};
    for (std::size_t c = 0; c < 4; ++c)
      if (std::abs(m[12 + c] - kLastRow[c]) > 1e-9)
        throw FormatError(fmt::format("{}: line {}: last row must be 0 0 0 1", path.string(), n));
    Pose p;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) p.rotation(r, c) = m[static_cast<std::size_t>(4 * r + c)];
      p.translation(r) = m[static_cast<std::size_t>(4 * r + 3)];
    }
    if (!p.is_rigid(1e-4)) throw FormatError(fmt::format("{}: line {}: transform is not rigid", path.string(), n));
    out.push_back(p);
  });
  return out;
}

void write_pose_file(const fs::path& path, const std::vector<Pose>& poses) {
  std::string text;
  for (const Pose& p : poses) {
    for (int r = 0; r < 3; ++r)
      text += fmt::format("{} {} {} {} ", p.rotation(r, 0), p.rotation(r, 1), p.rotation(r, 2), p.translation(r));
    text += "0 0 0 1\n";
  }
  write_text_file(path, text);
}

bool is_valid_sample_id(std::string_view id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::vector<std::string> SampleLayout::sample_ids() const {
  const fs::path dir = points_dir();
  if (!fs::is_directory(dir)) throw DataError("data root '" + root_.string() + "' has no points/ directory");
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".bin") continue;
    const std::string id = e.path().stem().string();
    if (!is_valid_sample_id(id)) throw DataError("invalid sample id '" + id + "' in " + dir.string());
    ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

TraversalSet SampleLayout::load_traversal_set(const std::string& id) const {
  TraversalSet ts;
  ts.sample_id = id;
  ts.reference = read_point_bin(points(id));
  if (!fs::exists(poses(id))) throw DataError("sample '" + id + "': missing pose file");
  const auto poses_v = read_pose_file(poses(id));
  if (poses_v.size() < 2) throw DataError("sample '" + id + "': pose file needs a reference and >= 1 traversal");
  const Pose world_to_ref = poses_v[0].inverse();
  for (std::size_t k = 1; k < poses_v.size(); ++k) {
    const fs::path tp = traversal(id, k);
    if (!fs::exists(tp)) throw DataError("sample '" + id + "': missing traversal " + std::to_string(k));
    ts.traversals.push_back(apply_pose(read_point_bin(tp), world_to_ref.compose(poses_v[k])));
  }
  if (ts.reference.empty()) throw DataError("sample '" + id + "': empty reference scan");
  return ts;
}

RoundPaths round_paths(const fs::path& root, int j) {
  RoundPaths p;
  p.dir = root / "rounds" / ("round_" + std::to_string(j));
  p.pseudo_labels = p.dir / "pseudo_labels";
  p.db = p.dir / "db";
  p.detections = p.dir / "detections";
  p.manifest = p.dir / "manifest.json";
  return p;
}

RoundPaths round_layout(const fs::path& root, int j, bool force) {
  if (j < 0) throw std::invalid_argument("round index must be >= 0");
  RoundPaths p = round_paths(root, j);
  if (fs::exists(p.dir) && !fs::is_empty(p.dir)) {
    if (!force) throw DataError("round directory '" + p.dir.string() + "' already exists (use --force)");
    fs::remove_all(p.dir);
  }
  fs::create_directories(p.pseudo_labels);
  fs::create_directories(p.db);
  fs::create_directories(p.detections);
  return p;
}

nlohmann::json to_json(const RoundManifest& m) {
  nlohmann::json j;
  j["round"] = m.round;
  j["algorithm"] = m.algorithm;
  j["rho"] = m.rho;
  j["alpha"] = m.alpha;
  j["gamma"] = m.gamma;
  j["high_threshold"] = m.high_threshold;
  j["threshold"] = m.threshold ? nlohmann::json(*m.threshold) : nlohmann::json(nullptr);
  j["seed"] = m.seed;
  j["detector"] = m.detector;
  j["counts"] = {{"detections", m.detections},     {"post_pp", m.post_pp},
                 {"static_retained", m.static_retained}, {"pseudo_labels", m.pseudo_labels},
                 {"db_source", m.db_source},       {"db_entries", m.db_entries},
                 {"db_skipped", m.db_skipped}};
  j["complete"] = m.complete;
  j["audit"] = m.audit;
  return j;
}

RoundManifest manifest_from_json(const nlohmann::json& j) {
  try {
    RoundManifest m;
    m.round = j.at("round").get<int>();
    m.algorithm = j.at("algorithm").get<std::string>();
    m.rho = j.at("rho").get<double>();
    m.alpha = j.at("alpha").get<double>();
    m.gamma = j.at("gamma").get<double>();
    m.high_threshold = j.at("high_threshold").get<double>();
    if (!j.at("threshold").is_null()) m.threshold = j.at("threshold").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.detector = j.at("detector").get<std::string>();
    const auto& c = j.at("counts");
    m.detections = c.at("detections").get<std::size_t>();
    m.post_pp = c.at("post_pp").get<std::size_t>();
    m.static_retained = c.at("static_retained").get<std::size_t>();
    m.pseudo_labels = c.at("pseudo_labels").get<std::size_t>();
    m.db_source = c.at("db_source").get<std::size_t>();
    m.db_entries = c.at("db_entries").get<std::size_t>();
    m.db_skipped = c.at("db_skipped").get<std::size_t>();
    m.complete = j.at("complete").get<bool>();
    m.audit = j.value("audit", nlohmann::json());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
}

void write_manifest(const fs::path& path, const RoundManifest& m) {
  write_text_file(path, to_json(m).dump(2) + "\n");
}

RoundManifest read_manifest(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_bytes(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    return manifest_from_json(j);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

namespace {

nlohmann::json box_to_json(const Box3D& b) {
  return {{"cx", b.cx},         {"cy", b.cy},         {"cz", b.cz},  {"length", b.length},
          {"width", b.width},   {"height", b.height}, {"yaw", b.yaw}};
}

Box3D box_from_json(const nlohmann::json& j) {
  Box3D b;
  b.cx = j.at("cx").get<double>();
  b.cy = j.at("cy").get<double>();
  b.cz = j.at("cz").get<double>();
  b.length = j.at("length").get<double>();
  b.width = j.at("width").get<double>();
  b.height = j.at("height").get<double>();
  b.yaw = j.at("yaw").get<double>();
  if (!is_valid(b)) throw FormatError("invalid box in database index");
  return b;
}

}  // namespace

void write_database(const fs::path& dir, const GtDatabase& db) {
  fs::create_directories(dir);
  nlohmann::json index;
  index["round"] = db.round;
  index["manifest"] = db.manifest;
  index["skipped"] = db.skipped;
  index["entries"] = nlohmann::json::array();
  for (const DbEntry& e : db.entries) {
    const std::string file = e.entry_id + ".bin";
    write_point_bin(dir / file, e.points);
    index["entries"].push_back({{"entry_id", e.entry_id},
                                {"source", e.source_sample_id},
                                {"box", box_to_json(e.box)},
                                {"score", e.score},
                                {"points_file", file},
                                {"count", e.points.size()}});
  }
  write_text_file(dir / "index.json", index.dump(2) + "\n");
}

GtDatabase read_database(const fs::path& dir) {
  const fs::path index_path = dir / "index.json";
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(read_bytes(index_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(index_path.string() + ": " + e.what());
  }
  GtDatabase db;
  try {
    db.round = index.at("round").get<int>();
    db.manifest = index.at("manifest").get<std::string>();
    db.skipped = index.at("skipped").get<std::size_t>();
    for (const auto& je : index.at("entries")) {
      DbEntry e;
      e.entry_id = je.at("entry_id").get<std::string>();
      e.source_sample_id = je.at("source").get<std::string>();
      e.box = box_from_json(je.at("box"));
      e.score = je.at("score").get<double>();
      e.points = read_point_bin(dir / je.at("points_file").get<std::string>());
      if (e.points.size() != je.at("count").get<std::size_t>())
        throw FormatError("database entry '" + e.entry_id + "': point count does not match index");
      db.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(index_path.string() + ": " + e.what());
  }
  return db;
}

}  // namespace lst
