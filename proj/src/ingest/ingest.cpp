#include "grab/ingest/ingest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <future>

#include "grab/error.hpp"

namespace grab::ingest {
namespace {

using nlohmann::json;

[[noreturn]] void Fail(const std::string& video_id, const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kIngest, "video '" + video_id + "' field '" + field + "': " + what);
}

std::string ReplaceAll(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

std::filesystem::path ResolveAgainst(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string RelativeTo(const std::filesystem::path& target, const std::filesystem::path& dir) {
  std::error_code ec;
  const auto abs_target = std::filesystem::absolute(target, ec);
  const auto rel = std::filesystem::relative(abs_target, std::filesystem::absolute(dir), ec);
  if (ec || rel.empty()) return abs_target.string();
  return rel.generic_string();
}

std::string BlobNameFor(const std::string& video_id) {
  std::string name;
  for (char c : video_id) {
    const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    name.push_back(safe ? c : '_');
  }
  return name + ".kf.f32";
}

}  // namespace

ShotFile ParseShotFile(const json& j) {
  ShotFile f;
  try {
    f.video_id = j.at("video_id").get<std::string>();
    f.fps = j.at("fps").get<double>();
    f.frame_count = j.at("frame_count").get<std::int64_t>();
    for (const auto& s : j.at("shots")) {
      if (!s.is_array() || s.size() != 2) {
        throw Error(ErrorCode::kIngest, "video '" + f.video_id + "' field 'shots': entries must be [a, b]");
      }
      f.shots.push_back({s[0].get<std::int64_t>(), s[1].get<std::int64_t>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIngest, std::string("malformed shot file: ") + e.what());
  }
  if (!(f.fps > 0)) Fail(f.video_id, "fps", "must be positive");
  if (f.frame_count < 1) Fail(f.video_id, "frame_count", "must be >= 1");
  ValidateShots(f.video_id, f.shots, f.frame_count);
  return f;
}

ShotFile LoadShotFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIngest, "missing shot file " + path.string());
  try {
    return ParseShotFile(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kIngest, path.string() + ": " + e.what());
  }
}

std::map<std::int64_t, PerceptualHash> LoadHashFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIngest, "missing hash file " + path.string());
  std::map<std::int64_t, PerceptualHash> hashes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      hashes[j.at("frame_index").get<std::int64_t>()] =
          PerceptualHash::FromHex(j.at("phash_hex").get<std::string>());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kIngest, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return hashes;
}

SourceManifest ParseSourceManifest(const json& j, const std::filesystem::path& base_dir) {
  SourceManifest m;
  if (!j.is_object()) throw Error(ErrorCode::kIngest, "ingest manifest must be a JSON object");
  if (j.contains("thumbnail_template")) m.thumbnail_template = j.at("thumbnail_template").get<std::string>();
  for (const auto& jv : j.value("videos", json::array())) {
    SourceVideo v;
    try {
      v.video_id = jv.at("video_id").get<std::string>();
      if (jv.contains("fps")) v.fps = jv.at("fps").get<double>();
      if (jv.contains("frame_count")) v.frame_count = jv.at("frame_count").get<std::int64_t>();
      if (jv.contains("shot_file")) v.shot_file = ResolveAgainst(base_dir, jv.at("shot_file").get<std::string>());
      if (jv.contains("hash_file")) v.hash_file = ResolveAgainst(base_dir, jv.at("hash_file").get<std::string>());
      if (jv.contains("frames_dir")) v.frames_dir = ResolveAgainst(base_dir, jv.at("frames_dir").get<std::string>());
      v.frame_pattern = jv.value("frame_pattern", v.frame_pattern);
      v.embedding_file = ResolveAgainst(base_dir, jv.at("embedding_file").get<std::string>());
      v.dim = jv.at("dim").get<int>();
      v.dtype = jv.value("dtype", v.dtype);
      if (jv.contains("sequence_embedding_file")) {
        v.sequence_embedding_file = ResolveAgainst(base_dir, jv.at("sequence_embedding_file").get<std::string>());
      }
      if (jv.contains("sequence_stride")) v.sequence_stride = jv.at("sequence_stride").get<std::int64_t>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kIngest, "video '" + v.video_id + "': " + e.what());
    }
    m.videos.push_back(std::move(v));
  }
  return m;
}

SourceManifest LoadSourceManifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIngest, "cannot open ingest manifest " + path.string());
  try {
    return ParseSourceManifest(json::parse(in), path.parent_path());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kIngest, path.string() + ": " + e.what());
  }
}

IngestedVideo IngestVideo(const SourceVideo& src, const IngestOptions& options) {
  options.dedup.Validate();
  const std::string& id = src.video_id;
  if (src.dtype != store::kDtypeF32Le) Fail(id, "dtype", "must be \"f32le\"");
  if (src.dim <= 0) Fail(id, "dim", "must be positive");

  ShotFile shots;
  if (src.shot_file) {
    shots = LoadShotFile(*src.shot_file);
    if (shots.video_id != id) Fail(id, "shot_file", "belongs to video '" + shots.video_id + "'");
    if (src.fps && std::abs(*src.fps - shots.fps) > 1e-9) Fail(id, "fps", "disagrees with shot file");
    if (src.frame_count && *src.frame_count != shots.frame_count) {
      Fail(id, "frame_count", "disagrees with shot file");
    }
  } else {
    if (!src.fps || !src.frame_count) Fail(id, "shot_file", "absent, so fps and frame_count are required");
    shots.video_id = id;
    shots.fps = *src.fps;
    shots.frame_count = *src.frame_count;
    if (!(shots.fps > 0)) Fail(id, "fps", "must be positive");
    if (shots.frame_count < 1) Fail(id, "frame_count", "must be >= 1");
  }
  if (shots.shots.empty()) shots.shots = UniformShots(shots.frame_count, options.fallback_shot_len);

  std::map<std::int64_t, PerceptualHash> hashes;
  if (src.hash_file) {
    hashes = LoadHashFile(*src.hash_file);
  } else if (!src.frames_dir) {
    Fail(id, "hash_file", "one of hash_file or frames_dir is required");
  }

  IngestedVideo out;
  std::vector<std::size_t> kept_candidates;  // candidate positions retained
  std::size_t candidate_pos = 0;
  for (std::size_t s = 0; s < shots.shots.size(); ++s) {
    std::vector<KeyframeRecord> shot_frames;
    for (std::int64_t f : SelectKeyframeIndices(shots.shots[s])) {
      KeyframeRecord rec;
      rec.video_id = id;
      rec.frame_index = f;
      rec.timestamp_s = static_cast<double>(f) / shots.fps;
      rec.shot_id = static_cast<std::int64_t>(s);
      rec.embedding_id = static_cast<std::int64_t>(candidate_pos++);
      if (src.hash_file) {
        const auto it = hashes.find(f);
        if (it == hashes.end()) Fail(id, "hash_file", "no hash for keyframe " + std::to_string(f));
        rec.phash = it->second;
      } else {
        const auto name = ReplaceAll(src.frame_pattern, "{frame_index}", std::to_string(f));
        try {
          rec.phash = ComputePhash(ReadPgm(*src.frames_dir / name));
        } catch (const Error& e) {
          Fail(id, "frames_dir", e.what());
        }
      }
      shot_frames.push_back(std::move(rec));
    }
    for (auto& rec : DeduplicateShot(shot_frames, options.dedup)) {
      kept_candidates.push_back(static_cast<std::size_t>(rec.embedding_id));
      out.records.push_back(std::move(rec));
    }
  }
  out.candidate_count = candidate_pos;

  std::vector<float> raw;
  try {
    raw = store::ReadF32Blob(src.embedding_file);
  } catch (const Error& e) {
    Fail(id, "embedding_file", e.what());
  }
  const auto dim = static_cast<std::size_t>(src.dim);
  if (raw.size() % dim != 0) {
    Fail(id, "embedding_file", "size is not a multiple of dim " + std::to_string(dim));
  }
  const std::size_t rows = raw.size() / dim;
  const bool per_candidate = rows == out.candidate_count;
  if (!per_candidate && rows != out.records.size()) {
    Fail(id, "embedding_file", std::to_string(rows) + " rows; expected " +
                                   std::to_string(out.candidate_count) + " (all candidates) or " +
                                   std::to_string(out.records.size()) + " (retained keyframes)");
  }
  out.embeddings.reserve(out.records.size() * dim);
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    const std::size_t src_row = per_candidate ? kept_candidates[i] : i;
    out.embeddings.insert(out.embeddings.end(), raw.begin() + static_cast<std::ptrdiff_t>(src_row * dim),
                          raw.begin() + static_cast<std::ptrdiff_t>((src_row + 1) * dim));
    out.records[i].embedding_id = static_cast<std::int64_t>(i);
  }

  auto& e = out.entry;
  e.video_id = id;
  e.fps = shots.fps;
  e.frame_count = shots.frame_count;
  e.duration_s = shots.frame_count / shots.fps;
  e.dim = src.dim;
  e.dtype = src.dtype;
  for (const auto& r : out.records) e.keyframes.push_back({r.frame_index, r.shot_id, r.phash});
  if (src.sequence_embedding_file) {
    if (!std::filesystem::exists(*src.sequence_embedding_file)) {
      Fail(id, "sequence_embedding_file", "missing blob " + src.sequence_embedding_file->string());
    }
    e.sequence_embedding_file = src.sequence_embedding_file->string();
    // default: 5 samples per second
    e.sequence_stride = src.sequence_stride.value_or(
        std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(shots.fps / 5.0))));
    if (e.sequence_stride < 1) Fail(id, "sequence_stride", "must be >= 1");
    const auto seq_size = std::filesystem::file_size(*src.sequence_embedding_file);
    const auto expected = static_cast<std::uintmax_t>(e.SequenceRows()) * dim * 4;
    if (seq_size != expected) {
      Fail(id, "sequence_embedding_file", "byte length " + std::to_string(seq_size) + " != " +
                                              std::to_string(expected));
    }
  }
  return out;
}

Catalog Catalog::Open(const std::filesystem::path& dir) {
  Catalog catalog(dir);
  const auto path = dir / kManifestName;
  if (std::filesystem::exists(path)) {
    catalog.manifest_ = store::LoadManifest(path);
  }
  catalog.manifest_.base_dir = dir;
  return catalog;
}

Catalog::Catalog(Catalog&& other) noexcept
    : dir_(std::move(other.dir_)),
      manifest_(std::move(other.manifest_)),
      pending_(std::move(other.pending_)) {}

void Catalog::Upsert(IngestedVideo video) {
  std::lock_guard lock(mu_);
  auto& entry = video.entry;
  int corpus_dim = 0;
  for (const auto& v : manifest_.videos) {
    if (v.video_id != entry.video_id) {
      corpus_dim = v.dim;
      break;
    }
  }
  if (corpus_dim != 0 && corpus_dim != entry.dim) {
    Fail(entry.video_id, "dim", std::to_string(entry.dim) + " differs from corpus dim " +
                                    std::to_string(corpus_dim));
  }
  entry.embedding_file = BlobNameFor(entry.video_id);
  if (entry.sequence_embedding_file) {
    entry.sequence_embedding_file = RelativeTo(*entry.sequence_embedding_file, dir_);
  }
  pending_[entry.video_id] = std::move(video.embeddings);
  const auto it = std::find_if(manifest_.videos.begin(), manifest_.videos.end(),
                               [&](const auto& v) { return v.video_id == entry.video_id; });
  if (it != manifest_.videos.end()) {
    *it = std::move(entry);
  } else {
    manifest_.videos.push_back(std::move(entry));
  }
  manifest_.dim = manifest_.videos.front().dim;
}

void Catalog::SetThumbnailTemplate(std::optional<std::string> tmpl) {
  std::lock_guard lock(mu_);
  manifest_.thumbnail_template = std::move(tmpl);
}

void Catalog::Save() {
  std::lock_guard lock(mu_);
  std::filesystem::create_directories(dir_);
  for (const auto& [video_id, values] : pending_) {
    store::WriteF32Blob(dir_ / BlobNameFor(video_id), values);
  }
  pending_.clear();
  store::SaveManifest(manifest_, dir_ / kManifestName);
}

store::CorpusManifest Catalog::Manifest() const {
  std::lock_guard lock(mu_);
  return manifest_;
}

std::size_t Catalog::video_count() const {
  std::lock_guard lock(mu_);
  return manifest_.videos.size();
}

std::size_t Catalog::keyframe_count() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& v : manifest_.videos) n += v.keyframes.size();
  return n;
}

IngestSummary IngestAll(const SourceManifest& manifest, Catalog& catalog,
                        const IngestOptions& options, unsigned threads) {
  if (manifest.thumbnail_template) catalog.SetThumbnailTemplate(manifest.thumbnail_template);
  std::vector<std::optional<IngestedVideo>> results(manifest.videos.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < manifest.videos.size(); i = next++) {
      results[i] = IngestVideo(manifest.videos[i], options);
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(manifest.videos.size())));
  std::vector<std::future<void>> jobs;
  for (unsigned t = 1; t < threads; ++t) jobs.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& j : jobs) j.get();

  // Upsert in manifest order so the catalog layout does not depend on
  // thread scheduling.
  IngestSummary summary;
  for (auto& r : results) {
    ++summary.videos;
    summary.candidates += r->candidate_count;
    summary.retained += r->records.size();
    catalog.Upsert(std::move(*r));
  }
  catalog.Save();
  return summary;
}

}  // namespace grab::ingest
