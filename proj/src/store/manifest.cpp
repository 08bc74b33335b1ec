#include "grab/store/manifest.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "grab/error.hpp"

namespace grab::store {
namespace {

using nlohmann::json;

template <typename T>
T Required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw Error(ErrorCode::kLoad, where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kLoad, where + ": field '" + key + "': " + e.what());
  }
}

void FromLittleEndian(std::vector<float>& values) {
  if constexpr (std::endian::native == std::endian::big) {
    for (float& v : values) {
      auto u = std::bit_cast<std::uint32_t>(v);
      u = __builtin_bswap32(u);
      v = std::bit_cast<float>(u);
    }
  }
}

}  // namespace

std::filesystem::path CorpusManifest::Resolve(const std::string& relative) const {
  const std::filesystem::path p(relative);
  return p.is_absolute() ? p : base_dir / p;
}

void CorpusManifest::Validate() const {
  int corpus_dim = dim;
  for (const auto& v : videos) {
    const std::string where = "video '" + v.video_id + "'";
    if (v.video_id.empty()) throw Error(ErrorCode::kLoad, "video with empty video_id");
    if (v.dtype != kDtypeF32Le) {
      throw Error(ErrorCode::kLoad, where + ": dtype must be \"f32le\", got \"" + v.dtype + "\"");
    }
    if (v.dim <= 0) throw Error(ErrorCode::kLoad, where + ": dim must be positive");
    if (corpus_dim == 0) corpus_dim = v.dim;
    if (v.dim != corpus_dim) {
      throw Error(ErrorCode::kLoad, where + ": dim " + std::to_string(v.dim) +
                                        " differs from corpus dim " + std::to_string(corpus_dim));
    }
    if (!(v.fps > 0.0)) throw Error(ErrorCode::kLoad, where + ": fps must be positive");
    if (v.frame_count < 1) throw Error(ErrorCode::kLoad, where + ": frame_count must be >= 1");
    if (v.sequence_stride < 1) throw Error(ErrorCode::kLoad, where + ": sequence_stride must be >= 1");
    std::int64_t prev = -1;
    for (std::size_t i = 0; i < v.keyframes.size(); ++i) {
      const auto f = v.keyframes[i].frame_index;
      if (f < 0 || f >= v.frame_count) {
        throw Error(ErrorCode::kLoad, where + ": keyframes[" + std::to_string(i) + "] frame " +
                                          std::to_string(f) + " out of range");
      }
      if (f <= prev) {
        throw Error(ErrorCode::kLoad, where + ": keyframes must be strictly increasing");
      }
      prev = f;
    }
  }
  for (std::size_t i = 0; i < videos.size(); ++i) {
    for (std::size_t j = i + 1; j < videos.size(); ++j) {
      if (videos[i].video_id == videos[j].video_id) {
        throw Error(ErrorCode::kLoad, "duplicate video_id '" + videos[i].video_id + "'");
      }
    }
  }
}

CorpusManifest ManifestFromJson(const json& j, std::filesystem::path base_dir) {
  CorpusManifest m;
  m.base_dir = std::move(base_dir);
  if (!j.is_object()) throw Error(ErrorCode::kLoad, "manifest must be a JSON object");
  m.dim = j.value("dim", 0);
  if (j.contains("dtype") && j.at("dtype") != kDtypeF32Le) {
    throw Error(ErrorCode::kLoad, "manifest dtype must be \"f32le\"");
  }
  if (j.contains("thumbnail_template") && !j.at("thumbnail_template").is_null()) {
    m.thumbnail_template = j.at("thumbnail_template").get<std::string>();
  }
  for (const auto& jv : j.value("videos", json::array())) {
    VideoEntry v;
    v.video_id = Required<std::string>(jv, "video_id", "manifest video");
    const std::string where = "video '" + v.video_id + "'";
    v.fps = Required<double>(jv, "fps", where);
    v.frame_count = Required<std::int64_t>(jv, "frame_count", where);
    v.duration_s = jv.value("duration_s", v.fps > 0 ? v.frame_count / v.fps : 0.0);
    v.embedding_file = Required<std::string>(jv, "embedding_file", where);
    v.dim = Required<int>(jv, "dim", where);
    v.dtype = jv.value("dtype", std::string(kDtypeF32Le));
    for (const auto& jk : jv.value("keyframes", json::array())) {
      KeyframeEntry k;
      k.frame_index = Required<std::int64_t>(jk, "frame_index", where + " keyframe");
      k.shot_id = jk.value("shot_id", std::int64_t{0});
      if (jk.contains("phash") && !jk.at("phash").is_null()) {
        try {
          k.phash = ingest::PerceptualHash::FromHex(jk.at("phash").get<std::string>());
        } catch (const Error& e) {
          throw Error(ErrorCode::kLoad, where + ": " + e.what());
        }
      }
      v.keyframes.push_back(k);
    }
    if (jv.contains("sequence_embedding_file") && !jv.at("sequence_embedding_file").is_null()) {
      v.sequence_embedding_file = jv.at("sequence_embedding_file").get<std::string>();
    }
    v.sequence_stride = jv.value("sequence_stride", std::int64_t{1});
    m.videos.push_back(std::move(v));
  }
  m.Validate();
  if (m.dim == 0 && !m.videos.empty()) m.dim = m.videos.front().dim;
  return m;
}

json ManifestToJson(const CorpusManifest& m) {
  json j;
  j["dim"] = m.dim;
  j["dtype"] = kDtypeF32Le;
  if (m.thumbnail_template) j["thumbnail_template"] = *m.thumbnail_template;
  j["videos"] = json::array();
  for (const auto& v : m.videos) {
    json jv;
    jv["video_id"] = v.video_id;
    jv["fps"] = v.fps;
    jv["frame_count"] = v.frame_count;
    jv["duration_s"] = v.duration_s;
    jv["embedding_file"] = v.embedding_file;
    jv["dim"] = v.dim;
    jv["dtype"] = v.dtype;
    jv["keyframes"] = json::array();
    for (const auto& k : v.keyframes) {
      json jk{{"frame_index", k.frame_index}, {"shot_id", k.shot_id}};
      if (k.phash) jk["phash"] = k.phash->ToHex();
      jv["keyframes"].push_back(std::move(jk));
    }
    if (v.sequence_embedding_file) {
      jv["sequence_embedding_file"] = *v.sequence_embedding_file;
      jv["sequence_stride"] = v.sequence_stride;
    }
    j["videos"].push_back(std::move(jv));
  }
  return j;
}

CorpusManifest LoadManifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kLoad, "cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kLoad, path.string() + ": " + e.what());
  }
  return ManifestFromJson(j, path.parent_path());
}

void SaveManifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorCode::kIo, "cannot write manifest " + path.string());
    out << ManifestToJson(manifest).dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::vector<float> ReadF32Blob(const std::filesystem::path& path, std::size_t rows, std::size_t dim) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorCode::kLoad, "missing embedding blob " + path.string());
  const std::uint64_t expected = static_cast<std::uint64_t>(rows) * dim * 4;
  if (size != expected) {
    throw Error(ErrorCode::kLoad, path.string() + ": byte length " + std::to_string(size) +
                                      " != rows*dim*4 = " + std::to_string(expected));
  }
  std::vector<float> values(rows * dim);
  std::ifstream in(path, std::ios::binary);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(expected));
  if (!in && expected > 0) throw Error(ErrorCode::kLoad, "short read on " + path.string());
  FromLittleEndian(values);
  return values;
}

std::vector<float> ReadF32Blob(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorCode::kLoad, "missing embedding blob " + path.string());
  if (size % 4 != 0) throw Error(ErrorCode::kLoad, path.string() + ": size not a multiple of 4");
  return ReadF32Blob(path, size / 4, 1);
}

void WriteF32Blob(const std::filesystem::path& path, const std::vector<float>& values) {
  std::vector<float> le = values;
  FromLittleEndian(le);  // byte swap is its own inverse
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write blob " + path.string());
  out.write(reinterpret_cast<const char*>(le.data()), static_cast<std::streamsize>(le.size() * 4));
  if (!out) throw Error(ErrorCode::kIo, "short write on " + path.string());
}

}  // namespace grab::store
