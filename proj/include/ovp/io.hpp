#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ovp/data.hpp"
#include "ovp/error.hpp"

namespace ovp {

namespace detail {

// All multi-byte values are little-endian on disk regardless of host order.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
  void magic(const char m[4]) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(m[i]));
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IoFailure, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) fail(Errc::IoFailure, "short write to " + path.string());
  }

 private:
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::MissingFile, "cannot open " + path_);
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  uint8_t u8() { return take(1)[0]; }
  uint16_t u16() {
    const uint8_t* p = take(2);
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
  }
  uint32_t u32() {
    const uint8_t* p = take(4);
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  }
  uint64_t u64() {
    uint64_t lo = u32();
    uint64_t hi = u32();
    return lo | (hi << 32);
  }
  float f32() { return std::bit_cast<float>(u32()); }

  void expect_magic(const char m[4], const char* what) {
    const uint8_t* p = take(4);
    if (std::memcmp(p, m, 4) != 0) fail(Errc::BadMagic, std::string(what) + " signature mismatch in " + path_);
  }

  bool at_end() const { return pos_ == buf_.size(); }

 private:
  const uint8_t* take(size_t n) {
    if (pos_ + n > buf_.size()) fail(Errc::InvalidData, "truncated file " + path_);
    const uint8_t* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::string path_;
  std::vector<uint8_t> buf_;
  size_t pos_ = 0;
};

inline constexpr uint16_t kFormatVersion = 1;

}  // namespace detail

inline constexpr const char kProposalsFile[] = "proposals.ovpf";
inline constexpr const char kTextEmbeddingsFile[] = "text_embeddings.ovte";
inline constexpr const char kAnnotationsFile[] = "annotations.json";
inline constexpr const char kManifestFile[] = "manifest.json";

inline void write_proposals_file(const Dataset& d, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.magic("OVPF");
  w.u16(detail::kFormatVersion);
  w.u64(d.proposals.size());
  w.u32(d.d_cls);
  w.u32(d.d_emb);
  for (const auto& p : d.proposals) {
    w.u32(p.image_id);
    w.f32(p.box.x1);
    w.f32(p.box.y1);
    w.f32(p.box.x2);
    w.f32(p.box.y2);
    w.f32(p.objectness);
    for (float v : p.f_cls) w.f32(v);
    for (float v : p.e_img) w.f32(v);
  }
  w.save(path);
}

inline void read_proposals_file(Dataset& d, const std::filesystem::path& path) {
  detail::ByteReader r(path);
  r.expect_magic("OVPF", "proposals file");
  if (r.u16() != detail::kFormatVersion) fail(Errc::InvalidData, "unsupported proposals file version");
  uint64_t count = r.u64();
  uint32_t d_cls = r.u32();
  uint32_t d_emb = r.u32();
  if (d_cls != d.d_cls || d_emb != d.d_emb)
    fail(Errc::DimensionMismatch, "proposals file dimensions disagree with manifest");
  d.proposals.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    ProposalRecord p;
    p.image_id = r.u32();
    float x1 = r.f32(), y1 = r.f32(), x2 = r.f32(), y2 = r.f32();
    p.box = BoxXYXY(x1, y1, x2, y2);
    p.objectness = r.f32();
    p.f_cls.resize(d_cls);
    for (auto& v : p.f_cls) v = r.f32();
    p.e_img.resize(d_emb);
    for (auto& v : p.e_img) v = r.f32();
    d.proposals.push_back(std::move(p));
  }
}

inline void write_text_embeddings_file(const Dataset& d, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.magic("OVTE");
  w.u16(detail::kFormatVersion);
  w.u64(d.text_embeddings.size());
  w.u32(d.d_emb);
  for (const auto& t : d.text_embeddings) {
    w.u32(t.class_id);
    for (float v : t.e_text) w.f32(v);
  }
  w.save(path);
}

inline void read_text_embeddings_file(Dataset& d, const std::filesystem::path& path) {
  detail::ByteReader r(path);
  r.expect_magic("OVTE", "text embeddings file");
  if (r.u16() != detail::kFormatVersion) fail(Errc::InvalidData, "unsupported text embeddings file version");
  uint64_t count = r.u64();
  uint32_t d_emb = r.u32();
  if (d_emb != d.d_emb) fail(Errc::DimensionMismatch, "text embeddings file dimension disagrees with manifest");
  d.text_embeddings.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    ClassEmbedding t;
    t.class_id = r.u32();
    if (const ClassInfo* c = d.find_class(t.class_id)) t.name = c->name;
    t.e_text.resize(d_emb);
    for (auto& v : t.e_text) v = r.f32();
    d.text_embeddings.push_back(std::move(t));
  }
}

inline void write_annotations_file(const Dataset& d, const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  auto emit = [&](const std::vector<GroundTruthBox>& table, Split split) {
    for (const auto& g : table) {
      nlohmann::json row;
      row["image_id"] = g.image_id;
      row["class_id"] = g.class_id;
      row["box"] = {g.box.x1, g.box.y1, g.box.x2, g.box.y2};
      row["split"] = split_name(split);
      arr.push_back(std::move(row));
    }
  };
  emit(d.gt_train, Split::Train);
  emit(d.gt_test, Split::Test);

  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  out << arr.dump(2) << '\n';
  if (!out) fail(Errc::IoFailure, "short write to " + path.string());
}

inline void read_annotations_file(Dataset& d, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::MissingFile, "cannot open " + path.string());
  nlohmann::json arr;
  try {
    in >> arr;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, "annotations file " + path.string() + ": " + e.what());
  }
  if (!arr.is_array()) fail(Errc::ParseError, "annotations file must hold a JSON array");
  for (const auto& row : arr) {
    GroundTruthBox g;
    try {
      g.image_id = row.at("image_id").get<uint32_t>();
      g.class_id = row.at("class_id").get<uint32_t>();
      auto b = row.at("box");
      g.box = BoxXYXY(b.at(0).get<float>(), b.at(1).get<float>(), b.at(2).get<float>(), b.at(3).get<float>());
      std::string split = row.at("split").get<std::string>();
      if (split == "train")
        d.gt_train.push_back(g);
      else if (split == "test")
        d.gt_test.push_back(g);
      else
        fail(Errc::ParseError, "annotation split must be train or test");
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::ParseError, std::string("bad annotation row: ") + e.what());
    }
  }
}

// Writes manifest + binary files into out_dir and returns the manifest path.
// Output is deterministic: identical datasets produce byte-identical files.
inline std::filesystem::path write_dataset(const Dataset& d, const std::filesystem::path& out_dir) {
  validate(d);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(Errc::IoFailure, "cannot create " + out_dir.string());

  write_proposals_file(d, out_dir / kProposalsFile);
  write_text_embeddings_file(d, out_dir / kTextEmbeddingsFile);
  write_annotations_file(d, out_dir / kAnnotationsFile);

  nlohmann::json manifest;
  manifest["version"] = detail::kFormatVersion;
  manifest["d_cls"] = d.d_cls;
  manifest["d_emb"] = d.d_emb;
  manifest["classes"] = nlohmann::json::array();
  for (const auto& c : d.classes)
    manifest["classes"].push_back({{"id", c.id}, {"name", c.name}, {"split", c.novel ? "novel" : "base"}});
  manifest["images"] = nlohmann::json::array();
  for (const auto& im : d.images)
    manifest["images"].push_back(
        {{"id", im.id}, {"width", im.width}, {"height", im.height}, {"split", split_name(im.split)}});
  manifest["files"] = {{"proposals", kProposalsFile},
                       {"text_embeddings", kTextEmbeddingsFile},
                       {"annotations", kAnnotationsFile}};

  std::filesystem::path manifest_path = out_dir / kManifestFile;
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) fail(Errc::IoFailure, "cannot open " + manifest_path.string() + " for writing");
  out << manifest.dump(2) << '\n';
  if (!out) fail(Errc::IoFailure, "short write to " + manifest_path.string());
  return manifest_path;
}

inline Dataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) fail(Errc::MissingFile, "cannot open " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, "manifest " + manifest_path.string() + ": " + e.what());
  }

  Dataset d;
  try {
    if (manifest.at("version").get<uint16_t>() != detail::kFormatVersion)
      fail(Errc::ParseError, "unsupported manifest version");
    d.d_cls = manifest.at("d_cls").get<uint32_t>();
    d.d_emb = manifest.at("d_emb").get<uint32_t>();
    for (const auto& row : manifest.at("classes")) {
      ClassInfo c;
      c.id = row.at("id").get<uint32_t>();
      c.name = row.at("name").get<std::string>();
      std::string split = row.at("split").get<std::string>();
      if (split != "base" && split != "novel") fail(Errc::ParseError, "class split must be base or novel");
      c.novel = split == "novel";
      d.classes.push_back(std::move(c));
    }
    for (const auto& row : manifest.at("images")) {
      ImageInfo im;
      im.id = row.at("id").get<uint32_t>();
      im.width = row.at("width").get<int>();
      im.height = row.at("height").get<int>();
      std::string split = row.at("split").get<std::string>();
      if (split != "train" && split != "test") fail(Errc::ParseError, "image split must be train or test");
      im.split = split == "train" ? Split::Train : Split::Test;
      d.images.push_back(im);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, std::string("bad manifest: ") + e.what());
  }

  std::filesystem::path dir = manifest_path.parent_path();
  auto file_of = [&](const char* key) -> std::filesystem::path {
    try {
      return dir / manifest.at("files").at(key).get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::ParseError, std::string("manifest files entry missing: ") + e.what());
    }
  };
  read_proposals_file(d, file_of("proposals"));
  read_text_embeddings_file(d, file_of("text_embeddings"));
  read_annotations_file(d, file_of("annotations"));

  validate(d);
  return d;
}

inline void write_head_checkpoint(const HeadCheckpoint& ckpt, const std::filesystem::path& path) {
  validate(ckpt.head);
  if (ckpt.projector) validate(*ckpt.projector);
  detail::ByteWriter w;
  w.magic("OVHD");
  w.u16(detail::kFormatVersion);
  w.u64(ckpt.head.class_ids.size());
  w.u32(ckpt.head.d_cls);
  for (uint32_t id : ckpt.head.class_ids) w.u32(id);
  for (float v : ckpt.head.weights) w.f32(v);
  for (float v : ckpt.head.biases) w.f32(v);
  if (ckpt.projector) {
    w.u8(1);
    w.u32(ckpt.projector->d_emb);
    for (float v : ckpt.projector->weights) w.f32(v);
    for (float v : ckpt.projector->biases) w.f32(v);
  } else {
    w.u8(0);
  }
  w.save(path);
}

inline HeadCheckpoint load_head_checkpoint(const std::filesystem::path& path) {
  detail::ByteReader r(path);
  r.expect_magic("OVHD", "head checkpoint");
  if (r.u16() != detail::kFormatVersion) fail(Errc::InvalidData, "unsupported head checkpoint version");
  HeadCheckpoint ckpt;
  uint64_t count = r.u64();
  ckpt.head.d_cls = r.u32();
  ckpt.head.class_ids.resize(count);
  for (auto& id : ckpt.head.class_ids) id = r.u32();
  ckpt.head.weights.resize(count * ckpt.head.d_cls);
  for (auto& v : ckpt.head.weights) v = r.f32();
  ckpt.head.biases.resize(count);
  for (auto& v : ckpt.head.biases) v = r.f32();
  if (r.u8() != 0) {
    LinearProjector p;
    p.d_cls = ckpt.head.d_cls;
    p.d_emb = r.u32();
    p.weights.resize(static_cast<size_t>(p.d_emb) * p.d_cls);
    for (auto& v : p.weights) v = r.f32();
    p.biases.resize(p.d_emb);
    for (auto& v : p.biases) v = r.f32();
    ckpt.projector = std::move(p);
  }
  if (!r.at_end()) fail(Errc::InvalidData, "trailing bytes in head checkpoint " + path.string());
  return ckpt;
}

}  // namespace ovp
