#include <catch2/catch.hpp>

#include <fstream>

#include "ovp/io.hpp"
#include "ovp/rng.hpp"
#include "test_util.hpp"

using ovp::BoxXYXY;
using ovp::Dataset;
using testutil::TempDir;

namespace {

Dataset sample_dataset() {
  ovp::Rng rng(42);
  Dataset d = testutil::skeleton_dataset(4, 3, {false, false, true});
  d.proposals.push_back(testutil::make_proposal(0, BoxXYXY(1.5f, 2.5f, 20.0f, 30.0f), 0.75f,
                                                testutil::rand_vec(4, rng), testutil::rand_vec(3, rng)));
  d.proposals.push_back(testutil::make_proposal(1, BoxXYXY(0.0f, 0.0f, 5.0f, 5.0f), 0.25f,
                                                testutil::rand_vec(4, rng), testutil::rand_vec(3, rng)));
  d.gt_train.push_back({0, BoxXYXY(1.0f, 2.0f, 21.0f, 31.0f), 0});
  d.gt_test.push_back({1, BoxXYXY(0.0f, 0.0f, 5.5f, 5.5f), 2});
  return d;
}

}  // namespace

TEST_CASE("dataset round-trips through the on-disk format") {
  TempDir tmp("io_roundtrip");
  Dataset d = sample_dataset();
  auto manifest = ovp::write_dataset(d, tmp.path);
  Dataset loaded = ovp::load_dataset(manifest);
  CHECK(loaded == d);
}

TEST_CASE("writing twice produces byte-identical files") {
  TempDir a("io_det_a"), b("io_det_b");
  Dataset d = sample_dataset();
  ovp::write_dataset(d, a.path);
  ovp::write_dataset(d, b.path);
  for (const char* name : {ovp::kManifestFile, ovp::kProposalsFile, ovp::kTextEmbeddingsFile, ovp::kAnnotationsFile})
    CHECK(testutil::slurp(a.path / name) == testutil::slurp(b.path / name));
}

TEST_CASE("empty dataset writes a valid zero-count store") {
  TempDir tmp("io_empty");
  Dataset d;
  d.d_cls = 4;
  d.d_emb = 3;
  auto manifest = ovp::write_dataset(d, tmp.path);
  Dataset loaded = ovp::load_dataset(manifest);
  CHECK(loaded.proposals.empty());
  CHECK(loaded.images.empty());
  CHECK(loaded == d);
}

TEST_CASE("corrupted magic bytes are rejected") {
  TempDir tmp("io_magic");
  Dataset d = sample_dataset();
  auto manifest = ovp::write_dataset(d, tmp.path);
  {
    std::fstream f(tmp.path / ovp::kProposalsFile, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  try {
    ovp::load_dataset(manifest);
    FAIL("expected BadMagic");
  } catch (const ovp::Error& e) {
    CHECK(e.code() == ovp::Errc::BadMagic);
  }
}

TEST_CASE("embedding file dimension must match the manifest") {
  TempDir tmp("io_dim");
  Dataset d = sample_dataset();
  auto manifest = ovp::write_dataset(d, tmp.path);

  // re-write the text embeddings with d_emb = 7 while the manifest says 3
  Dataset other = d;
  other.d_emb = 7;
  for (auto& t : other.text_embeddings) t.e_text.assign(7, 1.0f);
  for (auto& p : other.proposals) p.e_img.assign(7, 0.5f);
  ovp::write_text_embeddings_file(other, tmp.path / ovp::kTextEmbeddingsFile);

  try {
    ovp::load_dataset(manifest);
    FAIL("expected DimensionMismatch");
  } catch (const ovp::Error& e) {
    CHECK(e.code() == ovp::Errc::DimensionMismatch);
  }
}

TEST_CASE("missing manifest is reported as MissingFile") {
  try {
    ovp::load_dataset("definitely_not_here/manifest.json");
    FAIL("expected MissingFile");
  } catch (const ovp::Error& e) {
    CHECK(e.code() == ovp::Errc::MissingFile);
  }
}

TEST_CASE("a class listed as both base and novel is rejected before writing") {
  TempDir tmp("io_partition");
  Dataset d = sample_dataset();
  d.classes.push_back({0, "base_0_again", true});  // id 0 now claims both sides
  CHECK_THROWS_AS(ovp::write_dataset(d, tmp.path), ovp::Error);
}

TEST_CASE("train-split annotations of novel classes are rejected") {
  TempDir tmp("io_novel_train");
  Dataset d = sample_dataset();
  d.gt_train.push_back({0, BoxXYXY(0, 0, 2, 2), 2});  // class 2 is novel
  CHECK_THROWS_AS(ovp::write_dataset(d, tmp.path), ovp::Error);
}

TEST_CASE("unwritable output directory raises IoFailure") {
  TempDir tmp("io_unwritable");
  std::ofstream(tmp.path / "blocker") << "x";
  Dataset d = sample_dataset();
  try {
    ovp::write_dataset(d, tmp.path / "blocker" / "nested");
    FAIL("expected IoFailure");
  } catch (const ovp::Error& e) {
    CHECK(e.code() == ovp::Errc::IoFailure);
  }
}

TEST_CASE("zero text embeddings are rejected") {
  TempDir tmp("io_zero_text");
  Dataset d = sample_dataset();
  d.text_embeddings[1].e_text.assign(3, 0.0f);
  CHECK_THROWS_AS(ovp::write_dataset(d, tmp.path), ovp::Error);
}

TEST_CASE("dangling references are rejected") {
  TempDir tmp("io_dangling");
  Dataset d = sample_dataset();
  d.gt_test.push_back({99, BoxXYXY(0, 0, 1, 1), 0});
  try {
    ovp::write_dataset(d, tmp.path);
    FAIL("expected DanglingReference");
  } catch (const ovp::Error& e) {
    CHECK(e.code() == ovp::Errc::DanglingReference);
  }
}

TEST_CASE("head checkpoints round-trip with and without a projector") {
  TempDir tmp("io_head");
  ovp::Rng rng(1);
  ovp::HeadCheckpoint ckpt;
  ckpt.head.class_ids = {3, 7, 9};
  ckpt.head.d_cls = 5;
  ckpt.head.weights = testutil::rand_vec(15, rng);
  ckpt.head.biases = testutil::rand_vec(3, rng);

  ovp::write_head_checkpoint(ckpt, tmp.path / "plain.ovhd");
  CHECK(ovp::load_head_checkpoint(tmp.path / "plain.ovhd") == ckpt);

  ovp::LinearProjector proj;
  proj.d_cls = 5;
  proj.d_emb = 4;
  proj.weights = testutil::rand_vec(20, rng);
  proj.biases = testutil::rand_vec(4, rng);
  ckpt.projector = proj;
  ovp::write_head_checkpoint(ckpt, tmp.path / "with_proj.ovhd");
  CHECK(ovp::load_head_checkpoint(tmp.path / "with_proj.ovhd") == ckpt);
}

TEST_CASE("truncated head checkpoint is rejected") {
  TempDir tmp("io_trunc");
  ovp::HeadCheckpoint ckpt;
  ckpt.head.class_ids = {0};
  ckpt.head.d_cls = 2;
  ckpt.head.weights = {1.0f, 2.0f};
  ckpt.head.biases = {0.5f};
  auto path = tmp.path / "head.ovhd";
  ovp::write_head_checkpoint(ckpt, path);
  auto bytes = testutil::slurp(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 3));
  out.close();
  CHECK_THROWS_AS(ovp::load_head_checkpoint(path), ovp::Error);
}

namespace {

void put_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& s, uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f32(std::string& s, float v) { put_u32(s, std::bit_cast<uint32_t>(v)); }

}  // namespace

TEST_CASE("proposals file layout is pinned byte for byte") {
  // hand-assembled file: magic, version u16, count u64, d_cls u32, d_emb u32,
  // then (image_id u32, box 4xf32, objectness f32, f_cls, e_img), little-endian
  std::string bytes = "OVPF";
  put_u16(bytes, 1);
  put_u64(bytes, 1);
  put_u32(bytes, 2);
  put_u32(bytes, 3);
  put_u32(bytes, 7);          // image_id
  put_f32(bytes, 1.5f);       // x1
  put_f32(bytes, 2.5f);       // y1
  put_f32(bytes, 10.0f);      // x2
  put_f32(bytes, 20.0f);      // y2
  put_f32(bytes, 0.625f);     // objectness
  put_f32(bytes, -1.0f);      // f_cls
  put_f32(bytes, 0.25f);
  put_f32(bytes, 4.0f);       // e_img
  put_f32(bytes, 5.0f);
  put_f32(bytes, 6.0f);

  TempDir tmp("io_layout");
  {
    std::ofstream out(tmp.path / "props.bin", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  Dataset d;
  d.d_cls = 2;
  d.d_emb = 3;
  d.images.push_back({7, 64, 64, ovp::Split::Train});
  ovp::read_proposals_file(d, tmp.path / "props.bin");
  REQUIRE(d.proposals.size() == 1);
  CHECK(d.proposals[0].image_id == 7);
  CHECK(d.proposals[0].box == BoxXYXY(1.5f, 2.5f, 10.0f, 20.0f));
  CHECK(d.proposals[0].objectness == 0.625f);
  CHECK(d.proposals[0].f_cls == std::vector<float>{-1.0f, 0.25f});
  CHECK(d.proposals[0].e_img == std::vector<float>{4.0f, 5.0f, 6.0f});

  // and the writer emits exactly these bytes back
  ovp::write_proposals_file(d, tmp.path / "back.bin");
  CHECK(testutil::slurp(tmp.path / "back.bin") == bytes);
}

TEST_CASE("text embedding file layout is pinned byte for byte") {
  std::string bytes = "OVTE";
  put_u16(bytes, 1);
  put_u64(bytes, 1);
  put_u32(bytes, 2);
  put_u32(bytes, 9);      // class_id
  put_f32(bytes, 0.5f);
  put_f32(bytes, -0.5f);

  TempDir tmp("io_layout_te");
  {
    std::ofstream out(tmp.path / "te.bin", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  Dataset d;
  d.d_cls = 2;
  d.d_emb = 2;
  d.classes.push_back({9, "novel_9", true});
  ovp::read_text_embeddings_file(d, tmp.path / "te.bin");
  REQUIRE(d.text_embeddings.size() == 1);
  CHECK(d.text_embeddings[0].class_id == 9);
  CHECK(d.text_embeddings[0].e_text == std::vector<float>{0.5f, -0.5f});

  ovp::write_text_embeddings_file(d, tmp.path / "back.bin");
  CHECK(testutil::slurp(tmp.path / "back.bin") == bytes);
}

TEST_CASE("head checkpoint layout is pinned byte for byte") {
  std::string bytes = "OVHD";
  put_u16(bytes, 1);
  put_u64(bytes, 2);       // class count
  put_u32(bytes, 2);       // d_cls
  put_u32(bytes, 4);       // class ids
  put_u32(bytes, 11);
  put_f32(bytes, 1.0f);    // weights row 0
  put_f32(bytes, 2.0f);
  put_f32(bytes, 3.0f);    // weights row 1
  put_f32(bytes, 4.0f);
  put_f32(bytes, 0.1f);    // biases
  put_f32(bytes, 0.2f);
  bytes.push_back('\x01'); // projector present
  put_u32(bytes, 1);       // d_emb
  put_f32(bytes, 7.0f);    // projector weights (1 x 2)
  put_f32(bytes, 8.0f);
  put_f32(bytes, 9.0f);    // projector bias

  TempDir tmp("io_layout_hd");
  {
    std::ofstream out(tmp.path / "head.bin", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  auto ckpt = ovp::load_head_checkpoint(tmp.path / "head.bin");
  CHECK(ckpt.head.class_ids == std::vector<uint32_t>{4, 11});
  CHECK(ckpt.head.weights == std::vector<float>{1, 2, 3, 4});
  CHECK(ckpt.head.biases == std::vector<float>{0.1f, 0.2f});
  REQUIRE(ckpt.projector.has_value());
  CHECK(ckpt.projector->d_emb == 1);
  CHECK(ckpt.projector->weights == std::vector<float>{7, 8});
  CHECK(ckpt.projector->biases == std::vector<float>{9});

  ovp::write_head_checkpoint(ckpt, tmp.path / "back.bin");
  CHECK(testutil::slurp(tmp.path / "back.bin") == bytes);
}
