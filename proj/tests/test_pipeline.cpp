#include <catch2/catch.hpp>

#include <fstream>

#include "ovp/pipeline.hpp"
#include "test_util.hpp"

using ovp::PipelineConfig;
using testutil::TempDir;

namespace {

PipelineConfig quick_config(const std::string& out_dir, uint64_t seed = 5) {
  PipelineConfig cfg;
  cfg.out_dir = out_dir;
  cfg.seed = seed;
  cfg.synth.n_train_images = 80;
  cfg.synth.n_test_images = 40;
  cfg.k = 40;
  return cfg;
}

PipelineConfig parse_json(const std::string& text) {
  return ovp::parse_config(nlohmann::json::parse(text));
}

}  // namespace

TEST_CASE("empty config JSON yields the stock defaults") {
  PipelineConfig cfg = parse_json("{}");
  CHECK(cfg.tau == 0.6);
  CHECK(cfg.k == 100);
  CHECK(cfg.fusion.beta == 0.8);
  CHECK(cfg.fusion.kappa == 0.01);
  CHECK(cfg.focal.alpha == 0.25);
  CHECK(cfg.focal.gamma == 2.0);
  CHECK(cfg.base_schedule.lr == 0.02);
  CHECK(cfg.base_schedule.epochs == 20);
  CHECK(cfg.base_schedule.decay_epochs == std::vector<int>{16, 19});
  CHECK(cfg.base_schedule.warmup_iters == 500);
  CHECK(cfg.probe_schedule.lr == 0.01);
  CHECK(cfg.probe_schedule.epochs == 12);
  CHECK(cfg.probe_schedule.decay_epochs == std::vector<int>{8, 11});
  CHECK(cfg.probe_schedule.warmup_iters == 0);
  CHECK(cfg.sampling.samples_per_image == 512);
  CHECK(cfg.sampling.positive_fraction == 0.25);
  CHECK(cfg.fusion.score_threshold == 0.05);
  CHECK(cfg.fusion.max_detections == 100);
}

TEST_CASE("out-of-range beta is reported by field name") {
  try {
    parse_json(R"({"beta": 1.5})");
    FAIL("expected RangeError");
  } catch (const ovp::Error& e) {
    CHECK(e.code() == ovp::Errc::RangeError);
    CHECK(std::string(e.what()).find("beta") != std::string::npos);
  }
}

TEST_CASE("malformed JSON and bad field types raise ParseError") {
  try {
    parse_json(R"({"k": "many"})");
    FAIL("expected ParseError");
  } catch (const ovp::Error& e) {
    CHECK(e.code() == ovp::Errc::ParseError);
  }
  TempDir tmp("cfg_parse");
  std::ofstream(tmp.path / "broken.json") << "{ not json";
  CHECK_THROWS_AS(ovp::load_config(tmp.path / "broken.json"), ovp::Error);
}

TEST_CASE("loading the same config file twice gives identical configs") {
  TempDir tmp("cfg_twice");
  auto path = tmp.path / "cfg.json";
  std::ofstream(path) << R"({"seed": 9, "tau": 0.55, "k": 25, "beta": 0.7,
                             "base_schedule": {"epochs": 4, "decay_epochs": [2, 3], "warmup_iters": 10}})";
  auto a = ovp::load_config(path);
  auto b = ovp::load_config(path);
  CHECK(a.seed == b.seed);
  CHECK(a.tau == 0.55);
  CHECK(a.k == 25);
  CHECK(a.fusion.beta == 0.7);
  CHECK(a.base_schedule.epochs == 4);
  CHECK(a.base_schedule.decay_epochs == std::vector<int>{2, 3});
  CHECK(a.base_schedule.lr == b.base_schedule.lr);
}

TEST_CASE("probe stage without retrieval output reports a missing file") {
  TempDir tmp("pipe_missing");
  PipelineConfig cfg = quick_config((tmp.path / "out").string());
  try {
    ovp::run_probe(cfg);
    FAIL("expected MissingFile");
  } catch (const ovp::Error& e) {
    CHECK(e.code() == ovp::Errc::MissingFile);
  }
}

TEST_CASE("staged pipeline equals run_all and every artifact feeds its successor") {
  TempDir tmp("pipe_staged");
  PipelineConfig staged = quick_config((tmp.path / "staged").string());
  ovp::run_train_base(staged);
  ovp::run_retrieve(staged);
  ovp::run_probe(staged);
  ovp::run_infer(staged);
  auto staged_report = ovp::run_eval(staged);

  PipelineConfig all = quick_config((tmp.path / "all").string());
  auto all_report = ovp::run_all(all);

  CHECK(staged_report.ap_novel == all_report.ap_novel);
  CHECK(staged_report.ap_base == all_report.ap_base);
  CHECK(testutil::slurp(ovp::paths::report(staged)) == testutil::slurp(ovp::paths::report(all)));
  CHECK(testutil::slurp(ovp::paths::detections(staged)) == testutil::slurp(ovp::paths::detections(all)));
  CHECK(testutil::slurp(ovp::paths::base_head(staged)) == testutil::slurp(ovp::paths::base_head(all)));
  CHECK(testutil::slurp(ovp::paths::novel_head(staged)) == testutil::slurp(ovp::paths::novel_head(all)));

  // sanity on the metrics themselves at this reduced scale
  CHECK(all_report.ap_base > 0.8);
  CHECK(all_report.ap_novel > 0.8);
}

TEST_CASE("low-quality duplicates score like their high-quality twins under similarity scoring") {
  TempDir tmp("pipe_twins");
  PipelineConfig cfg = quick_config((tmp.path / "out").string(), 21);
  auto synth = ovp::generate_synthetic(cfg.synth, cfg.seed);
  const auto& d = synth.data;
  auto projector = ovp::stage_train_projector(cfg, d);
  auto texts = d.text_embeddings;

  // index proposals of the test split by source object
  std::map<int64_t, std::vector<size_t>> by_object;
  for (size_t i = 0; i < d.proposals.size(); ++i) {
    const auto& prov = synth.provenance[i];
    if (prov.ghost || prov.decoy) continue;
    if (d.proposal_split(d.proposals[i]) != ovp::Split::Test) continue;
    by_object[prov.source_object].push_back(i);
  }

  size_t pairs = 0;
  for (const auto& [obj, indices] : by_object) {
    size_t high = SIZE_MAX, low = SIZE_MAX;
    for (size_t i : indices) {
      if (synth.provenance[i].quality >= 0.75 && high == SIZE_MAX) high = i;
      if (synth.provenance[i].quality <= 0.45 && low == SIZE_MAX) low = i;
    }
    if (high == SIZE_MAX || low == SIZE_MAX) continue;
    ++pairs;
    uint32_t cls = synth.provenance[high].true_class;
    auto score_of = [&](size_t idx) {
      auto f_dis = ovp::project(projector, d.proposals[idx].f_cls);
      return ovp::distillation_scores(f_dis, texts, cfg.fusion.kappa)[cls];
    };
    CHECK(std::abs(score_of(high) - score_of(low)) < 1e-2);
  }
  CHECK(pairs > 20);
}

TEST_CASE("pseudo labels and detections round-trip through their files") {
  TempDir tmp("pipe_artifacts");

  ovp::PseudoLabelSet pseudo;
  pseudo.entries.push_back({12, 5, 0.987654321});
  pseudo.entries.push_back({7, 5, 0.5});
  pseudo.entries.push_back({3, 6, -1.0});
  ovp::write_pseudo_labels(pseudo, tmp.path / "p.json");
  auto loaded = ovp::load_pseudo_labels(tmp.path / "p.json");
  REQUIRE(loaded.entries.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(loaded.entries[i].proposal_index == pseudo.entries[i].proposal_index);
    CHECK(loaded.entries[i].class_id == pseudo.entries[i].class_id);
    CHECK(loaded.entries[i].similarity == pseudo.entries[i].similarity);
  }

  std::vector<ovp::Detection> dets = {{3, ovp::BoxXYXY(1.5f, 2.5f, 9.f, 9.f), 2, 0.75},
                                      {3, ovp::BoxXYXY(0.f, 0.f, 4.f, 4.f), 0, 0.25}};
  ovp::write_detections_jsonl(dets, tmp.path / "d.jsonl");
  auto dets2 = ovp::load_detections_jsonl(tmp.path / "d.jsonl");
  REQUIRE(dets2.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(dets2[i].image_id == dets[i].image_id);
    CHECK(dets2[i].box == dets[i].box);
    CHECK(dets2[i].class_id == dets[i].class_id);
    CHECK(dets2[i].score == dets[i].score);
  }
}

TEST_CASE("sweep writes one CSV row per grid value") {
  TempDir tmp("pipe_sweep");
  PipelineConfig cfg = quick_config((tmp.path / "out").string());
  cfg.synth.n_train_images = 40;
  cfg.synth.n_test_images = 20;
  std::vector<double> values = {2, 5, 10};
  auto rows = ovp::run_sweep(cfg, "k", values);
  REQUIRE(rows.size() == 3);

  std::ifstream csv(ovp::paths::sweep_csv(cfg));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "k,ap_novel");
  size_t data_rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++data_rows;
  CHECK(data_rows == 3);

  CHECK_THROWS_AS(ovp::run_sweep(cfg, "gamma", values), ovp::Error);
}
