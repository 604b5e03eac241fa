#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ovp/data.hpp"
#include "ovp/error.hpp"
#include "ovp/eval.hpp"
#include "ovp/inference.hpp"
#include "ovp/io.hpp"
#include "ovp/retrieval.hpp"
#include "ovp/synth.hpp"
#include "ovp/train.hpp"

namespace ovp {

// Everything the pipeline driver needs. One seed governs the generator,
// sampling, and every training shuffle through per-stage derived sub-seeds.
struct PipelineConfig {
  std::string dataset_manifest;  // empty: synthesize under <out>/dataset
  std::string out_dir = "out";
  uint64_t seed = 0;
  double tau = 0.6;
  int k = 100;
  FocalLossParams focal;
  SgdSchedule base_schedule;
  SgdSchedule probe_schedule = {.lr = 0.01, .epochs = 12, .decay_epochs = {8, 11}, .warmup_iters = 0};
  SamplingConfig sampling;
  FusionParams fusion;
  SynthConfig synth;
};

inline void validate(const PipelineConfig& cfg) {
  if (!(cfg.tau >= 0.0 && cfg.tau <= 1.0)) fail(Errc::RangeError, "tau must lie in [0,1]");
  if (cfg.k < 1) fail(Errc::RangeError, "k must be at least 1");
  validate(cfg.focal);
  validate(cfg.base_schedule);
  validate(cfg.probe_schedule);
  validate(cfg.sampling);
  validate(cfg.fusion);
  validate(cfg.synth);
}

namespace cfgjson {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(Errc::ParseError, std::string("bad value for field '") + key + "'");
  }
}

inline void read_schedule(const nlohmann::json& j, const char* key, SgdSchedule& s) {
  if (!j.contains(key)) return;
  const auto& block = j.at(key);
  if (!block.is_object()) fail(Errc::ParseError, std::string(key) + " must be an object");
  read_field(block, "lr", s.lr);
  read_field(block, "epochs", s.epochs);
  read_field(block, "decay_epochs", s.decay_epochs);
  read_field(block, "decay_factor", s.decay_factor);
  read_field(block, "warmup_iters", s.warmup_iters);
  read_field(block, "batch_size", s.batch_size);
}

}  // namespace cfgjson

// Loads a JSON config; omitted fields keep their defaults (tau=0.6, k=100,
// beta=0.8, kappa=0.01, standard focal and schedule settings).
inline PipelineConfig parse_config(const nlohmann::json& j) {
  using cfgjson::read_field;
  if (!j.is_object()) fail(Errc::ParseError, "config root must be a JSON object");
  PipelineConfig cfg;
  read_field(j, "dataset", cfg.dataset_manifest);
  read_field(j, "out", cfg.out_dir);
  read_field(j, "seed", cfg.seed);
  read_field(j, "tau", cfg.tau);
  read_field(j, "k", cfg.k);
  read_field(j, "beta", cfg.fusion.beta);
  read_field(j, "kappa", cfg.fusion.kappa);
  if (j.contains("focal")) {
    read_field(j.at("focal"), "alpha", cfg.focal.alpha);
    read_field(j.at("focal"), "gamma", cfg.focal.gamma);
  }
  cfgjson::read_schedule(j, "base_schedule", cfg.base_schedule);
  cfgjson::read_schedule(j, "probe_schedule", cfg.probe_schedule);
  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    read_field(s, "iou_positive_threshold", cfg.sampling.iou_positive_threshold);
    read_field(s, "samples_per_image", cfg.sampling.samples_per_image);
    read_field(s, "positive_fraction", cfg.sampling.positive_fraction);
  }
  if (j.contains("fusion")) {
    const auto& f = j.at("fusion");
    read_field(f, "score_threshold", cfg.fusion.score_threshold);
    read_field(f, "nms_iou", cfg.fusion.nms_iou);
    read_field(f, "max_detections", cfg.fusion.max_detections);
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    read_field(s, "n_base", cfg.synth.n_base);
    read_field(s, "n_novel", cfg.synth.n_novel);
    read_field(s, "n_train_images", cfg.synth.n_train_images);
    read_field(s, "n_test_images", cfg.synth.n_test_images);
    read_field(s, "objects_per_image", cfg.synth.objects_per_image);
    read_field(s, "proposals_per_object", cfg.synth.proposals_per_object);
    read_field(s, "low_quality_fraction", cfg.synth.low_quality_fraction);
    read_field(s, "loose_per_object", cfg.synth.loose_per_object);
    read_field(s, "ghosts_per_image", cfg.synth.ghosts_per_image);
    read_field(s, "decoys_per_novel_class", cfg.synth.decoys_per_novel_class);
    read_field(s, "d_cls", cfg.synth.d_cls);
    read_field(s, "d_emb", cfg.synth.d_emb);
    read_field(s, "feature_scale", cfg.synth.feature_scale);
    read_field(s, "sigma_cls", cfg.synth.sigma_cls);
    read_field(s, "sigma_emb", cfg.synth.sigma_emb);
    read_field(s, "sigma_text", cfg.synth.sigma_text);
    read_field(s, "objectness_noise", cfg.synth.objectness_noise);
    read_field(s, "image_width", cfg.synth.image_width);
    read_field(s, "image_height", cfg.synth.image_height);
  }
  validate(cfg);
  return cfg;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::MissingFile, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, "config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

namespace paths {

inline std::filesystem::path dataset_dir(const PipelineConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / "dataset";
}
inline std::filesystem::path base_head(const PipelineConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / "base_head.ovhd";
}
inline std::filesystem::path novel_head(const PipelineConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / "novel_head.ovhd";
}
inline std::filesystem::path pseudo_labels(const PipelineConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / "pseudo_labels.json";
}
inline std::filesystem::path detections(const PipelineConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / "detections.jsonl";
}
inline std::filesystem::path report(const PipelineConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / "report.json";
}
inline std::filesystem::path sweep_csv(const PipelineConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / "sweep.csv";
}
inline std::filesystem::path ablation_csv(const PipelineConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / "ablation.csv";
}

}  // namespace paths

// ---- stage cores (in-memory) ----

inline LinearHead stage_train_base_head(const PipelineConfig& cfg, const Dataset& d) {
  SamplingConfig sampling = cfg.sampling;
  sampling.seed = derive_seed(cfg.seed, "sample_base");
  auto samples = sample_from_ground_truth(d, sampling);
  SgdSchedule schedule = cfg.base_schedule;
  schedule.seed = derive_seed(cfg.seed, "train_base");
  auto base_ids = d.base_class_ids();
  return train_classifier_head(d, samples, base_ids, cfg.focal, schedule);
}

inline LinearProjector stage_train_projector(const PipelineConfig& cfg, const Dataset& d) {
  std::vector<size_t> train_props;
  for (size_t i = 0; i < d.proposals.size(); ++i)
    if (d.proposal_split(d.proposals[i]) == Split::Train) train_props.push_back(i);
  SgdSchedule schedule = cfg.base_schedule;
  schedule.seed = derive_seed(cfg.seed, "train_distill");
  return train_distillation_head(d, train_props, schedule);
}

inline PseudoLabelSet stage_retrieve(const PipelineConfig& cfg, const Dataset& d, int k) {
  auto filtered = filter_proposals(d, cfg.tau);
  auto novel_text = d.novel_text_embeddings();
  return retrieve_topk(d, filtered, novel_text, k);
}

inline LinearHead stage_probe(const PipelineConfig& cfg, const Dataset& d, const PseudoLabelSet& pseudo) {
  SamplingConfig sampling = cfg.sampling;
  sampling.seed = derive_seed(cfg.seed, "sample_novel");
  auto samples = sample_pos_neg(d, pseudo, sampling);
  SgdSchedule schedule = cfg.probe_schedule;
  schedule.seed = derive_seed(cfg.seed, "train_probe");
  auto novel_ids = d.novel_class_ids();
  return train_classifier_head(d, samples, novel_ids, cfg.focal, schedule);
}

inline std::vector<Detection> stage_infer(const Dataset& d, const LinearHead& unified,
                                          const LinearProjector& projector, const FusionParams& fusion) {
  return detect_split(d, Split::Test,
                      [&](uint32_t image_id) { return detect_image(d, image_id, unified, projector, fusion); });
}

inline std::vector<Detection> stage_infer_baseline(const Dataset& d, const LinearProjector& projector,
                                                   const FusionParams& fusion) {
  return detect_split(d, Split::Test,
                      [&](uint32_t image_id) { return baseline_similarity_detect(d, image_id, projector, fusion); });
}

// ---- artifact files ----

inline void write_pseudo_labels(const PseudoLabelSet& pseudo, const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : pseudo.entries)
    arr.push_back({{"class_id", e.class_id}, {"proposal_index", e.proposal_index}, {"similarity", e.similarity}});
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  out << arr.dump(2) << '\n';
}

inline PseudoLabelSet load_pseudo_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::MissingFile, "cannot open " + path.string() + "; run the retrieve stage first");
  nlohmann::json arr;
  try {
    in >> arr;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, "pseudo labels " + path.string() + ": " + e.what());
  }
  PseudoLabelSet out;
  for (const auto& row : arr) {
    try {
      out.entries.push_back({row.at("proposal_index").get<size_t>(), row.at("class_id").get<uint32_t>(),
                             row.at("similarity").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::ParseError, std::string("bad pseudo label row: ") + e.what());
    }
  }
  return out;
}

inline void write_detections_jsonl(std::span<const Detection> dets, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  for (const auto& d : dets) {
    nlohmann::json row = {{"image_id", d.image_id},
                          {"class_id", d.class_id},
                          {"box", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}},
                          {"score", d.score}};
    out << row.dump() << '\n';
  }
}

inline std::vector<Detection> load_detections_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::MissingFile, "cannot open " + path.string() + "; run the infer stage first");
  std::vector<Detection> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      nlohmann::json row = nlohmann::json::parse(line);
      Detection d;
      d.image_id = row.at("image_id").get<uint32_t>();
      d.class_id = row.at("class_id").get<uint32_t>();
      auto b = row.at("box");
      d.box = BoxXYXY(b.at(0).get<float>(), b.at(1).get<float>(), b.at(2).get<float>(), b.at(3).get<float>());
      d.score = row.at("score").get<double>();
      out.push_back(d);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::ParseError, std::string("bad detection row: ") + e.what());
    }
  }
  return out;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [id, ap] : report.per_class_ap) per_class[std::to_string(id)] = ap;
  nlohmann::json gt = nlohmann::json::object();
  for (const auto& [id, n] : report.gt_count) gt[std::to_string(id)] = n;
  nlohmann::json det = nlohmann::json::object();
  for (const auto& [id, n] : report.det_count) det[std::to_string(id)] = n;
  return {{"per_class", per_class},
          {"ap_novel", report.ap_novel},
          {"ap_base", report.ap_base},
          {"ap_all", report.ap_all},
          {"counts", {{"gt", gt}, {"detections", det}}}};
}

inline void write_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::IoFailure, "cannot open " + path.string() + " for writing");
  out << report_to_json(report).dump(2) << '\n';
}

// ---- file-based stages (the CLI surface) ----

inline std::filesystem::path resolve_manifest(const PipelineConfig& cfg, bool regenerate = false) {
  if (!cfg.dataset_manifest.empty()) return cfg.dataset_manifest;
  std::filesystem::path manifest = paths::dataset_dir(cfg) / kManifestFile;
  if (regenerate || !std::filesystem::exists(manifest)) {
    SyntheticDataset synth = generate_synthetic(cfg.synth, cfg.seed);
    write_dataset(synth.data, paths::dataset_dir(cfg));
  }
  return manifest;
}

inline void ensure_out_dir(const PipelineConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) fail(Errc::IoFailure, "cannot create " + cfg.out_dir);
}

inline std::filesystem::path run_synth(const PipelineConfig& cfg, const std::filesystem::path& out_dir) {
  SyntheticDataset synth = generate_synthetic(cfg.synth, cfg.seed);
  return write_dataset(synth.data, out_dir);
}

inline void run_train_base(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  Dataset d = load_dataset(resolve_manifest(cfg));
  LinearHead base = stage_train_base_head(cfg, d);
  LinearProjector projector = stage_train_projector(cfg, d);
  write_head_checkpoint({base, projector}, paths::base_head(cfg));
}

inline void run_retrieve(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  Dataset d = load_dataset(resolve_manifest(cfg));
  PseudoLabelSet pseudo = stage_retrieve(cfg, d, cfg.k);
  write_pseudo_labels(pseudo, paths::pseudo_labels(cfg));
}

inline void run_probe(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  Dataset d = load_dataset(resolve_manifest(cfg));
  PseudoLabelSet pseudo = load_pseudo_labels(paths::pseudo_labels(cfg));
  LinearHead novel = stage_probe(cfg, d, pseudo);
  write_head_checkpoint({novel, std::nullopt}, paths::novel_head(cfg));
}

inline void run_infer(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  Dataset d = load_dataset(resolve_manifest(cfg));
  HeadCheckpoint base = load_head_checkpoint(paths::base_head(cfg));
  if (!base.projector) fail(Errc::InvalidData, "base checkpoint lacks a distillation projector");
  HeadCheckpoint novel = load_head_checkpoint(paths::novel_head(cfg));
  LinearHead unified = concat_heads(base.head, novel.head);
  auto dets = stage_infer(d, unified, *base.projector, cfg.fusion);
  write_detections_jsonl(dets, paths::detections(cfg));
}

inline EvalReport run_eval(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  Dataset d = load_dataset(resolve_manifest(cfg));
  auto dets = load_detections_jsonl(paths::detections(cfg));
  EvalReport report = evaluate_dataset(d, dets, 0.5);
  write_report(report, paths::report(cfg));
  return report;
}

inline EvalReport run_all(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  resolve_manifest(cfg, /*regenerate=*/true);
  run_train_base(cfg);
  run_retrieve(cfg);
  run_probe(cfg);
  run_infer(cfg);
  return run_eval(cfg);
}

// ---- sweeps and ablations ----

inline std::string format_fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// Re-runs retrieval, probe, inference and evaluation per grid value while the
// base head and projector stay fixed. Emits sweep.csv with one row per value.
inline std::vector<std::pair<double, double>> run_sweep(const PipelineConfig& cfg, const std::string& param,
                                                        std::span<const double> values) {
  if (param != "k" && param != "beta") fail(Errc::RangeError, "sweep param must be 'k' or 'beta'");
  if (values.empty()) fail(Errc::RangeError, "sweep needs at least one value");
  ensure_out_dir(cfg);
  Dataset d = load_dataset(resolve_manifest(cfg));
  LinearHead base = stage_train_base_head(cfg, d);
  LinearProjector projector = stage_train_projector(cfg, d);

  std::vector<std::pair<double, double>> rows;
  for (double value : values) {
    PipelineConfig run_cfg = cfg;
    if (param == "k") {
      int k = static_cast<int>(value);
      if (k < 1 || static_cast<double>(k) != value) fail(Errc::RangeError, "k sweep values must be positive integers");
      run_cfg.k = k;
    } else {
      if (!(value >= 0.0 && value <= 1.0)) fail(Errc::RangeError, "beta sweep values must lie in [0,1]");
      run_cfg.fusion.beta = value;
    }
    PseudoLabelSet pseudo = stage_retrieve(run_cfg, d, run_cfg.k);
    LinearHead novel = stage_probe(run_cfg, d, pseudo);
    LinearHead unified = concat_heads(base, novel);
    auto dets = stage_infer(d, unified, projector, run_cfg.fusion);
    EvalReport report = evaluate_dataset(d, dets, 0.5);
    rows.emplace_back(value, report.ap_novel);
  }

  std::ofstream out(paths::sweep_csv(cfg), std::ios::trunc);
  if (!out) fail(Errc::IoFailure, "cannot open sweep.csv for writing");
  out << param << ",ap_novel\n";
  for (const auto& [value, ap] : rows) {
    if (param == "k")
      out << static_cast<long>(value) << ',' << format_fixed(ap) << '\n';
    else
      out << format_fixed(value, 3) << ',' << format_fixed(ap) << '\n';
  }
  return rows;
}

struct AblationRow {
  std::string variant;
  EvalReport report;
};

// Four arms: the full method, scoring without retrieval-trained novel weights
// (beta = 0 with a zero novel head), fusion without the objectness factor,
// and pure similarity scoring.
inline std::vector<AblationRow> run_ablate(const PipelineConfig& cfg) {
  ensure_out_dir(cfg);
  Dataset d = load_dataset(resolve_manifest(cfg));
  LinearHead base = stage_train_base_head(cfg, d);
  LinearProjector projector = stage_train_projector(cfg, d);
  PseudoLabelSet pseudo = stage_retrieve(cfg, d, cfg.k);
  LinearHead novel = stage_probe(cfg, d, pseudo);
  LinearHead unified = concat_heads(base, novel);

  LinearHead zero_novel = novel;
  std::fill(zero_novel.weights.begin(), zero_novel.weights.end(), 0.0f);
  std::fill(zero_novel.biases.begin(), zero_novel.biases.end(), 0.0f);
  LinearHead unified_zero = concat_heads(base, zero_novel);

  std::vector<AblationRow> rows;
  auto add = [&](const std::string& name, std::vector<Detection> dets) {
    rows.push_back({name, evaluate_dataset(d, dets, 0.5)});
  };

  add("full", stage_infer(d, unified, projector, cfg.fusion));

  FusionParams beta0 = cfg.fusion;
  beta0.beta = 0.0;
  add("no_retrieval", stage_infer(d, unified_zero, projector, beta0));

  FusionParams no_obj = cfg.fusion;
  no_obj.multiply_objectness = false;
  add("no_objectness", stage_infer(d, unified, projector, no_obj));

  add("similarity_baseline", stage_infer_baseline(d, projector, cfg.fusion));

  std::ofstream out(paths::ablation_csv(cfg), std::ios::trunc);
  if (!out) fail(Errc::IoFailure, "cannot open ablation.csv for writing");
  out << "variant,ap_novel,ap_base,ap_all\n";
  for (const auto& row : rows)
    out << row.variant << ',' << format_fixed(row.report.ap_novel) << ',' << format_fixed(row.report.ap_base)
        << ',' << format_fixed(row.report.ap_all) << '\n';
  return rows;
}

}  // namespace ovp
