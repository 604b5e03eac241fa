// In-memory walkthrough of the library API, start to finish, no files.
// Build target: ovprobe_demo.

#include <iostream>

#include "ovp/ovp.hpp"

int main() {
  ovp::SynthConfig synth;
  synth.n_train_images = 120;
  synth.n_test_images = 60;
  ovp::SyntheticDataset world = ovp::generate_synthetic(synth, /*seed=*/7);
  const ovp::Dataset& data = world.data;
  std::cout << data.proposals.size() << " proposals over " << data.images.size() << " images, "
            << data.classes.size() << " classes\n";

  // base head + distillation projector on the annotated classes
  ovp::SamplingConfig sampling;
  sampling.seed = ovp::derive_seed(7, "sample_base");
  auto base_samples = ovp::sample_from_ground_truth(data, sampling);
  ovp::SgdSchedule base_schedule;  // lr 0.02, 20 epochs, decay at 16/19, 500-iter warmup
  base_schedule.seed = ovp::derive_seed(7, "train_base");
  ovp::LinearHead base_head =
      ovp::train_classifier_head(data, base_samples, data.base_class_ids(), {}, base_schedule);

  std::vector<size_t> train_proposals;
  for (size_t i = 0; i < data.proposals.size(); ++i)
    if (data.proposal_split(data.proposals[i]) == ovp::Split::Train) train_proposals.push_back(i);
  ovp::SgdSchedule distill_schedule = base_schedule;
  distill_schedule.seed = ovp::derive_seed(7, "train_distill");
  ovp::LinearProjector projector = ovp::train_distillation_head(data, train_proposals, distill_schedule);

  // pseudo labels for the novel classes, then the linear probe
  auto filtered = ovp::filter_proposals(data, 0.6);
  auto pseudo = ovp::retrieve_topk(data, filtered, data.novel_text_embeddings(), 100);
  ovp::SamplingConfig novel_sampling;
  novel_sampling.seed = ovp::derive_seed(7, "sample_novel");
  auto novel_samples = ovp::sample_pos_neg(data, pseudo, novel_sampling);
  ovp::SgdSchedule probe_schedule;
  probe_schedule.lr = 0.01;
  probe_schedule.epochs = 12;
  probe_schedule.decay_epochs = {8, 11};
  probe_schedule.warmup_iters = 0;
  probe_schedule.seed = ovp::derive_seed(7, "train_probe");
  ovp::LinearHead novel_head =
      ovp::train_classifier_head(data, novel_samples, data.novel_class_ids(), {}, probe_schedule);

  // unified inference and evaluation on the test split
  ovp::LinearHead unified = ovp::concat_heads(base_head, novel_head);
  ovp::FusionParams fusion;  // beta 0.8, kappa 0.01, threshold 0.05, NMS 0.5
  auto detections = ovp::detect_split(data, ovp::Split::Test, [&](uint32_t image_id) {
    return ovp::detect_image(data, image_id, unified, projector, fusion);
  });
  ovp::EvalReport report = ovp::evaluate_dataset(data, detections, 0.5);
  std::cout << ovp::report_table(report, data);
  return 0;
}
