#include "stpp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <charconv>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "stpp/error.hpp"
#include "stpp/report_format.hpp"

namespace stpp::pipeline {

void PipelineConfig::validate() const {
  train.validate();
  weak.validate();
  strong.validate();
  tta.validate();
  checkpoint_tta.validate();
  require(reliable_fraction > 0 && reliable_fraction <= 1, ErrorKind::kConfig, "reliable_fraction must be in (0,1]");
  require(confidence_threshold >= 0 && confidence_threshold <= 1, ErrorKind::kConfig,
          "confidence_threshold must be in [0,1]");
}

std::vector<SampleId> oversample_labeled(std::span<const SampleId> labeled, std::size_t target_count) {
  require(!labeled.empty(), ErrorKind::kConfig, "oversample_labeled: empty labeled set");
  const std::size_t m = labeled.size();
  const std::size_t reps = target_count < m ? 1 : (target_count + m - 1) / m;
  std::vector<SampleId> out;
  out.reserve(m * reps);
  for (std::size_t r = 0; r < reps; ++r) out.insert(out.end(), labeled.begin(), labeled.end());
  return out;
}

std::vector<TrainingItem> training_set(const StageSpec& stage) {
  std::vector<TrainingItem> items;
  if (!stage.labeled.empty()) {
    const std::size_t target = stage.oversample ? stage.pseudo.size() : 0;
    const auto multiset = oversample_labeled(stage.labeled, target);
    for (std::size_t i = 0; i < multiset.size(); ++i)
      items.push_back({multiset[i], Source::kLabeled, static_cast<int>(i / stage.labeled.size()),
                       stage.strong_labeled.has_value()});
  }
  for (SampleId id : stage.pseudo) items.push_back({id, Source::kPseudo, 0, stage.strong_unlabeled.has_value()});
  return items;
}

model::ModelParams initial_params(const PipelineConfig& cfg, int num_classes) {
  return model::ModelParams::init(num_classes, cfg.seed);
}

namespace {

enum Salt : std::uint64_t { kShuffle = 11, kWeak = 12, kStrong = 13 };

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t stage_seed(const PipelineConfig& cfg, std::string_view stream) {
  return aug::mix64(cfg.seed ^ fnv1a(stream));
}

}  // namespace

StageOutput train_stage(const model::ModelParams& init, const StageSpec& stage, const Dataset& dataset,
                        const PipelineConfig& cfg, bool checkpoints, TrainLog* log) {
  const auto items = training_set(stage);
  require(!items.empty(), ErrorKind::kStage, "stage '" + stage.name + "' has no training samples");

  std::unordered_map<SampleId, const LabeledSample*> labeled;
  for (const auto& s : dataset.labeled) labeled.emplace(s.id, &s);
  std::unordered_map<SampleId, const UnlabeledSample*> unlabeled;
  for (const auto& s : dataset.unlabeled) unlabeled.emplace(s.id, &s);
  for (const auto& it : items) {
    if (it.source == Source::kLabeled) {
      require(labeled.count(it.id) > 0, ErrorKind::kLookup, "stage '" + stage.name + "': unknown labeled id " +
                                                                std::to_string(it.id));
    } else {
      auto u = unlabeled.find(it.id);
      require(u != unlabeled.end(), ErrorKind::kLookup,
              "stage '" + stage.name + "': unknown unlabeled id " + std::to_string(it.id));
      require(u->second->pseudo.has_value(), ErrorKind::kStage,
              "stage '" + stage.name + "': unlabeled id " + std::to_string(it.id) + " has no pseudo mask");
    }
  }

  const std::uint64_t seed = stage_seed(cfg, stage.name);
  const auto& tc = cfg.train;
  const std::uint64_t per_epoch = (items.size() + static_cast<std::size_t>(tc.batch_size) - 1) / tc.batch_size;
  const std::uint64_t total = per_epoch * static_cast<std::uint64_t>(tc.epochs);

  StageOutput out;
  model::TrainState state(init);
  std::uint64_t iter = 0;
  int next_checkpoint = 1;
  std::vector<Image> images;
  std::vector<SegMask> masks;
  std::vector<model::BatchItem> batch;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    auto order = items;
    aug::RngStream shuffle(seed, 0, static_cast<std::uint64_t>(epoch), kShuffle);
    std::shuffle(order.begin(), order.end(), shuffle.engine());
    if (log) log->epoch_orders.push_back(order);

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      images.clear();
      masks.clear();
      batch.clear();
      images.reserve(end - start);
      masks.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const auto& it = order[k];
        const bool is_labeled = it.source == Source::kLabeled;
        const Image& img = is_labeled ? labeled.at(it.id)->image : unlabeled.at(it.id)->image;
        const SegMask& mask = is_labeled ? labeled.at(it.id)->mask : *unlabeled.at(it.id)->pseudo;
        const auto epoch_key = static_cast<std::uint64_t>(epoch);
        const auto copy_key = static_cast<std::uint64_t>(it.copy) << 8;
        aug::RngStream weak_rng(seed, it.id, epoch_key, copy_key | kWeak);
        auto [wi, wm] = aug::weak_augment(img, mask, cfg.weak, weak_rng);
        if (it.strong) {
          const auto& strong = is_labeled ? *stage.strong_labeled : *stage.strong_unlabeled;
          aug::RngStream strong_rng(seed, it.id, epoch_key, copy_key | kStrong);
          std::tie(wi, wm) = aug::strong_augment(wi, wm, strong, strong_rng);
        }
        images.push_back(std::move(wi));
        masks.push_back(std::move(wm));
      }
      for (std::size_t k = 0; k < images.size(); ++k) {
        const bool is_labeled = order[start + k].source == Source::kLabeled;
        batch.push_back({&images[k], &masks[k], is_labeled ? 1.0 : tc.unlabeled_loss_weight});
      }
      const auto step = model::train_step(state, batch, tc, iter, total);
      ++iter;
      if (log) log->losses.push_back(step.loss);
      while (checkpoints && next_checkpoint <= 3 &&
             iter >= (static_cast<std::uint64_t>(next_checkpoint) * total + 2) / 3) {
        out.checkpoints.push_back(state.params);
        ++next_checkpoint;
      }
    }
  }
  out.params = std::move(state.params);
  return out;
}

StageOutput train_supervised(const Dataset& dataset, const PipelineConfig& cfg, TrainLog* log) {
  require(!dataset.labeled.empty(), ErrorKind::kConfig, "train_supervised: empty labeled set");
  StageSpec stage;
  stage.name = "supervised";
  for (const auto& s : dataset.labeled) stage.labeled.push_back(s.id);
  stage.oversample = false;
  return train_stage(initial_params(cfg, dataset.num_classes), stage, dataset, cfg, true, log);
}

model::ModelParams retrain(const model::ModelParams& student_init, const StageSpec& stage, const Dataset& dataset,
                           const PipelineConfig& cfg, TrainLog* log) {
  return train_stage(student_init, stage, dataset, cfg, false, log).params;
}

Evaluation evaluate(const model::ModelParams& params, std::span<const LabeledSample> validation, int num_classes) {
  require(!validation.empty(), ErrorKind::kConfig, "evaluate: empty validation set");
  ConfusionMatrix cm(num_classes);
  for (const auto& s : validation) cm.accumulate(model::argmax(model::forward(params, s.image)), s.mask);
  Evaluation ev;
  ev.miou = cm.mean_iou();
  for (int c = 0; c < num_classes; ++c) ev.class_iou.push_back(cm.iou(c));
  return ev;
}

// ---------------------------------------------------------------------------

std::string StageReport::fragment() const {
  std::ostringstream out;
  if (validation) {
    out << name << ",val_miou,," << format_real(validation->miou) << '\n';
    for (std::size_t c = 0; c < validation->class_iou.size(); ++c) {
      out << name << ",val_iou," << c << ',';
      if (validation->class_iou[c]) out << format_real(*validation->class_iou[c]);
      out << '\n';
    }
  }
  for (const auto& [key, value] : metrics) out << name << ',' << key << ",," << format_real(value) << '\n';
  return out.str();
}

const StageReport* RunReport::find(std::string_view stage) const {
  for (const auto& s : stages)
    if (s.name == stage) return &s;
  return nullptr;
}

std::optional<double> RunReport::metric(std::string_view stage, std::string_view name) const {
  const auto* s = find(stage);
  if (!s) return std::nullopt;
  if (name == "val_miou" && s->validation) return s->validation->miou;
  for (const auto& [k, v] : s->metrics)
    if (k == name) return v;
  return std::nullopt;
}

std::string RunReport::body() const {
  std::ostringstream out;
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash));
  out << "stage,metric,class,value\n";
  out << "run,pipeline,," << pipeline << '\n';
  out << "run,config_hash,," << hash << '\n';
  out << "run,seed,," << seed << '\n';
  for (const auto& s : stages) out << s.fragment();
  return out.str();
}

// ---------------------------------------------------------------------------

namespace {

// Augmentation policy derived from the ablation mode.
struct Policy {
  std::optional<aug::StrongAugConfig> unlabeled;
  std::optional<aug::StrongAugConfig> labeled;
};

enum class Structure { kSupOnly, kSt, kStpp, kRandomTwoStage, kPixelTwoStage };

struct Plan {
  Structure structure = Structure::kSt;
  Policy policy;
  int extra_rounds = 0;
  std::string name;
};

bool is_policy_mode(std::string_view mode) {
  return mode == "no-sda" || mode == "sda-labeled-too" || mode == "cutout-on-labeled" ||
         mode.starts_with("single-aug:");
}

int parse_iterative(std::string_view mode) {
  constexpr std::string_view prefix = "iterative:+";
  if (!mode.starts_with(prefix)) return -1;
  const auto digits = mode.substr(prefix.size());
  int k = -1;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || k < 1) return -1;
  return k;
}

Policy make_policy(const PipelineConfig& cfg, std::string_view mode) {
  Policy p;
  if (cfg.sda) p.unlabeled = cfg.strong;
  if (mode == "no-sda") {
    p.unlabeled.reset();
  } else if (mode == "sda-labeled-too") {
    p.unlabeled = cfg.strong;
    p.labeled = cfg.strong;
  } else if (mode.starts_with("single-aug:")) {
    p.unlabeled = cfg.strong.only(std::string(mode.substr(std::string_view("single-aug:").size())));
  } else if (mode == "cutout-on-labeled") {
    p.unlabeled = cfg.strong.only("cutout");
    p.labeled = cfg.strong.only("cutout");
  }
  return p;
}

class Runner {
 public:
  Runner(const Dataset& dataset, std::span<const LabeledSample> validation, const PipelineConfig& cfg,
         ArtifactSink* sink)
      : data_(dataset), validation_(validation), cfg_(cfg), sink_(sink) {
    cfg_.validate();
    validate(data_);
    require(!data_.labeled.empty(), ErrorKind::kConfig, "dataset has no labeled samples");
  }

  RunResult run(const Plan& plan) {
    const auto t0 = std::chrono::steady_clock::now();
    report_.pipeline = plan.name;
    report_.config_hash = cfg_.config_hash;
    report_.seed = cfg_.seed;
    for (auto& s : data_.unlabeled) s.pseudo.reset();

    auto teacher = train_supervised(data_, cfg_);
    for (std::size_t j = 0; j < teacher.checkpoints.size(); ++j)
      emit_checkpoint("supervised", "ckpt_" + std::to_string(j + 1) + "of3", teacher.checkpoints[j],
                      {static_cast<std::uint32_t>(j + 1), 3});
    StageReport sup{"supervised", evaluate(teacher.params), {}};
    model::ModelParams best = teacher.params;

    if (plan.structure == Structure::kSupOnly || data_.unlabeled.empty()) {
      finish_stage(std::move(sup));
      return finish(std::move(best), t0);
    }

    switch (plan.structure) {
      case Structure::kSt:
        best = run_st(teacher, std::move(sup), plan.policy);
        break;
      case Structure::kStpp:
      case Structure::kRandomTwoStage:
        best = run_two_stage(teacher, std::move(sup), plan);
        break;
      case Structure::kPixelTwoStage:
        best = run_pixel_two_stage(teacher, std::move(sup), plan.policy);
        break;
      case Structure::kSupOnly:
        break;
    }
    for (int round = 1; round <= plan.extra_rounds; ++round) best = iterate(best, plan.policy, round);
    return finish(std::move(best), t0);
  }

 private:
  Evaluation evaluate(const model::ModelParams& p) const {
    return validation_.empty() ? Evaluation{} : pipeline::evaluate(p, validation_, data_.num_classes);
  }

  std::vector<SampleId> labeled_ids() const {
    std::vector<SampleId> ids;
    for (const auto& s : data_.labeled) ids.push_back(s.id);
    return ids;
  }

  bool has_references() const {
    return std::all_of(data_.unlabeled.begin(), data_.unlabeled.end(),
                       [](const auto& s) { return s.reference.has_value(); });
  }

  // Pseudo-mask mIoU over a bucket, one confusion matrix for the whole bucket.
  std::optional<double> bucket_miou(std::span<const SampleId> ids) const {
    if (ids.empty() || !has_references()) return std::nullopt;
    ConfusionMatrix cm(data_.num_classes);
    for (SampleId id : ids) {
      const auto& s = data_.find_unlabeled(id);
      cm.accumulate(*s.pseudo, *s.reference);
    }
    return cm.mean_iou();
  }

  void label(const model::ModelParams& p, std::span<const SampleId> ids, const std::string& stage) {
    for (SampleId id : ids) {
      auto& s = data_.find_unlabeled(id);
      s.pseudo = pl::pseudo_label(p, s.image, cfg_.tta);
    }
    if (sink_) sink_->pseudo_masks(stage, data_, ids);
  }

  model::ModelParams train(const StageSpec& stage) {
    if (sink_) sink_->stage_started(stage);
    auto p = retrain(initial_params(cfg_, data_.num_classes), stage, data_, cfg_);
    emit_checkpoint(stage.name, "final", p, {1, 1});
    return p;
  }

  StageSpec stage(std::string name, std::vector<SampleId> pseudo, const Policy& policy) const {
    StageSpec s;
    s.name = std::move(name);
    s.labeled = labeled_ids();
    s.pseudo = std::move(pseudo);
    s.strong_labeled = policy.labeled;
    s.strong_unlabeled = policy.unlabeled;
    return s;
  }

  model::ModelParams run_st(const StageOutput& teacher, StageReport sup, const Policy& policy) {
    const auto all = data_.unlabeled_ids();
    label(teacher.params, all, "supervised");
    if (auto q = bucket_miou(all)) sup.metrics.emplace_back("pseudo_miou", *q);
    finish_stage(std::move(sup));

    auto student = train(stage("retrain-full", all, policy));
    finish_stage({"retrain-full", evaluate(student), {}});
    return student;
  }

  model::ModelParams run_two_stage(const StageOutput& teacher, StageReport sup, const Plan& plan) {
    const auto all = data_.unlabeled_ids();
    // Stability scores always use the teacher checkpoints so selective and random runs remain comparable.
    const auto records = select::score_unlabeled(teacher.checkpoints, data_, cfg_.checkpoint_tta);
    const auto split = plan.structure == Structure::kStpp
                           ? select::rank_and_split(records, cfg_.reliable_fraction)
                           : select::random_split(all, cfg_.reliable_fraction, cfg_.seed);
    label(teacher.params, all, "supervised");
    if (auto q = bucket_miou(all)) sup.metrics.emplace_back("pseudo_miou", *q);
    finish_stage(std::move(sup));

    StageReport sel{"select", std::nullopt, {}};
    sel.metrics.emplace_back("reliable_count", static_cast<double>(split.reliable.size()));
    sel.metrics.emplace_back("unreliable_count", static_cast<double>(split.unreliable.size()));
    std::vector<double> scores, quality;
    std::unordered_map<SampleId, double> teacher_quality;
    if (has_references()) {
      for (const auto& r : records) {
        const auto& s = data_.find_unlabeled(r.id);
        const double q = mean_iou(*s.pseudo, *s.reference, data_.num_classes);
        teacher_quality[r.id] = q;
        scores.push_back(r.score);
        quality.push_back(q);
      }
      sel.metrics.emplace_back("score_quality_spearman", select::spearman(scores, quality));
    }
    if (auto q = bucket_miou(split.reliable)) sel.metrics.emplace_back("reliable_pseudo_miou", *q);
    if (auto q = bucket_miou(split.unreliable)) sel.metrics.emplace_back("unreliable_pseudo_miou", *q);
    if (sink_) {
      std::ostringstream table;
      select::write_score_table(table, records, split);
      sink_->table("select", "scores.csv", table.str());
    }

    // Phase 1: labeled + reliable.
    auto student1 = train(stage("retrain-partial", split.reliable, plan.policy));
    StageReport r1{"retrain-partial", evaluate(student1), {}};

    // Re-label the unreliable bucket with the phase-1 student.
    label(student1, split.unreliable, "retrain-partial");
    std::unordered_map<SampleId, double> relabel_quality;
    if (auto q = bucket_miou(split.unreliable)) {
      r1.metrics.emplace_back("unreliable_pseudo_miou_relabeled", *q);
      for (SampleId id : split.unreliable) {
        const auto& s = data_.find_unlabeled(id);
        relabel_quality[id] = mean_iou(*s.pseudo, *s.reference, data_.num_classes);
      }
    }
    if (sink_ && has_references()) {
      std::ostringstream table;
      table << "id,bucket,score,teacher_miou,relabeled_miou\n";
      std::unordered_map<SampleId, double> score_of;
      for (const auto& r : records) score_of[r.id] = r.score;
      auto row = [&](SampleId id, const char* bucket) {
        table << id << ',' << bucket << ',' << format_real(score_of.at(id)) << ','
              << format_real(teacher_quality.at(id)) << ',';
        if (auto it = relabel_quality.find(id); it != relabel_quality.end()) table << format_real(it->second);
        table << '\n';
      };
      for (SampleId id : split.reliable) row(id, "reliable");
      for (SampleId id : split.unreliable) row(id, "unreliable");
      sink_->table("select", "mask_quality.csv", table.str());
    }
    finish_stage(std::move(sel));
    finish_stage(std::move(r1));

    // Phase 2: re-initialized student on labeled + reliable + re-labeled unreliable.
    std::vector<SampleId> both = split.reliable;
    both.insert(both.end(), split.unreliable.begin(), split.unreliable.end());
    std::sort(both.begin(), both.end());
    auto student2 = train(stage("retrain-full", both, plan.policy));
    StageReport r2{"retrain-full", evaluate(student2), {}};
    if (auto q = bucket_miou(both)) r2.metrics.emplace_back("pseudo_miou", *q);
    finish_stage(std::move(r2));
    return student2;
  }

  model::ModelParams run_pixel_two_stage(const StageOutput& teacher, StageReport sup, const Policy& policy) {
    const auto all = data_.unlabeled_ids();
    std::unordered_map<SampleId, SegMask> confident;
    double kept = 0, total = 0;
    for (auto& s : data_.unlabeled) {
      const auto probs = pl::predict_proba_tta(teacher.params, s.image, cfg_.tta);
      SegMask filtered = select::pixel_confidence_filter(probs, cfg_.confidence_threshold);
      for (ClassId v : filtered.labels) kept += v != kIgnore;
      total += static_cast<double>(filtered.pixels());
      s.pseudo = filtered;
      confident.emplace(s.id, std::move(filtered));
    }
    if (sink_) sink_->pseudo_masks("supervised", data_, all);
    sup.metrics.emplace_back("confident_pixel_fraction", total > 0 ? kept / total : 0.0);
    if (auto q = bucket_miou(all)) sup.metrics.emplace_back("confident_pseudo_miou", *q);
    finish_stage(std::move(sup));

    auto student1 = train(stage("retrain-partial", all, policy));
    finish_stage({"retrain-partial", evaluate(student1), {}});

    // Unconfident pixels take the phase-1 student's labels.
    for (auto& s : data_.unlabeled) {
      const SegMask relabeled = pl::pseudo_label(student1, s.image, cfg_.tta);
      SegMask merged = confident.at(s.id);
      for (std::size_t p = 0; p < merged.labels.size(); ++p)
        if (merged.labels[p] == kIgnore) merged.labels[p] = relabeled.labels[p];
      s.pseudo = std::move(merged);
    }
    if (sink_) sink_->pseudo_masks("retrain-partial", data_, all);
    auto student2 = train(stage("retrain-full", all, policy));
    StageReport r2{"retrain-full", evaluate(student2), {}};
    if (auto q = bucket_miou(all)) r2.metrics.emplace_back("pseudo_miou", *q);
    finish_stage(std::move(r2));
    return student2;
  }

  model::ModelParams iterate(const model::ModelParams& best, const Policy& policy, int round) {
    const auto all = data_.unlabeled_ids();
    const std::string prev = report_.stages.back().name;
    label(best, all, prev);
    const std::string name = "retrain-round" + std::to_string(round + 2);
    auto student = train(stage(name, all, policy));
    StageReport r{name, evaluate(student), {}};
    if (auto q = bucket_miou(all)) r.metrics.emplace_back("pseudo_miou", *q);
    finish_stage(std::move(r));
    return student;
  }

  void emit_checkpoint(const std::string& stage, const std::string& name, const model::ModelParams& p,
                       model::CheckpointTag tag) {
    if (sink_) sink_->checkpoint(stage, name, p, tag);
  }

  void finish_stage(StageReport r) {
    if (validation_.empty()) r.validation.reset();
    if (sink_) sink_->stage_done(r);
    report_.stages.push_back(std::move(r));
  }

  RunResult finish(model::ModelParams best, std::chrono::steady_clock::time_point t0) {
    report_.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(best), std::move(report_)};
  }

  Dataset data_;
  std::span<const LabeledSample> validation_;
  PipelineConfig cfg_;
  ArtifactSink* sink_;
  RunReport report_;
};

Plan plan_for(std::string_view pipeline, std::string_view ablation, const PipelineConfig& cfg) {
  Plan plan;
  plan.name = std::string(pipeline);
  if (pipeline == "suponly")
    plan.structure = Structure::kSupOnly;
  else if (pipeline == "st")
    plan.structure = Structure::kSt;
  else if (pipeline == "stpp")
    plan.structure = Structure::kStpp;
  else
    fail(ErrorKind::kConfig, "unknown pipeline '" + std::string(pipeline) + "'");
  if (ablation.empty()) {
    plan.policy = make_policy(cfg, {});
    return plan;
  }
  validate_ablation_mode(ablation);
  plan.name += ":" + std::string(ablation);
  plan.policy = make_policy(cfg, ablation);
  if (is_policy_mode(ablation)) {
    require(plan.structure != Structure::kSupOnly, ErrorKind::kConfig,
            "augmentation ablations need pipeline st or stpp");
    return plan;
  }
  require(plan.structure == Structure::kStpp, ErrorKind::kConfig,
          "ablation '" + std::string(ablation) + "' is a two-stage variant and needs pipeline stpp");
  if (ablation == "random-two-stage")
    plan.structure = Structure::kRandomTwoStage;
  else if (ablation == "pixel-two-stage")
    plan.structure = Structure::kPixelTwoStage;
  else
    plan.extra_rounds = parse_iterative(ablation);
  return plan;
}

}  // namespace

void validate_ablation_mode(std::string_view mode) {
  if (is_policy_mode(mode)) {
    if (mode.starts_with("single-aug:")) (void)aug::StrongAugConfig{}.only(std::string(mode.substr(11)));
    return;
  }
  if (mode == "random-two-stage" || mode == "pixel-two-stage" || parse_iterative(mode) > 0) return;
  fail(ErrorKind::kConfig, "unknown ablation mode '" + std::string(mode) + "'");
}

RunResult run_pipeline(const Dataset& dataset, std::span<const LabeledSample> validation, const PipelineConfig& cfg,
                       std::string_view pipeline, std::string_view ablation, ArtifactSink* sink) {
  const auto plan = plan_for(pipeline, ablation, cfg);
  return Runner(dataset, validation, cfg, sink).run(plan);
}

RunResult run_suponly(const Dataset& dataset, std::span<const LabeledSample> validation, const PipelineConfig& cfg,
                      ArtifactSink* sink) {
  return run_pipeline(dataset, validation, cfg, "suponly", {}, sink);
}

RunResult run_st(const Dataset& dataset, std::span<const LabeledSample> validation, const PipelineConfig& cfg,
                 ArtifactSink* sink) {
  return run_pipeline(dataset, validation, cfg, "st", {}, sink);
}

RunResult run_stpp(const Dataset& dataset, std::span<const LabeledSample> validation, const PipelineConfig& cfg,
                   ArtifactSink* sink) {
  return run_pipeline(dataset, validation, cfg, "stpp", {}, sink);
}

RunResult run_ablation(const Dataset& dataset, std::span<const LabeledSample> validation, const PipelineConfig& cfg,
                       std::string_view mode, ArtifactSink* sink) {
  validate_ablation_mode(mode);
  return run_pipeline(dataset, validation, cfg, is_policy_mode(mode) ? "st" : "stpp", mode, sink);
}

}  // namespace stpp::pipeline
