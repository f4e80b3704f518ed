#include "stpp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stpp/error.hpp"
#include "stpp/report_format.hpp"

namespace stpp::exp {

using nlohmann::json;

namespace {

// Strict view over one JSON object: every key must be consumed.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    require(node_.is_object(), ErrorKind::kConfig, "'" + display() + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    used_.insert(key);
    auto it = node_.find(key);
    if (it == node_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      fail(ErrorKind::kConfig, "'" + qualified(key) + "' has the wrong type");
    }
  }

  void range(const char* key, double& lo, double& hi) {
    std::vector<double> v{lo, hi};
    get(key, v);
    require(v.size() == 2, ErrorKind::kConfig, "'" + qualified(key) + "' must be [low, high]");
    lo = v[0];
    hi = v[1];
  }

  Section child(const char* key) {
    used_.insert(key);
    auto it = node_.find(key);
    return Section(it == node_.end() ? empty() : *it, qualified(key));
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it)
      if (!used_.count(it.key())) fail(ErrorKind::kConfig, "unknown config key '" + qualified(it.key()) + "'");
  }

 private:
  static const json& empty() {
    static const json e = json::object();
    return e;
  }
  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json& node_;
  std::string path_;
  std::set<std::string> used_;
};

void read_tta(Section s, pl::TtaConfig& tta) {
  s.get("scales", tta.scales);
  s.get("use_flip", tta.use_flip);
  s.finish();
}

json tta_json(const pl::TtaConfig& tta) { return {{"scales", tta.scales}, {"use_flip", tta.use_flip}}; }

json to_json(const ExperimentConfig& c) {
  const auto& d = c.data;
  const auto& p = c.pipeline;
  const auto& t = p.train;
  const auto& s = p.strong;
  json j;
  j["data"] = {{"image_size", d.image_size},
               {"num_classes", d.num_classes},
               {"pool_size", d.pool_size},
               {"validation_size", d.validation_size},
               {"labeled_fraction", d.labeled_fraction},
               {"noise_sigma", d.noise_sigma},
               {"color_margin", d.color_margin},
               {"max_shapes", d.max_shapes},
               {"min_shape_size", d.min_shape_size},
               {"max_shape_size", d.max_shape_size},
               {"texture_amplitude", d.texture_amplitude},
               {"difficulty_spread", d.difficulty_spread},
               {"difficulty_power", d.difficulty_power}};
  j["train"] = {{"base_lr", t.base_lr},
                {"momentum", t.momentum},
                {"weight_decay", t.weight_decay},
                {"batch_size", t.batch_size},
                {"epochs", t.epochs},
                {"poly_power", t.poly_power},
                {"unlabeled_loss_weight", t.unlabeled_loss_weight},
                {"head_lr_multiplier", t.head_lr_multiplier},
                {"grad_threads", t.grad_threads}};
  j["weak"] = {{"flip_prob", p.weak.flip_prob},
               {"scale_range", {p.weak.scale_low, p.weak.scale_high}},
               {"crop_size", p.weak.crop_size}};
  j["strong"] = {
      {"colorjitter",
       {{"brightness", s.colorjitter.brightness},
        {"contrast", s.colorjitter.contrast},
        {"saturation", s.colorjitter.saturation},
        {"hue", s.colorjitter.hue},
        {"apply_prob", s.colorjitter.apply_prob}}},
      {"grayscale_prob", s.grayscale_prob},
      {"blur", {{"apply_prob", s.blur.apply_prob}, {"sigma_range", {s.blur.sigma_low, s.blur.sigma_high}}}},
      {"cutout",
       {{"apply_prob", s.cutout.apply_prob},
        {"area_fraction_range", {s.cutout.area_low, s.cutout.area_high}},
        {"aspect_range", {s.cutout.aspect_low, s.cutout.aspect_high}}}}};
  j["tta"] = tta_json(p.tta);
  j["checkpoint_tta"] = tta_json(p.checkpoint_tta);
  j["selection"] = {{"reliable_fraction", p.reliable_fraction}, {"confidence_threshold", p.confidence_threshold}};
  j["sda"] = p.sda;
  j["pipeline"] = c.pipeline_name;
  j["ablation"] = c.ablation;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section top(root, "");
  {
    auto s = top.child("data");
    auto& d = c.data;
    s.get("image_size", d.image_size);
    s.get("num_classes", d.num_classes);
    s.get("pool_size", d.pool_size);
    s.get("validation_size", d.validation_size);
    s.get("labeled_fraction", d.labeled_fraction);
    s.get("noise_sigma", d.noise_sigma);
    s.get("color_margin", d.color_margin);
    s.get("max_shapes", d.max_shapes);
    s.get("min_shape_size", d.min_shape_size);
    s.get("max_shape_size", d.max_shape_size);
    s.get("texture_amplitude", d.texture_amplitude);
    s.get("difficulty_spread", d.difficulty_spread);
    s.get("difficulty_power", d.difficulty_power);
    s.finish();
  }
  {
    auto s = top.child("train");
    auto& t = c.pipeline.train;
    s.get("base_lr", t.base_lr);
    s.get("momentum", t.momentum);
    s.get("weight_decay", t.weight_decay);
    s.get("batch_size", t.batch_size);
    s.get("epochs", t.epochs);
    s.get("poly_power", t.poly_power);
    s.get("unlabeled_loss_weight", t.unlabeled_loss_weight);
    s.get("head_lr_multiplier", t.head_lr_multiplier);
    s.get("grad_threads", t.grad_threads);
    s.finish();
  }
  {
    auto s = top.child("weak");
    auto& w = c.pipeline.weak;
    s.get("flip_prob", w.flip_prob);
    s.range("scale_range", w.scale_low, w.scale_high);
    s.get("crop_size", w.crop_size);
    s.finish();
  }
  {
    auto s = top.child("strong");
    auto& st = c.pipeline.strong;
    {
      auto cj = s.child("colorjitter");
      cj.get("brightness", st.colorjitter.brightness);
      cj.get("contrast", st.colorjitter.contrast);
      cj.get("saturation", st.colorjitter.saturation);
      cj.get("hue", st.colorjitter.hue);
      cj.get("apply_prob", st.colorjitter.apply_prob);
      cj.finish();
    }
    s.get("grayscale_prob", st.grayscale_prob);
    {
      auto b = s.child("blur");
      b.get("apply_prob", st.blur.apply_prob);
      b.range("sigma_range", st.blur.sigma_low, st.blur.sigma_high);
      b.finish();
    }
    {
      auto co = s.child("cutout");
      co.get("apply_prob", st.cutout.apply_prob);
      co.range("area_fraction_range", st.cutout.area_low, st.cutout.area_high);
      co.range("aspect_range", st.cutout.aspect_low, st.cutout.aspect_high);
      co.finish();
    }
    s.finish();
  }
  read_tta(top.child("tta"), c.pipeline.tta);
  read_tta(top.child("checkpoint_tta"), c.pipeline.checkpoint_tta);
  {
    auto s = top.child("selection");
    s.get("reliable_fraction", c.pipeline.reliable_fraction);
    s.get("confidence_threshold", c.pipeline.confidence_threshold);
    s.finish();
  }
  top.get("sda", c.pipeline.sda);
  top.get("pipeline", c.pipeline_name);
  top.get("ablation", c.ablation);
  top.get("seeds", c.seeds);
  top.get("output_dir", c.output_dir);
  top.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& cfg) { return to_json(cfg).dump(2); }

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  auto j = to_json(cfg);
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

void validate_experiment(const ExperimentConfig& cfg) {
  cfg.data.validate();
  cfg.pipeline.validate();
  require(cfg.pipeline.weak.crop_size <= cfg.data.image_size, ErrorKind::kConfig,
          "weak.crop_size must not exceed data.image_size");
  require(cfg.pipeline.reliable_fraction > 0 && cfg.pipeline.reliable_fraction < 1, ErrorKind::kConfig,
          "selection.reliable_fraction must be in (0,1)");
  require(!cfg.pipeline.tta.scales.empty() && !cfg.pipeline.checkpoint_tta.scales.empty(), ErrorKind::kConfig,
          "tta scales must not be empty");
  require(!cfg.seeds.empty(), ErrorKind::kConfig, "seeds must not be empty");
  require(cfg.pipeline_name == "suponly" || cfg.pipeline_name == "st" || cfg.pipeline_name == "stpp",
          ErrorKind::kConfig, "pipeline must be suponly, st or stpp");
  if (!cfg.ablation.empty()) pipeline::validate_ablation_mode(cfg.ablation);
}

std::filesystem::path output_root(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("STPP_OUTPUT_ROOT"); env && *env) return env;
  return cfg.output_dir;
}

datagen::GenConfig data_for_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  auto d = cfg.data;
  d.seed = seed;
  return d;
}

pipeline::PipelineConfig pipeline_for_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  auto p = cfg.pipeline;
  p.seed = seed;
  p.config_hash = config_hash(cfg);
  return p;
}

std::string run_name(const std::string& pipeline, const std::string& ablation, std::uint64_t seed) {
  std::string name = pipeline;
  if (!ablation.empty()) {
    name += "-";
    for (char ch : ablation) name += (ch == ':' || ch == '+' || ch == '/') ? '_' : ch;
  }
  return name + "-seed" + std::to_string(seed);
}

// ---------------------------------------------------------------------------

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

class DirectorySink final : public pipeline::ArtifactSink {
 public:
  DirectorySink(std::filesystem::path dir, std::uint64_t hash, std::uint64_t seed)
      : dir_(std::move(dir)), hash_(hash), seed_(seed) {}

  void checkpoint(const std::string& stage, const std::string& name, const model::ModelParams& params,
                  model::CheckpointTag tag) override {
    const auto rel = std::filesystem::path(stage) / (name + ".ckpt");
    write_file(dir_ / rel, model::save_checkpoint(params, tag, hash_));
    record(rel, stage);
  }

  void pseudo_masks(const std::string& stage, const Dataset& dataset, std::span<const SampleId> ids) override {
    for (SampleId id : ids) {
      const auto rel = std::filesystem::path(stage) / "pseudo_masks" / (std::to_string(id) + ".mask");
      write_mask(dir_ / rel, *dataset.find_unlabeled(id).pseudo, dataset.num_classes);
      record(rel, stage);
    }
  }

  void table(const std::string& stage, const std::string& file_name, const std::string& csv) override {
    const auto rel = std::filesystem::path(stage) / file_name;
    write_text(dir_ / rel, csv);
    record(rel, stage);
  }

  void stage_done(const pipeline::StageReport& report) override {
    const auto rel = std::filesystem::path(report.name) / "report_fragment.csv";
    write_text(dir_ / rel, report.fragment());
    record(rel, report.name);
  }

  void record(const std::filesystem::path& rel, const std::string& stage) {
    rows_.emplace_back(rel.generic_string() + "," + hash_hex(hash_) + "," + std::to_string(seed_) + "," + stage);
  }

  std::string manifest() const {
    std::string out = "path,config_hash,seed,stage\n";
    for (const auto& r : rows_) out += r + "\n";
    return out;
  }

 private:
  std::filesystem::path dir_;
  std::uint64_t hash_;
  std::uint64_t seed_;
  std::vector<std::string> rows_;
};

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& pipeline,
                          const std::string& ablation, const std::filesystem::path& root,
                          const datagen::GeneratedData* data) {
  validate_experiment(cfg);
  std::optional<datagen::GeneratedData> generated;
  if (!data) {
    generated = datagen::generate(data_for_seed(cfg, seed));
    data = &*generated;
  }
  const auto pcfg = pipeline_for_seed(cfg, seed);
  RunOutcome out;
  out.dir = root / run_name(pipeline, ablation, seed);
  std::filesystem::remove_all(out.dir);
  std::filesystem::create_directories(out.dir);

  DirectorySink sink(out.dir, pcfg.config_hash, seed);
  out.result = pipeline::run_pipeline(data->train, data->validation, pcfg, pipeline, ablation, &sink);

  // Stage fragments concatenated under the run header.
  write_text(out.dir / "report.csv", out.result.report.body());
  sink.record("report.csv", "run");
  write_text(out.dir / "timing.csv", "stage,wall_clock_seconds\nrun," +
                                         format_real(out.result.report.wall_clock_seconds) + "\n");
  sink.record("timing.csv", "run");
  write_text(out.dir / "config.json", dump_config(cfg) + "\n");
  sink.record("config.json", "run");
  write_text(out.dir / "manifest.csv", sink.manifest());
  return out;
}

// ---------------------------------------------------------------------------

std::vector<BenchmarkEntry> default_benchmark_entries() {
  return {{"suponly", ""}, {"st", ""}, {"stpp", ""}, {"stpp", "random-two-stage"}};
}

double BenchmarkResult::final_miou(std::uint64_t seed, const std::string& label) const {
  const auto& rep = reports.at(seed).at(label);
  require(!rep.stages.empty() && rep.stages.back().validation.has_value(), ErrorKind::kStage,
          "benchmark: run " + label + " has no final validation score");
  return rep.stages.back().validation->miou;
}

namespace {

struct Stats {
  std::size_t n = 0;
  double mean = 0, stddev = 0, min = 0, max = 0;
};

Stats stats_of(const std::vector<double>& v) {
  Stats s;
  s.n = v.size();
  if (v.empty()) return s;
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.stddev += (x - s.mean) * (x - s.mean);
  s.stddev = v.size() > 1 ? std::sqrt(s.stddev / static_cast<double>(v.size() - 1)) : 0.0;
  return s;
}

}  // namespace

BenchmarkResult run_benchmark(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                              const std::vector<BenchmarkEntry>& entries, const std::filesystem::path& root,
                              int jobs) {
  validate_experiment(cfg);
  require(!seeds.empty(), ErrorKind::kConfig, "benchmark: no seeds");
  require(!entries.empty(), ErrorKind::kConfig, "benchmark: no pipelines");
  for (const auto& e : entries) {
    auto c = cfg;
    c.pipeline_name = e.pipeline;
    c.ablation = e.ablation;
    validate_experiment(c);
  }

  auto run_seed = [&](std::uint64_t seed) {
    const auto data = datagen::generate(data_for_seed(cfg, seed));
    std::map<std::string, pipeline::RunReport> out;
    for (const auto& e : entries)
      out[e.label()] = run_experiment(cfg, seed, e.pipeline, e.ablation, root, &data).result.report;
    return out;
  };

  BenchmarkResult res;
  res.seeds = seeds;
  res.entries = entries;
  const std::size_t width = static_cast<std::size_t>(std::max(1, jobs));
  for (std::size_t start = 0; start < seeds.size(); start += width) {
    std::vector<std::future<std::map<std::string, pipeline::RunReport>>> pending;
    for (std::size_t i = start; i < std::min(seeds.size(), start + width); ++i)
      pending.push_back(std::async(width == 1 ? std::launch::deferred : std::launch::async, run_seed, seeds[i]));
    for (std::size_t i = 0; i < pending.size(); ++i) res.reports[seeds[start + i]] = pending[i].get();
  }

  std::string curves = "seed,pipeline,stage_index,stage,val_miou\n";
  for (std::uint64_t seed : seeds) {
    std::string per_seed = "pipeline,stage,val_miou\n";
    for (const auto& e : entries) {
      const auto& rep = res.reports.at(seed).at(e.label());
      int index = 0;
      for (const auto& st : rep.stages) {
        if (!st.validation) continue;
        per_seed += e.label() + "," + st.name + "," + format_real(st.validation->miou) + "\n";
        curves += std::to_string(seed) + "," + e.label() + "," + std::to_string(index++) + "," + st.name + "," +
                  format_real(st.validation->miou) + "\n";
      }
    }
    write_text(root / ("seed_" + std::to_string(seed) + ".csv"), per_seed);
  }
  write_text(root / "stage_curves.csv", curves);

  std::string agg = "pipeline,metric,n,mean,std,min,max\n";
  auto add_row = [&](const std::string& label, const std::string& metric, const std::vector<double>& values) {
    if (values.empty()) return;
    const auto s = stats_of(values);
    agg += label + "," + metric + "," + std::to_string(s.n) + "," + format_real(s.mean) + "," +
           format_real(s.stddev) + "," + format_real(s.min) + "," + format_real(s.max) + "\n";
  };
  for (const auto& e : entries) {
    std::vector<double> finals;
    std::map<std::string, std::vector<double>> extra;
    for (std::uint64_t seed : seeds) {
      finals.push_back(res.final_miou(seed, e.label()));
      const auto& rep = res.reports.at(seed).at(e.label());
      for (const char* m : {"reliable_pseudo_miou", "unreliable_pseudo_miou", "score_quality_spearman"})
        if (auto v = rep.metric("select", m)) extra[m].push_back(*v);
      if (auto v = rep.metric("retrain-partial", "unreliable_pseudo_miou_relabeled"))
        extra["unreliable_pseudo_miou_relabeled"].push_back(*v);
    }
    add_row(e.label(), "final_val_miou", finals);
    for (const auto& [m, values] : extra) add_row(e.label(), m, values);
  }
  write_text(root / "aggregate.csv", agg);
  return res;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

void inspect_scores(const std::filesystem::path& run_dir, std::ostream& out) {
  const auto scores_path = run_dir / "select" / "scores.csv";
  require(std::filesystem::exists(scores_path), ErrorKind::kIo,
          "no score table at " + scores_path.string() + " (only ST++ runs produce one)");
  const auto scores = read_csv(scores_path);
  require(!scores.empty() && scores[0] == std::vector<std::string>{"id", "score", "bucket"}, ErrorKind::kFormat,
          "scores.csv: unexpected header");
  out << read_text(scores_path) << '\n';

  struct Bucket {
    int count = 0;
    double score = 0, teacher = 0, relabeled = 0;
    int relabeled_n = 0;
  };
  std::map<std::string, Bucket> buckets;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    require(scores[i].size() == 3, ErrorKind::kFormat, "scores.csv: malformed row");
    auto& b = buckets[scores[i][2]];
    ++b.count;
    b.score += std::stod(scores[i][1]);
  }
  const auto quality_path = run_dir / "select" / "mask_quality.csv";
  const bool have_quality = std::filesystem::exists(quality_path);
  if (have_quality) {
    const auto rows = read_csv(quality_path);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      require(rows[i].size() == 5, ErrorKind::kFormat, "mask_quality.csv: malformed row");
      auto& b = buckets[rows[i][1]];
      b.teacher += std::stod(rows[i][3]);
      if (!rows[i][4].empty()) {
        b.relabeled += std::stod(rows[i][4]);
        ++b.relabeled_n;
      }
    }
  }
  std::map<std::string, std::string> report;
  if (std::filesystem::exists(run_dir / "report.csv"))
    for (const auto& row : read_csv(run_dir / "report.csv"))
      if (row.size() == 4) report[row[0] + "/" + row[1]] = row[3];

  out << "bucket,count,mean_score,mean_image_miou_teacher,mean_image_miou_relabeled,bucket_pseudo_miou\n";
  for (const char* name : {"reliable", "unreliable"}) {
    const auto it = buckets.find(name);
    if (it == buckets.end()) continue;
    const auto& b = it->second;
    out << name << ',' << b.count << ',' << format_real(b.score / b.count) << ',';
    if (have_quality) out << format_real(b.teacher / b.count);
    out << ',';
    if (b.relabeled_n > 0) out << format_real(b.relabeled / b.relabeled_n);
    out << ',';
    if (auto r = report.find(std::string("select/") + name + "_pseudo_miou"); r != report.end()) out << r->second;
    out << '\n';
  }
  if (auto r = report.find("select/score_quality_spearman"); r != report.end())
    out << "score_quality_spearman," << r->second << '\n';
  if (auto r = report.find("retrain-partial/unreliable_pseudo_miou_relabeled"); r != report.end())
    out << "unreliable_pseudo_miou_relabeled," << r->second << '\n';
}

}  // namespace stpp::exp
