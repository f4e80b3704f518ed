#include "stpp/datagen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "stpp/augment.hpp"
#include "stpp/error.hpp"
#include "stpp/report_format.hpp"

namespace stpp::datagen {

void GenConfig::validate() const {
  require(image_size >= 8, ErrorKind::kConfig, "gen.image_size must be >= 8");
  require(num_classes >= 2 && num_classes < kIgnore, ErrorKind::kConfig, "gen.num_classes must be >= 2");
  require(pool_size >= 1 && validation_size >= 1, ErrorKind::kConfig, "gen pool/validation sizes must be >= 1");
  require(labeled_fraction > 0 && labeled_fraction <= 1, ErrorKind::kConfig, "gen.labeled_fraction in (0,1]");
  require(labeled_count() >= 1, ErrorKind::kConfig, "gen.labeled_fraction x pool_size must be >= 1");
  require(noise_sigma >= 0, ErrorKind::kConfig, "gen.noise_sigma must be non-negative");
  require(color_margin > 0 && color_margin <= 1, ErrorKind::kConfig, "gen.color_margin in (0,1]");
  require(max_shapes >= 1, ErrorKind::kConfig, "gen.max_shapes must be >= 1");
  require(min_shape_size >= 2 && min_shape_size <= max_shape_size, ErrorKind::kConfig,
          "gen shape sizes need 2 <= min <= max");
  require(max_shape_size < image_size, ErrorKind::kConfig, "gen.max_shape_size must be smaller than the image");
  require(texture_amplitude >= 0 && texture_amplitude <= 0.5, ErrorKind::kConfig, "gen.texture_amplitude in [0,0.5]");
  require(difficulty_spread >= 0 && difficulty_spread <= 1, ErrorKind::kConfig, "gen.difficulty_spread in [0,1]");
  require(difficulty_power > 0, ErrorKind::kConfig, "gen.difficulty_power must be positive");
}

std::size_t GenConfig::labeled_count() const {
  return static_cast<std::size_t>(std::floor(labeled_fraction * pool_size + 0.5));
}

namespace {

enum Salt : std::uint64_t { kLayout = 1, kNoise = 2, kSplit = 3 };

struct Rgb {
  double r, g, b;
};

Rgb hsv(double h, double s, double v) {
  h = (h - std::floor(h)) * 6.0;
  const int i = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

bool inside_shape(int kind, double u, double v) {
  // (u, v) in [0,1]^2 relative to the bounding box.
  switch (kind) {
    case 0: return true;                                                   // rectangle
    case 1: return (u - 0.5) * (u - 0.5) + (v - 0.5) * (v - 0.5) <= 0.25;  // ellipse
    default: return v >= std::abs(u - 0.5) * 2.0;                          // apex-up triangle
  }
}

struct Rendered {
  Image image;
  SegMask mask;
  double difficulty;
};

Rendered render(const GenConfig& cfg, SampleId id) {
  const int n = cfg.image_size;
  const int shape_classes = cfg.num_classes - 1;
  for (int attempt = 0;; ++attempt) {
    aug::RngStream rng(cfg.seed, id, static_cast<std::uint64_t>(attempt), kLayout);
    const double difficulty = std::pow(rng.uniform(0.0, 1.0), cfg.difficulty_power);

    // Textured, low-saturation background.
    const Rgb bg = hsv(rng.uniform(0, 1), rng.uniform(0.0, 0.15), rng.uniform(0.2, 0.45));
    const double fx = rng.uniform(0.3, 1.2), fy = rng.uniform(0.3, 1.2);
    const double ph1 = rng.uniform(0, 2 * std::numbers::pi), ph2 = rng.uniform(0, 2 * std::numbers::pi);
    Image img(n, n, 3);
    SegMask mask(n, n, 0);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double t = cfg.texture_amplitude * 0.5 * (std::sin(fx * x + ph1) + std::sin(fy * y + ph2));
        img.at(y, x, 0) = static_cast<float>(bg.r + t);
        img.at(y, x, 1) = static_cast<float>(bg.g + t);
        img.at(y, x, 2) = static_cast<float>(bg.b + t);
      }

    // Harder images pull object colours toward the background.
    const double pull = cfg.difficulty_spread * difficulty;
    const int count = rng.uniform_int(1, cfg.max_shapes);
    for (int s = 0; s < count; ++s) {
      const int cls = rng.uniform_int(1, shape_classes);
      const int kind = (cls - 1) % 3;
      const int bh = rng.uniform_int(cfg.min_shape_size, cfg.max_shape_size);
      const int bw = rng.uniform_int(cfg.min_shape_size, cfg.max_shape_size);
      const int top = rng.uniform_int(0, n - bh);
      const int left = rng.uniform_int(0, n - bw);
      const double hue = static_cast<double>(cls - 1) / shape_classes + rng.uniform(-0.05, 0.05);
      const Rgb proto = hsv(hue, 0.85, rng.uniform(0.75, 0.95));
      const double mix = cfg.color_margin * (1.0 - pull);
      const Rgb col{bg.r + (proto.r - bg.r) * mix, bg.g + (proto.g - bg.g) * mix, bg.b + (proto.b - bg.b) * mix};
      for (int y = top; y < top + bh; ++y)
        for (int x = left; x < left + bw; ++x) {
          if (!inside_shape(kind, (x - left + 0.5) / bw, (y - top + 0.5) / bh)) continue;
          img.at(y, x, 0) = static_cast<float>(col.r);
          img.at(y, x, 1) = static_cast<float>(col.g);
          img.at(y, x, 2) = static_cast<float>(col.b);
          mask.at(y, x) = static_cast<ClassId>(cls);
        }
    }
    const bool has_background = std::find(mask.labels.begin(), mask.labels.end(), 0) != mask.labels.end();
    if (!has_background) continue;

    // Pixel noise grows with difficulty; standard draws are scaled so noise levels share structure.
    aug::RngStream noise(cfg.seed, id, static_cast<std::uint64_t>(attempt), kNoise);
    const double sigma = cfg.noise_sigma * (0.25 + 1.5 * difficulty);
    for (auto& v : img.data) v = static_cast<float>(std::clamp(v + sigma * noise.normal(0.0, 1.0), 0.0, 1.0));
    return {std::move(img), std::move(mask), difficulty};
  }
}

}  // namespace

GeneratedData generate(const GenConfig& cfg) {
  cfg.validate();
  GeneratedData out;
  out.level = cfg.noise_sigma;
  out.train.num_classes = cfg.num_classes;
  const auto pool = static_cast<SampleId>(cfg.pool_size);

  std::vector<SampleId> order(pool);
  for (SampleId i = 0; i < pool; ++i) order[i] = i;
  aug::RngStream split(cfg.seed, 0, 0, kSplit);
  std::shuffle(order.begin(), order.end(), split.engine());
  std::vector<bool> is_labeled(pool, false);
  for (std::size_t i = 0; i < cfg.labeled_count(); ++i) is_labeled[order[i]] = true;

  out.difficulty.resize(pool);
  for (SampleId id = 0; id < pool; ++id) {
    auto r = render(cfg, id);
    out.difficulty[id] = r.difficulty;
    if (is_labeled[id])
      out.train.labeled.push_back({id, std::move(r.image), std::move(r.mask)});
    else
      out.train.unlabeled.push_back({id, std::move(r.image), std::nullopt, std::move(r.mask)});
  }
  for (int v = 0; v < cfg.validation_size; ++v) {
    const SampleId id = pool + static_cast<SampleId>(v);
    auto r = render(cfg, id);
    out.validation.push_back({id, std::move(r.image), std::move(r.mask)});
  }
  return out;
}

std::vector<GeneratedData> difficulty_sweep(const GenConfig& cfg, std::span<const double> levels) {
  require(!levels.empty(), ErrorKind::kConfig, "difficulty_sweep: no levels");
  std::vector<GeneratedData> out;
  for (double level : levels) {
    GenConfig c = cfg;
    c.noise_sigma = level;
    out.push_back(generate(c));
  }
  return out;
}

// ---------------------------------------------------------------------------

void write_dataset(const std::filesystem::path& dir, const GeneratedData& data) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  std::ofstream manifest(dir / "manifest.csv", std::ios::trunc);
  if (!manifest) fail(ErrorKind::kIo, "cannot write " + (dir / "manifest.csv").string());
  manifest << "id,split,image,mask,level,difficulty\n";
  const int nc = data.train.num_classes;
  auto emit = [&](SampleId id, const char* split, const Image& img, const SegMask& mask) {
    const std::string base = std::to_string(id);
    write_image(dir / "images" / (base + ".img"), img);
    write_mask(dir / "masks" / (base + ".mask"), mask, nc);
    const double diff = id < data.difficulty.size() ? data.difficulty[id] : 0.0;
    manifest << id << ',' << split << ",images/" << base << ".img,masks/" << base << ".mask,"
             << format_real(data.level) << ',' << format_real(diff) << '\n';
  };
  for (const auto& s : data.train.labeled) emit(s.id, "labeled", s.image, s.mask);
  for (const auto& s : data.train.unlabeled) {
    require(s.reference.has_value(), ErrorKind::kConfig, "write_dataset: unlabeled sample without ground truth");
    emit(s.id, "unlabeled", s.image, *s.reference);
  }
  for (const auto& s : data.validation) emit(s.id, "validation", s.image, s.mask);
}

GeneratedData read_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) fail(ErrorKind::kIo, "missing manifest " + (dir / "manifest.csv").string());
  std::string line;
  std::getline(manifest, line);
  require(line == "id,split,image,mask,level,difficulty", ErrorKind::kFormat, "manifest: unexpected header");
  GeneratedData out;
  int nc = 0;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string id_s, split, img_path, mask_path, level_s, diff_s;
    std::getline(row, id_s, ',');
    std::getline(row, split, ',');
    std::getline(row, img_path, ',');
    std::getline(row, mask_path, ',');
    std::getline(row, level_s, ',');
    std::getline(row, diff_s, ',');
    require(!mask_path.empty() && !diff_s.empty(), ErrorKind::kFormat, "manifest: short row '" + line + "'");
    const auto id = static_cast<SampleId>(std::stoul(id_s));
    Image img = read_image(dir / img_path);
    int mask_classes = 0;
    SegMask mask = read_mask(dir / mask_path, &mask_classes);
    nc = std::max(nc, mask_classes);
    out.level = std::stod(level_s);
    if (split == "labeled") {
      out.train.labeled.push_back({id, std::move(img), std::move(mask)});
    } else if (split == "unlabeled") {
      out.train.unlabeled.push_back({id, std::move(img), std::nullopt, std::move(mask)});
    } else if (split == "validation") {
      out.validation.push_back({id, std::move(img), std::move(mask)});
      continue;
    } else {
      fail(ErrorKind::kFormat, "manifest: unknown split '" + split + "'");
    }
    if (out.difficulty.size() <= id) out.difficulty.resize(id + 1, 0.0);
    out.difficulty[id] = std::stod(diff_s);
  }
  out.train.num_classes = nc;
  validate(out.train);
  return out;
}

}  // namespace stpp::datagen
