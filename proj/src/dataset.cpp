#include "cogo/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "cogo/error.hpp"
#include "cogo/image_io.hpp"
#include "cogo/rng.hpp"

namespace cogo {

namespace {

enum class ShapeKind { disk, square, triangle, cross, ring };
constexpr std::array<const char*, 5> kShapeNames = {"disk", "square", "triangle", "cross", "ring"};
constexpr std::array<const char*, 2> kTextureNames = {"solid", "striped"};

using Color = std::array<float, 3>;

bool inside(ShapeKind kind, float x, float y, float r) {
  switch (kind) {
    case ShapeKind::disk:
      return x * x + y * y <= r * r;
    case ShapeKind::square:
      return std::abs(x) <= 0.85f * r && std::abs(y) <= 0.85f * r;
    case ShapeKind::triangle: {
      // Equilateral triangle inscribed in radius r; outward edge normals at
      // 90 + 120k degrees, inradius r/2.
      for (int k = 0; k < 3; ++k) {
        const float a = static_cast<float>(std::numbers::pi / 2.0 + k * 2.0 * std::numbers::pi / 3.0);
        if (-(x * std::cos(a) + y * std::sin(a)) > 0.5f * r) return false;
      }
      return true;
    }
    case ShapeKind::cross:
      return (std::abs(x) <= 0.3f * r && std::abs(y) <= r) || (std::abs(y) <= 0.3f * r && std::abs(x) <= r);
    case ShapeKind::ring: {
      const float d2 = x * x + y * y;
      return d2 <= r * r && d2 >= 0.3f * r * r;
    }
  }
  return false;
}

Color random_color(Rng& rng, float lo, float hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

// Renders one 32x32 sample of class `label` into `out` (3*32*32 floats).
void render(int label, Rng& rng, float* out) {
  constexpr std::size_t n = kImageSize;
  const auto kind = static_cast<ShapeKind>(label / 2);
  const bool striped = (label % 2) == 1;

  // Dark background, bright foreground, half-brightness stripes: the class is
  // carried by outline and texture, never by color alone.
  const Color bg0 = random_color(rng, 0.0f, 0.3f);
  const Color bg1 = random_color(rng, 0.0f, 0.3f);
  const float bg_angle = rng.uniform(0.0f, 2.0f * std::numbers::pi_v<float>);
  const Color fg = random_color(rng, 0.65f, 1.0f);
  const Color stripe = {0.55f * fg[0], 0.55f * fg[1], 0.55f * fg[2]};

  const float radius = rng.uniform(9.0f, 12.0f);
  const float cx = n / 2.0f + rng.uniform(-3.0f, 3.0f);
  const float cy = n / 2.0f + rng.uniform(-3.0f, 3.0f);
  const float theta = rng.uniform(0.0f, 2.0f * std::numbers::pi_v<float>);
  const float stripe_angle = rng.uniform(0.0f, std::numbers::pi_v<float>);
  const float period = rng.uniform(2.5f, 3.5f);
  const float ct = std::cos(theta), st = std::sin(theta);
  const float sx = std::cos(stripe_angle), sy = std::sin(stripe_angle);
  const float gx = std::cos(bg_angle), gy = std::sin(bg_angle);

  for (std::size_t py = 0; py < n; ++py) {
    for (std::size_t px = 0; px < n; ++px) {
      // Background: linear blend of two colors along a random direction.
      const float t = std::clamp(0.5f + ((px - n / 2.0f) * gx + (py - n / 2.0f) * gy) / n, 0.0f, 1.0f);
      Color acc{};
      // 2x2 supersampling for antialiased edges.
      for (int sub = 0; sub < 4; ++sub) {
        const float ux = px + 0.25f + 0.5f * (sub % 2) - cx;
        const float uy = py + 0.25f + 0.5f * (sub / 2) - cy;
        const float rx = ct * ux + st * uy;
        const float ry = -st * ux + ct * uy;
        Color c;
        if (inside(kind, rx, ry, radius)) {
          const bool band = striped && static_cast<int>(std::floor((ux * sx + uy * sy) / period)) % 2 != 0;
          c = band ? stripe : fg;
        } else {
          for (int k = 0; k < 3; ++k) c[k] = (1.0f - t) * bg0[k] + t * bg1[k];
        }
        for (int k = 0; k < 3; ++k) acc[k] += 0.25f * c[k];
      }
      for (int k = 0; k < 3; ++k) {
        const float noisy = acc[k] + static_cast<float>(0.02 * rng.normal());
        out[k * n * n + py * n + px] = quantize8(noisy);
      }
    }
  }
}

std::uint64_t split_tag(Split s) {
  switch (s) {
    case Split::train: return 101;
    case Split::val: return 202;
    case Split::eval: return 303;
  }
  return 0;
}

std::vector<std::string> split_fields(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

template <class T>
T parse_number(const std::string& s, const char* what) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError(std::string("invalid ") + what + ": '" + s + "'");
  return v;
}

}  // namespace

std::size_t Dataset::image_numel() const {
  return images.shape.size() == 4 ? images.shape[1] * images.shape[2] * images.shape[3] : 0;
}

Array Dataset::image(std::size_t index) const {
  if (index >= size()) throw ConfigError("dataset index out of range");
  const std::size_t m = image_numel();
  return Array({images.shape[1], images.shape[2], images.shape[3]},
               std::vector<float>(images.data.begin() + index * m, images.data.begin() + (index + 1) * m));
}

Array Dataset::gather(std::span<const std::size_t> indices) const {
  const std::size_t m = image_numel();
  Array out({indices.size(), images.shape[1], images.shape[2], images.shape[3]});
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size()) throw ConfigError("dataset index out of range");
    std::copy_n(images.data.begin() + indices[k] * m, m, out.data.begin() + k * m);
  }
  return out;
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset Dataset::head(std::size_t count) const {
  count = std::min(count, size());
  const std::size_t m = image_numel();
  Dataset d;
  d.images = Array({count, images.shape[1], images.shape[2], images.shape[3]},
                   std::vector<float>(images.data.begin(), images.data.begin() + count * m));
  d.labels.assign(labels.begin(), labels.begin() + count);
  return d;
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "eval") return Split::eval;
  throw ConfigError("unknown split '" + name + "' (expected train, val or eval)");
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::eval: return "eval";
  }
  return "?";
}

std::string class_name(int label) {
  if (label < 0 || label >= kNumClasses) throw ConfigError("label out of range");
  return std::string(kShapeNames[label / 2]) + "/" + kTextureNames[label % 2];
}

Dataset generate_procedural(std::uint64_t seed, std::size_t n_per_class, Split split) {
  const std::size_t total = n_per_class * kNumClasses;
  const std::size_t m = 3 * kImageSize * kImageSize;
  Dataset d;
  d.images = Array({total, 3, kImageSize, kImageSize});
  d.labels.resize(total);
  const Rng base = Rng(seed).substream(split_tag(split));
  for (std::size_t i = 0; i < total; ++i) {
    const int label = static_cast<int>(i % kNumClasses);
    Rng rng(base.substream(0).next_u64(), i);
    render(label, rng, d.images.data.data() + i * m);
    d.labels[i] = label;
  }
  return d;
}

void write_image_dir(const Dataset& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw IoError("cannot create " + (dir / "images").string() + ": " + ec.message());
  std::ofstream manifest(dir / "labels.csv", std::ios::binary);
  if (!manifest) throw IoError("cannot write " + (dir / "labels.csv").string());
  manifest << "path,label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::ostringstream name;
    name << "images/" << std::setw(5) << std::setfill('0') << i << ".png";
    write_png_rgb(dir / name.str(), data.image(i));
    manifest << name.str() << ',' << data.labels[i] << '\n';
  }
  if (!manifest) throw IoError("failed writing " + (dir / "labels.csv").string());
}

Dataset load_image_dir(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "labels.csv");
  if (!manifest) throw IoError("cannot read " + (dir / "labels.csv").string());
  std::string line;
  std::getline(manifest, line);
  if (line.rfind("path,label", 0) != 0) throw IoError("labels.csv must start with header 'path,label'");
  std::vector<Array> imgs;
  Dataset d;
  while (std::getline(manifest, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw IoError("malformed manifest row: " + line);
    imgs.push_back(read_png(dir / line.substr(0, comma)));
    d.labels.push_back(parse_number<int>(line.substr(comma + 1), "label"));
    if (imgs.back().shape != imgs.front().shape) throw IoError("images in " + dir.string() + " differ in size");
  }
  if (imgs.empty()) throw IoError("manifest " + (dir / "labels.csv").string() + " lists no images");
  const Shape& s = imgs.front().shape;
  d.images = Array({imgs.size(), s[0], s[1], s[2]});
  const std::size_t m = numel(s);
  for (std::size_t i = 0; i < imgs.size(); ++i) std::copy(imgs[i].data.begin(), imgs[i].data.end(), d.images.data.begin() + i * m);
  return d;
}

Dataset load_dataset(const std::string& ref) {
  if (ref.rfind("procedural:", 0) == 0) {
    const auto f = split_fields(ref, ':');
    if (f.size() != 4) throw ConfigError("procedural dataset reference must be procedural:SEED:N_PER_CLASS:SPLIT");
    return generate_procedural(parse_number<std::uint64_t>(f[1], "seed"),
                               parse_number<std::size_t>(f[2], "n_per_class"), parse_split(f[3]));
  }
  return load_image_dir(ref);
}

}  // namespace cogo
