// Copyright 2026 The EmergeLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "emergelab/shapes_world.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace emergelab {

namespace {

struct Rgb {
  double r, g, b;
};

// Saturated object colors: red, yellow, turquoise, purple.
constexpr std::array<Rgb, kValuesPerAttribute> kObjectColors = {{
    {0.95, 0.10, 0.10},
    {0.95, 0.90, 0.10},
    {0.10, 0.85, 0.80},
    {0.60, 0.15, 0.90},
}};

// Muted background palette, ten hues around the wheel.
Rgb BackgroundColor(int index, double value) {
  const double hue = static_cast<double>(index) / 10.0;
  const double sat = 0.35;
  const double h6 = hue * 6.0;
  const int sector = static_cast<int>(h6) % 6;
  const double f = h6 - std::floor(h6);
  const double p = value * (1.0 - sat);
  const double q = value * (1.0 - sat * f);
  const double t = value * (1.0 - sat * (1.0 - f));
  switch (sector) {
    case 0: return {value, t, p};
    case 1: return {q, value, p};
    case 2: return {p, value, t};
    case 3: return {p, q, value};
    case 4: return {t, p, value};
    default: return {value, p, q};
  }
}

void CheckIndex(int value, int limit, const char* what) {
  if (value < 0 || value >= limit) {
    throw std::out_of_range(std::string(what) + " index " +
                            std::to_string(value) + " outside 0.." +
                            std::to_string(limit - 1));
  }
}

// Glyph membership for an offset (dx, dy) from the centre, y pointing down.
bool InsideGlyph(int shape, double dx, double dy, double r) {
  switch (shape) {
    case 0:  // square
      return std::abs(dx) <= r && std::abs(dy) <= r;
    case 1:  // circle
      return dx * dx + dy * dy <= r * r;
    case 2:  // triangle, apex up
      if (dy < -r || dy > r) return false;
      return std::abs(dx) <= r * (dy + r) / (2.0 * r);
    default:  // diamond
      return std::abs(dx) + std::abs(dy) <= r;
  }
}

}  // namespace

double StandardNormal(Rng& rng) {
  double u1 = UniformUnit(rng);
  const double u2 = UniformUnit(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::string AttributeName(Attribute a) {
  switch (a) {
    case Attribute::kColor: return "color";
    case Attribute::kScale: return "scale";
    case Attribute::kShape: return "shape";
  }
  return "?";
}

Attribute ParseAttribute(const std::string& name) {
  if (name == "color") return Attribute::kColor;
  if (name == "scale") return Attribute::kScale;
  if (name == "shape") return Attribute::kShape;
  throw ConfigError("unknown attribute '" + name + "'");
}

void LatentFactors::Validate() const {
  CheckIndex(floor_color, kNumFloorColors, "floor_color");
  CheckIndex(wall_color, kNumWallColors, "wall_color");
  CheckIndex(object_color, kValuesPerAttribute, "object_color");
  CheckIndex(object_scale, kValuesPerAttribute, "object_scale");
  CheckIndex(object_shape, kValuesPerAttribute, "object_shape");
  CheckIndex(orientation, kNumOrientations, "orientation");
}

int ObjectClass::Value(Attribute a) const {
  switch (a) {
    case Attribute::kColor: return color;
    case Attribute::kScale: return scale;
    case Attribute::kShape: return shape;
  }
  return 0;
}

int ClassIdOf(int color, int scale, int shape) {
  CheckIndex(color, kValuesPerAttribute, "color");
  CheckIndex(scale, kValuesPerAttribute, "scale");
  CheckIndex(shape, kValuesPerAttribute, "shape");
  return color * 16 + scale * 4 + shape;
}

ObjectClass AttributesOf(int class_id) {
  CheckIndex(class_id, kNumClasses, "class_id");
  return {class_id, class_id / 16, (class_id / 4) % 4, class_id % 4};
}

int AttributeOf(int class_id, Attribute a) {
  return AttributesOf(class_id).Value(a);
}

Image::Image(ImageSize size)
    : size_(size),
      pixels_(static_cast<std::size_t>(size.height) * size.width * 3, 0.0) {
  if (size.height <= 0 || size.width <= 0) {
    throw std::invalid_argument("Image: non-positive dimensions");
  }
}

GlyphGeometry GlyphGeometryOf(const LatentFactors& latents, ImageSize size) {
  const double max_radius = 0.4 * std::min(size.height, size.width);
  const double max_offset = 0.1 * size.width;
  const double offset = (latents.orientation - (kNumOrientations - 1) / 2) /
                        static_cast<double>((kNumOrientations - 1) / 2) *
                        max_offset;
  return {size.width / 2.0 + offset, size.height / 2.0,
          (latents.object_scale + 1) / 4.0 * max_radius};
}

Image Render(const LatentFactors& latents, ImageSize size) {
  latents.Validate();
  Image image(size);
  const Rgb wall = BackgroundColor(latents.wall_color, 0.55);
  const Rgb floor = BackgroundColor(latents.floor_color, 0.40);
  const Rgb object = kObjectColors[latents.object_color];
  const GlyphGeometry g = GlyphGeometryOf(latents, size);
  constexpr int kSuper = 4;

  for (int y = 0; y < size.height; ++y) {
    const Rgb& bg = (y < size.height / 2) ? wall : floor;
    for (int x = 0; x < size.width; ++x) {
      int hits = 0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = x + (sx + 0.5) / kSuper;
          const double py = y + (sy + 0.5) / kSuper;
          if (InsideGlyph(latents.object_shape, px - g.center_x,
                          py - g.center_y, g.half_width)) {
            ++hits;
          }
        }
      }
      const double c = static_cast<double>(hits) / (kSuper * kSuper);
      image.at(y, x, 0) = c * object.r + (1.0 - c) * bg.r;
      image.at(y, x, 1) = c * object.g + (1.0 - c) * bg.g;
      image.at(y, x, 2) = c * object.b + (1.0 - c) * bg.b;
    }
  }
  return image;
}

std::pair<Image, LatentFactors> SampleInstance(int class_id, ImageSize size,
                                               Rng& rng) {
  const ObjectClass cls = AttributesOf(class_id);
  LatentFactors latents;
  latents.object_color = cls.color;
  latents.object_scale = cls.scale;
  latents.object_shape = cls.shape;
  latents.floor_color = static_cast<int>(UniformIndex(rng, kNumFloorColors));
  latents.wall_color = static_cast<int>(UniformIndex(rng, kNumWallColors));
  latents.orientation = static_cast<int>(UniformIndex(rng, kNumOrientations));
  return {Render(latents, size), latents};
}

Dataset::Dataset(ImageSize size, std::vector<DatasetItem> items,
                 std::vector<std::size_t> train, std::vector<std::size_t> test)
    : size_(size),
      items_(std::move(items)),
      train_(std::move(train)),
      test_(std::move(test)) {
  Index();
}

void Dataset::Index() {
  for (auto& v : train_by_class_) v.clear();
  for (auto& v : test_by_class_) v.clear();
  for (std::size_t i : train_) {
    train_by_class_.at(items_.at(i).class_id).push_back(i);
  }
  for (std::size_t i : test_) {
    test_by_class_.at(items_.at(i).class_id).push_back(i);
  }
}

std::vector<std::size_t> Dataset::AllOfClass(int class_id) const {
  std::vector<std::size_t> out = train_by_class_.at(class_id);
  const auto& t = test_by_class_.at(class_id);
  out.insert(out.end(), t.begin(), t.end());
  std::sort(out.begin(), out.end());
  return out;
}

bool Dataset::CoversAllClasses() const {
  for (int c = 0; c < kNumClasses; ++c) {
    if (train_by_class_[c].empty() || test_by_class_[c].empty()) return false;
  }
  return true;
}

Dataset SplitByClass(ImageSize size, std::vector<DatasetItem> items,
                     double train_fraction) {
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < items.size(); ++i) {
    by_class.at(items[i].class_id).push_back(i);
  }
  std::vector<std::size_t> train, test;
  for (const auto& members : by_class) {
    if (members.empty()) continue;
    auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(members.size())));
    if (members.size() >= 2) {
      n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
    }
    train.insert(train.end(), members.begin(), members.begin() + n_train);
    test.insert(test.end(), members.begin() + n_train, members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return Dataset(size, std::move(items), std::move(train), std::move(test));
}

Dataset BuildDataset(int instances_per_class, ImageSize size,
                     std::uint64_t seed, double train_fraction) {
  if (instances_per_class < 4) {
    throw std::invalid_argument("BuildDataset: instances_per_class must be >= 4");
  }
  Rng rng(seed);
  std::vector<DatasetItem> items;
  items.reserve(static_cast<std::size_t>(kNumClasses) * instances_per_class);
  for (int c = 0; c < kNumClasses; ++c) {
    for (int k = 0; k < instances_per_class; ++k) {
      auto [image, latents] = SampleInstance(c, size, rng);
      items.push_back({std::move(image), c, latents});
    }
  }
  return SplitByClass(size, std::move(items), train_fraction);
}

namespace {
constexpr char kDatasetMagic[] = "EMRG1";
}

Dataset IngestExternal(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file " + path);
  BinaryReader reader(in, path);
  char magic[5];
  reader.Bytes(magic, 5);
  if (std::memcmp(magic, kDatasetMagic, 5) != 0) {
    throw FormatError(path + ": bad magic, expected EMRG1");
  }
  const std::uint32_t count = reader.U32();
  const std::uint32_t height = reader.U32();
  const std::uint32_t width = reader.U32();
  if (height == 0 || width == 0 || height > 4096 || width > 4096) {
    throw FormatError(path + ": implausible image dimensions");
  }
  const ImageSize size{static_cast<int>(height), static_cast<int>(width)};
  const std::size_t n_pixels = static_cast<std::size_t>(height) * width * 3;
  std::vector<DatasetItem> items;
  items.reserve(count);
  std::vector<std::uint8_t> raw(n_pixels);
  for (std::uint32_t i = 0; i < count; ++i) {
    const int label = reader.U8();
    std::uint8_t f[6];
    reader.Bytes(reinterpret_cast<char*>(f), 6);
    LatentFactors lat{f[0], f[1], f[2], f[3], f[4], f[5]};
    if (label >= kNumClasses) {
      throw FormatError(path + ": item " + std::to_string(i) +
                        " label out of range");
    }
    try {
      lat.Validate();
    } catch (const std::out_of_range& e) {
      throw FormatError(path + ": item " + std::to_string(i) + ": " + e.what());
    }
    const int mapped =
        ClassIdOf(lat.object_color, lat.object_scale, lat.object_shape);
    if (mapped != label) {
      throw FormatError(path + ": item " + std::to_string(i) +
                        " label disagrees with its latent factors");
    }
    reader.Bytes(reinterpret_cast<char*>(raw.data()), n_pixels);
    Image image(size);
    for (std::size_t p = 0; p < n_pixels; ++p) {
      image.pixels()[p] = raw[p] / 255.0;
    }
    items.push_back({std::move(image), mapped, lat});
  }
  Dataset ds = SplitByClass(size, std::move(items));
  return ds;
}

void WriteExternal(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset file " + path);
  BinaryWriter writer(out);
  writer.Bytes(kDatasetMagic, 5);
  writer.U32(static_cast<std::uint32_t>(dataset.size()));
  writer.U32(static_cast<std::uint32_t>(dataset.image_size().height));
  writer.U32(static_cast<std::uint32_t>(dataset.image_size().width));
  for (const DatasetItem& item : dataset.items()) {
    writer.U8(static_cast<std::uint8_t>(item.class_id));
    const LatentFactors& l = item.latents;
    for (int v : {l.floor_color, l.wall_color, l.object_color, l.object_scale,
                  l.object_shape, l.orientation}) {
      writer.U8(static_cast<std::uint8_t>(v));
    }
    for (double p : item.image.pixels()) {
      writer.U8(static_cast<std::uint8_t>(
          std::lround(std::clamp(p, 0.0, 1.0) * 255.0)));
    }
  }
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace emergelab
