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

// Procedural compositional object world: 4 colors x 4 scales x 4 shapes
// rendered as 2-D glyphs over a wall/floor background whose colors and the
// glyph's horizontal offset are nuisance factors.

#ifndef EMERGELAB_SHAPES_WORLD_HPP_
#define EMERGELAB_SHAPES_WORLD_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "emergelab/common.hpp"

namespace emergelab {

inline constexpr int kValuesPerAttribute = 4;
inline constexpr int kNumClasses = 64;
inline constexpr int kNumAttributes = 3;

inline constexpr int kNumFloorColors = 10;
inline constexpr int kNumWallColors = 10;
inline constexpr int kNumOrientations = 15;

enum class Attribute : int { kColor = 0, kScale = 1, kShape = 2 };

inline constexpr std::array<Attribute, 3> kAllAttributes = {
    Attribute::kColor, Attribute::kScale, Attribute::kShape};

std::string AttributeName(Attribute a);
// Accepts "color", "scale", "shape"; throws ConfigError otherwise.
Attribute ParseAttribute(const std::string& name);

struct LatentFactors {
  int floor_color = 0;   // 0..9
  int wall_color = 0;    // 0..9
  int object_color = 0;  // 0..3
  int object_scale = 0;  // 0..3
  int object_shape = 0;  // 0..3
  int orientation = 0;   // 0..14

  // Throws std::out_of_range naming the offending factor.
  void Validate() const;
  bool operator==(const LatentFactors&) const = default;
};

struct ObjectClass {
  int class_id = 0;
  int color = 0;
  int scale = 0;
  int shape = 0;

  int Value(Attribute a) const;
};

// Color occupies contiguous blocks of 16 classes; within a block scale
// varies in runs of 4 and shape is the fastest-varying index.
int ClassIdOf(int color, int scale, int shape);
ObjectClass AttributesOf(int class_id);
// Attribute value of a class, e.g. AttributeOf(27, Attribute::kScale) == 2.
int AttributeOf(int class_id, Attribute a);

struct ImageSize {
  int height = 16;
  int width = 16;
  bool operator==(const ImageSize&) const = default;
};

// Row-major H x W x 3, channel values in [0, 1].
class Image {
 public:
  Image() = default;
  explicit Image(ImageSize size);

  ImageSize size() const { return size_; }
  int height() const { return size_.height; }
  int width() const { return size_.width; }

  double& at(int y, int x, int c) { return pixels_[Index(y, x, c)]; }
  double at(int y, int x, int c) const { return pixels_[Index(y, x, c)]; }

  const std::vector<double>& pixels() const { return pixels_; }
  std::vector<double>& pixels() { return pixels_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t Index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * size_.width + x) * 3 + c;
  }
  ImageSize size_{0, 0};
  std::vector<double> pixels_;
};

// Deterministic renderer. Top half wall, bottom half floor, centered glyph
// (square, circle, triangle, diamond) with half-width (scale+1)/4 of the
// maximum radius, shifted horizontally by orientation. Edges are
// anti-aliased by 4x4 supersampling.
Image Render(const LatentFactors& latents, ImageSize size);

// Glyph centre and maximum radius used by Render, in pixel units.
struct GlyphGeometry {
  double center_x;
  double center_y;
  double half_width;
};
GlyphGeometry GlyphGeometryOf(const LatentFactors& latents, ImageSize size);

// Relevant factors fixed by the class; floor, wall and orientation uniform.
std::pair<Image, LatentFactors> SampleInstance(int class_id, ImageSize size,
                                               Rng& rng);

struct DatasetItem {
  Image image;
  int class_id = 0;
  LatentFactors latents;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(ImageSize size, std::vector<DatasetItem> items,
          std::vector<std::size_t> train, std::vector<std::size_t> test);

  ImageSize image_size() const { return size_; }
  std::size_t size() const { return items_.size(); }
  const DatasetItem& item(std::size_t i) const { return items_.at(i); }
  const std::vector<DatasetItem>& items() const { return items_; }

  const std::vector<std::size_t>& train() const { return train_; }
  const std::vector<std::size_t>& test() const { return test_; }

  // Item indices of a class within one split (or overall).
  const std::vector<std::size_t>& TrainOfClass(int class_id) const {
    return train_by_class_.at(class_id);
  }
  const std::vector<std::size_t>& TestOfClass(int class_id) const {
    return test_by_class_.at(class_id);
  }
  std::vector<std::size_t> AllOfClass(int class_id) const;

  bool CoversAllClasses() const;

  bool operator==(const Dataset& o) const {
    return size_ == o.size_ && items_ == o.items_ && train_ == o.train_ &&
           test_ == o.test_;
  }

 private:
  void Index();

  ImageSize size_;
  std::vector<DatasetItem> items_;
  std::vector<std::size_t> train_;
  std::vector<std::size_t> test_;
  std::array<std::vector<std::size_t>, kNumClasses> train_by_class_;
  std::array<std::vector<std::size_t>, kNumClasses> test_by_class_;
};

inline bool operator==(const DatasetItem& a, const DatasetItem& b) {
  return a.class_id == b.class_id && a.latents == b.latents &&
         a.image == b.image;
}

inline constexpr double kDefaultTrainFraction = 0.75;

// instances_per_class >= 4. Each class is split 0.75/0.25 independently.
Dataset BuildDataset(int instances_per_class, ImageSize size,
                     std::uint64_t seed,
                     double train_fraction = kDefaultTrainFraction);

// Per-class split of a flat item list, in item order.
Dataset SplitByClass(ImageSize size, std::vector<DatasetItem> items,
                     double train_fraction = kDefaultTrainFraction);

// External dataset file: "EMRG1", u32 count/height/width (LE), then per item
// u8 class_id, 6 x u8 latents, height*width*3 u8 pixels.
Dataset IngestExternal(const std::string& path);
void WriteExternal(const Dataset& dataset, const std::string& path);

}  // namespace emergelab

#endif  // EMERGELAB_SHAPES_WORLD_HPP_
