#pragma once

#include "rovtl/autograd.hpp"
#include "rovtl/rng.hpp"

#include <filesystem>
#include <vector>

namespace rovtl::vision {

// Channel-major image with real-valued pixels.
struct Image {
  int channels = 1;
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int c, int h, int w, double fill = 0.0);

  double& at(int c, int y, int x) { return pixels[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const { return pixels[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  // C x (H*W), the layout conv2d expects.
  ag::Matrix as_matrix() const;

  bool operator==(const Image&) const = default;
};

struct AugmentParams {
  double flip_probability = 0.5;
  double min_crop_scale = 0.6;
  double max_crop_scale = 1.0;
  double min_aspect = 3.0 / 4.0;
  double max_aspect = 4.0 / 3.0;
  double max_rotation_degrees = 45.0;
  int output_size = 0;  // 0 keeps the input size
};

// The random choices of one augmentation, separated from their application
// so that a fixed draw can be replayed.
struct AugmentDraw {
  bool flip = false;
  int crop_x = 0;
  int crop_y = 0;
  int crop_width = 0;
  int crop_height = 0;
  double angle_degrees = 0.0;
};

AugmentDraw draw_augmentation(const Image& image, const AugmentParams& params, Rng& rng);
// Flip, then resized crop, then rotation about the centre (zero fill).
Image apply_augmentation(const Image& image, const AugmentDraw& draw, int out_height, int out_width);
Image augment_image(const Image& image, const AugmentParams& params, Rng& rng);

// Bilinear resample of the full frame to a new size.
Image resize(const Image& image, int out_height, int out_width);

// Raw little-endian float32 pixels plus a text index of
// `id,offset,channels,height,width` rows.
void write_image_archive(const std::vector<Image>& images, const std::filesystem::path& data_path,
                         const std::filesystem::path& index_path);
std::vector<Image> read_image_archive(const std::filesystem::path& data_path, const std::filesystem::path& index_path);

}  // namespace rovtl::vision
