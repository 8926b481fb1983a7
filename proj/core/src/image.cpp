#include "rovtl/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

namespace rovtl::vision {

namespace {

double sample_bilinear(const Image& img, int c, double y, double x) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0;
  const double fx = x - x0;
  auto pixel = [&](int yy, int xx) {
    if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) return 0.0;
    return img.at(c, yy, xx);
  };
  return (1 - fy) * ((1 - fx) * pixel(y0, x0) + fx * pixel(y0, x0 + 1)) +
         fy * ((1 - fx) * pixel(y0 + 1, x0) + fx * pixel(y0 + 1, x0 + 1));
}

// Edge-clamped bilinear read used for resizing (no zero fill at borders).
double sample_clamped(const Image& img, int c, double y, double x) {
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const double fy = y - y0;
  const double fx = x - x0;
  return (1 - fy) * ((1 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1)) +
         fy * ((1 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1));
}

Image crop_resize(const Image& img, int x0, int y0, int w, int h, int out_h, int out_w) {
  if (x0 == 0 && y0 == 0 && w == img.width && h == img.height && out_h == img.height && out_w == img.width) {
    return img;
  }
  Image out(img.channels, out_h, out_w);
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < out_h; ++y) {
      const double src_y = y0 + (y + 0.5) * sy - 0.5;
      for (int x = 0; x < out_w; ++x) {
        const double src_x = x0 + (x + 0.5) * sx - 0.5;
        out.at(c, y, x) = sample_clamped(img, c, src_y, src_x);
      }
    }
  }
  return out;
}

Image rotate(const Image& img, double degrees) {
  if (degrees == 0.0) return img;
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad);
  const double sn = std::sin(rad);
  const double cy = 0.5 * (img.height - 1);
  const double cx = 0.5 * (img.width - 1);
  Image out(img.channels, img.height, img.width);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        // Inverse map: rotate the output coordinate back into the source.
        const double dy = y - cy;
        const double dx = x - cx;
        const double src_x = cs * dx + sn * dy + cx;
        const double src_y = -sn * dx + cs * dy + cy;
        out.at(c, y, x) = sample_bilinear(img, c, src_y, src_x);
      }
    }
  }
  return out;
}

}  // namespace

Image::Image(int c, int h, int w, double fill)
    : channels(c), height(h), width(w), pixels(static_cast<std::size_t>(c) * h * w, fill) {
  if (c <= 0 || h <= 0 || w <= 0) throw std::invalid_argument("image: dimensions must be positive");
}

ag::Matrix Image::as_matrix() const {
  ag::Matrix m(channels, static_cast<ag::Index>(height) * width);
  for (std::size_t i = 0; i < pixels.size(); ++i) m.data()[i] = pixels[i];
  return m;
}

AugmentDraw draw_augmentation(const Image& image, const AugmentParams& params, Rng& rng) {
  AugmentDraw draw;
  std::bernoulli_distribution flip(params.flip_probability);
  draw.flip = flip(rng);

  draw.crop_width = image.width;
  draw.crop_height = image.height;
  const double area = static_cast<double>(image.width) * image.height;
  std::uniform_real_distribution<double> scale(params.min_crop_scale, params.max_crop_scale);
  std::uniform_real_distribution<double> log_ratio(std::log(params.min_aspect), std::log(params.max_aspect));
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * scale(rng);
    const double ratio = std::exp(log_ratio(rng));
    const int w = static_cast<int>(std::lround(std::sqrt(target * ratio)));
    const int h = static_cast<int>(std::lround(std::sqrt(target / ratio)));
    if (w > 0 && h > 0 && w <= image.width && h <= image.height) {
      draw.crop_width = w;
      draw.crop_height = h;
      draw.crop_x = std::uniform_int_distribution<int>(0, image.width - w)(rng);
      draw.crop_y = std::uniform_int_distribution<int>(0, image.height - h)(rng);
      break;
    }
  }
  std::uniform_real_distribution<double> angle(-params.max_rotation_degrees, params.max_rotation_degrees);
  draw.angle_degrees = params.max_rotation_degrees > 0.0 ? angle(rng) : 0.0;
  return draw;
}

Image apply_augmentation(const Image& image, const AugmentDraw& draw, int out_height, int out_width) {
  Image work = image;
  if (draw.flip) {
    for (int c = 0; c < work.channels; ++c) {
      for (int y = 0; y < work.height; ++y) {
        for (int x = 0; x < work.width / 2; ++x) std::swap(work.at(c, y, x), work.at(c, y, work.width - 1 - x));
      }
    }
  }
  work = crop_resize(work, draw.crop_x, draw.crop_y, draw.crop_width, draw.crop_height, out_height, out_width);
  return rotate(work, draw.angle_degrees);
}

Image augment_image(const Image& image, const AugmentParams& params, Rng& rng) {
  const int out = params.output_size > 0 ? params.output_size : 0;
  const AugmentDraw draw = draw_augmentation(image, params, rng);
  return apply_augmentation(image, draw, out ? out : image.height, out ? out : image.width);
}

Image resize(const Image& image, int out_height, int out_width) {
  return crop_resize(image, 0, 0, image.width, image.height, out_height, out_width);
}

void write_image_archive(const std::vector<Image>& images, const std::filesystem::path& data_path,
                         const std::filesystem::path& index_path) {
  std::ofstream data(data_path, std::ios::binary);
  std::ofstream index(index_path);
  if (!data || !index) throw std::runtime_error("cannot write image archive " + data_path.string());
  index << "id,offset,channels,height,width\n";
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& img = images[i];
    index << i << ',' << offset << ',' << img.channels << ',' << img.height << ',' << img.width << '\n';
    for (double p : img.pixels) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(p));
      char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                       static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
      data.write(bytes, 4);
    }
    offset += img.pixels.size() * 4;
  }
}

std::vector<Image> read_image_archive(const std::filesystem::path& data_path,
                                      const std::filesystem::path& index_path) {
  std::ifstream data(data_path, std::ios::binary);
  std::ifstream index(index_path);
  if (!data || !index) throw std::runtime_error("cannot open image archive " + data_path.string());
  std::string line;
  std::getline(index, line);  // header
  std::vector<Image> images;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::vector<long long> v;
    while (std::getline(row, field, ',')) v.push_back(std::stoll(field));
    if (v.size() != 5 || v[0] != static_cast<long long>(images.size())) {
      throw std::runtime_error(index_path.string() + ": malformed index row '" + line + "'");
    }
    Image img(static_cast<int>(v[2]), static_cast<int>(v[3]), static_cast<int>(v[4]));
    data.seekg(static_cast<std::streamoff>(v[1]));
    for (double& p : img.pixels) {
      unsigned char bytes[4];
      if (!data.read(reinterpret_cast<char*>(bytes), 4)) {
        throw std::runtime_error(data_path.string() + ": truncated pixel data");
      }
      const std::uint32_t bits = bytes[0] | (bytes[1] << 8) | (bytes[2] << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
      p = static_cast<double>(std::bit_cast<float>(bits));
    }
    images.push_back(std::move(img));
  }
  return images;
}

}  // namespace rovtl::vision
