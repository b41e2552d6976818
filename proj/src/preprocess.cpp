#include "geofuse/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "geofuse/error.hpp"

namespace geofuse {

namespace {

// Source coordinate of destination index `d` under half-pixel alignment.
double source_coord(int d, int in, int out) {
  return (static_cast<double>(d) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
}

int nearest_index(int d, int in, int out) {
  const auto s = static_cast<int>(std::floor((static_cast<double>(d) + 0.5) * in / out));
  return std::clamp(s, 0, in - 1);
}

}  // namespace

ImageTensor resize(const ImageTensor& img, int target, Interpolation mode) {
  if (img.empty()) throw Error("resize: empty input");
  if (target <= 0) throw Error("resize: target must be positive");
  if (img.height == target && img.width == target) return img;
  ImageTensor out(target, target, img.channels);
  if (mode == Interpolation::Nearest) {
    for (int y = 0; y < target; ++y) {
      const int sy = nearest_index(y, img.height, target);
      for (int x = 0; x < target; ++x) {
        const int sx = nearest_index(x, img.width, target);
        for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(sy, sx, c);
      }
    }
    return out;
  }
  for (int y = 0; y < target; ++y) {
    const double fy = std::clamp(source_coord(y, img.height, target), 0.0,
                                 static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < target; ++x) {
      const double fx = std::clamp(source_coord(x, img.width, target), 0.0,
                                   static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = (1 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
        const double bot = (1 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
        out.at(y, x, c) = static_cast<float>((1 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

StatsAccumulator::StatsAccumulator(int channels)
    : count_(channels, 0.0), mean_(channels, 0.0), m2_(channels, 0.0) {}

void StatsAccumulator::add(const ImageTensor& img) {
  if (img.channels != static_cast<int>(mean_.size())) throw Error("stats: channel mismatch");
  const auto n = static_cast<double>(img.pixels());
  if (n == 0) return;
  for (int c = 0; c < img.channels; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < img.pixels(); ++i) mean += img.data[i * img.channels + c];
    mean /= n;
    double m2 = 0.0;
    for (std::size_t i = 0; i < img.pixels(); ++i) {
      const double d = img.data[i * img.channels + c] - mean;
      m2 += d * d;
    }
    // Chan et al. parallel merge.
    const double total = count_[c] + n;
    const double delta = mean - mean_[c];
    mean_[c] += delta * n / total;
    m2_[c] += m2 + delta * delta * count_[c] * n / total;
    count_[c] = total;
  }
}

ChannelStats StatsAccumulator::finish() const {
  ChannelStats s;
  for (std::size_t c = 0; c < mean_.size(); ++c) {
    if (count_[c] == 0) throw Error("stats: no pixels accumulated");
    s.mean.push_back(mean_[c]);
    s.std.push_back(std::sqrt(std::max(0.0, m2_[c] / count_[c])));
  }
  return s;
}

ChannelStats compute_channel_stats(const std::vector<ImageTensor>& images) {
  if (images.empty()) throw Error("stats: empty image set");
  StatsAccumulator acc(images.front().channels);
  for (const auto& img : images) acc.add(img);
  return acc.finish();
}

ChannelStats compute_channel_stats(const Manifest& train, int image_size) {
  if (train.empty()) throw Error("stats: empty training manifest");
  StatsAccumulator acc(3);
  for (const auto& rec : train.records) {
    acc.add(resize_image(load_image(train.resolve(rec.image_path)), image_size));
  }
  return acc.finish();
}

ImageTensor standardize(const ImageTensor& img, const ChannelStats& stats) {
  if (static_cast<int>(stats.channels()) != img.channels || stats.std.size() != stats.mean.size()) {
    throw Error("standardize: stats have " + std::to_string(stats.channels()) +
                " channels, image has " + std::to_string(img.channels));
  }
  ImageTensor out = img;
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    for (int c = 0; c < img.channels; ++c) {
      const double denom = std::max(stats.std[c], kStdEpsilon);
      auto& v = out.data[i * img.channels + c];
      v = static_cast<float>((v - stats.mean[c]) / denom);
    }
  }
  return out;
}

ImageTensor unstandardize(const ImageTensor& img, const ChannelStats& stats) {
  if (static_cast<int>(stats.channels()) != img.channels) throw Error("unstandardize: channel mismatch");
  ImageTensor out = img;
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    for (int c = 0; c < img.channels; ++c) {
      auto& v = out.data[i * img.channels + c];
      v = static_cast<float>(v * std::max(stats.std[c], kStdEpsilon) + stats.mean[c]);
    }
  }
  return out;
}

std::string format_stats(const ChannelStats& stats) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "mean_c";
  for (double v : stats.mean) os << ' ' << v;
  os << "\nstd_c";
  for (double v : stats.std) os << ' ' << v;
  os << '\n';
  return os.str();
}

ChannelStats parse_stats(const std::string& text) {
  ChannelStats s;
  bool have_mean = false, have_std = false;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    std::vector<double> values;
    double v;
    while (ls >> v) values.push_back(v);
    if (key == "mean_c") {
      s.mean = std::move(values);
      have_mean = true;
    } else if (key == "std_c") {
      s.std = std::move(values);
      have_std = true;
    } else {
      throw Error("stats: unknown key '" + key + "'");
    }
  }
  if (!have_mean || !have_std || s.mean.size() != s.std.size() || s.mean.empty()) {
    throw Error("stats: expected matching mean_c and std_c lines");
  }
  for (double v : s.std) {
    if (v < 0) throw Error("stats: negative std");
  }
  return s;
}

void save_stats(const ChannelStats& stats, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write stats: " + path.string());
  out << format_stats(stats);
}

ChannelStats load_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open stats: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_stats(buf.str());
}

AugmentationParams sample_augmentation(Rng& rng) {
  AugmentationParams p;
  p.flip_horizontal = rng.bernoulli(0.5);
  p.flip_vertical = rng.bernoulli(0.5);
  p.rotation_degrees = rng.uniform(-kMaxRotationDegrees, kMaxRotationDegrees);
  return p;
}

namespace {

ImageTensor flip(const ImageTensor& img, bool horizontal, bool vertical) {
  if (!horizontal && !vertical) return img;
  ImageTensor out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    const int sy = vertical ? img.height - 1 - y : y;
    for (int x = 0; x < img.width; ++x) {
      const int sx = horizontal ? img.width - 1 - x : x;
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

// Positive angles rotate counterclockwise as displayed (y axis pointing down).
ImageTensor rotate(const ImageTensor& img, double degrees, Interpolation mode) {
  if (degrees == 0.0) return img;
  const double rad = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
  ImageTensor out(img.height, img.width, img.channels);
  const auto sample = [&](int y, int x, int c) -> double {
    if (y < 0 || y >= img.height || x < 0 || x >= img.width) return 0.0;
    return img.at(y, x, c);
  };
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double sx = cx + cs * dx - sn * dy;
      const double sy = cy + sn * dx + cs * dy;
      if (mode == Interpolation::Nearest) {
        const int ix = static_cast<int>(std::lround(sx));
        const int iy = static_cast<int>(std::lround(sy));
        for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = static_cast<float>(sample(iy, ix, c));
        continue;
      }
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double wx = sx - x0, wy = sy - y0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = (1 - wx) * sample(y0, x0, c) + wx * sample(y0, x0 + 1, c);
        const double bot = (1 - wx) * sample(y0 + 1, x0, c) + wx * sample(y0 + 1, x0 + 1, c);
        out.at(y, x, c) = static_cast<float>((1 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

}  // namespace

std::pair<ImageTensor, std::optional<ImageTensor>> augment(const ImageTensor& img,
                                                           const std::optional<ImageTensor>& mask,
                                                           const AugmentationParams& p) {
  if (std::abs(p.rotation_degrees) > kMaxRotationDegrees) {
    throw Error("augment: rotation outside +/-10 degrees");
  }
  if (mask && (mask->height != img.height || mask->width != img.width)) {
    throw Error("augment: mask " + std::to_string(mask->height) + "x" + std::to_string(mask->width) +
                " does not match image " + std::to_string(img.height) + "x" +
                std::to_string(img.width));
  }
  auto out_img = rotate(flip(img, p.flip_horizontal, p.flip_vertical), p.rotation_degrees,
                        Interpolation::Bilinear);
  std::optional<ImageTensor> out_mask;
  if (mask) {
    out_mask = rotate(flip(*mask, p.flip_horizontal, p.flip_vertical), p.rotation_degrees,
                      Interpolation::Nearest);
  }
  return {std::move(out_img), std::move(out_mask)};
}

}  // namespace geofuse
