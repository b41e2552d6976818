#include "geofuse/image.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "geofuse/error.hpp"

namespace geofuse {

ImageTensor::ImageTensor(int h, int w, int c, float fill)
    : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {
  if (h <= 0 || w <= 0 || c <= 0) throw Error("image dimensions must be positive");
}

ImageTensor load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error("image not found: " + path.string());
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw Error("unreadable image: " + path.string());
  if (raw.depth() != CV_8U) throw Error("expected 8-bit image: " + path.string());
  const int ch = raw.channels();
  if (ch != 1 && ch != 3 && ch != 4) throw Error("unsupported channel count in " + path.string());
  ImageTensor img(raw.rows, raw.cols, 3);
  for (int y = 0; y < raw.rows; ++y) {
    const auto* row = raw.ptr<unsigned char>(y);
    for (int x = 0; x < raw.cols; ++x) {
      for (int c = 0; c < 3; ++c) {
        // OpenCV stores BGR(A).
        const int src = ch == 1 ? 0 : 2 - c;
        img.at(y, x, c) = static_cast<float>(row[x * ch + src]) / 255.0f;
      }
    }
  }
  return img;
}

void save_image(const ImageTensor& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3) throw Error("save_image: 1 or 3 channels required");
  cv::Mat out(img.height, img.width, img.channels == 1 ? CV_8UC1 : CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = out.ptr<unsigned char>(y);
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        const int dst = img.channels == 1 ? 0 : 2 - c;
        const float v = std::clamp(img.at(y, x, c), 0.0f, 1.0f);
        row[x * img.channels + dst] = static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
  }
  if (!cv::imwrite(path.string(), out)) throw Error("cannot write image: " + path.string());
}

}  // namespace geofuse
