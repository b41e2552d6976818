#include "geofuse/mask.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <sstream>

#include "geofuse/error.hpp"

namespace geofuse {

namespace {

void check_dims(Dims d) {
  if (d.height <= 0 || d.width <= 0) throw Error("mask dimensions must be positive");
}

int nearest(int d, int in, int out) {
  const auto s = static_cast<int>(std::floor((d + 0.5) * in / static_cast<double>(out)));
  return std::clamp(s, 0, in - 1);
}

}  // namespace

SpatialMask::SpatialMask(Dims dims, MaskSource source, std::uint8_t fill)
    : dims_(dims), source_(source) {
  check_dims(dims);
  if (fill > 1) throw Error("mask fill must be 0 or 1");
  cells_.assign(static_cast<std::size_t>(dims.height) * dims.width, fill);
}

SpatialMask SpatialMask::from_cells(Dims dims, std::vector<std::uint8_t> cells, MaskSource source) {
  check_dims(dims);
  if (cells.size() != static_cast<std::size_t>(dims.height) * dims.width) {
    throw Error("mask cell count does not match dimensions");
  }
  for (auto v : cells) {
    if (v > 1) throw Error("mask cell value " + std::to_string(v) + " is not binary");
  }
  SpatialMask m;
  m.dims_ = dims;
  m.source_ = source;
  m.cells_ = std::move(cells);
  return m;
}

SpatialMask SpatialMask::from_tensor(const ImageTensor& t, MaskSource source) {
  if (t.channels != 1) throw Error("mask tensor must have one channel");
  std::vector<std::uint8_t> cells(t.pixels());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const float v = t.data[i];
    if (v != 0.0f && v != 1.0f) throw Error("mask tensor value " + std::to_string(v) + " is not binary");
    cells[i] = v == 1.0f ? 1 : 0;
  }
  return from_cells({t.height, t.width}, std::move(cells), source);
}

ImageTensor SpatialMask::to_tensor() const {
  ImageTensor t(dims_.height, dims_.width, 1);
  for (std::size_t i = 0; i < cells_.size(); ++i) t.data[i] = cells_[i];
  return t;
}

SpatialMask SpatialMask::resized(Dims target) const {
  check_dims(target);
  if (target == dims_) return *this;
  SpatialMask out(target, source_);
  for (int y = 0; y < target.height; ++y) {
    const int sy = nearest(y, dims_.height, target.height);
    for (int x = 0; x < target.width; ++x) {
      out.cells_[static_cast<std::size_t>(y) * target.width + x] = at(sy, nearest(x, dims_.width, target.width));
    }
  }
  return out;
}

SpatialMask load_mask(const std::filesystem::path& path, Dims expected) {
  if (!std::filesystem::exists(path)) throw Error("mask not found: " + path.string());
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw Error("unreadable mask: " + path.string());
  if (raw.channels() != 1) {
    throw Error("mask must be single-channel, found " + std::to_string(raw.channels()) +
                " channels: " + path.string());
  }
  if (raw.depth() != CV_8U) throw Error("mask must be 8-bit: " + path.string());
  std::vector<std::uint8_t> cells(static_cast<std::size_t>(raw.rows) * raw.cols);
  for (int y = 0; y < raw.rows; ++y) {
    const auto* row = raw.ptr<unsigned char>(y);
    for (int x = 0; x < raw.cols; ++x) {
      const int v = row[x];
      if (v != 0 && v != 255) {
        throw Error("mask value " + std::to_string(v) + " at (" + std::to_string(y) + ", " +
                    std::to_string(x) + ") is not 0 or 255: " + path.string());
      }
      cells[static_cast<std::size_t>(y) * raw.cols + x] = v == 255 ? 1 : 0;
    }
  }
  return SpatialMask::from_cells({raw.rows, raw.cols}, std::move(cells), MaskSource::File)
      .resized(expected);
}

void save_mask(const SpatialMask& mask, const std::filesystem::path& path) {
  cv::Mat out(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y) {
    auto* row = out.ptr<unsigned char>(y);
    for (int x = 0; x < mask.width(); ++x) row[x] = mask.at(y, x) ? 255 : 0;
  }
  if (!cv::imwrite(path.string(), out)) throw Error("cannot write mask: " + path.string());
}

double mask_coverage(const SpatialMask& m) {
  if (m.cells().empty()) return 0.0;
  const auto on = std::count(m.cells().begin(), m.cells().end(), std::uint8_t{1});
  return static_cast<double>(on) / static_cast<double>(m.cells().size());
}

void LandCoverGrid::validate() const {
  if (codes.size() != static_cast<std::size_t>(dims.height) * dims.width) {
    throw Error("land-cover grid size does not match dimensions");
  }
  for (int c : codes) {
    if (!code_book.contains(c)) throw Error("land-cover code " + std::to_string(c) + " missing from code book");
  }
}

std::map<int, std::string> parse_code_book(const std::string& text) {
  std::map<int, std::string> book;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    int code;
    if (!(ls >> code)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw Error("code book line " + std::to_string(line_no) + ": expected '<code> <name>'");
    }
    std::string name;
    std::getline(ls >> std::ws, name);
    while (!name.empty() && (name.back() == '\r' || name.back() == ' ')) name.pop_back();
    if (name.empty()) throw Error("code book line " + std::to_string(line_no) + ": missing name");
    book[code] = name;
  }
  return book;
}

std::map<int, std::string> load_code_book(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open code book: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_code_book(buf.str());
}

LandCoverGrid load_landcover(const std::filesystem::path& raster,
                             const std::map<int, std::string>& code_book) {
  if (!std::filesystem::exists(raster)) throw Error("land-cover raster not found: " + raster.string());
  const cv::Mat raw = cv::imread(raster.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw Error("unreadable land-cover raster: " + raster.string());
  if (raw.channels() != 1) throw Error("land-cover raster must be single-channel: " + raster.string());
  if (raw.depth() != CV_8U && raw.depth() != CV_16U) {
    throw Error("land-cover raster must be 8- or 16-bit: " + raster.string());
  }
  LandCoverGrid lc;
  lc.dims = {raw.rows, raw.cols};
  lc.code_book = code_book;
  lc.codes.resize(static_cast<std::size_t>(raw.rows) * raw.cols);
  for (int y = 0; y < raw.rows; ++y) {
    for (int x = 0; x < raw.cols; ++x) {
      lc.codes[static_cast<std::size_t>(y) * raw.cols + x] =
          raw.depth() == CV_8U ? raw.at<unsigned char>(y, x) : raw.at<unsigned short>(y, x);
    }
  }
  lc.validate();
  return lc;
}

SpatialMask rasterize_landcover(const LandCoverGrid& lc, const std::set<int>& relevant_codes,
                                Dims expected) {
  if (relevant_codes.empty()) throw Error("rasterize_landcover: relevant code set is empty");
  lc.validate();
  std::vector<std::uint8_t> cells(lc.codes.size());
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = relevant_codes.contains(lc.codes[i]) ? 1 : 0;
  return SpatialMask::from_cells(lc.dims, std::move(cells), MaskSource::LandCover).resized(expected);
}

namespace {

// Pixel centers sit at integer + 0.5.
void fill_disc(SpatialMask& m, double cx, double cy, double r) {
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r) m.set(y, x, true);
    }
  }
}

void fill_rect(SpatialMask& m, int y0, int x0, int y1, int x1) {
  y0 = std::max(y0, 0);
  x0 = std::max(x0, 0);
  y1 = std::min(y1, m.height());
  x1 = std::min(x1, m.width());
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) m.set(y, x, true);
  }
}

SpatialMask wind(Rng& rng, Dims d) {
  const double s = std::min(d.height, d.width);
  for (;;) {
    SpatialMask m(d, MaskSource::Synthetic);
    const auto k = rng.uniform_int(3, 8);
    const double r = std::max(1.5, rng.uniform(0.05, 0.07) * s);
    std::vector<std::pair<double, double>> centers;
    int attempts = 0;
    while (static_cast<std::int64_t>(centers.size()) < k && attempts < 1000) {
      ++attempts;
      const double cx = rng.uniform(r + 1.0, d.width - r - 1.0);
      const double cy = rng.uniform(r + 1.0, d.height - r - 1.0);
      bool clear = true;
      for (auto [ox, oy] : centers) {
        // Keep at least two empty pixels between discs so they stay disjoint.
        if (std::hypot(cx - ox, cy - oy) < 2.0 * r + 3.0) clear = false;
      }
      if (clear) centers.emplace_back(cx, cy);
    }
    if (static_cast<std::int64_t>(centers.size()) < k) continue;
    for (auto [cx, cy] : centers) fill_disc(m, cx, cy, r);
    return m;
  }
}

SpatialMask solar(Rng& rng, Dims d) {
  const double s = std::min(d.height, d.width);
  SpatialMask m(d, MaskSource::Synthetic);
  const auto rows = rng.uniform_int(3, 4);
  const auto cols = rng.uniform_int(3, 4);
  const int ph = std::max(2, static_cast<int>(std::lround(rng.uniform(0.12, 0.14) * s)));
  const int pw = std::max(2, static_cast<int>(std::lround(rng.uniform(0.12, 0.14) * s)));
  const int gap = std::max(1, static_cast<int>(std::lround(0.04 * s)));
  const int span_h = static_cast<int>(rows) * ph + static_cast<int>(rows - 1) * gap;
  const int span_w = static_cast<int>(cols) * pw + static_cast<int>(cols - 1) * gap;
  const int oy = static_cast<int>(rng.uniform_int(0, std::max(0, d.height - span_h)));
  const int ox = static_cast<int>(rng.uniform_int(0, std::max(0, d.width - span_w)));
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const int y0 = oy + i * (ph + gap), x0 = ox + j * (pw + gap);
      fill_rect(m, y0, x0, y0 + ph, x0 + pw);
    }
  }
  return m;
}

SpatialMask blob(Rng& rng, Dims d) {
  const double s = std::min(d.height, d.width);
  SpatialMask m(d, MaskSource::Synthetic);
  const double a = rng.uniform(0.2, 0.3) * s;
  const double b = rng.uniform(0.2, 0.3) * s;
  const double theta = rng.uniform(0.0, std::numbers::pi);
  const double cx = rng.uniform(0.4, 0.6) * d.width;
  const double cy = rng.uniform(0.4, 0.6) * d.height;
  const double cs = std::cos(theta), sn = std::sin(theta);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const double u = cs * dx + sn * dy, v = -sn * dx + cs * dy;
      if ((u * u) / (a * a) + (v * v) / (b * b) <= 1.0) m.set(y, x, true);
    }
  }
  return m;
}

SpatialMask stripes(Rng& rng, Dims d) {
  SpatialMask m(d, MaskSource::Synthetic);
  const bool horizontal = rng.bernoulli(0.5);
  const int extent = horizontal ? d.height : d.width;
  const int w = std::max(1, static_cast<int>(std::lround(rng.uniform(0.08, 0.12) * extent)));
  const int sep = std::max(2, static_cast<int>(std::lround(rng.uniform(0.10, 0.20) * extent)));
  const int total = 2 * w + sep;
  const int start = static_cast<int>(rng.uniform_int(0, std::max(0, extent - total)));
  for (int k = 0; k < 2; ++k) {
    const int lo = start + k * (w + sep);
    if (horizontal) {
      fill_rect(m, lo, 0, lo + w, d.width);
    } else {
      fill_rect(m, 0, lo, d.height, lo + w);
    }
  }
  return m;
}

SpatialMask half_plane(Rng& rng, Dims d) {
  SpatialMask m(d, MaskSource::Synthetic);
  const auto side = rng.uniform_int(0, 3);
  const double frac = rng.uniform(0.4, 0.6);
  const int rows = static_cast<int>(std::lround(frac * d.height));
  const int cols = static_cast<int>(std::lround(frac * d.width));
  switch (side) {
    case 0: fill_rect(m, 0, 0, rows, d.width); break;                      // top
    case 1: fill_rect(m, d.height - rows, 0, d.height, d.width); break;    // bottom
    case 2: fill_rect(m, 0, 0, d.height, cols); break;                     // left
    default: fill_rect(m, 0, d.width - cols, d.height, d.width); break;    // right
  }
  return m;
}

}  // namespace

SpatialMask synth_mask(ClassLabel label, Rng& rng, Dims dims) {
  check_dims(dims);
  switch (label) {
    case ClassLabel::WND: return wind(rng, dims);
    case ClassLabel::SUN: return solar(rng, dims);
    case ClassLabel::BIT: return blob(rng, dims);
    case ClassLabel::NG: return stripes(rng, dims);
    case ClassLabel::WAT: return half_plane(rng, dims);
  }
  throw Error("synth_mask: invalid label");
}

int count_components(const SpatialMask& m) {
  const int h = m.height(), w = m.width();
  std::vector<int> seen(static_cast<std::size_t>(h) * w, 0);
  std::vector<std::pair<int, int>> stack;
  int n = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y) * w + x;
      if (!m.at(y, x) || seen[i]) continue;
      ++n;
      seen[i] = 1;
      stack.emplace_back(y, x);
      while (!stack.empty()) {
        auto [cy, cx] = stack.back();
        stack.pop_back();
        constexpr int dy[] = {-1, 1, 0, 0}, dx[] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int ny = cy + dy[k], nx = cx + dx[k];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const auto j = static_cast<std::size_t>(ny) * w + nx;
          if (m.at(ny, nx) && !seen[j]) {
            seen[j] = 1;
            stack.emplace_back(ny, nx);
          }
        }
      }
    }
  }
  return n;
}

}  // namespace geofuse
