#include "infosample/image_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace infosample {
namespace {

// Netpbm header tokens, skipping whitespace and '#' comments.
class PnmReader {
 public:
  explicit PnmReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw FormatError("cannot open " + path);
  }

  std::string magic() {
    std::string m;
    m += char(in_.get());
    m += char(in_.get());
    if (!in_) throw FormatError(path_ + ": truncated header");
    return m;
  }

  int next_int() {
    skip_space_and_comments();
    int value = 0;
    bool any = false;
    while (in_ && std::isdigit(in_.peek())) {
      value = value * 10 + (in_.get() - '0');
      any = true;
    }
    if (!any) throw FormatError(path_ + ": expected integer");
    return value;
  }

  // After maxval exactly one whitespace byte precedes binary data.
  void consume_single_space() { in_.get(); }

  std::uint8_t next_byte() {
    int c = in_.get();
    if (c == EOF) throw FormatError(path_ + ": truncated pixel data");
    return std::uint8_t(c);
  }

 private:
  void skip_space_and_comments() {
    while (in_) {
      int c = in_.peek();
      if (c == '#') {
        std::string line;
        std::getline(in_, line);
      } else if (std::isspace(c)) {
        in_.get();
      } else {
        break;
      }
    }
  }

  std::ifstream in_;
  std::string path_;
};

std::uint8_t rescale(int v, int maxval) {
  if (v < 0 || v > maxval) throw FormatError("sample exceeds maxval");
  if (maxval == 255) return std::uint8_t(v);
  return std::uint8_t(std::lround(255.0 * v / maxval));
}

}  // namespace

GridArray<double> to_gray(const RgbImage& image) {
  GridArray<double> gray(image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      auto p = image.pixel(x, y);
      gray(y, x) = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0;
    }
  }
  return gray;
}

RgbImage read_ppm(const std::string& path) {
  PnmReader r(path);
  const std::string m = r.magic();
  if (m != "P3" && m != "P6") throw FormatError(path + ": not a PPM (P3/P6) file");
  const int w = r.next_int();
  const int h = r.next_int();
  const int maxval = r.next_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw FormatError(path + ": unsupported PPM header");
  RgbImage img(w, h);
  if (m == "P3") {
    for (auto& v : img.data) v = rescale(r.next_int(), maxval);
  } else {
    r.consume_single_space();
    for (auto& v : img.data) v = rescale(r.next_byte(), maxval);
  }
  return img;
}

void write_ppm(const std::string& path, const RgbImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()), std::streamsize(image.data.size()));
}

GridArray<int> read_pgm(const std::string& path) {
  PnmReader r(path);
  const std::string m = r.magic();
  if (m != "P2" && m != "P5") throw FormatError(path + ": not a PGM (P2/P5) file");
  const int w = r.next_int();
  const int h = r.next_int();
  const int maxval = r.next_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw FormatError(path + ": unsupported PGM header");
  GridArray<int> levels(h, w);
  if (m == "P5") r.consume_single_space();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      levels(y, x) = rescale(m == "P2" ? r.next_int() : r.next_byte(), maxval);
    }
  }
  return levels;
}

void write_pgm(const std::string& path, const GridArray<int>& levels, int max_value) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "P2\n" << levels.cols() << ' ' << levels.rows() << '\n' << max_value << '\n';
  for (Eigen::Index y = 0; y < levels.rows(); ++y) {
    for (Eigen::Index x = 0; x < levels.cols(); ++x) {
      if (x) out << ' ';
      out << levels(y, x);
    }
    out << '\n';
  }
}

GridArray<int> class_levels(const ClassMap& classes) {
  const int k = classes.num_classes();
  return classes.values().unaryExpr([k](int c) { return k > 1 ? int(std::lround(255.0 * c / (k - 1))) : 0; });
}

ClassMap classes_from_levels(const GridArray<int>& levels, int num_classes) {
  if (num_classes < 1) throw ParameterError("class count must be positive");
  GridArray<int> ids = levels.unaryExpr([num_classes](int v) {
    return num_classes > 1 ? int(std::lround(double(v) * (num_classes - 1) / 255.0)) : 0;
  });
  return ClassMap(std::move(ids), num_classes);
}

}  // namespace infosample
