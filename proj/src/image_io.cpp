#include "cggan/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace cggan {

namespace {

class HeaderReader {
public:
  explicit HeaderReader(const std::vector<unsigned char>& bytes) : b_(bytes) {}

  std::size_t offset() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  unsigned long number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    unsigned long v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_] - '0');
      if (v > 1000000000UL) throw FormatError(std::string("PGM: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("PGM: expected ") + what, start);
    return v;
  }

  void single_whitespace() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw FormatError("PGM: expected whitespace after header", pos_);
    ++pos_;
  }

private:
  const std::vector<unsigned char>& b_;
  std::size_t pos_ = 2;
};

}  // namespace

Matrix load_image(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("load_image: cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw FormatError("load_image: unsupported format (binary PGM P5 expected)", 0);

  HeaderReader h(bytes);
  const unsigned long width = h.number("width");
  const unsigned long height = h.number("height");
  const std::size_t maxval_at = h.offset();
  const unsigned long maxval = h.number("maxval");
  h.single_whitespace();
  if (width == 0 || height == 0) throw FormatError("load_image: zero image dimension", maxval_at);
  if (maxval == 0 || maxval > 65535) throw FormatError("load_image: maxval must be in [1, 65535]", maxval_at);

  const std::size_t depth = maxval > 255 ? 2 : 1;
  const std::size_t need = width * height * depth;
  const std::size_t start = h.offset();
  if (bytes.size() - start < need) throw FormatError("load_image: truncated pixel data", bytes.size());
  if (bytes.size() - start > need) throw FormatError("load_image: trailing bytes after pixel data", start + need);

  Matrix img(static_cast<Eigen::Index>(height), static_cast<Eigen::Index>(width));
  std::size_t p = start;
  for (Eigen::Index r = 0; r < img.rows(); ++r)
    for (Eigen::Index c = 0; c < img.cols(); ++c) {
      unsigned v = bytes[p++];
      if (depth == 2) v = (v << 8) | bytes[p++];
      if (v > maxval) throw FormatError("load_image: pixel exceeds maxval", p - depth);
      img(r, c) = static_cast<double>(v);
    }
  const double peak = img.maxCoeff();
  if (peak > 0.0) img /= peak;
  return img;
}

void save_image(const Matrix& image, const std::filesystem::path& path) {
  if (image.size() == 0) throw InvalidInput("save_image: empty image");
  if (!all_finite(image)) throw InvalidInput("save_image: non-finite pixels");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("save_image: cannot open " + path.string());
  f << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  for (Eigen::Index r = 0; r < image.rows(); ++r)
    for (Eigen::Index c = 0; c < image.cols(); ++c) {
      const double v = std::clamp(image(r, c), 0.0, 1.0);
      f.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
    }
  if (!f) throw InvalidInput("save_image: write failed for " + path.string());
}

}  // namespace cggan
