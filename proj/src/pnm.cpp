#include "hmad/pnm.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "hmad/errors.hpp"

namespace hmad {

void write_pnm(const std::filesystem::path& path, const PnmImage& image) {
  if ((image.channels != 1 && image.channels != 3) || image.maxval == 0 ||
      image.maxval > 65535 ||
      image.samples.size() != image.width * image.height * image.channels) {
    throw FormatError("write_pnm: inconsistent image for " + path.string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << (image.channels == 3 ? "P6" : "P5") << '\n'
      << image.width << ' ' << image.height << '\n'
      << image.maxval << '\n';
  const bool wide = image.maxval > 255;
  std::string bytes;
  bytes.reserve(image.samples.size() * (wide ? 2 : 1));
  for (auto s : image.samples) {
    if (wide) bytes.push_back(static_cast<char>(s >> 8));
    bytes.push_back(static_cast<char>(s & 0xFF));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

namespace {

class HeaderParser {
 public:
  HeaderParser(const std::string& data, const std::filesystem::path& path)
      : data_(data), path_(path) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(path_.string() + ": " + what + " at byte " + std::to_string(pos_));
  }

  void skip_space_and_comments() {
    while (pos_ < data_.size()) {
      const char c = data_[pos_];
      if (c == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < data_.size() && std::isdigit(static_cast<unsigned char>(data_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(data_[pos_] - '0');
      if (v > (1u << 24)) fail(std::string("oversized ") + what);
      ++pos_;
    }
    if (pos_ == start) fail(std::string("expected ") + what);
    return v;
  }

  std::size_t pos_ = 0;

 private:
  const std::string& data_;
  const std::filesystem::path& path_;
};

}  // namespace

PnmImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  HeaderParser p(data, path);
  if (data.size() < 2 || data[0] != 'P' || (data[1] != '5' && data[1] != '6')) {
    p.fail("expected P5 or P6 magic");
  }
  PnmImage img;
  img.channels = data[1] == '6' ? 3 : 1;
  p.pos_ = 2;
  img.width = p.number("width");
  img.height = p.number("height");
  const std::size_t maxval = p.number("maxval");
  if (img.width == 0 || img.height == 0) p.fail("zero image extent");
  if (maxval == 0 || maxval > 65535) p.fail("maxval out of range");
  img.maxval = static_cast<std::uint32_t>(maxval);
  if (p.pos_ >= data.size() || !std::isspace(static_cast<unsigned char>(data[p.pos_]))) {
    p.fail("expected whitespace after maxval");
  }
  ++p.pos_;

  const bool wide = maxval > 255;
  const std::size_t count = img.width * img.height * img.channels;
  const std::size_t need = count * (wide ? 2 : 1);
  if (data.size() - p.pos_ < need) {
    p.pos_ = data.size();
    p.fail("pixel data truncated (need " + std::to_string(need) + " bytes)");
  }
  img.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint16_t v;
    if (wide) {
      v = static_cast<std::uint16_t>((static_cast<unsigned char>(data[p.pos_]) << 8) |
                                     static_cast<unsigned char>(data[p.pos_ + 1]));
      p.pos_ += 2;
    } else {
      v = static_cast<unsigned char>(data[p.pos_++]);
    }
    if (v > maxval) p.fail("sample exceeds maxval");
    img.samples[i] = v;
  }
  if (p.pos_ != data.size()) p.fail("trailing bytes after pixel data");
  return img;
}

}  // namespace hmad
