#include "taskforge/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "taskforge/error.hpp"

namespace taskforge {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void check_exists(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw IngestError("file not found: " + path.string());
  }
}

}  // namespace

Image read_png_rgb(const std::filesystem::path& path) {
  check_exists(path);
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IngestError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw IngestError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  return Image(static_cast<int>(img.width), static_cast<int>(img.height), std::move(buf));
}

void write_png_rgb(const std::filesystem::path& path, const Image& image) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels().data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

SegMap read_png_mask(const std::filesystem::path& path) {
  check_exists(path);
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IngestError("cannot open " + path.string());

  // Everything that must outlive a longjmp is created before setjmp.
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IngestError("libpng initialisation failed for " + path.string());
  }
  std::vector<std::uint8_t> raw;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  const char* volatile failure = nullptr;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IngestError("cannot decode mask PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
  if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_PALETTE) {
    failure = "mask PNG must be single-channel grayscale or palette-indexed: ";
  } else {
    // Sub-byte depths unpack to one byte per pixel keeping the raw index.
    if (bit_depth < 8) png_set_packing(png);
    png_read_update_info(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    raw.resize(row_bytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = raw.data() + y * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (failure) throw IngestError(std::string(failure) + path.string());

  const std::size_t stride = raw.size() / height;
  std::vector<ClassId> classes(static_cast<std::size_t>(width) * height);
  for (png_uint_32 y = 0; y < height; ++y) {
    const std::uint8_t* row = raw.data() + y * stride;
    for (png_uint_32 x = 0; x < width; ++x) {
      ClassId v = bit_depth == 16 ? (ClassId(row[2 * x]) << 8) | row[2 * x + 1] : row[x];
      classes[static_cast<std::size_t>(y) * width + x] = v;
    }
  }
  return SegMap(static_cast<int>(width), static_cast<int>(height), std::move(classes));
}

void write_png_mask(const std::filesystem::path& path, const SegMap& mask) {
  std::vector<std::uint8_t> buf(mask.classes().size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    ClassId c = mask.classes()[i];
    if (c > 255) throw IoError("class id " + std::to_string(c) + " does not fit an 8-bit mask PNG");
    buf[i] = static_cast<std::uint8_t>(c);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(mask.width());
  img.height = static_cast<png_uint_32>(mask.height());
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

}  // namespace taskforge
