#pragma once

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "star/image.hpp"

namespace star {

namespace detail {

inline RgbImage planes_from_rgb8(const std::vector<unsigned char>& buf, int h,
                                 int w) {
  RgbImage img;
  img.r = ImageGrid(h, w);
  img.g = ImageGrid(h, w);
  img.b = ImageGrid(h, w);
  for (std::size_t i = 0; i < img.r.size(); ++i) {
    img.r.data[i] = buf[3 * i + 0] / 255.0;
    img.g.data[i] = buf[3 * i + 1] / 255.0;
    img.b.data[i] = buf[3 * i + 2] / 255.0;
  }
  return img;
}

inline unsigned char quantize8(double x) {
  const double v = std::clamp(x, 0.0, 1.0) * 255.0;
  return static_cast<unsigned char>(std::lround(v));
}

inline std::vector<unsigned char> rgb8_from_planes(const RgbImage& img) {
  std::vector<unsigned char> buf(img.r.size() * 3);
  for (std::size_t i = 0; i < img.r.size(); ++i) {
    buf[3 * i + 0] = quantize8(img.r.data[i]);
    buf[3 * i + 1] = quantize8(img.g.data[i]);
    buf[3 * i + 2] = quantize8(img.b.data[i]);
  }
  return buf;
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit_cb(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

}  // namespace detail

/// Decodes an 8-bit PNG into RGB planes mapped x/255 into [0,1].
inline RgbImage load_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("load_png: " + path + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("load_png: " + path + ": " + msg);
  }
  return detail::planes_from_rgb8(buf, static_cast<int>(image.height),
                                  static_cast<int>(image.width));
}

/// Encodes 8-bit RGB PNG, rounding to nearest with clamp to [0,1].
inline void save_png(const std::string& path, const RgbImage& img) {
  require_valid_rgb(img, "save_png");
  const std::vector<unsigned char> buf = detail::rgb8_from_planes(img);

  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0,
                               nullptr)) {
    throw IoError("save_png: " + path + ": " + image.message);
  }
}

/// Decodes a baseline/progressive JPEG into RGB planes in [0,1].
inline RgbImage load_jpeg(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("load_jpeg: cannot open " + path);

  jpeg_decompress_struct cinfo;
  detail::JpegErrorMgr jerr;
  std::vector<unsigned char> buf;
  int h = 0, w = 0;

  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = detail::jpeg_error_exit_cb;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(fp);
    throw IoError("load_jpeg: " + path + ": " + jerr.message);
  }

  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  h = static_cast<int>(cinfo.output_height);
  w = static_cast<int>(cinfo.output_width);
  buf.resize(static_cast<std::size_t>(h) * w * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* row = buf.data() +
                         static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(fp);
  return detail::planes_from_rgb8(buf, h, w);
}

inline void save_jpeg(const std::string& path, const RgbImage& img,
                      int quality = 95) {
  require_valid_rgb(img, "save_jpeg");
  std::vector<unsigned char> buf = detail::rgb8_from_planes(img);

  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("save_jpeg: cannot open " + path);

  jpeg_compress_struct cinfo;
  detail::JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = detail::jpeg_error_exit_cb;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::fclose(fp);
    throw IoError("save_jpeg: " + path + ": " + jerr.message);
  }

  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, fp);
  cinfo.image_width = static_cast<JDIMENSION>(img.width());
  cinfo.image_height = static_cast<JDIMENSION>(img.height());
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const int w = img.width();
  while (cinfo.next_scanline < cinfo.image_height) {
    unsigned char* row =
        buf.data() + static_cast<std::size_t>(cinfo.next_scanline) * w * 3;
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(fp);
}

/// Loads a PNG or JPEG, dispatching on the file signature bytes.
inline RgbImage load_image(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("load_image: cannot open " + path);
  unsigned char sig[4] = {0, 0, 0, 0};
  const std::size_t got = std::fread(sig, 1, 4, fp);
  std::fclose(fp);
  if (got >= 4 && sig[0] == 0x89 && sig[1] == 'P' && sig[2] == 'N' &&
      sig[3] == 'G') {
    return load_png(path);
  }
  if (got >= 2 && sig[0] == 0xff && sig[1] == 0xd8) {
    return load_jpeg(path);
  }
  throw IoError("load_image: " + path + ": not a PNG or JPEG file");
}

/// Saves by extension: .png, .jpg or .jpeg (case-insensitive).
inline void save_image(const std::string& path, const RgbImage& img) {
  auto ends_with_ci = [&](const char* suffix) {
    const std::size_t n = std::strlen(suffix);
    if (path.size() < n) return false;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::tolower(path[path.size() - n + i]) != suffix[i]) return false;
    }
    return true;
  };
  if (ends_with_ci(".png")) {
    save_png(path, img);
  } else if (ends_with_ci(".jpg") || ends_with_ci(".jpeg")) {
    save_jpeg(path, img);
  } else {
    throw IoError("save_image: unsupported extension in " + path);
  }
}

}  // namespace star
