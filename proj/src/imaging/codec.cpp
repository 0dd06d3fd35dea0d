#include "retina/imaging/codec.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <string>

// jpeglib.h expects size_t and FILE to be declared first.
#include <jpeglib.h>

namespace retina::imaging {

const char* to_string(ImageErrc code) {
  switch (code) {
    case ImageErrc::UnsupportedFormat: return "UnsupportedFormat";
    case ImageErrc::CorruptData: return "CorruptData";
    case ImageErrc::ZeroDimension: return "ZeroDimension";
    case ImageErrc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPng, 8) == 0) return ImageFormat::Png;
  if (bytes.size() >= 3 && bytes[0] == 0xff && bytes[1] == 0xd8 && bytes[2] == 0xff) return ImageFormat::Jpeg;
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return ImageFormat::Ppm;
  return ImageFormat::Unknown;
}

namespace {

[[noreturn]] void corrupt(const std::string& what) { throw ImageError(ImageErrc::CorruptData, what); }

class PpmParser {
 public:
  explicit PpmParser(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  RasterImage parse() {
    pos_ = 2;  // "P6"
    const long width = header_int();
    const long height = header_int();
    const long maxval = header_int();
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) corrupt("ppm: malformed header");
    ++pos_;  // exactly one whitespace byte precedes the raster
    if (width < 1 || height < 1) throw ImageError(ImageErrc::ZeroDimension, "ppm: zero dimension");
    if (maxval < 1 || maxval > 255) throw ImageError(ImageErrc::UnsupportedFormat, "ppm: only 8-bit maxval supported");
    const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
    if (bytes_.size() - pos_ < count) corrupt("ppm: truncated raster");
    std::vector<std::uint8_t> data(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                   bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + count));
    if (maxval != 255) {
      for (auto& v : data) {
        if (v > maxval) corrupt("ppm: sample exceeds maxval");
        v = static_cast<std::uint8_t>((v * 255 + maxval / 2) / maxval);
      }
    }
    return RasterImage(static_cast<int>(width), static_cast<int>(height), 3, std::move(data));
  }

 private:
  static bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

  long header_int() {
    for (;;) {
      if (pos_ >= bytes_.size()) corrupt("ppm: truncated header");
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
    long v = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1L << 24)) corrupt("ppm: header value out of range");
      ++pos_;
      ++digits;
    }
    if (digits == 0) corrupt("ppm: expected integer in header");
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    std::string msg = image.message;
    png_image_free(&image);
    corrupt("png: " + msg);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  if (image.width < 1 || image.height < 1) {
    png_image_free(&image);
    throw ImageError(ImageErrc::ZeroDimension, "png: zero dimension");
  }
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, data.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    corrupt("png: " + msg);
  }
  return RasterImage(static_cast<int>(image.width), static_cast<int>(image.height), channels, std::move(data));
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  int warnings = 0;
  char message[JMSG_LENGTH_MAX] = {};
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_emit_message(j_common_ptr cinfo, int level) {
  // level -1 is a warning, e.g. premature end of data.
  if (level < 0) reinterpret_cast<JpegErrorManager*>(cinfo->err)->warnings++;
}

RasterImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.emit_message = jpeg_emit_message;
  // Everything touched after setjmp lives outside this frame's registers.
  std::vector<std::uint8_t> data;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    corrupt(std::string("jpeg: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  const int width = static_cast<int>(cinfo.output_width);
  const int height = static_cast<int>(cinfo.output_height);
  const int channels = cinfo.output_components;
  data.resize(static_cast<std::size_t>(width) * height * channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = data.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  const int warnings = err.warnings;
  jpeg_destroy_decompress(&cinfo);
  if (warnings > 0) corrupt("jpeg: stream is truncated or inconsistent");
  if (channels != 1 && channels != 3) throw ImageError(ImageErrc::UnsupportedFormat, "jpeg: unsupported component count");
  return RasterImage(width, height, channels, std::move(data));
}

}  // namespace

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw ImageError(ImageErrc::CorruptData, "empty image stream");
  switch (sniff_format(bytes)) {
    case ImageFormat::Png: return decode_png(bytes);
    case ImageFormat::Jpeg: return decode_jpeg(bytes);
    case ImageFormat::Ppm: return PpmParser(bytes).parse();
    case ImageFormat::Unknown: break;
  }
  throw ImageError(ImageErrc::UnsupportedFormat, "unrecognized image encoding");
}

Bytes encode_png(const RasterImage& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.data.data(), 0, nullptr))
    throw ImageError(ImageErrc::InvalidArgument, std::string("png encode: ") + image.message);
  Bytes out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data.data(), 0, nullptr))
    throw ImageError(ImageErrc::InvalidArgument, std::string("png encode: ") + image.message);
  out.resize(size);
  return out;
}

Bytes encode_ppm(const RasterImage& img) {
  ByteWriter w;
  w.raw("P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n");
  if (img.channels == 3) {
    w.raw(img.data);
  } else {
    for (auto v : img.data) {
      w.u8(v);
      w.u8(v);
      w.u8(v);
    }
  }
  return std::move(w).take();
}

Bytes serialize_plane(const PlaneTensor& img) {
  ByteWriter w;
  w.raw("PTNS");
  w.u32(static_cast<std::uint32_t>(img.width));
  w.u32(static_cast<std::uint32_t>(img.height));
  w.u32(static_cast<std::uint32_t>(img.channels));
  for (float v : img.data) w.f32(v);
  return std::move(w).take();
}

PlaneTensor deserialize_plane(std::span<const std::uint8_t> bytes) {
  try {
    ByteReader r(bytes);
    auto magic = r.take(4);
    if (std::memcmp(magic.data(), "PTNS", 4) != 0) throw ImageError(ImageErrc::UnsupportedFormat, "not a PTNS stream");
    const auto w = r.u32();
    const auto h = r.u32();
    const auto c = r.u32();
    if (w == 0 || h == 0) throw ImageError(ImageErrc::ZeroDimension, "PTNS: zero dimension");
    if (w > (1u << 16) || h > (1u << 16) || (c != 1 && c != 3))
      throw ImageError(ImageErrc::CorruptData, "PTNS: implausible header");
    const std::size_t n = static_cast<std::size_t>(w) * h * c;
    if (r.remaining() != n * 4) throw ImageError(ImageErrc::CorruptData, "PTNS: payload size mismatch");
    std::vector<float> data(n);
    for (auto& v : data) v = r.f32();
    return PlaneTensor(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c), std::move(data));
  } catch (const std::out_of_range&) {
    throw ImageError(ImageErrc::CorruptData, "PTNS: truncated stream");
  }
}

}  // namespace retina::imaging
