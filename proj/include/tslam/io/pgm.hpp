#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tslam/core/error.hpp"
#include "tslam/core/raster.hpp"
#include "tslam/enhance/thermal_enhance.hpp"

namespace tslam {

inline constexpr double kDepthQuantum = 1e-3;  // meters per depth count

namespace detail {

inline void skip_pgm_space(std::istream& is) {
  for (;;) {
    const int c = is.peek();
    if (c == '#') {
      std::string comment;
      std::getline(is, comment);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      is.get();
    } else {
      return;
    }
  }
}

inline long read_pgm_int(std::istream& is, const std::string& name) {
  skip_pgm_space(is);
  long v = -1;
  if (!(is >> v) || v < 0) throw InvalidArgument(name + ": malformed PGM header");
  return v;
}

}  // namespace detail

/// Binary PGM (P5). maxval < 256 is 8-bit and promoted to the 16-bit range
/// (x257 for maxval 255); larger maxval is 16-bit big-endian kept as is.
inline Raster<std::uint16_t> read_pgm(std::istream& is, const std::string& name = "<pgm>") {
  char magic[2] = {0, 0};
  if (!is.read(magic, 2) || magic[0] != 'P' || magic[1] != '5') throw InvalidArgument(name + ": not a binary PGM (P5)");
  const long w = detail::read_pgm_int(is, name);
  const long h = detail::read_pgm_int(is, name);
  const long maxval = detail::read_pgm_int(is, name);
  if (w < 1 || h < 1 || w > 1 << 15 || h > 1 << 15) throw InvalidArgument(name + ": bad PGM dimensions");
  if (maxval < 1 || maxval > 65535) throw InvalidArgument(name + ": bad PGM maxval");
  is.get();  // single whitespace before the raster
  const bool wide = maxval > 255;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<unsigned char> buf(n * (wide ? 2 : 1));
  if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    throw InvalidArgument(name + ": truncated PGM raster");
  }
  Raster<std::uint16_t> out(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < n; ++i) {
    if (wide) {
      out[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    } else if (maxval == 255) {
      out[i] = static_cast<std::uint16_t>(buf[i] * 257);
    } else {
      out[i] = static_cast<std::uint16_t>(std::lround(buf[i] * 65535.0 / maxval));
    }
  }
  return out;
}

inline Raster<std::uint16_t> read_pgm_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot open '" + path + "'");
  return read_pgm(is, path);
}

/// 16-bit big-endian P5 with maxval 65535.
inline void write_pgm16(std::ostream& os, const Raster<std::uint16_t>& img) {
  os << "P5\n" << img.width() << ' ' << img.height() << "\n65535\n";
  std::vector<unsigned char> buf(img.size() * 2);
  for (std::size_t i = 0; i < img.size(); ++i) {
    buf[2 * i] = static_cast<unsigned char>(img[i] >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(img[i] & 0xff);
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

inline void write_pgm16_file(const std::string& path, const Raster<std::uint16_t>& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot open '" + path + "' for writing");
  write_pgm16(os, img);
  if (!os) throw InvalidArgument("failed writing '" + path + "'");
}

/// [0, 1] intensities to full-range 16-bit counts.
inline RawThermal quantize_image(const ImageGray& img) {
  RawThermal out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    out[i] = static_cast<std::uint16_t>(std::lround(std::clamp(img[i], 0.0, 1.0) * 65535.0));
  }
  return out;
}

/// Counts / 65535, no stretching.
inline ImageGray counts_to_unit(const RawThermal& raw) {
  ImageGray out(raw.width(), raw.height());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / 65535.0;
  return out;
}

/// Millimeter counts, 0 for invalid. Throws for depths beyond the encodable
/// range.
inline Raster<std::uint16_t> encode_depth(const DepthMap& d) {
  Raster<std::uint16_t> out(d.width(), d.height(), 0);
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      if (!d.is_valid(x, y)) continue;
      const long v = std::lround(d.depth(x, y) / kDepthQuantum);
      if (v > 65535) throw InvalidArgument("depth " + std::to_string(d.depth(x, y)) + " m exceeds the 16-bit encoding");
      // Depths below half a millimeter would encode as invalid; keep them valid.
      out(x, y) = static_cast<std::uint16_t>(std::max(1L, v));
    }
  }
  return out;
}

inline DepthMap decode_depth(const Raster<std::uint16_t>& counts) {
  DepthMap d(counts.width(), counts.height());
  for (int y = 0; y < counts.height(); ++y) {
    for (int x = 0; x < counts.width(); ++x) {
      if (counts(x, y) != 0) d.set(x, y, counts(x, y) * kDepthQuantum);
    }
  }
  return d;
}

inline void write_depth_file(const std::string& path, const DepthMap& d) { write_pgm16_file(path, encode_depth(d)); }
inline DepthMap read_depth_file(const std::string& path) { return decode_depth(read_pgm_file(path)); }

}  // namespace tslam
