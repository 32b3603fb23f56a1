#pragma once

// Thin libpng wrapper: whole-buffer decode/encode of 8/16-bit PNG.

#include <png.h>

#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "dicseg/error.hpp"

namespace dicseg::png {

struct Decoded {
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;  // 8 or 16 after expansion
    std::vector<std::uint16_t> samples;  // row-major, interleaved channels
};

namespace detail {

struct ReadCursor {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos;
};

inline void read_from_buffer(png_structp png, png_bytep out, png_size_t n) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->pos + n > cur->size) png_error(png, "truncated PNG stream");
    std::memcpy(out, cur->data + cur->pos, n);
    cur->pos += n;
}

inline void append_to_buffer(png_structp png, png_bytep in, png_size_t n) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), in, in + n);
}

inline void flush_noop(png_structp) {}

inline void quiet_warning(png_structp, png_const_charp) {}

inline void record_error(png_structp png, png_const_charp msg) {
    auto* slot = static_cast<std::string*>(png_get_error_ptr(png));
    if (slot) *slot = msg;
    png_longjmp(png, 1);
}

}  // namespace detail

/// Decodes a PNG held in memory. Palette and sub-byte gray are expanded.
inline Decoded decode(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>") {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw FormatError(name + ": not a PNG file");
    }
    Decoded out;
    std::string err;
    std::vector<std::uint8_t> raw;
    std::vector<png_bytep> rows;
    detail::ReadCursor cursor{bytes.data(), bytes.size(), 0};

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, detail::record_error,
                                             detail::quiet_warning);
    if (!png) throw IoError(name + ": libpng initialization failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError(name + ": libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(name + ": PNG decode failed: " + err);
    }
    png_set_read_fn(png, &cursor, detail::read_from_buffer);
    png_read_info(png, info);

    const int color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);

    const std::size_t rowbytes = png_get_rowbytes(png, info);
    raw.resize(rowbytes * static_cast<std::size_t>(out.height));
    rows.resize(static_cast<std::size_t>(out.height));
    for (int y = 0; y < out.height; ++y) rows[y] = raw.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
    out.samples.resize(n);
    if (out.bit_depth == 16) {
        for (std::size_t i = 0; i < n; ++i) {
            out.samples[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) out.samples[i] = raw[i];
    }
    return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for " + path.string());
    return bytes;
}

inline Decoded decode_file(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return decode(bytes, path.string());
}

/// Encodes interleaved samples; bit_depth 8 or 16, channels 1 (gray) or 3 (RGB).
inline std::vector<std::uint8_t> encode(int width, int height, int channels, int bit_depth,
                                        std::span<const std::uint16_t> samples) {
    if ((bit_depth != 8 && bit_depth != 16) || (channels != 1 && channels != 3)) {
        throw ParameterError("PNG encode supports 8/16-bit gray or RGB only");
    }
    if (samples.size() != static_cast<std::size_t>(width) * height * channels) {
        throw ShapeError("PNG encode: sample count does not match dimensions");
    }
    const std::size_t bytes_per_sample = bit_depth / 8;
    const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * bytes_per_sample;
    std::vector<std::uint8_t> raw(rowbytes * height);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (bit_depth == 16) {
            raw[2 * i] = static_cast<std::uint8_t>(samples[i] >> 8);
            raw[2 * i + 1] = static_cast<std::uint8_t>(samples[i] & 0xFF);
        } else {
            raw[i] = static_cast<std::uint8_t>(samples[i]);
        }
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) rows[y] = raw.data() + rowbytes * y;

    std::vector<std::uint8_t> out;
    std::string err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::record_error,
                                              detail::quiet_warning);
    if (!png) throw IoError("libpng initialization failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed: " + err);
    }
    png_set_write_fn(png, &out, detail::append_to_buffer, detail::flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace dicseg::png
