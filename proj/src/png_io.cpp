#include "hdre/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <fstream>

#include "hdre/errors.hpp"

namespace hdre::img {
namespace {

struct MemReader {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos;
};

void mem_read(png_structp png, png_bytep out, png_size_t n) {
    auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
    if (r->pos + n > r->size) png_error(png, "truncated PNG stream");
    std::memcpy(out, r->data + r->pos, n);
    r->pos += n;
}

void mem_write(png_structp png, png_bytep data, png_size_t n) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + n);
}

void mem_flush(png_structp) {}

[[noreturn]] void on_error(png_structp png, png_const_charp msg) {
    auto* slot = static_cast<std::string*>(png_get_error_ptr(png));
    if (slot) *slot = msg ? msg : "libpng error";
    longjmp(png_jmpbuf(png), 1);
}

void on_warning(png_structp, png_const_charp) {}

} // namespace

LdrImage read_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
        throw FormatError("png: missing signature");

    std::string errmsg;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &errmsg, on_error, on_warning);
    if (!png) throw Error("png: cannot allocate read struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("png: cannot allocate info struct");
    }

    LdrImage img;
    std::vector<png_bytep> rows;
    MemReader reader{bytes.data(), bytes.size(), 0};

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("png: " + (errmsg.empty() ? "decode failed" : errmsg));
    }

    png_set_read_fn(png, &reader, mem_read);
    png_read_info(png, info);

    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (bit_depth != 8 || color_type != PNG_COLOR_TYPE_RGB) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw UnsupportedError("png: only 8-bit RGB images are supported");
    }

    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    img.width = static_cast<int>(png_get_image_width(png, info));
    img.height = static_cast<int>(png_get_image_height(png, info));
    img.data.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    rows.resize(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] = img.data.data() + static_cast<std::size_t>(y) * img.width * 3;

    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

LdrImage read_png_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return read_png(bytes);
}

std::vector<std::uint8_t> write_png(const LdrImage& img) {
    validate(img);

    std::string errmsg;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &errmsg, on_error, on_warning);
    if (!png) throw Error("png: cannot allocate write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png: cannot allocate info struct");
    }

    std::vector<std::uint8_t> out;
    std::vector<png_const_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y)
        rows[static_cast<std::size_t>(y)] = img.data.data() + static_cast<std::size_t>(y) * img.width * 3;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("png: " + (errmsg.empty() ? "encode failed" : errmsg));
    }

    png_set_write_fn(png, &out, mem_write, mem_flush);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, rows[static_cast<std::size_t>(y)]);
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
    return out;
}

void write_png_file(const LdrImage& img, const std::filesystem::path& path) {
    const auto bytes = write_png(img);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("short write to " + path.string());
}

} // namespace hdre::img
