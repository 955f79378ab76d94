#include "hdre/hdr_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

#include "hdre/errors.hpp"

namespace hdre::img {
namespace {

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8() {
        if (pos_ >= bytes_.size()) throw TruncationError("radiance: unexpected end of stream");
        return bytes_[pos_++];
    }

    void read(std::uint8_t* dst, std::size_t n) {
        if (pos_ + n > bytes_.size()) throw TruncationError("radiance: unexpected end of stream");
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }

    /// Reads one '\n'-terminated header line (terminator consumed).
    std::string line() {
        std::string out;
        while (true) {
            if (pos_ >= bytes_.size()) throw TruncationError("radiance: header ends mid-line");
            const char c = static_cast<char>(bytes_[pos_++]);
            if (c == '\n') return out;
            out.push_back(c);
            if (out.size() > 4096) throw FormatError("radiance: header line too long");
        }
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

void decode_rgbe(const std::uint8_t rgbe[4], float* out) {
    if (rgbe[3] == 0) {
        out[0] = out[1] = out[2] = 0.0f;
        return;
    }
    const double scale = std::ldexp(1.0, static_cast<int>(rgbe[3]) - 128) / 256.0;
    out[0] = static_cast<float>((rgbe[0] + 0.5) * scale);
    out[1] = static_cast<float>((rgbe[1] + 0.5) * scale);
    out[2] = static_cast<float>((rgbe[2] + 0.5) * scale);
}

void read_rle_component(ByteReader& in, std::uint8_t* dst, int width) {
    int pos = 0;
    while (pos < width) {
        const int code = in.u8();
        if (code > 128) {
            const int run = code - 128;
            if (pos + run > width) throw FormatError("radiance: RLE run overflows scanline");
            const std::uint8_t value = in.u8();
            std::memset(dst + pos, value, static_cast<std::size_t>(run));
            pos += run;
        } else {
            if (code == 0) throw FormatError("radiance: zero-length RLE literal");
            if (pos + code > width) throw FormatError("radiance: RLE literal overflows scanline");
            in.read(dst + pos, static_cast<std::size_t>(code));
            pos += code;
        }
    }
}

} // namespace

void rgb_to_rgbe(float r, float g, float b, std::uint8_t out[4]) {
    float v = r;
    if (g > v) v = g;
    if (b > v) v = b;
    if (v < 1e-32f) {
        out[0] = out[1] = out[2] = out[3] = 0;
        return;
    }
    int e = 0;
    const float m = std::frexp(v, &e); // v = m * 2^e, m in [0.5, 1)
    const float scale = m * 256.0f / v;
    out[0] = static_cast<std::uint8_t>(r * scale);
    out[1] = static_cast<std::uint8_t>(g * scale);
    out[2] = static_cast<std::uint8_t>(b * scale);
    out[3] = static_cast<std::uint8_t>(e + 128);
}

void rgbe_to_rgb(const std::uint8_t rgbe[4], float& r, float& g, float& b) {
    float px[3];
    decode_rgbe(rgbe, px);
    r = px[0];
    g = px[1];
    b = px[2];
}

HdrImage read_radiance_hdr(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);

    const std::string signature = in.line();
    if (signature != "#?RADIANCE" && signature != "#?RGBE")
        throw FormatError("radiance: missing #?RADIANCE signature");

    bool format_seen = false;
    while (true) {
        const std::string l = in.line();
        if (l.empty()) break; // blank line ends the attribute block
        if (l.rfind("FORMAT=", 0) == 0) {
            const std::string fmt = l.substr(7);
            if (fmt == "32-bit_rle_rgbe")
                format_seen = true;
            else
                throw UnsupportedError("radiance: unsupported FORMAT " + fmt);
        }
        // other attributes (EXPOSURE, comments, ...) are ignored
    }
    if (!format_seen) throw FormatError("radiance: header lacks FORMAT=32-bit_rle_rgbe");

    const std::string resolution = in.line();
    int width = 0, height = 0;
    if (std::sscanf(resolution.c_str(), "-Y %d +X %d", &height, &width) != 2) {
        int a = 0, b = 0;
        if (std::sscanf(resolution.c_str(), "%*s %d %*s %d", &a, &b) == 2)
            throw UnsupportedError("radiance: only -Y h +X w orientation is supported");
        throw FormatError("radiance: malformed resolution line");
    }
    if (width < 1 || height < 1) throw FormatError("radiance: non-positive dimensions");

    HdrImage img;
    img.width = width;
    img.height = height;
    img.data.resize(static_cast<std::size_t>(width) * height * 3);

    std::vector<std::uint8_t> scanline(static_cast<std::size_t>(width) * 4);
    for (int y = 0; y < height; ++y) {
        bool rle = false;
        std::uint8_t head[4];
        if (width >= 8 && width <= 0x7fff) {
            in.read(head, 4);
            rle = head[0] == 2 && head[1] == 2 && ((head[2] << 8) | head[3]) == width;
        }
        if (rle) {
            // four per-component byte streams
            for (int c = 0; c < 4; ++c)
                read_rle_component(in, scanline.data() + static_cast<std::size_t>(c) * width, width);
            for (int x = 0; x < width; ++x) {
                const std::uint8_t rgbe[4] = {scanline[x], scanline[width + x],
                                              scanline[2 * width + x], scanline[3 * width + x]};
                decode_rgbe(rgbe, img.pixel(x, y));
            }
        } else {
            int x = 0;
            if (width >= 8 && width <= 0x7fff) {
                decode_rgbe(head, img.pixel(0, y)); // the probe bytes were pixel 0
                x = 1;
            }
            for (; x < width; ++x) {
                std::uint8_t rgbe[4];
                in.read(rgbe, 4);
                decode_rgbe(rgbe, img.pixel(x, y));
            }
        }
    }
    return img;
}

HdrImage read_radiance_hdr_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return read_radiance_hdr(bytes);
}

std::vector<std::uint8_t> write_radiance_hdr(const HdrImage& img) {
    validate(img);
    std::vector<std::uint8_t> out;
    out.reserve(64 + static_cast<std::size_t>(img.width) * img.height * 4);

    char header[96];
    const int n = std::snprintf(header, sizeof(header),
                                "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y %d +X %d\n",
                                img.height, img.width);
    out.insert(out.end(), header, header + n);

    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const float* px = img.pixel(x, y);
            std::uint8_t rgbe[4];
            rgb_to_rgbe(px[0], px[1], px[2], rgbe);
            out.insert(out.end(), rgbe, rgbe + 4);
        }
    }
    return out;
}

void write_radiance_hdr_file(const HdrImage& img, const std::filesystem::path& path) {
    const auto bytes = write_radiance_hdr(img);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("short write to " + path.string());
}

} // namespace hdre::img
