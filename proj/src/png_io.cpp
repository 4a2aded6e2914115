#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "fashedit/image.hpp"

namespace fashedit {

namespace {

uint32_t crc_table[256];
bool crc_ready = false;

void init_crc() {
    if (crc_ready) return;
    for (uint32_t n = 0; n < 256; n++) {
        uint32_t c = n;
        for (int k = 0; k < 8; k++) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
        crc_table[n] = c;
    }
    crc_ready = true;
}

uint32_t crc32_of(const uint8_t* buf, size_t len, uint32_t crc = 0xffffffffu) {
    init_crc();
    for (size_t i = 0; i < len; i++) crc = crc_table[(crc ^ buf[i]) & 0xff] ^ (crc >> 8);
    return crc;
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back((v >> 24) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back(v & 0xff);
}

void put_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
    put_u32(out, (uint32_t)data.size());
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uint32_t crc = crc32_of(out.data() + start, out.size() - start) ^ 0xffffffffu;
    put_u32(out, crc);
}

std::vector<uint8_t> zlib_deflate(const std::vector<uint8_t>& raw) {
    uLongf bound = compressBound((uLong)raw.size());
    std::vector<uint8_t> out(bound);
    if (compress2(out.data(), &bound, raw.data(), (uLong)raw.size(), 6) != Z_OK)
        fail(ErrorKind::Io, "png: deflate failed");
    out.resize(bound);
    return out;
}

std::vector<uint8_t> zlib_inflate(const uint8_t* data, size_t len, size_t expected) {
    std::vector<uint8_t> out(expected);
    uLongf outLen = (uLongf)expected;
    if (uncompress(out.data(), &outLen, data, (uLong)len) != Z_OK || outLen != expected)
        fail(ErrorKind::Io, "png: inflate failed");
    return out;
}

// colorType: 2 = RGB8, 3 = indexed8, 0 = gray (bitDepth 1 here)
void write_png(const std::string& path, int w, int h, int colorType, int bitDepth,
               const std::vector<uint8_t>& scanlines, const std::vector<Rgb>* palette) {
    std::vector<uint8_t> out;
    static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.insert(out.end(), sig, sig + 8);

    std::vector<uint8_t> ihdr;
    put_u32(ihdr, (uint32_t)w);
    put_u32(ihdr, (uint32_t)h);
    ihdr.push_back((uint8_t)bitDepth);
    ihdr.push_back((uint8_t)colorType);
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter method
    ihdr.push_back(0);  // no interlace
    put_chunk(out, "IHDR", ihdr);

    if (palette) {
        std::vector<uint8_t> plte;
        for (const Rgb& c : *palette) {
            plte.push_back(c.r);
            plte.push_back(c.g);
            plte.push_back(c.b);
        }
        put_chunk(out, "PLTE", plte);
    }

    put_chunk(out, "IDAT", zlib_deflate(scanlines));
    put_chunk(out, "IEND", {});

    write_file_bytes(path, out);
}

struct PngData {
    int w = 0, h = 0, bitDepth = 0, colorType = 0;
    std::vector<Rgb> palette;
    std::vector<uint8_t> raw;  // unfiltered scanline bytes
};

int bytes_per_pixel(int colorType, int bitDepth) {
    int channels = colorType == 2 ? 3 : 1;
    return std::max(1, channels * bitDepth / 8);
}

size_t row_bytes(int w, int colorType, int bitDepth) {
    int channels = colorType == 2 ? 3 : 1;
    return ((size_t)w * channels * bitDepth + 7) / 8;
}

PngData read_png(const std::string& path) {
    std::vector<uint8_t> buf = read_file_bytes(path);
    static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    if (buf.size() < 8 || memcmp(buf.data(), sig, 8) != 0) fail(ErrorKind::Io, "png: bad signature: " + path);

    PngData png;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 8 <= buf.size()) {
        uint32_t len = (buf[pos] << 24) | (buf[pos + 1] << 16) | (buf[pos + 2] << 8) | buf[pos + 3];
        if (pos + 12 + len > buf.size()) fail(ErrorKind::Io, "png: truncated chunk");
        const char* type = (const char*)buf.data() + pos + 4;
        const uint8_t* data = buf.data() + pos + 8;
        if (memcmp(type, "IHDR", 4) == 0) {
            png.w = (data[0] << 24) | (data[1] << 16) | (data[2] << 8) | data[3];
            png.h = (data[4] << 24) | (data[5] << 16) | (data[6] << 8) | data[7];
            png.bitDepth = data[8];
            png.colorType = data[9];
            if (data[12] != 0) fail(ErrorKind::Io, "png: interlace unsupported");
        } else if (memcmp(type, "PLTE", 4) == 0) {
            for (uint32_t i = 0; i + 2 < len; i += 3) png.palette.push_back({data[i], data[i + 1], data[i + 2]});
        } else if (memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (png.w <= 0 || png.h <= 0) fail(ErrorKind::Io, "png: missing IHDR");

    size_t rb = row_bytes(png.w, png.colorType, png.bitDepth);
    std::vector<uint8_t> filtered = zlib_inflate(idat.data(), idat.size(), (rb + 1) * png.h);

    // unfilter (types 0-4)
    int bpp = bytes_per_pixel(png.colorType, png.bitDepth);
    png.raw.assign(rb * png.h, 0);
    for (int y = 0; y < png.h; y++) {
        uint8_t ft = filtered[(rb + 1) * y];
        const uint8_t* src = filtered.data() + (rb + 1) * y + 1;
        uint8_t* dst = png.raw.data() + rb * y;
        const uint8_t* prior = y > 0 ? png.raw.data() + rb * (y - 1) : nullptr;
        for (size_t x = 0; x < rb; x++) {
            int a = x >= (size_t)bpp ? dst[x - bpp] : 0;
            int b = prior ? prior[x] : 0;
            int c = (prior && x >= (size_t)bpp) ? prior[x - bpp] : 0;
            int v = src[x];
            switch (ft) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: {
                    int p = a + b - c;
                    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
                    v += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
                    break;
                }
                default: fail(ErrorKind::Io, "png: unknown filter type");
            }
            dst[x] = (uint8_t)v;
        }
    }
    return png;
}

}  // namespace

void write_png_rgb(const std::string& path, const Image& img) {
    size_t rb = (size_t)img.w * 3;
    std::vector<uint8_t> scan((rb + 1) * img.h, 0);
    for (int y = 0; y < img.h; y++)
        memcpy(scan.data() + (rb + 1) * y + 1, img.px.data() + rb * y, rb);
    write_png(path, img.w, img.h, 2, 8, scan, nullptr);
}

void write_png_indexed(const std::string& path, const LabelMap& labels, const std::vector<Rgb>& palette) {
    size_t rb = (size_t)labels.w;
    std::vector<uint8_t> scan((rb + 1) * labels.h, 0);
    for (int y = 0; y < labels.h; y++)
        memcpy(scan.data() + (rb + 1) * y + 1, labels.v.data() + rb * y, rb);
    write_png(path, labels.w, labels.h, 3, 8, scan, &palette);
}

void write_png_gray1(const std::string& path, const BoolMap& mask) {
    size_t rb = ((size_t)mask.w + 7) / 8;
    std::vector<uint8_t> scan((rb + 1) * mask.h, 0);
    for (int y = 0; y < mask.h; y++) {
        uint8_t* row = scan.data() + (rb + 1) * y + 1;
        for (int x = 0; x < mask.w; x++)
            if (mask.at(y, x)) row[x / 8] |= (uint8_t)(0x80 >> (x % 8));
    }
    write_png(path, mask.w, mask.h, 0, 1, scan, nullptr);
}

Image read_png_rgb(const std::string& path) {
    PngData png = read_png(path);
    Image img(png.h, png.w);
    size_t rb = row_bytes(png.w, png.colorType, png.bitDepth);
    if (png.colorType == 2 && png.bitDepth == 8) {
        for (int y = 0; y < png.h; y++)
            memcpy(img.px.data() + (size_t)y * png.w * 3, png.raw.data() + rb * y, (size_t)png.w * 3);
    } else if (png.colorType == 3 && png.bitDepth == 8) {
        for (int y = 0; y < png.h; y++)
            for (int x = 0; x < png.w; x++) {
                uint8_t idx = png.raw[rb * y + x];
                if (idx >= png.palette.size()) fail(ErrorKind::Io, "png: palette index out of range");
                img.set(y, x, png.palette[idx]);
            }
    } else if (png.colorType == 0 && png.bitDepth == 1) {
        for (int y = 0; y < png.h; y++)
            for (int x = 0; x < png.w; x++) {
                uint8_t v = (png.raw[rb * y + x / 8] >> (7 - x % 8)) & 1 ? 255 : 0;
                img.set(y, x, {v, v, v});
            }
    } else {
        fail(ErrorKind::Io, "png: unsupported format in " + path);
    }
    return img;
}

LabelMap read_png_indexed(const std::string& path) {
    PngData png = read_png(path);
    if (png.colorType != 3 || png.bitDepth != 8) fail(ErrorKind::Io, "png: expected 8-bit indexed: " + path);
    LabelMap lm(png.h, png.w);
    size_t rb = row_bytes(png.w, png.colorType, png.bitDepth);
    for (int y = 0; y < png.h; y++)
        memcpy(lm.v.data() + (size_t)y * png.w, png.raw.data() + rb * y, png.w);
    return lm;
}

BoolMap read_png_gray1(const std::string& path) {
    PngData png = read_png(path);
    if (png.colorType != 0 || png.bitDepth != 1) fail(ErrorKind::Io, "png: expected 1-bit gray: " + path);
    BoolMap bm(png.h, png.w);
    size_t rb = row_bytes(png.w, png.colorType, png.bitDepth);
    for (int y = 0; y < png.h; y++)
        for (int x = 0; x < png.w; x++)
            bm.at(y, x) = (png.raw[rb * y + x / 8] >> (7 - x % 8)) & 1;
    return bm;
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::Io, "cannot open " + path);
    return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) fail(ErrorKind::Io, "cannot write " + tmp);
        f.write((const char*)bytes.data(), (std::streamsize)bytes.size());
    }
    std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
    write_file_bytes(path, std::vector<uint8_t>(contents.begin(), contents.end()));
}

}  // namespace fashedit
