#include "arbsr/image.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

namespace arbsr {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

ImageBuffer load_png(const std::string& path, std::FILE* fp) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw io_error("libpng init failed for " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw io_error("libpng init failed for " + path);
    }
    std::vector<png_bytep> rows;
    ImageBuffer img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw io_error("failed to decode PNG " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    // Normalize everything to 8-bit RGB.
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    img.width = (int)png_get_image_width(png, info);
    img.height = (int)png_get_image_height(png, info);
    if (png_get_rowbytes(png, info) != (png_size_t)img.width * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw io_error("unexpected PNG layout in " + path);
    }
    img.pixels.resize((std::size_t)img.width * img.height * 3);
    rows.resize((std::size_t)img.height);
    for (int y = 0; y < img.height; ++y)
        rows[(std::size_t)y] = img.pixels.data() + (std::size_t)y * img.width * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

int read_ppm_int(std::FILE* fp, const std::string& path) {
    int c;
    // Skip whitespace and '#' comment lines.
    for (;;) {
        c = std::fgetc(fp);
        if (c == '#') {
            while (c != '\n' && c != EOF) c = std::fgetc(fp);
        } else if (!std::isspace(c)) {
            break;
        }
    }
    int v = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        any = true;
        c = std::fgetc(fp);
    }
    if (!any) throw io_error("malformed PPM header in " + path);
    return v;
}

ImageBuffer load_ppm(const std::string& path, std::FILE* fp) {
    char magic[2];
    if (std::fread(magic, 1, 2, fp) != 2 || magic[0] != 'P' || magic[1] != '6')
        throw io_error("not a binary PPM: " + path);
    ImageBuffer img;
    img.width = read_ppm_int(fp, path);
    img.height = read_ppm_int(fp, path);
    const int maxval = read_ppm_int(fp, path);
    if (img.width < 1 || img.height < 1 || maxval != 255)
        throw io_error("unsupported PPM header in " + path + " (need 8-bit)");
    img.pixels.resize((std::size_t)img.width * img.height * 3);
    if (std::fread(img.pixels.data(), 1, img.pixels.size(), fp) != img.pixels.size())
        throw io_error("truncated PPM " + path);
    return img;
}

bool has_suffix(const std::string& s, const char* suf) {
    const std::size_t n = std::strlen(suf);
    return s.size() >= n && s.compare(s.size() - n, n, suf) == 0;
}

void save_png(const ImageBuffer& img, const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw io_error("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw io_error("libpng init failed for " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw io_error("libpng init failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw io_error("failed to encode PNG " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, (png_uint_32)img.width, (png_uint_32)img.height, 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() +
                                                 (std::size_t)y * img.width * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void save_ppm(const ImageBuffer& img, const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw io_error("cannot write " + path);
    std::fprintf(fp.get(), "P6\n%d %d\n255\n", img.width, img.height);
    if (std::fwrite(img.pixels.data(), 1, img.pixels.size(), fp.get()) != img.pixels.size())
        throw io_error("short write to " + path);
}

}  // namespace

ImageBuffer load_image(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw io_error("cannot open " + path);
    unsigned char sig[8] = {0};
    const std::size_t got = std::fread(sig, 1, 8, fp.get());
    std::rewind(fp.get());
    if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0) return load_png(path, fp.get());
    if (got >= 2 && sig[0] == 'P' && sig[1] == '6') return load_ppm(path, fp.get());
    throw io_error("unrecognized image format in " + path + " (expected PNG or P6 PPM)");
}

void save_image(const ImageBuffer& img, const std::string& path) {
    if ((std::size_t)img.width * img.height * 3 != img.pixels.size())
        throw io_error("image buffer size does not match dimensions");
    if (has_suffix(path, ".png") || has_suffix(path, ".PNG")) {
        save_png(img, path);
    } else {
        save_ppm(img, path);
    }
}

void save_pgm(const std::vector<unsigned char>& gray, int width, int height,
              const std::string& path) {
    if ((std::size_t)width * height != gray.size())
        throw io_error("PGM buffer size does not match dimensions");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw io_error("cannot write " + path);
    std::fprintf(fp.get(), "P5\n%d %d\n255\n", width, height);
    if (std::fwrite(gray.data(), 1, gray.size(), fp.get()) != gray.size())
        throw io_error("short write to " + path);
}

Tensor image_to_tensor(const ImageBuffer& img) {
    Tensor t(Shape4{1, 3, img.height, img.width});
    for (int c = 0; c < 3; ++c) {
        real* plane = t.plane(0, c);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                plane[(std::size_t)y * img.width + x] =
                    real(img.pixels[((std::size_t)y * img.width + x) * 3 + c]) / real(255);
    }
    return t;
}

ImageBuffer tensor_to_image(const Tensor& t) {
    if (t.shape.n != 1 || t.shape.c != 3)
        throw shape_error("tensor_to_image: need 1x3xHxW, got " + t.shape.str());
    ImageBuffer img;
    img.height = t.shape.h;
    img.width = t.shape.w;
    img.pixels.resize((std::size_t)img.width * img.height * 3);
    for (int c = 0; c < 3; ++c) {
        const real* plane = t.plane(0, c);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                real v = plane[(std::size_t)y * img.width + x];
                v = v < 0 ? real(0) : (v > 1 ? real(1) : v);
                img.pixels[((std::size_t)y * img.width + x) * 3 + c] =
                    (unsigned char)std::lround((double)v * 255.0);
            }
    }
    return img;
}

}  // namespace arbsr
