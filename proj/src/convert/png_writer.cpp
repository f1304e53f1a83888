#include "png_writer.hpp"

#include "sheetagent/error.hpp"

#include <png.h>

#include <csetjmp>

namespace sheetagent::convert::detail {
namespace {

void on_write(png_structp png, png_bytep data, png_size_t len)
{
    static_cast<std::string*>(png_get_io_ptr(png))->append(reinterpret_cast<const char*>(data), len);
}

void on_flush(png_structp) {}

// libpng is C; unwind with its longjmp rather than a C++ throw through its frames.
void on_error(png_structp png, png_const_charp)
{
    png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

} // namespace

std::string encode_png(const std::vector<std::uint8_t>& rgba, std::uint32_t width, std::uint32_t height)
{
    std::string out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, &on_error, &on_warning);
    if (!png)
        throw Error("png encoder: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png encoder: out of memory");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("png encoder failed");
    }
    {
        png_set_write_fn(png, &out, &on_write, &on_flush);
        png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_set_compression_level(png, 6);
        png_write_info(png, info);
        for (std::uint32_t y = 0; y < height; ++y)
            png_write_row(png, const_cast<png_bytep>(rgba.data() + std::size_t(y) * width * 4));
        png_write_end(png, nullptr);
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

} // namespace sheetagent::convert::detail
