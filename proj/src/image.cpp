#include "rklip/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "rklip/errors.hpp"

namespace rklip {

ImageTensor ImageTensor::zeros(int h, int w, int c) {
    if (h <= 0 || w <= 0 || c <= 0)
        throw shape_error("image dimensions must be positive");
    ImageTensor img;
    img.height = h;
    img.width = w;
    img.channels = c;
    img.pixels.assign(size_t(h) * size_t(w) * size_t(c), 0.0f);
    return img;
}

void ImageTensor::validate() const {
    if (height <= 0 || width <= 0 || channels <= 0)
        throw shape_error("image dimensions must be positive");
    if (pixels.size() != size_t(height) * size_t(width) * size_t(channels))
        throw shape_error("image buffer size does not match dimensions");
    for (float v : pixels)
        if (!std::isfinite(v)) throw data_error("image contains non-finite values");
}

namespace {

// skips whitespace and '#' comment lines between PPM header tokens
int next_header_int(std::ifstream& in, const std::string& path) {
    int c = in.peek();
    while (c != EOF) {
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
        c = in.peek();
    }
    int value = -1;
    if (!(in >> value))
        throw format_error("bad PPM header in '" + path + "'");
    return value;
}

}  // namespace

ImageTensor read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open image '" + path + "'");
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || m1 != '6')
        throw format_error("'" + path + "' is not a binary PPM (P6) file");
    int w = next_header_int(in, path);
    int h = next_header_int(in, path);
    int maxval = next_header_int(in, path);
    if (w <= 0 || h <= 0)
        throw format_error("bad PPM dimensions in '" + path + "'");
    if (maxval != 255)
        throw format_error("unsupported PPM maxval " + std::to_string(maxval) + " in '" + path + "'");
    in.get();  // single whitespace after maxval
    std::vector<unsigned char> raw(size_t(w) * size_t(h) * 3);
    in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
    if (size_t(in.gcount()) != raw.size())
        throw format_error("truncated PPM payload in '" + path + "'");
    ImageTensor img = ImageTensor::zeros(h, w, 3);
    for (size_t i = 0; i < raw.size(); ++i)
        img.pixels[i] = float(raw[i]) / 255.0f;
    return img;
}

void write_ppm(const ImageTensor& img, const std::string& path) {
    img.validate();
    if (img.channels != 3)
        throw shape_error("PPM output requires a 3-channel image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot open '" + path + "' for writing");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> raw(img.pixels.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        float v = std::clamp(img.pixels[i], 0.0f, 1.0f);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
    if (!out) throw data_error("failed writing '" + path + "'");
}

ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0)
        throw shape_error("resize target must be positive");
    if (out_h == img.height && out_w == img.width) return img;
    ImageTensor out = ImageTensor::zeros(out_h, out_w, img.channels);
    const float sy = float(img.height) / float(out_h);
    const float sx = float(img.width) / float(out_w);
    for (int y = 0; y < out_h; ++y) {
        float fy = (float(y) + 0.5f) * sy - 0.5f;
        int y0 = int(std::floor(fy));
        float wy = fy - float(y0);
        int y0c = std::clamp(y0, 0, img.height - 1);
        int y1c = std::clamp(y0 + 1, 0, img.height - 1);
        for (int x = 0; x < out_w; ++x) {
            float fx = (float(x) + 0.5f) * sx - 0.5f;
            int x0 = int(std::floor(fx));
            float wx = fx - float(x0);
            int x0c = std::clamp(x0, 0, img.width - 1);
            int x1c = std::clamp(x0 + 1, 0, img.width - 1);
            for (int c = 0; c < img.channels; ++c) {
                float top = img.at(y0c, x0c, c) * (1.0f - wx) + img.at(y0c, x1c, c) * wx;
                float bot = img.at(y1c, x0c, c) * (1.0f - wx) + img.at(y1c, x1c, c) * wx;
                out.at(y, x, c) = top * (1.0f - wy) + bot * wy;
            }
        }
    }
    return out;
}

ImageTensor hflip(const ImageTensor& img) {
    ImageTensor out = ImageTensor::zeros(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
    return out;
}

ImageTensor crop_resize(const ImageTensor& img, int y0, int x0, int crop_h, int crop_w) {
    if (crop_h <= 0 || crop_w <= 0 || y0 < 0 || x0 < 0 ||
        y0 + crop_h > img.height || x0 + crop_w > img.width)
        throw shape_error("crop window out of bounds");
    ImageTensor crop = ImageTensor::zeros(crop_h, crop_w, img.channels);
    for (int y = 0; y < crop_h; ++y)
        for (int x = 0; x < crop_w; ++x)
            for (int c = 0; c < img.channels; ++c)
                crop.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return resize_bilinear(crop, img.height, img.width);
}

ImageTensor adjust_brightness(const ImageTensor& img, float delta) {
    ImageTensor out = img;
    for (float& v : out.pixels) v = std::clamp(v + delta, 0.0f, 1.0f);
    return out;
}

ImageTensor adjust_contrast(const ImageTensor& img, float factor) {
    double mean = 0.0;
    for (float v : img.pixels) mean += v;
    mean /= double(img.pixels.empty() ? 1 : img.pixels.size());
    ImageTensor out = img;
    for (float& v : out.pixels)
        v = std::clamp(float(mean) + (v - float(mean)) * factor, 0.0f, 1.0f);
    return out;
}

ImageTensor box_blur3(const ImageTensor& img) {
    ImageTensor out = ImageTensor::zeros(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                float sum = 0.0f;
                int count = 0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) continue;
                        sum += img.at(yy, xx, c);
                        ++count;
                    }
                }
                out.at(y, x, c) = sum / float(count);
            }
        }
    }
    return out;
}

}  // namespace rklip
