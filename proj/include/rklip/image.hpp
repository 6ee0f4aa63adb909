#pragma once

#include <string>
#include <vector>

namespace rklip {

// Dense float image, row-major (y, x, c), values in [0, 1].
struct ImageTensor {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> pixels;

    static ImageTensor zeros(int h, int w, int c);

    float at(int y, int x, int c) const {
        return pixels[size_t((y * width + x) * channels + c)];
    }
    float& at(int y, int x, int c) {
        return pixels[size_t((y * width + x) * channels + c)];
    }

    // dims > 0, buffer size consistent, all values finite
    void validate() const;
};

// Binary PPM (P6, maxval 255). The only on-disk image format the toolkit reads.
ImageTensor read_ppm(const std::string& path);
void write_ppm(const ImageTensor& img, const std::string& path);

ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w);
ImageTensor hflip(const ImageTensor& img);
// crop the window [y0, y0+crop_h) x [x0, x0+crop_w), then resize back to the input size
ImageTensor crop_resize(const ImageTensor& img, int y0, int x0, int crop_h, int crop_w);
ImageTensor adjust_brightness(const ImageTensor& img, float delta);   // clamped to [0, 1]
ImageTensor adjust_contrast(const ImageTensor& img, float factor);    // around per-image mean
ImageTensor box_blur3(const ImageTensor& img);

}  // namespace rklip
