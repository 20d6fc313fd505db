#include <algorithm>
#include <cmath>

#include "dncnn/model.hpp"

namespace dncnn {

Tensor4<float> image_to_tensor(const ImageGray8& image) {
    Tensor4<float> t(Shape4{1, 1, image.height, image.width});
    for (std::size_t i = 0; i < image.pixels.size(); ++i) t.values()[static_cast<Index>(i)] = image.pixels[i] / 255.0f;
    return t;
}

ImageGray8 tensor_to_image(const Tensor4<float>& t) {
    if (t.n() != 1 || t.c() != 1) throw ShapeError("tensor_to_image needs a 1x1xHxW tensor, got " + to_string(t.shape()));
    ImageGray8 out(static_cast<int>(t.w()), static_cast<int>(t.h()));
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const float v = std::clamp(t.values()[static_cast<Index>(i)], 0.0f, 1.0f);
        out.pixels[i] = static_cast<std::uint8_t>(std::floor(v * 255.0f + 0.5f));
    }
    return out;
}

ImageGray8 denoise_image(const DnCNN<float>& model, const ImageGray8& image) {
    return tensor_to_image(infer(model, image_to_tensor(image)).denoised);
}

} // namespace dncnn
