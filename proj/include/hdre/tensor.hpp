#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace hdre::nn {

/// Contiguous float array in (batch, channels, height, width) layout.
struct Tensor {
    std::array<int, 4> shape{0, 0, 0, 0};
    std::vector<float> data;

    Tensor() = default;
    Tensor(int n, int c, int h, int w)
        : shape{n, c, h, w},
          data(static_cast<std::size_t>(n) * c * h * w, 0.0f) {}

    static Tensor zeros_like(const Tensor& other) {
        return Tensor(other.shape[0], other.shape[1], other.shape[2], other.shape[3]);
    }

    int n() const { return shape[0]; }
    int c() const { return shape[1]; }
    int h() const { return shape[2]; }
    int w() const { return shape[3]; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    /// Pointer to the (n, c) plane of h*w values.
    float* plane(int n, int c) {
        return data.data() +
               (static_cast<std::size_t>(n) * shape[1] + c) * shape[2] * shape[3];
    }
    const float* plane(int n, int c) const {
        return data.data() +
               (static_cast<std::size_t>(n) * shape[1] + c) * shape[2] * shape[3];
    }

    float& at(int n, int c, int y, int x) {
        return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }
    float at(int n, int c, int y, int x) const {
        return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }

    void fill(float v) { data.assign(data.size(), v); }

    /// True when every element is finite.
    bool all_finite() const;
};

} // namespace hdre::nn
