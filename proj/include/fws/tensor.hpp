#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fws {

// Dense row-major H x W x C value block; the channel index runs fastest.
// Flat (vector-shaped) data is represented as 1 x 1 x C.
struct Tensor {
    int h = 0, w = 0, c = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int h_, int w_, int c_)
        : h(h_), w(w_), c(c_),
          v(static_cast<std::size_t>(h_) * static_cast<std::size_t>(w_) * c_, 0.0) {}

    static Tensor flat(std::vector<double> data) {
        Tensor t;
        t.h = 1;
        t.w = 1;
        t.c = static_cast<int>(data.size());
        t.v = std::move(data);
        return t;
    }

    std::size_t size() const { return v.size(); }

    double& at(int y, int x, int ch) {
        return v[(static_cast<std::size_t>(y) * w + x) * c + ch];
    }
    double at(int y, int x, int ch) const {
        return v[(static_cast<std::size_t>(y) * w + x) * c + ch];
    }
};

// One preprocessed sample: the packets x features x antennas input block plus
// the capture metadata the few-shot stages key on.
struct CsiTensor {
    Tensor data;
    int label = -1;
    std::string domain;
    int receiver_id = 0;
    std::int64_t event_id = -1;
};

}  // namespace fws
