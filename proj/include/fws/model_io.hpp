#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fws/bytes.hpp"
#include "fws/errors.hpp"
#include "fws/net.hpp"

namespace fws {

// Model file ("FWSM"), version 1, little-endian:
//
//   magic[4] version:u16 float_width:u8 (4 or 8)
//   input_h:u32 input_w:u32 input_c:u32 l2_epsilon:f64
//   layer_count:u32
//     per layer: kind:u8 kernel_h:i32 kernel_w:i32 stride:i32 pad:i32
//                out_channels:i32 out_width:i32
//   head_classes:u32, then that many class labels as i32
//   per layer: w_count:u64 + values, b_count:u64 + values
//   head values (embedding_dim * head_classes)
//
// Values are f32 or f64 per float_width. Loading re-validates the spec and
// every count before any state is returned.

inline constexpr std::uint16_t kModelFormatVersion = 1;

inline Bytes serialize_model(const NetSpec& spec, const Params& params, int float_width = 4) {
    spec.validate();
    detail::check_params_match(spec, params);
    if (float_width != 4 && float_width != 8) {
        throw ConfigError("model: float width must be 4 or 8");
    }
    params.check_finite();

    ByteWriter w;
    w.raw("FWSM", 4);
    w.u16(kModelFormatVersion);
    w.u8(static_cast<std::uint8_t>(float_width));
    w.u32(static_cast<std::uint32_t>(spec.input_h));
    w.u32(static_cast<std::uint32_t>(spec.input_w));
    w.u32(static_cast<std::uint32_t>(spec.input_c));
    w.f64(spec.l2_epsilon);
    w.u32(static_cast<std::uint32_t>(spec.layers.size()));
    for (const LayerSpec& l : spec.layers) {
        w.u8(static_cast<std::uint8_t>(l.kind));
        w.i32(l.kernel_h);
        w.i32(l.kernel_w);
        w.i32(l.stride);
        w.i32(l.pad);
        w.i32(l.out_channels);
        w.i32(l.out_width);
    }
    w.u32(static_cast<std::uint32_t>(params.head_class_order.size()));
    for (int label : params.head_class_order) w.i32(label);

    auto put_values = [&](const std::vector<double>& v) {
        w.u64(v.size());
        for (double x : v) {
            if (float_width == 4) {
                w.f32(static_cast<float>(x));
            } else {
                w.f64(x);
            }
        }
    };
    for (const LayerParams& l : params.layers) {
        put_values(l.w);
        put_values(l.b);
    }
    put_values(params.head);
    return w.take();
}

inline std::pair<NetSpec, Params> deserialize_model(const Bytes& bytes) {
    ByteReader r(bytes, "model file");
    const std::uint8_t* magic = r.take(4);
    if (std::string(reinterpret_cast<const char*>(magic), 4) != "FWSM") {
        throw DataError("model file: bad magic (not a model file)");
    }
    const std::uint16_t version = r.u16();
    if (version != kModelFormatVersion) {
        throw DataError("model file: unsupported version " + std::to_string(version));
    }
    const int float_width = r.u8();
    if (float_width != 4 && float_width != 8) r.fail("bad float width tag");

    NetSpec spec;
    spec.input_h = static_cast<int>(r.u32());
    spec.input_w = static_cast<int>(r.u32());
    spec.input_c = static_cast<int>(r.u32());
    spec.l2_epsilon = r.f64();
    const std::uint32_t layer_count = r.u32();
    if (layer_count > 1024) r.fail("implausible layer count");
    for (std::uint32_t i = 0; i < layer_count; ++i) {
        LayerSpec l;
        const std::uint8_t kind = r.u8();
        if (kind > static_cast<std::uint8_t>(LayerKind::l2norm)) r.fail("unknown layer kind");
        l.kind = static_cast<LayerKind>(kind);
        l.kernel_h = r.i32();
        l.kernel_w = r.i32();
        l.stride = r.i32();
        l.pad = r.i32();
        l.out_channels = r.i32();
        l.out_width = r.i32();
        spec.layers.push_back(l);
    }
    std::vector<LayerShape> shapes;
    try {
        shapes = spec.chain();
    } catch (const ConfigError& e) {
        throw DataError(std::string("model file: stored spec invalid: ") + e.what());
    }

    Params params;
    const std::uint32_t head_classes = r.u32();
    if (head_classes > 1u << 20) r.fail("implausible head class count");
    if (head_classes == 1) r.fail("head with a single class");
    params.head_class_order.resize(head_classes);
    for (std::uint32_t g = 0; g < head_classes; ++g) {
        params.head_class_order[g] = r.i32();
        if (g > 0 && params.head_class_order[g] <= params.head_class_order[g - 1]) {
            r.fail("head class order not strictly increasing");
        }
    }

    auto get_values = [&](std::vector<double>& v, std::uint64_t expect) {
        const std::uint64_t count = r.u64();
        if (count != expect) {
            r.fail("parameter count " + std::to_string(count) + " does not match spec (need " +
                   std::to_string(expect) + ")");
        }
        v.resize(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            v[i] = float_width == 4 ? static_cast<double>(r.f32()) : r.f64();
        }
    };

    LayerShape in{spec.input_h, spec.input_w, spec.input_c, false};
    params.layers.resize(spec.layers.size());
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const LayerSpec& l = spec.layers[li];
        std::uint64_t w_expect = 0, b_expect = 0;
        if (l.kind == LayerKind::conv2d) {
            w_expect = detail::conv_w_size(l, in.c);
            b_expect = static_cast<std::uint64_t>(l.out_channels);
        } else if (l.kind == LayerKind::dense) {
            w_expect = static_cast<std::uint64_t>(l.out_width) * in.len();
            b_expect = static_cast<std::uint64_t>(l.out_width);
        }
        get_values(params.layers[li].w, w_expect);
        get_values(params.layers[li].b, b_expect);
        in = shapes[li];
    }
    get_values(params.head,
               static_cast<std::uint64_t>(shapes.back().len()) * head_classes);
    if (!r.done()) r.fail("trailing bytes after model payload");

    try {
        params.check_finite();
    } catch (const Error& e) {
        throw DataError(std::string("model file: ") + e.what());
    }
    return {std::move(spec), std::move(params)};
}

inline void save_model(const std::string& path, const NetSpec& spec, const Params& params,
                       int float_width = 4) {
    write_file(path, serialize_model(spec, params, float_width));
}

inline std::pair<NetSpec, Params> load_model(const std::string& path) {
    return deserialize_model(read_file(path));
}

}  // namespace fws
