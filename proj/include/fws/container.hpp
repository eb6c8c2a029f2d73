#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fws/bytes.hpp"
#include "fws/csi.hpp"
#include "fws/errors.hpp"
#include "fws/tensor.hpp"

namespace fws {

// Portable dataset container (".fws", magic "FWS1", little-endian):
//
//   magic[4] version:u16 payload_kind:u16 item_count:u32
//   grid: subcarrier_count:u16, then the group indices as i16
//   payload_kind 0 (recordings), per item:
//     label:i32 domain:str receiver_id:i32 packet_rate:f64 event_id:i64
//     antenna_count:u16 frame_count:u32
//     per frame: timestamp:f64, then subcarriers x antennas (re:f32 im:f32)
//   payload_kind 1 (preprocessed tensors), per item:
//     label:i32 domain:str receiver_id:i32 event_id:i64
//     h:u32 w:u32 c:u32, then h*w*c values:f32
//
// Only the group indices of the grid are stored — they are all the pipeline
// needs downstream of synthesis; center frequency and spacing live in configs.

inline constexpr std::uint16_t kContainerFormatVersion = 1;
inline constexpr std::uint16_t kPayloadRecordings = 0;
inline constexpr std::uint16_t kPayloadTensors = 1;

namespace detail {

inline constexpr std::uint32_t kMaxItems = 1u << 24;
inline constexpr int kMaxSubcarriers = 4096;
inline constexpr int kMaxAntennas = 64;
inline constexpr std::uint32_t kMaxFrames = 1u << 24;

inline void write_header(ByteWriter& w, std::uint16_t payload_kind, std::uint32_t count,
                         const std::vector<int>& grid_indices) {
    if (grid_indices.empty() || grid_indices.size() > kMaxSubcarriers) {
        throw ConfigError("container: grid index list empty or implausibly long");
    }
    for (std::size_t i = 0; i < grid_indices.size(); ++i) {
        if (grid_indices[i] < -32768 || grid_indices[i] > 32767) {
            throw ConfigError("container: grid index out of i16 range");
        }
        if (i > 0 && grid_indices[i] <= grid_indices[i - 1]) {
            throw ConfigError("container: grid indices must be strictly increasing");
        }
    }
    w.raw("FWS1", 4);
    w.u16(kContainerFormatVersion);
    w.u16(payload_kind);
    w.u32(count);
    w.u16(static_cast<std::uint16_t>(grid_indices.size()));
    for (int m : grid_indices) w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(m)));
}

// Parses up to the item count; leaves the reader at the first item.
inline std::pair<std::uint32_t, std::vector<int>> read_header(ByteReader& r,
                                                              std::uint16_t expect_kind) {
    const std::uint8_t* magic = r.take(4);
    if (std::string(reinterpret_cast<const char*>(magic), 4) != "FWS1") {
        throw DataError("container: bad magic (not a .fws container)");
    }
    const std::uint16_t version = r.u16();
    if (version != kContainerFormatVersion) {
        throw DataError("container: unsupported version " + std::to_string(version));
    }
    const std::uint16_t kind = r.u16();
    if (kind != kPayloadRecordings && kind != kPayloadTensors) {
        r.fail("unknown payload kind " + std::to_string(kind));
    }
    if (kind != expect_kind) {
        throw DataError(std::string("container: holds ") +
                        (kind == kPayloadRecordings ? "raw recordings" : "preprocessed tensors") +
                        ", expected " +
                        (expect_kind == kPayloadRecordings ? "raw recordings"
                                                           : "preprocessed tensors"));
    }
    const std::uint32_t count = r.u32();
    if (count > kMaxItems) r.fail("implausible item count");
    const std::uint16_t sc = r.u16();
    if (sc == 0 || sc > kMaxSubcarriers) r.fail("implausible subcarrier count");
    std::vector<int> grid_indices(sc);
    for (std::uint16_t i = 0; i < sc; ++i) {
        grid_indices[i] = static_cast<std::int16_t>(r.u16());
        if (i > 0 && grid_indices[i] <= grid_indices[i - 1]) {
            r.fail("grid indices not strictly increasing");
        }
    }
    return {count, std::move(grid_indices)};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Recording payload
// ---------------------------------------------------------------------------

inline Bytes write_container(const std::vector<CsiRecording>& recordings,
                             const std::vector<int>& grid_indices) {
    const int n_sc = static_cast<int>(grid_indices.size());
    for (std::size_t k = 0; k < recordings.size(); ++k) {
        recordings[k].validate();
        if (!recordings[k].frames.empty() &&
            recordings[k].frames[0].subcarrier_count != n_sc) {
            throw ConfigError("container: recording " + std::to_string(k) +
                              " uses a different subcarrier grid");
        }
    }
    if (recordings.size() > detail::kMaxItems) throw ConfigError("container: too many recordings");

    ByteWriter w;
    detail::write_header(w, kPayloadRecordings, static_cast<std::uint32_t>(recordings.size()),
                         grid_indices);
    for (const CsiRecording& rec : recordings) {
        const int n_ant = rec.frames.empty() ? 1 : rec.frames[0].antenna_count;
        if (n_ant < 1 || n_ant > detail::kMaxAntennas) {
            throw ConfigError("container: antenna count out of range");
        }
        if (rec.frames.size() > detail::kMaxFrames) {
            throw ConfigError("container: recording too long");
        }
        w.i32(rec.label);
        w.str(rec.domain);
        w.i32(rec.receiver_id);
        w.f64(rec.packet_rate_hz);
        w.i64(rec.event_id);
        w.u16(static_cast<std::uint16_t>(n_ant));
        w.u32(static_cast<std::uint32_t>(rec.frames.size()));
        for (const RawCsiFrame& fr : rec.frames) {
            w.f64(fr.timestamp_s);
            for (const std::complex<double>& z : fr.csi) {
                w.f32(static_cast<float>(z.real()));
                w.f32(static_cast<float>(z.imag()));
            }
        }
    }
    return w.take();
}

struct Container {
    std::vector<int> grid_indices;
    std::vector<CsiRecording> recordings;
};

inline Container read_container(const Bytes& bytes) {
    ByteReader r(bytes, "container");
    auto [count, grid_indices] = detail::read_header(r, kPayloadRecordings);
    const int n_sc = static_cast<int>(grid_indices.size());

    Container out;
    out.grid_indices = std::move(grid_indices);
    out.recordings.reserve(std::min<std::uint32_t>(count, 1024));
    for (std::uint32_t k = 0; k < count; ++k) {
        try {
            CsiRecording rec;
            rec.label = r.i32();
            rec.domain = r.str();
            rec.receiver_id = r.i32();
            rec.packet_rate_hz = r.f64();
            rec.event_id = r.i64();
            const int n_ant = r.u16();
            if (n_ant < 1 || n_ant > detail::kMaxAntennas) r.fail("implausible antenna count");
            const std::uint32_t frames = r.u32();
            if (frames > detail::kMaxFrames) r.fail("implausible frame count");
            rec.frames.resize(frames);
            for (std::uint32_t f = 0; f < frames; ++f) {
                RawCsiFrame& fr = rec.frames[f];
                fr.timestamp_s = r.f64();
                fr.subcarrier_count = n_sc;
                fr.antenna_count = n_ant;
                const std::size_t samples = static_cast<std::size_t>(n_sc) * n_ant;
                fr.csi.resize(samples);
                for (std::size_t s = 0; s < samples; ++s) {
                    const double re = static_cast<double>(r.f32());
                    const double im = static_cast<double>(r.f32());
                    fr.csi[s] = {re, im};
                }
            }
            out.recordings.push_back(std::move(rec));
        } catch (const DataError& e) {
            throw DataError("container: recording " + std::to_string(k) + ": " + e.what());
        }
    }
    if (!r.done()) r.fail("trailing bytes after the last recording");
    return out;
}

// ---------------------------------------------------------------------------
// Tensor payload
// ---------------------------------------------------------------------------

inline Bytes write_tensor_container(const std::vector<CsiTensor>& tensors,
                                    const std::vector<int>& grid_indices) {
    if (tensors.size() > detail::kMaxItems) throw ConfigError("container: too many tensors");
    ByteWriter w;
    detail::write_header(w, kPayloadTensors, static_cast<std::uint32_t>(tensors.size()),
                         grid_indices);
    for (const CsiTensor& t : tensors) {
        if (t.data.h < 1 || t.data.w < 1 || t.data.c < 1 ||
            t.data.v.size() != static_cast<std::size_t>(t.data.h) * t.data.w * t.data.c) {
            throw ConfigError("container: tensor has inconsistent shape");
        }
        w.i32(t.label);
        w.str(t.domain);
        w.i32(t.receiver_id);
        w.i64(t.event_id);
        w.u32(static_cast<std::uint32_t>(t.data.h));
        w.u32(static_cast<std::uint32_t>(t.data.w));
        w.u32(static_cast<std::uint32_t>(t.data.c));
        for (double x : t.data.v) w.f32(static_cast<float>(x));
    }
    return w.take();
}

struct TensorContainer {
    std::vector<int> grid_indices;
    std::vector<CsiTensor> tensors;
};

inline TensorContainer read_tensor_container(const Bytes& bytes) {
    ByteReader r(bytes, "container");
    auto [count, grid_indices] = detail::read_header(r, kPayloadTensors);

    TensorContainer out;
    out.grid_indices = std::move(grid_indices);
    out.tensors.reserve(std::min<std::uint32_t>(count, 1024));
    for (std::uint32_t k = 0; k < count; ++k) {
        try {
            CsiTensor t;
            t.label = r.i32();
            t.domain = r.str();
            t.receiver_id = r.i32();
            t.event_id = r.i64();
            const std::uint32_t h = r.u32(), w = r.u32(), c = r.u32();
            const std::uint64_t total = static_cast<std::uint64_t>(h) * w * c;
            if (h == 0 || w == 0 || c == 0) r.fail("empty tensor dimension");
            // 4 bytes per value must fit in what is actually left.
            if (total * 4 > r.remaining()) r.fail("tensor payload larger than remaining bytes");
            t.data.h = static_cast<int>(h);
            t.data.w = static_cast<int>(w);
            t.data.c = static_cast<int>(c);
            t.data.v.resize(total);
            for (std::uint64_t i = 0; i < total; ++i) {
                t.data.v[i] = static_cast<double>(r.f32());
            }
            out.tensors.push_back(std::move(t));
        } catch (const DataError& e) {
            throw DataError("container: tensor " + std::to_string(k) + ": " + e.what());
        }
    }
    if (!r.done()) r.fail("trailing bytes after the last tensor");
    return out;
}

}  // namespace fws
