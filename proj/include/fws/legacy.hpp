#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "fws/bytes.hpp"
#include "fws/csi.hpp"
#include "fws/errors.hpp"

namespace fws {

// Reader for Intel-5300-style CSI capture logs. The stream is a sequence of
// length-prefixed entries:
//
//   entry := total_length:u16 (BIG-endian — the only network-order field in
//            this codebase), code:u8, payload[total_length - 1]
//
// Only code 0xBB (beamforming CSI report) is decoded; other codes are skipped
// and counted. The 0xBB payload (little-endian) is:
//
//   timestamp_ticks:u32  rx:u8 tx:u8  rssi:u8[3]  noise:i8  agc:u8
//   subcarrier_count:u8  scale:f32
//   csi: subcarrier-major (rx, tx) pairs of (re:i8, im:i8)
//
// so the csi section is exactly subcarriers*rx*tx*2 bytes and each complex
// value is scale*(re + j*im). See docs/legacy-format.md.

inline constexpr std::uint8_t kLegacyCsiCode = 0xBB;
inline constexpr std::size_t kLegacyFixedPayload = 16;  // bytes before the csi section

// Decoded entry metadata, preserved verbatim for callers that need the
// radio-state bytes the toolkit itself does not interpret.
struct ParsedEntry {
    std::uint32_t timestamp_ticks = 0;
    std::uint8_t rx = 0, tx = 0;
    std::array<std::uint8_t, 3> rssi{};
    std::int8_t noise = 0;
    std::uint8_t agc = 0;
    std::uint8_t subcarrier_count = 0;
    float scale = 1.0f;
};

struct LegacyParseResult {
    std::vector<RawCsiFrame> frames;
    std::vector<ParsedEntry> entries;  // parallel to frames
    std::size_t skipped_entries = 0;   // entries with codes other than 0xBB
};

// Parses a whole legacy stream. `tick_rate_hz` converts the 32-bit tick
// counter into frame timestamps. A stream with zero decodable entries is a
// valid empty result, not an error.
inline LegacyParseResult parse_legacy_stream(const Bytes& bytes, double tick_rate_hz = 1e6) {
    if (!(tick_rate_hz > 0.0)) throw ConfigError("legacy: tick rate must be > 0");
    ByteReader r(bytes, "legacy stream");
    LegacyParseResult out;

    while (!r.done()) {
        const std::size_t entry_offset = r.offset();
        const std::uint16_t total_len = r.u16_be();
        if (total_len == 0) {
            throw DataError("legacy stream: zero-length entry at byte offset " +
                            std::to_string(entry_offset));
        }
        if (total_len > r.remaining()) {
            throw DataError("legacy stream: entry at byte offset " + std::to_string(entry_offset) +
                            " declares " + std::to_string(total_len) + " bytes but only " +
                            std::to_string(r.remaining()) + " remain");
        }
        const std::uint8_t code = r.u8();
        const std::size_t payload_len = static_cast<std::size_t>(total_len) - 1;
        if (code != kLegacyCsiCode) {
            (void)r.take(payload_len);
            ++out.skipped_entries;
            continue;
        }
        if (payload_len < kLegacyFixedPayload) {
            throw DataError("legacy stream: csi entry at byte offset " +
                            std::to_string(entry_offset) + " too short for its header");
        }

        ParsedEntry e;
        e.timestamp_ticks = r.u32();
        e.rx = r.u8();
        e.tx = r.u8();
        e.rssi = {r.u8(), r.u8(), r.u8()};
        e.noise = r.i8();
        e.agc = r.u8();
        e.subcarrier_count = r.u8();
        e.scale = r.f32();
        if (e.rx < 1 || e.rx > 3 || e.tx < 1 || e.tx > 3) {
            throw DataError("legacy stream: entry at byte offset " + std::to_string(entry_offset) +
                            " declares rx=" + std::to_string(e.rx) + " tx=" + std::to_string(e.tx) +
                            " (must be 1..3)");
        }
        if (e.subcarrier_count == 0) {
            throw DataError("legacy stream: entry at byte offset " + std::to_string(entry_offset) +
                            " declares zero subcarriers");
        }
        const std::size_t csi_len =
            static_cast<std::size_t>(e.subcarrier_count) * e.rx * e.tx * 2;
        if (payload_len != kLegacyFixedPayload + csi_len) {
            throw DataError("legacy stream: entry at byte offset " + std::to_string(entry_offset) +
                            " payload is " + std::to_string(payload_len) + " bytes, expected " +
                            std::to_string(kLegacyFixedPayload + csi_len));
        }

        RawCsiFrame fr;
        fr.timestamp_s = static_cast<double>(e.timestamp_ticks) / tick_rate_hz;
        fr.subcarrier_count = e.subcarrier_count;
        fr.antenna_count = e.rx * e.tx;
        fr.csi.resize(static_cast<std::size_t>(e.subcarrier_count) * fr.antenna_count);
        const double scale = static_cast<double>(e.scale);
        for (int sc = 0; sc < e.subcarrier_count; ++sc) {
            for (int pair = 0; pair < fr.antenna_count; ++pair) {
                const double re = static_cast<double>(r.i8());
                const double im = static_cast<double>(r.i8());
                fr.at(sc, pair) = {scale * re, scale * im};
            }
        }
        out.frames.push_back(std::move(fr));
        out.entries.push_back(e);
    }
    return out;
}

}  // namespace fws
