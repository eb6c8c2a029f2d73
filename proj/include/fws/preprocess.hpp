#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "fws/csi.hpp"
#include "fws/errors.hpp"
#include "fws/grid.hpp"
#include "fws/tensor.hpp"

namespace fws {

enum class PacketSelection { uniform_resample, head_truncate };
enum class AmplitudeTransform { none, log };

struct PreprocessConfig {
    int packet_count = 200;  // rows of the output tensor
    bool unwrap_phase = true;
    AmplitudeTransform amplitude_transform = AmplitudeTransform::none;
    PacketSelection packet_selection = PacketSelection::uniform_resample;

    void validate() const {
        if (packet_count < 2) throw ConfigError("preprocess: packet count must be >= 2");
    }
};

// Classic 1-D phase unwrap: whenever an adjacent difference leaves (-pi, pi],
// shift everything after it by the multiple of 2*pi that brings the
// difference back in range. Sequences whose differences are already in range
// come back unchanged (the accumulated correction stays exactly zero).
inline std::vector<double> unwrap(const std::vector<double>& ph) {
    std::vector<double> out(ph.size());
    if (ph.empty()) return out;
    const double two_pi = 2.0 * std::numbers::pi;
    out[0] = ph[0];
    double correction = 0.0;  // accumulated multiple of 2*pi
    for (std::size_t i = 1; i < ph.size(); ++i) {
        const double d = ph[i] - ph[i - 1];
        // Number of full turns to remove so that d - 2*pi*turns lands in (-pi, pi].
        const double turns = std::ceil((d - std::numbers::pi) / two_pi);
        correction -= two_pi * turns;
        out[i] = ph[i] + correction;
    }
    return out;
}

// Removes the linear-in-group-index component of a per-packet phase vector:
//
//     out_i = phase_i - k*m_i - b,  k = (phase_last - phase_first)/(m_last - m_first),
//                                   b = mean_i(phase_i)
//
// computed on the (optionally unwrapped) phases. This cancels the receiver's
// per-packet phase offset and slope while keeping the curvature that carries
// geometry. The subtraction is ordered (phase_i - b) - k*m_i so that a pure
// constant offset of the input — which lands entirely in b — cancels in the
// first subtraction and cannot be smeared by the slope term's rounding.
inline std::vector<double> sanitize_phase(const std::vector<double>& raw_phases,
                                          const SubcarrierGrid& grid,
                                          bool unwrap_first = true) {
    grid.validate();
    if (grid.count() < 2) {
        throw ConfigError("sanitize: grid has a single subcarrier; slope fit is degenerate");
    }
    if (raw_phases.size() != grid.group_index.size()) {
        throw ConfigError("sanitize: phase vector length does not match the grid");
    }
    for (double p : raw_phases) {
        if (!std::isfinite(p)) throw DataError("sanitize: non-finite phase value");
    }

    const std::vector<double> ph = unwrap_first ? unwrap(raw_phases) : raw_phases;
    const auto& m = grid.group_index;
    const double k = (ph.back() - ph.front()) / static_cast<double>(m.back() - m.front());
    double sum = 0.0;
    for (double p : ph) sum += p;
    const double b = sum / static_cast<double>(ph.size());

    std::vector<double> out(ph.size());
    for (std::size_t i = 0; i < ph.size(); ++i) {
        out[i] = (ph[i] - b) - k * static_cast<double>(m[i]);
    }
    return out;
}

// Reduces (or stretches) a recording to exactly `packet_count` frames.
// uniform_resample picks nearest frames at evenly spaced positions over the
// whole recording (so short recordings repeat frames); head_truncate takes
// the first `packet_count` frames and refuses shorter inputs.
inline CsiRecording select_packets(const CsiRecording& rec, const PreprocessConfig& cfg) {
    cfg.validate();
    const std::size_t have = rec.frames.size();
    if (have < 1) throw DataError("select_packets: recording has no frames");
    const int want = cfg.packet_count;

    CsiRecording out;
    out.label = rec.label;
    out.domain = rec.domain;
    out.receiver_id = rec.receiver_id;
    out.packet_rate_hz = rec.packet_rate_hz;
    out.event_id = rec.event_id;

    if (cfg.packet_selection == PacketSelection::head_truncate) {
        if (have < static_cast<std::size_t>(want)) {
            throw DataError("select_packets: recording has " + std::to_string(have) +
                            " frames but head_truncate needs " + std::to_string(want));
        }
        out.frames.assign(rec.frames.begin(), rec.frames.begin() + want);
        return out;
    }

    out.frames.reserve(static_cast<std::size_t>(want));
    for (int j = 0; j < want; ++j) {
        const double pos = static_cast<double>(j) * static_cast<double>(have - 1) /
                           static_cast<double>(want - 1);
        out.frames.push_back(rec.frames[static_cast<std::size_t>(std::llround(pos))]);
    }
    return out;
}

// Assembles one input sample from a packet-selected recording: row = packet,
// first half of the columns = per-subcarrier amplitude, second half =
// sanitized phase, one channel per antenna pair.
inline CsiTensor build_tensor(const CsiRecording& rec, const SubcarrierGrid& grid,
                              const PreprocessConfig& cfg) {
    cfg.validate();
    grid.validate();
    rec.validate(&grid);
    if (rec.frames.size() != static_cast<std::size_t>(cfg.packet_count)) {
        throw ConfigError("build_tensor: recording has " + std::to_string(rec.frames.size()) +
                          " frames; run select_packets to " + std::to_string(cfg.packet_count) +
                          " first");
    }

    const int n_sc = grid.count();
    const int n_ant = rec.frames[0].antenna_count;

    CsiTensor out;
    out.data = Tensor(cfg.packet_count, 2 * n_sc, n_ant);
    out.label = rec.label;
    out.domain = rec.domain;
    out.receiver_id = rec.receiver_id;
    out.event_id = rec.event_id;

    std::vector<double> amps(n_sc), phases(n_sc);
    for (int k = 0; k < cfg.packet_count; ++k) {
        const RawCsiFrame& fr = rec.frames[static_cast<std::size_t>(k)];
        for (int a = 0; a < n_ant; ++a) {
            for (int i = 0; i < n_sc; ++i) {
                const std::complex<double> z = fr.at(i, a);
                if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
                    throw DataError("build_tensor: non-finite csi in frame " + std::to_string(k));
                }
                amps[static_cast<std::size_t>(i)] = std::abs(z);
                phases[static_cast<std::size_t>(i)] = std::arg(z);
            }
            const std::vector<double> clean = sanitize_phase(phases, grid, cfg.unwrap_phase);
            for (int i = 0; i < n_sc; ++i) {
                double amp = amps[static_cast<std::size_t>(i)];
                if (cfg.amplitude_transform == AmplitudeTransform::log) {
                    // Floor keeps exact nulls finite; -27.6 is the floor's log.
                    amp = std::log(std::max(amp, 1e-12));
                }
                out.data.at(k, i, a) = amp;
                out.data.at(k, n_sc + i, a) = clean[static_cast<std::size_t>(i)];
            }
        }
    }
    return out;
}

}  // namespace fws
