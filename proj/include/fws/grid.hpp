#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fws/errors.hpp"

namespace fws {

// Frequency layout of the reported CSI subcarriers. `group_index` holds the
// OFDM subcarrier indices m_i relative to the channel center (negative below,
// positive above); `frequency_hz` holds the corresponding absolute carrier
// frequencies f_i = center + m_i * spacing. Both are sorted ascending, so
// ordinal subcarrier 1 is the lowest-frequency one.
struct SubcarrierGrid {
    std::vector<int> group_index;
    std::vector<double> frequency_hz;
    double center_freq_hz = 5.32e9;
    double spacing_hz = 20e6 / 64.0;  // 312.5 kHz for a 20 MHz channel

    int count() const { return static_cast<int>(group_index.size()); }

    void validate() const {
        if (group_index.empty()) {
            throw ConfigError("subcarrier grid is empty");
        }
        if (group_index.size() != frequency_hz.size()) {
            throw ConfigError("subcarrier grid: index/frequency length mismatch");
        }
        for (std::size_t i = 1; i < group_index.size(); ++i) {
            if (group_index[i] <= group_index[i - 1]) {
                throw ConfigError("subcarrier grid indices must be strictly increasing");
            }
        }
        if (!(spacing_hz > 0.0) || !(center_freq_hz > 0.0)) {
            throw ConfigError("subcarrier grid: center frequency and spacing must be positive");
        }
    }

    double mean_group_index() const {
        double s = 0.0;
        for (int m : group_index) s += m;
        return s / static_cast<double>(group_index.size());
    }

    bool same_layout(const SubcarrierGrid& o) const {
        return group_index == o.group_index && center_freq_hz == o.center_freq_hz &&
               spacing_hz == o.spacing_hz;
    }

    static SubcarrierGrid from_indices(std::vector<int> m, double center_freq_hz,
                                       double spacing_hz = 20e6 / 64.0) {
        SubcarrierGrid g;
        g.group_index = std::move(m);
        g.center_freq_hz = center_freq_hz;
        g.spacing_hz = spacing_hz;
        g.frequency_hz.resize(g.group_index.size());
        for (std::size_t i = 0; i < g.group_index.size(); ++i) {
            g.frequency_hz[i] = center_freq_hz + g.group_index[i] * spacing_hz;
        }
        g.validate();
        return g;
    }

    // The 30 subcarrier groups an Intel 5300 NIC reports on a 20 MHz channel
    // (grouping factor 2, per the 802.11n compressed-feedback grid).
    static SubcarrierGrid intel5300(double center_freq_hz = 5.32e9) {
        static const std::vector<int> idx = {
            -28, -26, -24, -22, -20, -18, -16, -14, -12, -10, -8, -6, -4, -2, -1,
            1,   3,   5,   7,   9,   11,  13,  15,  17,  19,  21, 23, 25, 27, 28};
        return from_indices(idx, center_freq_hz);
    }
};

}  // namespace fws
