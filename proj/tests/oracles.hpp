#pragma once

// Independent scalar reference implementations used by the unit and acceptance tests.
// They deliberately avoid the library's helpers (grid.freq, polar, Eigen arithmetic).

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using cd = std::complex<double>;
inline const double kPi = std::acos(-1.0);

inline double subcarrier_freq(double center, double spacing, std::size_t n_sub, std::size_t n) {
    const double offset = static_cast<double>(n) - 0.5 * static_cast<double>(n_sub);
    return center + spacing * offset;
}

inline cd phasor(double angle) { return {std::cos(angle), std::sin(angle)}; }

struct ScalarPath {
    double alpha;
    std::function<double(std::size_t)> tau;
};

/// h[n][m] = sum_l alpha_l exp(-j 2 pi f_n tau_l(m))
inline std::vector<std::vector<cd>> multipath(const std::vector<ScalarPath>& paths, double center, double spacing,
                                              std::size_t n_sub, std::size_t m_packets) {
    std::vector<std::vector<cd>> h(n_sub, std::vector<cd>(m_packets, cd{0.0, 0.0}));
    for (std::size_t n = 0; n < n_sub; ++n) {
        const double f = subcarrier_freq(center, spacing, n_sub, n);
        for (std::size_t m = 0; m < m_packets; ++m) {
            cd acc{0.0, 0.0};
            for (const auto& p : paths) acc += p.alpha * phasor(-2.0 * kPi * f * p.tau(m));
            h[n][m] = acc;
        }
    }
    return h;
}

/// Relative entrywise error |a - b| / max(|b|, floor).
inline double rel_err(cd a, cd b, double floor = 1e-12) { return std::abs(a - b) / std::max(std::abs(b), floor); }

// small statistics helpers
inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size();
    if (k == 0) return 0.0;
    return k % 2 == 1 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

/// Temporary directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("csi_intruder_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace oracle
