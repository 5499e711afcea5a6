#pragma once

// Desk-scale pipeline runs shared by the acceptance and property checks. Runs live under
// $CSI_DESK_RUNS (default: the build tree) as seed_<n>/ and are reused when their resolved
// config matches and the report stage completed; otherwise the pipeline is run in place.

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "csi_intruder/harness.hpp"

namespace desk {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace csi_intruder;

inline fs::path runs_root() {
    if (const char* env = std::getenv("CSI_DESK_RUNS")) return env;
    return CSI_DESK_RUNS_DEFAULT;
}

inline harness::RunConfig config(std::uint64_t seed, const fs::path& out) {
    return harness::load_config(fs::path(CSI_SOURCE_DIR) / "configs" / "desk.json", {}, seed, out);
}

inline std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open " + p.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

inline json read_json(const fs::path& p) { return json::parse(slurp(p)); }

inline bool reusable(const harness::RunConfig& cfg) {
    if (!harness::stage_complete(cfg, harness::Stage::report)) return false;
    const fs::path resolved = cfg.out / "config.json";
    return fs::exists(resolved) && read_json(resolved) == cfg.to_json();
}

/// Completed desk run for `seed`.
inline harness::RunConfig ensure(std::uint64_t seed) {
    auto cfg = config(seed, runs_root() / ("seed_" + std::to_string(seed)));
    if (!reusable(cfg)) harness::run_pipeline(cfg);
    return cfg;
}

inline json report(const harness::RunConfig& cfg) {
    return read_json(harness::stage_dir(cfg, harness::Stage::report) / "metrics_report.json");
}

inline const json& model_entry(const json& report, bool white_box, std::size_t nth = 0) {
    for (const auto& m : report.at("models"))
        if (m.at("white_box").get<bool>() == white_box && nth-- == 0) return m;
    throw ConsistencyError("report lacks the requested model");
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

}  // namespace desk
