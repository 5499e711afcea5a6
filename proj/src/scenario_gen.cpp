#include "csi_intruder/scenario_gen.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

namespace csi_intruder::scenario {

namespace fs = std::filesystem;
using channel::CsiFrame;

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw ConsistencyError("unknown split '" + s + "'");
}

void validate_class_specs(const std::vector<StateClassSpec>& specs, double min_freq_gap) {
    const int g = static_cast<int>(specs.size());
    if (g < 2) throw ConfigError("at least two state classes are required");
    std::set<int> ids;
    for (const auto& s : specs) {
        if (s.class_id < 0 || s.class_id >= g)
            throw ConfigError("class id " + std::to_string(s.class_id) + " outside [0, " + std::to_string(g) + ")");
        if (!ids.insert(s.class_id).second) throw ConfigError("duplicate class id " + std::to_string(s.class_id));
        if (s.dynamic_paths.empty() && s.static_paths.empty())
            throw ConfigError("class " + std::to_string(s.class_id) + " has no paths");
        for (const auto& d : s.dynamic_paths) {
            if (d.attenuation < 0 || d.base_delay < 0 || d.amplitude < 0 || d.amplitude > d.base_delay || d.freq < 0 ||
                d.jitter.hi < d.jitter.lo)
                throw ConfigError("class " + std::to_string(s.class_id) + ": invalid dynamic path parameters");
        }
        for (const auto& st : s.static_paths) {
            if (st.attenuation.lo < 0 || st.attenuation.hi < st.attenuation.lo || st.delay.lo < 0 ||
                st.delay.hi < st.delay.lo)
                throw ConfigError("class " + std::to_string(s.class_id) + ": invalid static path range");
        }
    }
    if (min_freq_gap > 0.0) {
        for (std::size_t a = 0; a < specs.size(); ++a)
            for (std::size_t b = a + 1; b < specs.size(); ++b)
                for (const auto& da : specs[a].dynamic_paths)
                    for (const auto& db : specs[b].dynamic_paths)
                        if (std::abs(da.freq - db.freq) < min_freq_gap)
                            throw ConfigError("classes " + std::to_string(specs[a].class_id) + " and " +
                                              std::to_string(specs[b].class_id) +
                                              " have modulation frequencies closer than " +
                                              std::to_string(min_freq_gap) + " Hz");
    }
}

LabeledSample gen_class_sample(const StateClassSpec& spec, const SampleConfig& cfg, std::uint64_t instance_seed) {
    Rng rng(derive_seed(instance_seed, 1));
    auto draw = [&](const Range& r) { return r.hi > r.lo ? uniform(rng, r.lo, r.hi) : r.lo; };

    channel::PathSet paths;
    for (const auto& st : spec.static_paths) {
        const double alpha = draw(st.attenuation);
        const double tau = draw(st.delay);
        paths.push_back({alpha, channel::StaticDelay{tau}});
    }
    for (const auto& d : spec.dynamic_paths) {
        const double jitter = draw(d.jitter);
        paths.push_back({d.attenuation, channel::SinusoidalDelay{d.base_delay, d.amplitude, d.freq, jitter}});
    }

    LabeledSample s;
    s.frame = channel::synthesize_csi(paths, cfg.grid, cfg.m_packets);
    s.label = spec.class_id;
    s.seed = instance_seed;
    if (cfg.noise_rel > 0.0) {
        const double mean_amp = s.frame.values().cwiseAbs().mean();
        channel::add_receiver_noise(s.frame, cfg.noise_rel * mean_amp, derive_seed(instance_seed, 2));
    }
    return s;
}

double preset_min_freq_gap(const std::string& preset) {
    // Only the gesture band is wide enough for six classes 0.5 Hz apart.
    return preset == "gesture" ? 0.5 : 0.0;
}

std::vector<StateClassSpec> make_preset(const std::string& preset, int n_classes, std::uint64_t env_seed) {
    if (n_classes < 2) throw ConfigError("preset needs at least two classes");
    Range band;
    double amplitude = 0.25e-9;
    if (preset == "gesture") {
        band = {1.0, 10.0};
    } else if (preset == "respiration") {
        band = {0.2, 0.5};
        amplitude = 1.5e-9;  // chest displacement is slow; larger excursion keeps it visible in one frame
    } else if (preset == "gait") {
        band = {1.0, 3.0};
        amplitude = 0.5e-9;
    } else if (preset == "localization") {
        band = {0.0, 0.0};
        amplitude = 0.0;
    } else {
        throw ConfigError("unknown scenario preset '" + preset + "'");
    }

    // Shared room geometry: static reflectors fixed by the environment seed,
    // with small per-instance jitter.
    Rng env(derive_seed(env_seed, 0x5CE7Aull));
    std::vector<StaticPathRange> room;
    for (int l = 0; l < 3; ++l) {
        const double a = uniform(env, 0.15, 0.3);
        const double t = uniform(env, 15e-9, 90e-9);
        room.push_back({{a * 0.96, a * 1.04}, {t - 0.01e-9, t + 0.01e-9}});
    }

    std::vector<StateClassSpec> specs;
    for (int c = 0; c < n_classes; ++c) {
        StateClassSpec s;
        s.class_id = c;
        s.static_paths = room;
        DynamicPathSpec d;
        d.attenuation = 0.22 + 0.04 * (c % 3);
        d.base_delay = 25e-9 + 9e-9 * c;
        d.amplitude = amplitude == 0.0 ? 0.0 : amplitude * (1.0 + 0.2 * (c % 2));
        d.freq = band.lo + (band.hi - band.lo) * static_cast<double>(c) / static_cast<double>(n_classes - 1);
        d.jitter = {0.0, kTwoPi / 8.0};
        s.dynamic_paths.push_back(d);
        specs.push_back(s);
    }
    return specs;
}

nlohmann::json to_json(const DatasetManifest& m) {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& e : m.files) {
        files.push_back({{"id", e.id}, {"label", e.label}, {"split", to_string(e.split)}, {"seed", e.seed}, {"file", e.file}});
    }
    return {{"grid", channel::to_json(m.sample_config.grid)},
            {"m_packets", m.sample_config.m_packets},
            {"noise_rel", m.sample_config.noise_rel},
            {"preset", m.preset},
            {"n_classes", m.n_classes},
            {"train_per_class", m.train_per_class},
            {"test_per_class", m.test_per_class},
            {"master_seed", m.master_seed},
            {"epsilon", m.epsilon},
            {"epsilon_percentile", m.epsilon_percentile},
            {"files", files}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        m.sample_config.grid = channel::grid_from_json(j.at("grid"));
        m.sample_config.m_packets = j.at("m_packets").get<std::size_t>();
        m.sample_config.noise_rel = j.at("noise_rel").get<double>();
        m.preset = j.at("preset").get<std::string>();
        m.n_classes = j.at("n_classes").get<int>();
        m.train_per_class = j.at("train_per_class").get<std::size_t>();
        m.test_per_class = j.at("test_per_class").get<std::size_t>();
        m.master_seed = j.at("master_seed").get<std::uint64_t>();
        m.epsilon = j.at("epsilon").get<double>();
        m.epsilon_percentile = j.at("epsilon_percentile").get<double>();
        for (const auto& f : j.at("files")) {
            m.files.push_back({f.at("id").get<std::size_t>(), f.at("label").get<int>(),
                               split_from_string(f.at("split").get<std::string>()), f.at("seed").get<std::uint64_t>(),
                               f.at("file").get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConsistencyError(std::string("malformed dataset manifest: ") + e.what());
    }
    if (!(m.epsilon > 0.0)) throw ConsistencyError("dataset manifest: epsilon must be > 0");
    return m;
}

std::vector<const LabeledSample*> Dataset::split(Split s) const {
    std::vector<const LabeledSample*> out;
    for (const auto& x : samples)
        if (x.split == s) out.push_back(&x);
    return out;
}

double amplitude_deviation(const CsiFrame& frame) {
    const Eigen::MatrixXd amp = frame.values().cwiseAbs();
    const Eigen::VectorXd mean = amp.rowwise().mean();
    return (amp.colwise() - mean).cwiseAbs().maxCoeff();
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw PreconditionError("percentile of empty set");
    std::sort(values.begin(), values.end());
    const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + (values[hi] - values[lo]) * frac;
}

double compute_epsilon(const std::vector<LabeledSample>& samples, double q) {
    std::vector<double> dev;
    for (const auto& s : samples)
        if (s.split == Split::train) dev.push_back(amplitude_deviation(s.frame));
    return percentile(std::move(dev), q);
}

Dataset generate_dataset(const std::vector<StateClassSpec>& specs, const DatasetCounts& counts,
                         std::uint64_t master_seed, const SampleConfig& cfg, const std::string& preset,
                         double epsilon_percentile) {
    cfg.grid.validate();
    validate_class_specs(specs, preset_min_freq_gap(preset));
    if (counts.train_per_class < 10 || counts.test_per_class < 10)
        throw PreconditionError("dataset needs at least 10 samples per class per split");

    Dataset ds;
    auto& m = ds.manifest;
    m.sample_config = cfg;
    m.preset = preset;
    m.n_classes = static_cast<int>(specs.size());
    m.train_per_class = counts.train_per_class;
    m.test_per_class = counts.test_per_class;
    m.master_seed = master_seed;
    m.epsilon_percentile = epsilon_percentile;

    std::vector<StateClassSpec> ordered = specs;
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.class_id < b.class_id; });

    std::size_t id = 0;
    for (Split split : {Split::train, Split::test}) {
        const std::size_t per = split == Split::train ? counts.train_per_class : counts.test_per_class;
        for (const auto& spec : ordered) {
            for (std::size_t i = 0; i < per; ++i) {
                const std::uint64_t seed = derive_seed(master_seed, static_cast<std::uint64_t>(spec.class_id),
                                                       split == Split::train ? 0u : 1u, i);
                LabeledSample s = gen_class_sample(spec, cfg, seed);
                s.id = id;
                s.split = split;
                m.files.push_back({id, s.label, split, seed, "frames/sample_" + std::to_string(id) + ".csv"});
                ds.samples.push_back(std::move(s));
                ++id;
            }
        }
    }

    m.epsilon = compute_epsilon(ds.samples, epsilon_percentile);
    // Deviations at rounding level (temporal mean of identical values) count as zero.
    double peak = 0.0;
    for (const auto& s : ds.samples) peak = std::max(peak, s.frame.values().cwiseAbs().maxCoeff());
    if (!(m.epsilon > 1e-12 * peak))
        throw DegenerateDatasetError("epsilon is zero: training frames carry no amplitude variation");
    spdlog::debug("generated {} samples, epsilon = {}", ds.samples.size(), m.epsilon);
    return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir / "frames", ec);
    if (ec) throw IoError("cannot create " + (dir / "frames").string() + ": " + ec.message());

    std::ostringstream labels;
    labels << "sample_id,class,split,seed\n";
    for (const auto& s : ds.samples) {
        channel::write_frame_csv(dir / ("frames/sample_" + std::to_string(s.id) + ".csv"), s.frame);
        labels << s.id << ',' << s.label << ',' << to_string(s.split) << ',' << s.seed << '\n';
    }
    {
        std::ofstream f(dir / "labels.csv", std::ios::binary);
        if (!f) throw IoError("cannot write " + (dir / "labels.csv").string());
        f << labels.str();
    }
    std::ofstream f(dir / "manifest.json", std::ios::binary);
    if (!f) throw IoError("cannot write " + (dir / "manifest.json").string());
    f << to_json(ds.manifest).dump(2) << '\n';
}

Dataset build_dataset(const std::vector<StateClassSpec>& specs, const DatasetCounts& counts, std::uint64_t master_seed,
                      const SampleConfig& cfg, const fs::path& dir, const std::string& preset,
                      double epsilon_percentile) {
    Dataset ds = generate_dataset(specs, counts, master_seed, cfg, preset, epsilon_percentile);
    save_dataset(ds, dir);
    return ds;
}

Dataset load_dataset(const fs::path& manifest_path) {
    std::ifstream f(manifest_path, std::ios::binary);
    if (!f) throw IoError("cannot open dataset manifest " + manifest_path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConsistencyError(manifest_path.string() + ": " + e.what());
    }
    Dataset ds;
    ds.manifest = manifest_from_json(j);
    const auto& m = ds.manifest;
    const std::size_t expected = static_cast<std::size_t>(m.n_classes) * (m.train_per_class + m.test_per_class);
    if (m.files.size() != expected)
        throw ConsistencyError(manifest_path.string() + ": file index lists " + std::to_string(m.files.size()) +
                               " samples, counts imply " + std::to_string(expected));

    const fs::path root = manifest_path.parent_path();
    for (const auto& e : m.files) {
        LabeledSample s;
        s.id = e.id;
        s.label = e.label;
        s.split = e.split;
        s.seed = e.seed;
        s.frame = channel::read_frame_csv(root / e.file, m.sample_config.grid, m.sample_config.m_packets);
        if (s.label < 0 || s.label >= m.n_classes)
            throw ConsistencyError(e.file + ": label " + std::to_string(s.label) + " out of range");
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace csi_intruder::scenario
