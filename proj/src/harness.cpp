#include "csi_intruder/harness.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

namespace csi_intruder::harness {

namespace fs = std::filesystem;
using nlohmann::json;
using scenario::Split;

namespace {

// Child-seed tags under the master seed; every random choice of a run hangs off one of these.
enum SeedTag : std::uint64_t {
    kData = 1,
    kModels = 2,
    kEve = 3,
    kPso = 4,
    kScreen = 5,
    kRandom = 6,
    kGan = 7,
    kDefenseGan = 8,
    kSurrogates = 9,
    kAttack = 10,
    kSweep = 11,
    kDefense = 12,
    kFresh = 13,
    kDiversity = 14,
    kConcentration = 15,
};

const std::vector<std::pair<Stage, std::string>> kStageNames = {
    {Stage::gen_data, "gen-data"},           {Stage::train_models, "train-models"},
    {Stage::optimize, "optimize"},           {Stage::train_gan, "train-gan"},
    {Stage::attack_eval, "attack-eval"},     {Stage::defense_eval, "defense-eval"},
    {Stage::duration_sweep, "duration-sweep"}, {Stage::report, "report"},
};

const std::map<Stage, std::string> kStageDirs = {
    {Stage::gen_data, "data"},         {Stage::train_models, "models"}, {Stage::optimize, "optimize"},
    {Stage::train_gan, "gan"},         {Stage::attack_eval, "attack"},  {Stage::defense_eval, "defense"},
    {Stage::duration_sweep, "sweep"},  {Stage::report, "report"},
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
    if (!f) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    json j = json::parse(f, nullptr, false);
    if (j.is_discarded()) throw ConsistencyError(path.string() + ": not valid JSON");
    return j;
}

json complex_to_json(const Eigen::VectorXcd& v) {
    json re = json::array(), im = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        re.push_back(v[i].real());
        im.push_back(v[i].imag());
    }
    return {{"re", re}, {"im", im}};
}

Eigen::VectorXcd complex_from_json(const json& j) {
    const auto& re = j.at("re");
    const auto& im = j.at("im");
    if (re.size() != im.size()) throw ConsistencyError("complex vector: re/im lengths differ");
    Eigen::VectorXcd v(static_cast<Eigen::Index>(re.size()));
    for (std::size_t i = 0; i < re.size(); ++i) v[static_cast<Eigen::Index>(i)] = {re[i].get<double>(), im[i].get<double>()};
    return v;
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pop_std(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

std::string csv(double v) { return channel::format_double(v); }

// --- loaders --------------------------------------------------------------------

fs::path dir_of(const RunConfig& cfg, Stage s) { return stage_dir(cfg, s); }

scenario::Dataset load_data(const RunConfig& cfg) {
    return scenario::load_dataset(dir_of(cfg, Stage::gen_data) / "manifest.json");
}

scenario::DatasetManifest load_manifest(const RunConfig& cfg) {
    return scenario::manifest_from_json(read_json(dir_of(cfg, Stage::gen_data) / "manifest.json"));
}

json data_summary(const RunConfig& cfg) { return read_json(dir_of(cfg, Stage::gen_data) / "summary.json"); }

sensing::FeatureScaler load_scaler(const RunConfig& cfg) {
    return sensing::FeatureScaler::from_json(read_json(dir_of(cfg, Stage::train_models) / "scaler.json"));
}

struct ZooEntry {
    NamedModel net;
    sensing::TrainRecord record;
};

std::vector<ZooEntry> load_zoo(const RunConfig& cfg) {
    const fs::path dir = dir_of(cfg, Stage::train_models);
    const json zoo = read_json(dir / "zoo.json");
    std::vector<ZooEntry> out;
    for (const auto& e : zoo.at("models")) {
        auto loaded = sensing::load_model(dir / e.at("file").get<std::string>());
        out.push_back({{loaded.name, std::move(loaded.model), e.at("white_box").get<bool>()}, std::move(loaded.record)});
    }
    if (out.empty()) throw ConsistencyError("models/zoo.json lists no models");
    return out;
}

std::vector<NamedModel> nets_of(const std::vector<ZooEntry>& zoo) {
    std::vector<NamedModel> out;
    for (const auto& z : zoo) out.push_back(z.net);
    return out;
}

struct EveArtifacts {
    channel::EveChannel truth;
    channel::EveChannel estimate;
};

EveArtifacts load_eve(const RunConfig& cfg) {
    const json j = read_json(dir_of(cfg, Stage::optimize) / "eve.json");
    EveArtifacts e;
    e.truth.h_eve = complex_from_json(j.at("h_eve"));
    e.truth.est_noise_std = j.at("est_noise_std").get<double>();
    e.estimate.h_eve = complex_from_json(j.at("estimate"));
    e.estimate.est_noise_std = e.truth.est_noise_std;
    return e;
}

std::vector<channel::Perturbation> read_perturbation_dir(const fs::path& dir, const std::string& stem, std::size_t count,
                                                         double eps) {
    std::vector<channel::Perturbation> out;
    for (std::size_t i = 0; i < count; ++i)
        out.push_back(attack::read_perturbation_csv(dir / (stem + "_" + std::to_string(i) + ".csv"), eps));
    return out;
}

std::size_t count_violations(const std::vector<channel::Perturbation>& ps) {
    return static_cast<std::size_t>(std::count_if(ps.begin(), ps.end(), [](const auto& p) { return !p.within_bound(0.0); }));
}

std::vector<channel::Perturbation> load_surrogates(const RunConfig& cfg, double eps) {
    const fs::path dir = dir_of(cfg, Stage::train_gan);
    const auto n = read_json(dir / "summary.json").at("surrogates").get<std::size_t>();
    return read_perturbation_dir(dir / "surrogates", "surrogate", n, eps);
}

channel::DistortionProfile eval_profile(const RunConfig& cfg, double amplitude) {
    channel::DistortionProfile p = cfg.attack.profile;
    p.noise_std = cfg.eval.noise_rel * amplitude;
    return p;
}

// --- stages ---------------------------------------------------------------------

void stage_gen_data(const RunConfig& cfg, const fs::path& dir) {
    const auto specs = scenario::make_preset(cfg.data.preset, cfg.data.classes, derive_seed(cfg.seed, kData));
    const auto ds = scenario::build_dataset(specs, {cfg.data.train_per_class, cfg.data.test_per_class},
                                            derive_seed(cfg.seed, kData, 1), cfg.data.sample, dir, cfg.data.preset,
                                            cfg.data.epsilon_percentile);
    // Re-read so every later statistic comes from the persisted frames.
    const auto stored = scenario::load_dataset(dir / "manifest.json");
    write_json(dir / "summary.json", {{"preset", cfg.data.preset},
                                      {"analogue", cfg.data.preset + " preset (synthetic analogue)"},
                                      {"classes", cfg.data.classes},
                                      {"n_train", stored.split(Split::train).size()},
                                      {"n_test", stored.split(Split::test).size()},
                                      {"epsilon", stored.manifest.epsilon},
                                      {"mean_amplitude", mean_amplitude(stored)}});
    spdlog::info("gen-data: {} samples, epsilon {}", stored.samples.size(), stored.manifest.epsilon);
}

void stage_train_models(const RunConfig& cfg, const fs::path& dir) {
    const auto ds = load_data(cfg);
    const auto scaler = sensing::fit_scaler(ds, cfg.models.packet_blocks);
    write_json(dir / "scaler.json", scaler.to_json());
    const auto train_set = sensing::dataset_features(ds, Split::train, scaler);
    const auto test_set = sensing::dataset_features(ds, Split::test, scaler);
    const auto classes = static_cast<std::size_t>(ds.manifest.n_classes);

    json entries = json::array();
    for (const auto& spec : sensing::default_zoo()) {
        auto model = sensing::make_model(spec, scaler.dim(), classes, derive_seed(cfg.seed, kModels, spec.seed_salt));
        const sensing::TrainConfig tc{cfg.models.epochs, cfg.models.lr, cfg.models.batch, 0.0,
                                      derive_seed(cfg.seed, kModels, spec.seed_salt, 1)};
        auto res = sensing::train(std::move(model), train_set, &test_set, tc);
        const std::string file = spec.name + ".json";
        sensing::save_model(dir / file, spec.name, res.model, res.record);
        entries.push_back({{"name", spec.name},
                           {"file", file},
                           {"hidden", spec.hidden},
                           {"activation", nn::to_string(spec.activation)},
                           {"seed_salt", spec.seed_salt},
                           {"white_box", spec.white_box},
                           {"train_accuracy", res.record.train_accuracy},
                           {"test_accuracy", sensing::accuracy(res.model, test_set)}});
        spdlog::info("train-models: {} test accuracy {:.3f}", spec.name, entries.back()["test_accuracy"].get<double>());
    }
    write_json(dir / "zoo.json", {{"models", entries}});
}

struct OptimizeArm {
    std::string name;
    sensing::Weighting weighting;
};

void stage_optimize(const RunConfig& cfg, const fs::path& dir) {
    const auto ds = load_data(cfg);
    const auto scaler = load_scaler(cfg);
    const auto zoo = load_zoo(cfg);
    const auto& grid = ds.manifest.sample_config.grid;
    const double eps = ds.manifest.epsilon;
    const double amp = data_summary(cfg).at("mean_amplitude").get<double>();

    const auto paths = channel::draw_eve_paths(derive_seed(cfg.seed, kEve), cfg.attack.eve_paths);
    auto truth = channel::eve_channel_from_paths(paths, grid);
    truth.h_eve *= cfg.attack.eve_gain;
    truth.est_noise_std = cfg.attack.eve_est_noise_rel * truth.h_eve.cwiseAbs().mean();
    const auto estimate = channel::estimate_eve_channel(truth, derive_seed(cfg.seed, kEve, 1));
    write_json(dir / "eve.json", {{"attenuation", paths.attenuation},
                                  {"delay", paths.delay},
                                  {"gain", cfg.attack.eve_gain},
                                  {"h_eve", complex_to_json(truth.h_eve)},
                                  {"est_noise_std", truth.est_noise_std},
                                  {"estimate", complex_to_json(estimate.h_eve)}});

    const auto fit_samples = fitness_samples(cfg, ds);
    std::vector<NamedModel> nets;
    std::vector<sensing::TrainRecord> records;
    for (const auto& z : zoo) {
        nets.push_back(z.net);
        records.push_back(z.record);
    }

    const double screen_noise = cfg.screen.noise_rel * amp;
    std::size_t violations = 0;
    json arms = json::object();
    channel::Perturbation weighted_best;
    for (const OptimizeArm& arm : {OptimizeArm{"weighted", cfg.attack.weighting}, OptimizeArm{"unweighted", sensing::Weighting::uniform}}) {
        const fs::path adir = dir / arm.name;
        fs::create_directories(adir / "Z");

        const auto ctx = make_fitness_context(cfg, ds, scaler, nets, records, estimate, arm.weighting);
        json sample_ids = json::array();
        for (const auto* s : fit_samples) sample_ids.push_back(s->id);

        spdlog::info("optimize[{}]: P={} R={} over {} white-box models", arm.name, cfg.pso.particles, cfg.pso.iterations,
                     ctx.models.size());
        const auto res = attack::optimize(ctx, cfg.pso, derive_seed(cfg.seed, kPso));
        for (std::size_t i = 0; i < res.candidates.size(); ++i)
            attack::write_perturbation_csv(adir / "Z" / ("candidate_" + std::to_string(i) + ".csv"), res.candidates[i]);
        attack::write_perturbation_csv(adir / "global_best.csv", res.global_best);
        attack::write_trace_csv(adir / "fitness_trace.csv", res.trace);

        const attack::ScreenConfig sc{cfg.screen.draws, screen_noise, truth.est_noise_std, derive_seed(cfg.seed, kScreen)};
        const auto screened = attack::robustness_screen(res.candidates, ctx, sc);
        attack::write_perturbation_csv(adir / "best.csv", screened.best);

        const attack::ScreenConfig fresh{cfg.screen.fresh_draws, screen_noise, truth.est_noise_std, derive_seed(cfg.seed, kFresh)};
        std::vector<double> fresh_screened, fresh_global;
        for (std::size_t d = 0; d < fresh.draws; ++d) {
            fresh_screened.push_back(attack::screening_draw(screened.best, ctx, fresh, d));
            fresh_global.push_back(attack::screening_draw(res.global_best, ctx, fresh, d));
        }
        const json screen_json = {{"index", screened.index},
                                  {"mean", screened.mean},
                                  {"variance", screened.variance},
                                  {"draws", cfg.screen.draws},
                                  {"fresh_draws", cfg.screen.fresh_draws},
                                  {"fresh_mean_screened", mean_of(fresh_screened)},
                                  {"fresh_mean_global_best", mean_of(fresh_global)},
                                  {"cov_screened", coefficient_of_variation(fresh_screened)},
                                  {"cov_global_best", coefficient_of_variation(fresh_global)}};
        write_json(adir / "screen.json", screen_json);

        const json pso_config = {{"params", cfg.pso.to_json()},
                                 {"weighting", sensing::to_string(arm.weighting)},
                                 {"kappa", cfg.attack.kappa},
                                 {"pso_seed", derive_seed(cfg.seed, kPso)},
                                 {"fitness_seed", ctx.seed},
                                 {"screen_seed", sc.seed},
                                 {"fresh_seed", fresh.seed},
                                 {"dt_draws", ctx.dt_draws},
                                 {"epsilon", eps},
                                 {"fitness_samples", sample_ids},
                                 {"candidates", res.candidates.size()},
                                 {"global_best_fitness", res.global_best_fitness},
                                 {"distortion", channel::to_json(cfg.attack.profile)}};
        write_json(adir / "pso_config.json", pso_config);

        violations += count_violations(res.candidates) + count_violations({res.global_best, screened.best});
        arms[arm.name] = {{"global_best_fitness", res.global_best_fitness}, {"screen", screen_json}};
        if (arm.name == "weighted") weighted_best = screened.best;
        spdlog::info("optimize[{}]: best fitness {:.4g}, screened candidate {}", arm.name, res.global_best_fitness,
                     screened.index);
    }

    Rng rng(derive_seed(cfg.seed, kRandom));
    const auto random = attack::random_perturbation(static_cast<std::size_t>(weighted_best.h_delta.size()), eps, rng);
    const auto equal_norm = equal_norm_random(weighted_best, rng);
    attack::write_perturbation_csv(dir / "random.csv", random);
    attack::write_perturbation_csv(dir / "random_equal_norm.csv", equal_norm);
    violations += count_violations({random, equal_norm});
    write_json(dir / "summary.json", {{"epsilon", eps}, {"arms", arms}, {"bound_violations", violations}});
}

void stage_train_gan(const RunConfig& cfg, const fs::path& dir) {
    const auto manifest = load_manifest(cfg);
    const double eps = manifest.epsilon;
    const double amp = data_summary(cfg).at("mean_amplitude").get<double>();
    const fs::path odir = dir_of(cfg, Stage::optimize) / "weighted";
    const auto n_candidates = read_json(odir / "pso_config.json").at("candidates").get<std::size_t>();
    const auto z = read_perturbation_dir(odir / "Z", "candidate", n_candidates, eps);
    const auto best = attack::read_perturbation_csv(odir / "best.csv", eps);
    const auto eve = load_eve(cfg);

    Eigen::MatrixXd zmat(static_cast<Eigen::Index>(2 * best.h_delta.size()), static_cast<Eigen::Index>(z.size()));
    for (std::size_t i = 0; i < z.size(); ++i) zmat.col(static_cast<Eigen::Index>(i)) = gan::normalize(z[i]);

    const auto gres = gan::train_gan(zmat, cfg.gan.gan, derive_seed(cfg.seed, kGan));
    spdlog::info("train-gan: {} epochs ({}), thr {:.4g}", gres.epochs, gres.reason, gres.thr);
    gan::write_loss_trace_csv(dir / "loss_trace.csv", gres.trace);
    write_json(dir / "generator.json", gres.generator.to_json());
    write_json(dir / "discriminator.json", gres.discriminator.to_json());

    const auto surrogates = gan::sample_surrogates(gres.generator, gan::normalize(best), cfg.gan.surrogates, eps,
                                                   cfg.gan.gan.jitter, cfg.gan.sample_dropout,
                                                   derive_seed(cfg.seed, kSurrogates));
    fs::create_directories(dir / "surrogates");
    for (std::size_t i = 0; i < surrogates.size(); ++i)
        attack::write_perturbation_csv(dir / "surrogates" / ("surrogate_" + std::to_string(i) + ".csv"), surrogates[i]);

    const std::size_t total = static_cast<std::size_t>(manifest.n_classes) * manifest.test_per_class *
                              manifest.sample_config.m_packets;
    const auto schedule = gan::schedule_switch(surrogates.size(), cfg.eval.switch_duration,
                                               manifest.sample_config.grid.packet_rate, total,
                                               derive_seed(derive_seed(cfg.seed, kAttack), 0));
    gan::write_schedule_csv(dir / "schedule.csv", schedule);

    const std::size_t div_count = std::min(cfg.eval.diversity_count, surrogates.size());
    const std::vector<channel::Perturbation> div_set(surrogates.begin(), surrogates.begin() + static_cast<std::ptrdiff_t>(div_count));
    const auto div = surrogate_diversity(div_set, best, eve.truth, cfg.data.sample.noise_rel * amp, div_count,
                                         derive_seed(cfg.seed, kDiversity));

    json gcfg = cfg.gan.gan.to_json();
    gcfg["seed"] = derive_seed(cfg.seed, kGan);
    gcfg["surrogate_seed"] = derive_seed(cfg.seed, kSurrogates);
    gcfg["surrogates"] = cfg.gan.surrogates;
    gcfg["sample_dropout"] = cfg.gan.sample_dropout;
    gcfg["thr"] = gres.thr;
    gcfg["thr_units"] = "mean squared reconstruction error of normalized [mag/eps; phase/2pi] vectors";
    gcfg["pretrain_energy"] = gres.pretrain_energy;
    gcfg["training_set"] = {{"source", "optimize/weighted/Z"}, {"count", z.size()}};
    gcfg["anchor"] = {{"source", "optimize/weighted/best.csv"}};
    write_json(dir / "gan_config.json", gcfg);

    write_json(dir / "summary.json", {{"epochs", gres.epochs},
                                      {"reason", gres.reason},
                                      {"thr", gres.thr},
                                      {"pretrain_energy", gres.pretrain_energy},
                                      {"final_disc_loss", gres.trace.empty() ? 0.0 : gres.trace.back().disc_loss},
                                      {"final_gen_loss", gres.trace.empty() ? 0.0 : gres.trace.back().gen_loss},
                                      {"surrogates", surrogates.size()},
                                      {"bound_violations", count_violations(surrogates)},
                                      {"diversity",
                                       {{"count", div_count},
                                        {"surrogate_distance", div.surrogate_distance},
                                        {"repeat_distance", div.repeat_distance},
                                        {"ratio", div.ratio}}}});
}

void write_arm_csvs(const fs::path& dir, const std::vector<ArmResult>& rows) {
    std::ostringstream summary, per_rep;
    summary << "model,arm,mean,std\n";
    per_rep << "model,arm,repetition,accuracy\n";
    for (const auto& r : rows) {
        summary << r.model << ',' << r.arm << ',' << csv(r.mean) << ',' << csv(r.std) << '\n';
        for (std::size_t i = 0; i < r.per_rep.size(); ++i)
            per_rep << r.model << ',' << r.arm << ',' << i << ',' << csv(r.per_rep[i]) << '\n';
    }
    write_text(dir / "attack_eval.csv", summary.str());
    write_text(dir / "per_repetition.csv", per_rep.str());
}

json arm_rows_json(const std::vector<ArmResult>& rows) {
    json out = json::object();
    for (const auto& r : rows) out[r.model][r.arm] = {{"mean", r.mean}, {"std", r.std}, {"per_repetition", r.per_rep}};
    return out;
}

void stage_attack_eval(const RunConfig& cfg, const fs::path& dir) {
    const auto ds = load_data(cfg);
    const auto scaler = load_scaler(cfg);
    const auto zoo = load_zoo(cfg);
    const auto eve = load_eve(cfg);
    const double eps = ds.manifest.epsilon;
    const double amp = data_summary(cfg).at("mean_amplitude").get<double>();
    const fs::path odir = dir_of(cfg, Stage::optimize);

    const auto best = attack::read_perturbation_csv(odir / "weighted" / "best.csv", eps);
    const auto random = attack::read_perturbation_csv(odir / "random.csv", eps);
    std::vector<ArmSpec> arms{{"none", {}},
                              {"random", {random}},
                              {"unweighted", {attack::read_perturbation_csv(odir / "unweighted" / "best.csv", eps)}},
                              {"best", {best}},
                              {"surrogates", load_surrogates(cfg, eps)}};

    const auto test = ds.split(Split::test);
    const AttackEvalParams params{cfg.eval.repetitions, cfg.eval.switch_duration, eval_profile(cfg, amp),
                                  derive_seed(cfg.seed, kAttack)};
    const auto rows = attack_eval(nets_of(zoo), scaler, test, eve.truth, arms, params);
    write_arm_csvs(dir, rows);

    // Designated layer: last hidden layer of the first white-box model.
    const auto designated = std::find_if(zoo.begin(), zoo.end(), [](const auto& z) { return z.net.white_box; });
    if (designated == zoo.end()) throw ConsistencyError("attack-eval: no white-box model");
    const std::size_t layer = designated->net.model.hidden_count() - 1;
    const auto cseed = derive_seed(cfg.seed, kConcentration);
    const double var_best = feature_difference_variance(designated->net.model, layer, scaler, test, eve.truth, best,
                                                        cfg.attack.profile, cseed);
    const auto equal_norm = attack::read_perturbation_csv(odir / "random_equal_norm.csv", eps);
    const double var_random = feature_difference_variance(designated->net.model, layer, scaler, test, eve.truth,
                                                          equal_norm, cfg.attack.profile, cseed);

    write_json(dir / "summary.json", {{"repetitions", cfg.eval.repetitions},
                                      {"switch_duration", cfg.eval.switch_duration},
                                      {"seed", params.seed},
                                      {"accuracy", arm_rows_json(rows)},
                                      {"concentration",
                                       {{"model", designated->net.name},
                                        {"layer", layer},
                                        {"variance_optimized", var_best},
                                        {"variance_random", var_random},
                                        {"ratio", var_random > 0.0 ? var_best / var_random : 0.0}}}});
}

void stage_duration_sweep(const RunConfig& cfg, const fs::path& dir) {
    const auto ds = load_data(cfg);
    const auto scaler = load_scaler(cfg);
    const auto zoo = load_zoo(cfg);
    const auto eve = load_eve(cfg);
    const double amp = data_summary(cfg).at("mean_amplitude").get<double>();
    const std::vector<ArmSpec> arms{{"surrogates", load_surrogates(cfg, ds.manifest.epsilon)}};
    const auto nets = nets_of(zoo);
    const auto test = ds.split(Split::test);

    std::ostringstream wide, long_form;
    wide << "duration";
    for (const auto& n : nets) wide << ',' << n.name;
    wide << '\n';
    long_form << "duration,model,mean,std\n";
    json rows = json::array();
    for (std::size_t i = 0; i < cfg.eval.sweep_durations.size(); ++i) {
        const double d = cfg.eval.sweep_durations[i];
        const AttackEvalParams params{cfg.eval.sweep_repetitions, d, eval_profile(cfg, amp), derive_seed(cfg.seed, kSweep, i)};
        const auto res = attack_eval(nets, scaler, test, eve.truth, arms, params);
        wide << csv(d);
        json row = {{"duration", d}};
        for (const auto& r : res) {
            wide << ',' << csv(r.mean);
            long_form << csv(d) << ',' << r.model << ',' << csv(r.mean) << ',' << csv(r.std) << '\n';
            row["accuracy"][r.model] = {{"mean", r.mean}, {"std", r.std}};
        }
        wide << '\n';
        rows.push_back(row);
        spdlog::info("duration-sweep: {} s done", d);
    }
    write_text(dir / "sweep.csv", wide.str());
    write_text(dir / "sweep_long.csv", long_form.str());
    write_json(dir / "summary.json", {{"repetitions", cfg.eval.sweep_repetitions}, {"rows", rows}});
}

void stage_defense_eval(const RunConfig& cfg, const fs::path& dir) {
    const auto ds = load_data(cfg);
    const auto scaler = load_scaler(cfg);
    const auto zoo = load_zoo(cfg);
    const auto eve = load_eve(cfg);
    const double eps = ds.manifest.epsilon;
    const double amp = data_summary(cfg).at("mean_amplitude").get<double>();
    const auto train_surrogates = load_surrogates(cfg, eps);

    // Evaluation perturbations come from a second generator trained on the same candidates.
    const fs::path odir = dir_of(cfg, Stage::optimize) / "weighted";
    const auto n_candidates = read_json(odir / "pso_config.json").at("candidates").get<std::size_t>();
    const auto z = read_perturbation_dir(odir / "Z", "candidate", n_candidates, eps);
    const auto best = attack::read_perturbation_csv(odir / "best.csv", eps);
    Eigen::MatrixXd zmat(static_cast<Eigen::Index>(2 * best.h_delta.size()), static_cast<Eigen::Index>(z.size()));
    for (std::size_t i = 0; i < z.size(); ++i) zmat.col(static_cast<Eigen::Index>(i)) = gan::normalize(z[i]);
    const auto gres = gan::train_gan(zmat, cfg.gan.gan, derive_seed(cfg.seed, kDefenseGan));
    const auto eval_surrogates = gan::sample_surrogates(gres.generator, gan::normalize(best), cfg.gan.surrogates, eps,
                                                        cfg.gan.gan.jitter, cfg.gan.sample_dropout,
                                                        derive_seed(cfg.seed, kDefenseGan, 1));
    fs::create_directories(dir / "eval_surrogates");
    for (std::size_t i = 0; i < eval_surrogates.size(); ++i)
        attack::write_perturbation_csv(dir / "eval_surrogates" / ("surrogate_" + std::to_string(i) + ".csv"),
                                       eval_surrogates[i]);

    channel::DistortionProfile profile = cfg.attack.profile;
    profile.noise_std = cfg.data.sample.noise_rel * amp;
    const auto adv_train = defense::collect_adv_samples(ds, Split::train, train_surrogates, eve.truth, cfg.defense.train,
                                                        profile, derive_seed(cfg.seed, kDefense, 0));
    const auto adv_eval = defense::collect_adv_samples(ds, Split::test, eval_surrogates, eve.truth, cfg.defense.eval,
                                                       profile, derive_seed(cfg.seed, kDefense, 1));
    const auto adv_train_x = defense::adv_features(adv_train, scaler);
    const auto adv_eval_x = defense::adv_features(adv_eval, scaler);
    const auto train_set = sensing::dataset_features(ds, Split::train, scaler);
    const auto test_set = sensing::dataset_features(ds, Split::test, scaler);

    json models = json::array();
    std::ostringstream table;
    table << "model,detection,detection_mixed,detection_pure,false_alarm,clean_accuracy_before,clean_accuracy_after,clean_accuracy_delta\n";
    for (std::size_t i = 0; i < zoo.size(); ++i) {
        const auto& z = zoo[i];
        const sensing::TrainConfig tc{cfg.defense.epochs, cfg.defense.lr, cfg.models.batch, 0.0,
                                      derive_seed(cfg.seed, kDefense, 2, i)};
        const auto retrained = defense::adversarial_retrain(z.net.model, train_set, adv_train_x, tc);
        sensing::save_model(dir / ("detector_" + z.net.name + ".json"), z.net.name + "+detector", retrained.model,
                            retrained.record);
        const auto rep = defense::evaluate_detection(retrained.model, adv_eval, adv_eval_x, test_set);
        const double before = sensing::accuracy(z.net.model, test_set);
        json entry = rep.to_json();
        entry["model"] = z.net.name;
        entry["clean_accuracy_before"] = before;
        entry["clean_accuracy_delta"] = rep.clean_accuracy - before;
        entry["train_seed"] = tc.seed;
        models.push_back(entry);
        table << z.net.name << ',' << csv(rep.detection) << ',' << csv(rep.detection_mixed) << ','
              << csv(rep.detection_pure) << ',' << csv(rep.false_alarm) << ',' << csv(before) << ','
              << csv(rep.clean_accuracy) << ',' << csv(rep.clean_accuracy - before) << '\n';
        spdlog::info("defense-eval: {} detection {:.3f}, false alarm {:.3f}", z.net.name, rep.detection, rep.false_alarm);
    }
    write_text(dir / "defense.csv", table.str());
    write_json(dir / "defense_report.json",
               {{"models", models},
                {"train_samples", {{"mixed", cfg.defense.train.mixed}, {"pure", cfg.defense.train.pure}}},
                {"eval_samples", {{"mixed", cfg.defense.eval.mixed}, {"pure", cfg.defense.eval.pure}}},
                {"train_sample_seed", derive_seed(cfg.seed, kDefense, 0)},
                {"eval_sample_seed", derive_seed(cfg.seed, kDefense, 1)},
                {"eval_gan_seed", derive_seed(cfg.seed, kDefenseGan)},
                {"eval_gan_epochs", gres.epochs},
                {"eval_gan_reason", gres.reason},
                {"bound_violations", count_violations(eval_surrogates)}});
}

void stage_report(const RunConfig& cfg, const fs::path& dir) {
    const json seeds = json::array({cfg.seed});
    const json data = data_summary(cfg);
    const json zoo = read_json(dir_of(cfg, Stage::train_models) / "zoo.json");
    const json opt = read_json(dir_of(cfg, Stage::optimize) / "summary.json");
    const json gan_s = read_json(dir_of(cfg, Stage::train_gan) / "summary.json");
    const json att = read_json(dir_of(cfg, Stage::attack_eval) / "summary.json");
    const json sweep = read_json(dir_of(cfg, Stage::duration_sweep) / "summary.json");
    const json def = read_json(dir_of(cfg, Stage::defense_eval) / "defense_report.json");

    static const std::vector<std::string> kArms{"random", "unweighted", "best", "surrogates"};
    json models = json::array();
    std::ostringstream table;
    table << "model,white_box,clean_accuracy";
    for (const auto& a : kArms) table << ',' << a << "_mean," << a << "_std";
    table << ",drop_best,drop_surrogates\n";
    for (const auto& m : zoo.at("models")) {
        const auto name = m.at("name").get<std::string>();
        const json& acc = att.at("accuracy").at(name);
        const double clean = m.at("test_accuracy").get<double>();
        json attacked = json::object();
        table << name << ',' << (m.at("white_box").get<bool>() ? "true" : "false") << ',' << csv(clean);
        for (const auto& a : kArms) {
            attacked[a] = {{"mean", acc.at(a).at("mean")}, {"std", acc.at(a).at("std")}};
            table << ',' << csv(acc.at(a).at("mean").get<double>()) << ',' << csv(acc.at(a).at("std").get<double>());
        }
        const double drop_best = clean - acc.at("best").at("mean").get<double>();
        const double drop_sur = clean - acc.at("surrogates").at("mean").get<double>();
        table << ',' << csv(drop_best) << ',' << csv(drop_sur) << '\n';
        models.push_back({{"name", name},
                          {"white_box", m.at("white_box")},
                          {"clean_accuracy", clean},
                          {"no_attack_accuracy", acc.at("none").at("mean")},
                          {"attacked", attacked},
                          {"drop_best", drop_best},
                          {"drop_surrogates", drop_sur},
                          {"seeds", seeds}});
    }

    json defense_rows = def.at("models");
    for (auto& r : defense_rows) r["seeds"] = seeds;

    json sweep_rows = sweep.at("rows");
    const std::size_t violations = opt.at("bound_violations").get<std::size_t>() +
                                   gan_s.at("bound_violations").get<std::size_t>() +
                                   def.at("bound_violations").get<std::size_t>();

    const json report = {
        {"seeds", seeds},
        {"scenario", {{"preset", data.at("preset")}, {"analogue", data.at("analogue")}, {"epsilon", data.at("epsilon")}}},
        {"models", models},
        {"concentration", [&] {
             json c = att.at("concentration");
             c["seeds"] = seeds;
             return c;
         }()},
        {"screening", [&] {
             json s = json::object();
             for (const auto& [arm, v] : opt.at("arms").items())
                 s[arm] = {{"screened_index", v.at("screen").at("index")},
                           {"cov_screened", v.at("screen").at("cov_screened")},
                           {"cov_global_best", v.at("screen").at("cov_global_best")},
                           {"global_best_fitness", v.at("global_best_fitness")}};
             s["seeds"] = seeds;
             return s;
         }()},
        {"surrogate_diversity", [&] {
             json d = gan_s.at("diversity");
             d["seeds"] = seeds;
             return d;
         }()},
        {"gan", {{"epochs", gan_s.at("epochs")}, {"reason", gan_s.at("reason")}, {"thr", gan_s.at("thr")}, {"seeds", seeds}}},
        {"duration_sweep", {{"rows", sweep_rows}, {"repetitions", sweep.at("repetitions")}, {"seeds", seeds}}},
        {"defense", defense_rows},
        {"attack_eval", {{"repetitions", att.at("repetitions")}, {"switch_duration", att.at("switch_duration")}, {"seeds", seeds}}},
        {"bound_violations", violations},
    };
    write_json(dir / "metrics_report.json", report);
    write_text(dir / "accuracy.csv", table.str());
    fs::copy_file(dir_of(cfg, Stage::duration_sweep) / "sweep.csv", dir / "sweep.csv", fs::copy_options::overwrite_existing);
    fs::copy_file(dir_of(cfg, Stage::defense_eval) / "defense.csv", dir / "defense.csv", fs::copy_options::overwrite_existing);

    // Wall-clock numbers vary between runs, so they live beside the report rather than in it.
    json timings = json::object();
    for (Stage s : pipeline_order()) {
        if (s == Stage::report) continue;
        const fs::path t = dir_of(cfg, s) / "timing.json";
        if (fs::exists(t)) timings[to_string(s)] = read_json(t).at("seconds");
    }
    write_json(dir / "timings.json", timings);
}

std::vector<Stage> descendants(Stage s) {
    std::vector<Stage> out;
    for (Stage t : pipeline_order()) {
        const auto a = ancestors(t);
        if (std::find(a.begin(), a.end(), s) != a.end()) out.push_back(t);
    }
    return out;
}

}  // namespace

// --- stage graph ----------------------------------------------------------------------

std::string to_string(Stage s) {
    for (const auto& [stage, name] : kStageNames)
        if (stage == s) return name;
    throw ConfigError("unknown stage");
}

Stage stage_from_string(const std::string& s) {
    for (const auto& [stage, name] : kStageNames)
        if (name == s) return stage;
    throw ConfigError("unknown subcommand '" + s + "'");
}

const std::vector<Stage>& pipeline_order() {
    static const std::vector<Stage> order{Stage::gen_data,    Stage::train_models, Stage::optimize,
                                          Stage::train_gan,   Stage::attack_eval,  Stage::defense_eval,
                                          Stage::duration_sweep, Stage::report};
    return order;
}

std::vector<Stage> upstream(Stage s) {
    switch (s) {
        case Stage::gen_data: return {};
        case Stage::train_models: return {Stage::gen_data};
        case Stage::optimize: return {Stage::train_models};
        case Stage::train_gan: return {Stage::optimize};
        case Stage::attack_eval:
        case Stage::defense_eval:
        case Stage::duration_sweep: return {Stage::train_gan};
        case Stage::report: return {Stage::attack_eval, Stage::defense_eval, Stage::duration_sweep};
    }
    return {};
}

std::vector<Stage> ancestors(Stage s) {
    std::vector<Stage> found;
    std::vector<Stage> stack = upstream(s);
    while (!stack.empty()) {
        const Stage t = stack.back();
        stack.pop_back();
        if (std::find(found.begin(), found.end(), t) != found.end()) continue;
        found.push_back(t);
        for (Stage u : upstream(t)) stack.push_back(u);
    }
    std::vector<Stage> ordered;
    for (Stage t : pipeline_order())
        if (std::find(found.begin(), found.end(), t) != found.end()) ordered.push_back(t);
    return ordered;
}

fs::path stage_dir(const RunConfig& cfg, Stage s) { return cfg.out / kStageDirs.at(s); }

bool stage_complete(const RunConfig& cfg, Stage s) { return fs::exists(stage_dir(cfg, s) / "stage.json"); }

void check_dependencies(const RunConfig& cfg, Stage s) {
    for (Stage a : ancestors(s)) {
        if (!stage_complete(cfg, a))
            throw DependencyError("'" + to_string(s) + "' needs the output of '" + to_string(a) + "' under " +
                                      cfg.out.string() + "; run `csi-intruder " + to_string(a) + "` first",
                                  to_string(a));
        const auto marker = read_json(stage_dir(cfg, a) / "stage.json");
        if (marker.at("seed").get<std::uint64_t>() != cfg.seed)
            throw ConsistencyError("stage '" + to_string(a) + "' in " + cfg.out.string() + " was produced with seed " +
                                   std::to_string(marker.at("seed").get<std::uint64_t>()) + ", not " +
                                   std::to_string(cfg.seed));
    }
}

void run_stage(const RunConfig& cfg, Stage s) {
    check_dependencies(cfg, s);
    const fs::path dir = stage_dir(cfg, s);
    fs::create_directories(dir);
    fs::remove(dir / "stage.json");
    for (Stage d : descendants(s)) fs::remove(stage_dir(cfg, d) / "stage.json");
    write_json(cfg.out / "config.json", cfg.to_json());

    spdlog::info("stage {} -> {}", to_string(s), dir.string());
    const auto t0 = std::chrono::steady_clock::now();
    switch (s) {
        case Stage::gen_data: stage_gen_data(cfg, dir); break;
        case Stage::train_models: stage_train_models(cfg, dir); break;
        case Stage::optimize: stage_optimize(cfg, dir); break;
        case Stage::train_gan: stage_train_gan(cfg, dir); break;
        case Stage::attack_eval: stage_attack_eval(cfg, dir); break;
        case Stage::defense_eval: stage_defense_eval(cfg, dir); break;
        case Stage::duration_sweep: stage_duration_sweep(cfg, dir); break;
        case Stage::report: stage_report(cfg, dir); break;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(dir / "timing.json", {{"stage", to_string(s)}, {"seconds", seconds}});
    write_json(dir / "stage.json", {{"stage", to_string(s)}, {"seed", cfg.seed}});
    spdlog::info("stage {} finished in {:.1f} s", to_string(s), seconds);
}

void run_pipeline(const RunConfig& cfg) {
    for (Stage s : pipeline_order()) run_stage(cfg, s);
}

int exit_code(const std::string& kind) {
    static const std::map<std::string, int> codes{{"config", 2},      {"dependency", 3},         {"io", 4},
                                                  {"consistency", 5}, {"training", 6},           {"precondition", 7},
                                                  {"degenerate_dataset", 8}};
    const auto it = codes.find(kind);
    return it == codes.end() ? 1 : it->second;
}

// --- evaluation -------------------------------------------------------------------------

std::vector<ArmResult> attack_eval(const std::vector<NamedModel>& models, const sensing::FeatureScaler& scaler,
                                   const std::vector<const scenario::LabeledSample*>& eval_set,
                                   const channel::EveChannel& eve, const std::vector<ArmSpec>& arms,
                                   const AttackEvalParams& params) {
    if (params.repetitions == 0) throw PreconditionError("attack_eval: zero repetitions");
    if (eval_set.empty()) throw PreconditionError("attack_eval: empty evaluation set");
    if (models.empty()) throw PreconditionError("attack_eval: no models");
    if (!(params.switch_duration > 0.0)) throw ConfigError("attack_eval: switch duration must be positive");

    const auto& grid = eval_set.front()->frame.grid();
    const std::size_t m = eval_set.front()->frame.n_packets();
    const std::size_t total = m * eval_set.size();
    std::size_t max_count = 1;
    for (const auto& a : arms) max_count = std::max(max_count, a.perturbations.size());

    std::vector<int> labels;
    for (const auto* s : eval_set) labels.push_back(s->label);

    std::vector<ArmResult> out;
    for (const auto& model : models)
        for (const auto& arm : arms) out.push_back({model.name, arm.name, {}, 0.0, 0.0});

    for (std::size_t r = 0; r < params.repetitions; ++r) {
        const std::uint64_t rseed = derive_seed(params.seed, r);
        gan::SwitchSchedule schedule;
        if (max_count > 1) {
            schedule = gan::schedule_switch(max_count, params.switch_duration, grid.packet_rate, total, rseed);
        } else {
            const auto block = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::ceil(params.switch_duration * grid.packet_rate - 1e-9)));
            for (std::size_t start = 0; start < total; start += block)
                schedule.blocks.push_back({start, std::min(total, start + block), 0});
        }
        std::vector<double> dts;
        for (std::size_t b = 0; b < schedule.blocks.size(); ++b) {
            Rng rng(derive_seed(rseed, 1, b));
            dts.push_back(params.profile.draw_dt(rng));
        }

        for (std::size_t a = 0; a < arms.size(); ++a) {
            const auto& arm = arms[a];
            Eigen::MatrixXd x(static_cast<Eigen::Index>(scaler.dim()), static_cast<Eigen::Index>(eval_set.size()));
            std::size_t first_block = 0;
            for (std::size_t k = 0; k < eval_set.size(); ++k) {
                const std::size_t lo = k * m, hi = lo + m;
                std::vector<channel::PacketSegment> segments;
                if (!arm.perturbations.empty()) {
                    while (schedule.blocks[first_block].end <= lo) ++first_block;
                    for (std::size_t b = first_block; b < schedule.blocks.size() && schedule.blocks[b].start < hi; ++b) {
                        const auto& blk = schedule.blocks[b];
                        const auto& p = arm.perturbations[blk.surrogate % arm.perturbations.size()];
                        segments.push_back({std::max(blk.start, lo) - lo, std::min(blk.end, hi) - lo, &p, dts[b]});
                    }
                }
                const bool untouched = segments.empty() && params.profile.noise_std <= 0.0;
                const auto frame = untouched ? eval_set[k]->frame
                                             : channel::contaminate_segments(eval_set[k]->frame, eve, segments,
                                                                             params.profile, derive_seed(rseed, 2, a, k));
                x.col(static_cast<Eigen::Index>(k)) = scaler.transform(frame);
            }
            for (std::size_t q = 0; q < models.size(); ++q) {
                const auto pred = sensing::predict_batch(models[q].model, x);
                std::size_t hits = 0;
                for (std::size_t k = 0; k < pred.size(); ++k) hits += pred[k] == labels[k];
                out[q * arms.size() + a].per_rep.push_back(static_cast<double>(hits) / static_cast<double>(pred.size()));
            }
        }
    }
    for (auto& r : out) {
        r.mean = mean_of(r.per_rep);
        r.std = pop_std(r.per_rep);
    }
    return out;
}

channel::Perturbation equal_norm_random(const channel::Perturbation& ref, Rng& rng) {
    const auto n = ref.h_delta.size();
    const double rms = n == 0 ? 0.0 : ref.h_delta.norm() / std::sqrt(static_cast<double>(n));
    channel::Perturbation p{Eigen::VectorXcd(n), ref.epsilon};
    for (Eigen::Index i = 0; i < n; ++i) p.h_delta[i] = std::polar(std::min(rms, ref.epsilon), uniform(rng, 0.0, kTwoPi));
    return attack::decode(attack::encode(p), ref.epsilon);
}

double feature_difference_variance(const nn::Network& model, std::size_t layer, const sensing::FeatureScaler& scaler,
                                   const std::vector<const scenario::LabeledSample*>& frames,
                                   const channel::EveChannel& eve, const channel::Perturbation& p,
                                   const channel::DistortionProfile& profile, std::uint64_t seed) {
    if (layer >= model.hidden_count()) throw ConfigError("feature_difference_variance: layer is not hidden");
    if (frames.empty()) throw PreconditionError("feature_difference_variance: no frames");
    channel::DistortionProfile quiet = profile;
    quiet.noise_std = 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        Rng rng(derive_seed(seed, k));
        const double dt = quiet.draw_dt(rng);
        const auto attacked = channel::contaminate(frames[k]->frame, eve, p, dt, quiet);
        const Eigen::VectorXd diff = sensing::forward_features(model, scaler.transform(attacked))[layer] -
                                     sensing::forward_features(model, scaler.transform(frames[k]->frame))[layer];
        const double mu = diff.mean();
        total += (diff.array() - mu).square().mean();
    }
    return total / static_cast<double>(frames.size());
}

double coefficient_of_variation(const std::vector<double>& values) {
    const double m = mean_of(values);
    return m == 0.0 ? 0.0 : pop_std(values) / std::abs(m);
}

DiversityResult surrogate_diversity(const std::vector<channel::Perturbation>& surrogates,
                                    const channel::Perturbation& best, const channel::EveChannel& eve,
                                    double noise_std, std::size_t count, std::uint64_t seed) {
    if (surrogates.size() < 2 || count < 2) throw PreconditionError("surrogate_diversity: need at least two of each");
    const auto n = best.h_delta.size();
    Eigen::MatrixXcd sur(n, static_cast<Eigen::Index>(surrogates.size()));
    for (std::size_t i = 0; i < surrogates.size(); ++i)
        sur.col(static_cast<Eigen::Index>(i)) = eve.h_eve.cwiseProduct(surrogates[i].h_delta);
    Eigen::MatrixXcd rep(n, static_cast<Eigen::Index>(count));
    const Eigen::VectorXcd received = eve.h_eve.cwiseProduct(best.h_delta);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, i));
        for (Eigen::Index r = 0; r < n; ++r) rep(r, static_cast<Eigen::Index>(i)) = received[r] + complex_gaussian(rng, noise_std);
    }
    DiversityResult d;
    d.surrogate_distance = gan::mean_pairwise_distance(sur);
    d.repeat_distance = gan::mean_pairwise_distance(rep);
    d.ratio = d.repeat_distance > 0.0 ? d.surrogate_distance / d.repeat_distance : 0.0;
    return d;
}

std::vector<const scenario::LabeledSample*> fitness_samples(const RunConfig& cfg, const scenario::Dataset& ds) {
    std::vector<const scenario::LabeledSample*> out;
    std::map<int, std::size_t> taken;
    for (const auto* s : ds.split(Split::train)) {
        if (taken[s->label] < cfg.attack.samples_per_class) {
            out.push_back(s);
            ++taken[s->label];
        }
    }
    return out;
}

attack::FitnessContext make_fitness_context(const RunConfig& cfg, const scenario::Dataset& ds,
                                            const sensing::FeatureScaler& scaler,
                                            const std::vector<NamedModel>& models,
                                            const std::vector<sensing::TrainRecord>& records,
                                            const channel::EveChannel& eve_estimate, sensing::Weighting weighting) {
    if (models.size() != records.size()) throw PreconditionError("one training record per model is required");
    attack::FitnessContext ctx;
    for (std::size_t i = 0; i < models.size(); ++i)
        if (models[i].white_box)
            ctx.models.push_back({&models[i].model, sensing::importance_weights(records[i], cfg.attack.kappa, weighting)});
    for (const auto* s : fitness_samples(cfg, ds)) ctx.samples.push_back(s->frame);
    ctx.eve = eve_estimate;
    ctx.scaler = &scaler;
    ctx.profile = cfg.attack.profile;
    ctx.dt_draws = cfg.attack.dt_draws;
    ctx.epsilon = ds.manifest.epsilon;
    ctx.seed = derive_seed(cfg.seed, kPso);
    ctx.prepare();
    return ctx;
}

RunArtifacts load_run(const RunConfig& cfg) {
    RunArtifacts a;
    a.data = load_data(cfg);
    a.scaler = load_scaler(cfg);
    for (auto& z : load_zoo(cfg)) {
        a.models.push_back(std::move(z.net));
        a.records.push_back(std::move(z.record));
    }
    const auto eve = load_eve(cfg);
    a.eve_truth = eve.truth;
    a.eve_estimate = eve.estimate;
    return a;
}

double mean_amplitude(const scenario::Dataset& ds) {
    const auto train = ds.split(Split::train);
    if (train.empty()) throw PreconditionError("mean_amplitude: empty training split");
    double sum = 0.0;
    for (const auto* s : train) sum += s->frame.values().cwiseAbs().mean();
    return sum / static_cast<double>(train.size());
}

}  // namespace csi_intruder::harness
