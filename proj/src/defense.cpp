#include "csi_intruder/defense.hpp"

namespace csi_intruder::defense {

std::string to_string(AdvKind k) {
    return k == AdvKind::mixed ? "mixed" : "pure";
}

std::vector<AdvSample> collect_adv_samples(const scenario::Dataset& ds, scenario::Split split,
                                           const std::vector<channel::Perturbation>& surrogates,
                                           const channel::EveChannel& eve, const AdvCounts& counts,
                                           const channel::DistortionProfile& profile, std::uint64_t seed) {
    std::vector<AdvSample> out;
    if (counts.mixed + counts.pure == 0) return out;
    if (surrogates.empty()) throw PreconditionError("collect_adv_samples: no surrogates");
    const auto pool = ds.split(split);
    if (counts.mixed > 0 && pool.empty())
        throw PreconditionError("collect_adv_samples: split '" + scenario::to_string(split) + "' is empty");
    const auto& cfg = ds.manifest.sample_config;
    const channel::CsiFrame zero(cfg.grid, Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(cfg.grid.n_subcarriers),
                                                                  static_cast<Eigen::Index>(cfg.m_packets)));
    std::uniform_int_distribution<std::size_t> pick_sur(0, surrogates.size() - 1);
    for (std::size_t i = 0; i < counts.mixed + counts.pure; ++i) {
        const bool mixed = i < counts.mixed;
        Rng rng(derive_seed(seed, mixed ? 0 : 1, i));
        AdvSample s{zero, mixed ? AdvKind::mixed : AdvKind::pure, pick_sur(rng), -1, 0.0};
        const channel::CsiFrame* clean = &zero;
        if (mixed) {
            const auto* src = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
            s.source_id = static_cast<int>(src->id);
            clean = &src->frame;
        }
        s.dt = profile.draw_dt(rng);
        s.frame = channel::contaminate(*clean, eve, surrogates[s.surrogate], s.dt, profile, derive_seed(seed, 2, i));
        out.push_back(std::move(s));
    }
    return out;
}

Eigen::MatrixXd adv_features(const std::vector<AdvSample>& samples, const sensing::FeatureScaler& scaler) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(scaler.dim()), static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = scaler.transform(samples[i].frame);
    return x;
}

sensing::TrainResult adversarial_retrain(const nn::Network& model, const sensing::LabeledFeatures& train_set,
                                         const Eigen::MatrixXd& adv, const sensing::TrainConfig& cfg) {
    if (adv.cols() == 0) throw PreconditionError("adversarial_retrain: no adversarial samples");
    if (adv.rows() != train_set.x.rows()) throw ConfigError("adversarial_retrain: feature dimensions differ");
    std::vector<std::size_t> dims = model.dims();
    dims.back() += 1;
    std::vector<nn::Activation> acts;
    for (const auto& l : model.layers()) acts.push_back(l.activation);
    nn::Network widened = nn::Network::make(dims, acts, derive_seed(cfg.seed, 0xDEFull));

    sensing::LabeledFeatures combined;
    combined.x.resize(train_set.x.rows(), train_set.x.cols() + adv.cols());
    combined.x << train_set.x, adv;
    for (int y : train_set.y) combined.y.push_back(y + 1);
    combined.y.insert(combined.y.end(), static_cast<std::size_t>(adv.cols()), kPerturbedClass);
    return sensing::train(std::move(widened), combined, nullptr, cfg);
}

nlohmann::json DetectionReport::to_json() const {
    return {{"detection", detection},       {"detection_mixed", detection_mixed}, {"detection_pure", detection_pure},
            {"false_alarm", false_alarm},   {"clean_accuracy", clean_accuracy},   {"n_mixed", n_mixed},
            {"n_pure", n_pure},             {"n_clean", n_clean}};
}

DetectionReport evaluate_detection(const nn::Network& detector, const std::vector<AdvSample>& adv,
                                   const Eigen::MatrixXd& adv_x, const sensing::LabeledFeatures& clean_test) {
    if (adv.empty()) throw PreconditionError("evaluate_detection: empty adversarial evaluation set");
    if (static_cast<std::size_t>(adv_x.cols()) != adv.size())
        throw ConfigError("evaluate_detection: feature columns do not match samples");
    DetectionReport r;
    const auto pred = sensing::predict_batch(detector, adv_x);
    std::size_t hit_mixed = 0, hit_pure = 0;
    for (std::size_t i = 0; i < adv.size(); ++i) {
        const bool hit = pred[i] == kPerturbedClass;
        if (adv[i].kind == AdvKind::mixed) {
            ++r.n_mixed;
            hit_mixed += hit;
        } else {
            ++r.n_pure;
            hit_pure += hit;
        }
    }
    r.detection = static_cast<double>(hit_mixed + hit_pure) / static_cast<double>(adv.size());
    r.detection_mixed = r.n_mixed ? static_cast<double>(hit_mixed) / static_cast<double>(r.n_mixed) : 0.0;
    r.detection_pure = r.n_pure ? static_cast<double>(hit_pure) / static_cast<double>(r.n_pure) : 0.0;
    r.n_clean = clean_test.size();
    if (r.n_clean > 0) {
        const auto cp = sensing::predict_batch(detector, clean_test.x);
        std::size_t alarms = 0, correct = 0;
        for (std::size_t i = 0; i < cp.size(); ++i) {
            alarms += cp[i] == kPerturbedClass;
            correct += cp[i] == clean_test.y[i] + 1;
        }
        r.false_alarm = static_cast<double>(alarms) / static_cast<double>(r.n_clean);
        r.clean_accuracy = static_cast<double>(correct) / static_cast<double>(r.n_clean);
    }
    return r;
}

}  // namespace csi_intruder::defense
