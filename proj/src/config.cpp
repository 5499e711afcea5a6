#include "csi_intruder/config.hpp"

#include <cmath>
#include <fstream>

#include "config_schema_data.hpp"

namespace csi_intruder::harness {

namespace fs = std::filesystem;
using nlohmann::json;

const json& config_schema() {
    static const json schema = json::parse(detail::kConfigSchemaText);
    return schema;
}

namespace {

bool type_matches(const std::string& type, const json& v) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "boolean") return v.is_boolean();
    if (type == "integer") return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
    if (type == "number") return v.is_number();
    if (type == "null") return v.is_null();
    return false;
}

void validate_node(const json& schema, const json& doc, const std::string& path, std::vector<std::string>& errors) {
    const std::string where = path.empty() ? "<root>" : path;
    if (schema.contains("type")) {
        const auto type = schema["type"].get<std::string>();
        if (!type_matches(type, doc)) {
            errors.push_back(where + ": expected " + type);
            return;
        }
    }
    if (schema.contains("enum")) {
        bool found = false;
        for (const auto& e : schema["enum"]) found = found || e == doc;
        if (!found) errors.push_back(where + ": value " + doc.dump() + " is not one of " + schema["enum"].dump());
    }
    if (doc.is_number()) {
        const double v = doc.get<double>();
        if (schema.contains("minimum") && v < schema["minimum"].get<double>())
            errors.push_back(where + ": must be >= " + schema["minimum"].dump());
        if (schema.contains("maximum") && v > schema["maximum"].get<double>())
            errors.push_back(where + ": must be <= " + schema["maximum"].dump());
        if (schema.contains("exclusiveMinimum") && v <= schema["exclusiveMinimum"].get<double>())
            errors.push_back(where + ": must be > " + schema["exclusiveMinimum"].dump());
        if (schema.contains("exclusiveMaximum") && v >= schema["exclusiveMaximum"].get<double>())
            errors.push_back(where + ": must be < " + schema["exclusiveMaximum"].dump());
    }
    if (doc.is_object()) {
        const json props = schema.value("properties", json::object());
        for (const auto& req : schema.value("required", json::array())) {
            const auto key = req.get<std::string>();
            if (!doc.contains(key)) errors.push_back((path.empty() ? key : path + "." + key) + ": required key missing");
        }
        for (const auto& [key, value] : doc.items()) {
            const std::string child = path.empty() ? key : path + "." + key;
            if (props.contains(key)) {
                validate_node(props[key], value, child, errors);
            } else if (schema.contains("additionalProperties") && schema["additionalProperties"] == false) {
                errors.push_back(child + ": unknown key");
            }
        }
    }
    if (doc.is_array() && schema.contains("items")) {
        for (std::size_t i = 0; i < doc.size(); ++i)
            validate_node(schema["items"], doc[i], path + "[" + std::to_string(i) + "]", errors);
    }
}

template <typename T>
void read(const json& j, const char* key, T& target) {
    if (j.contains(key)) target = j.at(key).get<T>();
}

}  // namespace

std::vector<std::string> validate_schema(const json& schema, const json& doc) {
    std::vector<std::string> errors;
    validate_node(schema, doc, "", errors);
    return errors;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
        if (!node->is_object()) throw ConfigError("override '" + key + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

json RunConfig::to_json() const {
    json profile = channel::to_json(attack.profile);
    return {
        {"seed", seed},
        {"out", out.string()},
        {"data",
         {{"preset", data.preset},
          {"classes", data.classes},
          {"train_per_class", data.train_per_class},
          {"test_per_class", data.test_per_class},
          {"m_packets", data.sample.m_packets},
          {"noise_rel", data.sample.noise_rel},
          {"epsilon_percentile", data.epsilon_percentile},
          {"grid", channel::to_json(data.sample.grid)}}},
        {"models", {{"epochs", models.epochs}, {"lr", models.lr}, {"batch", models.batch}, {"packet_blocks", models.packet_blocks}}},
        {"attack",
         {{"eve_paths", attack.eve_paths},
          {"eve_gain", attack.eve_gain},
          {"eve_est_noise_rel", attack.eve_est_noise_rel},
          {"dt_min", attack.profile.dt_min},
          {"dt_max", attack.profile.dt_max},
          {"enable_time_offset", attack.profile.enable_time_offset},
          {"enable_cfo", attack.profile.enable_cfo},
          {"cfo", attack.profile.cfo},
          {"enable_sfo_pdd", attack.profile.enable_sfo_pdd},
          {"sfo_pdd_phase_error", attack.profile.sfo_pdd_phase_error},
          {"kappa", attack.kappa},
          {"weighting", sensing::to_string(attack.weighting)},
          {"samples_per_class", attack.samples_per_class},
          {"dt_draws", attack.dt_draws}}},
        {"pso", pso.to_json()},
        {"screen", {{"draws", screen.draws}, {"noise_rel", screen.noise_rel}, {"fresh_draws", screen.fresh_draws}}},
        {"gan",
         [&] {
             json g = gan.gan.to_json();
             g["surrogates"] = gan.surrogates;
             g["sample_dropout"] = gan.sample_dropout;
             return g;
         }()},
        {"eval",
         {{"repetitions", eval.repetitions},
          {"switch_duration", eval.switch_duration},
          {"noise_rel", eval.noise_rel},
          {"sweep_durations", eval.sweep_durations},
          {"sweep_repetitions", eval.sweep_repetitions},
          {"diversity_count", eval.diversity_count}}},
        {"defense",
         {{"train_mixed", defense.train.mixed},
          {"train_pure", defense.train.pure},
          {"eval_mixed", defense.eval.mixed},
          {"eval_pure", defense.eval.pure},
          {"epochs", defense.epochs},
          {"lr", defense.lr}}},
    };
}

RunConfig RunConfig::from_json(const json& doc) {
    const auto errors = validate_schema(config_schema(), doc);
    if (!errors.empty()) {
        std::string msg = "config does not match the schema:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    RunConfig c;
    c.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("out")) c.out = doc.at("out").get<std::string>();

    const json d = doc.value("data", json::object());
    read(d, "preset", c.data.preset);
    read(d, "classes", c.data.classes);
    read(d, "train_per_class", c.data.train_per_class);
    read(d, "test_per_class", c.data.test_per_class);
    read(d, "m_packets", c.data.sample.m_packets);
    read(d, "noise_rel", c.data.sample.noise_rel);
    read(d, "epsilon_percentile", c.data.epsilon_percentile);
    if (d.contains("grid")) {
        json g = channel::to_json(c.data.sample.grid);
        g.update(d.at("grid"));
        c.data.sample.grid = channel::grid_from_json(g);
    }
    c.data.sample.grid.validate();

    const json m = doc.value("models", json::object());
    read(m, "epochs", c.models.epochs);
    read(m, "lr", c.models.lr);
    read(m, "batch", c.models.batch);
    read(m, "packet_blocks", c.models.packet_blocks);
    if (c.data.sample.m_packets % c.models.packet_blocks != 0)
        throw ConfigError("models.packet_blocks must divide data.m_packets");

    const json a = doc.value("attack", json::object());
    read(a, "eve_paths", c.attack.eve_paths);
    read(a, "eve_gain", c.attack.eve_gain);
    read(a, "eve_est_noise_rel", c.attack.eve_est_noise_rel);
    read(a, "dt_min", c.attack.profile.dt_min);
    read(a, "dt_max", c.attack.profile.dt_max);
    read(a, "enable_time_offset", c.attack.profile.enable_time_offset);
    read(a, "enable_cfo", c.attack.profile.enable_cfo);
    read(a, "cfo", c.attack.profile.cfo);
    read(a, "enable_sfo_pdd", c.attack.profile.enable_sfo_pdd);
    read(a, "sfo_pdd_phase_error", c.attack.profile.sfo_pdd_phase_error);
    read(a, "kappa", c.attack.kappa);
    if (a.contains("weighting")) c.attack.weighting = sensing::weighting_from_string(a.at("weighting").get<std::string>());
    read(a, "samples_per_class", c.attack.samples_per_class);
    read(a, "dt_draws", c.attack.dt_draws);
    c.attack.profile.validate(c.data.sample.grid);

    if (doc.contains("pso")) c.pso = attack::PsoParams::from_json(doc.at("pso"));

    const json s = doc.value("screen", json::object());
    read(s, "draws", c.screen.draws);
    read(s, "noise_rel", c.screen.noise_rel);
    read(s, "fresh_draws", c.screen.fresh_draws);

    const json g = doc.value("gan", json::object());
    c.gan.gan = gan::GanConfig::from_json(g);
    read(g, "surrogates", c.gan.surrogates);
    read(g, "sample_dropout", c.gan.sample_dropout);
    c.gan.gan.validate();

    const json e = doc.value("eval", json::object());
    read(e, "repetitions", c.eval.repetitions);
    read(e, "switch_duration", c.eval.switch_duration);
    read(e, "noise_rel", c.eval.noise_rel);
    read(e, "sweep_durations", c.eval.sweep_durations);
    read(e, "sweep_repetitions", c.eval.sweep_repetitions);
    read(e, "diversity_count", c.eval.diversity_count);

    const json f = doc.value("defense", json::object());
    read(f, "train_mixed", c.defense.train.mixed);
    read(f, "train_pure", c.defense.train.pure);
    read(f, "eval_mixed", c.defense.eval.mixed);
    read(f, "eval_pure", c.defense.eval.pure);
    read(f, "epochs", c.defense.epochs);
    read(f, "lr", c.defense.lr);
    if (c.defense.train.mixed + c.defense.train.pure == 0)
        throw ConfigError("defense: need at least one adversarial training sample");
    if (c.defense.eval.mixed + c.defense.eval.pure == 0)
        throw ConfigError("defense: need at least one adversarial evaluation sample");
    return c;
}

RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides,
                      std::optional<std::uint64_t> seed, std::optional<fs::path> out) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file " + path.string());
    json doc = json::parse(f, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
    for (const auto& o : overrides) apply_override(doc, o);
    if (seed) doc["seed"] = *seed;
    if (out) doc["out"] = out->string();
    return RunConfig::from_json(doc);
}

}  // namespace csi_intruder::harness
