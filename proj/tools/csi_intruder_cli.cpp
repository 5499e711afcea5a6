#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "csi_intruder/harness.hpp"

namespace {

using namespace csi_intruder;

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("csi-intruder");
    spdlog::set_default_logger(logger);
    const char* level = std::getenv("CSI_INTRUDER_LOG");
    spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
}

int report_error(const std::string& kind, const std::string& message, const std::string& required = {}) {
    nlohmann::json rec = {{"error", kind}, {"message", message}};
    if (!required.empty()) rec["required"] = required;
    std::cerr << rec.dump() << '\n';
    return harness::exit_code(kind);
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();

    CLI::App app{"Desk-scale CSI perturbation attack and defense pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;

    std::vector<std::pair<CLI::App*, std::string>> commands;
    auto add = [&](const std::string& name, const std::string& help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--set", overrides, "Override a config key, e.g. pso.iterations=50");
        sub->add_option("--seed", seed, "Master seed");
        sub->add_option("--out", out, "Output directory");
        commands.emplace_back(sub, name);
    };
    for (auto s : harness::pipeline_order()) add(harness::to_string(s), "Run the " + harness::to_string(s) + " stage");
    add("all", "Run every stage in order");
    app.add_subcommand("schema", "Print the config schema")->callback([] { std::cout << harness::config_schema().dump(2) << '\n'; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return report_error("config", e.what());
    }

    for (const auto& [sub, name] : commands) {
        if (!sub->parsed()) continue;
        try {
            std::optional<std::filesystem::path> out_path;
            if (out) out_path = *out;
            const auto cfg = harness::load_config(config_path, overrides, seed, out_path);
            if (name == "all")
                harness::run_pipeline(cfg);
            else
                harness::run_stage(cfg, harness::stage_from_string(name));
        } catch (const DependencyError& e) {
            return report_error(e.kind(), e.what(), e.required());
        } catch (const Error& e) {
            return report_error(e.kind(), e.what());
        } catch (const nlohmann::json::exception& e) {
            return report_error("consistency", e.what());
        } catch (const std::exception& e) {
            return report_error("internal", e.what());
        }
    }
    return 0;
}
