#pragma once

// Run manifests: every command writes one before doing any work and updates
// it atomically as stages complete. Timestamps live only here, never in the
// data artifacts, so artifact bytes stay reproducible run to run.

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cycledistill/common.hpp"
#include "cycledistill/version.hpp"

namespace cycledistill {

inline std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return std::string(buf);
}

struct StageStatus {
    std::string status;  // "pending" | "running" | "complete" | "failed"
    std::string updated_at;
    std::vector<std::string> artifacts;
};

struct RunManifest {
    std::string command;
    std::string version = kVersion;
    std::string created_at;
    std::string config_snapshot;
    std::map<std::string, std::string> settings;
    std::map<std::string, StageStatus> stages;

    void set_stage(const std::string& name, const std::string& status,
                   std::vector<std::string> artifacts = {}) {
        StageStatus& stage = stages[name];
        stage.status = status;
        stage.updated_at = iso8601_now();
        if (!artifacts.empty()) {
            stage.artifacts = std::move(artifacts);
        }
    }

    bool stage_complete(const std::string& name) const {
        auto it = stages.find(name);
        return it != stages.end() && it->second.status == "complete";
    }
};

inline nlohmann::json to_json(const RunManifest& m) {
    nlohmann::json stages = nlohmann::json::object();
    for (const auto& [name, stage] : m.stages) {
        stages[name] = {{"status", stage.status},
                        {"updated_at", stage.updated_at},
                        {"artifacts", stage.artifacts}};
    }
    return nlohmann::json{{"command", m.command},
                          {"version", m.version},
                          {"created_at", m.created_at},
                          {"config_snapshot", m.config_snapshot},
                          {"settings", m.settings},
                          {"stages", stages}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.created_at = j.at("created_at").get<std::string>();
    m.config_snapshot = j.at("config_snapshot").get<std::string>();
    m.settings = j.at("settings").get<std::map<std::string, std::string>>();
    for (const auto& [name, stage_json] : j.at("stages").items()) {
        StageStatus stage;
        stage.status = stage_json.at("status").get<std::string>();
        stage.updated_at = stage_json.at("updated_at").get<std::string>();
        stage.artifacts = stage_json.at("artifacts").get<std::vector<std::string>>();
        m.stages[name] = stage;
    }
    return m;
}

inline void save_manifest(const RunManifest& m, const std::filesystem::path& path) {
    write_text_file_atomic(path, to_json(m).dump(2) + "\n");
}

inline RunManifest load_manifest(const std::filesystem::path& path) {
    return manifest_from_json(nlohmann::json::parse(read_text_file(path)));
}

}  // namespace cycledistill
