#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "blockforge/hash.hpp"

namespace blockforge {

// Every CLI command writes one of these next to its outputs: the exact
// config, content hashes of file inputs, seeds, and produced paths. Equal
// manifests imply byte-equal outputs.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::vector<std::pair<std::string, std::string>> input_hashes;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> outputs;

    void add_input_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        char hex[17];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(bytes)));
        input_hashes.push_back({path, hex});
    }

    nlohmann::json to_json() const {
        nlohmann::json inputs = nlohmann::json::object();
        for (const auto& [p, h] : input_hashes) inputs[p] = h;
        return nlohmann::json{{"version", 1},   {"command", command}, {"config", config},
                              {"inputs", inputs}, {"seeds", seeds},     {"outputs", outputs}};
    }

    void write(const std::string& path) const {
        std::filesystem::create_directories(std::filesystem::path(path).parent_path());
        std::ofstream(path) << to_json().dump(2) << "\n";
    }
};

}  // namespace blockforge
