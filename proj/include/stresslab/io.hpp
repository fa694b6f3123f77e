#pragma once

#include "stresslab/graph.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <memory>
#include <string>

namespace stresslab {

using nlohmann::json;

/// {"n": int, "edges": [[i, j], ...]}
json graph_to_json(const Graph& graph);
/// Validates simplicity, connectivity and the stimulus edge cap m < 2n.
Graph graph_from_json(const json& j);

/// {"graph_id": str, "pos": [[x, y], ...], "ksm": float | null}
json drawing_to_json(const Drawing& drawing);
Drawing drawing_from_json(const json& j, std::shared_ptr<const Graph> graph);

std::string read_text_file(const std::filesystem::path& path);
json read_json_file(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename so readers never observe partial files.
void write_text_file_atomic(const std::filesystem::path& path, const std::string& contents);
void write_json_file_atomic(const std::filesystem::path& path, const json& j);

}  // namespace stresslab
