#include "stresslab/io.hpp"

#include "stresslab/error.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace stresslab {

json graph_to_json(const Graph& graph) {
    json edges = json::array();
    for (const auto& e : graph.edges()) edges.push_back({e.u, e.v});
    return {{"n", graph.node_count()}, {"edges", std::move(edges)}};
}

Graph graph_from_json(const json& j) {
    try {
        const int n = j.at("n").get<int>();
        std::vector<Edge> edges;
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw InvalidArgument("edge entries must be [i, j] pairs");
            edges.push_back({e[0].get<int>(), e[1].get<int>()});
        }
        Topology topology(n, std::move(edges));
        if (!satisfies_stimulus_edge_cap(topology))
            throw InvalidArgument(
                fmt::format("graph has {} edges; stimulus graphs need m < 2n = {}", topology.edge_count(), 2 * n));
        return Graph(std::move(topology));
    } catch (const json::exception& e) {
        throw InvalidArgument(fmt::format("malformed graph JSON: {}", e.what()));
    }
}

json drawing_to_json(const Drawing& drawing) {
    json pos = json::array();
    for (const auto& p : drawing.positions()) pos.push_back({p.x, p.y});
    json out{{"graph_id", drawing.graph_id()}, {"pos", std::move(pos)}};
    if (auto k = drawing.cached_ksm())
        out["ksm"] = *k;
    else
        out["ksm"] = nullptr;
    return out;
}

Drawing drawing_from_json(const json& j, std::shared_ptr<const Graph> graph) {
    try {
        std::vector<Point> pos;
        for (const auto& p : j.at("pos")) {
            if (!p.is_array() || p.size() != 2) throw InvalidArgument("positions must be [x, y] pairs");
            pos.push_back({p[0].get<double>(), p[1].get<double>()});
        }
        Drawing drawing(std::move(graph), std::move(pos), j.value("graph_id", std::string{}));
        if (auto it = j.find("ksm"); it != j.end() && !it->is_null()) drawing.set_cached_ksm(it->get<double>());
        return drawing;
    } catch (const json::exception& e) {
        throw InvalidArgument(fmt::format("malformed drawing JSON: {}", e.what()));
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError(fmt::format("cannot open {}", path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidArgument(fmt::format("{}: {}", path.string(), e.what()));
    }
}

void write_text_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(fmt::format("cannot write {}", tmp.string()));
        out << contents;
        if (!out.flush()) throw Error(fmt::format("short write to {}", tmp.string()));
    }
    std::filesystem::rename(tmp, path);
}

void write_json_file_atomic(const std::filesystem::path& path, const json& j) {
    write_text_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace stresslab
