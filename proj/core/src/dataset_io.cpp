#include "coge/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace coge {
namespace {

using nlohmann::json;

json edges_to_json(const std::vector<Edge>& edges) {
    json out = json::array();
    for (const Edge& e : edges) {
        const Edge n = Edge::make(e.u, e.v);
        out.push_back({n.u, n.v});
    }
    return out;
}

std::vector<Edge> edges_from_json(const json& j, const char* key) {
    std::vector<Edge> out;
    for (const json& pair : j.at(key)) {
        if (!pair.is_array() || pair.size() != 2) {
            throw std::invalid_argument(std::string("'") + key + "' entries must be [u, v] pairs");
        }
        out.push_back(Edge::make(pair[0].get<int>(), pair[1].get<int>()));
    }
    return out;
}

json graph_to_json(const Graph& g, Split split, const std::optional<std::uint64_t>& seed) {
    json features = json::array();
    for (Eigen::Index i = 0; i < g.features.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < g.features.cols(); ++j) {
            row.push_back(g.features(i, j));
        }
        features.push_back(std::move(row));
    }
    json out = {
        {"id", g.id},
        {"n", g.num_nodes},
        {"edges", edges_to_json(g.edges)},
        {"features", std::move(features)},
        {"label", g.label},
        {"gt_edges", edges_to_json(g.ground_truth_edges)},
        {"split", split == Split::train ? "train" : "test"},
    };
    if (seed) {
        out["seed"] = *seed;
    }
    return out;
}

}  // namespace

std::string dataset_to_jsonl(const Dataset& ds) {
    std::string out;
    for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
        out += graph_to_json(ds.graphs[i], ds.splits[i], ds.seed).dump();
        out += '\n';
    }
    return out;
}

Dataset dataset_from_jsonl(const std::string& text) {
    Dataset ds;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        Graph g;
        Split split = Split::train;
        try {
            const json j = json::parse(line);
            g.id = j.at("id").get<int>();
            g.num_nodes = j.at("n").get<int>();
            g.label = j.at("label").get<int>();
            g.edges = edges_from_json(j, "edges");
            g.ground_truth_edges = edges_from_json(j, "gt_edges");
            const json& rows = j.at("features");
            const std::size_t dim = rows.empty() ? 0 : rows.front().size();
            g.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows[r].size() != dim) {
                    throw std::invalid_argument("ragged feature matrix");
                }
                for (std::size_t c = 0; c < dim; ++c) {
                    g.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                        rows[r][c].get<double>();
                }
            }
            const auto tag = j.at("split").get<std::string>();
            if (tag == "train") {
                split = Split::train;
            } else if (tag == "test") {
                split = Split::test;
            } else {
                throw std::invalid_argument("split must be \"train\" or \"test\", got \"" + tag + "\"");
            }
            if (j.contains("seed")) {
                ds.seed = j.at("seed").get<std::uint64_t>();
            }
        } catch (const json::exception& e) {
            throw DatasetError(std::string("malformed graph record: ") + e.what(), line_no);
        } catch (const std::invalid_argument& e) {
            throw DatasetError(std::string("malformed graph record: ") + e.what(), line_no);
        }

        try {
            validate(g);
        } catch (const GraphError& e) {
            throw DatasetError(e.what(), line_no);
        }
        if (g.num_nodes > 0) {
            if (ds.feature_dim && *ds.feature_dim != g.feature_dim()) {
                throw DatasetError("graph " + std::to_string(g.id) + ": feature dimension " +
                                       std::to_string(g.feature_dim()) + " differs from " +
                                       std::to_string(*ds.feature_dim),
                                   line_no);
            }
            ds.feature_dim = g.feature_dim();
        }
        if (!is_connected(g)) {
            ds.disconnected_graphs.push_back(g.id);
        }
        ds.graphs.push_back(std::move(g));
        ds.splits.push_back(split);
    }
    return ds;
}

void write_file_atomically(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            throw std::runtime_error("failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    write_file_atomically(path, dataset_to_jsonl(ds));
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DatasetError("cannot open " + path.string(), 0);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return dataset_from_jsonl(buffer.str());
}

}  // namespace coge
