#include "quantvar/error.hpp"
#include "quantvar/forest.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace qv::forest {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json config_to_json(const ForestConfig& c) {
    return {{"num_trees", c.num_trees},     {"sample_fraction", c.sample_fraction},
            {"honesty", c.honesty},         {"mtry", c.mtry},
            {"min_node_size", c.min_node_size}, {"max_depth", c.max_depth},
            {"pilot_levels", c.pilot_levels}, {"criterion", to_string(c.criterion)},
            {"seed", c.seed}};
}

ForestConfig config_from_json(const json& j) {
    ForestConfig c;
    c.num_trees = j.at("num_trees").get<std::size_t>();
    c.sample_fraction = j.at("sample_fraction").get<double>();
    c.honesty = j.at("honesty").get<bool>();
    c.mtry = j.at("mtry").get<std::size_t>();
    c.min_node_size = j.at("min_node_size").get<std::size_t>();
    c.max_depth = j.at("max_depth").get<std::size_t>();
    c.pilot_levels = j.at("pilot_levels").get<std::vector<double>>();
    c.criterion = parse_criterion(j.at("criterion").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace

std::string to_json(const QuantileForest& forest) {
    json trees = json::array();
    for (const Tree& t : forest.trees()) {
        json nodes = json::array();
        for (const TreeNode& n : t.nodes) {
            if (n.is_leaf()) {
                nodes.push_back({{"depth", n.depth}, {"members", n.members}});
            } else {
                nodes.push_back({{"depth", n.depth},
                                 {"var", n.split_var},
                                 {"value", n.split_value},
                                 {"left", n.left},
                                 {"right", n.right}});
            }
        }
        trees.push_back({{"split_rows", t.split_rows}, {"estimation_rows", t.estimation_rows}, {"nodes", nodes}});
    }
    const json doc = {{"format", "quantvar-forest"},
                      {"version", kFormatVersion},
                      {"config", config_to_json(forest.config())},
                      {"names", forest.names()},
                      {"covariates", forest.covariates()},
                      {"responses", forest.responses()},
                      {"trees", trees}};
    return doc.dump();
}

QuantileForest from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
        if (doc.at("format") != "quantvar-forest") throw Error(ErrorKind::kValidation, "not a quantvar forest document");
        if (doc.at("version").get<int>() != kFormatVersion) {
            throw Error(ErrorKind::kValidation, "unsupported forest format version");
        }
        std::vector<Tree> trees;
        for (const auto& jt : doc.at("trees")) {
            Tree t;
            t.split_rows = jt.at("split_rows").get<std::vector<std::uint32_t>>();
            t.estimation_rows = jt.at("estimation_rows").get<std::vector<std::uint32_t>>();
            for (const auto& jn : jt.at("nodes")) {
                TreeNode n;
                n.depth = jn.at("depth").get<std::int32_t>();
                if (jn.contains("var")) {
                    n.split_var = jn.at("var").get<std::int32_t>();
                    n.split_value = jn.at("value").get<double>();
                    n.left = jn.at("left").get<std::int32_t>();
                    n.right = jn.at("right").get<std::int32_t>();
                } else {
                    n.members = jn.at("members").get<std::vector<std::uint32_t>>();
                }
                t.nodes.push_back(std::move(n));
            }
            trees.push_back(std::move(t));
        }
        return QuantileForest(config_from_json(doc.at("config")), doc.at("names").get<std::vector<std::string>>(),
                              doc.at("covariates").get<std::vector<double>>(),
                              doc.at("responses").get<std::vector<double>>(), std::move(trees));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::kValidation, std::string("malformed forest document: ") + e.what());
    }
}

void save(const QuantileForest& forest, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write '" + path + "'");
    out << to_json(forest);
}

QuantileForest load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

}  // namespace qv::forest
