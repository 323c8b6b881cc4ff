#include "hashtalk/bundle.hpp"

#include <filesystem>
#include <fstream>

#include "hashtalk/error.hpp"

namespace hashtalk {
namespace {

namespace fs = std::filesystem;

constexpr int kBundleSchema = 1;

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write bundle file: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error("failed writing bundle file: " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read bundle file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("bundle load: " + path.string() + ": " +
                              e.what());
    }
    return j;
}

}  // namespace

nlohmann::ordered_json predictors_to_json(const BitPredictorSet& preds) {
    nlohmann::ordered_json j;
    j["schema_version"] = kBundleSchema;
    j["config"] = {{"trees", preds.config.trees},
                   {"max_depth", preds.config.max_depth},
                   {"mtry", preds.config.mtry},
                   {"min_samples_split", preds.config.min_samples_split}};
    j["input_width"] = preds.input_width;
    nlohmann::ordered_json forests = nlohmann::ordered_json::array();
    for (const BitForest& forest : preds.forests) {
        nlohmann::ordered_json f;
        f["majority"] = static_cast<int>(forest.majority);
        f["constant_target"] = forest.constant_target;
        nlohmann::ordered_json trees = nlohmann::ordered_json::array();
        for (const Tree& tree : forest.trees) {
            nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
            for (const TreeNode& n : tree.nodes)
                nodes.push_back({n.split_bit, n.left, n.right, n.pos_fraction,
                                 n.count});
            trees.push_back(std::move(nodes));
        }
        f["trees"] = std::move(trees);
        forests.push_back(std::move(f));
    }
    j["forests"] = std::move(forests);
    return j;
}

BitPredictorSet predictors_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version").get<int>() != kBundleSchema)
            throw ValidationError(
                "predictors load: unsupported schema version");
        BitPredictorSet preds;
        const auto& c = j.at("config");
        preds.config.trees = c.at("trees").get<int>();
        preds.config.max_depth = c.at("max_depth").get<int>();
        preds.config.mtry = c.at("mtry").get<int>();
        preds.config.min_samples_split = c.at("min_samples_split").get<int>();
        preds.config.validate();
        preds.input_width = j.at("input_width").get<std::size_t>();
        if (preds.input_width < 1)
            throw ValidationError("predictors load: zero input width");
        for (const auto& f : j.at("forests")) {
            BitForest forest;
            const int majority = f.at("majority").get<int>();
            if (majority != 0 && majority != 1)
                throw ValidationError("predictors load: bad majority label");
            forest.majority = static_cast<std::uint8_t>(majority);
            forest.constant_target = f.at("constant_target").get<bool>();
            for (const auto& t : f.at("trees")) {
                Tree tree;
                for (const auto& n : t) {
                    if (!n.is_array() || n.size() != 5)
                        throw ValidationError(
                            "predictors load: malformed tree node");
                    TreeNode node;
                    node.split_bit = n[0].get<std::int32_t>();
                    node.left = n[1].get<std::int32_t>();
                    node.right = n[2].get<std::int32_t>();
                    node.pos_fraction = n[3].get<double>();
                    node.count = n[4].get<std::int32_t>();
                    tree.nodes.push_back(node);
                }
                const auto limit = static_cast<std::int32_t>(tree.nodes.size());
                for (const TreeNode& node : tree.nodes) {
                    if (node.split_bit < 0) continue;
                    if (node.split_bit >=
                        static_cast<std::int32_t>(preds.input_width))
                        throw ValidationError(
                            "predictors load: split bit out of range");
                    if (node.left < 0 || node.left >= limit || node.right < 0 ||
                        node.right >= limit)
                        throw ValidationError(
                            "predictors load: child index out of range");
                }
                if (tree.nodes.empty())
                    throw ValidationError("predictors load: empty tree");
                forest.trees.push_back(std::move(tree));
            }
            preds.forests.push_back(std::move(forest));
        }
        if (preds.forests.empty())
            throw ValidationError("predictors load: no forests");
        return preds;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("predictors load: ") + e.what());
    }
}

nlohmann::ordered_json index_to_json(const ResponseIndex& index) {
    nlohmann::ordered_json j;
    j["schema_version"] = kBundleSchema;
    j["h"] = index.codes.h;
    nlohmann::ordered_json codes = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < index.codes.n; ++i) {
        std::string row(index.codes.h, '0');
        for (std::size_t b = 0; b < index.codes.h; ++b)
            if (index.codes.at(i, b)) row[b] = '1';
        codes.push_back(std::move(row));
    }
    j["codes"] = std::move(codes);
    j["texts"] = index.texts;
    j["ids"] = index.ids;
    return j;
}

ResponseIndex index_from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema_version").get<int>() != kBundleSchema)
            throw ValidationError("index load: unsupported schema version");
        ResponseIndex index;
        const std::size_t h = j.at("h").get<std::size_t>();
        const auto& codes = j.at("codes");
        index.texts = j.at("texts").get<std::vector<std::string>>();
        index.ids = j.at("ids").get<std::vector<std::string>>();
        if (codes.size() != index.texts.size() ||
            codes.size() != index.ids.size())
            throw ValidationError("index load: row counts differ");
        index.codes = BitMatrix(codes.size(), h);
        std::size_t row = 0;
        for (const auto& entry : codes) {
            const std::string bits = entry.get<std::string>();
            if (bits.size() != h)
                throw ValidationError("index load: code width mismatch at "
                                      "row " +
                                      std::to_string(row));
            for (std::size_t b = 0; b < h; ++b) {
                if (bits[b] != '0' && bits[b] != '1')
                    throw ValidationError("index load: bad code digit at "
                                          "row " +
                                          std::to_string(row));
                index.codes.set(row, b, bits[b] == '1');
            }
            ++row;
        }
        return index;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("index load: ") + e.what());
    }
}

void save_bundle(const Bundle& bundle, const std::string& dir) {
    const fs::path target(dir);
    const fs::path staging(dir + ".partial");
    std::error_code ec;
    fs::remove_all(staging, ec);
    if (!fs::create_directories(staging))
        throw Error("cannot create bundle staging directory: " +
                    staging.string());

    nlohmann::ordered_json manifest = bundle.manifest;
    if (!manifest.contains("schema_version"))
        manifest["schema_version"] = kBundleSchema;
    write_json(staging / "manifest.json", manifest);
    write_json(staging / "hash_model.json", hash_model_to_json(bundle.model));
    write_json(staging / "predictors.json",
               predictors_to_json(bundle.predictors));
    write_json(staging / "index.json", index_to_json(bundle.index));

    fs::remove_all(target, ec);
    fs::rename(staging, target, ec);
    if (ec)
        throw Error("cannot move bundle into place: " + target.string() +
                    ": " + ec.message());
}

Bundle load_bundle(const std::string& dir) {
    const fs::path root(dir);
    Bundle bundle;
    const nlohmann::json manifest = read_json(root / "manifest.json");
    if (!manifest.contains("schema_version") ||
        manifest.at("schema_version").get<int>() != kBundleSchema)
        throw ValidationError("bundle load: unsupported schema version in " +
                              (root / "manifest.json").string());
    bundle.manifest = nlohmann::ordered_json(manifest);
    bundle.model = hash_model_from_json(read_json(root / "hash_model.json"));
    bundle.predictors =
        predictors_from_json(read_json(root / "predictors.json"));
    bundle.index = index_from_json(read_json(root / "index.json"));
    if (bundle.predictors.input_width != bundle.model.h)
        throw ValidationError(
            "bundle load: predictor input width " +
            std::to_string(bundle.predictors.input_width) +
            " does not match the " + std::to_string(bundle.model.h) +
            "-bit hash model");
    if (bundle.index.codes.h != bundle.model.h)
        throw ValidationError("bundle load: index code width " +
                              std::to_string(bundle.index.codes.h) +
                              " does not match the " +
                              std::to_string(bundle.model.h) +
                              "-bit hash model");
    if (bundle.predictors.output_bits() != bundle.index.codes.h)
        throw ValidationError("bundle load: predictor output width " +
                              std::to_string(bundle.predictors.output_bits()) +
                              " does not match the index");
    return bundle;
}

}  // namespace hashtalk
