#include "hashtalk/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hashtalk/rng.hpp"

namespace hashtalk {

using json = nlohmann::json;

const char* to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Valid: return "valid";
        case Split::Test: return "test";
        default: return "unassigned";
    }
}

std::optional<Split> parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "valid") return Split::Valid;
    if (s == "test") return Split::Test;
    return std::nullopt;
}

namespace {

bool is_separator_punct(char c) {
    switch (c) {
        case '.': case ',': case '?': case '!': case ';':
        case ':': case '"': case '(': case ')':
            return true;
        default:
            return false;
    }
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    };
    for (char c : text) {
        unsigned char uc = static_cast<unsigned char>(c);
        if (std::isspace(uc)) {
            flush();
        } else if (is_separator_punct(c)) {
            flush();
            tokens.emplace_back(1, c);
        } else {
            current.push_back(static_cast<char>(std::tolower(uc)));
        }
    }
    flush();
    return tokens;
}

std::vector<std::size_t> Corpus::split_indices(Split s) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        if (pairs[i].split == s) idx.push_back(i);
    return idx;
}

std::vector<const Response*> Corpus::side(Role r) const {
    std::vector<const Response*> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(r == Role::A ? &p.a : &p.b);
    return out;
}

std::vector<const Response*> Corpus::pooled() const {
    std::vector<const Response*> out;
    out.reserve(2 * pairs.size());
    for (const auto& p : pairs) out.push_back(&p.a);
    for (const auto& p : pairs) out.push_back(&p.b);
    return out;
}

namespace {

std::vector<std::string> split_tags(const std::string& s) {
    std::vector<std::string> tags;
    std::istringstream in(s);
    std::string tag;
    while (in >> tag) tags.push_back(tag);
    return tags;
}

[[noreturn]] void line_error(const std::string& name, std::size_t line_no,
                             const std::string& what) {
    throw ValidationError(name + " line " + std::to_string(line_no) + ": " + what);
}

Response make_response(const std::string& id, Role role, std::string text,
                       const json& rec, const char* pos_key,
                       const std::string& name, std::size_t line_no) {
    Response r;
    r.id = id;
    r.role = role;
    r.raw_text = std::move(text);
    r.tokens = tokenize(r.raw_text);
    if (r.tokens.empty())
        line_error(name, line_no,
                   std::string(role == Role::A ? "a_text" : "b_text") +
                       " has no tokens");
    if (rec.contains(pos_key)) {
        if (!rec[pos_key].is_string())
            line_error(name, line_no, std::string(pos_key) + " must be a string");
        r.pos_tags = split_tags(rec[pos_key].get<std::string>());
        if (r.pos_tags.size() != r.tokens.size())
            line_error(name, line_no,
                       std::string(pos_key) + " has " +
                           std::to_string(r.pos_tags.size()) + " tags for " +
                           std::to_string(r.tokens.size()) + " tokens");
    }
    return r;
}

}  // namespace

Corpus load_corpus(std::istream& in, const std::string& name) {
    Corpus corpus;
    std::unordered_map<std::string, std::size_t> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            line_error(name, line_no, std::string("bad record: ") + e.what());
        }
        if (!rec.is_object()) line_error(name, line_no, "record is not an object");
        for (const char* key : {"id", "a_text", "b_text"})
            if (!rec.contains(key) || !rec[key].is_string())
                line_error(name, line_no, std::string("missing field ") + key);

        const std::string id = rec["id"].get<std::string>();
        if (id.empty()) line_error(name, line_no, "empty id");
        if (!seen_ids.emplace(id, line_no).second)
            line_error(name, line_no, "duplicate id '" + id + "' (first at line " +
                                          std::to_string(seen_ids[id]) + ")");

        std::string a_text = rec["a_text"].get<std::string>();
        if (rec.contains("context")) {
            if (!rec["context"].is_string())
                line_error(name, line_no, "context must be a string");
            const std::string ctx = rec["context"].get<std::string>();
            if (!ctx.empty()) a_text = ctx + " " + a_text;
        }

        DialoguePair pair;
        pair.a = make_response(id, Role::A, a_text, rec, "a_pos", name, line_no);
        pair.b = make_response(id, Role::B, rec["b_text"].get<std::string>(), rec,
                               "b_pos", name, line_no);
        if (rec.contains("split")) {
            if (!rec["split"].is_string())
                line_error(name, line_no, "split must be a string");
            auto s = parse_split(rec["split"].get<std::string>());
            if (!s)
                line_error(name, line_no,
                           "unknown split '" + rec["split"].get<std::string>() + "'");
            pair.split = *s;
        }
        corpus.pairs.push_back(std::move(pair));
    }
    return corpus;
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open corpus file: " + path);
    return load_corpus(in, path);
}

Corpus assign_splits(const Corpus& corpus, double test_fraction,
                     double valid_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0) || !(valid_fraction > 0.0) ||
        !(test_fraction + valid_fraction < 1.0))
        throw ValidationError(
            "assign_splits: fractions must be positive and sum below 1");
    Corpus out = corpus;
    const std::size_t n = out.pairs.size();
    const auto test_n =
        static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    const auto valid_n = static_cast<std::size_t>(
        std::llround(static_cast<double>(n - test_n) * valid_fraction));
    auto eng = rng::make_engine(rng::derive_seed(seed, 0x5317));
    const std::vector<std::size_t> order = rng::permutation(n, eng);
    for (std::size_t i = 0; i < n; ++i) {
        Split s = Split::Train;
        if (i < test_n)
            s = Split::Test;
        else if (i < test_n + valid_n)
            s = Split::Valid;
        out.pairs[order[i]].split = s;
    }
    return out;
}

namespace {

bool parse_double(const std::string& s, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size();
    } catch (...) {
        return false;
    }
}

bool parse_count(const std::string& s, std::size_t& out) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) {
            return std::isdigit(c);
        }))
        return false;
    try {
        out = std::stoull(s);
        return true;
    } catch (...) {
        return false;
    }
}

}  // namespace

EmbeddingTable load_embeddings(std::istream& in, const std::string& name) {
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    bool first_content_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::vector<std::string> fields;
        std::string f;
        while (ls >> f) fields.push_back(f);
        if (fields.empty()) continue;

        if (first_content_line) {
            first_content_line = false;
            std::size_t count = 0, dim = 0;
            if (fields.size() == 2 && parse_count(fields[0], count) &&
                parse_count(fields[1], dim)) {
                continue;  // "count dim" header
            }
        }
        if (fields.size() < 2)
            line_error(name, line_no, "expected a token and vector components");
        std::vector<double> vec;
        vec.reserve(fields.size() - 1);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            double v = 0.0;
            if (!parse_double(fields[i], v))
                line_error(name, line_no, "non-numeric component '" + fields[i] + "'");
            vec.push_back(v);
        }
        if (table.dim == 0) {
            table.dim = vec.size();
        } else if (vec.size() != table.dim) {
            line_error(name, line_no,
                       "vector has " + std::to_string(vec.size()) +
                           " components, expected " + std::to_string(table.dim));
        }
        if (!table.vectors.emplace(fields[0], std::move(vec)).second)
            ++table.duplicate_count;
    }
    if (table.vectors.empty())
        throw ValidationError(name + ": no vectors found");
    return table;
}

EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open embeddings file: " + path);
    return load_embeddings(in, path);
}

}  // namespace hashtalk
