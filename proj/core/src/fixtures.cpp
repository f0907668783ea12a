#include "relaylab/fixtures.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

using json = nlohmann::json;

namespace relaylab::fixtures {

namespace {

json load_json(const std::filesystem::path& relative) {
    const std::string text = load_text_file(relative);
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error("invalid JSON in " + relative.string() + ": " + e.what());
    }
}

std::vector<std::string> string_list(const json& node, const std::string& where) {
    if (!node.is_array()) throw std::runtime_error(where + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& item : node) {
        if (!item.is_string()) throw std::runtime_error(where + " must contain only strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

}  // namespace

std::filesystem::path fixtures_dir() {
    if (const char* env = std::getenv("RELAYLAB_FIXTURES")) {
        const std::filesystem::path p(env);
        if (std::filesystem::is_directory(p)) return p;
        throw std::runtime_error("RELAYLAB_FIXTURES is not a directory: " + std::string(env));
    }
#ifdef RELAYLAB_FIXTURE_SOURCE_DIR
    {
        const std::filesystem::path p(RELAYLAB_FIXTURE_SOURCE_DIR);
        if (std::filesystem::is_directory(p)) return p;
    }
#endif
#ifdef RELAYLAB_FIXTURE_INSTALL_DIR
    {
        const std::filesystem::path p(RELAYLAB_FIXTURE_INSTALL_DIR);
        if (std::filesystem::is_directory(p)) return p;
    }
#endif
    throw std::runtime_error("no fixture directory found; set RELAYLAB_FIXTURES");
}

std::string load_text_file(const std::filesystem::path& relative) {
    const auto path = fixtures_dir() / relative;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("missing fixture file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string load_source_text(const std::string& name) {
    std::string text = load_text_file(std::filesystem::path("texts") / (name + ".txt"));
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' ' ||
                             text.back() == '\t')) {
        text.pop_back();
    }
    return text;
}

survival::ElementCatalog load_element_catalog(const std::string& name) {
    const json doc = load_json(std::filesystem::path("catalogs") / (name + ".json"));
    if (!doc.contains("elements") || !doc["elements"].is_array()) {
        throw std::runtime_error("element catalog needs an \"elements\" array");
    }
    survival::ElementCatalog catalog;
    for (const auto& node : doc["elements"]) {
        survival::ElementSpec spec;
        spec.id = node.at("id").get<std::string>();
        spec.category = node.at("category").get<std::string>();
        spec.tier = node.at("tier").get<std::string>();
        spec.patterns = string_list(node.at("patterns"), "element " + spec.id + " patterns");
        if (spec.patterns.empty()) {
            throw std::runtime_error("element " + spec.id + " has no patterns");
        }
        catalog.elements.push_back(std::move(spec));
    }
    return catalog;
}

lexical::LexiconSet load_lexicons(const std::string& name) {
    const json doc = load_json(std::filesystem::path("catalogs") / (name + ".json"));
    if (!doc.contains("lexicons") || !doc["lexicons"].is_object()) {
        throw std::runtime_error("lexicon file needs a \"lexicons\" object");
    }
    lexical::LexiconSet set;
    for (const auto& [key, value] : doc["lexicons"].items()) {
        lexical::MarkerLexicon lexicon;
        lexicon.name = key;
        lexicon.phrases = string_list(value, "lexicon " + key);
        lexical::validate_lexicon(lexicon);
        set.emplace(key, std::move(lexicon));
    }
    return set;
}

std::vector<lexical::PerspectiveSpec> load_perspectives(const std::string& name) {
    const json doc = load_json(std::filesystem::path("catalogs") / (name + ".json"));
    if (!doc.contains("perspectives") || !doc["perspectives"].is_array()) {
        throw std::runtime_error("perspective file needs a \"perspectives\" array");
    }
    std::vector<lexical::PerspectiveSpec> specs;
    for (const auto& node : doc["perspectives"]) {
        lexical::PerspectiveSpec spec;
        spec.id = node.at("id").get<std::string>();
        spec.keywords = string_list(node.at("keywords"), "perspective " + spec.id);
        if (node.contains("threshold")) spec.threshold = node["threshold"].get<int>();
        lexical::validate_perspective(spec);
        specs.push_back(std::move(spec));
    }
    return specs;
}

std::vector<frames::FrameSpec> load_frames(const std::string& issue) {
    const json doc = load_json(std::filesystem::path("catalogs") / ("frames_" + issue + ".json"));
    if (!doc.contains("frames") || !doc["frames"].is_array()) {
        throw std::runtime_error("frame file needs a \"frames\" array");
    }
    std::vector<frames::FrameSpec> specs;
    for (const auto& node : doc["frames"]) {
        frames::FrameSpec spec;
        spec.id = node.at("id").get<std::string>();
        spec.issue = doc.value("issue", issue);
        spec.name = node.at("name").get<std::string>();
        spec.stance = node.at("stance").get<std::string>();
        spec.strength = node.at("strength").get<std::string>();
        spec.text = node.at("text").get<std::string>();
        for (const auto& unit_node : node.at("units")) {
            frames::ContentUnit unit;
            unit.canonical = unit_node.at("canonical").get<std::string>();
            if (unit_node.contains("variants")) {
                unit.variants = string_list(unit_node["variants"],
                                            "frame " + spec.id + " unit variants");
            }
            spec.units.push_back(std::move(unit));
        }
        frames::validate_frame(spec);
        specs.push_back(std::move(spec));
    }
    return specs;
}

std::string load_prompt(const std::string& name) {
    return load_text_file(std::filesystem::path("prompts") / (name + ".txt"));
}

judge::PromptSet load_prompt_set() {
    judge::PromptSet prompts;
    prompts.intensity = load_prompt("intensity");
    prompts.valence = load_prompt("valence");
    prompts.assertiveness = load_prompt("assertiveness");
    prompts.framework = load_prompt("framework");
    prompts.advocacy = load_prompt("advocacy");
    prompts.emotion = load_prompt("emotion");
    prompts.frame_validation = load_prompt("frame_validation");
    return prompts;
}

}  // namespace relaylab::fixtures
