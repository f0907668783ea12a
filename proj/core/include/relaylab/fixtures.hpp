#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "relaylab/frame_fidelity.hpp"
#include "relaylab/judge.hpp"
#include "relaylab/lexical_metrics.hpp"
#include "relaylab/survival.hpp"

namespace relaylab::fixtures {

/// Root of the bundled data directory. Resolution order: the
/// RELAYLAB_FIXTURES environment variable, the build-tree location, the
/// install location. Throws if none exists.
std::filesystem::path fixtures_dir();

/// Reads a file relative to fixtures_dir(). Throws on missing files.
std::string load_text_file(const std::filesystem::path& relative);

/// texts/<name>.txt, trailing whitespace-only lines trimmed to a single
/// terminating newline removed.
std::string load_source_text(const std::string& name);

/// catalogs/<name>.json
survival::ElementCatalog load_element_catalog(const std::string& name = "study1_elements");

/// catalogs/<name>.json
lexical::LexiconSet load_lexicons(const std::string& name = "study3_lexicons");

/// catalogs/<name>.json
std::vector<lexical::PerspectiveSpec> load_perspectives(
    const std::string& name = "study3_perspectives");

/// catalogs/frames_<issue>.json
std::vector<frames::FrameSpec> load_frames(const std::string& issue);

/// prompts/<name>.txt
std::string load_prompt(const std::string& name);

/// All judging rubric templates.
judge::PromptSet load_prompt_set();

}  // namespace relaylab::fixtures
