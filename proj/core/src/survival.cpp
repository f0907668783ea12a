#include "relaylab/survival.hpp"

#include <cmath>
#include <stdexcept>

#include "relaylab/text_match.hpp"

namespace relaylab::survival {

const ElementSpec* ElementCatalog::find(const std::string& id) const {
    for (const auto& e : elements) {
        if (e.id == id) return &e;
    }
    return nullptr;
}

std::set<std::string> ElementCatalog::categories() const {
    std::set<std::string> out;
    for (const auto& e : elements) out.insert(e.category);
    return out;
}

std::set<std::string> ElementCatalog::tiers() const {
    std::set<std::string> out;
    for (const auto& e : elements) out.insert(e.tier);
    return out;
}

std::vector<const ElementSpec*> ElementCatalog::in_tier(const std::string& tier) const {
    std::vector<const ElementSpec*> out;
    for (const auto& e : elements) {
        if (e.tier == tier) out.push_back(&e);
    }
    return out;
}

std::set<std::string> detect_elements(const std::string& text, const ElementCatalog& catalog) {
    std::set<std::string> out;
    const auto tokens = text::tokenize(text);
    for (const auto& element : catalog.elements) {
        for (const auto& pattern : element.patterns) {
            if (text::contains_phrase(tokens, text::compile_phrase(pattern))) {
                out.insert(element.id);
                break;
            }
        }
    }
    return out;
}

SurvivalMatrix survival_matrix(const std::vector<chain::Trajectory>& runs,
                               const std::vector<int>& timepoints,
                               const ElementCatalog& catalog) {
    SurvivalMatrix m;
    for (const auto& e : catalog.elements) m.element_ids.push_back(e.id);
    m.timepoints = timepoints;
    for (const auto& run : runs) {
        m.run_ids.push_back(run.run_id);
        std::vector<std::vector<bool>> per_timepoint;
        for (int t : timepoints) {
            const chain::Signal* signal = run.at_step(t);
            if (signal == nullptr) {
                throw std::invalid_argument("run " + run.run_id + " has no step " +
                                            std::to_string(t));
            }
            const auto present = detect_elements(signal->text, catalog);
            std::vector<bool> row;
            row.reserve(m.element_ids.size());
            for (const auto& id : m.element_ids) row.push_back(present.count(id) > 0);
            per_timepoint.push_back(std::move(row));
        }
        m.presence.push_back(std::move(per_timepoint));
    }
    return m;
}

double SurvivalMatrix::survival(std::size_t timepoint_index, std::size_t element_index) const {
    if (presence.empty()) throw std::logic_error("survival matrix has no runs");
    std::size_t alive = 0;
    for (const auto& run : presence) {
        if (run[timepoint_index][element_index]) ++alive;
    }
    return static_cast<double>(alive) / static_cast<double>(presence.size());
}

stats::SampleSummary SurvivalMatrix::count_summary(std::size_t timepoint_index) const {
    std::vector<double> counts;
    counts.reserve(presence.size());
    for (const auto& run : presence) {
        std::size_t c = 0;
        for (bool b : run[timepoint_index]) c += b ? 1 : 0;
        counts.push_back(static_cast<double>(c));
    }
    return stats::summarize(counts);
}

stats::SampleSummary SurvivalMatrix::tier_count_summary(const ElementCatalog& catalog,
                                                        const std::string& tier,
                                                        std::size_t timepoint_index) const {
    std::vector<std::size_t> tier_columns;
    for (std::size_t i = 0; i < element_ids.size(); ++i) {
        const ElementSpec* e = catalog.find(element_ids[i]);
        if (e != nullptr && e->tier == tier) tier_columns.push_back(i);
    }
    std::vector<double> counts;
    counts.reserve(presence.size());
    for (const auto& run : presence) {
        std::size_t c = 0;
        for (std::size_t col : tier_columns) c += run[timepoint_index][col] ? 1 : 0;
        counts.push_back(static_cast<double>(c));
    }
    return stats::summarize(counts);
}

std::vector<double> survival_curve(const SurvivalMatrix& matrix, const std::string& element_id) {
    std::size_t column = matrix.element_ids.size();
    for (std::size_t i = 0; i < matrix.element_ids.size(); ++i) {
        if (matrix.element_ids[i] == element_id) {
            column = i;
            break;
        }
    }
    if (column == matrix.element_ids.size()) {
        throw std::invalid_argument("unknown element: " + element_id);
    }
    std::vector<double> out;
    out.reserve(matrix.timepoints.size());
    for (std::size_t t = 0; t < matrix.timepoints.size(); ++t) {
        out.push_back(matrix.survival(t, column));
    }
    return out;
}

std::variant<int, Censored> half_life(const std::vector<double>& survival,
                                      const std::vector<int>& timepoints) {
    if (survival.size() != timepoints.size() || survival.empty()) {
        throw std::invalid_argument("survival series and timepoints must align");
    }
    for (std::size_t i = 0; i < survival.size(); ++i) {
        if (survival[i] <= 0.5) return timepoints[i];
    }
    return Censored{timepoints.back()};
}

std::map<std::string, double> TermFrequencyEmbedder::embed(const std::string& text) const {
    std::map<std::string, double> out;
    for (const auto& token : text::tokenize(text)) out[token.value] += 1.0;
    return out;
}

double similarity(const std::string& a, const std::string& b, const Embedder& embedder) {
    const auto va = embedder.embed(a);
    const auto vb = embedder.embed(b);
    if (va.empty() && vb.empty()) return 1.0;
    if (va.empty() || vb.empty()) return 0.0;
    double dot = 0.0;
    for (const auto& [term, weight] : va) {
        auto it = vb.find(term);
        if (it != vb.end()) dot += weight * it->second;
    }
    double na = 0.0;
    double nb = 0.0;
    for (const auto& [term, weight] : va) na += weight * weight;
    for (const auto& [term, weight] : vb) nb += weight * weight;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

long recovery_word_delta(const chain::Trajectory& run, int n_steps) {
    const chain::Signal* last = run.at_step(n_steps);
    const chain::Signal* recovered = run.at_step(n_steps + 1);
    if (last == nullptr || recovered == nullptr) {
        throw std::invalid_argument("run " + run.run_id + " lacks step " +
                                    std::to_string(n_steps) + " or its recovery");
    }
    return static_cast<long>(text::word_count(recovered->text)) -
           static_cast<long>(text::word_count(last->text));
}

std::vector<DegraderUnit> degrader_units(const ElementCatalog& catalog) {
    std::vector<DegraderUnit> out;
    out.reserve(catalog.elements.size());
    for (const auto& e : catalog.elements) out.push_back({e.id, e.patterns});
    return out;
}

}  // namespace relaylab::survival
