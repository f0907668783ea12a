#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "relaylab/backend.hpp"
#include "relaylab/chain.hpp"
#include "relaylab/stats.hpp"

namespace relaylab::survival {

/// One trackable information element: an id, a category (person, money,
/// date, ...), a salience tier, and the pattern variants that count as the
/// element still being present. Patterns match case-insensitively as
/// contiguous token runs, so numeric forms like "$4.7M" and "4,700,000" are
/// covered by listing them as variants.
struct ElementSpec {
    std::string id;
    std::string category;
    std::string tier;
    std::vector<std::string> patterns;
};

struct ElementCatalog {
    std::vector<ElementSpec> elements;

    const ElementSpec* find(const std::string& id) const;
    std::set<std::string> categories() const;
    std::set<std::string> tiers() const;
    std::vector<const ElementSpec*> in_tier(const std::string& tier) const;
};

/// Ids of the elements present in `text`.
std::set<std::string> detect_elements(const std::string& text, const ElementCatalog& catalog);

/// Presence of every catalog element in every run at every sampled timepoint.
struct SurvivalMatrix {
    std::vector<std::string> element_ids;
    std::vector<int> timepoints;
    std::vector<std::string> run_ids;
    /// presence[run][timepoint][element]
    std::vector<std::vector<std::vector<bool>>> presence;

    double survival(std::size_t timepoint_index, std::size_t element_index) const;
    /// Mean count of surviving elements per run at a timepoint, with a 95% CI
    /// across runs.
    stats::SampleSummary count_summary(std::size_t timepoint_index) const;
    stats::SampleSummary tier_count_summary(const ElementCatalog& catalog,
                                            const std::string& tier,
                                            std::size_t timepoint_index) const;
};

SurvivalMatrix survival_matrix(const std::vector<chain::Trajectory>& runs,
                               const std::vector<int>& timepoints,
                               const ElementCatalog& catalog);

/// Per-element survival fraction across runs at each timepoint.
std::vector<double> survival_curve(const SurvivalMatrix& matrix, const std::string& element_id);

struct Censored {
    int last_timepoint = 0;
};

/// First sampled timepoint with survival <= 0.5, or Censored when the series
/// never crosses.
std::variant<int, Censored> half_life(const std::vector<double>& survival,
                                      const std::vector<int>& timepoints);

/// Pluggable text embedding for similarity; the default embeds term
/// frequencies of lowercased tokens.
class Embedder {
   public:
    virtual ~Embedder() = default;
    virtual std::map<std::string, double> embed(const std::string& text) const = 0;
};

class TermFrequencyEmbedder final : public Embedder {
   public:
    std::map<std::string, double> embed(const std::string& text) const override;
};

/// Cosine similarity of embeddings. Both texts empty: 1. Exactly one empty: 0.
double similarity(const std::string& a, const std::string& b,
                  const Embedder& embedder = TermFrequencyEmbedder{});

/// Word-count change introduced by the recovery step, count(s_{N+1}) -
/// count(s_N).
long recovery_word_delta(const chain::Trajectory& run, int n_steps);

/// Builds degrader units from a catalog so elements can be dropped as wholes.
std::vector<DegraderUnit> degrader_units(const ElementCatalog& catalog);

}  // namespace relaylab::survival
