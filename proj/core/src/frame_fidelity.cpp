#include "relaylab/frame_fidelity.hpp"

#include <stdexcept>

#include "relaylab/text_match.hpp"

namespace relaylab::frames {

void validate_frame(const FrameSpec& frame) {
    if (frame.units.size() != 8) {
        throw std::invalid_argument("frame " + frame.id + " must have exactly 8 content units");
    }
    if (frame.stance != "pro" && frame.stance != "con") {
        throw std::invalid_argument("frame " + frame.id + " stance must be pro or con");
    }
    if (frame.strength != "strong" && frame.strength != "weak") {
        throw std::invalid_argument("frame " + frame.id + " strength must be strong or weak");
    }
    for (const auto& unit : frame.units) {
        if (unit.canonical.empty()) {
            throw std::invalid_argument("frame " + frame.id + " has an empty content unit");
        }
    }
}

std::vector<bool> unit_presence(const std::string& text, const FrameSpec& frame) {
    const auto tokens = text::tokenize(text);
    std::vector<bool> out;
    out.reserve(frame.units.size());
    for (const auto& unit : frame.units) {
        bool present = text::contains_phrase(tokens, text::compile_phrase(unit.canonical));
        for (std::size_t i = 0; !present && i < unit.variants.size(); ++i) {
            present = text::contains_phrase(tokens, text::compile_phrase(unit.variants[i]));
        }
        out.push_back(present);
    }
    return out;
}

double fidelity(const std::string& text, const FrameSpec& frame) {
    if (frame.units.empty()) throw std::invalid_argument("frame has no content units");
    const auto presence = unit_presence(text, frame);
    std::size_t hits = 0;
    for (bool b : presence) hits += b ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(frame.units.size());
}

namespace {

double frame_value(const FidelityRecord& record, const std::string& id) {
    auto it = record.by_frame.find(id);
    if (it == record.by_frame.end()) {
        throw std::invalid_argument("fidelity record lacks frame " + id);
    }
    return it->second;
}

}  // namespace

StrengthAggregate strength_aggregate(const FidelityRecord& record) {
    StrengthAggregate a;
    a.strong = (frame_value(record, "A") + frame_value(record, "C")) / 2.0;
    a.weak = (frame_value(record, "B") + frame_value(record, "D")) / 2.0;
    a.gap = a.strong - a.weak;
    return a;
}

DirectionAggregate direction_aggregate(const FidelityRecord& record) {
    DirectionAggregate a;
    a.pro = (frame_value(record, "A") + frame_value(record, "B")) / 2.0;
    a.con = (frame_value(record, "C") + frame_value(record, "D")) / 2.0;
    a.gap = a.pro - a.con;
    return a;
}

std::map<std::string, double> competition_effect(
    const std::vector<FidelityRecord>& competitive_final,
    const std::map<std::string, std::vector<double>>& solo_final_by_frame) {
    if (competitive_final.empty()) throw std::invalid_argument("no competitive records");
    std::map<std::string, double> competitive_mean;
    for (const auto& record : competitive_final) {
        for (const auto& [frame_id, value] : record.by_frame) competitive_mean[frame_id] += value;
    }
    for (auto& [frame_id, sum] : competitive_mean) {
        sum /= static_cast<double>(competitive_final.size());
    }
    std::map<std::string, double> out;
    for (const auto& [frame_id, mean] : competitive_mean) {
        auto it = solo_final_by_frame.find(frame_id);
        if (it == solo_final_by_frame.end() || it->second.empty()) {
            throw std::invalid_argument("no solo runs for frame " + frame_id);
        }
        double solo_mean = 0.0;
        for (double v : it->second) solo_mean += v;
        solo_mean /= static_cast<double>(it->second.size());
        out[frame_id] = mean - solo_mean;
    }
    return out;
}

stats::TTestResult gap_t_test(const std::vector<double>& per_run_gaps) {
    return stats::one_sample_t(per_run_gaps, 0.0);
}

}  // namespace relaylab::frames
