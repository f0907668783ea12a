#pragma once

#include <map>
#include <string>
#include <vector>

#include "relaylab/stats.hpp"

namespace relaylab::frames {

/// One countable content unit of a frame: a canonical phrase plus explicit
/// close variants (no stemming; every accepted form is listed).
struct ContentUnit {
    std::string canonical;
    std::vector<std::string> variants;
};

/// A frame: id A-D, the issue it belongs to, its argumentative direction and
/// strength, the stimulus paragraph, and exactly eight content units.
struct FrameSpec {
    std::string id;
    std::string issue;
    std::string name;
    std::string stance;    ///< "pro" or "con"
    std::string strength;  ///< "strong" or "weak"
    std::string text;
    std::vector<ContentUnit> units;
};

void validate_frame(const FrameSpec& frame);

/// Fraction of the frame's units present in the text (a multiple of 1/8 for
/// well-formed frames). A unit is present when its canonical phrase or any
/// variant occurs, case-insensitively.
double fidelity(const std::string& text, const FrameSpec& frame);

/// Which units matched, for audits.
std::vector<bool> unit_presence(const std::string& text, const FrameSpec& frame);

/// Per-run fidelity of each frame at one timepoint.
struct FidelityRecord {
    std::string run_id;
    int timepoint = 0;
    std::map<std::string, double> by_frame;  ///< frame id -> fidelity
};

struct StrengthAggregate {
    double strong = 0.0;  ///< mean fidelity of frames A and C
    double weak = 0.0;    ///< mean fidelity of frames B and D
    double gap = 0.0;     ///< strong - weak
};

StrengthAggregate strength_aggregate(const FidelityRecord& record);

struct DirectionAggregate {
    double pro = 0.0;  ///< mean fidelity of frames A and B
    double con = 0.0;  ///< mean fidelity of frames C and D
    double gap = 0.0;  ///< pro - con
};

DirectionAggregate direction_aggregate(const FidelityRecord& record);

/// Mean end-of-chain fidelity difference per frame between competitive and
/// solo transmission: mean over competitive runs minus mean over solo runs of
/// fidelity at the final step.
std::map<std::string, double> competition_effect(
    const std::vector<FidelityRecord>& competitive_final,
    const std::map<std::string, std::vector<double>>& solo_final_by_frame);

/// One-sample t test of the within-run gap vector against zero, used for the
/// strong-vs-weak and pro-vs-con comparisons.
stats::TTestResult gap_t_test(const std::vector<double>& per_run_gaps);

}  // namespace relaylab::frames
