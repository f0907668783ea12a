#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "relaylab/fixtures.hpp"
#include "relaylab/frame_fidelity.hpp"
#include "relaylab/stats.hpp"
#include "support/reference_match.hpp"

using namespace relaylab;
using namespace relaylab::frames;

namespace {

FrameSpec toy_frame() {
    FrameSpec frame;
    frame.id = "A";
    frame.issue = "toy";
    frame.name = "Toy";
    frame.stance = "pro";
    frame.strength = "strong";
    frame.text = "irrelevant";
    frame.units = {
        {"median home price", {}},
        {"teachers", {"teacher"}},
        {"overcrowded", {}},
        {"commute", {"commutes", "commuting"}},
        {"workforce housing", {}},
        {"essential workers", {}},
        {"priced out", {}},
        {"affordability crisis", {"housing crisis"}},
    };
    return frame;
}

}  // namespace

TEST_CASE("frames must carry exactly eight units") {
    auto frame = toy_frame();
    CHECK_NOTHROW(validate_frame(frame));
    frame.units.pop_back();
    CHECK_THROWS(validate_frame(frame));
    frame.units.push_back({"x", {}});
    frame.units.push_back({"y", {}});
    CHECK_THROWS(validate_frame(frame));
}

TEST_CASE("fidelity is the matched fraction of units") {
    const auto frame = toy_frame();
    CHECK(fidelity("", frame) == 0.0);
    CHECK(fidelity("the median home price rose; teachers are priced out", frame) ==
          doctest::Approx(3.0 / 8.0));
    CHECK(fidelity("A long COMMUTE for essential workers.", frame) == doctest::Approx(2.0 / 8.0));
    std::string all =
        "median home price teachers overcrowded commute workforce housing "
        "essential workers priced out affordability crisis";
    CHECK(fidelity(all, frame) == 1.0);
}

TEST_CASE("variants count toward their unit") {
    const auto frame = toy_frame();
    CHECK(fidelity("commuting is long", frame) == doctest::Approx(1.0 / 8.0));
    CHECK(fidelity("a housing crisis looms", frame) == doctest::Approx(1.0 / 8.0));
    const auto presence = unit_presence("one teacher commuting", frame);
    REQUIRE(presence.size() == 8);
    CHECK(presence[1]);
    CHECK(presence[3]);
    CHECK_FALSE(presence[0]);
}

TEST_CASE("strength and direction aggregates") {
    FidelityRecord record;
    record.by_frame = {{"A", 1.0}, {"B", 0.5}, {"C", 0.75}, {"D", 0.25}};
    const auto strength = strength_aggregate(record);
    CHECK(strength.strong == doctest::Approx(0.875));
    CHECK(strength.weak == doctest::Approx(0.375));
    CHECK(strength.gap == doctest::Approx(0.5));
    const auto direction = direction_aggregate(record);
    CHECK(direction.pro == doctest::Approx(0.75));
    CHECK(direction.con == doctest::Approx(0.5));
    CHECK(direction.gap == doctest::Approx(0.25));
}

TEST_CASE("competition effect compares competitive and solo finals") {
    std::vector<FidelityRecord> competitive;
    for (double f : {0.5, 0.75}) {
        FidelityRecord r;
        r.by_frame = {{"A", f}, {"B", 0.25}};
        competitive.push_back(r);
    }
    std::map<std::string, std::vector<double>> solo{{"A", {1.0, 1.0}}, {"B", {0.5, 1.0}}};
    const auto effect = competition_effect(competitive, solo);
    CHECK(effect.at("A") == doctest::Approx(0.625 - 1.0));
    CHECK(effect.at("B") == doctest::Approx(0.25 - 0.75));
}

TEST_CASE("gap t test equals the one-sample t against zero") {
    const std::vector<double> gaps{0.25, 0.5, 0.125, 0.375};
    const auto a = gap_t_test(gaps);
    const auto b = stats::one_sample_t(gaps, 0.0);
    CHECK(a.t == b.t);
    CHECK(a.df == b.df);
    CHECK(a.p == b.p);
}

TEST_CASE("bundled frames validate and contain their own units") {
    for (const char* issue : {"housing", "speech"}) {
        const auto frames = fixtures::load_frames(issue);
        REQUIRE(frames.size() == 4);
        const std::vector<std::string> ids{"A", "B", "C", "D"};
        for (std::size_t i = 0; i < frames.size(); ++i) {
            CHECK(frames[i].id == ids[i]);
            CHECK(frames[i].issue == issue);
            CHECK(frames[i].units.size() == 8);
            CHECK(fidelity(frames[i].text, frames[i]) == 1.0);
        }
        CHECK(frames[0].stance == "pro");
        CHECK(frames[1].stance == "pro");
        CHECK(frames[2].stance == "con");
        CHECK(frames[3].stance == "con");
        CHECK(frames[0].strength == "strong");
        CHECK(frames[1].strength == "weak");
        CHECK(frames[2].strength == "strong");
        CHECK(frames[3].strength == "weak");

        const auto competitive =
            fixtures::load_source_text(std::string("study4_") + issue + "_competitive");
        for (const auto& frame : frames) {
            CHECK(fidelity(competitive, frame) == 1.0);
            const auto solo =
                fixtures::load_source_text(std::string("study4_") + issue + "_solo_" + frame.id);
            CHECK(fidelity(solo, frame) == 1.0);
        }
    }
}

TEST_CASE("fidelity agrees with an independent matcher on random texts") {
    std::vector<FrameSpec> frames;
    for (const char* issue : {"housing", "speech"}) {
        for (auto& frame : fixtures::load_frames(issue)) frames.push_back(std::move(frame));
    }

    std::vector<std::string> fragments{"the", "city", "council", "and", "because", ",", ".",
                                       "\n",  "!",    "students"};
    for (const auto& frame : frames) {
        for (const auto& unit : frame.units) {
            fragments.push_back(unit.canonical);
            for (const auto& v : unit.variants) fragments.push_back(v);
        }
    }

    std::mt19937_64 rng(20260816);
    std::uniform_int_distribution<std::size_t> pick(0, fragments.size() - 1);
    std::uniform_int_distribution<int> length(0, 60);
    std::uniform_int_distribution<int> coin(0, 3);

    for (int i = 0; i < 100; ++i) {
        std::string text;
        const int n = length(rng);
        for (int k = 0; k < n; ++k) {
            std::string piece = fragments[pick(rng)];
            if (coin(rng) == 0) {
                for (char& c : piece) {
                    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
                }
            }
            text += piece;
            text += coin(rng) == 1 ? ", " : " ";
        }
        for (const auto& frame : frames) {
            CHECK(fidelity(text, frame) == refmatch::frame_fidelity(text, frame));
        }
    }
}
