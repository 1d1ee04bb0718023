#include <doctest.h>

#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "etfb/errors.hpp"
#include "etfb/experiment.hpp"

using namespace etfb;

TEST_CASE("plan size: 96 trials, 48 per part, 12 per level per part") {
    for (int pid = 0; pid < 8; ++pid) {
        const auto plan = build_plan(pid, 7);
        CHECK(plan.entries.size() == 96);
        std::map<int, int> per_part;
        std::map<std::pair<int, int>, int> per_level;
        for (const auto& e : plan.entries) {
            ++per_part[e.part];
            ++per_level[{e.part, static_cast<int>(e.condition.feedback)}];
        }
        CHECK(per_part[1] == 48);
        CHECK(per_part[2] == 48);
        for (int part = 1; part <= 2; ++part)
            for (int level = 0; level < 4; ++level) CHECK(per_level[{part, level}] == 12);
    }
}

TEST_CASE("entries are ordered part, block, repetition") {
    const auto plan = build_plan(3, 1);
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
        const auto& e = plan.entries[i];
        CHECK(e.part == static_cast<int>(i / 48) + 1);
        CHECK(e.block == static_cast<int>(i % 48 / 12) + 1);
        CHECK(e.repetition == static_cast<int>(i % 12) + 1);
        CHECK(e.condition == plan.blocks[e.part - 1][e.block - 1]);
    }
}

TEST_CASE("latin square over four participants: positions and carry-over balanced") {
    std::map<std::pair<int, int>, int> at_position;
    std::set<std::pair<int, int>> neighbours;
    for (int pid = 0; pid < 4; ++pid) {
        const auto row = latin_square_row(pid);
        std::set<FeedbackMode> levels(row.begin(), row.end());
        CHECK(levels.size() == 4);
        for (int i = 0; i < 4; ++i) ++at_position[{i, static_cast<int>(row[i])}];
        for (int i = 0; i + 1 < 4; ++i) neighbours.insert({static_cast<int>(row[i]), static_cast<int>(row[i + 1])});
    }
    CHECK(at_position.size() == 16);
    for (const auto& [key, n] : at_position) CHECK(n == 1);
    CHECK(neighbours.size() == 12);
    CHECK(latin_square_row(5) == latin_square_row(1));
}

TEST_CASE("both parts use the same order; shading flips between parts") {
    for (int pid = 0; pid < 4; ++pid) {
        for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 99ULL}) {
            const auto plan = build_plan(pid, seed);
            int opaque_part1 = 0;
            for (int b = 0; b < 4; ++b) {
                CHECK(plan.blocks[0][b].feedback == latin_square_row(pid)[b]);
                CHECK(plan.blocks[1][b].feedback == plan.blocks[0][b].feedback);
                CHECK(plan.blocks[1][b].shading != plan.blocks[0][b].shading);
                opaque_part1 += plan.blocks[0][b].shading == Shading::Opaque;
            }
            CHECK(opaque_part1 == 2);
        }
    }
}

TEST_CASE("plans are deterministic") {
    const auto a = build_plan(2, 11);
    const auto b = build_plan(2, 11);
    CHECK(a.blocks == b.blocks);
    CHECK_THROWS_AS(build_plan(-1, 1), ContractViolation);
}

TEST_CASE("minimum jerk profile") {
    CHECK(minimum_jerk(0.0) == 0.0);
    CHECK(minimum_jerk(1.0) == 1.0);
    CHECK(minimum_jerk(0.5) == doctest::Approx(0.5));
    CHECK(minimum_jerk(-1.0) == 0.0);
    CHECK(minimum_jerk(2.0) == 1.0);
    // Zero velocity at both ends, symmetric about the midpoint.
    const double h = 1e-6;
    CHECK(minimum_jerk(h) / h == doctest::Approx(0.0).epsilon(1e-6));
    CHECK((1.0 - minimum_jerk(1.0 - h)) / h == doctest::Approx(0.0).epsilon(1e-6));
    for (int i = 0; i <= 100; ++i) {
        const double t = i / 100.0;
        CHECK(minimum_jerk(t) + minimum_jerk(1.0 - t) == doctest::Approx(1.0));
        CHECK(minimum_jerk(t) == doctest::Approx(10 * t * t * t - 15 * t * t * t * t + 6 * t * t * t * t * t));
    }
}

TEST_CASE("default scene layout") {
    const auto spec = default_scene_spec();
    CHECK(spec.target_box().half_extents == Vec3{0.075, 0.075, 0.075});
    const auto top = spec.contact_point();
    CHECK(top.y == doctest::Approx(spec.target_box().center.y + 0.075));
    const auto back = scene_spec_from_json(to_json(spec));
    CHECK(back.contact_point() == top);
    auto missing = spec;
    missing.target_id = "sphere";
    CHECK_THROWS_AS(missing.target(), ConfigError);
}

TEST_CASE("harness config") {
    HarnessConfig cfg;
    CHECK(cfg.dt() == doctest::Approx(1.0 / 90.0));
    CHECK(cfg.window_ticks() == 270);
    cfg.tick_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.max_retries = 5;
    CHECK(harness_config_from_json(to_json(cfg)).max_retries == 5);
}

TEST_CASE("condition names") {
    for (auto mode : kFeedbackModes) CHECK(feedback_mode_from_string(to_string(mode)) == mode);
    CHECK(shading_from_string(to_string(Shading::Wireframe)) == Shading::Wireframe);
    CHECK_THROWS_AS(feedback_mode_from_string("haptic"), ConfigError);
    CHECK(Condition{FeedbackMode::VisuoElectrotactile}.visual());
    CHECK(Condition{FeedbackMode::VisuoElectrotactile}.electrotactile());
    CHECK_FALSE(Condition{FeedbackMode::Visual}.electrotactile());
    CHECK_FALSE(Condition{FeedbackMode::None}.visual());
}
