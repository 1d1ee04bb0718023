#include <doctest.h>

#include <map>

#include "etfb/config.hpp"
#include "etfb/session_runner.hpp"

using namespace etfb;

namespace {

SessionConfig canonical() { return load_session_config(ETFB_CONFIG_DIR "/session.json"); }

double mean_avg_d(const SessionDataset& ds, int part, FeedbackMode mode) {
    double sum = 0.0;
    int n = 0;
    for (const auto& t : ds.trials) {
        if (!t.valid || t.entry.part != part || t.entry.condition.feedback != mode) continue;
        sum += t.metrics.avg_d;
        ++n;
    }
    return n ? sum / n : 0.0;
}

}  // namespace

TEST_CASE("canonical session: three calibrations and 96 valid trials") {
    const auto ds = run_session(0, canonical());
    CHECK(ds.status == "complete");
    REQUIRE(ds.calibrations.size() == 3);
    CHECK(ds.calibrations[0].label == "before_part1");
    CHECK(ds.calibrations[2].label == "after_part2");
    for (const auto& c : ds.calibrations) CHECK(c.status == "ok");
    CHECK(ds.calibrations[0].result->working_intensity == doctest::Approx(2.1));

    std::map<int, int> valid_per_part;
    for (const auto& t : ds.trials) valid_per_part[t.entry.part] += t.valid;
    CHECK(valid_per_part[1] == 48);
    CHECK(valid_per_part[2] == 48);
    CHECK(ds.stimulation_exposure > 0.0);
}

TEST_CASE("thresholds drift upwards with stimulation exposure") {
    const auto ds = run_session(1, canonical());
    REQUIRE(ds.calibrations.size() == 3);
    for (int i = 1; i < 3; ++i) {
        CHECK(ds.calibrations[i].true_detect > ds.calibrations[i - 1].true_detect);
        CHECK(ds.calibrations[i].result->working_intensity >= ds.calibrations[i - 1].result->working_intensity);
    }
    CHECK(ds.calibrations[2].result->working_intensity > ds.calibrations[0].result->working_intensity);
}

TEST_CASE("feedback conditions reduce mean interpenetration") {
    const auto ds = run_session(2, canonical());
    for (int part = 1; part <= 2; ++part) {
        const double none = mean_avg_d(ds, part, FeedbackMode::None);
        CHECK(none > 0.0);
        for (auto m : {FeedbackMode::Visual, FeedbackMode::Electrotactile, FeedbackMode::VisuoElectrotactile})
            CHECK(mean_avg_d(ds, part, m) < none);
    }
}

TEST_CASE("only electrotactile conditions issue stimulus commands") {
    const auto ds = run_session(3, canonical());
    for (const auto& t : ds.trials) {
        if (t.entry.condition.electrotactile())
            CHECK(t.stimulus_commands > 0);
        else
            CHECK(t.stimulus_commands == 0);
    }
}

TEST_CASE("sessions are deterministic per (seed, participant) and differ across participants") {
    const auto cfg = canonical();
    const auto a = run_session(0, cfg);
    const auto b = run_session(0, cfg);
    REQUIRE(a.trials.size() == b.trials.size());
    for (std::size_t i = 0; i < a.trials.size(); ++i) {
        CHECK(a.trials[i].metrics.avg_d == b.trials[i].metrics.avg_d);
        CHECK(a.trials[i].samples.size() == b.trials[i].samples.size());
    }
    CHECK(participant_subject(cfg, 0).rng_seed != participant_subject(cfg, 1).rng_seed);
    const auto c = run_session(1, cfg);
    CHECK(c.trials[0].metrics.avg_d != a.trials[0].metrics.avg_d);
}

TEST_CASE("invalid trials are retried up to max_retries") {
    auto cfg = canonical();
    cfg.harness.contact_timeout = 0.5;  // the reach needs 1.4 s, so every attempt times out
    cfg.harness.max_retries = 2;
    const auto ds = run_session(0, cfg);
    CHECK(ds.trials.size() == 96 * 3);
    for (const auto& t : ds.trials) {
        CHECK_FALSE(t.valid);
        CHECK(t.invalid_reason == "no contact before timeout");
        CHECK(t.attempt <= 3);
    }
}

TEST_CASE("a calibration failure aborts the session") {
    auto cfg = canonical();
    cfg.calibration.max_intensity = 2.0;  // below the discomfort threshold
    const auto ds = run_session(0, cfg);
    CHECK(ds.status == "aborted");
    REQUIRE(ds.calibrations.size() == 1);
    CHECK(ds.calibrations[0].status == "aborted");
    CHECK(ds.trials.empty());
}

TEST_CASE("run_study covers the configured participant range") {
    auto cfg = canonical();
    cfg.participants = 2;
    cfg.first_participant = 5;
    cfg.harness.record_samples = false;
    const auto all = run_study(cfg);
    REQUIRE(all.size() == 2);
    CHECK(all[0].participant_id == 5);
    CHECK(all[1].participant_id == 6);
    CHECK(all[0].trials[0].samples.empty());
}
