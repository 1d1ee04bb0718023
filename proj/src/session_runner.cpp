#include "etfb/session_runner.hpp"

#include <deque>

#include "etfb/feedback.hpp"

namespace etfb {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

CalibrationRecord run_calibration(const CalibrationConfig& cfg, const Responder& respond, DeviceSimulator* device) {
    CalibrationRecord record;
    Calibrator calibrator(cfg);
    try {
        while (auto probe = calibrator.next_probe()) {
            if (device) {
                device->execute(protocol::make_set_stimulus(quantize_for_device(probe->params)));
                device->execute(protocol::Start{});
                device->advance(cfg.probe_on_time);
            }
            const SubjectResponse response = respond(*probe);
            if (device) {
                device->execute(protocol::Stop{});
                device->advance(cfg.probe_off_time);
            }
            calibrator.record_response(probe->id, response);
        }
        record.result = calibrator.finalize();
    } catch (const CalibrationError& e) {
        if (device && device->state().running) device->execute(protocol::Stop{});
        record.status = e.kind() == CalibrationError::Kind::Invalid ? "invalid" : "aborted";
        record.error = e.what();
    }
    record.session = calibrator.session();
    return record;
}

SubjectParams participant_subject(const SessionConfig& cfg, int participant_id) {
    SubjectParams p = cfg.subject;
    p.rng_seed = splitmix64(cfg.seed ^ splitmix64(cfg.subject.rng_seed + static_cast<std::uint64_t>(participant_id)));
    return p;
}

SessionDataset run_session(int participant_id, const SessionConfig& cfg) {
    SubjectModel subject(participant_subject(cfg, participant_id));
    return run_session(participant_id, subject, cfg);
}

SessionDataset run_session(int participant_id, SubjectModel& subject, const SessionConfig& cfg) {
    SessionDataset ds;
    ds.participant_id = participant_id;
    ds.seed = cfg.seed;
    ds.plan = build_plan(participant_id, cfg.seed);

    DeviceSimulator device;
    cfg.layout.validate();
    for (const auto& channel : cfg.layout.channel_configs()) device.execute(protocol::SetChannelMode{channel});

    FeedbackRenderer renderer(cfg.modulation, device);
    const TrialContext ctx{cfg.scene, cfg.harness, renderer, device};
    double exposure_mark = 0.0;

    auto calibrate = [&](int index) {
        if (index > 0) {
            subject.habituate((device.stimulation_time() - exposure_mark) / 3600.0);
            exposure_mark = device.stimulation_time();
        }
        const double true_detect = subject.detect_threshold();
        const double true_discomfort = subject.discomfort_threshold();
        CalibrationRecord rec = run_calibration(
            cfg.calibration, [&](const CalibrationProbe& probe) { return subject.respond(probe.params); }, &device);
        rec.index = index;
        rec.label = kCalibrationLabels[index];
        rec.true_detect = true_detect;
        rec.true_discomfort = true_discomfort;
        const bool ok = rec.status == "ok";
        if (ok) {
            renderer.set_working_intensity(rec.result->working_intensity);
        } else {
            ds.status = "aborted";
            ds.error = rec.label + ": " + rec.error;
        }
        ds.calibrations.push_back(std::move(rec));
        return ok;
    };

    if (!calibrate(0)) return ds;

    for (int part = 1; part <= kParts; ++part) {
        for (int block = 1; block <= kBlocksPerPart; ++block) {
            std::deque<std::pair<PlanEntry, int>> retries;
            auto run = [&](const PlanEntry& entry, int attempt) {
                ds.trials.push_back(run_trial(participant_id, entry, attempt, subject, ctx));
                if (!ds.trials.back().valid && attempt <= cfg.harness.max_retries) retries.emplace_back(entry, attempt + 1);
            };
            for (const auto& entry : ds.plan.entries)
                if (entry.part == part && entry.block == block) run(entry, 1);
            while (!retries.empty()) {
                const auto [entry, attempt] = retries.front();
                retries.pop_front();
                run(entry, attempt);
            }
        }
        if (!calibrate(part)) break;
    }
    ds.stimulation_exposure = device.stimulation_time();
    return ds;
}

std::vector<SessionDataset> run_study(const SessionConfig& cfg) {
    std::vector<SessionDataset> out;
    for (int i = 0; i < cfg.participants; ++i) out.push_back(run_session(cfg.first_participant + i, cfg));
    return out;
}

}  // namespace etfb
