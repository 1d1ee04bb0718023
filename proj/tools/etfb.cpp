// etfb: command-line front end for calibration, offline sessions, single
// trials, dataset export and the live session service.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "etfb/config.hpp"
#include "etfb/dataset_io.hpp"
#include "etfb/errors.hpp"
#include "etfb/server.hpp"
#include "etfb/session_runner.hpp"

namespace {

using namespace etfb;
using nlohmann::json;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

int fail(const char* kind, const std::string& message, int code) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
    return code;
}

std::ofstream open_file(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    return out;
}

ExportFormat parse_format(const std::string& s) {
    if (s == "csv") return ExportFormat::Csv;
    if (s == "jsonl") return ExportFormat::Jsonl;
    throw ConfigError("unknown format '" + s + "' (csv|jsonl)");
}

SessionConfig load_config_or_default(const std::string& path) {
    return path.empty() ? SessionConfig{} : load_session_config(path);
}

SubjectResponse ask(const CalibrationProbe& probe) {
    for (;;) {
        std::cout << fmt::format("probe {} [{}]: {:.1f} mA. felt (f), not felt (n), discomfort (d)? ", probe.id,
                                 to_string(probe.phase), probe.params.intensity)
                  << std::flush;
        std::string answer;
        if (!std::getline(std::cin, answer)) throw IoError("input ended before calibration finished");
        if (answer == "f" || answer == "felt") return SubjectResponse::Felt;
        if (answer == "n" || answer == "not_felt") return SubjectResponse::NotFelt;
        if (answer == "d" || answer == "discomfort") return SubjectResponse::Discomfort;
        std::cout << "answer f, n or d\n";
    }
}

struct CalibrateArgs {
    std::string subject;
    bool interactive = false;
    std::string config;
    std::string transcript;
    std::string device_log;
    bool json = false;
};

int cmd_calibrate(const CalibrateArgs& a) {
    if (a.subject.empty() == !a.interactive) throw ConfigError("calibrate needs exactly one of --subject or --interactive");
    const SessionConfig cfg = load_config_or_default(a.config);
    DeviceSimulator device;
    for (const auto& ch : cfg.layout.channel_configs()) device.execute(protocol::SetChannelMode{ch});

    std::optional<SubjectModel> subject;
    if (!a.interactive) subject.emplace(load_subject(a.subject));
    const Responder respond = [&](const CalibrationProbe& probe) {
        return subject ? subject->respond(probe.params) : ask(probe);
    };
    const CalibrationRecord rec = run_calibration(cfg.calibration, respond, &device);

    if (!a.transcript.empty()) {
        auto out = open_file(a.transcript);
        write_transcript_jsonl(out, rec.session.transcript);
    }
    if (!a.device_log.empty()) {
        auto out = open_file(a.device_log);
        write_device_log_csv(out, device.log());
    }
    if (rec.status != "ok") return fail("calibration", rec.error, kExitRuntime);

    const auto& r = *rec.result;
    if (a.json) {
        std::cout << json{{"detection_threshold_ma", r.detection_threshold},
                          {"discomfort_threshold_ma", r.discomfort_threshold},
                          {"working_intensity_ma", r.working_intensity},
                          {"descend_start_ma", *rec.session.descend_start},
                          {"probes", rec.session.probes_issued},
                          {"anomalous", rec.session.anomalous}}
                         .dump()
                  << '\n';
    } else {
        std::cout << fmt::format("detection threshold: {:.1f} mA\n", r.detection_threshold)
                  << fmt::format("discomfort threshold: {:.1f} mA\n", r.discomfort_threshold)
                  << fmt::format("working intensity: {:.1f} mA\n", r.working_intensity)
                  << fmt::format("probes: {}{}\n", rec.session.probes_issued,
                                 rec.session.anomalous ? " (descending series anomalous)" : "");
    }
    return 0;
}

struct RunSessionArgs {
    std::string config;
    std::optional<int> participants;
    std::optional<std::uint64_t> seed;
    std::optional<int> first;
    std::string out = "dataset";
    std::string format = "csv";
    bool no_samples = false;
};

int cmd_run_session(const RunSessionArgs& a) {
    SessionConfig cfg = load_session_config(a.config);
    if (a.participants) cfg.participants = *a.participants;
    if (a.seed) cfg.seed = *a.seed;
    if (a.first) cfg.first_participant = *a.first;
    if (cfg.participants < 1) throw ConfigError("--participants must be >= 1");
    ExportOptions opts;
    opts.format = parse_format(a.format);
    opts.samples = !a.no_samples;

    const auto datasets = run_study(cfg);
    export_dataset(datasets, a.out, opts);

    int aborted = 0;
    std::size_t trials = 0;
    for (const auto& ds : datasets) {
        trials += ds.trials.size();
        if (ds.status != "complete") {
            ++aborted;
            std::cerr << json{{"warning", "participant_aborted"}, {"participant", ds.participant_id}, {"message", ds.error}}
                             .dump()
                      << '\n';
        }
    }
    std::cout << fmt::format("{} participants, {} trial attempts, {} aborted; dataset written to {}\n",
                             datasets.size(), trials, aborted, a.out);
    return 0;
}

struct SimulateArgs {
    std::string condition;
    std::string shading = "opaque";
    double depth = 0.02;
    std::string config;
    std::optional<double> intensity;
    std::uint64_t seed = 1;
    std::string samples;
    std::string device_log;
    bool json = false;
};

int cmd_simulate_trial(const SimulateArgs& a) {
    SessionConfig cfg = load_config_or_default(a.config);
    cfg.harness.nominal_depth = a.depth;
    cfg.harness.validate();
    if (a.intensity) cfg.modulation.intensity_fixed = *a.intensity;
    cfg.modulation.validate();
    const Condition condition{feedback_mode_from_string(a.condition), shading_from_string(a.shading)};

    SubjectParams sp = cfg.subject;
    sp.rng_seed = a.seed;
    SubjectModel subject(sp);
    DeviceSimulator device;
    for (const auto& ch : cfg.layout.channel_configs()) device.execute(protocol::SetChannelMode{ch});
    FeedbackRenderer renderer(cfg.modulation, device);
    const TrialContext ctx{cfg.scene, cfg.harness, renderer, device};
    const TrialRecord rec = run_trial(0, PlanEntry{1, 1, 1, condition}, 1, subject, ctx);

    if (!a.samples.empty()) {
        auto out = open_file(a.samples);
        out << "t_s,d_m,d_hat\n";
        for (const auto& s : rec.samples) out << fmt::format("{},{},{}\n", s.t, s.d, s.d_hat);
    }
    if (!a.device_log.empty()) {
        auto out = open_file(a.device_log);
        write_device_log_csv(out, device.log());
    }
    const auto& m = rec.metrics;
    if (a.json) {
        std::cout << json{{"condition", to_string(condition.feedback)},
                          {"valid", rec.valid},
                          {"invalid_reason", rec.invalid_reason},
                          {"samples", m.count},
                          {"avg_d", m.avg_d},
                          {"std_d", m.std_d},
                          {"max_d", m.max_d},
                          {"stimulus_commands", rec.stimulus_commands}}
                         .dump()
                  << '\n';
    } else {
        std::cout << fmt::format("condition: {}\n", to_string(condition.feedback))
                  << fmt::format("valid: {}{}\n", rec.valid ? "yes" : "no",
                                 rec.valid ? "" : " (" + rec.invalid_reason + ")")
                  << fmt::format("samples: {}\n", m.count)
                  << fmt::format("avg_d: {:.4f} cm\n", m.avg_d * 100.0) << fmt::format("std_d: {:.4f} cm\n", m.std_d * 100.0)
                  << fmt::format("max_d: {:.4f} cm\n", m.max_d * 100.0)
                  << fmt::format("stimulus commands: {}\n", rec.stimulus_commands);
    }
    return rec.valid ? 0 : kExitRuntime;
}

struct ExportArgs {
    std::string dataset;
    std::string format = "csv";
    std::string out;
    bool no_samples = false;
};

int cmd_export(const ExportArgs& a) {
    const ExportFormat format = parse_format(a.format);
    const auto datasets = load_dataset(a.dataset);
    ExportOptions opts;
    opts.format = format;
    opts.samples = !a.no_samples;
    opts.native = false;
    const std::string out = a.out.empty() ? a.dataset : a.out;
    export_dataset(datasets, out, opts);
    std::cout << fmt::format("exported {} participants as {} to {}\n", datasets.size(), a.format, out);
    return 0;
}

struct ServeArgs {
    std::string bind = "127.0.0.1";
    int port = 7070;
    std::optional<int> http_port;
    std::string config;
    std::string assets;
    std::string mode = "operator";
    int participant = 0;
    double speed = 1.0;
    double snapshot_rate = 30.0;
    bool autostart = false;
    bool exit_when_done = false;
    std::string out;
    std::string device_log;
};

int cmd_serve(const ServeArgs& a) {
    session::EngineOptions eo;
    eo.config = load_session_config(a.config);
    eo.participant_id = a.participant;
    eo.mode = session::mode_from_string(a.mode);
    eo.autostart = a.autostart;
    server::ServerOptions so;
    so.bind_address = a.bind;
    so.port = static_cast<std::uint16_t>(a.port);
    if (a.http_port) so.http_port = static_cast<std::uint16_t>(*a.http_port);
    so.assets_dir = a.assets;
    so.speed = a.speed;
    so.snapshot_rate = a.snapshot_rate;

    server::SessionServer srv(std::move(eo), so);
    srv.start();
    json ready{{"listening", a.bind}, {"port", srv.port()}, {"session", srv.session_id()},
               {"protocol", session::kProtocolVersion}};
    if (auto hp = srv.http_port()) ready["http_port"] = *hp;
    std::cout << ready.dump() << std::endl;

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_interrupted && !(a.exit_when_done && srv.finished()))
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    srv.stop();

    if (!a.out.empty()) {
        const std::vector<SessionDataset> datasets{srv.dataset()};
        export_dataset(datasets, a.out);
    }
    if (!a.device_log.empty()) {
        auto out = open_file(a.device_log);
        write_device_log_csv(out, srv.device().log());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Electrotactile interpenetration feedback: calibration, sessions and live service"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "etfb 1.0");

    CalibrateArgs cal;
    auto* c = app.add_subcommand("calibrate", "Run a method-of-limits calibration");
    c->add_option("--subject", cal.subject, "Synthetic subject file (JSON)")->check(CLI::ExistingFile);
    c->add_flag("--interactive", cal.interactive, "Answer probes on stdin");
    c->add_option("--config", cal.config, "Session config whose calibration settings to use")->check(CLI::ExistingFile);
    c->add_option("--transcript", cal.transcript, "Write the probe transcript (JSONL)");
    c->add_option("--device-log", cal.device_log, "Write the device command log (CSV)");
    c->add_flag("--json", cal.json, "Print the result as JSON");

    RunSessionArgs rs;
    auto* r = app.add_subcommand("run-session", "Run full sessions with the synthetic subject and export the dataset");
    r->add_option("--config", rs.config, "Session config (JSON)")->required()->check(CLI::ExistingFile);
    r->add_option("--participants", rs.participants, "Number of participants")->check(CLI::PositiveNumber);
    r->add_option("--seed", rs.seed, "Session seed");
    r->add_option("--first-participant", rs.first, "First participant id")->check(CLI::NonNegativeNumber);
    r->add_option("--out", rs.out, "Output directory")->capture_default_str();
    r->add_option("--format", rs.format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}))->capture_default_str();
    r->add_flag("--no-samples", rs.no_samples, "Skip samples.jsonl");

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate-trial", "Simulate one trial and print its metrics");
    s->add_option("--condition", sim.condition, "none | visual | electrotactile | visuo_electrotactile")
        ->required()
        ->check(CLI::IsMember({"none", "visual", "electrotactile", "visuo_electrotactile"}));
    s->add_option("--depth", sim.depth, "Uncorrected press depth (m)")->check(CLI::Range(0.0, 0.1))->capture_default_str();
    s->add_option("--shading", sim.shading, "opaque | wireframe")->check(CLI::IsMember({"opaque", "wireframe"}));
    s->add_option("--config", sim.config, "Session config (JSON)")->check(CLI::ExistingFile);
    s->add_option("--intensity", sim.intensity, "Working intensity (mA)");
    s->add_option("--seed", sim.seed, "Subject seed")->capture_default_str();
    s->add_option("--samples", sim.samples, "Write window samples (CSV)");
    s->add_option("--device-log", sim.device_log, "Write the device command log (CSV)");
    s->add_flag("--json", sim.json, "Print the result as JSON");

    ExportArgs ex;
    auto* e = app.add_subcommand("export", "Re-export a stored dataset");
    e->add_option("--dataset", ex.dataset, "Dataset directory")->required()->check(CLI::ExistingPath);
    e->add_option("--format", ex.format, "csv or jsonl")->required()->check(CLI::IsMember({"csv", "jsonl"}));
    e->add_option("--out", ex.out, "Output directory (default: the dataset directory)");
    e->add_flag("--no-samples", ex.no_samples, "Skip samples.jsonl");

    ServeArgs sv;
    auto* v = app.add_subcommand("serve", "Run the live session service");
    v->add_option("--port", sv.port, "NDJSON port (0 picks a free port)")->check(CLI::Range(0, 65535))->capture_default_str();
    v->add_option("--config", sv.config, "Session config (JSON)")->required()->check(CLI::ExistingFile);
    v->add_option("--bind", sv.bind, "Bind address")->capture_default_str();
    v->add_option("--http-port", sv.http_port, "WebSocket bridge and static assets port")->check(CLI::Range(0, 65535));
    v->add_option("--assets", sv.assets, "Static asset directory")->check(CLI::ExistingDirectory);
    v->add_option("--mode", sv.mode, "operator | synthetic")->check(CLI::IsMember({"operator", "synthetic"}))->capture_default_str();
    v->add_option("--participant", sv.participant, "Participant id")->check(CLI::NonNegativeNumber);
    v->add_option("--speed", sv.speed, "Simulated seconds per second")->check(CLI::PositiveNumber)->capture_default_str();
    v->add_option("--snapshot-rate", sv.snapshot_rate, "Max snapshots per second")->check(CLI::Range(0.1, 30.0));
    v->add_flag("--autostart", sv.autostart, "Start the session without a control message");
    v->add_flag("--exit-when-done", sv.exit_when_done, "Exit when the session completes");
    v->add_option("--out", sv.out, "Write the dataset here on exit");
    v->add_option("--device-log", sv.device_log, "Write the device command log (CSV) on exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForVersion& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        return fail("usage", ex.what(), kExitUsage);
    }

    try {
        if (*c) return cmd_calibrate(cal);
        if (*r) return cmd_run_session(rs);
        if (*s) return cmd_simulate_trial(sim);
        if (*e) return cmd_export(ex);
        if (*v) return cmd_serve(sv);
    } catch (const ConfigError& ex) {
        return fail("config", ex.what(), kExitUsage);
    } catch (const IoError& ex) {
        return fail("io", ex.what(), kExitRuntime);
    } catch (const std::exception& ex) {
        return fail("runtime", ex.what(), kExitRuntime);
    }
    return kExitUsage;
}
