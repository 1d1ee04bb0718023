#include "etfb/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "etfb/errors.hpp"

namespace etfb {
namespace {

using nlohmann::json;

constexpr double kCmPerM = 100.0;

std::string num(double v) { return fmt::format("{}", v); }

template <class T>
std::string opt(const std::optional<T>& v) {
    return v ? num(*v) : std::string();
}

std::string csv_text(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n') c = ';';
    return s;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

json trial_row_json(const TrialRecord& t) {
    return {{"participant_id", t.participant_id},
            {"part", t.entry.part},
            {"block", t.entry.block},
            {"repetition", t.entry.repetition},
            {"attempt", t.attempt},
            {"feedback", to_string(t.entry.condition.feedback)},
            {"shading", to_string(t.entry.condition.shading)},
            {"valid", t.valid},
            {"samples", t.metrics.count},
            {"avg_d_cm", t.metrics.avg_d * kCmPerM},
            {"std_d_cm", t.metrics.std_d * kCmPerM},
            {"max_d_cm", t.metrics.max_d * kCmPerM},
            {"contact_start_s", opt_json(t.events.contact_start)},
            {"end_beep_s", opt_json(t.events.end_beep)},
            {"stimulus_commands", t.stimulus_commands},
            {"invalid_reason", t.invalid_reason}};
}

json trial_json(const TrialRecord& t) {
    auto samples = json::array();
    for (const auto& s : t.samples) samples.push_back({s.t, s.d, s.d_hat});
    return {{"participant_id", t.participant_id},
            {"part", t.entry.part},
            {"block", t.entry.block},
            {"repetition", t.entry.repetition},
            {"feedback", to_string(t.entry.condition.feedback)},
            {"shading", to_string(t.entry.condition.shading)},
            {"attempt", t.attempt},
            {"valid", t.valid},
            {"invalid_reason", t.invalid_reason},
            {"avg_d", t.metrics.avg_d},
            {"std_d", t.metrics.std_d},
            {"max_d", t.metrics.max_d},
            {"count", t.metrics.count},
            {"start_beep", t.events.start_beep},
            {"contact_start", opt_json(t.events.contact_start)},
            {"end_beep", opt_json(t.events.end_beep)},
            {"stimulus_commands", t.stimulus_commands},
            {"samples", samples}};
}

TrialRecord trial_from_json(const json& j) {
    TrialRecord t;
    t.participant_id = j.at("participant_id").get<int>();
    t.entry.part = j.at("part").get<int>();
    t.entry.block = j.at("block").get<int>();
    t.entry.repetition = j.at("repetition").get<int>();
    t.entry.condition = {feedback_mode_from_string(j.at("feedback").get<std::string>()),
                         shading_from_string(j.at("shading").get<std::string>())};
    t.attempt = j.at("attempt").get<int>();
    t.valid = j.at("valid").get<bool>();
    t.invalid_reason = j.at("invalid_reason").get<std::string>();
    t.metrics = {j.at("avg_d").get<double>(), j.at("std_d").get<double>(), j.at("max_d").get<double>(),
                 j.at("count").get<std::size_t>()};
    t.events.start_beep = j.at("start_beep").get<double>();
    t.events.contact_start = opt_from(j, "contact_start");
    t.events.end_beep = opt_from(j, "end_beep");
    t.stimulus_commands = j.at("stimulus_commands").get<std::size_t>();
    for (const auto& s : j.at("samples")) t.samples.push_back({s[0].get<double>(), s[1].get<double>(), s[2].get<double>()});
    return t;
}

json calibration_json(const CalibrationRecord& c) {
    auto transcript = json::array();
    for (const auto& r : c.session.transcript)
        transcript.push_back({{"probe_id", r.probe_id},
                              {"phase", to_string(r.phase)},
                              {"intensity_ma", r.intensity},
                              {"response", to_string(r.response)},
                              {"t_s", r.t}});
    json result = nullptr;
    if (c.result)
        result = {{"detection_threshold", c.result->detection_threshold},
                  {"discomfort_threshold", c.result->discomfort_threshold},
                  {"working_intensity", c.result->working_intensity}};
    return {{"index", c.index},
            {"label", c.label},
            {"status", c.status},
            {"error", c.error},
            {"true_detect", c.true_detect},
            {"true_discomfort", c.true_discomfort},
            {"detect_up", opt_json(c.session.detect_up)},
            {"discomfort", opt_json(c.session.discomfort)},
            {"detect_down", opt_json(c.session.detect_down)},
            {"descend_start", opt_json(c.session.descend_start)},
            {"anomalous", c.session.anomalous},
            {"probes", c.session.probes_issued},
            {"result", result},
            {"transcript", transcript}};
}

CalibrationRecord calibration_from_json(const json& j) {
    CalibrationRecord c;
    c.index = j.at("index").get<int>();
    c.label = j.at("label").get<std::string>();
    c.status = j.at("status").get<std::string>();
    c.error = j.at("error").get<std::string>();
    c.true_detect = j.at("true_detect").get<double>();
    c.true_discomfort = j.at("true_discomfort").get<double>();
    c.session.detect_up = opt_from(j, "detect_up");
    c.session.discomfort = opt_from(j, "discomfort");
    c.session.detect_down = opt_from(j, "detect_down");
    c.session.descend_start = opt_from(j, "descend_start");
    c.session.anomalous = j.at("anomalous").get<bool>();
    c.session.probes_issued = j.at("probes").get<int>();
    c.session.phase = c.status == "ok" ? CalibrationPhase::Done : CalibrationPhase::AscendDetect;
    if (!j.at("result").is_null()) {
        const auto& r = j.at("result");
        c.result = CalibrationResult{r.at("detection_threshold").get<double>(), r.at("discomfort_threshold").get<double>(),
                                     r.at("working_intensity").get<double>()};
    }
    for (const auto& r : j.at("transcript"))
        c.session.transcript.push_back({r.at("probe_id").get<int>(), calibration_phase_from_string(r.at("phase").get<std::string>()),
                                        r.at("intensity_ma").get<double>(),
                                        subject_response_from_string(r.at("response").get<std::string>()),
                                        r.at("t_s").get<double>()});
    return c;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

void write_trials_csv(std::ostream& out, std::span<const SessionDataset> datasets) {
    out << "# etfb trials v" << kDatasetFormatVersion
        << "; lengths in cm; std_d_cm is the population standard deviation over the contact window\n";
    out << "participant_id,part,block,repetition,attempt,feedback,shading,valid,samples,avg_d_cm,std_d_cm,max_d_cm,"
           "contact_start_s,end_beep_s,stimulus_commands,invalid_reason\n";
    for (const auto& ds : datasets) {
        for (const auto& t : ds.trials) {
            out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", t.participant_id, t.entry.part,
                               t.entry.block, t.entry.repetition, t.attempt, to_string(t.entry.condition.feedback),
                               to_string(t.entry.condition.shading), t.valid ? 1 : 0, t.metrics.count,
                               num(t.metrics.avg_d * kCmPerM), num(t.metrics.std_d * kCmPerM),
                               num(t.metrics.max_d * kCmPerM), opt(t.events.contact_start), opt(t.events.end_beep),
                               t.stimulus_commands, csv_text(t.invalid_reason));
        }
    }
}

void write_calibrations_csv(std::ostream& out, std::span<const SessionDataset> datasets) {
    out << "# etfb calibrations v" << kDatasetFormatVersion
        << "; intensities in mA; detection threshold = mean of ascending and descending series\n";
    out << "participant_id,index,label,status,detect_up_ma,discomfort_ma,detect_down_ma,descend_start_ma,"
           "detection_threshold_ma,discomfort_threshold_ma,working_intensity_ma,probes,anomalous,true_detect_ma,"
           "true_discomfort_ma\n";
    for (const auto& ds : datasets) {
        for (const auto& c : ds.calibrations) {
            const auto& s = c.session;
            out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", ds.participant_id, c.index, c.label,
                               c.status, opt(s.detect_up), opt(s.discomfort), opt(s.detect_down),
                               opt(s.descend_start), c.result ? num(c.result->detection_threshold) : "",
                               c.result ? num(c.result->discomfort_threshold) : "",
                               c.result ? num(c.result->working_intensity) : "", s.probes_issued,
                               s.anomalous ? 1 : 0, num(c.true_detect), num(c.true_discomfort));
        }
    }
}

void write_samples_jsonl(std::ostream& out, std::span<const SessionDataset> datasets) {
    for (const auto& ds : datasets) {
        for (const auto& t : ds.trials) {
            auto samples = json::array();
            for (const auto& s : t.samples) samples.push_back({s.t, s.d, s.d_hat});
            out << json{{"participant_id", t.participant_id}, {"part", t.entry.part},
                        {"block", t.entry.block},             {"repetition", t.entry.repetition},
                        {"attempt", t.attempt},               {"feedback", to_string(t.entry.condition.feedback)},
                        {"samples", samples}}
                       .dump()
                << '\n';
        }
    }
}

void write_trials_jsonl(std::ostream& out, std::span<const SessionDataset> datasets) {
    for (const auto& ds : datasets)
        for (const auto& t : ds.trials) out << trial_row_json(t).dump() << '\n';
}

void write_transcripts_jsonl(std::ostream& out, std::span<const SessionDataset> datasets) {
    for (const auto& ds : datasets) {
        for (const auto& c : ds.calibrations) {
            for (const auto& r : c.session.transcript) {
                out << json{{"participant_id", ds.participant_id},
                            {"calibration", c.index},
                            {"probe_id", r.probe_id},
                            {"phase", to_string(r.phase)},
                            {"intensity_ma", r.intensity},
                            {"response", to_string(r.response)},
                            {"t_s", r.t}}
                           .dump()
                    << '\n';
            }
        }
    }
}

void export_dataset(std::span<const SessionDataset> datasets, const std::filesystem::path& dir,
                    const ExportOptions& options) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

    if (options.native) {
        auto out = open_out(dir / "dataset.json");
        out << dataset_to_json(datasets).dump() << '\n';
    }
    if (options.format == ExportFormat::Csv) {
        auto trials = open_out(dir / "trials.csv");
        write_trials_csv(trials, datasets);
        auto cals = open_out(dir / "calibrations.csv");
        write_calibrations_csv(cals, datasets);
    } else {
        auto trials = open_out(dir / "trials.jsonl");
        write_trials_jsonl(trials, datasets);
    }
    {
        auto transcripts = open_out(dir / "transcripts.jsonl");
        write_transcripts_jsonl(transcripts, datasets);
    }
    if (options.samples) {
        auto samples = open_out(dir / "samples.jsonl");
        write_samples_jsonl(samples, datasets);
    }
}

std::vector<TrialRow> parse_trials_csv(std::istream& in) {
    std::vector<TrialRow> rows;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        const auto f = split(line);
        if (f.size() < 12) throw ConfigError("trials.csv: short row '" + line + "'");
        TrialRow r;
        try {
            r.participant_id = std::stoi(f[0]);
            r.part = std::stoi(f[1]);
            r.block = std::stoi(f[2]);
            r.repetition = std::stoi(f[3]);
            r.attempt = std::stoi(f[4]);
            r.feedback = feedback_mode_from_string(f[5]);
            r.shading = shading_from_string(f[6]);
            r.valid = f[7] == "1";
            r.samples = std::stoul(f[8]);
            r.avg_d_cm = std::stod(f[9]);
            r.std_d_cm = std::stod(f[10]);
            r.max_d_cm = std::stod(f[11]);
        } catch (const std::logic_error&) {
            throw ConfigError("trials.csv: malformed row '" + line + "'");
        }
        rows.push_back(r);
    }
    return rows;
}

json dataset_to_json(std::span<const SessionDataset> datasets) {
    auto participants = json::array();
    for (const auto& ds : datasets) {
        auto trials = json::array();
        for (const auto& t : ds.trials) trials.push_back(trial_json(t));
        auto cals = json::array();
        for (const auto& c : ds.calibrations) cals.push_back(calibration_json(c));
        participants.push_back({{"participant_id", ds.participant_id},
                                {"seed", ds.seed},
                                {"status", ds.status},
                                {"error", ds.error},
                                {"stimulation_exposure_s", ds.stimulation_exposure},
                                {"trials", trials},
                                {"calibrations", cals}});
    }
    return {{"format", "etfb-dataset"}, {"version", kDatasetFormatVersion}, {"participants", participants}};
}

std::vector<SessionDataset> dataset_from_json(const json& j) {
    std::vector<SessionDataset> out;
    try {
        if (j.value("format", std::string()) != "etfb-dataset") throw ConfigError("dataset: not an etfb dataset");
        if (j.at("version").get<int>() != kDatasetFormatVersion) throw ConfigError("dataset: unsupported version");
        for (const auto& p : j.at("participants")) {
            SessionDataset ds;
            ds.participant_id = p.at("participant_id").get<int>();
            ds.seed = p.at("seed").get<std::uint64_t>();
            ds.status = p.at("status").get<std::string>();
            ds.error = p.at("error").get<std::string>();
            ds.stimulation_exposure = p.at("stimulation_exposure_s").get<double>();
            ds.plan = build_plan(ds.participant_id, ds.seed);
            for (const auto& t : p.at("trials")) ds.trials.push_back(trial_from_json(t));
            for (const auto& c : p.at("calibrations")) ds.calibrations.push_back(calibration_from_json(c));
            out.push_back(std::move(ds));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("dataset: ") + e.what());
    }
    return out;
}

std::vector<SessionDataset> load_dataset(const std::filesystem::path& dir) {
    const auto path = std::filesystem::is_directory(dir) ? dir / "dataset.json" : dir;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset " + path.string());
    try {
        return dataset_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError("dataset " + path.string() + ": " + e.what());
    }
}

}  // namespace etfb
