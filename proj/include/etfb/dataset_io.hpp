#pragma once

// Dataset persistence. Files written into the dataset directory:
//
//   dataset.json           full-fidelity dataset (meters), re-readable by load_dataset
//   trials.csv             one row per trial attempt; lengths in cm
//   calibrations.csv       one row per calibration; intensities in mA
//   samples.jsonl          per-tick window traces [t_s, d_m, d_hat] (optional)
//   trials.jsonl           trial rows as JSON lines (jsonl format only)
//   transcripts.jsonl      one line per calibration probe
//
// All numbers are written locale-independently with shortest round-trip
// precision, so a fixed seed yields byte-identical files.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "etfb/session_runner.hpp"

namespace etfb {

inline constexpr int kDatasetFormatVersion = 1;

enum class ExportFormat { Csv, Jsonl };

struct ExportOptions {
    ExportFormat format = ExportFormat::Csv;
    bool samples = true;
    bool native = true;  ///< also write dataset.json
};

void write_trials_csv(std::ostream& out, std::span<const SessionDataset> datasets);
void write_calibrations_csv(std::ostream& out, std::span<const SessionDataset> datasets);
void write_samples_jsonl(std::ostream& out, std::span<const SessionDataset> datasets);
void write_trials_jsonl(std::ostream& out, std::span<const SessionDataset> datasets);
void write_transcripts_jsonl(std::ostream& out, std::span<const SessionDataset> datasets);

/// Throws IoError when the directory or a file cannot be written.
void export_dataset(std::span<const SessionDataset> datasets, const std::filesystem::path& dir,
                    const ExportOptions& options = {});

struct TrialRow {
    int participant_id = 0;
    int part = 0;
    int block = 0;
    int repetition = 0;
    int attempt = 0;
    FeedbackMode feedback = FeedbackMode::None;
    Shading shading = Shading::Opaque;
    bool valid = false;
    std::size_t samples = 0;
    double avg_d_cm = 0.0;
    double std_d_cm = 0.0;
    double max_d_cm = 0.0;
};

/// Parse trials.csv; '#' lines are comments.
std::vector<TrialRow> parse_trials_csv(std::istream& in);

nlohmann::json dataset_to_json(std::span<const SessionDataset> datasets);
std::vector<SessionDataset> dataset_from_json(const nlohmann::json& j);
std::vector<SessionDataset> load_dataset(const std::filesystem::path& dir);

}  // namespace etfb
