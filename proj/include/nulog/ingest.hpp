#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nulog {

enum class AnomalyLabel { normal, anomaly };

struct LogRecord {
    std::int64_t line_id = 0;
    std::string content;
    std::optional<std::string> truth_event_id;
    std::optional<std::string> truth_template;
    std::optional<AnomalyLabel> anomaly_label;
};

/// Per-dataset settings. The filter is a regular expression whose matches
/// separate tokens.
struct DatasetConfig {
    std::string name = "dataset";
    std::string tokenization_filter = "([ ])";
    int epochs = 5;
    int epsilon = 50;
    std::optional<int> frame_length_override;

    /// Throws ConfigError when the filter does not compile and
    /// ValidationError when a count is out of range.
    void validate() const;
};

std::string read_file(const std::filesystem::path& path);

/// Reads a loghub "structured" CSV. Requires a Content column; LineId,
/// EventId and EventTemplate are picked up when present. Without LineId the
/// 1-based data row number is used.
std::vector<LogRecord> load_loghub_csv(const std::filesystem::path& path);
std::vector<LogRecord> parse_loghub_csv(std::string_view text, const std::string& origin = "<memory>");

/// Config files are flat `key = value` lines. `#` starts a comment line, the
/// value is everything after the first `=` with surrounding blanks removed.
/// Recognised keys: name, tokenization_filter, epochs, epsilon,
/// frame_length_override.
DatasetConfig load_config(const std::filesystem::path& path);
DatasetConfig parse_config(std::string_view text, const std::string& origin = "<memory>");
std::string format_config(const DatasetConfig& config);

/// Raw BGL lines: `<alert> <epoch> <date> <node> <time> <node> <type>
/// <component> <level> <content...>`. The leading `fraction` of lines (by
/// count, rounded down, at least one when the file is non-empty) is kept.
/// An alert field of "-" marks a normal message.
std::vector<LogRecord> load_labeled_bgl(const std::filesystem::path& path, double fraction);
std::vector<LogRecord> parse_labeled_bgl(std::string_view text, double fraction);

/// The Table-style hyperparameters shipped for the ten benchmark systems.
/// Returns nullopt for an unknown name.
std::optional<DatasetConfig> builtin_config(std::string_view name);
std::vector<std::string> builtin_dataset_names();

}  // namespace nulog
