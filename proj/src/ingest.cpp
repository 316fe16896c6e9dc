#include "nulog/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>
#include <unordered_set>

#include "nulog/csv.hpp"
#include "nulog/error.hpp"

namespace nulog {
namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::optional<std::size_t> column(const csv::Row& header, std::string_view name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) == name) {
            return i;
        }
    }
    return std::nullopt;
}

int parse_int(std::string_view value, std::string_view key, const std::string& where) {
    int out = 0;
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError(where + ": value of '" + std::string(key) + "' is not an integer: '" +
                          std::string(value) + "'");
    }
    return out;
}

}  // namespace

void DatasetConfig::validate() const {
    if (epochs < 1) {
        throw ValidationError("config '" + name + "': epochs must be >= 1, got " + std::to_string(epochs));
    }
    if (epsilon < 1) {
        throw ValidationError("config '" + name + "': epsilon must be >= 1, got " + std::to_string(epsilon));
    }
    if (frame_length_override && *frame_length_override < 3) {
        throw ValidationError("config '" + name + "': frame_length_override must be >= 3 (CLS, one token, one PAD)");
    }
    try {
        std::regex probe(tokenization_filter);
    } catch (const std::regex_error& e) {
        throw ConfigError("config '" + name + "': tokenization_filter does not compile: " + e.what());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) {
        throw IoError("error while reading '" + path.string() + "'");
    }
    return buffer.str();
}

std::vector<LogRecord> parse_loghub_csv(std::string_view text, const std::string& origin) {
    const auto rows = csv::parse(text);
    if (rows.empty()) {
        throw ConfigError(origin + ": empty file, expected a header with a Content column");
    }
    const auto& header = rows.front();
    const auto content_col = column(header, "Content");
    if (!content_col) {
        std::string observed;
        for (const auto& h : header) {
            observed += (observed.empty() ? "" : ",") + h;
        }
        throw ConfigError(origin + ": missing Content column; header was [" + observed + "]");
    }
    const auto line_col = column(header, "LineId");
    const auto event_col = column(header, "EventId");
    const auto template_col = column(header, "EventTemplate");

    std::vector<LogRecord> records;
    records.reserve(rows.size() - 1);
    std::unordered_set<std::int64_t> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && row[0].empty()) {
            continue;
        }
        auto field = [&](std::optional<std::size_t> col) -> std::optional<std::string> {
            if (!col || *col >= row.size()) {
                return std::nullopt;
            }
            return row[*col];
        };
        LogRecord rec;
        rec.line_id = static_cast<std::int64_t>(records.size() + 1);
        if (auto id = field(line_col)) {
            const auto s = trim(*id);
            std::int64_t v = 0;
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || ptr != s.data() + s.size() || v < 1) {
                throw ValidationError(origin + ": row " + std::to_string(r + 1) + " has invalid LineId '" + *id + "'");
            }
            rec.line_id = v;
        }
        if (!seen.insert(rec.line_id).second) {
            throw ValidationError(origin + ": duplicate LineId " + std::to_string(rec.line_id));
        }
        rec.content = field(content_col).value_or("");
        rec.truth_event_id = field(event_col);
        rec.truth_template = field(template_col);
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<LogRecord> load_loghub_csv(const std::filesystem::path& path) {
    return parse_loghub_csv(read_file(path), path.string());
}

DatasetConfig parse_config(std::string_view text, const std::string& origin) {
    DatasetConfig config;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        const auto raw = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto where = origin + ":" + std::to_string(line_no);
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(where + ": expected 'key = value', got '" + std::string(line) + "'");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key == "name") {
            config.name = std::string(value);
        } else if (key == "tokenization_filter") {
            if (value.empty()) {
                throw ConfigError(where + ": tokenization_filter is empty");
            }
            config.tokenization_filter = std::string(value);
        } else if (key == "epochs") {
            config.epochs = parse_int(value, key, where);
        } else if (key == "epsilon") {
            config.epsilon = parse_int(value, key, where);
        } else if (key == "frame_length_override") {
            config.frame_length_override = parse_int(value, key, where);
        } else {
            throw ConfigError(where + ": unknown key '" + std::string(key) + "'");
        }
    }
    config.validate();
    return config;
}

DatasetConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_file(path), path.string());
}

std::string format_config(const DatasetConfig& config) {
    std::ostringstream out;
    out << "name = " << config.name << '\n'
        << "tokenization_filter = " << config.tokenization_filter << '\n'
        << "epochs = " << config.epochs << '\n'
        << "epsilon = " << config.epsilon << '\n';
    if (config.frame_length_override) {
        out << "frame_length_override = " << *config.frame_length_override << '\n';
    }
    return out.str();
}

std::vector<LogRecord> parse_labeled_bgl(std::string_view text, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ValidationError("BGL fraction must be in (0, 1], got " + std::to_string(fraction));
    }
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        auto line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        lines.push_back(line);
        pos = nl + 1;
    }

    auto keep = static_cast<std::size_t>(std::floor(static_cast<double>(lines.size()) * fraction + 1e-9));
    if (keep == 0 && !lines.empty()) {
        keep = 1;
    }

    std::vector<LogRecord> records;
    records.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        const auto line = lines[i];
        // Skip the nine header fields; whatever follows is the message.
        std::size_t p = 0;
        std::string_view alert;
        for (int f = 0; f < 9 && p < line.size(); ++f) {
            while (p < line.size() && line[p] == ' ') {
                ++p;
            }
            const auto start = p;
            while (p < line.size() && line[p] != ' ') {
                ++p;
            }
            if (f == 0) {
                alert = line.substr(start, p - start);
            }
        }
        LogRecord rec;
        rec.line_id = static_cast<std::int64_t>(i + 1);
        rec.content = std::string(trim(line.substr(std::min(p, line.size()))));
        rec.anomaly_label = alert == "-" ? AnomalyLabel::normal : AnomalyLabel::anomaly;
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<LogRecord> load_labeled_bgl(const std::filesystem::path& path, double fraction) {
    return parse_labeled_bgl(read_file(path), fraction);
}

std::optional<DatasetConfig> builtin_config(std::string_view name) {
    struct Entry {
        const char* name;
        const char* filter;
        int epochs;
        int epsilon;
    };
    static const Entry table[] = {
        {"BGL", R"(([ |:|\(|\)|=|,])|(core.)|(\.{2,}))", 3, 50},
        {"Android", R"(([ |:|\(|\)|=|,|"|\{|\}|@|\$|\[|\]|\||;]))", 5, 25},
        {"OpenStack", R"(([ |:|\(|\)|"|\{|\}|@|\$|\[|\]|\||;]))", 6, 5},
        {"HDFS", R"((\s+blk_)|(:)|(\s))", 5, 15},
        {"Apache", R"(([ ]))", 5, 12},
        {"HPC", R"(([ |=]))", 3, 10},
        {"Windows", R"(([ ]))", 5, 95},
        {"HealthApp", R"(([ ]))", 5, 100},
        {"Mac", R"(([ ])|([\w-]+\.){2,}[\w-]+)", 10, 300},
        {"Spark", R"(([ ])|(\d+\sB)|(\d+\sKB)|(\d+\.){3}\d+)", 3, 50},
    };
    for (const auto& e : table) {
        if (name == e.name) {
            DatasetConfig c;
            c.name = e.name;
            c.tokenization_filter = e.filter;
            c.epochs = e.epochs;
            c.epsilon = e.epsilon;
            return c;
        }
    }
    return std::nullopt;
}

std::vector<std::string> builtin_dataset_names() {
    return {"HDFS", "Spark", "OpenStack", "BGL", "HPC", "Windows", "Mac", "Android", "HealthApp", "Apache"};
}

}  // namespace nulog
