// Acceptance runner. Prints one PASS/FAIL/SKIP line per criterion.
//
//   nulog_acceptance            run every criterion
//   nulog_acceptance 2 8 9      run a selection
//
// Exit status: 1 if anything failed, 77 if everything selected was skipped,
// 0 otherwise. Criteria 1-7 read benchmark logs from $NULOG_LOGHUB_DIR laid
// out as <root>/<System>/<System>_2k.log_structured.csv and <root>/BGL/BGL.log.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../support/corpus.hpp"
#include "../support/oracles.hpp"
#include "../support/synthetic.hpp"
#include "nulog/anomaly.hpp"
#include "nulog/error.hpp"
#include "nulog/evaluation.hpp"
#include "nulog/extraction.hpp"
#include "nulog/ingest.hpp"
#include "nulog/log.hpp"
#include "nulog/persistence.hpp"

namespace fs = std::filesystem;
using namespace nulog;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
    Status status;
    std::string detail;
    std::vector<std::string> notes;  // indented lines under the verdict
};

Outcome skip(std::string why) { return {Status::skip, std::move(why), {}}; }

std::string fixed(double v, int digits = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// ---------------------------------------------------------------------------
// Benchmark data

std::optional<fs::path> loghub_root() {
    const char* env = std::getenv("NULOG_LOGHUB_DIR");
    if (!env || !*env) return std::nullopt;
    fs::path root(env);
    if (!fs::is_directory(root)) return std::nullopt;
    return root;
}

fs::path structured_csv(const fs::path& root, const std::string& system) {
    return root / system / (system + "_2k.log_structured.csv");
}

struct ParseRun {
    EvaluationReport report;
    double baseline_edit_distance = 0;
    double seconds = 0;
};

/// Trains on a 2k sample with the shipped settings and scores the parse.
/// Results are cached per (system, seed) so later criteria reuse them.
const ParseRun& parse_run(const fs::path& root, const std::string& system, std::uint32_t seed) {
    static std::map<std::pair<std::string, std::uint32_t>, ParseRun> cache;
    const auto key = std::make_pair(system, seed);
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    const auto config = *builtin_config(system);
    const auto records = load_loghub_csv(structured_csv(root, system));
    ModelConfig base;
    base.seed = seed;
    const auto start = std::chrono::steady_clock::now();
    const auto fitted = fit_parser(records, config, base);
    const auto parsed = parse_corpus(records, fitted.state, fitted.vocab, config);
    ParseRun run;
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const Tokenizer tokenizer(config.tokenization_filter);
    run.report = evaluate(system, parsed.messages, records, tokenizer);
    run.baseline_edit_distance = verbatim_baseline_edit_distance(records, tokenizer);
    log::info(system + " seed " + std::to_string(seed) + ": PA " + fixed(run.report.parsing_accuracy) + " in " +
              fixed(run.seconds, 1) + " s");
    return cache.emplace(key, std::move(run)).first->second;
}

/// Missing files become a skip rather than an error.
std::optional<std::string> missing_samples(const fs::path& root, const std::vector<std::string>& systems) {
    std::string missing;
    for (const auto& s : systems) {
        if (!fs::exists(structured_csv(root, s))) missing += (missing.empty() ? "" : ", ") + structured_csv(root, s).string();
    }
    if (missing.empty()) return std::nullopt;
    return "missing " + missing;
}

constexpr std::uint32_t kSeeds[] = {7, 8, 9};

Outcome pa_gate(const std::string& system, double threshold, bool three_seeds, double max_seconds = 0) {
    const auto root = loghub_root();
    if (!root) return skip("NULOG_LOGHUB_DIR is not set to a loghub checkout");
    if (auto missing = missing_samples(*root, {system})) return skip(*missing);
    std::vector<double> pas;
    std::vector<std::string> notes;
    double slowest = 0;
    for (auto seed : kSeeds) {
        const auto& run = parse_run(*root, system, seed);
        pas.push_back(run.report.parsing_accuracy);
        slowest = std::max(slowest, run.seconds);
        notes.push_back("seed " + std::to_string(seed) + ": PA " + fixed(run.report.parsing_accuracy) + ", " +
                        fixed(run.seconds, 1) + " s");
        if (!three_seeds) break;
    }
    const double pa = median(pas);
    bool ok = pa >= threshold;
    std::string detail = system + (three_seeds ? " median PA " : " PA ") + fixed(pa) + " (need >= " + fixed(threshold, 2) + ")";
    if (max_seconds > 0) {
        ok = ok && slowest <= max_seconds;
        detail += ", runtime " + fixed(slowest, 1) + " s (limit " + fixed(max_seconds, 0) + " s)";
    }
    return {ok ? Status::pass : Status::fail, detail, notes};
}

Outcome criterion_median_pa() {
    const auto root = loghub_root();
    if (!root) return skip("NULOG_LOGHUB_DIR is not set to a loghub checkout");
    const auto systems = builtin_dataset_names();
    if (auto missing = missing_samples(*root, systems)) return skip(*missing);
    std::vector<std::pair<std::string, double>> scores;
    std::vector<std::string> notes;
    for (const auto& s : systems) {
        const double pa = parse_run(*root, s, kSeeds[0]).report.parsing_accuracy;
        scores.emplace_back(s, pa);
        notes.push_back(s + ": " + fixed(pa));
    }
    const auto summary = robustness_summary(scores);
    return {summary.median >= 0.93 ? Status::pass : Status::fail,
            "median PA over " + std::to_string(systems.size()) + " systems " + fixed(summary.median) +
                " (need >= 0.93), range " + fixed(summary.min) + ".." + fixed(summary.max),
            notes};
}

Outcome criterion_edit_distance() {
    const auto root = loghub_root();
    if (!root) return skip("NULOG_LOGHUB_DIR is not set to a loghub checkout");
    if (auto missing = missing_samples(*root, {"HDFS", "Mac"})) return skip(*missing);
    bool ok = true;
    std::vector<std::string> notes;
    for (const std::string system : {"HDFS", "Mac"}) {
        const auto& run = parse_run(*root, system, kSeeds[0]);
        const double ours = run.report.mean_edit_distance;
        const bool beats = 2.0 * ours <= run.baseline_edit_distance;
        ok = ok && beats;
        notes.push_back(system + ": mean " + fixed(ours, 3) + " vs whole-message baseline " +
                        fixed(run.baseline_edit_distance, 3) + (beats ? " (>= 2x better)" : " (not 2x better)"));
    }
    const double hdfs = parse_run(*root, "HDFS", kSeeds[0]).report.mean_edit_distance;
    notes.push_back("indicative: HDFS mean " + fixed(hdfs, 3) + (hdfs <= 6.0 ? " <= 6.0" : " > 6.0"));
    return {ok ? Status::pass : Status::fail, "beats the whole-message baseline by >= 2x on HDFS and Mac", notes};
}

Outcome criterion_anomaly() {
    const auto root = loghub_root();
    if (!root) return skip("NULOG_LOGHUB_DIR is not set to a loghub checkout");
    const auto path = *root / "BGL" / "BGL.log";
    if (!fs::exists(path)) return skip("missing " + path.string());

    constexpr std::size_t kLines = 20000;
    const auto text = read_file(path);
    const auto total = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) +
                       (!text.empty() && text.back() != '\n');
    if (total < kLines) return skip(path.string() + " has only " + std::to_string(total) + " lines");
    // Nudge the share up so flooring still keeps the full 20k lines.
    const double fraction = std::min(1.0, (static_cast<double>(kLines) + 0.5) / static_cast<double>(total));
    const auto records = parse_labeled_bgl(text, fraction);

    AnomalyConfig config;
    const auto unsupervised = run_unsupervised_study(records, config);
    const auto supervised = run_supervised_study(records, config);
    auto line = [](const char* mode, const DetectionMetrics& m) {
        return std::string(mode) + ": accuracy " + fixed(m.accuracy) + ", precision " + fixed(m.precision) + ", recall " +
               fixed(m.recall) + ", F1 " + fixed(m.f1);
    };
    const bool ok = unsupervised.metrics.f1 >= 0.90 && supervised.metrics.f1 >= 0.95;
    return {ok ? Status::pass : Status::fail,
            std::to_string(records.size()) + " leading BGL lines, F1 unsupervised " + fixed(unsupervised.metrics.f1) +
                " (need >= 0.90), supervised " + fixed(supervised.metrics.f1) + " (need >= 0.95)",
            {line("unsupervised", unsupervised.metrics), line("supervised", supervised.metrics)}};
}

// ---------------------------------------------------------------------------
// Property suite

struct Check {
    bool ok = true;
    std::string name;
    std::string detail;
};

Check gradient_check() {
    double worst = 0;
    std::size_t coordinates = 0, kinks = 0;
    std::string where;
    for (std::uint64_t seed : {1, 2, 3}) {
        Rng rng(seed);
        auto state = ModelState<double>::initialize(testing::tiny_config(), rng);
        std::mt19937_64 data(seed + 100);
        const auto result = testing::finite_difference_check(state, testing::tiny_sample(data), 1e-3);
        coordinates += result.coordinates;
        kinks += result.kinks;
        if (result.max_relative_error >= worst) {
            worst = result.max_relative_error;
            where = result.worst;
        }
    }
    const bool ok = worst <= 1e-3 && kinks * 100 < coordinates;
    return {ok, "finite differences (d=8, 2 blocks, h=1e-3)",
            "max relative error " + std::to_string(worst) + " over " + std::to_string(coordinates - kinks) +
                " coordinates (" + std::to_string(kinks) + " straddle a ReLU kink)" + (ok ? "" : "; worst " + where)};
}

Check distributions_check() {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 10.0);
    double softmax_err = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        Matrixd x(1 + trial % 5, 1 + trial % 17);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
        const auto p = softmax_rows(x);
        softmax_err = std::max(softmax_err, (p.rowwise().sum().array() - 1.0).abs().maxCoeff());
    }
    ModelConfig c;
    c.d = 16;
    c.heads = 4;
    c.ffn_hidden = 32;
    c.frame_length = 9;
    c.vocab_size = 40;
    Rng init(12);
    const auto state = ModelState<double>::initialize(c, init);
    std::uniform_int_distribution<TokenId> id(0, 39);
    double attention_err = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<TokenId> ids(9);
        for (auto& i : ids) i = id(rng);
        Tape<double> t(false);
        std::vector<Matrixd> weights;
        attention(t, state, embed(t, state, std::span<const TokenId>(ids)), 0, &weights);
        for (const auto& w : weights) {
            attention_err = std::max(attention_err, (w.rowwise().sum().array() - 1.0).abs().maxCoeff());
        }
    }
    return {softmax_err <= 1e-6 && attention_err <= 1e-6, "softmax and attention rows sum to one (1000 inputs each)",
            "worst deviation softmax " + std::to_string(softmax_err) + ", attention " + std::to_string(attention_err)};
}

Check levenshtein_check() {
    std::mt19937_64 rng(13);
    std::size_t violations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const auto a = testing::random_string(rng, 8);
        const auto b = testing::random_string(rng, 8);
        const auto c = testing::random_string(rng, 8);
        const auto ab = levenshtein(a, b);
        const bool ok = levenshtein(a, a) == 0 && (ab == 0) == (a == b) && ab == levenshtein(b, a) &&
                        levenshtein(a, c) <= ab + levenshtein(b, c) && ab == testing::recursive_edit_distance(a, b);
        violations += !ok;
    }
    const auto kitten = levenshtein("kitten", "sitting");
    return {violations == 0 && kitten == 3, "edit distance axioms (10k pairs) and kitten/sitting",
            std::to_string(violations) + " violations, kitten/sitting = " + std::to_string(kitten)};
}

Check parsing_accuracy_check() {
    std::mt19937_64 rng(14);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = std::uniform_int_distribution<int>(1, 20)(rng);
        const int groups = std::uniform_int_distribution<int>(1, 6)(rng);
        std::uniform_int_distribution<int> g(0, groups - 1);
        Assignment truth, predicted;
        for (int i = 1; i <= n; ++i) {
            truth[i] = "t" + std::to_string(g(rng));
            predicted[i] = "p" + std::to_string(g(rng));
        }
        mismatches += parsing_accuracy(predicted, truth) != testing::brute_force_pa(predicted, truth);
    }
    const Assignment truth{{1, "e1"}, {2, "e2"}, {3, "e2"}};
    const Assignment predicted{{1, "e1"}, {2, "e4"}, {3, "e5"}};
    const double fixture = parsing_accuracy(predicted, truth);
    return {mismatches == 0 && fixture == 1.0 / 3.0, "parsing accuracy against the set-equality oracle (1000 cases)",
            std::to_string(mismatches) + " disagreements, three-message fixture = " + std::to_string(fixture)};
}

Check monotonicity_check() {
    const auto vocab = Vocabulary::from_regular_tokens({"a", "b", "c", "d", "e", "f", "g", "h"});
    std::mt19937_64 data(15);
    std::uniform_int_distribution<int> pick(0, 7), length(1, 6);
    std::size_t violations = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        auto c = testing::small_model(16);
        c.vocab_size = static_cast<int>(vocab.size());
        c.frame_length = 8;
        Rng init(1000 + trial);
        const auto state = ModelState<float>::initialize(c, init);
        TokenList tokens;
        for (int i = length(data); i > 0; --i) tokens.push_back(vocab.decode(4 + pick(data)));
        const auto ranks = token_ranks(frame(tokens, 7, vocab), state);
        auto previous = constant_tokens(ranks, 0);
        for (int eps = 1; eps <= c.vocab_size + 1; ++eps) {
            const auto now = constant_tokens(ranks, eps);
            for (std::size_t i = 0; i < now.size(); ++i) violations += previous[i] && !now[i];
            previous = now;
        }
    }
    return {violations == 0, "constant-token sets nest as epsilon grows (100 random models)",
            std::to_string(violations) + " violations"};
}

Check persistence_check() {
    auto c = testing::small_model(16);
    c.blocks = 2;
    const auto vocab = Vocabulary::from_regular_tokens({"alpha", "beta", "gamma", "\xce\xb4"});
    c.vocab_size = static_cast<int>(vocab.size());
    c.frame_length = 7;
    c.epsilon = 4;
    Rng init(16);
    const auto state = ModelState<float>::initialize(c, init);
    const auto bytes = serialize_model(state, vocab);
    const auto loaded = deserialize_model(bytes);
    bool same = loaded.vocab == vocab && serialize_model(loaded.state, loaded.vocab) == bytes;
    for (const auto& p : state.params) {
        const auto& q = loaded.state.params.at(p.name).value;
        same = same && q.size() == p.value.size() &&
               std::memcmp(q.data(), p.value.data(), sizeof(float) * static_cast<std::size_t>(q.size())) == 0;
    }
    return {same, "archive round trip is bitwise", std::to_string(bytes.size()) + " bytes"};
}

struct RunArtifacts {
    std::string archive;
    std::string templates;
};

RunArtifacts seeded_run() {
    const auto records = testing::synthetic_corpus(testing::five_statements(), 20, 17);
    DatasetConfig config;
    config.epochs = 2;
    config.epsilon = 3;
    auto base = testing::small_model(16);
    base.seed = kDefaultSeed;
    const auto fitted = fit_parser(records, config, base);
    const auto parsed = parse_corpus(records, fitted.state, fitted.vocab, config);
    std::ostringstream templates;
    write_template_csv(templates, parsed.store);
    return {serialize_model(fitted.state, fitted.vocab), templates.str()};
}

Check determinism_check() {
    const auto a = seeded_run();
    const auto b = seeded_run();
    return {a.archive == b.archive && a.templates == b.templates, "two seed-7 runs give identical outputs",
            std::string("archives ") + (a.archive == b.archive ? "identical" : "differ") + ", template lists " +
                (a.templates == b.templates ? "identical" : "differ")};
}

Outcome criterion_properties() {
    const std::vector<std::function<Check()>> checks{gradient_check,  distributions_check, levenshtein_check,
                                                     parsing_accuracy_check, monotonicity_check, persistence_check,
                                                     determinism_check};
    std::size_t passed = 0;
    std::vector<std::string> notes;
    for (const auto& run : checks) {
        Check c;
        try {
            c = run();
        } catch (const std::exception& e) {
            c = {false, "check threw", e.what()};
        }
        passed += c.ok;
        notes.push_back(std::string(c.ok ? "ok   " : "FAIL ") + c.name + ": " + c.detail);
    }
    return {passed == checks.size() ? Status::pass : Status::fail,
            std::to_string(passed) + "/" + std::to_string(checks.size()) + " properties hold", notes};
}

// ---------------------------------------------------------------------------
// Synthetic oracle

Outcome criterion_synthetic() {
    const auto statements = testing::five_statements();
    // Train on one draw and parse a second draw whose variable values the
    // model has never seen.
    const auto training = testing::synthetic_corpus(statements, 100, 21);
    const auto fresh = testing::synthetic_corpus(statements, 40, 22);
    DatasetConfig config;
    config.name = "synthetic";
    config.epochs = 30;
    config.epsilon = 3;
    ModelConfig base;
    base.d = 64;
    base.heads = 4;
    base.ffn_hidden = 128;
    base.seed = kDefaultSeed;
    const auto start = std::chrono::steady_clock::now();
    const auto fitted = fit_parser(training, config, base);
    const auto parsed = parse_corpus(fresh, fitted.state, fitted.vocab, config);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto report = evaluate("synthetic", parsed.messages, fresh, Tokenizer(config.tokenization_filter));

    std::size_t exact = 0;
    std::map<std::string, std::string> wrong;
    for (std::size_t i = 0; i < fresh.size(); ++i) {
        if (parsed.messages[i].template_text == *fresh[i].truth_template) {
            ++exact;
        } else {
            wrong.emplace(*fresh[i].truth_template, parsed.messages[i].template_text);
        }
    }
    std::vector<std::string> notes;
    for (const auto& [truth, got] : wrong) notes.push_back("expected '" + truth + "', got '" + got + "'");
    const bool ok = report.parsing_accuracy == 1.0 && exact == fresh.size();
    return {ok ? Status::pass : Status::fail,
            "5 statements, " + std::to_string(fresh.size()) + " unseen messages: PA " + fixed(report.parsing_accuracy) +
                ", exact templates " + std::to_string(exact) + "/" + std::to_string(fresh.size()) + ", templates " +
                std::to_string(parsed.store.size()) + " (" + fixed(seconds, 1) + " s)",
            notes};
}

struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    log::set_min_level(std::getenv("NULOG_ACCEPTANCE_VERBOSE") ? log::Level::info : log::Level::warn);
    const std::vector<Criterion> criteria{
        {1, "Apache parsing accuracy", [] { return pa_gate("Apache", 0.99, false, 300); }},
        {2, "HDFS parsing accuracy", [] { return pa_gate("HDFS", 0.95, true); }},
        {3, "BGL parsing accuracy", [] { return pa_gate("BGL", 0.93, true); }},
        {4, "HPC parsing accuracy", [] { return pa_gate("HPC", 0.88, false); }},
        {5, "median parsing accuracy over ten systems", criterion_median_pa},
        {6, "template edit distance", criterion_edit_distance},
        {7, "anomaly detection on BGL", criterion_anomaly},
        {8, "property suite", criterion_properties},
        {9, "synthetic template recovery", criterion_synthetic},
    };

    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        try {
            std::size_t used = 0;
            const int id = std::stoi(argv[i], &used);
            if (used != std::strlen(argv[i]) || id < 1 || id > static_cast<int>(criteria.size())) throw std::out_of_range("");
            selected.push_back(id);
        } catch (const std::exception&) {
            std::cerr << "usage: " << argv[0] << " [criterion 1-" << criteria.size() << "]...\n";
            return 2;
        }
    }
    if (selected.empty()) {
        for (const auto& c : criteria) selected.push_back(c.id);
    }

    int failed = 0, skipped = 0;
    for (int id : selected) {
        const auto& c = criteria[static_cast<std::size_t>(id - 1)];
        Outcome o;
        try {
            o = c.run();
        } catch (const Error& e) {
            o = {Status::fail, std::string("error: ") + e.what(), {}};
        }
        const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
        std::cout << "[" << tag << "] criterion " << c.id << " (" << c.title << "): " << o.detail << "\n";
        for (const auto& n : o.notes) std::cout << "       " << n << "\n";
        std::cout.flush();
        failed += o.status == Status::fail;
        skipped += o.status == Status::skip;
    }
    if (failed) return 1;
    if (skipped == static_cast<int>(selected.size())) return 77;
    return 0;
}
