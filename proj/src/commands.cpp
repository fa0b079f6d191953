#include "grn/commands.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "format.hpp"
#include "grn/centrality.hpp"
#include "grn/checkpoint.hpp"
#include "grn/errors.hpp"
#include "grn/gat.hpp"
#include "grn/gradcheck.hpp"
#include "grn/importance.hpp"
#include "grn/trainer.hpp"

namespace grn {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t ModelInitStream = 100;
constexpr const char* NetworkFile = "refNetwork.csv";
constexpr const char* ExpressionFile = "ExpressionData.csv";

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ResolutionError("cannot write " + path.string());
    }
    out << text;
}

void write_json(const fs::path& path, const nlohmann::json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ResolutionError("cannot open " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

RegulatoryNetwork read_network(const fs::path& path, const std::string& label, const AliasMap& aliases) {
    try {
        return parse_ref_network(read_text(path), label, aliases);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line());
    }
}

bool dropout_matches(const std::string& name, const std::string& variant) {
    const auto ends_with = [&](const char* suffix) { return name.ends_with(suffix); };
    if (variant == "none") {
        return !ends_with("-50") && !ends_with("-70");
    }
    return ends_with(("-" + variant).c_str());
}

bool glob_matches(const std::vector<std::string>& patterns, const std::string& name) {
    return std::any_of(patterns.begin(), patterns.end(),
                       [&](const std::string& p) { return fnmatch(p.c_str(), name.c_str(), 0) == 0; });
}

void load_expression(Sample& s, const RunConfig& config) {
    if (config.features != FeatureMode::ExpressionStats) {
        return;
    }
    const auto path = s.dir / ExpressionFile;
    if (!fs::exists(path)) {
        throw ResolutionError("expression features requested but " + path.string() + " is missing");
    }
    s.expression = parse_expression(read_text(path), config.aliases);
}

/// Concatenates cells of several matrices, rows ordered like the first one.
ExpressionMatrix concat_cells(const std::vector<Sample>& samples) {
    const auto& first = *samples.front().expression;
    std::vector<std::string> cells;
    std::vector<std::vector<double>> rows(first.n_genes());
    for (const auto& s : samples) {
        const auto& m = *s.expression;
        for (const auto& c : m.cells()) {
            cells.push_back(s.name + ":" + c);
        }
        for (std::size_t g = 0; g < first.n_genes(); ++g) {
            const auto idx = m.find(first.genes()[g]);
            if (!idx) {
                throw CoverageError("gene " + first.genes()[g] + " is missing from the expression of " + s.name);
            }
            const auto row = m.row(*idx);
            rows[g].insert(rows[g].end(), row.begin(), row.end());
        }
    }
    std::vector<double> values;
    for (const auto& r : rows) {
        values.insert(values.end(), r.begin(), r.end());
    }
    return ExpressionMatrix(first.genes(), std::move(cells), std::move(values));
}

RegulatoryNetwork combined_network(const std::vector<Sample>& samples, const std::string& label) {
    if (samples.size() == 1) {
        return samples.front().network.with_label(label);
    }
    std::vector<RegulatoryNetwork> nets;
    for (const auto& s : samples) {
        nets.push_back(s.network);
    }
    return aggregate(nets, label);
}

/// Per-sample runs, or a single pooled sample over the union of all edges.
std::vector<Sample> training_samples(const RunConfig& config) {
    auto samples = resolve_samples(config);
    if (!config.pool || samples.size() == 1) {
        return samples;
    }
    Sample pooled;
    pooled.name = "pooled";
    pooled.network = combined_network(samples, "pooled");
    if (config.features == FeatureMode::ExpressionStats) {
        pooled.expression = concat_cells(samples);
    }
    return {pooled};
}

ad::Tensor sample_features(const Sample& s, const RunConfig& config) {
    return build_features(s.network, s.expression ? &*s.expression : nullptr, config.features);
}

nlohmann::json model_json(const GatConfig& m) {
    return {{"hidden", m.hidden},
            {"heads", m.heads},
            {"embedding", m.embedding},
            {"out_heads", m.out_heads},
            {"scoring", std::string(to_string(m.scoring))},
            {"negative_slope", m.negative_slope},
            {"symmetrize", m.symmetrize}};
}

GatModel initial_model(std::size_t in_dim, const RunConfig& config, std::uint64_t run_seed) {
    Rng rng(Rng::derive(run_seed, ModelInitStream));
    return GatModel::init(in_dim, config.model, rng);
}

GatModel load_model(const fs::path& run_dir, std::size_t in_dim, const RunConfig& config) {
    const auto dir = run_dir / "checkpoint";
    if (!fs::exists(dir / "manifest.json")) {
        throw ResolutionError("missing checkpoint in " + run_dir.string() + " (run `train` first)");
    }
    return GatModel::from_parameters(in_dim, config.model, load_checkpoint(dir));
}

std::string loss_curve_csv(const TrainResult& r) {
    std::string out = "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < r.train_loss.size(); ++e) {
        out += std::to_string(e + 1) + "," + detail::format_double(r.train_loss[e]) + "," +
               detail::format_double(r.val_loss[e]) + "\n";
    }
    return out;
}

nlohmann::json split_json(const EdgeSplit& split, const RegulatoryNetwork& net) {
    const auto names = [&](const std::vector<EdgePair>& edges) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [u, v] : edges) {
            arr.push_back({net.name(u), net.name(v)});
        }
        return arr;
    };
    return {{"seed", split.seed},
            {"ratios", {split.ratios.train, split.ratios.val, split.ratios.test}},
            {"train_pos", names(split.train_pos)},
            {"val_pos", names(split.val_pos)},
            {"test_pos", names(split.test_pos)},
            {"val_neg", names(split.val_neg)},
            {"test_neg", names(split.test_neg)}};
}

struct RunRecord {
    std::string sample;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    Metrics metrics;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
};

nlohmann::json record_json(const RunRecord& r) {
    nlohmann::json doc = {{"sample", r.sample}, {"seed", r.seed}, {"status", r.ok ? "ok" : "failed"}};
    if (r.ok) {
        doc["metrics"] = to_json(r.metrics);
        doc["initial_train_loss"] = r.initial_loss;
        doc["final_train_loss"] = r.final_loss;
        doc["best_epoch"] = r.best_epoch;
        doc["epochs_run"] = r.epochs_run;
    } else {
        doc["error"] = r.error;
    }
    return doc;
}

nlohmann::json stats_json(std::vector<double> values) {
    if (values.empty()) {
        return nullptr;
    }
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (const double v : values) {
        sum += v;
    }
    const std::size_t n = values.size();
    const double median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    return {{"mean", sum / static_cast<double>(n)},
            {"median", median},
            {"min", values.front()},
            {"max", values.back()},
            {"n", n}};
}

nlohmann::json metric_summary(const std::vector<RunRecord>& records) {
    const std::vector<std::pair<const char*, double Metrics::*>> fields = {{"loss", &Metrics::loss},
                                                                            {"accuracy", &Metrics::accuracy},
                                                                            {"precision", &Metrics::precision},
                                                                            {"recall", &Metrics::recall},
                                                                            {"f1", &Metrics::f1}};
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [name, member] : fields) {
        std::vector<double> values;
        for (const auto& r : records) {
            if (r.ok) {
                values.push_back(r.metrics.*member);
            }
        }
        out[name] = stats_json(values);
    }
    return out;
}

/// Reference test-set figures for the HSC link-prediction task, shown next to ours.
nlohmann::json reference_metrics() {
    return {{"loss", 0.0168}, {"accuracy", 0.9609}, {"precision", 1.0}, {"recall", 0.9217}, {"f1", 0.9593}};
}

/// Runs jobs 0..n-1 on `workers` threads; each job owns its slot in the output.
template <typename Job>
void parallel_for(std::size_t n, std::size_t workers, Job job) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    std::atomic<std::size_t> next{0};
    auto loop = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            job(i);
        }
    };
    if (workers == 1) {
        loop();
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back(loop);
    }
    for (auto& t : pool) {
        t.join();
    }
}

std::string table_row(const std::string& sample, std::uint64_t seed, const Metrics& m) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4) << sample << " seed " << seed << ": loss " << m.loss << " acc "
        << m.accuracy << " precision " << m.precision << " recall " << m.recall << " f1 " << m.f1;
    return out.str();
}

} // namespace

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConflictError*>(&e) || dynamic_cast<const UniverseError*>(&e)) {
        return ExitDataConflict;
    }
    if (dynamic_cast<const ResolutionError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
        dynamic_cast<const DomainError*>(&e) || dynamic_cast<const CoverageError*>(&e)) {
        return ExitInputResolution;
    }
    return ExitInternal;
}

int run_guarded(const std::function<int()>& command, std::ostream& err) {
    try {
        return command();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

std::vector<Sample> resolve_samples(const RunConfig& config) {
    config.validate();
    std::vector<Sample> samples;
    const auto add = [&](const fs::path& dir, const fs::path& file, const std::string& name) {
        Sample s;
        s.name = name;
        s.dir = dir;
        s.network = read_network(file, name, config.aliases);
        load_expression(s, config);
        samples.push_back(std::move(s));
    };

    if (!config.network.empty()) {
        const fs::path file(config.network);
        if (!fs::is_regular_file(file)) {
            throw ResolutionError("network file " + file.string() + " does not exist");
        }
        const auto dir = file.has_parent_path() ? file.parent_path() : fs::path(".");
        const auto name = file.filename() == NetworkFile ? fs::absolute(dir).filename().string() : file.stem().string();
        add(dir, file, name);
        return samples;
    }
    if (config.dataset.empty()) {
        throw ResolutionError("no input: set data.dataset or data.network");
    }
    const fs::path root(config.dataset);
    if (!fs::is_directory(root)) {
        throw ResolutionError("dataset directory " + root.string() + " does not exist");
    }
    if (fs::is_regular_file(root / NetworkFile)) {
        add(root, root / NetworkFile, fs::absolute(root).lexically_normal().filename().string());
        return samples;
    }
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        const auto name = entry.path().filename().string();
        if (entry.is_directory() && fs::is_regular_file(entry.path() / NetworkFile) &&
            glob_matches(config.samples, name) && dropout_matches(name, config.dropout)) {
            dirs.push_back(entry.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
        add(d, d / NetworkFile, d.filename().string());
    }
    if (samples.empty()) {
        std::string patterns;
        for (const auto& pat : config.samples) {
            patterns += (patterns.empty() ? "" : " ") + pat;
        }
        throw ResolutionError("no samples in " + root.string() + " match '" + patterns + "' (dropout " +
                              config.dropout + ")");
    }
    return samples;
}

void write_echo(const fs::path& dir, const RunConfig& config) { write_text(dir / "run_config.ini", to_ini(config)); }

fs::path run_directory(const RunConfig& config, const std::string& sample, std::uint64_t seed) {
    return fs::path(config.out) / "runs" / sample / ("seed_" + std::to_string(seed));
}

int cmd_aggregate(const RunConfig& config, std::ostream& log) {
    const auto samples = resolve_samples(config);
    const auto net = combined_network(samples, "aggregate");
    const fs::path out(config.out);
    write_json(out / "aggregated.json", to_json(net));
    write_text(out / "aggregated.dot", to_dot(net));
    write_echo(out, config);
    log << "aggregated " << samples.size() << " sample(s): " << net.size() << " genes, " << net.edges().size()
        << " edges -> " << (out / "aggregated.json").string() << "\n";
    return ExitOk;
}

int cmd_metrics(const RunConfig& config, std::ostream& log) {
    const auto samples = resolve_samples(config);
    const auto net = combined_network(samples, "aggregate");
    CentralityOptions options;
    options.convention = config.convention;
    options.min_abs_weight = config.min_weight;
    const auto report = centrality_report(net, options);
    const fs::path out(config.out);
    const auto csv = to_csv(report);
    write_text(out / "centrality.csv", csv);
    write_json(out / "centrality.json", to_json(report));
    write_echo(out, config);
    log << csv;
    return ExitOk;
}

int cmd_train(const RunConfig& config, std::ostream& log) {
    const auto samples = training_samples(config);
    struct Job {
        std::size_t sample;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        for (std::size_t k = 0; k < config.seeds; ++k) {
            jobs.push_back({s, config.run_seed(k)});
        }
    }

    std::vector<RunRecord> records(jobs.size());
    parallel_for(jobs.size(), config.workers, [&](std::size_t i) {
        const auto& sample = samples[jobs[i].sample];
        auto& rec = records[i];
        rec.sample = sample.name;
        rec.seed = jobs[i].seed;
        const auto dir = run_directory(config, sample.name, rec.seed);
        try {
            const auto features = sample_features(sample, config);
            const auto tc = config.train_config(rec.seed);
            const auto model = initial_model(features.shape()[1], config, rec.seed);
            const auto result = train(model, sample.network, features, tc);
            rec.metrics = evaluate(result.model, result.split, features, tc.threshold);
            rec.initial_loss = result.train_loss.front();
            rec.final_loss = result.train_loss.back();
            rec.best_epoch = result.best_epoch;
            rec.epochs_run = result.train_loss.size();
            rec.ok = true;

            write_text(dir / "loss_curve.csv", loss_curve_csv(result));
            write_json(dir / "split.json", split_json(result.split, sample.network));
            auto doc = record_json(rec);
            doc["early_stopped"] = result.early_stopped;
            doc["config"] = to_json(tc);
            write_json(dir / "metrics.json", doc);
            const auto params = result.model.named_parameters();
            save_checkpoint(dir / "checkpoint", params,
                            {{"seed", rec.seed},
                             {"step", rec.epochs_run},
                             {"best_epoch", rec.best_epoch},
                             {"sample", sample.name},
                             {"in_dim", features.shape()[1]},
                             {"features", std::string(to_string(config.features))},
                             {"model", model_json(config.model)}});
        } catch (const std::exception& e) {
            rec.ok = false;
            rec.error = e.what();
            write_json(dir / "metrics.json", record_json(rec));
        }
        // The per-run echo reproduces just this run.
        auto echo = config;
        echo.seed = rec.seed;
        echo.seeds = 1;
        echo.workers = 1;
        if (!config.pool) {
            echo.samples = {sample.name};
        }
        write_echo(dir, echo);
    });

    nlohmann::json runs = nlohmann::json::array();
    std::size_t failed = 0;
    for (const auto& r : records) {
        runs.push_back(record_json(r));
        failed += r.ok ? 0 : 1;
        log << (r.ok ? table_row(r.sample, r.seed, r.metrics) : r.sample + " seed " + std::to_string(r.seed) +
                                                                     ": FAILED " + r.error)
            << "\n";
    }
    nlohmann::json per_sample = nlohmann::json::object();
    for (const auto& s : samples) {
        std::vector<RunRecord> subset;
        std::copy_if(records.begin(), records.end(), std::back_inserter(subset),
                     [&](const RunRecord& r) { return r.sample == s.name; });
        per_sample[s.name] = metric_summary(subset);
    }
    const nlohmann::json summary = {{"master_seed", config.seed},
                                    {"runs_total", records.size()},
                                    {"runs_failed", failed},
                                    {"runs", runs},
                                    {"per_sample", per_sample},
                                    {"overall", metric_summary(records)},
                                    {"reference", reference_metrics()}};
    write_json(fs::path(config.out) / "summary.json", summary);
    write_echo(config.out, config);

    const auto overall = metric_summary(records);
    if (!overall["f1"].is_null()) {
        log << std::fixed << std::setprecision(4) << "median f1 " << overall["f1"]["median"].get<double>()
            << " (reference 0.9593), median precision " << overall["precision"]["median"].get<double>()
            << " (reference 1.0)\n";
    }
    if (failed == records.size()) {
        log << "all runs failed\n";
        return ExitAllRunsFailed;
    }
    return ExitOk;
}

int cmd_evaluate(const RunConfig& config, std::ostream& log) {
    const auto samples = training_samples(config);
    std::vector<RunRecord> records;
    for (const auto& sample : samples) {
        const auto features = sample_features(sample, config);
        for (std::size_t k = 0; k < config.seeds; ++k) {
            const auto seed = config.run_seed(k);
            const auto dir = run_directory(config, sample.name, seed);
            const auto model = load_model(dir, features.shape()[1], config);
            const auto split = split_edges(sample.network, config.ratios, seed);
            RunRecord rec;
            rec.sample = sample.name;
            rec.seed = seed;
            rec.ok = true;
            rec.metrics = evaluate(model, split, features, config.threshold);
            write_json(dir / "evaluation.json", {{"sample", rec.sample}, {"seed", seed}, {"metrics", to_json(rec.metrics)}});
            log << table_row(rec.sample, seed, rec.metrics) << "\n";
            records.push_back(rec);
        }
    }
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : records) {
        runs.push_back({{"sample", r.sample}, {"seed", r.seed}, {"metrics", to_json(r.metrics)}});
    }
    write_json(fs::path(config.out) / "evaluation_summary.json",
               {{"master_seed", config.seed},
                {"threshold", config.threshold},
                {"runs", runs},
                {"overall", metric_summary(records)},
                {"reference", reference_metrics()}});
    write_echo(config.out, config);
    return ExitOk;
}

int cmd_importance(const RunConfig& config, std::ostream& log) {
    const auto samples = training_samples(config);
    const std::optional<std::size_t> layer =
        config.layer < 0 ? std::nullopt : std::optional<std::size_t>(static_cast<std::size_t>(config.layer));
    const fs::path root = fs::path(config.out) / "importance";
    for (const auto& sample : samples) {
        const auto features = sample_features(sample, config);
        std::vector<ImportanceReport> reports;
        std::vector<std::uint64_t> seeds;
        for (std::size_t k = 0; k < config.seeds; ++k) {
            const auto seed = config.run_seed(k);
            GatModel model;
            if (config.untrained) {
                model = initial_model(features.shape()[1], config, seed);
                model.zero_attention();
            } else {
                model = load_model(run_directory(config, sample.name, seed), features.shape()[1], config);
            }
            const auto att = extract_attention(model, sample.network, features);
            auto report = node_importance(att, sample.network, layer);
            report.provenance = sample.name + "/seed_" + std::to_string(seed) + (config.untrained ? "/untrained" : "");
            const auto dir = root / sample.name / ("seed_" + std::to_string(seed));
            write_text(dir / "importance.csv", to_csv(report));
            write_text(dir / "attention.csv", attention_csv(att));
            reports.push_back(std::move(report));
            seeds.push_back(seed);
        }

        const auto& first = reports.front();
        const auto top = std::min_element(first.genes.begin(), first.genes.end(),
                                          [](const auto& a, const auto& b) { return a.rank < b.rank; });
        log << sample.name << ": top gene " << top->gene << " (seed " << seeds.front() << ")\n";
        if (reports.size() < 2) {
            continue;
        }
        const auto summary = importance_stability(reports);
        auto doc = to_json(summary);
        doc["seeds"] = seeds;
        doc["sample"] = sample.name;
        const auto it = std::find(summary.genes.begin(), summary.genes.end(), config.focus);
        if (it != summary.genes.end()) {
            const double rank = summary.median_rank[static_cast<std::size_t>(it - summary.genes.begin())];
            doc["focus"] = {{"gene", config.focus}, {"median_rank", rank}};
            log << sample.name << ": " << config.focus << " median rank " << rank << " over " << reports.size()
                << " seeds, median spearman " << summary.median_spearman << "\n";
        }
        write_json(root / sample.name / "stability.json", doc);
    }
    write_echo(root, config);
    return ExitOk;
}

int cmd_gradcheck(const RunConfig& config, std::ostream& log) {
    GradcheckOptions options;
    options.seed = config.seed;
    const auto results = run_gradcheck(options);
    nlohmann::json ops = nlohmann::json::array();
    bool all = true;
    for (const auto& r : results) {
        log << std::left << std::setw(28) << r.op << std::right << std::setw(4) << r.instances << "  "
            << std::scientific << std::setprecision(2) << r.max_error << "  " << (r.passed ? "PASS" : "FAIL") << "\n";
        ops.push_back({{"op", r.op}, {"instances", r.instances}, {"max_error", r.max_error}, {"passed", r.passed}});
        all = all && r.passed;
    }
    const fs::path out(config.out);
    write_json(out / "gradcheck.json", {{"seed", config.seed}, {"tolerance", options.tolerance}, {"ops", ops}});
    write_echo(out, config);
    return all ? ExitOk : ExitInternal;
}

int cmd_export(const RunConfig& config, std::ostream& log) {
    const auto samples = resolve_samples(config);
    const fs::path out = fs::path(config.out) / "export";
    auto emit = [&](const RegulatoryNetwork& net, const std::string& name) {
        write_json(out / (name + ".json"), to_json(net));
        write_text(out / (name + ".dot"), to_dot(net));
        write_text(out / (name + ".csv"), to_ref_csv(net));
        log << "exported " << name << "\n";
    };
    for (const auto& s : samples) {
        emit(s.network, s.name);
    }
    if (samples.size() > 1) {
        emit(combined_network(samples, "aggregate"), "aggregate");
    }
    write_echo(out, config);
    return ExitOk;
}

} // namespace grn
