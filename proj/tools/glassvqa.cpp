// Pipeline orchestrator. Exit codes: 0 success, 1 at least one per-item
// failure, 2 configuration or invocation error. All outputs land under the
// --out directory; the only other write target is the configured cache_dir.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "glassvqa/glassvqa.hpp"

namespace fs = std::filesystem;
using namespace glassvqa;

namespace {

struct CliArgs {
    std::string config;
    std::string dataset;
    std::string out;
    std::string mode = "full_pipeline";
    std::string graph_id;
    int shots = -1;
    int jobs = -1;
    bool replay_only = false;
    long long seed = -1;
};

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("failed writing " + path.string());
}

RunConfig load_config(const CliArgs& args) {
    if (args.config.empty()) throw ConfigError("--config is required");
    RunConfig cfg = RunConfig::load(args.config);
    if (args.shots >= 0) cfg.abduction.shots = args.shots;
    if (args.jobs >= 1) cfg.jobs = args.jobs;
    if (args.replay_only) cfg.replay_only = true;
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
    cfg.validate();
    return cfg;
}

std::vector<QaInstance> load_required_dataset(const CliArgs& args) {
    if (args.dataset.empty()) throw ConfigError("--dataset is required for this command");
    try {
        return load_dataset(args.dataset);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    } catch (const SchemaError& e) {
        throw ConfigError(std::string("dataset ") + args.dataset + ": " + e.what());
    }
}

fs::path out_dir(const CliArgs& args) {
    if (args.out.empty()) throw ConfigError("--out is required for this command");
    fs::create_directories(args.out);
    return args.out;
}

// Bounded pool over instance indices; result slots keep dataset order.
template <typename Fn>
void for_each_instance(std::size_t count, int jobs, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            fn(i);
        }
    };
    int n = std::min<int>(jobs, static_cast<int>(count));
    if (n <= 1) {
        worker();
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
}

int report_failures(const std::vector<std::pair<std::string, std::string>>& failures,
                    std::size_t total) {
    if (failures.empty()) return 0;
    for (const auto& [id, what] : failures) std::cerr << "failed " << id << ": " << what << "\n";
    std::cerr << failures.size() << " of " << total << " items failed\n";
    return 1;
}

int cmd_propose(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    auto dataset = load_required_dataset(args);
    auto dir = out_dir(args);
    auto backends = make_backends(cfg, dataset);
    auto pipe = make_pipeline_config(cfg);

    std::vector<std::string> lines(dataset.size());
    std::vector<std::pair<std::string, std::string>> failures_by_index(dataset.size());
    for_each_instance(dataset.size(), cfg.jobs, [&](std::size_t i) {
        const QaInstance& inst = dataset[i];
        try {
            auto candidates = candidates_for(inst, pipe.abduction, *backends.text, pipe.exemplars,
                                             pipe.templates);
            nlohmann::json props = nlohmann::json::array();
            for (const auto& cand : candidates) {
                auto prop = propose_conditions(inst.question, cand, pipe.abduction,
                                               *backends.text, pipe.exemplars, pipe.templates);
                nlohmann::json conditions = nlohmann::json::array();
                for (const auto& c : prop.conditions) {
                    conditions.push_back({{"id", c.id}, {"statement", c.statement}});
                }
                nlohmann::json edges = nlohmann::json::array();
                for (const auto& e : prop.dependency_edges) {
                    edges.push_back({{"from", e.from}, {"to", e.to}});
                }
                props.push_back({{"proposal_id", prop.id},
                                 {"answer", prop.answer.text},
                                 {"answer_source", to_string(prop.answer.source)},
                                 {"conditions", conditions},
                                 {"edges", edges},
                                 {"serialized", serialize_proposal(prop)}});
            }
            lines[i] = nlohmann::json{{"id", inst.id}, {"proposals", props}}.dump();
        } catch (const Error& e) {
            failures_by_index[i] = {inst.id, e.what()};
            lines[i] = nlohmann::json{{"id", inst.id}, {"error", e.what()}}.dump();
        }
    });

    std::string body;
    for (const auto& l : lines) body += l + "\n";
    write_file(dir / "proposals.jsonl", body);

    std::vector<std::pair<std::string, std::string>> failures;
    for (auto& f : failures_by_index) {
        if (!f.first.empty()) failures.push_back(std::move(f));
    }
    return report_failures(failures, dataset.size());
}

int cmd_clues(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    auto dataset = load_required_dataset(args);
    auto dir = out_dir(args);
    auto backends = make_backends(cfg, dataset);

    std::vector<std::string> lines(dataset.size());
    std::vector<std::pair<std::string, std::string>> failures_by_index(dataset.size());
    for_each_instance(dataset.size(), cfg.jobs, [&](std::size_t i) {
        const QaInstance& inst = dataset[i];
        try {
            auto clues = get_clues(inst, cfg.clue_source, backends.clue.get());
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& c : clues) {
                arr.push_back(
                    {{"id", c.id}, {"statement", c.statement}, {"origin", to_string(c.origin)}});
            }
            lines[i] = nlohmann::json{{"id", inst.id}, {"clues", arr}}.dump();
        } catch (const Error& e) {
            failures_by_index[i] = {inst.id, e.what()};
            lines[i] = nlohmann::json{{"id", inst.id}, {"error", e.what()}}.dump();
        }
    });

    std::string body;
    for (const auto& l : lines) body += l + "\n";
    write_file(dir / "clues.jsonl", body);

    std::vector<std::pair<std::string, std::string>> failures;
    for (auto& f : failures_by_index) {
        if (!f.first.empty()) failures.push_back(std::move(f));
    }
    return report_failures(failures, dataset.size());
}

int cmd_reason(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    auto dataset = load_required_dataset(args);
    auto dir = out_dir(args);
    auto backends = make_backends(cfg, dataset);
    auto pipe = make_pipeline_config(cfg);

    PipelineResult result = run_pipeline(dataset, pipe, backends.pipeline());

    std::string body;
    for (const auto& item : result.items) body += outcome_to_json(item).dump() + "\n";
    write_file(dir / "results.jsonl", body);

    for (const auto& item : result.items) {
        if (!item.graph || !item.prediction) continue;
        write_file(dir / "graphs" / (item.result.id + ".dot"), graph_to_dot(*item.graph));
        write_file(dir / "graphs" / (item.result.id + ".json"),
                   graph_to_json(*item.graph, *item.prediction).dump(2) + "\n");
    }

    std::vector<std::pair<std::string, std::string>> failures;
    for (const auto& item : result.items) {
        if (!item.prediction) failures.emplace_back(item.result.id, item.result.note);
    }
    return report_failures(failures, dataset.size());
}

int cmd_eval(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    auto dataset = load_required_dataset(args);
    auto dir = out_dir(args);
    auto backends = make_backends(cfg, dataset);
    AblationMode mode = ablation_mode_from_string(args.mode);

    Metrics metrics;
    std::vector<std::pair<std::string, std::string>> failures;
    if (mode == AblationMode::full_pipeline) {
        auto pipe = make_pipeline_config(cfg);
        PipelineResult result = run_pipeline(dataset, pipe, backends.pipeline());
        metrics = result.metrics;
        for (const auto& item : result.items) {
            if (!item.prediction) failures.emplace_back(item.result.id, item.result.note);
        }
    } else {
        std::vector<QaInstance> exemplar_pool;
        if (cfg.exemplars_path) exemplar_pool = load_dataset(*cfg.exemplars_path);
        std::vector<std::pair<std::string, std::string>> excluded;
        metrics = run_ablation(dataset, mode, cfg.abduction.shots, *backends.text, exemplar_pool,
                               &excluded);
        for (const auto& [id, why] : excluded) {
            std::cerr << "excluded " << id << ": " << why << "\n";
        }
        for (const auto& r : metrics.per_item) {
            if (!r.note.empty()) failures.emplace_back(r.id, r.note);
        }
    }

    write_file(dir / "metrics.json", metrics_to_json(metrics).dump(2) + "\n");
    std::cout << report(metrics, ReportFormat::text);
    return report_failures(failures, dataset.size());
}

int cmd_export_graph(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    auto dataset = load_required_dataset(args);
    auto dir = out_dir(args);
    if (args.graph_id.empty()) throw ConfigError("--id is required for export-graph");

    const QaInstance* target = nullptr;
    for (const auto& inst : dataset) {
        if (inst.id == args.graph_id) target = &inst;
    }
    if (!target) throw ConfigError("instance id \"" + args.graph_id + "\" not in dataset");

    auto backends = make_backends(cfg, dataset);
    auto pipe = make_pipeline_config(cfg);
    ItemOutcome item = run_pipeline_instance(*target, pipe, backends.pipeline());
    if (!item.graph || !item.prediction) {
        std::cerr << "failed " << target->id << ": " << item.result.note << "\n";
        return 1;
    }
    write_file(dir / (target->id + ".dot"), graph_to_dot(*item.graph));
    write_file(dir / (target->id + ".json"),
               graph_to_json(*item.graph, *item.prediction).dump(2) + "\n");
    return 0;
}

int cmd_prep_train(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    auto dataset = load_required_dataset(args);
    auto dir = out_dir(args);

    std::vector<std::pair<std::string, std::string>> failures;
    bool needs_clues = std::any_of(dataset.begin(), dataset.end(), [](const QaInstance& i) {
        return !i.gold_clues || i.gold_clues->empty();
    });
    if (needs_clues) {
        auto backends = make_backends(cfg, dataset);
        if (backends.clue) {
            WeakSupervisionConfig wcfg;
            wcfg.jobs = cfg.jobs;
            auto ws = weak_supervise(dataset, *backends.clue, wcfg);
            dataset = std::move(ws.instances);
            failures = ws.failures;
        }
    }

    std::string body;
    for (const auto& inst : dataset) {
        if (!inst.gold_clues || inst.gold_clues->empty()) {
            failures.emplace_back(inst.id, "no clues available for training records");
            continue;
        }
        for (const auto& rec : permute_clue_records(inst, cfg.seed)) {
            body += nlohmann::json(rec).dump() + "\n";
        }
    }
    write_file(dir / "train_records.jsonl", body);

    nlohmann::json manifest{{"direct", training_manifest(TrainingStage::direct)},
                            {"two_stage", training_manifest(TrainingStage::two_stage)}};
    write_file(dir / "training_manifest.json", manifest.dump(2) + "\n");
    return report_failures(failures, dataset.size());
}

int cmd_cache_stats(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    ResponseCache cache(cfg.cache_dir);
    auto stats = cache.stats();
    std::cout << "entries " << stats.entries << " bytes " << stats.bytes << "\n";
    return 0;
}

int cmd_cache_clear(const CliArgs& args) {
    RunConfig cfg = load_config(args);
    ResponseCache cache(cfg.cache_dir);
    std::cout << "removed " << cache.clear() << " entries\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"neuro-symbolic question answering pipeline"};
    app.require_subcommand(1);

    CliArgs args;
    app.add_option("--config", args.config, "run configuration JSON");
    app.add_option("--dataset", args.dataset, "dataset JSONL");
    app.add_option("--out", args.out, "output directory");
    app.add_option("--mode", args.mode,
                   "question_only | clues | clues_plus_inferences | full_pipeline");
    app.add_option("--shots", args.shots, "in-context exemplar count override");
    app.add_option("--jobs", args.jobs, "worker pool size override");
    app.add_flag("--replay-only", args.replay_only, "serve every backend call from the cache");
    app.add_option("--seed", args.seed, "seed override");

    auto* propose = app.add_subcommand("propose", "write answer candidates and proposals");
    auto* clues = app.add_subcommand("clues", "write visual clues per instance");
    auto* reason = app.add_subcommand("reason", "run the full pipeline, write results and graphs");
    auto* eval = app.add_subcommand("eval", "score the dataset, write metrics");
    auto* exportg = app.add_subcommand("export-graph", "write one instance's reasoning graph");
    exportg->add_option("--id", args.graph_id, "instance id");
    auto* prep = app.add_subcommand("prep-train", "write training records and manifest");
    auto* cache = app.add_subcommand("cache", "cache maintenance");
    cache->require_subcommand(1);
    auto* cache_stats = cache->add_subcommand("stats", "print entry count and size");
    auto* cache_clear = cache->add_subcommand("clear", "remove every entry");
    for (auto* sub : {propose, clues, reason, eval, exportg, prep, cache}) sub->fallthrough();
    cache_stats->fallthrough();
    cache_clear->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (propose->parsed()) return cmd_propose(args);
        if (clues->parsed()) return cmd_clues(args);
        if (reason->parsed()) return cmd_reason(args);
        if (eval->parsed()) return cmd_eval(args);
        if (exportg->parsed()) return cmd_export_graph(args);
        if (prep->parsed()) return cmd_prep_train(args);
        if (cache->parsed()) {
            if (cache_stats->parsed()) return cmd_cache_stats(args);
            if (cache_clear->parsed()) return cmd_cache_clear(args);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
