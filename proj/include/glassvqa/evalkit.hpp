#pragma once
// Evaluation: answer matching, the single-call ablation protocol, the full
// pipeline runner, and report rendering.

#include <algorithm>
#include <atomic>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "glassvqa/abduction.hpp"
#include "glassvqa/backend.hpp"
#include "glassvqa/canonical.hpp"
#include "glassvqa/clues.hpp"
#include "glassvqa/dataset.hpp"
#include "glassvqa/errors.hpp"
#include "glassvqa/reasoner.hpp"
#include "glassvqa/types.hpp"

namespace glassvqa {

// Canonical equality after dropping one leading article. No numeral
// normalization: ("two", "2") stays a mismatch.
inline bool match_answer(const std::string& predicted, const std::string& gold) {
    auto strip_article = [](std::string s) {
        for (const char* art : {"a ", "an ", "the "}) {
            std::size_t n = std::string(art).size();
            if (s.size() > n && s.rfind(art, 0) == 0) return s.substr(n);
        }
        return s;
    };
    return strip_article(canonicalize(predicted)) == strip_article(canonicalize(gold));
}

enum class AblationMode { question_only, clues, clues_plus_inferences, full_pipeline };

inline std::string to_string(AblationMode m) {
    switch (m) {
        case AblationMode::question_only: return "question_only";
        case AblationMode::clues: return "clues";
        case AblationMode::clues_plus_inferences: return "clues_plus_inferences";
        default: return "full_pipeline";
    }
}

inline AblationMode ablation_mode_from_string(const std::string& s) {
    if (s == "question_only") return AblationMode::question_only;
    if (s == "clues") return AblationMode::clues;
    if (s == "clues_plus_inferences") return AblationMode::clues_plus_inferences;
    if (s == "full_pipeline") return AblationMode::full_pipeline;
    throw ConfigError("unknown mode: " + s);
}

struct ItemResult {
    std::string id;
    std::string predicted;
    std::string gold;
    bool match = false;
    std::string note;  // error text when the item failed mid-pipeline

    bool operator==(const ItemResult&) const = default;
};

struct Metrics {
    int total = 0;
    int correct = 0;
    double accuracy = 0.0;  // 0 when total is 0
    std::vector<ItemResult> per_item;

    static Metrics from_items(std::vector<ItemResult> items) {
        Metrics m;
        m.per_item = std::move(items);
        m.total = static_cast<int>(m.per_item.size());
        for (const auto& r : m.per_item) m.correct += r.match ? 1 : 0;
        m.accuracy = m.total ? static_cast<double>(m.correct) / m.total : 0.0;
        return m;
    }
};

namespace detail {

inline std::string join_semicolon(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += "; ";
        out += v[i];
    }
    return out;
}

// Shared by exemplar and target rendering so both carry the same fields.
inline std::string ablation_block(const QaInstance& inst, AblationMode mode) {
    std::string out;
    if (mode == AblationMode::clues || mode == AblationMode::clues_plus_inferences) {
        out += "Clues: " + join_semicolon(inst.gold_clues.value_or(std::vector<std::string>{})) +
               "\n";
    }
    if (mode == AblationMode::clues_plus_inferences) {
        out += "Inferences: " +
               join_semicolon(inst.gold_inferences.value_or(std::vector<std::string>{})) + "\n";
    }
    out += "Question: " + inst.question + "\nAnswer:";
    return out;
}

inline void require_mode_fields(const QaInstance& inst, AblationMode mode) {
    if (!inst.gold_answer || inst.gold_answer->empty()) {
        throw MissingGoldError("instance " + inst.id + " lacks a gold answer");
    }
    if ((mode == AblationMode::clues || mode == AblationMode::clues_plus_inferences) &&
        (!inst.gold_clues || inst.gold_clues->empty())) {
        throw MissingGoldError("instance " + inst.id + " lacks gold clues");
    }
    if (mode == AblationMode::clues_plus_inferences &&
        (!inst.gold_inferences || inst.gold_inferences->empty())) {
        throw MissingGoldError("instance " + inst.id + " lacks gold inferences");
    }
}

inline std::string first_answer_line(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.rfind("- ", 0) == 0) t = trim(t.substr(2));
        if (!t.empty()) return t;
    }
    return "";
}

}  // namespace detail

inline std::string build_ablation_prompt(const QaInstance& target, AblationMode mode,
                                         const std::vector<QaInstance>& exemplars) {
    std::string out = "Answer the question about an image. Reply with only the answer.\n\n";
    for (const auto& ex : exemplars) {
        out += detail::ablation_block(ex, mode) + " " + *ex.gold_answer + "\n\n";
    }
    out += detail::ablation_block(target, mode);
    return out;
}

// One backend call per instance with the mode's fields in the prompt.
// Exemplars come from the caller and must never overlap the eval set.
// Instances missing a required gold field are excluded from the total and
// reported through `excluded`.
inline Metrics run_ablation(const std::vector<QaInstance>& dataset, AblationMode mode, int shots,
                            TextGenBackend& backend, const std::vector<QaInstance>& exemplar_pool,
                            std::vector<std::pair<std::string, std::string>>* excluded = nullptr) {
    if (mode == AblationMode::full_pipeline) {
        throw ConfigError("full_pipeline is not an ablation mode; use run_pipeline");
    }
    if (shots < 0) throw ConfigError("shots must be >= 0");
    if (static_cast<int>(exemplar_pool.size()) < shots) {
        throw ConfigError("need " + std::to_string(shots) + " exemplars, have " +
                          std::to_string(exemplar_pool.size()));
    }
    std::vector<QaInstance> exemplars(exemplar_pool.begin(), exemplar_pool.begin() + shots);
    for (const auto& ex : exemplars) detail::require_mode_fields(ex, mode);

    std::vector<ItemResult> items;
    for (const auto& inst : dataset) {
        try {
            detail::require_mode_fields(inst, mode);
        } catch (const MissingGoldError& e) {
            if (excluded) excluded->emplace_back(inst.id, e.what());
            continue;
        }
        TextGenRequest req;
        req.prompt = build_ablation_prompt(inst, mode, exemplars);
        ItemResult r;
        r.id = inst.id;
        r.gold = canonicalize(*inst.gold_answer);
        try {
            auto resp = backend.generate(req);
            r.predicted = canonicalize(detail::first_answer_line(resp.text));
            r.match = match_answer(r.predicted, *inst.gold_answer);
        } catch (const Error& e) {
            r.note = e.what();
        }
        items.push_back(std::move(r));
    }
    return Metrics::from_items(std::move(items));
}

struct PipelineBackends {
    TextGenBackend* text = nullptr;
    ClueGenBackend* clue = nullptr;
    NliBackend* nli = nullptr;
};

struct PipelineConfig {
    AbductionConfig abduction;
    FulfillmentConfig fulfillment;
    ClueSource clue_source = ClueSource::gold;
    bool gpt_final = false;  // final selection delegated to the text backend
    int jobs = 1;
    std::vector<FewShotExemplar> exemplars;
    PromptTemplates templates = PromptTemplates::defaults();

    void validate() const {
        abduction.validate();
        fulfillment.validate();
        if (jobs < 1) throw ValidationError("pipeline: jobs must be >= 1");
    }
};

struct ItemOutcome {
    ItemResult result;
    std::optional<Prediction> prediction;
    std::optional<ReasoningGraph> graph;
};

struct PipelineResult {
    Metrics metrics;
    std::vector<ItemOutcome> items;  // dataset order
};

namespace detail {

inline std::string tally_selection_prompt(const QaInstance& inst, const Prediction& pred) {
    std::string out =
        "Candidate answers were scored by counting reasoning paths. Choose the"
        " final answer. Reply with only the answer.\n\nTally:\n";
    for (const auto& [text, t] : pred.tally) {
        out += text + ": strong=" + std::to_string(t.strong) + " weak=" + std::to_string(t.weak) +
               "\n";
    }
    out += "Question: " + inst.question + "\nAnswer:";
    return out;
}

}  // namespace detail

inline ItemOutcome run_pipeline_instance(const QaInstance& inst, const PipelineConfig& cfg,
                                         const PipelineBackends& backends) {
    ItemOutcome out;
    out.result.id = inst.id;
    if (inst.gold_answer) out.result.gold = canonicalize(*inst.gold_answer);
    try {
        auto clues = get_clues(inst, cfg.clue_source, backends.clue);
        auto candidates =
            candidates_for(inst, cfg.abduction, *backends.text, cfg.exemplars, cfg.templates);

        std::vector<AbductionProposal> proposals;
        std::vector<DynamicCondition> all_conditions;
        for (const auto& cand : candidates) {
            auto prop = propose_conditions(inst.question, cand, cfg.abduction, *backends.text,
                                           cfg.exemplars, cfg.templates);
            for (const auto& c : prop.conditions) all_conditions.push_back(c);
            proposals.push_back(std::move(prop));
        }

        auto fulfillments =
            fulfill_conditions(clues, all_conditions, cfg.fulfillment, *backends.nli);
        for (const auto& prop : proposals) {
            fulfillments = chain_deduce(prop, std::move(fulfillments), cfg.fulfillment,
                                        *backends.nli);
        }

        auto graph = build_graph(proposals, fulfillments, clues);
        auto pred = vote(graph);
        out.result.predicted = pred.answer.text;

        if (cfg.gpt_final) {
            TextGenRequest req;
            req.prompt = detail::tally_selection_prompt(inst, pred);
            auto resp = backends.text->generate(req);
            std::string choice = canonicalize(detail::first_answer_line(resp.text));
            if (!choice.empty()) out.result.predicted = choice;
        }

        if (inst.gold_answer) {
            out.result.match = match_answer(out.result.predicted, *inst.gold_answer);
        } else {
            out.result.note = "no gold answer";
        }
        out.prediction = std::move(pred);
        out.graph = std::move(graph);
    } catch (const Error& e) {
        // mid-pipeline failure scores as incorrect, never aborts the run
        out.result.match = false;
        out.result.note = e.what();
    }
    return out;
}

inline PipelineResult run_pipeline(const std::vector<QaInstance>& dataset,
                                   const PipelineConfig& cfg, const PipelineBackends& backends) {
    cfg.validate();
    if (!backends.text || !backends.nli) throw ConfigError("pipeline needs text and nli backends");
    if (cfg.clue_source == ClueSource::backend && !backends.clue) {
        throw ConfigError("pipeline needs a clue backend for backend-sourced clues");
    }

    PipelineResult result;
    result.items.resize(dataset.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= dataset.size()) return;
            result.items[i] = run_pipeline_instance(dataset[i], cfg, backends);
        }
    };

    int jobs = std::min<int>(cfg.jobs, static_cast<int>(dataset.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(jobs));
        for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    std::vector<ItemResult> items;
    items.reserve(result.items.size());
    for (const auto& it : result.items) items.push_back(it.result);
    result.metrics = Metrics::from_items(std::move(items));
    return result;
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
    nlohmann::json per_item = nlohmann::json::array();
    for (const auto& r : m.per_item) {
        nlohmann::json j{{"id", r.id}, {"predicted", r.predicted}, {"gold", r.gold},
                         {"match", r.match}};
        if (!r.note.empty()) j["note"] = r.note;
        per_item.push_back(std::move(j));
    }
    return nlohmann::json{{"total", m.total},
                          {"correct", m.correct},
                          {"accuracy", m.accuracy},
                          {"per_item", per_item}};
}

inline Metrics metrics_from_json(const nlohmann::json& j) {
    std::vector<ItemResult> items;
    for (const auto& e : j.at("per_item")) {
        ItemResult r;
        e.at("id").get_to(r.id);
        e.at("predicted").get_to(r.predicted);
        e.at("gold").get_to(r.gold);
        e.at("match").get_to(r.match);
        if (e.contains("note")) e.at("note").get_to(r.note);
        items.push_back(std::move(r));
    }
    Metrics m = Metrics::from_items(std::move(items));
    if (m.total != j.at("total").get<int>() || m.correct != j.at("correct").get<int>()) {
        throw ValidationError("metrics document is internally inconsistent");
    }
    return m;
}

// One prediction per line in results.jsonl.
inline nlohmann::json outcome_to_json(const ItemOutcome& o) {
    nlohmann::json j{{"id", o.result.id},
                     {"predicted", o.result.predicted},
                     {"gold", o.result.gold},
                     {"match", o.result.match}};
    if (!o.result.note.empty()) j["note"] = o.result.note;
    if (o.prediction) {
        const Prediction& p = *o.prediction;
        j["tie_broken"] = p.tie_broken;
        nlohmann::json tally = nlohmann::json::object();
        for (const auto& [text, t] : p.tally) {
            tally[text] = {{"strong", t.strong}, {"weak", t.weak}};
        }
        j["tally"] = std::move(tally);
        nlohmann::json paths = nlohmann::json::array();
        for (const auto& path : p.paths) {
            paths.push_back({{"nodes", path.node_seq},
                             {"min_score", path.min_score},
                             {"weak", path.weak}});
        }
        j["paths"] = std::move(paths);
    }
    return j;
}

enum class ReportFormat { text, json };

inline std::string report(const Metrics& m, ReportFormat format) {
    if (format == ReportFormat::json) return metrics_to_json(m).dump(2) + "\n";

    const char* headers[4] = {"id", "predicted", "gold", "match"};
    std::size_t widths[4];
    for (int c = 0; c < 4; ++c) widths[c] = std::string(headers[c]).size();
    for (const auto& r : m.per_item) {
        widths[0] = std::max(widths[0], r.id.size());
        widths[1] = std::max(widths[1], r.predicted.size());
        widths[2] = std::max(widths[2], r.gold.size());
        widths[3] = std::max(widths[3], std::size_t(r.match ? 3 : 2));
    }
    auto pad = [](const std::string& s, std::size_t w) {
        return s + std::string(w - s.size() + 2, ' ');
    };
    std::string out;
    for (int c = 0; c < 4; ++c) out += pad(headers[c], widths[c]);
    out += "\n";
    for (const auto& r : m.per_item) {
        out += pad(r.id, widths[0]);
        out += pad(r.predicted, widths[1]);
        out += pad(r.gold, widths[2]);
        out += pad(r.match ? "yes" : "no", widths[3]);
        out += "\n";
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "total %d correct %d accuracy %.4f", m.total, m.correct,
                  m.accuracy);
    out += buf;
    out += "\n";
    return out;
}

}  // namespace glassvqa
