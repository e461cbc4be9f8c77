#pragma once
// Flat JSON run configuration. String values may embed ${ENV_VAR}; secrets
// stay out of the file by naming the variable that holds them. Relative
// paths resolve against the config file's directory. Unknown keys are
// rejected so typos cannot silently fall back to defaults.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "glassvqa/abduction.hpp"
#include "glassvqa/cache.hpp"
#include "glassvqa/clues.hpp"
#include "glassvqa/dataset.hpp"
#include "glassvqa/errors.hpp"
#include "glassvqa/evalkit.hpp"
#include "glassvqa/http_backends.hpp"
#include "glassvqa/mock_backends.hpp"
#include "glassvqa/reasoner.hpp"

namespace glassvqa {

namespace detail {

inline std::string interpolate_env(const std::string& raw) {
    std::string out;
    std::size_t pos = 0;
    while (pos < raw.size()) {
        auto open = raw.find("${", pos);
        if (open == std::string::npos) {
            out += raw.substr(pos);
            break;
        }
        auto close = raw.find('}', open + 2);
        if (close == std::string::npos) {
            throw ConfigError("unterminated ${ in config value: " + raw);
        }
        out += raw.substr(pos, open - pos);
        std::string name = raw.substr(open + 2, close - open - 2);
        if (name.empty()) throw ConfigError("empty ${} in config value: " + raw);
        const char* val = std::getenv(name.c_str());
        if (!val) throw ConfigError("config references unset environment variable " + name);
        out += val;
        pos = close + 1;
    }
    return out;
}

}  // namespace detail

// Backend specs: "mock:<script.json>", "http(s)://host/path", plus "gold"
// for the clue slot and "rule" for the nli slot.
struct RunConfig {
    std::string text_backend;
    std::string clue_backend = "gold";
    std::string nli_backend;
    std::string text_token_env;
    std::string clue_token_env;
    std::string nli_token_env;
    std::filesystem::path cache_dir;
    bool replay_only = false;
    std::uint64_t seed = 0;
    ClueSource clue_source = ClueSource::gold;
    std::optional<std::filesystem::path> templates_dir;
    std::optional<std::filesystem::path> exemplars_path;
    bool gpt_final = false;
    int jobs = 1;
    AbductionConfig abduction;
    FulfillmentConfig fulfillment;

    static RunConfig load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot read config " + path.string());
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw ConfigError("config " + path.string() + " is not a JSON object");
        }

        static const std::set<std::string> known = {
            "text_backend", "clue_backend", "nli_backend",
            "text_token_env", "clue_token_env", "nli_token_env",
            "cache_dir", "replay_only", "seed", "clue_source",
            "templates_dir", "exemplars", "gpt_final", "jobs",
            "shots", "max_rounds", "max_answers", "max_conditions_per_proposal",
            "tau_strong", "tau_weak", "max_subset_size", "max_chain_depth"};
        for (const auto& [key, value] : j.items()) {
            if (!known.count(key)) throw ConfigError("unknown config key \"" + key + "\"");
        }

        RunConfig cfg;
        auto base = std::filesystem::absolute(path).parent_path();
        auto resolve = [&](const std::string& p) -> std::filesystem::path {
            std::filesystem::path fp(p);
            return fp.is_relative() ? base / fp : fp;
        };
        auto str = [&](const char* key, const std::string& fallback) {
            if (!j.contains(key)) return fallback;
            if (!j.at(key).is_string()) {
                throw ConfigError(std::string("config key \"") + key + "\" must be a string");
            }
            return detail::interpolate_env(j.at(key).get<std::string>());
        };
        auto resolve_spec = [&](std::string spec) {
            if (spec.rfind("mock:", 0) == 0) {
                return "mock:" + resolve(spec.substr(5)).string();
            }
            return spec;
        };

        try {
            cfg.text_backend = resolve_spec(str("text_backend", ""));
            cfg.clue_backend = resolve_spec(str("clue_backend", "gold"));
            cfg.nli_backend = resolve_spec(str("nli_backend", ""));
            cfg.text_token_env = str("text_token_env", "");
            cfg.clue_token_env = str("clue_token_env", "");
            cfg.nli_token_env = str("nli_token_env", "");
            std::string cache = str("cache_dir", "");
            if (!cache.empty()) cfg.cache_dir = resolve(cache);
            cfg.replay_only = j.value("replay_only", false);
            cfg.seed = j.value("seed", std::uint64_t{0});
            std::string source = str("clue_source", "gold");
            if (source == "gold") {
                cfg.clue_source = ClueSource::gold;
            } else if (source == "backend") {
                cfg.clue_source = ClueSource::backend;
            } else {
                throw ConfigError("clue_source must be \"gold\" or \"backend\"");
            }
            std::string tdir = str("templates_dir", "");
            if (!tdir.empty()) cfg.templates_dir = resolve(tdir);
            std::string ex = str("exemplars", "");
            if (!ex.empty()) cfg.exemplars_path = resolve(ex);
            cfg.gpt_final = j.value("gpt_final", false);
            cfg.jobs = j.value("jobs", 1);
            cfg.abduction.shots = j.value("shots", cfg.abduction.shots);
            cfg.abduction.max_rounds = j.value("max_rounds", cfg.abduction.max_rounds);
            cfg.abduction.max_answers = j.value("max_answers", cfg.abduction.max_answers);
            cfg.abduction.max_conditions_per_proposal =
                j.value("max_conditions_per_proposal", cfg.abduction.max_conditions_per_proposal);
            cfg.fulfillment.tau_strong = j.value("tau_strong", cfg.fulfillment.tau_strong);
            cfg.fulfillment.tau_weak = j.value("tau_weak", cfg.fulfillment.tau_weak);
            cfg.fulfillment.max_subset_size =
                j.value("max_subset_size", cfg.fulfillment.max_subset_size);
            cfg.fulfillment.max_chain_depth =
                j.value("max_chain_depth", cfg.fulfillment.max_chain_depth);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config type error: ") + e.what());
        }

        cfg.validate();
        return cfg;
    }

    void validate() const {
        if (text_backend.empty()) throw ConfigError("config key \"text_backend\" is required");
        if (nli_backend.empty()) throw ConfigError("config key \"nli_backend\" is required");
        if (cache_dir.empty()) throw ConfigError("config key \"cache_dir\" is required");
        if (jobs < 1) throw ConfigError("jobs must be >= 1");
        try {
            abduction.validate();
            fulfillment.validate();
        } catch (const ValidationError& e) {
            throw ConfigError(e.what());
        }
    }
};

struct BackendSet {
    std::shared_ptr<ResponseCache> cache;
    std::shared_ptr<TextGenBackend> text;
    std::shared_ptr<ClueGenBackend> clue;  // null when the config names no clue backend
    std::shared_ptr<NliBackend> nli;

    PipelineBackends pipeline() const { return {text.get(), clue.get(), nli.get()}; }
};

namespace detail {

inline nlohmann::json load_script(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read backend script " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("backend script " + path + " is not valid JSON");
    return j;
}

}  // namespace detail

// Every backend is wrapped in the response cache, so a populated cache plus
// replay_only reproduces a run without touching any inner backend.
inline BackendSet make_backends(const RunConfig& cfg,
                                const std::vector<QaInstance>& gold_instances = {}) {
    BackendSet set;
    set.cache = std::make_shared<ResponseCache>(cfg.cache_dir);

    std::shared_ptr<TextGenBackend> text;
    if (cfg.text_backend.rfind("mock:", 0) == 0) {
        text = std::make_shared<ScriptedTextBackend>(
            ScriptedTextBackend::from_json(detail::load_script(cfg.text_backend.substr(5))));
    } else if (cfg.text_backend.rfind("http", 0) == 0) {
        text = std::make_shared<HttpTextBackend>(
            HttpEndpoint::parse(cfg.text_backend, cfg.text_token_env));
    } else {
        throw ConfigError("unsupported text_backend \"" + cfg.text_backend + "\"");
    }
    set.text = std::make_shared<CachedTextGen>(std::move(text), set.cache, cfg.replay_only);

    std::shared_ptr<ClueGenBackend> clue;
    if (cfg.clue_backend == "gold") {
        if (!gold_instances.empty()) clue = std::make_shared<GoldClueBackend>(gold_instances);
    } else if (cfg.clue_backend.rfind("mock:", 0) == 0) {
        clue = std::make_shared<ScriptedClueBackend>(
            ScriptedClueBackend::from_json(detail::load_script(cfg.clue_backend.substr(5))));
    } else if (cfg.clue_backend.rfind("http", 0) == 0) {
        clue = std::make_shared<HttpClueBackend>(
            HttpEndpoint::parse(cfg.clue_backend, cfg.clue_token_env));
    } else {
        throw ConfigError("unsupported clue_backend \"" + cfg.clue_backend + "\"");
    }
    if (clue) set.clue = std::make_shared<CachedClueGen>(std::move(clue), set.cache, cfg.replay_only);

    std::shared_ptr<NliBackend> nli;
    if (cfg.nli_backend == "rule") {
        nli = std::make_shared<RuleNliBackend>();
    } else if (cfg.nli_backend.rfind("mock:", 0) == 0) {
        nli = std::make_shared<ScriptedNliBackend>(
            ScriptedNliBackend::from_json(detail::load_script(cfg.nli_backend.substr(5))));
    } else if (cfg.nli_backend.rfind("http", 0) == 0) {
        nli = std::make_shared<HttpNliBackend>(
            HttpEndpoint::parse(cfg.nli_backend, cfg.nli_token_env));
    } else {
        throw ConfigError("unsupported nli_backend \"" + cfg.nli_backend + "\"");
    }
    set.nli = std::make_shared<CachedNli>(std::move(nli), set.cache, cfg.replay_only);

    return set;
}

// Assembles the pipeline view of a run config, loading templates and
// exemplars from disk when the config names them.
inline PipelineConfig make_pipeline_config(const RunConfig& cfg) {
    PipelineConfig p;
    p.abduction = cfg.abduction;
    p.fulfillment = cfg.fulfillment;
    p.clue_source = cfg.clue_source;
    p.gpt_final = cfg.gpt_final;
    p.jobs = cfg.jobs;
    if (cfg.templates_dir) p.templates = PromptTemplates::load_dir(*cfg.templates_dir);
    if (cfg.exemplars_path) {
        p.exemplars = exemplars_from_instances(load_dataset(*cfg.exemplars_path));
    }
    return p;
}

}  // namespace glassvqa
