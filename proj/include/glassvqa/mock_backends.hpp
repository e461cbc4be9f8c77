#pragma once
// Deterministic scripted backends. They are pure functions of their inputs
// and stand in for the remote text, clue and entailment endpoints in tests,
// fixtures and offline runs.
//
// Script entries match a request either exactly or by a set of "contains"
// markers; entries are tried in file order and the first full match wins.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "glassvqa/backend.hpp"
#include "glassvqa/canonical.hpp"
#include "glassvqa/errors.hpp"
#include "glassvqa/types.hpp"

namespace glassvqa {

struct TextScriptEntry {
    std::optional<std::string> prompt_exact;
    std::vector<std::string> prompt_contains;
    std::string text;
    FinishReason finish_reason = FinishReason::stop;

    bool matches(const std::string& prompt) const {
        if (prompt_exact && *prompt_exact != prompt) return false;
        for (const auto& needle : prompt_contains) {
            if (prompt.find(needle) == std::string::npos) return false;
        }
        return prompt_exact.has_value() || !prompt_contains.empty();
    }
};

class ScriptedTextBackend : public TextGenBackend {
public:
    explicit ScriptedTextBackend(std::string backend_id = "mock-text")
        : id_(std::move(backend_id)) {}

    std::string id() const override { return id_; }

    ScriptedTextBackend& add_exact(std::string prompt, std::string text,
                                   FinishReason fr = FinishReason::stop) {
        entries_.push_back(TextScriptEntry{std::move(prompt), {}, std::move(text), fr});
        return *this;
    }

    ScriptedTextBackend& add_contains(std::vector<std::string> markers, std::string text,
                                      FinishReason fr = FinishReason::stop) {
        entries_.push_back(TextScriptEntry{std::nullopt, std::move(markers), std::move(text), fr});
        return *this;
    }

    ScriptedTextBackend& set_default(std::string text, FinishReason fr = FinishReason::stop) {
        default_ = TextGenResponse{std::move(text), fr};
        return *this;
    }

    TextGenResponse generate(const TextGenRequest& req) override {
        req.validate();
        for (const auto& e : entries_) {
            if (e.matches(req.prompt)) return TextGenResponse{e.text, e.finish_reason};
        }
        if (default_) return *default_;
        throw ProtocolError("scripted text backend: no entry matches prompt");
    }

    // Script file format:
    //   {"id": "...", "entries": [{"prompt": "..."} | {"contains": ["..."]},
    //    "text": "...", "finish_reason": "stop"], "default": {"text": "..."}}
    static ScriptedTextBackend from_json(const nlohmann::json& j) {
        ScriptedTextBackend b(j.value("id", std::string("mock-text")));
        for (const auto& ej : j.value("entries", nlohmann::json::array())) {
            TextScriptEntry e;
            if (ej.contains("prompt")) e.prompt_exact = ej["prompt"].get<std::string>();
            if (ej.contains("contains")) {
                e.prompt_contains = ej["contains"].get<std::vector<std::string>>();
            }
            e.text = ej.at("text").get<std::string>();
            e.finish_reason = finish_reason_from_string(ej.value("finish_reason", "stop"));
            b.entries_.push_back(std::move(e));
        }
        if (j.contains("default")) {
            b.default_ = TextGenResponse{
                j["default"].at("text").get<std::string>(),
                finish_reason_from_string(j["default"].value("finish_reason", "stop"))};
        }
        return b;
    }

private:
    std::string id_;
    std::vector<TextScriptEntry> entries_;
    std::optional<TextGenResponse> default_;
};

struct ClueScriptEntry {
    std::string image_ref;
    std::optional<std::string> prompt_exact;
    std::vector<std::string> prompt_contains;
    std::string text;
    FinishReason finish_reason = FinishReason::stop;

    bool matches(const ClueGenRequest& req) const {
        if (image_ref != req.image_ref) return false;
        if (prompt_exact && *prompt_exact != req.prompt) return false;
        for (const auto& needle : prompt_contains) {
            if (req.prompt.find(needle) == std::string::npos) return false;
        }
        return true;
    }
};

class ScriptedClueBackend : public ClueGenBackend {
public:
    explicit ScriptedClueBackend(std::string backend_id = "mock-clue")
        : id_(std::move(backend_id)) {}

    std::string id() const override { return id_; }

    ScriptedClueBackend& add(std::string image_ref, std::string prompt, std::string text) {
        entries_.push_back(ClueScriptEntry{std::move(image_ref), std::move(prompt), {},
                                           std::move(text), FinishReason::stop});
        return *this;
    }

    // Matches any prompt for the image.
    ScriptedClueBackend& add_for_image(std::string image_ref, std::string text) {
        entries_.push_back(ClueScriptEntry{std::move(image_ref), std::nullopt, {},
                                           std::move(text), FinishReason::stop});
        return *this;
    }

    TextGenResponse generate(const ClueGenRequest& req) override {
        req.validate();
        for (const auto& e : entries_) {
            if (e.matches(req)) return TextGenResponse{e.text, e.finish_reason};
        }
        throw ProtocolError("scripted clue backend: no entry for (image_ref, prompt)");
    }

    static ScriptedClueBackend from_json(const nlohmann::json& j) {
        ScriptedClueBackend b(j.value("id", std::string("mock-clue")));
        for (const auto& ej : j.value("entries", nlohmann::json::array())) {
            ClueScriptEntry e;
            e.image_ref = ej.at("image_ref").get<std::string>();
            if (ej.contains("prompt")) e.prompt_exact = ej["prompt"].get<std::string>();
            if (ej.contains("contains")) {
                e.prompt_contains = ej["contains"].get<std::vector<std::string>>();
            }
            e.text = ej.at("text").get<std::string>();
            e.finish_reason = finish_reason_from_string(ej.value("finish_reason", "stop"));
            b.entries_.push_back(std::move(e));
        }
        return b;
    }

private:
    std::string id_;
    std::vector<ClueScriptEntry> entries_;
};

// Serves a dataset's gold clue annotations, joined by newlines. Ignores the
// prompt and never looks at image bytes.
class GoldClueBackend : public ClueGenBackend {
public:
    explicit GoldClueBackend(const std::vector<QaInstance>& instances) {
        for (const auto& inst : instances) {
            if (!inst.gold_clues || inst.gold_clues->empty()) continue;
            auto [it, inserted] = by_image_.emplace(inst.image_ref, *inst.gold_clues);
            if (!inserted && it->second != *inst.gold_clues) {
                throw ValidationError("gold clue backend: image_ref " + inst.image_ref +
                                      " maps to conflicting clue sets");
            }
        }
    }

    std::string id() const override { return "gold-clues"; }

    TextGenResponse generate(const ClueGenRequest& req) override {
        req.validate();
        auto it = by_image_.find(req.image_ref);
        if (it == by_image_.end()) {
            throw UnknownInstanceError("gold clue backend: unknown image_ref " + req.image_ref);
        }
        std::string joined;
        for (size_t i = 0; i < it->second.size(); ++i) {
            if (i) joined += '\n';
            joined += it->second[i];
        }
        return TextGenResponse{joined, FinishReason::stop};
    }

private:
    std::map<std::string, std::vector<std::string>> by_image_;
};

// Test-only entailment rule: canonical containment of the hypothesis in the
// premise scores full entailment, anything else is neutral. Never meant for
// live runs.
class RuleNliBackend : public NliBackend {
public:
    std::string id() const override { return "rule-nli"; }

    NliScores score(const std::string& premise, const std::string& hypothesis) override {
        if (premise.empty() || hypothesis.empty()) {
            throw ValidationError("nli: premise and hypothesis must be nonempty");
        }
        std::string p = canonicalize(premise);
        std::string h = canonicalize(hypothesis);
        if (!h.empty() && p.find(h) != std::string::npos) {
            return NliScores{1.0, 0.0, 0.0};
        }
        return NliScores{0.0, 1.0, 0.0};
    }
};

class ScriptedNliBackend : public NliBackend {
public:
    explicit ScriptedNliBackend(std::string backend_id = "mock-nli")
        : id_(std::move(backend_id)) {}

    std::string id() const override { return id_; }

    ScriptedNliBackend& add(std::string premise, std::string hypothesis, NliScores scores) {
        scores.validate();
        table_[{std::move(premise), std::move(hypothesis)}] = scores;
        return *this;
    }

    ScriptedNliBackend& set_default(NliScores scores) {
        scores.validate();
        default_ = scores;
        return *this;
    }

    // Unmatched pairs fall through to the containment rule instead of a
    // fixed default.
    ScriptedNliBackend& fall_back_to_rule() {
        rule_fallback_ = true;
        return *this;
    }

    NliScores score(const std::string& premise, const std::string& hypothesis) override {
        if (premise.empty() || hypothesis.empty()) {
            throw ValidationError("nli: premise and hypothesis must be nonempty");
        }
        auto it = table_.find({premise, hypothesis});
        if (it != table_.end()) return it->second;
        if (rule_fallback_) return rule_.score(premise, hypothesis);
        if (default_) return *default_;
        throw ProtocolError("scripted nli backend: no entry for (premise, hypothesis)");
    }

    // {"id": "...", "entries": [{"premise","hypothesis","entail","neutral",
    //  "contradict"}], "default": "rule" | [e, n, c]}
    static ScriptedNliBackend from_json(const nlohmann::json& j) {
        ScriptedNliBackend b(j.value("id", std::string("mock-nli")));
        for (const auto& ej : j.value("entries", nlohmann::json::array())) {
            double e = ej.at("entail").get<double>();
            double n = ej.contains("neutral") ? ej["neutral"].get<double>() : 1.0 - e;
            double c = ej.value("contradict", 0.0);
            b.add(ej.at("premise").get<std::string>(), ej.at("hypothesis").get<std::string>(),
                  NliScores{e, n, c});
        }
        if (j.contains("default")) {
            if (j["default"].is_string() && j["default"] == "rule") {
                b.fall_back_to_rule();
            } else {
                auto v = j["default"].get<std::vector<double>>();
                if (v.size() != 3) throw ConfigError("nli script: default must be [e, n, c]");
                b.set_default(NliScores{v[0], v[1], v[2]});
            }
        }
        return b;
    }

private:
    std::string id_;
    std::map<std::pair<std::string, std::string>, NliScores> table_;
    std::optional<NliScores> default_;
    bool rule_fallback_ = false;
    RuleNliBackend rule_;
};

}  // namespace glassvqa
