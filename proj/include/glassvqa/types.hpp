#pragma once
// Core vocabulary of the pipeline. All values are immutable after
// construction and safe to share across threads.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "glassvqa/canonical.hpp"
#include "glassvqa/errors.hpp"

namespace glassvqa {

// Reserved sink id in proposal dependency edges. Forbidden as a condition id.
inline constexpr std::string_view kAnswerSentinel = "__ANSWER__";

enum class AnswerSource { generated, dataset_choice };

inline std::string to_string(AnswerSource s) {
    return s == AnswerSource::generated ? "generated" : "dataset_choice";
}

// A candidate answer. text is always the canonical form.
struct AnswerCandidate {
    std::string text;
    AnswerSource source = AnswerSource::generated;

    static AnswerCandidate make(std::string_view raw, AnswerSource source) {
        std::string canon = canonicalize(raw);
        if (canon.empty()) {
            throw ValidationError("answer candidate is empty after canonicalization");
        }
        return AnswerCandidate{std::move(canon), source};
    }

    bool operator==(const AnswerCandidate& o) const {
        return text == o.text && source == o.source;
    }
};

// A natural-language statement that must hold in the image for a candidate
// answer to be true.
struct DynamicCondition {
    std::string id;           // unique within its proposal
    std::string statement;
    std::string proposal_id;

    bool operator==(const DynamicCondition& o) const {
        return id == o.id && statement == o.statement && proposal_id == o.proposal_id;
    }
};

struct DependencyEdge {
    std::string from;  // condition id
    std::string to;    // condition id or kAnswerSentinel

    bool operator==(const DependencyEdge& o) const {
        return from == o.from && to == o.to;
    }
};

// A DAG of dynamic conditions terminating in one candidate answer.
struct AbductionProposal {
    std::string id;
    AnswerCandidate answer;
    std::vector<DynamicCondition> conditions;
    std::vector<DependencyEdge> dependency_edges;

    const DynamicCondition* find_condition(std::string_view cid) const {
        for (const auto& c : conditions) {
            if (c.id == cid) return &c;
        }
        return nullptr;
    }

    // Enforces every declared invariant: nonempty unique ids, no use of the
    // answer sentinel as a condition id, no dangling edge endpoints, edges
    // form a DAG, and every condition reaches the sentinel.
    void validate() const {
        std::set<std::string> ids;
        for (const auto& c : conditions) {
            if (c.id.empty()) throw ValidationError("condition id empty");
            if (c.id == kAnswerSentinel) {
                throw ValidationError("condition id uses the reserved answer sentinel");
            }
            if (c.statement.empty()) {
                throw ValidationError("condition " + c.id + " has an empty statement");
            }
            if (!ids.insert(c.id).second) {
                throw ValidationError("duplicate condition id " + c.id);
            }
        }
        std::map<std::string, std::vector<std::string>> next;
        for (const auto& e : dependency_edges) {
            if (!ids.count(e.from)) {
                throw ValidationError("edge from unknown condition " + e.from);
            }
            if (e.to != kAnswerSentinel && !ids.count(e.to)) {
                throw ValidationError("edge to unknown condition " + e.to);
            }
            next[e.from].push_back(e.to);
        }
        // Cycle check by iterative DFS with colors.
        std::map<std::string, int> color;  // 0 white, 1 grey, 2 black
        for (const auto& c : conditions) {
            if (color[c.id] != 0) continue;
            std::vector<std::pair<std::string, size_t>> stack{{c.id, 0}};
            color[c.id] = 1;
            while (!stack.empty()) {
                auto& [node, idx] = stack.back();
                auto& succ = next[node];
                if (idx < succ.size()) {
                    const std::string& to = succ[idx++];
                    if (to == kAnswerSentinel) continue;
                    int col = color[to];
                    if (col == 1) throw ValidationError("dependency edges contain a cycle");
                    if (col == 0) {
                        color[to] = 1;
                        stack.emplace_back(to, 0);
                    }
                } else {
                    color[node] = 2;
                    stack.pop_back();
                }
            }
        }
        // Every condition must reach the sentinel.
        std::set<std::string> reaches;
        bool grew = true;
        while (grew) {
            grew = false;
            for (const auto& e : dependency_edges) {
                if (reaches.count(e.from)) continue;
                if (e.to == kAnswerSentinel || reaches.count(e.to)) {
                    reaches.insert(e.from);
                    grew = true;
                }
            }
        }
        for (const auto& c : conditions) {
            if (!reaches.count(c.id)) {
                throw ValidationError("condition " + c.id + " cannot reach the answer");
            }
        }
    }

    bool operator==(const AbductionProposal& o) const {
        return id == o.id && answer == o.answer && conditions == o.conditions &&
               dependency_edges == o.dependency_edges;
    }
};

enum class ClueOrigin { gold, backend_generated };

inline std::string to_string(ClueOrigin o) {
    return o == ClueOrigin::gold ? "gold" : "backend_generated";
}

// A question-relevant statement grounded to the image.
struct VisualClue {
    std::string id;  // "vc0".."vc(n-1)", unique per instance
    std::string statement;
    ClueOrigin origin = ClueOrigin::backend_generated;

    bool operator==(const VisualClue& o) const {
        return id == o.id && statement == o.statement && origin == o.origin;
    }
};

// One image/question/answer dataset record.
struct QaInstance {
    std::string id;
    std::string image_ref;  // opaque, only forwarded to backends
    std::string question;
    std::optional<std::string> gold_answer;
    std::optional<std::vector<std::string>> answer_choices;
    std::optional<std::vector<std::string>> gold_clues;
    std::optional<std::vector<std::string>> gold_inferences;
    // Tracks whether gold_clues came from annotators or a weak-supervision
    // backend pass.
    ClueOrigin clue_origin = ClueOrigin::gold;

    void validate() const {
        if (id.empty()) throw ValidationError("instance id empty");
        if (question.empty()) throw ValidationError("instance " + id + ": question empty");
        if (gold_answer && canonicalize(*gold_answer).empty()) {
            throw ValidationError("instance " + id + ": gold answer empty after canonicalization");
        }
    }
};

}  // namespace glassvqa
