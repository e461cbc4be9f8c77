#pragma once
// Prompt construction and parsing for answer candidates and condition
// proposals. The output line grammar is fixed:
//
//   C<n>: <statement>      condition
//   C<n> -> C<m>           C<n> supports C<m>
//   C<n> -> ANSWER         C<n> directly supports the answer
//   DONE                   terminal marker
//
// Unknown lines are skipped and counted, never fatal. Dangling edge ids are
// fatal. Retrieval is iterative: the backend is re-prompted with the
// accumulated conditions until it emits DONE or max_rounds is reached.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "glassvqa/backend.hpp"
#include "glassvqa/canonical.hpp"
#include "glassvqa/errors.hpp"
#include "glassvqa/types.hpp"

namespace glassvqa {

struct FewShotExemplar {
    std::string question;
    std::vector<std::string> answers;
    std::string proposals_text;  // worked example in the condition grammar

    void validate() const {
        if (question.empty()) throw ValidationError("exemplar: empty question");
        if (answers.empty()) throw ValidationError("exemplar: no answers");
        for (const auto& a : answers) {
            if (a.empty()) throw ValidationError("exemplar: empty answer");
        }
        if (proposals_text.empty()) throw ValidationError("exemplar: empty proposals_text");
    }
};

struct AbductionConfig {
    int shots = 4;
    int max_rounds = 3;
    int max_answers = 5;
    int max_conditions_per_proposal = 8;

    void validate() const {
        if (shots < 0) throw ValidationError("abduction: shots must be >= 0");
        if (max_rounds < 1) throw ValidationError("abduction: max_rounds must be >= 1");
        if (max_answers < 1) throw ValidationError("abduction: max_answers must be >= 1");
        if (max_conditions_per_proposal < 1) {
            throw ValidationError("abduction: max_conditions_per_proposal must be >= 1");
        }
    }
};

namespace detail {

inline void replace_all(std::string& text, std::string_view what, std::string_view with) {
    std::size_t pos = 0;
    while ((pos = text.find(what, pos)) != std::string::npos) {
        text.replace(pos, what.size(), with);
        pos += with.size();
    }
}

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string read_text_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace detail

// Templates are plain text with {exemplars}, {question}, {answer}, {known}
// placeholders. The embedded defaults are byte-identical to the files shipped
// under templates/.
struct PromptTemplates {
    std::string answer_template;
    std::string conditions_template;

    static PromptTemplates defaults() {
        PromptTemplates t;
        t.answer_template =
            "Propose candidate answers to the question about an image. List one answer per"
            " line, each line starting with \"- \". List the most plausible answers first.\n"
            "\n"
            "{exemplars}Question: {question}\n"
            "Answers:";
        t.conditions_template =
            "Given a question about an image and a candidate answer, list the conditions"
            " that would have to hold in the image for that answer to be correct. Write one"
            " condition per line as \"C<n>: <statement>\". When one condition supports"
            " another, add a line \"C<n> -> C<m>\". Conditions that directly support the"
            " answer may be marked \"C<n> -> ANSWER\". When no further conditions are"
            " needed, write DONE on its own line.\n"
            "\n"
            "{exemplars}Question: {question}\n"
            "Answer: {answer}\n"
            "{known}Conditions:";
        return t;
    }

    static PromptTemplates load_dir(const std::filesystem::path& dir) {
        PromptTemplates t;
        t.answer_template = detail::read_text_file(dir / "answer_prompt.txt");
        t.conditions_template = detail::read_text_file(dir / "conditions_prompt.txt");
        return t;
    }
};

namespace detail {

inline std::vector<FewShotExemplar> take_shots(const std::vector<FewShotExemplar>& pool,
                                               int shots) {
    if (static_cast<int>(pool.size()) < shots) {
        throw ConfigError("need " + std::to_string(shots) + " exemplars, have " +
                          std::to_string(pool.size()));
    }
    std::vector<FewShotExemplar> out(pool.begin(), pool.begin() + shots);
    for (const auto& ex : out) ex.validate();
    return out;
}

inline std::string render_answer_exemplars(const std::vector<FewShotExemplar>& exemplars) {
    std::string out;
    for (const auto& ex : exemplars) {
        out += "Question: " + ex.question + "\nAnswers:\n";
        for (const auto& a : ex.answers) out += "- " + a + "\n";
        out += "\n";
    }
    return out;
}

inline std::string render_condition_exemplars(const std::vector<FewShotExemplar>& exemplars) {
    std::string out;
    for (const auto& ex : exemplars) {
        out += "Question: " + ex.question + "\nAnswer: " + ex.answers.front() +
               "\nConditions:\n" + ex.proposals_text;
        if (out.back() != '\n') out += "\n";
        out += "\n";
    }
    return out;
}

inline std::string render_known(const std::vector<DynamicCondition>& known) {
    if (known.empty()) return "";
    std::string out = "Known conditions:\n";
    for (const auto& c : known) out += c.id + ": " + c.statement + "\n";
    out += "List only new conditions, continuing the numbering.\n";
    return out;
}

}  // namespace detail

inline std::string build_answer_prompt(const std::string& question,
                                       const std::vector<FewShotExemplar>& exemplars,
                                       const PromptTemplates& tpl = PromptTemplates::defaults()) {
    if (detail::trim(question).empty()) throw EmptyQuestionError("empty question");
    std::string prompt = tpl.answer_template;
    detail::replace_all(prompt, "{exemplars}", detail::render_answer_exemplars(exemplars));
    detail::replace_all(prompt, "{question}", question);
    return prompt;
}

inline std::string build_conditions_prompt(const std::string& question,
                                           const std::string& answer,
                                           const std::vector<FewShotExemplar>& exemplars,
                                           const std::vector<DynamicCondition>& known = {},
                                           const PromptTemplates& tpl = PromptTemplates::defaults()) {
    if (detail::trim(question).empty()) throw EmptyQuestionError("empty question");
    if (answer.empty()) throw ValidationError("conditions prompt: empty answer");
    std::string prompt = tpl.conditions_template;
    detail::replace_all(prompt, "{exemplars}", detail::render_condition_exemplars(exemplars));
    detail::replace_all(prompt, "{question}", question);
    detail::replace_all(prompt, "{answer}", answer);
    detail::replace_all(prompt, "{known}", detail::render_known(known));
    return prompt;
}

inline std::vector<std::string> parse_answers(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = detail::trim(line);
        if (t.rfind("- ", 0) != 0) continue;
        std::string body = detail::trim(t.substr(2));
        if (!body.empty()) out.push_back(body);
    }
    return out;
}

struct ParsedProposal {
    std::vector<DynamicCondition> conditions;  // proposal_id left empty
    std::vector<DependencyEdge> edges;         // may target kAnswerSentinel
    bool done = false;
    int skipped_lines = 0;
};

namespace detail {

inline std::optional<std::string> match_condition_id(std::string_view s) {
    if (s.size() < 2 || s[0] != 'C') return std::nullopt;
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
    }
    return std::string(s);
}

// known_ids lets edge lines in later rounds reference conditions retrieved
// earlier. allow_empty relaxes the zero-condition rule for those rounds.
inline ParsedProposal parse_fragment(const std::string& text,
                                     const std::set<std::string>& known_ids,
                                     bool allow_empty) {
    ParsedProposal frag;
    std::set<std::string> local_ids;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t == "DONE") {
            frag.done = true;
            continue;
        }
        auto arrow = t.find("->");
        if (arrow != std::string::npos) {
            auto from = match_condition_id(trim(t.substr(0, arrow)));
            std::string to_raw = trim(t.substr(arrow + 2));
            if (from) {
                bool from_ok = local_ids.count(*from) || known_ids.count(*from);
                if (!from_ok) {
                    throw ParseError("edge references undefined condition " + *from);
                }
                if (to_raw == "ANSWER") {
                    frag.edges.push_back({*from, std::string(kAnswerSentinel)});
                    continue;
                }
                if (auto to = match_condition_id(to_raw)) {
                    if (!local_ids.count(*to) && !known_ids.count(*to)) {
                        throw ParseError("edge references undefined condition " + *to);
                    }
                    frag.edges.push_back({*from, *to});
                    continue;
                }
            }
            ++frag.skipped_lines;
            continue;
        }
        auto colon = t.find(':');
        if (colon != std::string::npos) {
            auto id = match_condition_id(trim(t.substr(0, colon)));
            std::string stmt = trim(t.substr(colon + 1));
            if (id && !stmt.empty()) {
                if (local_ids.count(*id)) {
                    throw ParseError("duplicate condition id " + *id);
                }
                local_ids.insert(*id);
                frag.conditions.push_back({*id, stmt, ""});
                continue;
            }
        }
        ++frag.skipped_lines;
    }
    if (frag.conditions.empty() && !allow_empty) {
        throw ParseError("no condition lines found");
    }
    return frag;
}

}  // namespace detail

inline ParsedProposal parse_proposal_text(const std::string& text) {
    return detail::parse_fragment(text, {}, false);
}

// Every edge is written explicitly, including the ANSWER conclusions, so a
// serialized proposal parses back to an identical value.
inline std::string serialize_proposal(const AbductionProposal& proposal) {
    std::string out;
    for (const auto& c : proposal.conditions) out += c.id + ": " + c.statement + "\n";
    for (const auto& e : proposal.dependency_edges) {
        out += e.from + " -> " + (e.to == kAnswerSentinel ? "ANSWER" : e.to) + "\n";
    }
    out += "DONE\n";
    return out;
}

struct ProposeStats {
    int rounds = 0;
    int skipped_lines = 0;
    int dropped_edges = 0;
};

inline std::vector<AnswerCandidate> propose_answers(
    const std::string& question, const AbductionConfig& cfg, TextGenBackend& backend,
    const std::vector<FewShotExemplar>& exemplars = {},
    const PromptTemplates& tpl = PromptTemplates::defaults()) {
    cfg.validate();
    auto shots = detail::take_shots(exemplars, cfg.shots);
    TextGenRequest req;
    req.prompt = build_answer_prompt(question, shots, tpl);
    auto resp = backend.generate(req);
    std::vector<AnswerCandidate> out;
    std::set<std::string> seen;
    for (const auto& raw : parse_answers(resp.text)) {
        std::string canon = canonicalize(raw);
        if (canon.empty() || seen.count(canon)) continue;
        seen.insert(canon);
        out.push_back(AnswerCandidate::make(raw, AnswerSource::generated));
        if (static_cast<int>(out.size()) == cfg.max_answers) break;
    }
    if (out.empty()) throw ParseError("backend produced no parseable answers");
    return out;
}

namespace detail {

inline bool edge_would_cycle(const std::vector<DependencyEdge>& edges, const std::string& from,
                             const std::string& to) {
    if (to == kAnswerSentinel) return false;
    if (from == to) return true;
    // cycle iff `from` is already reachable from `to`
    std::vector<std::string> stack{to};
    std::set<std::string> seen{to};
    while (!stack.empty()) {
        std::string cur = stack.back();
        stack.pop_back();
        if (cur == from) return true;
        for (const auto& e : edges) {
            if (e.from == cur && e.to != kAnswerSentinel && !seen.count(e.to)) {
                seen.insert(e.to);
                stack.push_back(e.to);
            }
        }
    }
    return false;
}

}  // namespace detail

// Iterative retrieval. Condition ids are renumbered C1..Cn in order of first
// appearance; duplicate statements (by canonical text) merge onto the first
// occurrence. Edges that would close a cycle are dropped and counted.
inline AbductionProposal propose_conditions(
    const std::string& question, const AnswerCandidate& answer, const AbductionConfig& cfg,
    TextGenBackend& backend, const std::vector<FewShotExemplar>& exemplars = {},
    const PromptTemplates& tpl = PromptTemplates::defaults(), ProposeStats* stats = nullptr) {
    cfg.validate();
    auto shots = detail::take_shots(exemplars, cfg.shots);

    AbductionProposal prop;
    prop.id = "p:" + answer.text;
    prop.answer = answer;

    std::map<std::string, std::string> canon_to_id;
    std::set<std::string> accumulated_ids;
    ProposeStats local;

    for (int round = 0; round < cfg.max_rounds; ++round) {
        TextGenRequest req;
        req.prompt = build_conditions_prompt(question, answer.text, shots, prop.conditions, tpl);
        auto resp = backend.generate(req);
        auto frag = detail::parse_fragment(resp.text, accumulated_ids, round > 0);
        ++local.rounds;
        local.skipped_lines += frag.skipped_lines;

        std::map<std::string, std::string> remap;
        for (const auto& c : frag.conditions) {
            std::string canon = canonicalize(c.statement);
            auto hit = canon_to_id.find(canon);
            if (hit != canon_to_id.end()) {
                remap[c.id] = hit->second;
                continue;
            }
            std::string fresh = "C" + std::to_string(prop.conditions.size() + 1);
            remap[c.id] = fresh;
            canon_to_id[canon] = fresh;
            prop.conditions.push_back({fresh, c.statement, prop.id});
        }
        accumulated_ids.clear();
        for (const auto& c : prop.conditions) accumulated_ids.insert(c.id);

        for (const auto& e : frag.edges) {
            auto resolve = [&](const std::string& raw) -> std::string {
                if (raw == kAnswerSentinel) return raw;
                auto m = remap.find(raw);
                if (m != remap.end()) return m->second;
                return raw;  // reference to an accumulated id from an earlier round
            };
            DependencyEdge mapped{resolve(e.from), resolve(e.to)};
            if (mapped.from == mapped.to ||
                detail::edge_would_cycle(prop.dependency_edges, mapped.from, mapped.to)) {
                ++local.dropped_edges;
                continue;
            }
            bool dup = std::any_of(prop.dependency_edges.begin(), prop.dependency_edges.end(),
                                   [&](const DependencyEdge& x) { return x == mapped; });
            if (!dup) prop.dependency_edges.push_back(mapped);
        }

        if (frag.done) break;
    }

    if (prop.conditions.empty()) {
        throw EmptyProposalError("no conditions retrieved for answer '" + answer.text + "'");
    }

    if (static_cast<int>(prop.conditions.size()) > cfg.max_conditions_per_proposal) {
        prop.conditions.resize(cfg.max_conditions_per_proposal);
        std::set<std::string> kept;
        for (const auto& c : prop.conditions) kept.insert(c.id);
        auto touches_dropped = [&](const DependencyEdge& e) {
            bool bad = !kept.count(e.from) || (e.to != kAnswerSentinel && !kept.count(e.to));
            if (bad) ++local.dropped_edges;
            return bad;
        };
        prop.dependency_edges.erase(std::remove_if(prop.dependency_edges.begin(),
                                                   prop.dependency_edges.end(), touches_dropped),
                                    prop.dependency_edges.end());
    }

    // conditions without an outgoing edge conclude the answer directly
    for (const auto& c : prop.conditions) {
        bool has_out = std::any_of(prop.dependency_edges.begin(), prop.dependency_edges.end(),
                                   [&](const DependencyEdge& e) { return e.from == c.id; });
        if (!has_out) prop.dependency_edges.push_back({c.id, std::string(kAnswerSentinel)});
    }

    prop.validate();
    if (stats) *stats = local;
    return prop;
}

// Dataset-provided choices take precedence over generation.
inline std::vector<AnswerCandidate> candidates_for(
    const QaInstance& instance, const AbductionConfig& cfg, TextGenBackend& backend,
    const std::vector<FewShotExemplar>& exemplars = {},
    const PromptTemplates& tpl = PromptTemplates::defaults()) {
    if (instance.answer_choices && !instance.answer_choices->empty()) {
        std::vector<AnswerCandidate> out;
        std::set<std::string> seen;
        for (const auto& choice : *instance.answer_choices) {
            std::string canon = canonicalize(choice);
            if (canon.empty() || seen.count(canon)) continue;
            seen.insert(canon);
            out.push_back(AnswerCandidate::make(choice, AnswerSource::dataset_choice));
            if (static_cast<int>(out.size()) == cfg.max_answers) break;
        }
        if (!out.empty()) return out;
    }
    return propose_answers(instance.question, cfg, backend, exemplars, tpl);
}

// Worked exemplars come from dataset-schema instances carrying gold answers
// and gold inferences.
inline std::vector<FewShotExemplar> exemplars_from_instances(
    const std::vector<QaInstance>& instances) {
    std::vector<FewShotExemplar> out;
    for (const auto& inst : instances) {
        if (!inst.gold_answer || inst.gold_answer->empty()) {
            throw MissingGoldError("exemplar instance " + inst.id + " lacks a gold answer");
        }
        if (!inst.gold_inferences || inst.gold_inferences->empty()) {
            throw MissingGoldError("exemplar instance " + inst.id + " lacks gold inferences");
        }
        FewShotExemplar ex;
        ex.question = inst.question;
        ex.answers.push_back(*inst.gold_answer);
        if (inst.answer_choices) {
            for (const auto& choice : *inst.answer_choices) {
                if (!canonical_equal(choice, *inst.gold_answer)) ex.answers.push_back(choice);
            }
        }
        std::string text;
        for (std::size_t i = 0; i < inst.gold_inferences->size(); ++i) {
            text += "C" + std::to_string(i + 1) + ": " + (*inst.gold_inferences)[i] + "\n";
        }
        for (std::size_t i = 0; i < inst.gold_inferences->size(); ++i) {
            text += "C" + std::to_string(i + 1) + " -> ANSWER\n";
        }
        text += "DONE\n";
        ex.proposals_text = text;
        ex.validate();
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace glassvqa
