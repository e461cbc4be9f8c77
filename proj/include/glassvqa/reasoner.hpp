#pragma once
// Entailment-driven condition fulfillment, reasoning graph assembly, path
// enumeration, and tiered majority voting.
//
// Determinism contracts, fixed here and mirrored by the test oracles:
//   - multi-clue premises join statements with "; " in ascending clue index
//     order; subset search prefers higher score, then smaller subset, then
//     lexicographically earlier index sequence
//   - chain premises join predecessor statements in proposal condition order
//   - paths sort lexicographically by node-id sequence
//   - vote order: strong paths desc, weak paths desc, summed min_score of
//     strong paths desc, canonical answer text asc

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "glassvqa/backend.hpp"
#include "glassvqa/canonical.hpp"
#include "glassvqa/errors.hpp"
#include "glassvqa/types.hpp"

namespace glassvqa {

struct FulfillmentConfig {
    double tau_strong = 0.8;
    double tau_weak = 0.5;
    int max_subset_size = 3;
    int max_chain_depth = 4;

    void validate() const {
        if (!(tau_strong > 0.0 && tau_strong <= 1.0)) {
            throw ValidationError("fulfillment: tau_strong must be in (0,1]");
        }
        if (!(tau_weak > 0.0 && tau_weak < tau_strong)) {
            throw ValidationError("fulfillment: tau_weak must be in (0, tau_strong)");
        }
        if (max_subset_size < 1) throw ValidationError("fulfillment: max_subset_size must be >= 1");
        if (max_chain_depth < 1) throw ValidationError("fulfillment: max_chain_depth must be >= 1");
    }
};

enum class Strength { strong, weak };

inline std::string to_string(Strength s) { return s == Strength::strong ? "strong" : "weak"; }

enum class FulfillmentKind { clue_support, deduction };

struct Fulfillment {
    std::string condition_id;
    std::string proposal_id;
    FulfillmentKind kind = FulfillmentKind::clue_support;
    std::vector<std::string> support;  // clue ids, or predecessor condition ids
    double score = 0.0;
    Strength strength = Strength::weak;

    bool operator==(const Fulfillment&) const = default;
};

namespace detail {

inline std::string join_statements(const std::vector<std::string>& statements) {
    std::string out;
    for (std::size_t i = 0; i < statements.size(); ++i) {
        if (i) out += "; ";
        out += statements[i];
    }
    return out;
}

// all index combinations of size 1..k in (size asc, lexicographic asc) order
inline std::vector<std::vector<int>> clue_subsets(int n, int k) {
    std::vector<std::vector<int>> out;
    int limit = std::min(n, k);
    for (int size = 1; size <= limit; ++size) {
        std::vector<int> combo(static_cast<std::size_t>(size));
        for (int i = 0; i < size; ++i) combo[static_cast<std::size_t>(i)] = i;
        for (;;) {
            out.push_back(combo);
            int i = size - 1;
            while (i >= 0 && combo[static_cast<std::size_t>(i)] == n - size + i) --i;
            if (i < 0) break;
            ++combo[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < size; ++j) {
                combo[static_cast<std::size_t>(j)] = combo[static_cast<std::size_t>(j - 1)] + 1;
            }
        }
    }
    return out;
}

inline Strength strength_for(double score, const FulfillmentConfig& cfg) {
    return score >= cfg.tau_strong ? Strength::strong : Strength::weak;
}

}  // namespace detail

// For every condition, scores all clue subsets up to max_subset_size and
// keeps the best one at or above tau_weak. Enumeration order doubles as the
// tie-break: higher score, then smaller subset, then earlier index sequence.
inline std::vector<Fulfillment> fulfill_conditions(const std::vector<VisualClue>& clues,
                                                   const std::vector<DynamicCondition>& conditions,
                                                   const FulfillmentConfig& cfg, NliBackend& nli) {
    cfg.validate();
    if (clues.empty()) throw NoCluesError("fulfillment requires at least one clue");

    auto subsets = detail::clue_subsets(static_cast<int>(clues.size()), cfg.max_subset_size);
    std::vector<Fulfillment> out;
    for (const auto& cond : conditions) {
        double best_score = -1.0;
        const std::vector<int>* best = nullptr;
        for (const auto& subset : subsets) {
            std::vector<std::string> statements;
            statements.reserve(subset.size());
            for (int idx : subset) statements.push_back(clues[static_cast<std::size_t>(idx)].statement);
            NliScores s = nli.score(detail::join_statements(statements), cond.statement);
            if (s.entail > best_score) {
                best_score = s.entail;
                best = &subset;
            }
        }
        if (best && best_score >= cfg.tau_weak) {
            Fulfillment f;
            f.condition_id = cond.id;
            f.proposal_id = cond.proposal_id;
            f.kind = FulfillmentKind::clue_support;
            for (int idx : *best) f.support.push_back(clues[static_cast<std::size_t>(idx)].id);
            f.score = best_score;
            f.strength = detail::strength_for(best_score, cfg);
            out.push_back(std::move(f));
        }
    }
    return out;
}

// Chains deductions within one proposal: an unfulfilled condition whose
// dependency predecessors are all fulfilled is scored against their joined
// statements. Rounds use a snapshot, so a condition fulfilled this round
// cannot enable another until the next round. Monotone; stops at fixpoint or
// max_chain_depth.
inline std::vector<Fulfillment> chain_deduce(const AbductionProposal& proposal,
                                             std::vector<Fulfillment> fulfillments,
                                             const FulfillmentConfig& cfg, NliBackend& nli) {
    cfg.validate();
    std::set<std::string> fulfilled;
    for (const auto& f : fulfillments) {
        if (f.proposal_id == proposal.id) fulfilled.insert(f.condition_id);
    }

    for (int depth = 0; depth < cfg.max_chain_depth; ++depth) {
        std::vector<Fulfillment> added;
        for (const auto& cond : proposal.conditions) {
            if (fulfilled.count(cond.id)) continue;
            std::vector<std::string> preds;
            for (const auto& c : proposal.conditions) {
                for (const auto& e : proposal.dependency_edges) {
                    if (e.from == c.id && e.to == cond.id) {
                        preds.push_back(c.id);
                        break;
                    }
                }
            }
            if (preds.empty()) continue;
            bool ready = std::all_of(preds.begin(), preds.end(),
                                     [&](const std::string& p) { return fulfilled.count(p) > 0; });
            if (!ready) continue;

            std::vector<std::string> statements;
            for (const auto& p : preds) statements.push_back(proposal.find_condition(p)->statement);
            NliScores s = nli.score(detail::join_statements(statements), cond.statement);
            if (s.entail >= cfg.tau_weak) {
                Fulfillment f;
                f.condition_id = cond.id;
                f.proposal_id = proposal.id;
                f.kind = FulfillmentKind::deduction;
                f.support = preds;
                f.score = s.entail;
                f.strength = detail::strength_for(s.entail, cfg);
                added.push_back(std::move(f));
            }
        }
        if (added.empty()) break;
        for (auto& f : added) {
            fulfilled.insert(f.condition_id);
            fulfillments.push_back(std::move(f));
        }
    }
    return fulfillments;
}

enum class NodeKind { clue, condition, answer };

struct GraphNode {
    std::string id;
    NodeKind kind = NodeKind::clue;
    std::string label;

    bool operator==(const GraphNode&) const = default;
};

enum class EdgeKind { support, deduction, conclusion };

inline std::string to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::support: return "support";
        case EdgeKind::deduction: return "deduction";
        default: return "conclusion";
    }
}

// `from` holds the whole clue set for support edges; deduction and
// conclusion edges have exactly one source.
struct GraphEdge {
    std::vector<std::string> from;
    std::string to;
    EdgeKind kind = EdgeKind::support;
    double score = 0.0;
    Strength strength = Strength::weak;

    bool operator==(const GraphEdge&) const = default;
};

struct ReasoningGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;
    std::vector<AnswerCandidate> answers;

    const GraphNode* find_node(const std::string& id) const {
        for (const auto& n : nodes) {
            if (n.id == id) return &n;
        }
        return nullptr;
    }
};

inline std::string condition_node_id(const std::string& proposal_id, const std::string& cond_id) {
    return proposal_id + ":" + cond_id;
}

inline std::string answer_node_id(const AnswerCandidate& a) { return "ans:" + a.text; }

namespace detail {

inline bool graph_acyclic(const ReasoningGraph& g) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& e : g.edges) {
        for (const auto& f : e.from) adj[f].push_back(e.to);
    }
    std::map<std::string, int> state;  // 0 new, 1 open, 2 done
    std::vector<std::pair<std::string, std::size_t>> stack;
    for (const auto& n : g.nodes) {
        if (state[n.id]) continue;
        stack.push_back({n.id, 0});
        state[n.id] = 1;
        while (!stack.empty()) {
            auto& [id, next] = stack.back();
            auto& out = adj[id];
            if (next < out.size()) {
                const std::string& to = out[next++];
                if (state[to] == 1) return false;
                if (state[to] == 0) {
                    state[to] = 1;
                    stack.push_back({to, 0});
                }
            } else {
                state[id] = 2;
                stack.pop_back();
            }
        }
    }
    return true;
}

}  // namespace detail

// Nodes appear only when they carry evidence: clues used by some support
// set, fulfilled conditions, and one answer node per distinct candidate.
// Deduction sets expand to one edge per predecessor; the support set stays a
// single edge.
inline ReasoningGraph build_graph(const std::vector<AbductionProposal>& proposals,
                                  const std::vector<Fulfillment>& fulfillments,
                                  const std::vector<VisualClue>& clues) {
    ReasoningGraph g;

    std::map<std::string, const AbductionProposal*> props;
    for (const auto& p : proposals) props[p.id] = &p;
    std::map<std::string, const VisualClue*> clue_by_id;
    for (const auto& c : clues) clue_by_id[c.id] = &c;

    std::set<std::string> seen_answers;
    for (const auto& p : proposals) {
        if (seen_answers.insert(p.answer.text).second) {
            g.answers.push_back(p.answer);
            g.nodes.push_back({answer_node_id(p.answer), NodeKind::answer, p.answer.text});
        }
    }

    std::map<std::string, const Fulfillment*> by_condition;
    for (const auto& f : fulfillments) {
        auto pit = props.find(f.proposal_id);
        if (pit == props.end()) {
            throw InconsistentInputError("fulfillment references unknown proposal " +
                                         f.proposal_id);
        }
        const DynamicCondition* cond = pit->second->find_condition(f.condition_id);
        if (!cond) {
            throw InconsistentInputError("fulfillment references unknown condition " +
                                         f.condition_id + " in " + f.proposal_id);
        }
        std::string node = condition_node_id(f.proposal_id, f.condition_id);
        if (!by_condition.emplace(node, &f).second) {
            throw InconsistentInputError("duplicate fulfillment for condition " + node);
        }
    }

    std::set<std::string> clue_nodes_added;
    for (const auto& p : proposals) {
        for (const auto& cond : p.conditions) {
            std::string node = condition_node_id(p.id, cond.id);
            auto fit = by_condition.find(node);
            if (fit == by_condition.end()) continue;
            const Fulfillment& f = *fit->second;
            g.nodes.push_back({node, NodeKind::condition, cond.statement});

            if (f.kind == FulfillmentKind::clue_support) {
                GraphEdge e;
                for (const auto& cid : f.support) {
                    auto cit = clue_by_id.find(cid);
                    if (cit == clue_by_id.end()) {
                        throw InconsistentInputError("fulfillment support names unknown clue " +
                                                     cid);
                    }
                    if (clue_nodes_added.insert(cid).second) {
                        g.nodes.push_back({cid, NodeKind::clue, cit->second->statement});
                    }
                    e.from.push_back(cid);
                }
                e.to = node;
                e.kind = EdgeKind::support;
                e.score = f.score;
                e.strength = f.strength;
                g.edges.push_back(std::move(e));
            } else {
                for (const auto& pred : f.support) {
                    std::string pred_node = condition_node_id(p.id, pred);
                    if (!by_condition.count(pred_node)) {
                        throw InconsistentInputError("deduction predecessor " + pred_node +
                                                     " is not fulfilled");
                    }
                    g.edges.push_back(
                        {{pred_node}, node, EdgeKind::deduction, f.score, f.strength});
                }
            }

            for (const auto& e : p.dependency_edges) {
                if (e.from == cond.id && e.to == kAnswerSentinel) {
                    g.edges.push_back({{node},
                                       answer_node_id(p.answer),
                                       EdgeKind::conclusion,
                                       f.score,
                                       f.strength});
                }
            }
        }
    }

    if (!detail::graph_acyclic(g)) throw InconsistentInputError("reasoning graph has a cycle");
    return g;
}

struct ReasoningPath {
    std::vector<GraphEdge> edges;  // support edge first, conclusion last
    double min_score = 0.0;
    bool weak = false;
    std::vector<std::string> node_seq;  // clue ids, condition ids, answer id

    bool operator==(const ReasoningPath&) const = default;
};

// Every directed path from a clue-supported condition (entered through its
// support edge) to the answer node, in lexicographic node-sequence order.
inline std::vector<ReasoningPath> enumerate_paths(const ReasoningGraph& g,
                                                  const AnswerCandidate& answer) {
    std::string target = answer_node_id(answer);
    if (!g.find_node(target)) throw NoAnswerError("answer node not found: " + answer.text);

    std::map<std::string, std::vector<const GraphEdge*>> out_edges;
    std::vector<const GraphEdge*> supports;
    for (const auto& e : g.edges) {
        if (e.kind == EdgeKind::support) {
            supports.push_back(&e);
        } else {
            out_edges[e.from.front()].push_back(&e);
        }
    }

    std::vector<ReasoningPath> paths;
    std::vector<const GraphEdge*> trail;

    auto emit = [&](const GraphEdge* support) {
        ReasoningPath p;
        p.edges.push_back(*support);
        p.node_seq = support->from;
        p.min_score = support->score;
        p.weak = support->strength == Strength::weak;
        p.node_seq.push_back(support->to);
        for (const GraphEdge* e : trail) {
            p.edges.push_back(*e);
            p.node_seq.push_back(e->to);
            p.min_score = std::min(p.min_score, e->score);
            p.weak = p.weak || e->strength == Strength::weak;
        }
        paths.push_back(std::move(p));
    };

    // acyclic graph, so plain DFS enumerates exactly the simple paths
    auto dfs = [&](auto&& self, const GraphEdge* support, const std::string& node) -> void {
        if (node == target) {
            emit(support);
            return;
        }
        auto it = out_edges.find(node);
        if (it == out_edges.end()) return;
        for (const GraphEdge* e : it->second) {
            trail.push_back(e);
            self(self, support, e->to);
            trail.pop_back();
        }
    };

    for (const GraphEdge* s : supports) {
        trail.clear();
        dfs(dfs, s, s->to);
    }

    std::sort(paths.begin(), paths.end(),
              [](const ReasoningPath& a, const ReasoningPath& b) { return a.node_seq < b.node_seq; });
    return paths;
}

struct PathTally {
    int strong = 0;
    int weak = 0;
    double strong_score_sum = 0.0;  // sum of min_score over strong paths

    bool operator==(const PathTally&) const = default;
};

struct Prediction {
    AnswerCandidate answer;
    std::map<std::string, PathTally> tally;  // keyed by canonical answer text
    std::vector<ReasoningPath> paths;        // winner's paths
    bool tie_broken = false;
    std::map<std::string, std::string> node_labels;
};

// Tiered majority vote: strong path count, then weak path count, then summed
// min_score of strong paths, then answer text. tie_broken reports whether
// the strong count alone decided.
inline Prediction vote(const ReasoningGraph& g) {
    if (g.answers.empty()) throw NoAnswerError("graph has no answer nodes");

    Prediction pred;
    std::map<std::string, std::vector<ReasoningPath>> paths_by_answer;
    for (const auto& a : g.answers) {
        auto paths = enumerate_paths(g, a);
        PathTally t;
        for (const auto& p : paths) {
            if (p.weak) {
                ++t.weak;
            } else {
                ++t.strong;
                t.strong_score_sum += p.min_score;
            }
        }
        pred.tally[a.text] = t;
        paths_by_answer[a.text] = std::move(paths);
    }

    auto better = [&](const AnswerCandidate& a, const AnswerCandidate& b) {
        const PathTally& ta = pred.tally.at(a.text);
        const PathTally& tb = pred.tally.at(b.text);
        if (ta.strong != tb.strong) return ta.strong > tb.strong;
        if (ta.weak != tb.weak) return ta.weak > tb.weak;
        if (ta.strong_score_sum != tb.strong_score_sum) {
            return ta.strong_score_sum > tb.strong_score_sum;
        }
        return a.text < b.text;
    };

    const AnswerCandidate* best = &g.answers.front();
    for (const auto& a : g.answers) {
        if (better(a, *best)) best = &a;
    }

    int top_strong = pred.tally.at(best->text).strong;
    int with_top = 0;
    for (const auto& [text, t] : pred.tally) {
        if (t.strong == top_strong) ++with_top;
    }
    pred.tie_broken = with_top > 1;

    pred.answer = *best;
    pred.paths = paths_by_answer[best->text];
    for (const auto& n : g.nodes) pred.node_labels[n.id] = n.label;
    return pred;
}

namespace detail {

inline std::string format_score(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace detail

// One line per path: clue statements, then each deduced statement with the
// edge score, then the answer. Footer lists the full tally, winner starred.
inline std::string explain(const Prediction& pred) {
    std::string out;
    for (const auto& p : pred.paths) {
        out += p.weak ? "[weak] " : "[strong] ";
        const GraphEdge& support = p.edges.front();
        for (std::size_t i = 0; i < support.from.size(); ++i) {
            if (i) out += "; ";
            auto it = pred.node_labels.find(support.from[i]);
            out += it != pred.node_labels.end() ? it->second : support.from[i];
        }
        for (const auto& e : p.edges) {
            auto it = pred.node_labels.find(e.to);
            out += " =(" + detail::format_score(e.score) + ")=> ";
            out += it != pred.node_labels.end() ? it->second : e.to;
        }
        out += "\n";
    }
    out += "tally:";
    for (const auto& [text, t] : pred.tally) {
        out += " ";
        if (text == pred.answer.text) out += "*";
        out += text + " strong=" + std::to_string(t.strong) + " weak=" + std::to_string(t.weak);
    }
    out += "\n";
    return out;
}

}  // namespace glassvqa
