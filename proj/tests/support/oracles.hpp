#pragma once
// Reference implementations and random case generators shared by the unit
// and acceptance suites. The oracles deliberately take a different algorithm
// shape than the library: subsets come from bitmasks and path totals from
// memoized counting, so agreement is evidence rather than tautology.
//
// All generators draw from a caller-owned mt19937_64 and use modulo sampling
// only, so a given seed produces the same cases on every platform.

#include <bit>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "glassvqa/backend.hpp"
#include "glassvqa/errors.hpp"
#include "glassvqa/reasoner.hpp"
#include "glassvqa/types.hpp"

namespace testutil {

// Exact-lookup entailment table. Throws on any pair the case generator did
// not script, so a premise mismatch between library and oracle fails loudly.
class TableNli : public glassvqa::NliBackend {
public:
    std::string id() const override { return "table-nli"; }

    void set(std::string premise, std::string hypothesis, double entail) {
        table_[{std::move(premise), std::move(hypothesis)}] = entail;
    }

    double entail_of(const std::string& premise, const std::string& hypothesis) const {
        auto it = table_.find({premise, hypothesis});
        if (it == table_.end()) {
            throw glassvqa::ProtocolError("table nli: unscripted pair\n  premise: " + premise +
                                          "\n  hypothesis: " + hypothesis);
        }
        return it->second;
    }

    glassvqa::NliScores score(const std::string& premise, const std::string& hypothesis) override {
        double e = entail_of(premise, hypothesis);
        return glassvqa::NliScores{e, 1.0 - e, 0.0};
    }

private:
    std::map<std::pair<std::string, std::string>, double> table_;
};

struct OracleFulfillment {
    std::string condition_id;
    std::vector<std::string> support;  // clue ids, ascending index
    double score = 0.0;
    bool strong = false;
};

// Exhaustive best-subset search over all bitmasks of size <= max_subset_size,
// with the tie order written out: score desc, size asc, index sequence asc.
inline std::vector<OracleFulfillment> oracle_fulfill(
        const std::vector<glassvqa::VisualClue>& clues,
        const std::vector<glassvqa::DynamicCondition>& conditions,
        const glassvqa::FulfillmentConfig& cfg, const TableNli& nli) {
    std::vector<OracleFulfillment> out;
    const unsigned n = static_cast<unsigned>(clues.size());
    for (const auto& cond : conditions) {
        bool found = false;
        double best_score = 0.0;
        std::vector<int> best_idx;
        for (unsigned mask = 1; mask < (1u << n); ++mask) {
            if (std::popcount(mask) > cfg.max_subset_size) continue;
            std::vector<int> idx;
            std::string premise;
            for (unsigned i = 0; i < n; ++i) {
                if (!(mask >> i & 1u)) continue;
                if (!premise.empty()) premise += "; ";
                premise += clues[i].statement;
                idx.push_back(static_cast<int>(i));
            }
            double s = nli.entail_of(premise, cond.statement);
            bool better = !found || s > best_score ||
                          (s == best_score &&
                           (idx.size() < best_idx.size() ||
                            (idx.size() == best_idx.size() && idx < best_idx)));
            if (better) {
                found = true;
                best_score = s;
                best_idx = std::move(idx);
            }
        }
        if (found && best_score >= cfg.tau_weak) {
            OracleFulfillment f;
            f.condition_id = cond.id;
            for (int i : best_idx) f.support.push_back(clues[static_cast<std::size_t>(i)].id);
            f.score = best_score;
            f.strong = best_score >= cfg.tau_strong;
            out.push_back(std::move(f));
        }
    }
    return out;
}

// Counts clue-to-answer paths by dynamic programming over the DAG: a path
// starts at a support edge and follows single-source edges to the target.
inline long long oracle_path_count(const glassvqa::ReasoningGraph& g,
                                   const glassvqa::AnswerCandidate& answer) {
    const std::string target = glassvqa::answer_node_id(answer);
    std::map<std::string, std::vector<const glassvqa::GraphEdge*>> out;
    std::vector<const glassvqa::GraphEdge*> supports;
    for (const auto& e : g.edges) {
        if (e.kind == glassvqa::EdgeKind::support) {
            supports.push_back(&e);
        } else {
            out[e.from.front()].push_back(&e);
        }
    }
    std::map<std::string, long long> memo;
    auto count = [&](auto&& self, const std::string& node) -> long long {
        if (node == target) return 1;
        auto m = memo.find(node);
        if (m != memo.end()) return m->second;
        long long total = 0;
        auto it = out.find(node);
        if (it != out.end()) {
            for (const auto* e : it->second) total += self(self, e->to);
        }
        memo[node] = total;
        return total;
    };
    long long total = 0;
    for (const auto* s : supports) total += count(count, s->to);
    return total;
}

// Multiples of 0.05 make score ties common, which is what exercises the
// tie-break orders.
inline double quantized_score(std::mt19937_64& rng) {
    return 0.05 * static_cast<double>(rng() % 21);
}

struct FulfillCase {
    std::vector<glassvqa::VisualClue> clues;
    std::vector<glassvqa::DynamicCondition> conditions;
    TableNli nli;
};

// Random clues and conditions with a full score table: every subset premise
// of size <= max_subset_size is scripted for every condition.
inline FulfillCase make_random_fulfill_case(std::mt19937_64& rng, int max_clues,
                                            int max_conditions, int max_subset_size) {
    FulfillCase c;
    const int n = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_clues));
    const int m = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_conditions));
    for (int i = 0; i < n; ++i) {
        c.clues.push_back({"vc" + std::to_string(i),
                           "feature " + std::to_string(i) + " is visible",
                           glassvqa::ClueOrigin::gold});
    }
    for (int j = 0; j < m; ++j) {
        c.conditions.push_back({"C" + std::to_string(j + 1),
                                "object " + std::to_string(j + 1) + " is present", "p:x"});
    }
    for (const auto& cond : c.conditions) {
        for (unsigned mask = 1; mask < (1u << n); ++mask) {
            if (std::popcount(mask) > max_subset_size) continue;
            std::string premise;
            for (int i = 0; i < n; ++i) {
                if (!(mask >> i & 1u)) continue;
                if (!premise.empty()) premise += "; ";
                premise += c.clues[static_cast<std::size_t>(i)].statement;
            }
            c.nli.set(std::move(premise), cond.statement, quantized_score(rng));
        }
    }
    return c;
}

struct GraphCase {
    glassvqa::ReasoningGraph graph;
    glassvqa::AnswerCandidate answer;
};

// Random reasoning graph in the exact shape build_graph emits: support edges
// carry a clue set, every other edge has one source, deduction edges only go
// from earlier to later conditions, so the graph is acyclic by construction.
inline GraphCase make_random_graph(std::mt19937_64& rng, int max_conditions) {
    GraphCase gc;
    gc.answer = glassvqa::AnswerCandidate::make("target", glassvqa::AnswerSource::generated);
    glassvqa::ReasoningGraph& g = gc.graph;
    const std::string ans = glassvqa::answer_node_id(gc.answer);
    g.answers.push_back(gc.answer);
    g.nodes.push_back({ans, glassvqa::NodeKind::answer, gc.answer.text});

    const int nclues = 1 + static_cast<int>(rng() % 3u);
    for (int i = 0; i < nclues; ++i) {
        g.nodes.push_back({"vc" + std::to_string(i), glassvqa::NodeKind::clue,
                           "clue " + std::to_string(i)});
    }
    const int ncond = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_conditions));
    std::vector<std::string> cond_ids;
    for (int j = 0; j < ncond; ++j) {
        std::string id = "p:target:C" + std::to_string(j + 1);
        g.nodes.push_back({id, glassvqa::NodeKind::condition, "claim " + std::to_string(j + 1)});
        cond_ids.push_back(std::move(id));
    }

    for (int j = 0; j < ncond; ++j) {
        const double score = quantized_score(rng);
        const glassvqa::Strength strength =
                rng() % 2 ? glassvqa::Strength::strong : glassvqa::Strength::weak;
        const bool supported = j == 0 || rng() % 10 < 6;
        if (supported) {
            glassvqa::GraphEdge e;
            for (int i = 0; i < nclues; ++i) {
                if (rng() % 2) e.from.push_back("vc" + std::to_string(i));
            }
            if (e.from.empty()) e.from.push_back("vc0");
            e.to = cond_ids[static_cast<std::size_t>(j)];
            e.kind = glassvqa::EdgeKind::support;
            e.score = score;
            e.strength = strength;
            g.edges.push_back(std::move(e));
        } else {
            // one deduction fulfillment, one edge per predecessor
            std::vector<int> preds;
            for (int i = 0; i < j; ++i) {
                if (rng() % 2) preds.push_back(i);
            }
            if (preds.empty()) preds.push_back(static_cast<int>(rng() % static_cast<unsigned>(j)));
            for (int i : preds) {
                g.edges.push_back({{cond_ids[static_cast<std::size_t>(i)]},
                                   cond_ids[static_cast<std::size_t>(j)],
                                   glassvqa::EdgeKind::deduction,
                                   score,
                                   strength});
            }
        }
        if (rng() % 10 < 5) {
            g.edges.push_back({{cond_ids[static_cast<std::size_t>(j)]},
                               ans,
                               glassvqa::EdgeKind::conclusion,
                               score,
                               strength});
        }
    }
    return gc;
}

struct PipelineCase {
    std::vector<glassvqa::AbductionProposal> proposals;
    std::vector<glassvqa::VisualClue> clues;
    TableNli nli;
};

// Two competing proposals over a shared clue set, with dependency chains and
// a score table covering every clue-subset premise and every chain premise
// the reasoner can form.
inline PipelineCase make_random_pipeline_case(std::mt19937_64& rng, int max_subset_size) {
    PipelineCase pc;
    const int nclues = 1 + static_cast<int>(rng() % 3u);
    for (int i = 0; i < nclues; ++i) {
        pc.clues.push_back({"vc" + std::to_string(i),
                            "scene detail " + std::to_string(i) + " appears",
                            glassvqa::ClueOrigin::gold});
    }

    for (const std::string& text : {std::string("alpha"), std::string("beta")}) {
        glassvqa::AbductionProposal p;
        p.answer = glassvqa::AnswerCandidate::make(text, glassvqa::AnswerSource::generated);
        p.id = "p:" + p.answer.text;
        const int ncond = 1 + static_cast<int>(rng() % 4u);
        for (int j = 0; j < ncond; ++j) {
            p.conditions.push_back({"C" + std::to_string(j + 1),
                                    "claim " + text + " " + std::to_string(j + 1) + " holds",
                                    p.id});
        }
        for (int j = 0; j < ncond; ++j) {
            for (int i = 0; i < j; ++i) {
                if (rng() % 10 < 3) {
                    p.dependency_edges.push_back(
                            {p.conditions[static_cast<std::size_t>(i)].id,
                             p.conditions[static_cast<std::size_t>(j)].id});
                }
            }
        }
        for (int j = 0; j < ncond; ++j) {
            const std::string& cid = p.conditions[static_cast<std::size_t>(j)].id;
            bool has_out = false;
            for (const auto& e : p.dependency_edges) {
                if (e.from == cid) {
                    has_out = true;
                    break;
                }
            }
            if (!has_out) {
                p.dependency_edges.push_back({cid, std::string(glassvqa::kAnswerSentinel)});
            }
        }
        p.validate();
        pc.proposals.push_back(std::move(p));
    }

    std::vector<std::string> premises;
    for (unsigned mask = 1; mask < (1u << nclues); ++mask) {
        if (std::popcount(mask) > max_subset_size) continue;
        std::string premise;
        for (int i = 0; i < nclues; ++i) {
            if (!(mask >> i & 1u)) continue;
            if (!premise.empty()) premise += "; ";
            premise += pc.clues[static_cast<std::size_t>(i)].statement;
        }
        premises.push_back(std::move(premise));
    }
    for (const auto& p : pc.proposals) {
        for (const auto& cond : p.conditions) {
            for (const auto& premise : premises) {
                pc.nli.set(premise, cond.statement, quantized_score(rng));
            }
            std::vector<std::string> preds;
            for (const auto& c : p.conditions) {
                for (const auto& e : p.dependency_edges) {
                    if (e.from == c.id && e.to == cond.id) {
                        preds.push_back(c.statement);
                        break;
                    }
                }
            }
            if (!preds.empty()) {
                pc.nli.set(glassvqa::detail::join_statements(preds), cond.statement,
                           quantized_score(rng));
            }
        }
    }
    return pc;
}

// Mirrors the per-item reasoning flow: fulfill against the pooled conditions,
// chain within each proposal, build the graph, vote.
inline glassvqa::Prediction run_reason_case(PipelineCase& pc,
                                            const glassvqa::FulfillmentConfig& cfg) {
    std::vector<glassvqa::DynamicCondition> pooled;
    for (const auto& p : pc.proposals) {
        pooled.insert(pooled.end(), p.conditions.begin(), p.conditions.end());
    }
    auto fulfills = glassvqa::fulfill_conditions(pc.clues, pooled, cfg, pc.nli);
    for (const auto& p : pc.proposals) {
        fulfills = glassvqa::chain_deduce(p, std::move(fulfills), cfg, pc.nli);
    }
    auto graph = glassvqa::build_graph(pc.proposals, fulfills, pc.clues);
    return glassvqa::vote(graph);
}

}  // namespace testutil
