#pragma once
// Graph serialization: DOT for visual inspection (weak edges dashed, node
// shapes by kind) and a JSON form {"nodes","edges","tally"}. Both are
// deterministic in the stored node and edge order.

#include <string>

#include <json.hpp>

#include "glassvqa/reasoner.hpp"

namespace glassvqa {

namespace detail {

inline std::string dot_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out;
}

}  // namespace detail

inline std::string graph_to_dot(const ReasoningGraph& g) {
    std::string out = "digraph reasoning {\n  rankdir=LR;\n";
    for (const auto& n : g.nodes) {
        out += "  \"" + detail::dot_escape(n.id) + "\" [label=\"" + detail::dot_escape(n.label) +
               "\"";
        switch (n.kind) {
            case NodeKind::clue:
                out += ", shape=box";
                break;
            case NodeKind::condition:
                out += ", shape=box, style=filled, fillcolor=lightgrey";
                break;
            case NodeKind::answer:
                out += ", shape=ellipse";
                break;
        }
        out += "];\n";
    }
    for (const auto& e : g.edges) {
        for (const auto& from : e.from) {
            out += "  \"" + detail::dot_escape(from) + "\" -> \"" + detail::dot_escape(e.to) +
                   "\" [label=\"" + detail::format_score(e.score) + "\"";
            if (e.strength == Strength::weak) out += ", style=dashed";
            out += "];\n";
        }
    }
    out += "}\n";
    return out;
}

inline nlohmann::json graph_to_json(const ReasoningGraph& g, const Prediction& pred) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : g.nodes) {
        const char* kind = n.kind == NodeKind::clue      ? "clue"
                           : n.kind == NodeKind::condition ? "condition"
                                                           : "answer";
        nodes.push_back({{"id", n.id}, {"kind", kind}, {"label", n.label}});
    }
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : g.edges) {
        edges.push_back({{"from", e.from},
                         {"to", e.to},
                         {"kind", to_string(e.kind)},
                         {"score", e.score},
                         {"strength", to_string(e.strength)}});
    }
    nlohmann::json tally = nlohmann::json::object();
    for (const auto& [text, t] : pred.tally) {
        tally[text] = {{"strong", t.strong}, {"weak", t.weak}};
    }
    return nlohmann::json{{"nodes", nodes}, {"edges", edges}, {"tally", tally}};
}

}  // namespace glassvqa
