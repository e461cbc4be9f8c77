#pragma once
// Dataset JSONL wire schema:
//   {"id","image_ref","question","answer"?,"answer_choices"?,
//    "gold_clues"?,"gold_inferences"?,"clue_origin"?}
// clue_origin is written only for weak-supervised records; absent means gold.

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "glassvqa/errors.hpp"
#include "glassvqa/types.hpp"

namespace glassvqa {

inline nlohmann::json instance_to_json(const QaInstance& inst) {
    nlohmann::json j;
    j["id"] = inst.id;
    j["image_ref"] = inst.image_ref;
    j["question"] = inst.question;
    if (inst.gold_answer) j["answer"] = *inst.gold_answer;
    if (inst.answer_choices) j["answer_choices"] = *inst.answer_choices;
    if (inst.gold_clues) j["gold_clues"] = *inst.gold_clues;
    if (inst.gold_inferences) j["gold_inferences"] = *inst.gold_inferences;
    if (inst.clue_origin == ClueOrigin::backend_generated) {
        j["clue_origin"] = to_string(inst.clue_origin);
    }
    return j;
}

namespace detail {

inline std::string require_string(const nlohmann::json& j, const char* key, int line) {
    if (!j.contains(key)) throw SchemaError(line, std::string("missing field \"") + key + "\"");
    if (!j.at(key).is_string()) {
        throw SchemaError(line, std::string("field \"") + key + "\" must be a string");
    }
    std::string v = j.at(key).get<std::string>();
    if (v.empty()) throw SchemaError(line, std::string("field \"") + key + "\" is empty");
    return v;
}

inline std::vector<std::string> string_list(const nlohmann::json& j, const char* key, int line) {
    const auto& v = j.at(key);
    if (!v.is_array()) {
        throw SchemaError(line, std::string("field \"") + key + "\" must be an array");
    }
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) {
            throw SchemaError(line, std::string("field \"") + key + "\" must hold strings");
        }
        out.push_back(e.get<std::string>());
    }
    return out;
}

}  // namespace detail

inline QaInstance instance_from_json(const nlohmann::json& j, int line = 0) {
    if (!j.is_object()) throw SchemaError(line, "record is not a JSON object");
    QaInstance inst;
    inst.id = detail::require_string(j, "id", line);
    inst.image_ref = detail::require_string(j, "image_ref", line);
    inst.question = detail::require_string(j, "question", line);
    if (j.contains("answer")) inst.gold_answer = detail::require_string(j, "answer", line);
    if (j.contains("answer_choices")) {
        inst.answer_choices = detail::string_list(j, "answer_choices", line);
    }
    if (j.contains("gold_clues")) inst.gold_clues = detail::string_list(j, "gold_clues", line);
    if (j.contains("gold_inferences")) {
        inst.gold_inferences = detail::string_list(j, "gold_inferences", line);
    }
    if (j.contains("clue_origin")) {
        std::string o = detail::require_string(j, "clue_origin", line);
        if (o == "gold") {
            inst.clue_origin = ClueOrigin::gold;
        } else if (o == "backend_generated") {
            inst.clue_origin = ClueOrigin::backend_generated;
        } else {
            throw SchemaError(line, "unknown clue_origin \"" + o + "\"");
        }
    }
    try {
        inst.validate();
    } catch (const ValidationError& e) {
        throw SchemaError(line, e.what());
    }
    return inst;
}

inline std::vector<QaInstance> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read dataset " + path.string());
    std::vector<QaInstance> out;
    std::set<std::string> ids;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw SchemaError(lineno, "invalid JSON");
        QaInstance inst = instance_from_json(j, lineno);
        if (!ids.insert(inst.id).second) {
            throw SchemaError(lineno, "duplicate id \"" + inst.id + "\"");
        }
        out.push_back(std::move(inst));
    }
    return out;
}

inline void save_dataset(const std::filesystem::path& path,
                         const std::vector<QaInstance>& instances) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write dataset " + path.string());
    for (const auto& inst : instances) out << instance_to_json(inst).dump() << "\n";
    if (!out) throw IoError("failed writing dataset " + path.string());
}

}  // namespace glassvqa
