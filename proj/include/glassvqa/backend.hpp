#pragma once
// Backend request/response types and the three abstract model roles: text
// generation, visual clue generation and entailment scoring. Concrete
// clients live in mock_backends.hpp and http_backends.hpp; caching wrappers
// in cache.hpp.

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "glassvqa/errors.hpp"

namespace glassvqa {

struct TextGenRequest {
    std::string prompt;
    double temperature = 0.0;  // in [0, 2]; 0 for determinism
    int max_tokens = 512;
    std::vector<std::string> stop_sequences;

    void validate() const {
        if (prompt.empty()) throw ValidationError("text request: prompt empty");
        if (temperature < 0.0 || temperature > 2.0) {
            throw ValidationError("text request: temperature out of [0,2]");
        }
        if (max_tokens <= 0) throw ValidationError("text request: max_tokens must be positive");
    }
};

enum class FinishReason { stop, length, error };

inline std::string to_string(FinishReason r) {
    switch (r) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        default: return "error";
    }
}

inline FinishReason finish_reason_from_string(const std::string& s) {
    if (s == "stop") return FinishReason::stop;
    if (s == "length") return FinishReason::length;
    if (s == "error") return FinishReason::error;
    throw ProtocolError("unknown finish_reason \"" + s + "\"");
}

struct TextGenResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::stop;

    void validate() const {
        if (finish_reason == FinishReason::stop && text.empty()) {
            throw ValidationError("response: finish_reason stop with empty text");
        }
    }
};

struct ClueGenRequest {
    std::string image_ref;
    std::string prompt;

    void validate() const {
        if (image_ref.empty()) throw ValidationError("clue request: image_ref empty");
        if (prompt.empty()) throw ValidationError("clue request: prompt empty");
    }
};

// Three-way entailment judgment. Components sum to 1 within 1e-6.
struct NliScores {
    double entail = 0.0;
    double neutral = 1.0;
    double contradict = 0.0;

    void validate() const {
        auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!in_unit(entail) || !in_unit(neutral) || !in_unit(contradict)) {
            throw ValidationError("nli scores out of [0,1]");
        }
        if (std::fabs(entail + neutral + contradict - 1.0) > 1e-6) {
            throw ValidationError("nli scores do not sum to 1");
        }
    }
};

class TextGenBackend {
public:
    virtual ~TextGenBackend() = default;
    virtual std::string id() const = 0;
    virtual TextGenResponse generate(const TextGenRequest& req) = 0;
};

class ClueGenBackend {
public:
    virtual ~ClueGenBackend() = default;
    virtual std::string id() const = 0;
    virtual TextGenResponse generate(const ClueGenRequest& req) = 0;
};

class NliBackend {
public:
    virtual ~NliBackend() = default;
    virtual std::string id() const = 0;
    virtual NliScores score(const std::string& premise, const std::string& hypothesis) = 0;
};

// Canonical request serializations: sorted keys, no insignificant
// whitespace, tagged with the backend id so switching backends never
// poisons a replay cache. These strings are the fingerprint inputs and the
// cache request snapshots.

inline std::string canonical_request(const std::string& backend_id, const TextGenRequest& r) {
    nlohmann::json j;
    j["backend"] = backend_id;
    j["kind"] = "text";
    j["max_tokens"] = r.max_tokens;
    j["prompt"] = r.prompt;
    j["stop"] = r.stop_sequences;
    j["temperature"] = r.temperature;
    return j.dump();
}

inline std::string canonical_request(const std::string& backend_id, const ClueGenRequest& r) {
    nlohmann::json j;
    j["backend"] = backend_id;
    j["image_ref"] = r.image_ref;
    j["kind"] = "clue";
    j["prompt"] = r.prompt;
    return j.dump();
}

inline std::string canonical_nli_request(const std::string& backend_id,
                                         const std::string& premise,
                                         const std::string& hypothesis) {
    nlohmann::json j;
    j["backend"] = backend_id;
    j["hypothesis"] = hypothesis;
    j["kind"] = "nli";
    j["premise"] = premise;
    return j.dump();
}

inline std::string serialize_response(const TextGenResponse& r) {
    nlohmann::json j;
    j["finish_reason"] = to_string(r.finish_reason);
    j["text"] = r.text;
    return j.dump();
}

inline TextGenResponse parse_text_response(const std::string& snapshot) {
    nlohmann::json j = nlohmann::json::parse(snapshot, nullptr, false);
    if (j.is_discarded() || !j.contains("text") || !j.contains("finish_reason")) {
        throw ProtocolError("malformed text response snapshot");
    }
    return TextGenResponse{j["text"].get<std::string>(),
                           finish_reason_from_string(j["finish_reason"].get<std::string>())};
}

inline std::string serialize_response(const NliScores& s) {
    nlohmann::json j;
    j["contradict"] = s.contradict;
    j["entail"] = s.entail;
    j["neutral"] = s.neutral;
    return j.dump();
}

inline NliScores parse_nli_response(const std::string& snapshot) {
    nlohmann::json j = nlohmann::json::parse(snapshot, nullptr, false);
    if (j.is_discarded() || !j.contains("entail") || !j.contains("neutral") ||
        !j.contains("contradict")) {
        throw ProtocolError("malformed nli response snapshot");
    }
    NliScores s{j["entail"].get<double>(), j["neutral"].get<double>(),
                j["contradict"].get<double>()};
    try {
        s.validate();
    } catch (const ValidationError& e) {
        throw ProtocolError(e.what());
    }
    return s;
}

}  // namespace glassvqa
