#pragma once
// Remote clients for the three endpoints. Wire formats:
//
//   text:       POST {"prompt","temperature","max_tokens","stop"}
//   multimodal: POST {"image_ref","prompt"}
//   entailment: POST {"premise","hypothesis"}
//
// Responses: {"text","finish_reason"} for the first two,
// {"entail","neutral","contradict"} for entailment. A bearer token is read
// from the environment variable named per endpoint at request time; nothing
// secret is stored on disk. Transient transport failures (unreachable host,
// 5xx) are retried with exponential backoff; malformed replies are not.

#include <cstdlib>
#include <memory>
#include <string>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "glassvqa/backend.hpp"
#include "glassvqa/errors.hpp"
#include "glassvqa/retry.hpp"

namespace glassvqa {

struct HttpEndpoint {
    std::string base;       // scheme://host[:port]
    std::string path;       // /v1/...
    std::string token_env;  // env var holding the bearer token; may be empty
    int connect_timeout_s = 10;
    int read_timeout_s = 120;

    static HttpEndpoint parse(const std::string& url, std::string token_env = "") {
        auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) {
            throw ConfigError("endpoint url missing scheme: " + url);
        }
        std::string scheme = url.substr(0, scheme_end);
        if (scheme != "http" && scheme != "https") {
            throw ConfigError("unsupported endpoint scheme: " + scheme);
        }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (scheme == "https") {
            throw ConfigError("https endpoints need a TLS-enabled build; use http");
        }
#endif
        auto path_start = url.find('/', scheme_end + 3);
        HttpEndpoint ep;
        if (path_start == std::string::npos) {
            ep.base = url;
            ep.path = "/";
        } else {
            ep.base = url.substr(0, path_start);
            ep.path = url.substr(path_start);
        }
        ep.token_env = std::move(token_env);
        return ep;
    }
};

namespace detail {

inline httplib::Headers auth_headers(const HttpEndpoint& ep) {
    httplib::Headers h;
    if (!ep.token_env.empty()) {
        if (const char* tok = std::getenv(ep.token_env.c_str())) {
            h.emplace("Authorization", std::string("Bearer ") + tok);
        }
    }
    return h;
}

// One client per call: keeps concurrent fan-out trivially safe.
inline std::string post_json(const HttpEndpoint& ep, const std::string& body) {
    httplib::Client cli(ep.base);
    cli.set_connection_timeout(ep.connect_timeout_s, 0);
    cli.set_read_timeout(ep.read_timeout_s, 0);
    auto res = cli.Post(ep.path, auth_headers(ep), body, "application/json");
    if (!res) {
        throw TransportError("endpoint " + ep.base + ep.path + " unreachable: " +
                             httplib::to_string(res.error()));
    }
    if (res->status >= 500) {
        throw TransportError("endpoint " + ep.base + ep.path + " returned " +
                             std::to_string(res->status));
    }
    if (res->status != 200) {
        throw ProtocolError("endpoint " + ep.base + ep.path + " returned " +
                            std::to_string(res->status) + ": " + res->body);
    }
    return res->body;
}

inline nlohmann::json parse_body(const std::string& body) {
    nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ProtocolError("endpoint reply is not a JSON object");
    }
    return j;
}

}  // namespace detail

class HttpTextBackend : public TextGenBackend {
public:
    explicit HttpTextBackend(HttpEndpoint ep, RetryPolicy retry = {})
        : ep_(std::move(ep)), retry_(retry) {}

    std::string id() const override { return "http:" + ep_.base + ep_.path; }

    TextGenResponse generate(const TextGenRequest& req) override {
        req.validate();
        nlohmann::json body;
        body["prompt"] = req.prompt;
        body["temperature"] = req.temperature;
        body["max_tokens"] = req.max_tokens;
        body["stop"] = req.stop_sequences;
        std::string reply = with_retries(retry_, [&] { return detail::post_json(ep_, body.dump()); });
        nlohmann::json j = detail::parse_body(reply);
        if (!j.contains("text") || !j.contains("finish_reason")) {
            throw ProtocolError("text endpoint reply missing text/finish_reason");
        }
        return TextGenResponse{j["text"].get<std::string>(),
                               finish_reason_from_string(j["finish_reason"].get<std::string>())};
    }

private:
    HttpEndpoint ep_;
    RetryPolicy retry_;
};

class HttpClueBackend : public ClueGenBackend {
public:
    explicit HttpClueBackend(HttpEndpoint ep, RetryPolicy retry = {})
        : ep_(std::move(ep)), retry_(retry) {}

    std::string id() const override { return "http:" + ep_.base + ep_.path; }

    TextGenResponse generate(const ClueGenRequest& req) override {
        req.validate();
        nlohmann::json body;
        body["image_ref"] = req.image_ref;
        body["prompt"] = req.prompt;
        std::string reply = with_retries(retry_, [&] { return detail::post_json(ep_, body.dump()); });
        nlohmann::json j = detail::parse_body(reply);
        if (!j.contains("text") || !j.contains("finish_reason")) {
            throw ProtocolError("multimodal endpoint reply missing text/finish_reason");
        }
        return TextGenResponse{j["text"].get<std::string>(),
                               finish_reason_from_string(j["finish_reason"].get<std::string>())};
    }

private:
    HttpEndpoint ep_;
    RetryPolicy retry_;
};

class HttpNliBackend : public NliBackend {
public:
    explicit HttpNliBackend(HttpEndpoint ep, RetryPolicy retry = {})
        : ep_(std::move(ep)), retry_(retry) {}

    std::string id() const override { return "http:" + ep_.base + ep_.path; }

    NliScores score(const std::string& premise, const std::string& hypothesis) override {
        if (premise.empty() || hypothesis.empty()) {
            throw ValidationError("nli: premise and hypothesis must be nonempty");
        }
        nlohmann::json body;
        body["premise"] = premise;
        body["hypothesis"] = hypothesis;
        std::string reply = with_retries(retry_, [&] { return detail::post_json(ep_, body.dump()); });
        return parse_nli_response(reply);
    }

private:
    HttpEndpoint ep_;
    RetryPolicy retry_;
};

}  // namespace glassvqa
