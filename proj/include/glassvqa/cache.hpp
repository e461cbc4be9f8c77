#pragma once
// Persistent response cache: one JSON file per entry under
// <cache_dir>/<first-2-hex>/<digest>.json holding the request and response
// snapshots. Writes are atomic (write-temp-then-rename), so the store stays
// consistent under concurrent readers and writers. The caching wrappers at
// the bottom record every backend call and, in replay-only mode, serve
// everything from disk without touching the inner client.

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "glassvqa/backend.hpp"
#include "glassvqa/errors.hpp"
#include "glassvqa/sha256.hpp"

namespace glassvqa {

struct CacheEntry {
    std::string key;  // fingerprint(request_snapshot)
    std::string request_snapshot;
    std::string response_snapshot;
    std::string created_at;  // UTC, ISO 8601

    static CacheEntry make(std::string request_snapshot, std::string response_snapshot) {
        CacheEntry e;
        e.key = fingerprint(request_snapshot);
        e.request_snapshot = std::move(request_snapshot);
        e.response_snapshot = std::move(response_snapshot);
        e.created_at = now_utc_iso8601();
        return e;
    }

    static std::string now_utc_iso8601() {
        auto now = std::chrono::system_clock::now();
        std::time_t t = std::chrono::system_clock::to_time_t(now);
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }
};

struct CacheStats {
    size_t entries = 0;
    uintmax_t bytes = 0;
};

class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw StorageError("cannot create cache directory " + dir_.string());
    }

    const std::filesystem::path& dir() const { return dir_; }

    std::optional<CacheEntry> get(const std::string& key) const {
        auto path = entry_path(key);
        std::ifstream in(path, std::ios::binary);
        if (!in) return std::nullopt;
        std::ostringstream buf;
        buf << in.rdbuf();
        nlohmann::json j = nlohmann::json::parse(buf.str(), nullptr, false);
        if (j.is_discarded()) throw StorageError("corrupt cache entry " + path.string());
        CacheEntry e;
        try {
            e.key = j.at("key").get<std::string>();
            e.request_snapshot = j.at("request").get<std::string>();
            e.response_snapshot = j.at("response").get<std::string>();
            e.created_at = j.at("created_at").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw StorageError("corrupt cache entry " + path.string());
        }
        return e;
    }

    void put(const CacheEntry& entry) const {
        if (entry.key != fingerprint(entry.request_snapshot)) {
            throw StorageError("cache entry key does not match its request fingerprint");
        }
        auto path = entry_path(entry.key);
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw StorageError("cannot create cache shard " + path.parent_path().string());

        nlohmann::json j;
        j["created_at"] = entry.created_at;
        j["key"] = entry.key;
        j["request"] = entry.request_snapshot;
        j["response"] = entry.response_snapshot;
        std::string body = j.dump();

        static std::atomic<uint64_t> counter{0};
        std::ostringstream tmp_name;
        tmp_name << ".tmp-" << ::getpid() << "-" << counter.fetch_add(1) << "-"
                 << entry.key.substr(0, 8);
        auto tmp = path.parent_path() / tmp_name.str();
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw StorageError("cache directory unwritable: " + tmp.string());
            out.write(body.data(), static_cast<std::streamsize>(body.size()));
            out.flush();
            if (!out) {
                std::filesystem::remove(tmp, ec);
                throw StorageError("short write to " + tmp.string());
            }
        }
        std::filesystem::rename(tmp, path, ec);
        if (ec) {
            std::filesystem::remove(tmp, ec);
            throw StorageError("cannot publish cache entry " + path.string());
        }
    }

    CacheStats stats() const {
        CacheStats s;
        std::error_code ec;
        for (auto it = std::filesystem::recursive_directory_iterator(dir_, ec);
             !ec && it != std::filesystem::recursive_directory_iterator(); ++it) {
            if (it->is_regular_file() && it->path().extension() == ".json") {
                ++s.entries;
                s.bytes += it->file_size(ec);
            }
        }
        return s;
    }

    size_t clear() const {
        size_t removed = 0;
        std::error_code ec;
        for (auto it = std::filesystem::recursive_directory_iterator(dir_, ec);
             !ec && it != std::filesystem::recursive_directory_iterator(); ++it) {
            if (it->is_regular_file() && it->path().extension() == ".json") {
                std::error_code rec;
                if (std::filesystem::remove(it->path(), rec)) ++removed;
            }
        }
        return removed;
    }

private:
    std::filesystem::path entry_path(const std::string& key) const {
        return dir_ / key.substr(0, 2) / (key + ".json");
    }

    std::filesystem::path dir_;
};

// --- caching wrappers -------------------------------------------------------
//
// Each wrapper records every response before returning it and, once a key is
// present, serves the byte-identical snapshot on the next request. With
// replay_only set, a miss raises CacheMissError before any inner call.

class CachedTextGen : public TextGenBackend {
public:
    CachedTextGen(std::shared_ptr<TextGenBackend> inner, std::shared_ptr<ResponseCache> cache,
                  bool replay_only = false)
        : inner_(std::move(inner)), cache_(std::move(cache)), replay_only_(replay_only) {}

    std::string id() const override { return inner_->id(); }

    TextGenResponse generate(const TextGenRequest& req) override {
        req.validate();
        std::string snapshot = canonical_request(inner_->id(), req);
        std::string key = fingerprint(snapshot);
        if (auto hit = cache_->get(key)) {
            return parse_text_response(hit->response_snapshot);
        }
        if (replay_only_) throw CacheMissError("replay-only: no cache entry for text request");
        TextGenResponse resp = inner_->generate(req);
        cache_->put(CacheEntry::make(snapshot, serialize_response(resp)));
        return resp;
    }

private:
    std::shared_ptr<TextGenBackend> inner_;
    std::shared_ptr<ResponseCache> cache_;
    bool replay_only_;
};

class CachedClueGen : public ClueGenBackend {
public:
    CachedClueGen(std::shared_ptr<ClueGenBackend> inner, std::shared_ptr<ResponseCache> cache,
                  bool replay_only = false)
        : inner_(std::move(inner)), cache_(std::move(cache)), replay_only_(replay_only) {}

    std::string id() const override { return inner_->id(); }

    TextGenResponse generate(const ClueGenRequest& req) override {
        req.validate();
        std::string snapshot = canonical_request(inner_->id(), req);
        std::string key = fingerprint(snapshot);
        if (auto hit = cache_->get(key)) {
            return parse_text_response(hit->response_snapshot);
        }
        if (replay_only_) throw CacheMissError("replay-only: no cache entry for clue request");
        TextGenResponse resp = inner_->generate(req);
        cache_->put(CacheEntry::make(snapshot, serialize_response(resp)));
        return resp;
    }

private:
    std::shared_ptr<ClueGenBackend> inner_;
    std::shared_ptr<ResponseCache> cache_;
    bool replay_only_;
};

class CachedNli : public NliBackend {
public:
    CachedNli(std::shared_ptr<NliBackend> inner, std::shared_ptr<ResponseCache> cache,
              bool replay_only = false)
        : inner_(std::move(inner)), cache_(std::move(cache)), replay_only_(replay_only) {}

    std::string id() const override { return inner_->id(); }

    NliScores score(const std::string& premise, const std::string& hypothesis) override {
        if (premise.empty() || hypothesis.empty()) {
            throw ValidationError("nli: premise and hypothesis must be nonempty");
        }
        std::string snapshot = canonical_nli_request(inner_->id(), premise, hypothesis);
        std::string key = fingerprint(snapshot);
        if (auto hit = cache_->get(key)) {
            return parse_nli_response(hit->response_snapshot);
        }
        if (replay_only_) throw CacheMissError("replay-only: no cache entry for nli request");
        NliScores s = inner_->score(premise, hypothesis);
        s.validate();
        cache_->put(CacheEntry::make(snapshot, serialize_response(s)));
        return s;
    }

private:
    std::shared_ptr<NliBackend> inner_;
    std::shared_ptr<ResponseCache> cache_;
    bool replay_only_;
};

}  // namespace glassvqa
