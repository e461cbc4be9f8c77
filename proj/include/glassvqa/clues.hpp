#pragma once
// Visual clue acquisition plus the data-preparation side: permutation
// training records, weak-supervision augmentation, and the frozen training
// manifest for the external trainer.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "glassvqa/backend.hpp"
#include "glassvqa/canonical.hpp"
#include "glassvqa/errors.hpp"
#include "glassvqa/types.hpp"

namespace glassvqa {

inline std::string build_clue_prompt(const std::string& question) {
    if (question.empty() || canonicalize(question).empty()) {
        throw EmptyQuestionError("clue prompt needs a nonempty question");
    }
    return "Question: " + question + " Clues:";
}

enum class ClueSource { gold, backend };

// Gold clues pass through verbatim. Backend output is split on newlines,
// canonicalized, deduplicated, and empties dropped. Ids are vc0..vc(n-1).
inline std::vector<VisualClue> get_clues(const QaInstance& instance, ClueSource source,
                                         ClueGenBackend* backend = nullptr) {
    std::vector<VisualClue> out;
    if (source == ClueSource::gold) {
        if (instance.gold_clues) {
            for (const auto& s : *instance.gold_clues) {
                if (s.empty()) continue;
                out.push_back({"vc" + std::to_string(out.size()), s, ClueOrigin::gold});
            }
        }
    } else {
        if (!backend) throw ConfigError("clue backend required for backend source");
        ClueGenRequest req{instance.image_ref, build_clue_prompt(instance.question)};
        auto resp = backend->generate(req);
        std::set<std::string> seen;
        std::istringstream in(resp.text);
        std::string line;
        while (std::getline(in, line)) {
            std::string canon = canonicalize(line);
            if (canon.empty() || seen.count(canon)) continue;
            seen.insert(canon);
            out.push_back(
                {"vc" + std::to_string(out.size()), canon, ClueOrigin::backend_generated});
        }
    }
    if (out.empty()) {
        throw NoCluesError("no clues for instance " + instance.id);
    }
    return out;
}

struct ClueTrainingRecord {
    std::string instance_id;
    std::string image_ref;
    std::string prompt;
    std::string target;  // one permutation of the clues joined with "; "

    bool operator==(const ClueTrainingRecord&) const = default;
};

inline void to_json(nlohmann::json& j, const ClueTrainingRecord& r) {
    j = nlohmann::json{{"id", r.instance_id},
                       {"image_ref", r.image_ref},
                       {"prompt", r.prompt},
                       {"target", r.target}};
}

inline void from_json(const nlohmann::json& j, ClueTrainingRecord& r) {
    j.at("id").get_to(r.instance_id);
    j.at("image_ref").get_to(r.image_ref);
    j.at("prompt").get_to(r.prompt);
    j.at("target").get_to(r.target);
}

namespace detail {

inline std::uint64_t factorial(int n) {
    std::uint64_t f = 1;
    for (int i = 2; i <= n; ++i) f *= static_cast<std::uint64_t>(i);
    return f;
}

// factorial number system unranking: rank in [0, n!) to a permutation of 0..n-1
inline std::vector<int> unrank_permutation(std::uint64_t rank, int n) {
    std::vector<int> items(n);
    for (int i = 0; i < n; ++i) items[i] = i;
    std::vector<int> out;
    out.reserve(n);
    for (int i = n; i >= 1; --i) {
        std::uint64_t f = factorial(i - 1);
        auto idx = static_cast<std::size_t>(rank / f);
        rank %= f;
        out.push_back(items[idx]);
        items.erase(items.begin() + static_cast<std::ptrdiff_t>(idx));
    }
    return out;
}

// n distinct ranks out of n!, deterministic in seed. Small spaces are
// shuffled outright; larger ones are rejection-sampled.
inline std::vector<std::uint64_t> pick_permutation_ranks(int n, std::uint64_t seed) {
    std::uint64_t total = factorial(n);
    std::mt19937_64 rng(seed);
    std::vector<std::uint64_t> ranks;
    if (n <= 8) {
        std::vector<std::uint64_t> space(total);
        for (std::uint64_t i = 0; i < total; ++i) space[i] = i;
        std::shuffle(space.begin(), space.end(), rng);
        ranks.assign(space.begin(), space.begin() + n);
    } else {
        std::uniform_int_distribution<std::uint64_t> dist(0, total - 1);
        std::set<std::uint64_t> seen;
        while (ranks.size() < static_cast<std::size_t>(n)) {
            std::uint64_t r = dist(rng);
            if (seen.insert(r).second) ranks.push_back(r);
        }
    }
    return ranks;
}

}  // namespace detail

// One record per clue, each targeting a distinct permutation of the clue
// list. Which n of the n! permutations are used is a function of seed only.
inline std::vector<ClueTrainingRecord> permute_clue_records(const QaInstance& instance,
                                                            std::uint64_t seed) {
    if (!instance.gold_clues || instance.gold_clues->empty()) {
        throw NoCluesError("instance " + instance.id + " has no gold clues to permute");
    }
    const auto& clues = *instance.gold_clues;
    int n = static_cast<int>(clues.size());
    if (n > 20) throw ValidationError("permutation space overflows past 20 clues");

    std::string prompt = build_clue_prompt(instance.question);
    std::vector<ClueTrainingRecord> out;
    for (std::uint64_t rank : detail::pick_permutation_ranks(n, seed)) {
        auto perm = detail::unrank_permutation(rank, n);
        std::string target;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            if (i) target += "; ";
            target += clues[static_cast<std::size_t>(perm[i])];
        }
        out.push_back({instance.id, instance.image_ref, prompt, target});
    }
    return out;
}

struct WeakSupervisionConfig {
    int jobs = 1;

    void validate() const {
        if (jobs < 1) throw ValidationError("weak supervision: jobs must be >= 1");
    }
};

struct WeakSupervisionResult {
    std::vector<QaInstance> instances;  // input order, augmented where possible
    std::vector<std::string> augmented_ids;
    std::vector<std::pair<std::string, std::string>> failures;  // (id, reason)
};

// Instances lacking gold clues gain backend-generated ones. Failures are
// isolated per instance and reported, never fatal.
inline WeakSupervisionResult weak_supervise(const std::vector<QaInstance>& instances,
                                            ClueGenBackend& backend,
                                            const WeakSupervisionConfig& cfg = {}) {
    cfg.validate();
    WeakSupervisionResult result;
    result.instances = instances;
    std::vector<std::string> errors(instances.size());
    std::vector<char> augmented(instances.size(), 0);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= result.instances.size()) return;
            QaInstance& inst = result.instances[i];
            if (inst.gold_clues && !inst.gold_clues->empty()) continue;
            try {
                auto clues = get_clues(inst, ClueSource::backend, &backend);
                std::vector<std::string> statements;
                statements.reserve(clues.size());
                for (const auto& c : clues) statements.push_back(c.statement);
                inst.gold_clues = std::move(statements);
                inst.clue_origin = ClueOrigin::backend_generated;
                augmented[i] = 1;
            } catch (const Error& e) {
                errors[i] = e.what();
            }
        }
    };

    int jobs = std::min<int>(cfg.jobs, static_cast<int>(instances.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(jobs));
        for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    for (std::size_t i = 0; i < result.instances.size(); ++i) {
        if (augmented[i]) result.augmented_ids.push_back(result.instances[i].id);
        if (!errors[i].empty()) result.failures.emplace_back(result.instances[i].id, errors[i]);
    }
    return result;
}

enum class TrainingStage { direct, two_stage };

inline std::string to_string(TrainingStage s) {
    return s == TrainingStage::direct ? "direct" : "two_stage";
}

inline TrainingStage training_stage_from_string(const std::string& s) {
    if (s == "direct") return TrainingStage::direct;
    if (s == "two_stage") return TrainingStage::two_stage;
    throw ValidationError("unknown training stage: " + s);
}

struct LrSchedule {
    enum class Kind { constant, warmup_cosine };
    Kind kind = Kind::constant;
    double value = 0.0;        // constant only
    int warmup_steps = 0;      // warmup_cosine only
    double warmup_start = 0.0;
    double peak = 0.0;
    double min = 0.0;

    bool operator==(const LrSchedule&) const = default;
};

struct TrainingManifest {
    TrainingStage stage = TrainingStage::direct;
    int epochs = 0;
    int batch_size = 0;
    std::string optimizer_name;
    double weight_decay = 0.0;
    LrSchedule lr_schedule;

    bool operator==(const TrainingManifest&) const = default;
};

// Frozen hyperparameters; guarded by golden tests. Both stages share the
// epoch budget, batch size, and optimizer and differ only in the schedule.
inline TrainingManifest training_manifest(TrainingStage stage) {
    TrainingManifest m;
    m.stage = stage;
    m.epochs = 15;
    m.batch_size = 12;
    m.optimizer_name = "AdamW";
    m.weight_decay = 0.01;
    if (stage == TrainingStage::direct) {
        m.lr_schedule.kind = LrSchedule::Kind::constant;
        m.lr_schedule.value = 1e-7;
    } else {
        m.lr_schedule.kind = LrSchedule::Kind::warmup_cosine;
        m.lr_schedule.warmup_steps = 3000;
        m.lr_schedule.warmup_start = 1e-8;
        m.lr_schedule.peak = 1e-6;
        m.lr_schedule.min = 1e-8;
    }
    return m;
}

inline void to_json(nlohmann::json& j, const TrainingManifest& m) {
    j = nlohmann::json{{"stage", to_string(m.stage)},
                       {"epochs", m.epochs},
                       {"batch_size", m.batch_size},
                       {"optimizer", m.optimizer_name},
                       {"weight_decay", m.weight_decay}};
    if (m.lr_schedule.kind == LrSchedule::Kind::constant) {
        j["lr_schedule"] = {{"kind", "constant"}, {"value", m.lr_schedule.value}};
    } else {
        j["lr_schedule"] = {{"kind", "warmup_cosine"},
                            {"warmup_steps", m.lr_schedule.warmup_steps},
                            {"warmup_start", m.lr_schedule.warmup_start},
                            {"peak", m.lr_schedule.peak},
                            {"min", m.lr_schedule.min}};
    }
}

inline void from_json(const nlohmann::json& j, TrainingManifest& m) {
    m.stage = training_stage_from_string(j.at("stage").get<std::string>());
    j.at("epochs").get_to(m.epochs);
    j.at("batch_size").get_to(m.batch_size);
    j.at("optimizer").get_to(m.optimizer_name);
    j.at("weight_decay").get_to(m.weight_decay);
    const auto& s = j.at("lr_schedule");
    std::string kind = s.at("kind").get<std::string>();
    if (kind == "constant") {
        m.lr_schedule = LrSchedule{LrSchedule::Kind::constant, s.at("value").get<double>(), 0,
                                   0.0, 0.0, 0.0};
    } else if (kind == "warmup_cosine") {
        m.lr_schedule = LrSchedule{LrSchedule::Kind::warmup_cosine,
                                   0.0,
                                   s.at("warmup_steps").get<int>(),
                                   s.at("warmup_start").get<double>(),
                                   s.at("peak").get<double>(),
                                   s.at("min").get<double>()};
    } else {
        throw ValidationError("unknown lr schedule kind: " + kind);
    }
}

}  // namespace glassvqa
