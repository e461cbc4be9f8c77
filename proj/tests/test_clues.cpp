#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "glassvqa/clues.hpp"
#include "glassvqa/errors.hpp"
#include "glassvqa/mock_backends.hpp"
#include "glassvqa/types.hpp"

using namespace glassvqa;

namespace {

QaInstance rain_instance() {
    QaInstance inst;
    inst.id = "q1";
    inst.image_ref = "img1";
    inst.question = "Is it raining?";
    inst.gold_clues = std::vector<std::string>{"a man holds an open umbrella",
                                               "the ground is wet"};
    return inst;
}

}  // namespace

TEST_CASE("clue prompt is the question wrapped in the fixed frame") {
    CHECK(build_clue_prompt("Is it raining?") == "Question: Is it raining? Clues:");
    CHECK_THROWS_AS(build_clue_prompt(""), EmptyQuestionError);
    CHECK_THROWS_AS(build_clue_prompt("  ?!  "), EmptyQuestionError);
}

TEST_CASE("gold clues pass through verbatim with sequential ids") {
    auto inst = rain_instance();
    inst.gold_clues = std::vector<std::string>{"The Cat's eyes are OPEN.", "", "second clue"};
    auto clues = get_clues(inst, ClueSource::gold);
    REQUIRE(clues.size() == 2);
    CHECK(clues[0].id == "vc0");
    CHECK(clues[0].statement == "The Cat's eyes are OPEN.");
    CHECK(clues[0].origin == ClueOrigin::gold);
    CHECK(clues[1].id == "vc1");
    CHECK(clues[1].statement == "second clue");
}

TEST_CASE("gold source with no gold clues fails") {
    QaInstance inst;
    inst.id = "q1";
    inst.image_ref = "img1";
    inst.question = "Q?";
    CHECK_THROWS_AS(get_clues(inst, ClueSource::gold), NoCluesError);
    inst.gold_clues = std::vector<std::string>{"", ""};
    CHECK_THROWS_AS(get_clues(inst, ClueSource::gold), NoCluesError);
}

TEST_CASE("backend clues are canonicalized and deduplicated") {
    ScriptedClueBackend backend;
    backend.add_for_image("img1",
                          "A man holds an open umbrella.\n\nthe ground is WET\n"
                          "a man holds an open umbrella\n  \n");
    auto inst = rain_instance();
    inst.gold_clues.reset();
    auto clues = get_clues(inst, ClueSource::backend, &backend);
    REQUIRE(clues.size() == 2);
    CHECK(clues[0].statement == "a man holds an open umbrella");
    CHECK(clues[0].origin == ClueOrigin::backend_generated);
    CHECK(clues[1].statement == "the ground is wet");

    CHECK_THROWS_AS(get_clues(inst, ClueSource::backend, nullptr), ConfigError);
}

TEST_CASE("backend emitting only blanks yields no clues") {
    ScriptedClueBackend backend;
    backend.add_for_image("img1", "\n \n...\n");
    auto inst = rain_instance();
    CHECK_THROWS_AS(get_clues(inst, ClueSource::backend, &backend), NoCluesError);
}

TEST_CASE("gold clue backend serves annotations by image_ref") {
    auto inst = rain_instance();
    GoldClueBackend backend({inst});
    auto resp = backend.generate(ClueGenRequest{"img1", "any prompt"});
    CHECK(resp.text == "a man holds an open umbrella\nthe ground is wet");
    CHECK_THROWS_AS(backend.generate(ClueGenRequest{"img9", "any prompt"}),
                    UnknownInstanceError);
}

TEST_CASE("permutation records: one per clue, all targets distinct permutations") {
    for (int n = 1; n <= 7; ++n) {
        QaInstance inst;
        inst.id = "q" + std::to_string(n);
        inst.image_ref = "img";
        inst.question = "What is shown?";
        std::vector<std::string> clues;
        for (int i = 0; i < n; ++i) clues.push_back("clue " + std::to_string(i));
        inst.gold_clues = clues;

        auto records = permute_clue_records(inst, 42);
        REQUIRE(records.size() == static_cast<std::size_t>(n));

        std::set<std::string> targets;
        for (const auto& r : records) {
            CHECK(r.instance_id == inst.id);
            CHECK(r.prompt == "Question: What is shown? Clues:");
            targets.insert(r.target);

            // each target is a permutation: same multiset of clues
            std::vector<std::string> parts;
            std::string rest = r.target;
            std::size_t pos;
            while ((pos = rest.find("; ")) != std::string::npos) {
                parts.push_back(rest.substr(0, pos));
                rest = rest.substr(pos + 2);
            }
            parts.push_back(rest);
            std::sort(parts.begin(), parts.end());
            std::vector<std::string> want = clues;
            std::sort(want.begin(), want.end());
            CHECK(parts == want);
        }
        CHECK(targets.size() == static_cast<std::size_t>(n));
    }
}

TEST_CASE("permutation records are a pure function of the seed") {
    auto inst = rain_instance();
    inst.gold_clues = std::vector<std::string>{"a", "b", "c", "d"};
    auto first = permute_clue_records(inst, 7);
    auto again = permute_clue_records(inst, 7);
    CHECK(first == again);
    // a different seed reorders the selection for n=4 (4! = 24 ranks)
    auto other = permute_clue_records(inst, 8);
    CHECK(first != other);
}

TEST_CASE("two clues yield both orderings") {
    auto inst = rain_instance();
    auto records = permute_clue_records(inst, 3);
    REQUIRE(records.size() == 2);
    std::set<std::string> targets{records[0].target, records[1].target};
    CHECK(targets.count("a man holds an open umbrella; the ground is wet") == 1);
    CHECK(targets.count("the ground is wet; a man holds an open umbrella") == 1);
}

TEST_CASE("permutation records validation") {
    QaInstance inst;
    inst.id = "q1";
    inst.image_ref = "img";
    inst.question = "Q?";
    CHECK_THROWS_AS(permute_clue_records(inst, 1), NoCluesError);

    inst.gold_clues = std::vector<std::string>(21, "x");
    CHECK_THROWS_AS(permute_clue_records(inst, 1), ValidationError);
}

TEST_CASE("training record json round-trip") {
    ClueTrainingRecord r{"q1", "img1", "Question: Q? Clues:", "a; b"};
    nlohmann::json j = r;
    CHECK(j.at("id") == "q1");
    CHECK(j.at("image_ref") == "img1");
    auto back = j.get<ClueTrainingRecord>();
    CHECK(back == r);
}

TEST_CASE("weak supervision fills only instances without gold clues") {
    QaInstance has = rain_instance();
    QaInstance lacks;
    lacks.id = "q2";
    lacks.image_ref = "img2";
    lacks.question = "Is the man swimming?";
    QaInstance fails;
    fails.id = "q3";
    fails.image_ref = "img3";
    fails.question = "Is the stove on?";

    ScriptedClueBackend backend;
    backend.add_for_image("img2", "a man sits on a bench\nDry towels on the rack.");
    // img3 has no script entry, so that instance fails

    auto result = weak_supervise({has, lacks, fails}, backend);
    REQUIRE(result.instances.size() == 3);

    CHECK(result.instances[0].gold_clues == has.gold_clues);
    CHECK(result.instances[0].clue_origin == ClueOrigin::gold);

    REQUIRE(result.instances[1].gold_clues.has_value());
    CHECK(*result.instances[1].gold_clues ==
          std::vector<std::string>{"a man sits on a bench", "dry towels on the rack"});
    CHECK(result.instances[1].clue_origin == ClueOrigin::backend_generated);

    CHECK_FALSE(result.instances[2].gold_clues.has_value());
    CHECK(result.augmented_ids == std::vector<std::string>{"q2"});
    REQUIRE(result.failures.size() == 1);
    CHECK(result.failures[0].first == "q3");
}

TEST_CASE("weak supervision with worker pool matches the single-job result") {
    std::vector<QaInstance> instances;
    ScriptedClueBackend backend;
    for (int i = 0; i < 9; ++i) {
        QaInstance inst;
        inst.id = "q" + std::to_string(i);
        inst.image_ref = "img" + std::to_string(i);
        inst.question = "Q?";
        instances.push_back(inst);
        backend.add_for_image(inst.image_ref, "clue for " + inst.id);
    }

    auto serial = weak_supervise(instances, backend);
    WeakSupervisionConfig parallel_cfg;
    parallel_cfg.jobs = 4;
    auto parallel = weak_supervise(instances, backend, parallel_cfg);

    REQUIRE(serial.instances.size() == parallel.instances.size());
    for (std::size_t i = 0; i < serial.instances.size(); ++i) {
        CHECK(serial.instances[i].gold_clues == parallel.instances[i].gold_clues);
    }
    CHECK(serial.augmented_ids == parallel.augmented_ids);
}

TEST_CASE("training manifests carry the frozen hyperparameters") {
    auto direct = training_manifest(TrainingStage::direct);
    CHECK(direct.epochs == 15);
    CHECK(direct.batch_size == 12);
    CHECK(direct.optimizer_name == "AdamW");
    CHECK(direct.weight_decay == 0.01);
    CHECK(direct.lr_schedule.kind == LrSchedule::Kind::constant);
    CHECK(direct.lr_schedule.value == 1e-7);

    auto staged = training_manifest(TrainingStage::two_stage);
    CHECK(staged.epochs == 15);
    CHECK(staged.batch_size == 12);
    CHECK(staged.optimizer_name == "AdamW");
    CHECK(staged.weight_decay == 0.01);
    CHECK(staged.lr_schedule.kind == LrSchedule::Kind::warmup_cosine);
    CHECK(staged.lr_schedule.warmup_steps == 3000);
    CHECK(staged.lr_schedule.warmup_start == 1e-8);
    CHECK(staged.lr_schedule.peak == 1e-6);
    CHECK(staged.lr_schedule.min == 1e-8);
}

TEST_CASE("training manifest json round-trip") {
    for (auto stage : {TrainingStage::direct, TrainingStage::two_stage}) {
        auto m = training_manifest(stage);
        nlohmann::json j = m;
        auto back = j.get<TrainingManifest>();
        CHECK(back == m);
    }
    nlohmann::json j = training_manifest(TrainingStage::two_stage);
    CHECK(j.at("lr_schedule").at("kind") == "warmup_cosine");
    j["lr_schedule"]["kind"] = "mystery";
    CHECK_THROWS_AS(j.get<TrainingManifest>(), ValidationError);
}
