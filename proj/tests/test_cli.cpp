#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include <json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("glassvqa-cli-" + std::to_string(::getpid()) + "-" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        out.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return out;
}

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Every invocation exports GLASSVQA_TEST_CACHE, which the fixture config
// interpolates as its cache_dir.
CliResult run_cli(const std::string& args, const fs::path& cache_dir, const fs::path& scratch) {
    fs::path out_file = scratch / "cli-stdout.txt";
    fs::path err_file = scratch / "cli-stderr.txt";
    std::string cmd = "GLASSVQA_TEST_CACHE='" + cache_dir.string() + "' '" + GLASSVQA_CLI_PATH +
                      "' " + args + " >'" + out_file.string() + "' 2>'" + err_file.string() + "'";
    int status = std::system(cmd.c_str());
    CliResult r;
    if (status != -1 && WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
    r.out = read_file(out_file);
    r.err = read_file(err_file);
    return r;
}

fs::path fixtures_dir() { return fs::path(GLASSVQA_FIXTURES_DIR); }

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

std::string mock12_args() {
    return "--config " + quoted(fixtures_dir() / "mock12.config.json") + " --dataset " +
           quoted(fixtures_dir() / "mock12.jsonl");
}

}  // namespace

TEST_CASE("missing config is a single-line usage error") {
    TempDir tmp;
    auto r = run_cli("reason --dataset " + quoted(fixtures_dir() / "mock12.jsonl") + " --out " +
                         quoted(tmp.path / "out"),
                     tmp.path / "cache", tmp.path);
    CHECK(r.exit_code == 2);
    CHECK(r.err == "config error: --config is required\n");
    CHECK(r.out.empty());
}

TEST_CASE("unreadable config exits with the config code") {
    TempDir tmp;
    auto r = run_cli("cache stats --config " + quoted(tmp.path / "nope.json"), tmp.path / "cache",
                     tmp.path);
    CHECK(r.exit_code == 2);
    CHECK(r.err.rfind("config error: cannot read config", 0) == 0);
}

TEST_CASE("unknown config keys are rejected") {
    TempDir tmp;
    write_file(tmp.path / "bad.json",
               R"({"text_backend":"mock:x.json","nli_backend":"rule","cache_dir":"c","bogus":1})");
    auto r = run_cli("cache stats --config " + quoted(tmp.path / "bad.json"), tmp.path / "cache",
                     tmp.path);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("unknown config key \"bogus\"") != std::string::npos);
}

TEST_CASE("reason writes results plus graphs and replays byte-identically") {
    TempDir tmp;
    fs::path cache = tmp.path / "cache";

    auto warm = run_cli("reason " + mock12_args() + " --out " + quoted(tmp.path / "run1"), cache,
                        tmp.path);
    INFO(warm.err);
    REQUIRE(warm.exit_code == 0);

    std::string results = read_file(tmp.path / "run1" / "results.jsonl");
    auto rows = lines_of(results);
    REQUIRE(rows.size() == 12);
    auto first = json::parse(rows[0]);
    CHECK(first.at("id") == "q01");
    CHECK(first.at("predicted") == "yes");
    CHECK(first.at("match") == true);
    CHECK(fs::exists(tmp.path / "run1" / "graphs" / "q01.dot"));
    CHECK(fs::exists(tmp.path / "run1" / "graphs" / "q01.json"));

    auto replay1 = run_cli("reason " + mock12_args() + " --replay-only --out " +
                               quoted(tmp.path / "run2"),
                           cache, tmp.path);
    INFO(replay1.err);
    REQUIRE(replay1.exit_code == 0);
    auto replay2 = run_cli("reason " + mock12_args() + " --replay-only --out " +
                               quoted(tmp.path / "run3"),
                           cache, tmp.path);
    REQUIRE(replay2.exit_code == 0);

    CHECK(read_file(tmp.path / "run2" / "results.jsonl") ==
          read_file(tmp.path / "run3" / "results.jsonl"));
    CHECK(read_file(tmp.path / "run2" / "results.jsonl") == results);
    CHECK(read_file(tmp.path / "run2" / "graphs" / "q05.dot") ==
          read_file(tmp.path / "run3" / "graphs" / "q05.dot"));
    // q05 wins purely on weak paths, so its graph must show dashed edges
    CHECK(read_file(tmp.path / "run2" / "graphs" / "q05.dot").find("style=dashed") !=
          std::string::npos);
}

TEST_CASE("eval prints the report and writes metrics") {
    TempDir tmp;
    auto r = run_cli("eval " + mock12_args() + " --out " + quoted(tmp.path / "out"),
                     tmp.path / "cache", tmp.path);
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("total 12 correct 9 accuracy 0.7500") != std::string::npos);

    auto metrics = json::parse(read_file(tmp.path / "out" / "metrics.json"));
    CHECK(metrics.at("total") == 12);
    CHECK(metrics.at("correct") == 9);
    CHECK(metrics.at("accuracy") == 0.75);
    REQUIRE(metrics.at("per_item").size() == 12);
    CHECK(metrics["per_item"][0].at("id") == "q01");
}

TEST_CASE("a failing item yields exit code one and an error row") {
    TempDir tmp;
    std::string good = lines_of(read_file(fixtures_dir() / "mock12.jsonl"))[0];
    write_file(tmp.path / "mix.jsonl",
               good + "\n" +
                   R"({"id":"q99","image_ref":"img99","question":"What is unscripted?",)"
                   R"("answer":"x","gold_clues":["something"]})" "\n");

    auto r = run_cli("reason --config " + quoted(fixtures_dir() / "mock12.config.json") +
                         " --dataset " + quoted(tmp.path / "mix.jsonl") + " --out " +
                         quoted(tmp.path / "out"),
                     tmp.path / "cache", tmp.path);
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("failed q99:") != std::string::npos);
    CHECK(r.err.find("1 of 2 items failed") != std::string::npos);

    auto rows = lines_of(read_file(tmp.path / "out" / "results.jsonl"));
    REQUIRE(rows.size() == 2);
    auto bad = json::parse(rows[1]);
    CHECK(bad.at("match") == false);
    CHECK(bad.contains("note"));
    CHECK(fs::exists(tmp.path / "out" / "graphs" / "q01.dot"));
    CHECK_FALSE(fs::exists(tmp.path / "out" / "graphs" / "q99.dot"));
}

TEST_CASE("export-graph writes one instance and validates the id") {
    TempDir tmp;
    auto ok = run_cli("export-graph " + mock12_args() + " --id q05 --out " +
                          quoted(tmp.path / "out"),
                      tmp.path / "cache", tmp.path);
    INFO(ok.err);
    REQUIRE(ok.exit_code == 0);
    std::string dot = read_file(tmp.path / "out" / "q05.dot");
    CHECK(dot.rfind("digraph reasoning {", 0) == 0);
    CHECK(dot.find("style=dashed") != std::string::npos);
    auto graph = json::parse(read_file(tmp.path / "out" / "q05.json"));
    CHECK(graph.at("tally").at("yes").at("weak") == 2);
    CHECK(graph.at("tally").at("no").at("weak") == 1);

    auto missing = run_cli("export-graph " + mock12_args() + " --id zz --out " +
                               quoted(tmp.path / "out"),
                           tmp.path / "cache", tmp.path);
    CHECK(missing.exit_code == 2);
    CHECK(missing.err.find("\"zz\" not in dataset") != std::string::npos);
}

TEST_CASE("cache stats and clear report entry counts") {
    TempDir tmp;
    fs::path cache = tmp.path / "cache";
    auto warm = run_cli("reason " + mock12_args() + " --out " + quoted(tmp.path / "out"), cache,
                        tmp.path);
    REQUIRE(warm.exit_code == 0);

    auto stats = run_cli("cache stats --config " + quoted(fixtures_dir() / "mock12.config.json"),
                         cache, tmp.path);
    REQUIRE(stats.exit_code == 0);
    long entries = 0, bytes = 0;
    REQUIRE(std::sscanf(stats.out.c_str(), "entries %ld bytes %ld", &entries, &bytes) == 2);
    CHECK(entries > 0);
    CHECK(bytes > 0);

    auto cleared = run_cli("cache clear --config " + quoted(fixtures_dir() / "mock12.config.json"),
                           cache, tmp.path);
    REQUIRE(cleared.exit_code == 0);
    CHECK(cleared.out == "removed " + std::to_string(entries) + " entries\n");

    auto after = run_cli("cache stats --config " + quoted(fixtures_dir() / "mock12.config.json"),
                         cache, tmp.path);
    CHECK(after.out == "entries 0 bytes 0\n");
}

TEST_CASE("prep-train writes permuted records and the manifest") {
    TempDir tmp;
    auto r = run_cli("prep-train " + mock12_args() + " --out " + quoted(tmp.path / "out"),
                     tmp.path / "cache", tmp.path);
    INFO(r.err);
    REQUIRE(r.exit_code == 0);

    auto rows = lines_of(read_file(tmp.path / "out" / "train_records.jsonl"));
    CHECK(rows.size() == 19);  // one record per clue across the twelve items
    auto rec = json::parse(rows[0]);
    CHECK(rec.at("id") == "q01");
    CHECK(rec.at("prompt") == "Question: Is it raining? Clues:");
    CHECK(rec.at("target").get<std::string>().find("a man holds an open umbrella") !=
          std::string::npos);

    auto manifest = json::parse(read_file(tmp.path / "out" / "training_manifest.json"));
    CHECK(manifest.at("direct").at("lr_schedule").at("kind") == "constant");
    CHECK(manifest.at("two_stage").at("lr_schedule").at("kind") == "warmup_cosine");
}

TEST_CASE("clues subcommand writes the per-instance clue sets") {
    TempDir tmp;
    auto r = run_cli("clues " + mock12_args() + " --out " + quoted(tmp.path / "out"),
                     tmp.path / "cache", tmp.path);
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    auto rows = lines_of(read_file(tmp.path / "out" / "clues.jsonl"));
    REQUIRE(rows.size() == 12);
    auto first = json::parse(rows[0]);
    CHECK(first.at("id") == "q01");
    REQUIRE(first.at("clues").size() == 2);
    CHECK(first["clues"][0].at("id") == "vc0");
    CHECK(first["clues"][0].at("statement") == "a man holds an open umbrella");
    CHECK(first["clues"][0].at("origin") == "gold");
}

TEST_CASE("propose subcommand writes proposals with their serialized form") {
    TempDir tmp;
    auto r = run_cli("propose " + mock12_args() + " --out " + quoted(tmp.path / "out"),
                     tmp.path / "cache", tmp.path);
    INFO(r.err);
    REQUIRE(r.exit_code == 0);
    auto rows = lines_of(read_file(tmp.path / "out" / "proposals.jsonl"));
    REQUIRE(rows.size() == 12);
    auto q03 = json::parse(rows[2]);
    CHECK(q03.at("id") == "q03");
    REQUIRE(q03.at("proposals").size() == 2);
    const auto& yes = q03["proposals"][0];
    CHECK(yes.at("proposal_id") == "p:yes");
    CHECK(yes.at("answer") == "yes");
    CHECK(yes.at("conditions").size() == 2);
    CHECK(yes.at("serialized").get<std::string>().find("C2 -> C1") != std::string::npos);
}
