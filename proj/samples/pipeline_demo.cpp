// End-to-end walkthrough on the scripted twelve-item fixture set: propose
// answers, gather clues, fulfill conditions, vote, and print the reasoning
// trace for each item. No network access; every backend reply is scripted.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "glassvqa/glassvqa.hpp"

int main() {
    namespace fs = std::filesystem;
    using namespace glassvqa;

    const fs::path fixtures(GLASSVQA_FIXTURES_DIR);
    auto dataset = load_dataset(fixtures / "mock12.jsonl");

    auto load_json = [](const fs::path& p) {
        std::ifstream in(p);
        return nlohmann::json::parse(in);
    };
    auto text = ScriptedTextBackend::from_json(load_json(fixtures / "mock12_text.json"));
    GoldClueBackend clue(dataset);
    auto nli = ScriptedNliBackend::from_json(load_json(fixtures / "mock12_nli.json"));

    PipelineConfig cfg;
    cfg.abduction.shots = 0;  // the scripted replies carry no exemplar block
    PipelineBackends backends{&text, &clue, &nli};

    auto result = run_pipeline(dataset, cfg, backends);

    for (const auto& item : result.items) {
        std::cout << "== " << item.result.id << "  " << item.result.gold << " vs "
                  << item.result.predicted << (item.result.match ? "  (match)" : "  (miss)")
                  << "\n";
        if (item.prediction) std::cout << explain(*item.prediction);
        std::cout << "\n";
    }
    std::cout << report(result.metrics, ReportFormat::text);

    // Graphs export to DOT for rendering and to JSON for tooling.
    const auto& first = result.items.front();
    if (first.graph && first.prediction) {
        std::cout << "\nDOT export of " << first.result.id << ":\n"
                  << graph_to_dot(*first.graph);
    }
    return result.metrics.total == static_cast<int>(dataset.size()) ? 0 : 1;
}
