// Stand-in for the student trainer process:
//
//     fake_trainer train --train-set <jsonl> --config <json> --out <dir>
//
// Validates its inputs, writes <dir>/model.bin and <dir>/manifest.json. If
// FAKE_TRAINER_LOG is set, appends one JSON line per invocation there.
// FAKE_TRAINER_MODE=fail exits non-zero; =no-manifest writes nothing.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

using nlohmann::json;

int main(int argc, char** argv)
{
    if (argc < 2 || std::string(argv[1]) != "train") {
        std::cerr << "usage: fake_trainer train --train-set P --config C --out D\n";
        return 64;
    }
    std::map<std::string, std::string> flags;
    for (int i = 2; i + 1 < argc; i += 2) {
        flags[argv[i]] = argv[i + 1];
    }
    for (const char* required : {"--train-set", "--config", "--out"}) {
        if (!flags.count(required)) {
            std::cerr << "missing " << required << '\n';
            return 64;
        }
    }
    const char* mode_env = std::getenv("FAKE_TRAINER_MODE");
    const std::string mode = mode_env ? mode_env : "";
    if (mode == "fail") {
        std::cerr << "simulated trainer failure\n";
        return 3;
    }

    std::ifstream train(flags["--train-set"]);
    if (!train) {
        std::cerr << "cannot read train set\n";
        return 2;
    }
    std::size_t examples = 0;
    bool saw_meta = false;
    std::string line;
    while (std::getline(train, line)) {
        if (line.empty()) {
            continue;
        }
        const auto record = json::parse(line);
        if (record.at("type") == "meta") {
            saw_meta = true;
        } else if (record.at("type") == "entry") {
            record.at("question").get<std::string>();
            record.at("program").get<std::string>();
            ++examples;
        }
    }
    if (!saw_meta) {
        std::cerr << "train set has no meta line\n";
        return 2;
    }

    std::ifstream config_file(flags["--config"]);
    const auto config = json::parse(config_file);
    for (const char* key : {"epochs", "learning_rate", "mode", "seed", "base_model", "init_checkpoint"}) {
        if (!config.contains(key)) {
            std::cerr << "config lacks " << key << '\n';
            return 2;
        }
    }

    if (const char* log = std::getenv("FAKE_TRAINER_LOG")) {
        std::ofstream out(log, std::ios::app);
        out << json{{"out", flags["--out"]},
                    {"examples", examples},
                    {"epochs", config["epochs"]},
                    {"learning_rate", config["learning_rate"]},
                    {"init_checkpoint", config["init_checkpoint"]},
                    {"base_model", config["base_model"]}}
                   .dump()
            << '\n';
    }
    if (mode == "no-manifest") {
        return 0;
    }

    const std::filesystem::path out_dir(flags["--out"]);
    std::filesystem::create_directories(out_dir);
    const auto checkpoint = out_dir / "model.bin";
    std::ofstream(checkpoint) << examples << '\n';
    std::ofstream(out_dir / "manifest.json") << json{{"checkpoint_path", checkpoint.string()}, {"examples", examples}}.dump(2)
                                             << '\n';
    return 0;
}
