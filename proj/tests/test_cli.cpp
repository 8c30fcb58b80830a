#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return HISTOKIT_CLI_PATH; }

int run(const std::string& args, const std::string& log) {
    const std::string cmd = std::string(cli_path()) + " " + args + " > " + log + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("histokit_cli_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("help exits zero and lists the stages") {
    TempDir dir("help");
    const std::string log = (dir.path / "log.txt").string();
    CHECK(run("--help", log) == 0);
    const std::string text = slurp(log);
    for (const char* name : {"synth", "patch", "filter", "balance", "train-parent", "train-child",
                             "train-rmdl", "predict", "evaluate"}) {
        CHECK(text.find(name) != std::string::npos);
    }
}

TEST_CASE("missing prior-stage artifacts name the stage to run") {
    TempDir dir("missing");
    const std::string out = (dir.path / "work").string();
    const std::string log = (dir.path / "log.txt").string();

    CHECK(run("--out " + out + " patch", log) != 0);
    CHECK(slurp(log).find("run 'histokit synth' first") != std::string::npos);

    CHECK(run("--out " + out + " filter", log) != 0);
    CHECK(slurp(log).find("run 'histokit patch' first") != std::string::npos);

    CHECK(run("--out " + out + " evaluate", log) != 0);
    CHECK(slurp(log).find("run 'histokit predict' first") != std::string::npos);
}

TEST_CASE("balance before filter is an actionable error") {
    TempDir dir("order");
    const std::string out = (dir.path / "work").string();
    const std::string log = (dir.path / "log.txt").string();
    CHECK(run("--out " + out + " --seed 3 synth", log) == 0);
    CHECK(run("--out " + out + " --seed 3 patch --patch-size 64", log) == 0);
    CHECK(run("--out " + out + " balance", log) != 0);
    CHECK(slurp(log).find("run 'histokit filter' first") != std::string::npos);
}

TEST_CASE("config file with an unknown key fails before any work") {
    TempDir dir("config");
    const std::string cfg = (dir.path / "cfg.json").string();
    std::ofstream(cfg) << R"({"seeed": 5})";
    const std::string log = (dir.path / "log.txt").string();
    CHECK(run("--config " + cfg + " synth", log) != 0);
    CHECK(slurp(log).find("unknown config key") != std::string::npos);
}

TEST_CASE("synth then patch produce the documented artifacts") {
    TempDir dir("artifacts");
    const std::string out = (dir.path / "work").string();
    const std::string log = (dir.path / "log.txt").string();
    CHECK(run("--out " + out + " --seed 11 synth", log) == 0);
    CHECK(fs::exists(fs::path(out) / "manifest.csv"));
    CHECK(run("--out " + out + " --seed 11 patch", log) == 0);
    CHECK(fs::exists(fs::path(out) / "patch_index.csv"));
    const std::string index = slurp((fs::path(out) / "patch_index.csv").string());
    CHECK(index.rfind("slide_id,path,origin_x,origin_y,parent_label,child_label", 0) == 0);
}
