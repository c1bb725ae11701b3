#include "support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace nnmstab::testing;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class CliTest : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / ("nnmstab-cli-" + std::to_string(::getpid()) + "-" + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path out(const std::string& name = "run") const { return dir / name; }

    // Runs the CLI; stderr lands in dir/stderr.txt. Returns the exit code.
    int run(const std::string& args) const {
        const std::string cmd = std::string(NNMSTAB_CLI) + " " + args + " >" + (dir / "stdout.txt").string() +
                                " 2>" + (dir / "stderr.txt").string();
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string stderr_text() const { return read(dir / "stderr.txt"); }

    static std::string read(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    static std::string config(const std::string& name) { return config_path(name); }
};

}  // namespace

TEST_F(CliTest, BackboneWritesCsvAndManifest) {
    ASSERT_EQ(run("backbone --config " + config("linear_oscillator.json") + " --override output=" + out().string()),
              0)
        << stderr_text();
    const std::string csv = read(out() / "backbone.csv");
    EXPECT_EQ(csv.rfind("# nnmstab ", 0), 0u);
    EXPECT_NE(csv.find("\n# config_hash "), std::string::npos);
    EXPECT_NE(csv.find("\n# tolerances {"), std::string::npos);
    EXPECT_NE(csv.find("\nh,tau,omega"), std::string::npos);

    const json m = json::parse(read(out() / "manifest-backbone.json"));
    EXPECT_EQ(m["command"], "backbone");
    EXPECT_EQ(m["exit_code"], 0);
    EXPECT_EQ(m["status"], "ok");
    EXPECT_EQ(m["config"]["name"], "linear-oscillator");
    EXPECT_NE(csv.find(m["config_hash"].get<std::string>()), std::string::npos);
    std::vector<std::string> names;
    for (const auto& f : m["files"]) {
        names.push_back(f["name"]);
        EXPECT_EQ(f["bytes"].get<std::uintmax_t>(), fs::file_size(out() / f["name"].get<std::string>()));
    }
    EXPECT_NE(std::find(names.begin(), names.end(), "backbone.csv"), names.end());
    EXPECT_FALSE(fs::exists(out() / ".nnmstab.lock"));
}

TEST_F(CliTest, RerunsAreByteIdentical) {
    const std::string args = "melnikov --config " + config("duffing.json") + " --override output=";
    ASSERT_EQ(run(args + out("a").string()), 0) << stderr_text();
    ASSERT_EQ(run(args + out("b").string()), 0) << stderr_text();
    EXPECT_EQ(read(out("a") / "melnikov.csv"), read(out("b") / "melnikov.csv"));
    const json a = json::parse(read(out("a") / "manifest-melnikov.json"));
    const json b = json::parse(read(out("b") / "manifest-melnikov.json"));
    EXPECT_EQ(a["files"], b["files"]);
}

TEST_F(CliTest, ClassifyAndVerifySucceedOnTheDuffingScenario) {
    const std::string tail = " --config " + config("duffing.json") + " --override output=" + out().string();
    ASSERT_EQ(run("classify" + tail), 0) << stderr_text();
    ASSERT_EQ(run("verify" + tail), 0) << stderr_text();
    const std::string verdicts = read(out() / "verdicts.csv");
    EXPECT_NE(verdicts.find("asymptotically-stable"), std::string::npos);
    EXPECT_NE(verdicts.find("unstable"), std::string::npos);
    const json m = json::parse(read(out() / "manifest-verify.json"));
    EXPECT_EQ(m["exit_code"], 0);
}

TEST_F(CliTest, UnknownConfigKeyIsExitTwo) {
    EXPECT_EQ(run("backbone --config " + config("linear_oscillator.json") + " --override family.bogus=1" +
                  " --override output=" + out().string()),
              2);
    EXPECT_NE(stderr_text().find("family.bogus"), std::string::npos);
}

TEST_F(CliTest, MissingConfigIsExitTwo) {
    EXPECT_EQ(run("backbone --config " + (dir / "absent.json").string()), 2);
}

TEST_F(CliTest, MissingSubcommandIsExitTwo) { EXPECT_EQ(run(""), 2); }

TEST_F(CliTest, HeldLockIsExitTwo) {
    fs::create_directories(out());
    std::ofstream(out() / ".nnmstab.lock") << "held";
    EXPECT_EQ(run("backbone --config " + config("linear_oscillator.json") + " --override output=" + out().string()),
              2);
    EXPECT_NE(stderr_text().find("locked"), std::string::npos);
    EXPECT_FALSE(fs::exists(out() / "backbone.csv"));
}

TEST_F(CliTest, MissingOrbitIsANumericalFailure) {
    EXPECT_EQ(run("melnikov --config " + config("duffing.json") + " --override orbit.branch=7 --override output=" +
                  out().string()),
              3);
}

TEST_F(CliTest, ConfigValueWinsOverConflictingFlag) {
    ASSERT_EQ(run("classify --config " + config("duffing.json") + " --epsilon 0.02 --override output=" +
                  out().string()),
              0);
    EXPECT_NE(stderr_text().find("ignoring --epsilon"), std::string::npos);
    const json m = json::parse(read(out() / "manifest-classify.json"));
    EXPECT_EQ(m["config"]["epsilon"], json({0.01, 0.005, 0.0025}));
}
