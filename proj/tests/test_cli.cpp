// Copyright (c) 2026 The ropelab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ============================================================================
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

namespace {

namespace fs = std::filesystem;

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string &name) {
    const fs::path p = fs::temp_directory_path() / "ropelab_cli_test" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

CliResult cli(const std::string &args, const std::string &env = "") {
    const fs::path dir = scratch("io");
    const std::string cmd = env + " " + ROPELAB_CLI_PATH + " " + args + " >" + (dir / "o").string() + " 2>" +
                            (dir / "e").string();
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir / "o");
    r.err = slurp(dir / "e");
    return r;
}

TEST(Cli, HelpShowsDefaults) {
    const CliResult r = cli("decay-gaussian --help");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("--n-trials"), std::string::npos);
    EXPECT_NE(r.out.find("100"), std::string::npos);
    EXPECT_NE(r.out.find("8192"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("no-such-command").code, 2);
    EXPECT_EQ(cli("construct --kind spiral").code, 2);
    const CliResult r = cli("analyze-norms --input /nonexistent.qkt1 --out " + scratch("bad").string());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("cannot open"), std::string::npos) << r.err;
}

TEST(Cli, VersionPrintsDescribe) {
    const CliResult r = cli("--version");
    EXPECT_EQ(r.code, 0);
    EXPECT_FALSE(r.out.empty());
}

TEST(Cli, PassingCheckWritesVerdictAndNoStdout) {
    const fs::path out = scratch("density");
    const CliResult r = cli("check-density --g 1 --bins 8 --n 100 --out " + out.string());
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(r.out.empty());
    const auto j = nlohmann::json::parse(slurp(out / "check_density.jsonl"));
    EXPECT_EQ(j["passed"], true);
}

TEST(Cli, FailingCheckExitsOne) {
    const fs::path out = scratch("density_fail");
    const CliResult r = cli("check-density --g 0.0002 --bins 8 --n 1000 --out " + out.string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("check failed"), std::string::npos);
    EXPECT_EQ(nlohmann::json::parse(slurp(out / "check_density.jsonl"))["passed"], false);
}

TEST(Cli, EnvironmentSetsOutputDirButFlagWins) {
    const fs::path env_dir = scratch("env");
    const fs::path flag_dir = scratch("flag");
    EXPECT_EQ(cli("decay-constant --d 4 --max-r 5", "ROPELAB_OUT_DIR=" + env_dir.string()).code, 0);
    EXPECT_TRUE(fs::exists(env_dir / "decay_constant.csv"));
    EXPECT_EQ(cli("decay-constant --d 4 --max-r 5 --out " + flag_dir.string(), "ROPELAB_OUT_DIR=" + env_dir.string()).code,
              0);
    EXPECT_TRUE(fs::exists(flag_dir / "decay_constant.csv"));
}

TEST(Cli, ConstructDiagonalPeaksOnDiagonal) {
    const fs::path out = scratch("construct");
    const CliResult r = cli("construct --kind diagonal --d 64 --n 32 --out " + out.string());
    EXPECT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(slurp(out / "construct_diagonal.jsonl"));
    EXPECT_EQ(j["passed"], true);
    EXPECT_EQ(j["statistic"], 32.0);
    const std::string csv = slurp(out / "construct_diagonal_attention.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "1" + std::string(31, ','));
}

TEST(Cli, FixtureThenDetect) {
    const fs::path out = scratch("detect");
    ASSERT_EQ(cli("emit-fixture --kind positional-heads --n 256 --out " + out.string()).code, 0);
    const CliResult r = cli("detect-heads --input " + (out / "fixture_positional-heads.qkt1").string() + " --out " +
                      out.string());
    EXPECT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(slurp(out / "positional_heads_layer0.json"));
    EXPECT_EQ(j["heads"], nlohmann::json::array({5, 8}));
}

}  // namespace
