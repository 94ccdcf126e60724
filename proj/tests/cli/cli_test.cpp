// Copyright 2026 The Bracelet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// End-to-end tests of the bracelet CLI binary. The binary path and the repo
// root (for scenario/data fixtures) come from the environment set by ctest.

#define CATCH_CONFIG_MAIN
#include <catch2/catch.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;

std::string env_or_fail(const char* name) {
  const char* value = std::getenv(name);
  REQUIRE(value != nullptr);
  return value;
}

std::string cli_bin() { return env_or_fail("BRACELET_CLI_BIN"); }
fs::path repo_dir() { return env_or_fail("BRACELET_REPO_DIR"); }

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  std::string cmd = cli_bin() + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult result;
  std::array<char, 4096> buffer;
  while (fgets(buffer.data(), buffer.size(), pipe) != nullptr) {
    result.output += buffer.data();
  }
  int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

pid_t spawn_cli(const std::string& args, const fs::path& log_path) {
  std::string cmd = "exec " + cli_bin() + " " + args + " >" + log_path.string() + " 2>&1";
  pid_t pid = fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  return pid;
}

int wait_exit(pid_t pid) {
  int status = 0;
  REQUIRE(waitpid(pid, &status, 0) == pid);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool wait_ready(int port, int timeout_ms = 10000) {
  auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  while (std::chrono::steady_clock::now() < deadline) {
    httplib::Client client("127.0.0.1", port);
    client.set_connection_timeout(0, 200000);
    if (auto res = client.Get("/v1/infected")) {
      return res->status == 200;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  return false;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("bracelet_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
  static inline int counter = 0;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

int test_port() { return 28400 + static_cast<int>(::getpid() % 800); }

const std::string kTagA = "01010101010101010101010101010101";
const std::string kTagB = "02020202020202020202020202020202";

TEST_CASE("rfid encode and decode round trip through hex") {
  auto encoded = run_cli("rfid encode --risk no --epoch 0");
  CHECK(encoded.exit_code == 0);
  CHECK(encoded.output == "524201000000000018\n");

  auto decoded = run_cli("rfid decode 524201000000000018");
  CHECK(decoded.exit_code == 0);
  auto j = nlohmann::json::parse(decoded.output);
  CHECK(j.at("risk") == 0);
  CHECK(j.at("risk_name") == "no_risk");
  CHECK(j.at("issued_epoch") == 0);

  auto high = run_cli("rfid encode --risk high --epoch 100");
  CHECK(high.output == "5242010200000064e7\n");

  auto corrupt = run_cli("rfid decode 524201000000000019");
  CHECK(corrupt.exit_code == 2);
  CHECK(corrupt.output.find("corrupt") != std::string::npos);

  auto garbage = run_cli("rfid decode zz");
  CHECK(garbage.exit_code == 2);
}

TEST_CASE("fit-model recovers the calibration parameters") {
  auto csv = (repo_dir() / "data" / "calibration_example.csv").string();
  auto result = run_cli("fit-model --calibration " + csv);
  REQUIRE(result.exit_code == 0);
  auto j = nlohmann::json::parse(result.output);
  CHECK(j.at("n").get<double>() == Approx(2.0).margin(1e-9));
  CHECK(j.at("pl0_db").get<double>() == Approx(40.0).margin(1e-9));

  TempDir dir;
  auto out = dir.path / "model.json";
  auto with_output = run_cli("fit-model --calibration " + csv + " --output " + out.string());
  CHECK(with_output.exit_code == 0);
  CHECK(nlohmann::json::parse(slurp(out)).at("n").get<double>() == Approx(2.0).margin(1e-9));
}

TEST_CASE("fit-model distinguishes io from validation failures") {
  auto missing = run_cli("fit-model --calibration /no/such/file.csv");
  CHECK(missing.exit_code == 1);

  TempDir dir;
  auto degenerate = dir.path / "one_distance.csv";
  std::ofstream(degenerate) << "tx_power_dbm,rssi_dbm,distance_m\n0,-40,1\n0,-41,1\n";
  auto result = run_cli("fit-model --calibration " + degenerate.string());
  CHECK(result.exit_code == 2);
  CHECK(result.output.find("degenerate") != std::string::npos);
}

TEST_CASE("simulate writes a deterministic report and a summary line") {
  TempDir dir;
  auto scenario = (repo_dir() / "scenarios" / "smoke.json").string();
  auto out1 = dir.path / "report1.json";
  auto out2 = dir.path / "report2.json";

  auto first = run_cli("simulate --scenario " + scenario + " --output " + out1.string());
  REQUIRE(first.exit_code == 0);
  CHECK(first.output.find("precision=1") != std::string::npos);
  CHECK(first.output.find("recall=1") != std::string::npos);

  auto second = run_cli("simulate --scenario " + scenario + " --output " + out2.string());
  REQUIRE(second.exit_code == 0);
  CHECK(slurp(out1) == slurp(out2));

  auto report = nlohmann::json::parse(slurp(out1));
  CHECK(report.at("schema") == "bracelet-sim-report/1");
  CHECK(report.at("detected_pairs") == nlohmann::json::array({"alice->bob"}));
}

TEST_CASE("simulate validates scenarios with line-of-sight messages") {
  TempDir dir;
  auto bad = dir.path / "bad.json";
  std::ofstream(bad) << R"({
    "duration_s": 100,
    "agents": [
      {"id": "wanderer", "trajectory": [
        {"t_s": 0, "x_m": 0, "y_m": 0},
        {"t_s": 0, "x_m": 1, "y_m": 0}
      ]}
    ]
  })";
  auto result = run_cli("simulate --scenario " + bad.string());
  CHECK(result.exit_code == 2);
  CHECK(result.output.find("wanderer") != std::string::npos);

  auto missing = run_cli("simulate --scenario /no/such/scenario.json");
  CHECK(missing.exit_code == 1);
}

TEST_CASE("simulate emits the risk timeline as csv when asked") {
  TempDir dir;
  auto scenario = (repo_dir() / "scenarios" / "noisy_pair.json").string();
  auto out = dir.path / "timeline.csv";
  auto result =
      run_cli("simulate --scenario " + scenario + " --output " + out.string() + " --format csv");
  REQUIRE(result.exit_code == 0);
  auto csv = slurp(out);
  CHECK(csv.rfind("t_s,agent,risk\n", 0) == 0);
}

TEST_CASE("serve, check, journal replay, and port conflicts") {
  TempDir dir;
  int port = test_port();
  auto journal = dir.path / "journal.jsonl";
  auto listen = "127.0.0.1:" + std::to_string(port);

  pid_t server = spawn_cli("serve --listen " + listen + " --journal " + journal.string(),
                           dir.path / "serve1.log");
  REQUIRE(wait_ready(port));

  // Against an empty journal every check is negative.
  auto early = dir.path / "contacts_early.json";
  std::ofstream(early) << nlohmann::json{
      {"contacts", {{{"tag", kTagA}, {"exposure_s", 5000.0}}}}}.dump();
  auto nothing = run_cli("check --contacts " + early.string() + " --server " + listen);
  REQUIRE(nothing.exit_code == 0);
  CHECK(nlohmann::json::parse(nothing.output).at("positive") == false);

  {
    httplib::Client client("127.0.0.1", port);
    nlohmann::json bundle{{"tags", {kTagA, kTagB}}};  // one case, two rotations
    auto upload = client.Post("/v1/cases", bundle.dump(), "application/json");
    REQUIRE(upload);
    REQUIRE(upload->status == 200);
  }

  // A second server cannot bind the same port and must exit 1.
  pid_t conflicting = spawn_cli(
      "serve --listen " + listen + " --journal " + (dir.path / "other.jsonl").string(),
      dir.path / "serve_conflict.log");
  CHECK(wait_exit(conflicting) == 1);

  // Eight minutes on each of the case's two tags: 960 s in one group.
  auto contacts = dir.path / "contacts.json";
  std::ofstream(contacts) << nlohmann::json{
      {"contacts", {{{"tag", kTagA}, {"exposure_s", 480.0}},
                    {{"tag", kTagB}, {"exposure_s", 480.0}}}}}.dump();
  auto check = run_cli("check --contacts " + contacts.string() + " --server " + listen);
  REQUIRE(check.exit_code == 0);
  auto verdict = nlohmann::json::parse(check.output);
  CHECK(verdict.at("positive") == true);
  CHECK(verdict.at("max_group_exposure_s") == 960.0);

  auto low = dir.path / "contacts_low.json";
  std::ofstream(low) << nlohmann::json{
      {"contacts", {{{"tag", kTagA}, {"exposure_s", 480.0}},
                    {{"tag", kTagB}, {"exposure_s", 300.0}}}}}.dump();
  auto negative = run_cli("check --contacts " + low.string() + " --server " + listen);
  REQUIRE(negative.exit_code == 0);
  CHECK(nlohmann::json::parse(negative.output).at("positive") == false);

  std::string before;
  {
    httplib::Client client("127.0.0.1", port);
    auto fetch = client.Get("/v1/infected?cursor=0");
    REQUIRE(fetch);
    before = fetch->body;
  }

  kill(server, SIGTERM);
  wait_exit(server);

  // Restart over the same journal: identical published groups.
  pid_t restarted = spawn_cli("serve --listen " + listen + " --journal " + journal.string(),
                              dir.path / "serve2.log");
  REQUIRE(wait_ready(port));
  {
    httplib::Client client("127.0.0.1", port);
    auto fetch = client.Get("/v1/infected?cursor=0");
    REQUIRE(fetch);
    CHECK(fetch->body == before);
  }
  kill(restarted, SIGTERM);
  wait_exit(restarted);

  // An unreadable journal refuses to serve at all.
  auto corrupt = dir.path / "corrupt.jsonl";
  std::ofstream(corrupt) << "not json\n";
  auto refused = run_cli("serve --listen " + listen + " --journal " + corrupt.string());
  CHECK(refused.exit_code == 1);
}

TEST_CASE("check against an unreachable server is an environment failure") {
  TempDir dir;
  auto contacts = dir.path / "contacts.json";
  std::ofstream(contacts) << nlohmann::json{
      {"contacts", {{{"tag", kTagA}, {"exposure_s", 10.0}}}}}.dump();
  auto result = run_cli("check --contacts " + contacts.string() + " --server 127.0.0.1:1");
  CHECK(result.exit_code == 1);
}

TEST_CASE("seed overrides work in either flag position") {
  TempDir dir;
  auto scenario = (repo_dir() / "scenarios" / "noisy_pair.json").string();
  auto before = dir.path / "before.json";
  auto after = dir.path / "after.json";
  auto with_default = dir.path / "default.json";
  REQUIRE(run_cli("--seed 123 simulate --scenario " + scenario + " --output " +
                  before.string()).exit_code == 0);
  REQUIRE(run_cli("simulate --seed 123 --scenario " + scenario + " --output " +
                  after.string()).exit_code == 0);
  REQUIRE(run_cli("simulate --scenario " + scenario + " --output " +
                  with_default.string()).exit_code == 0);
  CHECK(slurp(before) == slurp(after));
  CHECK(slurp(before) != slurp(with_default));  // file seed is 7, override is 123
}

TEST_CASE("unknown flags and missing subcommands fail validation") {
  CHECK(run_cli("simulate --no-such-flag").exit_code == 2);
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("--help").exit_code == 0);
}

}  // namespace
