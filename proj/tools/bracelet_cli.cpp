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

// bracelet: simulate fleets, serve the tag service, fit distance models,
// run exposure checks, and program/read RFID risk payloads.
//
// Exit codes: 0 success, 1 environment/IO failure, 2 validation failure.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "bracelet/cloud.hpp"
#include "bracelet/device.hpp"
#include "bracelet/distance.hpp"
#include "bracelet/error.hpp"
#include "bracelet/hex.hpp"
#include "bracelet/http_service.hpp"
#include "bracelet/rfid.hpp"
#include "bracelet/scenario.hpp"
#include "bracelet/sim.hpp"

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitEnvironment = 1;
constexpr int kExitValidation = 2;

httplib::Server* g_server = nullptr;

void handle_signal(int) {
  if (g_server != nullptr) {
    g_server->stop();
  }
}

int exit_code_for(const bracelet::Error& e) {
  switch (e.code()) {
    case bracelet::ErrorCode::kIo:
      return kExitEnvironment;
    default:
      return kExitValidation;
  }
}

std::string read_file(const std::string& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw bracelet::Error(bracelet::ErrorCode::kIo, path + " is not a readable file");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw bracelet::Error(bracelet::ErrorCode::kIo, "cannot read " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) {
    throw bracelet::Error(bracelet::ErrorCode::kIo, "cannot write " + path);
  }
}

// "host:port" or "http://host:port"
std::pair<std::string, int> parse_address(std::string address) {
  const std::string scheme = "http://";
  if (address.rfind(scheme, 0) == 0) {
    address = address.substr(scheme.size());
  }
  auto colon = address.rfind(':');
  if (colon == std::string::npos || colon + 1 >= address.size()) {
    throw bracelet::Error(bracelet::ErrorCode::kValidation,
                          "address must be host:port, got \"" + address + "\"");
  }
  int port = 0;
  try {
    port = std::stoi(address.substr(colon + 1));
  } catch (const std::exception&) {
    throw bracelet::Error(bracelet::ErrorCode::kValidation,
                          "bad port in address \"" + address + "\"");
  }
  return {address.substr(0, colon), port};
}

int run_simulate(const std::string& scenario_path, const std::string& output_path,
                 const std::string& mode, std::optional<std::uint64_t> seed,
                 const std::string& format) {
  auto text = read_file(scenario_path);
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // e.what() carries the line/column of the syntax error
    throw bracelet::Error(bracelet::ErrorCode::kValidation, scenario_path + ": " + e.what());
  }
  bracelet::Scenario scenario = bracelet::Scenario::from_json(parsed);
  if (!mode.empty()) {
    if (mode == "local") {
      scenario.matching_mode = bracelet::MatchingMode::kLocal;
    } else if (mode == "cloud") {
      scenario.matching_mode = bracelet::MatchingMode::kCloud;
    } else {
      throw bracelet::Error(bracelet::ErrorCode::kValidation,
                            "--mode must be local or cloud");
    }
  }
  if (seed) {
    scenario.seed = *seed;
  }
  bracelet::SimReport report = bracelet::run(scenario);
  std::string rendered =
      format == "csv" ? report.risk_timeline_csv() : report.to_json().dump(2) + "\n";
  if (output_path.empty()) {
    std::cout << rendered;
  } else {
    write_file(output_path, rendered);
  }
  std::cout << "precision=" << report.precision << " recall=" << report.recall
            << " detected_pairs=" << report.detected_pairs.size() << "\n";
  return kExitOk;
}

int run_serve(const std::string& listen, const std::string& journal_path,
              double threshold_s, std::optional<std::uint64_t> seed) {
  auto [host, port] = parse_address(listen);
  bracelet::TagService::Options options;
  options.journal_path = journal_path;
  options.default_threshold_s = threshold_s;
  if (seed) {
    options.group_id_seed = *seed;
  }
  bracelet::TagService service(std::move(options));  // replays journal; throws kIo if unreadable

  httplib::Server server;
  bracelet::register_routes(server, service);
  // httplib's default options include SO_REUSEPORT, which would let two
  // servers share one port; an occupied port must be a startup failure.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes),
               sizeof(yes));
  });
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);

  if (!server.bind_to_port(host, port)) {
    std::cerr << "cannot bind " << host << ":" << port << "\n";
    return kExitEnvironment;
  }
  std::cout << "listening on " << host << ":" << port << " (cursor "
            << service.cursor() << ")" << std::endl;
  server.listen_after_bind();
  return kExitOk;
}

int run_fit_model(const std::string& calibration_path, const std::string& output_path) {
  std::ifstream in(calibration_path);
  if (!in) {
    throw bracelet::Error(bracelet::ErrorCode::kIo, "cannot read " + calibration_path);
  }
  auto samples = bracelet::parse_calibration_csv(in);
  auto model = bracelet::fit_path_loss(samples);
  std::string rendered = bracelet::model_to_json(model).dump(2) + "\n";
  if (output_path.empty()) {
    std::cout << rendered;
  } else {
    write_file(output_path, rendered);
  }
  return kExitOk;
}

int run_check(const std::string& contacts_path, const std::string& server_address,
              std::optional<double> threshold_s) {
  auto text = read_file(contacts_path);
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw bracelet::Error(bracelet::ErrorCode::kValidation, contacts_path + ": " + e.what());
  }
  if (threshold_s) {
    body["threshold_s"] = *threshold_s;
  }
  auto [host, port] = parse_address(server_address);
  httplib::Client client(host, port);
  auto response = client.Post("/v1/check", body.dump(), "application/json");
  if (!response) {
    throw bracelet::Error(bracelet::ErrorCode::kIo,
                          "cannot reach " + host + ":" + std::to_string(port));
  }
  std::cout << response->body << "\n";
  if (response->status != 200) {
    return kExitValidation;
  }
  return kExitOk;
}

int run_rfid_encode(const std::string& risk, std::uint32_t epoch) {
  auto payload = bracelet::encode_risk(bracelet::risk_level_from_name(risk), epoch);
  std::cout << bracelet::to_hex(payload) << "\n";
  return kExitOk;
}

int run_rfid_decode(const std::string& hex) {
  auto bytes = bracelet::from_hex(hex);
  auto decoded = bracelet::decode_risk(bytes);
  nlohmann::ordered_json j{{"risk", static_cast<int>(decoded.risk)},
                           {"risk_name", bracelet::risk_level_name(decoded.risk)},
                           {"issued_epoch", decoded.issued_epoch}};
  std::cout << j.dump() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"privacy-preserving social-distancing bracelet toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // lets --seed appear after the subcommand too

  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "override the RNG seed")->envname("BRACELET_SEED");

  // simulate
  auto* simulate = app.add_subcommand(
      "simulate", "run a scenario file deterministically (schema: schemas/scenario.schema.json)");
  std::string scenario_path, sim_output, sim_mode;
  std::string sim_format = "json";
  simulate->add_option("--scenario", scenario_path, "scenario JSON file")
      ->required()
      ->envname("BRACELET_SCENARIO");
  simulate->add_option("--output", sim_output, "report destination (default: stdout)");
  simulate->add_option("--mode", sim_mode, "matching mode override: local|cloud");
  simulate->add_option("--format", sim_format, "output format: json|csv (csv = risk timeline)")
      ->check(CLI::IsMember({"json", "csv"}));

  // serve
  auto* serve = app.add_subcommand("serve", "run the tag service");
  std::string listen = "127.0.0.1:8471";
  std::string journal_path;
  double serve_threshold = bracelet::kDefaultExposureThresholdS;
  serve->add_option("--listen", listen, "host:port to bind")->envname("BRACELET_LISTEN");
  serve->add_option("--journal", journal_path, "append-only JSONL journal path")
      ->required()
      ->envname("BRACELET_JOURNAL");
  serve->add_option("--threshold-s", serve_threshold, "default exposure threshold (seconds)")
      ->envname("BRACELET_THRESHOLD_S");

  // fit-model
  auto* fit = app.add_subcommand("fit-model", "fit the path-loss distance model");
  std::string calibration_path, fit_output;
  fit->add_option("--calibration", calibration_path,
                  "CSV with header tx_power_dbm,rssi_dbm,distance_m")
      ->required();
  fit->add_option("--output", fit_output, "model JSON destination (default: stdout)");

  // check
  auto* check = app.add_subcommand("check", "query a running service for an exposure decision");
  std::string contacts_path, server_address = "127.0.0.1:8471";
  std::optional<double> check_threshold;
  check->add_option("--contacts", contacts_path, "contacts JSON file")->required();
  check->add_option("--server", server_address, "service address")->envname("BRACELET_SERVER");
  check->add_option("--threshold-s", check_threshold, "exposure threshold override");

  // rfid
  auto* rfid = app.add_subcommand("rfid", "encode/decode the 9-byte risk payload");
  rfid->require_subcommand(1);
  auto* rfid_encode = rfid->add_subcommand("encode", "risk level -> payload hex");
  std::string risk_name;
  std::uint32_t issued_epoch = 0;
  rfid_encode->add_option("--risk", risk_name, "no|low|high (or 0|1|2)")->required();
  rfid_encode->add_option("--epoch", issued_epoch, "issuing epoch index")->required();
  auto* rfid_decode = rfid->add_subcommand("decode", "payload hex -> fields");
  std::string payload_hex;
  rfid_decode->add_option("payload", payload_hex, "18 hex chars")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help
    }
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (simulate->parsed()) {
      return run_simulate(scenario_path, sim_output, sim_mode, seed, sim_format);
    }
    if (serve->parsed()) {
      return run_serve(listen, journal_path, serve_threshold, seed);
    }
    if (fit->parsed()) {
      return run_fit_model(calibration_path, fit_output);
    }
    if (check->parsed()) {
      return run_check(contacts_path, server_address, check_threshold);
    }
    if (rfid->parsed()) {
      if (rfid_encode->parsed()) {
        return run_rfid_encode(risk_name, issued_epoch);
      }
      return run_rfid_decode(payload_hex);
    }
  } catch (const bracelet::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitEnvironment;
  }
  return kExitOk;
}
