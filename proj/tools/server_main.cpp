// Copyright 2026 The Feeding Station Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// feeder-server --journal <file> [--host H] [--port P]
// The operator token comes from FEEDER_OPERATOR_TOKEN or --token.

#include <csignal>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "feeder/server_http.hpp"

namespace {
feeder::server::HttpApi* g_api = nullptr;
void on_signal(int) {
  if (g_api) g_api->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feeding station server"};
  std::string journal;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string token;
  if (const char* env = std::getenv("FEEDER_OPERATOR_TOKEN")) token = env;
  app.add_option("--journal", journal, "Append-only journal; replayed at start")->required();
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
  app.add_option("--token", token, "Operator bearer token for trap-target writes");
  CLI11_PARSE(app, argc, argv);

  if (token.empty()) {
    std::cerr << "feeder-server: an operator token is required (--token or FEEDER_OPERATOR_TOKEN)\n";
    return 2;
  }
  try {
    feeder::server::Server server(std::make_unique<feeder::server::FileStorage>(journal));
    feeder::server::HttpApi api(server, {token, {}});
    g_api = &api;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "feeder-server: " << server.visit_count() << " visits replayed, listening on " << host << ':' << port
              << '\n';
    if (!api.listen(host, port)) {
      std::cerr << "feeder-server: cannot bind " << host << ':' << port << '\n';
      return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "feeder-server: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
