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

// JSON-over-HTTP frontend for server::Server. Endpoints are documented in
// docs/formats.md.

#ifndef FEEDER_SERVER_HTTP_HPP
#define FEEDER_SERVER_HTTP_HPP

#include <functional>
#include <memory>
#include <string>

#include "feeder/server.hpp"

namespace feeder::server {

struct HttpOptions {
  /// Required as `Authorization: Bearer <token>` on trap-target writes.
  std::string operator_token;
  /// Unix milliseconds; defaults to the system clock.
  std::function<Millis()> clock;
};

class HttpApi {
 public:
  HttpApi(Server& server, HttpOptions options);
  ~HttpApi();
  HttpApi(const HttpApi&) = delete;
  HttpApi& operator=(const HttpApi&) = delete;

  /// Binds and serves until stop(); returns false if binding failed.
  bool listen(const std::string& host, int port);
  /// Binds to an ephemeral port and returns it (or -1); serve with run().
  int bind_any(const std::string& host);
  bool run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace feeder::server

#endif  // FEEDER_SERVER_HTTP_HPP
