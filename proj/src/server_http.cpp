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

#include "feeder/server_http.hpp"

#include <charconv>
#include <chrono>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

namespace feeder::server {

using json = nlohmann::json;

namespace {

constexpr std::size_t kExportPage = 500;

template <typename T>
T parse_param(const httplib::Request& req, const std::string& name) {
  const std::string v = req.get_param_value(name);
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ValidationError(fmt::format("parameter {}: '{}' is not a valid number", name, v));
  }
  return out;
}

VisitFilter parse_filter(const httplib::Request& req) {
  VisitFilter f;
  if (req.has_param("station")) f.station = parse_param<StationId>(req, "station");
  if (req.has_param("tag")) {
    const auto tag = req.get_param_value("tag");
    if (tag == "untagged") {
      f.untagged_only = true;
    } else {
      try {
        f.tag = TagId::parse(tag);
      } catch (const std::exception& e) {
        throw ValidationError(fmt::format("parameter tag: {}", e.what()));
      }
    }
  }
  if (req.has_param("from")) f.from_ts = parse_param<Seconds>(req, "from");
  if (req.has_param("to")) f.to_ts = parse_param<Seconds>(req, "to");
  if (req.has_param("min_weight")) f.min_weight = parse_param<double>(req, "min_weight");
  if (req.has_param("max_weight")) f.max_weight = parse_param<double>(req, "max_weight");
  if (req.has_param("max_std")) f.max_std = parse_param<double>(req, "max_std");
  f.validate();
  return f;
}

json tag_json(const std::optional<TagId>& tag) { return tag ? json(tag->str()) : json(nullptr); }

json visit_json(const StoredVisit& v) {
  return {{"station_id", v.station_id}, {"seq", v.seq},         {"tag", tag_json(v.tag)},
          {"entry_ts", v.entry_ts},     {"exit_ts", v.exit_ts}, {"weight_g", v.weight_grams},
          {"std_g", v.std_grams},       {"received_ts", v.received_ts}};
}

json update_json(const codec::TrapUpdate& u) {
  json ops = json::array();
  for (const auto& op : u.ops) {
    ops.push_back({{"op", op.kind == codec::TagOpKind::kAdd ? "add" : "remove"}, {"tag", op.tag.str()}});
  }
  return {{"server_time", u.server_time},
          {"master", u.master ? json(*u.master) : json(nullptr)},
          {"more_follows", u.more_follows},
          {"part", u.part},
          {"ops", ops},
          {"payload_hex", to_hex(codec::encode(u))}};
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view message) {
  send_json(res, status, {{"error", message}});
}

}  // namespace

struct HttpApi::Impl {
  Server& server;
  HttpOptions options;
  httplib::Server http;

  Impl(Server& s, HttpOptions o) : server(s), options(std::move(o)) {
    if (!options.clock) {
      options.clock = [] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
      };
    }
    routes();
  }

  // Wraps a handler so validation problems become 400 responses.
  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const ValidationError& e) {
        send_error(res, 400, e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, fmt::format("bad request body: {}", e.what()));
      } catch (const std::invalid_argument& e) {
        send_error(res, 400, e.what());
      } catch (const std::out_of_range& e) {
        send_error(res, 400, e.what());
      }
    };
  }

  bool authorized(const httplib::Request& req) const {
    if (options.operator_token.empty()) return false;
    return req.get_header_value("Authorization") == "Bearer " + options.operator_token;
  }

  void routes() {
    http.Post("/ingest", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      const auto station = body.at("station_id").get<StationId>();
      const Bytes payload = from_hex(body.at("payload_hex").get<std::string>());
      const auto r = server.ingest(station, payload, options.clock());
      json out{{"ack", r.ack}, {"status", to_string(r.status)}};
      if (r.downlink) out["downlink_hex"] = to_hex(*r.downlink);
      send_json(res, 200, out);
    }));

    http.Get("/visits", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto filter = parse_filter(req);
      std::optional<std::string> cursor;
      if (req.has_param("cursor")) cursor = req.get_param_value("cursor");
      std::optional<std::size_t> limit;
      if (req.has_param("limit")) limit = parse_param<std::size_t>(req, "limit");
      const auto page = server.query_visits(filter, cursor, limit);
      json visits = json::array();
      for (const auto& v : page.visits) visits.push_back(visit_json(v));
      send_json(res, 200,
                {{"visits", visits}, {"next_cursor", page.next_cursor ? json(*page.next_cursor) : json(nullptr)}});
    }));

    http.Get("/status", guarded([this](const httplib::Request&, httplib::Response& res) {
      json stations = json::array();
      for (const auto& s : server.status()) {
        json st{{"station_id", s.station_id},
                {"status_count", s.status_count},
                {"visit_count", s.visit_count},
                {"capture_count", s.capture_count},
                {"last_seen", s.last_seen},
                {"last_issued_server_time", s.last_issued_server_time},
                {"last_sync_request", s.last_sync_request ? json(*s.last_sync_request) : json(nullptr)}};
        if (s.last_status) {
          st["last_status"] = {{"ts", s.last_status->ts},         {"temp_in", s.last_status->temp_in},
                               {"temp_out", s.last_status->temp_out}, {"rh_in", s.last_status->rh_in},
                               {"rh_out", s.last_status->rh_out},     {"error_flags", s.last_status->error_flags}};
        } else {
          st["last_status"] = nullptr;
        }
        stations.push_back(st);
      }
      json captures = json::array();
      for (const auto& c : server.captures()) {
        captures.push_back({{"station_id", c.station_id},
                            {"seq", c.seq},
                            {"ts", c.ts},
                            {"tag", tag_json(c.tag)},
                            {"acknowledged", c.acknowledged}});
      }
      send_json(res, 200,
                {{"stations", stations}, {"captures", captures}, {"quarantined", server.quarantine().size()}});
    }));

    http.Get("/export.csv", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto filter = parse_filter(req);
      // Pages are pulled on demand so the response is never fully buffered.
      struct State {
        bool header_sent = false;
        std::optional<std::string> cursor;
        bool done = false;
      };
      auto state = std::make_shared<State>();
      res.set_chunked_content_provider(
          "text/csv", [this, filter, state](std::size_t, httplib::DataSink& sink) {
            if (!state->header_sent) {
              const auto h = Server::csv_header();
              sink.write(h.data(), h.size());
              state->header_sent = true;
              return true;
            }
            if (state->done) {
              sink.done();
              return true;
            }
            auto page = server.query_visits(filter, state->cursor, kExportPage);
            std::string chunk;
            for (const auto& v : page.visits) chunk += Server::csv_row(v);
            if (!chunk.empty()) sink.write(chunk.data(), chunk.size());
            state->cursor = std::move(page.next_cursor);
            if (!state->cursor) state->done = true;
            return true;
          });
    }));

    http.Post(R"(/stations/(\d+)/trap-targets)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                if (!authorized(req)) {
                  send_error(res, 401, "operator token required");
                  return;
                }
                const auto station = static_cast<StationId>(std::stoul(req.matches[1].str()));
                const auto body = json::parse(req.body);
                const auto op_id = body.at("operator").get<std::string>();
                std::vector<TargetChange> changes;
                for (const auto& c : body.at("changes")) {
                  TargetChange tc;
                  if (c.contains("master")) {
                    tc.master = c.at("master").get<bool>();
                  } else {
                    const auto op = c.at("op").get<std::string>();
                    if (op != "add" && op != "remove") throw ValidationError(fmt::format("unknown op '{}'", op));
                    tc.kind = op == "add" ? codec::TagOpKind::kAdd : codec::TagOpKind::kRemove;
                    try {
                      tc.tag = TagId::parse(c.at("tag").get<std::string>());
                    } catch (const json::exception&) {
                      throw;
                    } catch (const std::exception& e) {
                      throw ValidationError(fmt::format("malformed tag: {}", e.what()));
                    }
                  }
                  changes.push_back(tc);
                }
                const auto entries = server.set_trap_targets(station, changes, op_id, options.clock());
                json out = json::array();
                for (const auto& e : entries) {
                  out.push_back({{"tag", tag_json(e.tag)},
                                 {"op", e.tag ? (e.kind == codec::TagOpKind::kAdd ? "add" : "remove") : "master"},
                                 {"master", e.master},
                                 {"change_ts", e.change_ts},
                                 {"operator", e.operator_id}});
                }
                send_json(res, 200, {{"entries", out}});
              }));

    http.Get(R"(/stations/(\d+)/trap-delta)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto station = static_cast<StationId>(std::stoul(req.matches[1].str()));
      const Seconds last = req.has_param("last_updated") ? parse_param<Seconds>(req, "last_updated") : 0;
      json updates = json::array();
      for (const auto& u : server.trap_delta(station, last, options.clock())) updates.push_back(update_json(u));
      send_json(res, 200, {{"updates", updates}});
    }));

    http.Post(R"(/stations/(\d+)/captures/ack)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                if (!authorized(req)) {
                  send_error(res, 401, "operator token required");
                  return;
                }
                const auto station = static_cast<StationId>(std::stoul(req.matches[1].str()));
                send_json(res, 200, {{"acknowledged", server.acknowledge_captures(station)}});
              }));
  }
};

HttpApi::HttpApi(Server& server, HttpOptions options) : impl_(std::make_unique<Impl>(server, std::move(options))) {}

HttpApi::~HttpApi() { stop(); }

bool HttpApi::listen(const std::string& host, int port) { return impl_->http.listen(host, port); }

int HttpApi::bind_any(const std::string& host) { return impl_->http.bind_to_any_port(host); }

bool HttpApi::run() { return impl_->http.listen_after_bind(); }

void HttpApi::stop() {
  if (impl_) impl_->http.stop();
}

void HttpApi::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace feeder::server
