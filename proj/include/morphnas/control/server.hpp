#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#ifndef CPPHTTPLIB_THREAD_POOL_COUNT
#define CPPHTTPLIB_THREAD_POOL_COUNT 16
#endif
#include <httplib.h>
#include <json.hpp>

#include "morphnas/core/error.hpp"
#include "morphnas/core/io.hpp"
#include "morphnas/engine/history.hpp"
#include "morphnas/engine/meta.hpp"
#include "morphnas/engine/publisher.hpp"

namespace morphnas::control {

using engine::json;

/// Splits "host:port", "[v6]:port" or ":port" (any interface).
inline std::pair<std::string, int> parse_bind_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw InvalidArgument("bind address \"" + addr + "\" must be host:port");
  std::string host = addr.substr(0, colon);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  if (host.empty()) host = "0.0.0.0";
  const std::string port_text = addr.substr(colon + 1);
  std::size_t used = 0;
  int port = -1;
  try {
    port = std::stoi(port_text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port_text.size() || port < 0 || port > 65535)
    throw InvalidArgument("bind address \"" + addr + "\" has an invalid port");
  return {host, port};
}

/// Formats one server-sent event.
inline std::string sse_frame(const json& e) {
  std::string out;
  if (e.contains("seq")) out += "id: " + std::to_string(e["seq"].get<std::uint64_t>()) + "\n";
  out += "event: " + e.value("type", std::string("message")) + "\n";
  out += "data: " + e.dump() + "\n\n";
  return out;
}

/// HTTP front end over a Publisher. Handlers only read published snapshots
/// and write the meta file; they never touch the network being trained.
class ControlServer {
 public:
  ControlServer(std::shared_ptr<engine::Publisher> publisher, std::filesystem::path meta_file)
      : pub_(std::move(publisher)), meta_file_(std::move(meta_file)) {
    if (!pub_) throw InvalidArgument("ControlServer: publisher is required");
    routes();
  }

  ~ControlServer() { stop(); }

  ControlServer(const ControlServer&) = delete;
  ControlServer& operator=(const ControlServer&) = delete;

  /// Binds and starts serving on a background thread; port 0 picks a free
  /// port. Returns the bound port.
  int start(const std::string& host, int port) {
    if (thread_.joinable()) throw InvalidArgument("ControlServer: already started");
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
      if (port_ < 0) throw Error("cannot bind " + host + " on any port");
    } else {
      if (!server_.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
      port_ = port;
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  void stop() {
    stopping_.store(true);
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  static void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void not_started(httplib::Response& res) {
    send_json(res, 503, {{"error", "run not started"}});
  }

  engine::MetaParams current_meta_base() const {
    engine::MetaParams base;
    if (auto st = pub_->status(); st && st->contains("pending_meta")) {
      try {
        base = engine::meta_from_json(st->at("pending_meta"));
      } catch (const std::exception&) {
      }
    }
    // The file is canonical; unreadable or invalid content falls back to the
    // engine's view.
    try {
      const auto doc = json::parse(read_file_text(meta_file_));
      std::vector<engine::FieldError> errs;
      if (auto m = engine::merge_meta(base, doc, errs)) base = *m;
    } catch (const std::exception&) {
    }
    return base;
  }

  void routes() {
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"}, {"Cache-Control", "no-store"}});
    server_.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    server_.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
      auto st = pub_->status();
      if (!st) return not_started(res);
      send_json(res, 200, *st);
    });

    server_.Get("/architecture", [this](const httplib::Request&, httplib::Response& res) {
      if (!pub_->status()) return not_started(res);
      auto arch = pub_->architecture();
      if (!arch) return not_started(res);
      send_json(res, 200, *arch);
    });

    server_.Get("/history", [this](const httplib::Request& req, httplib::Response& res) {
      if (!pub_->status()) return not_started(res);
      std::size_t since = 0;
      if (req.has_param("since")) {
        const std::string s = req.get_param_value("since");
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
          if (!s.empty() && s[0] != '-') v = std::stoull(s, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (s.empty() || used != s.size())
          return send_json(res, 400, {{"error", "since must be a non-negative integer epoch"},
                                      {"fields", json::array({{{"field", "since"}, {"message", "not an integer"}}})}});
        since = static_cast<std::size_t>(v);
      }
      json events = json::array();
      for (const auto& e : pub_->history_since(since)) events.push_back(engine::to_json(e));
      send_json(res, 200, events);
    });

    server_.Post("/meta", [this](const httplib::Request& req, httplib::Response& res) {
      json update;
      try {
        update = json::parse(req.body);
      } catch (const json::exception& e) {
        return send_json(res, 400, {{"error", std::string("body is not valid JSON: ") + e.what()},
                                    {"fields", json::array()}});
      }
      std::lock_guard lock(meta_mu_);
      std::vector<engine::FieldError> errs;
      const auto merged = engine::merge_meta(current_meta_base(), update, errs);
      if (!merged) {
        json fields = json::array();
        for (const auto& e : errs) fields.push_back({{"field", e.field}, {"message", e.message}});
        return send_json(res, 400, {{"error", "invalid meta-parameters: " + engine::describe(errs)}, {"fields", fields}});
      }
      try {
        write_file_atomic(meta_file_, engine::to_json(*merged).dump(2) + "\n");
      } catch (const std::exception& e) {
        return send_json(res, 500, {{"error", std::string("cannot write meta file: ") + e.what()}});
      }
      send_json(res, 200, engine::to_json(*merged));
    });

    server_.Get("/events", [this](const httplib::Request&, httplib::Response& res) {
      if (!pub_->status()) return not_started(res);
      auto [sub, cursor] = pub_->hub().subscribe();
      auto hello = std::make_shared<std::optional<json>>(json{{"type", "hello"}, {"cursor", cursor}});
      res.set_header("X-Accel-Buffering", "no");
      res.set_chunked_content_provider(
          "text/event-stream",
          [this, sub = sub, hello](std::size_t, httplib::DataSink& sink) {
            if (*hello) {
              const auto f = sse_frame(**hello);
              hello->reset();
              return sink.write(f.data(), f.size());
            }
            for (int idle = 1; !stopping_.load(); ++idle) {
              if (!sink.is_writable()) return false;
              if (auto e = sub->next(std::chrono::milliseconds(200))) {
                const auto f = sse_frame(*e);
                return sink.write(f.data(), f.size());
              }
              if (sub->closed()) {
                const auto f = sse_frame(json{{"type", "end"}});
                sink.write(f.data(), f.size());
                sink.done();
                return true;
              }
              // Keeps idle connections alive and detects departed clients.
              static constexpr char kPing[] = ": ping\n\n";
              if (idle % 25 == 0 && !sink.write(kPing, sizeof kPing - 1)) return false;
            }
            sink.done();
            return true;
          });
    });
  }

  std::shared_ptr<engine::Publisher> pub_;
  std::filesystem::path meta_file_;
  httplib::Server server_;
  std::mutex meta_mu_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
  int port_ = -1;
};

}  // namespace morphnas::control
