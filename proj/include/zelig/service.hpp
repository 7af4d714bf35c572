#pragma once

// Live session server: HTTP for session creation and log retrieval,
// WebSocket for the play channel. Each session runs on its own strand with
// a wall-clock ticker; each connection owns a bounded outgoing queue.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast.hpp>
#include <spdlog/spdlog.h>

#include "zelig/cli.hpp"
#include "zelig/loader.hpp"
#include "zelig/runtime.hpp"
#include "zelig/trace_io.hpp"
#include "zelig/wire.hpp"

namespace zelig::service {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

struct ServiceConfig {
  std::shared_ptr<const ScriptDoc> script;
  RuntimeConfig runtime;
  std::uint64_t seed = 0;
  std::chrono::milliseconds tick{1000};
  std::chrono::milliseconds grace{10000};  // idle time before a session without clients is dropped
  std::optional<std::filesystem::path> record_dir;
  std::size_t max_queue = 256;  // pending frames per connection before it is dropped
};

/// Reads ZELIG_LOG (trace, debug, info, warn, err, critical, off).
inline void configure_logging(spdlog::level::level_enum fallback) {
  const char* env = std::getenv("ZELIG_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : fallback);
}

class LiveSession;

class PlayConnection : public std::enable_shared_from_this<PlayConnection> {
 public:
  PlayConnection(tcp::socket&& socket, std::size_t max_queue) : ws_(std::move(socket)), max_queue_(max_queue) {}

  void run(http::request<http::string_body> req, std::shared_ptr<LiveSession> session, std::string session_id);

  /// Thread-safe; frames are written in submission order.
  void send(std::shared_ptr<const std::string> frame) {
    net::post(ws_.get_executor(), [self = shared_from_this(), frame = std::move(frame)] { self->enqueue(frame); });
  }

 private:
  void enqueue(std::shared_ptr<const std::string> frame) {
    if (closed_) return;
    if (queue_.size() >= max_queue_) {
      spdlog::warn("dropping play client: {} frames pending", queue_.size());
      drop();
      return;
    }
    queue_.push_back(std::move(frame));
    if (queue_.size() == 1) write_front();
  }

  void write_front() {
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->drop();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty())
        self->write_front();
      else if (self->close_when_flushed_)
        self->ws_.async_close(websocket::close_code::normal, [self](beast::error_code) {});
    });
  }

  void drop() {
    closed_ = true;
    queue_.clear();
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).socket().close(ignored);
  }

  void read();
  void on_closed();

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  std::size_t max_queue_;
  bool closed_ = false;
  bool close_when_flushed_ = false;
  std::shared_ptr<LiveSession> session_;
};

class LiveSession : public std::enable_shared_from_this<LiveSession> {
 public:
  using ExpireFn = std::function<void(const std::string&)>;

  LiveSession(net::io_context& ioc, std::string id, std::shared_ptr<const ServiceConfig> cfg, ExpireFn on_expire)
      : strand_(net::make_strand(ioc)),
        ticker_(strand_),
        grace_(strand_),
        id_(std::move(id)),
        cfg_(std::move(cfg)),
        state_(start_session(cfg_->script, cfg_->runtime, cfg_->seed)),
        on_expire_(std::move(on_expire)) {}

  [[nodiscard]] const std::string& id() const { return id_; }

  void start() {
    net::dispatch(strand_, [self = shared_from_this()] {
      self->open_record();
      self->arm_grace();
    });
  }

  void attach(std::shared_ptr<PlayConnection> conn) {
    net::post(strand_, [self = shared_from_this(), conn = std::move(conn)] {
      if (self->stopped_) return;
      self->grace_.cancel();
      conn->send(std::make_shared<const std::string>(wire::update_frame(self->id_, self->state_, self->state_.log)));
      self->clients_.push_back(conn);
      if (!self->ticking_ && self->state_.status == SessionStatus::Running) {
        self->ticking_ = true;
        self->next_tick_ = std::chrono::steady_clock::now() + self->cfg_->tick;
        self->schedule_tick();
      }
    });
  }

  void detach(const PlayConnection* conn) {
    net::post(strand_, [self = shared_from_this(), conn] {
      std::erase_if(self->clients_, [conn](const auto& c) { return c.get() == conn; });
      if (self->clients_.empty() && !self->stopped_) self->arm_grace();
    });
  }

  void submit(std::string frame, std::weak_ptr<PlayConnection> from) {
    net::post(strand_, [self = shared_from_this(), frame = std::move(frame), from = std::move(from)] {
      if (self->stopped_) return;
      auto parsed = wire::parse_event_frame(frame, self->state_.clock, self->id_);
      if (auto* err = std::get_if<wire::WireError>(&parsed)) {
        self->reply(from, *err);
        return;
      }
      self->process(std::get<Event>(parsed), from);
    });
  }

  /// Calls `done` with the session log (JSON lines) from the session strand.
  void read_log(std::function<void(std::string)> done) {
    net::post(strand_, [self = shared_from_this(), done = std::move(done)] { done(write_log(self->state_.log)); });
  }

  void shutdown() {
    net::post(strand_, [self = shared_from_this()] { self->stop(); });
  }

 private:
  void open_record() {
    if (!cfg_->record_dir) return;
    std::filesystem::create_directories(*cfg_->record_dir);
    record_.open(*cfg_->record_dir / (id_ + ".jsonl"), std::ios::out | std::ios::trunc);
    if (!record_) spdlog::error("session {}: cannot open record file", id_);
  }

  void arm_grace() {
    grace_.expires_after(cfg_->grace);
    grace_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec || !self->clients_.empty() || self->stopped_) return;
      spdlog::info("session {}: expired", self->id_);
      self->stop();
      self->on_expire_(self->id_);
    });
  }

  void stop() {
    stopped_ = true;
    ticker_.cancel();
    grace_.cancel();
    clients_.clear();
    if (record_.is_open()) record_.close();
  }

  void schedule_tick() {
    ticker_.expires_at(next_tick_);
    ticker_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec || self->stopped_ || self->state_.status != SessionStatus::Running) return;
      self->next_tick_ += self->cfg_->tick;
      self->process(Event::tick(self->state_.clock + 1), {});
      self->schedule_tick();
    });
  }

  void process(const Event& e, const std::weak_ptr<PlayConnection>& from) {
    std::vector<ActionLogEntry> added;
    try {
      added = apply_event(state_, e);
    } catch (const SessionError& err) {
      spdlog::debug("session {}: rejected event: {}", id_, err.what());
      reply(from, {wire::error_code_for(err.code()), err.what()});
      return;
    }
    if (record_.is_open()) record_ << event_to_json(e).dump() << '\n' << std::flush;
    for (const auto& a : added) spdlog::debug("session {}: t={} {} {}", id_, a.t, to_string(a.cause), a.action_id);
    broadcast(std::make_shared<const std::string>(wire::update_frame(id_, state_, added)));
    if (state_.status == SessionStatus::Ended) ticker_.cancel();
  }

  void reply(const std::weak_ptr<PlayConnection>& to, const wire::WireError& err) {
    if (auto conn = to.lock()) conn->send(std::make_shared<const std::string>(wire::error_frame(err)));
  }

  void broadcast(const std::shared_ptr<const std::string>& frame) {
    for (const auto& c : clients_) c->send(frame);
  }

  net::strand<net::io_context::executor_type> strand_;
  net::steady_timer ticker_;
  net::steady_timer grace_;
  std::chrono::steady_clock::time_point next_tick_;
  std::string id_;
  std::shared_ptr<const ServiceConfig> cfg_;
  SessionState state_;
  ExpireFn on_expire_;
  std::vector<std::shared_ptr<PlayConnection>> clients_;
  std::ofstream record_;
  bool ticking_ = false;
  bool stopped_ = false;
};

inline void PlayConnection::run(http::request<http::string_body> req, std::shared_ptr<LiveSession> session,
                                 std::string session_id) {
  session_ = std::move(session);
  net::dispatch(ws_.get_executor(), [self = shared_from_this(), req = std::move(req), session_id]() mutable {
    self->ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    self->ws_.async_accept(req, [self, session_id](beast::error_code ec) {
      if (ec) return;
      if (!self->session_) {
        self->close_when_flushed_ = true;
        self->enqueue(std::make_shared<const std::string>(
            wire::error_frame({wire::ErrorCode::UnknownSession, "no session '" + session_id + "'"})));
        self->read();
        return;
      }
      self->session_->attach(self);
      self->read();
    });
  });
}

inline void PlayConnection::read() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->on_closed();
      return;
    }
    std::string text = beast::buffers_to_string(self->buffer_.data());
    self->buffer_.consume(self->buffer_.size());
    if (self->session_) self->session_->submit(std::move(text), self->weak_from_this());
    self->read();
  });
}

inline void PlayConnection::on_closed() {
  closed_ = true;
  if (session_) session_->detach(this);
  session_.reset();
}

class Server;

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket&& socket, std::shared_ptr<Server> server)
      : stream_(std::move(socket)), server_(std::move(server)) {}

  void run() {
    net::dispatch(stream_.get_executor(), [self = shared_from_this()] { self->read(); });
  }

 private:
  using Response = http::response<http::string_body>;

  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->route();
    });
  }

  void route();

  Response make(http::status status, std::string body, std::string_view type = "application/json") {
    Response res{status, req_.version()};
    res.set(http::field::server, "zelig");
    res.set(http::field::content_type, std::string(type));
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(req_.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  }

  Response error(http::status status, wire::ErrorCode code, std::string message) {
    return make(status, wire::error_frame({code, std::move(message)}));
  }

  void send(Response res) {
    auto sp = std::make_shared<Response>(std::move(res));
    http::async_write(stream_, *sp, [self = shared_from_this(), sp](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!sp->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  std::shared_ptr<Server> server_;
};

class Server : public std::enable_shared_from_this<Server> {
 public:
  Server(net::io_context& ioc, const tcp::endpoint& endpoint, ServiceConfig cfg)
      : ioc_(ioc), acceptor_(net::make_strand(ioc)), cfg_(std::make_shared<const ServiceConfig>(std::move(cfg))) {
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen(net::socket_base::max_listen_connections);
  }

  [[nodiscard]] unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void start() { accept(); }

  void stop() {
    net::post(acceptor_.get_executor(), [self = shared_from_this()] {
      beast::error_code ignored;
      self->acceptor_.close(ignored);
    });
    std::lock_guard lock(mutex_);
    for (auto& [id, s] : sessions_) s->shutdown();
    sessions_.clear();
  }

  std::shared_ptr<LiveSession> create_session() {
    auto weak = weak_from_this();
    auto s = std::make_shared<LiveSession>(ioc_, new_id(), cfg_, [weak](const std::string& id) {
      if (auto self = weak.lock()) {
        std::lock_guard lock(self->mutex_);
        self->sessions_.erase(id);
      }
    });
    {
      std::lock_guard lock(mutex_);
      sessions_[s->id()] = s;
    }
    s->start();
    spdlog::info("session {}: created", s->id());
    return s;
  }

  [[nodiscard]] std::shared_ptr<LiveSession> find(const std::string& id) {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  [[nodiscard]] std::size_t session_count() {
    std::lock_guard lock(mutex_);
    return sessions_.size();
  }

  [[nodiscard]] std::size_t max_queue() const { return cfg_->max_queue; }

 private:
  void accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [self = shared_from_this()](beast::error_code ec, tcp::socket sock) {
      if (ec == net::error::operation_aborted || !self->acceptor_.is_open()) return;
      if (!ec) std::make_shared<HttpConnection>(std::move(sock), self)->run();
      self->accept();
    });
  }

  std::string new_id() {
    std::lock_guard lock(mutex_);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 2; ++i) {
      std::uint64_t v = rng_();
      for (int n = 0; n < 16; ++n, v >>= 4) id += kHex[v & 0xF];
    }
    return id;
  }

  net::io_context& ioc_;
  tcp::acceptor acceptor_;
  std::shared_ptr<const ServiceConfig> cfg_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions_;
  std::mt19937_64 rng_{std::random_device{}()};
};

inline void HttpConnection::route() {
  const std::string target(req_.target());
  std::vector<std::string> parts;
  for (std::size_t pos = 1; pos <= target.size();) {
    const auto next = std::min(target.find('/', pos), target.size());
    parts.push_back(target.substr(pos, next - pos));
    pos = next + 1;
  }
  const bool sessions = !parts.empty() && parts[0] == "sessions";

  if (websocket::is_upgrade(req_)) {
    if (sessions && parts.size() == 3 && parts[2] == "play") {
      auto conn = std::make_shared<PlayConnection>(stream_.release_socket(), server_->max_queue());
      conn->run(std::move(req_), server_->find(parts[1]), parts[1]);
      return;
    }
    send(error(http::status::not_found, wire::ErrorCode::NotFound, "no WebSocket endpoint at " + target));
    return;
  }

  if (req_.method() == http::verb::options) {
    Response res = make(http::status::no_content, "");
    res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
    res.set(http::field::access_control_allow_headers, "Content-Type");
    send(std::move(res));
    return;
  }
  if (sessions && parts.size() == 1 && req_.method() == http::verb::post) {
    auto s = server_->create_session();
    send(make(http::status::created, Json{{"schema_version", kSchemaVersion}, {"session_id", s->id()}}.dump()));
    return;
  }
  if (sessions && parts.size() == 3 && parts[2] == "log" && req_.method() == http::verb::get) {
    auto s = server_->find(parts[1]);
    if (!s) {
      send(error(http::status::not_found, wire::ErrorCode::UnknownSession, "no session '" + parts[1] + "'"));
      return;
    }
    s->read_log([self = shared_from_this()](std::string body) {
      net::post(self->stream_.get_executor(), [self, body = std::move(body)]() mutable {
        self->send(self->make(http::status::ok, std::move(body), "application/x-ndjson"));
      });
    });
    return;
  }
  if (parts.size() == 1 && parts[0] == "health") {
    send(make(http::status::ok, Json{{"schema_version", kSchemaVersion}, {"status", "ok"}}.dump()));
    return;
  }
  send(error(http::status::not_found, wire::ErrorCode::NotFound, "no route for " + target));
}

/// Blocking entry point used by `zelig serve`.
inline int serve(const cli::ServeOptions& opt, std::ostream& out, std::ostream& err) {
  configure_logging(spdlog::level::info);
  auto doc = cli::load_or_report(opt.script, err);
  if (!doc) return cli::kInputError;
  if (const auto report = validate_script(*doc); !report.ok()) {
    cli::print_report(report, false, err);
    return cli::kValidationFailed;
  }
  try {
    check_config(opt.config);
  } catch (const SessionError& e) {
    err << e.what() << '\n';
    return cli::kInputError;
  }
  ServiceConfig cfg;
  cfg.script = std::make_shared<const ScriptDoc>(std::move(*doc));
  cfg.runtime = opt.config;
  cfg.seed = opt.seed;
  cfg.tick = std::chrono::milliseconds(opt.tick_ms);
  if (opt.record_dir) cfg.record_dir = *opt.record_dir;

  net::io_context ioc;
  std::shared_ptr<Server> server;
  try {
    server = std::make_shared<Server>(ioc, tcp::endpoint{net::ip::make_address(opt.address), opt.port}, cfg);
  } catch (const std::exception& e) {
    err << "cannot listen on " << opt.address << ':' << opt.port << ": " << e.what() << '\n';
    return cli::kInputError;
  }
  server->start();
  out << "listening on http://" << opt.address << ':' << server->port() << std::endl;

  net::signal_set signals(ioc, SIGINT, SIGTERM);
  signals.async_wait([&](beast::error_code, int) {
    server->stop();
    ioc.stop();
  });
  const unsigned n = std::max(2u, std::thread::hardware_concurrency());
  std::vector<std::thread> threads;
  for (unsigned i = 1; i < n; ++i) threads.emplace_back([&ioc] { ioc.run(); });
  ioc.run();
  for (auto& t : threads) t.join();
  return cli::kOk;
}

}  // namespace zelig::service
