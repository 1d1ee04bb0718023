#include "etfb/server.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "etfb/errors.hpp"

namespace etfb::server {
namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using Clock = std::chrono::steady_clock;

struct Inbound {
    enum class Kind { Connect, Line, Overflow, Disconnect };
    Kind kind;
    std::uint64_t client;
    std::string line;
};

class Hub;

class Client : public std::enable_shared_from_this<Client> {
public:
    Client(std::uint64_t id, Hub& hub) : id_(id), hub_(hub) {}
    virtual ~Client() = default;
    std::uint64_t id() const { return id_; }
    /// Called on the I/O thread. `line` ends with '\n'.
    virtual void send(const std::string& line, bool close_after) = 0;
    virtual void close() = 0;

protected:
    std::uint64_t id_;
    Hub& hub_;
};

/// Client registry and inbound queue; registry access is I/O-thread only.
/// The registry owns each client until it detaches.
class Hub {
public:
    std::uint64_t next_id() { return ++last_id_; }

    void attach(const std::shared_ptr<Client>& c) {
        clients_[c->id()] = c;
        push({Inbound::Kind::Connect, c->id(), {}});
    }
    void detach(std::uint64_t id) {
        if (clients_.erase(id)) push({Inbound::Kind::Disconnect, id, {}});
    }
    void line(std::uint64_t id, std::string text) { push({Inbound::Kind::Line, id, std::move(text)}); }
    void overflow(std::uint64_t id) { push({Inbound::Kind::Overflow, id, {}}); }

    void send(std::uint64_t id, const std::string& text, bool close_after) {
        if (auto it = clients_.find(id); it != clients_.end()) it->second->send(text, close_after);
    }
    void close_all() {
        auto clients = clients_;
        for (auto& [id, c] : clients) c->close();
        clients_.clear();
    }

    std::deque<Inbound> drain() {
        std::lock_guard lock(mu_);
        return std::exchange(queue_, {});
    }

private:
    void push(Inbound in) {
        std::lock_guard lock(mu_);
        queue_.push_back(std::move(in));
    }

    std::map<std::uint64_t, std::shared_ptr<Client>> clients_;
    std::uint64_t last_id_ = 0;
    std::mutex mu_;
    std::deque<Inbound> queue_;
};

class TcpClient : public Client {
public:
    TcpClient(tcp::socket socket, Hub& hub, std::size_t max_line)
        : Client(hub.next_id(), hub), socket_(std::move(socket)), buffer_(max_line) {}

    void run() {
        hub_.attach(shared_from_this());
        read();
    }

    void send(const std::string& line, bool close_after) override {
        queue_.emplace_back(line, close_after);
        if (queue_.size() == 1) write();
    }

    void close() override {
        boost::system::error_code ec;
        socket_.shutdown(tcp::socket::shutdown_both, ec);
        socket_.close(ec);
    }

private:
    void read() {
        asio::async_read_until(socket_, buffer_, '\n', [self = shared(), this](boost::system::error_code ec, std::size_t) {
            if (ec == asio::error::not_found) {
                hub_.overflow(id_);
                return;
            }
            if (ec) {
                hub_.detach(id_);
                return;
            }
            std::istream is(&buffer_);
            std::string text;
            std::getline(is, text);
            if (!text.empty() && text.back() == '\r') text.pop_back();
            if (!text.empty()) hub_.line(id_, std::move(text));
            read();
        });
    }

    void write() {
        asio::async_write(socket_, asio::buffer(queue_.front().first),
                          [self = shared(), this](boost::system::error_code ec, std::size_t) {
                              if (ec) {
                                  hub_.detach(id_);
                                  return;
                              }
                              const bool close_after = queue_.front().second;
                              queue_.pop_front();
                              if (close_after) {
                                  close();
                                  hub_.detach(id_);
                                  return;
                              }
                              if (!queue_.empty()) write();
                          });
    }

    std::shared_ptr<TcpClient> shared() { return std::static_pointer_cast<TcpClient>(shared_from_this()); }

    tcp::socket socket_;
    asio::streambuf buffer_;
    std::deque<std::pair<std::string, bool>> queue_;
};

class WsClient : public Client {
public:
    WsClient(tcp::socket socket, Hub& hub, std::size_t max_line)
        : Client(hub.next_id(), hub), ws_(std::move(socket)) {
        ws_.read_message_max(max_line);
    }

    void run(http::request<http::string_body> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.text(true);
        ws_.async_accept(req, [self = shared(), this](beast::error_code ec) {
            if (ec) return;
            hub_.attach(shared_from_this());
            read();
        });
    }

    void send(const std::string& line, bool close_after) override {
        std::string text = line;
        if (!text.empty() && text.back() == '\n') text.pop_back();
        queue_.emplace_back(std::move(text), close_after);
        if (queue_.size() == 1) write();
    }

    void close() override {
        beast::error_code ec;
        beast::get_lowest_layer(ws_).socket().close(ec);
    }

private:
    void read() {
        ws_.async_read(buffer_, [self = shared(), this](beast::error_code ec, std::size_t) {
            if (ec == websocket::error::message_too_big) {
                hub_.overflow(id_);
                return;
            }
            if (ec) {
                hub_.detach(id_);
                return;
            }
            std::istringstream in(beast::buffers_to_string(buffer_.data()));
            buffer_.consume(buffer_.size());
            std::string text;
            while (std::getline(in, text)) {
                if (!text.empty() && text.back() == '\r') text.pop_back();
                if (!text.empty()) hub_.line(id_, text);
            }
            read();
        });
    }

    void write() {
        ws_.async_write(asio::buffer(queue_.front().first), [self = shared(), this](beast::error_code ec, std::size_t) {
            if (ec) {
                hub_.detach(id_);
                return;
            }
            const bool close_after = queue_.front().second;
            queue_.pop_front();
            if (close_after) {
                ws_.async_close(websocket::close_code::policy_error,
                                [self = shared(), this](beast::error_code) { hub_.detach(id_); });
                return;
            }
            if (!queue_.empty()) write();
        });
    }

    std::shared_ptr<WsClient> shared() { return std::static_pointer_cast<WsClient>(shared_from_this()); }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    std::deque<std::pair<std::string, bool>> queue_;
};

using Response = http::response<http::string_body>;

Response text_response(const http::request<http::string_body>& req, http::status status, std::string body,
                       const std::string& type = "text/plain; charset=utf-8") {
    Response res{status, req.version()};
    res.set(http::field::server, "etfb");
    res.set(http::field::content_type, type);
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
}

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket socket, Hub& hub, const ServerOptions& options, std::string session_id)
        : stream_(std::move(socket)), hub_(hub), options_(options), session_id_(std::move(session_id)) {}

    void run() { read(); }

private:
    void read() {
        req_ = {};
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_, [self = shared_from_this(), this](beast::error_code ec, std::size_t) {
            if (ec) {
                stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
                return;
            }
            if (websocket::is_upgrade(req_)) {
                if (req_.target() != "/ws") {
                    write(text_response(req_, http::status::not_found, "websocket endpoint is /ws\n"));
                    return;
                }
                stream_.expires_never();
                std::make_shared<WsClient>(stream_.release_socket(), hub_, options_.max_line)->run(std::move(req_));
                return;
            }
            write(handle());
        });
    }

    void write(Response res) {
        auto sp = std::make_shared<Response>(std::move(res));
        http::async_write(stream_, *sp, [self = shared_from_this(), this, sp](beast::error_code ec, std::size_t) {
            if (ec) return;
            if (sp->need_eof()) {
                stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
                return;
            }
            read();
        });
    }

    Response handle() {
        if (req_.method() != http::verb::get && req_.method() != http::verb::head)
            return text_response(req_, http::status::method_not_allowed, "method not allowed\n");
        std::string target(req_.target());
        if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
        if (target == "/health") {
            const nlohmann::json j{{"protocol", session::kProtocolVersion}, {"session", session_id_}};
            return text_response(req_, http::status::ok, j.dump() + "\n", "application/json");
        }
        if (options_.assets_dir.empty()) return text_response(req_, http::status::not_found, "no assets\n");
        if (target.empty() || target[0] != '/' || target.find("..") != std::string::npos)
            return text_response(req_, http::status::bad_request, "bad path\n");
        if (target.back() == '/') target += "index.html";
        const auto path = options_.assets_dir / target.substr(1);
        std::ifstream in(path, std::ios::binary);
        if (!in || std::filesystem::is_directory(path))
            return text_response(req_, http::status::not_found, "not found\n");
        std::ostringstream body;
        body << in.rdbuf();
        auto res = text_response(req_, http::status::ok, body.str(), content_type_for(path));
        if (req_.method() == http::verb::head) {
            const auto size = res.body().size();
            res.body().clear();
            res.content_length(size);
        }
        return res;
    }

    beast::tcp_stream stream_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
    Hub& hub_;
    const ServerOptions& options_;
    std::string session_id_;
};

}  // namespace

std::string content_type_for(const std::filesystem::path& path) {
    static const std::map<std::string, std::string> types{
        {".html", "text/html; charset=utf-8"}, {".js", "text/javascript; charset=utf-8"},
        {".mjs", "text/javascript; charset=utf-8"}, {".css", "text/css; charset=utf-8"},
        {".json", "application/json"}, {".map", "application/json"},
        {".svg", "image/svg+xml"}, {".png", "image/png"},
        {".ico", "image/x-icon"}, {".wasm", "application/wasm"},
        {".txt", "text/plain; charset=utf-8"}, {".wav", "audio/wav"},
    };
    const auto it = types.find(path.extension().string());
    return it == types.end() ? "application/octet-stream" : it->second;
}

struct SessionServer::Impl {
    Impl(session::EngineOptions engine_options, ServerOptions opts)
        : options(std::move(opts)), engine(std::move(engine_options)) {}

    void accept_tcp() {
        tcp_acceptor->async_accept([this](boost::system::error_code ec, tcp::socket socket) {
            if (ec) return;
            std::make_shared<TcpClient>(std::move(socket), hub, options.max_line)->run();
            accept_tcp();
        });
    }

    void accept_http() {
        http_acceptor->async_accept([this](boost::system::error_code ec, tcp::socket socket) {
            if (ec) return;
            std::make_shared<HttpSession>(std::move(socket), hub, options, engine.session_id())->run();
            accept_http();
        });
    }

    std::unique_ptr<tcp::acceptor> listen(std::uint16_t port) {
        try {
            auto acceptor = std::make_unique<tcp::acceptor>(io);
            const tcp::endpoint ep(asio::ip::make_address(options.bind_address), port);
            acceptor->open(ep.protocol());
            acceptor->set_option(asio::socket_base::reuse_address(true));
            acceptor->bind(ep);
            acceptor->listen();
            return acceptor;
        } catch (const boost::system::system_error& e) {
            throw IoError(fmt::format("cannot listen on {}:{}: {}", options.bind_address, port, e.what()));
        }
    }

    // Runs on the tick thread.
    void send(std::uint64_t client, const session::SessionMessage& msg, bool close_after = false) {
        asio::post(io, [this, client, line = session::encode_line(msg), close_after] {
            hub.send(client, line, close_after);
        });
    }

    void reply_error(std::uint64_t client, std::string code, std::string message,
                     std::optional<std::uint64_t> ref = std::nullopt, bool close_after = false) {
        send(client, engine.stamp(session::Error{std::move(code), std::move(message), ref}), close_after);
    }

    void handle(const Inbound& in) {
        switch (in.kind) {
            case Inbound::Kind::Connect: return;
            case Inbound::Kind::Disconnect: handshaken.erase(in.client); return;
            case Inbound::Kind::Overflow:
                reply_error(in.client, "line_too_long", fmt::format("messages are limited to {} bytes", options.max_line),
                            std::nullopt, true);
                handshaken.erase(in.client);
                return;
            case Inbound::Kind::Line: break;
        }
        session::SessionMessage msg;
        try {
            msg = session::decode_line(in.line);
        } catch (const session::MessageError& e) {
            reply_error(in.client, e.code(), e.what());
            return;
        }
        const auto* hello = std::get_if<session::Hello>(&msg.body);
        if (!handshaken.count(in.client)) {
            if (!hello) {
                reply_error(in.client, "handshake_required", "send hello with protocol \"1\" first", msg.seq);
                return;
            }
            if (hello->protocol != session::kProtocolVersion) {
                reply_error(in.client, "version_mismatch",
                            fmt::format("protocol \"{}\" is not supported; this service speaks \"{}\"", hello->protocol,
                                        session::kProtocolVersion),
                            msg.seq, true);
                return;
            }
            handshaken.insert(in.client);
            send(in.client, engine.stamp(session::Hello{session::kProtocolVersion, "service", engine.mode()}));
        }
        engine.submit(std::move(msg), in.client);
    }

    void tick_loop() {
        const auto period = std::chrono::duration_cast<Clock::duration>(
            std::chrono::duration<double>(engine.dt() / options.speed));
        const auto snapshot_interval = std::chrono::duration_cast<Clock::duration>(
            std::chrono::duration<double>(1.0 / options.snapshot_rate));
        auto next = Clock::now();
        std::optional<Clock::time_point> last_snapshot;
        while (!stopping) {
            for (const auto& in : hub.drain()) handle(in);
            auto out = engine.tick();
            const auto now = Clock::now();
            for (const auto& o : out) {
                if (o.reply_to) {
                    send(*o.reply_to, o.message);
                    continue;
                }
                if (std::holds_alternative<session::Snapshot>(o.message.body)) {
                    if (last_snapshot && now - *last_snapshot < snapshot_interval) continue;
                    last_snapshot = now;
                }
                for (auto id : handshaken) send(id, o.message);
            }
            if (engine.finished()) {
                std::lock_guard lock(finished_mu);
                if (!finished) {
                    finished = true;
                    finished_cv.notify_all();
                }
            }
            next += period;
            if (next < Clock::now() - period * 10) next = Clock::now();  // don't burst after a stall
            std::this_thread::sleep_until(next);
        }
    }

    ServerOptions options;
    session::SessionEngine engine;
    asio::io_context io;
    std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
    std::unique_ptr<tcp::acceptor> tcp_acceptor;
    std::unique_ptr<tcp::acceptor> http_acceptor;
    Hub hub;
    std::set<std::uint64_t> handshaken;  ///< tick thread only
    std::thread io_thread;
    std::thread tick_thread;
    std::atomic<bool> stopping{false};
    bool started = false;

    std::mutex finished_mu;
    std::condition_variable finished_cv;
    bool finished = false;
};

SessionServer::SessionServer(session::EngineOptions engine, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(engine), std::move(options))) {
    if (!(impl_->options.snapshot_rate > 0.0)) throw ConfigError("server: snapshot_rate must be positive");
    if (!(impl_->options.speed > 0.0)) throw ConfigError("server: speed must be positive");
}

SessionServer::~SessionServer() { stop(); }

void SessionServer::start() {
    auto& d = *impl_;
    if (d.started) return;
    d.tcp_acceptor = d.listen(d.options.port);
    if (d.options.http_port) d.http_acceptor = d.listen(*d.options.http_port);
    d.work.emplace(d.io.get_executor());
    d.accept_tcp();
    if (d.http_acceptor) d.accept_http();
    d.started = true;
    d.io_thread = std::thread([&d] { d.io.run(); });
    d.tick_thread = std::thread([&d] { d.tick_loop(); });
}

void SessionServer::stop() {
    auto& d = *impl_;
    if (!d.started) return;
    d.started = false;
    d.stopping = true;
    if (d.tick_thread.joinable()) d.tick_thread.join();
    asio::post(d.io, [&d] {
        boost::system::error_code ec;
        d.tcp_acceptor->close(ec);
        if (d.http_acceptor) d.http_acceptor->close(ec);
        d.hub.close_all();
        d.io.stop();
    });
    d.work.reset();
    if (d.io_thread.joinable()) d.io_thread.join();
    {
        std::lock_guard lock(d.finished_mu);
        d.finished = true;
    }
    d.finished_cv.notify_all();
}

void SessionServer::wait_finished() {
    std::unique_lock lock(impl_->finished_mu);
    impl_->finished_cv.wait(lock, [this] { return impl_->finished; });
}

bool SessionServer::finished() const {
    std::lock_guard lock(impl_->finished_mu);
    return impl_->finished;
}

std::uint16_t SessionServer::port() const { return impl_->tcp_acceptor->local_endpoint().port(); }

std::optional<std::uint16_t> SessionServer::http_port() const {
    if (!impl_->http_acceptor) return std::nullopt;
    return impl_->http_acceptor->local_endpoint().port();
}

const std::string& SessionServer::session_id() const { return impl_->engine.session_id(); }

const SessionDataset& SessionServer::dataset() const { return impl_->engine.dataset(); }

const DeviceSimulator& SessionServer::device() const { return impl_->engine.device(); }

}  // namespace etfb::server
