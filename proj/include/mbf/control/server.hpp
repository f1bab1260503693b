#pragma once

// Local control server on one port: WebSocket upgrade for the JSON protocol
// (with periodic snapshot pushes), GET /log.csv for the session log, and
// static files for the operator console. Runs one IO thread.

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "mbf/control/protocol.hpp"

namespace mbf::control {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 9000;
    std::filesystem::path web_root;  // empty = no static files
    MutationLog* mutation_log = nullptr;
};

inline std::string_view mime_type(const std::filesystem::path& p)
{
    const auto ext = p.extension().string();
    if (ext == ".html" || ext == ".htm") return "text/html";
    if (ext == ".js" || ext == ".mjs") return "application/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    if (ext == ".csv") return "text/csv";
    return "application/octet-stream";
}

class ControlServer {
public:
    ControlServer(session::RealtimeEngine& engine, ServerOptions opt)
        : engine_(engine), opt_(std::move(opt)), acceptor_(ioc_)
    {
        const tcp::endpoint ep(net::ip::make_address(opt_.host), static_cast<unsigned short>(opt_.port));
        acceptor_.open(ep.protocol());
        acceptor_.set_option(net::socket_base::reuse_address(true));
        acceptor_.bind(ep);
        acceptor_.listen();
    }

    ~ControlServer() { stop(); }
    ControlServer(const ControlServer&) = delete;
    ControlServer& operator=(const ControlServer&) = delete;

    void start()
    {
        if (thread_.joinable()) return;
        do_accept();
        thread_ = std::thread([this] { ioc_.run(); });
    }

    void stop()
    {
        ioc_.stop();
        if (thread_.joinable()) thread_.join();
    }

    int port() const { return acceptor_.local_endpoint().port(); }
    int websocket_sessions() const { return ws_sessions_.load(); }

private:
    class WsSession;
    class HttpSession;

    void do_accept()
    {
        acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
            if (!ec) std::make_shared<HttpSession>(std::move(socket), *this)->run();
            if (acceptor_.is_open()) do_accept();
        });
    }

    http::response<http::string_body> serve(const http::request<http::string_body>& req) const
    {
        auto respond = [&](http::status st, std::string body, std::string_view type) {
            http::response<http::string_body> res{st, req.version()};
            res.set(http::field::server, "mbf-engine");
            res.set(http::field::content_type, std::string(type));
            res.keep_alive(false);
            res.body() = std::move(body);
            res.prepare_payload();
            return res;
        };
        if (req.method() != http::verb::get) return respond(http::status::method_not_allowed, "GET only\n", "text/plain");
        std::string target(req.target());
        if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
        if (target == "/log.csv") {
            const auto& lp = engine_.log_path();
            if (!lp) return respond(http::status::not_found, "logging is off\n", "text/plain");
            std::ifstream in(*lp, std::ios::binary);
            if (!in) return respond(http::status::not_found, "log not found\n", "text/plain");
            std::ostringstream ss;
            ss << in.rdbuf();
            auto res = respond(http::status::ok, ss.str(), "text/csv");
            res.set(http::field::content_disposition, "attachment; filename=\"session-log.csv\"");
            return res;
        }
        if (target == "/registry.json") return respond(http::status::ok, session::registry_to_json().dump(), "application/json");
        if (opt_.web_root.empty() || target.find("..") != std::string::npos)
            return respond(http::status::not_found, "not found\n", "text/plain");
        if (target.empty() || target.back() == '/') target += "index.html";
        const auto path = opt_.web_root / target.substr(1);
        std::ifstream in(path, std::ios::binary);
        if (!in) return respond(http::status::not_found, "not found\n", "text/plain");
        std::ostringstream ss;
        ss << in.rdbuf();
        return respond(http::status::ok, ss.str(), mime_type(path));
    }

    double snapshot_period_ms() const
    {
        const double rate = engine_.state_snapshot()->snapshot_rate_hz;
        return 1000.0 / std::clamp(rate, 1.0, 60.0);
    }

    class WsSession : public std::enable_shared_from_this<WsSession> {
    public:
        WsSession(tcp::socket&& socket, ControlServer& srv)
            : ws_(std::move(socket)), timer_(ws_.get_executor()), srv_(srv) {}

        ~WsSession() { srv_.ws_sessions_.fetch_sub(1); }

        void run(http::request<http::string_body> req)
        {
            srv_.ws_sessions_.fetch_add(1);
            ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
            ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
        }

    private:
        void on_accept(beast::error_code ec)
        {
            if (ec) return;
            next_push_ = std::chrono::steady_clock::now();
            schedule_push();
            do_read();
        }

        void do_read() { ws_.async_read(buf_, beast::bind_front_handler(&WsSession::on_read, shared_from_this())); }

        void on_read(beast::error_code ec, std::size_t)
        {
            if (ec) {
                closed_ = true;
                timer_.cancel();
                return;
            }
            const auto text = beast::buffers_to_string(buf_.data());
            buf_.consume(buf_.size());
            send(handle_control_text(srv_.engine_, text, srv_.opt_.mutation_log));
            do_read();
        }

        void send(std::string s)
        {
            out_.push_back(std::move(s));
            if (out_.size() == 1) do_write();
        }

        void do_write()
        {
            ws_.text(true);
            ws_.async_write(net::buffer(out_.front()), beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
        }

        void on_write(beast::error_code ec, std::size_t)
        {
            if (ec) {
                closed_ = true;
                timer_.cancel();
                return;
            }
            out_.pop_front();
            if (!out_.empty()) do_write();
        }

        void schedule_push()
        {
            next_push_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                std::chrono::duration<double, std::milli>(srv_.snapshot_period_ms()));
            timer_.expires_at(next_push_);
            timer_.async_wait(beast::bind_front_handler(&WsSession::on_push, shared_from_this()));
        }

        void on_push(beast::error_code ec)
        {
            if (ec || closed_) return;
            // A slow subscriber gets fewer snapshots; the engine never waits.
            if (out_.size() < 8) send(make_snapshot(srv_.engine_).dump());
            schedule_push();
        }

        websocket::stream<beast::tcp_stream> ws_;
        net::steady_timer timer_;
        ControlServer& srv_;
        beast::flat_buffer buf_;
        std::deque<std::string> out_;
        std::chrono::steady_clock::time_point next_push_{};
        bool closed_ = false;
    };

    class HttpSession : public std::enable_shared_from_this<HttpSession> {
    public:
        HttpSession(tcp::socket&& socket, ControlServer& srv) : stream_(std::move(socket)), srv_(srv) {}

        void run()
        {
            stream_.expires_after(std::chrono::seconds(30));
            http::async_read(stream_, buf_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
        }

    private:
        void on_read(beast::error_code ec, std::size_t)
        {
            if (ec) return;
            if (websocket::is_upgrade(req_)) {
                stream_.expires_never();
                std::make_shared<WsSession>(stream_.release_socket(), srv_)->run(std::move(req_));
                return;
            }
            auto res = std::make_shared<http::response<http::string_body>>(srv_.serve(req_));
            http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
                beast::error_code ignored;
                self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
            });
        }

        beast::tcp_stream stream_;
        ControlServer& srv_;
        beast::flat_buffer buf_;
        http::request<http::string_body> req_;
    };

    session::RealtimeEngine& engine_;
    ServerOptions opt_;
    net::io_context ioc_;
    tcp::acceptor acceptor_;
    std::thread thread_;
    std::atomic<int> ws_sessions_{0};
};

}  // namespace mbf::control
