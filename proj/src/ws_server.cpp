#include "handover/ws_server.hpp"

#include <deque>
#include <functional>
#include <optional>

#include <boost/asio/signal_set.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace handover {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, std::shared_ptr<SessionManager> sessions, Mode mode)
      : ws_(std::move(socket)), sessions_(std::move(sessions)), mode_(mode) {}

  void run() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  void shutdown() {
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
    beast::get_lowest_layer(ws_).close();
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    try {
      session_id_ = sessions_->open(mode_);
    } catch (const Error&) {
      session_id_ = sessions_->open(Mode::Reactive);
    }
    ws_.text(true);
    read();
  }

  void read() {
    buffer_.clear();
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_read(ec);
    });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      finish();
      return;
    }
    const std::string message = beast::buffers_to_string(buffer_.data());
    std::vector<std::string> replies;
    try {
      replies = sessions_->handle(session_id_, message);
    } catch (const std::exception& e) {
      replies = {error_message(e.what())};
    }
    try {
      closing_ = sessions_->closed(session_id_);
    } catch (const Error&) {
      closing_ = true;
    }
    for (auto& r : replies) outbox_.push_back(std::move(r));
    write_next();
  }

  void write_next() {
    if (outbox_.empty()) {
      if (closing_) {
        ws_.async_close(websocket::close_code::normal,
                        [self = shared_from_this()](beast::error_code) { self->finish(); });
      } else {
        read();
      }
      return;
    }
    ws_.async_write(asio::buffer(outbox_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->finish();
                        return;
                      }
                      self->outbox_.pop_front();
                      self->write_next();
                    });
  }

  void finish() {
    if (!session_id_.empty()) sessions_->close(session_id_);
    session_id_.clear();
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<SessionManager> sessions_;
  Mode mode_;
  std::string session_id_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  bool closing_ = false;
};

}  // namespace

struct WsServer::Impl {
  asio::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::optional<asio::signal_set> signals;
  std::vector<std::weak_ptr<Connection>> connections;
  std::function<void()> accept;
  std::thread thread;
  bool running = false;
};

WsServer::WsServer(std::shared_ptr<SessionManager> sessions, ServerConfig config)
    : impl_(std::make_unique<Impl>()), sessions_(std::move(sessions)), config_(std::move(config)) {
  if (config_.default_mode == Mode::Preemptive && !sessions_->has_model()) {
    config_.default_mode = Mode::Reactive;
  }
}

WsServer::~WsServer() { stop(); }

void WsServer::start() {
  if (impl_->running) return;
  try {
    const tcp::endpoint endpoint(asio::ip::make_address(config_.address), config_.port);
    impl_->acceptor.open(endpoint.protocol());
    impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
    impl_->acceptor.bind(endpoint);
    impl_->acceptor.listen(asio::socket_base::max_listen_connections);
    bound_port_ = impl_->acceptor.local_endpoint().port();
  } catch (const boost::system::system_error& e) {
    throw Error(ErrorCode::IoFailure, std::string("cannot listen: ") + e.what());
  }

  impl_->accept = [this] {
    impl_->acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      auto conn = std::make_shared<Connection>(std::move(socket), sessions_, config_.default_mode);
      impl_->connections.push_back(conn);
      conn->run();
      impl_->accept();
    });
  };
  impl_->accept();

  if (config_.stop_on_signals) {
    impl_->signals.emplace(impl_->ioc, SIGINT, SIGTERM);
    impl_->signals->async_wait([this](beast::error_code ec, int) {
      if (!ec) {
        beast::error_code ignored;
        impl_->acceptor.close(ignored);
        for (auto& weak : impl_->connections) {
          if (auto c = weak.lock()) c->shutdown();
        }
      }
    });
  }
  impl_->running = true;
  impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

void WsServer::stop() {
  if (!impl_->running) return;
  asio::post(impl_->ioc, [this] {
    beast::error_code ignored;
    impl_->acceptor.close(ignored);
    if (impl_->signals) impl_->signals->cancel(ignored);
    for (auto& weak : impl_->connections) {
      if (auto c = weak.lock()) c->shutdown();
    }
  });
  if (impl_->thread.joinable()) impl_->thread.join();
  impl_->running = false;
}

void WsServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace handover
