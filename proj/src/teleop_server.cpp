#include <atomic>
#include <csignal>
#include <deque>
#include <list>

#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "tdlfd/error.hpp"
#include "tdlfd/teleop.hpp"

namespace tdlfd {

namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct Outgoing {
  std::string text;
  std::chrono::milliseconds delay{0};  // wait before sending
};

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Session session, std::chrono::milliseconds cadence)
      : ws_(std::move(socket)), timer_(ws_.get_executor()), session_(std::move(session)), cadence_(cadence) {}

  void run() {
    websocket::stream_base::timeout t{};
    t.handshake_timeout = std::chrono::seconds(5);
    t.idle_timeout = websocket::stream_base::none();
    t.keep_alive_pings = false;
    ws_.set_option(t);
    ws_.read_message_max(1 << 20);
    asio::dispatch(ws_.get_executor(), [self = shared_from_this()] {
      self->ws_.async_accept(beast::bind_front_handler(&Connection::on_accept, self));
    });
  }

  void close() {
    asio::post(ws_.get_executor(), [self = shared_from_this()] {
      if (self->closing_) return;
      self->closing_ = true;
      self->timer_.cancel();
      if (!self->ws_.is_open()) return;
      self->ws_.async_close(websocket::close_code::going_away, [self](beast::error_code) {});
    });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    read_next();
  }

  void read_next() {
    ws_.async_read(buffer_, beast::bind_front_handler(&Connection::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec || closing_) return;
    std::vector<nlohmann::json> replies;
    if (!ws_.got_text()) {
      replies.push_back(error_message("ProtocolError", "binary frames are not part of the protocol"));
    } else {
      replies = session_.handle_text(beast::buffers_to_string(buffer_.data()));
    }
    buffer_.consume(buffer_.size());
    const bool paced = replies.size() > 1;
    for (std::size_t i = 0; i < replies.size(); ++i) {
      queue_.push_back({replies[i].dump(), paced && i > 1 ? cadence_ : std::chrono::milliseconds(0)});
    }
    if (!writing_) write_next();
    read_next();
  }

  void write_next() {
    if (queue_.empty() || closing_) {
      writing_ = false;
      return;
    }
    writing_ = true;
    if (queue_.front().delay.count() > 0) {
      timer_.expires_after(queue_.front().delay);
      queue_.front().delay = std::chrono::milliseconds(0);
      timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
        if (ec) {
          self->writing_ = false;
          return;
        }
        self->write_next();
      });
      return;
    }
    ws_.text(true);
    ws_.async_write(asio::buffer(queue_.front().text),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      self->queue_.pop_front();
                      if (ec) {
                        self->writing_ = false;
                        return;
                      }
                      self->write_next();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  asio::steady_timer timer_;
  beast::flat_buffer buffer_;
  Session session_;
  std::chrono::milliseconds cadence_;
  std::deque<Outgoing> queue_;
  bool writing_ = false;
  bool closing_ = false;
};

}  // namespace

struct TeleopServer::Impl {
  ServerConfig config;
  ResourceResolver resolver;
  asio::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::vector<std::thread> threads;
  Environment env;
  std::unique_ptr<DemoStoreWriter> store;
  std::atomic<std::size_t> served{0};
  unsigned short bound_port = 0;
  bool running = false;

  std::mutex live_mutex;
  std::list<std::weak_ptr<Connection>> live;

  void accept_next() {
    acceptor.async_accept(asio::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      const std::size_t id = served++;
      auto conn = std::make_shared<Connection>(
          std::move(socket),
          Session(env, store.get(), resolver, config.options, "session-" + std::to_string(id)),
          config.options.playback_cadence);
      {
        std::lock_guard lock(live_mutex);
        live.remove_if([](const auto& w) { return w.expired(); });
        live.push_back(conn);
      }
      conn->run();
      accept_next();
    });
  }
};

TeleopServer::TeleopServer(ServerConfig config, ResourceResolver resolver) : impl_(std::make_unique<Impl>()) {
  impl_->config = std::move(config);
  impl_->resolver = std::move(resolver);
}

TeleopServer::~TeleopServer() { stop(); }

void TeleopServer::start() {
  Impl& s = *impl_;
  if (s.running) return;
  s.env = load_environment(s.resolver, s.config.task, s.config.robot);
  if (!s.config.demos_out.empty()) s.store = std::make_unique<DemoStoreWriter>(s.config.demos_out);

  beast::error_code ec;
  const auto address = asio::ip::make_address(s.config.address, ec);
  if (ec) throw Error(ErrorCode::BindFailure, "bad address '" + s.config.address + "': " + ec.message());
  const tcp::endpoint endpoint(address, s.config.port);
  auto fail = [&](const char* what) {
    beast::error_code ignored;
    s.acceptor.close(ignored);
    throw Error(ErrorCode::BindFailure, std::string(what) + " " + s.config.address + ":" +
                                            std::to_string(s.config.port) + ": " + ec.message());
  };
  s.acceptor.open(endpoint.protocol(), ec);
  if (ec) fail("cannot open");
  s.acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  s.acceptor.bind(endpoint, ec);
  if (ec) fail("cannot bind");
  s.acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) fail("cannot listen on");
  s.bound_port = s.acceptor.local_endpoint().port();

  s.running = true;
  s.ioc.restart();
  s.accept_next();
  const int n = std::max(1, s.config.threads);
  for (int i = 0; i < n; ++i) s.threads.emplace_back([&s] { s.ioc.run(); });
}

void TeleopServer::stop() {
  Impl& s = *impl_;
  if (!s.running) return;
  s.running = false;
  asio::post(s.ioc, [&s] {
    beast::error_code ignored;
    s.acceptor.close(ignored);
  });
  {
    std::lock_guard lock(s.live_mutex);
    for (auto& w : s.live) {
      if (auto conn = w.lock()) conn->close();
    }
    s.live.clear();
  }
  // give close handshakes a moment, then cut everything
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
  while (!s.ioc.stopped() && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  s.ioc.stop();
  for (auto& t : s.threads) t.join();
  s.threads.clear();
}

void TeleopServer::run_until_signal() {
  asio::io_context sig_ioc;
  asio::signal_set signals(sig_ioc, SIGINT, SIGTERM);
  signals.async_wait([](beast::error_code, int) {});
  sig_ioc.run();
  stop();
}

unsigned short TeleopServer::port() const { return impl_->bound_port; }

std::size_t TeleopServer::connections_served() const { return impl_->served.load(); }

}  // namespace tdlfd
