#include <netdb.h>
#include <poll.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <thread>

#include "stressmcts/models.hpp"

extern char** environ;

namespace stressmcts {

namespace {

std::string errno_message(const std::string& what) { return what + ": " + std::strerror(errno); }

// Buffered newline framing over a pair of file descriptors.
class FdLineChannel {
 public:
  FdLineChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

  void write_line(const std::string& line) {
    std::string payload = line;
    payload.push_back('\n');
    std::size_t off = 0;
    while (off < payload.size()) {
      const ssize_t n = ::write(write_fd_, payload.data() + off, payload.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ScorerError(errno_message("scorer write failed"));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const auto pos = buffer_.find('\n');
      if (pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto remaining =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (remaining.count() <= 0) throw ScorerError("timed out waiting for scorer response");
      pollfd pfd{read_fd_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw ScorerError(errno_message("poll on scorer failed"));
      }
      if (rc == 0) continue;
      char chunk[65536];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw ScorerError(errno_message("scorer read failed"));
      }
      if (n == 0) throw ScorerError("scorer closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int read_fd_;
  int write_fd_;
  std::string buffer_;
};

class ProcessTransport final : public ScorerTransport {
 public:
  explicit ProcessTransport(const std::string& command) {
    // A scorer that dies mid-request must surface as an error, not SIGPIPE.
    std::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0) throw ScorerError(errno_message("pipe"));
    if (::pipe(from_child) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw ScorerError(errno_message("pipe"));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) {
      posix_spawn_file_actions_addclose(&actions, fd);
    }
    std::string cmd = command;
    char sh[] = "/bin/sh";
    char dash_c[] = "-c";
    char* argv[] = {sh, dash_c, cmd.data(), nullptr};
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      throw ScorerError("failed to spawn scorer '" + command + "': " + std::strerror(rc));
    }
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    channel_.emplace(read_fd_, write_fd_);
  }

  ~ProcessTransport() override {
    // Closing stdin asks the scorer to exit; give it a moment, then kill.
    if (write_fd_ >= 0) ::close(write_fd_);
    int status = 0;
    bool reaped = false;
    for (int i = 0; i < 200 && !reaped; ++i) {
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_ || r < 0) {
        reaped = true;
      } else {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
    }
    if (!reaped) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
    if (read_fd_ >= 0) ::close(read_fd_);
  }

  void write_line(const std::string& line) override { channel_->write_line(line); }
  std::string read_line(std::chrono::milliseconds timeout) override { return channel_->read_line(timeout); }

 private:
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::optional<FdLineChannel> channel_;
};

class SocketTransport final : public ScorerTransport {
 public:
  explicit SocketTransport(const std::string& endpoint) {
    std::signal(SIGPIPE, SIG_IGN);
    if (endpoint.starts_with("unix://")) {
      const std::string path = endpoint.substr(7);
      sockaddr_un addr{};
      addr.sun_family = AF_UNIX;
      if (path.size() >= sizeof addr.sun_path) throw ScorerError("unix socket path too long");
      std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
      fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
      if (fd_ < 0) throw ScorerError(errno_message("socket"));
      if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        const std::string msg = errno_message("connect to " + endpoint);
        ::close(fd_);
        throw ScorerError(msg);
      }
    } else {
      const std::string hostport = endpoint.substr(6);
      const auto colon = hostport.rfind(':');
      if (colon == std::string::npos) throw ScorerError("tcp endpoint must be tcp://host:port");
      const std::string host = hostport.substr(0, colon);
      const std::string port = hostport.substr(colon + 1);
      addrinfo hints{};
      hints.ai_family = AF_UNSPEC;
      hints.ai_socktype = SOCK_STREAM;
      addrinfo* res = nullptr;
      if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
        throw ScorerError("cannot resolve " + endpoint + ": " + ::gai_strerror(rc));
      }
      for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd_ < 0) continue;
        if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd_);
        fd_ = -1;
      }
      ::freeaddrinfo(res);
      if (fd_ < 0) throw ScorerError("cannot connect to " + endpoint);
    }
    channel_.emplace(fd_, fd_);
  }

  ~SocketTransport() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
    }
  }

  void write_line(const std::string& line) override { channel_->write_line(line); }
  std::string read_line(std::chrono::milliseconds timeout) override { return channel_->read_line(timeout); }

 private:
  int fd_ = -1;
  std::optional<FdLineChannel> channel_;
};

nlohmann::json parse_message(const std::string& line) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ScorerError("malformed scorer message: " + line.substr(0, 200));
  if (j.value("type", "") == "error") {
    throw ScorerError("scorer reported an error: " + j.value("message", std::string("(no message)")));
  }
  return j;
}

}  // namespace

ExternalScorerModel::ExternalScorerModel(std::unique_ptr<ScorerTransport> transport,
                                         std::vector<std::string> labels, ScorerOptions options)
    : ProbModel(std::move(labels)), transport_(std::move(transport)), options_(options) {}

ExternalScorerModel::~ExternalScorerModel() = default;

std::uint64_t ExternalScorerModel::requests_sent() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

Distribution ExternalScorerModel::predict(std::string_view text) const {
  const std::string s(text);
  return predict_batch(std::span<const std::string>(&s, 1)).front();
}

std::vector<Distribution> ExternalScorerModel::predict_batch(std::span<const std::string> texts) const {
  if (texts.empty()) return {};
  std::lock_guard lock(mutex_);
  const std::int64_t id = next_id_++;
  ++requests_;
  nlohmann::json request{{"type", "score"}, {"id", id}, {"texts", texts}};
  transport_->write_line(request.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));

  const auto response = parse_message(transport_->read_line(options_.timeout));
  if (response.value("type", "") != "score") throw ScorerError("unexpected scorer message type");
  if (!response.contains("id") || !response["id"].is_number_integer() || response["id"].get<std::int64_t>() != id) {
    throw ScorerError("scorer response id does not match request id " + std::to_string(id));
  }
  const auto& probs = response.value("probs", nlohmann::json());
  if (!probs.is_array() || probs.size() != texts.size()) {
    throw ScorerError("scorer response has wrong number of distributions");
  }

  const std::size_t k = labels().size();
  std::vector<Distribution> out;
  out.reserve(texts.size());
  for (const auto& row : probs) {
    if (!row.is_array() || row.size() != k) {
      throw ScorerError("scorer distribution length does not match label count " + std::to_string(k));
    }
    Distribution d;
    d.reserve(k);
    double sum = 0.0;
    for (const auto& p : row) {
      if (!p.is_number()) throw ScorerError("scorer distribution has a non-numeric entry");
      const double v = p.get<double>();
      if (!std::isfinite(v) || v < 0.0) throw ScorerError("scorer distribution has a negative or non-finite entry");
      d.push_back(v);
      sum += v;
    }
    if (std::abs(sum - 1.0) > options_.normalization_tolerance) {
      throw ScorerError("scorer distribution is not normalized (sum " + std::to_string(sum) + ")");
    }
    for (double& v : d) v /= sum;
    out.push_back(std::move(d));
  }
  return out;
}

std::unique_ptr<ExternalScorerModel> open_scorer(std::unique_ptr<ScorerTransport> transport,
                                                 std::vector<std::string> labels, const ScorerOptions& options) {
  transport->write_line(nlohmann::json{{"type", "hello"}, {"version", kScorerProtocolVersion}}.dump());
  const auto reply = parse_message(transport->read_line(options.timeout));
  if (reply.value("type", "") != "hello") throw ScorerError("scorer handshake: expected a hello reply");
  if (reply.value("version", -1) != kScorerProtocolVersion) {
    throw ScorerError("scorer handshake: protocol version mismatch");
  }
  if (!reply.contains("labels") || !reply["labels"].is_array()) {
    throw ScorerError("scorer handshake: missing label list");
  }
  auto announced = reply["labels"].get<std::vector<std::string>>();
  if (!labels.empty() && announced != labels) {
    throw ScorerError("scorer handshake: label mismatch (expected " + std::to_string(labels.size()) +
                      " labels, scorer announced " + std::to_string(announced.size()) + ")");
  }
  if (announced.size() < 2) throw ScorerError("scorer handshake: fewer than two labels");
  return std::make_unique<ExternalScorerModel>(std::move(transport), std::move(announced), options);
}

std::unique_ptr<ExternalScorerModel> open_scorer(const std::string& endpoint, std::vector<std::string> labels,
                                                 const ScorerOptions& options) {
  std::unique_ptr<ScorerTransport> transport;
  if (endpoint.starts_with("tcp://") || endpoint.starts_with("unix://")) {
    transport = std::make_unique<SocketTransport>(endpoint);
  } else {
    transport = std::make_unique<ProcessTransport>(endpoint);
  }
  return open_scorer(std::move(transport), std::move(labels), options);
}

}  // namespace stressmcts
