#include "ilr/oracle.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

namespace ilr {

ScoreVector::ScoreVector(std::map<std::string, double> scores) : scores_(std::move(scores)) {
  if (scores_.empty()) throw invalid_argument("score vector must be non-empty");
  double best = -1.0;
  for (const auto& [label, s] : scores_) {
    if (!(s >= 0.0 && s <= 1.0)) throw invalid_argument("score for " + label + " outside [0, 1]");
    if (s > best) {
      best = s;
      top_ = label;
    }
  }
}

double ScoreVector::score(const std::string& label) const {
  const auto it = scores_.find(label);
  return it == scores_.end() ? 0.0 : it->second;
}

const std::string& ScoreVector::top_label() const { return top_; }

double ScoreVector::sum() const {
  double s = 0.0;
  for (const auto& kv : scores_) s += kv.second;
  return s;
}

BuiltinOracle::BuiltinOracle(ClassifierParams params) : params_(std::move(params)) {
  if (params_.labels.empty()) throw invalid_argument("classifier has no labels");
  if (params_.weights.size() != params_.labels.size() * std::size_t(params_.feature_count) ||
      params_.bias.size() != params_.labels.size())
    throw invalid_argument("classifier parameter shapes do not match");
}

ScoreVector BuiltinOracle::classify(const Raster& img) {
  const auto p = classifier_probabilities(params_, img);
  std::map<std::string, double> m;
  for (std::size_t i = 0; i < p.size(); ++i) m[params_.labels[i]] = p[i];
  return ScoreVector(std::move(m));
}

// ---------------------------------------------------------------------------
// base64

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::span<const std::uint8_t> data) {
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const std::uint32_t v = std::uint32_t(data[i]) << 16 | std::uint32_t(data[i + 1]) << 8 | data[i + 2];
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += kB64[v & 63];
  }
  if (i + 1 == data.size()) {
    const std::uint32_t v = std::uint32_t(data[i]) << 16;
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == data.size()) {
    const std::uint32_t v = std::uint32_t(data[i]) << 16 | std::uint32_t(data[i + 1]) << 8;
    out += kB64[(v >> 18) & 63];
    out += kB64[(v >> 12) & 63];
    out += kB64[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw invalid_argument("base64 length is not a multiple of 4");
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    const int pad = last ? (text[i + 3] == '=') + (text[i + 2] == '=') : 0;
    if (pad == 1 && text[i + 2] == '=') throw invalid_argument("bad base64 padding");
    int v[4];
    for (int k = 0; k < 4; ++k) {
      if (k >= 4 - pad) {
        v[k] = 0;
        continue;
      }
      v[k] = val(text[i + std::size_t(k)]);
      if (v[k] < 0) throw invalid_argument("bad base64 character");
    }
    const std::uint32_t w = std::uint32_t(v[0]) << 18 | std::uint32_t(v[1]) << 12 | std::uint32_t(v[2]) << 6 | std::uint32_t(v[3]);
    out.push_back(std::uint8_t(w >> 16));
    if (pad < 2) out.push_back(std::uint8_t(w >> 8));
    if (pad < 1) out.push_back(std::uint8_t(w));
  }
  return out;
}

std::string encode_classify_request(std::uint64_t id, const Raster& img) {
  nlohmann::json j;
  j["id"] = id;
  j["width"] = img.width();
  j["height"] = img.height();
  j["pixels"] = base64_encode(img.bytes());
  return j.dump();
}

// ---------------------------------------------------------------------------
// External oracle

namespace {

using Reason = OracleError::Reason;

int connect_tcp(const std::string& host, const std::string& port, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || !res)
    throw OracleError(Reason::Unavailable, "cannot resolve " + host + ":" + port);
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    const int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd p{fd, POLLOUT, 0};
      rc = ::poll(&p, 1, int(timeout.count()));
      int err = 0;
      socklen_t len = sizeof err;
      if (rc == 1 && getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) == 0 && err == 0) rc = 0;
      else rc = -1;
    }
    if (rc == 0) {
      fcntl(fd, F_SETFL, flags);
      break;
    }
    ::close(fd);
    fd = -1;
  }
  freeaddrinfo(res);
  if (fd < 0) throw OracleError(Reason::Unavailable, "cannot connect to " + host + ":" + port);
  return fd;
}

}  // namespace

std::unique_ptr<ExternalOracle> external_oracle_connect(const std::string& endpoint, const ExternalOracleOptions& opts) {
  ::signal(SIGPIPE, SIG_IGN);
  std::unique_ptr<ExternalOracle> o(new ExternalOracle());
  o->opts_ = opts;
  if (endpoint.rfind("tcp:", 0) == 0) {
    const std::string rest = endpoint.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw invalid_argument("tcp endpoint must be tcp:<host>:<port>");
    const int fd = connect_tcp(rest.substr(0, colon), rest.substr(colon + 1), opts.handshake_timeout);
    o->read_fd_ = fd;
    o->write_fd_ = fd;
  } else {
    int to_child[2], from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) throw OracleError(Reason::Unavailable, "pipe() failed");
    const pid_t pid = ::fork();
    if (pid < 0) throw OracleError(Reason::Unavailable, "fork() failed");
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", endpoint.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    o->child_pid_ = pid;
    o->write_fd_ = to_child[1];
    o->read_fd_ = from_child[0];
  }

  const std::string hello = o->read_line(opts.handshake_timeout);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(hello);
  } catch (const nlohmann::json::exception&) {
    throw OracleError(Reason::ProtocolViolation, "handshake is not valid JSON");
  }
  if (!j.is_object() || j.value("type", "") != "hello" || !j.contains("labels") || !j["labels"].is_array())
    throw OracleError(Reason::ProtocolViolation, "expected a hello message with a label list");
  for (const auto& l : j["labels"]) {
    if (!l.is_string()) throw OracleError(Reason::ProtocolViolation, "labels must be strings");
    o->labels_.push_back(l.get<std::string>());
  }
  if (o->labels_.empty()) throw OracleError(Reason::ProtocolViolation, "oracle advertised an empty label list");
  return o;
}

ExternalOracle::~ExternalOracle() {
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
  if (child_pid_ > 0) {
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(child_pid_, nullptr, WNOHANG) == child_pid_) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    ::kill(child_pid_, SIGTERM);
    ::waitpid(child_pid_, nullptr, 0);
  }
}

std::string ExternalOracle::read_line(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw OracleError(Reason::Timeout, "timed out waiting for the oracle");
    pollfd p{read_fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, int(left.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc == 0) throw OracleError(Reason::Timeout, "timed out waiting for the oracle");
    if (rc < 0) throw OracleError(Reason::Unavailable, "poll() failed on the oracle connection");
    char chunk[65536];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw OracleError(Reason::Unavailable, "oracle closed the connection");
    buffer_.append(chunk, std::size_t(n));
  }
}

void ExternalOracle::write_line(const std::string& line) {
  std::string data = line + "\n";
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw OracleError(Reason::Unavailable, "cannot write to the oracle");
    off += std::size_t(n);
  }
}

ScoreVector ExternalOracle::classify(const Raster& img) {
  std::lock_guard lock(mu_);
  const std::uint64_t id = next_id_++;
  write_line(encode_classify_request(id, img));
  const std::string line = read_line(opts_.request_timeout);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw OracleError(Reason::ProtocolViolation, "response is not valid JSON");
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_unsigned())
    throw OracleError(Reason::ProtocolViolation, "response has no id");
  if (j["id"].get<std::uint64_t>() != id) throw OracleError(Reason::ProtocolViolation, "response id does not match request");
  if (j.contains("error")) throw OracleError(Reason::Remote, "oracle error: " + j["error"].dump());
  if (!j.contains("scores") || !j["scores"].is_object()) throw OracleError(Reason::ProtocolViolation, "response has no scores");
  std::map<std::string, double> scores;
  for (const auto& l : labels_) scores[l] = 0.0;
  for (const auto& [label, v] : j["scores"].items()) {
    if (!scores.count(label)) throw OracleError(Reason::ProtocolViolation, "score for unknown label " + label);
    if (!v.is_number()) throw OracleError(Reason::ProtocolViolation, "non-numeric score for " + label);
    const double s = v.get<double>();
    if (!(s >= 0.0 && s <= 1.0)) throw OracleError(Reason::ProtocolViolation, "score outside [0, 1] for " + label);
    scores[label] = s;
  }
  return ScoreVector(std::move(scores));
}

// ---------------------------------------------------------------------------
// ROI handling

void RoiNoise::validate() const {
  if (!(delta >= 0.0 && delta < 0.5)) throw invalid_argument("ROI displacement level must be in [0, 0.5)");
}

std::pair<double, double> roi_displacement(const RoiNoise& noise, std::uint64_t rng_seed) {
  noise.validate();
  if (noise.delta == 0.0) return {0.0, 0.0};
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> u(-noise.delta, noise.delta);
  const double a = u(rng);
  const double b = u(rng);
  return {a, b};
}

Box displaced_roi(const Box& roi, double u, double v, int image_width, int image_height) {
  if (roi.empty()) throw invalid_argument("degenerate ROI");
  Box b = roi;
  b.x += int(round_half_up(u * roi.w));
  b.y += int(round_half_up(v * roi.h));
  const int x0 = std::max(0, b.x), y0 = std::max(0, b.y);
  const int x1 = std::min(image_width, b.x + b.w), y1 = std::min(image_height, b.y + b.h);
  if (x1 <= x0 || y1 <= y0) throw invalid_argument("displaced ROI left the image");
  return {x0, y0, x1 - x0, y1 - y0};
}

Raster crop_roi(const Raster& img, const Box& roi, const RoiNoise& noise, std::uint64_t rng_seed, int out_size) {
  if (roi.empty()) throw invalid_argument("degenerate ROI");
  const auto [u, v] = roi_displacement(noise, rng_seed);
  const Box b = displaced_roi(roi, u, v, img.width(), img.height());
  return resize_bilinear(crop(img, b), out_size, out_size);
}

}  // namespace ilr
