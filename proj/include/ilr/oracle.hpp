#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "ilr/corpus.hpp"
#include "ilr/imaging.hpp"

namespace ilr {

/// Confidence per label. Iteration is lexicographic, which also fixes the
/// tie-break of top_label().
class ScoreVector {
 public:
  ScoreVector() = default;
  explicit ScoreVector(std::map<std::string, double> scores);

  const std::map<std::string, double>& scores() const { return scores_; }
  double score(const std::string& label) const;
  const std::string& top_label() const;
  double sum() const;

  friend bool operator==(const ScoreVector&, const ScoreVector&) = default;

 private:
  std::map<std::string, double> scores_;
  std::string top_;
};

/// Black-box classifier. Implementations must be deterministic for a given
/// image; the image may have any size.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual ScoreVector classify(const Raster& img) = 0;
  virtual const std::vector<std::string>& labels() const = 0;
};

class BuiltinOracle final : public Oracle {
 public:
  explicit BuiltinOracle(ClassifierParams params);
  ScoreVector classify(const Raster& img) override;
  const std::vector<std::string>& labels() const override { return params_.labels; }
  const ClassifierParams& params() const { return params_; }

 private:
  ClassifierParams params_;
};

class OracleError : public Error {
 public:
  enum class Reason { Unavailable, Timeout, ProtocolViolation, Remote };
  OracleError(Reason reason, const std::string& what) : Error(ErrorKind::Oracle, what), reason_(reason) {}
  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

struct ExternalOracleOptions {
  std::chrono::milliseconds handshake_timeout{5000};
  std::chrono::milliseconds request_timeout{30000};
};

/// Client side of the newline-delimited JSON oracle protocol, over a child
/// process (stdio) or TCP. Concurrent callers are serialised; one request is
/// in flight per connection.
class ExternalOracle final : public Oracle {
 public:
  ~ExternalOracle() override;
  ExternalOracle(const ExternalOracle&) = delete;
  ExternalOracle& operator=(const ExternalOracle&) = delete;

  ScoreVector classify(const Raster& img) override;
  const std::vector<std::string>& labels() const override { return labels_; }

 private:
  friend std::unique_ptr<ExternalOracle> external_oracle_connect(const std::string&, const ExternalOracleOptions&);
  ExternalOracle() = default;

  std::string read_line(std::chrono::milliseconds timeout);
  void write_line(const std::string& line);

  int read_fd_ = -1;
  int write_fd_ = -1;
  int child_pid_ = -1;
  std::string buffer_;
  std::vector<std::string> labels_;
  std::uint64_t next_id_ = 1;
  ExternalOracleOptions opts_;
  std::mutex mu_;
};

/// `endpoint` is either "tcp:<host>:<port>" or a shell command line that is
/// started as a child process speaking the protocol on stdin/stdout.
std::unique_ptr<ExternalOracle> external_oracle_connect(const std::string& endpoint,
                                                        const ExternalOracleOptions& opts = {});

std::string base64_encode(std::span<const std::uint8_t> data);
/// Throws invalid_argument on malformed input.
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// Request line for one classify call.
std::string encode_classify_request(std::uint64_t id, const Raster& img);

/// Displacement level delta of the first-stage detector box.
struct RoiNoise {
  double delta = 0.0;
  void validate() const;
};

/// Seeded displacement draw (u, v) ~ U(-delta, delta)^2.
std::pair<double, double> roi_displacement(const RoiNoise& noise, std::uint64_t rng_seed);

/// ROI shifted by (u * w, v * h), rounded to whole pixels and clipped to the image.
Box displaced_roi(const Box& roi, double u, double v, int image_width, int image_height);

/// Crops the (possibly displaced) ROI and resizes it to the classifier input.
Raster crop_roi(const Raster& img, const Box& roi, const RoiNoise& noise, std::uint64_t rng_seed,
                int out_size = kClassifierInput);

}  // namespace ilr
