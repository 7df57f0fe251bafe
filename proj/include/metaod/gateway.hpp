#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "metaod/clock.hpp"
#include "metaod/geometry.hpp"

namespace metaod {

enum class EndpointKind { kHttp, kSubprocess, kMock };

EndpointKind endpoint_kind_from_string(const std::string& s);
const char* to_string(EndpointKind kind);

struct DetectorEndpoint {
  std::string id;
  EndpointKind kind = EndpointKind::kHttp;
  std::string address;  // URL (http) or command line (subprocess)
  std::optional<std::string> auth_header;
  double qps_limit = 10.0;
  int max_in_flight = 4;
  double timeout_ms = 10000.0;
  std::optional<double> cost_per_query;
};

struct QueryStats {
  long queries_sent = 0;
  long cache_hits = 0;
  double total_latency_ms = 0.0;
  double estimated_cost = 0.0;
};

/// Side channel giving scripted mocks the trial geometry; real gateways
/// ignore it.
struct TrialContext {
  std::string background;  // content hash of the background image
  Point inserted_center;
  BBox inserted_bbox;
};

class DetectorClient {
 public:
  virtual ~DetectorClient() = default;
  virtual void note_trial(const TrialContext&) {}
  /// Query the detector; `latency_ms` (optional) reports the billable wall
  /// time of this call, 0 for cache hits.
  virtual DetectionSet detect(const ImageBuffer& image,
                              double* latency_ms = nullptr) = 0;
  virtual QueryStats stats() const = 0;
};

/// Parse a canonical wire response; throws ProtocolError with a payload
/// excerpt on malformed input.
DetectionSet parse_canonical_response(const std::string& body,
                                      const std::string& image_id);

/// Canonical JSON serialization of a detection set (the cache file format).
std::string canonical_response_json(const DetectionSet& set);

/// Uniform black-box access to one detector: disk cache keyed by image
/// content, sliding-window rate limiting, bounded in-flight requests,
/// retry with exponential backoff, and query accounting.
class Gateway : public DetectorClient {
 public:
  Gateway(DetectorEndpoint endpoint, std::filesystem::path cache_root,
          std::shared_ptr<Clock> clock);

  DetectionSet detect(const ImageBuffer& image, double* latency_ms = nullptr) override;
  QueryStats stats() const override;

  /// Cheap startup reachability check (any HTTP response counts as alive).
  bool reachable();

  const DetectorEndpoint& endpoint() const { return endpoint_; }

 private:
  std::string dispatch_http(const std::vector<std::uint8_t>& png_bytes);
  std::string dispatch_subprocess(const std::vector<std::uint8_t>& png_bytes);
  std::string dispatch_with_retries(const std::vector<std::uint8_t>& png_bytes);
  void rate_limit_acquire();

  DetectorEndpoint endpoint_;
  std::filesystem::path cache_dir_;
  std::shared_ptr<Clock> clock_;

  mutable std::mutex mutex_;
  std::condition_variable in_flight_cv_;
  int in_flight_ = 0;
  std::deque<double> dispatch_times_ms_;
  QueryStats stats_;
};

// --- scripted mock detectors ------------------------------------------------

struct MockScenario {
  enum class Kind {
    kPerfect,       // baseline + inserted-object detection
    kSuppressNear,  // drop baseline detections with center within radius
    kRelabelNear,   // relabel those detections instead
    kDriftNear,     // shift those boxes by drift_offset
    kCorridor,      // fail exactly while the placement parameter t <= t_max
  };

  Kind kind = Kind::kPerfect;
  double radius = 0.0;
  Point drift_offset{};
  double t_max = 0.0;
  Point segment_start{};
  Point segment_target{};
  std::string relabel_to = "relabeled";
  std::map<std::string, DetectionSet> truth;  // background hash -> baseline
  bool add_inserted_detection = true;
  std::string inserted_label = "inserted";
  double inserted_confidence = 0.9;
};

/// Deterministic detector driven by a scenario. Queries are free: no cache,
/// no rate limiting, but queries_sent still counts.
class MockDetector : public DetectorClient {
 public:
  explicit MockDetector(MockScenario scenario);

  void note_trial(const TrialContext& context) override;
  DetectionSet detect(const ImageBuffer& image, double* latency_ms = nullptr) override;
  QueryStats stats() const override;

 private:
  MockScenario scenario_;
  mutable std::mutex mutex_;
  std::optional<TrialContext> context_;
  QueryStats stats_;
};

std::unique_ptr<DetectorClient> mock_detector(MockScenario scenario);

/// Build the client an endpoint describes (gateway for http/subprocess;
/// kMock endpoints are for tests, which construct MockDetector directly).
std::unique_ptr<DetectorClient> make_client(const DetectorEndpoint& endpoint,
                                            const std::filesystem::path& cache_root,
                                            std::shared_ptr<Clock> clock);

}  // namespace metaod
