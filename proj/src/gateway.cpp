#include "metaod/gateway.hpp"

#include <httplib.h>
#include <json.hpp>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "metaod/errors.hpp"
#include "metaod/hashing.hpp"
#include "metaod/image_io.hpp"

namespace metaod {

namespace {

constexpr int kMaxRetries = 5;
constexpr double kBackoffBaseMs = 1000.0;
// Dispatch spacing is enforced on the client clock, but the limit must hold
// for arrival timestamps too; the slack absorbs connect/scheduling jitter.
constexpr double kRateWindowSlackMs = 150.0;

struct RetryableFailure {
  bool rate_limited = false;
  std::string message;
};

std::string excerpt(const std::string& body) {
  std::string e = body.substr(0, 160);
  for (char& c : e)
    if (c == '\n' || c == '\r') c = ' ';
  if (body.size() > 160) e += "...";
  return e;
}

// Split "http(s)://host:port/path" into client base and path.
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw Error("endpoint address is not a URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string auth_env_name(const std::string& endpoint_id) {
  std::string name = "METAOD_AUTH_";
  for (char c : endpoint_id)
    name.push_back(std::isalnum(static_cast<unsigned char>(c))
                       ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                       : '_');
  return name;
}

void atomic_write(const std::filesystem::path& path, const std::string& data) {
  static std::atomic<unsigned> counter{0};
  const auto tmp = path.parent_path() /
                   (path.filename().string() + ".tmp" + std::to_string(counter++));
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << data;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

EndpointKind endpoint_kind_from_string(const std::string& s) {
  if (s == "http") return EndpointKind::kHttp;
  if (s == "subprocess") return EndpointKind::kSubprocess;
  if (s == "mock") return EndpointKind::kMock;
  throw Error("unknown endpoint kind: " + s);
}

const char* to_string(EndpointKind kind) {
  switch (kind) {
    case EndpointKind::kHttp: return "http";
    case EndpointKind::kSubprocess: return "subprocess";
    case EndpointKind::kMock: return "mock";
  }
  return "unknown";
}

DetectionSet parse_canonical_response(const std::string& body,
                                      const std::string& image_id) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError("malformed response (" + std::string(e.what()) +
                        "): " + excerpt(body));
  }
  DetectionSet set;
  set.image_id = image_id;
  try {
    if (!doc.is_object() || !doc.contains("detections"))
      throw ProtocolError("response lacks \"detections\": " + excerpt(body));
    for (const auto& d : doc.at("detections")) {
      Detection det;
      det.label = d.at("label").get<std::string>();
      det.confidence = d.at("confidence").get<double>();
      const auto& box = d.at("box");
      det.box = {box.at("x").get<double>(), box.at("y").get<double>(),
                 box.at("w").get<double>(), box.at("h").get<double>()};
      if (det.label.empty())
        throw ProtocolError("empty label in response: " + excerpt(body));
      if (det.confidence < 0.0 || det.confidence > 1.0)
        throw ProtocolError("confidence outside [0,1]: " + excerpt(body));
      if (det.box.w <= 0.0 || det.box.h <= 0.0)
        throw ProtocolError("non-positive box dimensions: " + excerpt(body));
      set.detections.push_back(std::move(det));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError("response shape error (" + std::string(e.what()) +
                        "): " + excerpt(body));
  }
  return set;
}

std::string canonical_response_json(const DetectionSet& set) {
  nlohmann::json dets = nlohmann::json::array();
  for (const auto& d : set.detections) {
    dets.push_back({{"label", d.label},
                    {"confidence", d.confidence},
                    {"box",
                     {{"x", d.box.x}, {"y", d.box.y}, {"w", d.box.w}, {"h", d.box.h}}}});
  }
  return nlohmann::json{{"detections", dets}}.dump();
}

Gateway::Gateway(DetectorEndpoint endpoint, std::filesystem::path cache_root,
                 std::shared_ptr<Clock> clock)
    : endpoint_(std::move(endpoint)),
      cache_dir_(cache_root / endpoint_.id),
      clock_(std::move(clock)) {
  if (endpoint_.qps_limit <= 0) throw ContractViolation("qps_limit must be > 0");
  if (endpoint_.timeout_ms <= 0) throw ContractViolation("timeout must be > 0");
  if (endpoint_.max_in_flight < 1)
    throw ContractViolation("max_in_flight must be >= 1");
  std::filesystem::create_directories(cache_dir_);
}

void Gateway::rate_limit_acquire() {
  // Sliding-window log: never more than floor(qps_limit) dispatches in any
  // 1 s window (for sub-1 limits: one dispatch per 1/qps seconds).
  const long capacity =
      endpoint_.qps_limit >= 1.0 ? static_cast<long>(endpoint_.qps_limit) : 1;
  const double window_ms =
      (endpoint_.qps_limit >= 1.0 ? 1000.0 : 1000.0 / endpoint_.qps_limit) +
      kRateWindowSlackMs;

  for (;;) {
    double wait_ms = 0.0;
    {
      std::lock_guard lock(mutex_);
      const double now = clock_->now_ms();
      while (!dispatch_times_ms_.empty() &&
             dispatch_times_ms_.front() <= now - window_ms)
        dispatch_times_ms_.pop_front();
      if (static_cast<long>(dispatch_times_ms_.size()) < capacity) {
        dispatch_times_ms_.push_back(now);
        return;
      }
      wait_ms = dispatch_times_ms_.front() + window_ms - now + 1.0;
    }
    clock_->sleep_ms(wait_ms);
  }
}

std::string Gateway::dispatch_http(const std::vector<std::uint8_t>& png_bytes) {
  const auto [base, path] = split_url(endpoint_.address);
  httplib::Client client(base);
  const auto timeout_s = std::chrono::milliseconds(
      static_cast<long long>(endpoint_.timeout_ms));
  client.set_connection_timeout(timeout_s);
  client.set_read_timeout(timeout_s);
  client.set_write_timeout(timeout_s);

  httplib::Headers headers;
  std::string auth = endpoint_.auth_header.value_or("");
  if (auth.empty()) {
    if (const char* env = std::getenv(auth_env_name(endpoint_.id).c_str()))
      auth = env;
  }
  if (!auth.empty()) headers.emplace("Authorization", auth);

  const auto res = client.Post(
      path, headers, reinterpret_cast<const char*>(png_bytes.data()),
      png_bytes.size(), "image/png");
  if (!res)
    throw RetryableFailure{false, "transport: " + httplib::to_string(res.error())};
  if (res->status == 429)
    throw RetryableFailure{true, "HTTP 429 from " + endpoint_.id};
  if (res->status >= 500)
    throw RetryableFailure{false, "HTTP " + std::to_string(res->status)};
  if (res->status != 200)
    throw TransportError("HTTP " + std::to_string(res->status) + " from " +
                         endpoint_.id + ": " + excerpt(res->body));
  return res->body;
}

std::string Gateway::dispatch_subprocess(const std::vector<std::uint8_t>& png_bytes) {
  static std::atomic<unsigned> counter{0};
  const auto image_path =
      std::filesystem::temp_directory_path() /
      ("metaod_query_" + std::to_string(::getpid()) + "_" +
       std::to_string(counter++) + ".png");
  {
    std::ofstream out(image_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + image_path.string());
    out.write(reinterpret_cast<const char*>(png_bytes.data()),
              static_cast<std::streamsize>(png_bytes.size()));
  }

  const std::string command = endpoint_.address + " '" + image_path.string() + "'";
  std::string output;
  FILE* pipe = ::popen(command.c_str(), "r");
  if (!pipe) {
    std::filesystem::remove(image_path);
    throw RetryableFailure{false, "cannot spawn: " + endpoint_.address};
  }
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, n);
  const int status = ::pclose(pipe);
  std::filesystem::remove(image_path);
  if (status != 0)
    throw RetryableFailure{false, "subprocess exited with status " +
                                      std::to_string(status)};
  return output;
}

std::string Gateway::dispatch_with_retries(const std::vector<std::uint8_t>& png_bytes) {
  double backoff_ms = kBackoffBaseMs;
  for (int attempt = 0;; ++attempt) {
    rate_limit_acquire();
    try {
      return endpoint_.kind == EndpointKind::kHttp ? dispatch_http(png_bytes)
                                                   : dispatch_subprocess(png_bytes);
    } catch (const RetryableFailure& failure) {
      if (attempt >= kMaxRetries) {
        if (failure.rate_limited)
          throw RateLimitError("rate limited after " + std::to_string(kMaxRetries) +
                               " retries: " + failure.message);
        throw TransportError("giving up after " + std::to_string(kMaxRetries) +
                             " retries: " + failure.message);
      }
      clock_->sleep_ms(backoff_ms);
      backoff_ms *= 2.0;
    }
  }
}

DetectionSet Gateway::detect(const ImageBuffer& image, double* latency_ms) {
  if (endpoint_.kind == EndpointKind::kMock)
    throw ContractViolation("mock endpoints need a MockDetector");
  const auto png_bytes = encode_png(image);
  const std::string key = sha256_hex(png_bytes);
  const auto cache_path = cache_dir_ / (key + ".json");

  if (std::filesystem::exists(cache_path)) {
    std::ifstream in(cache_path, std::ios::binary);
    std::string body{std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>()};
    const DetectionSet set = parse_canonical_response(body, key);
    {
      std::lock_guard lock(mutex_);
      ++stats_.cache_hits;
    }
    if (latency_ms) *latency_ms = 0.0;
    return set;
  }

  {
    std::unique_lock lock(mutex_);
    in_flight_cv_.wait(lock, [&] { return in_flight_ < endpoint_.max_in_flight; });
    ++in_flight_;
  }

  std::string body;
  double elapsed = 0.0;
  try {
    const double t0 = clock_->now_ms();
    body = dispatch_with_retries(png_bytes);
    elapsed = clock_->now_ms() - t0;
  } catch (...) {
    {
      std::lock_guard lock(mutex_);
      --in_flight_;
    }
    in_flight_cv_.notify_one();
    throw;
  }
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  in_flight_cv_.notify_one();

  const DetectionSet set = parse_canonical_response(body, key);
  atomic_write(cache_path, canonical_response_json(set));
  {
    std::lock_guard lock(mutex_);
    ++stats_.queries_sent;
    stats_.total_latency_ms += elapsed;
    if (endpoint_.cost_per_query)
      stats_.estimated_cost = stats_.queries_sent * *endpoint_.cost_per_query;
  }
  if (latency_ms) *latency_ms = elapsed;
  return set;
}

QueryStats Gateway::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

bool Gateway::reachable() {
  if (endpoint_.kind != EndpointKind::kHttp) return true;
  try {
    const auto [base, path] = split_url(endpoint_.address);
    httplib::Client client(base);
    client.set_connection_timeout(std::chrono::milliseconds(2000));
    const auto res = client.Head(path);
    if (res) return true;
    // Servers without HEAD support still prove reachability by answering.
    return res.error() != httplib::Error::Connection &&
           res.error() != httplib::Error::ConnectionTimeout;
  } catch (const Error&) {
    return false;
  }
}

MockDetector::MockDetector(MockScenario scenario) : scenario_(std::move(scenario)) {}

void MockDetector::note_trial(const TrialContext& context) {
  std::lock_guard lock(mutex_);
  context_ = context;
}

DetectionSet MockDetector::detect(const ImageBuffer& image, double* latency_ms) {
  std::lock_guard lock(mutex_);
  if (latency_ms) *latency_ms = 0.0;
  ++stats_.queries_sent;

  const std::string key = content_hash(image);
  if (const auto it = scenario_.truth.find(key); it != scenario_.truth.end()) {
    DetectionSet set = it->second;
    set.image_id = key;
    return set;  // background query
  }

  if (!context_ || scenario_.truth.find(context_->background) == scenario_.truth.end())
    throw ContractViolation("mock detector queried with unknown background hash");
  const TrialContext& ctx = *context_;
  const DetectionSet& baseline = scenario_.truth.at(ctx.background);

  DetectionSet out;
  out.image_id = key;

  const auto near_inserted = [&](const Detection& det) {
    const Point c = center(det.box);
    return std::hypot(c.x - ctx.inserted_center.x, c.y - ctx.inserted_center.y) <=
           scenario_.radius;
  };

  switch (scenario_.kind) {
    case MockScenario::Kind::kPerfect:
      out.detections = baseline.detections;
      break;
    case MockScenario::Kind::kSuppressNear:
      for (const auto& det : baseline.detections)
        if (!near_inserted(det)) out.detections.push_back(det);
      break;
    case MockScenario::Kind::kRelabelNear:
      for (auto det : baseline.detections) {
        if (near_inserted(det)) det.label = scenario_.relabel_to;
        out.detections.push_back(std::move(det));
      }
      break;
    case MockScenario::Kind::kDriftNear:
      for (auto det : baseline.detections) {
        if (near_inserted(det)) {
          det.box.x += scenario_.drift_offset.x;
          det.box.y += scenario_.drift_offset.y;
        }
        out.detections.push_back(std::move(det));
      }
      break;
    case MockScenario::Kind::kCorridor: {
      const Point v{scenario_.segment_target.x - scenario_.segment_start.x,
                    scenario_.segment_target.y - scenario_.segment_start.y};
      const double len2 = v.x * v.x + v.y * v.y;
      const double t =
          len2 > 0 ? ((ctx.inserted_center.x - scenario_.segment_start.x) * v.x +
                      (ctx.inserted_center.y - scenario_.segment_start.y) * v.y) /
                         len2
                   : 0.0;
      out.detections = baseline.detections;
      if (t <= scenario_.t_max && !out.detections.empty())
        out.detections.erase(out.detections.begin());  // provoke one miss
      break;
    }
  }

  if (scenario_.add_inserted_detection)
    out.detections.push_back(Detection{ctx.inserted_bbox, scenario_.inserted_label,
                                       scenario_.inserted_confidence});
  return out;
}

QueryStats MockDetector::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

std::unique_ptr<DetectorClient> mock_detector(MockScenario scenario) {
  return std::make_unique<MockDetector>(std::move(scenario));
}

std::unique_ptr<DetectorClient> make_client(const DetectorEndpoint& endpoint,
                                            const std::filesystem::path& cache_root,
                                            std::shared_ptr<Clock> clock) {
  if (endpoint.kind == EndpointKind::kMock)
    throw Error("mock endpoints are built programmatically, not from config");
  return std::make_unique<Gateway>(endpoint, cache_root, std::move(clock));
}

}  // namespace metaod
