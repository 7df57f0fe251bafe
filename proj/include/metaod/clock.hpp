#pragma once

#include <memory>
#include <mutex>
#include <vector>

namespace metaod {

/// Injectable time source: all waiting in the gateway goes through this, so
/// tests can verify backoff schedules without real sleeping and report
/// output never depends on wall time.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now_ms() = 0;
  virtual void sleep_ms(double ms) = 0;
};

class SystemClock : public Clock {
 public:
  double now_ms() override;
  void sleep_ms(double ms) override;
};

/// Virtual clock: sleep advances time instantly and records its argument.
class ManualClock : public Clock {
 public:
  double now_ms() override;
  void sleep_ms(double ms) override;
  void advance_ms(double ms);
  std::vector<double> recorded_sleeps() const;

 private:
  mutable std::mutex mutex_;
  double now_ = 0.0;
  std::vector<double> sleeps_;
};

std::shared_ptr<Clock> system_clock();

}  // namespace metaod
