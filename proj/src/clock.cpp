#include "metaod/clock.hpp"

#include <chrono>
#include <thread>

namespace metaod {

double SystemClock::now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void SystemClock::sleep_ms(double ms) {
  if (ms > 0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

double ManualClock::now_ms() {
  std::lock_guard lock(mutex_);
  return now_;
}

void ManualClock::sleep_ms(double ms) {
  std::lock_guard lock(mutex_);
  if (ms > 0) {
    now_ += ms;
    sleeps_.push_back(ms);
  }
}

void ManualClock::advance_ms(double ms) {
  std::lock_guard lock(mutex_);
  now_ += ms;
}

std::vector<double> ManualClock::recorded_sleeps() const {
  std::lock_guard lock(mutex_);
  return sleeps_;
}

std::shared_ptr<Clock> system_clock() { return std::make_shared<SystemClock>(); }

}  // namespace metaod
