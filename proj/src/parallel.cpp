#include "tilt/parallel.hpp"

namespace tilt {

namespace {
std::atomic<unsigned> g_cap{0};
}

void set_thread_cap(unsigned cap) { g_cap = cap; }

unsigned thread_cap() {
  const unsigned cap = g_cap.load();
  if (cap != 0) return cap;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace tilt
