#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

#include "kneeflex/log.hpp"
#include "kneeflex/parallel.hpp"

namespace kneeflex {

int default_threads() {
  if (const char* env = std::getenv("GONIO_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (...) {
    }
  }
  return 1;
}

namespace log {
namespace {
std::atomic<bool> g_quiet{false};
std::mutex g_mutex;
}  // namespace

void set_quiet(bool q) { g_quiet = q; }
bool quiet() { return g_quiet; }

void info(std::string_view msg) {
  if (g_quiet) return;
  std::lock_guard lock(g_mutex);
  std::cerr << msg << '\n';
}

void warn(std::string_view msg) {
  if (g_quiet) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "warning: " << msg << '\n';
}

}  // namespace log
}  // namespace kneeflex
