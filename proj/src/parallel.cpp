#include "lyapexp/parallel.hpp"

#include <cstdlib>
#include <string>

namespace lyapexp {

std::size_t default_threads() {
  const char* env = std::getenv("LYAPEXP_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(env, &pos);
    if (pos != std::string(env).size() || v < 1) return 1;
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    return 1;
  }
}

}  // namespace lyapexp
