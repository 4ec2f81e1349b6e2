#include "abe_cities/sodium_init.hpp"

#include <sodium.h>

#include <stdexcept>

namespace abe_cities {

void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium failed to initialise");
}

}  // namespace abe_cities
