#pragma once

namespace abe_cities {

// Idempotent libsodium initialisation; throws if the library cannot start.
void ensure_sodium();

}  // namespace abe_cities
