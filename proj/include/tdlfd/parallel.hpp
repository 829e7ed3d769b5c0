#pragma once

namespace tdlfd {

/// Selects between the OpenMP kernel and the serial reference loop it is
/// tested against. Both produce bit-identical results.
enum class Exec { serial, parallel };

}  // namespace tdlfd
