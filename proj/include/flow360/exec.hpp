#pragma once

namespace flow360 {

/// Selects between the OpenMP row-parallel kernels and their serial reference
/// versions. Both produce bit-identical results.
enum class Exec { Serial, Parallel };

}  // namespace flow360
