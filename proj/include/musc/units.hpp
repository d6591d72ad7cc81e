#pragma once

#include <numbers>

namespace musc {

namespace units {
// SI 2019 exact values.
inline constexpr double e = 1.602176634e-19;    // C
inline constexpr double h = 6.62607015e-34;     // J s
inline constexpr double hbar = h / (2.0 * std::numbers::pi);
}  // namespace units

// E_J / E_c above which the transmon expansion is trusted.
inline constexpr double kTransmonRegimeRatio = 20.0;

}  // namespace musc
