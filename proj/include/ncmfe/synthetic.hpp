#pragma once

// Seeded random weight sets that satisfy every architecture constraint.
// Used by the verification suites and as benchmark stand-ins for trained
// models.

#include <random>
#include <vector>

#include "ncmfe/constitutive.hpp"

namespace ncmfe {

MicnnWeights random_micnn(std::mt19937_64& rng, std::size_t inputs,
                          const std::vector<std::size_t>& hidden = {8, 8}, bool monotone = true);
CannWeights random_cann(std::mt19937_64& rng, std::size_t inputs);
IckanWeights random_ickan(std::mt19937_64& rng, std::size_t inputs,
                          const std::vector<std::size_t>& hidden = {4});

enum class Architecture { Micnn, Cann, Ickan };
inline constexpr Architecture kAllArchitectures[] = {Architecture::Micnn, Architecture::Cann,
                                                     Architecture::Ickan};
const char* to_string(Architecture a);

/// Random weights of the given architecture on the given kinematic layer.
NcmDefinition random_model(std::mt19937_64& rng, Architecture arch,
                           const KinematicConfig& kinematics = KinematicConfig::isochoric());

}  // namespace ncmfe
