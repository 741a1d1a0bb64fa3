#pragma once

// Weight files: JSON documents describing an NcmDefinition. The schema is
// documented in docs/weight_format.md. Every loader error names the
// offending field path, e.g. "layers[1].A[0][2]: negative entry".

#include <string>

#include "ncmfe/constitutive.hpp"

namespace ncmfe {

/// Throws ValidationError with a field path on malformed or invalid input.
NcmDefinition model_from_string(const std::string& text);
NcmDefinition load_model(const std::string& path);

std::string model_to_string(const NcmDefinition& model, int indent = 2);
void save_model(const NcmDefinition& model, const std::string& path);

}  // namespace ncmfe
