#pragma once

namespace dcnet {

/// Recorded in run manifests. Bump when results change for identical inputs.
inline constexpr const char* kVersionString = "0.1.0";

}  // namespace dcnet
