#pragma once

#include <string>
#include <string_view>

#include "mrinv/volume.hpp"

namespace mrinv {

enum class InversionMode {
  none,       // clip only
  invert,     // intensity negative
  invert_bg,  // negative with percentile-gated black background
};

std::string to_string(InversionMode mode);
/// Accepts "none", "invert" and "invert-bg". Throws ConfigError otherwise.
InversionMode parse_inversion_mode(std::string_view text);

struct PreprocessSpec {
  double clip_lo = 0.0;
  double clip_hi = 3000.0;
  InversionMode mode = InversionMode::invert_bg;
  double bg_percentile = 1.0;

  /// Throws ConfigError unless clip_lo < clip_hi and bg_percentile lies in [0, 100].
  void validate() const;
};

/// Every voxel becomes min(max(x, lo), hi). Requires lo < hi.
Volume3D clip(const Volume3D& v, double lo, double hi);

/// x -> max(X) - x + min(X) over the volume's own intensity range.
Volume3D invert(const Volume3D& v);

/// Inversion with black background: voxels at or below the p-th percentile value of the
/// input become 0, every other voxel becomes max(X) - x + min(X).
Volume3D invert_black_background(const Volume3D& v, double p);

/// Clip, then apply spec.mode. The percentile gate sees the clipped, un-inverted data.
Volume3D preprocess_case(const Volume3D& v, const PreprocessSpec& spec);

}  // namespace mrinv
