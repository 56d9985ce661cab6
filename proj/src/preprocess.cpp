#include "mrinv/preprocess.hpp"

#include <algorithm>
#include <stdexcept>

#include "mrinv/error.hpp"

namespace mrinv {

std::string to_string(InversionMode mode) {
  switch (mode) {
    case InversionMode::none: return "none";
    case InversionMode::invert: return "invert";
    case InversionMode::invert_bg: return "invert-bg";
  }
  return "unknown";
}

InversionMode parse_inversion_mode(std::string_view text) {
  if (text == "none") return InversionMode::none;
  if (text == "invert") return InversionMode::invert;
  if (text == "invert-bg") return InversionMode::invert_bg;
  throw ConfigError("unknown preprocessing mode '" + std::string(text) +
                    "' (expected none, invert or invert-bg)");
}

void PreprocessSpec::validate() const {
  if (!(clip_lo < clip_hi)) throw ConfigError("clip minimum must be below clip maximum");
  if (!(bg_percentile >= 0.0 && bg_percentile <= 100.0)) {
    throw ConfigError("background percentile must lie in [0, 100]");
  }
}

Volume3D clip(const Volume3D& v, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("clip requires lo < hi");
  const auto in = v.intensities();
  std::vector<double> out(in.size());
  std::transform(in.begin(), in.end(), out.begin(), [=](double x) { return std::clamp(x, lo, hi); });
  return v.with_intensities(std::move(out));
}

Volume3D invert(const Volume3D& v) {
  const double pivot = v.max() + v.min();
  const auto in = v.intensities();
  std::vector<double> out(in.size());
  std::transform(in.begin(), in.end(), out.begin(), [=](double x) { return pivot - x; });
  return v.with_intensities(std::move(out));
}

Volume3D invert_black_background(const Volume3D& v, double p) {
  const double threshold = percentile(v, p);
  const double pivot = v.max() + v.min();
  const auto in = v.intensities();
  std::vector<double> out(in.size());
  std::transform(in.begin(), in.end(), out.begin(),
                 [=](double x) { return x <= threshold ? 0.0 : pivot - x; });
  return v.with_intensities(std::move(out));
}

Volume3D preprocess_case(const Volume3D& v, const PreprocessSpec& spec) {
  spec.validate();
  Volume3D clipped = clip(v, spec.clip_lo, spec.clip_hi);
  switch (spec.mode) {
    case InversionMode::none: return clipped;
    case InversionMode::invert: return invert(clipped);
    case InversionMode::invert_bg: return invert_black_background(clipped, spec.bg_percentile);
  }
  return clipped;
}

}  // namespace mrinv
