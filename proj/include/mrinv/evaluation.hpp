#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mrinv/volume.hpp"

namespace mrinv {

enum class DiceStatus {
  ok,
  both_empty,  // neither mask has the class; dsc = 1
  one_empty,   // exactly one mask has the class; dsc = 0
  no_gt,       // case has no ground truth
  failed,      // case x variant unit failed before evaluation
};

std::string to_string(DiceStatus status);
DiceStatus parse_dice_status(std::string_view text);

struct DiceResult {
  std::string case_id;
  std::string class_name;
  std::optional<double> dsc;  // empty for no_gt and failed
  DiceStatus status = DiceStatus::ok;
  std::uint64_t gt_voxels = 0;
  std::uint64_t pred_voxels = 0;
  std::uint64_t overlap_voxels = 0;
};

/// Dice for one label id shared by both volumes. Throws std::invalid_argument on a dims mismatch.
DiceResult dice(const LabelVolume& pred, const LabelVolume& gt, LabelId label);

/// Dice for a class looked up by name in each volume's own class map. A class missing
/// from a map counts as an empty mask in that volume.
DiceResult dice(const LabelVolume& pred, const LabelVolume& gt, const std::string& class_name);

/// Dice for every class in one pass over the voxels, in the order given.
std::vector<DiceResult> evaluate_classes(const LabelVolume& pred, const LabelVolume& gt,
                                         std::span<const std::string> class_names,
                                         const std::string& case_id = {});

enum class EmptyPolicy { exclude, include_as_one };
enum class CiMethod { bootstrap_percentile, student_t };
enum class Aggregation { by_class, pooled };

std::string to_string(EmptyPolicy p);
std::string to_string(CiMethod m);
std::string to_string(Aggregation a);
EmptyPolicy parse_empty_policy(std::string_view text);
CiMethod parse_ci_method(std::string_view text);
Aggregation parse_aggregation(std::string_view text);

/// Mean Dice of one class over cases. both_empty results are skipped under
/// EmptyPolicy::exclude and count as 1 otherwise; one_empty counts as 0; no_gt and
/// failed never count. Returns nullopt when nothing is includable (class absent).
std::optional<double> per_class_mean(std::span<const DiceResult> results, const std::string& class_name,
                                     EmptyPolicy policy = EmptyPolicy::exclude);

struct SummaryStats {
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n = 0;
  CiMethod method = CiMethod::bootstrap_percentile;
  std::uint64_t seed = 0;  // meaningful for the bootstrap only

  bool operator==(const SummaryStats&) const = default;
};

inline constexpr std::uint64_t kDefaultSeed = 42;
inline constexpr std::size_t kDefaultResamples = 10'000;

/// Mean with a 95% confidence interval.
///
/// bootstrap_percentile draws `resamples` resamples of size n with replacement from a
/// generator seeded with `seed` and reports the 2.5th and 97.5th linear-interpolation
/// percentiles of the resampled means. student_t reports mean +/- t(0.975, n-1) s / sqrt(n).
/// A single value yields the degenerate interval (v, v). Throws std::invalid_argument on
/// empty input.
SummaryStats confidence_interval_95(std::span<const double> values,
                                    CiMethod method = CiMethod::bootstrap_percentile,
                                    std::uint64_t seed = kDefaultSeed,
                                    std::size_t resamples = kDefaultResamples);

struct SummaryOptions {
  EmptyPolicy empty_policy = EmptyPolicy::exclude;
  CiMethod method = CiMethod::bootstrap_percentile;
  Aggregation aggregation = Aggregation::by_class;
  std::uint64_t seed = kDefaultSeed;
  std::size_t resamples = kDefaultResamples;
};

struct ClassSummary {
  std::string class_name;
  std::optional<double> mean;  // nullopt: absent
  std::size_t cases = 0;       // includable results behind the mean
};

struct VariantSummary {
  SummaryStats overall;
  std::vector<ClassSummary> classes;  // in class_list order
  std::vector<std::string> warnings;
};

/// Per-class means first, then mean and CI over the class means (by_class), or mean and
/// CI over every includable case x class value (pooled). Absent classes are dropped with
/// a warning. Throws Error when class_list is empty or every class is absent.
VariantSummary summarize_variant(std::span<const DiceResult> results,
                                 std::span<const std::string> class_list,
                                 const SummaryOptions& options = {});

}  // namespace mrinv
