#include "mrinv/evaluation.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

#include "mrinv/error.hpp"

namespace mrinv {
namespace {

DiceResult from_counts(std::uint64_t gt, std::uint64_t pred, std::uint64_t overlap) {
  DiceResult r;
  r.gt_voxels = gt;
  r.pred_voxels = pred;
  r.overlap_voxels = overlap;
  if (gt == 0 && pred == 0) {
    r.dsc = 1.0;
    r.status = DiceStatus::both_empty;
  } else if (gt == 0 || pred == 0) {
    r.dsc = 0.0;
    r.status = DiceStatus::one_empty;
  } else {
    r.dsc = 2.0 * static_cast<double>(overlap) / static_cast<double>(gt + pred);
    r.status = DiceStatus::ok;
  }
  return r;
}

void require_same_dims(const LabelVolume& a, const LabelVolume& b) {
  if (!(a.dims() == b.dims())) throw std::invalid_argument("prediction and ground truth dims differ");
}

std::optional<double> includable_value(const DiceResult& r, EmptyPolicy policy) {
  switch (r.status) {
    case DiceStatus::ok:
    case DiceStatus::one_empty: return r.dsc;
    case DiceStatus::both_empty:
      if (policy == EmptyPolicy::include_as_one) return 1.0;
      return std::nullopt;
    case DiceStatus::no_gt:
    case DiceStatus::failed: return std::nullopt;
  }
  return std::nullopt;
}

double mean_of(std::span<const double> values) {
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

}  // namespace

std::string to_string(DiceStatus status) {
  switch (status) {
    case DiceStatus::ok: return "ok";
    case DiceStatus::both_empty: return "both-empty";
    case DiceStatus::one_empty: return "one-empty";
    case DiceStatus::no_gt: return "no-gt";
    case DiceStatus::failed: return "failed";
  }
  return "unknown";
}

DiceStatus parse_dice_status(std::string_view text) {
  for (auto s : {DiceStatus::ok, DiceStatus::both_empty, DiceStatus::one_empty, DiceStatus::no_gt,
                 DiceStatus::failed}) {
    if (to_string(s) == text) return s;
  }
  throw Error("unknown dice status '" + std::string(text) + "'");
}

DiceResult dice(const LabelVolume& pred, const LabelVolume& gt, LabelId label) {
  require_same_dims(pred, gt);
  const auto p = pred.labels();
  const auto g = gt.labels();
  std::uint64_t np = 0, ng = 0, both = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool in_p = p[i] == label;
    const bool in_g = g[i] == label;
    np += in_p;
    ng += in_g;
    both += in_p && in_g;
  }
  DiceResult r = from_counts(ng, np, both);
  if (auto it = gt.class_map().find(label); it != gt.class_map().end()) {
    r.class_name = it->second;
  } else if (auto it2 = pred.class_map().find(label); it2 != pred.class_map().end()) {
    r.class_name = it2->second;
  }
  return r;
}

DiceResult dice(const LabelVolume& pred, const LabelVolume& gt, const std::string& class_name) {
  const std::string names[] = {class_name};
  return evaluate_classes(pred, gt, names).front();
}

std::vector<DiceResult> evaluate_classes(const LabelVolume& pred, const LabelVolume& gt,
                                         std::span<const std::string> class_names,
                                         const std::string& case_id) {
  require_same_dims(pred, gt);

  // Map each volume's label ids to a slot in class_names; slot 0 means "not evaluated".
  auto slots_for = [&](const ClassMap& map) {
    std::unordered_map<LabelId, std::size_t> slot;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      if (auto id = find_label(map, class_names[c])) slot.emplace(*id, c + 1);
    }
    return slot;
  };
  const auto pred_slot = slots_for(pred.class_map());
  const auto gt_slot = slots_for(gt.class_map());

  const std::size_t k = class_names.size() + 1;
  std::vector<std::uint64_t> n_pred(k, 0), n_gt(k, 0), n_both(k, 0);
  const auto p = pred.labels();
  const auto g = gt.labels();
  LabelId last_p = 0, last_g = 0;
  std::size_t sp = 0, sg = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] != last_p) {
      last_p = p[i];
      auto it = pred_slot.find(last_p);
      sp = it == pred_slot.end() ? 0 : it->second;
    }
    if (g[i] != last_g) {
      last_g = g[i];
      auto it = gt_slot.find(last_g);
      sg = it == gt_slot.end() ? 0 : it->second;
    }
    ++n_pred[sp];
    ++n_gt[sg];
    if (sp == sg) ++n_both[sp];
  }

  std::vector<DiceResult> out;
  out.reserve(class_names.size());
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    DiceResult r = from_counts(n_gt[c + 1], n_pred[c + 1], n_both[c + 1]);
    r.case_id = case_id;
    r.class_name = class_names[c];
    out.push_back(std::move(r));
  }
  return out;
}

std::string to_string(EmptyPolicy p) {
  return p == EmptyPolicy::exclude ? "exclude" : "include-as-one";
}
std::string to_string(CiMethod m) {
  return m == CiMethod::bootstrap_percentile ? "bootstrap-percentile" : "student-t";
}
std::string to_string(Aggregation a) { return a == Aggregation::by_class ? "by-class" : "pooled"; }

EmptyPolicy parse_empty_policy(std::string_view text) {
  if (text == "exclude") return EmptyPolicy::exclude;
  if (text == "include-as-one") return EmptyPolicy::include_as_one;
  throw ConfigError("unknown empty-mask policy '" + std::string(text) + "'");
}
CiMethod parse_ci_method(std::string_view text) {
  if (text == "bootstrap-percentile" || text == "bootstrap") return CiMethod::bootstrap_percentile;
  if (text == "student-t") return CiMethod::student_t;
  throw ConfigError("unknown CI method '" + std::string(text) + "'");
}
Aggregation parse_aggregation(std::string_view text) {
  if (text == "by-class") return Aggregation::by_class;
  if (text == "pooled") return Aggregation::pooled;
  throw ConfigError("unknown aggregation '" + std::string(text) + "'");
}

std::optional<double> per_class_mean(std::span<const DiceResult> results, const std::string& class_name,
                                     EmptyPolicy policy) {
  std::vector<const DiceResult*> picked;
  for (const auto& r : results) {
    if (r.class_name == class_name) picked.push_back(&r);
  }
  std::sort(picked.begin(), picked.end(),
            [](const DiceResult* a, const DiceResult* b) { return a->case_id < b->case_id; });
  double sum = 0.0;
  std::size_t n = 0;
  for (const DiceResult* r : picked) {
    if (auto v = includable_value(*r, policy)) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

SummaryStats confidence_interval_95(std::span<const double> values, CiMethod method, std::uint64_t seed,
                                    std::size_t resamples) {
  if (values.empty()) throw std::invalid_argument("confidence interval of an empty sample");
  SummaryStats s;
  s.n = values.size();
  s.method = method;
  s.seed = method == CiMethod::bootstrap_percentile ? seed : 0;
  s.mean = mean_of(values);
  // A constant sample (including n = 1) has a degenerate interval. Return the value itself
  // rather than a summed mean that can be off by an ulp.
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) {
    s.mean = s.ci_lo = s.ci_hi = values[0];
    return s;
  }

  if (method == CiMethod::student_t) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    const boost::math::students_t dist(static_cast<double>(s.n - 1));
    const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
    const double half = t * sd / std::sqrt(static_cast<double>(s.n));
    s.ci_lo = s.mean - half;
    s.ci_hi = s.mean + half;
  } else {
    if (resamples == 0) throw std::invalid_argument("bootstrap needs at least one resample");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, s.n - 1);
    std::vector<double> means(resamples);
    for (double& m : means) {
      double sum = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) sum += values[pick(rng)];
      m = sum / static_cast<double>(s.n);
    }
    s.ci_lo = percentile(means, 2.5);
    s.ci_hi = percentile(means, 97.5);
  }
  // Summation order differs between the sample mean and the resampled means, which can
  // leave an endpoint an ulp on the wrong side of the mean.
  s.ci_lo = std::min(s.ci_lo, s.mean);
  s.ci_hi = std::max(s.ci_hi, s.mean);
  return s;
}

VariantSummary summarize_variant(std::span<const DiceResult> results, std::span<const std::string> class_list,
                                 const SummaryOptions& options) {
  if (class_list.empty()) throw Error("class list is empty");

  std::vector<DiceResult> sorted(results.begin(), results.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const DiceResult& a, const DiceResult& b) {
    return std::tie(a.case_id, a.class_name) < std::tie(b.case_id, b.class_name);
  });

  VariantSummary out;
  std::vector<double> class_means;
  for (const auto& name : class_list) {
    ClassSummary cs;
    cs.class_name = name;
    for (const auto& r : sorted) {
      if (r.class_name == name && includable_value(r, options.empty_policy)) ++cs.cases;
    }
    cs.mean = per_class_mean(sorted, name, options.empty_policy);
    if (cs.mean) {
      class_means.push_back(*cs.mean);
    } else {
      out.warnings.push_back("class '" + name + "' is absent (no includable results); dropped");
    }
    out.classes.push_back(std::move(cs));
  }
  if (class_means.empty()) throw Error("every class is absent; nothing to summarize");

  if (options.aggregation == Aggregation::by_class) {
    out.overall = confidence_interval_95(class_means, options.method, options.seed, options.resamples);
  } else {
    std::vector<double> pooled;
    for (const auto& name : class_list) {
      for (const auto& r : sorted) {
        if (r.class_name != name) continue;
        if (auto v = includable_value(r, options.empty_policy)) pooled.push_back(*v);
      }
    }
    out.overall = confidence_interval_95(pooled, options.method, options.seed, options.resamples);
  }
  return out;
}

}  // namespace mrinv
