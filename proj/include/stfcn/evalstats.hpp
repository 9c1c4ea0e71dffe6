#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stfcn/datapipe.hpp"
#include "stfcn/tensor.hpp"

namespace stfcn {

enum class Metric : std::size_t { rmse = 0, nrmse, mape, smape1, smape2 };
inline constexpr std::size_t kMetricCount = 5;
inline constexpr std::array<const char*, kMetricCount> kMetricNames{"rmse", "nrmse", "mape", "smape1", "smape2"};

/// Undefined values (zero denominators) are empty rather than zero.
using MetricValues = std::array<std::optional<double>, kMetricCount>;

/// RMSE, NRMSE, MAPE, sMAPE1 and sMAPE2 of one region's test series. `c` is
/// the denominator offset of MAPE and sMAPE1.
MetricValues region_metrics(std::span<const double> truth, std::span<const double> pred, double c = 1.0);

/// Training-demand share of each region, [rows, cols], summing to 1.
Tensord demand_weights(const DemandCube& cube, Index t_lo, Index t_hi);

enum class AggregateMode { plain, weighted };

struct AggregateValue {
  double value = 0.0;
  /// Weight mass of regions excluded because the metric is undefined there.
  double excluded_weight = 0.0;
  Index excluded_regions = 0;
};

/// Plain: mean over regions where the metric is defined. Weighted: sum of
/// weight * metric renormalized over the defined regions. Throws DataError
/// when no region defines the metric.
AggregateValue aggregate(std::span<const MetricValues> per_region, std::span<const double> weights, Metric metric,
                         AggregateMode mode);

// ---------------------------------------------------------------------------

/// Q(a, x) = Gamma(a, x) / Gamma(a).
double regularized_gamma_q(double a, double x);
/// Upper tail of the chi-square distribution.
double chi_square_survival(double statistic, double dof);

struct LjungBoxResult {
  double statistic = 0.0;
  double p_value = 1.0;
  Index lags = 0;
  /// Zero-variance input: statistic undefined, reported as Q = 0, p = 1.
  bool degenerate = false;
};

LjungBoxResult ljung_box(std::span<const double> series, Index lags);

enum class Group : std::uint8_t { g1, g2 };  // non-random, random

struct RegionClass {
  Group group = Group::g2;
  double p_value = 1.0;
  bool degenerate = false;
};

/// Row-major labels: p <= alpha goes to G1, everything else to G2.
std::vector<RegionClass> classify_regions(const DemandCube& cube, Index t_lo, Index t_hi, Index lags,
                                          double alpha = 0.05);

// ---------------------------------------------------------------------------

/// D(P || Q) in nats between two histograms given as counts over the same
/// bins, after adding `smoothing` to every bin.
double kl_divergence_histograms(std::span<const double> p, std::span<const double> q, double smoothing = 1e-9);
/// Histograms of truth and prediction over the union of their supports with
/// bins [k w, (k + 1) w).
double kl_divergence(std::span<const double> truth, std::span<const double> pred, double bin_width = 1.0,
                     double smoothing = 1e-9);

/// Histogram pair used by kl_divergence: first bin index and counts.
struct HistogramPair {
  long first_bin = 0;
  std::vector<double> truth;
  std::vector<double> pred;
};
HistogramPair histogram_pair(std::span<const double> truth, std::span<const double> pred, double bin_width = 1.0);

/// Points (cumulative share of regions, cumulative share of demand), from
/// (0, 0), regions sorted ascending.
std::vector<std::pair<double, double>> lorenz_curve(std::span<const double> totals);
double gini(std::span<const double> totals);
inline double gini(const Tensord& totals) { return gini(std::span<const double>(totals.ptr(), totals.size())); }

// ---------------------------------------------------------------------------

struct RegionEntry {
  Index row = 0;
  Index col = 0;
  double weight = 0.0;
  MetricValues metrics;
  double kl = 0.0;
  RegionClass label;
};

struct PartitionSummary {
  Group group = Group::g1;
  Index regions = 0;
  double demand_share = 0.0;
  std::optional<double> rmse;
  std::array<std::optional<double>, kMetricCount> weighted;
};

struct EvalOptions {
  double c = 1.0;
  Index lags = 20;
  double bin_width = 1.0;
  double smoothing = 1e-9;
};

struct EvalReport {
  Index rows = 0;
  Index cols = 0;
  Index steps = 0;
  std::vector<RegionEntry> regions;
  /// RMSE over every cell and step.
  double global_rmse = 0.0;
  std::array<AggregateValue, kMetricCount> plain;
  std::array<AggregateValue, kMetricCount> weighted;
  std::array<PartitionSummary, 2> partitions;
};

/**
 * Evaluates predictions `pred` ([rows, cols, steps], aligned with truth
 * intervals [test_begin, test_begin + steps)) against `truth`. Weights come
 * from [train_begin, train_end) and G1/G2 labels from the same window.
 */
EvalReport evaluate(const DemandCube& truth, const Tensord& pred, Index test_begin, Index train_begin, Index train_end,
                    const EvalOptions& options = {});

/// Region block, aggregate block, partition block; comma separated.
void write_report(std::ostream& out, const EvalReport& report);

}  // namespace stfcn
