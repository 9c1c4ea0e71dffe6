#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stfcn/tensor.hpp"

namespace stfcn {

struct TripRecord {
  std::int64_t timestamp = 0;  // epoch seconds, UTC
  double longitude = 0.0;
  double latitude = 0.0;
};

/// Rectangular lon/lat box split into rows (latitude bands, row 0 at
/// lat_min) by cols (longitude bands, col 0 at lon_min), and a time axis of
/// `intervals` steps of `dt` seconds starting at t0. All cells are half-open.
struct GridSpec {
  double lon_min = 0.0;
  double lon_max = 1.0;
  double lat_min = 0.0;
  double lat_max = 1.0;
  Index rows = 16;
  Index cols = 16;
  std::int64_t t0 = 0;
  std::int64_t dt = 600;
  Index intervals = 1;

  void validate() const;
  /// Cell of a coordinate, or nullopt outside the box.
  std::optional<std::pair<Index, Index>> cell_of(double longitude, double latitude) const;
  std::optional<Index> interval_of(std::int64_t timestamp) const;
};

/// Request counts, [rows, cols, intervals].
struct DemandCube {
  GridSpec grid;
  Tensord counts;

  DemandCube() = default;
  explicit DemandCube(const GridSpec& g) : grid(g), counts({g.rows, g.cols, g.intervals}) {}

  Index rows() const { return grid.rows; }
  Index cols() const { return grid.cols; }
  Index intervals() const { return grid.intervals; }

  /// City-wide demand per interval.
  std::vector<double> total_series() const;
  std::vector<double> region_series(Index i, Index j, Index t_lo, Index t_hi) const;
  /// Demand matrix at interval t, [rows, cols].
  Tensord slice(Index t) const;
  /// Per-region totals over [t_lo, t_hi), [rows, cols].
  Tensord region_totals(Index t_lo, Index t_hi) const;
};

// ---------------------------------------------------------------------------
// Ingestion

struct IngestDiagnostic {
  std::size_t line = 0;
  std::string message;
};

struct IngestResult {
  DemandCube cube;
  std::size_t accepted = 0;
  std::size_t out_of_range = 0;
  std::vector<IngestDiagnostic> rejected;
};

IngestResult ingest(std::span<const TripRecord> records, const GridSpec& grid);

/// Parses `timestamp,longitude,latitude` lines. The timestamp flavour
/// (integer epoch seconds or ISO-8601) is detected from the first record and
/// applies to the whole file. An optional header line is accepted. Bad
/// records become per-line diagnostics; a malformed header is a FormatError.
IngestResult ingest(std::istream& trips, const GridSpec& grid);

/// "YYYY-MM-DDTHH:MM:SS" with optional fractional seconds, 'Z' or +HH:MM
/// offset; a space may replace the 'T'.
std::optional<std::int64_t> parse_iso8601(std::string_view text);

// ---------------------------------------------------------------------------
// Cube files: header `I J T t0 dt lon_min lon_max lat_min lat_max`, then T
// blocks of I lines with J values each.

void write_cube(std::ostream& out, const DemandCube& cube);
DemandCube read_cube(std::istream& in);
void write_cube_file(const std::string& path, const DemandCube& cube);
DemandCube read_cube_file(const std::string& path);

// ---------------------------------------------------------------------------
// Additive decomposition

struct Decomposition {
  Index period = 0;
  /// Fitted range [begin, end): where the centred moving average is defined.
  Index begin = 0;
  Index end = 0;
  std::vector<double> trend;     // end - begin values
  std::vector<double> periodic;  // one value per phase t mod period, mean 0
  std::vector<double> residual;  // end - begin values
  /// Sum of squared residuals over (fitted length - period); infinite when
  /// the fitted range holds no more than one cycle.
  double residual_variance = 0.0;

  double periodic_at(Index t) const { return periodic[static_cast<std::size_t>(t % period)]; }
};

/// Trend is the centred moving average of width `period` (half-weight end
/// points for even widths); requires series.size() >= 2 * period.
Decomposition decompose(std::span<const double> series, Index period);

struct PeriodScore {
  Index period = 0;
  double residual_variance = 0.0;
};

/// Candidate with the smallest residual variance. Scores within
/// `relative_tie` of the best count as ties and the smallest period wins.
Index select_period(std::span<const double> series, std::span<const Index> candidates, double relative_tie = 0.05,
                    std::vector<PeriodScore>* scores = nullptr);

// ---------------------------------------------------------------------------
// 3D volume samples

struct SampleWindow {
  Index recent = 10;
  Index period_window = 10;
  Index period_length = 1008;

  Index depth() const { return recent + period_window; }
  /// Earliest target index whose inputs are all inside the cube.
  Index first_target() const;
};

struct VolumeSample {
  Index t = 0;
  Tensord input;   // [rows, cols, recent + period_window]
  Tensord target;  // [rows, cols]
};

struct SampleSet {
  std::vector<VolumeSample> samples;
  Index skipped = 0;
};

/// Input depth order: X_{t-1} .. X_{t-recent}, then X_{t-L-1} .. X_{t-L-period_window}.
VolumeSample make_sample(const Tensord& counts, const SampleWindow& window, Index t);
SampleSet make_samples(const Tensord& counts, const SampleWindow& window, Index t_lo, Index t_hi);
inline SampleSet make_samples(const DemandCube& cube, const SampleWindow& window, Index t_lo, Index t_hi) {
  return make_samples(cube.counts, window, t_lo, t_hi);
}

// ---------------------------------------------------------------------------
// Seasonal + first differencing

/**
 * y_t = (x_t - x_{t-L}) - (x_{t-1} - x_{t-1-L}), defined for t >= L + 1;
 * earlier entries of `diff` are zero. Keeps the original counts so
 * predictions on the differenced scale can be mapped back.
 */
class DifferenceTransform {
 public:
  DifferenceTransform(const Tensord& counts, Index period);

  Index period() const { return period_; }
  Index valid_from() const { return period_ + 1; }
  const Tensord& diff() const { return diff_; }
  const Tensord& history() const { return history_; }

  /// x_t from a differenced value and the stored history before t.
  double invert(Index i, Index j, Index t, double y) const;
  /// Whole [rows, cols] matrix at interval t.
  Tensord invert(Index t, const Tensord& y) const;
  /// Rebuilds a full series from `diff` using only the first L + 1 stored
  /// intervals, recursively.
  Tensord integrate(const Tensord& diff) const;

 private:
  Index period_;
  Tensord history_;
  Tensord diff_;
};

// ---------------------------------------------------------------------------

struct SplitRanges {
  Index train_begin = 0;
  Index train_end = 0;
  Index test_begin = 0;
  Index test_end = 0;
};

/// Leading `train_days` for training, the following `test_days` for testing.
SplitRanges split(const GridSpec& grid, Index train_days, Index test_days);

// ---------------------------------------------------------------------------
// Synthetic demand

/**
 * Region rates lambda_ij(t) = (base_ij + amp_ij * s((t + shift_ij) mod L)) *
 * week(t) + trend * t with a demand hot spot (strongly unequal bases),
 * region-specific daily phase and amplitude, and a fraction of low-rate
 * regions that carry no seasonality (white noise). Counts are Poisson.
 */
struct SynthConfig {
  Index rows = 8;
  Index cols = 8;
  Index days = 14;
  std::int64_t dt = 600;
  Index period = 144;
  double peak_rate = 20.0;
  double noise_fraction = 0.5;
  double weekly_amplitude = 0.0;
  double trend = 0.0;
  std::uint64_t seed = 7;
  std::int64_t t0 = 1477958400;  // 2016-11-01T00:00:00Z
  double lon_min = 103.85;
  double lon_max = 104.30;
  double lat_min = 30.48;
  double lat_max = 30.87;
};

DemandCube synthesize(const SynthConfig& config);

}  // namespace stfcn
