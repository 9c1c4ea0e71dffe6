#include "stfcn/datapipe.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "stfcn/random.hpp"

namespace stfcn {

// ---------------------------------------------------------------------------
// GridSpec / DemandCube

void GridSpec::validate() const {
  if (!(std::isfinite(lon_min) && std::isfinite(lon_max) && lon_min < lon_max))
    throw ConfigError("grid: need lon_min < lon_max");
  if (!(std::isfinite(lat_min) && std::isfinite(lat_max) && lat_min < lat_max))
    throw ConfigError("grid: need lat_min < lat_max");
  if (rows < 1 || cols < 1 || intervals < 1) throw ConfigError("grid: rows, cols and intervals must be >= 1");
  if (dt <= 0) throw ConfigError("grid: dt must be > 0");
}

namespace {

std::optional<Index> band(double v, double lo, double hi, Index n) {
  if (!(v >= lo && v < hi)) return std::nullopt;
  const auto k = static_cast<Index>(std::floor((v - lo) * static_cast<double>(n) / (hi - lo)));
  return std::clamp<Index>(k, 0, n - 1);
}

}  // namespace

std::optional<std::pair<Index, Index>> GridSpec::cell_of(double longitude, double latitude) const {
  const auto i = band(latitude, lat_min, lat_max, rows);
  const auto j = band(longitude, lon_min, lon_max, cols);
  if (!i || !j) return std::nullopt;
  return std::pair{*i, *j};
}

std::optional<Index> GridSpec::interval_of(std::int64_t timestamp) const {
  if (timestamp < t0) return std::nullopt;
  const std::int64_t k = (timestamp - t0) / dt;
  if (k >= intervals) return std::nullopt;
  return static_cast<Index>(k);
}

std::vector<double> DemandCube::total_series() const {
  std::vector<double> total(static_cast<std::size_t>(intervals()), 0.0);
  for (Index i = 0; i < rows(); ++i)
    for (Index j = 0; j < cols(); ++j)
      for (Index t = 0; t < intervals(); ++t) total[static_cast<std::size_t>(t)] += counts(i, j, t);
  return total;
}

std::vector<double> DemandCube::region_series(Index i, Index j, Index t_lo, Index t_hi) const {
  if (t_lo < 0 || t_hi > intervals() || t_lo > t_hi) throw RangeError("region_series: bad time range");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(t_hi - t_lo));
  for (Index t = t_lo; t < t_hi; ++t) out.push_back(counts(i, j, t));
  return out;
}

Tensord DemandCube::slice(Index t) const {
  if (t < 0 || t >= intervals()) throw RangeError("slice: interval out of range");
  Tensord out({rows(), cols()});
  for (Index i = 0; i < rows(); ++i)
    for (Index j = 0; j < cols(); ++j) out(i, j) = counts(i, j, t);
  return out;
}

Tensord DemandCube::region_totals(Index t_lo, Index t_hi) const {
  if (t_lo < 0 || t_hi > intervals() || t_lo >= t_hi) throw RangeError("region_totals: bad time range");
  Tensord out({rows(), cols()});
  for (Index i = 0; i < rows(); ++i)
    for (Index j = 0; j < cols(); ++j)
      for (Index t = t_lo; t < t_hi; ++t) out(i, j) += counts(i, j, t);
  return out;
}

// ---------------------------------------------------------------------------
// Ingestion

IngestResult ingest(std::span<const TripRecord> records, const GridSpec& grid) {
  grid.validate();
  IngestResult result;
  result.cube = DemandCube(grid);
  for (const TripRecord& r : records) {
    const auto cell = grid.cell_of(r.longitude, r.latitude);
    const auto t = grid.interval_of(r.timestamp);
    if (!cell || !t) {
      ++result.out_of_range;
      continue;
    }
    result.cube.counts(cell->first, cell->second, *t) += 1.0;
    ++result.accepted;
  }
  return result;
}

namespace {

std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool parse_fixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  const char* first = s.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, out);
  return ec == std::errc() && ptr == first + len;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<std::int64_t> parse_epoch(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool looks_numeric(std::string_view s) {
  return !s.empty() && (std::isdigit(static_cast<unsigned char>(s.front())) || s.front() == '-' || s.front() == '+');
}

}  // namespace

std::optional<std::int64_t> parse_iso8601(std::string_view s) {
  int year, month, day, hour, minute, second;
  if (s.size() < 19) return std::nullopt;
  if (!parse_fixed(s, 0, 4, year) || s[4] != '-' || !parse_fixed(s, 5, 2, month) || s[7] != '-' ||
      !parse_fixed(s, 8, 2, day) || (s[10] != 'T' && s[10] != ' ') || !parse_fixed(s, 11, 2, hour) ||
      s[13] != ':' || !parse_fixed(s, 14, 2, minute) || s[16] != ':' || !parse_fixed(s, 17, 2, second))
    return std::nullopt;
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) return std::nullopt;
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t digits = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == digits) return std::nullopt;
  }
  std::int64_t offset = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      pos = s.size();
    } else if ((s[pos] == '+' || s[pos] == '-') && s.size() == pos + 6 && s[pos + 3] == ':') {
      int oh, om;
      if (!parse_fixed(s, pos + 1, 2, oh) || !parse_fixed(s, pos + 4, 2, om)) return std::nullopt;
      offset = (s[pos] == '+' ? 1 : -1) * (oh * 3600 + om * 60);
      pos = s.size();
    } else {
      return std::nullopt;
    }
  }
  const std::int64_t days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
  return days * 86400 + hour * 3600 + minute * 60 + second - offset;
}

IngestResult ingest(std::istream& in, const GridSpec& grid) {
  grid.validate();
  IngestResult result;
  result.cube = DemandCube(grid);
  enum class Stamp { unknown, epoch, iso } stamp = Stamp::unknown;
  std::string line;
  std::size_t line_no = 0;
  bool seen_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view);
    if (!seen_content) {
      seen_content = true;
      if (!looks_numeric(fields[0])) {
        if (fields.size() != 3) throw FormatError("trip file: malformed header on line " + std::to_string(line_no));
        continue;
      }
    }
    auto reject = [&](std::string msg) { result.rejected.push_back({line_no, std::move(msg)}); };
    if (fields.size() != 3) {
      reject("expected 3 fields, found " + std::to_string(fields.size()));
      continue;
    }
    if (stamp == Stamp::unknown) stamp = parse_epoch(fields[0]) ? Stamp::epoch : Stamp::iso;
    const auto ts = stamp == Stamp::epoch ? parse_epoch(fields[0]) : parse_iso8601(fields[0]);
    if (!ts) {
      reject(std::string("bad timestamp '") + std::string(fields[0]) + "'");
      continue;
    }
    const auto lon = parse_double(fields[1]);
    const auto lat = parse_double(fields[2]);
    if (!lon || !lat) {
      reject("bad coordinate");
      continue;
    }
    const auto cell = grid.cell_of(*lon, *lat);
    const auto t = grid.interval_of(*ts);
    if (!cell || !t) {
      ++result.out_of_range;
      continue;
    }
    result.cube.counts(cell->first, cell->second, *t) += 1.0;
    ++result.accepted;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Cube files

namespace {

void put_number(std::ostream& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, ptr - buf);
}

}  // namespace

void write_cube(std::ostream& out, const DemandCube& cube) {
  const GridSpec& g = cube.grid;
  out << g.rows << ' ' << g.cols << ' ' << g.intervals << ' ' << g.t0 << ' ' << g.dt << ' ';
  put_number(out, g.lon_min);
  out << ' ';
  put_number(out, g.lon_max);
  out << ' ';
  put_number(out, g.lat_min);
  out << ' ';
  put_number(out, g.lat_max);
  out << '\n';
  for (Index t = 0; t < g.intervals; ++t)
    for (Index i = 0; i < g.rows; ++i) {
      for (Index j = 0; j < g.cols; ++j) {
        if (j) out << ' ';
        put_number(out, cube.counts(i, j, t));
      }
      out << '\n';
    }
}

DemandCube read_cube(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string_view {
    if (!std::getline(in, line)) throw FormatError("cube file: unexpected end of file after line " + std::to_string(line_no));
    ++line_no;
    return trim(line);
  };
  auto tokens = [](std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t p = 0;
    while (p < s.size()) {
      while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
      const std::size_t q = p;
      while (p < s.size() && !std::isspace(static_cast<unsigned char>(s[p]))) ++p;
      if (p > q) out.push_back(s.substr(q, p - q));
    }
    return out;
  };
  const auto head = tokens(next_line());
  if (head.size() != 9) throw FormatError("cube file: header must have 9 fields (line 1)");
  GridSpec g;
  auto int_field = [&](std::size_t k) {
    const auto v = parse_epoch(head[k]);
    if (!v) throw FormatError("cube file: bad header field " + std::to_string(k + 1));
    return *v;
  };
  auto real_field = [&](std::size_t k) {
    const auto v = parse_double(head[k]);
    if (!v) throw FormatError("cube file: bad header field " + std::to_string(k + 1));
    return *v;
  };
  g.rows = int_field(0);
  g.cols = int_field(1);
  g.intervals = int_field(2);
  g.t0 = int_field(3);
  g.dt = int_field(4);
  g.lon_min = real_field(5);
  g.lon_max = real_field(6);
  g.lat_min = real_field(7);
  g.lat_max = real_field(8);
  try {
    g.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("cube file: ") + e.what());
  }
  DemandCube cube(g);
  for (Index t = 0; t < g.intervals; ++t)
    for (Index i = 0; i < g.rows; ++i) {
      const auto vals = tokens(next_line());
      if (static_cast<Index>(vals.size()) != g.cols)
        throw FormatError("cube file: line " + std::to_string(line_no) + " has " + std::to_string(vals.size()) +
                          " values, expected " + std::to_string(g.cols));
      for (Index j = 0; j < g.cols; ++j) {
        const auto v = parse_double(vals[static_cast<std::size_t>(j)]);
        if (!v) throw FormatError("cube file: bad value on line " + std::to_string(line_no));
        cube.counts(i, j, t) = *v;
      }
    }
  return cube;
}

void write_cube_file(const std::string& path, const DemandCube& cube) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_cube(out, cube);
  if (!out) throw DataError("write to '" + path + "' failed");
}

DemandCube read_cube_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return read_cube(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Decomposition

Decomposition decompose(std::span<const double> x, Index period) {
  if (period < 2) throw ConfigError("decompose: period must be >= 2");
  const auto n = static_cast<Index>(x.size());
  if (n < 2 * period)
    throw RangeError("decompose: series of length " + std::to_string(n) + " is shorter than twice the period " +
                     std::to_string(period));
  Decomposition d;
  d.period = period;
  const bool even = period % 2 == 0;
  const Index half = even ? period / 2 : (period - 1) / 2;
  d.begin = half;
  d.end = n - half;
  const auto L = static_cast<double>(period);
  d.trend.reserve(static_cast<std::size_t>(d.end - d.begin));
  for (Index t = d.begin; t < d.end; ++t) {
    double acc = 0.0;
    if (even) {
      acc = 0.5 * x[t - half] + 0.5 * x[t + half];
      for (Index k = t - half + 1; k < t + half; ++k) acc += x[k];
    } else {
      for (Index k = t - half; k <= t + half; ++k) acc += x[k];
    }
    d.trend.push_back(acc / L);
  }

  std::vector<double> phase_sum(static_cast<std::size_t>(period), 0.0);
  std::vector<Index> phase_count(static_cast<std::size_t>(period), 0);
  for (Index t = d.begin; t < d.end; ++t) {
    const auto p = static_cast<std::size_t>(t % period);
    phase_sum[p] += x[t] - d.trend[static_cast<std::size_t>(t - d.begin)];
    ++phase_count[p];
  }
  d.periodic.resize(static_cast<std::size_t>(period));
  double centre = 0.0;
  for (std::size_t p = 0; p < d.periodic.size(); ++p) {
    d.periodic[p] = phase_sum[p] / static_cast<double>(phase_count[p]);
    centre += d.periodic[p];
  }
  centre /= L;
  for (double& v : d.periodic) v -= centre;

  d.residual.reserve(d.trend.size());
  double mean = 0.0;
  for (Index t = d.begin; t < d.end; ++t) {
    const double r = x[t] - d.trend[static_cast<std::size_t>(t - d.begin)] - d.periodic_at(t);
    d.residual.push_back(r);
    mean += r;
  }
  const auto m = static_cast<Index>(d.residual.size());
  mean /= static_cast<double>(m);
  double ss = 0.0;
  for (double r : d.residual) ss += (r - mean) * (r - mean);
  // One degree of freedom per estimated phase mean. With a single cycle in
  // the fitted range the residual is identically zero and says nothing.
  d.residual_variance = m > period ? ss / static_cast<double>(m - period) : std::numeric_limits<double>::infinity();
  return d;
}

Index select_period(std::span<const double> series, std::span<const Index> candidates, double relative_tie,
                    std::vector<PeriodScore>* scores) {
  if (candidates.empty()) throw ConfigError("select_period: no candidate periods");
  std::vector<PeriodScore> local;
  for (Index L : candidates) local.push_back({L, decompose(series, L).residual_variance});
  double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(series.size());
  double var = 0.0;
  for (double v : series) var += (v - mean) * (v - mean);
  var /= static_cast<double>(series.size());
  double best = local.front().residual_variance;
  for (const auto& s : local) best = std::min(best, s.residual_variance);
  if (!std::isfinite(best)) throw RangeError("select_period: no candidate leaves residual degrees of freedom");
  const double bound = best * (1.0 + relative_tie) + 1e-10 * var;
  Index chosen = -1;
  for (const auto& s : local)
    if (s.residual_variance <= bound && (chosen < 0 || s.period < chosen)) chosen = s.period;
  if (scores) *scores = std::move(local);
  return chosen;
}

// ---------------------------------------------------------------------------
// Samples

Index SampleWindow::first_target() const { return std::max(period_length + period_window, recent); }

VolumeSample make_sample(const Tensord& counts, const SampleWindow& w, Index t) {
  if (counts.rank() != 3) throw ShapeError("make_sample: counts must be [rows, cols, intervals]");
  if (w.recent < 1 || w.period_window < 1) throw ConfigError("make_sample: recent and period windows must be >= 1");
  if (w.period_length < 0) throw ConfigError("make_sample: period length must be >= 0");
  const Index rows = counts.dim(0), cols = counts.dim(1), T = counts.dim(2);
  if (t < w.first_target() || t >= T) throw RangeError("make_sample: target index " + std::to_string(t) + " out of range");
  VolumeSample s{t, Tensord({rows, cols, w.depth()}), Tensord({rows, cols})};
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      for (Index k = 0; k < w.recent; ++k) s.input(i, j, k) = counts(i, j, t - 1 - k);
      for (Index k = 0; k < w.period_window; ++k)
        s.input(i, j, w.recent + k) = counts(i, j, t - w.period_length - 1 - k);
      s.target(i, j) = counts(i, j, t);
    }
  return s;
}

SampleSet make_samples(const Tensord& counts, const SampleWindow& w, Index t_lo, Index t_hi) {
  if (w.recent < 1 || w.period_window < 1) throw ConfigError("make_samples: recent and period windows must be >= 1");
  if (counts.rank() != 3) throw ShapeError("make_samples: counts must be [rows, cols, intervals]");
  if (t_lo < 0 || t_hi > counts.dim(2) || t_lo > t_hi) throw RangeError("make_samples: bad target range");
  SampleSet set;
  const Index first = std::max(t_lo, w.first_target());
  set.skipped = std::min(first, t_hi) - t_lo;
  for (Index t = first; t < t_hi; ++t) set.samples.push_back(make_sample(counts, w, t));
  return set;
}

// ---------------------------------------------------------------------------
// Differencing

DifferenceTransform::DifferenceTransform(const Tensord& counts, Index period)
    : period_(period), history_(counts), diff_(counts.shape()) {
  if (counts.rank() != 3) throw ShapeError("difference_transform: counts must be [rows, cols, intervals]");
  if (period < 1) throw ConfigError("difference_transform: period must be >= 1");
  const Index T = counts.dim(2);
  if (T <= period + 1) throw RangeError("difference_transform: need more than L + 1 intervals of history");
  for (Index i = 0; i < counts.dim(0); ++i)
    for (Index j = 0; j < counts.dim(1); ++j)
      for (Index t = period + 1; t < T; ++t)
        diff_(i, j, t) = (counts(i, j, t) - counts(i, j, t - period)) -
                         (counts(i, j, t - 1) - counts(i, j, t - 1 - period));
}

double DifferenceTransform::invert(Index i, Index j, Index t, double y) const {
  if (t < valid_from() || t > history_.dim(2))
    throw RangeError("difference invert: interval " + std::to_string(t) + " lacks history");
  return y + history_(i, j, t - period_) + history_(i, j, t - 1) - history_(i, j, t - 1 - period_);
}

Tensord DifferenceTransform::invert(Index t, const Tensord& y) const {
  require_same_shape(y.shape(), Shape{history_.dim(0), history_.dim(1)}, "difference invert");
  Tensord out(y.shape());
  for (Index i = 0; i < y.dim(0); ++i)
    for (Index j = 0; j < y.dim(1); ++j) out(i, j) = invert(i, j, t, y(i, j));
  return out;
}

Tensord DifferenceTransform::integrate(const Tensord& diff) const {
  require_same_shape(diff.shape(), history_.shape(), "difference integrate");
  Tensord x(diff.shape());
  const Index T = diff.dim(2);
  for (Index i = 0; i < diff.dim(0); ++i)
    for (Index j = 0; j < diff.dim(1); ++j) {
      for (Index t = 0; t <= period_; ++t) x(i, j, t) = history_(i, j, t);
      for (Index t = period_ + 1; t < T; ++t)
        x(i, j, t) = diff(i, j, t) + x(i, j, t - period_) + x(i, j, t - 1) - x(i, j, t - 1 - period_);
    }
  return x;
}

// ---------------------------------------------------------------------------

SplitRanges split(const GridSpec& grid, Index train_days, Index test_days) {
  if (train_days < 1 || test_days < 1) throw ConfigError("split: train_days and test_days must be >= 1");
  if (86400 % grid.dt != 0) throw ConfigError("split: dt must divide one day");
  const Index per_day = 86400 / grid.dt;
  SplitRanges r;
  r.train_end = train_days * per_day;
  r.test_begin = r.train_end;
  r.test_end = r.test_begin + test_days * per_day;
  if (r.test_end > grid.intervals)
    throw ConfigError("split: cube spans " + std::to_string(grid.intervals) + " intervals, need " +
                      std::to_string(r.test_end));
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic demand

DemandCube synthesize(const SynthConfig& c) {
  if (c.rows < 1 || c.cols < 1 || c.days < 1 || c.period < 2 || c.dt <= 0)
    throw ConfigError("synth: rows, cols, days >= 1, period >= 2 and dt > 0 required");
  if (c.noise_fraction < 0.0 || c.noise_fraction > 1.0) throw ConfigError("synth: noise_fraction must be in [0, 1]");
  if (86400 % c.dt != 0) throw ConfigError("synth: dt must divide one day");
  GridSpec g;
  g.rows = c.rows;
  g.cols = c.cols;
  g.dt = c.dt;
  g.t0 = c.t0;
  g.intervals = c.days * (86400 / c.dt);
  g.lon_min = c.lon_min;
  g.lon_max = c.lon_max;
  g.lat_min = c.lat_min;
  g.lat_max = c.lat_max;
  g.validate();

  Rng rng(c.seed);
  const Index n = c.rows * c.cols;
  const double L = static_cast<double>(c.period);

  // Demand hot spot near the middle of the map.
  const double ci = (c.rows - 1) * rng.uniform(0.35, 0.65);
  const double cj = (c.cols - 1) * rng.uniform(0.35, 0.65);
  const double sigma = 0.28 * static_cast<double>(std::max(c.rows, c.cols));
  std::vector<double> base(static_cast<std::size_t>(n)), amp(base.size()), shift(base.size());
  for (Index i = 0; i < c.rows; ++i)
    for (Index j = 0; j < c.cols; ++j) {
      const auto k = static_cast<std::size_t>(i * c.cols + j);
      const double d2 = (i - ci) * (i - ci) + (j - cj) * (j - cj);
      base[k] = c.peak_rate * std::exp(-d2 / (2.0 * sigma * sigma)) * rng.uniform(0.6, 1.4);
      amp[k] = base[k] * rng.uniform(0.4, 1.6);
      shift[k] = std::floor(rng.uniform(0.0, L / 3.0));
    }

  // The quietest regions carry no seasonality.
  std::vector<std::size_t> order(base.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return base[a] < base[b]; });
  const auto noisy = static_cast<std::size_t>(std::llround(c.noise_fraction * static_cast<double>(n)));
  for (std::size_t r = 0; r < noisy; ++r) {
    const auto k = order[r];
    base[k] = rng.uniform(0.5, 3.0);
    amp[k] = 0.0;
  }

  DemandCube cube(g);
  for (Index t = 0; t < g.intervals; ++t) {
    const auto day = (t / c.period) % 7;
    const double week = day >= 5 ? 1.0 - c.weekly_amplitude : 1.0;
    for (Index i = 0; i < c.rows; ++i)
      for (Index j = 0; j < c.cols; ++j) {
        const auto k = static_cast<std::size_t>(i * c.cols + j);
        const double phase = std::fmod(static_cast<double>(t) + shift[k], L) / L;
        const double season = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * phase));
        const double rate = (base[k] + amp[k] * season) * week + c.trend * static_cast<double>(t);
        cube.counts(i, j, t) = rng.poisson(rate);
      }
  }
  return cube;
}

}  // namespace stfcn
