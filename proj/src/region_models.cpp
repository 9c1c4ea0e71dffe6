#include "stfcn/region_models.hpp"

#include <cstring>

#include "stfcn/binary_io.hpp"

namespace stfcn {

namespace {
constexpr char kMagic[8] = {'S', 'T', 'F', 'C', 'N', 'R', 'G', '1'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

AdditiveModel fit_additive(std::span<const double> series, Index t_begin, Index period) {
  if (t_begin < 0) throw RangeError("fit_additive: negative start");
  const Decomposition d = decompose(series, period);
  AdditiveModel m;
  m.period = period;
  m.fit_begin = t_begin;
  m.fit_end = t_begin + static_cast<Index>(series.size());

  // Least-squares line through the trend, centred for conditioning.
  const auto n = static_cast<double>(d.trend.size());
  double t_mean = 0.0, y_mean = 0.0;
  for (std::size_t k = 0; k < d.trend.size(); ++k) {
    t_mean += static_cast<double>(t_begin + d.begin + static_cast<Index>(k));
    y_mean += d.trend[k];
  }
  t_mean /= n;
  y_mean /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < d.trend.size(); ++k) {
    const double dt = static_cast<double>(t_begin + d.begin + static_cast<Index>(k)) - t_mean;
    sxy += dt * (d.trend[k] - y_mean);
    sxx += dt * dt;
  }
  m.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  m.intercept = y_mean - m.slope * t_mean;

  m.periodic.assign(static_cast<std::size_t>(period), 0.0);
  for (Index p = 0; p < period; ++p) m.periodic[static_cast<std::size_t>((t_begin + p) % period)] = d.periodic[p];
  return m;
}

double predict_additive(const AdditiveModel& m, Index t) {
  if (t < m.fit_begin)
    throw RangeError("predict_additive: interval " + std::to_string(t) + " precedes the fitted window starting at " +
                     std::to_string(m.fit_begin));
  return m.intercept + m.slope * static_cast<double>(t) + m.periodic[static_cast<std::size_t>(t % m.period)];
}

VolumeSample region_sample(const VolumeSample& s, Index i, Index j) {
  const Index depth = s.input.dim(2);
  VolumeSample out{s.t, Tensord({1, 1, depth}), Tensord({1, 1})};
  for (Index k = 0; k < depth; ++k) out.input(0, 0, k) = s.input(i, j, k);
  out.target(0, 0) = s.target(i, j);
  return out;
}

Tensord RegionModelSet::predict(const Tensord& counts, Index t) const {
  Tensord out({rows, cols});
  if (kind == RegionKind::additive) {
    for (const RegionModel& m : models) out(m.row, m.col) = predict_additive(m.additive, t);
    return out;
  }
  const VolumeSample s = make_sample(counts, window, t);
  for (const RegionModel& m : models) out(m.row, m.col) = m.ann.forward(region_sample(s, m.row, m.col).input)[0];
  return out;
}

RegionModelSet fit_additive_models(const DemandCube& cube, Index t_lo, Index t_hi, Index period) {
  RegionModelSet set;
  set.kind = RegionKind::additive;
  set.rows = cube.rows();
  set.cols = cube.cols();
  set.window.period_length = period;
  for (Index i = 0; i < cube.rows(); ++i)
    for (Index j = 0; j < cube.cols(); ++j) {
      RegionModel m;
      m.row = i;
      m.col = j;
      m.kind = RegionKind::additive;
      m.additive = fit_additive(cube.region_series(i, j, t_lo, t_hi), t_lo, period);
      set.models.push_back(std::move(m));
    }
  return set;
}

RegionModelSet fit_ann_models(const DemandCube& cube, const SampleWindow& window, Index t_lo, Index t_hi,
                              const ModelConfig& model_config, const TrainConfig& train_config) {
  const SampleSet full = make_samples(cube, window, t_lo, t_hi);
  if (full.samples.empty()) throw ConfigError("fit_ann_models: no samples in range");
  ModelConfig mc = model_config;
  mc.recent = window.recent;
  mc.period_window = window.period_window;
  RegionModelSet set;
  set.kind = RegionKind::ann;
  set.rows = cube.rows();
  set.cols = cube.cols();
  set.window = window;
  std::vector<VolumeSample> local(full.samples.size());
  for (Index i = 0; i < cube.rows(); ++i)
    for (Index j = 0; j < cube.cols(); ++j) {
      for (std::size_t k = 0; k < local.size(); ++k) local[k] = region_sample(full.samples[k], i, j);
      mc.seed = model_config.seed + static_cast<std::uint64_t>(i * cube.cols() + j);
      RegionModel m;
      m.row = i;
      m.col = j;
      m.kind = RegionKind::ann;
      m.ann = build_variant(Variant::ann, mc);
      m.ann.period_length = window.period_length;
      train(m.ann, local, train_config);
      set.models.push_back(std::move(m));
    }
  return set;
}

std::string save_region_models(const RegionModelSet& set) {
  ByteWriter w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(set.kind));
  w.i64(set.rows);
  w.i64(set.cols);
  w.i64(set.window.recent);
  w.i64(set.window.period_window);
  w.i64(set.window.period_length);
  w.u64(set.models.size());
  for (const RegionModel& m : set.models) {
    w.i64(m.row);
    w.i64(m.col);
    if (set.kind == RegionKind::additive) {
      const AdditiveModel& a = m.additive;
      w.i64(a.period);
      w.i64(a.fit_begin);
      w.i64(a.fit_end);
      w.f64(a.intercept);
      w.f64(a.slope);
      for (double v : a.periodic) w.f64(v);
    } else {
      w.str(save_checkpoint(m.ann));
    }
  }
  return w.take();
}

bool is_region_checkpoint(std::string_view bytes) {
  return bytes.size() >= sizeof kMagic && std::memcmp(bytes.data(), kMagic, sizeof kMagic) == 0;
}

RegionModelSet load_region_models(std::string_view bytes) {
  ByteReader r(bytes);
  char magic[sizeof kMagic];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw FormatError("region checkpoint: bad magic");
  if (r.u32() != kVersion) throw FormatError("region checkpoint: unsupported version");
  RegionModelSet set;
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw FormatError("region checkpoint: bad kind");
  set.kind = static_cast<RegionKind>(kind);
  set.rows = r.dim();
  set.cols = r.dim();
  set.window.recent = r.i64();
  set.window.period_window = r.i64();
  set.window.period_length = r.i64();
  const std::uint64_t n = r.u64();
  if (n != static_cast<std::uint64_t>(set.rows * set.cols)) throw FormatError("region checkpoint: model count mismatch");
  for (std::uint64_t k = 0; k < n; ++k) {
    RegionModel m;
    m.kind = set.kind;
    m.row = r.i64();
    m.col = r.i64();
    if (m.row < 0 || m.row >= set.rows || m.col < 0 || m.col >= set.cols)
      throw FormatError("region checkpoint: region out of range");
    if (set.kind == RegionKind::additive) {
      AdditiveModel& a = m.additive;
      a.period = r.dim();
      a.fit_begin = r.i64();
      a.fit_end = r.i64();
      a.intercept = r.f64();
      a.slope = r.f64();
      if (a.period > (Index{1} << 24)) throw FormatError("region checkpoint: corrupt period");
      a.periodic.resize(static_cast<std::size_t>(a.period));
      for (double& v : a.periodic) v = r.f64();
    } else {
      m.ann = load_checkpoint(r.str());
    }
    set.models.push_back(std::move(m));
  }
  if (!r.at_end()) throw FormatError("region checkpoint: trailing bytes");
  return set;
}

}  // namespace stfcn
