#include "stfcn/evalstats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace stfcn {

MetricValues region_metrics(std::span<const double> truth, std::span<const double> pred, double c) {
  if (truth.size() != pred.size())
    throw ShapeError("region_metrics: truth has " + std::to_string(truth.size()) + " values, prediction " +
                     std::to_string(pred.size()));
  if (truth.empty()) throw ShapeError("region_metrics: empty series");
  const auto n = static_cast<double>(truth.size());
  double sse = 0.0, sxx = 0.0, mape = 0.0, smape1 = 0.0, abs_err = 0.0, abs_sum = 0.0;
  bool mape_ok = true, smape1_ok = true;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    const double x = truth[t], xh = pred[t];
    const double e = x - xh;
    sse += e * e;
    sxx += x * x;
    abs_err += std::abs(e);
    abs_sum += std::abs(x + xh);
    const double d1 = x + c;
    const double d2 = x + xh + c;
    if (d1 == 0.0) mape_ok = false;
    else mape += std::abs(e) / d1;
    if (d2 == 0.0) smape1_ok = false;
    else smape1 += std::abs(e) / d2;
  }
  MetricValues m;
  m[static_cast<std::size_t>(Metric::rmse)] = std::sqrt(sse / n);
  if (sxx > 0.0) m[static_cast<std::size_t>(Metric::nrmse)] = std::sqrt(sse / sxx);
  if (mape_ok) m[static_cast<std::size_t>(Metric::mape)] = mape / n;
  if (smape1_ok) m[static_cast<std::size_t>(Metric::smape1)] = smape1 / n;
  if (abs_sum > 0.0) m[static_cast<std::size_t>(Metric::smape2)] = abs_err / abs_sum;
  return m;
}

Tensord demand_weights(const DemandCube& cube, Index t_lo, Index t_hi) {
  Tensord w = cube.region_totals(t_lo, t_hi);
  const double total = sum(w);
  if (!(total > 0.0)) throw DataError("demand_weights: no demand in the weighting window");
  w.data() /= total;
  return w;
}

AggregateValue aggregate(std::span<const MetricValues> per_region, std::span<const double> weights, Metric metric,
                         AggregateMode mode) {
  if (mode == AggregateMode::weighted && weights.size() != per_region.size())
    throw ShapeError("aggregate: one weight per region required");
  const auto k = static_cast<std::size_t>(metric);
  AggregateValue out;
  double acc = 0.0, mass = 0.0;
  Index defined = 0;
  for (std::size_t r = 0; r < per_region.size(); ++r) {
    const auto& v = per_region[r][k];
    const double w = mode == AggregateMode::weighted ? weights[r] : 1.0;
    if (mode == AggregateMode::weighted && w < 0.0) throw DataError("aggregate: negative weight");
    if (!v) {
      ++out.excluded_regions;
      if (mode == AggregateMode::weighted) out.excluded_weight += w;
      continue;
    }
    ++defined;
    acc += w * *v;
    mass += w;
  }
  if (defined == 0 || !(mass > 0.0))
    throw DataError(std::string("aggregate: ") + kMetricNames[k] + " is undefined in every region");
  out.value = acc / mass;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Series expansion of P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double sum = 1.0 / a, term = sum, ap = a;
  for (int n = 0; n < 10000; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction (modified Lentz) for Q(a, x), valid for x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw RangeError("regularized_gamma_q: need a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

double chi_square_survival(double statistic, double dof) {
  if (statistic <= 0.0) return 1.0;
  return regularized_gamma_q(0.5 * dof, 0.5 * statistic);
}

LjungBoxResult ljung_box(std::span<const double> series, Index lags) {
  const auto n = static_cast<Index>(series.size());
  if (lags < 1 || n <= lags)
    throw RangeError("ljung_box: need series length " + std::to_string(n) + " > lags " + std::to_string(lags) +
                     " >= 1");
  LjungBoxResult r;
  r.lags = lags;
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  double denom = 0.0;
  for (double v : series) denom += (v - mean) * (v - mean);
  if (!(denom > 0.0)) {
    r.degenerate = true;
    return r;
  }
  double q = 0.0;
  for (Index k = 1; k <= lags; ++k) {
    double num = 0.0;
    for (Index t = k; t < n; ++t) num += (series[t] - mean) * (series[t - k] - mean);
    const double rho = num / denom;
    q += rho * rho / static_cast<double>(n - k);
  }
  r.statistic = static_cast<double>(n) * static_cast<double>(n + 2) * q;
  r.p_value = chi_square_survival(r.statistic, static_cast<double>(lags));
  return r;
}

std::vector<RegionClass> classify_regions(const DemandCube& cube, Index t_lo, Index t_hi, Index lags, double alpha) {
  std::vector<RegionClass> out;
  out.reserve(static_cast<std::size_t>(cube.rows() * cube.cols()));
  for (Index i = 0; i < cube.rows(); ++i)
    for (Index j = 0; j < cube.cols(); ++j) {
      const LjungBoxResult lb = ljung_box(cube.region_series(i, j, t_lo, t_hi), lags);
      RegionClass rc;
      rc.p_value = lb.p_value;
      rc.degenerate = lb.degenerate;
      rc.group = !lb.degenerate && lb.p_value <= alpha ? Group::g1 : Group::g2;
      out.push_back(rc);
    }
  return out;
}

// ---------------------------------------------------------------------------

double kl_divergence_histograms(std::span<const double> p, std::span<const double> q, double smoothing) {
  if (p.size() != q.size() || p.empty()) throw ShapeError("kl_divergence: histograms must be nonempty and aligned");
  if (!(smoothing >= 0.0)) throw RangeError("kl_divergence: smoothing must be >= 0");
  double ps = 0.0, qs = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    ps += p[k] + smoothing;
    qs += q[k] + smoothing;
  }
  double d = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double pk = (p[k] + smoothing) / ps;
    const double qk = (q[k] + smoothing) / qs;
    if (pk > 0.0) d += pk * std::log(pk / qk);
  }
  return std::max(d, 0.0);
}

HistogramPair histogram_pair(std::span<const double> truth, std::span<const double> pred, double bin_width) {
  if (truth.empty() || pred.empty()) throw ShapeError("histogram_pair: empty series");
  if (!(bin_width > 0.0)) throw RangeError("histogram_pair: bin width must be > 0");
  auto bin = [&](double v) { return static_cast<long>(std::floor(v / bin_width)); };
  long lo = std::numeric_limits<long>::max(), hi = std::numeric_limits<long>::min();
  for (auto s : {truth, pred})
    for (double v : s) {
      lo = std::min(lo, bin(v));
      hi = std::max(hi, bin(v));
    }
  HistogramPair h;
  h.first_bin = lo;
  h.truth.assign(static_cast<std::size_t>(hi - lo + 1), 0.0);
  h.pred.assign(h.truth.size(), 0.0);
  for (double v : truth) h.truth[static_cast<std::size_t>(bin(v) - lo)] += 1.0;
  for (double v : pred) h.pred[static_cast<std::size_t>(bin(v) - lo)] += 1.0;
  return h;
}

double kl_divergence(std::span<const double> truth, std::span<const double> pred, double bin_width, double smoothing) {
  const HistogramPair h = histogram_pair(truth, pred, bin_width);
  return kl_divergence_histograms(h.truth, h.pred, smoothing);
}

std::vector<std::pair<double, double>> lorenz_curve(std::span<const double> totals) {
  if (totals.empty()) throw DataError("lorenz_curve: no regions");
  std::vector<double> v(totals.begin(), totals.end());
  double total = 0.0;
  for (double x : v) {
    if (x < 0.0) throw DataError("lorenz_curve: negative demand");
    total += x;
  }
  if (!(total > 0.0)) throw DataError("lorenz_curve: total demand is zero");
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  std::vector<std::pair<double, double>> curve{{0.0, 0.0}};
  double cum = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    cum += v[k];
    curve.emplace_back(static_cast<double>(k + 1) / n, cum / total);
  }
  return curve;
}

double gini(std::span<const double> totals) {
  const auto curve = lorenz_curve(totals);
  // Area under the Lorenz curve by trapezoids; Gini = 1 - 2 * area.
  double twice_area = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k)
    twice_area += (curve[k].first - curve[k - 1].first) * (curve[k].second + curve[k - 1].second);
  return 1.0 - twice_area;
}

// ---------------------------------------------------------------------------

EvalReport evaluate(const DemandCube& truth, const Tensord& pred, Index test_begin, Index train_begin, Index train_end,
                    const EvalOptions& opt) {
  if (pred.rank() != 3 || pred.dim(0) != truth.rows() || pred.dim(1) != truth.cols())
    throw ShapeError("evaluate: prediction shape " + to_string(pred.shape()) + " does not match the truth grid");
  const Index steps = pred.dim(2);
  if (test_begin < 0 || test_begin + steps > truth.intervals())
    throw RangeError("evaluate: prediction window exceeds the truth cube");

  EvalReport rep;
  rep.rows = truth.rows();
  rep.cols = truth.cols();
  rep.steps = steps;
  const Tensord weights = demand_weights(truth, train_begin, train_end);
  const auto labels = classify_regions(truth, train_begin, train_end, opt.lags);

  std::vector<MetricValues> table;
  std::vector<double> w;
  double sse_all = 0.0;
  std::array<double, 2> sse_group{0.0, 0.0};
  std::array<Index, 2> cells_group{0, 0};
  std::vector<double> xs(static_cast<std::size_t>(steps)), ps(xs.size());
  for (Index i = 0; i < rep.rows; ++i)
    for (Index j = 0; j < rep.cols; ++j) {
      for (Index t = 0; t < steps; ++t) {
        xs[static_cast<std::size_t>(t)] = truth.counts(i, j, test_begin + t);
        ps[static_cast<std::size_t>(t)] = pred(i, j, t);
      }
      RegionEntry e;
      e.row = i;
      e.col = j;
      e.weight = weights(i, j);
      e.metrics = region_metrics(xs, ps, opt.c);
      e.kl = kl_divergence(xs, ps, opt.bin_width, opt.smoothing);
      e.label = labels[static_cast<std::size_t>(i * rep.cols + j)];
      double sse = 0.0;
      for (std::size_t t = 0; t < xs.size(); ++t) sse += (xs[t] - ps[t]) * (xs[t] - ps[t]);
      sse_all += sse;
      const auto g = static_cast<std::size_t>(e.label.group);
      sse_group[g] += sse;
      cells_group[g] += steps;
      table.push_back(e.metrics);
      w.push_back(e.weight);
      rep.regions.push_back(std::move(e));
    }
  rep.global_rmse = std::sqrt(sse_all / static_cast<double>(rep.rows * rep.cols * steps));
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    rep.plain[m] = aggregate(table, w, static_cast<Metric>(m), AggregateMode::plain);
    rep.weighted[m] = aggregate(table, w, static_cast<Metric>(m), AggregateMode::weighted);
  }
  for (std::size_t g = 0; g < 2; ++g) {
    PartitionSummary& ps_ = rep.partitions[g];
    ps_.group = static_cast<Group>(g);
    std::array<double, kMetricCount> acc{}, mass{};
    for (const RegionEntry& e : rep.regions) {
      if (static_cast<std::size_t>(e.label.group) != g) continue;
      ++ps_.regions;
      ps_.demand_share += e.weight;
      for (std::size_t m = 0; m < kMetricCount; ++m)
        if (e.metrics[m]) {
          acc[m] += e.weight * *e.metrics[m];
          mass[m] += e.weight;
        }
    }
    if (cells_group[g] > 0) ps_.rmse = std::sqrt(sse_group[g] / static_cast<double>(cells_group[g]));
    for (std::size_t m = 0; m < kMetricCount; ++m)
      if (mass[m] > 0.0) ps_.weighted[m] = acc[m] / mass[m];
  }
  return rep;
}

namespace {

void put(std::ostream& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, ptr - buf);
}

void put(std::ostream& out, const std::optional<double>& v) {
  if (v) put(out, *v);
  else out << "NA";
}

const char* group_name(Group g) { return g == Group::g1 ? "G1" : "G2"; }

}  // namespace

void write_report(std::ostream& out, const EvalReport& rep) {
  out << "# regions\n";
  out << "row,col,weight,rmse,nrmse,mape,smape1,smape2,kl,group,p_value,flags\n";
  for (const RegionEntry& e : rep.regions) {
    out << e.row << ',' << e.col << ',';
    put(out, e.weight);
    for (const auto& m : e.metrics) {
      out << ',';
      put(out, m);
    }
    out << ',';
    put(out, e.kl);
    out << ',' << group_name(e.label.group) << ',';
    put(out, e.label.p_value);
    std::string flags;
    auto flag = [&](const char* f) { flags += (flags.empty() ? "" : "|") + std::string(f); };
    if (!e.metrics[static_cast<std::size_t>(Metric::nrmse)]) flag("nrmse_undefined");
    if (!e.metrics[static_cast<std::size_t>(Metric::mape)]) flag("mape_undefined");
    if (!e.metrics[static_cast<std::size_t>(Metric::smape1)]) flag("smape1_undefined");
    if (!e.metrics[static_cast<std::size_t>(Metric::smape2)]) flag("smape2_undefined");
    if (e.label.degenerate) flag("zero_variance");
    out << ',' << (flags.empty() ? "-" : flags) << '\n';
  }
  out << "# aggregate\n";
  out << "metric,plain,weighted,excluded_regions,excluded_weight\n";
  out << "global_rmse,";
  put(out, rep.global_rmse);
  out << ",,,\n";
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    out << kMetricNames[m] << ',';
    put(out, rep.plain[m].value);
    out << ',';
    put(out, rep.weighted[m].value);
    out << ',' << rep.weighted[m].excluded_regions << ',';
    put(out, rep.weighted[m].excluded_weight);
    out << '\n';
  }
  out << "# partition\n";
  out << "group,regions,demand_share,rmse,w_nrmse,w_mape,w_smape1,w_smape2\n";
  for (const PartitionSummary& p : rep.partitions) {
    out << group_name(p.group) << ',' << p.regions << ',';
    put(out, p.demand_share);
    out << ',';
    put(out, p.rmse);
    for (std::size_t m = 1; m < kMetricCount; ++m) {
      out << ',';
      put(out, p.weighted[m]);
    }
    out << '\n';
  }
}

}  // namespace stfcn
