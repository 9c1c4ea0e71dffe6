#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "config_file.hpp"
#include "stfcn/stfcn.hpp"

namespace fs = std::filesystem;
using namespace stfcn;

namespace {

// ---------------------------------------------------------------------------
// Output helpers

std::string num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::ofstream open_out(const std::string& path) {
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out = open_out(path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write to '" + path + "' failed");
}

void write_cube_out(const std::string& path, const DemandCube& cube) {
  std::ofstream out = open_out(path);
  write_cube(out, cube);
  if (!out) throw DataError("write to '" + path + "' failed");
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Index intervals_per_day(const GridSpec& g) {
  if (86400 % g.dt != 0) throw ConfigError("dt must divide one day");
  return 86400 / g.dt;
}

std::vector<Index> parse_list(const std::string& text, const char* key) {
  std::vector<Index> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    Index v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size())
      throw ConfigError(std::string(key) + ": bad list entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(std::string(key) + ": empty list");
  return out;
}

/// Daily, half-daily, two-day and weekly periods for the grid's dt, or the
/// explicit list.
std::vector<Index> period_candidates(const std::string& text, const GridSpec& g) {
  if (!text.empty()) return parse_list(text, "candidates");
  const Index d = intervals_per_day(g);
  std::vector<Index> out;
  if (d / 2 >= 2) out.push_back(d / 2);
  out.insert(out.end(), {d, 2 * d, 7 * d});
  return out;
}

Index choose_period(std::span<const double> series, const std::vector<Index>& candidates,
                    std::vector<PeriodScore>* scores = nullptr) {
  std::vector<Index> usable;
  for (Index c : candidates)
    if (c >= 2 && 2 * c <= static_cast<Index>(series.size())) usable.push_back(c);
  if (usable.empty())
    throw RangeError("no candidate period fits " + std::to_string(series.size()) + " intervals (need 2L <= length)");
  return select_period(series, usable, 0.05, scores);
}

// ---------------------------------------------------------------------------
// Shared option groups

struct RangeOptions {
  Index train_days = 0;
  Index test_days = 0;
  Index begin = -1;
  Index end = -1;

  void add(CLI::App* app) {
    app->add_option("--train-days", train_days, "Leading days used for training");
    app->add_option("--test-days", test_days, "Days after the training span used for testing");
  }
  void add_explicit(CLI::App* app) {
    app->add_option("--begin", begin, "First interval (overrides the day split)");
    app->add_option("--end", end, "One past the last interval (overrides the day split)");
  }
  SplitRanges resolve(const GridSpec& g) const {
    SplitRanges r;
    if (train_days > 0 && test_days > 0) {
      r = split(g, train_days, test_days);
    } else if (train_days > 0) {
      r.train_end = std::min(g.intervals, train_days * intervals_per_day(g));
      r.test_begin = r.train_end;
      r.test_end = g.intervals;
    } else {
      r.train_end = g.intervals;
      r.test_begin = 0;
      r.test_end = g.intervals;
    }
    return r;
  }
};

struct ModelOptions {
  std::string variant = "lc_st_fcn";
  ModelConfig model;
  TrainConfig train;
  Index period = 0;
  std::string candidates;

  void add(CLI::App* app) {
    app->add_option("--variant", variant, "lc_st_fcn, lc_fcn, fcn, cnn, lc_st_fcn_diff, ann or additive");
    app->add_option("--period", period, "Period L in intervals; 0 selects it from the candidates");
    app->add_option("--candidates", candidates, "Comma separated candidate periods");
    app->add_option("--recent", model.recent, "Recent slices per sample");
    app->add_option("--period-window", model.period_window, "Period slices per sample");
    app->add_option("--filters", model.hidden_filters, "Filters per hidden convolution");
    app->add_option("--lc-filters", model.lc_filters, "Channels of the first locally connected layer");
    app->add_option("--conv2d-layers", model.conv2d_layers, "2D layers after the temporal stack");
    app->add_option("--dense-units", model.dense_units, "Hidden units of the cnn head");
    app->add_option("--ann-hidden", model.ann_hidden, "Hidden units of each region ann");
    app->add_option("--seed", model.seed, "Seed for initialization and shuffling");
    app->add_option("--batch-size", train.batch_size);
    app->add_option("--lr", train.learning_rate, "Adagrad learning rate");
    app->add_option("--epsilon", train.adagrad_epsilon);
    app->add_option("--epochs", train.max_epochs, "Maximum epochs");
    app->add_option("--patience", train.patience, "Early stopping patience");
    app->add_option("--val-fraction", train.validation_fraction, "Validation share of the training samples");
    app->add_option("--threads", train.threads, "Worker threads; results do not depend on it");
  }
};

// ---------------------------------------------------------------------------
// Commands

struct SynthCmd {
  SynthConfig config;
  std::string out;

  void add(CLI::App& root) {
    CLI::App* c = root.add_subcommand("synth", "Generate a synthetic demand cube");
    c->add_option("--out", out, "Output cube file")->required();
    c->add_option("--rows", config.rows);
    c->add_option("--cols", config.cols);
    c->add_option("--days", config.days);
    c->add_option("--dt", config.dt, "Interval length in seconds");
    c->add_option("--period", config.period, "Daily cycle length in intervals");
    c->add_option("--peak-rate", config.peak_rate);
    c->add_option("--noise-fraction", config.noise_fraction, "Share of white-noise regions");
    c->add_option("--weekly-amplitude", config.weekly_amplitude);
    c->add_option("--trend", config.trend, "Rate increase per interval");
    c->add_option("--seed", config.seed);
    c->callback([this] { run(); });
  }
  void run() const {
    const DemandCube cube = synthesize(config);
    write_cube_out(out, cube);
    std::cout << "wrote " << out << ": " << cube.rows() << "x" << cube.cols() << "x" << cube.intervals() << ", "
              << num(sum(cube.counts)) << " requests\n";
  }
};

struct IngestCmd {
  GridSpec grid;
  Index days = 0;
  std::string trips, out, diagnostics;

  void add(CLI::App& root) {
    CLI::App* c = root.add_subcommand("ingest", "Bin trip records into a demand cube");
    c->add_option("--trips", trips, "timestamp,longitude,latitude file")->required();
    c->add_option("--out", out, "Output cube file")->required();
    c->add_option("--diagnostics", diagnostics, "Write rejected lines here");
    c->add_option("--lon-min", grid.lon_min)->required();
    c->add_option("--lon-max", grid.lon_max)->required();
    c->add_option("--lat-min", grid.lat_min)->required();
    c->add_option("--lat-max", grid.lat_max)->required();
    c->add_option("--rows", grid.rows);
    c->add_option("--cols", grid.cols);
    c->add_option("--t0", grid.t0, "Start of the observation window, epoch seconds")->required();
    c->add_option("--dt", grid.dt, "Interval length in seconds");
    c->add_option("--intervals", grid.intervals, "Number of intervals");
    c->add_option("--days", days, "Number of days (sets --intervals)");
    c->callback([this] { run(); });
  }
  void run() {
    if (days > 0) grid.intervals = days * intervals_per_day(grid);
    std::ifstream in(trips);
    if (!in) throw DataError("cannot open '" + trips + "'");
    IngestResult res;
    try {
      res = ingest(in, grid);
    } catch (const FormatError& e) {
      throw FormatError(trips + ": " + e.what());
    }
    write_cube_out(out, res.cube);
    if (!diagnostics.empty()) {
      std::ofstream d = open_out(diagnostics);
      d << "line,message\n";
      for (const IngestDiagnostic& r : res.rejected) d << r.line << ',' << r.message << '\n';
    }
    for (std::size_t k = 0; k < std::min<std::size_t>(res.rejected.size(), 5); ++k)
      std::cerr << trips << ":" << res.rejected[k].line << ": " << res.rejected[k].message << '\n';
    std::cout << "accepted=" << res.accepted << " out_of_range=" << res.out_of_range
              << " rejected=" << res.rejected.size() << '\n';
  }
};

struct DecomposeCmd {
  std::string cube_path, candidates, out, plot_dir;
  RangeOptions range;

  void add(CLI::App& root) {
    CLI::App* c = root.add_subcommand("decompose", "Select the period L by additive decomposition");
    c->add_option("--cube", cube_path)->required();
    c->add_option("--candidates", candidates, "Comma separated candidate periods");
    c->add_option("--out", out, "Score table (period,residual_variance,selected)");
    c->add_option("--plot-dir", plot_dir, "Write daily_demand.csv and decomposition.csv here");
    range.add(c);
    c->callback([this] { run(); });
  }
  void run() const {
    const DemandCube cube = read_cube_file(cube_path);
    const SplitRanges r = range.resolve(cube.grid);
    const std::vector<double> all = cube.total_series();
    const std::span<const double> series(all.data() + r.train_begin, static_cast<std::size_t>(r.train_end - r.train_begin));
    std::vector<PeriodScore> scores;
    const Index best = choose_period(series, period_candidates(candidates, cube.grid), &scores);
    std::ostringstream table;
    table << "period,residual_variance,selected\n";
    for (const PeriodScore& s : scores) table << s.period << ',' << num(s.residual_variance) << ',' << (s.period == best) << '\n';
    if (!out.empty()) write_bytes(out, table.str());
    if (!plot_dir.empty()) write_plots(cube, series, best);
    std::cout << table.str() << "selected_period=" << best << '\n';
  }
  void write_plots(const DemandCube& cube, std::span<const double> series, Index period) const {
    const Index per_day = intervals_per_day(cube.grid);
    std::ofstream daily = open_out((fs::path(plot_dir) / "daily_demand.csv").string());
    daily << "interval_of_day,mean_demand\n";
    for (Index k = 0; k < per_day; ++k) {
      double s = 0.0;
      Index n = 0;
      for (std::size_t t = static_cast<std::size_t>(k); t < series.size(); t += static_cast<std::size_t>(per_day), ++n)
        s += series[t];
      daily << k << ',' << num(n ? s / static_cast<double>(n) : 0.0) << '\n';
    }
    const Decomposition d = decompose(series, period);
    std::ofstream dec = open_out((fs::path(plot_dir) / "decomposition.csv").string());
    dec << "t,demand,trend,periodic,residual\n";
    for (Index t = d.begin; t < d.end; ++t) {
      const auto k = static_cast<std::size_t>(t - d.begin);
      dec << t << ',' << num(series[static_cast<std::size_t>(t)]) << ',' << num(d.trend[k]) << ','
          << num(d.periodic_at(t)) << ',' << num(d.residual[k]) << '\n';
    }
  }
};

struct TrainCmd {
  std::string cube_path, checkpoint, report;
  RangeOptions range;
  ModelOptions opt;

  void add(CLI::App& root) {
    CLI::App* c = root.add_subcommand("train", "Train a model on the training span of a cube");
    c->add_option("--cube", cube_path)->required();
    c->add_option("--checkpoint", checkpoint, "Output checkpoint")->required();
    c->add_option("--report", report, "Per-epoch loss CSV");
    range.add(c);
    opt.add(c);
    c->callback([this] { run(); });
  }
  void run() {
    const DemandCube cube = read_cube_file(cube_path);
    const SplitRanges r = range.resolve(cube.grid);
    Index period = opt.period;
    if (period <= 0) {
      const std::vector<double> all = cube.total_series();
      period = choose_period(std::span<const double>(all.data() + r.train_begin,
                                                     static_cast<std::size_t>(r.train_end - r.train_begin)),
                             period_candidates(opt.candidates, cube.grid));
    }
    const SampleWindow window{opt.model.recent, opt.model.period_window, period};
    ModelConfig mc = opt.model;
    mc.rows = cube.rows();
    mc.cols = cube.cols();

    if (opt.variant == "additive") {
      write_bytes(checkpoint, save_region_models(fit_additive_models(cube, r.train_begin, r.train_end, period)));
      std::cout << "additive models fitted, period=" << period << '\n';
      return;
    }
    if (opt.variant == "ann") {
      write_bytes(checkpoint, save_region_models(fit_ann_models(cube, window, r.train_begin, r.train_end, mc, opt.train)));
      std::cout << "ann models trained, period=" << period << '\n';
      return;
    }

    const Variant variant = parse_variant(opt.variant);
    ModelGraph model = build_variant(variant, mc);
    model.period_length = period;
    SampleSet samples;
    if (variant == Variant::lc_st_fcn_diff) {
      const DifferenceTransform diff(cube.counts, period);
      samples = make_samples(diff.diff(), window, std::max(r.train_begin, diff.valid_from() + window.first_target()),
                             r.train_end);
    } else {
      samples = make_samples(cube, window, r.train_begin, r.train_end);
    }
    if (samples.samples.empty()) throw RangeError("training span yields no samples for period " + std::to_string(period));
    const TrainReport rep = train(model, samples.samples, opt.train, &std::cerr);
    write_bytes(checkpoint, save_checkpoint(model));
    if (!report.empty()) {
      std::ofstream out = open_out(report);
      write_train_report(out, rep);
    }
    std::cout << model.name() << ": samples=" << samples.samples.size() << " period=" << period
              << " best_epoch=" << rep.best_epoch << " stopped_epoch=" << rep.stopped_epoch
              << " val_loss=" << num(rep.epochs[static_cast<std::size_t>(rep.best_epoch - 1)].val_loss) << '\n';
  }
};

struct PredictCmd {
  std::string checkpoint, cube_path, out;
  RangeOptions range;

  void add(CLI::App& root) {
    CLI::App* c = root.add_subcommand("predict", "One-step-ahead predictions over the test span");
    c->add_option("--checkpoint", checkpoint)->required();
    c->add_option("--cube", cube_path, "Observed cube providing the input history")->required();
    c->add_option("--out", out, "Prediction cube")->required();
    range.add(c);
    range.add_explicit(c);
    c->callback([this] { run(); });
  }
  void run() const {
    const DemandCube cube = read_cube_file(cube_path);
    SplitRanges r = range.resolve(cube.grid);
    Index begin = range.begin >= 0 ? range.begin : r.test_begin;
    Index end = range.end >= 0 ? range.end : r.test_end;
    if (begin < 0 || end > cube.intervals() || begin >= end) throw RangeError("empty or invalid prediction span");

    GridSpec g = cube.grid;
    g.intervals = end - begin;
    g.t0 = cube.grid.t0 + begin * cube.grid.dt;
    DemandCube pred(g);
    const auto store = [&](Index t, const Tensord& y) {
      for (Index i = 0; i < g.rows; ++i)
        for (Index j = 0; j < g.cols; ++j) pred.counts(i, j, t - begin) = std::max(0.0, y(i, j));
    };

    const std::string bytes = read_bytes(checkpoint);
    if (is_region_checkpoint(bytes)) {
      const RegionModelSet set = load_region_models(bytes);
      if (set.rows != cube.rows() || set.cols != cube.cols()) throw ShapeError("checkpoint grid does not match the cube");
      for (Index t = begin; t < end; ++t) store(t, set.predict(cube.counts, t));
    } else {
      const ModelGraph model = load_checkpoint(bytes);
      if (model.input_shape[0] != cube.rows() || model.input_shape[1] != cube.cols())
        throw ShapeError("checkpoint grid does not match the cube");
      const SampleWindow window{model.recent, model.period_window, model.period_length};
      if (model.variant == Variant::lc_st_fcn_diff) {
        const DifferenceTransform diff(cube.counts, model.period_length);
        if (begin < diff.valid_from() + window.first_target())
          throw RangeError("prediction span starts before enough differenced history exists");
        for (Index t = begin; t < end; ++t)
          store(t, diff.invert(t, model.forward(make_sample(diff.diff(), window, t).input)));
      } else {
        for (Index t = begin; t < end; ++t) store(t, model.forward(make_sample(cube.counts, window, t).input));
      }
    }
    write_cube_out(out, pred);
    std::cout << "wrote " << out << ": intervals [" << begin << ", " << end << ")\n";
  }
};

struct EvaluateCmd {
  std::string truth_path, pred_path, out, plot_dir;
  RangeOptions range;
  EvalOptions opt;

  void add(CLI::App& root) {
    CLI::App* c = root.add_subcommand("evaluate", "Compare a prediction cube with the observed cube");
    c->add_option("--truth", truth_path)->required();
    c->add_option("--pred", pred_path)->required();
    c->add_option("--out", out, "EvalReport text file");
    c->add_option("--plot-dir", plot_dir, "Write lorenz.csv, region_histograms.csv and cma_metrics.csv here");
    c->add_option("--c", opt.c, "Denominator offset of MAPE and sMAPE1");
    c->add_option("--lags", opt.lags, "Ljung-Box lags");
    c->add_option("--bin-width", opt.bin_width, "Histogram bin width for KL divergence");
    range.add(c);
    c->callback([this] { run(); });
  }
  void run() const {
    const DemandCube truth = read_cube_file(truth_path);
    const DemandCube pred = read_cube_file(pred_path);
    if (pred.grid.dt != truth.grid.dt || pred.rows() != truth.rows() || pred.cols() != truth.cols())
      throw ShapeError("prediction grid does not match the truth cube");
    const std::int64_t offset = pred.grid.t0 - truth.grid.t0;
    if (offset < 0 || offset % truth.grid.dt != 0) throw RangeError("prediction start is not an interval of the truth cube");
    const Index test_begin = offset / truth.grid.dt;
    SplitRanges r = range.resolve(truth.grid);
    // Without an explicit split, weights and labels come from the history
    // before the predictions, or from the whole cube when there is none.
    if (range.train_days <= 0) r.train_end = test_begin > 0 ? test_begin : truth.intervals();
    const EvalReport rep = evaluate(truth, pred.counts, test_begin, r.train_begin, r.train_end, opt);
    std::ostringstream text;
    write_report(text, rep);
    if (!out.empty()) write_bytes(out, text.str());
    else std::cout << text.str();
    if (!plot_dir.empty()) write_plots(truth, pred, rep, test_begin, r);
    std::cout << "global_rmse=" << num(rep.global_rmse) << '\n';
  }
  void write_plots(const DemandCube& truth, const DemandCube& pred, const EvalReport& rep, Index test_begin,
                   const SplitRanges& r) const {
    const fs::path dir(plot_dir);
    const Tensord totals = truth.region_totals(r.train_begin, r.train_end);
    std::ofstream lorenz = open_out((dir / "lorenz.csv").string());
    lorenz << "region_share,demand_share\n";
    for (const auto& [x, y] : lorenz_curve(std::span<const double>(totals.ptr(), totals.size())))
      lorenz << num(x) << ',' << num(y) << '\n';
    lorenz << "# gini=" << num(gini(totals)) << '\n';

    std::ofstream hist = open_out((dir / "region_histograms.csv").string());
    hist << "row,col,bin_lo,truth_count,pred_count\n";
    const Index steps = pred.intervals();
    for (const RegionEntry& e : rep.regions) {
      const std::vector<double> x = truth.region_series(e.row, e.col, test_begin, test_begin + steps);
      const std::vector<double> p = pred.region_series(e.row, e.col, 0, steps);
      const HistogramPair h = histogram_pair(x, p, opt.bin_width);
      for (std::size_t k = 0; k < h.truth.size(); ++k)
        hist << e.row << ',' << e.col << ',' << num(static_cast<double>(h.first_bin + static_cast<long>(k)) * opt.bin_width)
             << ',' << num(h.truth[k]) << ',' << num(h.pred[k]) << '\n';
    }

    // Cumulative moving average of the city-wide per-step RMSE.
    std::ofstream cma = open_out((dir / "cma_metrics.csv").string());
    cma << "step,rmse,cma_rmse\n";
    double acc = 0.0;
    for (Index t = 0; t < steps; ++t) {
      double se = 0.0;
      for (Index i = 0; i < truth.rows(); ++i)
        for (Index j = 0; j < truth.cols(); ++j) {
          const double e = truth.counts(i, j, test_begin + t) - pred.counts(i, j, t);
          se += e * e;
        }
      const double rmse = std::sqrt(se / static_cast<double>(truth.rows() * truth.cols()));
      acc += rmse;
      cma << t << ',' << num(rmse) << ',' << num(acc / static_cast<double>(t + 1)) << '\n';
    }
  }
};

struct ClassifyCmd {
  std::string cube_path, out;
  RangeOptions range;
  Index lags = 20;
  double alpha = 0.05;

  void add(CLI::App& root) {
    CLI::App* c = root.add_subcommand("classify", "Ljung-Box G1/G2 labels per region");
    c->add_option("--cube", cube_path)->required();
    c->add_option("--out", out, "Label table");
    c->add_option("--lags", lags);
    c->add_option("--alpha", alpha, "Significance level");
    range.add(c);
    c->callback([this] { run(); });
  }
  void run() const {
    const DemandCube cube = read_cube_file(cube_path);
    const SplitRanges r = range.resolve(cube.grid);
    const auto labels = classify_regions(cube, r.train_begin, r.train_end, lags, alpha);
    std::ostringstream table;
    table << "row,col,group,p_value,degenerate\n";
    Index g1 = 0;
    for (Index i = 0; i < cube.rows(); ++i)
      for (Index j = 0; j < cube.cols(); ++j) {
        const RegionClass& c = labels[static_cast<std::size_t>(i * cube.cols() + j)];
        g1 += c.group == Group::g1;
        table << i << ',' << j << ',' << (c.group == Group::g1 ? "G1" : "G2") << ',' << num(c.p_value) << ','
              << c.degenerate << '\n';
      }
    if (!out.empty()) write_bytes(out, table.str());
    else std::cout << table.str();
    std::cout << "G1=" << g1 << " G2=" << static_cast<Index>(labels.size()) - g1 << '\n';
  }
};

/// Inserts `--key=value` tokens from the config file right after the
/// subcommand name so that later command-line flags win.
std::vector<std::string> apply_config(CLI::App& app, std::vector<std::string> args, const std::string& path) {
  const auto entries = cli::read_config_file(path);
  auto sub_pos = std::find_if(args.begin(), args.end(), [&](const std::string& a) {
    return a.rfind("-", 0) != 0 && app.get_subcommand_no_throw(a) != nullptr;
  });
  if (sub_pos == args.end()) throw ConfigError("a subcommand is required with --config");
  CLI::App* sub = app.get_subcommand_no_throw(*sub_pos);
  std::vector<std::string> tokens;
  for (const cli::ConfigEntry& e : entries) {
    if (sub->get_option_no_throw("--" + e.key) == nullptr)
      throw ConfigError(path + ":" + std::to_string(e.line) + ": unknown key '" + e.key + "' for '" + sub->get_name() + "'");
    tokens.push_back("--" + e.key + "=" + e.value);
  }
  args.insert(sub_pos + 1, tokens.begin(), tokens.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Spatiotemporal ride-hailing demand forecasting", "stfcn");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  SynthCmd synth;
  IngestCmd ingest_cmd;
  DecomposeCmd decompose_cmd;
  TrainCmd train_cmd;
  PredictCmd predict;
  EvaluateCmd evaluate_cmd;
  ClassifyCmd classify;
  synth.add(app);
  ingest_cmd.add(app);
  decompose_cmd.add(app);
  train_cmd.add(app);
  predict.add(app);
  evaluate_cmd.add(app);
  classify.add(app);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    const std::string config = cli::extract_config_path(args);
    if (!config.empty()) args = apply_config(app, std::move(args), config);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
