#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stfcn/datapipe.hpp"
#include "stfcn/model.hpp"
#include "stfcn/training.hpp"

namespace stfcn {

/// Per-region additive model: linear trend through the fitted moving
/// average plus the periodic profile indexed by absolute phase t mod period.
struct AdditiveModel {
  Index period = 0;
  Index fit_begin = 0;
  Index fit_end = 0;
  double intercept = 0.0;
  double slope = 0.0;
  std::vector<double> periodic;
};

/// `series[k]` is the value at absolute interval `t_begin + k`.
AdditiveModel fit_additive(std::span<const double> series, Index t_begin, Index period);
/// Throws RangeError for t before the fitted window.
double predict_additive(const AdditiveModel& model, Index t);

enum class RegionKind : std::uint8_t { ann = 0, additive = 1 };

struct RegionModel {
  Index row = 0;
  Index col = 0;
  RegionKind kind = RegionKind::additive;
  ModelGraph ann;
  AdditiveModel additive;
};

/// One independent model per grid cell, row-major.
struct RegionModelSet {
  RegionKind kind = RegionKind::additive;
  Index rows = 0;
  Index cols = 0;
  SampleWindow window;
  std::vector<RegionModel> models;

  /// Demand matrix at interval t from the counts history before t.
  Tensord predict(const Tensord& counts, Index t) const;
};

/// ANN input for one cell: the cell's column of a full-grid sample.
VolumeSample region_sample(const VolumeSample& sample, Index i, Index j);

RegionModelSet fit_additive_models(const DemandCube& cube, Index t_lo, Index t_hi, Index period);
RegionModelSet fit_ann_models(const DemandCube& cube, const SampleWindow& window, Index t_lo, Index t_hi,
                              const ModelConfig& model_config, const TrainConfig& train_config);

std::string save_region_models(const RegionModelSet& set);
RegionModelSet load_region_models(std::string_view bytes);

/// True when the bytes start with the region-model magic.
bool is_region_checkpoint(std::string_view bytes);

}  // namespace stfcn
