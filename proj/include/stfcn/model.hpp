#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stfcn/layers.hpp"
#include "stfcn/tensor.hpp"

namespace stfcn {

enum class Variant : std::uint8_t { lc_st_fcn, lc_fcn, fcn, cnn, lc_st_fcn_diff, ann };

std::string to_string(Variant v);
/// Throws ConfigError for unknown names.
Variant parse_variant(std::string_view name);

/// Shape-only layer: flatten, depth-to-channels bridge and the final [I, J] view.
struct Reshape {
  Shape target;
};

using Layer = std::variant<Conv3DLayer<double>, Conv2DLayer<double>, LC2DLayer<double>, DenseLayer<double>, Reshape>;

/// Architecture knobs. Filter counts are free parameters; the defaults are
/// desk-scale choices.
struct ModelConfig {
  Index rows = 16;
  Index cols = 16;
  Index recent = 10;
  Index period_window = 10;
  std::vector<Index> depth_kernels{3, 5, 7, 8};
  Index hidden_filters = 32;
  Index conv2d_layers = 4;
  Index lc_filters = 16;
  Index dense_units = 256;
  Index ann_hidden = 16;
  std::uint64_t seed = 1;

  Index input_depth() const { return recent + period_window; }
};

/// Per-layer forward state kept for the backward pass.
struct ForwardTrace {
  std::vector<LayerCache<double>> caches;
  std::vector<Shape> input_shapes;
  Tensord output;
};

/// Gradient store, aligned with ModelGraph::parameters().
using Gradients = std::vector<Tensord>;

/**
 * An ordered layer stack plus its parameters. Parameters live inside the
 * layers; `parameters()` exposes them as a flat list in layer order
 * (weights then bias), which is also the checkpoint and optimizer order.
 */
class ModelGraph {
 public:
  Variant variant = Variant::lc_st_fcn;
  Shape input_shape;
  Shape output_shape;
  std::vector<Layer> layers;
  /// Sample layout the model was trained on.
  Index recent = 0;
  Index period_window = 0;
  Index period_length = 0;

  std::string name() const { return to_string(variant); }

  Tensord forward(const Tensord& x) const;
  ForwardTrace forward_trace(const Tensord& x) const;
  Gradients backward(const ForwardTrace& trace, const Tensord& grad_output) const;

  std::vector<Tensord*> parameters();
  std::vector<const Tensord*> parameters() const;
  Gradients zero_gradients() const;
  Index parameter_count() const;
  /// Parameter count of layer `k` (0 for reshapes).
  Index layer_parameter_count(std::size_t k) const;

  /// Output shape of each layer for the declared input shape. Throws
  /// DepthError or ShapeError when the stack is inconsistent.
  std::vector<Shape> activation_shapes() const;
};

ModelGraph build_variant(Variant variant, const ModelConfig& config);
ModelGraph build_variant(std::string_view name, const ModelConfig& config);

/// Versioned binary checkpoint; parameters are little-endian IEEE-754 doubles.
std::string save_checkpoint(const ModelGraph& model);
/// Throws FormatError on bad magic, unknown version or truncation.
ModelGraph load_checkpoint(std::string_view bytes);

/// FNV-1a over the parameter bytes in checkpoint order.
std::uint64_t parameter_checksum(const ModelGraph& model);

}  // namespace stfcn
