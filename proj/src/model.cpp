#include "stfcn/model.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <type_traits>

#include "stfcn/binary_io.hpp"

namespace stfcn {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

constexpr std::array<std::pair<Variant, std::string_view>, 6> kVariantNames{{
    {Variant::lc_st_fcn, "lc_st_fcn"},
    {Variant::lc_fcn, "lc_fcn"},
    {Variant::fcn, "fcn"},
    {Variant::cnn, "cnn"},
    {Variant::lc_st_fcn_diff, "lc_st_fcn_diff"},
    {Variant::ann, "ann"},
}};

enum class LayerKind : std::uint8_t { conv3d = 1, conv2d = 2, lc2d = 3, dense = 4, reshape = 5 };

constexpr char kMagic[8] = {'S', 'T', 'F', 'C', 'N', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

std::string to_string(Variant v) {
  for (const auto& [var, name] : kVariantNames)
    if (var == v) return std::string(name);
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (const auto& [var, n] : kVariantNames)
    if (n == name) return var;
  throw ConfigError("unknown variant '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

Tensord ModelGraph::forward(const Tensord& x) const {
  require_same_shape(x.shape(), input_shape, "model input");
  Tensord h = x;
  for (const Layer& layer : layers) {
    h = std::visit(Overloaded{
                       [&](const Conv3DLayer<double>& l) { return conv3d_forward(h, l); },
                       [&](const Conv2DLayer<double>& l) { return conv2d_forward(h, l); },
                       [&](const LC2DLayer<double>& l) { return lc2d_forward(h, l); },
                       [&](const DenseLayer<double>& l) { return dense_forward(h, l); },
                       [&](const Reshape& r) { return std::move(h).reshaped(r.target); },
                   },
                   layer);
  }
  return h;
}

ForwardTrace ModelGraph::forward_trace(const Tensord& x) const {
  require_same_shape(x.shape(), input_shape, "model input");
  ForwardTrace trace;
  trace.caches.resize(layers.size());
  trace.input_shapes.reserve(layers.size());
  Tensord h = x;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    trace.input_shapes.push_back(h.shape());
    LayerCache<double>* cache = &trace.caches[k];
    h = std::visit(Overloaded{
                       [&](const Conv3DLayer<double>& l) { return conv3d_forward(h, l, cache); },
                       [&](const Conv2DLayer<double>& l) { return conv2d_forward(h, l, cache); },
                       [&](const LC2DLayer<double>& l) { return lc2d_forward(h, l, cache); },
                       [&](const DenseLayer<double>& l) { return dense_forward(h, l, cache); },
                       [&](const Reshape& r) { return std::move(h).reshaped(r.target); },
                   },
                   layers[k]);
  }
  trace.output = std::move(h);
  return trace;
}

Gradients ModelGraph::backward(const ForwardTrace& trace, const Tensord& grad_output) const {
  if (trace.caches.size() != layers.size()) throw StateError("backward: trace does not belong to this model");
  require_same_shape(grad_output.shape(), trace.output.shape(), "backward");
  Gradients grads;
  grads.reserve(2 * layers.size());
  // Filled back to front, reversed at the end.
  Tensord g = grad_output;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const LayerCache<double>& cache = trace.caches[k];
    auto take = [&](LayerGrads<double> lg) {
      grads.push_back(std::move(lg.bias));
      grads.push_back(std::move(lg.weights));
      return std::move(lg.input);
    };
    g = std::visit(Overloaded{
                       [&](const Conv3DLayer<double>& l) { return take(conv3d_backward(l, cache, g)); },
                       [&](const Conv2DLayer<double>& l) { return take(conv2d_backward(l, cache, g)); },
                       [&](const LC2DLayer<double>& l) { return take(lc2d_backward(l, cache, g)); },
                       [&](const DenseLayer<double>& l) { return take(dense_backward(l, cache, g)); },
                       [&](const Reshape&) { return std::move(g).reshaped(trace.input_shapes[k]); },
                   },
                   layers[k]);
  }
  std::reverse(grads.begin(), grads.end());
  return grads;
}

namespace {

template <typename Out, typename Layers>
void collect_parameters(Layers& layers, std::vector<Out>& out) {
  for (auto& layer : layers) {
    std::visit(
        [&](auto& l) {
          if constexpr (!std::is_same_v<std::decay_t<decltype(l)>, Reshape>) {
            out.push_back(&l.weights);
            out.push_back(&l.bias);
          }
        },
        layer);
  }
}

}  // namespace

std::vector<Tensord*> ModelGraph::parameters() {
  std::vector<Tensord*> out;
  collect_parameters(layers, out);
  return out;
}

std::vector<const Tensord*> ModelGraph::parameters() const {
  std::vector<const Tensord*> out;
  collect_parameters(layers, out);
  return out;
}

Gradients ModelGraph::zero_gradients() const {
  Gradients g;
  for (const Tensord* p : parameters()) g.emplace_back(p->shape());
  return g;
}

Index ModelGraph::parameter_count() const {
  Index n = 0;
  for (const Tensord* p : parameters()) n += p->size();
  return n;
}

Index ModelGraph::layer_parameter_count(std::size_t k) const {
  return std::visit(Overloaded{
                        [](const Reshape&) { return Index{0}; },
                        [](const auto& l) { return l.weights.size() + l.bias.size(); },
                    },
                    layers.at(k));
}

std::vector<Shape> ModelGraph::activation_shapes() const {
  std::vector<Shape> shapes;
  Shape s = input_shape;
  auto channels_must_match = [](Index have, Index want, const char* who) {
    if (have != want)
      throw ShapeError(std::string(who) + ": incoming channels " + std::to_string(have) + " != " +
                       std::to_string(want));
  };
  for (const Layer& layer : layers) {
    s = std::visit(Overloaded{
                       [&](const Conv3DLayer<double>& l) -> Shape {
                         if (s.size() != 4) throw ShapeError("conv3d expects a rank-4 input");
                         channels_must_match(s[3], l.in_channels, "conv3d");
                         if (l.kernel_depth > s[2])
                           throw DepthError("conv3d kernel depth " + std::to_string(l.kernel_depth) +
                                            " exceeds incoming depth " + std::to_string(s[2]));
                         return {s[0], s[1], l.output_depth(s[2]), l.out_channels};
                       },
                       [&](const Conv2DLayer<double>& l) -> Shape {
                         if (s.size() != 3) throw ShapeError("conv2d expects a rank-3 input");
                         channels_must_match(s[2], l.in_channels, "conv2d");
                         return {s[0], s[1], l.out_channels};
                       },
                       [&](const LC2DLayer<double>& l) -> Shape {
                         if (s != Shape{l.rows, l.cols, l.in_channels}) throw ShapeError("lc2d input mismatch");
                         return {s[0], s[1], l.out_channels};
                       },
                       [&](const DenseLayer<double>& l) -> Shape {
                         if (shape_size(s) != l.fan_in()) throw ShapeError("dense fan-in mismatch");
                         return {l.out_features};
                       },
                       [&](const Reshape& r) -> Shape {
                         if (shape_size(s) != shape_size(r.target)) throw ShapeError("reshape size mismatch");
                         return r.target;
                       },
                   },
                   layer);
    shapes.push_back(s);
  }
  return shapes;
}

// ---------------------------------------------------------------------------

namespace {

void validate(const ModelConfig& c, bool temporal_chain) {
  if (c.rows < 1 || c.cols < 1) throw ConfigError("grid extents must be >= 1");
  if (c.recent < 1 || c.period_window < 1) throw ConfigError("recent and period windows must be >= 1");
  if (c.hidden_filters < 1 || c.lc_filters < 1 || c.dense_units < 1 || c.ann_hidden < 1)
    throw ConfigError("filter and unit counts must be >= 1");
  if (c.conv2d_layers < 0) throw ConfigError("conv2d_layers must be >= 0");
  if (c.depth_kernels.empty()) throw ConfigError("depth_kernels must not be empty");
  Index depth = c.input_depth();
  for (Index k : c.depth_kernels) {
    if (k < 1) throw ConfigError("depth kernels must be >= 1");
    depth = depth - k + 1;
  }
  if (temporal_chain && depth < 1)
    throw DepthError("input depth " + std::to_string(c.input_depth()) + " is too small for the temporal kernel chain");
}

/// The convolutional trunk shared by the 2D variants: one layer per 3D
/// kernel (so depth matches the fused model), then the standard 2D layers.
void add_2d_trunk(ModelGraph& m, const ModelConfig& c) {
  const Index f = c.hidden_filters;
  const Index n = static_cast<Index>(c.depth_kernels.size()) + c.conv2d_layers;
  for (Index k = 0; k < n; ++k) m.layers.emplace_back(Conv2DLayer<double>(k == 0 ? c.input_depth() : f, f));
}

}  // namespace

ModelGraph build_variant(Variant variant, const ModelConfig& c) {
  validate(c, variant == Variant::lc_st_fcn || variant == Variant::lc_st_fcn_diff);
  const Index rows = c.rows, cols = c.cols, f = c.hidden_filters;
  ModelGraph m;
  m.variant = variant;
  m.input_shape = {rows, cols, c.input_depth()};
  m.output_shape = {rows, cols};
  m.recent = c.recent;
  m.period_window = c.period_window;

  switch (variant) {
    case Variant::lc_st_fcn:
    case Variant::lc_st_fcn_diff: {
      m.layers.emplace_back(Reshape{{rows, cols, c.input_depth(), 1}});
      Index depth = c.input_depth();
      Index in = 1;
      for (Index k : c.depth_kernels) {
        m.layers.emplace_back(Conv3DLayer<double>(k, in, f));
        depth = depth - k + 1;
        in = f;
      }
      // Remaining depth (1 for the standard schedule) folds into channels.
      m.layers.emplace_back(Reshape{{rows, cols, depth * f}});
      for (Index k = 0; k < c.conv2d_layers; ++k) m.layers.emplace_back(Conv2DLayer<double>(k == 0 ? depth * f : f, f));
      const Index lc_in = c.conv2d_layers > 0 ? f : depth * f;
      m.layers.emplace_back(LC2DLayer<double>(rows, cols, lc_in, c.lc_filters));
      m.layers.emplace_back(LC2DLayer<double>(rows, cols, c.lc_filters, 1, Activation::linear));
      m.layers.emplace_back(Reshape{{rows, cols}});
      break;
    }
    case Variant::lc_fcn:
      add_2d_trunk(m, c);
      m.layers.emplace_back(LC2DLayer<double>(rows, cols, f, c.lc_filters));
      m.layers.emplace_back(LC2DLayer<double>(rows, cols, c.lc_filters, 1, Activation::linear));
      m.layers.emplace_back(Reshape{{rows, cols}});
      break;
    case Variant::fcn:
      add_2d_trunk(m, c);
      m.layers.emplace_back(Conv2DLayer<double>(f, c.lc_filters));
      m.layers.emplace_back(Conv2DLayer<double>(c.lc_filters, 1, Activation::linear));
      m.layers.emplace_back(Reshape{{rows, cols}});
      break;
    case Variant::cnn:
      add_2d_trunk(m, c);
      m.layers.emplace_back(Reshape{{rows * cols * f}});
      m.layers.emplace_back(DenseLayer<double>(rows * cols * f, c.dense_units));
      m.layers.emplace_back(DenseLayer<double>(c.dense_units, rows * cols, Activation::linear));
      m.layers.emplace_back(Reshape{{rows, cols}});
      break;
    case Variant::ann:
      m.input_shape = {1, 1, c.input_depth()};
      m.output_shape = {1, 1};
      m.layers.emplace_back(DenseLayer<double>(c.input_depth(), c.ann_hidden));
      m.layers.emplace_back(DenseLayer<double>(c.ann_hidden, 1, Activation::linear));
      m.layers.emplace_back(Reshape{{1, 1}});
      break;
  }

  m.activation_shapes();
  Rng rng(c.seed);
  for (Layer& layer : m.layers)
    std::visit(Overloaded{[](Reshape&) {}, [&](auto& l) { initialize(l, rng); }}, layer);
  return m;
}

ModelGraph build_variant(std::string_view name, const ModelConfig& config) {
  return build_variant(parse_variant(name), config);
}

// ---------------------------------------------------------------------------

std::string save_checkpoint(const ModelGraph& m) {
  ByteWriter w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.str(m.name());
  w.shape(m.input_shape);
  w.shape(m.output_shape);
  w.i64(m.recent);
  w.i64(m.period_window);
  w.i64(m.period_length);
  w.u32(static_cast<std::uint32_t>(m.layers.size()));
  for (const Layer& layer : m.layers) {
    std::visit(Overloaded{
                   [&](const Conv3DLayer<double>& l) {
                     w.u8(static_cast<std::uint8_t>(LayerKind::conv3d));
                     w.u8(static_cast<std::uint8_t>(l.activation));
                     w.i64(l.kernel_depth);
                     w.i64(l.in_channels);
                     w.i64(l.out_channels);
                   },
                   [&](const Conv2DLayer<double>& l) {
                     w.u8(static_cast<std::uint8_t>(LayerKind::conv2d));
                     w.u8(static_cast<std::uint8_t>(l.activation));
                     w.i64(l.in_channels);
                     w.i64(l.out_channels);
                   },
                   [&](const LC2DLayer<double>& l) {
                     w.u8(static_cast<std::uint8_t>(LayerKind::lc2d));
                     w.u8(static_cast<std::uint8_t>(l.activation));
                     w.i64(l.rows);
                     w.i64(l.cols);
                     w.i64(l.in_channels);
                     w.i64(l.out_channels);
                   },
                   [&](const DenseLayer<double>& l) {
                     w.u8(static_cast<std::uint8_t>(LayerKind::dense));
                     w.u8(static_cast<std::uint8_t>(l.activation));
                     w.i64(l.in_features);
                     w.i64(l.out_features);
                   },
                   [&](const Reshape& r) {
                     w.u8(static_cast<std::uint8_t>(LayerKind::reshape));
                     w.u8(0);
                     w.shape(r.target);
                   },
               },
               layer);
  }
  for (const Tensord* p : m.parameters()) w.doubles(*p);
  return w.take();
}

ModelGraph load_checkpoint(std::string_view bytes) {
  ByteReader r(bytes);
  char magic[sizeof kMagic];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw FormatError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  ModelGraph m;
  try {
    m.variant = parse_variant(r.str());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  m.input_shape = r.shape();
  m.output_shape = r.shape();
  m.recent = r.i64();
  m.period_window = r.i64();
  m.period_length = r.i64();
  const std::uint32_t n = r.u32();
  for (std::uint32_t k = 0; k < n; ++k) {
    const auto kind = static_cast<LayerKind>(r.u8());
    const std::uint8_t act_raw = r.u8();
    if (act_raw > 1) throw FormatError("checkpoint: bad activation tag");
    const auto act = static_cast<Activation>(act_raw);
    switch (kind) {
      case LayerKind::conv3d: {
        const Index d = r.dim(), in = r.dim(), out = r.dim();
        m.layers.emplace_back(Conv3DLayer<double>(d, in, out, act));
        break;
      }
      case LayerKind::conv2d: {
        const Index in = r.dim(), out = r.dim();
        m.layers.emplace_back(Conv2DLayer<double>(in, out, act));
        break;
      }
      case LayerKind::lc2d: {
        const Index rows = r.dim(), cols = r.dim(), in = r.dim(), out = r.dim();
        m.layers.emplace_back(LC2DLayer<double>(rows, cols, in, out, act));
        break;
      }
      case LayerKind::dense: {
        const Index in = r.dim(), out = r.dim();
        m.layers.emplace_back(DenseLayer<double>(in, out, act));
        break;
      }
      case LayerKind::reshape:
        m.layers.emplace_back(Reshape{r.shape()});
        break;
      default:
        throw FormatError("checkpoint: unknown layer kind");
    }
  }
  for (Tensord* p : m.parameters()) r.doubles(*p);
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes");
  try {
    m.activation_shapes();
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint: inconsistent layer stack: ") + e.what());
  }
  return m;
}

std::uint64_t parameter_checksum(const ModelGraph& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Tensord* p : model.parameters()) {
    for (Index k = 0; k < p->size(); ++k) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>((*p)[k]);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffU;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

}  // namespace stfcn
