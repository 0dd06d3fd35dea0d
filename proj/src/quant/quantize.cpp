#include "retina/quant/quantize.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

#include "../nn/gemm.hpp"
#include "retina/nn/model_io.hpp"
#include "retina/nn/optim.hpp"

namespace retina::quant {

const char* to_string(QuantErrc code) {
  switch (code) {
    case QuantErrc::EmptyCalibration: return "EmptyCalibration";
    case QuantErrc::MissingParams: return "MissingParams";
    case QuantErrc::ShapeMismatch: return "ShapeMismatch";
    case QuantErrc::AccumulatorOverflow: return "AccumulatorOverflow";
    case QuantErrc::Unsupported: return "Unsupported";
    case QuantErrc::FormatError: return "FormatError";
    case QuantErrc::IoError: return "IoError";
  }
  return "?";
}

ActivationParams activation_params(float min, float max) {
  ActivationParams p;
  p.min = min;
  p.max = max;
  p.degenerate = min == max;
  const double lo = std::min(0.0, static_cast<double>(min));
  const double hi = std::max(0.0, static_cast<double>(max));
  p.scale = std::max((hi - lo) / 255.0, kMinScale);
  p.zero_point = static_cast<int>(std::clamp<long>(round_half_even(-lo / p.scale), 0, 255));
  return p;
}

std::vector<double> weight_scales(std::span<const float> w, int channels) {
  std::vector<double> s(static_cast<std::size_t>(channels));
  const std::size_t per = channels > 0 ? w.size() / static_cast<std::size_t>(channels) : 0;
  for (std::size_t c = 0; c < s.size(); ++c) {
    double m = 0.0;
    for (std::size_t i = 0; i < per; ++i) m = std::max(m, std::abs(static_cast<double>(w[c * per + i])));
    s[c] = std::max(m / 127.0, kMinScale);
  }
  return s;
}

std::uint8_t quantize_activation(float x, const ActivationParams& p) {
  const long q = round_half_even(static_cast<double>(x) / p.scale) + p.zero_point;
  return static_cast<std::uint8_t>(std::clamp<long>(q, 0, 255));
}

double dequantize_activation(std::uint8_t q, const ActivationParams& p) {
  return p.scale * (static_cast<int>(q) - p.zero_point);
}

std::int8_t quantize_weight(float w, double scale) {
  return static_cast<std::int8_t>(std::clamp<long>(round_half_even(static_cast<double>(w) / scale), -127, 127));
}

namespace {

using nn::LayerKind;
using nn::LayerSpec;
using nn::Tensor;
using nn::Tensor4;
using Codes = Tensor<std::uint8_t>;

int window_out(int size, int k, int stride, int pad) { return (size + 2 * pad - k) / stride + 1; }

struct Builder {
  const nn::ModelParams* params = nullptr;  // null: structure only
  std::size_t slot = 0;
  int edges = 1;

  const std::vector<float>& tensor(std::size_t i) const { return params->tensors[i].data; }

  std::vector<QNode> build(const std::vector<LayerSpec>& layers, int edge) {
    std::vector<QNode> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      QNode node;
      node.spec = l;
      node.spec.branch.clear();
      node.spec.shortcut.clear();
      node.in_edge = node.out_edge = edge;
      auto next_is = [&](LayerKind k) { return i + 1 < layers.size() && layers[i + 1].kind == k; };
      switch (l.kind) {
        case LayerKind::Conv2d:
        case LayerKind::Dense: {
          node.kind = l.kind == LayerKind::Conv2d ? QNode::Kind::Conv : QNode::Kind::Dense;
          const bool has_bias = l.kind == LayerKind::Dense || l.bias;
          if (params) {
            node.weight = tensor(slot);
            node.bias = has_bias ? tensor(slot + 1) : std::vector<float>(static_cast<std::size_t>(l.c_out), 0.0f);
          }
          slot += nn::tensor_count(l);
          if (next_is(LayerKind::BatchNorm)) {
            if (params) fold_batch_norm(node, slot);
            slot += nn::tensor_count(layers[i + 1]);
            ++i;
          }
          node.spec.bias = true;
          if (next_is(LayerKind::ReLU)) {
            node.relu = true;
            ++i;
          }
          node.out_edge = edge = edges++;
          break;
        }
        case LayerKind::ResidualAdd: {
          node.kind = QNode::Kind::Residual;
          node.branch = build(l.branch, edge);
          node.shortcut = build(l.shortcut, edge);
          if (next_is(LayerKind::ReLU)) {
            node.relu = true;
            ++i;
          }
          node.out_edge = edge = edges++;
          break;
        }
        case LayerKind::ReLU: node.kind = QNode::Kind::ReLU; break;
        case LayerKind::MaxPool: node.kind = QNode::Kind::MaxPool; break;
        case LayerKind::GlobalAvgPool: node.kind = QNode::Kind::GlobalAvgPool; break;
        case LayerKind::Softmax: node.kind = QNode::Kind::Softmax; break;
        case LayerKind::BatchNorm:
          throw QuantError(QuantErrc::Unsupported, "BatchNorm must follow a conv or dense layer to be folded");
      }
      out.push_back(std::move(node));
    }
    return out;
  }

  // y = gamma * (Wx + b - mean) / sqrt(var + eps) + beta
  void fold_batch_norm(QNode& node, std::size_t bn) const {
    const auto& gamma = tensor(bn);
    const auto& beta = tensor(bn + 1);
    const auto& mean = tensor(bn + 2);
    const auto& var = tensor(bn + 3);
    const std::size_t per = node.weight.size() / gamma.size();
    for (std::size_t c = 0; c < gamma.size(); ++c) {
      const double f = gamma[c] / std::sqrt(static_cast<double>(var[c]) + nn::kBatchNormEps);
      for (std::size_t i = 0; i < per; ++i) node.weight[c * per + i] = static_cast<float>(node.weight[c * per + i] * f);
      node.bias[c] = static_cast<float>((node.bias[c] - mean[c]) * f + beta[c]);
    }
  }
};

int output_edge(const std::vector<QNode>& nodes, int in_edge) { return nodes.empty() ? in_edge : nodes.back().out_edge; }

// ---- folded float reference ----------------------------------------------

struct Range {
  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  void add(const std::vector<float>& v) {
    for (float x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
};

Tensor4 float_linear(const QNode& n, const Tensor4& x) {
  const auto& l = n.spec;
  Tensor4 y;
  if (n.kind == QNode::Kind::Dense) {
    y = Tensor4(x.n, l.c_out, 1, 1);
    for (int s = 0; s < x.n; ++s)
      for (int o = 0; o < l.c_out; ++o) {
        double acc = n.bias[static_cast<std::size_t>(o)];
        const float* row = n.weight.data() + static_cast<std::size_t>(o) * l.c_in;
        for (int i = 0; i < l.c_in; ++i) acc += static_cast<double>(row[i]) * x.sample(s)[i];
        y.sample(s)[o] = static_cast<float>(acc);
      }
  } else {
    const int Ho = window_out(x.h, l.k, l.stride, l.pad), Wo = window_out(x.w, l.k, l.stride, l.pad);
    const int K = l.c_in * l.k * l.k, N = Ho * Wo;
    y = Tensor4(x.n, l.c_out, Ho, Wo);
    std::vector<float> col(static_cast<std::size_t>(K) * N);
    for (int s = 0; s < x.n; ++s) {
      float* out = y.sample(s);
      for (int c = 0; c < l.c_out; ++c)
        std::fill(out + static_cast<std::size_t>(c) * N, out + static_cast<std::size_t>(c + 1) * N,
                  n.bias[static_cast<std::size_t>(c)]);
      nn::detail::im2col(x.sample(s), x.c, x.h, x.w, l.k, l.stride, l.pad, Ho, Wo, col.data());
      nn::detail::gemm_nn(l.c_out, N, K, n.weight.data(), col.data(), out);
    }
  }
  if (n.relu)
    for (auto& v : y.data) v = std::max(v, 0.0f);
  return y;
}

Tensor4 float_max_pool(const LayerSpec& l, const Tensor4& x) {
  const int Ho = window_out(x.h, l.k, l.stride, l.pad), Wo = window_out(x.w, l.k, l.stride, l.pad);
  Tensor4 y(x.n, x.c, Ho, Wo);
  std::size_t o = 0;
  for (int s = 0; s < x.n; ++s)
    for (int c = 0; c < x.c; ++c) {
      const float* plane = x.data.data() + x.index(s, c, 0, 0);
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox, ++o) {
          float best = -std::numeric_limits<float>::infinity();
          for (int ky = 0; ky < l.k; ++ky) {
            const int iy = oy * l.stride - l.pad + ky;
            if (iy < 0 || iy >= x.h) continue;
            for (int kx = 0; kx < l.k; ++kx) {
              const int ix = ox * l.stride - l.pad + kx;
              if (ix >= 0 && ix < x.w) best = std::max(best, plane[iy * x.w + ix]);
            }
          }
          y.data[o] = best;
        }
    }
  return y;
}

Tensor4 float_gap(const Tensor4& x) {
  Tensor4 y(x.n, x.c, 1, 1);
  const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
  for (int s = 0; s < x.n; ++s)
    for (int c = 0; c < x.c; ++c) {
      const float* plane = x.data.data() + x.index(s, c, 0, 0);
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) acc += plane[i];
      y.at(s, c, 0, 0) = static_cast<float>(acc / static_cast<double>(hw));
    }
  return y;
}

void float_softmax(Tensor4& x) {
  for (int s = 0; s < x.n; ++s) {
    float* v = x.sample(s);
    const auto p = nn::softmax(std::span<const float>(v, x.sample_size()));
    for (std::size_t i = 0; i < p.size(); ++i) v[i] = static_cast<float>(p[i]);
  }
}

Tensor4 float_run(const std::vector<QNode>& nodes, Tensor4 x, std::vector<Range>* ranges,
                  std::vector<std::vector<float>>* values = nullptr) {
  for (const auto& n : nodes) {
    switch (n.kind) {
      case QNode::Kind::Conv:
      case QNode::Kind::Dense: x = float_linear(n, x); break;
      case QNode::Kind::ReLU:
        for (auto& v : x.data) v = std::max(v, 0.0f);
        break;
      case QNode::Kind::MaxPool: x = float_max_pool(n.spec, x); break;
      case QNode::Kind::GlobalAvgPool: x = float_gap(x); break;
      case QNode::Kind::Softmax: float_softmax(x); break;
      case QNode::Kind::Residual: {
        auto a = float_run(n.branch, x, ranges, values);
        const auto b = float_run(n.shortcut, x, ranges, values);
        for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
        if (n.relu)
          for (auto& v : a.data) v = std::max(v, 0.0f);
        x = std::move(a);
        break;
      }
    }
    if (ranges && n.out_edge != n.in_edge) (*ranges)[static_cast<std::size_t>(n.out_edge)].add(x.data);
    if (values && n.out_edge != n.in_edge) {
      auto& v = (*values)[static_cast<std::size_t>(n.out_edge)];
      v.insert(v.end(), x.data.begin(), x.data.end());
    }
  }
  return x;
}

// ---- integer engine ---------------------------------------------------------

constexpr std::int64_t kAccMax = std::numeric_limits<std::int32_t>::max();

void check_accumulator(const QNode& n) {
  const std::int64_t K = static_cast<std::int64_t>(n.spec.c_in) * (n.kind == QNode::Kind::Conv ? n.spec.k * n.spec.k : 1);
  std::int64_t bias = 0;
  for (auto b : n.qbias) bias = std::max<std::int64_t>(bias, std::abs(static_cast<std::int64_t>(b)));
  if (K * 255 * 127 + bias > kAccMax)
    throw QuantError(QuantErrc::AccumulatorOverflow,
                     std::string(nn::to_string(n.spec.kind)) + " layer could exceed the 32-bit accumulator");
}

struct Engine {
  const QuantParams& qp;

  const ActivationParams& edge(int e) const { return qp.edges[static_cast<std::size_t>(e)]; }

  // 32-bit accumulators (bias included) of a Conv/Dense node, laid out
  // [n][c_out][Ho*Wo].
  std::vector<std::int32_t> accumulate(const QNode& n, const Codes& x, int& Ho, int& Wo) const {
    const auto& l = n.spec;
    const int zp = edge(n.in_edge).zero_point;
    int K, N;
    if (n.kind == QNode::Kind::Dense) {
      Ho = Wo = 1;
      K = l.c_in;
      N = 1;
    } else {
      Ho = window_out(x.h, l.k, l.stride, l.pad);
      Wo = window_out(x.w, l.k, l.stride, l.pad);
      K = l.c_in * l.k * l.k;
      N = Ho * Wo;
    }
    const std::vector<std::int16_t> w(n.qweight.begin(), n.qweight.end());
    std::vector<std::int32_t> acc(static_cast<std::size_t>(x.n) * l.c_out * N);
    std::vector<std::int16_t> centered(x.sample_size());
    std::vector<std::int16_t> col(n.kind == QNode::Kind::Dense ? 0 : static_cast<std::size_t>(K) * N);
    for (int s = 0; s < x.n; ++s) {
      const std::uint8_t* src = x.sample(s);
      for (std::size_t i = 0; i < centered.size(); ++i) centered[i] = static_cast<std::int16_t>(src[i] - zp);
      std::int32_t* out = acc.data() + static_cast<std::size_t>(s) * l.c_out * N;
      for (int c = 0; c < l.c_out; ++c)
        std::fill(out + static_cast<std::size_t>(c) * N, out + static_cast<std::size_t>(c + 1) * N,
                  n.qbias[static_cast<std::size_t>(c)]);
      const std::int16_t* b = centered.data();
      if (n.kind == QNode::Kind::Conv) {
        nn::detail::im2col(centered.data(), x.c, x.h, x.w, l.k, l.stride, l.pad, Ho, Wo, col.data());
        b = col.data();
      }
      nn::detail::gemm_nn<std::int16_t, std::int32_t>(l.c_out, N, K, w.data(), b, out);
    }
    return acc;
  }

  Codes linear(const QNode& n, const Codes& x) const {
    int Ho, Wo;
    const auto acc = accumulate(n, x, Ho, Wo);
    const auto& in = edge(n.in_edge);
    const auto& out = edge(n.out_edge);
    const long lo = n.relu ? out.zero_point : 0;
    Codes y(x.n, n.spec.c_out, Ho, Wo);
    const std::size_t N = static_cast<std::size_t>(Ho) * Wo;
    for (int c = 0; c < n.spec.c_out; ++c) {
      const double m = in.scale * n.wscale[static_cast<std::size_t>(c)] / out.scale;
      for (int s = 0; s < x.n; ++s) {
        const std::size_t base = (static_cast<std::size_t>(s) * n.spec.c_out + c) * N;
        for (std::size_t j = 0; j < N; ++j)
          y.data[base + j] = static_cast<std::uint8_t>(
              std::clamp<long>(out.zero_point + round_half_even(acc[base + j] * m), lo, 255));
      }
    }
    return y;
  }

  Tensor4 linear_float(const QNode& n, const Codes& x) const {
    int Ho, Wo;
    const auto acc = accumulate(n, x, Ho, Wo);
    const auto& in = edge(n.in_edge);
    Tensor4 y(x.n, n.spec.c_out, Ho, Wo);
    const std::size_t N = static_cast<std::size_t>(Ho) * Wo;
    for (std::size_t i = 0; i < acc.size(); ++i) {
      const auto c = (i / N) % static_cast<std::size_t>(n.spec.c_out);
      double v = acc[i] * in.scale * n.wscale[c];
      if (n.relu) v = std::max(v, 0.0);
      y.data[i] = static_cast<float>(v);
    }
    return y;
  }

  static Codes max_pool(const LayerSpec& l, const Codes& x) {
    const int Ho = window_out(x.h, l.k, l.stride, l.pad), Wo = window_out(x.w, l.k, l.stride, l.pad);
    Codes y(x.n, x.c, Ho, Wo);
    std::size_t o = 0;
    for (int s = 0; s < x.n; ++s)
      for (int c = 0; c < x.c; ++c) {
        const std::uint8_t* plane = x.data.data() + x.index(s, c, 0, 0);
        for (int oy = 0; oy < Ho; ++oy)
          for (int ox = 0; ox < Wo; ++ox, ++o) {
            int best = 0;
            for (int ky = 0; ky < l.k; ++ky) {
              const int iy = oy * l.stride - l.pad + ky;
              if (iy < 0 || iy >= x.h) continue;
              for (int kx = 0; kx < l.k; ++kx) {
                const int ix = ox * l.stride - l.pad + kx;
                if (ix >= 0 && ix < x.w) best = std::max<int>(best, plane[iy * x.w + ix]);
              }
            }
            y.data[o] = static_cast<std::uint8_t>(best);
          }
      }
    return y;
  }

  static Codes gap(const Codes& x) {
    Codes y(x.n, x.c, 1, 1);
    const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
    for (int s = 0; s < x.n; ++s)
      for (int c = 0; c < x.c; ++c) {
        const std::uint8_t* plane = x.data.data() + x.index(s, c, 0, 0);
        std::int64_t sum = 0;
        for (std::size_t i = 0; i < hw; ++i) sum += plane[i];
        y.at(s, c, 0, 0) = static_cast<std::uint8_t>(round_half_even(static_cast<double>(sum) / static_cast<double>(hw)));
      }
    return y;
  }

  Codes residual(const QNode& n, const Codes& x) const {
    const auto a = run(n.branch, x);
    const auto b = run(n.shortcut, x);
    const auto& pa = edge(output_edge(n.branch, n.in_edge));
    const auto& pb = edge(output_edge(n.shortcut, n.in_edge));
    const auto& out = edge(n.out_edge);
    const double ma = pa.scale / out.scale, mb = pb.scale / out.scale;
    const long lo = n.relu ? out.zero_point : 0;
    Codes y(a.n, a.c, a.h, a.w);
    for (std::size_t i = 0; i < y.data.size(); ++i) {
      const double v = ma * (a.data[i] - pa.zero_point) + mb * (b.data[i] - pb.zero_point);
      y.data[i] = static_cast<std::uint8_t>(std::clamp<long>(out.zero_point + round_half_even(v), lo, 255));
    }
    return y;
  }

  Codes step(const QNode& n, Codes x) const {
    switch (n.kind) {
      case QNode::Kind::Conv:
      case QNode::Kind::Dense: return linear(n, x);
      case QNode::Kind::ReLU: {
        const auto zp = static_cast<std::uint8_t>(edge(n.in_edge).zero_point);
        for (auto& q : x.data) q = std::max(q, zp);
        return x;
      }
      case QNode::Kind::MaxPool: return max_pool(n.spec, x);
      case QNode::Kind::GlobalAvgPool: return gap(x);
      case QNode::Kind::Residual: return residual(n, x);
      case QNode::Kind::Softmax: break;
    }
    throw QuantError(QuantErrc::Unsupported, "softmax inside the integer graph");
  }

  Codes run(const std::vector<QNode>& nodes, Codes x) const {
    for (const auto& n : nodes) x = step(n, std::move(x));
    return x;
  }
};

void check_input(const nn::ModelConfig& config, const Tensor4& x) {
  if (x.n < 1 || !(x.sample_shape() == config.input) ||
      x.data.size() != static_cast<std::size_t>(x.n) * x.sample_size())
    throw QuantError(QuantErrc::ShapeMismatch,
                     "input " + nn::to_string(x.sample_shape()) + " does not match model input " +
                         nn::to_string(config.input));
  for (float v : x.data)
    if (!std::isfinite(v)) throw QuantError(QuantErrc::ShapeMismatch, "input contains a non-finite value");
}

template <class F>
void for_each_linear(std::vector<QNode>& nodes, F&& f) {
  for (auto& n : nodes) {
    if (n.kind == QNode::Kind::Conv || n.kind == QNode::Kind::Dense) f(n);
    for_each_linear(n.branch, f);
    for_each_linear(n.shortcut, f);
  }
}

template <class F>
void for_each_linear(const std::vector<QNode>& nodes, F&& f) {
  for (const auto& n : nodes) {
    if (n.kind == QNode::Kind::Conv || n.kind == QNode::Kind::Dense) f(n);
    for_each_linear(n.branch, f);
    for_each_linear(n.shortcut, f);
  }
}

std::vector<QNode> structure(const nn::ModelConfig& config, int& edges) {
  Builder b;
  auto g = b.build(config.layers, 0);
  edges = b.edges;
  return g;
}

}  // namespace

std::vector<QNode> build_graph(const nn::ModelConfig& config, const nn::ModelParams& params, int* edge_count) {
  try {
    nn::check_params(config.layers, params);
  } catch (const nn::NnError& e) {
    throw QuantError(QuantErrc::MissingParams, e.what());
  }
  Builder b;
  b.params = &params;
  auto g = b.build(config.layers, 0);
  if (edge_count) *edge_count = b.edges;
  return g;
}

Tensor4 folded_forward(const std::vector<QNode>& graph, const Tensor4& x) { return float_run(graph, x, nullptr); }

std::vector<std::vector<float>> edge_activations(const nn::ModelConfig& config, const nn::ModelParams& params,
                                                 const Tensor4& x) {
  check_input(config, x);
  int edges = 0;
  const auto graph = build_graph(config, params, &edges);
  std::vector<std::vector<float>> values(static_cast<std::size_t>(edges));
  values[0] = x.data;
  float_run(graph, x, nullptr, &values);
  return values;
}

QuantParams calibrate(const nn::ModelConfig& config, const nn::ModelParams& params, std::span<const Tensor4> batches) {
  if (batches.empty()) throw QuantError(QuantErrc::EmptyCalibration, "no calibration batches");
  int edges = 0;
  const auto graph = build_graph(config, params, &edges);
  std::vector<Range> ranges(static_cast<std::size_t>(edges));
  for (const auto& x : batches) {
    check_input(config, x);
    ranges[0].add(x.data);
    float_run(graph, x, &ranges);
  }
  QuantParams qp;
  for (const auto& r : ranges) qp.edges.push_back(activation_params(r.lo, r.hi));
  return qp;
}

QuantizedModel quantize(const nn::ModelConfig& config, const nn::ModelParams& params, const QuantParams& qparams) {
  QuantizedModel m;
  m.config = config;
  int edges = 0;
  m.graph = build_graph(config, params, &edges);
  if (qparams.edges.size() != static_cast<std::size_t>(edges))
    throw QuantError(QuantErrc::MissingParams, "quantization parameters cover " + std::to_string(qparams.edges.size()) +
                                                   " of " + std::to_string(edges) + " activation edges");
  m.qparams = qparams;
  for_each_linear(m.graph, [&](QNode& n) {
    n.wscale = weight_scales(n.weight, n.spec.c_out);
    const std::size_t per = n.weight.size() / static_cast<std::size_t>(n.spec.c_out);
    n.qweight.resize(n.weight.size());
    for (std::size_t i = 0; i < n.weight.size(); ++i) n.qweight[i] = quantize_weight(n.weight[i], n.wscale[i / per]);
    const double s_in = qparams.edges[static_cast<std::size_t>(n.in_edge)].scale;
    n.qbias.resize(n.bias.size());
    for (std::size_t c = 0; c < n.bias.size(); ++c) {
      const double q = std::nearbyint(n.bias[c] / (s_in * n.wscale[c]));
      if (!(std::abs(q) <= static_cast<double>(kAccMax)))
        throw QuantError(QuantErrc::AccumulatorOverflow, "bias does not fit the 32-bit accumulator scale");
      n.qbias[c] = static_cast<std::int32_t>(q);
    }
    check_accumulator(n);
    n.weight.clear();
    n.bias.clear();
  });
  return m;
}

QResult qforward(const QuantizedModel& model, const Tensor4& x) {
  check_input(model.config, x);
  const Engine engine{model.qparams};
  const auto& in = model.qparams.edges.at(0);
  Codes codes(x.n, x.c, x.h, x.w);
  for (std::size_t i = 0; i < x.data.size(); ++i) codes.data[i] = quantize_activation(x.data[i], in);

  // Everything up to the last Conv/Dense/Residual runs on codes; a final
  // Conv/Dense yields float logits straight from its accumulators.
  const auto& g = model.graph;
  std::size_t tail = g.size();
  while (tail > 0 && g[tail - 1].kind == QNode::Kind::Softmax) --tail;
  const bool float_head = tail > 0 && (g[tail - 1].kind == QNode::Kind::Conv || g[tail - 1].kind == QNode::Kind::Dense);
  const std::size_t int_end = float_head ? tail - 1 : tail;
  int edge = 0;
  for (std::size_t i = 0; i < int_end; ++i) {
    codes = engine.step(g[i], std::move(codes));
    edge = g[i].out_edge;
  }
  QResult r;
  if (float_head) {
    r.logits = engine.linear_float(g[int_end], codes);
  } else {
    r.logits = Tensor4(codes.n, codes.c, codes.h, codes.w);
    for (std::size_t i = 0; i < codes.data.size(); ++i)
      r.logits.data[i] = static_cast<float>(dequantize_activation(codes.data[i], model.qparams.edges[static_cast<std::size_t>(edge)]));
  }
  for (std::size_t i = tail; i < g.size(); ++i) float_softmax(r.logits);
  r.predictions = nn::predict(r.logits);
  return r;
}

// ---- serialization ----------------------------------------------------------

namespace {

constexpr std::uint8_t kInt8 = 1, kInt32 = 2;

void write_tensor_header(ByteWriter& w, std::uint8_t dtype, const std::vector<int>& dims,
                         const std::vector<double>& scales) {
  w.u8(dtype);
  w.u32(static_cast<std::uint32_t>(dims.size()));
  for (int d : dims) w.u32(static_cast<std::uint32_t>(d));
  w.u32(static_cast<std::uint32_t>(scales.size()));
  for (double s : scales) w.f64(s);
  w.i32(0);
}

std::vector<int> weight_dims(const QNode& n) {
  if (n.kind == QNode::Kind::Dense) return {n.spec.c_out, n.spec.c_in};
  return {n.spec.c_out, n.spec.c_in, n.spec.k, n.spec.k};
}

std::vector<double> bias_scales(const QNode& n, const QuantParams& qp) {
  std::vector<double> s(n.wscale);
  for (auto& v : s) v *= qp.edges[static_cast<std::size_t>(n.in_edge)].scale;
  return s;
}

}  // namespace

Bytes serialize_quantized(const QuantizedModel& model) {
  ByteWriter w;
  w.raw(std::string_view(kQuantMagic, sizeof kQuantMagic));
  w.u64(nn::config_hash(model.config));
  w.u32(static_cast<std::uint32_t>(model.qparams.edges.size()));
  for (const auto& e : model.qparams.edges) {
    w.f64(e.scale);
    w.u8(static_cast<std::uint8_t>(e.zero_point));
    w.f32(e.min);
    w.f32(e.max);
  }
  std::size_t tensors = 0;
  for_each_linear(model.graph, [&](const QNode&) { tensors += 2; });
  w.u32(static_cast<std::uint32_t>(tensors));
  for_each_linear(model.graph, [&](const QNode& n) {
    write_tensor_header(w, kInt8, weight_dims(n), n.wscale);
    w.raw(std::span(reinterpret_cast<const std::uint8_t*>(n.qweight.data()), n.qweight.size()));
    write_tensor_header(w, kInt32, {n.spec.c_out}, bias_scales(n, model.qparams));
    for (auto b : n.qbias) w.i32(b);
  });
  return std::move(w).take();
}

QuantizedModel deserialize_quantized(const nn::ModelConfig& config, std::span<const std::uint8_t> bytes) {
  auto fail = [](const std::string& what) { return QuantError(QuantErrc::FormatError, "RCNQ1: " + what); };
  QuantizedModel m;
  m.config = config;
  int edges = 0;
  m.graph = structure(config, edges);
  try {
    ByteReader r(bytes);
    if (std::memcmp(r.take(sizeof kQuantMagic).data(), kQuantMagic, sizeof kQuantMagic) != 0) throw fail("bad magic");
    if (r.u64() != nn::config_hash(config)) throw fail("config hash mismatch");
    if (r.u32() != static_cast<std::uint32_t>(edges)) throw fail("edge count mismatch");
    for (int i = 0; i < edges; ++i) {
      ActivationParams p;
      p.scale = r.f64();
      p.zero_point = r.u8();
      p.min = r.f32();
      p.max = r.f32();
      p.degenerate = p.min == p.max;
      if (!(p.scale > 0.0)) throw fail("non-positive scale");
      m.qparams.edges.push_back(p);
    }
    std::size_t tensors = 0;
    for_each_linear(m.graph, [&](const QNode&) { tensors += 2; });
    if (r.u32() != tensors) throw fail("tensor count mismatch");
    auto read_header = [&](std::uint8_t dtype, const std::vector<int>& dims) {
      if (r.u8() != dtype) throw fail("dtype mismatch");
      if (r.u32() != dims.size()) throw fail("rank mismatch");
      for (int d : dims)
        if (r.u32() != static_cast<std::uint32_t>(d)) throw fail("shape mismatch");
      if (r.u32() != static_cast<std::uint32_t>(dims[0])) throw fail("scale count mismatch");
      std::vector<double> scales(static_cast<std::size_t>(dims[0]));
      for (auto& s : scales) {
        s = r.f64();
        if (!(s > 0.0)) throw fail("non-positive scale");
      }
      if (r.i32() != 0) throw fail("nonzero weight zero point");
      return scales;
    };
    for_each_linear(m.graph, [&](QNode& n) {
      const auto dims = weight_dims(n);
      n.wscale = read_header(kInt8, dims);
      const auto payload = r.take(static_cast<std::size_t>(dims[0]) * dims[1] * (dims.size() == 4 ? dims[2] * dims[3] : 1));
      n.qweight.resize(payload.size());
      std::memcpy(n.qweight.data(), payload.data(), payload.size());
      read_header(kInt32, {n.spec.c_out});
      n.qbias.resize(static_cast<std::size_t>(n.spec.c_out));
      for (auto& b : n.qbias) b = r.i32();
      check_accumulator(n);
    });
    if (r.remaining() != 0) throw fail("trailing bytes");
  } catch (const std::out_of_range&) {
    throw fail("truncated");
  }
  return m;
}

void save_quantized(const std::filesystem::path& path, const QuantizedModel& model) {
  const auto bytes = serialize_quantized(model);
  try {
    write_file(path, bytes);
    write_file(nn::config_path(path), nn::canonical_json(model.config));
  } catch (const std::exception& e) {
    throw QuantError(QuantErrc::IoError, e.what());
  }
}

QuantizedModel load_quantized(const std::filesystem::path& path) {
  Bytes bytes, cfg;
  try {
    bytes = read_file(path);
    cfg = read_file(nn::config_path(path));
  } catch (const std::exception& e) {
    throw QuantError(QuantErrc::IoError, e.what());
  }
  nn::ModelConfig config;
  try {
    config = nn::config_from_json(nlohmann::json::parse(cfg.begin(), cfg.end()));
  } catch (const std::exception& e) {
    throw QuantError(QuantErrc::FormatError, std::string("model config: ") + e.what());
  }
  return deserialize_quantized(config, bytes);
}

std::size_t model_size(const nn::ModelConfig& config, const nn::ModelParams& params) {
  return nn::serialize_model(config, params).size();
}

std::size_t model_size(const QuantizedModel& model) { return serialize_quantized(model).size(); }

nlohmann::json to_json(const QuantParams& qp) {
  auto edges = nlohmann::json::array();
  for (const auto& e : qp.edges)
    edges.push_back({{"scale", e.scale}, {"zero_point", e.zero_point}, {"min", e.min}, {"max", e.max},
                     {"degenerate", e.degenerate}});
  return {{"edges", edges}};
}

}  // namespace retina::quant
