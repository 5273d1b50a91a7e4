#include <algorithm>

#include "hmad/fusion.hpp"

namespace hmad {

namespace {

LinearLayer zeros_like(const LinearLayer& l) {
  return {Tensor(l.weight.shape()), Tensor(l.bias.shape())};
}

void accumulate(Tensor& into, const Tensor& g) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
}

void accumulate(Tensor& into, std::span<const double> g) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
}

Vector sigmoid_backward(std::span<const double> gates, std::span<const double> grad) {
  Vector out(gates.size());
  for (std::size_t i = 0; i < gates.size(); ++i) out[i] = grad[i] * gates[i] * (1.0 - gates[i]);
  return out;
}

// Sum over spatial sites of a*b per channel.
Vector channel_inner(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.height() * a.width();
  Vector out(a.channels(), 0.0);
  for (std::size_t c = 0; c < a.channels(); ++c) {
    out[c] = dot(a.data().subspan(c * n, n), b.data().subspan(c * n, n));
  }
  return out;
}

// Sum over channels of a*b per site, as a (1, H, W) map.
Tensor site_inner(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.height() * a.width();
  Tensor out({1, a.height(), a.width()});
  for (std::size_t c = 0; c < a.channels(); ++c) {
    for (std::size_t i = 0; i < n; ++i) out[i] += a[c * n + i] * b[c * n + i];
  }
  return out;
}

}  // namespace

ChannelAttnGrads channel_attention_backward(const Tensor& features, const ChannelAttnParams& p,
                                            std::span<const double> grad_gates) {
  const Vector gates = channel_attention(features, p);
  if (grad_gates.size() != gates.size()) {
    throw ShapeError("channel_attention_backward: gradient length mismatch");
  }
  const Vector dlogits = sigmoid_backward(gates, grad_gates);

  ChannelAttnGrads g{Tensor(features.shape()),
                     {zeros_like(p.hidden), zeros_like(p.output)}};
  for (auto mode : {PoolMode::avg, PoolMode::max}) {
    const Vector pooled = pool_global(features, mode);
    const Vector pre = p.hidden.forward(pooled);
    const Vector act = relu(pre);

    const auto out_g = linear_backward(act, p.output.weight, dlogits);
    accumulate(g.params.output.weight, out_g.weights);
    accumulate(g.params.output.bias, out_g.bias);

    Vector dpre = out_g.input;
    for (std::size_t i = 0; i < dpre.size(); ++i) {
      if (pre[i] <= 0.0) dpre[i] = 0.0;
    }
    const auto hid_g = linear_backward(pooled, p.hidden.weight, dpre);
    accumulate(g.params.hidden.weight, hid_g.weights);
    accumulate(g.params.hidden.bias, hid_g.bias);
    accumulate(g.input, pool_global_backward(features, mode, hid_g.input));
  }
  return g;
}

SpatialAttnGrads spatial_attention_backward(const Tensor& features, const SpatialAttnParams& p,
                                            const Tensor& grad_map) {
  const Tensor avg = pool_spatial(features, PoolMode::avg);
  const Tensor mx = pool_spatial(features, PoolMode::max);
  const Tensor pooled = concat_channels(avg, mx);
  const Tensor gate = sigmoid(p.conv.forward(pooled));
  require_same_shape(gate, grad_map, "spatial_attention_backward");

  const Tensor dlogits(gate.shape(), sigmoid_backward(gate.data(), grad_map.data()));
  const auto conv_g =
      conv2d_backward(pooled, p.conv.weight, p.conv.stride, p.conv.padding, dlogits);

  const std::size_t n = features.height() * features.width();
  const Tensor davg({1, features.height(), features.width()},
                    Vector(conv_g.input.data().begin(), conv_g.input.data().begin() + n));
  const Tensor dmax({1, features.height(), features.width()},
                    Vector(conv_g.input.data().begin() + n, conv_g.input.data().end()));

  SpatialAttnGrads g;
  g.input = add(pool_spatial_backward(features, PoolMode::avg, davg),
                pool_spatial_backward(features, PoolMode::max, dmax));
  g.params.conv = {conv_g.kernels, Tensor::from_vector(conv_g.bias), p.conv.stride,
                   p.conv.padding};
  return g;
}

CbamGrads cbam_backward(const Tensor& features, const CbamParams& p, const Tensor& grad_output) {
  const Vector channel_gates = channel_attention(features, p.channel);
  const Tensor refined = broadcast_mul(features, channel_gates);
  const Tensor spatial_gate = spatial_attention(refined, p.spatial);
  require_same_shape(features, grad_output, "cbam_backward");

  // out = refined * spatial_gate(refined)
  const auto sp = spatial_attention_backward(refined, p.spatial,
                                             site_inner(grad_output, refined));
  const Tensor drefined = add(broadcast_mul(grad_output, spatial_gate), sp.input);

  // refined = features * channel_gates(features)
  const auto ch = channel_attention_backward(features, p.channel,
                                             channel_inner(drefined, features));
  CbamGrads g;
  g.input = add(broadcast_mul(drefined, channel_gates), ch.input);
  g.params.channel = ch.params;
  g.params.spatial = sp.params;
  return g;
}

DistributionGrads distribute_backward(const Tensor& rgb, const Tensor& depth,
                                      const Tensor& shallow, const DistributionParams& p,
                                      const DistributionUpstream& upstream) {
  const auto fwd = distribute(rgb, depth, shallow, p);
  const std::array<const Tensor*, kBranchCount> inputs = {&rgb, &depth, &shallow};
  require_same_shape(upstream.fused, rgb, "distribute_backward");

  DistributionGrads g;
  g.params.global = zeros_like(p.global);
  Vector dglobal(fwd.global.size(), 0.0);
  for (std::size_t i = 0; i < kBranchCount; ++i) {
    require_same_shape(upstream.gated[i], rgb, "distribute_backward");
    const Tensor dgated = add(upstream.gated[i], upstream.fused);
    g.inputs[i] = broadcast_mul(dgated, fwd.gates[i]);
    const Vector dlogits = sigmoid_backward(fwd.gates[i], channel_inner(dgated, *inputs[i]));
    const auto lg = linear_backward(fwd.global, p.branch[i].weight, dlogits);
    g.params.branch[i] = {lg.weights, Tensor::from_vector(lg.bias)};
    for (std::size_t k = 0; k < dglobal.size(); ++k) dglobal[k] += lg.input[k];
  }

  const Tensor total = add(add(rgb, depth), shallow);
  const Vector pooled = pool_global(total, PoolMode::avg);
  const auto gg = linear_backward(pooled, p.global.weight, dglobal);
  g.params.global = {gg.weights, Tensor::from_vector(gg.bias)};
  const Tensor dtotal = pool_global_backward(total, PoolMode::avg, gg.input);
  for (auto& in : g.inputs) in = add(in, dtotal);
  return g;
}

}  // namespace hmad
