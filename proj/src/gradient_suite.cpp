#include "hmad/gradient_suite.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "hmad/fusion.hpp"
#include "hmad/grad_check.hpp"

namespace hmad {

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng) {
  return Tensor::uniform(std::move(shape), -1.0, 1.0, rng);
}

Tensor biased(Tensor t, double bias) {
  if (bias != 0.0) {
    for (auto& v : t.data()) v += bias;
  }
  return t;
}

// Checks d eval / d slot; `slot` is temporarily overwritten with each probe.
template <class Eval, class Grad>
GradTarget check_target(std::string name, Tensor& slot, Eval&& eval, Grad&& grad, double eps,
                        double bias) {
  const Tensor point = slot;
  const ScalarFn fn = [&](const Tensor& x) {
    const Tensor saved = slot;
    slot = x;
    const double v = eval();
    slot = saved;
    return v;
  };
  const GradientFn analytic = [&](const Tensor& x) {
    const Tensor saved = slot;
    slot = x;
    Tensor g = biased(grad(), bias);
    slot = saved;
    return g;
  };
  return {std::move(name), grad_check(fn, analytic, point, eps)};
}

GradOpReport finish(std::string op, std::vector<GradTarget> targets, double tolerance) {
  GradOpReport report{std::move(op), std::move(targets), 0.0, true};
  for (const auto& t : report.targets) {
    // NaN compares false, so test for "not below" to fail it.
    if (!(t.error < tolerance)) report.passed = false;
    report.max_error = std::max(report.max_error, t.error);
    if (t.error != t.error) report.max_error = t.error;
  }
  return report;
}

GradOpReport check_channel_attention(const GradSuiteOptions& o, std::mt19937_64& rng) {
  constexpr std::size_t C = 8;
  Tensor x = random_tensor({C, 5, 6}, rng);
  ChannelAttnParams p = ChannelAttnParams::seeded(C, 2, rng);
  visit_params(p, "", [&](const std::string&, Tensor& t) { t = random_tensor(t.shape(), rng); });
  const Tensor proj = random_tensor({C}, rng);

  auto eval = [&] { return dot(channel_attention(x, p), proj.data()); };
  std::vector<GradTarget> targets;
  targets.push_back(check_target(
      "input", x, eval, [&] { return channel_attention_backward(x, p, proj.data()).input; }, o.eps,
      o.analytic_bias));
  visit_params(p, "", [&](const std::string& name, Tensor& t) {
    targets.push_back(check_target(
        name, t, eval,
        [&] {
          auto g = channel_attention_backward(x, p, proj.data()).params;
          return param_tensor(g, name);
        },
        o.eps, o.analytic_bias));
  });
  return finish("channel_attention", std::move(targets), o.tolerance);
}

GradOpReport check_spatial_attention(const GradSuiteOptions& o, std::mt19937_64& rng) {
  Tensor x = random_tensor({4, 6, 6}, rng);
  SpatialAttnParams p = SpatialAttnParams::seeded(rng);
  visit_params(p, "", [&](const std::string&, Tensor& t) { t = random_tensor(t.shape(), rng); });
  const Tensor proj = random_tensor({1, 6, 6}, rng);

  auto eval = [&] { return dot(spatial_attention(x, p).data(), proj.data()); };
  std::vector<GradTarget> targets;
  targets.push_back(check_target(
      "input", x, eval, [&] { return spatial_attention_backward(x, p, proj).input; }, o.eps,
      o.analytic_bias));
  visit_params(p, "", [&](const std::string& name, Tensor& t) {
    targets.push_back(check_target(
        name, t, eval,
        [&] {
          auto g = spatial_attention_backward(x, p, proj).params;
          return param_tensor(g, name);
        },
        o.eps, o.analytic_bias));
  });
  return finish("spatial_attention", std::move(targets), o.tolerance);
}

GradOpReport check_cbam(const GradSuiteOptions& o, std::mt19937_64& rng) {
  constexpr std::size_t C = 8;
  Tensor x = random_tensor({C, 6, 6}, rng);
  CbamParams p{ChannelAttnParams::seeded(C, 2, rng), SpatialAttnParams::seeded(rng)};
  visit_params(p, "", [&](const std::string&, Tensor& t) { t = random_tensor(t.shape(), rng); });
  const Tensor proj = random_tensor({C, 6, 6}, rng);

  auto eval = [&] { return dot(cbam(x, p).data(), proj.data()); };
  std::vector<GradTarget> targets;
  targets.push_back(check_target(
      "input", x, eval, [&] { return cbam_backward(x, p, proj).input; }, o.eps, o.analytic_bias));
  visit_params(p, "", [&](const std::string& name, Tensor& t) {
    targets.push_back(check_target(
        name, t, eval,
        [&] {
          auto g = cbam_backward(x, p, proj).params;
          return param_tensor(g, name);
        },
        o.eps, o.analytic_bias));
  });
  return finish("cbam", std::move(targets), o.tolerance);
}

GradOpReport check_distribute(const GradSuiteOptions& o, std::mt19937_64& rng) {
  constexpr std::size_t C = 8;
  std::array<Tensor, kBranchCount> in;
  for (auto& t : in) t = random_tensor({C, 4, 5}, rng);
  DistributionParams p = DistributionParams::seeded(C, rng);
  visit_params(p, "", [&](const std::string&, Tensor& t) { t = random_tensor(t.shape(), rng); });
  DistributionUpstream up;
  for (auto& t : up.gated) t = random_tensor({C, 4, 5}, rng);
  up.fused = random_tensor({C, 4, 5}, rng);

  auto eval = [&] {
    const auto r = distribute(in[0], in[1], in[2], p);
    double v = dot(r.fused.data(), up.fused.data());
    for (std::size_t i = 0; i < kBranchCount; ++i) v += dot(r.gated[i].data(), up.gated[i].data());
    return v;
  };
  auto grads = [&] { return distribute_backward(in[0], in[1], in[2], p, up); };
  static constexpr std::array<const char*, kBranchCount> names = {"input.rgb", "input.depth",
                                                                  "input.shallow"};
  std::vector<GradTarget> targets;
  for (std::size_t i = 0; i < kBranchCount; ++i) {
    targets.push_back(check_target(
        names[i], in[i], eval, [&] { return grads().inputs[i]; }, o.eps, o.analytic_bias));
  }
  visit_params(p, "", [&](const std::string& name, Tensor& t) {
    targets.push_back(check_target(
        name, t, eval,
        [&] {
          auto g = grads().params;
          return param_tensor(g, name);
        },
        o.eps, o.analytic_bias));
  });
  return finish("distribute", std::move(targets), o.tolerance);
}

}  // namespace

std::vector<GradOpReport> run_gradient_suite(const GradSuiteOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::vector<GradOpReport> reports;
  reports.push_back(check_channel_attention(options, rng));
  reports.push_back(check_spatial_attention(options, rng));
  reports.push_back(check_cbam(options, rng));
  reports.push_back(check_distribute(options, rng));
  return reports;
}

}  // namespace hmad
