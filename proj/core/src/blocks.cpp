#include "rrm/blocks.hpp"

#include <cmath>

#include "rrm/error.hpp"
#include "rrm/ops.hpp"
#include "rrm/scan_order.hpp"
#include "rrm/ssm.hpp"

namespace rrm {

namespace {

// Weight scale of fusion output projections around their identity part.
constexpr double kPassThroughScale = 0.3;

}  // namespace

Tensor cross_scan_merge(const Tensor& features, std::span<const std::size_t> directions, const DirectionalSsm& ssm) {
  if (features.rank() != 3) throw DimensionError("cross_scan_merge expects [C, h, w], got " + shape_string(features.shape()));
  if (directions.empty()) throw ConfigError("cross_scan_merge: no scan directions enabled");
  const std::size_t c = features.dim(0), h = features.dim(1), w = features.dim(2);
  const auto& orders = cached_orders(h, w);
  const Tensor flat = reshape(features, {c, h * w});
  std::vector<Tensor> merged;
  merged.reserve(directions.size());
  for (std::size_t slot = 0; slot < directions.size(); ++slot) {
    const ScanOrder& order = orders.at(directions[slot]);
    const Tensor seq = gather_permute(flat, order.order);
    const Tensor out = ssm(slot, seq);
    if (out.shape() != seq.shape()) {
      throw DimensionError("cross_scan_merge: direction model returned " + shape_string(out.shape()));
    }
    merged.push_back(scatter_inverse(out, order.order));
  }
  return reshape(sum_list(merged), {c, h, w});
}

ChannelAttention::ChannelAttention(std::size_t channels, std::size_t reduction, Rng& rng) {
  if (reduction == 0 || channels % reduction != 0) {
    throw ConfigError("channel attention reduction " + std::to_string(reduction) + " does not divide " +
                      std::to_string(channels) + " channels");
  }
  const std::size_t hidden = channels / reduction;
  // Squeeze rows come in sign-mirrored pairs so that for any pooled input at
  // least one hidden unit of each pair is active at initialization.
  std::vector<double> w1 = kaiming_uniform(hidden * channels, channels, rng);
  for (std::size_t j = 1; j < hidden; j += 2) {
    for (std::size_t i = 0; i < channels; ++i) w1[j * channels + i] = -w1[(j - 1) * channels + i];
  }
  squeeze_weight = make_param({hidden, channels}, std::move(w1));
  squeeze_bias = make_param({hidden}, std::vector<double>(hidden, 0.0));
  excite_weight = make_param({channels, hidden}, kaiming_uniform(channels * hidden, hidden, rng));
  excite_bias = make_param({channels}, std::vector<double>(channels, 0.0));
}

Tensor ChannelAttention::operator()(const Tensor& x) const {
  const std::size_t c = x.dim(0);
  if (squeeze_weight.dim(1) != c) {
    throw DimensionError("channel attention built for " + std::to_string(squeeze_weight.dim(1)) + " channels, got " +
                         shape_string(x.shape()));
  }
  const Tensor pooled = reshape(global_avg_pool(x), {c, 1});
  const Tensor hidden = relu(add_channel_bias(matmul(squeeze_weight, pooled), squeeze_bias));
  const Tensor weights = sigmoid(add_channel_bias(matmul(excite_weight, hidden), excite_bias));
  return scale_by_channel(x, weights);
}

void ChannelAttention::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".squeeze.weight", squeeze_weight});
  out.push_back({prefix + ".squeeze.bias", squeeze_bias});
  out.push_back({prefix + ".excite.weight", excite_weight});
  out.push_back({prefix + ".excite.bias", excite_bias});
}

Tensor DirectionSsm::operator()(const Tensor& seq) const {
  const std::size_t n = a_log.dim(1);
  const std::size_t rank = dt_proj.dim(1);
  const Tensor proj = matmul(x_proj, seq);
  const Tensor dt_in = slice_channels(proj, 0, rank);
  const Tensor b = slice_channels(proj, rank, n);
  const Tensor c = slice_channels(proj, rank + n, n);
  const Tensor delta = softplus(add_channel_bias(matmul(dt_proj, dt_in), dt_bias));
  const Tensor a = scale(exp(a_log), -1.0);
  return ssm::selective_scan(seq, delta, a, b, c, skip);
}

SelectiveScan2d::SelectiveScan2d(std::size_t channels, std::size_t state_dim, std::size_t num_directions, Rng& rng)
    : state_dim_(state_dim),
      dt_rank_(std::max<std::size_t>(1, (channels + 15) / 16)),
      directions_(direction_subset(num_directions)) {
  if (state_dim == 0) throw ConfigError("state_dim must be positive");
  constexpr double kDtMin = 1e-3, kDtMax = 1e-1;
  const double dt_scale = 1.0 / std::sqrt(static_cast<double>(dt_rank_));
  for (std::size_t k = 0; k < directions_.size(); ++k) {
    DirectionSsm s;
    const std::size_t rows = dt_rank_ + 2 * state_dim;
    s.x_proj = make_param({rows, channels}, kaiming_uniform(rows * channels, channels, rng));
    std::vector<double> dtw(channels * dt_rank_);
    for (double& v : dtw) v = rng.uniform(-dt_scale, dt_scale);
    s.dt_proj = make_param({channels, dt_rank_}, std::move(dtw));
    std::vector<double> dt_bias(channels);
    for (double& v : dt_bias) {
      // Inverse softplus of a log-uniform step size.
      const double dt = std::exp(rng.uniform(std::log(kDtMin), std::log(kDtMax)));
      v = dt + std::log(-std::expm1(-dt));
    }
    s.dt_bias = make_param({channels}, std::move(dt_bias));
    std::vector<double> a_log(channels * state_dim);
    for (std::size_t ch = 0; ch < channels; ++ch) {
      for (std::size_t j = 0; j < state_dim; ++j) a_log[ch * state_dim + j] = std::log(static_cast<double>(j + 1));
    }
    s.a_log = make_param({channels, state_dim}, std::move(a_log));
    s.skip = make_param({channels}, std::vector<double>(channels, 1.0));
    ssms.push_back(std::move(s));
  }
}

Tensor SelectiveScan2d::operator()(const Tensor& x) const {
  return cross_scan_merge(x, directions_, [this](std::size_t slot, const Tensor& seq) { return ssms[slot](seq); });
}

void SelectiveScan2d::collect(ParamList& out, const std::string& prefix) const {
  for (std::size_t k = 0; k < ssms.size(); ++k) {
    const std::string p = prefix + ".dir" + std::to_string(directions_[k]);
    out.push_back({p + ".x_proj", ssms[k].x_proj});
    out.push_back({p + ".dt_proj", ssms[k].dt_proj});
    out.push_back({p + ".dt_bias", ssms[k].dt_bias});
    out.push_back({p + ".a_log", ssms[k].a_log});
    out.push_back({p + ".skip", ssms[k].skip});
  }
}

RawSsm::RawSsm(std::size_t channels, std::size_t state_dim, std::size_t num_directions, Rng& rng)
    : in_proj(channels, 2 * channels, 1, rng),
      conv(channels, channels, 3, rng),
      ss2d(channels, state_dim, num_directions, rng),
      norm(channels) {}

Tensor RawSsm::operator()(const Tensor& x) const {
  const Tensor proj = in_proj(x);
  if (proj.dim(0) % 2 != 0) throw ConfigError("RAWSSM projection width must be even");
  const std::size_t c = proj.dim(0) / 2;
  const Tensor xs = slice_channels(proj, 0, c);
  const Tensor zs = slice_channels(proj, c, c);
  const Tensor scanned = norm(ss2d(silu(conv(xs))));
  return mul(scanned, silu(zs));
}

void RawSsm::collect(ParamList& out, const std::string& prefix) const {
  in_proj.collect(out, prefix + ".in_proj");
  conv.collect(out, prefix + ".conv");
  ss2d.collect(out, prefix + ".ss2d");
  norm.collect(out, prefix + ".norm");
}

RawMambaBlock::RawMambaBlock(std::size_t channels, std::size_t state_dim, std::size_t num_directions,
                             std::size_t ca_reduction, Rng& rng)
    : norm1(channels),
      ssm(channels, state_dim, num_directions, rng),
      alpha(make_param({1}, {1.0})),
      beta(make_param({1}, {1.0})),
      norm2(channels),
      conv(channels, channels, 3, rng),
      ca(channels, ca_reduction, rng) {}

Tensor RawMambaBlock::operator()(const Tensor& x) const {
  const Tensor t = add(scale_by_scalar(x, alpha), ssm(norm1(x)));
  return add(scale_by_scalar(t, beta), ca(gelu(conv(norm2(t)))));
}

void RawMambaBlock::collect(ParamList& out, const std::string& prefix) const {
  norm1.collect(out, prefix + ".norm1");
  ssm.collect(out, prefix + ".rawssm");
  out.push_back({prefix + ".alpha", alpha});
  out.push_back({prefix + ".beta", beta});
  norm2.collect(out, prefix + ".norm2");
  conv.collect(out, prefix + ".conv");
  ca.collect(out, prefix + ".ca");
}

RetinexDecomposition::RetinexDecomposition(std::size_t in_channels, std::size_t channels, Rng& rng)
    : conv1(in_channels + 1, channels, 1, rng),
      conv5(channels, channels, 5, rng),
      conv3(channels, channels, 3, rng),
      to_light(channels, in_channels, 1, rng) {
  // The light map starts centred on 1 so X_in begins close to X.
  to_light.bias = make_param({in_channels}, std::vector<double>(in_channels, 1.0));
}

RetinexDecomposition::Output RetinexDecomposition::operator()(const Tensor& x) const {
  const Tensor m = mean_over_channels(x);
  const Tensor r = gelu(conv3(conv5(conv1(concat_channels(x, m)))));
  const Tensor l = to_light(r);
  return {l, r, mul(x, l)};
}

void RetinexDecomposition::collect(ParamList& out, const std::string& prefix) const {
  conv1.collect(out, prefix + ".conv1");
  conv5.collect(out, prefix + ".conv5");
  conv3.collect(out, prefix + ".conv3");
  to_light.collect(out, prefix + ".to_light");
}

DomainAdaptiveFusion::DomainAdaptiveFusion(std::size_t channels, std::size_t ca_reduction, Rng& rng)
    : merge(2 * channels, channels, 3, rng),
      ca(channels, ca_reduction, rng),
      after_ca(channels, channels, 1, rng),
      gate(channels, channels, 1, rng),
      mix(channels, channels, 1, rng),
      out(channels, channels, 1, rng) {
  // Starts close to passing `cur` through unchanged.
  identity_centred(out, 0, kPassThroughScale);
}

Tensor DomainAdaptiveFusion::operator()(const Tensor& pre, const Tensor& cur) const {
  if (pre.shape() != cur.shape()) {
    throw DimensionError("fusion inputs differ: " + shape_string(pre.shape()) + " vs " + shape_string(cur.shape()));
  }
  Tensor t = merge(concat_channels(pre, cur));
  t = after_ca(ca(t));
  t = mul(t, gate(gelu(pre)));
  t = mix(gelu(t));
  return out(add(t, cur));
}

void DomainAdaptiveFusion::collect(ParamList& params, const std::string& prefix) const {
  merge.collect(params, prefix + ".merge");
  ca.collect(params, prefix + ".ca");
  after_ca.collect(params, prefix + ".after_ca");
  gate.collect(params, prefix + ".gate");
  mix.collect(params, prefix + ".mix");
  out.collect(params, prefix + ".out");
}

ConcatFusion::ConcatFusion(std::size_t channels, Rng& rng) : conv(2 * channels, channels, 1, rng) {
  identity_centred(conv, channels, kPassThroughScale);
}

Tensor ConcatFusion::operator()(const Tensor& pre, const Tensor& cur) const {
  if (pre.shape() != cur.shape()) {
    throw DimensionError("fusion inputs differ: " + shape_string(pre.shape()) + " vs " + shape_string(cur.shape()));
  }
  return conv(concat_channels(pre, cur));
}

void ConcatFusion::collect(ParamList& out, const std::string& prefix) const { conv.collect(out, prefix + ".conv"); }

Fusion::Fusion(FusionKind kind, std::size_t channels, std::size_t ca_reduction, Rng& rng) {
  if (kind == FusionKind::Daf) {
    impl_ = DomainAdaptiveFusion(channels, ca_reduction, rng);
  } else {
    impl_ = ConcatFusion(channels, rng);
  }
}

Tensor Fusion::operator()(const Tensor& pre, const Tensor& cur) const {
  return std::visit([&](const auto& f) { return f(pre, cur); }, impl_);
}

void Fusion::collect(ParamList& out, const std::string& prefix) const {
  std::visit([&](const auto& f) { f.collect(out, prefix); }, impl_);
}

SimpleDenoisingBlock::SimpleDenoisingBlock(std::size_t channels, Rng& rng)
    : norm(channels), conv1(channels, channels, 3, rng), conv2(channels, channels, 3, rng) {}

Tensor SimpleDenoisingBlock::operator()(const Tensor& x) const { return add(x, conv2(gelu(conv1(norm(x))))); }

void SimpleDenoisingBlock::collect(ParamList& out, const std::string& prefix) const {
  norm.collect(out, prefix + ".norm");
  conv1.collect(out, prefix + ".conv1");
  conv2.collect(out, prefix + ".conv2");
}

}  // namespace rrm
