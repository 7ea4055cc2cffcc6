#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rrm/rng.hpp"
#include "rrm/tensor.hpp"

namespace rrm {

struct GradcheckResult {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t checked = 0;  // entries compared
};

struct GradcheckOptions {
  double step = 1e-5;
  /// Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Entries sampled per input tensor; 0 checks every entry.
  std::size_t max_entries = 0;
};

/// Compares the tape gradient of scalar f() with respect to each tensor in
/// `inputs` against central differences. Inputs must require gradients.
GradcheckResult check_gradients(const std::string& name, const std::function<Tensor()>& f,
                                 const std::vector<Tensor>& inputs, Rng& rng, const GradcheckOptions& opts = {});

/// Contraction with a fixed random weight, sum(x * w): a smooth scalar probe
/// of every output element.
Tensor random_probe(const Tensor& x, Rng& rng);

/// Every differentiable primitive and composite block, and the full network at
/// depth 2, width 4 on an 8 x 8 Bayer input.
std::vector<GradcheckResult> run_gradcheck_suite(std::uint64_t seed);

}  // namespace rrm
