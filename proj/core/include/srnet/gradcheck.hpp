#pragma once

#include <string>
#include <vector>

namespace srnet {

struct KernelCheck {
    std::string name;
    double max_rel_err = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

struct GradcheckOptions {
    uint64_t seed = 71;
    /// Negative control: perturbs one analytic convolution gradient so the
    /// harness itself can be shown to catch a bad backward pass.
    bool corrupt_conv_backward = false;
};

/// Central finite differences (double precision) against every hand-derived
/// backward pass plus the assembled model on a tiny configuration. The
/// reported error is the max deviation normalized by the largest gradient
/// magnitude of the tensor.
std::vector<KernelCheck> run_gradcheck(const GradcheckOptions& opts = {});

bool all_passed(const std::vector<KernelCheck>& checks);

}  // namespace srnet
