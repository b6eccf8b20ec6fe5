#pragma once

#include <vector>

#include "zeroforge/parameter.h"

namespace zeroforge {

struct AdamOptions {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Only parameters marked trainable at Step time
// are touched; moment buffers are keyed by position in the list.
class Adam {
 public:
  Adam(ParameterList params, AdamOptions options);
  void Step();
  long steps() const { return t_; }
  const AdamOptions& options() const { return options_; }

 private:
  ParameterList params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

}  // namespace zeroforge
