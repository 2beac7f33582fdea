#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pf/tensor.hpp"

namespace pf {

struct OptimizerSettings {
    enum class Kind { adamw, sgd };
    Kind kind = Kind::adamw;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled
};

/// Updates a fixed set of trainable tensors in place from their grads.
/// AdamW keeps bias-corrected first/second moments per parameter and
/// applies weight decay decoupled from the gradient path.
class Optimizer {
   public:
    Optimizer(OptimizerSettings settings, std::vector<std::pair<std::string, Tensor>> params);

    /// One update at the given learning rate. Parameters without a grad
    /// buffer are skipped.
    void step(double lr);

    void zero_grad();

    std::int64_t steps_taken() const { return t_; }

   private:
    struct Slot {
        Tensor param;
        std::vector<double> m;
        std::vector<double> v;
    };
    OptimizerSettings settings_;
    std::vector<Slot> slots_;
    std::int64_t t_ = 0;
};

}  // namespace pf
