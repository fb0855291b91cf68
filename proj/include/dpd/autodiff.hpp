#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dpd/tensor.hpp"

namespace dpd {

// Reverse-mode tape over a small set of dense primitives. Values are
// immutable once recorded; backward replays the node list in reverse and
// visits each node exactly once.
class Tape {
 public:
  using Id = std::size_t;

  // Leaf not tracked for gradients.
  Id constant(Tensor t);
  // Leaf tracked under a unique name; gradients for it appear in backward().
  Id param(const std::string& name, Tensor t);

  Id matmul(Id a, Id b);
  // Same-shape add, or bias broadcast: b rank-1 with length == a.cols().
  Id add(Id a, Id b);
  Id mul(Id a, Id b);
  Id scale(Id a, double s);
  Id add_scalar(Id a, double c);
  Id tanh_op(Id a);
  Id silu(Id a);
  // Concatenate along the last axis (rank-1 vectors or rank-2 columns).
  Id concat(Id a, Id b);
  Id reshape(Id a, std::vector<std::size_t> shape);
  Id mean_all(Id a);
  Id sum_squares(Id a);
  // Mean cross-entropy of softmax(logits) against integer labels.
  // logits rank-2 [B,C]; labels.size() == B.
  Id softmax_cross_entropy(Id logits, std::vector<std::size_t> labels);
  // Multiply row i of a rank-2 tensor by w[i] (rank-1: single weight).
  Id row_scale(Id a, std::vector<double> w);
  // Clamp to [0,1] with straight-through gradient.
  Id clamp01_st(Id a);

  const Tensor& value(Id id) const;
  std::size_t node_count() const { return nodes_.size(); }

  // Gradients of a scalar loss with respect to every registered param;
  // params not reachable from the loss get zero gradients.
  ParamTree backward(Id loss) const;

 private:
  struct Node {
    Tensor value;
    std::vector<Id> inputs;
    // Accumulates into the gradient buffers of the inputs.
    std::function<void(const Tensor& grad_out, Tape& tape, std::vector<Tensor>& grads)> back;
  };

  Id push(Tensor value, std::vector<Id> inputs,
          std::function<void(const Tensor&, Tape&, std::vector<Tensor>&)> back);
  Tensor& grad_buffer(std::vector<Tensor>& grads, Id id) const;

  std::vector<Node> nodes_;
  std::map<std::string, Id> params_;
};

struct AdamState {
  ParamTree m;
  ParamTree v;
  std::uint64_t step = 0;
};

AdamState init_adam(const ParamTree& params);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled; 0 => plain Adam
};

// Bias-corrected Adam update in place; decoupled weight decay applied only
// when configured nonzero.
void adam_step(ParamTree& params, const ParamTree& grads, AdamState& state, double lr,
               const AdamConfig& cfg = {});

// Builds the loss on the given tape; must register every entry of `params`
// via tape.param(name, ...) so analytic gradients line up with probes.
using ModelFn = std::function<Tape::Id(Tape&, const ParamTree&)>;

// Max over randomly probed coordinates of
// |analytic - central difference| / max(1e-8, |central difference|).
double check_gradients(const ModelFn& model_fn, const ParamTree& params, int probe_count,
                       std::uint64_t seed, double fd_eps = 1e-5);

}  // namespace dpd
