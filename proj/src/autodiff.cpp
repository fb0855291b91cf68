#include "dpd/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <memory>

#include "dpd/rng.hpp"

namespace dpd {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  std::ostringstream os;
  os << op << ": incompatible shapes " << shape_str(a.shape()) << " and " << shape_str(b.shape());
  throw std::invalid_argument(os.str());
}

// C += A * B for row-major rank-2 tensors.
void matmul_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += Aᵀ * B, A is [m,k] so result is [k,n].
void matmul_at_b_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A * Bᵀ, A is [m,n], B is [k,n], result [m,k].
void matmul_a_bt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
                     std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    double* crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += arow[j] * brow[j];
      crow[p] += s;
    }
  }
}

}  // namespace

Tape::Id Tape::push(Tensor value, std::vector<Id> inputs,
                    std::function<void(const Tensor&, Tape&, std::vector<Tensor>&)> back) {
  nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(back)});
  return nodes_.size() - 1;
}

Tape::Id Tape::constant(Tensor t) { return push(std::move(t), {}, nullptr); }

Tape::Id Tape::param(const std::string& name, Tensor t) {
  if (params_.count(name)) throw std::invalid_argument("Tape::param: duplicate name " + name);
  Id id = push(std::move(t), {}, nullptr);
  params_[name] = id;
  return id;
}

const Tensor& Tape::value(Id id) const { return nodes_.at(id).value; }

Tensor& Tape::grad_buffer(std::vector<Tensor>& grads, Id id) const {
  if (grads[id].size() == 0) grads[id] = Tensor::zeros(nodes_[id].value.shape());
  return grads[id];
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows()) shape_error("matmul", ta, tb);
  std::size_t m = ta.rows(), k = ta.cols(), n = tb.cols();
  Tensor out = Tensor::zeros({m, n});
  matmul_acc(ta.data().data(), tb.data().data(), out.data().data(), m, k, n);
  return push(std::move(out), {a, b},
              [a, b, m, k, n](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
                // dA += G Bᵀ, dB += Aᵀ G
                Tensor& ga = t.grad_buffer(grads, a);
                Tensor& gb = t.grad_buffer(grads, b);
                matmul_a_bt_acc(g.data().data(), t.value(b).data().data(), ga.data().data(), m, n, k);
                matmul_at_b_acc(t.value(a).data().data(), g.data().data(), gb.data().data(), m, k, n);
              });
}

Tape::Id Tape::add(Id a, Id b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  bool bias = ta.rank() == 2 && tb.rank() == 1 && tb.size() == ta.cols();
  if (!bias && !same_shape(ta, tb)) shape_error("add", ta, tb);
  Tensor out = ta;
  if (bias) {
    std::size_t rows = ta.rows(), cols = ta.cols();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) out.at(i * cols + j) += tb.at(j);
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out.at(i) += tb.at(i);
  }
  return push(std::move(out), {a, b},
              [a, b, bias](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
                Tensor& ga = t.grad_buffer(grads, a);
                for (std::size_t i = 0; i < g.size(); ++i) ga.at(i) += g.at(i);
                Tensor& gb = t.grad_buffer(grads, b);
                if (bias) {
                  std::size_t cols = gb.size();
                  for (std::size_t i = 0; i < g.size(); ++i) gb.at(i % cols) += g.at(i);
                } else {
                  for (std::size_t i = 0; i < g.size(); ++i) gb.at(i) += g.at(i);
                }
              });
}

Tape::Id Tape::mul(Id a, Id b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!same_shape(ta, tb)) shape_error("elementwise-mul", ta, tb);
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= tb.at(i);
  return push(std::move(out), {a, b}, [a, b](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    Tensor& ga = t.grad_buffer(grads, a);
    Tensor& gb = t.grad_buffer(grads, b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.at(i) += g.at(i) * vb.at(i);
      gb.at(i) += g.at(i) * va.at(i);
    }
  });
}

Tape::Id Tape::scale(Id a, double s) {
  Tensor out = value(a);
  for (double& v : out.data()) v *= s;
  return push(std::move(out), {a}, [a, s](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
    Tensor& ga = t.grad_buffer(grads, a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.at(i) += s * g.at(i);
  });
}

Tape::Id Tape::add_scalar(Id a, double c) {
  Tensor out = value(a);
  for (double& v : out.data()) v += c;
  return push(std::move(out), {a}, [a](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
    Tensor& ga = t.grad_buffer(grads, a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.at(i) += g.at(i);
  });
}

Tape::Id Tape::tanh_op(Id a) {
  Tensor out = value(a);
  for (double& v : out.data()) v = std::tanh(v);
  return push(std::move(out), {a}, [a](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
    Tensor& ga = t.grad_buffer(grads, a);
    const Tensor& va = t.value(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double th = std::tanh(va.at(i));
      ga.at(i) += g.at(i) * (1.0 - th * th);
    }
  });
}

Tape::Id Tape::silu(Id a) {
  Tensor out = value(a);
  for (double& v : out.data()) v = v / (1.0 + std::exp(-v));
  return push(std::move(out), {a}, [a](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
    Tensor& ga = t.grad_buffer(grads, a);
    const Tensor& va = t.value(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double x = va.at(i);
      double s = 1.0 / (1.0 + std::exp(-x));
      ga.at(i) += g.at(i) * (s + x * s * (1.0 - s));
    }
  });
}

Tape::Id Tape::concat(Id a, Id b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() == 1 && tb.rank() == 1) {
    std::vector<double> out = ta.data();
    out.insert(out.end(), tb.data().begin(), tb.data().end());
    std::size_t na = ta.size();
    return push(Tensor({out.size()}, std::move(out)), {a, b},
                [a, b, na](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
                  Tensor& ga = t.grad_buffer(grads, a);
                  Tensor& gb = t.grad_buffer(grads, b);
                  for (std::size_t i = 0; i < na; ++i) ga.at(i) += g.at(i);
                  for (std::size_t i = na; i < g.size(); ++i) gb.at(i - na) += g.at(i);
                });
  }
  if (ta.rank() == 2 && tb.rank() == 2 && ta.rows() == tb.rows()) {
    std::size_t rows = ta.rows(), ca = ta.cols(), cb = tb.cols();
    Tensor out = Tensor::zeros({rows, ca + cb});
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < ca; ++j) out.at(i * (ca + cb) + j) = ta.at(i * ca + j);
      for (std::size_t j = 0; j < cb; ++j) out.at(i * (ca + cb) + ca + j) = tb.at(i * cb + j);
    }
    return push(std::move(out), {a, b},
                [a, b, rows, ca, cb](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
                  Tensor& ga = t.grad_buffer(grads, a);
                  Tensor& gb = t.grad_buffer(grads, b);
                  for (std::size_t i = 0; i < rows; ++i) {
                    for (std::size_t j = 0; j < ca; ++j) ga.at(i * ca + j) += g.at(i * (ca + cb) + j);
                    for (std::size_t j = 0; j < cb; ++j)
                      gb.at(i * cb + j) += g.at(i * (ca + cb) + ca + j);
                  }
                });
  }
  shape_error("concat", ta, tb);
}

Tape::Id Tape::reshape(Id a, std::vector<std::size_t> shape) {
  Tensor out(shape, value(a).data());
  return push(std::move(out), {a}, [a](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
    Tensor& ga = t.grad_buffer(grads, a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.at(i) += g.at(i);
  });
}

Tape::Id Tape::mean_all(Id a) {
  const Tensor& ta = value(a);
  double s = 0.0;
  for (double v : ta.data()) s += v;
  double n = static_cast<double>(ta.size());
  return push(Tensor::scalar(s / n), {a},
              [a, n](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
                Tensor& ga = t.grad_buffer(grads, a);
                double go = g.at(0) / n;
                for (std::size_t i = 0; i < ga.size(); ++i) ga.at(i) += go;
              });
}

Tape::Id Tape::sum_squares(Id a) {
  const Tensor& ta = value(a);
  double s = 0.0;
  for (double v : ta.data()) s += v * v;
  return push(Tensor::scalar(s), {a}, [a](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
    Tensor& ga = t.grad_buffer(grads, a);
    const Tensor& va = t.value(a);
    double go = g.at(0);
    for (std::size_t i = 0; i < ga.size(); ++i) ga.at(i) += 2.0 * va.at(i) * go;
  });
}

Tape::Id Tape::softmax_cross_entropy(Id logits, std::vector<std::size_t> labels) {
  const Tensor& tl = value(logits);
  if (tl.rank() != 2)
    throw std::invalid_argument("softmax-cross-entropy: rank-2 logits required, got " +
                                shape_str(tl.shape()));
  std::size_t batch = tl.rows(), classes = tl.cols();
  if (labels.size() != batch)
    throw std::invalid_argument("softmax-cross-entropy: label count does not match batch size");
  // Cache the softmax for the backward pass.
  auto probs = std::make_shared<std::vector<double>>(batch * classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] >= classes)
      throw std::invalid_argument("softmax-cross-entropy: label out of range");
    double mx = tl.at(i * classes);
    for (std::size_t j = 1; j < classes; ++j) mx = std::max(mx, tl.at(i * classes + j));
    double z = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      double e = std::exp(tl.at(i * classes + j) - mx);
      (*probs)[i * classes + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < classes; ++j) (*probs)[i * classes + j] /= z;
    loss -= std::log((*probs)[i * classes + labels[i]]);
  }
  loss /= static_cast<double>(batch);
  return push(Tensor::scalar(loss), {logits},
              [logits, labels = std::move(labels), probs, batch, classes](
                  const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
                Tensor& gl = t.grad_buffer(grads, logits);
                double go = g.at(0) / static_cast<double>(batch);
                for (std::size_t i = 0; i < batch; ++i) {
                  for (std::size_t j = 0; j < classes; ++j) {
                    double p = (*probs)[i * classes + j];
                    gl.at(i * classes + j) += go * (p - (labels[i] == j ? 1.0 : 0.0));
                  }
                }
              });
}

Tape::Id Tape::row_scale(Id a, std::vector<double> w) {
  const Tensor& ta = value(a);
  std::size_t rows = ta.rank() == 2 ? ta.rows() : 1;
  std::size_t cols = ta.rank() == 2 ? ta.cols() : ta.size();
  if (w.size() != rows)
    throw std::invalid_argument("row-scale: weight count does not match row count");
  Tensor out = ta;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out.at(i * cols + j) *= w[i];
  return push(std::move(out), {a},
              [a, w = std::move(w), rows, cols](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
                Tensor& ga = t.grad_buffer(grads, a);
                for (std::size_t i = 0; i < rows; ++i)
                  for (std::size_t j = 0; j < cols; ++j)
                    ga.at(i * cols + j) += g.at(i * cols + j) * w[i];
              });
}

Tape::Id Tape::clamp01_st(Id a) {
  Tensor out = value(a);
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  // Straight-through: gradient passes unchanged so the classification loss
  // is not killed at the image boundary.
  return push(std::move(out), {a}, [a](const Tensor& g, Tape& t, std::vector<Tensor>& grads) {
    Tensor& ga = t.grad_buffer(grads, a);
    for (std::size_t i = 0; i < g.size(); ++i) ga.at(i) += g.at(i);
  });
}

ParamTree Tape::backward(Id loss) const {
  if (loss >= nodes_.size()) throw std::invalid_argument("backward: loss id out of range");
  if (!value(loss).is_scalar())
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                shape_str(value(loss).shape()));
  std::vector<Tensor> grads(nodes_.size());
  grads[loss] = Tensor::scalar(1.0);
  // Nodes are recorded in topological order; reverse traversal visits each
  // node exactly once.
  Tape& self = const_cast<Tape&>(*this);
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (grads[i].size() == 0 || i > loss) continue;
    const Node& node = nodes_[i];
    if (node.back) node.back(grads[i], self, grads);
  }
  ParamTree out;
  for (const auto& [name, id] : params_) {
    if (grads[id].size() != 0) {
      out[name] = grads[id];
    } else {
      out[name] = Tensor::zeros(nodes_[id].value.shape());
    }
  }
  return out;
}

AdamState init_adam(const ParamTree& params) {
  AdamState st;
  for (const auto& [name, t] : params) {
    st.m[name] = Tensor::zeros(t.shape());
    st.v[name] = Tensor::zeros(t.shape());
  }
  return st;
}

void adam_step(ParamTree& params, const ParamTree& grads, AdamState& state, double lr,
               const AdamConfig& cfg) {
  if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be positive");
  if (!same_structure(params, grads) || !same_structure(params, state.m))
    throw std::invalid_argument("adam_step: parameter/gradient/state trees do not match");
  state.step += 1;
  double t = static_cast<double>(state.step);
  double bc1 = 1.0 - std::pow(cfg.beta1, t);
  double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      double gi = g.at(i);
      m.at(i) = cfg.beta1 * m.at(i) + (1.0 - cfg.beta1) * gi;
      v.at(i) = cfg.beta2 * v.at(i) + (1.0 - cfg.beta2) * gi * gi;
      double mhat = m.at(i) / bc1;
      double vhat = v.at(i) / bc2;
      p.at(i) -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
      if (cfg.weight_decay != 0.0) p.at(i) -= lr * cfg.weight_decay * p.at(i);
    }
  }
}

double check_gradients(const ModelFn& model_fn, const ParamTree& params, int probe_count,
                       std::uint64_t seed, double fd_eps) {
  if (probe_count < 1) throw std::invalid_argument("check_gradients: probe_count must be >= 1");
  auto eval_loss = [&](const ParamTree& p) {
    Tape tape;
    Tape::Id loss = model_fn(tape, p);
    double v = tape.value(loss).item();
    if (!std::isfinite(v)) throw std::runtime_error("check_gradients: non-finite loss");
    return v;
  };
  Tape tape;
  Tape::Id loss = model_fn(tape, params);
  if (!std::isfinite(tape.value(loss).item()))
    throw std::runtime_error("check_gradients: non-finite loss");
  ParamTree analytic = tape.backward(loss);

  std::vector<std::pair<std::string, std::size_t>> coords;
  for (const auto& [name, t] : params)
    for (std::size_t i = 0; i < t.size(); ++i) coords.emplace_back(name, i);

  auto rng = make_rng(seed, "gradcheck");
  std::uniform_int_distribution<std::size_t> pick(0, coords.size() - 1);
  double worst = 0.0;
  for (int k = 0; k < probe_count; ++k) {
    auto [name, idx] = coords[pick(rng)];
    ParamTree plus = params;
    ParamTree minus = params;
    plus.at(name).at(idx) += fd_eps;
    minus.at(name).at(idx) -= fd_eps;
    double fd = (eval_loss(plus) - eval_loss(minus)) / (2.0 * fd_eps);
    double an = analytic.at(name).at(idx);
    double rel = std::abs(an - fd) / std::max(1e-8, std::abs(fd));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace dpd
