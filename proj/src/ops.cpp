#include "tvt/ops.hpp"

#include <algorithm>
#include <cmath>

namespace tvt {
namespace {

constexpr double kGeluRoot = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluCubic = 0.044715;

Tape& same_tape(std::initializer_list<Var> vars, const char* what) {
  Tape* tape = nullptr;
  for (Var v : vars) {
    if (!v.valid()) throw ValueError(std::string(what) + " given an unbound handle");
    if (tape == nullptr) {
      tape = v.tape;
    } else if (tape != v.tape) {
      throw ValueError(std::string(what) + " given handles from different tapes");
    }
  }
  return *tape;
}

Tensor clone_values(const Tensor& t) { return Tensor(t.shape(), t.values()); }

ConstMatMap vmap(const Tape& tp, int id) { return tp.tensor(id).matrix(); }

MatMap gmap(Tape& tp, int id) {
  Tensor& t = tp.tensor(id);
  t.grad();  // allocate on first touch
  return t.grad_matrix();
}

ConstMatMap out_grad(const Node& n) {
  return ConstMatMap(n.tensor.grad().data(), n.tensor.rows(), n.tensor.cols());
}

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + " shapes differ: " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

void require_rowvec(const Var& b, Index want_cols, const char* what) {
  if (b.rows() != 1 || b.cols() != want_cols) {
    throw ShapeError(std::string(what) + " wants a length-" + std::to_string(want_cols) +
                     " row vector, got shape " + shape_to_string(b.shape()));
  }
}

}  // namespace

const Tensor& GradCheckReplay::store_or_fetch(const std::string& key, const Tensor& current) {
  if (key.empty()) throw ValueError("replay slot needs a non-empty key");
  if (mode_ == Mode::record) {
    auto [it, inserted] = slots_.emplace(key, Tensor(current.shape(), current.values()));
    if (!inserted) throw ValueError("replay slot '" + key + "' recorded twice in one pass");
    return it->second;
  }
  auto it = slots_.find(key);
  if (it == slots_.end()) throw ValueError("replay slot '" + key + "' was never recorded");
  if (it->second.shape() != current.shape()) {
    throw ShapeError("replay slot '" + key + "' holds shape " +
                     shape_to_string(it->second.shape()) + " but the pass produced " +
                     shape_to_string(current.shape()));
  }
  return it->second;
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape({a, b}, "matmul");
  ConstMatMap va = a.tensor().matrix();
  ConstMatMap vb = b.tensor().matrix();
  if (va.cols() != vb.rows()) {
    throw ShapeError("matmul inner extents differ: " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  Tensor out(Shape{va.rows(), vb.cols()});
  out.matrix().noalias() = va * vb;
  const int ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Node& n) {
    ConstMatMap g = out_grad(n);
    gmap(tp, ia).noalias() += g * vmap(tp, ib).transpose();
    gmap(tp, ib).noalias() += vmap(tp, ia).transpose() * g;
  });
}

Var transpose(Var a) {
  Tape& t = same_tape({a}, "transpose");
  ConstMatMap va = a.tensor().matrix();
  Tensor out(Shape{va.cols(), va.rows()});
  out.matrix() = va.transpose();
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia](Tape& tp, const Node& n) {
    gmap(tp, ia) += out_grad(n).transpose();
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape({a, b}, "add");
  require_same_shape(a, b, "add");
  Tensor out(a.shape(), a.tensor().values() + b.tensor().values());
  const int ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Node& n) {
    tp.grad_buffer(ia) += n.tensor.grad();
    tp.grad_buffer(ib) += n.tensor.grad();
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape({a, b}, "sub");
  require_same_shape(a, b, "sub");
  Tensor out(a.shape(), a.tensor().values() - b.tensor().values());
  const int ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Node& n) {
    tp.grad_buffer(ia) += n.tensor.grad();
    tp.grad_buffer(ib) -= n.tensor.grad();
  });
}

Var scale(Var a, double c) {
  Tape& t = same_tape({a}, "scale");
  Tensor out(a.shape(), a.tensor().values() * c);
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia, c](Tape& tp, const Node& n) {
    tp.grad_buffer(ia) += c * n.tensor.grad();
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = same_tape({a, b}, "hadamard");
  require_same_shape(a, b, "hadamard");
  Tensor out(a.shape(), a.tensor().values() * b.tensor().values());
  const int ia = a.id, ib = b.id;
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, const Node& n) {
    tp.grad_buffer(ia) += n.tensor.grad() * tp.tensor(ib).values();
    tp.grad_buffer(ib) += n.tensor.grad() * tp.tensor(ia).values();
  });
}

Var add_rowvec(Var x, Var b) {
  Tape& t = same_tape({x, b}, "add_rowvec");
  require_rowvec(b, x.cols(), "add_rowvec");
  Tensor out(x.shape());
  out.matrix() = x.tensor().matrix().rowwise() + b.tensor().matrix().row(0);
  const int ix = x.id, ib = b.id;
  return t.record(std::move(out), {ix, ib}, [ix, ib](Tape& tp, const Node& n) {
    ConstMatMap g = out_grad(n);
    gmap(tp, ix) += g;
    gmap(tp, ib) += g.colwise().sum();
  });
}

Var linear(Var x, Var w, Var b) { return add_rowvec(matmul(x, w), b); }

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ValueError("concat_rows of an empty list");
  Tape* tape = parts.front().tape;
  Index cols = parts.front().cols();
  Index rows = 0;
  for (const Var& p : parts) {
    same_tape({parts.front(), p}, "concat_rows");
    if (p.cols() != cols) {
      throw ShapeError("concat_rows column extents differ: " + std::to_string(cols) + " vs " +
                       std::to_string(p.cols()));
    }
    rows += p.rows();
  }
  Tensor out(Shape{rows, cols});
  std::vector<int> ids;
  std::vector<Index> counts;
  Index at = 0;
  for (const Var& p : parts) {
    out.matrix().middleRows(at, p.rows()) = p.tensor().matrix();
    ids.push_back(p.id);
    counts.push_back(p.rows());
    at += p.rows();
  }
  return tape->record(std::move(out), ids, [ids, counts](Tape& tp, const Node& n) {
    ConstMatMap g = out_grad(n);
    Index at = 0;
    for (size_t k = 0; k < ids.size(); ++k) {
      gmap(tp, ids[k]) += g.middleRows(at, counts[k]);
      at += counts[k];
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ValueError("concat_cols of an empty list");
  Tape* tape = parts.front().tape;
  Index rows = parts.front().rows();
  Index cols = 0;
  for (const Var& p : parts) {
    same_tape({parts.front(), p}, "concat_cols");
    if (p.rows() != rows) {
      throw ShapeError("concat_cols row extents differ: " + std::to_string(rows) + " vs " +
                       std::to_string(p.rows()));
    }
    cols += p.cols();
  }
  Tensor out(Shape{rows, cols});
  std::vector<int> ids;
  std::vector<Index> counts;
  Index at = 0;
  for (const Var& p : parts) {
    out.matrix().middleCols(at, p.cols()) = p.tensor().matrix();
    ids.push_back(p.id);
    counts.push_back(p.cols());
    at += p.cols();
  }
  return tape->record(std::move(out), ids, [ids, counts](Tape& tp, const Node& n) {
    ConstMatMap g = out_grad(n);
    Index at = 0;
    for (size_t k = 0; k < ids.size(); ++k) {
      gmap(tp, ids[k]) += g.middleCols(at, counts[k]);
      at += counts[k];
    }
  });
}

Var slice_rows(Var a, Index begin, Index count) {
  Tape& t = same_tape({a}, "slice_rows");
  if (begin < 0 || count < 1 || begin + count > a.rows()) {
    throw IndexError("slice_rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " +
                     std::to_string(a.rows()) + " rows");
  }
  Tensor out(Shape{count, a.cols()});
  out.matrix() = a.tensor().matrix().middleRows(begin, count);
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia, begin, count](Tape& tp, const Node& n) {
    gmap(tp, ia).middleRows(begin, count) += out_grad(n);
  });
}

Var slice_cols(Var a, Index begin, Index count) {
  Tape& t = same_tape({a}, "slice_cols");
  if (begin < 0 || count < 1 || begin + count > a.cols()) {
    throw IndexError("slice_cols [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " +
                     std::to_string(a.cols()) + " columns");
  }
  Tensor out(Shape{a.rows(), count});
  out.matrix() = a.tensor().matrix().middleCols(begin, count);
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia, begin, count](Tape& tp, const Node& n) {
    gmap(tp, ia).middleCols(begin, count) += out_grad(n);
  });
}

Var row(Var a, Index i) { return slice_rows(a, i, 1); }

Var softmax_rows(Var a) {
  Tape& t = same_tape({a}, "softmax_rows");
  ConstMatMap va = a.tensor().matrix();
  Tensor out(a.shape());
  MatMap p = out.matrix();
  for (Index i = 0; i < va.rows(); ++i) {
    const double m = va.row(i).maxCoeff();
    p.row(i) = (va.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia](Tape& tp, const Node& n) {
    ConstMatMap p = n.tensor.matrix();
    ConstMatMap g = out_grad(n);
    MatMap da = gmap(tp, ia);
    for (Index i = 0; i < p.rows(); ++i) {
      const double dot = (g.row(i).array() * p.row(i).array()).sum();
      da.row(i).array() += p.row(i).array() * (g.row(i).array() - dot);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = same_tape({x, gain, bias}, "layer_norm");
  require_rowvec(gain, x.cols(), "layer_norm gain");
  require_rowvec(bias, x.cols(), "layer_norm bias");
  if (eps <= 0) throw ValueError("layer_norm eps must be positive");
  ConstMatMap vx = x.tensor().matrix();
  const Eigen::ArrayXd gv = gain.tensor().values();
  const Eigen::ArrayXd bv = bias.tensor().values();
  Tensor out(x.shape());
  MatMap y = out.matrix();
  for (Index i = 0; i < vx.rows(); ++i) {
    const double mu = vx.row(i).mean();
    const double var = (vx.row(i).array() - mu).square().mean();
    const double inv = 1.0 / std::sqrt(var + eps);
    y.row(i).array() = (vx.row(i).array() - mu) * inv * gv.transpose() + bv.transpose();
  }
  const int ix = x.id, ig = gain.id, ib = bias.id;
  return t.record(std::move(out), {ix, ig, ib}, [ix, ig, ib, eps](Tape& tp, const Node& n) {
    ConstMatMap vx = vmap(tp, ix);
    const Eigen::ArrayXd gv = tp.tensor(ig).values();
    ConstMatMap g = out_grad(n);
    MatMap dx = gmap(tp, ix);
    Eigen::ArrayXd& dgain = tp.grad_buffer(ig);
    Eigen::ArrayXd& dbias = tp.grad_buffer(ib);
    for (Index i = 0; i < vx.rows(); ++i) {
      const double mu = vx.row(i).mean();
      const double var = (vx.row(i).array() - mu).square().mean();
      const double inv = 1.0 / std::sqrt(var + eps);
      const Eigen::ArrayXd xhat = (vx.row(i).array() - mu).transpose() * inv;
      const Eigen::ArrayXd grow = g.row(i).array().transpose();
      dgain += grow * xhat;
      dbias += grow;
      const Eigen::ArrayXd gxh = grow * gv;
      const double m1 = gxh.mean();
      const double m2 = (gxh * xhat).mean();
      dx.row(i).array() += (inv * (gxh - m1 - xhat * m2)).transpose();
    }
  });
}

Var gelu(Var a) {
  Tape& t = same_tape({a}, "gelu");
  const auto& v = a.tensor().values();
  Eigen::ArrayXd u = kGeluRoot * (v + kGeluCubic * v.cube());
  Tensor out(a.shape(), 0.5 * v * (1.0 + u.tanh()));
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia](Tape& tp, const Node& n) {
    const auto& v = tp.tensor(ia).values();
    const Eigen::ArrayXd th = (kGeluRoot * (v + kGeluCubic * v.cube())).tanh();
    const Eigen::ArrayXd du = kGeluRoot * (1.0 + 3.0 * kGeluCubic * v.square());
    tp.grad_buffer(ia) += n.tensor.grad() * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th.square()) * du);
  });
}

Var sigmoid(Var a) {
  Tape& t = same_tape({a}, "sigmoid");
  Tensor out(a.shape(), a.tensor().values().unaryExpr([](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }));
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia](Tape& tp, const Node& n) {
    const auto& s = n.tensor.values();
    tp.grad_buffer(ia) += n.tensor.grad() * s * (1.0 - s);
  });
}

Var log(Var a) {
  Tape& t = same_tape({a}, "log");
  const auto& v = a.tensor().values();
  if ((v <= 0.0).any()) throw ValueError("log of a non-positive value");
  Tensor out(a.shape(), v.log());
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia](Tape& tp, const Node& n) {
    tp.grad_buffer(ia) += n.tensor.grad() / tp.tensor(ia).values();
  });
}

Var xlogx(Var a) {
  Tape& t = same_tape({a}, "xlogx");
  const auto& v = a.tensor().values();
  if ((v < 0.0).any()) throw ValueError("xlogx of a negative value");
  Tensor out(a.shape(), v.unaryExpr([](double x) { return x > 0 ? x * std::log(x) : 0.0; }));
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia](Tape& tp, const Node& n) {
    const auto& v = tp.tensor(ia).values();
    tp.grad_buffer(ia) +=
        n.tensor.grad() * v.unaryExpr([](double x) { return x > 0 ? std::log(x) + 1.0 : 0.0; });
  });
}

Var clamp(Var a, double lo, double hi) {
  Tape& t = same_tape({a}, "clamp");
  if (!(lo < hi)) throw ValueError("clamp needs lo < hi");
  Tensor out(a.shape(), a.tensor().values().max(lo).min(hi));
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia, lo, hi](Tape& tp, const Node& n) {
    const auto& v = tp.tensor(ia).values();
    const auto inside = (v >= lo && v <= hi).cast<double>();
    tp.grad_buffer(ia) += n.tensor.grad() * inside;
  });
}

Var sum(Var a) {
  Tape& t = same_tape({a}, "sum");
  Tensor out = Tensor::scalar(a.tensor().values().sum());
  const int ia = a.id;
  return t.record(std::move(out), {ia}, [ia](Tape& tp, const Node& n) {
    tp.grad_buffer(ia) += n.tensor.grad()(0);
  });
}

Var mean(Var a) {
  Tape& t = same_tape({a}, "mean");
  if (a.tensor().size() == 0) throw ValueError("mean of an empty tensor");
  Tensor out = Tensor::scalar(a.tensor().values().mean());
  const int ia = a.id;
  const double inv = 1.0 / static_cast<double>(a.tensor().size());
  return t.record(std::move(out), {ia}, [ia, inv](Tape& tp, const Node& n) {
    tp.grad_buffer(ia) += inv * n.tensor.grad()(0);
  });
}

Var grl(Var x, double lambda, GradCheckReplay* replay, const std::string& key) {
  Tape& t = same_tape({x}, "grl");
  Tensor out = clone_values(x.tensor());
  if (replay != nullptr) {
    const Tensor& x0 = replay->store_or_fetch(key, x.tensor());
    if (replay->mode() == GradCheckReplay::Mode::fetch) {
      out.values() = (1.0 + lambda) * x0.values() - lambda * x.tensor().values();
    }
  }
  const int ix = x.id;
  return t.record(std::move(out), {ix}, [ix, lambda](Tape& tp, const Node& n) {
    tp.grad_buffer(ix) -= lambda * n.tensor.grad();
  });
}

Var stop_gradient(Var x, GradCheckReplay* replay, const std::string& key) {
  same_tape({x}, "stop_gradient");
  Tensor v = clone_values(x.tensor());
  if (replay != nullptr) v = clone_values(replay->store_or_fetch(key, v));
  return x.tape->constant(std::move(v));
}

Var cross_entropy_with_logits(Var logits, const std::vector<int>& labels) {
  Tape& t = same_tape({logits}, "cross_entropy_with_logits");
  ConstMatMap z = logits.tensor().matrix();
  const Index n = z.rows(), k = z.cols();
  if (static_cast<Index>(labels.size()) != n) {
    throw ShapeError("cross_entropy_with_logits got " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(n) + " rows");
  }
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= k) {
      throw IndexError("label " + std::to_string(y) + " out of range for " + std::to_string(k) +
                       " classes");
    }
    const double m = z.row(i).maxCoeff();
    total += m + std::log((z.row(i).array() - m).exp().sum()) - z(i, y);
  }
  const int iz = logits.id;
  return t.record(Tensor::scalar(total / static_cast<double>(n)), {iz},
                  [iz, labels](Tape& tp, const Node& n_) {
                    const double g = n_.tensor.grad()(0);
                    ConstMatMap z = vmap(tp, iz);
                    MatMap dz = gmap(tp, iz);
                    const double inv = g / static_cast<double>(z.rows());
                    for (Index i = 0; i < z.rows(); ++i) {
                      const double m = z.row(i).maxCoeff();
                      Eigen::ArrayXd p = (z.row(i).array() - m).exp().transpose();
                      p /= p.sum();
                      p(labels[static_cast<size_t>(i)]) -= 1.0;
                      dz.row(i).array() += inv * p.transpose();
                    }
                  });
}

Var binary_cross_entropy(Var probs, const Tensor& targets, double eps) {
  Tape& t = same_tape({probs}, "binary_cross_entropy");
  if (probs.shape() != targets.shape()) {
    throw ShapeError("binary_cross_entropy shapes differ: " + shape_to_string(probs.shape()) +
                     " vs " + shape_to_string(targets.shape()));
  }
  if (eps <= 0 || eps >= 0.5) throw ValueError("binary_cross_entropy eps must lie in (0, 0.5)");
  const auto& tv = targets.values();
  if ((tv < 0.0).any() || (tv > 1.0).any()) {
    throw ValueError("binary_cross_entropy targets must lie in [0, 1]");
  }
  const Eigen::ArrayXd p = probs.tensor().values().max(eps).min(1.0 - eps);
  const Eigen::ArrayXd terms = -(tv * p.log() + (1.0 - tv) * (1.0 - p).log());
  const int ip = probs.id;
  const Eigen::ArrayXd targets_copy = tv;
  return t.record(Tensor::scalar(terms.mean()), {ip},
                  [ip, targets_copy, eps](Tape& tp, const Node& n) {
                    const double g = n.tensor.grad()(0);
                    const auto& raw = tp.tensor(ip).values();
                    const Eigen::ArrayXd p = raw.max(eps).min(1.0 - eps);
                    const auto inside = (raw >= eps && raw <= 1.0 - eps).cast<double>();
                    const double inv = g / static_cast<double>(raw.size());
                    tp.grad_buffer(ip) += inv * inside * (p - targets_copy) / (p * (1.0 - p));
                  });
}

double entropy(const std::vector<double>& p, double base) {
  if (p.empty()) throw ValueError("entropy of an empty distribution");
  if (base <= 0.0 || base == 1.0) throw ValueError("entropy base must be positive and not 1");
  double sum = 0.0;
  for (double pi : p) {
    if (pi < 0.0) throw ValueError("entropy given a negative probability " + std::to_string(pi));
    sum += pi;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValueError("entropy given a distribution summing to " + std::to_string(sum));
  }
  std::vector<double> terms;
  terms.reserve(p.size());
  for (double pi : p) {
    if (pi > 0.0) terms.push_back(pi * std::log(pi));
  }
  // Sorted accumulation: permutations of the same distribution add identical
  // terms in an identical order, so the result is bit-for-bit stable.
  std::sort(terms.begin(), terms.end());
  double acc = 0.0;
  for (double term : terms) acc += term;
  if (base == std::exp(1.0)) return -acc;  // keep natural-log results exact
  return -acc / std::log(base);
}

double binary_entropy(double p) {
  if (p < 0.0 || p > 1.0) {
    throw ValueError("binary_entropy argument " + std::to_string(p) + " outside [0, 1]");
  }
  return entropy({p, 1.0 - p}, 2.0);
}

}  // namespace tvt
