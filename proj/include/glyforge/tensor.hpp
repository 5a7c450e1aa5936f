// Copyright 2026 The Glyforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glyforge/error.hpp"

namespace glyforge {

// Logical bytes held by live tensor buffers. The peak is read by the bench
// harness as the primary memory figure.
class TensorAllocStats {
 public:
  static std::int64_t current_bytes() { return current().load(); }
  static std::int64_t peak_bytes() { return peak().load(); }

  static void reset_peak() { peak().store(current().load()); }

  static void add(std::int64_t bytes) {
    const std::int64_t now = current().fetch_add(bytes) + bytes;
    std::int64_t prev = peak().load();
    while (now > prev && !peak().compare_exchange_weak(prev, now)) {
    }
  }

  static void sub(std::int64_t bytes) { current().fetch_sub(bytes); }

 private:
  static std::atomic<std::int64_t>& current() {
    static std::atomic<std::int64_t> v{0};
    return v;
  }
  static std::atomic<std::int64_t>& peak() {
    static std::atomic<std::int64_t> v{0};
    return v;
  }
};

template <class T>
struct TensorNode {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> value;
  std::vector<T> grad;  // allocated on first use
  bool requires_grad = false;

  TensorNode(std::size_t r, std::size_t c, bool rg)
      : rows(r), cols(c), value(r * c, T(0)), requires_grad(rg) {
    TensorAllocStats::add(static_cast<std::int64_t>(value.size() * sizeof(T)));
  }

  ~TensorNode() {
    TensorAllocStats::sub(static_cast<std::int64_t>((value.size() + grad.size()) * sizeof(T)));
  }

  TensorNode(const TensorNode&) = delete;
  TensorNode& operator=(const TensorNode&) = delete;

  std::size_t numel() const { return rows * cols; }

  void ensure_grad() {
    if (grad.empty()) {
      grad.assign(numel(), T(0));
      TensorAllocStats::add(static_cast<std::int64_t>(grad.size() * sizeof(T)));
    }
  }
};

// Shared handle to one node of the computation graph. Copies alias the
// same storage, which is what the tape's backward closures rely on.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false) {
    Tensor t;
    t.node_ = std::make_shared<TensorNode<T>>(rows, cols, requires_grad);
    return t;
  }

  static Tensor from(std::size_t rows, std::size_t cols, std::vector<T> data,
                     bool requires_grad = false) {
    if (data.size() != rows * cols) {
      throw ShapeError("tensor data length does not match its shape");
    }
    Tensor t = zeros(rows, cols, requires_grad);
    t.node_->value = std::move(data);
    return t;
  }

  static Tensor scalar(T v) {
    Tensor t = zeros(1, 1, false);
    t.node_->value[0] = v;
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t numel() const { return node_->numel(); }
  bool is_scalar() const { return node_->numel() == 1; }

  std::vector<T>& values() { return node_->value; }
  const std::vector<T>& values() const { return node_->value; }

  T item() const {
    if (!is_scalar()) throw ShapeError("item() requires a single element tensor");
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  bool has_grad() const { return !node_->grad.empty(); }
  const std::vector<T>& grad() const {
    if (node_->grad.empty()) throw TapeError("tensor has no gradient buffer");
    return node_->grad;
  }

  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  Tensor clone() const {
    Tensor t = zeros(rows(), cols(), false);
    t.node_->value = node_->value;
    return t;
  }

  const std::shared_ptr<TensorNode<T>>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

namespace detail {

template <class T>
inline void check_finite(const char* op, const std::vector<T>& values) {
#ifndef NDEBUG
  for (const T v : values) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
#else
  (void)op;
  (void)values;
#endif
}

}  // namespace detail

// Records the backward closures of every differentiable op built while it
// is active, then replays them in reverse. One backward pass consumes the
// tape; building a fresh graph needs a fresh tape.
template <class T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  class Scope {
   public:
    explicit Scope(Tape* tape) : previous_(tls()) { tls() = tape; }
    ~Scope() { tls() = previous_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  [[nodiscard]] Scope activate() { return Scope(this); }

  static Tape* current() { return tls(); }

  void record(std::function<void()> op) { ops_.push_back(std::move(op)); }

  std::size_t size() const { return ops_.size(); }
  bool consumed() const { return consumed_; }

  void backward(const Tensor<T>& loss) {
    if (consumed_) throw TapeError("backward was already run on this tape");
    if (!loss.is_scalar()) throw ShapeError("backward requires a scalar loss");
    if (!loss.requires_grad()) {
      throw TapeError("loss does not depend on any tracked tensor");
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] = T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    ops_.clear();
    consumed_ = true;
  }

 private:
  static Tape*& tls() {
    thread_local Tape* active = nullptr;
    return active;
  }

  std::vector<std::function<void()>> ops_;
  bool consumed_ = false;
};

namespace detail {

// A backward closure only fires when its output accumulated a gradient,
// i.e. the output lies on a path to the loss.
template <class T>
bool has_incoming(const std::shared_ptr<TensorNode<T>>& node) {
  return !node->grad.empty();
}

template <class T>
void record_if_tracked(bool tracked, Tensor<T>& out, std::function<void()> closure) {
  Tape<T>* tape = Tape<T>::current();
  if (tape == nullptr || !tracked) return;
  out.set_requires_grad(true);
  tape->record(std::move(closure));
}

}  // namespace detail

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("add requires operands of the same shape");
  }
  Tensor<T> out = Tensor<T>::zeros(a.rows(), a.cols());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  detail::check_finite("add", ov);
  detail::record_if_tracked<T>(
      a.requires_grad() || b.requires_grad(), out,
      [an = a.node(), bn = b.node(), on = out.node()] {
        if (!detail::has_incoming(on)) return;
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i];
        }
      });
  return out;
}

// Sum of several same-shaped tensors in one graph node.
template <class T>
Tensor<T> add_many(std::span<const Tensor<T>> terms) {
  if (terms.empty()) throw ShapeError("add_many requires at least one term");
  const std::size_t rows = terms[0].rows();
  const std::size_t cols = terms[0].cols();
  bool tracked = false;
  for (const auto& t : terms) {
    if (t.rows() != rows || t.cols() != cols) {
      throw ShapeError("add_many requires operands of the same shape");
    }
    tracked = tracked || t.requires_grad();
  }
  Tensor<T> out = Tensor<T>::zeros(rows, cols);
  auto& ov = out.values();
  for (const auto& t : terms) {
    const auto& tv = t.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += tv[i];
  }
  detail::check_finite("add_many", ov);
  std::vector<std::shared_ptr<TensorNode<T>>> nodes;
  nodes.reserve(terms.size());
  for (const auto& t : terms) nodes.push_back(t.node());
  detail::record_if_tracked<T>(tracked, out, [nodes = std::move(nodes), on = out.node()] {
    if (!detail::has_incoming(on)) return;
    for (const auto& node : nodes) {
      if (!node->requires_grad) continue;
      node->ensure_grad();
      for (std::size_t i = 0; i < on->grad.size(); ++i) node->grad[i] += on->grad[i];
    }
  });
  return out;
}

// Adds a 1 x cols bias row to every row of x.
template <class T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw ShapeError("add_bias requires a 1 x cols bias row");
  }
  Tensor<T> out = Tensor<T>::zeros(x.rows(), x.cols());
  const auto& xv = x.values();
  const auto& bv = bias.values();
  auto& ov = out.values();
  const std::size_t cols = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) ov[r * cols + c] = xv[r * cols + c] + bv[c];
  }
  detail::check_finite("add_bias", ov);
  detail::record_if_tracked<T>(
      x.requires_grad() || bias.requires_grad(), out,
      [xn = x.node(), bn = bias.node(), on = out.node()] {
        if (!detail::has_incoming(on)) return;
        const std::size_t cols = on->cols;
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (std::size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t r = 0; r < on->rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) bn->grad[c] += on->grad[r * cols + c];
          }
        }
      });
  return out;
}

template <class T>
Tensor<T> mul_scalar(const Tensor<T>& x, T factor) {
  Tensor<T> out = Tensor<T>::zeros(x.rows(), x.cols());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = factor * xv[i];
  detail::check_finite("mul_scalar", ov);
  detail::record_if_tracked<T>(x.requires_grad(), out,
                               [xn = x.node(), on = out.node(), factor] {
                                 if (!detail::has_incoming(on)) return;
                                 xn->ensure_grad();
                                 for (std::size_t i = 0; i < on->grad.size(); ++i) {
                                   xn->grad[i] += factor * on->grad[i];
                                 }
                               });
  return out;
}

namespace detail {

// C (r x c) += A (r x k) * B (k x c)
template <class T>
void matmul_accumulate(const T* a, const T* b, T* c, std::size_t r, std::size_t k,
                       std::size_t cc) {
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T av = a[i * k + kk];
      if (av == T(0)) continue;
      const T* brow = b + kk * cc;
      T* crow = c + i * cc;
      for (std::size_t j = 0; j < cc; ++j) crow[j] += av * brow[j];
    }
  }
}

// C (r x k) += G (r x c) * B^T, with B stored k x c
template <class T>
void matmul_nt_accumulate(const T* g, const T* b, T* c, std::size_t r, std::size_t k,
                          std::size_t cc) {
  for (std::size_t i = 0; i < r; ++i) {
    const T* grow = g + i * cc;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T* brow = b + kk * cc;
      T acc = T(0);
      for (std::size_t j = 0; j < cc; ++j) acc += grow[j] * brow[j];
      c[i * k + kk] += acc;
    }
  }
}

// C (k x c) += A^T * G, with A stored r x k and G stored r x c
template <class T>
void matmul_tn_accumulate(const T* a, const T* g, T* c, std::size_t r, std::size_t k,
                          std::size_t cc) {
  for (std::size_t i = 0; i < r; ++i) {
    const T* grow = g + i * cc;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T av = a[i * k + kk];
      if (av == T(0)) continue;
      T* crow = c + kk * cc;
      for (std::size_t j = 0; j < cc; ++j) crow[j] += av * grow[j];
    }
  }
}

}  // namespace detail

// out = x (r x k) times w (k x c). Weights are stored input first, so a
// layer maps row vectors by right multiplication.
template <class T>
Tensor<T> matmul(const Tensor<T>& x, const Tensor<T>& w) {
  if (x.cols() != w.rows()) throw ShapeError("matmul inner dimensions differ");
  Tensor<T> out = Tensor<T>::zeros(x.rows(), w.cols());
  detail::matmul_accumulate(x.values().data(), w.values().data(), out.values().data(), x.rows(),
                            x.cols(), w.cols());
  detail::check_finite("matmul", out.values());
  detail::record_if_tracked<T>(
      x.requires_grad() || w.requires_grad(), out,
      [xn = x.node(), wn = w.node(), on = out.node()] {
        if (!detail::has_incoming(on)) return;
        if (xn->requires_grad) {
          xn->ensure_grad();
          detail::matmul_nt_accumulate(on->grad.data(), wn->value.data(), xn->grad.data(),
                                       xn->rows, xn->cols, on->cols);
        }
        if (wn->requires_grad) {
          wn->ensure_grad();
          detail::matmul_tn_accumulate(xn->value.data(), on->grad.data(), wn->grad.data(),
                                       xn->rows, xn->cols, on->cols);
        }
      });
  return out;
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.rows(), x.cols());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] > T(0) ? xv[i] : T(0);
  detail::record_if_tracked<T>(x.requires_grad(), out, [xn = x.node(), on = out.node()] {
    if (!detail::has_incoming(on)) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < on->grad.size(); ++i) {
      if (xn->value[i] > T(0)) xn->grad[i] += on->grad[i];
    }
  });
  return out;
}

namespace detail {
constexpr double kGeluC0 = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluC1 = 0.044715;
}  // namespace detail

// Gaussian error linear unit, tanh form.
template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.rows(), x.cols());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    const double v = static_cast<double>(xv[i]);
    const double u = detail::kGeluC0 * (v + detail::kGeluC1 * v * v * v);
    ov[i] = static_cast<T>(0.5 * v * (1.0 + std::tanh(u)));
  }
  detail::check_finite("gelu", ov);
  detail::record_if_tracked<T>(x.requires_grad(), out, [xn = x.node(), on = out.node()] {
    if (!detail::has_incoming(on)) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < on->grad.size(); ++i) {
      const double v = static_cast<double>(xn->value[i]);
      const double u = detail::kGeluC0 * (v + detail::kGeluC1 * v * v * v);
      const double t = std::tanh(u);
      const double du = detail::kGeluC0 * (1.0 + 3.0 * detail::kGeluC1 * v * v);
      const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      xn->grad[i] += static_cast<T>(d) * on->grad[i];
    }
  });
  return out;
}

template <class T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows requires at least one part");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  bool tracked = false;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows requires equal column counts");
    rows += p.rows();
    tracked = tracked || p.requires_grad();
  }
  Tensor<T> out = Tensor<T>::zeros(rows, cols);
  auto& ov = out.values();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& pv = p.values();
    std::copy(pv.begin(), pv.end(), ov.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += pv.size();
  }
  std::vector<std::shared_ptr<TensorNode<T>>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  detail::record_if_tracked<T>(tracked, out, [nodes = std::move(nodes), on = out.node()] {
    if (!detail::has_incoming(on)) return;
    std::size_t offset = 0;
    for (const auto& node : nodes) {
      const std::size_t count = node->numel();
      if (node->requires_grad) {
        node->ensure_grad();
        for (std::size_t i = 0; i < count; ++i) node->grad[i] += on->grad[offset + i];
      }
      offset += count;
    }
  });
  return out;
}

template <class T>
Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b) {
  const Tensor<T> parts[] = {a, b};
  return concat_rows(std::span<const Tensor<T>>(parts, 2));
}

template <class T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows()) throw ShapeError("concat_cols requires equal row counts");
  const std::size_t rows = a.rows();
  const std::size_t ac = a.cols();
  const std::size_t bc = b.cols();
  Tensor<T> out = Tensor<T>::zeros(rows, ac + bc);
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(av.begin() + static_cast<std::ptrdiff_t>(r * ac),
              av.begin() + static_cast<std::ptrdiff_t>((r + 1) * ac),
              ov.begin() + static_cast<std::ptrdiff_t>(r * (ac + bc)));
    std::copy(bv.begin() + static_cast<std::ptrdiff_t>(r * bc),
              bv.begin() + static_cast<std::ptrdiff_t>((r + 1) * bc),
              ov.begin() + static_cast<std::ptrdiff_t>(r * (ac + bc) + ac));
  }
  detail::record_if_tracked<T>(
      a.requires_grad() || b.requires_grad(), out,
      [an = a.node(), bn = b.node(), on = out.node()] {
        if (!detail::has_incoming(on)) return;
        const std::size_t ac = an->cols;
        const std::size_t bc = bn->cols;
        for (std::size_t r = 0; r < on->rows; ++r) {
          if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t c = 0; c < ac; ++c) {
              an->grad[r * ac + c] += on->grad[r * (ac + bc) + c];
            }
          }
          if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t c = 0; c < bc; ++c) {
              bn->grad[r * bc + c] += on->grad[r * (ac + bc) + ac + c];
            }
          }
        }
      });
  return out;
}

template <class T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  if (begin > end || end > x.rows()) throw IndexError("slice_rows range out of bounds");
  const std::size_t cols = x.cols();
  Tensor<T> out = Tensor<T>::zeros(end - begin, cols);
  const auto& xv = x.values();
  auto& ov = out.values();
  std::copy(xv.begin() + static_cast<std::ptrdiff_t>(begin * cols),
            xv.begin() + static_cast<std::ptrdiff_t>(end * cols), ov.begin());
  detail::record_if_tracked<T>(x.requires_grad(), out,
                               [xn = x.node(), on = out.node(), begin] {
                                 if (!detail::has_incoming(on)) return;
                                 xn->ensure_grad();
                                 const std::size_t cols = on->cols;
                                 for (std::size_t i = 0; i < on->grad.size(); ++i) {
                                   xn->grad[begin * cols + i] += on->grad[i];
                                 }
                               });
  return out;
}

// out[i, :] = table[ids[i], :]. Doubles as the embedding lookup.
template <class T>
Tensor<T> gather_rows(const Tensor<T>& table, const std::vector<std::int32_t>& ids) {
  const std::size_t cols = table.cols();
  Tensor<T> out = Tensor<T>::zeros(ids.size(), cols);
  const auto& tv = table.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::int32_t id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
      throw IndexError("gather_rows id out of range: " + std::to_string(id));
    }
    std::copy(tv.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(id) * cols),
              tv.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(id) + 1) * cols),
              ov.begin() + static_cast<std::ptrdiff_t>(i * cols));
  }
  detail::record_if_tracked<T>(table.requires_grad(), out,
                               [tn = table.node(), on = out.node(), ids] {
                                 if (!detail::has_incoming(on)) return;
                                 tn->ensure_grad();
                                 const std::size_t cols = on->cols;
                                 for (std::size_t i = 0; i < ids.size(); ++i) {
                                   const std::size_t base =
                                       static_cast<std::size_t>(ids[i]) * cols;
                                   for (std::size_t c = 0; c < cols; ++c) {
                                     tn->grad[base + c] += on->grad[i * cols + c];
                                   }
                                 }
                               });
  return out;
}

template <class T>
Tensor<T> embedding_gather(const std::vector<std::int32_t>& ids, const Tensor<T>& codebook) {
  return gather_rows(codebook, ids);
}

namespace detail {

inline void check_segments(const std::vector<std::int32_t>& seg, std::size_t rows,
                           std::size_t num_segments) {
  if (seg.size() != rows) throw ShapeError("segment ids must cover every row");
  for (const std::int32_t s : seg) {
    if (s < 0 || static_cast<std::size_t>(s) >= num_segments) {
      throw IndexError("segment id out of range: " + std::to_string(s));
    }
  }
}

}  // namespace detail

// Mean of the rows of each segment; empty segments yield zero rows.
template <class T>
Tensor<T> segment_mean(const Tensor<T>& x, const std::vector<std::int32_t>& seg,
                       std::size_t num_segments) {
  detail::check_segments(seg, x.rows(), num_segments);
  const std::size_t cols = x.cols();
  Tensor<T> out = Tensor<T>::zeros(num_segments, cols);
  std::vector<T> inv_count(num_segments, T(0));
  {
    std::vector<std::size_t> counts(num_segments, 0);
    for (const std::int32_t s : seg) ++counts[static_cast<std::size_t>(s)];
    for (std::size_t s = 0; s < num_segments; ++s) {
      if (counts[s] > 0) inv_count[s] = T(1) / static_cast<T>(counts[s]);
    }
  }
  const auto& xv = x.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < seg.size(); ++i) {
    const std::size_t s = static_cast<std::size_t>(seg[i]);
    for (std::size_t c = 0; c < cols; ++c) ov[s * cols + c] += xv[i * cols + c];
  }
  for (std::size_t s = 0; s < num_segments; ++s) {
    for (std::size_t c = 0; c < cols; ++c) ov[s * cols + c] *= inv_count[s];
  }
  detail::check_finite("segment_mean", ov);
  detail::record_if_tracked<T>(
      x.requires_grad(), out,
      [xn = x.node(), on = out.node(), seg, inv_count = std::move(inv_count)] {
        if (!detail::has_incoming(on)) return;
        xn->ensure_grad();
        const std::size_t cols = on->cols;
        for (std::size_t i = 0; i < seg.size(); ++i) {
          const std::size_t s = static_cast<std::size_t>(seg[i]);
          for (std::size_t c = 0; c < cols; ++c) {
            xn->grad[i * cols + c] += inv_count[s] * on->grad[s * cols + c];
          }
        }
      });
  return out;
}

// Columnwise max of each segment. Empty segments yield zero rows; the
// gradient flows to the first row attaining the max.
template <class T>
Tensor<T> segment_max(const Tensor<T>& x, const std::vector<std::int32_t>& seg,
                      std::size_t num_segments) {
  detail::check_segments(seg, x.rows(), num_segments);
  const std::size_t cols = x.cols();
  Tensor<T> out = Tensor<T>::zeros(num_segments, cols);
  std::vector<std::int32_t> argmax(num_segments * cols, -1);
  const auto& xv = x.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < seg.size(); ++i) {
    const std::size_t s = static_cast<std::size_t>(seg[i]);
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t slot = s * cols + c;
      const T v = xv[i * cols + c];
      if (argmax[slot] < 0 || v > ov[slot]) {
        ov[slot] = v;
        argmax[slot] = static_cast<std::int32_t>(i);
      }
    }
  }
  for (std::size_t slot = 0; slot < argmax.size(); ++slot) {
    if (argmax[slot] < 0) ov[slot] = T(0);
  }
  detail::record_if_tracked<T>(x.requires_grad(), out,
                               [xn = x.node(), on = out.node(), argmax = std::move(argmax)] {
                                 if (!detail::has_incoming(on)) return;
                                 xn->ensure_grad();
                                 const std::size_t cols = on->cols;
                                 for (std::size_t slot = 0; slot < argmax.size(); ++slot) {
                                   const std::int32_t row = argmax[slot];
                                   if (row < 0) continue;
                                   const std::size_t c = slot % cols;
                                   xn->grad[static_cast<std::size_t>(row) * cols + c] +=
                                       on->grad[slot];
                                 }
                               });
  return out;
}

// Batch normalization over rows. In training mode with at least two rows
// the batch statistics are used and the running buffers updated in place;
// otherwise the running statistics normalize the input. Variance is the
// biased estimate in both uses.
template <class T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                     T momentum = T(0.1), T eps = T(1e-5)) {
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  if (gamma.cols() != cols || beta.cols() != cols || running_mean.cols() != cols ||
      running_var.cols() != cols) {
    throw ShapeError("batch_norm parameter width does not match the input");
  }
  if (rows == 0) throw ShapeError("batch_norm requires at least one row");

  const bool use_batch_stats = training && rows >= 2;
  std::vector<T> mean(cols, T(0));
  std::vector<T> ivar(cols, T(0));
  const auto& xv = x.values();
  if (use_batch_stats) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) mean[c] += xv[r * cols + c];
    }
    for (std::size_t c = 0; c < cols; ++c) mean[c] /= static_cast<T>(rows);
    std::vector<T> var(cols, T(0));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const T d = xv[r * cols + c] - mean[c];
        var[c] += d * d;
      }
    }
    for (std::size_t c = 0; c < cols; ++c) var[c] /= static_cast<T>(rows);
    auto& rm = running_mean.values();
    auto& rv = running_var.values();
    for (std::size_t c = 0; c < cols; ++c) {
      rm[c] = (T(1) - momentum) * rm[c] + momentum * mean[c];
      rv[c] = (T(1) - momentum) * rv[c] + momentum * var[c];
      ivar[c] = T(1) / std::sqrt(var[c] + eps);
    }
  } else {
    const auto& rm = running_mean.values();
    const auto& rv = running_var.values();
    for (std::size_t c = 0; c < cols; ++c) {
      mean[c] = rm[c];
      ivar[c] = T(1) / std::sqrt(rv[c] + eps);
    }
  }

  Tensor<T> out = Tensor<T>::zeros(rows, cols);
  auto& ov = out.values();
  std::vector<T> xhat(rows * cols, T(0));
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const T h = (xv[r * cols + c] - mean[c]) * ivar[c];
      xhat[r * cols + c] = h;
      ov[r * cols + c] = gv[c] * h + bv[c];
    }
  }
  detail::check_finite("batch_norm", ov);
  detail::record_if_tracked<T>(
      x.requires_grad() || gamma.requires_grad() || beta.requires_grad(), out,
      [xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node(),
       xhat = std::move(xhat), ivar = std::move(ivar), use_batch_stats] {
        if (!detail::has_incoming(on)) return;
        const std::size_t rows = on->rows;
        const std::size_t cols = on->cols;
        const auto& g = on->grad;
        if (gn->requires_grad) {
          gn->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              gn->grad[c] += g[r * cols + c] * xhat[r * cols + c];
            }
          }
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) bn->grad[c] += g[r * cols + c];
          }
        }
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        if (!use_batch_stats) {
          // Statistics are constants here, so the map is affine.
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              xn->grad[r * cols + c] += g[r * cols + c] * gn->value[c] * ivar[c];
            }
          }
          return;
        }
        std::vector<T> g_mean(cols, T(0));
        std::vector<T> gx_mean(cols, T(0));
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            g_mean[c] += g[r * cols + c];
            gx_mean[c] += g[r * cols + c] * xhat[r * cols + c];
          }
        }
        for (std::size_t c = 0; c < cols; ++c) {
          g_mean[c] /= static_cast<T>(rows);
          gx_mean[c] /= static_cast<T>(rows);
        }
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            const T centered = g[r * cols + c] - g_mean[c] - xhat[r * cols + c] * gx_mean[c];
            xn->grad[r * cols + c] += gn->value[c] * ivar[c] * centered;
          }
        }
      });
  return out;
}

enum class Reduction { mean, sum };

// Per-row negative log likelihood of integer targets under row softmax.
// Pure value helper shared by the loss and the perplexity bookkeeping.
template <class T>
std::vector<double> nll_rows(const std::vector<T>& logits, std::size_t rows, std::size_t cols,
                             const std::vector<std::int32_t>& targets) {
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      mx = std::max(mx, static_cast<double>(logits[r * cols + c]));
    }
    double lse = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      lse += std::exp(static_cast<double>(logits[r * cols + c]) - mx);
    }
    lse = mx + std::log(lse);
    out[r] = lse - static_cast<double>(logits[r * cols + static_cast<std::size_t>(targets[r])]);
  }
  return out;
}

template <class T>
std::vector<std::int32_t> argmax_rows(const std::vector<T>& values, std::size_t rows,
                                      std::size_t cols) {
  std::vector<std::int32_t> out(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c) {
      if (values[r * cols + c] > values[r * cols + best]) best = c;
    }
    out[r] = static_cast<std::int32_t>(best);
  }
  return out;
}

// Cross entropy of integer targets under row softmax, reduced to a scalar.
template <class T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits,
                                const std::vector<std::int32_t>& targets,
                                Reduction reduction = Reduction::mean) {
  const std::size_t rows = logits.rows();
  const std::size_t cols = logits.cols();
  if (targets.size() != rows) throw ShapeError("one target per logit row is required");
  if (rows == 0) throw ShapeError("cross entropy requires at least one row");
  for (const std::int32_t t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= cols) {
      throw IndexError("target class out of range: " + std::to_string(t));
    }
  }
  const auto& lv = logits.values();
  std::vector<T> probs(rows * cols, T(0));
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      mx = std::max(mx, static_cast<double>(lv[r * cols + c]));
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      denom += std::exp(static_cast<double>(lv[r * cols + c]) - mx);
    }
    for (std::size_t c = 0; c < cols; ++c) {
      probs[r * cols + c] =
          static_cast<T>(std::exp(static_cast<double>(lv[r * cols + c]) - mx) / denom);
    }
    total += mx + std::log(denom) -
             static_cast<double>(lv[r * cols + static_cast<std::size_t>(targets[r])]);
  }
  if (reduction == Reduction::mean) total /= static_cast<double>(rows);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total));
  detail::check_finite("softmax_cross_entropy", out.values());
  detail::record_if_tracked<T>(
      logits.requires_grad(), out,
      [ln = logits.node(), on = out.node(), probs = std::move(probs), targets, reduction] {
        if (!detail::has_incoming(on)) return;
        ln->ensure_grad();
        const std::size_t rows = ln->rows;
        const std::size_t cols = ln->cols;
        const T scale = on->grad[0] * (reduction == Reduction::mean
                                           ? T(1) / static_cast<T>(rows)
                                           : T(1));
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            T p = probs[r * cols + c];
            if (c == static_cast<std::size_t>(targets[r])) p -= T(1);
            ln->grad[r * cols + c] += scale * p;
          }
        }
      });
  return out;
}

// Mean squared error of a column of predictions against targets.
template <class T>
Tensor<T> mse_loss(const Tensor<T>& pred, const std::vector<T>& targets) {
  if (pred.cols() != 1) throw ShapeError("mse_loss expects an n x 1 prediction column");
  if (pred.rows() != targets.size()) throw ShapeError("one target per prediction is required");
  if (targets.empty()) throw ShapeError("mse_loss requires at least one row");
  const auto& pv = pred.values();
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = static_cast<double>(pv[i]) - static_cast<double>(targets[i]);
    total += d * d;
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / static_cast<double>(targets.size())));
  detail::check_finite("mse_loss", out.values());
  detail::record_if_tracked<T>(pred.requires_grad(), out,
                               [pn = pred.node(), on = out.node(), targets] {
                                 if (!detail::has_incoming(on)) return;
                                 pn->ensure_grad();
                                 const T scale =
                                     on->grad[0] * T(2) / static_cast<T>(targets.size());
                                 for (std::size_t i = 0; i < targets.size(); ++i) {
                                   pn->grad[i] += scale * (pn->value[i] - targets[i]);
                                 }
                               });
  return out;
}

}  // namespace glyforge
