#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "core/mat.hpp"

namespace struchis {

// Shared index data referenced by tape closures. The tape keeps a reference,
// so callers may hand over plan vectors without copying them per pass.
using IndexVec = std::shared_ptr<const std::vector<int>>;

inline IndexVec make_index(std::vector<int> v) {
  return std::make_shared<const std::vector<int>>(std::move(v));
}

// Group partition in CSR form: offsets[0] == 0, offsets[G] == n, strictly
// increasing (every group nonempty). Rows of a group are contiguous.
inline void check_groups(const IndexVec& offsets, int n, const char* where) {
  if (!offsets || offsets->empty() || offsets->front() != 0)
    fail(ErrorKind::contract, std::string(where) + ": bad group offsets");
  const auto& off = *offsets;
  for (size_t g = 0; g + 1 < off.size(); ++g) {
    if (off[g + 1] <= off[g])
      fail(ErrorKind::contract, std::string(where) + ": empty group");
  }
  if (off.back() != n)
    fail(ErrorKind::contract,
         std::string(where) + ": group offsets do not cover all rows");
}

// Define-by-run reverse-mode tape over dense matrices. A tape is built per
// forward pass and discarded. backward() computes a fresh adjoint sweep and
// adds it into each node's persistent grad, so calling backward twice without
// zero_grads() yields exactly doubled grads.
template <class T>
class Tape {
public:
  using BackFn = std::function<void(std::vector<Mat<T>>&)>;

  int input(Mat<T> value) { return push("input", {}, std::move(value), {}); }

  const Mat<T>& val(int id) const { return node(id).value; }

  // Zero matrix of the node's shape if backward never reached it.
  const Mat<T>& grad(int id) const {
    const Node& n = node(id);
    if (n.grad.rows != n.value.rows || n.grad.cols != n.value.cols) {
      const_cast<Node&>(n).grad = Mat<T>(n.value.rows, n.value.cols);
    }
    return n.grad;
  }

  void zero_grads() {
    for (auto& n : nodes_) n.grad = Mat<T>();
  }

  size_t size() const { return nodes_.size(); }
  const char* op_name(int id) const { return node(id).op; }
  const std::vector<int>& inputs_of(int id) const { return node(id).inputs; }

  void backward(int seed_id) {
    const Node& seed = node(seed_id);
    if (seed.value.rows != 1 || seed.value.cols != 1)
      fail(ErrorKind::contract,
           "backward: seed must be scalar, got " + seed.value.shape_str());
    std::vector<Mat<T>> adj(nodes_.size());
    adj[size_t(seed_id)] = Mat<T>::filled(1, 1, T(1));
    for (int id = seed_id; id >= 0; --id) {
      if (adj[size_t(id)].d.empty()) continue;
      if (nodes_[size_t(id)].back) nodes_[size_t(id)].back(adj);
    }
    for (size_t i = 0; i < nodes_.size(); ++i) {
      if (adj[i].d.empty()) continue;
      Node& n = nodes_[i];
      if (n.grad.d.size() != adj[i].d.size())
        n.grad = Mat<T>(n.value.rows, n.value.cols);
      for (size_t k = 0; k < n.grad.d.size(); ++k) n.grad.d[k] += adj[i].d[k];
    }
  }

  // ---- operations ------------------------------------------------------

  int matmul(int a, int b) {
    const Mat<T>& A = val(a);
    const Mat<T>& B = val(b);
    if (A.cols != B.rows)
      fail(ErrorKind::contract, "matmul: inner dimensions differ, " +
                                    A.shape_str() + " vs " + B.shape_str());
    Mat<T> out(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i) {
      const T* ar = A.row(i);
      T* outr = out.row(i);
      for (int k = 0; k < A.cols; ++k) {
        T av = ar[k];
        if (av == T(0)) continue;
        const T* br = B.row(k);
        for (int j = 0; j < B.cols; ++j) outr[j] += av * br[j];
      }
    }
    int id = push("matmul", {a, b}, std::move(out), {});
    node(id).back = [this, id, a, b](std::vector<Mat<T>>& adj) {
      const Mat<T>& g = adj[size_t(id)];
      const Mat<T>& A = val(a);
      const Mat<T>& B = val(b);
      Mat<T>& ga = acc(adj, a);
      Mat<T>& gb = acc(adj, b);
      // dA = g . B^T
      for (int i = 0; i < A.rows; ++i) {
        const T* gr = g.row(i);
        T* gar = ga.row(i);
        for (int k = 0; k < A.cols; ++k) {
          const T* br = B.row(k);
          T s = 0;
          for (int j = 0; j < B.cols; ++j) s += gr[j] * br[j];
          gar[k] += s;
        }
      }
      // dB = A^T . g
      for (int i = 0; i < A.rows; ++i) {
        const T* ar = A.row(i);
        const T* gr = g.row(i);
        for (int k = 0; k < A.cols; ++k) {
          T av = ar[k];
          if (av == T(0)) continue;
          T* gbr = gb.row(k);
          for (int j = 0; j < B.cols; ++j) gbr[j] += av * gr[j];
        }
      }
    };
    return id;
  }

  int add(int a, int b) {
    const Mat<T>& A = val(a);
    const Mat<T>& B = val(b);
    if (!A.same_shape(B))
      fail(ErrorKind::contract, "add: shape mismatch, " + A.shape_str() +
                                    " vs " + B.shape_str());
    Mat<T> out = A;
    for (size_t i = 0; i < out.d.size(); ++i) out.d[i] += B.d[i];
    int id = push("add", {a, b}, std::move(out), {});
    node(id).back = [this, id, a, b](std::vector<Mat<T>>& adj) {
      const Mat<T>& g = adj[size_t(id)];
      Mat<T>& ga = acc(adj, a);
      Mat<T>& gb = acc(adj, b);
      for (size_t i = 0; i < g.d.size(); ++i) {
        ga.d[i] += g.d[i];
        gb.d[i] += g.d[i];
      }
    };
    return id;
  }

  // x [n x c] + bias [1 x c], broadcast over rows.
  int add_bias(int x, int bias) {
    const Mat<T>& X = val(x);
    const Mat<T>& B = val(bias);
    if (B.rows != 1 || B.cols != X.cols)
      fail(ErrorKind::contract, "add_bias: bias must be 1x" +
                                    std::to_string(X.cols) + ", got " +
                                    B.shape_str());
    Mat<T> out = X;
    for (int i = 0; i < X.rows; ++i) {
      T* r = out.row(i);
      for (int j = 0; j < X.cols; ++j) r[j] += B.at(0, j);
    }
    int id = push("add_bias", {x, bias}, std::move(out), {});
    node(id).back = [this, id, x, bias](std::vector<Mat<T>>& adj) {
      const Mat<T>& g = adj[size_t(id)];
      Mat<T>& gx = acc(adj, x);
      Mat<T>& gb = acc(adj, bias);
      for (size_t i = 0; i < g.d.size(); ++i) gx.d[i] += g.d[i];
      for (int i = 0; i < g.rows; ++i) {
        const T* gr = g.row(i);
        for (int j = 0; j < g.cols; ++j) gb.at(0, j) += gr[j];
      }
    };
    return id;
  }

  // y = x . W (+ bias). x [n x in], W [in x out], bias [1 x out] or -1.
  int linear(int x, int w, int bias = -1) {
    int y = matmul(x, w);
    if (bias >= 0) y = add_bias(y, bias);
    return y;
  }

  // Repeat a [1 x c] row n times.
  int broadcast_row(int row, int n) {
    const Mat<T>& R = val(row);
    if (R.rows != 1)
      fail(ErrorKind::contract,
           "broadcast_row: expected single row, got " + R.shape_str());
    Mat<T> out(n, R.cols);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < R.cols; ++j) out.at(i, j) = R.at(0, j);
    int id = push("broadcast_row", {row}, std::move(out), {});
    node(id).back = [this, id, row](std::vector<Mat<T>>& adj) {
      const Mat<T>& g = adj[size_t(id)];
      Mat<T>& gr = acc(adj, row);
      for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < g.cols; ++j) gr.at(0, j) += g.at(i, j);
    };
    return id;
  }

  // Horizontal concatenation: all parts share the row count.
  int concat_rows(const std::vector<int>& parts) {
    if (parts.empty()) fail(ErrorKind::contract, "concat_rows: no parts");
    int n = val(parts[0]).rows;
    int total = 0;
    for (int p : parts) {
      if (val(p).rows != n)
        fail(ErrorKind::contract, "concat_rows: row count mismatch, " +
                                      val(parts[0]).shape_str() + " vs " +
                                      val(p).shape_str());
      total += val(p).cols;
    }
    Mat<T> out(n, total);
    int at = 0;
    for (int p : parts) {
      const Mat<T>& P = val(p);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < P.cols; ++j) out.at(i, at + j) = P.at(i, j);
      at += P.cols;
    }
    int id = push("concat_rows", parts, std::move(out), {});
    auto parts_copy = parts;
    node(id).back = [this, id, parts_copy](std::vector<Mat<T>>& adj) {
      const Mat<T>& g = adj[size_t(id)];
      int at = 0;
      for (int p : parts_copy) {
        Mat<T>& gp = acc(adj, p);
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < gp.cols; ++j) gp.at(i, j) += g.at(i, at + j);
        at += gp.cols;
      }
    };
    return id;
  }

  // Vertical stack: all parts share the column count.
  int vconcat(const std::vector<int>& parts) {
    if (parts.empty()) fail(ErrorKind::contract, "vconcat: no parts");
    int c = val(parts[0]).cols;
    int total = 0;
    for (int p : parts) {
      if (val(p).cols != c)
        fail(ErrorKind::contract, "vconcat: column count mismatch, " +
                                      val(parts[0]).shape_str() + " vs " +
                                      val(p).shape_str());
      total += val(p).rows;
    }
    Mat<T> out(total, c);
    int at = 0;
    for (int p : parts) {
      const Mat<T>& P = val(p);
      for (int i = 0; i < P.rows; ++i)
        for (int j = 0; j < c; ++j) out.at(at + i, j) = P.at(i, j);
      at += P.rows;
    }
    int id = push("vconcat", parts, std::move(out), {});
    auto parts_copy = parts;
    node(id).back = [this, id, parts_copy](std::vector<Mat<T>>& adj) {
      const Mat<T>& g = adj[size_t(id)];
      int at = 0;
      for (int p : parts_copy) {
        Mat<T>& gp = acc(adj, p);
        for (int i = 0; i < gp.rows; ++i)
          for (int j = 0; j < g.cols; ++j) gp.at(i, j) += g.at(at + i, j);
        at += gp.rows;
      }
    };
    return id;
  }

  // out[i, :] = x[idx[i], :]
  int gather_rows(int x, IndexVec idx) {
    const Mat<T>& X = val(x);
    for (int i : *idx)
      if (i < 0 || i >= X.rows)
        fail(ErrorKind::contract, "gather_rows: index " + std::to_string(i) +
                                      " out of range for " + X.shape_str());
    Mat<T> out(int(idx->size()), X.cols);
    for (size_t i = 0; i < idx->size(); ++i) {
      const T* src = X.row((*idx)[i]);
      T* dst = out.row(int(i));
      for (int j = 0; j < X.cols; ++j) dst[j] = src[j];
    }
    int id = push("gather_rows", {x}, std::move(out), {});
    node(id).back = [this, id, x, idx](std::vector<Mat<T>>& adj) {
      const Mat<T>& g = adj[size_t(id)];
      Mat<T>& gx = acc(adj, x);
      for (size_t i = 0; i < idx->size(); ++i) {
        T* dst = gx.row((*idx)[i]);
        const T* src = g.row(int(i));
        for (int j = 0; j < g.cols; ++j) dst[j] += src[j];
      }
    };
    return id;
  }

  // out has out_rows rows; out[idx[i], :] += x[i, :]. Rows of `out` that no
  // index touches stay zero.
  int scatter_rows(int x, IndexVec idx, int out_rows) {
    const Mat<T>& X = val(x);
    if (int(idx->size()) != X.rows)
      fail(ErrorKind::contract, "scatter_rows: index count " +
                                    std::to_string(idx->size()) +
                                    " != rows of " + X.shape_str());
    for (int i : *idx)
      if (i < 0 || i >= out_rows)
        fail(ErrorKind::contract, "scatter_rows: index " + std::to_string(i) +
                                      " out of range 0.." +
                                      std::to_string(out_rows - 1));
    Mat<T> out(out_rows, X.cols);
    for (size_t i = 0; i < idx->size(); ++i) {
      T* dst = out.row((*idx)[i]);
      const T* src = X.row(int(i));
      for (int j = 0; j < X.cols; ++j) dst[j] += src[j];
    }
    int id = push("scatter_rows", {x}, std::move(out), {});
    node(id).back = [this, id, x, idx](std::vector<Mat<T>>& adj) {
      const Mat<T>& g = adj[size_t(id)];
      Mat<T>& gx = acc(adj, x);
      for (size_t i = 0; i < idx->size(); ++i) {
        T* dst = gx.row(int(i));
        const T* src = g.row((*idx)[i]);
        for (int j = 0; j < g.cols; ++j) dst[j] += src[j];
      }
    };
    return id;
  }

  int leaky_relu(int x, T negative_slope) {
    const Mat<T>& X = val(x);
    Mat<T> out = X;
    for (auto& v : out.d)
      if (v < T(0)) v *= negative_slope;
    int id = push("leaky_relu", {x}, std::move(out), {});
    node(id).back = [this, id, x, negative_slope](std::vector<Mat<T>>& adj) {
      const Mat<T>& g = adj[size_t(id)];
      const Mat<T>& X = val(x);
      Mat<T>& gx = acc(adj, x);
      for (size_t i = 0; i < g.d.size(); ++i)
        gx.d[i] += (X.d[i] < T(0) ? negative_slope : T(1)) * g.d[i];
    };
    return id;
  }

  int scale(int x, T c) {
    Mat<T> out = val(x);
    for (auto& v : out.d) v *= c;
    int id = push("scale", {x}, std::move(out), {});
    node(id).back = [this, id, x, c](std::vector<Mat<T>>& adj) {
      const Mat<T>& g = adj[size_t(id)];
      Mat<T>& gx = acc(adj, x);
      for (size_t i = 0; i < g.d.size(); ++i) gx.d[i] += c * g.d[i];
    };
    return id;
  }

  // Per-head dot products against segments of a weight vector.
  // x [n x d], a [1 x d], heads H with H | d; out[i, h] = x[i, seg_h] . a[seg_h].
  int head_scores(int x, int a, int heads) {
    const Mat<T>& X = val(x);
    const Mat<T>& A = val(a);
    if (A.rows != 1 || A.cols != X.cols)
      fail(ErrorKind::contract, "head_scores: weight must be 1x" +
                                    std::to_string(X.cols) + ", got " +
                                    A.shape_str());
    if (heads < 1 || X.cols % heads != 0)
      fail(ErrorKind::contract, "head_scores: heads must divide feature dim");
    int seg = X.cols / heads;
    Mat<T> out(X.rows, heads);
    for (int i = 0; i < X.rows; ++i) {
      const T* xr = X.row(i);
      for (int h = 0; h < heads; ++h) {
        T s = 0;
        for (int j = h * seg; j < (h + 1) * seg; ++j) s += xr[j] * A.at(0, j);
        out.at(i, h) = s;
      }
    }
    int id = push("head_scores", {x, a}, std::move(out), {});
    node(id).back = [this, id, x, a, heads, seg](std::vector<Mat<T>>& adj) {
      const Mat<T>& g = adj[size_t(id)];
      const Mat<T>& X = val(x);
      const Mat<T>& A = val(a);
      Mat<T>& gx = acc(adj, x);
      Mat<T>& ga = acc(adj, a);
      for (int i = 0; i < X.rows; ++i) {
        const T* xr = X.row(i);
        T* gxr = gx.row(i);
        for (int h = 0; h < heads; ++h) {
          T gv = g.at(i, h);
          if (gv == T(0)) continue;
          for (int j = h * seg; j < (h + 1) * seg; ++j) {
            gxr[j] += gv * A.at(0, j);
            ga.at(0, j) += gv * xr[j];
          }
        }
      }
    };
    return id;
  }

  // Softmax within each contiguous group, independently per column.
  // logits [n x H]; offsets partition rows into groups; within each
  // (group, column) the outputs sum to 1 and are strictly positive.
  int masked_softmax(int logits, IndexVec offsets) {
    const Mat<T>& L = val(logits);
    check_groups(offsets, L.rows, "masked_softmax");
    Mat<T> out(L.rows, L.cols);
    const auto& off = *offsets;
    for (size_t gi = 0; gi + 1 < off.size(); ++gi) {
      for (int c = 0; c < L.cols; ++c) {
        T mx = L.at(off[gi], c);
        for (int i = off[gi]; i < off[gi + 1]; ++i)
          if (L.at(i, c) > mx) mx = L.at(i, c);
        T sum = 0;
        for (int i = off[gi]; i < off[gi + 1]; ++i) {
          T e = std::exp(L.at(i, c) - mx);
          out.at(i, c) = e;
          sum += e;
        }
        for (int i = off[gi]; i < off[gi + 1]; ++i) out.at(i, c) /= sum;
      }
    }
    int id = push("masked_softmax", {logits}, std::move(out), {});
    node(id).back = [this, id, logits, offsets](std::vector<Mat<T>>& adj) {
      const Mat<T>& g = adj[size_t(id)];
      const Mat<T>& P = val(id);
      Mat<T>& gl = acc(adj, logits);
      const auto& off = *offsets;
      for (size_t gi = 0; gi + 1 < off.size(); ++gi) {
        for (int c = 0; c < P.cols; ++c) {
          T dot = 0;
          for (int i = off[gi]; i < off[gi + 1]; ++i)
            dot += P.at(i, c) * g.at(i, c);
          for (int i = off[gi]; i < off[gi + 1]; ++i)
            gl.at(i, c) += P.at(i, c) * (g.at(i, c) - dot);
        }
      }
    };
    return id;
  }

  // Row-wise softmax over all columns.
  int softmax_rows(int x) {
    const Mat<T>& X = val(x);
    if (X.cols < 1)
      fail(ErrorKind::contract, "softmax_rows: need at least one column");
    Mat<T> out(X.rows, X.cols);
    for (int i = 0; i < X.rows; ++i) {
      const T* xr = X.row(i);
      T* outr = out.row(i);
      T mx = xr[0];
      for (int j = 1; j < X.cols; ++j)
        if (xr[j] > mx) mx = xr[j];
      T sum = 0;
      for (int j = 0; j < X.cols; ++j) {
        outr[j] = std::exp(xr[j] - mx);
        sum += outr[j];
      }
      for (int j = 0; j < X.cols; ++j) outr[j] /= sum;
    }
    int id = push("softmax_rows", {x}, std::move(out), {});
    node(id).back = [this, id, x](std::vector<Mat<T>>& adj) {
      const Mat<T>& g = adj[size_t(id)];
      const Mat<T>& P = val(id);
      Mat<T>& gx = acc(adj, x);
      for (int i = 0; i < P.rows; ++i) {
        T dot = 0;
        for (int j = 0; j < P.cols; ++j) dot += P.at(i, j) * g.at(i, j);
        for (int j = 0; j < P.cols; ++j)
          gx.at(i, j) += P.at(i, j) * (g.at(i, j) - dot);
      }
    };
    return id;
  }

  // Per-group weighted sum of rows. weights [n x H], rows [n x d] with H | d;
  // out[g, j] = sum over group rows i of weights[i, head(j)] * rows[i, j].
  int weighted_sum(int weights, int rows, IndexVec offsets) {
    const Mat<T>& W = val(weights);
    const Mat<T>& R = val(rows);
    if (W.rows != R.rows)
      fail(ErrorKind::contract, "weighted_sum: row count mismatch, " +
                                    W.shape_str() + " vs " + R.shape_str());
    if (W.cols < 1 || R.cols % W.cols != 0)
      fail(ErrorKind::contract,
           "weighted_sum: weight columns must divide row dim");
    check_groups(offsets, R.rows, "weighted_sum");
    const auto& off = *offsets;
    int groups = int(off.size()) - 1;
    int seg = R.cols / W.cols;
    Mat<T> out(groups, R.cols);
    for (int g = 0; g < groups; ++g) {
      T* outr = out.row(g);
      for (int i = off[size_t(g)]; i < off[size_t(g) + 1]; ++i) {
        const T* rr = R.row(i);
        for (int j = 0; j < R.cols; ++j) outr[j] += W.at(i, j / seg) * rr[j];
      }
    }
    int id = push("weighted_sum", {weights, rows}, std::move(out), {});
    node(id).back = [this, id, weights, rows, offsets,
                     seg](std::vector<Mat<T>>& adj) {
      const Mat<T>& g = adj[size_t(id)];
      const Mat<T>& W = val(weights);
      const Mat<T>& R = val(rows);
      Mat<T>& gw = acc(adj, weights);
      Mat<T>& gr = acc(adj, rows);
      const auto& off = *offsets;
      for (size_t gi = 0; gi + 1 < off.size(); ++gi) {
        const T* gout = g.row(int(gi));
        for (int i = off[gi]; i < off[gi + 1]; ++i) {
          const T* rr = R.row(i);
          T* grr = gr.row(i);
          for (int j = 0; j < R.cols; ++j) {
            int h = j / seg;
            gw.at(i, h) += gout[j] * rr[j];
            grr[j] += W.at(i, h) * gout[j];
          }
        }
      }
    };
    return id;
  }

  // Row-wise mixture: out[i, :] = sum_k w[i, k] * parts[k][i, :].
  int mix_rows(int w, const std::vector<int>& parts) {
    const Mat<T>& W = val(w);
    if (int(parts.size()) != W.cols)
      fail(ErrorKind::contract, "mix_rows: " + std::to_string(parts.size()) +
                                    " parts but weights are " + W.shape_str());
    const Mat<T>& P0 = val(parts[0]);
    for (int p : parts)
      if (!val(p).same_shape(P0))
        fail(ErrorKind::contract, "mix_rows: part shape mismatch, " +
                                      P0.shape_str() + " vs " +
                                      val(p).shape_str());
    if (P0.rows != W.rows)
      fail(ErrorKind::contract, "mix_rows: weight rows " + W.shape_str() +
                                    " vs part rows " + P0.shape_str());
    Mat<T> out(P0.rows, P0.cols);
    for (size_t k = 0; k < parts.size(); ++k) {
      const Mat<T>& P = val(parts[k]);
      for (int i = 0; i < P.rows; ++i) {
        T wv = W.at(i, int(k));
        const T* pr = P.row(i);
        T* outr = out.row(i);
        for (int j = 0; j < P.cols; ++j) outr[j] += wv * pr[j];
      }
    }
    std::vector<int> ins = parts;
    ins.push_back(w);
    int id = push("mix_rows", ins, std::move(out), {});
    auto parts_copy = parts;
    node(id).back = [this, id, w, parts_copy](std::vector<Mat<T>>& adj) {
      const Mat<T>& g = adj[size_t(id)];
      const Mat<T>& W = val(w);
      Mat<T>& gw = acc(adj, w);
      for (size_t k = 0; k < parts_copy.size(); ++k) {
        const Mat<T>& P = val(parts_copy[k]);
        Mat<T>& gp = acc(adj, parts_copy[k]);
        for (int i = 0; i < P.rows; ++i) {
          const T* gr = g.row(i);
          const T* pr = P.row(i);
          T* gpr = gp.row(i);
          T wv = W.at(i, int(k));
          T dot = 0;
          for (int j = 0; j < P.cols; ++j) {
            dot += gr[j] * pr[j];
            gpr[j] += wv * gr[j];
          }
          gw.at(i, int(k)) += dot;
        }
      }
    };
    return id;
  }

  // Mean over rows of -log softmax(logits)[label]. Scalar output.
  int cross_entropy(int logits, IndexVec labels) {
    const Mat<T>& L = val(logits);
    if (int(labels->size()) != L.rows)
      fail(ErrorKind::contract, "cross_entropy: " +
                                    std::to_string(labels->size()) +
                                    " labels for " + L.shape_str());
    if (L.rows == 0)
      fail(ErrorKind::contract, "cross_entropy: empty batch");
    for (int y : *labels)
      if (y < 0 || y >= L.cols)
        fail(ErrorKind::contract, "cross_entropy: label " + std::to_string(y) +
                                      " out of range for " +
                                      std::to_string(L.cols) + " classes");
    T total = 0;
    for (int i = 0; i < L.rows; ++i) {
      const T* r = L.row(i);
      T mx = r[0];
      for (int j = 1; j < L.cols; ++j)
        if (r[j] > mx) mx = r[j];
      T sum = 0;
      for (int j = 0; j < L.cols; ++j) sum += std::exp(r[j] - mx);
      T lse = mx + std::log(sum);
      total += lse - r[(*labels)[size_t(i)]];
    }
    Mat<T> out = Mat<T>::filled(1, 1, total / T(L.rows));
    if (!out.all_finite())
      fail(ErrorKind::runtime, "cross_entropy: non-finite loss");
    int id = push("cross_entropy", {logits}, std::move(out), {});
    node(id).back = [this, id, logits, labels](std::vector<Mat<T>>& adj) {
      T a = adj[size_t(id)].at(0, 0);
      const Mat<T>& L = val(logits);
      Mat<T>& gl = acc(adj, logits);
      T inv_n = T(1) / T(L.rows);
      for (int i = 0; i < L.rows; ++i) {
        const T* r = L.row(i);
        T mx = r[0];
        for (int j = 1; j < L.cols; ++j)
          if (r[j] > mx) mx = r[j];
        T sum = 0;
        for (int j = 0; j < L.cols; ++j) sum += std::exp(r[j] - mx);
        for (int j = 0; j < L.cols; ++j) {
          T p = std::exp(r[j] - mx) / sum;
          T ind = (j == (*labels)[size_t(i)]) ? T(1) : T(0);
          gl.at(i, j) += a * inv_n * (p - ind);
        }
      }
    };
    return id;
  }

  // Mean over all entries of binary cross-entropy with logits.
  // targets entries must be 0 or 1; targets are constants, not differentiated.
  int binary_cross_entropy(int logits, Mat<T> targets) {
    const Mat<T>& L = val(logits);
    if (!L.same_shape(targets))
      fail(ErrorKind::contract, "binary_cross_entropy: shape mismatch, " +
                                    L.shape_str() + " vs " +
                                    targets.shape_str());
    if (L.rows == 0)
      fail(ErrorKind::contract, "binary_cross_entropy: empty batch");
    for (T y : targets.d)
      if (y != T(0) && y != T(1))
        fail(ErrorKind::contract,
             "binary_cross_entropy: targets must be 0 or 1");
    T total = 0;
    for (size_t i = 0; i < L.d.size(); ++i) {
      T z = L.d[i];
      T y = targets.d[i];
      T m = z > T(0) ? z : T(0);
      total += m - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    Mat<T> out = Mat<T>::filled(1, 1, total / T(L.d.size()));
    if (!out.all_finite())
      fail(ErrorKind::runtime, "binary_cross_entropy: non-finite loss");
    int id = push("binary_cross_entropy", {logits}, std::move(out), {});
    auto tgt = std::make_shared<Mat<T>>(std::move(targets));
    node(id).back = [this, id, logits, tgt](std::vector<Mat<T>>& adj) {
      T a = adj[size_t(id)].at(0, 0);
      const Mat<T>& L = val(logits);
      Mat<T>& gl = acc(adj, logits);
      T inv_n = T(1) / T(L.d.size());
      for (size_t i = 0; i < L.d.size(); ++i) {
        T z = L.d[i];
        T s = z >= T(0) ? T(1) / (T(1) + std::exp(-z))
                        : std::exp(z) / (T(1) + std::exp(z));
        gl.d[i] += a * inv_n * (s - tgt->d[i]);
      }
    };
    return id;
  }

private:
  struct Node {
    const char* op;
    std::vector<int> inputs;
    Mat<T> value;
    Mat<T> grad;
    BackFn back;
  };

  Node& node(int id) {
    if (id < 0 || size_t(id) >= nodes_.size())
      fail(ErrorKind::contract, "tape: bad value id " + std::to_string(id));
    return nodes_[size_t(id)];
  }
  const Node& node(int id) const {
    return const_cast<Tape*>(this)->node(id);
  }

  Mat<T>& acc(std::vector<Mat<T>>& adj, int id) {
    Mat<T>& m = adj[size_t(id)];
    const Mat<T>& v = node(id).value;
    if (m.rows != v.rows || m.cols != v.cols) m = Mat<T>(v.rows, v.cols);
    return m;
  }

  int push(const char* op, std::vector<int> inputs, Mat<T> value, BackFn fn) {
    nodes_.push_back(Node{op, std::move(inputs), std::move(value),
                          Mat<T>(), std::move(fn)});
    return int(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

}  // namespace struchis
