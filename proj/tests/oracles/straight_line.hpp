#pragma once

// Independent reference implementations of the model's forward math, written
// as plain loops over doubles. They read parameter values by name and share
// no code with the autodiff ops.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "user/model/user_model.hpp"
#include "user/numerics/graph.hpp"
#include "user/text/tokenizer.hpp"

namespace user::oracle {

using M = Eigen::MatrixXd;
using V = Eigen::VectorXd;
using Mask = std::vector<bool>;

inline bool valid(const Mask& m, Eigen::Index i) { return m.empty() || m[static_cast<std::size_t>(i)]; }

inline M param(const ad::ParamStore<double>& s, const std::string& name) {
  auto id = s.find(name);
  if (!id.valid()) throw std::runtime_error("oracle: no parameter " + name);
  return s[id].value;
}

inline V softmax(const V& x, const Mask& mask) {
  double mx = -INFINITY;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (valid(mask, i) && x(i) > mx) mx = x(i);
  V y = V::Zero(x.size());
  if (!std::isfinite(mx)) return y;
  double z = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (valid(mask, i)) z += (y(i) = std::exp(x(i) - mx));
  return y / z;
}

inline M matmul(const M& a, const M& b) {
  M c = M::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline M tanh(const M& a) {
  M y(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.size(); ++i) y.data()[i] = std::tanh(a.data()[i]);
  return y;
}

inline double cosine(const V& a, const V& b) {
  double ab = 0, aa = 0, bb = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    ab += a(i) * b(i);
    aa += a(i) * a(i);
    bb += b(i) * b(i);
  }
  if (aa == 0 || bb == 0) return 0;
  return ab / std::sqrt(aa * bb);
}

inline V layer_norm(const V& x, const V& gain, const V& bias) {
  const double n = static_cast<double>(x.size());
  double mu = 0, var = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) mu += x(i) / n;
  for (Eigen::Index i = 0; i < x.size(); ++i) var += (x(i) - mu) * (x(i) - mu) / n;
  V y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) y(i) = gain(i) * (x(i) - mu) / std::sqrt(var + 1e-5) + bias(i);
  return y;
}

/// Post-norm encoder block; columns are positions.
inline M transformer_block(const ad::ParamStore<double>& s, const std::string& p, const M& x, int heads,
                           const Mask& key_mask) {
  const M wq = param(s, p + ".wq"), wk = param(s, p + ".wk"), wv = param(s, p + ".wv"), wo = param(s, p + ".wo");
  const V bo = param(s, p + ".bo"), g1 = param(s, p + ".ln1.gain"), c1 = param(s, p + ".ln1.bias");
  const M w1 = param(s, p + ".ffn.w1"), w2 = param(s, p + ".ffn.w2");
  const V b1 = param(s, p + ".ffn.b1"), b2 = param(s, p + ".ffn.b2");
  const V g2 = param(s, p + ".ln2.gain"), c2 = param(s, p + ".ln2.bias");
  const M q = matmul(wq, x), k = matmul(wk, x), v = matmul(wv, x);
  const Eigen::Index n = x.cols(), dk = q.rows() / heads, dv = v.rows() / heads;
  M mixed = M::Zero(v.rows(), n);
  for (int h = 0; h < heads; ++h)
    for (Eigen::Index j = 0; j < n; ++j) {
      V scores(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        double dot = 0;
        for (Eigen::Index r = 0; r < dk; ++r) dot += q(h * dk + r, j) * k(h * dk + r, i);
        scores(i) = dot / std::sqrt(static_cast<double>(dk));
      }
      const V a = softmax(scores, key_mask);
      for (Eigen::Index r = 0; r < dv; ++r) {
        double acc = 0;
        for (Eigen::Index i = 0; i < n; ++i) acc += a(i) * v(h * dv + r, i);
        mixed(h * dv + r, j) = acc;
      }
    }
  const M att = matmul(wo, mixed);
  M out(x.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    V y = layer_norm(x.col(j) + att.col(j) + bo, g1, c1);
    V hidden = matmul(w1, y) + b1;
    for (Eigen::Index i = 0; i < hidden.size(); ++i) hidden(i) = std::max(0.0, hidden(i));
    V f = matmul(w2, hidden) + b2;
    out.col(j) = layer_norm(y + f, g2, c2);
  }
  return out;
}

struct CoAttention {
  V rq, rd, aq, ad;
};

/// A = tanh(C_Q^T W_l C_D); H^Q = tanh(W_q C_Q + (W_d C_D) A^T);
/// H^D = tanh(W_d C_D + (W_q C_Q) A); a = softmax(w_h^T H); r = C a.
inline CoAttention coattention(const ad::ParamStore<double>& s, const M& cq, const Mask& mq, const M& cd,
                               const Mask& md) {
  const M wl = param(s, "session.coatt.wl"), wq = param(s, "session.coatt.wq"), wd = param(s, "session.coatt.wd");
  const V whq = param(s, "session.coatt.whq"), whd = param(s, "session.coatt.whd");
  const M a = tanh(matmul(matmul(cq.transpose(), wl), cd));
  const M pq = matmul(wq, cq), pd = matmul(wd, cd);
  const M hq = tanh(pq + matmul(pd, a.transpose()));
  const M hd = tanh(pd + matmul(pq, a));
  CoAttention out;
  out.aq = softmax(matmul(whq.transpose(), hq).transpose(), mq);
  out.ad = softmax(matmul(whd.transpose(), hd).transpose(), md);
  out.rq = matmul(cq, out.aq);
  out.rd = matmul(cd, out.ad);
  return out;
}

inline V fuse(const ad::ParamStore<double>& s, const V& rq, const V& rd) {
  V cat(rq.size() + rd.size());
  cat << rq, rd;
  return tanh(matmul(param(s, "session.fusion.w"), cat) + V(param(s, "session.fusion.b")));
}

/// Session transformer over item columns (plus an optional target column)
/// with position rows 0..n and type rows (0 = search, 1 = browse).
inline M session_transform(const ad::ParamStore<double>& s, const M& items, const std::vector<int>& types, int heads) {
  const M pos = param(s, "session.position"), type = param(s, "session.type");
  M x = items;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    x.col(j) += pos.row(j).transpose() + type.row(types[static_cast<std::size_t>(j)]).transpose();
  return transformer_block(s, "session.transformer", x, heads, {});
}

/// History transformer over [H, x]; valid history columns take positions
/// 0..t-1 in order, the target takes t. Returns the target's output.
inline V history_fuse(const ad::ParamStore<double>& s, const M& h, const Mask& mask, const V& x, int heads) {
  const M pos = param(s, "history.position");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < h.cols(); ++j)
    if (valid(mask, j)) keep.push_back(j);
  M seq(x.size(), static_cast<Eigen::Index>(keep.size()) + 1);
  for (std::size_t i = 0; i < keep.size(); ++i)
    seq.col(static_cast<Eigen::Index>(i)) = h.col(keep[i]) + pos.row(static_cast<Eigen::Index>(i)).transpose();
  seq.col(seq.cols() - 1) = x + pos.row(static_cast<Eigen::Index>(keep.size())).transpose();
  const M out = transformer_block(s, "history.transformer", seq, heads, {});
  return out.col(out.cols() - 1);
}

inline std::vector<double> kernel_mus() {
  std::vector<double> mu{1.0};
  for (int k = 0; k < 10; ++k) mu.push_back(-0.9 + 0.2 * k);
  return mu;
}

inline std::vector<double> kernel_sigmas() {
  std::vector<double> s(11, 0.1);
  s[0] = 1e-3;
  return s;
}

/// Pooled kernel features over a similarity matrix (rows: query terms).
inline V kernel_features(const M& sim, const Mask& mq, const Mask& md) {
  const auto mu = kernel_mus();
  const auto sg = kernel_sigmas();
  V phi = V::Zero(11);
  for (int k = 0; k < 11; ++k)
    for (Eigen::Index i = 0; i < sim.rows(); ++i) {
      if (!valid(mq, i)) continue;
      double total = 0;
      for (Eigen::Index j = 0; j < sim.cols(); ++j)
        if (valid(md, j)) total += std::exp(-std::pow(sim(i, j) - mu[k], 2) / (2 * sg[k] * sg[k]));
      phi(k) += std::log(std::max(total, 1e-10));
    }
  return phi;
}

inline double knrm(const ad::ParamStore<double>& s, const M& cq, const Mask& mq, const M& cd, const Mask& md) {
  M sim(cq.cols(), cd.cols());
  for (Eigen::Index i = 0; i < cq.cols(); ++i)
    for (Eigen::Index j = 0; j < cd.cols(); ++j) sim(i, j) = cosine(cq.col(i), cd.col(j));
  const V w = param(s, "head.knrm.w");
  const V phi = kernel_features(sim, mq, md);
  double out = 0;
  for (int k = 0; k < 11; ++k) out += w(k) * phi(k);
  return out;
}

/// Phi over [cos(I^s, r^D), cos(I^l, r^D), cos(I^s, r^D_l), cos(I^l, r^D_l), knrm, F].
inline double unified_score(const ad::ParamStore<double>& s, const V& is, const V& il, const V& d, const V& dl,
                            double knrm_score, const std::vector<double>& features) {
  std::vector<double> f{cosine(is, d), cosine(il, d), cosine(is, dl), cosine(il, dl), knrm_score};
  f.insert(f.end(), features.begin(), features.end());
  const M w = param(s, "head.w");
  double out = param(s, "head.b")(0, 0);
  for (std::size_t i = 0; i < f.size(); ++i) out += w(0, static_cast<Eigen::Index>(i)) * f[i];
  return out;
}

struct Text {
  M C;
  V r;
  Mask mask;
};

inline Text encode_text(const ad::ParamStore<double>& s, const TokenSeq& seq, int heads) {
  const M emb = param(s, "text.embedding");
  const M wv = param(s, "text.attention.wv"), qw = param(s, "text.attention.qw");
  const V bv = param(s, "text.attention.bv");
  Text out;
  out.mask = seq.mask;
  const auto m = static_cast<Eigen::Index>(seq.ids.size());
  if (seq.valid() == 0) {
    out.C = M::Zero(emb.cols(), m);
    out.r = V::Zero(emb.cols());
    return out;
  }
  M x(emb.cols(), m);
  for (Eigen::Index j = 0; j < m; ++j) x.col(j) = emb.row(seq.ids[static_cast<std::size_t>(j)]).transpose();
  out.C = transformer_block(s, "text.transformer", x, heads, seq.mask);
  M h = matmul(wv, out.C);
  for (Eigen::Index j = 0; j < m; ++j) h.col(j) += bv;
  const V alpha = softmax(matmul(qw.transpose(), tanh(h)).transpose(), seq.mask);
  out.r = matmul(out.C, alpha);
  return out;
}

/// Scores every candidate of an impression through the whole model.
inline std::vector<double> score_impression(const UserModel<double>& model, const Impression& imp) {
  const auto& s = model.params();
  const auto& cfg = model.config();
  const int heads = cfg.heads;
  auto text = [&](const std::string& t) {
    return encode_text(s, tokenize(t, model.vocab(), static_cast<std::size_t>(cfg.max_len)), heads);
  };
  auto usable = [](const Behavior& b) {
    if (b.is_browse()) return true;
    for (const auto& r : b.results)
      if (r.clicked) return true;
    return false;
  };
  // Behavior vectors and type rows of the last max_session_len usable behaviors.
  auto session = [&](const Session& sess, std::vector<int>& types) {
    std::vector<const Behavior*> bs;
    for (const auto& b : sess.behaviors)
      if (usable(b)) bs.push_back(&b);
    if (bs.size() > static_cast<std::size_t>(cfg.max_session_len))
      bs.erase(bs.begin(), bs.end() - cfg.max_session_len);
    M cols(cfg.dim, static_cast<Eigen::Index>(bs.size()));
    for (std::size_t i = 0; i < bs.size(); ++i) {
      const Behavior& b = *bs[i];
      if (b.is_browse()) {
        cols.col(static_cast<Eigen::Index>(i)) = text(b.doc.title).r;
        types.push_back(1);
        continue;
      }
      const Text q = text(b.query);
      std::vector<Text> docs;
      Eigen::Index width = 0;
      for (const auto& r : b.results)
        if (r.clicked) {
          docs.push_back(text(r.doc.title));
          width += docs.back().C.cols();
        }
      M cd(cfg.dim, width);
      Mask md;
      Eigen::Index at = 0;
      for (const auto& d : docs) {
        cd.middleCols(at, d.C.cols()) = d.C;
        at += d.C.cols();
        md.insert(md.end(), d.mask.begin(), d.mask.end());
      }
      const auto co = coattention(s, q.C, q.mask, cd, md);
      cols.col(static_cast<Eigen::Index>(i)) = fuse(s, co.rq, co.rd);
      types.push_back(0);
    }
    return cols;
  };

  V intent;
  Text query;
  if (imp.task == Task::Search) {
    query = text(imp.query);
    intent = query.r;
  } else {
    intent = param(s, "session.user_embedding").row(model.user_row(imp.user)).transpose();
  }
  std::vector<int> types;
  M cur = session(imp.history.current, types);
  M with_target(cfg.dim, cur.cols() + 1);
  with_target << cur, intent;
  types.push_back(imp.task == Task::Search ? 0 : 1);
  const V is = session_transform(s, with_target, types, heads).rightCols(1);

  std::vector<M> parts;
  Eigen::Index width = 0;
  const auto& lt = imp.history.long_term;
  const std::size_t first = lt.size() > static_cast<std::size_t>(cfg.max_sessions) ? lt.size() - cfg.max_sessions : 0;
  for (std::size_t i = first; i < lt.size(); ++i) {
    std::vector<int> t;
    M items = session(lt[i], t);
    if (items.cols() == 0) continue;
    parts.push_back(session_transform(s, items, t, heads));
    width += items.cols();
  }
  M h(cfg.dim, width);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    h.middleCols(at, p.cols()) = p;
    at += p.cols();
  }
  const V il = history_fuse(s, h, {}, is, heads);

  std::vector<double> out;
  for (std::size_t c = 0; c < imp.candidates.size(); ++c) {
    const Text d = text(imp.candidates[c].title);
    const V dl = history_fuse(s, h, {}, d.r, heads);
    double k = 0;
    std::vector<double> f(kFeatureCount, 0.0);
    if (imp.task == Task::Search) {
      k = knrm(s, query.C, query.mask, d.C, d.mask);
      if (c < imp.features.size()) f.assign(imp.features[c].begin(), imp.features[c].end());
    }
    out.push_back(unified_score(s, is, il, d.r, dl, k, f));
  }
  return out;
}

}  // namespace user::oracle
