#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "hybkit/errors.hpp"
#include "hybkit/grid.hpp"
#include "json.hpp"

namespace hybkit {

// One affine term a'x + b'u + h over the joint point z = (x, u).
struct AffineTerm {
  Eigen::VectorXd a;  // state coefficients, length n
  Eigen::VectorXd b;  // input coefficients, length m
  double h = 0.0;

  int dim() const { return static_cast<int>(a.size() + b.size()); }

  double eval(const Eigen::VectorXd& z) const {
    const Eigen::Index n = a.size();
    return a.dot(z.head(n)) + b.dot(z.tail(z.size() - n)) + h;
  }

  static AffineTerm zero(int n, int m) {
    return AffineTerm{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(m), 0.0};
  }
};

// Continuous piecewise-affine function in difference-of-maxima form:
//   f(z) = max_p plus[p](z) - max_q minus[q](z)
struct MmpsFunction {
  std::vector<AffineTerm> plus;
  std::vector<AffineTerm> minus;

  int p_plus() const { return static_cast<int>(plus.size()); }
  int p_minus() const { return static_cast<int>(minus.size()); }
  int state_dim() const { return plus.empty() ? 0 : static_cast<int>(plus.front().a.size()); }
  int input_dim() const { return plus.empty() ? 0 : static_cast<int>(plus.front().b.size()); }
  int dim() const { return plus.empty() ? 0 : plus.front().dim(); }

  double eval(const Eigen::VectorXd& z) const {
    double best_p = plus.front().eval(z);
    for (std::size_t i = 1; i < plus.size(); ++i)
      best_p = std::max(best_p, plus[i].eval(z));
    double best_q = minus.front().eval(z);
    for (std::size_t i = 1; i < minus.size(); ++i)
      best_q = std::max(best_q, minus[i].eval(z));
    return best_p - best_q;
  }

  // argmax in each max operator, ties broken toward the lowest index so the
  // selected piece (and hence any assembled Jacobian) is deterministic
  std::pair<int, int> active_indices(const Eigen::VectorXd& z) const {
    int pi = 0, qi = 0;
    double best_p = plus.front().eval(z);
    for (int i = 1; i < p_plus(); ++i) {
      double v = plus[static_cast<std::size_t>(i)].eval(z);
      if (v > best_p) {
        best_p = v;
        pi = i;
      }
    }
    double best_q = minus.front().eval(z);
    for (int i = 1; i < p_minus(); ++i) {
      double v = minus[static_cast<std::size_t>(i)].eval(z);
      if (v > best_q) {
        best_q = v;
        qi = i;
      }
    }
    return {pi, qi};
  }

  // derivative of eval w.r.t. the flattened parameter vector: +[z;1] on the
  // active plus term, -[z;1] on the active minus term, zero elsewhere
  Eigen::VectorXd gradient_params(const Eigen::VectorXd& z) const {
    const int stride = dim() + 1;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(
        (p_plus() + p_minus()) * stride));
    auto [pi, qi] = active_indices(z);
    g.segment(pi * stride, dim()) = z;
    g[pi * stride + dim()] = 1.0;
    const int off = (p_plus() + qi) * stride;
    g.segment(off, dim()) = -z;
    g[off + dim()] = -1.0;
    return g;
  }

  // parameter order: all plus terms then all minus terms, each (a.., b.., h)
  Eigen::VectorXd flatten() const {
    const int stride = dim() + 1;
    Eigen::VectorXd v(static_cast<Eigen::Index>((p_plus() + p_minus()) * stride));
    Eigen::Index at = 0;
    auto put = [&](const AffineTerm& t) {
      v.segment(at, t.a.size()) = t.a;
      at += t.a.size();
      v.segment(at, t.b.size()) = t.b;
      at += t.b.size();
      v[at++] = t.h;
    };
    for (const auto& t : plus) put(t);
    for (const auto& t : minus) put(t);
    return v;
  }

  static MmpsFunction unflatten(const Eigen::VectorXd& v, int p_plus,
                                int p_minus, int n, int m) {
    const int stride = n + m + 1;
    if (v.size() != static_cast<Eigen::Index>((p_plus + p_minus) * stride))
      throw LengthMismatch("mmps parameter vector has wrong length");
    MmpsFunction f;
    Eigen::Index at = 0;
    auto take = [&]() {
      AffineTerm t;
      t.a = v.segment(at, n);
      at += n;
      t.b = v.segment(at, m);
      at += m;
      t.h = v[at++];
      return t;
    };
    f.plus.reserve(static_cast<std::size_t>(p_plus));
    f.minus.reserve(static_cast<std::size_t>(p_minus));
    for (int i = 0; i < p_plus; ++i) f.plus.push_back(take());
    for (int i = 0; i < p_minus; ++i) f.minus.push_back(take());
    return f;
  }
};

// One MMPS function per output component; components share the input space.
struct MmpsVectorFunction {
  std::vector<MmpsFunction> components;

  Eigen::VectorXd eval(const Eigen::VectorXd& z) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(components.size()));
    for (std::size_t i = 0; i < components.size(); ++i)
      out[static_cast<Eigen::Index>(i)] = components[i].eval(z);
    return out;
  }
};

// Rewrites the function over normalized coordinates zn = (z - lo) / range as
// an identical function of raw z (and vice versa). Exact affine change of
// variables; the represented map is unchanged.
inline MmpsFunction rescale_to_raw(const MmpsFunction& fn, const Bounds& bounds) {
  auto convert = [&](const AffineTerm& t) {
    AffineTerm out = t;
    const Eigen::Index n = t.a.size();
    const Eigen::VectorXd range = bounds.range();
    out.a = t.a.cwiseQuotient(range.head(n));
    out.b = t.b.cwiseQuotient(range.tail(range.size() - n));
    out.h = t.h - out.a.dot(bounds.lower.head(n)) -
            out.b.dot(bounds.lower.tail(range.size() - n));
    return out;
  };
  MmpsFunction out;
  for (const auto& t : fn.plus) out.plus.push_back(convert(t));
  for (const auto& t : fn.minus) out.minus.push_back(convert(t));
  return out;
}

inline MmpsFunction rescale_to_normalized(const MmpsFunction& fn,
                                          const Bounds& bounds) {
  auto convert = [&](const AffineTerm& t) {
    AffineTerm out = t;
    const Eigen::Index n = t.a.size();
    const Eigen::VectorXd range = bounds.range();
    out.a = t.a.cwiseProduct(range.head(n));
    out.b = t.b.cwiseProduct(range.tail(range.size() - n));
    out.h = t.h + t.a.dot(bounds.lower.head(n)) +
            t.b.dot(bounds.lower.tail(range.size() - n));
    return out;
  };
  MmpsFunction out;
  for (const auto& t : fn.plus) out.plus.push_back(convert(t));
  for (const auto& t : fn.minus) out.minus.push_back(convert(t));
  return out;
}

// ---- JSON interchange ------------------------------------------------------

inline nlohmann::json mmps_to_json(const MmpsFunction& fn) {
  auto terms = [](const std::vector<AffineTerm>& ts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : ts) {
      std::vector<double> row;
      row.reserve(static_cast<std::size_t>(t.dim() + 1));
      for (Eigen::Index i = 0; i < t.a.size(); ++i) row.push_back(t.a[i]);
      for (Eigen::Index i = 0; i < t.b.size(); ++i) row.push_back(t.b[i]);
      row.push_back(t.h);
      arr.push_back(row);
    }
    return arr;
  };
  return nlohmann::json{{"plus", terms(fn.plus)}, {"minus", terms(fn.minus)}};
}

inline MmpsFunction mmps_from_json(const nlohmann::json& j, int n, int m) {
  auto terms = [&](const nlohmann::json& arr) {
    std::vector<AffineTerm> ts;
    for (const auto& row : arr) {
      auto vals = row.get<std::vector<double>>();
      if (vals.size() != static_cast<std::size_t>(n + m + 1))
        throw LengthMismatch("mmps term row has wrong length");
      AffineTerm t;
      t.a = Eigen::Map<const Eigen::VectorXd>(vals.data(), n);
      t.b = Eigen::Map<const Eigen::VectorXd>(vals.data() + n, m);
      t.h = vals.back();
      ts.push_back(std::move(t));
    }
    return ts;
  };
  MmpsFunction f;
  f.plus = terms(j.at("plus"));
  f.minus = terms(j.at("minus"));
  if (f.plus.empty() || f.minus.empty())
    throw LengthMismatch("mmps function needs at least one term per max");
  return f;
}

// model interchange format consumed by downstream controller synthesis
inline nlohmann::json model_to_json(const MmpsVectorFunction& f, int n, int m) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : f.components) comps.push_back(mmps_to_json(c));
  return nlohmann::json{{"n", n}, {"m", m}, {"components", comps}};
}

inline MmpsVectorFunction model_from_json(const nlohmann::json& j) {
  const int n = j.at("n").get<int>();
  const int m = j.at("m").get<int>();
  MmpsVectorFunction f;
  for (const auto& c : j.at("components")) f.components.push_back(mmps_from_json(c, n, m));
  return f;
}

}  // namespace hybkit
