#include "aq/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "aq/sampling.hpp"

namespace aq {

void MlpArch::validate() const {
  if (in_dim < 1 || out_dim < 1 || hidden_layers < 1 || width < 1)
    throw std::invalid_argument("MlpArch: all dimensions must be >= 1");
}

long MlpArch::param_count() const {
  long n = 0;
  for (int l = 0; l < n_affine(); ++l) n += static_cast<long>(rows(l)) * cols(l) + rows(l);
  return n;
}

long MlpParams::weight_offset(int layer) const {
  long off = 0;
  for (int l = 0; l < layer; ++l)
    off += static_cast<long>(arch.rows(l)) * arch.cols(l) + arch.rows(l);
  return off;
}

long MlpParams::bias_offset(int layer) const {
  return weight_offset(layer) + static_cast<long>(arch.rows(layer)) * arch.cols(layer);
}

Eigen::Map<const MatrixXd> MlpParams::weight(int layer) const {
  return {values.data() + weight_offset(layer), arch.rows(layer), arch.cols(layer)};
}

Eigen::Map<const VectorXd> MlpParams::bias(int layer) const {
  return {values.data() + bias_offset(layer), arch.rows(layer)};
}

MlpParams init_glorot(const MlpArch& arch, std::uint64_t seed) {
  arch.validate();
  MlpParams p;
  p.arch = arch;
  p.seed = seed;
  p.values = VectorXd::Zero(arch.param_count());
  SplitMix64 rng = rng_stream(seed, 7);
  long off = 0;
  for (int l = 0; l < arch.n_affine(); ++l) {
    const long nw = static_cast<long>(arch.rows(l)) * arch.cols(l);
    const double bound = std::sqrt(6.0 / (arch.cols(l) + arch.rows(l)));
    for (long i = 0; i < nw; ++i) p.values[off + i] = bound * (2.0 * rng.uniform() - 1.0);
    off += nw + arch.rows(l);  // biases stay zero
  }
  return p;
}

namespace {

using ArrayXXd = Eigen::ArrayXXd;

struct Channels {
  MatrixXd val;
  std::vector<MatrixXd> grad;
  std::vector<MatrixXd> hess;
};

}  // namespace

BatchJets jet_forward(const MlpParams& p, const MatrixXd& X, JetOrder order,
                      JetTrace* trace) {
  const MlpArch& arch = p.arch;
  const int d = arch.in_dim;
  const int L = arch.hidden_layers;
  const Eigen::Index N = X.cols();
  if (X.rows() != d) throw std::invalid_argument("jet_forward: input dimension mismatch");
  const int ng = order >= JetOrder::gradient ? d : 0;
  const int nh = order >= JetOrder::hessian ? tri_count(d) : 0;

  if (trace) {
    trace->X = X;
    trace->A.assign(L, {});
    trace->GZ.assign(L, {});
    trace->HZ.assign(L, {});
    trace->order = order;
  }

  Channels cur;  // post-activation channels of the previous layer
  for (int l = 0; l < L; ++l) {
    const auto W = p.weight(l);
    MatrixXd Z = l == 0 ? (W * X).colwise() + p.bias(l)
                        : (W * cur.val).colwise() + p.bias(l);
    std::vector<MatrixXd> GZ(ng), HZ(nh);
    for (int t = 0; t < ng; ++t)
      GZ[t] = l == 0 ? MatrixXd(W.col(t).replicate(1, N)) : MatrixXd(W * cur.grad[t]);
    for (int c = 0; c < nh; ++c)
      HZ[c] = l == 0 ? MatrixXd::Zero(arch.width, N) : MatrixXd(W * cur.hess[c]);

    MatrixXd A = Z.array().tanh().matrix();
    Channels next;
    if (ng > 0) {
      const ArrayXXd s1 = 1.0 - A.array().square();
      next.grad.resize(ng);
      for (int t = 0; t < ng; ++t) next.grad[t] = (s1 * GZ[t].array()).matrix();
      if (nh > 0) {
        const ArrayXXd s2 = -2.0 * A.array() * s1;
        next.hess.resize(nh);
        for (int s = 0; s < d; ++s)
          for (int t = s; t < d; ++t) {
            const int c = tri_index(s, t, d);
            next.hess[c] =
                (s1 * HZ[c].array() + s2 * GZ[s].array() * GZ[t].array()).matrix();
          }
      }
    }
    next.val = A;
    if (trace) {
      trace->A[l] = std::move(A);
      trace->GZ[l] = std::move(GZ);
      trace->HZ[l] = std::move(HZ);
    }
    cur = std::move(next);
  }

  const auto Wo = p.weight(L);
  BatchJets out;
  out.value = (Wo * cur.val).colwise() + p.bias(L);
  out.grad.resize(ng);
  for (int t = 0; t < ng; ++t) out.grad[t] = Wo * cur.grad[t];
  out.hess.resize(nh);
  for (int c = 0; c < nh; ++c) out.hess[c] = Wo * cur.hess[c];
  return out;
}

namespace {

// Recompute the post-activation channels of hidden layer l from the trace.
Channels post_channels(const JetTrace& trace, int l, int d) {
  Channels ch;
  const MatrixXd& A = trace.A[l];
  ch.val = A;
  if (trace.order >= JetOrder::gradient && !trace.GZ[l].empty()) {
    const ArrayXXd s1 = 1.0 - A.array().square();
    ch.grad.resize(trace.GZ[l].size());
    for (std::size_t t = 0; t < trace.GZ[l].size(); ++t)
      ch.grad[t] = (s1 * trace.GZ[l][t].array()).matrix();
    if (trace.order >= JetOrder::hessian && !trace.HZ[l].empty()) {
      const ArrayXXd s2 = -2.0 * A.array() * s1;
      ch.hess.resize(trace.HZ[l].size());
      for (int s = 0; s < d; ++s)
        for (int t = s; t < d; ++t) {
          const int c = tri_index(s, t, d);
          ch.hess[c] = (s1 * trace.HZ[l][c].array() +
                        s2 * trace.GZ[l][s].array() * trace.GZ[l][t].array())
                           .matrix();
        }
    }
  }
  return ch;
}

}  // namespace

VectorXd jet_vjp(const MlpParams& p, const JetTrace& trace, const BatchJets& seeds) {
  const MlpArch& arch = p.arch;
  const int d = arch.in_dim;
  const int L = arch.hidden_layers;
  const Eigen::Index N = trace.X.cols();

  auto seeded = [](const std::vector<MatrixXd>& v) {
    for (const MatrixXd& m : v)
      if (m.size() > 0) return true;
    return false;
  };
  // Hessian seeds feed gradient-channel adjoints downstream, so the sweep
  // carries full channel sets once any higher channel is seeded.
  const bool use_hess = seeded(seeds.hess);
  const bool use_grad = use_hess || seeded(seeds.grad);
  const int ng = use_grad ? d : 0;
  const int nh = use_hess ? tri_count(d) : 0;
  if (ng > 0 && (trace.GZ.empty() || static_cast<int>(trace.GZ[0].size()) < ng))
    throw std::invalid_argument("jet_vjp: trace lacks the seeded gradient channels");
  if (nh > 0 && (trace.HZ.empty() || static_cast<int>(trace.HZ[0].size()) < nh))
    throw std::invalid_argument("jet_vjp: trace lacks the seeded Hessian channels");

  auto seed_at = [&](const std::vector<MatrixXd>& v, int i) -> const MatrixXd* {
    if (i < static_cast<int>(v.size()) && v[i].size() > 0) return &v[i];
    return nullptr;
  };

  VectorXd gradient = VectorXd::Zero(arch.param_count());
  auto wmap = [&](int l) {
    return Eigen::Map<MatrixXd>(gradient.data() + p.weight_offset(l), arch.rows(l),
                                arch.cols(l));
  };
  auto bmap = [&](int l) {
    return Eigen::Map<VectorXd>(gradient.data() + p.bias_offset(l), arch.rows(l));
  };

  // output layer
  Channels prev = post_channels(trace, L - 1, d);
  {
    auto Wg = wmap(L);
    if (seeds.value.size() > 0) {
      Wg += seeds.value * prev.val.transpose();
      bmap(L) += seeds.value.rowwise().sum();
    }
    for (int t = 0; t < ng; ++t)
      if (const MatrixXd* s = seed_at(seeds.grad, t))
        Wg += *s * prev.grad[t].transpose();
    for (int c = 0; c < nh; ++c)
      if (const MatrixXd* s = seed_at(seeds.hess, c))
        Wg += *s * prev.hess[c].transpose();
  }

  const auto Wo = p.weight(L);
  MatrixXd Abar = seeds.value.size() > 0 ? MatrixXd(Wo.transpose() * seeds.value)
                                         : MatrixXd::Zero(arch.width, N);
  std::vector<MatrixXd> Gbar(ng), Hbar(nh);
  for (int t = 0; t < ng; ++t) {
    const MatrixXd* s = seed_at(seeds.grad, t);
    Gbar[t] = s ? MatrixXd(Wo.transpose() * *s) : MatrixXd::Zero(arch.width, N);
  }
  for (int c = 0; c < nh; ++c) {
    const MatrixXd* s = seed_at(seeds.hess, c);
    Hbar[c] = s ? MatrixXd(Wo.transpose() * *s) : MatrixXd::Zero(arch.width, N);
  }

  for (int l = L - 1; l >= 0; --l) {
    const MatrixXd& A = trace.A[l];
    const ArrayXXd s1 = 1.0 - A.array().square();
    const ArrayXXd s2 = -2.0 * A.array() * s1;

    // adjoint of the pre-activation value channel
    ArrayXXd Zbar = Abar.array() * s1;
    for (int t = 0; t < ng; ++t)
      Zbar += Gbar[t].array() * trace.GZ[l][t].array() * s2;
    if (nh > 0) {
      const ArrayXXd s3 = -2.0 * (s1 * s1 + A.array() * s2);
      for (int s = 0; s < d; ++s)
        for (int t = s; t < d; ++t) {
          const int c = tri_index(s, t, d);
          Zbar += Hbar[c].array() * (trace.HZ[l][c].array() * s2 +
                                     trace.GZ[l][s].array() * trace.GZ[l][t].array() * s3);
        }
    }

    // adjoints of the pre-activation gradient and Hessian channels
    std::vector<MatrixXd> GZbar(ng), HZbar(nh);
    for (int t = 0; t < ng; ++t) GZbar[t] = (Gbar[t].array() * s1).matrix();
    if (nh > 0) {
      for (int s = 0; s < d; ++s)
        for (int t = s; t < d; ++t) {
          const int c = tri_index(s, t, d);
          const ArrayXXd h = Hbar[c].array() * s2;
          if (s == t) {
            GZbar[t] += (2.0 * h * trace.GZ[l][t].array()).matrix();
          } else {
            GZbar[t] += (h * trace.GZ[l][s].array()).matrix();
            GZbar[s] += (h * trace.GZ[l][t].array()).matrix();
          }
          HZbar[c] = (Hbar[c].array() * s1).matrix();
        }
    }

    const MatrixXd Zbar_m = Zbar.matrix();
    auto Wg = wmap(l);
    bmap(l) += Zbar_m.rowwise().sum();
    if (l == 0) {
      Wg += Zbar_m * trace.X.transpose();
      // input gradient channels are constant one-hot rows
      for (int t = 0; t < ng; ++t) Wg.col(t) += GZbar[t].rowwise().sum();
      // input Hessian channels are zero
    } else {
      prev = post_channels(trace, l - 1, d);
      Wg += Zbar_m * prev.val.transpose();
      for (int t = 0; t < ng; ++t) Wg += GZbar[t] * prev.grad[t].transpose();
      for (int c = 0; c < nh; ++c) Wg += HZbar[c] * prev.hess[c].transpose();

      const auto W = p.weight(l);
      Abar = W.transpose() * Zbar_m;
      for (int t = 0; t < ng; ++t) Gbar[t] = W.transpose() * GZbar[t];
      for (int c = 0; c < nh; ++c) Hbar[c] = W.transpose() * HZbar[c];
    }
  }
  return gradient;
}

MatrixXd forward_batch(const MlpParams& p, const MatrixXd& X) {
  return jet_forward(p, X, JetOrder::value).value;
}

VectorXd forward(const MlpParams& p, const VectorXd& x) {
  return forward_batch(p, x).col(0);
}

SpatialJet spatial_jet(const MlpParams& p, const VectorXd& x) {
  const int d = p.arch.in_dim;
  const int m = p.arch.out_dim;
  BatchJets jets = jet_forward(p, x, JetOrder::hessian);
  SpatialJet out;
  out.value = jets.value.col(0);
  out.gradient.resize(m, d);
  for (int t = 0; t < d; ++t) out.gradient.col(t) = jets.grad[t].col(0);
  out.hessian.assign(m, MatrixXd(d, d));
  for (int k = 0; k < m; ++k)
    for (int s = 0; s < d; ++s)
      for (int t = s; t < d; ++t) {
        const double h = jets.hess[tri_index(s, t, d)](k, 0);
        out.hessian[k](s, t) = h;
        out.hessian[k](t, s) = h;
      }
  return out;
}

namespace {
constexpr char kCheckpointMagic[8] = {'A', 'Q', 'M', 'L', 'P', 'C', 'K', '1'};
}

void save_checkpoint(const MlpParams& p, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint32_t dims[4] = {
      static_cast<std::uint32_t>(p.arch.in_dim), static_cast<std::uint32_t>(p.arch.out_dim),
      static_cast<std::uint32_t>(p.arch.hidden_layers),
      static_cast<std::uint32_t>(p.arch.width)};
  os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  const std::uint64_t seed = p.seed;
  const std::uint64_t count = static_cast<std::uint64_t>(p.values.size());
  os.write(reinterpret_cast<const char*>(&seed), sizeof(seed));
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  os.write(reinterpret_cast<const char*>(p.values.data()),
           static_cast<std::streamsize>(count * sizeof(double)));
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

MlpParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  std::uint32_t dims[4];
  std::uint64_t seed = 0, count = 0;
  is.read(reinterpret_cast<char*>(dims), sizeof(dims));
  is.read(reinterpret_cast<char*>(&seed), sizeof(seed));
  is.read(reinterpret_cast<char*>(&count), sizeof(count));
  MlpParams p;
  p.arch = {static_cast<int>(dims[0]), static_cast<int>(dims[1]),
            static_cast<int>(dims[2]), static_cast<int>(dims[3])};
  p.arch.validate();
  p.seed = seed;
  if (count != static_cast<std::uint64_t>(p.arch.param_count()))
    throw std::runtime_error("load_checkpoint: parameter count does not match header");
  p.values.resize(static_cast<Eigen::Index>(count));
  is.read(reinterpret_cast<char*>(p.values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path);
  return p;
}

}  // namespace aq
