// Copyright 2026 The ISR Authors.
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

#include "isr/benchgen.hpp"

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <utility>

#include "isr/error.hpp"
#include "isr/latent_models.hpp"
#include "isr/numerics.hpp"

namespace isr {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Rng = std::mt19937_64;

namespace {

constexpr std::array<std::pair<Family, std::string_view>, 5> kFamilies = {{
    {Family::Example2, "Example2"},
    {Family::Example3, "Example3"},
    {Family::Example3Prime, "Example3Prime"},
    {Family::MulticlassLUT, "MulticlassLUT"},
    {Family::RegressionLUT, "RegressionLUT"},
}};

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng make_rng(const GenSpec& spec, SeedStream stream, std::uint64_t index) {
  return Rng(sub_seed(spec.seed, stream, index));
}

void fill_normal(MatrixXd& m, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = normal(rng);
  }
}

VectorXd normal_vector(Index n, Rng& rng) {
  MatrixXd m(n, 1);
  fill_normal(m, rng);
  return m.col(0);
}

MatrixXd uniform_matrix(Index rows, Index cols, double lo, double hi,
                        Rng& rng) {
  std::uniform_real_distribution<double> unif(lo, hi);
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = unif(rng);
  }
  return m;
}

void invalid(const std::string& what) {
  throw Error(ErrorCode::InvalidSpec, what);
}

EnvLatents sample_env(const GenSpec& spec, const Truth& t, int e, Rng& rng) {
  const Index n = spec.n_per_env;
  EnvLatents out;
  out.z_c.resize(n, t.d_c);
  out.z_e.resize(n, t.d_s);
  out.y.resize(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto idx = static_cast<std::size_t>(e);

  switch (spec.family) {
    case Family::Example2: {
      const double p = t.p_e[idx];
      const double s = t.s_e[idx];
      const auto& x2 = spec.ex2;
      for (Index i = 0; i < n; ++i) {
        // j in {1,2,3,4} with probabilities ps, (1-p)s, p(1-s), (1-p)(1-s).
        const double u = unif(rng);
        int j = 4;
        if (u < p * s) {
          j = 1;
        } else if (u < s) {
          j = 2;
        } else if (u < s + p * (1.0 - s)) {
          j = 3;
        }
        const double sign_c = (j == 1 || j == 2) ? 1.0 : -1.0;
        const double sign_e = (j == 1 || j == 4) ? 1.0 : -1.0;
        for (Index c = 0; c < t.d_c; ++c) {
          out.z_c(i, c) = sign_c * (1.0 + x2.noise * normal(rng)) * x2.nu_c;
        }
        for (Index c = 0; c < t.d_s; ++c) {
          out.z_e(i, c) = sign_e * (1.0 + x2.noise * normal(rng)) * x2.nu_e;
        }
        out.y(i) = out.z_c.row(i).sum() > 0.0 ? 1.0 : 0.0;
      }
      break;
    }
    case Family::Example3:
    case Family::Example3Prime: {
      std::bernoulli_distribution label(t.eta);
      for (Index i = 0; i < n; ++i) {
        const bool positive = label(rng);
        const double sign = positive ? 1.0 : -1.0;
        for (Index c = 0; c < t.d_c; ++c) {
          out.z_c(i, c) = sign * t.mu_c(c) + t.sigma_c * normal(rng);
        }
        for (Index c = 0; c < t.d_s; ++c) {
          out.z_e(i, c) = sign * t.mu_e[idx](c) + t.sigma_e[idx] * normal(rng);
        }
        out.y(i) = positive ? 1.0 : 0.0;
      }
      break;
    }
    case Family::MulticlassLUT: {
      const int k = static_cast<int>(t.class_means.rows());
      std::uniform_int_distribution<int> label(0, k - 1);
      for (Index i = 0; i < n; ++i) {
        const int y = label(rng);
        for (Index c = 0; c < t.d_c; ++c) {
          out.z_c(i, c) = t.class_means(y, c) + t.sigma_c * normal(rng);
        }
        for (Index c = 0; c < t.d_s; ++c) {
          out.z_e(i, c) =
              t.class_env_means[idx](y, c) + t.sigma_e[idx] * normal(rng);
        }
        out.y(i) = static_cast<double>(y);
      }
      break;
    }
    case Family::RegressionLUT: {
      for (Index i = 0; i < n; ++i) {
        for (Index c = 0; c < t.d_c; ++c) {
          out.z_c(i, c) = t.mu_c(c) + t.sigma_c * normal(rng);
        }
        const VectorXd zc = out.z_c.row(i).transpose();
        out.y(i) = t.w_c.dot(zc) + t.b_c + t.noise * normal(rng);
        out.z_e.row(i) = (t.w_cs[idx] * zc + t.b_e[idx]).transpose();
      }
      break;
    }
  }
  return out;
}

MatrixXd mix(const Truth& t, const MatrixXd& z_c, const MatrixXd& z_e) {
  MatrixXd z(z_c.rows(), t.d_c + t.d_s);
  z.leftCols(t.d_c) = z_c;
  z.rightCols(t.d_s) = z_e;
  return z * t.r.transpose();
}

}  // namespace

std::string_view to_string(Family f) {
  for (const auto& [fam, name] : kFamilies) {
    if (fam == f) return name;
  }
  return "Unknown";
}

std::optional<Family> parse_family(std::string_view name) {
  for (const auto& [fam, n] : kFamilies) {
    if (n == name) return fam;
  }
  return std::nullopt;
}

std::string family_names() {
  std::string out;
  for (const auto& [fam, name] : kFamilies) {
    if (!out.empty()) out += ", ";
    out += name;
  }
  return out;
}

Task GenSpec::task() const {
  switch (family) {
    case Family::MulticlassLUT: return Task::multiclass(mc.k);
    case Family::RegressionLUT: return Task::regression();
    default: return Task::binary();
  }
}

void GenSpec::validate() const {
  if (d_c < 1 || d_s < 1) invalid("d_c and d_s must be >= 1");
  if (n_per_env < 0) invalid("n_per_env must be >= 0");
  if (E < 1) invalid("E must be >= 1");
  switch (family) {
    case Family::Example2: {
      if (ex2.p.size() != ex2.s.size()) {
        invalid("Example2 p and s schedules differ in length");
      }
      for (std::size_t i = 0; i < ex2.p.size(); ++i) {
        if (!(ex2.p[i] >= 0 && ex2.p[i] <= 1 && ex2.s[i] >= 0 && ex2.s[i] <= 1)) {
          invalid("Example2 probabilities must lie in [0, 1]");
        }
      }
      if (!(ex2.p_extra_min >= 0 && ex2.p_extra_min <= ex2.p_extra_max &&
            ex2.p_extra_max <= 1 && ex2.s_extra_min >= 0 &&
            ex2.s_extra_min <= ex2.s_extra_max && ex2.s_extra_max <= 1)) {
        invalid("Example2 extra-environment ranges must lie in [0, 1]");
      }
      if (!(ex2.nu_c > 0 && ex2.nu_e > 0 && ex2.noise >= 0)) {
        invalid("Example2 scales must be positive");
      }
      break;
    }
    case Family::Example3:
    case Family::Example3Prime:
      if (!(ex3.sigma_c > 0 && ex3.sigma_e > 0 && ex3.sigma_e_min > 0 &&
            ex3.sigma_e_min <= ex3.sigma_e_max)) {
        invalid("Example3 standard deviations must be positive");
      }
      if (!(ex3.eta > 0 && ex3.eta < 1)) invalid("eta must lie in (0, 1)");
      break;
    case Family::MulticlassLUT:
      if (mc.k < 1) invalid("k must be >= 1");
      if (!(mc.nu_inv > 0 && mc.nu_spu > 0 && mc.sigma_c > 0 &&
            mc.sigma_e > 0)) {
        invalid("multiclass scales must be positive");
      }
      break;
    case Family::RegressionLUT:
      if (!(reg.nu_inv > 0 && reg.nu_spu > 0 && reg.sigma_c > 0 &&
            reg.noise >= 0)) {
        invalid("regression scales must be positive");
      }
      if (reg.max_redraws < 1) invalid("max_redraws must be >= 1");
      break;
  }
}

std::uint64_t sub_seed(std::uint64_t seed, SeedStream stream,
                       std::uint64_t index) {
  std::uint64_t state = seed;
  state = splitmix64(state) ^
          (static_cast<std::uint64_t>(stream) * 0xD1B54A32D192ED03ULL);
  state = splitmix64(state) ^ (index * 0x94D049BB133111EBULL + 1);
  return splitmix64(state);
}

Truth draw_truth(const GenSpec& spec) {
  spec.validate();
  Truth t;
  t.d_c = spec.d_c;
  t.d_s = spec.d_s;
  const Index d = spec.d_c + spec.d_s;
  if (spec.scrambled) {
    Rng rng = make_rng(spec, SeedStream::Mixing, 0);
    t.r = random_orthonormal<double>(d, rng).rows();
  } else {
    t.r = MatrixXd::Identity(d, d);
  }
  Rng global = make_rng(spec, SeedStream::Global, 0);
  const auto n_env = static_cast<std::size_t>(spec.E);

  switch (spec.family) {
    case Family::Example2: {
      const auto& x2 = spec.ex2;
      t.mu_c = VectorXd::Constant(spec.d_c, x2.nu_c);
      t.sigma_c = x2.nu_c * x2.noise;
      for (std::size_t e = 0; e < n_env; ++e) {
        if (e < x2.p.size()) {
          t.p_e.push_back(x2.p[e]);
          t.s_e.push_back(x2.s[e]);
        } else {
          Rng rng = make_rng(spec, SeedStream::EnvParams, e);
          std::uniform_real_distribution<double> pu(x2.p_extra_min,
                                                    x2.p_extra_max);
          std::uniform_real_distribution<double> su(x2.s_extra_min,
                                                    x2.s_extra_max);
          const double p = pu(rng);
          t.p_e.push_back(p);
          t.s_e.push_back(su(rng));
        }
        t.mu_e.push_back(VectorXd::Constant(spec.d_s, x2.nu_e));
        t.sigma_e.push_back(x2.nu_e * x2.noise);
      }
      break;
    }
    case Family::Example3:
    case Family::Example3Prime: {
      const auto& x3 = spec.ex3;
      t.mu_c = VectorXd::Constant(spec.d_c, x3.gamma);
      t.sigma_c = x3.sigma_c;
      t.eta = x3.eta;
      for (std::size_t e = 0; e < n_env; ++e) {
        Rng rng = make_rng(spec, SeedStream::EnvParams, e);
        t.mu_e.push_back(normal_vector(spec.d_s, rng));
        if (spec.family == Family::Example3Prime) {
          std::uniform_real_distribution<double> su(x3.sigma_e_min,
                                                    x3.sigma_e_max);
          t.sigma_e.push_back(su(rng));
        } else {
          t.sigma_e.push_back(x3.sigma_e);
        }
      }
      break;
    }
    case Family::MulticlassLUT: {
      const auto& m = spec.mc;
      t.class_means =
          m.nu_inv * uniform_matrix(m.k, spec.d_c, 0.0, 1.0, global);
      t.sigma_c = m.nu_inv * m.sigma_c;
      for (std::size_t e = 0; e < n_env; ++e) {
        Rng rng = make_rng(spec, SeedStream::EnvParams, e);
        t.class_env_means.push_back(
            m.nu_spu * uniform_matrix(m.k, spec.d_s, 0.0, 1.0, rng));
        t.sigma_e.push_back(m.nu_spu * m.sigma_e);
      }
      break;
    }
    case Family::RegressionLUT: {
      const auto& g = spec.reg;
      t.mu_c = VectorXd::Constant(spec.d_c, g.nu_inv);
      t.sigma_c = g.nu_inv * g.sigma_c;
      t.w_c = normal_vector(spec.d_c, global);
      t.b_c = normal_vector(1, global)(0);
      t.noise = g.noise;
      const Index full = std::min(spec.d_c, spec.d_s);
      for (std::size_t e = 0; e < n_env; ++e) {
        Rng rng = make_rng(spec, SeedStream::EnvParams, e);
        MatrixXd w(spec.d_s, spec.d_c);
        int attempt = 0;
        do {
          if (++attempt > g.max_redraws) {
            invalid("could not draw a full-rank spurious map");
          }
          fill_normal(w, rng);
        } while (numerical_rank(w) < full);
        t.w_cs.push_back(g.nu_spu * w);
        t.b_e.push_back(g.nu_spu * normal_vector(spec.d_s, rng));
      }
      break;
    }
  }
  return t;
}

BenchInstance gen(const GenSpec& spec) {
  BenchInstance inst;
  inst.spec = spec;
  inst.truth = draw_truth(spec);
  const Truth& t = inst.truth;
  std::vector<EnvDataset<double>> envs;
  for (int e = 0; e < spec.E; ++e) {
    const auto ue = static_cast<std::uint64_t>(e);
    Rng train_rng = make_rng(spec, SeedStream::TrainSamples, ue);
    Rng test_rng = make_rng(spec, SeedStream::TestSamples, ue);
    inst.truth.train_latents.push_back(sample_env(spec, t, e, train_rng));
    inst.truth.test_latents.push_back(sample_env(spec, t, e, test_rng));
    const auto& lat = inst.truth.train_latents.back();
    envs.push_back({e, mix(t, lat.z_c, lat.z_e), lat.y});
  }
  const Index d = spec.d_c + spec.d_s;
  inst.train = MultiEnvData<double>(std::move(envs), d, spec.task());
  inst.test = make_test_envs(inst);
  return inst;
}

namespace {

std::vector<EnvLatents> shuffle_latents(const BenchInstance& instance,
                                        const std::vector<EnvLatents>& latents,
                                        std::uint64_t index_offset) {
  std::vector<EnvLatents> out;
  for (std::size_t e = 0; e < latents.size(); ++e) {
    const auto& lat = latents[e];
    const Index n = lat.z_e.rows();
    std::vector<Index> perm(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    Rng rng = make_rng(instance.spec, SeedStream::Shuffle, index_offset + e);
    for (Index i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<Index> pick(0, i);
      std::swap(perm[static_cast<std::size_t>(i)],
                perm[static_cast<std::size_t>(pick(rng))]);
    }
    EnvLatents shuffled{lat.z_c, MatrixXd(n, lat.z_e.cols()), lat.y};
    for (Index i = 0; i < n; ++i) {
      shuffled.z_e.row(i) = lat.z_e.row(perm[static_cast<std::size_t>(i)]);
    }
    out.push_back(std::move(shuffled));
  }
  return out;
}

MultiEnvData<double> mix_envs(const BenchInstance& instance,
                              const std::vector<EnvLatents>& latents) {
  const Truth& t = instance.truth;
  std::vector<EnvDataset<double>> envs;
  for (std::size_t e = 0; e < latents.size(); ++e) {
    const auto& lat = latents[e];
    envs.push_back({static_cast<int>(e), mix(t, lat.z_c, lat.z_e), lat.y});
  }
  return MultiEnvData<double>(std::move(envs), t.d_c + t.d_s,
                              instance.spec.task());
}

}  // namespace

std::vector<EnvLatents> shuffled_test_latents(const BenchInstance& instance) {
  return shuffle_latents(instance, instance.truth.test_latents, 0);
}

MultiEnvData<double> make_test_envs(const BenchInstance& instance) {
  return mix_envs(instance, shuffled_test_latents(instance));
}

MultiEnvData<double> make_shuffled_train_envs(const BenchInstance& instance) {
  return mix_envs(instance, shuffle_latents(instance,
                                            instance.truth.train_latents,
                                            std::uint64_t{1} << 32));
}

OrthonormalBasis<double> truth_invariant_basis(const BenchInstance& instance) {
  return invariant_axes(instance.truth.r, instance.truth.d_c);
}

std::unique_ptr<MomentSource<double>> population_moments(const GenSpec& spec) {
  return population_moments(draw_truth(spec), spec);
}

std::unique_ptr<MomentSource<double>> population_moments(const Truth& t,
                                                         const GenSpec& spec) {
  switch (spec.family) {
    case Family::Example2:
      throw Error(ErrorCode::Unsupported,
                  "Example2 latents are a sign mixture; no Gaussian moments");
    case Family::Example3:
    case Family::Example3Prime: {
      auto m = std::make_unique<BinaryGaussianModel<double>>();
      m->r = t.r;
      m->mu_c = t.mu_c;
      m->sigma_c = t.sigma_c;
      m->eta = t.eta;
      m->mu_e = t.mu_e;
      m->sigma_e = t.sigma_e;
      return m;
    }
    case Family::MulticlassLUT: {
      auto m = std::make_unique<MulticlassGaussianModel<double>>();
      m->r = t.r;
      m->class_means = t.class_means;
      m->env_means = t.class_env_means;
      m->sigma_c = t.sigma_c;
      m->sigma_e = t.sigma_e.empty() ? 0.0 : t.sigma_e.front();
      return m;
    }
    case Family::RegressionLUT: {
      auto m = std::make_unique<LinearRegressionModel<double>>();
      m->r = t.r;
      m->mu_c = t.mu_c;
      m->sigma_c = t.sigma_c;
      m->w_c = t.w_c;
      m->b_c = t.b_c;
      m->noise = t.noise;
      m->w_cs = t.w_cs;
      m->b_e = t.b_e;
      return m;
    }
  }
  throw Error(ErrorCode::Unsupported, "unknown family");
}

LinearModel oracle_predictor(const BenchInstance& instance) {
  const Truth& t = instance.truth;
  switch (instance.spec.family) {
    case Family::Example2:
      return compose_latent(t.r, MatrixXd::Ones(1, t.d_c), VectorXd::Zero(1),
                            Task::binary());
    case Family::Example3:
    case Family::Example3Prime:
      return gaussian_binary_oracle(t.r, t.mu_c, t.sigma_c, t.eta);
    case Family::MulticlassLUT:
      return gaussian_multiclass_oracle(t.r, t.class_means, t.sigma_c);
    case Family::RegressionLUT:
      return compose_latent(t.r, t.w_c.transpose(), VectorXd::Constant(1, t.b_c),
                            Task::regression());
  }
  throw Error(ErrorCode::Unsupported, "unknown family");
}

}  // namespace isr
