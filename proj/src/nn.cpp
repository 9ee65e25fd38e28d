#include "tsctl/nn.hpp"

#include <cmath>

#include "tsctl/errors.hpp"

namespace tsctl {

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw ConfigError("unsupported activation '" + name + "' (expected tanh | relu)");
}

std::string to_string(Activation act) { return act == Activation::tanh ? "tanh" : "relu"; }

void MlpSpec::validate() const {
  if (input_dim == 0) throw ConfigError("network input dimension must be positive");
  if (hidden.empty()) throw ConfigError("network needs at least one hidden layer");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("hidden layer sizes must be positive");
  }
  if (n_assets == 0) throw ConfigError("policy needs at least one asset");
}

std::size_t ParamSet::size() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.size());
  return n;
}

Vector ParamSet::flatten() const {
  Vector flat(static_cast<Eigen::Index>(size()));
  Eigen::Index k = 0;
  for (const auto& t : tensors) {
    flat.segment(k, t.size()) = Eigen::Map<const Vector>(t.data(), t.size());
    k += t.size();
  }
  return flat;
}

void ParamSet::unflatten(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != size()) {
    throw UsageError("unflatten: vector has " + std::to_string(flat.size()) +
                     " entries, parameter set has " + std::to_string(size()));
  }
  Eigen::Index k = 0;
  for (auto& t : tensors) {
    Eigen::Map<Vector>(t.data(), t.size()) = flat.segment(k, t.size());
    k += t.size();
  }
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& t : tensors) out.tensors.push_back(Matrix::Zero(t.rows(), t.cols()));
  return out;
}

namespace {

Matrix orthogonal(std::size_t rows, std::size_t cols, double gain, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto big = static_cast<Eigen::Index>(std::max(rows, cols));
  const auto small = static_cast<Eigen::Index>(std::min(rows, cols));
  Matrix a(big, small);
  for (Eigen::Index j = 0; j < small; ++j)
    for (Eigen::Index i = 0; i < big; ++i) a(i, j) = gauss(rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(big, small);
  // Sign fix makes the draw uniform over orthogonal matrices.
  Matrix r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < small; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  Matrix out = rows >= cols ? q : Matrix(q.transpose());
  return gain * out;
}

void apply_activation(Matrix& z, Activation act) {
  if (act == Activation::tanh) {
    z = z.array().tanh().matrix();
  } else {
    z = z.cwiseMax(0.0);
  }
}

}  // namespace

ParamSet init_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                  std::size_t output_dim, double output_gain, std::uint64_t seed) {
  if (hidden.empty()) throw ConfigError("network needs at least one hidden layer");
  std::mt19937_64 rng(seed);
  ParamSet p;
  std::size_t in = input_dim;
  for (auto h : hidden) {
    p.tensors.push_back(orthogonal(in, h, std::sqrt(2.0), rng));
    p.tensors.push_back(Matrix::Zero(1, static_cast<Eigen::Index>(h)));
    in = h;
  }
  p.tensors.push_back(orthogonal(in, output_dim, output_gain, rng));
  p.tensors.push_back(Matrix::Zero(1, static_cast<Eigen::Index>(output_dim)));
  return p;
}

ParamSet init_policy(const MlpSpec& spec) {
  spec.validate();
  return init_mlp(spec.input_dim, spec.hidden, spec.policy_output_dim(), 0.01, spec.seed);
}

ParamSet init_value(const MlpSpec& spec) {
  spec.validate();
  // Distinct stream so the two heads are not correlated.
  return init_mlp(spec.input_dim, spec.hidden, 1, 1.0, spec.seed ^ 0x9e3779b97f4a7c15ULL);
}

Matrix mlp_forward(const ParamSet& params, Activation act, const Matrix& x) {
  if (params.tensors.empty()) throw UsageError("forward pass on an empty network");
  if (x.cols() != params.tensors[0].rows()) {
    throw UsageError("observation dimension " + std::to_string(x.cols()) +
                     " does not match network input " + std::to_string(params.tensors[0].rows()));
  }
  Matrix h = x;
  const std::size_t n_layers = params.layers();
  for (std::size_t l = 0; l < n_layers; ++l) {
    Matrix z = h * params.tensors[2 * l];
    z.rowwise() += params.tensors[2 * l + 1].row(0);
    if (l + 1 < n_layers) apply_activation(z, act);
    h = std::move(z);
  }
  return h;
}

Vector forward_policy(const ParamSet& params, Activation act, const Vector& obs) {
  return mlp_forward(params, act, obs.transpose()).row(0).transpose();
}

double forward_value(const ParamSet& params, Activation act, const Vector& obs) {
  return mlp_forward(params, act, obs.transpose())(0, 0);
}

std::pair<Matrix, Matrix> mlp_jvp(const ParamSet& params, Activation act, const Matrix& x,
                                  const ParamSet& tangent) {
  if (tangent.tensors.size() != params.tensors.size()) throw UsageError("tangent shape mismatch");
  Matrix h = x;
  Matrix dh = Matrix::Zero(x.rows(), x.cols());
  const std::size_t n_layers = params.layers();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Matrix& w = params.tensors[2 * l];
    Matrix z = h * w;
    z.rowwise() += params.tensors[2 * l + 1].row(0);
    Matrix dz = dh * w + h * tangent.tensors[2 * l];
    dz.rowwise() += tangent.tensors[2 * l + 1].row(0);
    if (l + 1 < n_layers) {
      if (act == Activation::tanh) {
        z = z.array().tanh().matrix();
        dz = (dz.array() * (1.0 - z.array().square())).matrix();
      } else {
        dz = (dz.array() * (z.array() > 0.0).cast<double>()).matrix();
        z = z.cwiseMax(0.0);
      }
    }
    h = std::move(z);
    dh = std::move(dz);
  }
  return {std::move(h), std::move(dh)};
}

std::vector<ad::Var> record_params(ad::Tape& tape, const ParamSet& params) {
  std::vector<ad::Var> vars;
  vars.reserve(params.tensors.size());
  for (const auto& t : params.tensors) vars.push_back(tape.variable(t));
  return vars;
}

ParamSet collect_grads(const std::vector<ad::Var>& params) {
  ParamSet out;
  out.tensors.reserve(params.size());
  for (const auto& v : params) {
    if (v.grad().size() == 0) {
      out.tensors.push_back(Matrix::Zero(v.rows(), v.cols()));
    } else {
      out.tensors.push_back(v.grad());
    }
  }
  return out;
}

ad::Var mlp_forward(const std::vector<ad::Var>& params, Activation act, ad::Var x) {
  if (params.empty() || params.size() % 2 != 0) throw UsageError("malformed parameter handles");
  ad::Var h = x;
  const std::size_t n_layers = params.size() / 2;
  for (std::size_t l = 0; l < n_layers; ++l) {
    h = ad::affine(h, params[2 * l], params[2 * l + 1]);
    if (l + 1 < n_layers) h = act == Activation::tanh ? ad::tanh(h) : ad::relu(h);
  }
  return h;
}

int choice_to_position(int choice) { return choice - 1; }
int position_to_choice(int position) { return position + 1; }

Vector action_probabilities(const Vector& logits) {
  if (logits.size() % kChoices != 0) throw UsageError("policy logits not a multiple of 3");
  Vector p(logits.size());
  for (Eigen::Index g = 0; g < logits.size(); g += kChoices) {
    auto block = logits.segment(g, kChoices);
    const double m = block.maxCoeff();
    Eigen::Array3d e = (block.array() - m).exp();
    p.segment(g, kChoices) = (e / e.sum()).matrix();
  }
  return p;
}

SampledAction sample_action(const Vector& logits, std::mt19937_64& rng) {
  const Vector p = action_probabilities(logits);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SampledAction out;
  const auto n_assets = logits.size() / kChoices;
  out.action.resize(static_cast<std::size_t>(n_assets));
  for (Eigen::Index i = 0; i < n_assets; ++i) {
    const double u = unif(rng);
    double acc = 0.0;
    int choice = kChoices - 1;
    for (int c = 0; c < kChoices; ++c) {
      acc += p[i * kChoices + c];
      if (u < acc) {
        choice = c;
        break;
      }
    }
    out.action[static_cast<std::size_t>(i)] = choice_to_position(choice);
  }
  out.log_prob = log_prob_entropy(logits, out.action).first;
  return out;
}

Action mode_action(const Vector& logits) {
  const auto n_assets = logits.size() / kChoices;
  Action a(static_cast<std::size_t>(n_assets));
  for (Eigen::Index i = 0; i < n_assets; ++i) {
    Eigen::Index best = 0;
    logits.segment(i * kChoices, kChoices).maxCoeff(&best);
    a[static_cast<std::size_t>(i)] = choice_to_position(static_cast<int>(best));
  }
  return a;
}

std::pair<double, double> log_prob_entropy(const Vector& logits, const Action& action) {
  if (static_cast<std::size_t>(logits.size()) != action.size() * kChoices) {
    throw UsageError("action size does not match policy output");
  }
  double log_prob = 0.0;
  double entropy = 0.0;
  for (std::size_t i = 0; i < action.size(); ++i) {
    auto block = logits.segment(static_cast<Eigen::Index>(i) * kChoices, kChoices);
    const double m = block.maxCoeff();
    Eigen::Array3d shifted = block.array() - m;
    const double lse = std::log(shifted.exp().sum());
    Eigen::Array3d logp = shifted - lse;
    log_prob += logp[position_to_choice(action[i])];
    entropy -= (logp.exp() * logp).sum();
  }
  return {log_prob, entropy};
}

void adam_step(AdamState& s, Vector& params, const Vector& grads, double lr) {
  if (s.m.size() != params.size()) {
    s.m = Vector::Zero(params.size());
    s.v = Vector::Zero(params.size());
    s.t = 0;
  }
  ++s.t;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grads;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grads.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  const double step = lr / bc1;
  params.array() -= step * s.m.array() / ((s.v.array() / bc2).sqrt() + s.eps);
}

void rmsprop_step(RmsPropState& s, Vector& params, const Vector& grads, double lr) {
  if (s.v.size() != params.size()) s.v = Vector::Zero(params.size());
  s.v = s.decay * s.v + (1.0 - s.decay) * grads.cwiseAbs2();
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double denom = std::sqrt(s.v[i]) + s.eps;
    if (denom > 0.0) params[i] -= lr * grads[i] / denom;
  }
}

void clip_global_norm(Vector& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = grads.norm();
  if (norm > max_norm) grads *= max_norm / norm;
}

void check_finite(const ParamSet& grads, const std::string& net_name) {
  for (std::size_t i = 0; i < grads.tensors.size(); ++i) {
    if (!grads.tensors[i].allFinite()) {
      throw NumericError("non-finite gradient in " + net_name + " layer " + std::to_string(i / 2) +
                         (i % 2 == 0 ? " weights" : " bias"));
    }
  }
}

OptimizerConfig::Kind parse_optimizer_kind(const std::string& name) {
  if (name == "adam") return OptimizerConfig::Kind::adam;
  if (name == "rmsprop") return OptimizerConfig::Kind::rmsprop;
  throw ConfigError("unknown opt.kind '" + name + "' (expected adam | rmsprop)");
}

std::string to_string(OptimizerConfig::Kind kind) {
  return kind == OptimizerConfig::Kind::adam ? "adam" : "rmsprop";
}

Optimizer::Optimizer(OptimizerConfig cfg, std::size_t n_params) : cfg_(cfg) {
  const auto n = static_cast<Eigen::Index>(n_params);
  adam_.m = Vector::Zero(n);
  adam_.v = Vector::Zero(n);
  rms_.v = Vector::Zero(n);
  rms_.eps = cfg.rmsprop_eps;
}

void Optimizer::step(Vector& params, Vector grads, double lr) {
  if (!grads.allFinite()) throw NumericError("non-finite gradient");
  clip_global_norm(grads, cfg_.max_grad_clip);
  if (cfg_.kind == OptimizerConfig::Kind::adam) {
    adam_step(adam_, params, grads, lr);
  } else {
    rmsprop_step(rms_, params, grads, lr);
  }
}

}  // namespace tsctl
