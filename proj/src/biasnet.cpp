#include "roomeq/biasnet.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "roomeq/metrics.hpp"

namespace roomeq {

long Network::parameter_count() const {
  long n = input_bias.size() + first_bias.size();
  for (const auto& w : weights) n += w.size();
  return n;
}

Network init_network(const std::vector<int>& layer_sizes, int out_dim, unsigned seed) {
  if (out_dim < 1) throw std::domain_error("init_network: out_dim must be >= 1");
  for (int sz : layer_sizes)
    if (sz < 1) throw std::domain_error("init_network: layer sizes must be >= 1");

  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);

  Network net;
  net.out_dim = out_dim;
  if (layer_sizes.empty()) {
    // Degenerate bias-only generator: p = sin(b0).
    net.input_bias.resize(out_dim);
    for (Eigen::Index i = 0; i < net.input_bias.size(); ++i) net.input_bias[i] = sym(rng);
    return net;
  }

  net.input_bias.resize(layer_sizes[0]);
  for (Eigen::Index i = 0; i < net.input_bias.size(); ++i) net.input_bias[i] = sym(rng);
  net.first_bias.resize(layer_sizes[0]);
  for (Eigen::Index i = 0; i < net.first_bias.size(); ++i) net.first_bias[i] = sym(rng);

  std::vector<int> dims(layer_sizes);
  dims.push_back(out_dim);
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const double scale = std::sqrt(6.0 / fan_in);
    Eigen::MatrixXd w(dims[l + 1], dims[l]);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = scale * sym(rng);
    net.weights.push_back(std::move(w));
  }
  return net;
}

Vec forward(const Network& net, ForwardCache* cache) {
  Vec x = net.input_bias;
  if (net.first_bias.size() > 0) x += net.first_bias;
  if (cache) {
    cache->pre.clear();
    cache->pre.push_back(x);
  }
  Vec z = x.array().sin();
  for (const auto& w : net.weights) {
    x = w * z;
    if (cache) cache->pre.push_back(x);
    z = x.array().sin();
  }
  return z;
}

NetGradients backward(const Network& net, const ForwardCache& cache, const Vec& dl_dp) {
  if (cache.pre.size() != net.weights.size() + 1)
    throw std::invalid_argument("backward: cache does not match network depth");
  if (dl_dp.size() != net.out_dim)
    throw std::invalid_argument("backward: gradient length does not match output");

  NetGradients g;
  g.d_weights.resize(net.weights.size());

  // delta = dL/d(pre-activation), walked back through sin' = cos.
  Vec delta = dl_dp.array() * cache.pre.back().array().cos();
  for (int l = static_cast<int>(net.weights.size()) - 1; l >= 0; --l) {
    const Vec z_in = cache.pre[static_cast<size_t>(l)].array().sin();
    g.d_weights[static_cast<size_t>(l)] = delta * z_in.transpose();
    delta = (net.weights[static_cast<size_t>(l)].transpose() * delta).array() *
            cache.pre[static_cast<size_t>(l)].array().cos();
  }
  g.d_input_bias = delta;
  if (net.first_bias.size() > 0) g.d_first_bias = delta;
  return g;
}

AdamState AdamState::for_network(const Network& net, double lr) {
  AdamState st;
  st.lr = lr;
  st.m_input_bias = Vec::Zero(net.input_bias.size());
  st.v_input_bias = Vec::Zero(net.input_bias.size());
  st.m_first_bias = Vec::Zero(net.first_bias.size());
  st.v_first_bias = Vec::Zero(net.first_bias.size());
  for (const auto& w : net.weights) {
    st.m_weights.emplace_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    st.v_weights.emplace_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  return st;
}

namespace {

template <typename T>
void adam_update(T& param, T& m, T& v, const T& g, const AdamState& st, double corr1,
                 double corr2) {
  m = st.beta1 * m + (1.0 - st.beta1) * g;
  v = st.beta2 * v + (1.0 - st.beta2) * g.cwiseProduct(g);
  param.array() -= st.lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + st.eps);
}

template <typename T>
bool all_finite(const T& x) {
  return x.allFinite();
}

}  // namespace

void adam_step(Network& net, AdamState& state, const NetGradients& grads) {
  if (!all_finite(grads.d_input_bias) ||
      (grads.d_first_bias.size() > 0 && !all_finite(grads.d_first_bias)))
    throw std::runtime_error("adam_step: non-finite gradient");
  for (const auto& g : grads.d_weights)
    if (!all_finite(g)) throw std::runtime_error("adam_step: non-finite gradient");

  state.step += 1;
  const double corr1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double corr2 = 1.0 - std::pow(state.beta2, double(state.step));

  adam_update(net.input_bias, state.m_input_bias, state.v_input_bias, grads.d_input_bias, state,
              corr1, corr2);
  if (net.first_bias.size() > 0)
    adam_update(net.first_bias, state.m_first_bias, state.v_first_bias, grads.d_first_bias, state,
                corr1, corr2);
  for (size_t l = 0; l < net.weights.size(); ++l)
    adam_update(net.weights[l], state.m_weights[l], state.v_weights[l], grads.d_weights[l], state,
                corr1, corr2);
}

OptimizeResult optimize(const Simulator& sim, const ParamRanges& ranges, const RunConfig& config) {
  if (config.iterations < 1) throw std::domain_error("optimize: iterations must be >= 1");
  const int out_dim = ranges.param_count(sim.n_sources());
  Network net = init_network(config.layers, out_dim, config.seed);
  AdamState adam = AdamState::for_network(net, config.lr);

  OptimizeResult result;
  result.best_loss.total = std::numeric_limits<double>::infinity();

  ForwardCache cache;
  Vec grad_p;
  for (int it = 0; it < config.iterations; ++it) {
    const Vec p = forward(net, &cache);
    const LossBreakdown loss = sim.loss_and_gradient(p, ranges, grad_p);
    if (loss.total < result.best_loss.total) {
      result.best_loss = loss;
      result.best_p = p;
      result.best_iteration = it;
    }
    if (it % config.log_every == 0 || it == config.iterations - 1) {
      LossDetail detail;
      sim.loss(denormalize(p, ranges), &detail);
      HistoryEntry h;
      h.iteration = it;
      h.l1 = loss.l1;
      h.l2 = loss.l2;
      h.total = loss.total;
      h.mse = mse_from_band_mags(detail.band_mags, sim.target()).average;
      result.history.push_back(h);
    }
    const NetGradients grads = backward(net, cache, grad_p);
    adam_step(net, adam, grads);
  }

  result.equalizers = denormalize(result.best_p, ranges);
  return result;
}

}  // namespace roomeq
