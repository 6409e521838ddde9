#pragma once

#include <vector>

#include "roomeq/loss.hpp"

namespace roomeq {

/// Feedforward generator with no external input: the learnable input vector
/// plus the first layer's bias feed a sine-activated dense chain.  Only the
/// first layer carries bias terms; later layers are weight-only, matching the
/// parameter accounting used for the reference configurations.
struct Network {
  Vec input_bias;                        // learnable input b0
  Vec first_bias;                        // first-layer bias (empty for bias-only nets)
  std::vector<Eigen::MatrixXd> weights;  // chain down to the output layer
  int out_dim = 0;

  long parameter_count() const;
};

struct ForwardCache {
  std::vector<Vec> pre;  // pre-activations per layer, input layer first
};

struct NetGradients {
  Vec d_input_bias;
  Vec d_first_bias;
  std::vector<Eigen::MatrixXd> d_weights;
};

struct AdamState {
  Vec m_input_bias, v_input_bias;
  Vec m_first_bias, v_first_bias;
  std::vector<Eigen::MatrixXd> m_weights, v_weights;
  long step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_network(const Network& net, double lr = 1e-4);
};

/// Seeded uniform init; hidden weights ~ U(+-sqrt(6/fan_in)), biases ~ U(-1,1).
/// An empty layer list gives the degenerate bias-only generator p = sin(b0).
Network init_network(const std::vector<int>& layer_sizes, int out_dim, unsigned seed);

Vec forward(const Network& net, ForwardCache* cache = nullptr);
NetGradients backward(const Network& net, const ForwardCache& cache, const Vec& dl_dp);
void adam_step(Network& net, AdamState& state, const NetGradients& grads);

struct HistoryEntry {
  int iteration = 0;
  double l1 = 0.0;
  double l2 = 0.0;
  double total = 0.0;
  double mse = 0.0;
};

struct RunConfig {
  std::vector<int> layers{1024, 512, 256, 128};
  int iterations = 10000;
  unsigned seed = 0;
  double lr = 1e-4;
  double gamma2_override = -1.0;  // negative keeps the log2(S)+log2(M) default
  int log_every = 10;
};

struct OptimizeResult {
  std::vector<Equalizer> equalizers;  // best-so-far by total loss
  Vec best_p;
  LossBreakdown best_loss;
  int best_iteration = 0;
  std::vector<HistoryEntry> history;
};

/// The optimization loop: forward -> denormalize -> simulate -> loss ->
/// analytic gradient -> backprop -> Adam, tracking the best iterate.
OptimizeResult optimize(const Simulator& sim, const ParamRanges& ranges, const RunConfig& config);

}  // namespace roomeq
