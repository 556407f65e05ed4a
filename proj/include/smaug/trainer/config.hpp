// Hyperparameters for one training run.

#pragma once

#include "smaug/numerics/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <string>

namespace smaug::trainer {

struct TrainConfig {
  // collection
  int n_parallel_envs = 8;
  long long total_env_steps = 200000;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_anneal_steps = 5e4;

  // replay
  int buffer_capacity = 5000;
  int batch_size = 32;
  int inference_buffer_capacity = 50000;
  int inference_batch_size = 256;
  int train_steps_per_round = 1;
  int target_update_episodes = 200;

  // optimization
  double learning_rate = 5e-4;
  double rms_alpha = 0.99;
  double rms_epsilon = 1e-5;
  double grad_clip = 10.0;
  double gamma = 0.99;

  // subtask window and networks
  int n_window = 5;
  int hidden_dim = 64;
  int segment_hidden_dim = 64;
  int z_dim = 16;
  int n_heads = 4;
  double attention_temperature = 1.0;
  bool per_window_segment_gru = false;
  int mix_dim = 32;
  int hyper_hidden = 64;

  // intrinsic reward
  double beta_mi = 5e-2;
  double beta1 = 1.0;
  double beta2 = 1.0;
  int variational_hidden = 64;

  // inference network
  int n_f_step = 3;
  double beta_f = 1e-2;
  double beta_o = 1.0;
  double beta_r = 1.0;
  int inference_hidden = 64;
  int inference_embed = 32;

  // ablations
  bool disable_window = false;
  bool disable_intrinsic = false;
  bool disable_inference = false;
  bool disable_mixer = false;

  // evaluation and output
  long long eval_interval = 10000;
  int eval_episodes = 32;
  int checkpoint_interval = 0;  // episodes; 0 disables periodic checkpoints
  std::uint64_t seed = 0;

  bool intrinsic_enabled() const { return !disable_intrinsic && beta_mi > 0.0; }
  bool inference_enabled() const { return !disable_inference && n_f_step > 0; }
  int rollout_steps() const { return inference_enabled() ? n_f_step : 0; }

  void validate() const {
    auto positive = [](const char* name, double v) {
      if (!(v > 0) || !std::isfinite(v)) throw ArgumentError(std::string(name) + " must be positive");
    };
    auto non_negative = [](const char* name, double v) {
      if (!(v >= 0) || !std::isfinite(v)) throw ArgumentError(std::string(name) + " must be >= 0");
    };
    positive("train.n_parallel_envs", n_parallel_envs);
    positive("train.total_env_steps", static_cast<double>(total_env_steps));
    positive("train.buffer_capacity", buffer_capacity);
    positive("train.batch_size", batch_size);
    positive("train.inference_buffer_capacity", inference_buffer_capacity);
    positive("train.inference_batch_size", inference_batch_size);
    positive("train.train_steps_per_round", train_steps_per_round);
    positive("train.target_update_episodes", target_update_episodes);
    positive("train.lr", learning_rate);
    positive("train.rms_epsilon", rms_epsilon);
    positive("train.grad_clip", grad_clip);
    positive("model.n_window", n_window);
    positive("model.hidden_dim", hidden_dim);
    positive("model.segment_hidden_dim", segment_hidden_dim);
    positive("model.z_dim", z_dim);
    positive("model.n_heads", n_heads);
    positive("model.attention_temperature", attention_temperature);
    positive("model.mix_dim", mix_dim);
    positive("model.hyper_hidden", hyper_hidden);
    positive("model.variational_hidden", variational_hidden);
    positive("model.inference_hidden", inference_hidden);
    positive("model.inference_embed", inference_embed);
    positive("train.eval_episodes", eval_episodes);
    positive("train.eval_interval", static_cast<double>(eval_interval));
    non_negative("train.epsilon_anneal_steps", epsilon_anneal_steps);
    non_negative("train.beta_mi", beta_mi);
    non_negative("train.beta1", beta1);
    non_negative("train.beta2", beta2);
    non_negative("train.beta_f", beta_f);
    non_negative("train.beta_o", beta_o);
    non_negative("train.beta_r", beta_r);
    non_negative("model.n_f_step", n_f_step);
    non_negative("train.checkpoint_interval", checkpoint_interval);
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ArgumentError("train.gamma must be in (0, 1]");
    if (!(rms_alpha >= 0.0 && rms_alpha < 1.0)) throw ArgumentError("train.rms_alpha must be in [0, 1)");
    if (!(epsilon_end >= 0.0 && epsilon_end <= epsilon_start && epsilon_start <= 1.0))
      throw ArgumentError("train.epsilon_start/epsilon_end must satisfy 0 <= end <= start <= 1");
    if (z_dim % n_heads != 0) throw ArgumentError("model.z_dim must be divisible by model.n_heads");
  }
};

}  // namespace smaug::trainer
