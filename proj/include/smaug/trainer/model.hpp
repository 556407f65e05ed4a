// The full set of learned networks and the two ways of running the agent
// network: step by step while acting, and over whole padded episodes while
// training.
//
// The trajectory GRU only sees real steps. The task window at time t is
// taken over the concatenation of the real history 0..t and the n_f
// predicted steps t+1..t+n_f, so every window ends at t+n_f.

#pragma once

#include "smaug/env/dec_pomdp.hpp"
#include "smaug/intrinsic/variational.hpp"
#include "smaug/mixer/mixing_net.hpp"
#include "smaug/numerics/checkpoint.hpp"
#include "smaug/trainer/config.hpp"
#include "smaug/window/agent_network.hpp"
#include "smaug/worldmodel/inference_net.hpp"

namespace smaug::trainer {

inline window::AgentNetConfig agent_config(const env::DecPomdpSpec& spec, const TrainConfig& cfg) {
  window::AgentNetConfig c;
  c.obs_dim = spec.obs_dim;
  c.n_actions = spec.n_actions;
  c.n_agents = spec.n_agents;
  c.hidden_dim = cfg.hidden_dim;
  c.segment_hidden_dim = cfg.segment_hidden_dim;
  c.z_dim = cfg.z_dim;
  c.n_heads = cfg.n_heads;
  c.n_window = cfg.n_window;
  c.per_window_segment_gru = cfg.per_window_segment_gru;
  c.temperature = cfg.attention_temperature;
  return c;
}

template <typename T>
struct SmaugModel {
  using scalar_type = T;

  env::DecPomdpSpec spec;
  bool use_window = true;
  window::AgentNetwork<T> agent;
  mixer::MixingNet<T> mixer;
  intrinsic::VariationalNets<T> variational;
  worldmodel::InferenceNet<T> inference;

  SmaugModel() = default;
  SmaugModel(const env::DecPomdpSpec& s, const TrainConfig& cfg)
      : spec(s),
        use_window(!cfg.disable_window),
        agent(agent_config(s, cfg)),
        mixer(mixer::MixerConfig{s.n_agents, s.state_dim, cfg.z_dim, cfg.mix_dim, cfg.hyper_hidden}),
        variational(s.obs_dim, cfg.z_dim, s.n_actions, s.n_agents, cfg.variational_hidden),
        inference(worldmodel::InferenceNetConfig{s.obs_dim, s.n_actions, cfg.inference_hidden, cfg.inference_embed}) {}

  void init(Rng& rng) {
    agent.init(rng);
    mixer.init(rng);
    variational.init(rng);
    inference.init(rng);
  }

  template <typename F>
  void visit_parameters(F&& f) {
    auto sub = [&](const std::string& prefix, auto& net) {
      net.visit_parameters([&](const std::string& name, Tensor<T>& t) { f(prefix + name, t); });
    };
    sub("agent.", agent);
    sub("mixer.", mixer);
    sub("variational.", variational);
    sub("inference.", inference);
  }

  int n_window() const { return agent.config.n_window; }
  int z_dim() const { return agent.config.z_dim; }
};

template <typename T>
std::string encode_model(SmaugModel<T>& model) {
  std::vector<NamedTensor> tensors;
  collect_tensors(model, "", tensors);
  return encode_checkpoint(tensors);
}

template <typename T>
void decode_model(SmaugModel<T>& model, const std::string& bytes) {
  const auto tensors = decode_checkpoint(bytes);
  restore_tensors(model, "", tensors);
  std::size_t expected = 0;
  model.visit_parameters([&](const std::string&, Tensor<T>&) { ++expected; });
  if (tensors.size() != expected)
    throw CheckpointError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model has " +
                          std::to_string(expected));
}

template <typename T>
struct AgentOutputs {
  Var<T> q;           // [rows x n_actions]
  Var<T> z;           // [rows x z_dim]
  Var<T> h;           // [rows x hidden]
  Matrix<T> weights;  // [rows x heads * n_window], empty without the window
};

/// Subtask representation and Q values for query rows whose windows are
/// described by (positions, index). Without the window z is identically zero.
template <typename T>
AgentOutputs<T> agent_head(Tape<T>& tape, SmaugModel<T>& model, const Var<T>& h, const Matrix<T>& positions,
                           const window::SegmentIndex& index) {
  AgentOutputs<T> out;
  out.h = h;
  if (model.use_window) {
    auto emb = model.agent.embed_positions(tape, tape.constant(positions));
    auto reps = model.agent.encode_segments(tape, emb, index);
    auto sub = model.agent.recognize(tape, h, reps);
    out.z = sub.z;
    out.weights = std::move(sub.weights);
  } else {
    out.z = tape.constant(Matrix<T>::Zero(h.rows(), model.z_dim()));
  }
  out.q = model.agent.q_values(tape, h, out.z,
                               tape.constant(window::agent_onehot_rows<T>(h.rows(), model.spec.n_agents)));
  return out;
}

/// Step inputs of a batch of padded episodes.
///
/// real:  [slots * rows x in], row (t, r) = [o_t, one_hot(a_{t-1})]
/// pred:  [slots * n_f * rows x in], row ((t, m), r) = [o^_{t+m+1}, one_hot(a^_{t+m})]
/// where r = b * n_agents + i.
template <typename T>
struct SequenceInputs {
  int slots = 0;
  int rows = 0;
  int n_f = 0;
  Matrix<T> real;
  Matrix<T> pred;
};

/// Runs the agent network over every slot of a padded batch.
template <typename T>
AgentOutputs<T> forward_sequences(Tape<T>& tape, SmaugModel<T>& model, const SequenceInputs<T>& in) {
  const Eigen::Index R = in.rows;
  auto real = tape.constant(in.real);
  std::vector<Var<T>> hs;
  auto h = model.agent.zero_hidden(tape, R);
  for (int t = 0; t < in.slots; ++t) {
    h = model.agent.trajectory_step(tape, slice_rows(real, t * R, R), h);
    hs.push_back(h);
  }
  auto H = hs.size() == 1 ? hs.front() : concat_rows<T>(hs);
  const Eigen::Index total = static_cast<Eigen::Index>(in.slots) * R;
  Matrix<T> positions;
  window::SegmentIndex index;
  if (model.use_window) {
    positions.resize(in.real.rows() + in.pred.rows(), in.real.cols());
    positions.topRows(in.real.rows()) = in.real;
    if (in.pred.rows() > 0) positions.bottomRows(in.pred.rows()) = in.pred;
    const int n_f = in.n_f;
    const Eigen::Index real_rows = in.real.rows();
    index = window::build_segment_index(static_cast<std::size_t>(total), model.n_window(),
                                        [&](std::size_t row, int off) -> Eigen::Index {
                                          const auto t = static_cast<Eigen::Index>(row) / R;
                                          const auto r = static_cast<Eigen::Index>(row) % R;
                                          const Eigen::Index p = t + n_f + off;
                                          if (p > t) return real_rows + (t * n_f + (p - t - 1)) * R + r;
                                          if (p >= 0) return p * R + r;
                                          return -1;
                                        });
  }
  return agent_head(tape, model, H, positions, index);
}

/// Incremental agent state for acting in E environments at once.
template <typename T>
class Actor {
 public:
  Actor(SmaugModel<T>& model, int n_envs) : model_(&model), rows_(n_envs * model.spec.n_agents) {
    reset();
  }

  void reset() {
    h_ = Matrix<T>::Zero(rows_, model_->agent.config.hidden_dim);
    history_.assign(static_cast<std::size_t>(rows_), {});
  }

  int rows() const { return rows_; }

  /// Feeds the real step input [o_t, one_hot(a_{t-1})] of every row.
  void observe(const Matrix<T>& obs, const std::vector<int>& prev_actions) {
    const int nA = model_->spec.n_actions;
    Matrix<T> x = Matrix<T>::Zero(rows_, obs.cols() + nA);
    x.leftCols(obs.cols()) = obs;
    for (int r = 0; r < rows_; ++r) {
      const int a = prev_actions[static_cast<std::size_t>(r)];
      if (a >= 0) x(r, obs.cols() + a) = T(1);
    }
    Tape<T> tape;
    h_ = model_->agent.trajectory_step(tape, tape.constant(x), tape.constant(h_)).value();
    const auto keep = static_cast<std::size_t>(model_->n_window() + 1);
    for (int r = 0; r < rows_; ++r) {
      auto& hist = history_[static_cast<std::size_t>(r)];
      hist.emplace_back(x.row(r));
      if (hist.size() > keep) hist.erase(hist.begin());
    }
  }

  /// Q values and z for the current real history followed by `predicted`
  /// step inputs per row.
  AgentOutputs<T> evaluate(Tape<T>& tape, const std::vector<std::vector<Matrix<T>>>& predicted) {
    const int W = model_->n_window();
    const int width = model_->agent.config.input_dim();
    Matrix<T> positions;
    window::SegmentIndex index;
    if (model_->use_window) {
      positions = Matrix<T>::Zero(static_cast<Eigen::Index>(rows_) * (W + 1), width);
      std::vector<std::vector<std::uint8_t>> present(static_cast<std::size_t>(rows_),
                                                     std::vector<std::uint8_t>(static_cast<std::size_t>(W + 1), 0));
      for (int r = 0; r < rows_; ++r) {
        std::vector<const Matrix<T>*> seq;
        for (const auto& x : history_[static_cast<std::size_t>(r)]) seq.push_back(&x);
        if (!predicted.empty())
          for (const auto& x : predicted[static_cast<std::size_t>(r)]) seq.push_back(&x);
        const int n = static_cast<int>(seq.size());
        for (int j = 0; j <= W; ++j) {
          const int src = n - 1 - (W - j);
          if (src < 0) continue;
          positions.row(static_cast<Eigen::Index>(r) * (W + 1) + j) = *seq[static_cast<std::size_t>(src)];
          present[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)] = 1;
        }
      }
      index = window::build_segment_index(static_cast<std::size_t>(rows_), W, [&](std::size_t r, int off) {
        const int j = W + off;
        return present[r][static_cast<std::size_t>(j)] ? static_cast<Eigen::Index>(r) * (W + 1) + j
                                                       : Eigen::Index(-1);
      });
    }
    return agent_head(tape, *model_, tape.constant(h_), positions, index);
  }

 private:
  SmaugModel<T>* model_;
  int rows_;
  Matrix<T> h_;
  std::vector<std::vector<Matrix<T>>> history_;  // trailing real step inputs, 1 x in each
};

}  // namespace smaug::trainer
