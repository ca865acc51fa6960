#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "relnov/model/config.hpp"
#include "relnov/numerics/ops.hpp"
#include "relnov/numerics/tape.hpp"
#include "relnov/numerics/tensor.hpp"

namespace relnov {

template <typename T>
struct Linear {
  Tensor<T> weight;  // in x out
  Tensor<T> bias;    // out
};

template <typename T>
struct LayerNormParams {
  Tensor<T> gain;
  Tensor<T> bias;
};

template <typename T>
struct EncoderBlock {
  LayerNormParams<T> ln1;
  Linear<T> qkv;
  Linear<T> attn_out;
  LayerNormParams<T> ln2;
  Linear<T> fc1;
  Linear<T> fc2;
};

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* tensor;
};

template <typename T>
struct ConstParamRef {
  std::string name;
  const Tensor<T>* tensor;
};

// Feature extractor, projection, relational module and similarity head.
//
// Parameter order (also the checkpoint order):
//   features.0.{weight,bias}, features.1.{weight,bias}, projection.{weight,bias},
//   transformer aggregation: label_token, then per block b
//     blocks.b.ln1.{gain,bias}, blocks.b.attn.qkv.{weight,bias},
//     blocks.b.attn.out.{weight,bias}, blocks.b.ln2.{gain,bias},
//     blocks.b.mlp.fc1.{weight,bias}, blocks.b.mlp.fc2.{weight,bias}
//   fixed aggregation: aggregator.fc1.{weight,bias}, aggregator.fc2.{weight,bias}
//   final_ln.{gain,bias}, head.{weight,bias}
// There are no positional embeddings, so the transformer is order-agnostic in
// its two feature tokens.
template <typename T>
class RelationalModel {
 public:
  // Seeded initialization: affine weights ~ U(+-1/sqrt(fan_in)), biases 0,
  // layer-norm gains 1, label token ~ N(0, 0.02).
  explicit RelationalModel(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return config_; }

  std::vector<ParamRef<T>> parameters();
  std::vector<ConstParamRef<T>> parameters() const;
  std::size_t parameter_count() const;

  template <typename U>
  RelationalModel<U> cast() const;

  void set_requires_grad(bool on);
  void zero_grad();

  Linear<T> features0, features1, projection;
  Tensor<T> label_token;
  std::vector<EncoderBlock<T>> blocks;
  Linear<T> aggregator_fc1, aggregator_fc2;
  LayerNormParams<T> final_ln;
  Linear<T> head;

 private:
  template <typename U>
  friend class RelationalModel;
  struct Uninitialized {};
  RelationalModel(const ModelConfig& config, Uninitialized);
  void allocate();

  template <typename Self, typename Fn>
  static void visit(Self& self, Fn&& fn);

  ModelConfig config_;
};

// Model parameters registered on one tape.
template <typename T>
class BoundModel {
 public:
  // Trainable binding: tensors with requires_grad receive gradients.
  BoundModel(RelationalModel<T>& model, Tape<T>& tape);
  // Inference binding: all parameters are read-only constants.
  BoundModel(const RelationalModel<T>& model, Tape<T>& tape);

  const ModelConfig& config() const noexcept { return *config_; }
  Tape<T>& tape() const noexcept { return *tape_; }

  struct BoundLinear {
    Var<T> weight, bias;
  };
  struct BoundNorm {
    Var<T> gain, bias;
  };
  struct BoundBlock {
    BoundNorm ln1;
    BoundLinear qkv, attn_out;
    BoundNorm ln2;
    BoundLinear fc1, fc2;
  };

  BoundLinear features0, features1, projection;
  Var<T> label_token;
  std::vector<BoundBlock> blocks;
  BoundLinear aggregator_fc1, aggregator_fc2;
  BoundNorm final_ln;
  BoundLinear head;

 private:
  template <typename Model>
  void bind(Model& model);

  const ModelConfig* config_;
  Tape<T>* tape_;
};

// f_theta: batch x input_dim -> batch x feature_dim.
template <typename T>
Var<T> extract_features(const BoundModel<T>& model, Var<T> x);

// Transformer relational module over pairs (z_a[m], z_b[m]); returns the
// normalized label-token output, pairs x model_dim.
template <typename T>
Var<T> relational_forward(const BoundModel<T>& model, Var<T> z_a, Var<T> z_b);

// Elementwise max / sum or concatenation of the two rows, before any MLP.
template <typename T>
Var<T> combine_pair(Var<T> a, Var<T> b, Aggregation mode);

// Hand-designed aggregation followed by the sizing-matched MLP and final norm.
template <typename T>
Var<T> aggregate_fixed(const BoundModel<T>& model, Var<T> z_a, Var<T> z_b, Aggregation mode);

// Dispatches to relational_forward or aggregate_fixed per the configuration.
template <typename T>
Var<T> relate(const BoundModel<T>& model, Var<T> z_a, Var<T> z_b);

// Pre-squash head output, pairs x 1. Regression mode: the affine output.
// Classification mode: log-odds of "same class", logit_same - logit_diff.
template <typename T>
Var<T> similarity_logit(const BoundModel<T>& model, Var<T> v);

// sigma in (0, 1): sigmoid of similarity_logit. In classification mode this
// equals the 2-way softmax probability of the same-class output.
template <typename T>
Var<T> similarity_score(const BoundModel<T>& model, Var<T> v);

// ---- tensor-level conveniences (no gradients) ----

template <typename T>
Tensor<T> extract_features(const RelationalModel<T>& model, const Tensor<T>& x);

// Pairwise logits for feature rows z_a[m], z_b[m]; returns a vector of length pairs.
template <typename T>
Tensor<T> pair_logits(const RelationalModel<T>& model, const Tensor<T>& z_a, const Tensor<T>& z_b);

// Similarity of one feature pair.
template <typename T>
T similarity(const RelationalModel<T>& model, const Tensor<T>& z_i, const Tensor<T>& z_j);

template <typename T>
Tensor<T> combine_pair(const Tensor<T>& a, const Tensor<T>& b, Aggregation mode);

}  // namespace relnov
