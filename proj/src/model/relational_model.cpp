#include "relnov/model/relational_model.hpp"

#include <cmath>
#include <random>
#include <string>

namespace relnov {
namespace {

template <typename T>
Linear<T> make_linear(std::size_t in, std::size_t out) {
  return {Tensor<T>({in, out}), Tensor<T>({out})};
}

template <typename T>
LayerNormParams<T> make_norm(std::size_t d) {
  return {Tensor<T>({d}, T{1}), Tensor<T>({d})};
}

template <typename T>
Var<T> affine(Var<T> x, const typename BoundModel<T>::BoundLinear& layer) {
  return add_bias(matmul(x, layer.weight), layer.bias);
}

template <typename T>
Var<T> norm(Var<T> x, const typename BoundModel<T>::BoundNorm& ln) {
  return layer_norm(x, ln.gain, ln.bias);
}

template <typename T>
void require_finite(Var<T> x, const std::string& where) {
  if (!x.value().all_finite()) throw NumericError("non-finite activations in " + where);
}

}  // namespace

template <typename T>
RelationalModel<T>::RelationalModel(const ModelConfig& config, Uninitialized) : config_(config) {
  config_.validate();
  allocate();
}

template <typename T>
RelationalModel<T>::RelationalModel(const ModelConfig& config)
    : RelationalModel(config, Uninitialized{}) {
  std::mt19937_64 rng(config_.seed);
  visit(*this, [&](const std::string& name, Tensor<T>& t) {
    const bool is_gain = name.ends_with(".gain");
    const bool is_bias = name.ends_with(".bias");
    if (name == "label_token") {
      std::normal_distribution<double> dist(0.0, 0.02);
      for (auto& v : t.storage()) v = static_cast<T>(dist(rng));
    } else if (is_gain) {
      std::fill(t.storage().begin(), t.storage().end(), T{1});
    } else if (is_bias) {
      std::fill(t.storage().begin(), t.storage().end(), T{0});
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(t.dim(0)));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : t.storage()) v = static_cast<T>(dist(rng));
    }
  });
}

template <typename T>
void RelationalModel<T>::allocate() {
  const std::size_t d = config_.model_dim;
  features0 = make_linear<T>(config_.input_dim, config_.feature_dim);
  features1 = make_linear<T>(config_.feature_dim, config_.feature_dim);
  projection = make_linear<T>(config_.feature_dim, d);
  blocks.clear();
  if (config_.aggregation == Aggregation::transformer) {
    label_token = Tensor<T>({d});
    const std::size_t hidden = config_.mlp_ratio * d;
    for (std::size_t b = 0; b < config_.num_blocks; ++b) {
      blocks.push_back({make_norm<T>(d), make_linear<T>(d, 3 * d), make_linear<T>(d, d),
                        make_norm<T>(d), make_linear<T>(d, hidden), make_linear<T>(hidden, d)});
    }
  } else {
    const std::size_t in = config_.aggregation == Aggregation::concat ? 2 * d : d;
    const std::size_t hidden = fixed_aggregation_hidden(config_);
    aggregator_fc1 = make_linear<T>(in, hidden);
    aggregator_fc2 = make_linear<T>(hidden, d);
  }
  final_ln = make_norm<T>(d);
  head = make_linear<T>(d, config_.head_mode == HeadMode::classification_2way ? 2 : 1);
}

template <typename T>
template <typename Self, typename Fn>
void RelationalModel<T>::visit(Self& self, Fn&& fn) {
  auto linear = [&](const std::string& name, auto& layer) {
    fn(name + ".weight", layer.weight);
    fn(name + ".bias", layer.bias);
  };
  auto layer_norm_params = [&](const std::string& name, auto& ln) {
    fn(name + ".gain", ln.gain);
    fn(name + ".bias", ln.bias);
  };
  linear("features.0", self.features0);
  linear("features.1", self.features1);
  linear("projection", self.projection);
  if (self.config_.aggregation == Aggregation::transformer) {
    fn(std::string("label_token"), self.label_token);
    for (std::size_t b = 0; b < self.blocks.size(); ++b) {
      const std::string prefix = "blocks." + std::to_string(b);
      auto& block = self.blocks[b];
      layer_norm_params(prefix + ".ln1", block.ln1);
      linear(prefix + ".attn.qkv", block.qkv);
      linear(prefix + ".attn.out", block.attn_out);
      layer_norm_params(prefix + ".ln2", block.ln2);
      linear(prefix + ".mlp.fc1", block.fc1);
      linear(prefix + ".mlp.fc2", block.fc2);
    }
  } else {
    linear("aggregator.fc1", self.aggregator_fc1);
    linear("aggregator.fc2", self.aggregator_fc2);
  }
  layer_norm_params("final_ln", self.final_ln);
  linear("head", self.head);
}

template <typename T>
std::vector<ParamRef<T>> RelationalModel<T>::parameters() {
  std::vector<ParamRef<T>> out;
  visit(*this, [&](const std::string& name, Tensor<T>& t) { out.push_back({name, &t}); });
  return out;
}

template <typename T>
std::vector<ConstParamRef<T>> RelationalModel<T>::parameters() const {
  std::vector<ConstParamRef<T>> out;
  visit(*this, [&](const std::string& name, const Tensor<T>& t) { out.push_back({name, &t}); });
  return out;
}

template <typename T>
std::size_t RelationalModel<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.tensor->size();
  return total;
}

template <typename T>
template <typename U>
RelationalModel<U> RelationalModel<T>::cast() const {
  RelationalModel<U> out(config_, typename RelationalModel<U>::Uninitialized{});
  auto src = parameters();
  auto dst = out.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].tensor = src[i].tensor->template cast<U>();
  return out;
}

template <typename T>
void RelationalModel<T>::set_requires_grad(bool on) {
  for (auto& p : parameters()) p.tensor->set_requires_grad(on);
}

template <typename T>
void RelationalModel<T>::zero_grad() {
  for (auto& p : parameters()) p.tensor->zero_grad();
}

template <typename T>
BoundModel<T>::BoundModel(RelationalModel<T>& model, Tape<T>& tape)
    : config_(&model.config()), tape_(&tape) {
  bind(model);
}

template <typename T>
BoundModel<T>::BoundModel(const RelationalModel<T>& model, Tape<T>& tape)
    : config_(&model.config()), tape_(&tape) {
  bind(model);
}

template <typename T>
template <typename Model>
void BoundModel<T>::bind(Model& model) {
  Tape<T>& tape = *tape_;
  auto linear = [&](auto& layer) { return BoundLinear{tape.leaf(layer.weight), tape.leaf(layer.bias)}; };
  auto ln = [&](auto& params) { return BoundNorm{tape.leaf(params.gain), tape.leaf(params.bias)}; };
  features0 = linear(model.features0);
  features1 = linear(model.features1);
  projection = linear(model.projection);
  if (config_->aggregation == Aggregation::transformer) {
    label_token = tape.leaf(model.label_token);
    for (auto& block : model.blocks) {
      blocks.push_back({ln(block.ln1), linear(block.qkv), linear(block.attn_out), ln(block.ln2),
                        linear(block.fc1), linear(block.fc2)});
    }
  } else {
    aggregator_fc1 = linear(model.aggregator_fc1);
    aggregator_fc2 = linear(model.aggregator_fc2);
  }
  final_ln = ln(model.final_ln);
  head = linear(model.head);
}

template <typename T>
Var<T> extract_features(const BoundModel<T>& model, Var<T> x) {
  if (x.cols() != model.config().input_dim) {
    throw DimensionError("extract_features: input has " + std::to_string(x.cols()) +
                         " columns, model expects " + std::to_string(model.config().input_dim));
  }
  return affine<T>(gelu(affine<T>(x, model.features0)), model.features1);
}

template <typename T>
Var<T> relational_forward(const BoundModel<T>& model, Var<T> z_a, Var<T> z_b) {
  const ModelConfig& cfg = model.config();
  if (cfg.aggregation != Aggregation::transformer) {
    throw ConfigError("relational_forward: model is configured for fixed aggregation");
  }
  if (z_a.cols() != cfg.feature_dim || z_b.cols() != cfg.feature_dim) {
    throw DimensionError("relational_forward: features must have " +
                         std::to_string(cfg.feature_dim) + " columns");
  }
  Var<T> pa = affine<T>(z_a, model.projection);
  Var<T> pb = affine<T>(z_b, model.projection);
  Var<T> z = pair_sequence(model.label_token, pa, pb);
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    const auto& block = model.blocks[b];
    Var<T> attn = self_attention(affine<T>(norm<T>(z, block.ln1), block.qkv), 3, cfg.num_heads);
    Var<T> mid = add(affine<T>(attn, block.attn_out), z);
    Var<T> hidden = gelu(affine<T>(norm<T>(mid, block.ln2), block.fc1));
    z = add(affine<T>(hidden, block.fc2), mid);
    require_finite(z, "transformer block " + std::to_string(b));
  }
  return norm<T>(take_rows(z, 0, 3), model.final_ln);
}

template <typename T>
Var<T> combine_pair(Var<T> a, Var<T> b, Aggregation mode) {
  switch (mode) {
    case Aggregation::max: return maximum(a, b);
    case Aggregation::sum: return add(a, b);
    case Aggregation::concat: return concat_cols(a, b);
    case Aggregation::transformer: break;
  }
  throw ConfigError("combine_pair: transformer is not a fixed aggregation");
}

template <typename T>
Var<T> aggregate_fixed(const BoundModel<T>& model, Var<T> z_a, Var<T> z_b, Aggregation mode) {
  if (mode != model.config().aggregation || mode == Aggregation::transformer) {
    throw ConfigError("aggregate_fixed: mode '" + std::string(to_string(mode)) +
                      "' does not match configured aggregation '" +
                      std::string(to_string(model.config().aggregation)) + "'");
  }
  Var<T> pa = affine<T>(z_a, model.projection);
  Var<T> pb = affine<T>(z_b, model.projection);
  Var<T> joint = combine_pair(pa, pb, mode);
  Var<T> hidden = gelu(affine<T>(joint, model.aggregator_fc1));
  Var<T> out = affine<T>(hidden, model.aggregator_fc2);
  require_finite(out, "aggregation MLP");
  return norm<T>(out, model.final_ln);
}

template <typename T>
Var<T> relate(const BoundModel<T>& model, Var<T> z_a, Var<T> z_b) {
  const Aggregation mode = model.config().aggregation;
  if (mode == Aggregation::transformer) return relational_forward(model, z_a, z_b);
  return aggregate_fixed(model, z_a, z_b, mode);
}

template <typename T>
Var<T> similarity_logit(const BoundModel<T>& model, Var<T> v) {
  Var<T> logits = affine<T>(v, model.head);
  if (model.config().head_mode == HeadMode::regression_sigmoid) return logits;
  return sub(select_col(logits, 1), select_col(logits, 0));
}

template <typename T>
Var<T> similarity_score(const BoundModel<T>& model, Var<T> v) {
  return sigmoid(similarity_logit(model, v));
}

template <typename T>
Tensor<T> extract_features(const RelationalModel<T>& model, const Tensor<T>& x) {
  Tape<T> tape;
  BoundModel<T> bound(model, tape);
  return extract_features(bound, tape.leaf(x)).value();
}

template <typename T>
Tensor<T> pair_logits(const RelationalModel<T>& model, const Tensor<T>& z_a, const Tensor<T>& z_b) {
  Tape<T> tape;
  BoundModel<T> bound(model, tape);
  const Tensor<T>& out = similarity_logit(bound, relate(bound, tape.leaf(z_a), tape.leaf(z_b))).value();
  return Tensor<T>({out.size()}, out.storage());
}

template <typename T>
T similarity(const RelationalModel<T>& model, const Tensor<T>& z_i, const Tensor<T>& z_j) {
  const std::size_t d = model.config().feature_dim;
  if (z_i.size() != d || z_j.size() != d) {
    throw DimensionError("similarity: feature vectors must have length " + std::to_string(d));
  }
  const Tensor<T> a({1, d}, z_i.storage());
  const Tensor<T> b({1, d}, z_j.storage());
  return sigmoid_scalar(pair_logits(model, a, b)[0]);
}

template <typename T>
Tensor<T> combine_pair(const Tensor<T>& a, const Tensor<T>& b, Aggregation mode) {
  Tape<T> tape;
  return combine_pair(tape.leaf(a), tape.leaf(b), mode).value();
}

#define RELNOV_INSTANTIATE_MODEL(T)                                                         \
  template class RelationalModel<T>;                                                        \
  template class BoundModel<T>;                                                             \
  template Var<T> extract_features(const BoundModel<T>&, Var<T>);                           \
  template Var<T> relational_forward(const BoundModel<T>&, Var<T>, Var<T>);                 \
  template Var<T> combine_pair(Var<T>, Var<T>, Aggregation);                                \
  template Var<T> aggregate_fixed(const BoundModel<T>&, Var<T>, Var<T>, Aggregation);       \
  template Var<T> relate(const BoundModel<T>&, Var<T>, Var<T>);                             \
  template Var<T> similarity_logit(const BoundModel<T>&, Var<T>);                           \
  template Var<T> similarity_score(const BoundModel<T>&, Var<T>);                           \
  template Tensor<T> extract_features(const RelationalModel<T>&, const Tensor<T>&);         \
  template Tensor<T> pair_logits(const RelationalModel<T>&, const Tensor<T>&, const Tensor<T>&); \
  template T similarity(const RelationalModel<T>&, const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> combine_pair(const Tensor<T>&, const Tensor<T>&, Aggregation);

RELNOV_INSTANTIATE_MODEL(float)
RELNOV_INSTANTIATE_MODEL(double)

template RelationalModel<double> RelationalModel<float>::cast<double>() const;
template RelationalModel<float> RelationalModel<double>::cast<float>() const;
template RelationalModel<float> RelationalModel<float>::cast<float>() const;
template RelationalModel<double> RelationalModel<double>::cast<double>() const;

}  // namespace relnov
