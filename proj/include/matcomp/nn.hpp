#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <random>
#include <string_view>
#include <vector>

#include "matcomp/autodiff.hpp"

namespace matcomp::nn {

/// Deterministic generator; all randomness in training flows through one of these.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

enum ParamGroup : int { kBuffer = -1, kEncoder = 0, kHead = 1 };

/// Owns named parameters in insertion order.
class ParamStore {
 public:
  Param& add(const std::string& name, Matrix init, int group = kHead);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  std::vector<Param*> all();
  std::vector<const Param*> all() const;
  void zero_grad();
  std::size_t count_scalars() const;

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::map<std::string, Param*> index_;
};

/// Uniform in +-1/sqrt(fan_in).
Matrix uniform_init(int rows, int cols, int fan_in, Rng& rng);

/// Fully connected layer x W + b.
struct Linear {
  Param* weight = nullptr;
  Param* bias = nullptr;

  static Linear create(ParamStore& store, const std::string& name, int in, int out, Rng& rng);
  Var forward(Tape& tape, Var x) const;
  int in() const { return weight->value.rows; }
  int out() const { return weight->value.cols; }
};

/// Linear -> BatchNorm -> ReLU -> Dropout, twice, then a linear output layer.
class Mlp {
 public:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEps = 1e-5;

  Mlp() = default;
  Mlp(ParamStore& store, const std::string& name, int in, int hidden, int out, double dropout, Rng& rng);

  /// `rng` drives the dropout masks and is required when training.
  Var forward(Tape& tape, Var x, bool training, Rng* rng) const;
  int in() const { return layers_.front().in(); }
  int out() const { return layers_.back().out(); }

 private:
  std::vector<Linear> layers_;
  std::vector<Param*> gamma_, beta_, running_mean_, running_var_;
  double dropout_ = 0.0;
};

struct GatConfig {
  std::vector<int> hidden_sizes;
  std::vector<int> heads;
  double leaky_slope = 0.2;
  bool residual = true;
};

/// Edge list in the form GAT needs: src/dst node ids per edge (self-loops included).
struct EdgeList {
  int num_nodes = 0;
  std::vector<int> src;
  std::vector<int> dst;
};

/// Multi-head graph attention stack. Hidden layers concatenate heads and apply ELU; the last
/// layer averages heads. Each layer adds a residual (projected when widths differ) and a bias.
class Gat {
 public:
  Gat() = default;
  Gat(ParamStore& store, const std::string& name, int in, const GatConfig& config, Rng& rng);

  Var forward(Tape& tape, Var x, const EdgeList& edges) const;
  /// Attention coefficients (E x heads) of layer `layer` for input x.
  Var attention(Tape& tape, Var x, const EdgeList& edges, int layer) const;
  int out() const { return config_.hidden_sizes.back(); }

 private:
  struct Layer {
    Param* weight;
    Param* attn_l;
    Param* attn_r;
    Param* bias;
    Param* residual;  // null when the identity is used
    int heads;
    int width;
    bool last;
  };
  Var layer_forward(Tape& tape, const Layer& layer, Var x, const EdgeList& edges, Var* alpha) const;

  GatConfig config_;
  std::vector<Layer> layers_;
};

/// Hashed character n-gram tokenizer standing in for a pretrained text encoder.
struct CellEncoderConfig {
  int buckets = 4096;
  std::vector<int> ngram_sizes = {2, 3};
};

/// Token ids of `text`; the empty text maps to the reserved id `buckets`.
std::vector<int> encode_tokens(std::string_view text, const CellEncoderConfig& config);
std::uint64_t fnv1a(std::string_view bytes);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Linear warmup over the first `warmup_ratio` of steps, then linear decay to zero.
struct TriangularSchedule {
  long total_steps = 1;
  double warmup_ratio = 0.1;
  double factor(long step) const;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  /// One update using `lr_by_group[param.group]`. Buffers are skipped. Gradients are not cleared.
  void step(const std::vector<Param*>& params, const std::vector<double>& lr_by_group);
  long steps() const { return t_; }

 private:
  AdamConfig config_;
  long t_ = 0;
};

/// Text checkpoint: header, free-form metadata, then every tensor with its shape and hex-float
/// values, so a save/load round trip is bit exact.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Matrix>> tensors;

  void write(std::ostream& out) const;
  static Checkpoint read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  void add_store(const std::string& prefix, const ParamStore& store);
  /// Copies matching tensors into `store`; throws on a missing name or shape mismatch.
  void restore_store(const std::string& prefix, ParamStore& store) const;
  const Matrix& tensor(const std::string& name) const;
};

}  // namespace matcomp::nn
