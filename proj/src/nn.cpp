#include "matcomp/nn.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace matcomp::nn {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next() { return engine_(); }

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below(0)");
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

Param& ParamStore::add(const std::string& name, Matrix init, int group) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  params_.push_back(std::make_unique<Param>(name, std::move(init), group));
  Param& p = *params_.back();
  index_[name] = &p;
  return p;
}

Param& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter '" + name + "'");
  return *it->second;
}

const Param& ParamStore::get(const std::string& name) const {
  return const_cast<ParamStore*>(this)->get(name);
}

std::vector<Param*> ParamStore::all() {
  std::vector<Param*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Param*> ParamStore::all() const {
  std::vector<const Param*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::size_t ParamStore::count_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p->group >= 0) n += p->value.size();
  return n;
}

Matrix uniform_init(int rows, int cols, int fan_in, Rng& rng) {
  Matrix m(rows, cols);
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
  for (double& v : m.data) v = rng.uniform(-bound, bound);
  return m;
}

Linear Linear::create(ParamStore& store, const std::string& name, int in, int out, Rng& rng) {
  Linear l;
  l.weight = &store.add(name + ".weight", uniform_init(in, out, in, rng));
  l.bias = &store.add(name + ".bias", Matrix(1, out));
  return l;
}

Var Linear::forward(Tape& tape, Var x) const {
  return add(matmul(x, tape.param(*weight)), tape.param(*bias));
}

Mlp::Mlp(ParamStore& store, const std::string& name, int in, int hidden, int out, double dropout,
         Rng& rng)
    : dropout_(dropout) {
  int width = in;
  for (int k = 0; k < 2; ++k) {
    const std::string prefix = name + ".hidden" + std::to_string(k);
    layers_.push_back(Linear::create(store, prefix, width, hidden, rng));
    gamma_.push_back(&store.add(prefix + ".bn_gamma", Matrix(1, hidden, 1.0)));
    beta_.push_back(&store.add(prefix + ".bn_beta", Matrix(1, hidden)));
    running_mean_.push_back(&store.add(prefix + ".bn_mean", Matrix(1, hidden), kBuffer));
    running_var_.push_back(&store.add(prefix + ".bn_var", Matrix(1, hidden, 1.0), kBuffer));
    width = hidden;
  }
  layers_.push_back(Linear::create(store, name + ".out", width, out, rng));
}

Var Mlp::forward(Tape& tape, Var x, bool training, Rng* rng) const {
  if (x.cols() != in()) {
    throw std::invalid_argument("MLP input width " + std::to_string(x.cols()) + ", expected " +
                                std::to_string(in()));
  }
  Var h = x;
  for (std::size_t k = 0; k + 1 < layers_.size(); ++k) {
    h = layers_[k].forward(tape, h);
    Var gamma = tape.param(*gamma_[k]);
    Var beta = tape.param(*beta_[k]);
    if (training) {
      Matrix mu, var;
      h = batch_norm_train(h, gamma, beta, kEps, &mu, &var);
      if (x.rows() > 1) {
        const double unbias = static_cast<double>(x.rows()) / (x.rows() - 1);
        for (int j = 0; j < mu.cols; ++j) {
          auto& rm = running_mean_[k]->value(0, j);
          auto& rv = running_var_[k]->value(0, j);
          rm = (1 - kMomentum) * rm + kMomentum * mu(0, j);
          rv = (1 - kMomentum) * rv + kMomentum * var(0, j) * unbias;
        }
      }
    } else {
      h = batch_norm_eval(h, gamma, beta, running_mean_[k]->value, running_var_[k]->value, kEps);
    }
    h = relu(h);
    if (training && dropout_ > 0.0) {
      if (!rng) throw std::invalid_argument("MLP training forward needs an Rng for dropout");
      Matrix mask(h.rows(), h.cols());
      const double keep = 1.0 - dropout_;
      for (double& m : mask.data) m = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
      h = mul_const(h, mask);
    }
  }
  return layers_.back().forward(tape, h);
}

Gat::Gat(ParamStore& store, const std::string& name, int in, const GatConfig& config, Rng& rng)
    : config_(config) {
  if (config.hidden_sizes.empty() || config.hidden_sizes.size() != config.heads.size()) {
    throw std::invalid_argument("GAT config: hidden_sizes and heads must be non-empty and equal length");
  }
  int width = in;
  for (std::size_t k = 0; k < config.hidden_sizes.size(); ++k) {
    const int heads = config.heads[k];
    const int w = config.hidden_sizes[k];
    const int out = heads * w;
    const std::string prefix = name + ".layer" + std::to_string(k);
    Layer layer;
    layer.heads = heads;
    layer.width = w;
    layer.last = k + 1 == config.hidden_sizes.size();
    layer.weight = &store.add(prefix + ".weight", uniform_init(width, out, width, rng));
    layer.attn_l = &store.add(prefix + ".attn_l", uniform_init(1, out, w, rng));
    layer.attn_r = &store.add(prefix + ".attn_r", uniform_init(1, out, w, rng));
    layer.bias = &store.add(prefix + ".bias", Matrix(1, out));
    layer.residual = nullptr;
    if (config.residual && width != out) {
      layer.residual = &store.add(prefix + ".residual", uniform_init(width, out, width, rng));
    }
    layers_.push_back(layer);
    width = layer.last ? w : out;
  }
}

Var Gat::layer_forward(Tape& tape, const Layer& layer, Var x, const EdgeList& edges, Var* alpha_out) const {
  Var z = matmul(x, tape.param(*layer.weight));
  Var el = head_reduce(mul(z, tape.param(*layer.attn_l)), layer.heads);
  Var er = head_reduce(mul(z, tape.param(*layer.attn_r)), layer.heads);
  Var e = leaky_relu(add(gather_rows(el, edges.src), gather_rows(er, edges.dst)), config_.leaky_slope);
  Var alpha = segment_softmax(e, edges.dst, edges.num_nodes);
  if (alpha_out) *alpha_out = alpha;
  Var msg = mul(gather_rows(z, edges.src), head_expand(alpha, layer.width));
  Var out = segment_sum(msg, edges.dst, edges.num_nodes);
  if (config_.residual) out = add(out, layer.residual ? matmul(x, tape.param(*layer.residual)) : x);
  out = add(out, tape.param(*layer.bias));
  return layer.last ? head_mean(out, layer.heads) : elu(out);
}

Var Gat::forward(Tape& tape, Var x, const EdgeList& edges) const {
  Var h = x;
  for (const auto& layer : layers_) h = layer_forward(tape, layer, h, edges, nullptr);
  return h;
}

Var Gat::attention(Tape& tape, Var x, const EdgeList& edges, int layer) const {
  Var h = x;
  Var alpha;
  for (int k = 0; k <= layer; ++k) h = layer_forward(tape, layers_.at(k), h, edges, &alpha);
  return alpha;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<int> encode_tokens(std::string_view text, const CellEncoderConfig& config) {
  std::vector<int> ids;
  if (text.empty()) return {config.buckets};
  const std::string padded = "^" + std::string(text) + "$";
  for (int n : config.ngram_sizes) {
    if (static_cast<int>(padded.size()) < n) continue;
    for (std::size_t k = 0; k + n <= padded.size(); ++k) {
      // The n-gram size is hashed in so 2- and 3-grams land in independent buckets.
      std::string key(1, static_cast<char>('0' + n));
      key.append(padded, k, n);
      ids.push_back(static_cast<int>(fnv1a(key) % static_cast<std::uint64_t>(config.buckets)));
    }
  }
  return ids;
}

double TriangularSchedule::factor(long step) const {
  const double total = static_cast<double>(std::max(total_steps, 1L));
  const double warm = std::floor(warmup_ratio * total);
  const double s = static_cast<double>(step);
  if (s < warm) return s / warm;
  if (total <= warm) return 1.0;
  return std::max(0.0, (total - s) / (total - warm));
}

void Adam::step(const std::vector<Param*>& params, const std::vector<double>& lr_by_group) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (Param* p : params) {
    if (p->group < 0) continue;
    const double lr = lr_by_group.at(static_cast<std::size_t>(p->group));
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double g = p->grad.data[k];
      double& m = p->m.data[k];
      double& v = p->v.data[k];
      m = config_.beta1 * m + (1 - config_.beta1) * g;
      v = config_.beta2 * v + (1 - config_.beta2) * g * g;
      p->value.data[k] -= lr * (m / c1) / (std::sqrt(v / c2) + config_.eps);
    }
  }
}

namespace {

constexpr const char* kMagic = "matcomp-checkpoint v1";

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

}  // namespace

void Checkpoint::write(std::ostream& out) const {
  out << kMagic << "\n";
  for (const auto& [k, v] : meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw std::invalid_argument("checkpoint metadata must be single-line and the key space-free");
    }
    out << "meta " << k << " " << v << "\n";
  }
  for (const auto& [name, m] : tensors) {
    out << "tensor " << name << " " << m.rows << " " << m.cols << "\n";
    for (int i = 0; i < m.rows; ++i) {
      for (int j = 0; j < m.cols; ++j) out << (j ? " " : "") << hex(m(i, j));
      out << "\n";
    }
  }
  out << "end\n";
}

Checkpoint Checkpoint::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw std::runtime_error("not a matcomp checkpoint");
  Checkpoint ck;
  while (std::getline(in, line)) {
    if (line == "end") return ck;
    std::istringstream head(line);
    std::string kind;
    head >> kind;
    if (kind == "meta") {
      std::string key;
      head >> key;
      std::string value;
      std::getline(head, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ck.meta[key] = value;
    } else if (kind == "tensor") {
      std::string name;
      int rows = 0, cols = 0;
      if (!(head >> name >> rows >> cols) || rows < 0 || cols < 0) {
        throw std::runtime_error("checkpoint: bad tensor header '" + line + "'");
      }
      Matrix m(rows, cols);
      for (int i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw std::runtime_error("checkpoint: truncated tensor " + name);
        std::istringstream row(line);
        for (int j = 0; j < cols; ++j) {
          std::string tok;
          if (!(row >> tok)) throw std::runtime_error("checkpoint: short row in tensor " + name);
          m(i, j) = std::strtod(tok.c_str(), nullptr);
        }
      }
      ck.tensors.emplace_back(name, std::move(m));
    } else {
      throw std::runtime_error("checkpoint: unexpected line '" + line + "'");
    }
  }
  throw std::runtime_error("checkpoint: missing end marker");
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  write(out);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return read(in);
}

void Checkpoint::add_store(const std::string& prefix, const ParamStore& store) {
  for (const Param* p : store.all()) tensors.emplace_back(prefix + p->name, p->value);
}

void Checkpoint::restore_store(const std::string& prefix, ParamStore& store) const {
  for (Param* p : store.all()) {
    const Matrix& m = tensor(prefix + p->name);
    if (!m.same_shape(p->value)) {
      throw std::runtime_error("checkpoint: shape mismatch for " + prefix + p->name);
    }
    p->value = m;
  }
}

const Matrix& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return m;
  throw std::runtime_error("checkpoint: missing tensor " + name);
}

}  // namespace matcomp::nn
