#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "morphome/nn/graph.hpp"
#include "morphome/nn/loss.hpp"
#include "morphome/rng.hpp"
#include "morphome/transducer/vocab.hpp"

namespace morphome {

enum class PositionEncoding { kSinusoidal, kLearned };
enum class Activation { kRelu, kGelu };

struct ArchitectureConfig {
  int layers = 4;
  int heads = 4;
  int embedding_dim = 256;
  int ff_dim = 1024;
  double dropout = 0.1;
  PositionEncoding positions = PositionEncoding::kSinusoidal;
  int max_positions = 512;  // learned positions only
  Activation activation = Activation::kRelu;
  bool tie_output = true;
  double embedding_init_std = 0.02;

  void validate() const {
    if (layers <= 0 || heads <= 0 || embedding_dim <= 0 || ff_dim <= 0 || max_positions <= 0)
      throw std::invalid_argument("architecture sizes must be positive");
    if (embedding_dim % heads != 0) throw std::invalid_argument("embedding_dim must be divisible by heads");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
  }
};

// Token ids of one example: the source line and the bare target (no BOS/EOS).
struct Example {
  std::vector<int> src;
  std::vector<int> tgt;
};

// Several examples packed row-wise. Each example owns a contiguous block of
// encoder rows and of decoder rows; attention never crosses blocks.
struct PackedBatch {
  std::vector<int> src;
  std::vector<int> src_pos;
  std::vector<unsigned char> src_valid;
  std::vector<int> dec_in;   // BOS + target
  std::vector<int> dec_out;  // target + EOS (PAD rows are ignored by the loss)
  std::vector<int> tgt_pos;
  std::vector<nn::AttentionSegment> enc_self;
  std::vector<nn::AttentionSegment> dec_self;
  std::vector<nn::AttentionSegment> cross;
  int target_tokens = 0;  // non-pad rows of dec_out
};

// The source gets a trailing EOS. With pad_to_longest every block is padded
// to the batch maximum with PAD (masked keys, loss-excluded targets).
inline PackedBatch make_batch(const std::vector<const Example*>& examples, bool pad_to_longest = false) {
  PackedBatch b;
  std::size_t max_src = 0, max_tgt = 0;
  for (const auto* e : examples) {
    max_src = std::max(max_src, e->src.size() + 1);
    max_tgt = std::max(max_tgt, e->tgt.size() + 1);
  }
  for (const auto* e : examples) {
    const auto src_begin = static_cast<Eigen::Index>(b.src.size());
    const auto tgt_begin = static_cast<Eigen::Index>(b.dec_in.size());
    std::vector<int> src = e->src;
    src.push_back(Vocabulary::kEos);
    const std::size_t src_rows = pad_to_longest ? max_src : src.size();
    for (std::size_t i = 0; i < src_rows; ++i) {
      const bool real = i < src.size();
      b.src.push_back(real ? src[i] : Vocabulary::kPad);
      b.src_valid.push_back(real ? 1 : 0);
      b.src_pos.push_back(static_cast<int>(i));
    }
    const std::size_t tgt_rows = pad_to_longest ? max_tgt : e->tgt.size() + 1;
    for (std::size_t i = 0; i < tgt_rows; ++i) {
      const bool real = i <= e->tgt.size();
      b.dec_in.push_back(!real ? Vocabulary::kPad : i == 0 ? Vocabulary::kBos : e->tgt[i - 1]);
      b.dec_out.push_back(!real ? Vocabulary::kPad : i < e->tgt.size() ? e->tgt[i] : Vocabulary::kEos);
      b.tgt_pos.push_back(static_cast<int>(i));
      if (real) ++b.target_tokens;
    }
    const auto sl = static_cast<Eigen::Index>(src_rows), tl = static_cast<Eigen::Index>(tgt_rows);
    b.enc_self.push_back({src_begin, sl, src_begin, sl});
    b.dec_self.push_back({tgt_begin, tl, tgt_begin, tl});
    b.cross.push_back({tgt_begin, tl, src_begin, sl});
  }
  return b;
}

inline double sinusoid(int pos, int col, int dim) {
  const double rate = std::pow(10000.0, -static_cast<double>(col - col % 2) / static_cast<double>(dim));
  return col % 2 == 0 ? std::sin(pos * rate) : std::cos(pos * rate);
}

// Pre-norm transformer encoder-decoder over a shared token vocabulary with
// separate source and target embeddings; the output projection is tied to
// the target embedding unless configured otherwise.
template <typename Scalar>
class TransducerModel {
 public:
  using P = nn::Parameter<Scalar>;
  using V = nn::Var<Scalar>;
  using G = nn::Graph<Scalar>;
  using Mat = nn::Matrix<Scalar>;

  TransducerModel(const ArchitectureConfig& arch, int vocab_size, std::uint64_t init_seed) : arch_(arch), vocab_(vocab_size) {
    arch_.validate();
    if (vocab_size <= Vocabulary::kSpecialCount - 1) throw std::invalid_argument("vocabulary too small");
    Rng rng(init_seed);
    const int d = arch_.embedding_dim;
    src_emb_ = add("src_embedding", normal(rng, vocab_, d, arch_.embedding_init_std));
    tgt_emb_ = add("tgt_embedding", normal(rng, vocab_, d, arch_.embedding_init_std));
    if (arch_.positions == PositionEncoding::kLearned) pos_emb_ = add("pos_embedding", normal(rng, arch_.max_positions, d, arch_.embedding_init_std));
    for (int l = 0; l < arch_.layers; ++l) {
      const std::string p = "encoder." + std::to_string(l) + ".";
      enc_.push_back({norm(p + "norm1"), attn(rng, p + "self"), norm(p + "norm2"), ffn(rng, p + "ffn")});
    }
    enc_norm_ = norm("encoder.norm");
    for (int l = 0; l < arch_.layers; ++l) {
      const std::string p = "decoder." + std::to_string(l) + ".";
      dec_.push_back({norm(p + "norm1"), attn(rng, p + "self"), norm(p + "norm2"), attn(rng, p + "cross"), norm(p + "norm3"),
                      ffn(rng, p + "ffn")});
    }
    dec_norm_ = norm("decoder.norm");
    if (!arch_.tie_output) out_proj_ = add("output_projection", xavier(rng, d, vocab_));
  }

  TransducerModel(const TransducerModel&) = delete;
  TransducerModel& operator=(const TransducerModel&) = delete;
  TransducerModel(TransducerModel&&) noexcept = default;

  const ArchitectureConfig& arch() const { return arch_; }
  int vocab_size() const { return vocab_; }

  std::vector<P*> parameters() {
    std::vector<P*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }
  std::vector<const P*> parameters() const {
    std::vector<const P*> out;
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  // Logits for every decoder row of the batch. dropout_rng == nullptr
  // disables dropout (evaluation).
  V logits(G& g, const PackedBatch& b, Rng* dropout_rng) const {
    Bound w = bind(g);
    V enc = encode(g, w, b.src, b.src_pos, b.enc_self, b.src_valid, dropout_rng);
    std::vector<V> ck, cv;
    for (std::size_t l = 0; l < dec_.size(); ++l) {
      ck.push_back(linear(w.dec[l].cross.k, enc));
      cv.push_back(linear(w.dec[l].cross.v, enc));
    }
    V h = decode(g, w, b.dec_in, b.tgt_pos, b.dec_self, b.cross, b.src_valid, ck, cv, dropout_rng);
    return project(w, h);
  }

  V loss(G& g, const PackedBatch& b, double label_smoothing, Rng* dropout_rng) const {
    return nn::label_smoothed_nll(logits(g, b, dropout_rng), b.dec_out, label_smoothing, Vocabulary::kPad);
  }

  // Encoder output and per-layer cross-attention keys/values for one source.
  struct Memory {
    std::vector<Mat> cross_k;
    std::vector<Mat> cross_v;
    std::vector<unsigned char> valid;
    Eigen::Index rows = 0;
  };

  Memory encode_source(const std::vector<int>& src) const {
    G g(false);
    Bound w = bind(g);
    std::vector<int> ids = src;
    ids.push_back(Vocabulary::kEos);
    const auto n = static_cast<Eigen::Index>(ids.size());
    std::vector<int> pos(ids.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<int>(i);
    Memory m;
    m.valid.assign(ids.size(), 1);
    m.rows = n;
    V enc = encode(g, w, ids, pos, {{0, n, 0, n}}, m.valid, nullptr);
    for (std::size_t l = 0; l < dec_.size(); ++l) {
      m.cross_k.push_back(linear(w.dec[l].cross.k, enc).value());
      m.cross_v.push_back(linear(w.dec[l].cross.v, enc).value());
    }
    return m;
  }

  // Log-probabilities of the next token after each prefix (prefixes start
  // with BOS). One row per prefix.
  nn::Matrix<double> next_log_probs(const Memory& m, const std::vector<std::vector<int>>& prefixes) const {
    G g(false);
    Bound w = bind(g);
    std::vector<int> ids, pos;
    std::vector<nn::AttentionSegment> self, cross;
    std::vector<Eigen::Index> last;
    for (const auto& p : prefixes) {
      const auto begin = static_cast<Eigen::Index>(ids.size());
      const auto len = static_cast<Eigen::Index>(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) {
        ids.push_back(p[i]);
        pos.push_back(static_cast<int>(i));
      }
      self.push_back({begin, len, begin, len});
      cross.push_back({begin, len, 0, m.rows});
      last.push_back(begin + len - 1);
    }
    std::vector<V> ck, cv;
    for (std::size_t l = 0; l < dec_.size(); ++l) {
      ck.push_back(g.constant(m.cross_k[l]));
      cv.push_back(g.constant(m.cross_v[l]));
    }
    V h = decode(g, w, ids, pos, self, cross, m.valid, ck, cv, nullptr);
    Mat rows(static_cast<Eigen::Index>(last.size()), h.cols());
    for (std::size_t i = 0; i < last.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = h.value().row(last[i]);
    V logits = project(w, g.constant(std::move(rows)));
    return nn::log_softmax_rows<Scalar>(logits.value()).template cast<double>();
  }

 private:
  struct Linear {
    P* w = nullptr;
    P* b = nullptr;
  };
  struct Norm {
    P* gain = nullptr;
    P* bias = nullptr;
  };
  struct Attn {
    Linear q, k, v, o;
  };
  struct Ffn {
    Linear in, out;
  };
  struct EncLayer {
    Norm n1;
    Attn self;
    Norm n2;
    Ffn ff;
  };
  struct DecLayer {
    Norm n1;
    Attn self;
    Norm n2;
    Attn cross;
    Norm n3;
    Ffn ff;
  };

  // Graph handles for one forward pass; each parameter enters the graph once.
  struct BLinear {
    V w, b;
  };
  struct BNorm {
    V gain, bias;
  };
  struct BAttn {
    BLinear q, k, v, o;
  };
  struct BFfn {
    BLinear in, out;
  };
  struct BEnc {
    BNorm n1;
    BAttn self;
    BNorm n2;
    BFfn ff;
  };
  struct BDec {
    BNorm n1;
    BAttn self;
    BNorm n2;
    BAttn cross;
    BNorm n3;
    BFfn ff;
  };
  struct Bound {
    V src_emb, tgt_emb, pos_emb, out_proj;
    std::vector<BEnc> enc;
    BNorm enc_norm;
    std::vector<BDec> dec;
    BNorm dec_norm;
  };

  P* add(std::string name, Mat value) {
    params_.push_back(std::make_unique<P>(std::move(name), std::move(value)));
    return params_.back().get();
  }
  static Mat normal(Rng& rng, int rows, int cols, double std) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(rng.normal() * std);
    return m;
  }
  static Mat xavier(Rng& rng, int fan_in, int fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    Mat m(fan_in, fan_out);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * a);
    return m;
  }
  Linear linear_param(Rng& rng, const std::string& name, int in, int out) {
    return {add(name + ".weight", xavier(rng, in, out)), add(name + ".bias", Mat::Zero(1, out))};
  }
  Norm norm(const std::string& name) {
    const int d = arch_.embedding_dim;
    return {add(name + ".gain", Mat::Ones(1, d)), add(name + ".bias", Mat::Zero(1, d))};
  }
  Attn attn(Rng& rng, const std::string& name) {
    const int d = arch_.embedding_dim;
    return {linear_param(rng, name + ".q", d, d), linear_param(rng, name + ".k", d, d), linear_param(rng, name + ".v", d, d),
            linear_param(rng, name + ".o", d, d)};
  }
  Ffn ffn(Rng& rng, const std::string& name) {
    return {linear_param(rng, name + ".in", arch_.embedding_dim, arch_.ff_dim),
            linear_param(rng, name + ".out", arch_.ff_dim, arch_.embedding_dim)};
  }

  static BLinear bind(G& g, const Linear& l) { return {g.param(*l.w), g.param(*l.b)}; }
  static BNorm bind(G& g, const Norm& n) { return {g.param(*n.gain), g.param(*n.bias)}; }
  static BAttn bind(G& g, const Attn& a) { return {bind(g, a.q), bind(g, a.k), bind(g, a.v), bind(g, a.o)}; }
  static BFfn bind(G& g, const Ffn& f) { return {bind(g, f.in), bind(g, f.out)}; }

  Bound bind(G& g) const {
    Bound w;
    w.src_emb = g.param(*src_emb_);
    w.tgt_emb = g.param(*tgt_emb_);
    if (pos_emb_) w.pos_emb = g.param(*pos_emb_);
    if (out_proj_) w.out_proj = g.param(*out_proj_);
    for (const auto& l : enc_) w.enc.push_back({bind(g, l.n1), bind(g, l.self), bind(g, l.n2), bind(g, l.ff)});
    w.enc_norm = bind(g, enc_norm_);
    for (const auto& l : dec_)
      w.dec.push_back({bind(g, l.n1), bind(g, l.self), bind(g, l.n2), bind(g, l.cross), bind(g, l.n3), bind(g, l.ff)});
    w.dec_norm = bind(g, dec_norm_);
    return w;
  }

  static V linear(const BLinear& l, V x) { return nn::add_bias(nn::matmul(x, l.w), l.b); }
  static V layer_norm(const BNorm& n, V x) { return nn::layer_norm(x, n.gain, n.bias); }

  V activation(V x) const { return arch_.activation == Activation::kGelu ? nn::gelu(x) : nn::relu(x); }
  V drop(V x, Rng* rng) const { return rng ? nn::dropout(x, arch_.dropout, *rng) : x; }

  V embed(G& g, const Bound& w, V table, const std::vector<int>& ids, const std::vector<int>& pos, Rng* rng) const {
    const int d = arch_.embedding_dim;
    V x = nn::scale(nn::embedding(table, ids), static_cast<Scalar>(std::sqrt(static_cast<double>(d))));
    if (arch_.positions == PositionEncoding::kLearned) {
      for (int p : pos)
        if (p >= arch_.max_positions) throw std::out_of_range("sequence longer than max_positions");
      x = x + nn::embedding(w.pos_emb, pos);
    } else {
      Mat pe(static_cast<Eigen::Index>(pos.size()), d);
      for (std::size_t r = 0; r < pos.size(); ++r)
        for (int c = 0; c < d; ++c) pe(static_cast<Eigen::Index>(r), c) = static_cast<Scalar>(sinusoid(pos[r], c, d));
      x = x + g.constant(std::move(pe));
    }
    return drop(x, rng);
  }

  V self_or_cross(const BAttn& a, V q_in, V k, V v, const nn::AttentionLayout& layout) const {
    return linear(a.o, nn::attention(linear(a.q, q_in), k, v, layout));
  }

  V feed_forward(const BFfn& f, V x) const { return linear(f.out, activation(linear(f.in, x))); }

  V encode(G& g, const Bound& w, const std::vector<int>& ids, const std::vector<int>& pos,
           const std::vector<nn::AttentionSegment>& segments, const std::vector<unsigned char>& valid, Rng* rng) const {
    nn::AttentionLayout layout;
    layout.segments = segments;
    layout.key_valid = valid;
    layout.heads = arch_.heads;
    V x = embed(g, w, w.src_emb, ids, pos, rng);
    for (const auto& l : w.enc) {
      V h = layer_norm(l.n1, x);
      x = x + drop(self_or_cross(l.self, h, linear(l.self.k, h), linear(l.self.v, h), layout), rng);
      x = x + drop(feed_forward(l.ff, layer_norm(l.n2, x)), rng);
    }
    return layer_norm(w.enc_norm, x);
  }

  V decode(G& g, const Bound& w, const std::vector<int>& ids, const std::vector<int>& pos,
           const std::vector<nn::AttentionSegment>& self_segments, const std::vector<nn::AttentionSegment>& cross_segments,
           const std::vector<unsigned char>& src_valid, const std::vector<V>& cross_k, const std::vector<V>& cross_v,
           Rng* rng) const {
    nn::AttentionLayout self_layout;
    self_layout.segments = self_segments;
    self_layout.causal = true;
    self_layout.heads = arch_.heads;
    nn::AttentionLayout cross_layout;
    cross_layout.segments = cross_segments;
    cross_layout.key_valid = src_valid;
    cross_layout.heads = arch_.heads;
    V x = embed(g, w, w.tgt_emb, ids, pos, rng);
    for (std::size_t i = 0; i < w.dec.size(); ++i) {
      const auto& l = w.dec[i];
      V h = layer_norm(l.n1, x);
      x = x + drop(self_or_cross(l.self, h, linear(l.self.k, h), linear(l.self.v, h), self_layout), rng);
      x = x + drop(self_or_cross(l.cross, layer_norm(l.n2, x), cross_k[i], cross_v[i], cross_layout), rng);
      x = x + drop(feed_forward(l.ff, layer_norm(l.n3, x)), rng);
    }
    return layer_norm(w.dec_norm, x);
  }

  V project(const Bound& w, V h) const { return arch_.tie_output ? nn::matmul_nt(h, w.tgt_emb) : nn::matmul(h, w.out_proj); }

  ArchitectureConfig arch_;
  int vocab_;
  std::vector<std::unique_ptr<P>> params_;
  P* src_emb_ = nullptr;
  P* tgt_emb_ = nullptr;
  P* pos_emb_ = nullptr;
  P* out_proj_ = nullptr;
  std::vector<EncLayer> enc_;
  Norm enc_norm_;
  std::vector<DecLayer> dec_;
  Norm dec_norm_;
};

}  // namespace morphome
