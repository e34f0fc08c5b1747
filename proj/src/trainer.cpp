#include "morphome/transducer/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "morphome/tripler.hpp"
#include "morphome/unicode.hpp"

namespace morphome {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[] = "MORPHOME-CHECKPOINT\n";
constexpr std::uint32_t kFormatVersion = 1;

json arch_to_json(const ArchitectureConfig& a) {
  return {{"layers", a.layers},
          {"heads", a.heads},
          {"embedding_dim", a.embedding_dim},
          {"ff_dim", a.ff_dim},
          {"dropout", a.dropout},
          {"positions", a.positions == PositionEncoding::kLearned ? "learned" : "sinusoidal"},
          {"max_positions", a.max_positions},
          {"activation", a.activation == Activation::kGelu ? "gelu" : "relu"},
          {"tie_output", a.tie_output},
          {"embedding_init_std", a.embedding_init_std}};
}

ArchitectureConfig arch_from_json(const json& j) {
  ArchitectureConfig a;
  a.layers = j.at("layers");
  a.heads = j.at("heads");
  a.embedding_dim = j.at("embedding_dim");
  a.ff_dim = j.at("ff_dim");
  a.dropout = j.at("dropout");
  a.positions = j.at("positions") == "learned" ? PositionEncoding::kLearned : PositionEncoding::kSinusoidal;
  a.max_positions = j.at("max_positions");
  a.activation = j.at("activation") == "gelu" ? Activation::kGelu : Activation::kRelu;
  a.tie_output = j.at("tie_output");
  a.embedding_init_std = j.at("embedding_init_std");
  return a;
}

void write_matrix(std::ostream& out, const nn::Matrix<float>& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
}

void read_matrix(std::istream& in, nn::Matrix<float>& m) {
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
  if (!in) throw std::runtime_error("checkpoint truncated");
}

std::string format_score(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string display(const std::string& spaced_line) { return to_utf8(unspaced(spaced_line)); }

}  // namespace

void TrainConfig::validate() const {
  arch.validate();
  if (max_updates <= 0 || batch_size <= 0 || beam_width <= 0) throw std::invalid_argument("max_updates, batch_size and beam_width must be positive");
  if (checkpoint_every_epochs <= 0 && checkpoint_every_updates <= 0) throw std::invalid_argument("checkpoint interval must be positive");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be positive");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) throw std::invalid_argument("label_smoothing must be in [0, 1)");
  if (!(adam.lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (max_len_margin < 1) throw std::invalid_argument("max_len_margin must be at least 1");
}

void write_checkpoint(const std::string& path, const Checkpoint& c) {
  json params = json::array();
  for (std::size_t i = 0; i < c.names.size(); ++i)
    params.push_back({{"name", c.names[i]}, {"rows", c.values[i].rows()}, {"cols", c.values[i].cols()}});
  json desc = {{"format", kFormatVersion},
               {"scalar", "float32"},
               {"architecture", arch_to_json(c.arch)},
               {"vocabulary", c.vocab.tokens()},
               {"max_len", c.max_len},
               {"step", c.step},
               {"epoch", c.epoch},
               {"seed", c.seed},
               {"rng_state", c.rng_state},
               {"adam", {{"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
               {"has_optimizer_state", !c.first_moments.empty()},
               {"parameters", params}};
  const std::string text = desc.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out.write(kMagic, static_cast<std::streamsize>(std::strlen(kMagic)));
    const std::uint64_t n = text.size();
    out.write(reinterpret_cast<const char*>(&kFormatVersion), sizeof kFormatVersion);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& m : c.values) write_matrix(out, m);
    for (const auto& m : c.first_moments) write_matrix(out, m);
    for (const auto& m : c.second_moments) write_matrix(out, m);
    if (!out) throw std::runtime_error("failed writing checkpoint " + path);
  }
  fs::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::string magic(std::strlen(kMagic), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (magic != kMagic) throw std::runtime_error(path + " is not a checkpoint file");
  std::uint32_t version = 0;
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || version != kFormatVersion) throw std::runtime_error("unsupported checkpoint format in " + path);
  std::string text(n, '\0');
  in.read(text.data(), static_cast<std::streamsize>(n));
  const json desc = json::parse(text);

  Checkpoint c;
  c.arch = arch_from_json(desc.at("architecture"));
  std::vector<std::string> tokens = desc.at("vocabulary");
  c.vocab = Vocabulary(std::vector<std::string>(tokens.begin() + Vocabulary::kSpecialCount, tokens.end()));
  if (c.vocab.tokens() != tokens) throw std::runtime_error("checkpoint vocabulary is not in canonical order");
  c.max_len = desc.at("max_len");
  c.step = desc.at("step");
  c.epoch = desc.at("epoch");
  c.seed = desc.at("seed");
  c.rng_state = desc.at("rng_state");
  const auto& adam = desc.at("adam");
  c.adam = {adam.at("lr"), adam.at("beta1"), adam.at("beta2"), adam.at("eps")};
  for (const auto& p : desc.at("parameters")) {
    c.names.push_back(p.at("name"));
    c.values.emplace_back(p.at("rows").get<Eigen::Index>(), p.at("cols").get<Eigen::Index>());
  }
  for (auto& m : c.values) read_matrix(in, m);
  if (desc.at("has_optimizer_state").get<bool>()) {
    c.first_moments = c.values;
    c.second_moments = c.values;
    for (auto& m : c.first_moments) read_matrix(in, m);
    for (auto& m : c.second_moments) read_matrix(in, m);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("trailing bytes in checkpoint " + path);
  return c;
}

Checkpoint capture_checkpoint(const Model& model, nn::Adam<float>* optimizer, const Vocabulary& vocab, int max_len, long step,
                              int epoch, std::uint64_t seed, const Rng& rng) {
  Checkpoint c;
  c.arch = model.arch();
  c.vocab = vocab;
  c.max_len = max_len;
  c.step = step;
  c.epoch = epoch;
  c.seed = seed;
  c.rng_state = rng.state();
  for (const auto* p : model.parameters()) {
    c.names.push_back(p->name);
    c.values.push_back(p->value);
  }
  if (optimizer) {
    c.adam = optimizer->config();
    c.first_moments = optimizer->first_moments();
    c.second_moments = optimizer->second_moments();
  }
  return c;
}

Model model_from_checkpoint(const Checkpoint& c) {
  Model model(c.arch, c.vocab.size(), 0);
  auto params = model.parameters();
  if (params.size() != c.values.size()) throw std::runtime_error("checkpoint parameter count does not match the architecture");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->name != c.names[i] || params[i]->value.rows() != c.values[i].rows() ||
        params[i]->value.cols() != c.values[i].cols())
      throw std::runtime_error("checkpoint parameter mismatch at " + c.names[i]);
    params[i]->value = c.values[i];
  }
  return model;
}

std::vector<Example> encode_examples(const Vocabulary& vocab, const std::vector<SeqPair>& pairs) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({vocab.encode(p.source), vocab.encode(p.target)});
  return out;
}

StepScorer step_scorer(const Model& model, const Model::Memory& memory) {
  return [&model, &memory](const std::vector<std::vector<int>>& prefixes) { return model.next_log_probs(memory, prefixes); };
}

DecodeSpec decode_spec(int beam_width, int max_len) {
  DecodeSpec spec;
  spec.beam_width = beam_width;
  spec.max_len = max_len;
  spec.bos = Vocabulary::kBos;
  spec.eos = Vocabulary::kEos;
  spec.banned = {Vocabulary::kPad, Vocabulary::kBos};
  return spec;
}

Hypothesis decode(const Model& model, const std::vector<int>& source, int beam_width, int max_len) {
  const auto memory = model.encode_source(source);
  const auto scorer = step_scorer(model, memory);
  const auto spec = decode_spec(beam_width, max_len);
  if (beam_width == 1) return greedy_decode(scorer, model.vocab_size(), spec);
  return beam_search(scorer, model.vocab_size(), spec).front();
}

SetEvaluation evaluate_set(const Model& model, const std::vector<Example>& examples, double label_smoothing, int max_len,
                           int beam_width) {
  SetEvaluation ev;
  if (examples.empty()) return ev;
  double weighted = 0.0;
  long tokens = 0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < examples.size(); start += kChunk) {
    std::vector<const Example*> ptrs;
    for (std::size_t i = start; i < std::min(examples.size(), start + kChunk); ++i) ptrs.push_back(&examples[i]);
    const auto batch = make_batch(ptrs);
    nn::Graph<float> g(false);
    weighted += static_cast<double>(model.loss(g, batch, label_smoothing, nullptr).value()(0, 0)) * batch.target_tokens;
    tokens += batch.target_tokens;
  }
  ev.loss = weighted / static_cast<double>(tokens);
  std::size_t correct = 0;
  for (const auto& e : examples) {
    const auto h = decode(model, e.src, beam_width, max_len);
    if (h.complete && h.tokens == e.tgt) ++correct;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
  return ev;
}

TrainReport train_transducer(const TrainConfig& cfg, const std::vector<SeqPair>& train, const std::vector<SeqPair>& dev,
                             const std::string& out_dir, const TrainLog& log) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("training set is empty");
  fs::create_directories(out_dir);
  auto say = [&](const std::string& m) {
    if (log) log(m);
  };

  std::vector<std::string> lines;
  for (const auto& p : train) {
    lines.push_back(p.source);
    lines.push_back(p.target);
  }
  const Vocabulary vocab = Vocabulary::build(lines);
  {
    std::ofstream out(fs::path(out_dir) / "vocab.txt");
    vocab.write(out);
  }
  const auto tr = encode_examples(vocab, train);
  const auto dv = encode_examples(vocab, dev);
  std::size_t longest = 0;
  for (const auto& e : tr) longest = std::max(longest, e.tgt.size());
  const int max_len = static_cast<int>(longest) + cfg.max_len_margin;

  Model model(cfg.arch, vocab.size(), derive_seed(cfg.seed, "init"));
  nn::Adam<float> opt(model.parameters(), cfg.adam);
  nn::LrSchedule schedule = cfg.schedule;
  schedule.base_lr = cfg.adam.lr;
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
  const auto params = model.parameters();

  TrainReport report;
  report.max_len = max_len;
  report.vocab_size = vocab.size();
  report.parameters = model.parameter_count();
  say("vocabulary " + std::to_string(vocab.size()) + ", parameters " + std::to_string(report.parameters) + ", max_len " +
      std::to_string(max_len));

  long updates = 0;
  int epoch = 0;
  double window_loss = 0.0;
  long window_n = 0;
  const int dev_beam = cfg.dev_decoding == DevDecoding::kGreedy ? 1 : cfg.beam_width;

  auto checkpoint = [&] {
    CheckpointRecord rec;
    rec.epoch = epoch;
    rec.updates = updates;
    rec.train_loss = window_n ? window_loss / static_cast<double>(window_n) : 0.0;
    const auto ev = evaluate_set(model, dv, cfg.label_smoothing, max_len, dev_beam);
    rec.dev_loss = ev.loss;
    rec.dev_accuracy = ev.accuracy;
    rec.path = (fs::path(out_dir) / ("checkpoint_" + std::to_string(updates) + ".bin")).string();
    write_checkpoint(rec.path, capture_checkpoint(model, &opt, vocab, max_len, updates, epoch, cfg.seed, dropout_rng));
    report.checkpoints.push_back(rec);
    window_loss = 0.0;
    window_n = 0;
    char buf[160];
    std::snprintf(buf, sizeof buf, "checkpoint at update %ld (epoch %d): train loss %.4f, dev loss %.4f, dev accuracy %.4f", updates,
                  epoch, rec.train_loss, rec.dev_loss, rec.dev_accuracy);
    say(buf);
  };

  auto finalize = [&] {
    report.updates = updates;
    for (std::size_t i = 0; i < report.checkpoints.size(); ++i)
      if (report.selected < 0 || report.checkpoints[i].dev_accuracy >= report.best().dev_accuracy) report.selected = static_cast<int>(i);
    if (report.selected >= 0) fs::copy_file(report.best().path, fs::path(out_dir) / "best.bin", fs::copy_options::overwrite_existing);
    std::ofstream out(fs::path(out_dir) / "train_report.json");
    write_train_report(report, out);
  };

  try {
    while (updates < cfg.max_updates) {
      ++epoch;
      std::vector<std::size_t> order(tr.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffle_rng(derive_seed(cfg.seed, {"epoch", std::to_string(epoch)}));
      shuffle_rng.shuffle(order);

      std::vector<std::vector<const Example*>> batches(1);
      long batch_tokens = 0;
      for (std::size_t idx : order) {
        const auto& e = tr[idx];
        const long cost = cfg.batch_unit == BatchUnit::kTokens ? static_cast<long>(e.src.size() + e.tgt.size() + 2) : 1;
        if (!batches.back().empty() && batch_tokens + cost > cfg.batch_size) {
          batches.emplace_back();
          batch_tokens = 0;
        }
        batches.back().push_back(&e);
        batch_tokens += cost;
      }

      double epoch_loss = 0.0;
      long epoch_n = 0;
      for (const auto& ptrs : batches) {
        if (updates >= cfg.max_updates) break;
        nn::zero_grads(params);
        const auto batch = make_batch(ptrs);
        nn::Graph<float> g;
        auto loss = model.loss(g, batch, cfg.label_smoothing, &dropout_rng);
        g.backward(loss);
        nn::clip_global_norm(params, cfg.clip_norm);
        ++updates;
        opt.step(schedule.at(updates));
        const double l = loss.value()(0, 0);
        epoch_loss += l;
        ++epoch_n;
        window_loss += l;
        ++window_n;
        if (cfg.checkpoint_every_updates > 0 && updates % cfg.checkpoint_every_updates == 0) checkpoint();
      }
      report.epochs.push_back({epoch, updates, epoch_n ? epoch_loss / static_cast<double>(epoch_n) : 0.0});
      if (cfg.checkpoint_every_updates <= 0 && epoch % cfg.checkpoint_every_epochs == 0 &&
          (report.checkpoints.empty() || report.checkpoints.back().updates != updates))
        checkpoint();
    }
    if (report.checkpoints.empty() || report.checkpoints.back().updates != updates) checkpoint();
  } catch (const nn::NumericalError& e) {
    report.diverged = true;
    finalize();
    throw TrainingDiverged(std::string("training diverged at update ") + std::to_string(updates) + ": " + e.what());
  }
  finalize();
  return report;
}

void write_train_report(const TrainReport& r, std::ostream& out) {
  json epochs = json::array(), ckpts = json::array();
  for (const auto& e : r.epochs) epochs.push_back({{"epoch", e.epoch}, {"updates", e.updates}, {"train_loss", e.train_loss}});
  for (const auto& c : r.checkpoints)
    ckpts.push_back({{"epoch", c.epoch},
                     {"updates", c.updates},
                     {"train_loss", c.train_loss},
                     {"dev_loss", c.dev_loss},
                     {"dev_accuracy", c.dev_accuracy},
                     {"path", fs::path(c.path).filename().string()}});
  json j = {{"updates", r.updates},     {"max_len", r.max_len},   {"vocab_size", r.vocab_size}, {"parameters", r.parameters},
            {"diverged", r.diverged},   {"selected", r.selected}, {"epochs", epochs},           {"checkpoints", ckpts}};
  out << j.dump(2) << '\n';
}

void write_prediction_header(std::ostream& out) { out << "id\tgold\thypothesis\tlog_score\tcomplete\n"; }

void predict_stream(const Model& model, const Vocabulary& vocab, int max_len, const std::vector<SeqPair>& examples,
                    int beam_width, std::ostream& out) {
  write_prediction_header(out);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto h = decode(model, vocab.encode(examples[i].source), beam_width, max_len);
    out << i << '\t' << display(examples[i].target) << '\t' << display(vocab.decode(h.tokens)) << '\t' << format_score(h.score)
        << '\t' << (h.complete ? 1 : 0) << '\n';
  }
  out.flush();
}

std::vector<PredictionRow> read_predictions(std::istream& in) {
  std::vector<PredictionRow> rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  if (line != "id\tgold\thypothesis\tlog_score\tcomplete") throw std::runtime_error("unexpected prediction file header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split(line, '\t');
    if (f.size() != 5) throw std::runtime_error("malformed prediction row: " + line);
    PredictionRow r;
    r.id = std::stoull(std::string(f[0]));
    r.gold = f[1];
    r.hypothesis = f[2];
    r.log_score = std::stod(std::string(f[3]));
    r.complete = f[4] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace morphome
