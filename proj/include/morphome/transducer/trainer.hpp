#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "morphome/nn/optim.hpp"
#include "morphome/transducer/beam.hpp"
#include "morphome/transducer/model.hpp"
#include "morphome/transducer/vocab.hpp"

namespace morphome {

using Model = TransducerModel<float>;

enum class BatchUnit { kExamples, kTokens };
enum class DevDecoding { kGreedy, kBeam };

struct TrainConfig {
  ArchitectureConfig arch;
  long max_updates = 10000;
  int batch_size = 400;
  BatchUnit batch_unit = BatchUnit::kExamples;
  int checkpoint_every_epochs = 10;
  long checkpoint_every_updates = 0;  // when > 0, replaces the epoch interval
  nn::AdamConfig adam;
  nn::LrSchedule schedule;
  double label_smoothing = 0.1;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;
  int beam_width = 5;
  int max_len_margin = 8;
  DevDecoding dev_decoding = DevDecoding::kGreedy;

  void validate() const;
};

struct SeqPair {
  std::string source;  // serialized source line
  std::string target;  // serialized target line
};

struct CheckpointRecord {
  int epoch = 0;
  long updates = 0;
  double train_loss = 0.0;  // mean over updates since the previous checkpoint
  double dev_loss = 0.0;
  double dev_accuracy = 0.0;  // sequence accuracy in [0, 1]
  std::string path;
};

struct EpochRecord {
  int epoch = 0;
  long updates = 0;
  double train_loss = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::vector<CheckpointRecord> checkpoints;
  int selected = -1;  // index into checkpoints
  long updates = 0;
  int max_len = 0;
  int vocab_size = 0;
  std::size_t parameters = 0;
  bool diverged = false;

  const CheckpointRecord& best() const { return checkpoints.at(static_cast<std::size_t>(selected)); }
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything needed to resume training or run inference.
struct Checkpoint {
  ArchitectureConfig arch;
  Vocabulary vocab;
  int max_len = 0;
  long step = 0;
  int epoch = 0;
  std::uint64_t seed = 0;
  std::string rng_state;
  nn::AdamConfig adam;
  std::vector<std::string> names;
  std::vector<nn::Matrix<float>> values;
  std::vector<nn::Matrix<float>> first_moments;
  std::vector<nn::Matrix<float>> second_moments;
};

// Binary container: magic line, format version, JSON descriptor, raw
// little-endian float32 tensors (values, then first and second moments).
void write_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::string& path);
Checkpoint capture_checkpoint(const Model& model, nn::Adam<float>* optimizer, const Vocabulary& vocab, int max_len, long step,
                              int epoch, std::uint64_t seed, const Rng& rng);
Model model_from_checkpoint(const Checkpoint& checkpoint);

using TrainLog = std::function<void(const std::string&)>;

// Trains until max_updates, checkpointing into `out_dir` (checkpoint_<updates>.bin
// plus best.bin and vocab.txt) and selecting the checkpoint with the best dev
// sequence accuracy, ties going to the later one.
TrainReport train_transducer(const TrainConfig& config, const std::vector<SeqPair>& train, const std::vector<SeqPair>& dev,
                             const std::string& out_dir, const TrainLog& log = {});

void write_train_report(const TrainReport& report, std::ostream& out);

std::vector<Example> encode_examples(const Vocabulary& vocab, const std::vector<SeqPair>& pairs);

// Greedy or beam decoding of one encoded source with a trained model.
StepScorer step_scorer(const Model& model, const Model::Memory& memory);
DecodeSpec decode_spec(int beam_width, int max_len);
Hypothesis decode(const Model& model, const std::vector<int>& source, int beam_width, int max_len);

// Mean label-smoothed loss and sequence accuracy over a set (no dropout).
struct SetEvaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};
SetEvaluation evaluate_set(const Model& model, const std::vector<Example>& examples, double label_smoothing, int max_len,
                           int beam_width);

struct PredictionRow {
  std::size_t id = 0;
  std::string gold;
  std::string hypothesis;
  double log_score = 0.0;
  bool complete = true;
};

// One row per source line, in order, written as TSV
// (id, gold, hypothesis, log_score, complete) while decoding.
void predict_stream(const Model& model, const Vocabulary& vocab, int max_len, const std::vector<SeqPair>& examples,
                    int beam_width, std::ostream& out);
void write_prediction_header(std::ostream& out);
std::vector<PredictionRow> read_predictions(std::istream& in);

}  // namespace morphome
