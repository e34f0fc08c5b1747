#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "morphome/pipeline/manifest.hpp"

namespace morphome::pipeline {

// Output layout under the experiment root:
//   ingest/ classify/ triples/            corpus-level stages
//   sample/<condition>/bin<b>/run<r>/     one directory per dataset
//   train/<...>/ predict/<...>/           per trained dataset
//   evaluate/ analyze/ sweep/ report/
std::filesystem::path dataset_dir(const Context& ctx, const DatasetKey& key);
std::filesystem::path model_dir(const Context& ctx, const DatasetKey& key);
std::filesystem::path prediction_file(const Context& ctx, const DatasetKey& key);

EndingInventory load_inventory(const ExperimentConfig& config);
std::vector<SeqPair> read_seq_pairs(const std::filesystem::path& stem);  // <stem>.src / <stem>.tgt

// Seed used to train the model of one dataset.
std::uint64_t training_seed(const ExperimentConfig& config, const DatasetKey& key);

void stage_ingest(const Context& ctx);
void stage_classify(const Context& ctx);
void stage_triples(const Context& ctx);
// `filter` narrows the datasets further (empty members select everything).
void stage_sample(const Context& ctx, const Subset& filter = {});
void stage_train(const Context& ctx, const Subset& filter = {});
void stage_predict(const Context& ctx, const Subset& filter = {});
void stage_evaluate(const Context& ctx);
void stage_analyze(const Context& ctx);
void stage_sweep(const Context& ctx, const std::vector<int>& batch_sizes = {});
void stage_report(const Context& ctx);

// ingest -> classify -> triples -> sample -> train -> predict -> evaluate ->
// analyze -> report, each stage skipped when up to date.
void run_all(const Context& ctx);

}  // namespace morphome::pipeline
