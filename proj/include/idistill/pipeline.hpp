#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "idistill/corpus.hpp"
#include "idistill/distill.hpp"
#include "idistill/encoder.hpp"
#include "idistill/eval.hpp"
#include "idistill/synth.hpp"
#include "idistill/teacher.hpp"

namespace idistill::pipeline {

struct ExperimentConfig {
  distill::DistillConfig distill;
  std::uint32_t dim = 64;
  std::uint32_t vocab_buckets = 32768;
  std::string teacher = "oracle";  // oracle | remote | bm25 | rouge2 | rule_based
  double oracle_p_swap = 0.0;
  double oracle_score_noise = 0.0;
  teacher::TeacherEndpointConfig endpoint;
};

enum class Mode { Intermediate, Direct };

struct ExperimentOutcome {
  std::map<std::size_t, double> baseline_hr;   // k -> hit rate on test split
  std::map<std::size_t, double> distilled_hr;  // k -> hit rate on test split
  double ranker_mean_spearman = 0.0;  // vs noise-free oracle, test candidates
  distill::TrainReport stage1;
  distill::TrainReport stage2;
  std::size_t train_instances = 0;
  encoder::EncoderModel ranker;
  encoder::EncoderModel retriever;
  encoder::EncoderModel baseline_retriever;
};

std::unique_ptr<teacher::Teacher> make_teacher(
    const ExperimentConfig& config, const corpus::CorpusIndex& index,
    const synth::LatentRelevance* latent, std::uint64_t seed);

/// Retrieval hit rates of `model` over the given examples for each k.
eval::MetricReport evaluate_retriever(const corpus::CorpusIndex& index,
                                      const encoder::EncoderModel& model,
                                      const std::vector<corpus::QAExample>& examples,
                                      const std::vector<std::size_t>& ks,
                                      std::size_t max_len);

/// End-to-end run on an in-memory synthetic world: init encoders, retrieve,
/// teach, train per `mode`, evaluate on the test split. `train_limit`
/// truncates the training set (0 = use all).
ExperimentOutcome run_experiment(const synth::SynthWorld& world,
                                 const ExperimentConfig& config, Mode mode,
                                 std::size_t train_limit = 0);

struct SweepRow {
  std::string axis;
  std::string value;
  std::map<std::size_t, double> baseline_hr;
  std::map<std::size_t, double> distilled_hr;
};

std::vector<SweepRow> ablate_train_size(const synth::SynthWorld& world,
                                        const ExperimentConfig& config,
                                        const std::vector<std::size_t>& sizes);

std::vector<SweepRow> ablate_list_size(const synth::SynthWorld& world,
                                       const ExperimentConfig& config,
                                       const std::vector<std::size_t>& ks);

std::vector<SweepRow> ablate_data_category(const synth::SynthWorld& world,
                                           const ExperimentConfig& config,
                                           std::size_t max_per_category);

void write_sweep(const std::vector<SweepRow>& rows,
                 const std::filesystem::path& path);

/// FNV-1a 64 digest of a file's bytes, as 16 hex chars.
std::string file_digest(const std::filesystem::path& path);

/// Reproducibility manifest: command, config echo, input-file digests.
void write_manifest(const std::filesystem::path& path,
                    const std::string& command, const std::string& config_json,
                    const std::vector<std::filesystem::path>& inputs);

}  // namespace idistill::pipeline
