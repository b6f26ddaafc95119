#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "idistill/corpus.hpp"
#include "idistill/encoder.hpp"
#include "idistill/teacher.hpp"

namespace idistill::distill {

struct DistillConfig {
  std::size_t k = 5;
  double theta_ranker = 1.0;
  double theta_retriever = 1.0;
  double lr_ranker = 5e-5;
  double lr_retriever = 2e-5;
  std::size_t epochs = 5;
  std::size_t batch_size = 20;
  std::size_t max_len = 128;
  std::uint64_t seed = 42;
  bool exclude_fallback = false;  // drop instances whose teacher fell back

  void validate() const;
};

/// One question's training instance: its candidate set plus the teacher
/// signal, with token sequences cached for the training loops.
struct TrainingRecord {
  std::string qid;
  corpus::CandidateSet candidates;
  std::optional<teacher::TeacherRanking> ranking;
  std::optional<teacher::TeacherScores> scores;
  corpus::DataCategory category = corpus::DataCategory::NoAnswer;
  encoder::TokenSequence question_tokens;
  std::vector<encoder::TokenSequence> candidate_tokens;
};

struct EpochStat {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStat> epochs;
  double wall_seconds = 0.0;
  std::size_t total_instances = 0;
  std::size_t repaired_instances = 0;
  std::size_t fallback_instances = 0;
  std::size_t skipped_instances = 0;
  std::filesystem::path checkpoint_path;

  void write_log(const std::filesystem::path& path) const;
};

enum class TeacherSignal { Ranking, Scores, Both };

/// Retrieves top-k with the supplied retriever, queries the teacher once per
/// example (cache-aware for remote teachers), and categorizes each candidate
/// set. Per-instance teacher integrity errors skip the instance and are
/// counted in the report fields of later training runs.
std::vector<TrainingRecord> prepare_records(
    const std::vector<corpus::QAExample>& examples,
    const corpus::CorpusIndex& index,
    const encoder::EncoderModel& retriever_model, teacher::Teacher& teach,
    const DistillConfig& config, TeacherSignal signal = TeacherSignal::Ranking,
    std::size_t* skipped = nullptr);

/// Stage 1: ListMLE on teacher permutations, gradients into the ranker.
TrainReport stage1_train_ranker(const std::vector<TrainingRecord>& records,
                                encoder::EncoderModel& ranker,
                                const DistillConfig& config);

/// Stage 2: KL(P_RANK || P_RETR) with the ranker frozen; gradients flow only
/// into the retriever.
TrainReport stage2_train_retriever(const std::vector<TrainingRecord>& records,
                                   const encoder::EncoderModel& frozen_ranker,
                                   encoder::EncoderModel& retriever,
                                   const DistillConfig& config);

/// Direct distillation ablation: the target distribution is the temperature
/// softmax of the teacher's similarity scores.
TrainReport direct_distill_train(const std::vector<TrainingRecord>& records,
                                 encoder::EncoderModel& retriever,
                                 const DistillConfig& config);

}  // namespace idistill::distill
