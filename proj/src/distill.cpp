#include "idistill/distill.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>

#include "idistill/errors.hpp"
#include "idistill/numkit.hpp"
#include "idistill/seeding.hpp"
#include "json.hpp"

namespace idistill::distill {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> raw_scores(const encoder::EncoderModel& model,
                               const TrainingRecord& record) {
  std::vector<double> scores(record.candidate_tokens.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] =
        encoder::score_pair(model, record.question_tokens,
                            record.candidate_tokens[i]);
  }
  return scores;
}

// Per-record objective: given the trainee's raw candidate scores, produce
// the loss and the gradient w.r.t. those scores.
using RecordObjective = std::function<double(
    const TrainingRecord&, const std::vector<double>& scores,
    std::vector<double>& grad_out)>;

TrainReport run_training(const std::vector<TrainingRecord>& records,
                         encoder::EncoderModel& model,
                         const DistillConfig& config, double lr,
                         std::string_view stage_label,
                         const RecordObjective& objective) {
  if (records.empty()) {
    throw InvalidArgument("training requires at least one record");
  }
  config.validate();
  const auto start = Clock::now();

  TrainReport report;
  report.total_instances = records.size();
  for (const auto& r : records) {
    if (r.ranking) {
      if (r.ranking->repaired) ++report.repaired_instances;
      if (r.ranking->fallback) ++report.fallback_instances;
    }
  }

  std::mt19937_64 rng(derive_seed(config.seed, stage_label));
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);

  numkit::AdamState adam(model.param_count());
  const numkit::AdamConfig adam_cfg{.lr = lr};
  std::vector<double> grad(model.param_count(), 0.0);
  std::vector<double> score_grad;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    double loss_sum = 0.0;
    for (std::size_t base = 0; base < order.size();
         base += config.batch_size) {
      const std::size_t batch_end =
          std::min(base + config.batch_size, order.size());
      const double inv_batch = 1.0 / static_cast<double>(batch_end - base);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t j = base; j < batch_end; ++j) {
        const TrainingRecord& record = records[order[j]];
        const auto scores = raw_scores(model, record);
        score_grad.assign(scores.size(), 0.0);
        loss_sum += objective(record, scores, score_grad);
        for (double& g : score_grad) g *= inv_batch;
        encoder::backward_scores(model, record.question_tokens,
                                 record.candidate_tokens, score_grad, grad);
      }
      if (lr > 0.0) {
        numkit::adam_step(model.table, grad, adam, adam_cfg);
      }
    }
    EpochStat stat;
    stat.epoch = epoch + 1;
    stat.mean_loss = loss_sum / static_cast<double>(records.size());
    stat.seconds = seconds_since(epoch_start);
    if (!std::isfinite(stat.mean_loss)) {
      throw IntegrityError("training diverged: non-finite epoch loss");
    }
    report.epochs.push_back(stat);
  }
  report.wall_seconds = seconds_since(start);
  return report;
}

}  // namespace

void DistillConfig::validate() const {
  if (k < 2) throw InvalidArgument("config: k must be >= 2");
  if (!(theta_ranker > 0.0) || !(theta_retriever > 0.0)) {
    throw InvalidArgument("config: temperatures must be positive");
  }
  if (lr_ranker < 0.0 || lr_retriever < 0.0) {
    throw InvalidArgument("config: learning rates must be non-negative");
  }
  if (epochs == 0 || batch_size == 0 || max_len == 0) {
    throw InvalidArgument("config: epochs, batch_size and max_len must be positive");
  }
}

void TrainReport::write_log(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write train log: " + path.string());
  for (const auto& e : epochs) {
    nlohmann::json record{{"epoch", e.epoch},
                          {"mean_loss", e.mean_loss},
                          {"seconds", e.seconds}};
    os << record.dump() << '\n';
  }
}

std::vector<TrainingRecord> prepare_records(
    const std::vector<corpus::QAExample>& examples,
    const corpus::CorpusIndex& index,
    const encoder::EncoderModel& retriever_model, teacher::Teacher& teach,
    const DistillConfig& config, TeacherSignal signal, std::size_t* skipped) {
  config.validate();
  std::vector<TrainingRecord> records;
  records.reserve(examples.size());
  std::size_t skip_count = 0;
  for (const auto& ex : examples) {
    TrainingRecord record;
    record.qid = ex.qid;
    record.candidates =
        corpus::retrieve_topk(index, retriever_model, ex, config.k,
                              config.max_len);
    std::vector<corpus::Document> docs;
    docs.reserve(config.k);
    for (const auto& [doc_id, _] : record.candidates.docs) {
      docs.push_back(index.doc_by_id(doc_id));
    }
    try {
      if (signal == TeacherSignal::Ranking || signal == TeacherSignal::Both) {
        record.ranking = teach.rerank(ex, docs);
      }
      if (signal == TeacherSignal::Scores || signal == TeacherSignal::Both) {
        record.scores = teach.score(ex, docs);
      }
    } catch (const IntegrityError&) {
      ++skip_count;
      continue;  // instance skipped, not fatal
    }
    if (config.exclude_fallback && record.ranking &&
        record.ranking->fallback) {
      ++skip_count;
      continue;
    }
    record.category = corpus::categorize(docs, ex.answers);
    record.question_tokens = encoder::tokenize(ex.question, config.max_len,
                                               retriever_model.vocab_buckets);
    record.candidate_tokens.reserve(docs.size());
    for (const auto& doc : docs) {
      record.candidate_tokens.push_back(encoder::tokenize(
          doc.text, config.max_len, retriever_model.vocab_buckets));
    }
    records.push_back(std::move(record));
  }
  if (skipped) *skipped = skip_count;
  return records;
}

TrainReport stage1_train_ranker(const std::vector<TrainingRecord>& records,
                                encoder::EncoderModel& ranker,
                                const DistillConfig& config) {
  for (const auto& r : records) {
    if (!r.ranking) {
      throw InvalidArgument("stage 1 requires a teacher ranking per record");
    }
  }
  const double theta = config.theta_ranker;
  return run_training(
      records, ranker, config, config.lr_ranker, "stage1",
      [theta](const TrainingRecord& record, const std::vector<double>& scores,
              std::vector<double>& grad_out) {
        std::vector<double> logits(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i) {
          logits[i] = scores[i] / theta;
        }
        const double loss = numkit::listmle_loss(logits, record.ranking->pi);
        const auto g = numkit::listmle_grad(logits, record.ranking->pi);
        for (std::size_t i = 0; i < g.size(); ++i) {
          grad_out[i] = g[i] / theta;
        }
        return loss;
      });
}

TrainReport stage2_train_retriever(const std::vector<TrainingRecord>& records,
                                   const encoder::EncoderModel& frozen_ranker,
                                   encoder::EncoderModel& retriever,
                                   const DistillConfig& config) {
  if (frozen_ranker.dim != retriever.dim ||
      frozen_ranker.vocab_buckets != retriever.vocab_buckets) {
    throw InvalidArgument("ranker and retriever shapes differ");
  }
  const double theta_rank = config.theta_ranker;
  const double theta_retr = config.theta_retriever;
  return run_training(
      records, retriever, config, config.lr_retriever, "stage2",
      [&frozen_ranker, theta_rank, theta_retr](
          const TrainingRecord& record, const std::vector<double>& scores,
          std::vector<double>& grad_out) {
        // The ranker is frozen: its scores carry no gradient.
        const auto rank_scores = raw_scores(frozen_ranker, record);
        const auto p = numkit::softmax_temp(rank_scores, theta_rank);
        const auto q = numkit::softmax_temp(scores, theta_retr);
        const double loss = numkit::kl_divergence(p, q);
        const auto g = numkit::kl_grad_wrt_q_scores(p, scores, theta_retr);
        std::copy(g.begin(), g.end(), grad_out.begin());
        return loss;
      });
}

TrainReport direct_distill_train(const std::vector<TrainingRecord>& records,
                                 encoder::EncoderModel& retriever,
                                 const DistillConfig& config) {
  for (const auto& r : records) {
    if (!r.scores) {
      throw InvalidArgument("direct distillation requires teacher scores");
    }
    if (r.scores->scores.size() != r.candidate_tokens.size()) {
      throw InvalidArgument("teacher score count != candidate count");
    }
  }
  const double theta_rank = config.theta_ranker;
  const double theta_retr = config.theta_retriever;
  return run_training(
      records, retriever, config, config.lr_retriever, "direct",
      [theta_rank, theta_retr](const TrainingRecord& record,
                               const std::vector<double>& scores,
                               std::vector<double>& grad_out) {
        const auto p =
            numkit::softmax_temp(record.scores->scores, theta_rank);
        const auto q = numkit::softmax_temp(scores, theta_retr);
        const double loss = numkit::kl_divergence(p, q);
        const auto g = numkit::kl_grad_wrt_q_scores(p, scores, theta_retr);
        std::copy(g.begin(), g.end(), grad_out.begin());
        return loss;
      });
}

}  // namespace idistill::distill
