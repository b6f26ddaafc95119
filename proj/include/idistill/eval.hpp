#pragma once

#include <map>
#include <string>
#include <vector>

#include "idistill/corpus.hpp"
#include "idistill/numkit.hpp"

namespace idistill::eval {

struct MetricReport {
  std::map<std::size_t, double> hit_rate_at;  // k -> rate
  std::size_t question_count = 0;
  std::string notes;

  std::string to_json() const;
  std::string to_table() const;
};

/// Fraction of questions whose top-k retrieved documents contain at least
/// one answer-containing document. Results and examples are aligned by qid.
double hit_rate(const std::vector<corpus::CandidateSet>& results,
                const std::vector<corpus::QAExample>& examples,
                const corpus::CorpusIndex& index, std::size_t k);

/// SQuAD-style normalization: lowercase, strip punctuation, drop the
/// articles a/an/the, collapse whitespace.
std::string normalize_answer(const std::string& text);

int exact_match(const std::string& prediction,
                const std::vector<std::string>& answers);

double f1(const std::string& prediction,
          const std::vector<std::string>& answers);

/// Spearman rank correlation between two permutations of the same length.
double spearman(const numkit::Permutation& rank_a,
                const numkit::Permutation& rank_b);

struct SignalComparison {
  std::vector<double> per_question;  // one rho per question
  double mean = 0.0;
  std::vector<std::size_t> histogram;  // 20 buckets of width 0.1 over [-1, 1]
};

/// Consistency between re-ranking permutations and score-derived rankings.
/// Score vectors are converted to permutations by descending sort, ties by
/// ascending index.
SignalComparison compare_teacher_signals(
    const std::vector<numkit::Permutation>& rerank_permutations,
    const std::vector<std::vector<double>>& score_vectors);

numkit::Permutation perm_from_score_vector(const std::vector<double>& scores);

}  // namespace idistill::eval
