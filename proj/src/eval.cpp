#include "idistill/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "idistill/errors.hpp"
#include "json.hpp"

namespace idistill::eval {

namespace {

std::vector<std::string> normalized_tokens(const std::string& text) {
  auto tokens = corpus::words(text);
  std::erase_if(tokens, [](const std::string& t) {
    return t == "a" || t == "an" || t == "the";
  });
  return tokens;
}

}  // namespace

std::string MetricReport::to_json() const {
  nlohmann::json j;
  for (const auto& [k, rate] : hit_rate_at) {
    j["hit_rate"]["hr@" + std::to_string(k)] = rate;
  }
  j["questions"] = question_count;
  if (!notes.empty()) j["notes"] = notes;
  return j.dump();
}

std::string MetricReport::to_table() const {
  std::ostringstream os;
  os << "metric      value\n";
  char buf[64];
  for (const auto& [k, rate] : hit_rate_at) {
    std::snprintf(buf, sizeof(buf), "HR@%-8zu %.4f\n", k, rate);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "questions   %zu\n", question_count);
  os << buf;
  return os.str();
}

double hit_rate(const std::vector<corpus::CandidateSet>& results,
                const std::vector<corpus::QAExample>& examples,
                const corpus::CorpusIndex& index, std::size_t k) {
  if (examples.empty()) throw InvalidArgument("hit_rate: no examples");
  std::unordered_map<std::string, const corpus::CandidateSet*> by_qid;
  for (const auto& r : results) by_qid[r.qid] = &r;
  std::size_t hits = 0;
  for (const auto& ex : examples) {
    auto it = by_qid.find(ex.qid);
    if (it == by_qid.end()) {
      throw IntegrityError("hit_rate: no retrieval result for qid " + ex.qid);
    }
    const auto& result = *it->second;
    if (result.size() < k) {
      throw InvalidArgument("hit_rate: result for qid " + ex.qid +
                            " has fewer than k documents");
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (corpus::contains_answer(index.doc_by_id(result.docs[i].first),
                                  ex.answers)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

std::string normalize_answer(const std::string& text) {
  const auto tokens = normalized_tokens(text);
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

int exact_match(const std::string& prediction,
                const std::vector<std::string>& answers) {
  if (answers.empty()) throw InvalidArgument("exact_match: no answers");
  const std::string pred = normalize_answer(prediction);
  for (const auto& answer : answers) {
    if (pred == normalize_answer(answer)) return 1;
  }
  return 0;
}

double f1(const std::string& prediction,
          const std::vector<std::string>& answers) {
  if (answers.empty()) throw InvalidArgument("f1: no answers");
  const auto pred_tokens = normalized_tokens(prediction);
  double best = 0.0;
  for (const auto& answer : answers) {
    const auto ans_tokens = normalized_tokens(answer);
    if (pred_tokens.empty() && ans_tokens.empty()) {
      best = std::max(best, 1.0);
      continue;
    }
    if (pred_tokens.empty() || ans_tokens.empty()) continue;
    std::unordered_map<std::string, int> counts;
    for (const auto& t : ans_tokens) ++counts[t];
    int overlap = 0;
    for (const auto& t : pred_tokens) {
      auto it = counts.find(t);
      if (it != counts.end() && it->second > 0) {
        --it->second;
        ++overlap;
      }
    }
    if (overlap == 0) continue;
    const double precision =
        static_cast<double>(overlap) / static_cast<double>(pred_tokens.size());
    const double recall =
        static_cast<double>(overlap) / static_cast<double>(ans_tokens.size());
    best = std::max(best, 2.0 * precision * recall / (precision + recall));
  }
  return best;
}

double spearman(const numkit::Permutation& rank_a,
                const numkit::Permutation& rank_b) {
  const std::size_t k = rank_a.size();
  if (k != rank_b.size() || k < 2) {
    throw InvalidArgument("spearman: permutations must share length >= 2");
  }
  if (!rank_a.is_valid() || !rank_b.is_valid()) {
    throw InvalidArgument("spearman: inputs must be valid permutations");
  }
  // Rank position each item receives in each order.
  std::vector<std::size_t> pos_a(k), pos_b(k);
  for (std::size_t j = 0; j < k; ++j) {
    pos_a[rank_a.order[j] - 1] = j;
    pos_b[rank_b.order[j] - 1] = j;
  }
  double sum_d2 = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double d = static_cast<double>(pos_a[i]) - static_cast<double>(pos_b[i]);
    sum_d2 += d * d;
  }
  const double n = static_cast<double>(k);
  return 1.0 - 6.0 * sum_d2 / (n * (n * n - 1.0));
}

numkit::Permutation perm_from_score_vector(const std::vector<double>& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a - 1] != scores[b - 1]) return scores[a - 1] > scores[b - 1];
    return a < b;
  });
  numkit::Permutation pi;
  pi.order = std::move(order);
  return pi;
}

SignalComparison compare_teacher_signals(
    const std::vector<numkit::Permutation>& rerank_permutations,
    const std::vector<std::vector<double>>& score_vectors) {
  if (rerank_permutations.size() != score_vectors.size()) {
    throw IntegrityError("signal comparison inputs are not aligned");
  }
  if (rerank_permutations.empty()) {
    throw InvalidArgument("signal comparison needs at least one question");
  }
  SignalComparison out;
  out.histogram.assign(20, 0);
  for (std::size_t i = 0; i < rerank_permutations.size(); ++i) {
    if (rerank_permutations[i].size() != score_vectors[i].size()) {
      throw IntegrityError("signal length mismatch at question " +
                           std::to_string(i));
    }
    const double rho = spearman(rerank_permutations[i],
                                perm_from_score_vector(score_vectors[i]));
    out.per_question.push_back(rho);
    auto bucket = static_cast<std::size_t>((rho + 1.0) / 0.1);
    out.histogram[std::min<std::size_t>(bucket, 19)] += 1;
  }
  out.mean = std::accumulate(out.per_question.begin(), out.per_question.end(),
                             0.0) /
             static_cast<double>(out.per_question.size());
  return out;
}

}  // namespace idistill::eval
