#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "idistill/encoder.hpp"
#include "idistill/numkit.hpp"

namespace idistill::corpus {

struct Document {
  std::int64_t id = 0;
  std::string text;
};

struct QAExample {
  std::string qid;
  std::string question;
  std::vector<std::string> answers;
  std::string split;  // train | valid | test
};

/// Retrieved subset for one question: (doc id, score) pairs with scores
/// descending, ties broken by ascending doc id.
struct CandidateSet {
  std::string qid;
  std::vector<std::pair<std::int64_t, double>> docs;

  std::size_t size() const { return docs.size(); }
};

enum class DataCategory { FollowingAnswer, FirstAnswer, NoAnswer };

std::string to_string(DataCategory c);

/// Immutable after build: encoded document vectors plus the lexical stats
/// backing BM25.
struct CorpusIndex {
  std::vector<Document> documents;
  std::unordered_map<std::int64_t, std::size_t> id_to_pos;
  std::uint32_t dim = 0;
  std::vector<double> vectors;  // documents.size() x dim, row-major
  std::vector<std::unordered_map<std::string, int>> term_counts;
  std::vector<std::size_t> doc_lengths;
  std::unordered_map<std::string, int> doc_freq;
  double avg_doc_length = 0.0;

  std::size_t doc_count() const { return documents.size(); }
  const Document& doc_by_id(std::int64_t id) const;
};

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
};

/// Plain word tokens (lowercase, split on non-alphanumeric runs), without
/// hashing or truncation. Used by the lexical baselines and answer matching.
std::vector<std::string> words(std::string_view text);

std::vector<QAExample> load_examples(const std::filesystem::path& path);
std::vector<Document> load_corpus(const std::filesystem::path& path);
void save_examples(const std::vector<QAExample>& examples,
                   const std::filesystem::path& path);
void save_corpus(const std::vector<Document>& docs,
                 const std::filesystem::path& path);

CorpusIndex build_index(std::vector<Document> docs,
                        const encoder::EncoderModel& model,
                        std::size_t max_len);

CandidateSet retrieve_topk(const CorpusIndex& index,
                           const encoder::EncoderModel& model,
                           const QAExample& example, std::size_t k,
                           std::size_t max_len);

std::vector<double> bm25_scores(const std::string& question,
                                const std::vector<Document>& candidates,
                                const CorpusIndex& index,
                                const Bm25Params& params = {});

std::vector<double> rouge2_scores(const std::string& question,
                                  const std::vector<Document>& candidates);

numkit::Permutation rule_based_rank(const std::vector<Document>& candidates,
                                    const std::vector<std::string>& answers);

bool contains_answer(const Document& doc,
                     const std::vector<std::string>& answers);

DataCategory categorize(const std::vector<Document>& candidates,
                        const std::vector<std::string>& answers);

}  // namespace idistill::corpus
