#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "idistill/corpus.hpp"

namespace idistill::synth {

struct SynthConfig {
  std::size_t num_docs = 2000;
  std::size_t num_train = 1000;
  std::size_t num_valid = 200;
  std::size_t num_test = 500;
  std::size_t vocab_size = 1000;
  std::size_t topics = 50;
  std::size_t doc_len = 120;
  std::size_t question_topic_words = 16;
  std::size_t question_entity_words = 1;
  std::size_t entity_repeats_in_gold = 1;
  std::size_t question_restates_in_gold = 0;
  double gold_topic_weight_lo = 0.85;
  double gold_topic_weight_hi = 0.95;
  double doc_topic_weight_lo = 0.30;
  double doc_topic_weight_hi = 0.55;
  std::uint64_t seed = 42;

  std::size_t total_questions() const {
    return num_train + num_valid + num_test;
  }
};

/// Hidden ground-truth relevance of every document to every question,
/// stored dense. The oracle teacher ranks candidates by these values.
struct LatentRelevance {
  std::vector<std::string> qids;
  std::vector<std::int64_t> doc_ids;
  std::unordered_map<std::string, std::size_t> qid_to_row;
  std::unordered_map<std::int64_t, std::size_t> doc_to_col;
  std::vector<double> values;  // qids.size() x doc_ids.size(), row-major

  double get(const std::string& qid, std::int64_t doc_id) const;
};

void save_latent(const LatentRelevance& latent,
                 const std::filesystem::path& path);
LatentRelevance load_latent(const std::filesystem::path& path);

struct SynthWorld {
  std::vector<corpus::Document> documents;
  std::vector<corpus::QAExample> examples;
  LatentRelevance latent;
  std::unordered_map<std::string, std::int64_t> gold_doc_id;
};

/// Pure function of the config (seed included). Each question spans a pair
/// of topics and gets a unique answer string plus exactly one gold document
/// that restates the question's wording, mentions its entity words and the
/// answer, and fills with both topics of the pair; noise documents stay on a
/// single topic. Latent relevance is the topic-mixture dot product between
/// the question's pair weights and the document's realized per-topic token
/// shares, with the gold document strictly maximal via a constant bonus.
SynthWorld generate(const SynthConfig& config);

struct CategoryMix {
  std::unordered_map<corpus::DataCategory, std::vector<std::string>> selected;
  std::unordered_map<corpus::DataCategory, std::size_t> counts;
};

/// Partitions examples by categorize() over their candidate sets; keeps up to
/// max_per_category qids per category. Empty categories are reported with a
/// zero count, not an error.
CategoryMix plant_category_mix(
    const std::vector<corpus::QAExample>& examples,
    const std::vector<corpus::CandidateSet>& candidates,
    const corpus::CorpusIndex& index, std::size_t max_per_category);

}  // namespace idistill::synth
