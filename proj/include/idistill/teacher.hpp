#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "idistill/corpus.hpp"
#include "idistill/numkit.hpp"
#include "idistill/synth.hpp"

namespace idistill::teacher {

enum class Provenance { Remote, Oracle, Bm25, Rouge2, RuleBased };

std::string to_string(Provenance p);

struct TeacherRanking {
  std::string qid;
  numkit::Permutation pi;
  Provenance provenance = Provenance::Oracle;
  std::string raw_response;
  bool repaired = false;
  bool fallback = false;  // identity order used after unparseable retries
};

struct TeacherScores {
  std::string qid;
  std::vector<double> scores;  // each in [0,1]
  Provenance provenance = Provenance::Oracle;
  std::string raw_response;
};

struct TeacherEndpointConfig {
  std::string base_url;  // e.g. http://localhost:8089 or http://host/v1
  std::string model = "gpt-4o";
  double timeout_seconds = 30.0;
  int max_in_flight = 4;
  int retry_budget = 3;
  int retry_backoff_ms = 250;
  std::filesystem::path cache_dir;
  std::string api_key_env = "TEACHER_API_KEY";
};

/// List-wise re-ranking prompt. Frozen template; candidate text containing
/// the literal "<Document" marker is escaped so the marker count stays k.
std::string build_rerank_prompt(const std::string& question,
                                const std::vector<corpus::Document>& candidates);

/// Similarity-score prompt asking for a list of scores in [0, 1].
std::string build_score_prompt(const std::string& question,
                               const std::vector<corpus::Document>& candidates);

/// Accepts "Document3 > Document1", "[3] > [1]" or "3 > 1" shapes. Repairs
/// out-of-range and duplicate identifiers and appends missing ones in
/// ascending order; the result is always a valid permutation. Throws
/// ParseError when no identifier can be extracted.
TeacherRanking parse_rerank_response(const std::string& text, std::size_t k);

/// Extracts the first bracketed list of reals, clamped to [0, 1]. Throws
/// ParseError when there is no list or the count differs from k.
TeacherScores parse_score_response(const std::string& text, std::size_t k);

/// Inverse of parse_rerank_response on clean input: "Document3 > Document1".
std::string render_ranking(const numkit::Permutation& pi);

class Teacher {
public:
  virtual ~Teacher() = default;
  virtual Provenance provenance() const = 0;
  virtual TeacherRanking rerank(const corpus::QAExample& example,
                                const std::vector<corpus::Document>& candidates) = 0;
  virtual TeacherScores score(const corpus::QAExample& example,
                              const std::vector<corpus::Document>& candidates) = 0;
};

/// Deterministic stand-in for a remote LLM: ranks candidates by hidden
/// latent relevance, descending, ties by ascending doc id. With p_swap > 0
/// each adjacent pair is swapped with that probability (seeded). score()
/// min-max normalizes the latents into [0, 1] plus optional uniform noise.
class OracleTeacher : public Teacher {
public:
  OracleTeacher(const synth::LatentRelevance& latent, double p_swap,
                std::uint64_t seed, double score_noise = 0.0);

  Provenance provenance() const override { return Provenance::Oracle; }
  TeacherRanking rerank(const corpus::QAExample& example,
                        const std::vector<corpus::Document>& candidates) override;
  TeacherScores score(const corpus::QAExample& example,
                      const std::vector<corpus::Document>& candidates) override;

private:
  const synth::LatentRelevance* latent_;
  double p_swap_;
  double score_noise_;
  std::mt19937_64 rng_;
};

/// BM25 or ROUGE-2 similarity as the supervision signal.
class MetricTeacher : public Teacher {
public:
  enum class Kind { Bm25, Rouge2 };
  MetricTeacher(Kind kind, const corpus::CorpusIndex& index)
      : kind_(kind), index_(&index) {}

  Provenance provenance() const override {
    return kind_ == Kind::Bm25 ? Provenance::Bm25 : Provenance::Rouge2;
  }
  TeacherRanking rerank(const corpus::QAExample& example,
                        const std::vector<corpus::Document>& candidates) override;
  TeacherScores score(const corpus::QAExample& example,
                      const std::vector<corpus::Document>& candidates) override;

private:
  Kind kind_;
  const corpus::CorpusIndex* index_;
};

/// Stable partition: answer-containing candidates first.
class RuleBasedTeacher : public Teacher {
public:
  Provenance provenance() const override { return Provenance::RuleBased; }
  TeacherRanking rerank(const corpus::QAExample& example,
                        const std::vector<corpus::Document>& candidates) override;
  TeacherScores score(const corpus::QAExample& example,
                      const std::vector<corpus::Document>& candidates) override;
};

/// Append-only on-disk response cache, one JSON record per line.
class TeacherCache {
public:
  explicit TeacherCache(std::filesystem::path file);

  std::optional<std::string> lookup(const std::string& key) const;
  void record(const std::string& key, const std::string& model,
              std::uint64_t prompt_hash, const std::string& raw_response,
              const std::string& parsed);
  const std::filesystem::path& file() const { return file_; }

private:
  std::filesystem::path file_;
  std::unordered_map<std::string, std::string> entries_;
  mutable std::mutex mu_;
};

struct RemoteStats {
  int requests = 0;
  int cache_hits = 0;
  int retries = 0;
  int repaired = 0;
  int fallbacks = 0;
};

/// Chat-completions client with on-disk caching, retry with exponential
/// backoff, and identity-order fallback for responses that stay unparseable
/// after the retry budget is spent.
class RemoteTeacher : public Teacher {
public:
  explicit RemoteTeacher(TeacherEndpointConfig config);
  ~RemoteTeacher() override;

  Provenance provenance() const override { return Provenance::Remote; }
  TeacherRanking rerank(const corpus::QAExample& example,
                        const std::vector<corpus::Document>& candidates) override;
  TeacherScores score(const corpus::QAExample& example,
                      const std::vector<corpus::Document>& candidates) override;

  /// Re-ranks a batch with up to max_in_flight concurrent requests; results
  /// are returned in input order.
  std::vector<TeacherRanking> rerank_many(
      const std::vector<const corpus::QAExample*>& examples,
      const std::vector<std::vector<corpus::Document>>& candidates);

  RemoteStats stats() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string cache_key(const std::string& model, const std::string& prompt);

}  // namespace idistill::teacher
