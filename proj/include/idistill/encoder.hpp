#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace idistill::encoder {

enum class Role : std::uint8_t { Ranker = 0, Retriever = 1 };

/// Hash-bucket token ids; each id < vocab_buckets.
struct TokenSequence {
  std::vector<std::uint32_t> ids;

  bool empty() const { return ids.empty(); }
  std::size_t size() const { return ids.size(); }
};

/// Dual-encoder with a single embedding table shared between the query and
/// document towers. Encoding is mean pooling over token embedding rows;
/// similarity is the dot product of the pooled vectors.
struct EncoderModel {
  Role role = Role::Retriever;
  std::uint32_t dim = 0;
  std::uint32_t vocab_buckets = 0;
  std::vector<double> table;  // vocab_buckets x dim, row-major

  std::span<const double> row(std::uint32_t id) const {
    return {table.data() + static_cast<std::size_t>(id) * dim, dim};
  }
  std::size_t param_count() const { return table.size(); }
};

/// Seeded i.i.d. uniform [-0.05, 0.05] initialization. The same seed yields
/// the same table regardless of role.
EncoderModel init_model(std::uint32_t dim, std::uint32_t vocab_buckets,
                        std::uint64_t seed, Role role);

std::uint64_t fnv1a64(std::string_view s);

/// Lowercase, split on non-alphanumeric runs, FNV-1a 64 modulo vocab_buckets,
/// truncate to max_len. Deterministic across platforms.
TokenSequence tokenize(std::string_view text, std::size_t max_len,
                       std::uint32_t vocab_buckets);

std::vector<double> encode(const EncoderModel& model,
                           const TokenSequence& tokens);

double score_pair(const EncoderModel& model, const TokenSequence& query,
                  const TokenSequence& doc);

/// Accumulates d(sum_i upstream[i] * score(query, candidates[i]))/d(table)
/// into grad_out, which must be table-shaped.
void backward_scores(const EncoderModel& model, const TokenSequence& query,
                     const std::vector<TokenSequence>& candidates,
                     std::span<const double> upstream,
                     std::span<double> grad_out);

void save_model(const EncoderModel& model, const std::filesystem::path& path);
EncoderModel load_model(const std::filesystem::path& path);

}  // namespace idistill::encoder
