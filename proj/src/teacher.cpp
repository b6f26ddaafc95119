#include "idistill/teacher.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

#include "idistill/encoder.hpp"
#include "idistill/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace idistill::teacher {

namespace {

using nlohmann::json;

// Escapes the list-marker string so a candidate cannot inject extra markers.
std::string escape_marker(std::string text) {
  const std::string marker = "<Document";
  std::size_t pos = 0;
  while ((pos = text.find(marker, pos)) != std::string::npos) {
    text.insert(pos + 1, " ");
    pos += marker.size() + 1;
  }
  return text;
}

std::vector<int> extract_integers(const std::string& text) {
  std::vector<int> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isdigit(static_cast<unsigned char>(text[i]))) {
      long value = 0;
      while (i < text.size() &&
             std::isdigit(static_cast<unsigned char>(text[i]))) {
        value = std::min(value * 10 + (text[i] - '0'), 1000000L);
        ++i;
      }
      out.push_back(static_cast<int>(value));
    } else {
      ++i;
    }
  }
  return out;
}

}  // namespace

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Remote: return "remote";
    case Provenance::Oracle: return "oracle";
    case Provenance::Bm25: return "bm25";
    case Provenance::Rouge2: return "rouge2";
    case Provenance::RuleBased: return "rule_based";
  }
  return "unknown";
}

std::string build_rerank_prompt(
    const std::string& question,
    const std::vector<corpus::Document>& candidates) {
  if (candidates.size() < 2) {
    throw InvalidArgument("re-ranking needs at least two candidates");
  }
  std::ostringstream os;
  os << "I will provide you with " << candidates.size()
     << " documents, each indicated by a numerical identifier written as "
        "Document1, Document2, and so on. Rank the documents based on their "
        "relevance to the question.\n\n";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    os << "<Document" << (i + 1) << "> " << escape_marker(candidates[i].text)
       << "\n";
  }
  os << "\nQuestion: " << escape_marker(question) << "\n\n"
     << "Rank the " << candidates.size()
     << " documents above based on their relevance to the question in "
        "descending order. The output format should be identifiers separated "
        "by ' > ', for example Document3 > Document1 > Document2. Only output "
        "the ranking, do not say any word or explain.";
  return os.str();
}

std::string build_score_prompt(
    const std::string& question,
    const std::vector<corpus::Document>& candidates) {
  if (candidates.empty()) {
    throw InvalidArgument("scoring needs at least one candidate");
  }
  std::ostringstream os;
  os << "I will provide one query with " << candidates.size()
     << " documents, each indicated by number identifier x. Please answer me "
        "with a list of the similarity score between the provided query and "
        "documents based on your judgment. The score should be between 0-1. "
        "Please don't use interoperator and only output the score list.\n"
     << "<Question> " << escape_marker(question) << "\n";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    os << "<Document" << (i + 1) << "> " << escape_marker(candidates[i].text)
       << "\n";
  }
  return os.str();
}

TeacherRanking parse_rerank_response(const std::string& text, std::size_t k) {
  if (k < 2) throw InvalidArgument("parse_rerank_response: k must be >= 2");
  const auto raw_ids = extract_integers(text);
  if (raw_ids.empty()) {
    throw ParseError("no ranking identifiers found in teacher response");
  }
  TeacherRanking out;
  out.raw_response = text;
  std::vector<bool> used(k, false);
  bool repaired = false;
  for (int id : raw_ids) {
    if (id < 1 || static_cast<std::size_t>(id) > k) {
      repaired = true;  // out of range: drop
      continue;
    }
    if (used[id - 1]) {
      repaired = true;  // duplicate: keep first occurrence
      continue;
    }
    used[id - 1] = true;
    out.pi.order.push_back(id);
  }
  if (out.pi.order.empty()) {
    throw ParseError("no in-range ranking identifiers in teacher response");
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!used[i]) {
      repaired = true;  // missing: append ascending
      out.pi.order.push_back(static_cast<int>(i + 1));
    }
  }
  out.repaired = repaired;
  return out;
}

TeacherScores parse_score_response(const std::string& text, std::size_t k) {
  if (k < 1) throw InvalidArgument("parse_score_response: k must be >= 1");
  const auto open = text.find('[');
  const auto close = text.find(']', open == std::string::npos ? 0 : open);
  if (open == std::string::npos || close == std::string::npos) {
    throw ParseError("no bracketed score list in teacher response");
  }
  TeacherScores out;
  out.raw_response = text;
  const char* p = text.data() + open + 1;
  const char* end = text.data() + close;
  while (p < end) {
    char* next = nullptr;
    const double value = std::strtod(p, &next);
    if (next == p) {
      ++p;
      continue;
    }
    out.scores.push_back(std::clamp(value, 0.0, 1.0));
    p = next;
  }
  if (out.scores.size() != k) {
    throw ParseError("score list has " + std::to_string(out.scores.size()) +
                     " entries, expected " + std::to_string(k));
  }
  return out;
}

std::string render_ranking(const numkit::Permutation& pi) {
  std::ostringstream os;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (i) os << " > ";
    os << "Document" << pi.order[i];
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Oracle teacher

OracleTeacher::OracleTeacher(const synth::LatentRelevance& latent,
                             double p_swap, std::uint64_t seed,
                             double score_noise)
    : latent_(&latent), p_swap_(p_swap), score_noise_(score_noise), rng_(seed) {
  if (p_swap < 0.0 || p_swap > 1.0) {
    throw InvalidArgument("p_swap must lie in [0, 1]");
  }
}

TeacherRanking OracleTeacher::rerank(
    const corpus::QAExample& example,
    const std::vector<corpus::Document>& candidates) {
  if (candidates.empty()) {
    throw InvalidArgument("oracle rerank: empty candidate list");
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> latents(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    latents[i] = latent_->get(example.qid, candidates[i].id);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (latents[a] != latents[b]) return latents[a] > latents[b];
    return candidates[a].id < candidates[b].id;
  });
  if (p_swap_ > 0.0) {
    for (std::size_t j = 0; j + 1 < order.size(); ++j) {
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
      if (u < p_swap_) std::swap(order[j], order[j + 1]);
    }
  }
  TeacherRanking out;
  out.qid = example.qid;
  out.provenance = Provenance::Oracle;
  out.pi.order.reserve(order.size());
  for (std::size_t pos : order) out.pi.order.push_back(static_cast<int>(pos + 1));
  return out;
}

TeacherScores OracleTeacher::score(
    const corpus::QAExample& example,
    const std::vector<corpus::Document>& candidates) {
  if (candidates.empty()) {
    throw InvalidArgument("oracle score: empty candidate list");
  }
  std::vector<double> latents(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    latents[i] = latent_->get(example.qid, candidates[i].id);
  }
  const auto [lo_it, hi_it] = std::minmax_element(latents.begin(), latents.end());
  const double lo = *lo_it, hi = *hi_it;
  TeacherScores out;
  out.qid = example.qid;
  out.provenance = Provenance::Oracle;
  out.scores.resize(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double s = hi > lo ? (latents[i] - lo) / (hi - lo) : 0.5;
    if (score_noise_ > 0.0) {
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
      s += (2.0 * u - 1.0) * score_noise_;
    }
    out.scores[i] = std::clamp(s, 0.0, 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metric and rule-based teachers

namespace {

numkit::Permutation perm_from_scores(const std::vector<double>& scores) {
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

}  // namespace

TeacherRanking MetricTeacher::rerank(
    const corpus::QAExample& example,
    const std::vector<corpus::Document>& candidates) {
  const auto scored = score(example, candidates);
  TeacherRanking out;
  out.qid = example.qid;
  out.provenance = provenance();
  out.pi = perm_from_scores(scored.scores);
  return out;
}

TeacherScores MetricTeacher::score(
    const corpus::QAExample& example,
    const std::vector<corpus::Document>& candidates) {
  TeacherScores out;
  out.qid = example.qid;
  out.provenance = provenance();
  if (kind_ == Kind::Bm25) {
    const auto raw = corpus::bm25_scores(example.question, candidates, *index_);
    out.scores.resize(raw.size());
    // BM25 is unbounded above; squash into [0, 1].
    for (std::size_t i = 0; i < raw.size(); ++i) {
      out.scores[i] = raw[i] / (1.0 + raw[i]);
    }
  } else {
    out.scores = corpus::rouge2_scores(example.question, candidates);
  }
  return out;
}

TeacherRanking RuleBasedTeacher::rerank(
    const corpus::QAExample& example,
    const std::vector<corpus::Document>& candidates) {
  TeacherRanking out;
  out.qid = example.qid;
  out.provenance = Provenance::RuleBased;
  out.pi = corpus::rule_based_rank(candidates, example.answers);
  return out;
}

TeacherScores RuleBasedTeacher::score(const corpus::QAExample&,
                                      const std::vector<corpus::Document>&) {
  throw InvalidArgument("the rule-based teacher produces rankings, not scores");
}

// ---------------------------------------------------------------------------
// Cache

TeacherCache::TeacherCache(std::filesystem::path file) : file_(std::move(file)) {
  if (file_.has_parent_path()) {
    std::filesystem::create_directories(file_.parent_path());
  }
  std::ifstream is(file_);
  if (!is) return;  // no cache yet
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.contains("key") ||
        !record.contains("raw_response")) {
      throw FormatError(file_.string() + ":" + std::to_string(line_no) +
                        ": malformed cache record");
    }
    entries_[record["key"].get<std::string>()] =
        record["raw_response"].get<std::string>();
  }
}

std::optional<std::string> TeacherCache::lookup(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void TeacherCache::record(const std::string& key, const std::string& model,
                          std::uint64_t prompt_hash,
                          const std::string& raw_response,
                          const std::string& parsed) {
  std::lock_guard lock(mu_);
  entries_[key] = raw_response;
  std::ofstream os(file_, std::ios::app);
  if (!os) throw IoError("cannot append to cache file: " + file_.string());
  json record{{"key", key},
              {"model", model},
              {"prompt_hash", prompt_hash},
              {"raw_response", raw_response},
              {"parsed", parsed},
              {"timestamp", static_cast<std::int64_t>(std::time(nullptr))}};
  os << record.dump() << '\n';
}

std::string cache_key(const std::string& model, const std::string& prompt) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    encoder::fnv1a64(model + '\x1f' + prompt)));
  return buf;
}

// ---------------------------------------------------------------------------
// Remote teacher

struct RemoteTeacher::Impl {
  TeacherEndpointConfig config;
  std::string host_base;     // scheme://host:port
  std::string path_prefix;   // anything after the authority
  TeacherCache cache;
  mutable std::mutex stats_mu;
  RemoteStats stats;

  explicit Impl(TeacherEndpointConfig cfg)
      : config(std::move(cfg)),
        cache(config.cache_dir / "teacher_cache.jsonl") {
    const auto scheme_end = config.base_url.find("://");
    if (scheme_end == std::string::npos) {
      throw InvalidArgument("teacher base_url must include a scheme");
    }
    const auto path_start = config.base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
      host_base = config.base_url;
    } else {
      host_base = config.base_url.substr(0, path_start);
      path_prefix = config.base_url.substr(path_start);
      while (!path_prefix.empty() && path_prefix.back() == '/') {
        path_prefix.pop_back();
      }
    }
  }

  // One network attempt. Throws TransportError / EndpointError on failure,
  // returns the assistant message content on success.
  std::string post_once(const std::string& prompt) {
    httplib::Client client(host_base);
    client.set_connection_timeout(std::chrono::milliseconds(
        static_cast<int>(config.timeout_seconds * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(
        static_cast<int>(config.timeout_seconds * 1000)));
    httplib::Headers headers;
    if (const char* key = std::getenv(config.api_key_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    json body{{"model", config.model},
              {"messages", json::array({json{{"role", "user"},
                                             {"content", prompt}}})},
              {"temperature", 0}};
    auto res = client.Post(path_prefix + "/chat/completions", headers,
                           body.dump(), "application/json");
    if (!res) {
      throw TransportError("teacher endpoint unreachable: " + host_base);
    }
    if (res->status < 200 || res->status >= 300) {
      throw EndpointError(res->status, "teacher endpoint returned HTTP " +
                                           std::to_string(res->status));
    }
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") ||
        reply["choices"].empty() ||
        !reply["choices"][0].contains("message")) {
      throw ParseError("teacher endpoint reply is not a chat completion");
    }
    return reply["choices"][0]["message"]["content"].get<std::string>();
  }

  void bump(int RemoteStats::* field, int by = 1) {
    std::lock_guard lock(stats_mu);
    stats.*field += by;
  }

  bool retryable(const std::exception& e) {
    if (dynamic_cast<const TransportError*>(&e)) return true;
    if (auto* ep = dynamic_cast<const EndpointError*>(&e)) {
      return ep->status() == 429 || ep->status() >= 500;
    }
    return false;
  }

  // Fetches (cache-aware) and hands the raw text to `parse`. On parse
  // failure the request is retried; when the budget is spent `fallback`
  // supplies the result.
  template <typename Result>
  Result fetch(const std::string& prompt,
               const std::function<Result(const std::string&)>& parse,
               const std::function<Result()>& fallback) {
    const std::string key = cache_key(config.model, prompt);
    if (auto cached = cache.lookup(key)) {
      bump(&RemoteStats::cache_hits);
      return parse(*cached);
    }
    const int attempts = 1 + std::max(0, config.retry_budget);
    int backoff_ms = config.retry_backoff_ms;
    for (int attempt = 0; attempt < attempts; ++attempt) {
      if (attempt > 0) {
        bump(&RemoteStats::retries);
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
        backoff_ms *= 2;
      }
      std::string raw;
      try {
        bump(&RemoteStats::requests);
        raw = post_once(prompt);
      } catch (const std::exception& e) {
        if (attempt + 1 < attempts && retryable(e)) continue;
        throw;
      }
      try {
        Result parsed = parse(raw);
        cache.record(key, config.model, encoder::fnv1a64(prompt), raw,
                     "ok");
        return parsed;
      } catch (const ParseError&) {
        if (attempt + 1 == attempts) {
          bump(&RemoteStats::fallbacks);
          return fallback();
        }
      }
    }
    bump(&RemoteStats::fallbacks);
    return fallback();
  }
};

RemoteTeacher::RemoteTeacher(TeacherEndpointConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

RemoteTeacher::~RemoteTeacher() = default;

TeacherRanking RemoteTeacher::rerank(
    const corpus::QAExample& example,
    const std::vector<corpus::Document>& candidates) {
  const std::string prompt = build_rerank_prompt(example.question, candidates);
  const std::size_t k = candidates.size();
  auto result = impl_->fetch<TeacherRanking>(
      prompt,
      [&](const std::string& raw) { return parse_rerank_response(raw, k); },
      [&] {
        TeacherRanking fb;
        fb.pi = numkit::Permutation::identity(k);
        fb.fallback = true;
        return fb;
      });
  result.qid = example.qid;
  result.provenance = Provenance::Remote;
  if (result.repaired) impl_->bump(&RemoteStats::repaired);
  return result;
}

TeacherScores RemoteTeacher::score(
    const corpus::QAExample& example,
    const std::vector<corpus::Document>& candidates) {
  const std::string prompt = build_score_prompt(example.question, candidates);
  const std::size_t k = candidates.size();
  auto result = impl_->fetch<TeacherScores>(
      prompt,
      [&](const std::string& raw) { return parse_score_response(raw, k); },
      [&] {
        // No usable scores: fall back to a flat list.
        TeacherScores fb;
        fb.scores.assign(k, 0.5);
        return fb;
      });
  result.qid = example.qid;
  result.provenance = Provenance::Remote;
  return result;
}

std::vector<TeacherRanking> RemoteTeacher::rerank_many(
    const std::vector<const corpus::QAExample*>& examples,
    const std::vector<std::vector<corpus::Document>>& candidates) {
  if (examples.size() != candidates.size()) {
    throw InvalidArgument("rerank_many: misaligned inputs");
  }
  std::vector<TeacherRanking> out(examples.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= examples.size()) return;
      try {
        out[i] = rerank(*examples[i], candidates[i]);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  const int n_threads = std::max(
      1, std::min<int>(impl_->config.max_in_flight,
                       static_cast<int>(examples.size())));
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

RemoteStats RemoteTeacher::stats() const {
  std::lock_guard lock(impl_->stats_mu);
  return impl_->stats;
}

}  // namespace idistill::teacher
