#include "idistill/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_set>

#include "idistill/errors.hpp"
#include "json.hpp"

namespace idistill::corpus {

namespace {

using nlohmann::json;

json parse_line(const std::string& line, const std::filesystem::path& path,
                std::size_t line_no) {
  json record = json::parse(line, nullptr, false);
  if (record.is_discarded() || !record.is_object()) {
    throw ParseError(path.string() + ":" + std::to_string(line_no) +
                     ": malformed record");
  }
  return record;
}

bool tokens_contain(const std::vector<std::string>& haystack,
                    const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
    if (std::equal(needle.begin(), needle.end(), haystack.begin() + i)) {
      return true;
    }
  }
  return false;
}

std::vector<std::pair<std::string, std::string>> bigrams(
    const std::vector<std::string>& tokens) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    out.emplace_back(tokens[i], tokens[i + 1]);
  }
  return out;
}

}  // namespace

std::string to_string(DataCategory c) {
  switch (c) {
    case DataCategory::FollowingAnswer: return "following_answer";
    case DataCategory::FirstAnswer: return "first_answer";
    case DataCategory::NoAnswer: return "no_answer";
  }
  return "unknown";
}

const Document& CorpusIndex::doc_by_id(std::int64_t id) const {
  auto it = id_to_pos.find(id);
  if (it == id_to_pos.end()) {
    throw IntegrityError("unknown document id " + std::to_string(id));
  }
  return documents[it->second];
}

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string token;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else if (!token.empty()) {
      out.push_back(std::move(token));
      token.clear();
    }
  }
  if (!token.empty()) out.push_back(std::move(token));
  return out;
}

std::vector<QAExample> load_examples(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open examples file: " + path.string());
  std::vector<QAExample> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record = parse_line(line, path, line_no);
    if (!record.contains("qid") || !record.contains("question") ||
        !record.contains("answers") || !record.contains("split") ||
        !record["answers"].is_array() || record["answers"].empty()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": record missing required field");
    }
    QAExample ex;
    try {
      ex.qid = record["qid"].get<std::string>();
      ex.question = record["question"].get<std::string>();
      ex.answers = record["answers"].get<std::vector<std::string>>();
      ex.split = record["split"].get<std::string>();
    } catch (const json::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": field has wrong type");
    }
    if (ex.question.empty() ||
        (ex.split != "train" && ex.split != "valid" && ex.split != "test")) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": invalid question or split");
    }
    if (!seen.insert(ex.qid).second) {
      throw IntegrityError(path.string() + ":" + std::to_string(line_no) +
                           ": duplicate qid " + ex.qid);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open corpus file: " + path.string());
  std::vector<Document> out;
  std::unordered_set<std::int64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record = parse_line(line, path, line_no);
    if (!record.contains("id") || !record.contains("text") ||
        !record["id"].is_number_integer() || !record["text"].is_string()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": record missing id or text");
    }
    Document doc;
    doc.id = record["id"].get<std::int64_t>();
    doc.text = record["text"].get<std::string>();
    if (doc.text.empty()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": empty document text");
    }
    if (!seen.insert(doc.id).second) {
      throw IntegrityError(path.string() + ":" + std::to_string(line_no) +
                           ": duplicate document id " + std::to_string(doc.id));
    }
    out.push_back(std::move(doc));
  }
  return out;
}

void save_examples(const std::vector<QAExample>& examples,
                   const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write examples file: " + path.string());
  for (const auto& ex : examples) {
    json record{{"qid", ex.qid},
                {"question", ex.question},
                {"answers", ex.answers},
                {"split", ex.split}};
    os << record.dump() << '\n';
  }
}

void save_corpus(const std::vector<Document>& docs,
                 const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write corpus file: " + path.string());
  for (const auto& doc : docs) {
    json record{{"id", doc.id}, {"text", doc.text}};
    os << record.dump() << '\n';
  }
}

CorpusIndex build_index(std::vector<Document> docs,
                        const encoder::EncoderModel& model,
                        std::size_t max_len) {
  if (docs.empty()) throw InvalidArgument("cannot index an empty corpus");
  CorpusIndex index;
  index.documents = std::move(docs);
  index.dim = model.dim;
  index.vectors.resize(index.documents.size() * model.dim);
  index.term_counts.resize(index.documents.size());
  index.doc_lengths.resize(index.documents.size());
  double total_len = 0.0;
  for (std::size_t i = 0; i < index.documents.size(); ++i) {
    const auto& doc = index.documents[i];
    if (!index.id_to_pos.emplace(doc.id, i).second) {
      throw IntegrityError("duplicate document id " + std::to_string(doc.id));
    }
    const auto tokens =
        encoder::tokenize(doc.text, max_len, model.vocab_buckets);
    const auto vec = encoder::encode(model, tokens);
    std::copy(vec.begin(), vec.end(), index.vectors.begin() + i * model.dim);
    const auto terms = words(doc.text);
    index.doc_lengths[i] = terms.size();
    total_len += static_cast<double>(terms.size());
    auto& counts = index.term_counts[i];
    for (const auto& t : terms) ++counts[t];
    for (const auto& [term, _] : counts) ++index.doc_freq[term];
  }
  index.avg_doc_length = total_len / static_cast<double>(index.doc_count());
  return index;
}

CandidateSet retrieve_topk(const CorpusIndex& index,
                           const encoder::EncoderModel& model,
                           const QAExample& example, std::size_t k,
                           std::size_t max_len) {
  if (k < 1 || k > index.doc_count()) {
    throw InvalidArgument("retrieve_topk: k out of range");
  }
  if (index.dim != model.dim) {
    throw InvalidArgument("index and model dimensions differ");
  }
  const auto q_tokens =
      encoder::tokenize(example.question, max_len, model.vocab_buckets);
  const auto q_vec = encoder::encode(model, q_tokens);
  std::vector<std::pair<std::int64_t, double>> scored(index.doc_count());
  for (std::size_t i = 0; i < index.doc_count(); ++i) {
    const double* v = index.vectors.data() + i * index.dim;
    double s = 0.0;
    for (std::uint32_t d = 0; d < index.dim; ++d) s += q_vec[d] * v[d];
    scored[i] = {index.documents[i].id, s};
  }
  auto better = [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  std::partial_sort(scored.begin(), scored.begin() + k, scored.end(), better);
  CandidateSet out;
  out.qid = example.qid;
  out.docs.assign(scored.begin(), scored.begin() + k);
  return out;
}

std::vector<double> bm25_scores(const std::string& question,
                                const std::vector<Document>& candidates,
                                const CorpusIndex& index,
                                const Bm25Params& params) {
  if (candidates.empty()) {
    throw InvalidArgument("bm25_scores: empty candidate list");
  }
  const auto q_terms = words(question);
  const double n_docs = static_cast<double>(index.doc_count());
  std::vector<double> out(candidates.size(), 0.0);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto d_terms = words(candidates[c].text);
    std::unordered_map<std::string, int> tf;
    for (const auto& t : d_terms) ++tf[t];
    const double len_ratio =
        static_cast<double>(d_terms.size()) / index.avg_doc_length;
    double score = 0.0;
    for (const auto& term : q_terms) {
      auto it = tf.find(term);
      if (it == tf.end()) continue;
      auto df_it = index.doc_freq.find(term);
      const double df = df_it == index.doc_freq.end()
                            ? 0.0
                            : static_cast<double>(df_it->second);
      const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
      const double f = static_cast<double>(it->second);
      score += idf * f * (params.k1 + 1.0) /
               (f + params.k1 * (1.0 - params.b + params.b * len_ratio));
    }
    out[c] = score;
  }
  return out;
}

std::vector<double> rouge2_scores(const std::string& question,
                                  const std::vector<Document>& candidates) {
  if (candidates.empty()) {
    throw InvalidArgument("rouge2_scores: empty candidate list");
  }
  const auto q_bigrams = bigrams(words(question));
  std::map<std::pair<std::string, std::string>, int> q_counts;
  for (const auto& bg : q_bigrams) ++q_counts[bg];
  std::vector<double> out(candidates.size(), 0.0);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto d_bigrams = bigrams(words(candidates[c].text));
    if (q_bigrams.empty() || d_bigrams.empty()) continue;
    auto remaining = q_counts;
    int overlap = 0;
    for (const auto& bg : d_bigrams) {
      auto it = remaining.find(bg);
      if (it != remaining.end() && it->second > 0) {
        --it->second;
        ++overlap;
      }
    }
    if (overlap == 0) continue;
    const double precision =
        static_cast<double>(overlap) / static_cast<double>(d_bigrams.size());
    const double recall =
        static_cast<double>(overlap) / static_cast<double>(q_bigrams.size());
    out[c] = 2.0 * precision * recall / (precision + recall);
  }
  return out;
}

numkit::Permutation rule_based_rank(const std::vector<Document>& candidates,
                                    const std::vector<std::string>& answers) {
  if (candidates.empty()) {
    throw InvalidArgument("rule_based_rank: empty candidate list");
  }
  numkit::Permutation pi;
  pi.order.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (contains_answer(candidates[i], answers)) {
      pi.order.push_back(static_cast<int>(i + 1));
    }
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!contains_answer(candidates[i], answers)) {
      pi.order.push_back(static_cast<int>(i + 1));
    }
  }
  return pi;
}

bool contains_answer(const Document& doc,
                     const std::vector<std::string>& answers) {
  if (answers.empty()) {
    throw InvalidArgument("contains_answer: no answers given");
  }
  const auto doc_tokens = words(doc.text);
  for (const auto& answer : answers) {
    const auto ans_tokens = words(answer);
    if (tokens_contain(doc_tokens, ans_tokens)) return true;
  }
  return false;
}

DataCategory categorize(const std::vector<Document>& candidates,
                        const std::vector<std::string>& answers) {
  if (candidates.empty()) {
    throw InvalidArgument("categorize: empty candidate list");
  }
  bool any = false;
  for (const auto& doc : candidates) {
    if (contains_answer(doc, answers)) {
      any = true;
      break;
    }
  }
  if (!any) return DataCategory::NoAnswer;
  return contains_answer(candidates.front(), answers)
             ? DataCategory::FirstAnswer
             : DataCategory::FollowingAnswer;
}

}  // namespace idistill::corpus
