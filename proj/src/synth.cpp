#include "idistill/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "idistill/errors.hpp"

namespace idistill::synth {

namespace {

struct Rng {
  std::mt19937_64 g;
  explicit Rng(std::uint64_t seed) : g(seed) {}
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(g() % n); }
  double unit() { return static_cast<double>(g() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  // Convex map concentrates mass near lo, so the topic's top weights are
  // well separated instead of clustering at hi.
  double affinity(double lo, double hi) {
    const double u = unit();
    return lo + (hi - lo) * u * u * u * u;
  }
};

std::string pad_num(std::size_t n) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%05zu", n);
  return buf;
}

struct RawDoc {
  std::vector<std::string> tokens;
  std::vector<std::uint16_t> word_counts;  // per vocab-word occurrence count
  std::size_t question_index = SIZE_MAX;   // set for gold docs only
};

}  // namespace

double LatentRelevance::get(const std::string& qid,
                            std::int64_t doc_id) const {
  auto q = qid_to_row.find(qid);
  auto d = doc_to_col.find(doc_id);
  if (q == qid_to_row.end() || d == doc_to_col.end()) {
    throw IntegrityError("latent relevance missing for qid=" + qid +
                         " doc=" + std::to_string(doc_id));
  }
  return values[q->second * doc_ids.size() + d->second];
}

void save_latent(const LatentRelevance& latent,
                 const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write latent file: " + path.string());
  char buf[64];
  for (std::size_t q = 0; q < latent.qids.size(); ++q) {
    for (std::size_t d = 0; d < latent.doc_ids.size(); ++d) {
      std::snprintf(buf, sizeof(buf), "%.17g",
                    latent.values[q * latent.doc_ids.size() + d]);
      os << latent.qids[q] << '\t' << latent.doc_ids[d] << '\t' << buf << '\n';
    }
  }
}

LatentRelevance load_latent(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open latent file: " + path.string());
  struct Entry {
    std::string qid;
    std::int64_t doc;
    double value;
  };
  std::vector<Entry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected qid<TAB>doc<TAB>value");
    }
    Entry e;
    e.qid = line.substr(0, t1);
    try {
      e.doc = std::stoll(line.substr(t1 + 1, t2 - t1 - 1));
      e.value = std::stod(line.substr(t2 + 1));
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": malformed number");
    }
    entries.push_back(std::move(e));
  }
  LatentRelevance latent;
  for (const auto& e : entries) {
    if (latent.qid_to_row.emplace(e.qid, latent.qids.size()).second) {
      latent.qids.push_back(e.qid);
    }
    if (latent.doc_to_col.emplace(e.doc, latent.doc_ids.size()).second) {
      latent.doc_ids.push_back(e.doc);
    }
  }
  const std::size_t cols = latent.doc_ids.size();
  latent.values.assign(latent.qids.size() * cols,
                       std::numeric_limits<double>::quiet_NaN());
  for (const auto& e : entries) {
    latent.values[latent.qid_to_row[e.qid] * cols + latent.doc_to_col[e.doc]] =
        e.value;
  }
  for (double v : latent.values) {
    if (std::isnan(v)) {
      throw IntegrityError(path.string() +
                           ": latent matrix is not fully specified");
    }
  }
  return latent;
}

SynthWorld generate(const SynthConfig& config) {
  if (config.topics == 0 || config.vocab_size < config.topics) {
    throw InvalidArgument("synth: need 1 <= topics <= vocab_size");
  }
  if (config.num_docs < config.total_questions() + 1) {
    throw InvalidArgument("synth: num_docs must exceed the question count");
  }
  const std::size_t words_per_topic = config.vocab_size / config.topics;
  if (words_per_topic < 2) {
    throw InvalidArgument("synth: fewer than two words per topic");
  }
  if (config.doc_len <
      config.question_topic_words * config.question_restates_in_gold +
          config.question_entity_words * config.entity_repeats_in_gold + 2) {
    throw InvalidArgument("synth: doc_len too small for the gold template");
  }
  Rng rng(config.seed);

  auto word = [](std::size_t i) { return "w" + std::to_string(i); };
  auto word_index = [&](std::size_t topic) {
    return topic * words_per_topic + rng.below(words_per_topic);
  };

  const std::size_t nq = config.total_questions();
  SynthWorld world;
  world.examples.reserve(nq);

  std::vector<std::pair<std::size_t, std::size_t>> topic_pairs;
  for (std::size_t a = 0; a < config.topics; ++a) {
    for (std::size_t b = a + 1; b < config.topics; ++b) {
      topic_pairs.emplace_back(a, b);
    }
  }
  if (topic_pairs.empty()) topic_pairs.emplace_back(0, 0);  // single topic
  // Shuffle so the train/held-out pair split covers every topic evenly.
  for (std::size_t i = topic_pairs.size() - 1; i > 0; --i) {
    std::swap(topic_pairs[i], topic_pairs[rng.below(i + 1)]);
  }

  // Each question spans a pair of topics. A document matching both halves
  // of the pair outranks any single-topic document under the mixture dot
  // product, so pair identity is what retrieval has to learn.
  std::vector<std::size_t> question_topic_a(nq), question_topic_b(nq);
  std::vector<std::vector<std::size_t>> question_words(nq);
  std::vector<RawDoc> raw_docs;
  raw_docs.reserve(config.num_docs);
  std::vector<std::size_t> gold_raw_index(nq);

  auto count_words = [&](const std::vector<std::string>& tokens) {
    std::vector<std::uint16_t> counts(config.vocab_size, 0);
    for (const auto& t : tokens) {
      if (t.size() > 1 && t[0] == 'w') {
        std::size_t idx = 0;
        auto [p, ec] =
            std::from_chars(t.data() + 1, t.data() + t.size(), idx);
        if (ec == std::errc() && p == t.data() + t.size() &&
            idx < config.vocab_size) {
          ++counts[idx];
        }
      }
    }
    return counts;
  };

  for (std::size_t i = 0; i < nq; ++i) {
    const std::string num = pad_num(i);
    corpus::QAExample ex;
    ex.qid = "q" + num;
    ex.split = i < config.num_train                      ? "train"
               : i < config.num_train + config.num_valid ? "valid"
                                                         : "test";
    // Held-out questions get pairs no other question uses, so their golds
    // are unambiguous at the topic level; training questions cycle through
    // the remaining pairs.
    const std::size_t held_out = config.num_valid + config.num_test;
    const std::size_t train_pairs =
        topic_pairs.size() > held_out ? topic_pairs.size() - held_out : 1;
    const std::size_t pair_index =
        i < config.num_train
            ? i % train_pairs
            : (train_pairs + (i - config.num_train)) % topic_pairs.size();
    question_topic_a[i] = topic_pairs[pair_index].first;
    question_topic_b[i] = topic_pairs[pair_index].second;

    std::vector<std::string> tokens;
    for (std::size_t j = 0; j < config.question_topic_words; ++j) {
      const std::size_t w =
          word_index(j % 2 == 0 ? question_topic_a[i] : question_topic_b[i]);
      question_words[i].push_back(w);
      tokens.push_back(word(w));
    }
    for (std::size_t j = 0; j < config.question_entity_words; ++j) {
      tokens.push_back("ent" + num + static_cast<char>('a' + j));
    }
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      ex.question += (j ? " " : "") + tokens[j];
    }
    ex.answers = {"ans" + num};
    world.examples.push_back(std::move(ex));

    // Gold document: restates the question's topic and entity words, embeds
    // the answer, fills with topic-weighted samples.
    RawDoc gold;
    gold.question_index = i;
    for (std::size_t r = 0; r < config.question_restates_in_gold; ++r) {
      for (std::size_t w : question_words[i]) gold.tokens.push_back(word(w));
    }
    for (std::size_t j = 0; j < config.question_entity_words; ++j) {
      for (std::size_t r = 0; r < config.entity_repeats_in_gold; ++r) {
        gold.tokens.push_back("ent" + num + static_cast<char>('a' + j));
      }
    }
    gold.tokens.push_back("ans" + num);
    const double gold_w =
        rng.uniform(config.gold_topic_weight_lo, config.gold_topic_weight_hi);
    // Per-document split between the two topics of the pair; the spread
    // separates same-topic documents on the latent scale.
    const double gold_split = rng.uniform(0.35, 0.65);
    while (gold.tokens.size() < config.doc_len) {
      gold.tokens.push_back(
          rng.unit() < gold_w
              ? word(word_index(rng.unit() < gold_split ? question_topic_a[i]
                                                        : question_topic_b[i]))
              : word(rng.below(config.vocab_size)));
    }
    gold.word_counts = count_words(gold.tokens);
    gold_raw_index[i] = raw_docs.size();
    raw_docs.push_back(std::move(gold));
  }

  for (std::size_t i = nq; i < config.num_docs; ++i) {
    RawDoc doc;
    const std::size_t topic = rng.below(config.topics);
    const double w =
        rng.affinity(config.doc_topic_weight_lo, config.doc_topic_weight_hi);
    for (std::size_t j = 0; j < config.doc_len; ++j) {
      doc.tokens.push_back(rng.unit() < w
                               ? word(word_index(topic))
                               : word(rng.below(config.vocab_size)));
    }
    doc.word_counts = count_words(doc.tokens);
    raw_docs.push_back(std::move(doc));
  }

  // Fisher-Yates so document ids carry no information about gold placement.
  std::vector<std::size_t> position(config.num_docs);
  std::iota(position.begin(), position.end(), 0);
  for (std::size_t i = config.num_docs - 1; i > 0; --i) {
    std::swap(position[i], position[rng.below(i + 1)]);
  }
  std::vector<std::size_t> raw_at(config.num_docs);  // doc id -> raw index
  for (std::size_t id = 0; id < config.num_docs; ++id) {
    raw_at[id] = position[id];
  }

  world.documents.resize(config.num_docs);
  for (std::size_t id = 0; id < config.num_docs; ++id) {
    auto& doc = world.documents[id];
    doc.id = static_cast<std::int64_t>(id);
    const auto& tokens = raw_docs[raw_at[id]].tokens;
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      doc.text += (j ? " " : "") + tokens[j];
    }
  }
  std::vector<std::int64_t> id_of_raw(config.num_docs);
  for (std::size_t id = 0; id < config.num_docs; ++id) {
    id_of_raw[raw_at[id]] = static_cast<std::int64_t>(id);
  }
  for (std::size_t i = 0; i < nq; ++i) {
    world.gold_doc_id[world.examples[i].qid] = id_of_raw[gold_raw_index[i]];
  }

  auto& latent = world.latent;
  latent.qids.reserve(nq);
  for (std::size_t i = 0; i < nq; ++i) {
    latent.qids.push_back(world.examples[i].qid);
    latent.qid_to_row[world.examples[i].qid] = i;
  }
  latent.doc_ids.resize(config.num_docs);
  for (std::size_t id = 0; id < config.num_docs; ++id) {
    latent.doc_ids[id] = static_cast<std::int64_t>(id);
    latent.doc_to_col[static_cast<std::int64_t>(id)] = id;
  }
  latent.values.resize(nq * config.num_docs);
  // Topic-mass share of each doc per topic, computed once.
  std::vector<double> topic_share(config.num_docs * config.topics, 0.0);
  for (std::size_t id = 0; id < config.num_docs; ++id) {
    const RawDoc& raw = raw_docs[raw_at[id]];
    for (std::size_t t = 0; t < config.topics; ++t) {
      double mass = 0.0;
      for (std::size_t j = 0; j < words_per_topic; ++j) {
        mass += raw.word_counts[t * words_per_topic + j];
      }
      topic_share[id * config.topics + t] =
          mass / static_cast<double>(raw.tokens.size());
    }
  }
  for (std::size_t i = 0; i < nq; ++i) {
    const std::int64_t gold_id = world.gold_doc_id[world.examples[i].qid];
    const std::size_t a = question_topic_a[i];
    const std::size_t b = question_topic_b[i];
    // Question mixture follows its word split: ceil(n/2) words from topic a.
    const double qa =
        static_cast<double>((config.question_topic_words + 1) / 2) /
        static_cast<double>(config.question_topic_words);
    for (std::size_t id = 0; id < config.num_docs; ++id) {
      double rel = qa * topic_share[id * config.topics + a] +
                   (1.0 - qa) * topic_share[id * config.topics + b];
      if (a == b) rel = topic_share[id * config.topics + a];
      if (static_cast<std::int64_t>(id) == gold_id) rel += 1.0;
      latent.values[i * config.num_docs + id] = rel;
    }
  }
  return world;
}

CategoryMix plant_category_mix(
    const std::vector<corpus::QAExample>& examples,
    const std::vector<corpus::CandidateSet>& candidates,
    const corpus::CorpusIndex& index, std::size_t max_per_category) {
  if (examples.size() != candidates.size()) {
    throw InvalidArgument("examples and candidate sets are not aligned");
  }
  CategoryMix mix;
  for (corpus::DataCategory c :
       {corpus::DataCategory::FollowingAnswer, corpus::DataCategory::FirstAnswer,
        corpus::DataCategory::NoAnswer}) {
    mix.counts[c] = 0;
    mix.selected[c];
  }
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].qid != candidates[i].qid) {
      throw IntegrityError("candidate set qid mismatch at position " +
                           std::to_string(i));
    }
    std::vector<corpus::Document> docs;
    docs.reserve(candidates[i].size());
    for (const auto& [doc_id, _] : candidates[i].docs) {
      docs.push_back(index.doc_by_id(doc_id));
    }
    const auto category = corpus::categorize(docs, examples[i].answers);
    ++mix.counts[category];
    if (mix.selected[category].size() < max_per_category) {
      mix.selected[category].push_back(examples[i].qid);
    }
  }
  return mix;
}

}  // namespace idistill::synth
