#include "idistill/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include "idistill/errors.hpp"
#include "idistill/seeding.hpp"
#include "json.hpp"

namespace idistill::pipeline {

namespace {

using nlohmann::json;

std::vector<corpus::QAExample> split_of(
    const std::vector<corpus::QAExample>& examples, const std::string& split) {
  std::vector<corpus::QAExample> out;
  for (const auto& ex : examples) {
    if (ex.split == split) out.push_back(ex);
  }
  return out;
}

}  // namespace

std::unique_ptr<teacher::Teacher> make_teacher(
    const ExperimentConfig& config, const corpus::CorpusIndex& index,
    const synth::LatentRelevance* latent, std::uint64_t seed) {
  if (config.teacher == "oracle") {
    if (!latent) {
      throw IntegrityError("oracle teacher requires a latent relevance table");
    }
    return std::make_unique<teacher::OracleTeacher>(
        *latent, config.oracle_p_swap, derive_seed(seed, "oracle"),
        config.oracle_score_noise);
  }
  if (config.teacher == "bm25") {
    return std::make_unique<teacher::MetricTeacher>(
        teacher::MetricTeacher::Kind::Bm25, index);
  }
  if (config.teacher == "rouge2") {
    return std::make_unique<teacher::MetricTeacher>(
        teacher::MetricTeacher::Kind::Rouge2, index);
  }
  if (config.teacher == "rule_based") {
    return std::make_unique<teacher::RuleBasedTeacher>();
  }
  if (config.teacher == "remote") {
    return std::make_unique<teacher::RemoteTeacher>(config.endpoint);
  }
  throw InvalidArgument("unknown teacher kind: " + config.teacher);
}

eval::MetricReport evaluate_retriever(
    const corpus::CorpusIndex& index, const encoder::EncoderModel& model,
    const std::vector<corpus::QAExample>& examples,
    const std::vector<std::size_t>& ks, std::size_t max_len) {
  if (ks.empty()) throw InvalidArgument("evaluate_retriever: no k values");
  const std::size_t k_max =
      std::min(*std::max_element(ks.begin(), ks.end()), index.doc_count());
  std::vector<corpus::CandidateSet> results;
  results.reserve(examples.size());
  for (const auto& ex : examples) {
    results.push_back(corpus::retrieve_topk(index, model, ex, k_max, max_len));
  }
  eval::MetricReport report;
  report.question_count = examples.size();
  for (std::size_t k : ks) {
    report.hit_rate_at[k] =
        eval::hit_rate(results, examples, index, std::min(k, k_max));
  }
  return report;
}

ExperimentOutcome run_experiment(const synth::SynthWorld& world,
                                 const ExperimentConfig& config, Mode mode,
                                 std::size_t train_limit) {
  const auto& dcfg = config.distill;
  ExperimentOutcome outcome;

  // Ranker and retriever start from the same seed draw.
  outcome.baseline_retriever =
      encoder::init_model(config.dim, config.vocab_buckets,
                          derive_seed(dcfg.seed, "init"),
                          encoder::Role::Retriever);
  outcome.ranker = outcome.baseline_retriever;
  outcome.ranker.role = encoder::Role::Ranker;
  outcome.retriever = outcome.baseline_retriever;

  auto index = corpus::build_index(world.documents, outcome.baseline_retriever,
                                   dcfg.max_len);

  auto train = split_of(world.examples, "train");
  if (train_limit > 0 && train_limit < train.size()) {
    train.resize(train_limit);
  }
  const auto test = split_of(world.examples, "test");
  if (train.empty() || test.empty()) {
    throw InvalidArgument("experiment needs non-empty train and test splits");
  }

  auto teach = make_teacher(config, index, &world.latent, dcfg.seed);
  const auto signal = mode == Mode::Direct
                          ? distill::TeacherSignal::Scores
                          : distill::TeacherSignal::Ranking;
  auto records = distill::prepare_records(train, index,
                                          outcome.baseline_retriever, *teach,
                                          dcfg, signal);
  outcome.train_instances = records.size();

  if (mode == Mode::Intermediate) {
    outcome.stage1 = distill::stage1_train_ranker(records, outcome.ranker, dcfg);
    outcome.stage2 = distill::stage2_train_retriever(records, outcome.ranker,
                                                     outcome.retriever, dcfg);
  } else {
    outcome.stage2 =
        distill::direct_distill_train(records, outcome.retriever, dcfg);
  }

  const std::vector<std::size_t> ks{3, 5, 10};
  outcome.baseline_hr =
      evaluate_retriever(index, outcome.baseline_retriever, test, ks,
                         dcfg.max_len)
          .hit_rate_at;
  auto trained_index =
      corpus::build_index(world.documents, outcome.retriever, dcfg.max_len);
  outcome.distilled_hr =
      evaluate_retriever(trained_index, outcome.retriever, test, ks,
                         dcfg.max_len)
          .hit_rate_at;

  if (mode == Mode::Intermediate) {
    // Ranker fidelity to the noise-free oracle on held-out candidate sets.
    // Candidates come from the baseline retriever, the same generator that
    // produced the training lists, so the sets are not biased toward the
    // documents either trained model happens to over-score.
    teacher::OracleTeacher clean_oracle(world.latent, 0.0,
                                        derive_seed(dcfg.seed, "eval-oracle"));
    double rho_sum = 0.0;
    for (const auto& ex : test) {
      const auto cands = corpus::retrieve_topk(index, outcome.baseline_retriever,
                                               ex, dcfg.k, dcfg.max_len);
      std::vector<corpus::Document> docs;
      std::vector<double> ranker_scores;
      for (const auto& [doc_id, _] : cands.docs) {
        docs.push_back(index.doc_by_id(doc_id));
      }
      const auto q_tokens = encoder::tokenize(ex.question, dcfg.max_len,
                                              outcome.ranker.vocab_buckets);
      for (const auto& doc : docs) {
        const auto d_tokens = encoder::tokenize(doc.text, dcfg.max_len,
                                                outcome.ranker.vocab_buckets);
        ranker_scores.push_back(
            encoder::score_pair(outcome.ranker, q_tokens, d_tokens));
      }
      const auto oracle_pi = clean_oracle.rerank(ex, docs).pi;
      const auto ranker_pi = eval::perm_from_score_vector(ranker_scores);
      rho_sum += eval::spearman(ranker_pi, oracle_pi);
    }
    outcome.ranker_mean_spearman = rho_sum / static_cast<double>(test.size());
  }
  return outcome;
}

std::vector<SweepRow> ablate_train_size(const synth::SynthWorld& world,
                                        const ExperimentConfig& config,
                                        const std::vector<std::size_t>& sizes) {
  std::vector<SweepRow> rows;
  for (std::size_t n : sizes) {
    const auto outcome =
        run_experiment(world, config, Mode::Intermediate, n);
    rows.push_back({"train_size", std::to_string(n), outcome.baseline_hr,
                    outcome.distilled_hr});
  }
  return rows;
}

std::vector<SweepRow> ablate_list_size(const synth::SynthWorld& world,
                                       const ExperimentConfig& config,
                                       const std::vector<std::size_t>& ks) {
  std::vector<SweepRow> rows;
  for (std::size_t k : ks) {
    ExperimentConfig cfg = config;
    cfg.distill.k = k;
    const auto outcome = run_experiment(world, cfg, Mode::Intermediate);
    rows.push_back({"list_size", std::to_string(k), outcome.baseline_hr,
                    outcome.distilled_hr});
  }
  return rows;
}

std::vector<SweepRow> ablate_data_category(const synth::SynthWorld& world,
                                           const ExperimentConfig& config,
                                           std::size_t max_per_category) {
  const auto& dcfg = config.distill;
  auto baseline = encoder::init_model(config.dim, config.vocab_buckets,
                                      derive_seed(dcfg.seed, "init"),
                                      encoder::Role::Retriever);
  auto index = corpus::build_index(world.documents, baseline, dcfg.max_len);
  const auto train = split_of(world.examples, "train");
  std::vector<corpus::CandidateSet> candidates;
  candidates.reserve(train.size());
  for (const auto& ex : train) {
    candidates.push_back(
        corpus::retrieve_topk(index, baseline, ex, dcfg.k, dcfg.max_len));
  }
  const auto mix =
      synth::plant_category_mix(train, candidates, index, max_per_category);

  std::vector<SweepRow> rows;
  for (corpus::DataCategory category :
       {corpus::DataCategory::FollowingAnswer,
        corpus::DataCategory::FirstAnswer, corpus::DataCategory::NoAnswer}) {
    const auto& qids = mix.selected.at(category);
    if (qids.empty()) continue;  // reported by counts, not a failure
    // Rebuild a world view whose train split is just this category.
    synth::SynthWorld view;
    view.documents = world.documents;
    view.latent = world.latent;
    view.gold_doc_id = world.gold_doc_id;
    std::unordered_set<std::string> wanted(qids.begin(), qids.end());
    for (const auto& ex : world.examples) {
      if (ex.split != "train" || wanted.count(ex.qid)) {
        view.examples.push_back(ex);
      }
    }
    const auto outcome = run_experiment(view, config, Mode::Intermediate);
    rows.push_back({"data_category", corpus::to_string(category),
                    outcome.baseline_hr, outcome.distilled_hr});
  }
  return rows;
}

void write_sweep(const std::vector<SweepRow>& rows,
                 const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write sweep file: " + path.string());
  for (const auto& row : rows) {
    json j{{"axis", row.axis}, {"value", row.value}};
    for (const auto& [k, v] : row.baseline_hr) {
      j["baseline"]["hr@" + std::to_string(k)] = v;
    }
    for (const auto& [k, v] : row.distilled_hr) {
      j["distilled"]["hr@" + std::to_string(k)] = v;
    }
    os << j.dump() << '\n';
  }
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open file for digest: " + path.string());
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    const auto n = static_cast<std::size_t>(is.gcount());
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!is) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(h));
  return hex;
}

void write_manifest(const std::filesystem::path& path,
                    const std::string& command, const std::string& config_json,
                    const std::vector<std::filesystem::path>& inputs) {
  json manifest;
  manifest["command"] = command;
  manifest["config"] = json::parse(config_json);
  for (const auto& input : inputs) {
    manifest["inputs"][input.string()] = file_digest(input);
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write manifest: " + path.string());
  os << manifest.dump(2) << '\n';
}

}  // namespace idistill::pipeline
