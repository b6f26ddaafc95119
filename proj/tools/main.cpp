// Command-line front end: thin wrappers over the library pipeline. Every
// command validates its inputs, writes only its declared outputs, and drops
// a manifest (config echo + input digests) next to them so any artifact can
// be reproduced from the manifest alone.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"
#include "idistill/corpus.hpp"
#include "idistill/distill.hpp"
#include "idistill/encoder.hpp"
#include "idistill/errors.hpp"
#include "idistill/eval.hpp"
#include "idistill/pipeline.hpp"
#include "idistill/seeding.hpp"
#include "idistill/synth.hpp"
#include "idistill/teacher.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace idistill;

namespace {

// Exit codes, one per error class (documented in --help).
constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
// 2 is reserved by the flag parser for usage errors.
constexpr int kExitInvalidArgument = 3;
constexpr int kExitIo = 4;
constexpr int kExitParse = 5;
constexpr int kExitIntegrity = 6;
constexpr int kExitTransport = 7;

const char* kExitCodeHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  2  command-line usage error\n"
    "  3  invalid argument or configuration\n"
    "  4  file I/O error\n"
    "  5  parse or format error in an input file or teacher response\n"
    "  6  data integrity error (missing qid, misaligned artifacts, ...)\n"
    "  7  teacher transport or endpoint error\n"
    "  1  any other internal error\n";

// Options shared by the training and experiment commands. Defaults follow
// DistillConfig; flags override values read from --config.
struct CommonOpts {
  std::string config_file;
  fs::path out = "out";
  std::uint64_t seed = 42;
  std::uint32_t dim = 64;
  std::uint32_t vocab_buckets = 32768;
  std::size_t k = 5;
  double theta = 0.0;  // 0 = leave per-stage defaults untouched
  double theta_ranker = 1.0;
  double theta_retriever = 1.0;
  double lr_ranker = 5e-5;
  double lr_retriever = 2e-5;
  std::size_t epochs = 5;
  std::size_t batch_size = 20;
  std::size_t max_len = 128;

  distill::DistillConfig distill_config() const {
    distill::DistillConfig d;
    d.k = k;
    d.theta_ranker = theta > 0.0 ? theta : theta_ranker;
    d.theta_retriever = theta > 0.0 ? theta : theta_retriever;
    d.lr_ranker = lr_ranker;
    d.lr_retriever = lr_retriever;
    d.epochs = epochs;
    d.batch_size = batch_size;
    d.max_len = max_len;
    d.seed = seed;
    d.validate();
    return d;
  }
};

void add_common(CLI::App* cmd, CommonOpts& o, bool training) {
  // Config values are injected as tokens before the explicit flags (see
  // expand_config_args); take-last makes the explicit flags win.
  cmd->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  cmd->add_option("--config", o.config_file,
                  "flat key=value config file; flags override file values");
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", o.seed, "root seed; stages derive child seeds")
      ->capture_default_str();
  if (training) {
    cmd->add_option("--dim", o.dim, "encoder dimension")->capture_default_str();
    cmd->add_option("--vocab-buckets", o.vocab_buckets, "hash buckets")
        ->capture_default_str();
    cmd->add_option("--k", o.k, "candidate list size")->capture_default_str();
    cmd->add_option("--theta", o.theta,
                    "temperature for both stages (overrides per-stage values)");
    cmd->add_option("--theta-ranker", o.theta_ranker, "stage-1 temperature")
        ->capture_default_str();
    cmd->add_option("--theta-retriever", o.theta_retriever,
                    "stage-2 temperature")
        ->capture_default_str();
    cmd->add_option("--lr-ranker", o.lr_ranker, "stage-1 learning rate")
        ->capture_default_str();
    cmd->add_option("--lr-retriever", o.lr_retriever, "stage-2 learning rate")
        ->capture_default_str();
    cmd->add_option("--epochs", o.epochs, "training epochs")
        ->capture_default_str();
    cmd->add_option("--batch-size", o.batch_size, "minibatch size")
        ->capture_default_str();
    cmd->add_option("--max-len", o.max_len, "token truncation length")
        ->capture_default_str();
  }
}

void ensure_out(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory: " + out.string());
}

void emit_manifest(const CommonOpts& o, const std::string& command,
                   const json& config, const std::vector<fs::path>& inputs) {
  pipeline::write_manifest(o.out / "manifest.json", command, config.dump(),
                           inputs);
}

std::vector<corpus::QAExample> load_split(const fs::path& path,
                                          const std::string& split) {
  auto all = corpus::load_examples(path);
  if (split == "all") return all;
  std::vector<corpus::QAExample> out;
  for (auto& ex : all) {
    if (ex.split == split) out.push_back(std::move(ex));
  }
  if (out.empty()) {
    throw IntegrityError("no examples in split '" + split + "' of " +
                         path.string());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Candidate and teacher-output files (JSON lines, one record per question)

void save_candidates(const std::vector<corpus::CandidateSet>& sets,
                     const fs::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write candidates: " + path.string());
  for (const auto& set : sets) {
    json j{{"qid", set.qid}, {"docs", json::array()}};
    for (const auto& [id, score] : set.docs) {
      j["docs"].push_back({id, score});
    }
    os << j.dump() << '\n';
  }
}

std::vector<corpus::CandidateSet> load_candidates(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read candidates: " + path.string());
  std::vector<corpus::CandidateSet> sets;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("qid") || !j.contains("docs")) {
      throw FormatError("bad candidate record in " + path.string());
    }
    corpus::CandidateSet set;
    set.qid = j["qid"].get<std::string>();
    for (const auto& pair : j["docs"]) {
      set.docs.emplace_back(pair[0].get<std::int64_t>(),
                            pair[1].get<double>());
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

struct TeachRecord {
  std::string qid;
  std::string provenance;
  std::vector<int> order;      // present for ranking signal
  std::vector<double> scores;  // present for score signal
  bool repaired = false;
  bool fallback = false;
};

void save_teach_records(const std::vector<TeachRecord>& records,
                        const fs::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write rankings: " + path.string());
  for (const auto& r : records) {
    json j{{"qid", r.qid},
           {"provenance", r.provenance},
           {"repaired", r.repaired},
           {"fallback", r.fallback}};
    if (!r.order.empty()) j["order"] = r.order;
    if (!r.scores.empty()) j["scores"] = r.scores;
    os << j.dump() << '\n';
  }
}

std::vector<TeachRecord> load_teach_records(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read rankings: " + path.string());
  std::vector<TeachRecord> records;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("qid")) {
      throw FormatError("bad teacher record in " + path.string());
    }
    TeachRecord r;
    r.qid = j["qid"].get<std::string>();
    r.provenance = j.value("provenance", std::string("oracle"));
    r.repaired = j.value("repaired", false);
    r.fallback = j.value("fallback", false);
    if (j.contains("order")) r.order = j["order"].get<std::vector<int>>();
    if (j.contains("scores")) {
      r.scores = j["scores"].get<std::vector<double>>();
    }
    records.push_back(std::move(r));
  }
  return records;
}

teacher::Provenance provenance_from_string(const std::string& s) {
  if (s == "remote") return teacher::Provenance::Remote;
  if (s == "oracle") return teacher::Provenance::Oracle;
  if (s == "bm25") return teacher::Provenance::Bm25;
  if (s == "rouge2") return teacher::Provenance::Rouge2;
  if (s == "rule_based") return teacher::Provenance::RuleBased;
  throw FormatError("unknown provenance: " + s);
}

// Serves stored teacher outputs back to the training loops, so train-ranker
// and train-retriever replay exactly what cmd_teach recorded.
class ReplayTeacher : public teacher::Teacher {
 public:
  explicit ReplayTeacher(std::vector<TeachRecord> records) {
    for (auto& r : records) by_qid_.emplace(r.qid, std::move(r));
  }

  teacher::Provenance provenance() const override {
    return by_qid_.empty()
               ? teacher::Provenance::Oracle
               : provenance_from_string(by_qid_.begin()->second.provenance);
  }

  teacher::TeacherRanking rerank(
      const corpus::QAExample& example,
      const std::vector<corpus::Document>& candidates) override {
    const auto& rec = find(example.qid);
    if (rec.order.size() != candidates.size()) {
      throw IntegrityError("stored ranking for " + example.qid +
                           " does not match candidate count");
    }
    teacher::TeacherRanking out;
    out.qid = rec.qid;
    out.pi.order = rec.order;
    out.provenance = provenance_from_string(rec.provenance);
    out.repaired = rec.repaired;
    out.fallback = rec.fallback;
    return out;
  }

  teacher::TeacherScores score(
      const corpus::QAExample& example,
      const std::vector<corpus::Document>& candidates) override {
    const auto& rec = find(example.qid);
    if (rec.scores.size() != candidates.size()) {
      throw IntegrityError("stored scores for " + example.qid +
                           " do not match candidate count");
    }
    teacher::TeacherScores out;
    out.qid = rec.qid;
    out.scores = rec.scores;
    out.provenance = provenance_from_string(rec.provenance);
    return out;
  }

 private:
  const TeachRecord& find(const std::string& qid) const {
    auto it = by_qid_.find(qid);
    if (it == by_qid_.end()) {
      throw IntegrityError("no stored teacher output for qid " + qid);
    }
    return it->second;
  }

  std::unordered_map<std::string, TeachRecord> by_qid_;
};

// ---------------------------------------------------------------------------
// Shared preparation for the training commands

struct TrainInputs {
  corpus::CorpusIndex index;
  encoder::EncoderModel baseline;
  std::vector<corpus::QAExample> train;
  std::vector<distill::TrainingRecord> records;
};

TrainInputs prepare_training(const fs::path& corpus_path,
                             const fs::path& examples_path,
                             const fs::path& rankings_path,
                             const CommonOpts& o,
                             distill::TeacherSignal signal) {
  TrainInputs in;
  const auto dcfg = o.distill_config();
  in.baseline = encoder::init_model(o.dim, o.vocab_buckets,
                                    derive_seed(o.seed, "init"),
                                    encoder::Role::Retriever);
  in.index = corpus::build_index(corpus::load_corpus(corpus_path), in.baseline,
                                 dcfg.max_len);
  in.train = load_split(examples_path, "train");
  ReplayTeacher replay(load_teach_records(rankings_path));
  in.records = distill::prepare_records(in.train, in.index, in.baseline,
                                        replay, dcfg, signal);
  return in;
}

json common_json(const CommonOpts& o) {
  const auto d = o.distill_config();
  return json{{"seed", o.seed},
              {"dim", o.dim},
              {"vocab_buckets", o.vocab_buckets},
              {"k", d.k},
              {"theta_ranker", d.theta_ranker},
              {"theta_retriever", d.theta_retriever},
              {"lr_ranker", d.lr_ranker},
              {"lr_retriever", d.lr_retriever},
              {"epochs", d.epochs},
              {"batch_size", d.batch_size},
              {"max_len", d.max_len}};
}

// Expands a "--config FILE" of flat key=value lines into option tokens
// placed directly after the subcommand name, so explicit flags (which come
// later and take-last) override file values.
std::vector<std::string> expand_config_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::size_t sub_pos = args.size();
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (sub_pos == args.size() && !args[i].empty() && args[i][0] != '-') {
      sub_pos = i;
    }
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty() || sub_pos == args.size()) return args;

  std::ifstream is(config_path);
  if (!is) throw IoError("cannot read config file: " + config_path);
  std::vector<std::string> injected;
  std::string line;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line without '=': " + line);
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw FormatError("config line with empty key: " + line);
    injected.push_back("--" + key);
    // Multi-valued keys hold space-separated values.
    std::size_t start = 0;
    while (start < value.size()) {
      const auto space = value.find(' ', start);
      const auto token = value.substr(start, space - start);
      if (!token.empty()) injected.push_back(token);
      if (space == std::string::npos) break;
      start = space + 1;
    }
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1,
              injected.begin(), injected.end());
  return args;
}

int dispatch(CLI::App& app, const std::vector<std::string>& args);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Two-stage retriever distillation over a synthetic QA world.\n\n" +
      std::string(kExitCodeHelp)};
  app.require_subcommand(1);
  try {
    return dispatch(app, expand_config_args(argc, argv));
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const EmptyInputError& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kExitInvalidArgument;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return kExitInvalidArgument;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return kExitParse;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return kExitParse;
  } catch (const IntegrityError& e) {
    std::fprintf(stderr, "integrity error: %s\n", e.what());
    return kExitIntegrity;
  } catch (const EndpointError& e) {
    std::fprintf(stderr, "endpoint error (%d): %s\n", e.status(), e.what());
    return kExitTransport;
  } catch (const TransportError& e) {
    std::fprintf(stderr, "transport error: %s\n", e.what());
    return kExitTransport;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInternal;
  }
}

namespace {

int dispatch(CLI::App& app, const std::vector<std::string>& args) {
  // --- synth -------------------------------------------------------------
  auto* synth_cmd =
      app.add_subcommand("synth", "generate the synthetic QA world");
  CommonOpts synth_o;
  synth::SynthConfig scfg;
  add_common(synth_cmd, synth_o, false);
  synth_cmd->add_option("--num-docs", scfg.num_docs)->capture_default_str();
  synth_cmd->add_option("--train", scfg.num_train)->capture_default_str();
  synth_cmd->add_option("--valid", scfg.num_valid)->capture_default_str();
  synth_cmd->add_option("--test", scfg.num_test)->capture_default_str();
  synth_cmd->add_option("--vocab", scfg.vocab_size)->capture_default_str();
  synth_cmd->add_option("--topics", scfg.topics)->capture_default_str();
  synth_cmd->add_option("--doc-len", scfg.doc_len)->capture_default_str();
  synth_cmd->callback([&] {
    scfg.seed = synth_o.seed;
    ensure_out(synth_o.out);
    const auto world = synth::generate(scfg);
    corpus::save_corpus(world.documents, synth_o.out / "corpus.jsonl");
    corpus::save_examples(world.examples, synth_o.out / "examples.jsonl");
    synth::save_latent(world.latent, synth_o.out / "latent.tsv");
    emit_manifest(synth_o, "synth",
                  json{{"seed", scfg.seed},
                       {"num_docs", scfg.num_docs},
                       {"num_train", scfg.num_train},
                       {"num_valid", scfg.num_valid},
                       {"num_test", scfg.num_test},
                       {"vocab_size", scfg.vocab_size},
                       {"topics", scfg.topics},
                       {"doc_len", scfg.doc_len}},
                  {});
    std::printf("wrote %zu documents, %zu examples to %s\n",
                world.documents.size(), world.examples.size(),
                synth_o.out.string().c_str());
  });

  // --- index ---------------------------------------------------------------
  auto* index_cmd = app.add_subcommand(
      "index", "encode the corpus with a seeded baseline encoder");
  CommonOpts index_o;
  fs::path index_corpus;
  add_common(index_cmd, index_o, true);
  index_cmd->add_option("--corpus", index_corpus, "corpus JSONL")->required();
  index_cmd->callback([&] {
    ensure_out(index_o.out);
    const auto model = encoder::init_model(index_o.dim, index_o.vocab_buckets,
                                           derive_seed(index_o.seed, "init"),
                                           encoder::Role::Retriever);
    const auto index = corpus::build_index(corpus::load_corpus(index_corpus),
                                           model, index_o.max_len);
    encoder::save_model(model, index_o.out / "baseline.bin");
    std::ofstream os(index_o.out / "index_stats.json", std::ios::trunc);
    os << json{{"doc_count", index.doc_count()},
               {"dim", index.dim},
               {"avg_doc_length", index.avg_doc_length}}
              .dump(2)
       << '\n';
    emit_manifest(index_o, "index", common_json(index_o), {index_corpus});
    std::printf("indexed %zu documents (dim %u)\n", index.doc_count(),
                index.dim);
  });

  // --- retrieve ------------------------------------------------------------
  auto* retrieve_cmd =
      app.add_subcommand("retrieve", "top-k retrieval over the corpus");
  CommonOpts retrieve_o;
  fs::path r_corpus, r_examples, r_model;
  std::string r_split = "train";
  add_common(retrieve_cmd, retrieve_o, true);
  retrieve_cmd->add_option("--corpus", r_corpus)->required();
  retrieve_cmd->add_option("--examples", r_examples)->required();
  retrieve_cmd->add_option("--model", r_model,
                           "encoder checkpoint; omitted = seeded baseline");
  retrieve_cmd->add_option("--split", r_split, "train | valid | test | all")
      ->capture_default_str();
  retrieve_cmd->callback([&] {
    ensure_out(retrieve_o.out);
    const auto model =
        r_model.empty()
            ? encoder::init_model(retrieve_o.dim, retrieve_o.vocab_buckets,
                                  derive_seed(retrieve_o.seed, "init"),
                                  encoder::Role::Retriever)
            : encoder::load_model(r_model);
    const auto index = corpus::build_index(corpus::load_corpus(r_corpus),
                                           model, retrieve_o.max_len);
    const auto examples = load_split(r_examples, r_split);
    std::vector<corpus::CandidateSet> sets;
    sets.reserve(examples.size());
    for (const auto& ex : examples) {
      sets.push_back(corpus::retrieve_topk(index, model, ex, retrieve_o.k,
                                           retrieve_o.max_len));
    }
    save_candidates(sets, retrieve_o.out / "candidates.jsonl");
    auto cfg = common_json(retrieve_o);
    cfg["split"] = r_split;
    std::vector<fs::path> inputs{r_corpus, r_examples};
    if (!r_model.empty()) inputs.push_back(r_model);
    emit_manifest(retrieve_o, "retrieve", cfg, inputs);
    std::printf("retrieved top-%zu for %zu questions\n", retrieve_o.k,
                sets.size());
  });

  // --- teach -----------------------------------------------------------
  auto* teach_cmd = app.add_subcommand(
      "teach", "query a teacher for every stored candidate set");
  CommonOpts teach_o;
  fs::path t_corpus, t_examples, t_candidates, t_latent;
  std::string t_teacher = "oracle";
  std::string t_signal = "ranking";
  double t_p_swap = 0.0, t_score_noise = 0.0;
  teacher::TeacherEndpointConfig t_endpoint;
  add_common(teach_cmd, teach_o, true);
  teach_cmd->add_option("--corpus", t_corpus)->required();
  teach_cmd->add_option("--examples", t_examples)->required();
  teach_cmd->add_option("--candidates", t_candidates)->required();
  teach_cmd
      ->add_option("--teacher", t_teacher,
                   "oracle | remote | bm25 | rouge2 | rule_based")
      ->capture_default_str();
  teach_cmd->add_option("--latent", t_latent, "latent TSV (oracle only)");
  teach_cmd->add_option("--signal", t_signal, "ranking | scores | both")
      ->capture_default_str();
  teach_cmd->add_option("--p-swap", t_p_swap)->capture_default_str();
  teach_cmd->add_option("--score-noise", t_score_noise)->capture_default_str();
  teach_cmd->add_option("--endpoint", t_endpoint.base_url,
                        "remote teacher base URL");
  teach_cmd->add_option("--model-name", t_endpoint.model)
      ->capture_default_str();
  teach_cmd->add_option("--cache-dir", t_endpoint.cache_dir,
                        "remote response cache directory");
  teach_cmd->add_option("--api-key-env", t_endpoint.api_key_env,
                        "env var holding the API key (never stored)")
      ->capture_default_str();
  teach_cmd->add_option("--timeout", t_endpoint.timeout_seconds,
                        "remote request timeout in seconds")
      ->capture_default_str();
  teach_cmd->add_option("--retry-budget", t_endpoint.retry_budget)
      ->capture_default_str();
  teach_cmd->add_option("--retry-backoff-ms", t_endpoint.retry_backoff_ms)
      ->capture_default_str();
  teach_cmd->callback([&] {
    if (t_signal != "ranking" && t_signal != "scores" && t_signal != "both") {
      throw InvalidArgument("--signal must be ranking, scores, or both");
    }
    ensure_out(teach_o.out);
    const auto baseline = encoder::init_model(
        teach_o.dim, teach_o.vocab_buckets, derive_seed(teach_o.seed, "init"),
        encoder::Role::Retriever);
    const auto index = corpus::build_index(corpus::load_corpus(t_corpus),
                                           baseline, teach_o.max_len);
    std::unordered_map<std::string, corpus::QAExample> by_qid;
    for (auto& ex : load_split(t_examples, "all")) {
      by_qid.emplace(ex.qid, std::move(ex));
    }
    synth::LatentRelevance latent;
    pipeline::ExperimentConfig ecfg;
    ecfg.teacher = t_teacher;
    ecfg.oracle_p_swap = t_p_swap;
    ecfg.oracle_score_noise = t_score_noise;
    ecfg.endpoint = t_endpoint;
    if (t_teacher == "oracle") {
      if (t_latent.empty()) {
        throw IntegrityError("oracle teacher requires --latent");
      }
      latent = synth::load_latent(t_latent);
    }
    auto teach = pipeline::make_teacher(ecfg, index, &latent, teach_o.seed);

    const auto sets = load_candidates(t_candidates);
    std::vector<TeachRecord> records;
    records.reserve(sets.size());
    std::size_t fallbacks = 0, repaired = 0;
    for (const auto& set : sets) {
      auto it = by_qid.find(set.qid);
      if (it == by_qid.end()) {
        throw IntegrityError("candidate qid not in examples: " + set.qid);
      }
      std::vector<corpus::Document> docs;
      docs.reserve(set.docs.size());
      for (const auto& [id, _] : set.docs) docs.push_back(index.doc_by_id(id));
      TeachRecord rec;
      rec.qid = set.qid;
      if (t_signal != "scores") {
        const auto ranking = teach->rerank(it->second, docs);
        if (!ranking.pi.is_valid()) {
          throw IntegrityError("teacher returned an invalid permutation for " +
                               set.qid);
        }
        rec.order = ranking.pi.order;
        rec.provenance = teacher::to_string(ranking.provenance);
        rec.repaired = ranking.repaired;
        rec.fallback = ranking.fallback;
        fallbacks += ranking.fallback ? 1 : 0;
        repaired += ranking.repaired ? 1 : 0;
      }
      if (t_signal != "ranking") {
        const auto scores = teach->score(it->second, docs);
        rec.scores = scores.scores;
        rec.provenance = teacher::to_string(scores.provenance);
      }
      records.push_back(std::move(rec));
    }
    save_teach_records(records, teach_o.out / "rankings.jsonl");

    json stats{{"questions", records.size()},
               {"fallbacks", fallbacks},
               {"repaired", repaired}};
    if (t_teacher == "remote") {
      const auto* remote = dynamic_cast<teacher::RemoteTeacher*>(teach.get());
      const auto s = const_cast<teacher::RemoteTeacher*>(remote)->stats();
      stats["requests"] = s.requests;
      stats["cache_hits"] = s.cache_hits;
      stats["retries"] = s.retries;
    }
    std::ofstream os(teach_o.out / "teach_stats.json", std::ios::trunc);
    os << stats.dump(2) << '\n';

    auto cfg = common_json(teach_o);
    cfg["teacher"] = t_teacher;
    cfg["signal"] = t_signal;
    cfg["p_swap"] = t_p_swap;
    std::vector<fs::path> inputs{t_corpus, t_examples, t_candidates};
    if (!t_latent.empty()) inputs.push_back(t_latent);
    emit_manifest(teach_o, "teach", cfg, inputs);
    std::printf("taught %zu questions (%zu fallbacks, %zu repaired)\n",
                records.size(), fallbacks, repaired);
  });

  // --- train-ranker -------------------------------------------------------
  auto* ranker_cmd = app.add_subcommand(
      "train-ranker", "stage 1: fit the ranker to teacher permutations");
  CommonOpts s1_o;
  fs::path s1_corpus, s1_examples, s1_rankings;
  add_common(ranker_cmd, s1_o, true);
  ranker_cmd->add_option("--corpus", s1_corpus)->required();
  ranker_cmd->add_option("--examples", s1_examples)->required();
  ranker_cmd->add_option("--rankings", s1_rankings)->required();
  ranker_cmd->callback([&] {
    ensure_out(s1_o.out);
    auto in = prepare_training(s1_corpus, s1_examples, s1_rankings, s1_o,
                               distill::TeacherSignal::Ranking);
    auto ranker = in.baseline;
    ranker.role = encoder::Role::Ranker;
    const auto report =
        distill::stage1_train_ranker(in.records, ranker, s1_o.distill_config());
    encoder::save_model(ranker, s1_o.out / "ranker.bin");
    report.write_log(s1_o.out / "stage1_log.json");
    emit_manifest(s1_o, "train-ranker", common_json(s1_o),
                  {s1_corpus, s1_examples, s1_rankings});
    std::printf("stage 1 done: %zu instances, final loss %.4f\n",
                in.records.size(), report.epochs.back().mean_loss);
  });

  // --- train-retriever -----------------------------------------------------
  auto* retr_cmd = app.add_subcommand(
      "train-retriever", "stage 2: distill the frozen ranker into the retriever");
  CommonOpts s2_o;
  fs::path s2_corpus, s2_examples, s2_rankings, s2_ranker;
  add_common(retr_cmd, s2_o, true);
  retr_cmd->add_option("--corpus", s2_corpus)->required();
  retr_cmd->add_option("--examples", s2_examples)->required();
  retr_cmd->add_option("--rankings", s2_rankings)->required();
  retr_cmd->add_option("--ranker", s2_ranker, "stage-1 checkpoint")->required();
  retr_cmd->callback([&] {
    ensure_out(s2_o.out);
    auto in = prepare_training(s2_corpus, s2_examples, s2_rankings, s2_o,
                               distill::TeacherSignal::Ranking);
    const auto ranker = encoder::load_model(s2_ranker);
    auto retriever = in.baseline;
    const auto report = distill::stage2_train_retriever(
        in.records, ranker, retriever, s2_o.distill_config());
    encoder::save_model(retriever, s2_o.out / "retriever.bin");
    report.write_log(s2_o.out / "stage2_log.json");
    emit_manifest(s2_o, "train-retriever", common_json(s2_o),
                  {s2_corpus, s2_examples, s2_rankings, s2_ranker});
    std::printf("stage 2 done: %zu instances, final loss %.4f\n",
                in.records.size(), report.epochs.back().mean_loss);
  });

  // --- direct ----------------------------------------------------------
  auto* direct_cmd = app.add_subcommand(
      "direct", "single-stage ablation: distill teacher scores directly");
  CommonOpts dd_o;
  fs::path dd_corpus, dd_examples, dd_rankings;
  add_common(direct_cmd, dd_o, true);
  direct_cmd->add_option("--corpus", dd_corpus)->required();
  direct_cmd->add_option("--examples", dd_examples)->required();
  direct_cmd->add_option("--rankings", dd_rankings,
                         "teacher output with a scores signal")
      ->required();
  direct_cmd->callback([&] {
    ensure_out(dd_o.out);
    auto in = prepare_training(dd_corpus, dd_examples, dd_rankings, dd_o,
                               distill::TeacherSignal::Scores);
    auto retriever = in.baseline;
    const auto report = distill::direct_distill_train(in.records, retriever,
                                                      dd_o.distill_config());
    encoder::save_model(retriever, dd_o.out / "retriever_direct.bin");
    report.write_log(dd_o.out / "direct_log.json");
    emit_manifest(dd_o, "direct", common_json(dd_o),
                  {dd_corpus, dd_examples, dd_rankings});
    std::printf("direct distillation done: %zu instances, final loss %.4f\n",
                in.records.size(), report.epochs.back().mean_loss);
  });

  // --- eval ------------------------------------------------------------
  auto* eval_cmd =
      app.add_subcommand("eval", "retrieval hit rates on a data split");
  CommonOpts ev_o;
  fs::path ev_corpus, ev_examples, ev_model;
  std::string ev_split = "test";
  std::vector<std::size_t> ev_ks{3, 5, 10};
  add_common(eval_cmd, ev_o, true);
  eval_cmd->add_option("--corpus", ev_corpus)->required();
  eval_cmd->add_option("--examples", ev_examples)->required();
  eval_cmd->add_option("--model", ev_model,
                       "encoder checkpoint; omitted = seeded baseline");
  eval_cmd->add_option("--split", ev_split)->capture_default_str();
  eval_cmd->add_option("--ks", ev_ks, "hit-rate cutoffs")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->capture_default_str();
  eval_cmd->callback([&] {
    ensure_out(ev_o.out);
    const auto model =
        ev_model.empty()
            ? encoder::init_model(ev_o.dim, ev_o.vocab_buckets,
                                  derive_seed(ev_o.seed, "init"),
                                  encoder::Role::Retriever)
            : encoder::load_model(ev_model);
    const auto index = corpus::build_index(corpus::load_corpus(ev_corpus),
                                           model, ev_o.max_len);
    const auto examples = load_split(ev_examples, ev_split);
    const auto report = pipeline::evaluate_retriever(index, model, examples,
                                                     ev_ks, ev_o.max_len);
    std::ofstream os(ev_o.out / "metrics.json", std::ios::trunc);
    os << report.to_json() << '\n';
    auto cfg = common_json(ev_o);
    cfg["split"] = ev_split;
    std::vector<fs::path> inputs{ev_corpus, ev_examples};
    if (!ev_model.empty()) inputs.push_back(ev_model);
    emit_manifest(ev_o, "eval", cfg, inputs);
    std::printf("%s", report.to_table().c_str());
  });

  // --- ablate ----------------------------------------------------------
  auto* ablate_cmd = app.add_subcommand(
      "ablate", "run the full pipeline across one swept axis");
  CommonOpts ab_o;
  fs::path ab_corpus, ab_examples, ab_latent;
  std::string ab_axis;
  std::vector<std::size_t> ab_values;
  std::string ab_teacher = "oracle";
  double ab_p_swap = 0.0;
  std::size_t ab_max_per_category = 200;
  add_common(ablate_cmd, ab_o, true);
  ablate_cmd->add_option("--corpus", ab_corpus)->required();
  ablate_cmd->add_option("--examples", ab_examples)->required();
  ablate_cmd->add_option("--latent", ab_latent)->required();
  ablate_cmd
      ->add_option("--axis", ab_axis, "train_size | list_size | data_category")
      ->required();
  ablate_cmd
      ->add_option("--values", ab_values,
                   "swept values (train sizes or list sizes)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  ablate_cmd->add_option("--teacher", ab_teacher)->capture_default_str();
  ablate_cmd->add_option("--p-swap", ab_p_swap)->capture_default_str();
  ablate_cmd->add_option("--max-per-category", ab_max_per_category)
      ->capture_default_str();
  ablate_cmd->callback([&] {
    ensure_out(ab_o.out);
    synth::SynthWorld world;
    world.documents = corpus::load_corpus(ab_corpus);
    world.examples = load_split(ab_examples, "all");
    world.latent = synth::load_latent(ab_latent);

    pipeline::ExperimentConfig ecfg;
    ecfg.distill = ab_o.distill_config();
    ecfg.dim = ab_o.dim;
    ecfg.vocab_buckets = ab_o.vocab_buckets;
    ecfg.teacher = ab_teacher;
    ecfg.oracle_p_swap = ab_p_swap;

    std::vector<pipeline::SweepRow> rows;
    if (ab_axis == "train_size") {
      if (ab_values.empty()) throw InvalidArgument("--values required");
      rows = pipeline::ablate_train_size(world, ecfg, ab_values);
    } else if (ab_axis == "list_size") {
      if (ab_values.empty()) throw InvalidArgument("--values required");
      rows = pipeline::ablate_list_size(world, ecfg, ab_values);
    } else if (ab_axis == "data_category") {
      rows = pipeline::ablate_data_category(world, ecfg, ab_max_per_category);
    } else {
      throw InvalidArgument("unknown ablation axis: " + ab_axis);
    }
    pipeline::write_sweep(rows, ab_o.out / "sweep.jsonl");
    auto cfg = common_json(ab_o);
    cfg["axis"] = ab_axis;
    cfg["teacher"] = ab_teacher;
    emit_manifest(ab_o, "ablate", cfg, {ab_corpus, ab_examples, ab_latent});
    for (const auto& row : rows) {
      std::printf("%s=%s", row.axis.c_str(), row.value.c_str());
      for (const auto& [k, v] : row.distilled_hr) {
        std::printf("  hr@%zu=%.4f", k, v);
      }
      std::printf("\n");
    }
  });

  app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  return kExitOk;
}

}  // namespace
