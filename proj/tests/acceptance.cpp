// Acceptance harness: one pass/fail line per criterion, nonzero exit when
// any criterion fails. Criteria 1-3 and 10 are exact property suites;
// 4-7 are directional end-to-end runs on the synthetic world; 8 and 9 drive
// the CLI binary (path injected at build time via CLI_BIN).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "idistill/corpus.hpp"
#include "idistill/distill.hpp"
#include "idistill/encoder.hpp"
#include "idistill/eval.hpp"
#include "idistill/numkit.hpp"
#include "idistill/pipeline.hpp"
#include "idistill/seeding.hpp"
#include "idistill/synth.hpp"
#include "idistill/teacher.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace idistill;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", criterion, pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

// --------------------------------------------------------------------------
// Criterion 1: closed-form suite

bool criterion1(std::string& detail) {
  bool ok = true;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);

  // Softmax: normalization and shift invariance on random inputs.
  for (int c = 0; c < 50 && ok; ++c) {
    std::vector<double> s(2 + c % 6);
    for (auto& x : s) x = u(rng);
    const double theta = 0.25 + 0.05 * (c % 10);
    const auto p = numkit::softmax_temp(s, theta);
    const double sum = std::accumulate(p.probs.begin(), p.probs.end(), 0.0);
    ok = ok && std::abs(sum - 1.0) <= 1e-9;
    auto shifted = s;
    for (auto& x : shifted) x += 1.7;
    const auto q = numkit::softmax_temp(shifted, theta);
    for (std::size_t i = 0; i < s.size(); ++i) {
      ok = ok && std::abs(p.probs[i] - q.probs[i]) <= 1e-12;
    }
    ok = ok && numkit::kl_divergence(p, p) <= 1e-12;
    ok = ok && numkit::kl_divergence(p, q) >= -1e-12;
  }
  if (!ok) { detail = "softmax/KL properties"; return false; }

  // ListMLE of constant scores is ln k!.
  for (std::size_t k = 2; k <= 6; ++k) {
    std::vector<double> s(k, 0.37);
    double lnfact = 0.0;
    for (std::size_t j = 2; j <= k; ++j) lnfact += std::log((double)j);
    const double loss = numkit::listmle_loss(s, numkit::Permutation::identity(k));
    if (std::abs(loss - lnfact) > 1e-9) {
      detail = fmt("listmle(const, k=%zu) != ln k!", k);
      return false;
    }
  }

  // Worked constants. The exact losses are 0.720868 / 3.720868; the quoted
  // 5-digit constants 0.72091 / 3.72091 carry ~4e-5 of print rounding, so
  // they are asserted at their own precision while the exact derivation is
  // held to 1e-9 (see the KL and BM25 cases for full-precision checks).
  const std::vector<double> s210{2.0, 1.0, 0.0};
  numkit::Permutation asc;  asc.order = {1, 2, 3};
  numkit::Permutation desc; desc.order = {3, 2, 1};
  const double l1 = numkit::listmle_loss(s210, asc);
  const double l2 = numkit::listmle_loss(s210, desc);
  const double e2 = std::exp(2.0), e1 = std::exp(1.0), e0 = 1.0;
  const double exact1 =
      -std::log(e2 / (e2 + e1 + e0)) - std::log(e1 / (e1 + e0));
  const double exact2 =
      -std::log(e0 / (e2 + e1 + e0)) - std::log(e1 / (e2 + e1));
  if (std::abs(l1 - exact1) > 1e-9 || std::abs(l2 - exact2) > 1e-9 ||
      std::abs(l1 - 0.72091) > 1e-4 || std::abs(l2 - 3.72091) > 1e-4) {
    detail = "listmle worked examples";
    return false;
  }

  numkit::Distribution ph{{0.5, 0.5}}, qh{{0.25, 0.75}};
  const double kl = numkit::kl_divergence(ph, qh);
  const double kl_exact = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  if (std::abs(kl - kl_exact) > 1e-9 || std::abs(kl - 0.14384) > 1e-5) {
    detail = "KL worked example";
    return false;
  }

  // BM25 single-doc case: idf alone, tf factor exactly 1.
  auto model = encoder::init_model(4, 64, 1, encoder::Role::Retriever);
  auto index = corpus::build_index({{1, "apple"}}, model, 128);
  const auto scores = corpus::bm25_scores("apple", {{1, "apple"}}, index);
  if (scores.size() != 1 || std::abs(scores[0] - std::log(4.0 / 3.0)) > 1e-9) {
    detail = "BM25 ln(4/3) case";
    return false;
  }
  detail = "closed forms exact";
  return true;
}

// --------------------------------------------------------------------------
// Criterion 2: gradient suite vs central finite differences

bool criterion2(std::string& detail) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double worst = 0.0;

  for (int c = 0; c < 100; ++c) {
    const std::size_t k = 3 + c % 4;
    std::vector<double> s(k);
    for (auto& x : s) x = u(rng);
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 1);
    std::shuffle(order.begin(), order.end(), rng);
    numkit::Permutation pi;
    pi.order = order;
    const auto grad = numkit::listmle_grad(s, pi);
    const double err = numkit::finite_diff_check(
        [&](std::span<const double> x) {
          return numkit::listmle_loss(x, pi);
        },
        s, grad, 1e-5);
    worst = std::max(worst, err);
  }
  if (worst >= 1e-4) { detail = fmt("listmle grad err %.2e", worst); return false; }

  for (int c = 0; c < 100; ++c) {
    const std::size_t k = 2 + c % 5;
    std::vector<double> ps(k), qs(k);
    for (auto& x : ps) x = u(rng);
    for (auto& x : qs) x = u(rng);
    const double theta = 0.5 + 0.02 * c;
    const auto p = numkit::softmax_temp(ps, 1.0);
    const auto grad = numkit::kl_grad_wrt_q_scores(p, qs, theta);
    const double err = numkit::finite_diff_check(
        [&](std::span<const double> x) {
          return numkit::kl_divergence(p, numkit::softmax_temp(x, theta));
        },
        qs, grad, 1e-5);
    worst = std::max(worst, err);
  }
  if (worst >= 1e-4) { detail = fmt("kl grad err %.2e", worst); return false; }

  for (int c = 0; c < 100; ++c) {
    auto model = encoder::init_model(6, 24, 100 + c, encoder::Role::Ranker);
    std::uniform_int_distribution<std::uint32_t> tok(0, 23);
    encoder::TokenSequence q;
    for (int i = 0; i < 3; ++i) q.ids.push_back(tok(rng));
    std::vector<encoder::TokenSequence> cands(4);
    for (auto& cand : cands) {
      const int len = 1 + (int)(tok(rng) % 4);
      for (int i = 0; i < len; ++i) cand.ids.push_back(tok(rng));
    }
    std::vector<double> upstream(cands.size());
    for (auto& x : upstream) x = u(rng);
    std::vector<double> grad(model.table.size(), 0.0);
    encoder::backward_scores(model, q, cands, upstream, grad);
    const double err = numkit::finite_diff_check(
        [&](std::span<const double> point) {
          encoder::EncoderModel m = model;
          m.table.assign(point.begin(), point.end());
          double total = 0.0;
          for (std::size_t i = 0; i < cands.size(); ++i) {
            total += upstream[i] * encoder::score_pair(m, q, cands[i]);
          }
          return total;
        },
        model.table, grad, 1e-6);
    worst = std::max(worst, err);
  }
  if (worst >= 1e-4) { detail = fmt("encoder grad err %.2e", worst); return false; }
  detail = fmt("max relative error %.2e over 300 cases", worst);
  return true;
}

// --------------------------------------------------------------------------
// Criterion 3: brute-force oracles

bool criterion3(std::string& detail) {
  std::mt19937_64 rng(47);

  // retrieve_topk vs full argsort on 50 random corpora.
  for (int c = 0; c < 50; ++c) {
    std::uniform_int_distribution<std::size_t> nd(10, 1000);
    std::uniform_int_distribution<int> wd(0, 250);
    const std::size_t n = nd(rng);
    std::vector<corpus::Document> docs(n);
    for (std::size_t i = 0; i < n; ++i) {
      docs[i].id = (std::int64_t)(i + 1);
      std::ostringstream os;
      const int len = 1 + wd(rng) % 12;
      for (int j = 0; j < len; ++j) os << "w" << wd(rng) << ' ';
      docs[i].text = os.str();
    }
    auto model = encoder::init_model(8, 128, 1000 + c, encoder::Role::Retriever);
    auto index = corpus::build_index(docs, model, 128);
    corpus::QAExample ex;
    ex.qid = "q";
    ex.question = "w" + std::to_string(wd(rng)) + " w" + std::to_string(wd(rng));
    const std::size_t k = 1 + (std::size_t)(wd(rng) % 10);
    const auto got = corpus::retrieve_topk(index, model, ex, k, 128);

    const auto qt = encoder::tokenize(ex.question, 128, model.vocab_buckets);
    std::vector<std::pair<double, std::int64_t>> all;
    for (const auto& d : docs) {
      const auto dt = encoder::tokenize(d.text, 128, model.vocab_buckets);
      all.emplace_back(encoder::score_pair(model, qt, dt), d.id);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    const std::size_t kk = std::min(k, n);
    if (got.docs.size() != kk) { detail = "topk size"; return false; }
    for (std::size_t i = 0; i < kk; ++i) {
      if (got.docs[i].first != all[i].second) {
        detail = fmt("topk mismatch at corpus %d rank %zu", c, i);
        return false;
      }
    }
  }

  // ListMLE permutation-optimality: the minimizing permutation is the
  // descending-score order, verified by enumerating all k! candidates.
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (std::size_t k = 2; k <= 5; ++k) {
    for (int c = 0; c < 20; ++c) {
      std::vector<double> s(k);
      for (auto& x : s) x = u(rng);
      std::sort(s.begin(), s.end());
      for (std::size_t i = 1; i < k; ++i) {
        if (s[i] - s[i - 1] < 1e-6) s[i] = s[i - 1] + 1e-3;  // force distinct
      }
      std::shuffle(s.begin(), s.end(), rng);
      std::vector<int> order(k);
      std::iota(order.begin(), order.end(), 1);
      double best = 1e300;
      std::vector<int> best_order;
      do {
        numkit::Permutation pi;
        pi.order = order;
        const double loss = numkit::listmle_loss(s, pi);
        if (loss < best) { best = loss; best_order = order; }
      } while (std::next_permutation(order.begin(), order.end()));
      const auto expect = eval::perm_from_score_vector(s);
      if (best_order != expect.order) {
        detail = fmt("listmle optimality k=%zu", k);
        return false;
      }
    }
  }

  // Parser round-trip, exhaustive over every permutation of sizes 2..6.
  for (std::size_t k = 2; k <= 6; ++k) {
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 1);
    do {
      numkit::Permutation pi;
      pi.order = order;
      const auto parsed =
          teacher::parse_rerank_response(teacher::render_ranking(pi), k);
      if (parsed.pi.order != order || parsed.repaired || parsed.fallback) {
        detail = fmt("parser round trip k=%zu", k);
        return false;
      }
    } while (std::next_permutation(order.begin(), order.end()));
  }
  detail = "argsort, enumeration, and parser oracles agree";
  return true;
}

// --------------------------------------------------------------------------
// Criteria 4-7: end-to-end synthetic runs

pipeline::ExperimentConfig experiment_config() {
  pipeline::ExperimentConfig cfg;
  cfg.dim = 384;
  cfg.distill.theta_ranker = 0.01;
  cfg.distill.theta_retriever = 0.01;
  cfg.distill.lr_ranker = 1e-3;
  cfg.distill.lr_retriever = 1e-3;
  return cfg;  // k=5, epochs=5, batch=20, seed=42 per DistillConfig defaults
}

bool criterion4(const synth::SynthWorld& world,
                pipeline::ExperimentOutcome& out, std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  out = pipeline::run_experiment(world, experiment_config(),
                                 pipeline::Mode::Intermediate);
  const double secs = seconds_since(t0);
  const double gap = out.distilled_hr[5] - out.baseline_hr[5];
  detail = fmt("HR@5 %.3f -> %.3f (gap %+.3f >= 0.10), spearman %.3f >= 0.8, "
               "%zu instances, %.0fs < 300s",
               out.baseline_hr[5], out.distilled_hr[5], gap,
               out.ranker_mean_spearman, out.train_instances, secs);
  return gap >= 0.10 && out.ranker_mean_spearman >= 0.8 &&
         out.train_instances == 1000 && secs < 300.0;
}

bool criterion5(const synth::SynthWorld& world, std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  auto noisy = experiment_config();
  noisy.oracle_p_swap = 0.2;
  const auto inter =
      pipeline::run_experiment(world, noisy, pipeline::Mode::Intermediate);
  auto direct_cfg = experiment_config();
  direct_cfg.oracle_score_noise = 0.1;
  const auto direct =
      pipeline::run_experiment(world, direct_cfg, pipeline::Mode::Direct);
  const double secs = seconds_since(t0);
  detail = fmt("intermediate HR@5 %.3f >= direct %.3f - 0.01, %.0fs < 600s",
               inter.distilled_hr.at(5), direct.distilled_hr.at(5), secs);
  return inter.distilled_hr.at(5) >= direct.distilled_hr.at(5) - 0.01 &&
         secs < 600.0;
}

bool criterion6(const synth::SynthWorld& world, std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  auto k3 = experiment_config();
  k3.distill.k = 3;
  auto k10 = experiment_config();
  k10.distill.k = 10;
  const auto r3 =
      pipeline::run_experiment(world, k3, pipeline::Mode::Intermediate);
  const auto r10 =
      pipeline::run_experiment(world, k10, pipeline::Mode::Intermediate);
  const double secs = seconds_since(t0);
  detail = fmt("HR@5 with k=10 %.3f >= k=3 %.3f - 0.02, %.0fs < 600s",
               r10.distilled_hr.at(5), r3.distilled_hr.at(5), secs);
  return r10.distilled_hr.at(5) >= r3.distilled_hr.at(5) - 0.02 &&
         secs < 600.0;
}

bool criterion7(const synth::SynthWorld& world,
                const pipeline::ExperimentOutcome& full, std::string& detail) {
  const auto r50 = pipeline::run_experiment(
      world, experiment_config(), pipeline::Mode::Intermediate, 50);
  const auto r200 = pipeline::run_experiment(
      world, experiment_config(), pipeline::Mode::Intermediate, 200);
  const double h50 = r50.distilled_hr.at(5);
  const double h200 = r200.distilled_hr.at(5);
  const double h1000 = full.distilled_hr.at(5);
  detail = fmt("HR@5 monotone within 0.02: %.3f (50) -> %.3f (200) -> %.3f "
               "(1000)",
               h50, h200, h1000);
  return h200 >= h50 - 0.02 && h1000 >= h200 - 0.02;
}

// --------------------------------------------------------------------------
// Criterion 8: determinism across two CLI pipeline runs

bool run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd =
      "cd '" + dir.string() + "' && '" + CLI_BIN + "' " + args + " >/dev/null";
  return std::system(cmd.c_str()) == 0;
}

bool run_full_pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string train =
      "--theta 0.01 --lr-ranker 0.001 --lr-retriever 0.001 --epochs 2 "
      "--dim 64 --seed 42";
  return run_cli(dir,
                 "synth --num-docs 400 --train 100 --valid 20 --test 60 "
                 "--topics 16 --seed 42 --out w") &&
         run_cli(dir,
                 "retrieve --corpus w/corpus.jsonl --examples w/examples.jsonl "
                 "--split train --k 5 --seed 42 --out ret") &&
         run_cli(dir,
                 "teach --corpus w/corpus.jsonl --examples w/examples.jsonl "
                 "--candidates ret/candidates.jsonl --teacher oracle "
                 "--latent w/latent.tsv --seed 42 --out teach") &&
         run_cli(dir, "train-ranker --corpus w/corpus.jsonl --examples "
                      "w/examples.jsonl --rankings teach/rankings.jsonl " +
                          train + " --out s1") &&
         run_cli(dir, "train-retriever --corpus w/corpus.jsonl --examples "
                      "w/examples.jsonl --rankings teach/rankings.jsonl "
                      "--ranker s1/ranker.bin " +
                          train + " --out s2") &&
         run_cli(dir,
                 "eval --corpus w/corpus.jsonl --examples w/examples.jsonl "
                 "--model s2/retriever.bin --split test --dim 64 --seed 42 "
                 "--out ev");
}

bool criterion8(std::string& detail) {
  const fs::path a = fs::current_path() / "acceptance_run_a";
  const fs::path b = fs::current_path() / "acceptance_run_b";
  if (!run_full_pipeline(a) || !run_full_pipeline(b)) {
    detail = "pipeline command failed";
    return false;
  }
  const std::vector<std::string> artifacts{
      "s1/ranker.bin",      "s2/retriever.bin",  "ev/metrics.json",
      "w/manifest.json",    "ret/manifest.json", "teach/manifest.json",
      "s1/manifest.json",   "s2/manifest.json",  "ev/manifest.json",
      "w/corpus.jsonl",     "w/latent.tsv",      "teach/rankings.jsonl"};
  for (const auto& rel : artifacts) {
    if (pipeline::file_digest(a / rel) != pipeline::file_digest(b / rel)) {
      detail = "digest mismatch: " + rel;
      return false;
    }
  }
  detail = fmt("%zu artifacts bit-identical across seeded reruns",
               artifacts.size());
  return true;
}

// --------------------------------------------------------------------------
// Criterion 9: teacher robustness against a 20%-malformed mock endpoint

bool criterion9(std::string& detail) {
  // A prompt is permanently malformed when its hash lands in a 20% bucket,
  // so retries see the same garbage and must fall back; the expected
  // fallback count is the number of distinct malformed prompts.
  httplib::Server server;
  std::mutex mu;
  std::set<std::string> malformed, total;
  server.Post("/chat/completions", [&](const httplib::Request& req,
                                       httplib::Response& res) {
    const auto body = json::parse(req.body);
    const std::string prompt =
        body["messages"][0]["content"].get<std::string>();
    const bool bad = encoder::fnv1a64(prompt) % 5 == 0;
    {
      std::lock_guard lock(mu);
      total.insert(prompt);
      if (bad) malformed.insert(prompt);
    }
    const std::string content =
        bad ? "I am sorry, I cannot rank these documents."
            : "Document2 > Document1 > Document3 > Document4 > Document5";
    res.set_content(
        json{{"choices",
              json::array({json{{"message", json{{"content", content}}}}})}}
            .dump(),
        "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  if (port <= 0) { detail = "mock endpoint failed to bind"; return false; }
  std::thread listener([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  setenv("TEACHER_API_KEY", "acceptance-test-key", 1);
  const fs::path dir = fs::current_path() / "acceptance_run_a";
  const bool cli_ok = run_cli(
      dir, "teach --corpus w/corpus.jsonl --examples w/examples.jsonl "
           "--candidates ret/candidates.jsonl --teacher remote --endpoint "
           "http://127.0.0.1:" +
               std::to_string(port) +
               " --cache-dir cache --retry-backoff-ms 1 --out teach_remote");
  server.stop();
  listener.join();
  if (!cli_ok) { detail = "cmd_teach exited nonzero"; return false; }

  // Every stored ranking must be a valid permutation; stored fallback flags
  // and the reported count must both equal the number of malformed prompts.
  std::ifstream is(dir / "teach_remote/rankings.jsonl");
  std::string line;
  std::size_t records = 0, stored_fallbacks = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    numkit::Permutation pi;
    pi.order = j["order"].get<std::vector<int>>();
    if (!pi.is_valid()) { detail = "invalid stored permutation"; return false; }
    stored_fallbacks += j["fallback"].get<bool>() ? 1 : 0;
    ++records;
  }
  std::ifstream stats_in(dir / "teach_remote/teach_stats.json");
  const auto stats = json::parse(stats_in);
  const auto reported = stats["fallbacks"].get<std::size_t>();

  detail = fmt("%zu rankings all valid; %zu/%zu prompts malformed; "
               "fallbacks reported %zu, stored %zu, expected %zu",
               records, malformed.size(), total.size(), reported,
               stored_fallbacks, malformed.size());
  return records == 100 && reported == malformed.size() &&
         stored_fallbacks == malformed.size() && !malformed.empty();
}

// --------------------------------------------------------------------------
// Criterion 10: metric worked examples within 1e-9

bool criterion10(std::string& detail) {
  if (eval::exact_match("The Eiffel Tower", {"eiffel tower"}) != 1 ||
      std::abs(eval::f1("The Eiffel Tower", {"eiffel tower"}) - 1.0) > 1e-9) {
    detail = "normalization EM/F1 case";
    return false;
  }
  if (eval::exact_match("paris france", {"paris"}) != 0 ||
      std::abs(eval::f1("paris france", {"paris"}) - 2.0 / 3.0) > 1e-9) {
    detail = "2/3 F1 case";
    return false;
  }
  if (std::abs(eval::f1("alpha beta", {"gamma"})) > 1e-9) {
    detail = "disjoint-token case";
    return false;
  }

  numkit::Permutation a, b;
  a.order = {1, 2, 3, 4, 5};
  b.order = {1, 3, 2, 4, 5};
  if (std::abs(eval::spearman(a, b) - 0.9) > 1e-9) {
    detail = "rho=0.9 case";
    return false;
  }

  // 4 questions, answer present in the candidate docs for exactly 2.
  std::vector<corpus::Document> docs{{1, "alpha one"},
                                     {2, "beta two"},
                                     {3, "gamma"},
                                     {4, "delta"},
                                     {5, "epsilon"}};
  auto model = encoder::init_model(4, 64, 3, encoder::Role::Retriever);
  auto index = corpus::build_index(docs, model, 128);
  std::vector<corpus::QAExample> examples;
  std::vector<corpus::CandidateSet> results;
  const std::vector<std::vector<std::string>> answers{
      {"one"}, {"two"}, {"zzz"}, {"yyy"}};
  for (std::size_t i = 0; i < 4; ++i) {
    corpus::QAExample ex;
    ex.qid = "q" + std::to_string(i);
    ex.question = "irrelevant";
    ex.answers = answers[i];
    ex.split = "test";
    examples.push_back(ex);
    corpus::CandidateSet set;
    set.qid = ex.qid;
    for (const auto& d : docs) set.docs.emplace_back(d.id, 0.0);
    results.push_back(std::move(set));
  }
  const double hr = eval::hit_rate(results, examples, index, 5);
  if (std::abs(hr - 0.5) > 1e-9) {
    detail = fmt("HR@5 case gave %.6f", hr);
    return false;
  }
  detail = "EM/F1/Spearman/HitRate worked examples exact";
  return true;
}

}  // namespace

int main() {
  std::string detail;
  auto timed = [&](int n, auto&& fn, double limit) {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = fn(detail);
    const double secs = seconds_since(t0);
    if (limit > 0.0 && secs >= limit) {
      pass = false;
      detail += fmt(" [over %.0fs budget: %.1fs]", limit, secs);
    }
    report(n, pass, detail);
  };

  timed(1, criterion1, 1.0);
  timed(2, criterion2, 10.0);
  timed(3, criterion3, 30.0);

  const auto world = synth::generate(synth::SynthConfig{});
  pipeline::ExperimentOutcome full;
  report(4, criterion4(world, full, detail), detail);
  report(5, criterion5(world, detail), detail);
  report(6, criterion6(world, detail), detail);
  report(7, criterion7(world, full, detail), detail);
  report(8, criterion8(detail), detail);
  report(9, criterion9(detail), detail);
  report(10, criterion10(detail), detail);

  if (g_failures == 0) {
    std::printf("all 10 acceptance criteria passed\n");
  } else {
    std::printf("%d acceptance criteria FAILED\n", g_failures);
  }
  return g_failures == 0 ? 0 : 1;
}
