// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "qfs/binary_io.hpp"
#include "qfs/embeddings.hpp"
#include "qfs/log.hpp"
#include "qfs/metrics.hpp"
#include "qfs/neural.hpp"
#include "qfs/pipeline.hpp"
#include "qfs/retrieval.hpp"

using namespace qfs;
using corpus::DocumentCollection;
using corpus::DocumentRecord;
using corpus::QuestionRecord;
using corpus::QuestionType;
using corpus::SnippetSpan;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Records the first failed expectation; later ones only count.
class Check {
  public:
    void expect(bool ok, const std::string& what)
    {
        if (!ok) {
            if (failures_ == 0) {
                first_ = what;
            }
            ++failures_;
        }
    }
    Outcome done(std::string detail) const
    {
        if (failures_ == 0) {
            return {true, std::move(detail)};
        }
        return {false, first_ + " (" + std::to_string(failures_) + " failed checks)"};
    }

  private:
    std::size_t failures_ = 0;
    std::string first_;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string join(const std::vector<std::string>& toks)
{
    std::string out;
    for (const auto& t : toks) {
        out += (out.empty() ? "" : " ") + t;
    }
    return out;
}

DocumentRecord abstract_only(std::string id, std::string text)
{
    return {std::move(id), {{"abstract", std::move(text)}}};
}

// 1 -----------------------------------------------------------------------

Outcome rouge_oracle()
{
    Check c;
    Rng rng(1001);
    auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        auto a = oracle::random_tokens(rng, 12, 8);
        auto b = oracle::random_tokens(rng, 12, 8);
        double d = std::abs(metrics::rouge_su4_f1(join(a), join(b)).f1 - oracle::su_f1(a, b));
        worst = std::max(worst, d);
    }
    double secs = seconds_since(t0);
    c.expect(worst < 1e-12, "max |delta| " + fmt("%.3g", worst));
    c.expect(secs < 5.0, "runtime " + fmt("%.2f s", secs));
    return c.done("1000 pairs, max |delta| " + fmt("%.3g", worst) + ", " + fmt("%.2f s", secs));
}

// 2 -----------------------------------------------------------------------

Outcome gradients()
{
    Check c;
    auto t0 = std::chrono::steady_clock::now();
    double worst_nnc = 0.0, worst_pooled = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        auto nnc = nn::NncParams::zeros(4, 3, 5);
        nn::fill_uniform(nnc.blocks(), rng, 0.3);
        nn::NncSample s{oracle::random_matrix(rng, 3 + rng.below(3), 4), oracle::random_matrix(rng, 2 + rng.below(3), 4),
                        nn::position_feature(seed % 4), static_cast<int>(seed % 2)};
        auto r = nn::grad_check(nnc, s);
        c.expect(r.n_params == nn::parameter_count(nn::ModelParams(nnc)), "nnc parameters not all checked");
        worst_nnc = std::max(worst_nnc, r.max_error);

        auto pooled = nn::PooledParams::zeros(6, 5);
        nn::fill_uniform(pooled.blocks(), rng, 0.3);
        nn::PooledSample ps{oracle::random_matrix(rng, 6, 1), nn::position_feature(seed % 3),
                            static_cast<int>((seed + 1) % 2)};
        auto pr = nn::grad_check(pooled, ps);
        c.expect(pr.n_params == nn::parameter_count(nn::ModelParams(pooled)), "pooled parameters not all checked");
        worst_pooled = std::max(worst_pooled, pr.max_error);
    }
    double secs = seconds_since(t0);
    c.expect(worst_nnc < 1e-4, "nnc max relative error " + fmt("%.3g", worst_nnc));
    c.expect(worst_pooled < 1e-4, "pooled max relative error " + fmt("%.3g", worst_pooled));
    c.expect(secs < 60.0, "runtime " + fmt("%.2f s", secs));
    return c.done("20 seeds, nnc " + fmt("%.3g", worst_nnc) + ", pooled " + fmt("%.3g", worst_pooled) + ", " +
                  fmt("%.2f s", secs));
}

// 3 -----------------------------------------------------------------------

std::vector<std::string> argsort(const std::vector<std::string>& ids, const std::vector<double>& scores)
{
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : ids[a] < ids[b];
    });
    std::vector<std::string> out;
    for (auto i : order) {
        out.push_back(ids[i]);
    }
    return out;
}

Outcome retrieval_endpoints()
{
    Check c;
    Rng rng(303);
    const std::uint32_t dim = 8;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<DocumentRecord> recs;
        for (int i = 0; i < 50; ++i) {
            char id[16];
            std::snprintf(id, sizeof id, "doc%02d", i);
            recs.push_back(abstract_only(id, join(oracle::random_tokens(rng, 25, 15)) + " common"));
        }
        DocumentCollection docs(recs);
        auto index = retrieval::InvertedIndex::build(docs);
        retrieval::DenseStore dense(dim);
        std::vector<std::string> ids;
        for (const auto& d : docs) {
            std::vector<float> v(dim);
            for (auto& x : v) {
                x = static_cast<float>(rng.uniform(-1, 1));
            }
            dense.add(d.id, v);
        }
        std::vector<float> qv(dim);
        for (auto& x : qv) {
            x = static_cast<float>(rng.uniform(-1, 1));
        }
        auto query = oracle::random_tokens(rng, 4, 15);
        std::vector<double> cos;
        for (std::size_t i = 0; i < index.n_docs(); ++i) {
            ids.push_back(index.doc_id(i));
            cos.push_back(std::max(0.0, retrieval::dense_cosine(*dense.find(ids.back()), qv)));
        }
        auto bm = index.score_all(query);
        c.expect(retrieval::doc_ids(retrieval::nir_search(index, dense, query, qv, 50, 1.0)) == argsort(ids, bm),
                 "lambda=1 differs from the BM25 argsort");
        c.expect(retrieval::doc_ids(retrieval::nir_search(index, dense, query, qv, 50, 0.0)) == argsort(ids, cos),
                 "lambda=0 differs from the cosine argsort");

        auto pool = retrieval::doc_ids(retrieval::bm25_search(index, query, 5));
        if (pool.size() < 5) {
            continue;
        }
        for (double lambda : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            for (const auto& d : retrieval::rerank_top(index, dense, query, qv, 5, lambda, 5)) {
                c.expect(std::find(pool.begin(), pool.end(), d.doc_id) != pool.end(),
                         "rerank_top emitted " + d.doc_id + " outside the BM25 pool");
            }
        }
    }
    return c.done("20 synthetic 50-document corpora, both endpoints exact, rerank inside pool of 5");
}

// 4 -----------------------------------------------------------------------

Outcome bm25_hand_check()
{
    Check c;
    DocumentCollection docs({abstract_only("a", "apple"), abstract_only("b", "banana")});
    auto index = retrieval::InvertedIndex::build(docs);
    std::vector<std::string> query{"apple"};
    auto scores = index.score_all(query);
    double expected = std::log(2.0);
    c.expect(std::abs(scores[0] - expected) < 1e-6, "score " + fmt("%.9f", scores[0]));
    c.expect(scores[1] == 0.0, "non-matching document scored");
    c.expect(std::abs(oracle::bm25_term(2, 1, 1, 1, 1, 1.2, 0.75) - expected) < 1e-12, "oracle disagrees");
    return c.done("score " + fmt("%.7f", scores[0]) + " vs ln 2 = " + fmt("%.7f", expected));
}

// 5 -----------------------------------------------------------------------

std::vector<std::size_t> expected_top(const std::vector<double>& scores, std::size_t n)
{
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    idx.resize(std::min(n, idx.size()));
    std::sort(idx.begin(), idx.end());
    return idx;
}

Outcome pipeline_rules()
{
    Check c;
    Rng rng(505);
    AnswerLengthTable table;
    const std::map<QuestionType, std::size_t> lengths{
        {QuestionType::Summary, 6}, {QuestionType::Factoid, 2}, {QuestionType::YesNo, 2}, {QuestionType::List, 3}};

    for (int trial = 0; trial < 50; ++trial) {
        std::vector<pipeline::ScoredSentence> cands;
        std::vector<double> scores;
        for (std::size_t i = 0; i < 9; ++i) {
            scores.push_back(static_cast<double>(rng.below(6)));
            cands.push_back({"S" + std::to_string(i) + ".", {}, i, scores.back()});
        }
        for (const auto& [type, n] : lengths) {
            std::string expect;
            for (auto i : expected_top(scores, n)) {
                expect += (expect.empty() ? "" : " ") + cands[i].text;
            }
            c.expect(table(type) == n, "table entry for " + std::string(corpus::to_string(type)));
            c.expect(pipeline::assemble_answer(type, cands, table) == expect,
                     "assemble_answer for " + std::string(corpus::to_string(type)));
        }
    }

    // Snippet strategies over three ranked documents.
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<DocumentRecord> recs;
        std::vector<std::vector<std::string>> sentences;
        for (int d = 0; d < 3; ++d) {
            std::vector<std::string> s;
            std::string text;
            for (std::uint64_t k = 0, n = 2 + rng.below(5); k < n; ++k) {
                s.push_back(fixture::sentence(rng, 2 + rng.below(5), 9));
                text += (text.empty() ? "" : " ") + s.back();
            }
            recs.push_back(abstract_only("d" + std::to_string(d), text));
            sentences.push_back(s);
        }
        DocumentCollection docs(recs);
        std::vector<std::string> ranked{"d2", "d0", "d1"};
        QuestionRecord q{"q", fixture::sentence(rng, 3, 9), QuestionType::Summary, {}, {}, {}};

        std::vector<std::vector<std::string>> flat_tokens;
        std::vector<double> model_scores;
        for (const auto& id : ranked) {
            for (const auto& s : sentences[static_cast<std::size_t>(id[1] - '0')]) {
                flat_tokens.push_back(text::tokens(s));
                model_scores.push_back(static_cast<double>(rng.below(4)));
            }
        }
        pipeline::FunctionScorer scorer(
            [&](const QuestionRecord&, const pipeline::Candidate& cand) { return model_scores[cand.position]; });

        std::vector<std::string> expect_cos, expect_model;
        std::size_t offset = 0;
        for (const auto& id : ranked) {
            const auto& s = sentences[static_cast<std::size_t>(id[1] - '0')];
            std::vector<double> cos, mod;
            for (std::size_t k = 0; k < s.size(); ++k) {
                cos.push_back(oracle::tfidf_cosine(flat_tokens, text::tokens(q.body), flat_tokens[offset + k]));
                mod.push_back(model_scores[offset + k]);
            }
            for (auto k : expected_top(cos, 3)) {
                expect_cos.push_back(s[k]);
            }
            for (auto k : expected_top(mod, 3)) {
                expect_model.push_back(s[k]);
            }
            offset += s.size();
        }
        auto texts = [](const std::vector<SnippetSpan>& spans) {
            std::vector<std::string> out;
            for (const auto& sp : spans) {
                out.push_back(sp.text);
            }
            return out;
        };
        c.expect(texts(pipeline::snip_cosine(q, ranked, docs)) == expect_cos, "snip_cosine selection");
        c.expect(texts(pipeline::snip_model(q, ranked, docs, scorer)) == expect_model, "snip_model selection");
    }

    // Caps over 25 matching documents.
    std::vector<DocumentRecord> many;
    for (int i = 0; i < 25; ++i) {
        many.push_back(abstract_only("m" + std::to_string(i), "Alpha " + std::to_string(i) + ". Alpha beta. Alpha."));
    }
    DocumentCollection docs(many);
    auto index = retrieval::InvertedIndex::build(docs);
    pipeline::ConstantScorer constant;
    pipeline::Resources res;
    res.documents = &docs;
    res.index = &index;
    res.answer_scorer = &constant;
    QuestionRecord q{"q", "alpha", QuestionType::Summary, {}, {}, {}};
    PipelineConfig config;
    auto result = pipeline::answer_question(q, config, res);
    c.expect(result.documents.size() == 10, "document cap: " + std::to_string(result.documents.size()));
    c.expect(result.snippets.size() == 10, "snippet cap: " + std::to_string(result.snippets.size()));
    return c.done("answer lengths 6/2/2/3, top-3 per document in both strategies, caps 10/10");
}

// 6 -----------------------------------------------------------------------

Outcome label_rule()
{
    Check c;
    auto qs = fixture::synthetic_questions(300, 606);
    auto questions = qs.questions();
    Rng rng(6);
    std::set<std::string> copied;
    for (std::size_t i = 0; i < questions.size(); i += 2) {
        auto& q = questions[i];
        q.ideal_answers = {q.gold_snippets[rng.below(q.gold_snippets.size())].text};
        copied.insert(q.id);
    }
    corpus::QuestionSet set(questions);
    auto labels = pipeline::generate_labels(set);
    std::map<std::string, std::size_t> n_cand, n_pos;
    for (const auto& ex : labels) {
        ++n_cand[ex.question_id];
        n_pos[ex.question_id] += static_cast<std::size_t>(ex.label);
        const auto& q = *set.find(ex.question_id);
        if (copied.contains(q.id) && ex.sentence_text == q.ideal_answers[0]) {
            c.expect(ex.label == 1, "ideal-answer copy not positive in " + q.id);
        }
    }
    for (const auto& q : set) {
        c.expect(n_cand[q.id] == q.gold_snippets.size(), "candidate count for " + q.id);
        c.expect(n_pos[q.id] == std::min<std::size_t>(5, n_cand[q.id]), "positive count for " + q.id);
    }
    return c.done(std::to_string(set.size()) + " questions, " + std::to_string(labels.size()) +
                  " candidates, positives = min(5, n) everywhere");
}

// 7 -----------------------------------------------------------------------

Outcome learning_sanity()
{
    Check c;
    Rng rng(707);
    std::vector<nn::PooledSample> data;
    for (std::size_t i = 0; i < 64; ++i) {
        int label = static_cast<int>(i % 2);
        double x = rng.uniform(-1, 1);
        double margin = rng.uniform(0.5, 1.5);
        data.push_back({Eigen::Vector2d(x, -x + (label == 1 ? margin : -margin)), nn::position_feature(i % 5), label});
    }
    auto cfg = nn::TrainConfig::pooled_defaults();
    cfg.epochs = 200;
    cfg.batch_size = 8;
    cfg.dropout_rate = 0.0;
    cfg.learning_rate = 1e-3;
    cfg.seed = 7;
    auto a = nn::train_pooled(data, cfg);
    auto b = nn::train_pooled(data, cfg);
    const auto& pa = std::get<nn::PooledParams>(a.params);
    std::size_t reached = 0;
    double acc = nn::accuracy(pa, data);
    c.expect(acc == 1.0, "training accuracy " + fmt("%.4f", acc));
    c.expect(a.loss_history.size() == 200 && a.loss_history[9] < a.loss_history[0], "epoch-10 loss not below epoch 1");
    c.expect(nn::serialize_params(a.params, cfg.seed) == nn::serialize_params(b.params, cfg.seed),
             "identical seeds gave different parameters");
    // First epoch at which the training set is fully separated.
    for (std::size_t e = 1; e <= 200 && reached == 0; e *= 2) {
        auto short_cfg = cfg;
        short_cfg.epochs = e;
        if (nn::accuracy(std::get<nn::PooledParams>(nn::train_pooled(data, short_cfg).params), data) == 1.0) {
            reached = e;
        }
    }
    return c.done("accuracy " + fmt("%.2f", acc) + " (100% by epoch " + std::to_string(reached) + "), loss " +
                  fmt("%.4f", a.loss_history[0]) + " -> " + fmt("%.4f", a.loss_history[9]) +
                  " over 10 epochs, bit-identical reruns");
}

// 8, 9 --------------------------------------------------------------------

const corpus::QuestionSet& cv_fixture()
{
    static const auto qs = fixture::synthetic_questions(3742, 808);
    return qs;
}

Outcome cross_validation()
{
    Check c;
    const auto& qs = cv_fixture();
    auto folds = pipeline::make_folds(qs.size(), 10, 808);
    std::vector<std::size_t> all;
    for (const auto& f : folds) {
        c.expect(f.size() == 374 || f.size() == 375, "fold size " + std::to_string(f.size()));
        all.insert(all.end(), f.begin(), f.end());
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(qs.size());
    std::iota(expect.begin(), expect.end(), 0);
    c.expect(all == expect, "folds are not a partition");

    pipeline::CvOptions options{10, 808, {}};
    auto oracle = pipeline::cross_validate(qs, pipeline::oracle_factory(), options);
    auto constant = pipeline::cross_validate(qs, pipeline::constant_factory(), options);
    std::set<std::string> seen;
    for (const auto& f : oracle.folds) {
        c.expect(f.test_ids.size() == 374 || f.test_ids.size() == 375, "report fold size");
        seen.insert(f.test_ids.begin(), f.test_ids.end());
    }
    c.expect(seen.size() == qs.size(), "report folds do not cover all questions");
    c.expect(oracle.mean_su4_f1 >= constant.mean_su4_f1, "oracle below constant");
    return c.done("3742 questions, fold sizes 374/375 disjoint and covering, oracle " +
                  fmt("%.4f", oracle.mean_su4_f1) + " >= constant " + fmt("%.4f", constant.mean_su4_f1));
}

Outcome protocol_statement()
{
    Check c;
    std::printf("       The reference SU4-F1 figures (cross-validated 0.2779 to 0.2875, and the batch\n"
                "       submission scores) need the official challenge data and pretrained encoder\n"
                "       embeddings. They are not reproduced here. Supplying those files to\n"
                "       'qfs cv --k 10 --scorer pooled --embeddings FILE.cemb' runs the same protocol.\n");
    const auto& qs = cv_fixture();
    auto report = pipeline::cross_validate(qs, pipeline::constant_factory(), {10, 0, {}});
    std::istringstream lines(report.to_text());
    for (std::string line; std::getline(lines, line);) {
        std::printf("       %s\n", line.c_str());
    }
    c.expect(report.folds.size() == 10, "protocol did not run 10 folds");
    c.expect(std::isfinite(report.mean_su4_f1), "mean SU4-F1 not finite");
    return c.done("10-fold protocol recomputed on the synthetic fixture, mean SU4-F1 " +
                  fmt("%.4f", report.mean_su4_f1) + "; reference figures not reproduced");
}

// 10 ----------------------------------------------------------------------

Outcome round_trips()
{
    Check c;
    Rng rng(1010);
    fixture::TempDir dir;
    std::size_t n_cemb = 0, n_dvec = 0, n_qfsm = 0;
    for (int iter = 0; iter < 200; ++iter) {
        const auto dim = static_cast<std::uint32_t>(1 + rng.below(16));
        std::vector<embed::ContextEmbeddingRecord> recs(1 + rng.below(4));
        for (std::size_t r = 0; r < recs.size(); ++r) {
            auto n = static_cast<Eigen::Index>(1 + rng.below(12));
            recs[r].pair_id = embed::make_pair_id("q" + std::to_string(iter), r);
            recs[r].tokens = embed::FloatMatrix(n, dim);
            for (Eigen::Index i = 0; i < recs[r].tokens.size(); ++i) {
                recs[r].tokens.data()[i] = std::bit_cast<float>(static_cast<std::uint32_t>(rng.next()));
            }
            recs[r].sentence_mask.resize(static_cast<std::size_t>(n));
            for (std::size_t k = 0; k < recs[r].sentence_mask.size(); ++k) {
                recs[r].sentence_mask[k] = rng.below(2) == 1;
            }
            recs[r].sentence_mask[rng.below(recs[r].sentence_mask.size())] = true;
        }
        embed::write_context_embeddings(dir.file("a.cemb"), recs, dim);
        auto back = embed::read_context_embeddings(dir.file("a.cemb"));
        bool same = back.size() == recs.size();
        for (std::size_t r = 0; same && r < recs.size(); ++r) {
            same = back[r] == recs[r];
        }
        embed::write_context_embeddings(dir.file("b.cemb"), back, dim);
        same = same && io::read_file(dir.file("a.cemb")) == io::read_file(dir.file("b.cemb"));
        c.expect(same, "CEMB case " + std::to_string(iter));
        n_cemb += same;

        retrieval::DenseStore store(dim);
        for (std::uint64_t i = 0, n = rng.below(8); i < n; ++i) {
            std::vector<float> v(dim);
            for (auto& x : v) {
                x = static_cast<float>(rng.uniform(-50, 50));
            }
            store.add("d" + std::to_string(i), v);
        }
        retrieval::save_dense_store(dir.file("a.dvec"), store);
        auto dback = retrieval::load_dense_store(dir.file("a.dvec"));
        retrieval::save_dense_store(dir.file("b.dvec"), dback);
        bool dsame = dback == store && io::read_file(dir.file("a.dvec")) == io::read_file(dir.file("b.dvec"));
        c.expect(dsame, "DVEC case " + std::to_string(iter));
        n_dvec += dsame;

        nn::ModelParams params;
        if (iter % 2 == 0) {
            auto p = nn::NncParams::zeros(1 + rng.below(4), 1 + rng.below(3), 1 + rng.below(4));
            nn::fill_uniform(p.blocks(), rng, 5.0);
            params = p;
        } else {
            auto p = nn::PooledParams::zeros(1 + rng.below(8), 1 + rng.below(6));
            nn::fill_uniform(p.blocks(), rng, 5.0);
            params = p;
        }
        auto seed = rng.next();
        nn::save_params(dir.file("m.qfsm"), params, seed);
        auto loaded = nn::load_params(dir.file("m.qfsm"));
        bool psame = loaded.seed == seed &&
                     nn::serialize_params(loaded.params, loaded.seed) == io::read_file(dir.file("m.qfsm"));
        c.expect(psame, "parameter file case " + std::to_string(iter));
        n_qfsm += psame;
    }
    return c.done("bit-exact: CEMB " + std::to_string(n_cemb) + "/200, DVEC " + std::to_string(n_dvec) +
                  "/200, parameters " + std::to_string(n_qfsm) + "/200");
}

}  // namespace

int main()
{
    qfs::init_logging();
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"ROUGE-SU4 matches the brute-force oracle", rouge_oracle},
        {"gradient check, nnc and pooled", gradients},
        {"retrieval endpoints and rerank pool", retrieval_endpoints},
        {"BM25 hand check", bm25_hand_check},
        {"pipeline selection rules", pipeline_rules},
        {"label rule", label_rule},
        {"learning sanity", learning_sanity},
        {"cross-validation harness", cross_validation},
        {"reference numbers and 10-fold protocol", protocol_statement},
        {"binary format round trips", round_trips},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
