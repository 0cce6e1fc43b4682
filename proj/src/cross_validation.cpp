#include <algorithm>
#include <cstdio>
#include <numeric>

#include <spdlog/spdlog.h>

#include "qfs/error.hpp"
#include "qfs/metrics.hpp"
#include "qfs/pipeline.hpp"
#include "qfs/rng.hpp"

namespace qfs::pipeline {

ScorerFactory constant_factory(double value)
{
    return [value](std::span<const nn::LabeledExample>, std::size_t) {
        return std::make_unique<ConstantScorer>(value);
    };
}

ScorerFactory oracle_factory()
{
    return [](std::span<const nn::LabeledExample>, std::size_t) { return std::make_unique<OracleScorer>(); };
}

namespace {

nn::TrainConfig fold_config(nn::TrainConfig config, std::size_t fold)
{
    config.seed = derive_seed(config.seed, 16 + fold);
    return config;
}

}  // namespace

ScorerFactory nnc_factory(std::shared_ptr<const embed::EmbeddingTable> table, nn::TrainConfig config)
{
    return [table = std::move(table), config](std::span<const nn::LabeledExample> training, std::size_t fold) {
        auto result = nn::train(nn::ModelKind::Nnc, training, table.get(), fold_config(config, fold));
        return std::make_unique<NncScorer>(std::get<nn::NncParams>(std::move(result.params)), table,
                                           config.clip_len);
    };
}

ScorerFactory pooled_factory(std::shared_ptr<const embed::PooledFeatures> features, nn::TrainConfig config)
{
    return [features = std::move(features), config](std::span<const nn::LabeledExample> training, std::size_t fold) {
        auto result = nn::train(nn::ModelKind::Pooled, training, features.get(), fold_config(config, fold));
        return std::make_unique<PooledScorer>(std::get<nn::PooledParams>(std::move(result.params)), features);
    };
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k, std::uint64_t seed)
{
    if (k < 2) {
        throw Error(ErrorCode::InvalidArgument, "k must be >= 2");
    }
    if (n < k) {
        throw Error(ErrorCode::TooFewQuestions,
                    std::to_string(n) + " questions cannot fill " + std::to_string(k) + " folds");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        std::size_t size = n / k + (f < n % k ? 1 : 0);
        folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                        order.begin() + static_cast<std::ptrdiff_t>(pos + size));
        std::sort(folds[f].begin(), folds[f].end());
        pos += size;
    }
    return folds;
}

CvReport cross_validate(const corpus::QuestionSet& questions, const ScorerFactory& factory, const CvOptions& options)
{
    auto folds = make_folds(questions.size(), options.k, options.seed);

    CvReport report;
    report.k = options.k;
    report.seed = options.seed;

    std::vector<bool> eligible(questions.size(), false);
    std::vector<std::vector<corpus::SnippetSpan>> candidates(questions.size());
    for (std::size_t i = 0; i < questions.size(); ++i) {
        candidates[i] = gold_candidates(questions[i]);
        eligible[i] = !questions[i].ideal_answers.empty() && !candidates[i].empty();
        if (!eligible[i]) {
            spdlog::warn("cross-validation skips question {}: no ideal answer or gold snippet sentences",
                         questions[i].id);
            report.skipped.push_back(questions[i].id);
        }
    }

    std::vector<std::size_t> fold_of(questions.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        for (auto i : folds[f]) {
            fold_of[i] = f;
        }
    }

    double sum_of_means = 0.0;
    std::size_t scored_folds = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        FoldResult fr;
        fr.fold = f;
        std::vector<nn::LabeledExample> training;
        for (std::size_t i = 0; i < questions.size(); ++i) {
            if (fold_of[i] != f && eligible[i]) {
                auto labels = label_question(questions[i]);
                training.insert(training.end(), std::make_move_iterator(labels.begin()),
                                std::make_move_iterator(labels.end()));
            }
        }
        fr.n_train_examples = training.size();
        auto scorer = factory(training, f);

        double sum = 0.0;
        for (auto i : folds[f]) {
            const auto& q = questions[i];
            fr.test_ids.push_back(q.id);
            if (!eligible[i]) {
                continue;
            }
            auto answer = answer_from_spans(q, candidates[i], *scorer, options.table);
            sum += metrics::best_reference_f1(answer, q.ideal_answers);
            ++fr.n_evaluated;
        }
        if (fr.n_evaluated > 0) {
            fr.mean_su4_f1 = sum / static_cast<double>(fr.n_evaluated);
            sum_of_means += fr.mean_su4_f1;
            ++scored_folds;
        }
        spdlog::info("fold {}: {} training examples, {} evaluated, SU4-F1 {:.4f}", f, fr.n_train_examples,
                     fr.n_evaluated, fr.mean_su4_f1);
        report.folds.push_back(std::move(fr));
    }
    report.mean_su4_f1 = scored_folds > 0 ? sum_of_means / static_cast<double>(scored_folds) : 0.0;
    return report;
}

nlohmann::json CvReport::to_json() const
{
    nlohmann::json folds_json = nlohmann::json::array();
    for (const auto& f : folds) {
        folds_json.push_back({{"fold", f.fold},
                              {"test_questions", f.test_ids},
                              {"n_train_examples", f.n_train_examples},
                              {"n_evaluated", f.n_evaluated},
                              {"mean_su4_f1", f.mean_su4_f1}});
    }
    return {{"k", k}, {"seed", seed}, {"folds", folds_json}, {"skipped", skipped}, {"mean_su4_f1", mean_su4_f1}};
}

std::string CvReport::to_text() const
{
    std::string out;
    char line[160];
    for (const auto& f : folds) {
        std::snprintf(line, sizeof line, "fold %2zu  questions %6zu  evaluated %6zu  SU4-F1 %.6f\n", f.fold,
                      f.test_ids.size(), f.n_evaluated, f.mean_su4_f1);
        out += line;
    }
    std::snprintf(line, sizeof line, "mean SU4-F1 over %zu folds: %.6f\n", folds.size(), mean_su4_f1);
    out += line;
    return out;
}

}  // namespace qfs::pipeline
