#include "qfs/cli.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "qfs/binary_io.hpp"
#include "qfs/config.hpp"
#include "qfs/corpus.hpp"
#include "qfs/embeddings.hpp"
#include "qfs/error.hpp"
#include "qfs/log.hpp"
#include "qfs/metrics.hpp"
#include "qfs/neural.hpp"
#include "qfs/pipeline.hpp"
#include "qfs/retrieval.hpp"

namespace qfs::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void write_json(const std::string& path, const json& doc) { io::write_file(path, doc.dump(2) + "\n"); }

json read_json(const std::string& path)
{
    auto text = io::read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedInput, path + ": " + e.what());
    }
}

std::string resolve(const fs::path& base, const std::string& p)
{
    if (p.empty() || fs::path(p).is_absolute()) {
        return p;
    }
    return (base / p).lexically_normal().string();
}

// Relative paths inside a config file are taken relative to that file.
PipelineConfig load_resolved_config(const std::string& path)
{
    auto c = load_config(path);
    auto base = fs::path(path).parent_path();
    for (auto* p : {&c.data.documents, &c.data.index, &c.data.dense, &c.data.query_vectors, &c.data.stopwords,
                    &c.model.params_path, &c.model.embeddings_path, &c.model.snippet_embeddings_path}) {
        *p = resolve(base, *p);
    }
    return c;
}

std::string require_path(const std::string& p, const char* what)
{
    if (p.empty()) {
        throw Error(ErrorCode::InvalidArgument, std::string("configuration lacks ") + what);
    }
    return p;
}

std::unique_ptr<pipeline::SentenceScorer> load_scorer(const ModelConfig& m, const std::string& pooled_path)
{
    switch (m.kind) {
    case ScorerKind::Constant:
        return std::make_unique<pipeline::ConstantScorer>(0.5);
    case ScorerKind::Nnc: {
        auto loaded = nn::load_params(require_path(m.params_path, "model.params_path"), nn::ModelKind::Nnc);
        auto table = std::make_shared<const embed::EmbeddingTable>(
            embed::load_word_embeddings(require_path(m.embeddings_path, "model.embeddings_path")));
        return std::make_unique<pipeline::NncScorer>(std::get<nn::NncParams>(std::move(loaded.params)), table,
                                                     m.clip_len);
    }
    case ScorerKind::Pooled: {
        auto loaded = nn::load_params(require_path(m.params_path, "model.params_path"), nn::ModelKind::Pooled);
        auto features = std::make_shared<const embed::PooledFeatures>(embed::load_pooled_features(pooled_path));
        return std::make_unique<pipeline::PooledScorer>(std::get<nn::PooledParams>(std::move(loaded.params)),
                                                        features);
    }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown scorer kind");
}

struct LoadedResources {
    corpus::DocumentCollection documents;
    std::optional<retrieval::InvertedIndex> index;
    std::optional<retrieval::DenseStore> dense;
    std::optional<retrieval::DenseStore> query_vectors;
    text::StopwordSet stopwords;
    std::unique_ptr<pipeline::SentenceScorer> answer_scorer;
    std::unique_ptr<pipeline::SentenceScorer> snippet_scorer;
    std::optional<corpus::FeedbackStore> feedback;

    pipeline::Resources view() const
    {
        pipeline::Resources r;
        r.documents = &documents;
        r.index = index ? &*index : nullptr;
        r.dense = dense ? &*dense : nullptr;
        r.query_vectors = query_vectors ? &*query_vectors : nullptr;
        r.stopwords = &stopwords;
        r.answer_scorer = answer_scorer.get();
        r.snippet_scorer = snippet_scorer.get();
        r.feedback = feedback ? &*feedback : nullptr;
        return r;
    }
};

LoadedResources load_resources(const PipelineConfig& c, const std::string& feedback_path, bool with_answer_scorer)
{
    LoadedResources r;
    r.documents = corpus::load_document_collection(require_path(c.data.documents, "data.documents"));
    if (!c.data.stopwords.empty()) {
        r.stopwords = text::load_stopwords(c.data.stopwords);
    }
    if (!c.data.index.empty()) {
        r.index = retrieval::InvertedIndex::load(c.data.index);
    } else {
        r.index = retrieval::InvertedIndex::build(r.documents, r.stopwords,
                                                  {c.retrieval.bm25_k1, c.retrieval.bm25_b});
    }
    if (c.retrieval.method != RetrievalMethod::Bm25) {
        r.dense = retrieval::load_dense_store(require_path(c.data.dense, "data.dense"));
        r.query_vectors = retrieval::load_dense_store(require_path(c.data.query_vectors, "data.query_vectors"));
    }
    if (with_answer_scorer) {
        r.answer_scorer = load_scorer(c.model, c.model.embeddings_path);
    }
    if (c.snippets.strategy == SnippetStrategy::Model) {
        const auto& path = c.model.kind == ScorerKind::Pooled
                               ? require_path(c.model.snippet_embeddings_path, "model.snippet_embeddings_path")
                               : c.model.embeddings_path;
        r.snippet_scorer = load_scorer(c.model, path);
    }
    if (!feedback_path.empty()) {
        r.feedback = corpus::load_feedback(feedback_path);
    }
    return r;
}

// Labeled examples as JSON: tokens are stored so that reloading is exact.
json labels_to_json(std::span<const nn::LabeledExample> examples)
{
    json arr = json::array();
    for (const auto& e : examples) {
        arr.push_back({{"question_id", e.question_id},
                       {"pair_id", e.pair_id},
                       {"position", e.position},
                       {"label", e.label},
                       {"sentence", e.sentence_text},
                       {"question_tokens", e.question_tokens},
                       {"sentence_tokens", e.sentence_tokens}});
    }
    return {{"examples", arr}};
}

std::vector<nn::LabeledExample> labels_from_json(const json& doc)
{
    if (!doc.is_object() || !doc.contains("examples") || !doc["examples"].is_array()) {
        throw Error(ErrorCode::MalformedInput, "label file needs an \"examples\" array");
    }
    std::vector<nn::LabeledExample> out;
    try {
        for (const auto& e : doc["examples"]) {
            nn::LabeledExample ex;
            ex.question_id = e.at("question_id").get<std::string>();
            ex.pair_id = e.at("pair_id").get<std::string>();
            ex.position = e.at("position").get<std::size_t>();
            ex.label = e.at("label").get<int>();
            ex.sentence_text = e.value("sentence", std::string{});
            ex.question_tokens = e.at("question_tokens").get<std::vector<std::string>>();
            ex.sentence_tokens = e.at("sentence_tokens").get<std::vector<std::string>>();
            if (ex.label != 0 && ex.label != 1) {
                throw Error(ErrorCode::MalformedInput, "label must be 0 or 1");
            }
            out.push_back(std::move(ex));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedInput, std::string("label file: ") + e.what());
    }
    return out;
}

struct TrainFlags {
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch;
    std::optional<double> dropout;
    std::optional<double> lr;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> mask_seed;
    std::optional<std::size_t> clip;
    std::optional<std::size_t> hidden;
    std::optional<std::size_t> lstm;

    void add_to(CLI::App* app)
    {
        app->add_option("--epochs", epochs, "Training epochs (nnc 10, pooled 8)");
        app->add_option("--batch", batch, "Mini-batch size (nnc 1024, pooled 32)");
        app->add_option("--dropout", dropout, "Dropout rate on the hidden layer (nnc 0.7, pooled 0.8)");
        app->add_option("--lr", lr, "Adam learning rate (1e-3)");
        app->add_option("--seed", seed, "Seed for initialisation, shuffling and folds");
        app->add_option("--mask-seed", mask_seed, "Separate seed for dropout masks");
        app->add_option("--clip", clip, "Maximum tokens per sequence (nnc 300)");
        app->add_option("--hidden", hidden, "Hidden layer width (50)");
        app->add_option("--lstm", lstm, "LSTM state size per direction (100)");
    }

    nn::TrainConfig build(nn::ModelKind kind) const
    {
        auto c = kind == nn::ModelKind::Nnc ? nn::TrainConfig::nnc_defaults() : nn::TrainConfig::pooled_defaults();
        c.epochs = epochs.value_or(c.epochs);
        c.batch_size = batch.value_or(c.batch_size);
        c.dropout_rate = dropout.value_or(c.dropout_rate);
        c.learning_rate = lr.value_or(c.learning_rate);
        c.seed = seed;
        c.mask_seed = mask_seed;
        c.clip_len = clip.value_or(c.clip_len);
        c.hidden_dim = hidden.value_or(c.hidden_dim);
        c.lstm_dim = lstm.value_or(c.lstm_dim);
        c.validate();
        return c;
    }
};

json ranked_to_json(const retrieval::RankedList& list)
{
    json arr = json::array();
    for (const auto& d : list) {
        arr.push_back({{"id", d.doc_id}, {"score", d.score}});
    }
    return arr;
}

json spans_to_json(std::span<const corpus::SnippetSpan> spans)
{
    json arr = json::array();
    for (const auto& s : spans) {
        arr.push_back(corpus::snippet_to_json(s));
    }
    return arr;
}

class Commands {
  public:
    Commands(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

    void build(CLI::App& app)
    {
        app.require_subcommand(1);

        auto* index = app.add_subcommand("index", "Build and save a BM25 inverted index");
        index->add_option("--docs", index_.docs, "Document collection (JSONL)")->required();
        index->add_option("--out", index_.out, "Index snapshot to write")->required();
        index->add_option("--stopwords", index_.stopwords, "Stopword list, one per line");
        index->add_option("--k1", index_.k1, "BM25 k1")->capture_default_str();
        index->add_option("--b", index_.b, "BM25 b")->capture_default_str();
        index->callback([this] { code_ = cmd_index(); });

        auto* retrieve = app.add_subcommand("retrieve", "Ranked document lists per question");
        add_pipeline_flags(retrieve, false);
        retrieve->callback([this] { code_ = cmd_retrieve(); });

        auto* snippets = app.add_subcommand("snippets", "Snippet extraction and answer candidate lists");
        add_pipeline_flags(snippets, true);
        snippets->callback([this] { code_ = cmd_snippets(); });

        auto* answer = app.add_subcommand("answer", "Full pipeline; writes a submission file");
        add_pipeline_flags(answer, true);
        answer->add_option("--threads", pipe_.threads, "Worker threads over questions")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        answer->callback([this] { code_ = cmd_answer(); });

        auto* label = app.add_subcommand("label", "Training labels from gold snippets and ideal answers");
        label->add_option("--questions", label_.questions, "Training question set (JSON)")->required();
        label->add_option("--out", label_.out, "Label file to write")->required();
        label->callback([this] { code_ = cmd_label(); });

        auto* train = app.add_subcommand("train", "Train a sentence classifier");
        auto* src = train->add_option_group("source", "Training examples");
        src->add_option("--labels", train_.labels, "Label file from 'label'");
        src->add_option("--questions", train_.questions, "Question set (labels generated on the fly)");
        src->require_option(1);
        train->add_option("--kind", train_.kind, "nnc or pooled")
            ->required()
            ->check(CLI::IsMember({"nnc", "pooled"}));
        train->add_option("--embeddings", train_.embeddings, "Word vectors (nnc) or CEMB file (pooled)")
            ->required();
        train->add_option("--out", train_.out, "Parameter file to write")->required();
        train_.flags.add_to(train);
        train->callback([this] { code_ = cmd_train(); });

        auto* evaluate = app.add_subcommand("evaluate", "Score a submission against gold questions");
        evaluate->add_option("--gold", eval_.gold, "Gold question set (JSON)")->required();
        evaluate->add_option("--submission", eval_.submission, "Submission file")->required();
        evaluate->add_option("--json", eval_.json_out, "Also write the per-question report as JSON");
        evaluate->callback([this] { code_ = cmd_evaluate(); });

        auto* cv = app.add_subcommand("cv", "k-fold cross-validation of answer extraction");
        cv->add_option("--questions", cv_.questions, "Question set with gold snippets and ideal answers")
            ->required();
        cv->add_option("--k", cv_.k, "Number of folds")->capture_default_str()->check(CLI::Range(2, 1000000));
        cv->add_option("--scorer", cv_.scorer, "nnc, pooled, oracle or constant")
            ->capture_default_str()
            ->check(CLI::IsMember({"nnc", "pooled", "oracle", "constant"}));
        cv->add_option("--embeddings", cv_.embeddings, "Word vectors (nnc) or CEMB file (pooled)");
        cv->add_option("--out", cv_.out, "Write the report as JSON");
        cv_.flags.add_to(cv);
        cv->callback([this] { code_ = cmd_cv(); });

        auto* config = app.add_subcommand("config", "Pipeline configuration files");
        config->require_subcommand(1);
        auto* validate = config->add_subcommand("validate", "Check a configuration file");
        validate->add_option("path", config_.path, "Configuration file")->required();
        validate->callback([this] { code_ = cmd_config_validate(); });
        auto* emit = config->add_subcommand("emit", "Print the default configuration (or the normalised input)");
        emit->add_option("--from", config_.path, "Configuration file to normalise");
        emit->add_option("--out", config_.out, "Write to a file instead of stdout");
        emit->callback([this] { code_ = cmd_config_emit(); });
    }

    int code() const { return code_; }

  private:
    void add_pipeline_flags(CLI::App* cmd, bool feedback)
    {
        cmd->add_option("--config", pipe_.config, "Pipeline configuration (JSON)")->required();
        cmd->add_option("--questions", pipe_.questions, "Question set (JSON)")->required();
        cmd->add_option("--out", pipe_.out, "Output file")->required();
        if (feedback) {
            cmd->add_option("--feedback", pipe_.feedback, "Relevance feedback from earlier rounds");
        }
    }

    int cmd_index()
    {
        auto docs = corpus::load_document_collection(index_.docs);
        text::StopwordSet stop;
        if (!index_.stopwords.empty()) {
            stop = text::load_stopwords(index_.stopwords);
        }
        auto index = retrieval::InvertedIndex::build(docs, stop, {index_.k1, index_.b});
        index.save(index_.out);
        out_ << index.n_docs() << " documents, " << index.vocabulary_size() << " terms\n";
        return kExitOk;
    }

    int cmd_retrieve()
    {
        auto config = load_resolved_config(pipe_.config);
        auto questions = corpus::load_question_set(pipe_.questions);
        auto res = load_resources(config, {}, false);
        auto view = res.view();
        json arr = json::array();
        int code = kExitOk;
        for (const auto& q : questions) {
            try {
                arr.push_back({{"id", q.id}, {"documents", ranked_to_json(pipeline::retrieve(q, config, view))}});
            } catch (const Error& e) {
                spdlog::error("question {} skipped: {}", q.id, e.what());
                code = kExitPartial;
            }
        }
        write_json(pipe_.out, {{"questions", arr}});
        return code;
    }

    int cmd_snippets()
    {
        auto config = load_resolved_config(pipe_.config);
        auto questions = corpus::load_question_set(pipe_.questions);
        auto res = load_resources(config, pipe_.feedback, false);
        auto view = res.view();
        json arr = json::array();
        int code = kExitOk;
        for (const auto& q : questions) {
            try {
                auto stages = pipeline::run_retrieval_stages(q, config, view);
                json cands = json::array();
                for (const auto& c : pipeline::make_candidates(q, stages.candidates)) {
                    auto item = corpus::snippet_to_json(c.span);
                    item["pair_id"] = c.pair_id;
                    item["position"] = c.position;
                    cands.push_back(std::move(item));
                }
                arr.push_back({{"id", q.id},
                               {"documents", stages.documents},
                               {"snippets", spans_to_json(stages.snippets)},
                               {"candidates", cands}});
            } catch (const Error& e) {
                spdlog::error("question {} skipped: {}", q.id, e.what());
                code = kExitPartial;
            }
        }
        write_json(pipe_.out, {{"questions", arr}});
        return code;
    }

    int cmd_answer()
    {
        auto config = load_resolved_config(pipe_.config);
        auto questions = corpus::load_question_set(pipe_.questions);
        auto res = load_resources(config, pipe_.feedback, true);
        auto view = res.view();

        std::vector<std::optional<corpus::AnswerResult>> results(questions.size());
        std::atomic<std::size_t> next{0};
        std::mutex log_mutex;
        auto worker = [&] {
            for (std::size_t i = next++; i < questions.size(); i = next++) {
                try {
                    results[i] = pipeline::answer_question(questions[i], config, view);
                } catch (const Error& e) {
                    std::lock_guard lock(log_mutex);
                    spdlog::error("question {} skipped: {}", questions[i].id, e.what());
                }
            }
        };
        std::size_t n_threads = std::min<std::size_t>(pipe_.threads, std::max<std::size_t>(1, questions.size()));
        std::vector<std::thread> pool;
        for (std::size_t t = 1; t < n_threads; ++t) {
            pool.emplace_back(worker);
        }
        worker();
        for (auto& t : pool) {
            t.join();
        }

        std::vector<corpus::AnswerResult> answered;
        for (auto& r : results) {
            if (r) {
                answered.push_back(std::move(*r));
            }
        }
        corpus::write_submission(pipe_.out, answered);
        std::size_t skipped = questions.size() - answered.size();
        out_ << answered.size() << " questions answered";
        if (skipped > 0) {
            out_ << ", " << skipped << " skipped";
        }
        out_ << "\n";
        return skipped > 0 ? kExitPartial : kExitOk;
    }

    int cmd_label()
    {
        auto questions = corpus::load_question_set(label_.questions);
        auto examples = pipeline::generate_labels(questions);
        write_json(label_.out, labels_to_json(examples));
        auto positives = std::count_if(examples.begin(), examples.end(), [](const auto& e) { return e.label == 1; });
        out_ << examples.size() << " examples, " << positives << " positive\n";
        return kExitOk;
    }

    int cmd_train()
    {
        auto kind = nn::parse_model_kind(train_.kind);
        auto config = train_.flags.build(kind);
        auto examples = train_.labels.empty() ? pipeline::generate_labels(corpus::load_question_set(train_.questions))
                                              : labels_from_json(read_json(train_.labels));
        nn::TrainResult result;
        if (kind == nn::ModelKind::Nnc) {
            auto table = embed::load_word_embeddings(train_.embeddings);
            result = nn::train(kind, examples, &table, config);
        } else {
            auto features = embed::load_pooled_features(train_.embeddings);
            result = nn::train(kind, examples, &features, config);
        }
        nn::save_params(train_.out, result.params, config.seed);
        out_ << "trained " << nn::to_string(kind) << " on " << examples.size() << " examples, "
             << nn::parameter_count(result.params) << " parameters";
        if (!result.loss_history.empty()) {
            out_ << ", final loss " << result.loss_history.back();
        }
        out_ << "\n";
        return kExitOk;
    }

    int cmd_evaluate()
    {
        auto gold = corpus::load_question_set(eval_.gold);
        auto submission = corpus::load_submission(eval_.submission);
        auto report = metrics::evaluate(gold, submission);
        out_ << report.to_table();
        if (!eval_.json_out.empty()) {
            write_json(eval_.json_out, report.to_json());
        }
        return kExitOk;
    }

    int cmd_cv()
    {
        auto questions = corpus::load_question_set(cv_.questions);
        pipeline::ScorerFactory factory;
        if (cv_.scorer == "oracle") {
            factory = pipeline::oracle_factory();
        } else if (cv_.scorer == "constant") {
            factory = pipeline::constant_factory();
        } else {
            if (cv_.embeddings.empty()) {
                throw CLI::ValidationError("--embeddings", "required for scorer " + cv_.scorer);
            }
            auto kind = nn::parse_model_kind(cv_.scorer);
            auto config = cv_.flags.build(kind);
            if (kind == nn::ModelKind::Nnc) {
                factory = pipeline::nnc_factory(
                    std::make_shared<const embed::EmbeddingTable>(embed::load_word_embeddings(cv_.embeddings)),
                    config);
            } else {
                factory = pipeline::pooled_factory(
                    std::make_shared<const embed::PooledFeatures>(embed::load_pooled_features(cv_.embeddings)),
                    config);
            }
        }
        pipeline::CvOptions options;
        options.k = cv_.k;
        options.seed = cv_.flags.seed;
        auto report = pipeline::cross_validate(questions, factory, options);
        out_ << report.to_text();
        if (!cv_.out.empty()) {
            write_json(cv_.out, report.to_json());
        }
        return kExitOk;
    }

    int cmd_config_validate()
    {
        auto c = load_config(config_.path);
        out_ << config_.path << ": ok (retrieval " << to_string(c.retrieval.method) << ", snippets "
             << to_string(c.snippets.strategy) << ", model " << to_string(c.model.kind) << ")\n";
        return kExitOk;
    }

    int cmd_config_emit()
    {
        PipelineConfig c = config_.path.empty() ? PipelineConfig{} : load_config(config_.path);
        auto text = to_json(c).dump(2) + "\n";
        if (config_.out.empty()) {
            out_ << text;
        } else {
            io::write_file(config_.out, text);
        }
        return kExitOk;
    }

    std::ostream& out_;
    std::ostream& err_;
    int code_ = kExitOk;

    struct {
        std::string docs, out, stopwords;
        double k1 = 1.2;
        double b = 0.75;
    } index_;
    struct {
        std::string config, questions, out, feedback;
        std::size_t threads = 1;
    } pipe_;
    struct {
        std::string questions, out;
    } label_;
    struct {
        std::string labels, questions, kind, embeddings, out;
        TrainFlags flags;
    } train_;
    struct {
        std::string gold, submission, json_out;
    } eval_;
    struct {
        std::string questions, scorer = "oracle", embeddings, out;
        std::size_t k = 10;
        TrainFlags flags;
    } cv_;
    struct {
        std::string path, out;
    } config_;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    init_logging();
    CLI::App app{"Extractive answers to biomedical questions: retrieval, snippets, sentence scoring", "qfs"};
    Commands commands(out, err);
    commands.build(app);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        err << "run 'qfs --help' for the list of commands and flags\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDataError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDataError;
    }
    return commands.code();
}

int run(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace qfs::cli
