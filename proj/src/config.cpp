#include "qfs/config.hpp"

#include <array>
#include <stdexcept>

#include "qfs/binary_io.hpp"
#include "qfs/error.hpp"

namespace qfs {

using nlohmann::json;

std::size_t AnswerLengthTable::operator()(corpus::QuestionType type) const noexcept
{
    switch (type) {
    case corpus::QuestionType::Summary: return summary;
    case corpus::QuestionType::Factoid: return factoid;
    case corpus::QuestionType::YesNo: return yesno;
    case corpus::QuestionType::List: return list;
    }
    return summary;
}

std::size_t RetrievalConfig::docs_for_round(int round) const
{
    auto it = round_docs.find(round);
    return it == round_docs.end() ? default_round_docs : it->second;
}

void PipelineConfig::validate() const
{
    auto positive = [](std::size_t v, const char* what) {
        if (v == 0) {
            throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be >= 1");
        }
    };
    if (!(retrieval.lambda >= 0.0 && retrieval.lambda <= 1.0)) {
        throw Error(ErrorCode::LambdaOutOfRange, "retrieval.lambda must lie in [0, 1]");
    }
    positive(retrieval.pool_size, "retrieval.pool_size");
    positive(retrieval.default_round_docs, "retrieval.round_docs.default");
    for (const auto& [round, n] : retrieval.round_docs) {
        positive(n, "retrieval.round_docs entries");
    }
    positive(retrieval.final_doc_cap, "retrieval.final_doc_cap");
    positive(retrieval.final_snippet_cap, "retrieval.final_snippet_cap");
    positive(snippets.per_doc, "snippets.per_doc");
    positive(answer_table.summary, "answer_table.summary");
    positive(answer_table.factoid, "answer_table.factoid");
    positive(answer_table.yesno, "answer_table.yesno");
    positive(answer_table.list, "answer_table.list");
    positive(model.clip_len, "model.clip_len");
    if (retrieval.bm25_k1 < 0.0 || retrieval.bm25_b < 0.0 || retrieval.bm25_b > 1.0) {
        throw Error(ErrorCode::InvalidArgument, "bm25 parameters need k1 >= 0 and b in [0, 1]");
    }
}

std::string_view to_string(RetrievalMethod m)
{
    switch (m) {
    case RetrievalMethod::Bm25: return "bm25";
    case RetrievalMethod::Nir: return "nir";
    case RetrievalMethod::Rerank: return "rerank";
    }
    return "bm25";
}

std::string_view to_string(SnippetStrategy s) { return s == SnippetStrategy::Cosine ? "cosine" : "model"; }

std::string_view to_string(ScorerKind k)
{
    switch (k) {
    case ScorerKind::Nnc: return "nnc";
    case ScorerKind::Pooled: return "pooled";
    case ScorerKind::Constant: return "constant";
    }
    return "nnc";
}

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::MalformedInput, "config: " + what); }

const json* child(const json& obj, const char* key)
{
    auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

void read(const json& obj, const char* key, double& out)
{
    if (const auto* v = child(obj, key)) {
        if (!v->is_number()) {
            bad(std::string(key) + " must be a number");
        }
        out = v->get<double>();
    }
}

void read(const json& obj, const char* key, std::size_t& out)
{
    if (const auto* v = child(obj, key)) {
        if (!v->is_number_integer() || v->get<long long>() < 0) {
            bad(std::string(key) + " must be a non-negative integer");
        }
        out = v->get<std::size_t>();
    }
}

void read(const json& obj, const char* key, std::uint64_t& out, int)
{
    if (const auto* v = child(obj, key)) {
        if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
            bad(std::string(key) + " must be a non-negative integer");
        }
        out = v->get<std::uint64_t>();
    }
}

void read(const json& obj, const char* key, int& out)
{
    if (const auto* v = child(obj, key)) {
        if (!v->is_number_integer()) {
            bad(std::string(key) + " must be an integer");
        }
        out = v->get<int>();
    }
}

void read(const json& obj, const char* key, std::string& out)
{
    if (const auto* v = child(obj, key)) {
        if (!v->is_string()) {
            bad(std::string(key) + " must be a string");
        }
        out = v->get<std::string>();
    }
}

template <typename Enum, std::size_t N>
void read_enum(const json& obj, const char* key, Enum& out, const std::array<Enum, N>& values)
{
    std::string name;
    read(obj, key, name);
    if (name.empty()) {
        return;
    }
    for (auto v : values) {
        if (to_string(v) == name) {
            out = v;
            return;
        }
    }
    bad("unknown value '" + name + "' for " + key);
}

const json& section(const json& doc, const char* key)
{
    static const json empty = json::object();
    const auto* v = child(doc, key);
    if (v == nullptr) {
        return empty;
    }
    if (!v->is_object()) {
        bad(std::string(key) + " must be an object");
    }
    return *v;
}

}  // namespace

PipelineConfig parse_config(const json& doc)
{
    if (!doc.is_object()) {
        bad("top level must be an object");
    }
    PipelineConfig c;
    const auto& r = section(doc, "retrieval");
    read_enum(r, "method", c.retrieval.method,
              std::array{RetrievalMethod::Bm25, RetrievalMethod::Nir, RetrievalMethod::Rerank});
    read(r, "lambda", c.retrieval.lambda);
    read(r, "pool_size", c.retrieval.pool_size);
    if (const auto* rd = child(r, "round_docs")) {
        if (!rd->is_object()) {
            bad("retrieval.round_docs must be an object");
        }
        c.retrieval.round_docs.clear();
        for (const auto& [key, value] : rd->items()) {
            if (!value.is_number_integer() || value.get<long long>() < 0) {
                bad("retrieval.round_docs values must be non-negative integers");
            }
            if (key == "default") {
                c.retrieval.default_round_docs = value.get<std::size_t>();
                continue;
            }
            try {
                std::size_t used = 0;
                int round = std::stoi(key, &used);
                if (used != key.size()) {
                    throw std::invalid_argument(key);
                }
                c.retrieval.round_docs[round] = value.get<std::size_t>();
            } catch (const std::logic_error&) {
                bad("retrieval.round_docs key '" + key + "' is neither a round number nor 'default'");
            }
        }
    }
    read(r, "final_doc_cap", c.retrieval.final_doc_cap);
    read(r, "final_snippet_cap", c.retrieval.final_snippet_cap);
    read(r, "bm25_k1", c.retrieval.bm25_k1);
    read(r, "bm25_b", c.retrieval.bm25_b);

    const auto& s = section(doc, "snippets");
    read_enum(s, "strategy", c.snippets.strategy, std::array{SnippetStrategy::Cosine, SnippetStrategy::Model});
    read(s, "per_doc", c.snippets.per_doc);

    const auto& a = section(doc, "answer_table");
    read(a, "summary", c.answer_table.summary);
    read(a, "factoid", c.answer_table.factoid);
    read(a, "yesno", c.answer_table.yesno);
    read(a, "list", c.answer_table.list);

    const auto& m = section(doc, "model");
    read_enum(m, "kind", c.model.kind, std::array{ScorerKind::Nnc, ScorerKind::Pooled, ScorerKind::Constant});
    read(m, "params_path", c.model.params_path);
    read(m, "embeddings_path", c.model.embeddings_path);
    read(m, "snippet_embeddings_path", c.model.snippet_embeddings_path);
    read(m, "clip_len", c.model.clip_len);

    const auto& d = section(doc, "data");
    read(d, "documents", c.data.documents);
    read(d, "index", c.data.index);
    read(d, "dense", c.data.dense);
    read(d, "query_vectors", c.data.query_vectors);
    read(d, "stopwords", c.data.stopwords);

    read(doc, "round", c.round);
    read(doc, "seed", c.seed, 0);
    c.validate();
    return c;
}

PipelineConfig load_config(const std::string& path)
{
    auto text = io::read_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        bad(path + ": " + e.what());
    }
    return parse_config(doc);
}

json to_json(const PipelineConfig& c)
{
    json round_docs = json::object();
    for (const auto& [round, n] : c.retrieval.round_docs) {
        round_docs[std::to_string(round)] = n;
    }
    round_docs["default"] = c.retrieval.default_round_docs;
    return json{
        {"retrieval",
         {{"method", to_string(c.retrieval.method)},
          {"lambda", c.retrieval.lambda},
          {"pool_size", c.retrieval.pool_size},
          {"round_docs", round_docs},
          {"final_doc_cap", c.retrieval.final_doc_cap},
          {"final_snippet_cap", c.retrieval.final_snippet_cap},
          {"bm25_k1", c.retrieval.bm25_k1},
          {"bm25_b", c.retrieval.bm25_b}}},
        {"snippets", {{"strategy", to_string(c.snippets.strategy)}, {"per_doc", c.snippets.per_doc}}},
        {"answer_table",
         {{"summary", c.answer_table.summary},
          {"factoid", c.answer_table.factoid},
          {"yesno", c.answer_table.yesno},
          {"list", c.answer_table.list}}},
        {"model",
         {{"kind", to_string(c.model.kind)},
          {"params_path", c.model.params_path},
          {"embeddings_path", c.model.embeddings_path},
          {"snippet_embeddings_path", c.model.snippet_embeddings_path},
          {"clip_len", c.model.clip_len}}},
        {"data",
         {{"documents", c.data.documents},
          {"index", c.data.index},
          {"dense", c.data.dense},
          {"query_vectors", c.data.query_vectors},
          {"stopwords", c.data.stopwords}}},
        {"round", c.round},
        {"seed", c.seed},
    };
}

}  // namespace qfs
