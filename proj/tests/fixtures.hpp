#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "qfs/corpus.hpp"
#include "qfs/textproc.hpp"

namespace fixture {

/// Scratch directory removed on destruction.
class TempDir {
  public:
    TempDir()
    {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path()
            / ("qfs_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }

  private:
    std::filesystem::path path_;
};

inline qfs::corpus::DocumentRecord doc(std::string id, std::string title, std::string abstract)
{
    return {std::move(id), {{"title", std::move(title)}, {"abstract", std::move(abstract)}}};
}

inline qfs::corpus::SnippetSpan span_of(const qfs::corpus::DocumentRecord& d, const std::string& section,
                                        const std::string& text)
{
    const auto* s = d.section(section);
    auto pos = s->text.find(text);
    auto begin = qfs::text::char_length(std::string_view(s->text).substr(0, pos));
    return {d.id, section, begin, begin + qfs::text::char_length(text), text};
}

}  // namespace fixture

#include "qfs/rng.hpp"

namespace fixture {

/// A sentence of `len` words from a vocabulary of `vocab` words, capitalised and terminated.
inline std::string sentence(qfs::Rng& rng, std::size_t len, std::size_t vocab)
{
    std::string out;
    for (std::size_t i = 0; i < len; ++i) {
        std::string w = "w" + std::to_string(rng.below(vocab));
        if (i == 0) {
            w[0] = 'W';
        }
        out += (i ? " " : "") + w;
    }
    return out + ".";
}

/// Questions whose ideal answer is built from a random subset of their gold
/// snippet sentences, so that sentence choice matters for SU4.
inline qfs::corpus::QuestionSet synthetic_questions(std::size_t n, std::uint64_t seed)
{
    using namespace qfs::corpus;
    qfs::Rng rng(seed);
    const QuestionType types[] = {QuestionType::Summary, QuestionType::Factoid, QuestionType::YesNo,
                                  QuestionType::List};
    std::vector<QuestionRecord> out;
    out.reserve(n);
    for (std::size_t q = 0; q < n; ++q) {
        QuestionRecord rec;
        rec.id = "q" + std::to_string(q);
        rec.body = sentence(rng, 5, 60);
        rec.type = types[rng.below(4)];
        const std::string doc = "d" + std::to_string(q);
        rec.gold_documents = {doc};
        std::size_t offset = 0;
        std::vector<std::string> sents;
        auto n_sent = 3 + rng.below(8);
        for (std::uint64_t s = 0; s < n_sent; ++s) {
            auto text = sentence(rng, 4 + rng.below(8), 60);
            rec.gold_snippets.push_back({doc, "abstract", offset, offset + text.size(), text});
            offset += text.size() + 1;
            sents.push_back(std::move(text));
        }
        std::string ideal;
        for (std::size_t s = 0; s < sents.size(); ++s) {
            if (rng.below(3) == 0) {
                ideal += (ideal.empty() ? "" : " ") + sents[s];
            }
        }
        if (ideal.empty()) {
            ideal = sents.back();
        }
        rec.ideal_answers = {ideal};
        out.push_back(std::move(rec));
    }
    return QuestionSet(std::move(out));
}

}  // namespace fixture
