#include "qfs/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "qfs/error.hpp"
#include "qfs/textproc.hpp"

namespace qfs::metrics {

Score Score::from_pr(double precision, double recall)
{
    Score s{precision, recall, 0.0};
    if (precision + recall > 0.0) {
        s.f1 = 2.0 * precision * recall / (precision + recall);
    }
    return s;
}

namespace {

template <typename Counts>
Score clipped_overlap(const Counts& cand, const Counts& ref)
{
    std::size_t total_c = 0;
    std::size_t total_r = 0;
    std::size_t matches = 0;
    for (const auto& [unit, c] : cand) {
        total_c += c;
        if (auto it = ref.find(unit); it != ref.end()) {
            matches += std::min(c, it->second);
        }
    }
    for (const auto& [unit, c] : ref) {
        total_r += c;
    }
    if (total_c == 0 || total_r == 0) {
        return {};
    }
    return Score::from_pr(static_cast<double>(matches) / static_cast<double>(total_c),
                          static_cast<double>(matches) / static_cast<double>(total_r));
}

}  // namespace

UnitCounts su_units(std::span<const std::string> tokens, std::size_t dskip)
{
    UnitCounts units;
    const std::size_t n = tokens.size();
    for (std::size_t i = 0; i < n; ++i) {
        ++units[{tokens[i], std::string()}];
        const std::size_t last = std::min(n, i + dskip + 2);
        for (std::size_t j = i + 1; j < last; ++j) {
            ++units[{tokens[i], tokens[j]}];
        }
    }
    return units;
}

Score rouge_su(std::span<const std::string> candidate, std::span<const std::string> reference, std::size_t dskip)
{
    return clipped_overlap(su_units(candidate, dskip), su_units(reference, dskip));
}

Score rouge_su4_f1(std::string_view candidate, std::string_view reference)
{
    auto c = text::tokens(candidate);
    auto r = text::tokens(reference);
    return rouge_su(c, r, 4);
}

Score rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, std::size_t n)
{
    if (n == 0) {
        throw Error(ErrorCode::InvalidArgument, "rouge_n needs n >= 1");
    }
    auto grams = [n](std::span<const std::string> toks) {
        std::map<std::vector<std::string>, std::size_t> out;
        for (std::size_t i = 0; i + n <= toks.size(); ++i) {
            ++out[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                           toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
        }
        return out;
    };
    return clipped_overlap(grams(candidate), grams(reference));
}

Score rouge_n_f1(std::string_view candidate, std::string_view reference, std::size_t n)
{
    auto c = text::tokens(candidate);
    auto r = text::tokens(reference);
    return rouge_n(c, r, n);
}

double best_reference_f1(std::string_view candidate, std::span<const std::string> references)
{
    if (references.empty()) {
        throw Error(ErrorCode::EmptyReferenceList, "best_reference_f1 needs at least one reference");
    }
    auto c = text::tokens(candidate);
    double best = 0.0;
    for (const auto& ref : references) {
        auto r = text::tokens(ref);
        best = std::max(best, rouge_su(c, r, 4).f1);
    }
    return best;
}

Score document_f1(std::span<const std::string> returned, std::span<const std::string> gold)
{
    std::unordered_set<std::string_view> ret;
    for (const auto& d : returned) {
        if (!ret.insert(d).second) {
            throw Error(ErrorCode::DuplicateInReturned, "document '" + d + "' returned twice");
        }
    }
    std::unordered_set<std::string_view> g(gold.begin(), gold.end());
    if (ret.empty() || g.empty()) {
        return {};
    }
    std::size_t hits = 0;
    for (auto d : ret) {
        hits += g.contains(d) ? 1 : 0;
    }
    return Score::from_pr(static_cast<double>(hits) / static_cast<double>(ret.size()),
                          static_cast<double>(hits) / static_cast<double>(g.size()));
}

namespace {

using Interval = std::pair<std::size_t, std::size_t>;
using SectionKey = std::pair<std::string, std::string>;

std::map<SectionKey, std::vector<Interval>> merged(std::span<const corpus::SnippetSpan> spans)
{
    std::map<SectionKey, std::vector<Interval>> raw;
    for (const auto& s : spans) {
        if (s.end > s.begin) {
            raw[{s.doc_id, s.section_id}].emplace_back(s.begin, s.end);
        }
    }
    for (auto& [key, ivs] : raw) {
        std::sort(ivs.begin(), ivs.end());
        std::vector<Interval> out;
        for (const auto& iv : ivs) {
            if (!out.empty() && iv.first <= out.back().second) {
                out.back().second = std::max(out.back().second, iv.second);
            } else {
                out.push_back(iv);
            }
        }
        ivs = std::move(out);
    }
    return raw;
}

std::size_t total_length(const std::map<SectionKey, std::vector<Interval>>& m)
{
    std::size_t n = 0;
    for (const auto& [key, ivs] : m) {
        for (const auto& iv : ivs) {
            n += iv.second - iv.first;
        }
    }
    return n;
}

}  // namespace

Score snippet_f1(std::span<const corpus::SnippetSpan> returned, std::span<const corpus::SnippetSpan> gold)
{
    auto r = merged(returned);
    auto g = merged(gold);
    const std::size_t r_len = total_length(r);
    const std::size_t g_len = total_length(g);
    if (r_len == 0 || g_len == 0) {
        return {};
    }
    std::size_t overlap = 0;
    for (const auto& [key, rivs] : r) {
        auto it = g.find(key);
        if (it == g.end()) {
            continue;
        }
        const auto& givs = it->second;
        std::size_t i = 0;
        std::size_t j = 0;
        while (i < rivs.size() && j < givs.size()) {
            auto lo = std::max(rivs[i].first, givs[j].first);
            auto hi = std::min(rivs[i].second, givs[j].second);
            if (hi > lo) {
                overlap += hi - lo;
            }
            if (rivs[i].second < givs[j].second) {
                ++i;
            } else {
                ++j;
            }
        }
    }
    return Score::from_pr(static_cast<double>(overlap) / static_cast<double>(r_len),
                          static_cast<double>(overlap) / static_cast<double>(g_len));
}

EvalReport evaluate(const corpus::QuestionSet& gold, std::span<const corpus::AnswerResult> submission)
{
    std::unordered_map<std::string_view, const corpus::AnswerResult*> by_id;
    for (const auto& a : submission) {
        by_id.emplace(a.question_id, &a);
    }
    const corpus::AnswerResult empty;
    EvalReport report;
    double doc_sum = 0.0;
    double snip_sum = 0.0;
    double su4_sum = 0.0;
    for (const auto& q : gold) {
        auto it = by_id.find(q.id);
        const auto& a = it == by_id.end() ? empty : *it->second;
        QuestionEval e;
        e.question_id = q.id;
        if (!q.gold_documents.empty()) {
            e.documents = document_f1(a.documents, q.gold_documents);
            doc_sum += e.documents->f1;
            ++report.n_documents;
        }
        if (!q.gold_snippets.empty()) {
            e.snippets = snippet_f1(a.snippets, q.gold_snippets);
            snip_sum += e.snippets->f1;
            ++report.n_snippets;
        }
        if (!q.ideal_answers.empty()) {
            e.ideal_su4 = best_reference_f1(a.ideal_answer, q.ideal_answers);
            su4_sum += *e.ideal_su4;
            ++report.n_ideal;
        }
        report.questions.push_back(std::move(e));
    }
    auto mean = [](double sum, std::size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); };
    report.document_f1 = mean(doc_sum, report.n_documents);
    report.snippet_f1 = mean(snip_sum, report.n_snippets);
    report.ideal_su4_f1 = mean(su4_sum, report.n_ideal);
    return report;
}

nlohmann::json EvalReport::to_json() const
{
    using nlohmann::json;
    auto score_json = [](const std::optional<Score>& s) -> json {
        if (!s) {
            return nullptr;
        }
        return json{{"precision", s->precision}, {"recall", s->recall}, {"f1", s->f1}};
    };
    json per = json::array();
    for (const auto& q : questions) {
        per.push_back({{"id", q.question_id},
                       {"documents", score_json(q.documents)},
                       {"snippets", score_json(q.snippets)},
                       {"ideal_su4_f1", q.ideal_su4 ? json(*q.ideal_su4) : json(nullptr)}});
    }
    return json{{"questions", per},
                {"macro",
                 {{"document_f1", document_f1},
                  {"snippet_f1", snippet_f1},
                  {"ideal_su4_f1", ideal_su4_f1},
                  {"n_documents", n_documents},
                  {"n_snippets", n_snippets},
                  {"n_ideal", n_ideal}}}};
}

std::string EvalReport::to_table() const
{
    std::ostringstream out;
    std::size_t width = 8;
    for (const auto& q : questions) {
        width = std::max(width, q.question_id.size());
    }
    auto cell = [](const std::optional<double>& v) {
        char buf[32];
        if (!v) {
            return std::string("       -");
        }
        std::snprintf(buf, sizeof(buf), "%8.4f", *v);
        return std::string(buf);
    };
    auto f1_of = [](const std::optional<Score>& s) -> std::optional<double> {
        return s ? std::optional<double>(s->f1) : std::nullopt;
    };
    out << std::string(width - 8, ' ') << "question" << "   doc_f1  snip_f1  ideal_su4\n";
    for (const auto& q : questions) {
        out << std::string(width - q.question_id.size(), ' ') << q.question_id << ' ' << cell(f1_of(q.documents))
            << ' ' << cell(f1_of(q.snippets)) << "   " << cell(q.ideal_su4) << '\n';
    }
    out << std::string(width - 5, ' ') << "MACRO" << ' ' << cell(document_f1) << ' ' << cell(snippet_f1) << "   "
        << cell(ideal_su4_f1) << '\n';
    return out.str();
}

}  // namespace qfs::metrics
