#include "qfs/textproc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <locale>
#include <map>

#include "qfs/error.hpp"

namespace qfs::text {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

// Classification through the C.UTF-8 locale when present; ASCII rules plus
// a permissive "non-ASCII non-punctuation is a letter" fallback otherwise.
class CharClass {
  public:
    CharClass()
    {
        try {
            locale_ = std::locale("C.UTF-8");
            facet_ = &std::use_facet<std::ctype<wchar_t>>(locale_);
        } catch (const std::runtime_error&) {
            facet_ = nullptr;
        }
    }

    bool alnum(char32_t c) const
    {
        if (c < 0x80) {
            return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
        }
        if (facet_ != nullptr) {
            return facet_->is(std::ctype_base::alnum, static_cast<wchar_t>(c));
        }
        return fallback_letter(c);
    }

    bool upper(char32_t c) const
    {
        if (c < 0x80) {
            return c >= 'A' && c <= 'Z';
        }
        return facet_ != nullptr && facet_->is(std::ctype_base::upper, static_cast<wchar_t>(c));
    }

    bool digit(char32_t c) const { return c >= '0' && c <= '9'; }

    bool space(char32_t c) const
    {
        if (c < 0x80) {
            return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
        }
        if (facet_ != nullptr) {
            return facet_->is(std::ctype_base::space, static_cast<wchar_t>(c));
        }
        return c == 0x00A0 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x3000;
    }

    char32_t lower(char32_t c) const
    {
        if (c < 0x80) {
            return (c >= 'A' && c <= 'Z') ? c + 32 : c;
        }
        if (facet_ != nullptr) {
            return static_cast<char32_t>(facet_->tolower(static_cast<wchar_t>(c)));
        }
        return c;
    }

  private:
    static bool fallback_letter(char32_t c)
    {
        if (c < 0xC0 || c == 0xD7 || c == 0xF7) {
            return false;
        }
        if ((c >= 0x2000 && c <= 0x2BFF) || (c >= 0x3000 && c <= 0x303F) || (c >= 0xFF00 && c <= 0xFF0F)) {
            return false;
        }
        return c != kReplacement;
    }

    std::locale locale_;
    const std::ctype<wchar_t>* facet_ = nullptr;
};

const CharClass& chars()
{
    static const CharClass instance;
    return instance;
}

bool is_terminator(char32_t c) { return c == '.' || c == '!' || c == '?'; }

bool is_closer(char32_t c)
{
    return c == '"' || c == '\'' || c == ')' || c == ']' || c == '}' || c == 0x201D || c == 0x2019 || c == 0x00BB;
}

bool is_opener(char32_t c)
{
    return c == '"' || c == '\'' || c == '(' || c == '[' || c == 0x201C || c == 0x2018 || c == 0x00AB;
}

}  // namespace

std::u32string decode_utf8(std::string_view s)
{
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        auto b0 = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        }
        bool ok = len > 0 && i + len <= s.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
            } else {
                cp = (cp << 6) | (b & 0x3F);
            }
        }
        if (!ok) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string encode_utf8(std::u32string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (char32_t c : s) {
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else if (c < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else if (c < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (c >> 12)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (c >> 18)));
            out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

std::size_t char_length(std::string_view utf8) { return decode_utf8(utf8).size(); }

std::string substr_chars(std::string_view utf8, std::size_t begin, std::size_t end)
{
    auto cps = decode_utf8(utf8);
    end = std::min(end, cps.size());
    if (begin >= end) {
        return {};
    }
    return encode_utf8(std::u32string_view(cps).substr(begin, end - begin));
}

std::vector<TokenSpan> tokenize(std::string_view text)
{
    const auto& cc = chars();
    auto cps = decode_utf8(text);
    std::vector<TokenSpan> out;
    std::size_t i = 0;
    while (i < cps.size()) {
        if (!cc.alnum(cps[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        std::u32string lowered;
        while (j < cps.size() && cc.alnum(cps[j])) {
            lowered.push_back(cc.lower(cps[j]));
            ++j;
        }
        out.push_back({encode_utf8(lowered), i, j});
        i = j;
    }
    return out;
}

std::vector<std::string> tokens(std::string_view text)
{
    auto spans = tokenize(text);
    std::vector<std::string> out;
    out.reserve(spans.size());
    for (auto& s : spans) {
        out.push_back(std::move(s.surface));
    }
    return out;
}

const std::unordered_set<std::string>& abbreviations()
{
    static const std::unordered_set<std::string> list = {
        "dr", "mr", "mrs", "ms", "prof", "sr", "jr", "st", "vs", "etc", "e.g", "i.e", "cf", "fig", "figs",
        "al", "approx", "inc", "ltd", "co", "no", "nos", "vol", "eq", "eqs", "ref", "refs", "ca", "resp",
        "spp", "sp", "ph.d", "u.s", "viz", "dept", "univ", "jan", "feb", "mar", "apr", "jun", "jul", "aug",
        "sep", "sept", "oct", "nov", "dec",
    };
    return list;
}

std::vector<SentenceSpan> split_sentences(std::string_view text)
{
    const auto& cc = chars();
    auto cps = decode_utf8(text);
    const std::size_t n = cps.size();
    std::vector<SentenceSpan> out;

    auto emit = [&](std::size_t b, std::size_t e) {
        while (e > b && cc.space(cps[e - 1])) {
            --e;
        }
        if (e > b) {
            out.push_back({out.size(), b, e, encode_utf8(std::u32string_view(cps).substr(b, e - b))});
        }
    };

    auto preceded_by_abbreviation = [&](std::size_t period) {
        std::size_t k = period;
        while (k > 0 && (cc.alnum(cps[k - 1]) || cps[k - 1] == '.')) {
            --k;
        }
        std::u32string word;
        for (std::size_t q = k; q < period; ++q) {
            word.push_back(cc.lower(cps[q]));
        }
        return !word.empty() && abbreviations().contains(encode_utf8(word));
    };

    std::size_t start = 0;
    while (start < n && cc.space(cps[start])) {
        ++start;
    }
    std::size_t pos = start;
    while (pos < n) {
        if (!is_terminator(cps[pos])) {
            ++pos;
            continue;
        }
        std::size_t run_end = pos;
        while (run_end < n && is_terminator(cps[run_end])) {
            ++run_end;
        }
        std::size_t close_end = run_end;
        while (close_end < n && is_closer(cps[close_end])) {
            ++close_end;
        }
        if (close_end < n && cc.space(cps[close_end])) {
            std::size_t next = close_end;
            while (next < n && cc.space(cps[next])) {
                ++next;
            }
            bool starts_sentence = false;
            if (next < n) {
                char32_t c = cps[next];
                starts_sentence = cc.upper(c) || cc.digit(c)
                    || (is_opener(c) && next + 1 < n && (cc.upper(cps[next + 1]) || cc.digit(cps[next + 1])));
            }
            bool abbreviation = cps[pos] == '.' && run_end == pos + 1 && preceded_by_abbreviation(pos);
            if (starts_sentence && !abbreviation) {
                emit(start, close_end);
                start = next;
                pos = next;
                continue;
            }
        }
        pos = close_end;
    }
    if (start < n) {
        emit(start, n);
    }
    return out;
}

StopwordSet load_stopwords(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::MalformedInput, "cannot open stopword list '" + path + "'");
    }
    StopwordSet out;
    std::string line;
    while (std::getline(in, line)) {
        auto b = line.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) {
            continue;
        }
        auto e = line.find_last_not_of(" \t\r\n");
        out.insert(line.substr(b, e - b + 1));
    }
    return out;
}

std::vector<std::string> remove_stopwords(std::vector<std::string> toks, const StopwordSet& stop)
{
    if (stop.empty()) {
        return toks;
    }
    std::erase_if(toks, [&](const std::string& t) { return stop.contains(t); });
    return toks;
}

SparseVector::SparseVector(std::vector<Entry> entries) : entries_(std::move(entries))
{
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].second == 0.0 || (i > 0 && entries_[i - 1].first >= entries_[i].first)) {
            throw Error(ErrorCode::InvalidArgument, "sparse vector entries must be non-zero with increasing indices");
        }
    }
}

TfidfModel TfidfModel::fit(std::span<const std::vector<std::string>> docs)
{
    if (docs.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "tf-idf fit needs at least one document");
    }
    std::map<std::string, std::size_t> df;
    for (const auto& doc : docs) {
        std::unordered_set<std::string_view> seen(doc.begin(), doc.end());
        for (auto term : seen) {
            ++df[std::string(term)];
        }
    }
    TfidfModel model;
    model.n_docs_ = docs.size();
    model.idf_.reserve(df.size());
    const double n = static_cast<double>(docs.size());
    for (const auto& [term, count] : df) {
        model.vocabulary_.emplace(term, static_cast<std::uint32_t>(model.idf_.size()));
        model.idf_.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    return model;
}

std::uint32_t TfidfModel::column(const std::string& term) const
{
    auto it = vocabulary_.find(term);
    if (it == vocabulary_.end()) {
        throw Error(ErrorCode::InvalidArgument, "term '" + term + "' not in vocabulary");
    }
    return it->second;
}

double TfidfModel::idf(const std::string& term) const { return idf_[column(term)]; }

SparseVector TfidfModel::vector(std::span<const std::string> toks) const
{
    std::map<std::uint32_t, double> tf;
    for (const auto& t : toks) {
        auto it = vocabulary_.find(t);
        if (it != vocabulary_.end()) {
            tf[it->second] += 1.0;
        }
    }
    std::vector<SparseVector::Entry> entries;
    entries.reserve(tf.size());
    double norm2 = 0.0;
    for (const auto& [col, count] : tf) {
        double w = count * idf_[col];
        entries.emplace_back(col, w);
        norm2 += w * w;
    }
    if (entries.empty()) {
        return {};
    }
    const double norm = std::sqrt(norm2);
    for (auto& e : entries) {
        e.second /= norm;
    }
    return SparseVector(std::move(entries));
}

double cosine(const SparseVector& a, const SparseVector& b)
{
    auto ea = a.entries();
    auto eb = b.entries();
    std::size_t i = 0;
    std::size_t j = 0;
    double dot = 0.0;
    while (i < ea.size() && j < eb.size()) {
        if (ea[i].first == eb[j].first) {
            dot += ea[i].second * eb[j].second;
            ++i;
            ++j;
        } else if (ea[i].first < eb[j].first) {
            ++i;
        } else {
            ++j;
        }
    }
    return std::clamp(dot, 0.0, 1.0);
}

}  // namespace qfs::text
