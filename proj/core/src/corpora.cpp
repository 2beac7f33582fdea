#include <algorithm>
#include <array>

#include "pf/dataset.hpp"
#include "pf/errors.hpp"
#include "pf/rng.hpp"

namespace pf::corpora {

namespace {

const std::array<const char*, 6> kSubjects = {"the movie", "the film",  "the show",
                                              "the book",  "the plot", "the acting"};
const std::array<const char*, 2> kCopulas = {"was", "is"};
const std::array<const char*, 4> kAdverbs = {"", "really", "truly", "very"};
const std::array<const char*, 6> kPositive = {"great",      "wonderful", "brilliant",
                                              "delightful", "superb",    "enjoyable"};
const std::array<const char*, 6> kNegative = {"terrible", "awful",         "boring",
                                              "dreadful", "disappointing", "bland"};
const std::array<const char*, 3> kCopySymbols = {"a", "b", "c"};
const std::array<const char*, 10> kNumberWords = {"zero", "one",  "two",   "three", "four",
                                                  "five", "six",  "seven", "eight", "nine"};

std::vector<std::string> sentiment_pool(bool positive) {
    std::vector<std::string> out;
    for (const char* subject : kSubjects)
        for (const char* copula : kCopulas)
            for (const char* adverb : kAdverbs)
                for (const char* adjective : positive ? kPositive : kNegative) {
                    std::string s = std::string(subject) + " " + copula + " ";
                    if (*adverb) s += std::string(adverb) + " ";
                    s += adjective;
                    out.push_back(std::move(s));
                }
    return out;
}

struct SplitSpan {
    std::size_t offset;
    std::size_t size;
};

SplitSpan split_span(const std::string& split, std::size_t train, std::size_t validation,
                     std::size_t test, const std::string& corpus) {
    if (split == "train") return {0, train};
    if (split == "validation") return {train, validation};
    if (split == "test") return {train + validation, test};
    throw ConfigError("corpus " + corpus + ": unknown split '" + split + "'");
}

std::vector<Record> generate_sentiment(const std::string& split, std::uint64_t seed) {
    Rng rng = Rng::seeded(seed).derive("corpus:toy-sentiment");
    // 100/25/25 per class, drawn from the shuffled template pools.
    std::vector<Record> pool;
    for (int positive = 0; positive < 2; ++positive) {
        auto sentences = sentiment_pool(positive == 1);
        rng.shuffle(sentences);
        sentences.resize(150);
        for (const auto& s : sentences) {
            pool.push_back({{"text", s}, {"label", positive ? "1" : "0"}});
        }
    }
    // pool layout: 150 positive-class rows after 150 negative... interleave
    // per split so every split stays perfectly balanced.
    const SplitSpan span = split_span(split, 200, 50, 50, "toy-sentiment");
    std::vector<Record> out;
    const std::size_t per_class = span.size / 2;
    const std::size_t class_offset = span.offset / 2;
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            out.push_back(pool[c * 150 + class_offset + i]);
        }
    }
    Rng order = Rng::seeded(seed).derive("corpus:toy-sentiment:order:" + split);
    order.shuffle(out);
    return out;
}

std::vector<Record> generate_parity(const std::string& split, std::uint64_t seed) {
    std::vector<Record> all;
    for (int v = 0; v < 256; ++v) {
        std::string bits;
        int ones = 0;
        for (int b = 7; b >= 0; --b) {
            const int bit = (v >> b) & 1;
            ones += bit;
            if (!bits.empty()) bits += ' ';
            bits += static_cast<char>('0' + bit);
        }
        all.push_back({{"bits", bits}, {"label", ones % 2 == 0 ? "0" : "1"}});
    }
    Rng rng = Rng::seeded(seed).derive("corpus:parity");
    rng.shuffle(all);
    if (split == "train") return all;

    // validation and test take disjoint balanced slices of the pool
    std::vector<Record> even, odd;
    for (const auto& r : all) (r.at("label") == "0" ? even : odd).push_back(r);
    std::vector<Record> out;
    std::size_t offset = 0;
    if (split == "validation") {
        offset = 0;
    } else if (split == "test") {
        offset = 32;
    } else {
        throw ConfigError("corpus parity: unknown split '" + split + "'");
    }
    for (std::size_t i = 0; i < 32; ++i) {
        out.push_back(even[offset + i]);
        out.push_back(odd[offset + i]);
    }
    Rng order = Rng::seeded(seed).derive("corpus:parity:order:" + split);
    order.shuffle(out);
    return out;
}

std::vector<Record> generate_copy(const std::string& split, std::uint64_t seed) {
    Rng rng = Rng::seeded(seed).derive("corpus:copy");
    std::vector<Record> pool;
    for (int i = 0; i < 300; ++i) {
        std::string span;
        for (int j = 0; j < 3; ++j) {
            if (!span.empty()) span += ' ';
            span += kCopySymbols[rng.below(kCopySymbols.size())];
        }
        pool.push_back({{"span", span}, {"echo", span}});
    }
    const SplitSpan span = split_span(split, 200, 50, 50, "copy");
    return {pool.begin() + static_cast<std::ptrdiff_t>(span.offset),
            pool.begin() + static_cast<std::ptrdiff_t>(span.offset + span.size)};
}

std::vector<Record> generate_arith(const std::string& split, std::uint64_t seed) {
    Rng rng = Rng::seeded(seed).derive("corpus:toy-arith");
    // sums 2..9, 20/5/5 per sum so every split is class-balanced
    std::vector<std::vector<Record>> per_sum;
    for (int s = 2; s <= 9; ++s) {
        std::vector<std::pair<int, int>> pairs;
        for (int a = 0; a <= 9; ++a) {
            const int b = s - a;
            if (b >= 0 && b <= 9) pairs.emplace_back(a, b);
        }
        rng.shuffle(pairs);
        std::vector<Record> rows;
        for (int i = 0; i < 30; ++i) {
            const auto& [a, b] = pairs[static_cast<std::size_t>(i) % pairs.size()];
            rows.push_back({{"a", std::to_string(a)},
                            {"b", std::to_string(b)},
                            {"label", std::to_string(s)}});
        }
        per_sum.push_back(std::move(rows));
    }
    const SplitSpan span = split_span(split, 20, 5, 5, "toy-arith");  // per class
    std::vector<Record> out;
    for (const auto& rows : per_sum) {
        for (std::size_t i = 0; i < span.size; ++i) out.push_back(rows[span.offset + i]);
    }
    Rng order = Rng::seeded(seed).derive("corpus:toy-arith:order:" + split);
    order.shuffle(out);
    return out;
}

}  // namespace

std::vector<std::string> lexicon() {
    std::vector<std::string> words;
    auto add_phrase = [&](const std::string& phrase) {
        std::string word;
        for (char c : phrase + " ") {
            if (c == ' ') {
                if (!word.empty()) words.push_back(word);
                word.clear();
            } else {
                word += c;
            }
        }
    };
    for (const char* s : kSubjects) add_phrase(s);
    for (const char* s : kCopulas) add_phrase(s);
    for (const char* s : kAdverbs) add_phrase(s);
    for (const char* s : kPositive) add_phrase(s);
    for (const char* s : kNegative) add_phrase(s);
    for (const char* s : kCopySymbols) add_phrase(s);
    for (const char* s : kNumberWords) add_phrase(s);
    words.emplace_back("positive");
    words.emplace_back("negative");
    words.emplace_back("even");
    words.emplace_back("odd");
    for (int d = 0; d <= 9; ++d) words.push_back(std::to_string(d));
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    return words;
}

std::vector<DatasetDescriptor> descriptors() {
    std::vector<DatasetDescriptor> out;
    {
        DatasetDescriptor d;
        d.name = "toy-sentiment";
        d.builtin_id = "toy-sentiment";
        d.input_cols = {"text"};
        d.output_col = "label";
        d.label_verbalizer = {{"0", "negative"}, {"1", "positive"}};
        d.split_sizes = {{"train", 200}, {"validation", 50}, {"test", 50}};
        d.task_kind = DatasetDescriptor::TaskKind::classification;
        out.push_back(std::move(d));
    }
    {
        DatasetDescriptor d;
        d.name = "parity";
        d.builtin_id = "parity";
        d.input_cols = {"bits"};
        d.output_col = "label";
        d.label_verbalizer = {{"0", "even"}, {"1", "odd"}};
        d.split_sizes = {{"train", 256}, {"validation", 64}, {"test", 64}};
        d.task_kind = DatasetDescriptor::TaskKind::classification;
        out.push_back(std::move(d));
    }
    {
        DatasetDescriptor d;
        d.name = "copy";
        d.builtin_id = "copy";
        d.input_cols = {"span"};
        d.output_col = "echo";
        d.split_sizes = {{"train", 200}, {"validation", 50}, {"test", 50}};
        d.task_kind = DatasetDescriptor::TaskKind::generation;
        out.push_back(std::move(d));
    }
    {
        DatasetDescriptor d;
        d.name = "toy-arith";
        d.builtin_id = "toy-arith";
        d.input_cols = {"a", "b"};
        d.output_col = "label";
        d.label_verbalizer = {{"2", "two"},   {"3", "three"}, {"4", "four"}, {"5", "five"},
                              {"6", "six"},   {"7", "seven"}, {"8", "eight"}, {"9", "nine"}};
        d.split_sizes = {{"train", 160}, {"validation", 40}, {"test", 40}};
        d.task_kind = DatasetDescriptor::TaskKind::classification;
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<Record> generate(const std::string& builtin_id, const std::string& split,
                             std::uint64_t seed) {
    if (builtin_id == "toy-sentiment") return generate_sentiment(split, seed);
    if (builtin_id == "parity") return generate_parity(split, seed);
    if (builtin_id == "copy") return generate_copy(split, seed);
    if (builtin_id == "toy-arith") return generate_arith(split, seed);
    throw ConfigError("unknown bundled corpus '" + builtin_id + "'");
}

}  // namespace pf::corpora
