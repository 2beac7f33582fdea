#include "pf/tokenizer.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "pf/dataset.hpp"
#include "pf/errors.hpp"

namespace pf {

namespace {
const char* kSpecialSurface[4] = {"[PAD]", "[BOS]", "[EOS]", "[SEP]"};
}

Tokenizer Tokenizer::from_words(const std::vector<std::string>& words) {
    Tokenizer t;
    for (const char* s : kSpecialSurface) {
        t.token_to_id_.emplace(s, static_cast<int>(t.id_to_token_.size()));
        t.id_to_token_.push_back(s);
    }
    std::set<std::string> units(words.begin(), words.end());
    std::set<char> chars;
    for (const auto& w : words)
        for (char c : w) chars.insert(c);
    for (char c = 'a'; c <= 'z'; ++c) chars.insert(c);
    for (char c = '0'; c <= '9'; ++c) chars.insert(c);
    for (char c : std::string(".,!?+-*/=:;()'")) chars.insert(c);
    for (char c : chars) units.insert(std::string(1, c));
    for (const auto& u : units) {
        if (u.empty() || t.token_to_id_.count(u)) continue;
        t.token_to_id_.emplace(u, static_cast<int>(t.id_to_token_.size()));
        t.id_to_token_.push_back(u);
    }
    return t;
}

const Tokenizer& Tokenizer::bundled() {
    static const Tokenizer instance = Tokenizer::from_words(corpora::lexicon());
    return instance;
}

int Tokenizer::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    if (it == token_to_id_.end()) throw DataError("token not in vocabulary: '" + token + "'");
    return it->second;
}

const std::string& Tokenizer::token_of(int id) const {
    if (id < 0 || id >= vocab_size()) {
        throw DataError("token id " + std::to_string(id) + " outside vocabulary");
    }
    return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<int> Tokenizer::encode_text(const std::string& text) const {
    std::vector<int> ids;
    std::istringstream in(text);
    std::string word;
    while (in >> word) {
        if (auto it = token_to_id_.find(word); it != token_to_id_.end()) {
            ids.push_back(it->second);
            continue;
        }
        for (char c : word) {
            auto it = token_to_id_.find(std::string(1, c));
            if (it == token_to_id_.end()) {
                throw DataError("no vocabulary entry for character '" + std::string(1, c) +
                                "' in word '" + word + "'");
            }
            ids.push_back(it->second);
        }
    }
    return ids;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        if (!out.empty()) out += ' ';
        out += token_of(id);
    }
    return out;
}

EncodedExample Tokenizer::encode_example(const Example& example, int max_seq,
                                         int reserved_positions) const {
    if (example.input.empty() || example.output.empty()) {
        throw DataError("example with empty input or output cannot be encoded");
    }
    EncodedExample out;
    out.ids.push_back(kBos);
    for (int id : encode_text(example.input)) out.ids.push_back(id);
    out.ids.push_back(kSep);
    out.supervised.assign(out.ids.size(), false);
    for (int id : encode_text(example.output)) {
        out.ids.push_back(id);
        out.supervised.push_back(true);
    }
    out.ids.push_back(kEos);
    out.supervised.push_back(true);
    if (static_cast<int>(out.ids.size()) + reserved_positions > max_seq) {
        throw LengthError("encoded example needs " + std::to_string(out.ids.size()) + " + " +
                          std::to_string(reserved_positions) +
                          " reserved positions, over max_seq=" + std::to_string(max_seq) +
                          " (input: \"" + example.input + "\")");
    }
    return out;
}

std::vector<int> Tokenizer::encode_prompt(const std::string& input) const {
    std::vector<int> ids;
    ids.push_back(kBos);
    for (int id : encode_text(input)) ids.push_back(id);
    ids.push_back(kSep);
    return ids;
}

}  // namespace pf
