#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace pf {

struct Example {
    std::string input;
    std::string output;
};

/// Token ids plus the supervision mask: mask[i] is true for output
/// tokens and the closing EOS, the only positions the loss sees.
struct EncodedExample {
    std::vector<int> ids;
    std::vector<bool> supervised;
};

/// Word-level tokenizer with single-character fallback for words outside
/// the vocabulary. Specials occupy ids 0-3.
class Tokenizer {
   public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kSep = 3;

    /// Builds specials + the given words + their characters (plus ascii
    /// letters, digits, and common punctuation as fallback units).
    static Tokenizer from_words(const std::vector<std::string>& words);

    /// The tokenizer over the bundled corpora lexicon.
    static const Tokenizer& bundled();

    int vocab_size() const { return static_cast<int>(id_to_token_.size()); }
    bool knows(const std::string& token) const { return token_to_id_.count(token) != 0; }
    int id_of(const std::string& token) const;
    const std::string& token_of(int id) const;

    /// Whitespace-split words to ids; unknown words fall back to their
    /// characters. An unknown character is a data error.
    std::vector<int> encode_text(const std::string& text) const;

    /// Space-joined surface forms; specials render as [BOS]/[EOS]/[SEP]/[PAD].
    std::string decode(std::span<const int> ids) const;

    /// BOS + input + SEP + output + EOS with the supervision mask.
    /// reserved_positions accounts for virtual tokens when checking the
    /// max_seq budget.
    EncodedExample encode_example(const Example& example, int max_seq,
                                  int reserved_positions = 0) const;

    /// BOS + input + SEP: the decoding prompt.
    std::vector<int> encode_prompt(const std::string& input) const;

   private:
    std::map<std::string, int> token_to_id_;
    std::vector<std::string> id_to_token_;
};

}  // namespace pf
