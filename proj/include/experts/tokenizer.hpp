#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "experts/error.hpp"

namespace experts {

// Whitespace word-level tokenizer with lowercasing. Keyword checks
// elsewhere reduce to exact token-id matches.
class Vocab {
public:
    static constexpr int kPadId = 0;
    static constexpr int kUnkId = 1;
    static constexpr int kEosId = 2;
    static constexpr const char* kPadTok = "<pad>";
    static constexpr const char* kUnkTok = "<unk>";
    static constexpr const char* kEosTok = "<eos>";

    // Frequency-ranked over the corpus, ties broken lexicographically;
    // specials occupy ids 0..2. max_size caps the total vocab.
    static Vocab build(const std::vector<std::string>& corpus, int max_size);

    // Synthetic vocab: specials plus the given tokens in order.
    static Vocab from_tokens(const std::vector<std::string>& tokens);

    int size() const { return static_cast<int>(id_to_token_.size()); }
    std::optional<int> lookup(std::string_view token) const;
    const std::string& token(int id) const;

    // "token<TAB>id" lines sorted by token.
    void save(const std::string& path) const;
    static Vocab load(const std::string& path);

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;

    void index();
};

struct Encoded {
    std::vector<int> ids;
    std::vector<uint8_t> pad_mask; // 1 at appended pad positions
    int content_len = 0;           // positions before padding
    int oov_count = 0;             // words mapped to <unk>

    bool has_oov() const { return oov_count > 0; }
};

// Lowercases, splits on whitespace, maps through the vocab. pad_to (when
// given) must be >= the unpadded length; the mask marks exactly the
// appended pads.
Encoded encode(const Vocab& vocab, std::string_view text, std::optional<int> pad_to = {});

// Inverse of encode on in-vocab text; pads are dropped.
std::string decode(const Vocab& vocab, const std::vector<int>& ids);

std::vector<std::string> split_words(std::string_view text);
std::string lowercase(std::string_view text);

// Word count of the whitespace tokenization (vocab-independent).
int token_length(std::string_view text);

} // namespace experts
