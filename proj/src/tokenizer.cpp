#include "experts/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace experts {

std::string lowercase(std::string_view text) {
    std::string out(text);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) words.emplace_back(text.substr(start, i - start));
    }
    return words;
}

int token_length(std::string_view text) {
    return static_cast<int>(split_words(text).size());
}

void Vocab::index() {
    token_to_id_.clear();
    for (size_t i = 0; i < id_to_token_.size(); ++i) {
        token_to_id_[id_to_token_[i]] = static_cast<int>(i);
    }
}

Vocab Vocab::build(const std::vector<std::string>& corpus, int max_size) {
    if (corpus.empty()) fail(ErrorClass::validation, "build_vocab: empty corpus");
    if (max_size < 3)
        fail(ErrorClass::validation,
             "build_vocab: max_size " + std::to_string(max_size) +
                 " cannot hold the 3 special tokens");
    std::map<std::string, int64_t> freq; // ordered map makes ties lexicographic
    for (const std::string& line : corpus) {
        for (const std::string& w : split_words(lowercase(line))) ++freq[w];
    }
    std::vector<std::pair<std::string, int64_t>> ranked(freq.begin(), freq.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    Vocab v;
    v.id_to_token_ = {kPadTok, kUnkTok, kEosTok};
    for (const auto& [tok, count] : ranked) {
        if (static_cast<int>(v.id_to_token_.size()) >= max_size) break;
        v.id_to_token_.push_back(tok);
    }
    v.index();
    return v;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
    Vocab v;
    v.id_to_token_ = {kPadTok, kUnkTok, kEosTok};
    for (const std::string& t : tokens) {
        std::string lt = lowercase(t);
        if (v.token_to_id_.count(lt)) continue;
        v.token_to_id_[lt] = 0; // temp marker, rebuilt below
        v.id_to_token_.push_back(lt);
    }
    v.index();
    return v;
}

std::optional<int> Vocab::lookup(std::string_view token) const {
    auto it = token_to_id_.find(lowercase(token));
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
}

const std::string& Vocab::token(int id) const {
    if (id < 0 || id >= size())
        fail(ErrorClass::validation, "token id " + std::to_string(id) + " out of range");
    return id_to_token_[static_cast<size_t>(id)];
}

void Vocab::save(const std::string& path) const {
    std::vector<std::pair<std::string, int>> rows;
    rows.reserve(id_to_token_.size());
    for (size_t i = 0; i < id_to_token_.size(); ++i)
        rows.push_back({id_to_token_[i], static_cast<int>(i)});
    std::sort(rows.begin(), rows.end());
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorClass::io, "cannot open '" + path + "' for writing");
    for (const auto& [tok, id] : rows) out << tok << '\t' << id << '\n';
    if (!out) fail(ErrorClass::io, "write failure on '" + path + "'");
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorClass::io, "cannot open vocab '" + path + "'");
    std::vector<std::pair<int, std::string>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos)
            fail(ErrorClass::format,
                 "vocab '" + path + "' line " + std::to_string(lineno) + ": missing tab");
        int id;
        try {
            id = std::stoi(line.substr(tab + 1));
        } catch (const std::exception&) {
            fail(ErrorClass::format,
                 "vocab '" + path + "' line " + std::to_string(lineno) + ": bad id");
        }
        rows.push_back({id, line.substr(0, tab)});
    }
    if (rows.empty()) fail(ErrorClass::format, "vocab '" + path + "' is empty");
    std::sort(rows.begin(), rows.end());
    Vocab v;
    v.id_to_token_.resize(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].first != static_cast<int>(i))
            fail(ErrorClass::format,
                 "vocab '" + path + "': ids are not dense at id " + std::to_string(rows[i].first));
        v.id_to_token_[i] = rows[i].second;
    }
    if (v.id_to_token_.size() < 3 || v.id_to_token_[0] != kPadTok ||
        v.id_to_token_[1] != kUnkTok || v.id_to_token_[2] != kEosTok)
        fail(ErrorClass::format, "vocab '" + path + "': special tokens missing or misplaced");
    v.index();
    return v;
}

Encoded encode(const Vocab& vocab, std::string_view text, std::optional<int> pad_to) {
    Encoded enc;
    for (const std::string& w : split_words(lowercase(text))) {
        auto id = vocab.lookup(w);
        if (!id) {
            enc.ids.push_back(Vocab::kUnkId);
            ++enc.oov_count;
        } else {
            enc.ids.push_back(*id);
        }
    }
    enc.content_len = static_cast<int>(enc.ids.size());
    enc.pad_mask.assign(enc.ids.size(), 0);
    if (pad_to) {
        if (*pad_to < enc.content_len)
            fail(ErrorClass::validation,
                 "encode: pad_to " + std::to_string(*pad_to) + " is smaller than content length " +
                     std::to_string(enc.content_len));
        while (static_cast<int>(enc.ids.size()) < *pad_to) {
            enc.ids.push_back(Vocab::kPadId);
            enc.pad_mask.push_back(1);
        }
    }
    return enc;
}

std::string decode(const Vocab& vocab, const std::vector<int>& ids) {
    std::string out;
    for (int id : ids) {
        if (id == Vocab::kPadId) continue;
        if (!out.empty()) out += ' ';
        out += vocab.token(id);
    }
    return out;
}

} // namespace experts
