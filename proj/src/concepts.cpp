#include "experts/concepts.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>

#include <json.hpp>

#include "experts/io.hpp"
#include "experts/rng.hpp"
#include "experts/tokenizer.hpp"

namespace experts {

void ConceptDataset::validate(bool paper_mode) const {
    std::set<std::string> pos_set(positives.begin(), positives.end());
    for (const std::string& s : negatives) {
        if (pos_set.count(s))
            fail(ErrorClass::validation,
                 "concept '" + concept_id + "': sentence appears on both sides: \"" + s + "\"");
    }
    for (const std::string& s : positives) {
        if (token_length(s) > pad_length)
            fail(ErrorClass::validation, "concept '" + concept_id + "': pad_length " +
                                             std::to_string(pad_length) +
                                             " shorter than a positive sentence");
    }
    for (const std::string& s : negatives) {
        if (token_length(s) > pad_length)
            fail(ErrorClass::validation, "concept '" + concept_id + "': pad_length " +
                                             std::to_string(pad_length) +
                                             " shorter than a negative sentence");
    }
    if (paper_mode) {
        if (n_pos() < 100 || n_pos() > 1000)
            fail(ErrorClass::validation,
                 "concept '" + concept_id + "': N+ = " + std::to_string(n_pos()) +
                     " outside [100, 1000]");
        if (n_neg() < 100 || n_neg() > 1000)
            fail(ErrorClass::validation,
                 "concept '" + concept_id + "': N- = " + std::to_string(n_neg()) +
                     " outside [100, 1000]");
    }
}

void save_concept_jsonl(const std::string& path, const ConceptDataset& ds) {
    std::string out;
    for (const std::string& s : ds.positives) {
        nlohmann::json j{{"text", s}, {"label", 1}};
        out += j.dump();
        out += '\n';
    }
    for (const std::string& s : ds.negatives) {
        nlohmann::json j{{"text", s}, {"label", 0}};
        out += j.dump();
        out += '\n';
    }
    atomic_write_file(path, out);
}

ConceptDataset load_concept_jsonl(const std::string& path, const std::string& concept_id) {
    std::string text = read_file(path);
    ConceptDataset ds;
    ds.concept_id = concept_id;
    int lineno = 0;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            fail(ErrorClass::format,
                 "'" + path + "' line " + std::to_string(lineno) + ": invalid JSON");
        if (!j.is_object() || !j.contains("text") || !j.contains("label") ||
            !j["text"].is_string() || !j["label"].is_number_integer())
            fail(ErrorClass::format, "'" + path + "' line " + std::to_string(lineno) +
                                         ": expected {\"text\": str, \"label\": 0|1}");
        int label = j["label"].get<int>();
        if (label != 0 && label != 1)
            fail(ErrorClass::format, "'" + path + "' line " + std::to_string(lineno) +
                                         ": label " + std::to_string(label) +
                                         " outside {0,1}");
        if (label == 1)
            ds.positives.push_back(j["text"].get<std::string>());
        else
            ds.negatives.push_back(j["text"].get<std::string>());
    }
    if (ds.size() == 0) fail(ErrorClass::format, "'" + path + "': no records");
    ds.pad_length = 0;
    for (const std::string& s : ds.positives) ds.pad_length = std::max(ds.pad_length, token_length(s));
    for (const std::string& s : ds.negatives) ds.pad_length = std::max(ds.pad_length, token_length(s));
    return ds;
}

std::string sense_lemma(const std::string& sense_id) {
    size_t p = sense_id.find('%');
    if (p == std::string::npos || p == 0)
        fail(ErrorClass::format, "sense id '" + sense_id + "' has no lemma%key shape");
    return sense_id.substr(0, p);
}

std::string OneSecInstance::lemma() const { return sense_lemma(sense_id); }

std::string ParseIssue::to_string() const {
    std::string out = "line " + std::to_string(line);
    if (!instance_id.empty()) out += " (instance '" + instance_id + "')";
    out += ": " + message;
    return out;
}

namespace {

bool valid_sense_key(const std::string& s) {
    size_t p = s.find('%');
    if (p == std::string::npos || p == 0 || p + 1 >= s.size()) return false;
    if (!std::isdigit(static_cast<unsigned char>(s[p + 1]))) return false;
    for (size_t i = p + 1; i < s.size(); ++i) {
        char c = s[i];
        if (!std::isdigit(static_cast<unsigned char>(c)) && c != ':') return false;
    }
    return true;
}

std::string unescape_entities(const std::string& s, int line) {
    std::string out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out += s[i++];
            continue;
        }
        size_t semi = s.find(';', i);
        if (semi == std::string::npos || semi - i > 8) {
            // Permissive: corpora contain stray ampersands.
            out += s[i++];
            continue;
        }
        std::string ent = s.substr(i + 1, semi - i - 1);
        if (ent == "amp") out += '&';
        else if (ent == "lt") out += '<';
        else if (ent == "gt") out += '>';
        else if (ent == "quot") out += '"';
        else if (ent == "apos") out += '\'';
        else if (!ent.empty() && ent[0] == '#') {
            int code = 0;
            try {
                code = std::stoi(ent.substr(1));
            } catch (const std::exception&) {
                fail(ErrorClass::format,
                     "line " + std::to_string(line) + ": bad numeric entity &" + ent + ";");
            }
            if (code < 1 || code > 127)
                out += '?'; // non-ASCII entities degrade to a placeholder
            else
                out += static_cast<char>(code);
        } else {
            out += '&';
            ++i;
            continue;
        }
        i = semi + 1;
    }
    return out;
}

struct XmlTag {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attrs;
    bool closing = false;
    bool self_closing = false;
    int line = 0;

    std::optional<std::string> attr(const std::string& key) const {
        for (const auto& [k, v] : attrs)
            if (k == key) return v;
        return std::nullopt;
    }
};

// Minimal pull scanner over the fragment stream with line tracking.
class XmlCursor {
public:
    explicit XmlCursor(const std::string& text) : text_(text) {}

    int line() const { return line_; }
    bool at_end() const { return pos_ >= text_.size(); }

    // Text up to the next '<' (entities resolved, whitespace kept).
    std::string take_text() {
        std::string raw;
        int start_line = line_;
        while (pos_ < text_.size() && text_[pos_] != '<') {
            raw += advance();
        }
        return unescape_entities(raw, start_line);
    }

    // Parses the tag at the cursor (which must sit on '<'). Skips
    // comments and processing instructions transparently.
    std::optional<XmlTag> take_tag() {
        for (;;) {
            if (at_end()) return std::nullopt;
            if (text_[pos_] != '<')
                fail(ErrorClass::internal, "take_tag called off a tag boundary");
            if (match_ahead("<!--")) {
                skip_until("-->");
                skip_text_to_tag();
                if (at_end()) return std::nullopt;
                continue;
            }
            if (match_ahead("<?")) {
                skip_until("?>");
                skip_text_to_tag();
                if (at_end()) return std::nullopt;
                continue;
            }
            break;
        }
        XmlTag tag;
        tag.line = line_;
        advance(); // '<'
        if (!at_end() && text_[pos_] == '/') {
            tag.closing = true;
            advance();
        }
        tag.name = take_name();
        if (tag.name.empty())
            fail(ErrorClass::format, "line " + std::to_string(tag.line) + ": tag without a name");
        skip_ws();
        while (!at_end() && text_[pos_] != '>' && text_[pos_] != '/') {
            std::string key = take_name();
            if (key.empty())
                fail(ErrorClass::format,
                     "line " + std::to_string(line_) + ": malformed attribute in <" +
                         tag.name + ">");
            skip_ws();
            if (at_end() || text_[pos_] != '=')
                fail(ErrorClass::format, "line " + std::to_string(line_) + ": attribute '" +
                                             key + "' missing '='");
            advance();
            skip_ws();
            if (at_end() || (text_[pos_] != '"' && text_[pos_] != '\''))
                fail(ErrorClass::format, "line " + std::to_string(line_) + ": attribute '" +
                                             key + "' missing quoted value");
            char quote = advance();
            std::string val;
            int val_line = line_;
            while (!at_end() && text_[pos_] != quote && text_[pos_] != '<') val += advance();
            if (at_end() || text_[pos_] != quote)
                fail(ErrorClass::format, "line " + std::to_string(val_line) +
                                             ": unterminated attribute value for '" + key + "'");
            advance();
            tag.attrs.push_back({key, unescape_entities(val, val_line)});
            skip_ws();
        }
        if (!at_end() && text_[pos_] == '/') {
            tag.self_closing = true;
            advance();
        }
        if (at_end() || text_[pos_] != '>')
            fail(ErrorClass::format,
                 "line " + std::to_string(tag.line) + ": tag <" + tag.name + "> never closed with '>'");
        advance();
        return tag;
    }

    void skip_text_to_tag() {
        while (!at_end() && text_[pos_] != '<') advance();
    }

private:
    char advance() {
        char c = text_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }

    void skip_ws() {
        while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) advance();
    }

    std::string take_name() {
        std::string n;
        while (!at_end()) {
            char c = text_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')
                n += advance();
            else
                break;
        }
        return n;
    }

    bool match_ahead(std::string_view prefix) const {
        return text_.compare(pos_, prefix.size(), prefix) == 0;
    }

    void skip_until(std::string_view terminator) {
        size_t found = text_.find(terminator, pos_);
        if (found == std::string::npos) {
            int at = line_;
            fail(ErrorClass::format,
                 "line " + std::to_string(at) + ": unterminated '" + std::string(terminator) + "'");
        }
        while (pos_ < found + terminator.size()) advance();
    }

    const std::string& text_;
    size_t pos_ = 0;
    int line_ = 1;
};

// Appends raw text into `out` collapsing whitespace runs to single spaces.
void append_normalized(std::string& out, const std::string& raw) {
    for (char c : raw) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!out.empty() && out.back() != ' ') out += ' ';
        } else {
            out += c;
        }
    }
}

} // namespace

OneSecParse parse_onesec(const std::string& xml) {
    OneSecParse result;
    XmlCursor cur(xml);
    // A tag pulled from the stream but not consumed by the layer that saw
    // it; parsing resumes with it, so an unclosed element never swallows
    // the next instance.
    std::optional<XmlTag> pending;

    auto next_tag = [&]() -> std::optional<XmlTag> {
        if (pending) {
            std::optional<XmlTag> t = std::move(pending);
            pending.reset();
            return t;
        }
        cur.skip_text_to_tag();
        if (cur.at_end()) return std::nullopt;
        return cur.take_tag();
    };

    for (;;) {
        std::optional<XmlTag> tag;
        try {
            tag = next_tag();
        } catch (const Error& e) {
            result.issues.push_back({cur.line(), "", e.what()});
            cur.skip_text_to_tag();
            continue;
        }
        if (!tag) break;
        if (tag->name != "instance" || tag->closing) {
            // Wrapper/root elements around the instance stream are allowed.
            continue;
        }

        OneSecInstance inst;
        int inst_line = tag->line;
        inst.doc_source = tag->attr("docsrc").value_or("");
        inst.instance_id = tag->attr("id").value_or("");

        bool have_answer = false, have_context = false, have_head = false;
        bool bad = false;
        auto report = [&](int line, const std::string& msg) {
            result.issues.push_back({line, inst.instance_id, msg});
            bad = true;
        };

        bool done = false;
        while (!done) {
            std::optional<XmlTag> inner;
            try {
                inner = next_tag();
            } catch (const Error& e) {
                report(cur.line(), e.what());
                break;
            }
            if (!inner) {
                report(inst_line, "unclosed <instance>");
                break;
            }
            if (inner->closing && inner->name == "instance") break;
            if (!inner->closing && inner->name == "instance") {
                // A new instance opened before this one closed.
                report(inst_line, "unclosed <instance>");
                pending = inner;
                break;
            }
            if (inner->closing) {
                // Foreign closing tag (e.g. the wrapper) while inside the
                // instance: hand it back and give up on this instance.
                report(inst_line, "unclosed <instance>");
                pending = inner;
                break;
            }
            if (inner->name == "answer") {
                have_answer = true;
                auto sense = inner->attr("senseid");
                if (!sense) {
                    report(inner->line, "missing senseid attribute on <answer>");
                } else if (!valid_sense_key(*sense)) {
                    report(inner->line, "senseid '" + *sense + "' is not lemma%key shaped");
                } else {
                    inst.sense_id = *sense;
                }
                if (!inner->self_closing) {
                    // tolerate <answer ...></answer>
                    std::optional<XmlTag> close;
                    try {
                        close = next_tag();
                    } catch (const Error& e) {
                        report(cur.line(), e.what());
                        break;
                    }
                    if (!close || !close->closing || close->name != "answer") {
                        report(inner->line, "unclosed <answer>");
                        if (close) pending = close;
                    }
                }
            } else if (inner->name == "context") {
                have_context = true;
                std::string ctx;
                for (;;) {
                    append_normalized(ctx, cur.take_text());
                    if (cur.at_end()) {
                        report(inner->line, "unclosed <context>");
                        done = true;
                        break;
                    }
                    std::optional<XmlTag> t2;
                    try {
                        t2 = cur.take_tag();
                    } catch (const Error& e) {
                        report(cur.line(), e.what());
                        done = true;
                        break;
                    }
                    if (t2->closing && t2->name == "context") break;
                    if (t2->name == "head" && !t2->closing) {
                        if (have_head) report(t2->line, "multiple <head> elements");
                        if (!ctx.empty() && ctx.back() != ' ') ctx += ' ';
                        size_t begin = ctx.size();
                        append_normalized(ctx, cur.take_text());
                        while (!ctx.empty() && ctx.back() == ' ') ctx.pop_back();
                        size_t end = ctx.size();
                        if (end == begin) report(t2->line, "empty <head>");
                        inst.head_begin = begin;
                        inst.head_end = end;
                        have_head = true;
                        if (cur.at_end()) {
                            report(t2->line, "unclosed <head>");
                            done = true;
                            break;
                        }
                        std::optional<XmlTag> hc;
                        try {
                            hc = cur.take_tag();
                        } catch (const Error& e) {
                            report(cur.line(), e.what());
                            done = true;
                            break;
                        }
                        if (!hc->closing || hc->name != "head") {
                            report(t2->line, "unclosed <head>");
                            pending = hc;
                            break;
                        }
                    } else {
                        // Anything else means the context never closed.
                        report(t2->line, "unclosed <context>");
                        pending = t2;
                        break;
                    }
                }
                // trim
                while (!ctx.empty() && ctx.back() == ' ') ctx.pop_back();
                size_t lead = 0;
                while (lead < ctx.size() && ctx[lead] == ' ') ++lead;
                if (lead > 0) {
                    ctx.erase(0, lead);
                    if (inst.head_begin >= lead) {
                        inst.head_begin -= lead;
                        inst.head_end -= lead;
                    }
                }
                inst.context = ctx;
            } else if (inner->name == "head") {
                report(inner->line, "<head> outside <context>");
            } else {
                report(inner->line, std::string("unexpected <") + inner->name +
                                        "> inside <instance>");
            }
        }

        if (!bad) {
            if (!have_answer)
                report(inst_line, "missing <answer> element");
            else if (!have_context)
                report(inst_line, "missing <context> element");
            else if (!have_head)
                report(inst_line, "missing <head> element");
            else if (inst.head_end > inst.context.size() || inst.head_begin >= inst.head_end)
                report(inst_line, "head span falls outside context");
        }
        if (!bad) result.instances.push_back(std::move(inst));
    }
    return result;
}

OneSecParse parse_onesec_file(const std::string& path) {
    return parse_onesec(read_file(path));
}

BuildConceptResult build_concept(const std::vector<OneSecInstance>& instances,
                                 const std::string& target_sense,
                                 const std::vector<OneSecInstance>& negative_pool,
                                 const ConceptLimits& limits, uint64_t seed) {
    const std::string target_lemma = sense_lemma(target_sense);

    std::vector<std::string> pos_all;
    for (const OneSecInstance& inst : instances) {
        if (inst.sense_id == target_sense) pos_all.push_back(inst.context);
    }
    std::set<std::string> pos_texts(pos_all.begin(), pos_all.end());

    std::vector<std::string> neg_all;
    for (const OneSecInstance& inst : negative_pool) {
        if (inst.lemma() == target_lemma) continue;
        if (pos_texts.count(inst.context)) continue;
        neg_all.push_back(inst.context);
    }

    if (static_cast<int>(pos_all.size()) < limits.min_per_side)
        fail(ErrorClass::validation,
             "insufficient positives for '" + target_sense + "': have " +
                 std::to_string(pos_all.size()) + ", need >= " +
                 std::to_string(limits.min_per_side));
    if (neg_all.empty())
        fail(ErrorClass::validation,
             "empty negative pool for '" + target_sense + "' after lemma exclusion");
    if (static_cast<int>(neg_all.size()) < limits.min_per_side)
        fail(ErrorClass::validation,
             "insufficient negatives for '" + target_sense + "': have " +
                 std::to_string(neg_all.size()) + ", need >= " +
                 std::to_string(limits.min_per_side));

    // Seeded subsample of k from n, returned in original order.
    auto sample = [](std::vector<std::string>& items, int max_n, Philox rng) {
        if (static_cast<int>(items.size()) <= max_n) return;
        std::vector<size_t> idx(items.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (int i = 0; i < max_n; ++i) {
            uint32_t j = i + rng.bounded(static_cast<uint32_t>(idx.size() - i));
            std::swap(idx[static_cast<size_t>(i)], idx[j]);
        }
        idx.resize(static_cast<size_t>(max_n));
        std::sort(idx.begin(), idx.end());
        std::vector<std::string> kept;
        kept.reserve(idx.size());
        for (size_t i : idx) kept.push_back(std::move(items[i]));
        items = std::move(kept);
    };
    sample(pos_all, limits.max_per_side, Philox(seed, /*stream=*/1));
    sample(neg_all, limits.max_per_side, Philox(seed, /*stream=*/2));

    BuildConceptResult result;
    result.dataset.concept_id = target_sense;
    result.dataset.positives = std::move(pos_all);
    result.dataset.negatives = std::move(neg_all);
    int pad = 0;
    for (const std::string& s : result.dataset.positives) pad = std::max(pad, token_length(s));
    for (const std::string& s : result.dataset.negatives) pad = std::max(pad, token_length(s));
    result.dataset.pad_length = pad;

    if (result.dataset.n_neg() <= result.dataset.n_pos()) {
        result.warnings.push_back(
            "concept '" + target_sense + "': N- (" + std::to_string(result.dataset.n_neg()) +
            ") <= N+ (" + std::to_string(result.dataset.n_pos()) +
            "); negatives usually need the larger side to cover their variance");
    }
    result.dataset.validate(limits.paper_mode);
    return result;
}

} // namespace experts
