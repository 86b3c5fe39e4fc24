#include "uniid/text_encoder.hpp"

#include <sstream>
#include <stdexcept>

namespace uniid {

namespace {

const char* kGrammarWords[] = {"a",    "photo", "sketch",     "of",   "person",
                               "with", "hat",   "on",         "red",  "green",
                               "blue", "gray",  "background", "full", "body"};

std::string name_token(int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "name%03d", i);
    return buf;
}

} // namespace

Vocabulary Vocabulary::standard(int n_names) {
    Vocabulary v;
    v.tokens_ = {"<pad>", "<start>", "<id0>", "<id1>", "<id2>", "<id>"};
    v.slot_ids_ = {2, 3, 4};
    v.placeholder_id_ = 5;
    for (const char* w : kGrammarWords) v.tokens_.push_back(w);
    v.name_begin_ = (int)v.tokens_.size();
    v.name_count_ = n_names;
    for (int i = 0; i < n_names; ++i) v.tokens_.push_back(name_token(i));
    return v;
}

bool Vocabulary::has(const std::string& tok) const {
    for (const auto& t : tokens_)
        if (t == tok) return true;
    return false;
}

int Vocabulary::id(const std::string& tok) const {
    for (size_t i = 0; i < tokens_.size(); ++i)
        if (tokens_[i] == tok) return (int)i;
    throw std::invalid_argument("tokenize: unknown word '" + tok + "'");
}

std::string Vocabulary::serialize() const {
    std::string out;
    for (const auto& t : tokens_) {
        out += t;
        out += '\n';
    }
    return out;
}

Vocabulary Vocabulary::deserialize(const std::string& text) {
    Vocabulary v;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) v.tokens_.push_back(line);
    if (v.tokens_.size() < 6 || v.tokens_[0] != "<pad>" || v.tokens_[5] != "<id>")
        throw std::runtime_error("vocabulary: malformed serialized form");
    v.slot_ids_ = {2, 3, 4};
    v.placeholder_id_ = 5;
    v.name_begin_ = -1;
    for (size_t i = 0; i < v.tokens_.size(); ++i)
        if (v.tokens_[i].rfind("name", 0) == 0) {
            v.name_begin_ = (int)i;
            break;
        }
    if (v.name_begin_ < 0) throw std::runtime_error("vocabulary: no name tokens");
    v.name_count_ = (int)v.tokens_.size() - v.name_begin_;
    return v;
}

TokenizedPrompt tokenize(const Vocabulary& vocab, const std::string& prompt, int max_len) {
    TokenizedPrompt out;
    out.ids.reserve(max_len);
    out.ids.push_back(vocab.start_id());

    std::istringstream is(prompt);
    std::string word;
    while (is >> word) {
        if (word == "<id>") {
            if (out.name_slots) throw std::invalid_argument("tokenize: multiple <id> placeholders");
            std::array<int, 3> slots{};
            for (int k = 0; k < 3; ++k) {
                slots[k] = (int)out.ids.size();
                out.ids.push_back(vocab.name_slot_ids()[k]);
            }
            out.name_slots = slots;
        } else {
            out.ids.push_back(vocab.id(word));
        }
    }
    out.true_length = (int)out.ids.size();
    if ((int)out.ids.size() > max_len) {
        out.ids.resize(max_len);
        if (out.name_slots && (*out.name_slots)[2] >= max_len) out.name_slots.reset();
    }
    out.ids.resize(max_len, vocab.pad_id());
    return out;
}

std::string detokenize(const Vocabulary& vocab, const std::vector<int>& ids) {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        const int id = ids[i];
        if (id == vocab.pad_id() || id == vocab.start_id()) continue;
        if (id == vocab.name_slot_ids()[0]) {
            if (!out.empty()) out += ' ';
            out += "<id>";
            continue;
        }
        if (id == vocab.name_slot_ids()[1] || id == vocab.name_slot_ids()[2]) continue;
        if (!out.empty()) out += ' ';
        out += vocab.token(id);
    }
    return out;
}

} // namespace uniid
