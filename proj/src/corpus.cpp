#include "spamgan/corpus.hpp"

#include "spamgan/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace spamgan {

namespace {

const std::vector<std::string> kSpecialNames = {"<start>", "<end>", "<pad>", "<unk>"};

}  // namespace

Vocab::Vocab() {
  for (const auto& s : kSpecialNames) push(s);
}

void Vocab::push(std::string word) {
  ids_.emplace(word, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(word));
}

int Vocab::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("vocab id " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kSpecialNames.size() || !std::equal(kSpecialNames.begin(), kSpecialNames.end(), tokens.begin())) {
    throw std::invalid_argument("vocabulary must start with the four special tokens");
  }
  Vocab v;
  for (std::size_t i = kSpecialNames.size(); i < tokens.size(); ++i) {
    if (v.ids_.count(tokens[i])) throw std::invalid_argument("duplicate vocabulary token: " + tokens[i]);
    v.push(std::move(tokens[i]));
  }
  return v;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocab build_vocab(std::span<const std::string> texts, int max_size) {
  if (max_size <= kNumSpecialTokens) throw std::invalid_argument("build_vocab: max_size must exceed 4");
  std::map<std::string, long> counts;
  for (const auto& t : texts) {
    for (auto& w : tokenize(t)) ++counts[w];
  }
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  // counts is ordered by word, so a stable sort keeps lexicographic tie order
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (auto& [word, n] : ranked) {
    if (v.size() >= max_size) break;
    if (v.contains(word)) continue;  // literal "<unk>" etc. in the text
    v.push(word);
  }
  return v;
}

TokenSequence encode(std::string_view text, const Vocab& vocab, int max_len) {
  if (max_len < 3) throw std::invalid_argument("encode: max length must be at least 3");
  TokenSequence s;
  s.ids.reserve(static_cast<std::size_t>(max_len));
  s.ids.push_back(kStart);
  for (const auto& w : tokenize(text)) s.ids.push_back(vocab.id(w));
  s.ids.push_back(kEnd);
  if (static_cast<int>(s.ids.size()) > max_len) s.ids.resize(static_cast<std::size_t>(max_len));
  s.length = static_cast<int>(s.ids.size());
  s.ids.resize(static_cast<std::size_t>(max_len), kPad);
  return s;
}

std::string decode(const TokenSequence& seq, const Vocab& vocab) {
  std::string out;
  for (int i = 0; i < seq.length; ++i) {
    const int id = seq.ids[static_cast<std::size_t>(i)];
    if (id == kStart) continue;
    if (id == kEnd || id == kPad) break;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

void validate(const TokenSequence& seq, int vocab_size) {
  const int n = seq.max_length();
  if (n == 0 || seq.length < 1 || seq.length > n) throw std::invalid_argument("sequence length out of range");
  if (seq.ids[0] != kStart) throw std::invalid_argument("sequence must begin with <start>");
  for (int i = 0; i < n; ++i) {
    const int id = seq.ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= vocab_size) throw std::invalid_argument("token id out of vocabulary range");
    if (i >= seq.length && id != kPad) throw std::invalid_argument("non-pad token after sequence end");
    if (i < seq.length && id == kPad) throw std::invalid_argument("<pad> inside sequence content");
    if (i > 0 && i < seq.length && id == kStart) throw std::invalid_argument("<start> inside sequence content");
  }
  if (seq.length < n && seq.ids[static_cast<std::size_t>(seq.length - 1)] != kEnd) {
    throw std::invalid_argument("padded sequence must end with <end>");
  }
}

std::string_view label_name(ClassLabel c) { return c == ClassLabel::Spam ? "spam" : "nonspam"; }

ClassLabel parse_label(std::string_view s) {
  if (s == "spam") return ClassLabel::Spam;
  if (s == "nonspam" || s == "non-spam") return ClassLabel::NonSpam;
  throw std::invalid_argument("unknown class label '" + std::string(s) + "' (expected spam or nonspam)");
}

ClassLabel sample_class(const ClassPrior& prior, std::mt19937_64& rng) {
  if (prior.spam < 0.0 || prior.spam > 1.0) throw std::invalid_argument("class prior must lie in [0, 1]");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < prior.spam ? ClassLabel::Spam : ClassLabel::NonSpam;
}

std::vector<Batch> make_batches(const Dataset& data, Pool pool, std::size_t batch_size, std::uint64_t shuffle_seed,
                                const ClassPrior& prior) {
  if (batch_size == 0) throw std::invalid_argument("make_batches: batch size must be positive");
  // Item index i < |D_L| refers to a labeled example, otherwise unlabeled.
  std::vector<std::size_t> items;
  if (pool != Pool::Unlabeled) {
    for (std::size_t i = 0; i < data.labeled.size(); ++i) items.push_back(i);
  }
  if (pool != Pool::Labeled) {
    for (std::size_t i = 0; i < data.unlabeled.size(); ++i) items.push_back(data.labeled.size() + i);
  }
  std::mt19937_64 rng(shuffle_seed);
  std::shuffle(items.begin(), items.end(), rng);

  std::vector<Batch> out;
  for (std::size_t start = 0; start < items.size(); start += batch_size) {
    Batch b;
    const std::size_t end = std::min(items.size(), start + batch_size);
    for (std::size_t k = start; k < end; ++k) {
      const std::size_t i = items[k];
      if (i < data.labeled.size()) {
        b.seqs.push_back(data.labeled[i].seq);
        b.labels.push_back(data.labeled[i].label);
        b.is_labeled.push_back(1);
      } else {
        b.seqs.push_back(data.unlabeled[i - data.labeled.size()]);
        b.labels.push_back(sample_class(prior, rng));
        b.is_labeled.push_back(0);
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<TextRecord> parse_records(std::string_view content, LabelPolicy policy, const std::string& source) {
  std::vector<TextRecord> out;
  std::istringstream in{std::string(content)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw DataFormatError(source, lineno, "not a JSON object");
    }
    if (!j.is_object()) throw DataFormatError(source, lineno, "not a JSON object");
    TextRecord r;
    auto text = j.find("text");
    if (text == j.end() || !text->is_string()) throw DataFormatError(source, lineno, "missing string field 'text'");
    r.text = text->get<std::string>();
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() != "text" && it.key() != "label") throw DataFormatError(source, lineno, "unknown field '" + it.key() + "'");
    }
    auto label = j.find("label");
    if (label != j.end()) {
      if (policy == LabelPolicy::Forbid) throw DataFormatError(source, lineno, "unlabeled file must not carry 'label'");
      if (!label->is_string()) throw DataFormatError(source, lineno, "'label' must be a string");
      try {
        r.label = parse_label(label->get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw DataFormatError(source, lineno, e.what());
      }
      r.has_label = true;
    } else if (policy == LabelPolicy::Require) {
      throw DataFormatError(source, lineno, "missing 'label'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TextRecord> read_records(const std::string& path, LabelPolicy policy) {
  std::ifstream in(path);
  if (!in) throw MissingFileError(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_records(ss.str(), policy, path);
}

void write_records(const std::string& path, std::span<const TextRecord> records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& r : records) {
    nlohmann::json j;
    j["text"] = r.text;
    if (r.has_label) j["label"] = std::string(label_name(r.label));
    out << j.dump() << '\n';
  }
}

}  // namespace spamgan
