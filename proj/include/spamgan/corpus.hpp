#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace spamgan {

enum SpecialToken : int { kStart = 0, kEnd = 1, kPad = 2, kUnk = 3 };
inline constexpr int kNumSpecialTokens = 4;

/// Word <-> id mapping. Ids 0..3 are <start>, <end>, <pad>, <unk>.
class Vocab {
 public:
  Vocab();

  int id(std::string_view word) const;  // kUnk when absent
  const std::string& token(int id) const;
  bool contains(std::string_view word) const { return ids_.count(std::string(word)) != 0; }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Rebuilds a vocabulary from its token list (specials first).
  static Vocab from_tokens(std::vector<std::string> tokens);

 private:
  friend Vocab build_vocab(std::span<const std::string> texts, int max_size);
  void push(std::string word);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Lowercased whitespace tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Specials first, then words by descending frequency (ties lexicographic)
/// until `max_size` entries.
Vocab build_vocab(std::span<const std::string> texts, int max_size);

/// Fixed-length encoded sentence: <start> w1 .. wn <end> <pad>...
struct TokenSequence {
  std::vector<int> ids;
  int length = 0;  // tokens before padding

  int max_length() const { return static_cast<int>(ids.size()); }
  bool operator==(const TokenSequence&) const = default;
};

/// Encodes to exactly `max_len` tokens. Overlong content is cut so the
/// sequence fills max_len, in which case <end> is dropped.
TokenSequence encode(std::string_view text, const Vocab& vocab, int max_len);
/// Words between <start> and <end>/<pad>, space separated.
std::string decode(const TokenSequence& seq, const Vocab& vocab);
/// Throws std::invalid_argument when a sequence violates its invariants.
void validate(const TokenSequence& seq, int vocab_size);

enum class ClassLabel : int { NonSpam = 0, Spam = 1 };
inline constexpr int kNumClasses = 2;

inline int class_index(ClassLabel c) { return static_cast<int>(c); }
std::string_view label_name(ClassLabel c);  // "spam" / "nonspam"
ClassLabel parse_label(std::string_view s);  // accepts spam, nonspam, non-spam

struct ClassPrior {
  double spam = 0.5;
};

ClassLabel sample_class(const ClassPrior& prior, std::mt19937_64& rng);

struct LabeledExample {
  TokenSequence seq;
  ClassLabel label = ClassLabel::NonSpam;
};

/// Labeled pool D_L and unlabeled pool D_U; their union plays the role of the
/// real data distribution.
struct Dataset {
  std::vector<LabeledExample> labeled;
  std::vector<TokenSequence> unlabeled;

  std::size_t size() const { return labeled.size() + unlabeled.size(); }
};

enum class Pool { Labeled, Unlabeled, Union };

struct Batch {
  std::vector<TokenSequence> seqs;
  std::vector<ClassLabel> labels;      // true label or a prior draw
  std::vector<std::uint8_t> is_labeled;

  std::size_t size() const { return seqs.size(); }
};

/// Shuffles the pool with `shuffle_seed` and cuts it into batches (the last
/// one may be short). Unlabeled items get labels drawn from `prior`.
std::vector<Batch> make_batches(const Dataset& data, Pool pool, std::size_t batch_size, std::uint64_t shuffle_seed,
                                const ClassPrior& prior = {});

// ---- line-record files -----------------------------------------------------

struct TextRecord {
  std::string text;
  bool has_label = false;
  ClassLabel label = ClassLabel::NonSpam;
};

enum class LabelPolicy { Require, Forbid, Optional };

/// One JSON object per line: {"text": "...", "label": "spam"|"nonspam"}.
/// Errors carry the 1-based line number.
std::vector<TextRecord> read_records(const std::string& path, LabelPolicy policy);
std::vector<TextRecord> parse_records(std::string_view content, LabelPolicy policy, const std::string& source = "<input>");
void write_records(const std::string& path, std::span<const TextRecord> records);

}  // namespace spamgan
