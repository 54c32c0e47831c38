#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "nklm/kg_embed.hpp"
#include "nklm/knowledge.hpp"

namespace nklm {

enum class Split { train, valid, test };
const char* split_name(Split s);
Split parse_split(const std::string& name);  // throws ParseError

struct AnchorSpan {
  int start = 0;
  int len = 0;
  int entity = -1;
};

// One topic: an entity, its description tokens, incidental anchor mentions,
// and its fact list in canonical order.
struct TopicDocument {
  int topic_id = -1;
  std::vector<std::string> tokens;
  std::vector<AnchorSpan> anchors;  // in-memory only; folded into anchor facts on disk
  std::vector<Fact> facts;
  Split split = Split::train;
};

// One description token with its augmentation: copy indicator z, fact index a
// (within the topic's canonical fact list), copy position n (meaningful iff
// z), and topic id k. w_id is the vocabulary index, resolved lazily against a
// Vocabulary (-1 = unresolved); it never lives on disk.
struct AugmentedToken {
  std::string w;
  int w_id = -1;
  bool z = false;
  int a = -1;
  int n = 0;
  int k = -1;
};

struct AlignedTopic {
  TopicDocument doc;
  std::vector<AugmentedToken> alignment;
};
using Corpus = std::vector<AlignedTopic>;

// ASCII lowercase; bytes >= 0x80 pass through untouched.
std::string fold_word(const std::string& w);

class Vocabulary {
 public:
  static constexpr int kUnkId = 0;
  static constexpr int kBosId = 1;
  static constexpr int kEosId = 2;
  static constexpr int kSpecialCount = 3;
  static const char* unk_word() { return "<unk>"; }
  static const char* bos_word() { return "<bos>"; }
  static const char* eos_word() { return "<eos>"; }

  // Top (size - 3) corpus words by frequency (ties broken lexicographically),
  // folded. size counts the specials; size >= 4.
  static Vocabulary build(const Corpus& corpus, std::size_t size);
  // Rebuild from a stored content-word list (checkpoint restore).
  static Vocabulary from_content_words(std::vector<std::string> content_words);

  std::size_t size() const { return words_.size(); }
  int id_or_unk(const std::string& surface) const;
  bool contains(const std::string& surface) const;
  const std::string& word(int id) const;
  const std::vector<std::string>& words() const { return words_; }
  std::vector<std::string> content_words() const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

// Optional surface-word -> canonical-word map applied (after folding) to
// description tokens before matching. File format: 'alias<tab>canonical'.
struct AliasTable {
  std::unordered_map<std::string, std::string> canonical;
  const std::string& resolve(const std::string& folded) const;
  static AliasTable read(const std::string& path);
};

// Greedy longest contiguous match of description tokens against every
// non-NaF fact's knowledge words, scanning facts in canonical order (which is
// the priority order) and positions left to right. Unmatched tokens get
// (z=0, a=NaF, n=0). Deterministic and idempotent.
std::vector<AugmentedToken> align(const TopicDocument& doc, const AliasTable& aliases = {});

// One is_anchor fact per distinct anchor entity: (topic, UnknownRelation,
// anchor entity), knowledge words = the span's surface tokens.
std::vector<Fact> synthesize_anchor_facts(const TopicDocument& doc, int unknown_relation_id,
                                          int first_fact_id);

struct CorpusStats {
  std::size_t topic_count = 0;
  std::size_t token_count = 0;
  std::size_t unique_word_count = 0;  // |V_total|, folded
  double avg_facts_per_topic = 0.0;   // ordinary + anchor facts
  double avg_knowledge_words_per_fact = 0.0;
  std::size_t max_knowledge_words = 0;  // over every fact incl. specials
  // distinct folded knowledge words per topic, |O_{F_k}|
  std::map<int, std::size_t> topic_knowledge_word_count;
};
CorpusStats corpus_stats(const Corpus& corpus);

// Ingestion filter mirroring the upstream data preparation: drops topics
// with too many facts or too few sentences (sentence = '.', '!' or '?').
Corpus filter_topics(const Corpus& corpus, std::size_t max_facts = 1000,
                     std::size_t min_sentences = 3);

// Deterministic interleaved 80/10/10 split by corpus position.
void assign_splits(Corpus& corpus);

// Line-delimited JSON records, schema documented in docs/dataset_schema.md.
void write_dataset(const Corpus& corpus, const std::string& path);
Corpus read_dataset(const std::string& path);

// --- synthetic corpus -------------------------------------------------------

// Sentence pattern: space-separated tokens; <...> placeholders expand to a
// topic's name, pronoun, fact object words, or an attribute phrase of a
// relation's object (docs/dataset_schema.md lists the grammar).
struct SynthTemplate {
  std::string pattern;
  enum class Role { intro, body, anchor } role = Role::body;
};

struct SynthConfig {
  int topics = 240;
  std::uint64_t seed = 1;
  int min_facts = 3;  // ordinary facts per topic, anchors excluded
  int max_facts = 10;
  int min_sentences = 3;
  int max_sentences = 5;
  double anchor_prob = 0.4;
  std::vector<SynthTemplate> templates;  // empty -> default_templates()
};

std::vector<SynthTemplate> default_templates();

struct SynthResult {
  Corpus corpus;  // with gold alignments and splits assigned
  TripleSet kg;   // topic fact triples plus entity-attribute side triples
};

// Deterministic per seed. Guarantees: every knowledge word is disjoint from
// the scaffold vocabulary and from every other fact's words within a topic,
// so align() recovers the gold alignment exactly.
SynthResult synthesize_corpus(const SynthConfig& config);

}  // namespace nklm
