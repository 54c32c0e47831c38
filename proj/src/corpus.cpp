#include "nklm/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "nklm/errors.hpp"
#include "nklm/rng.hpp"

namespace nklm {

using nlohmann::json;

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "valid") return Split::valid;
  if (name == "test") return Split::test;
  throw ParseError("unknown split '" + name + "'");
}

std::string fold_word(const std::string& w) {
  std::string out = w;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

// --- Vocabulary ---

Vocabulary Vocabulary::from_content_words(std::vector<std::string> content_words) {
  Vocabulary v;
  v.words_ = {unk_word(), bos_word(), eos_word()};
  v.words_.insert(v.words_.end(), content_words.begin(), content_words.end());
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    if (!v.index_.emplace(v.words_[i], static_cast<int>(i)).second)
      throw DomainError("Vocabulary: duplicate word '" + v.words_[i] + "'");
  }
  return v;
}

Vocabulary Vocabulary::build(const Corpus& corpus, std::size_t size) {
  if (size < kSpecialCount + 1)
    throw DomainError("Vocabulary::build: size must be at least " +
                      std::to_string(kSpecialCount + 1));
  std::map<std::string, std::size_t> freq;
  for (const AlignedTopic& topic : corpus)
    for (const std::string& tok : topic.doc.tokens) ++freq[fold_word(tok)];

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  const std::size_t content = std::min(ranked.size(), size - kSpecialCount);
  std::vector<std::string> words(content);
  for (std::size_t i = 0; i < content; ++i) words[i] = ranked[i].first;
  return from_content_words(std::move(words));
}

int Vocabulary::id_or_unk(const std::string& surface) const {
  const auto it = index_.find(fold_word(surface));
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(const std::string& surface) const {
  return index_.count(fold_word(surface)) != 0;
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size())
    throw DomainError("Vocabulary::word: id " + std::to_string(id) + " out of range");
  return words_[id];
}

std::vector<std::string> Vocabulary::content_words() const {
  return {words_.begin() + kSpecialCount, words_.end()};
}

// --- AliasTable ---

const std::string& AliasTable::resolve(const std::string& folded) const {
  const auto it = canonical.find(folded);
  return it == canonical.end() ? folded : it->second;
}

AliasTable AliasTable::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("AliasTable: cannot open " + path);
  AliasTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
      throw ParseError("AliasTable: " + path + ":" + std::to_string(lineno) +
                       ": expected 'alias<tab>canonical'");
    t.canonical[fold_word(line.substr(0, tab))] = fold_word(line.substr(tab + 1));
  }
  return t;
}

// --- alignment ---

std::vector<AugmentedToken> align(const TopicDocument& doc, const AliasTable& aliases) {
  if (doc.tokens.empty())
    throw DataError("align: topic " + std::to_string(doc.topic_id) + " has no tokens");
  if (!facts_are_canonical(doc.facts))
    throw DataError("align: topic " + std::to_string(doc.topic_id) +
                    " facts are not in canonical order");

  std::vector<std::string> text(doc.tokens.size());
  for (std::size_t t = 0; t < doc.tokens.size(); ++t)
    text[t] = aliases.resolve(fold_word(doc.tokens[t]));

  const std::size_t fact_count = doc.facts.size();
  std::vector<std::vector<std::string>> kw(fact_count);
  for (std::size_t i = 0; i + 1 < fact_count; ++i) {  // NaF (last) never matches
    kw[i].reserve(doc.facts[i].knowledge_words.size());
    for (const std::string& w : doc.facts[i].knowledge_words) kw[i].push_back(fold_word(w));
  }

  const int naf = static_cast<int>(fact_count) - 1;
  std::vector<AugmentedToken> out;
  out.reserve(text.size());
  std::size_t t = 0;
  while (t < text.size()) {
    std::size_t best_len = 0;
    int best_fact = -1, best_pos = -1;
    for (std::size_t fi = 0; fi + 1 < fact_count; ++fi) {
      const auto& words = kw[fi];
      for (std::size_t n0 = 0; n0 < words.size(); ++n0) {
        std::size_t len = 0;
        while (t + len < text.size() && n0 + len < words.size() &&
               text[t + len] == words[n0 + len])
          ++len;
        // strict > keeps the earliest fact and smallest position on ties
        if (len > best_len) {
          best_len = len;
          best_fact = static_cast<int>(fi);
          best_pos = static_cast<int>(n0);
        }
      }
    }
    if (best_len > 0) {
      for (std::size_t j = 0; j < best_len; ++j)
        out.push_back({doc.tokens[t + j], -1, true, best_fact, best_pos + static_cast<int>(j),
                       doc.topic_id});
      t += best_len;
    } else {
      out.push_back({doc.tokens[t], -1, false, naf, 0, doc.topic_id});
      ++t;
    }
  }
  return out;
}

std::vector<Fact> synthesize_anchor_facts(const TopicDocument& doc, int unknown_relation_id,
                                          int first_fact_id) {
  std::vector<Fact> out;
  std::set<int> seen;
  int next_id = first_fact_id;
  for (const AnchorSpan& a : doc.anchors) {
    if (a.start < 0 || a.len <= 0 ||
        static_cast<std::size_t>(a.start + a.len) > doc.tokens.size())
      throw DataError("synthesize_anchor_facts: anchor span outside description (topic " +
                      std::to_string(doc.topic_id) + ")");
    if (a.entity < 0)
      throw DataError("synthesize_anchor_facts: unresolved anchor entity (topic " +
                      std::to_string(doc.topic_id) + ")");
    if (!seen.insert(a.entity).second) continue;
    std::vector<std::string> words(doc.tokens.begin() + a.start,
                                   doc.tokens.begin() + a.start + a.len);
    out.push_back(make_fact(next_id++, doc.topic_id, unknown_relation_id, a.entity,
                            std::move(words), false, false, /*is_anchor=*/true));
  }
  return out;
}

// --- stats, filter, splits ---

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  s.topic_count = corpus.size();
  std::set<std::string> vocab;
  std::size_t fact_count = 0, kw_count = 0;
  for (const AlignedTopic& topic : corpus) {
    s.token_count += topic.doc.tokens.size();
    for (const std::string& w : topic.doc.tokens) vocab.insert(fold_word(w));
    std::set<std::string> topic_kw;
    for (const Fact& f : topic.doc.facts) {
      s.max_knowledge_words = std::max(s.max_knowledge_words, f.knowledge_words.size());
      for (const std::string& w : f.knowledge_words) topic_kw.insert(fold_word(w));
      if (f.is_naf || f.is_topic_itself) continue;
      ++fact_count;
      kw_count += f.knowledge_words.size();
    }
    s.topic_knowledge_word_count[topic.doc.topic_id] = topic_kw.size();
  }
  s.unique_word_count = vocab.size();
  if (s.topic_count)
    s.avg_facts_per_topic = static_cast<double>(fact_count) / static_cast<double>(s.topic_count);
  if (fact_count)
    s.avg_knowledge_words_per_fact =
        static_cast<double>(kw_count) / static_cast<double>(fact_count);
  return s;
}

Corpus filter_topics(const Corpus& corpus, std::size_t max_facts, std::size_t min_sentences) {
  Corpus kept;
  for (const AlignedTopic& topic : corpus) {
    std::size_t facts = 0;
    for (const Fact& f : topic.doc.facts)
      if (!f.is_naf && !f.is_topic_itself) ++facts;
    std::size_t sentences = 0;
    for (const std::string& w : topic.doc.tokens)
      if (w == "." || w == "!" || w == "?") ++sentences;
    if (facts <= max_facts && sentences >= min_sentences) kept.push_back(topic);
  }
  return kept;
}

void assign_splits(Corpus& corpus) {
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::size_t slot = i % 10;
    corpus[i].doc.split = slot < 8 ? Split::train : (slot == 8 ? Split::valid : Split::test);
  }
}

// --- dataset file I/O ---

namespace {

json fact_to_json(const Fact& f) {
  json flags = json::array();
  if (f.is_naf) flags.push_back("naf");
  if (f.is_topic_itself) flags.push_back("topic_itself");
  if (f.is_anchor) flags.push_back("anchor");
  return json{{"fact_id", f.fact_id},         {"subject", f.subject},
              {"relation", f.relation},       {"object", f.object},
              {"object_words", f.knowledge_words}, {"flags", flags}};
}

Fact fact_from_json(const json& j) {
  bool naf = false, ti = false, anchor = false;
  for (const auto& flag : j.at("flags")) {
    const std::string s = flag.get<std::string>();
    if (s == "naf")
      naf = true;
    else if (s == "topic_itself")
      ti = true;
    else if (s == "anchor")
      anchor = true;
    else
      throw ParseError("unknown fact flag '" + s + "'");
  }
  return make_fact(j.at("fact_id").get<int>(), j.at("subject").get<int>(),
                   j.at("relation").get<int>(), j.at("object").get<int>(),
                   j.at("object_words").get<std::vector<std::string>>(), naf, ti, anchor);
}

}  // namespace

void write_dataset(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_dataset: cannot open " + path);
  for (const AlignedTopic& topic : corpus) {
    json facts = json::array();
    for (const Fact& f : topic.doc.facts) facts.push_back(fact_to_json(f));
    json alignment = json::array();
    for (const AugmentedToken& t : topic.alignment)
      alignment.push_back(json{{"w", t.w}, {"z", t.z ? 1 : 0}, {"a", t.a}, {"n", t.n}});
    const json record{{"schema_version", 1},
                      {"topic_id", topic.doc.topic_id},
                      {"split", split_name(topic.doc.split)},
                      {"tokens", topic.doc.tokens},
                      {"facts", facts},
                      {"alignment", alignment}};
    out << record.dump() << '\n';
  }
  if (!out) throw IoError("write_dataset: write failed for " + path);
}

Corpus read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_dataset: cannot open " + path);
  Corpus corpus;
  std::set<int> topic_ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("read_dataset: " + where + ": " + e.what());
    }
    try {
      if (!j.contains("schema_version"))
        throw ParseError("record has no schema_version");
      const int version = j.at("schema_version").get<int>();
      if (version != 1)
        throw VersionError("read_dataset: " + where + ": unsupported schema_version " +
                           std::to_string(version));
      AlignedTopic topic;
      topic.doc.topic_id = j.at("topic_id").get<int>();
      if (!topic_ids.insert(topic.doc.topic_id).second)
        throw ParseError("duplicate topic_id " + std::to_string(topic.doc.topic_id));
      topic.doc.split = parse_split(j.at("split").get<std::string>());
      topic.doc.tokens = j.at("tokens").get<std::vector<std::string>>();
      if (topic.doc.tokens.empty()) throw ParseError("topic has no tokens");
      for (const auto& fj : j.at("facts")) topic.doc.facts.push_back(fact_from_json(fj));
      if (!facts_are_canonical(topic.doc.facts))
        throw ParseError("facts are not in canonical order");

      const auto& alignment = j.at("alignment");
      if (!alignment.empty() && alignment.size() != topic.doc.tokens.size())
        throw ParseError("alignment length " + std::to_string(alignment.size()) +
                         " != token count " + std::to_string(topic.doc.tokens.size()));
      const int naf = static_cast<int>(topic.doc.facts.size()) - 1;
      for (const auto& aj : alignment) {
        AugmentedToken t;
        t.w = aj.at("w").get<std::string>();
        const int z = aj.at("z").get<int>();
        if (z != 0 && z != 1) throw ParseError("z must be 0 or 1");
        t.z = z == 1;
        t.a = aj.at("a").get<int>();
        t.n = aj.at("n").get<int>();
        t.k = topic.doc.topic_id;
        if (t.a < 0 || t.a > naf) throw ParseError("fact index a out of range");
        if (t.z) {
          const auto& words = topic.doc.facts[t.a].knowledge_words;
          if (t.a == naf) throw ParseError("copy token assigned to NaF");
          if (t.n < 0 || static_cast<std::size_t>(t.n) >= words.size())
            throw ParseError("copy position n out of range");
        } else if (t.a != naf) {
          throw ParseError("non-copy token must be assigned to NaF");
        }
        topic.alignment.push_back(std::move(t));
      }
      corpus.push_back(std::move(topic));
    } catch (const VersionError&) {
      throw;
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      if (msg.rfind("read_dataset:", 0) == 0) throw;
      throw ParseError("read_dataset: " + where + ": " + msg);
    } catch (const json::exception& e) {
      throw ParseError("read_dataset: " + where + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError("read_dataset: " + where + ": " + e.what());
    }
  }
  return corpus;
}

// --- synthetic corpus -------------------------------------------------------

namespace {

// relation registry (fixed ids; the dataset schema documents them)
enum Rel : int {
  kBornIn = 0,
  kBornYear = 1,
  kDiedIn = 2,
  kDiedYear = 3,
  kProfession = 4,
  kSpouse = 5,
  kBand = 6,
  kKnownFor = 7,
  kLivedIn = 8,
  kCitizenOf = 9,
  kUnknownRelation = 10,
  kTopicItself = 11,
  kRegionOf = 12,
  kKindOf = 13,
  kEraOf = 14,
  kFieldOf = 15,
  kRelCount = 16,
};

const char* kRelNames[kRelCount] = {
    "born_in",   "born_year", "died_in",  "died_year",        "profession",   "spouse",
    "band",      "known_for", "lived_in", "citizen_of",       "unknown_relation",
    "topic_itself", "region_of", "kind_of", "era_of", "field_of"};

// attribute kinds carried by entity pools
enum Attr : int { kRegion = 0, kKind = 1, kEra = 2, kField = 3, kAttrCount = 4 };

const char* kAttrPhrases[kAttrCount][2] = {
    {"near the sea", "among the hills"},
    {"a quiet village", "a walled fortress"},
    {"late in the old era", "early in the new era"},
    {"a patient craft", "a busy trade"},
};

bool attr_applies(int attr, int rel) {
  switch (attr) {
    case kRegion:
    case kKind:
      return rel == kBornIn || rel == kDiedIn || rel == kLivedIn;
    case kEra:
      return rel == kBornYear || rel == kDiedYear;
    case kField:
      return rel == kProfession;
  }
  return false;
}

int relation_id(const std::string& name) {
  for (int r = 0; r < kRelCount; ++r)
    if (name == kRelNames[r]) return r;
  return -1;
}

struct PlaceholderRef {
  enum class Kind { literal, topic, subj_last, pron, anchor, obj, attr } kind;
  std::string literal;
  int relation = -1;
  int attr = -1;
};

struct CompiledTemplate {
  SynthTemplate::Role role;
  std::vector<PlaceholderRef> parts;
  std::set<int> required;  // relation ids that must have a fact
  bool uses_anchor = false;
};

CompiledTemplate compile_template(const SynthTemplate& t) {
  CompiledTemplate c;
  c.role = t.role;
  std::istringstream ss(t.pattern);
  std::string tok;
  while (ss >> tok) {
    PlaceholderRef p;
    if (tok.size() >= 2 && tok.front() == '<' && tok.back() == '>') {
      const std::string body = tok.substr(1, tok.size() - 2);
      const auto colon = body.find(':');
      const std::string head = body.substr(0, colon);
      if (head == "topic" && colon == std::string::npos) {
        p.kind = PlaceholderRef::Kind::topic;
      } else if (head == "subj_last" && colon == std::string::npos) {
        p.kind = PlaceholderRef::Kind::subj_last;
      } else if (head == "pron" && colon == std::string::npos) {
        p.kind = PlaceholderRef::Kind::pron;
      } else if (head == "anchor" && colon == std::string::npos) {
        p.kind = PlaceholderRef::Kind::anchor;
        c.uses_anchor = true;
      } else if (colon != std::string::npos) {
        const std::string rel_name = body.substr(colon + 1);
        const int rel = relation_id(rel_name);
        if (rel < 0 || rel > kCitizenOf)
          throw ConfigError("template references missing relation '" + rel_name + "' in '" +
                            t.pattern + "'");
        p.relation = rel;
        c.required.insert(rel);
        if (head == "obj") {
          p.kind = PlaceholderRef::Kind::obj;
        } else {
          p.kind = PlaceholderRef::Kind::attr;
          if (head == "region")
            p.attr = kRegion;
          else if (head == "kind")
            p.attr = kKind;
          else if (head == "era")
            p.attr = kEra;
          else if (head == "field")
            p.attr = kField;
          else
            throw ConfigError("unknown placeholder '" + tok + "' in '" + t.pattern + "'");
          if (!attr_applies(p.attr, rel))
            throw ConfigError("attribute '" + head + "' does not apply to relation '" +
                              rel_name + "' in '" + t.pattern + "'");
        }
      } else {
        throw ConfigError("unknown placeholder '" + tok + "' in '" + t.pattern + "'");
      }
    } else {
      p.kind = PlaceholderRef::Kind::literal;
      p.literal = tok;
    }
    c.parts.push_back(std::move(p));
  }
  if (c.parts.empty()) throw ConfigError("empty template pattern");
  return c;
}

// invented-word inventories; all disjoint from the scaffold words in the
// default templates and attribute phrases
const std::vector<std::string>& first_name_pool() {
  static const std::vector<std::string> v{
      "Alda",    "Brenik",  "Corva",   "Dastin",  "Elmira",  "Fenrik",  "Galina",  "Horvan",
      "Ilsette", "Jorven",  "Kellan",  "Lysra",   "Morvek",  "Nerissa", "Olvan",   "Petrik",
      "Quilla",  "Rostam",  "Selina",  "Torvik",  "Ulmara",  "Vessan",  "Wrenna",  "Xandor",
      "Yoleth",  "Zarvin",  "Ambrin",  "Belka",   "Cevrin",  "Dorlan",  "Evrik",   "Fialka",
      "Gorvan",  "Helsa",   "Imrik",   "Jesfin",  "Kolva",   "Lumek",   "Mirsa",   "Norvin",
      "Opalka",  "Prenna",  "Quorin",  "Revka",   "Stellan", "Tivra",   "Uldin",   "Varnia",
      "Welkin",  "Xilva",   "Ysolde",  "Zemfira", "Arvid",   "Bessna",  "Cradok",  "Delvina",
      "Erland",  "Fresna",  "Gilvan",  "Hestra"};
  return v;
}

const std::vector<std::string>& last_name_pool() {
  static const std::vector<std::string> v{
      "Varnholt", "Kresge",   "Omdahl",   "Bextor",   "Cervald",  "Drennix",  "Fallstrom",
      "Garnek",   "Hollvik",  "Ivenson",  "Jarkwell", "Korvald",  "Lenmark",  "Mervik",
      "Norvale",  "Ostrim",   "Pellkor",  "Quenvar",  "Rovnik",   "Sarvel",   "Tinmark",
      "Ustveld",  "Vidrik",   "Wexhall",  "Yarnell",  "Zolvard",  "Antrev",   "Bolvane",
      "Cindral",  "Dovrek",   "Estvik",   "Fenholt",  "Grimsvel", "Husvard",  "Irongale",
      "Jestrand", "Kvarnell", "Lindmoor", "Mastvik",  "Nellgard", "Orvane",   "Prendak",
      "Quillert", "Rastholm", "Stennvik", "Tarnover", "Uvdahl",   "Vostril",  "Welkmar",
      "Xenholt",  "Yorvane",  "Zastrell", "Arnkell",  "Bruvald",  "Corstel",  "Durnvik",
      "Elsgard",  "Fornell",  "Gastrem",  "Hindvale", "Ickra",    "Jornhev",  "Kestvan",
      "Lorvath",  "Mundrel",  "Nostrev",  "Ovrank",   "Pilmark",  "Questor",  "Rindale",
      "Solvane",  "Trelkov",  "Undvik",   "Vernhall", "Wostrig",  "Xalvert",  "Ystrem",
      "Zorvind",  "Ardmere",  "Brevik"};
  return v;
}

std::vector<std::string> place_second_tokens() {
  return {"Bay",   "Cove",  "Point", "Reach",  "Sound",  "Cliffs", "Moor",
          "Fells", "Strand", "Gate",  "Cross",  "Hollow", "Rise",   "Shoals",
          "Vale",  "Heath",  "Crag",  "Banks",  "Marsh",  "Downs"};
}

std::vector<std::string> place_names() {
  const std::vector<std::string> stems{"Kor",  "Vel",  "Mar",  "Tor",  "Bel",  "Nor",  "Gar",
                                       "Hol",  "Pel",  "Sar",  "Dren", "Fal",  "Quen", "Ulm",
                                       "Yor",  "Zan",  "Ost",  "Ilv",  "Jar",  "Kres", "Lum",
                                       "Mir",  "Nev",  "Orv",  "Pren", "Ruv",  "Stel", "Tav",
                                       "Urd",  "Vos",  "Wen",  "Xal",  "Ydra", "Zem",  "Arn",
                                       "Brev", "Cor",  "Dulv", "Ers",  "Fen"};
  const std::vector<std::string> suffixes{"vik", "holm", "stad", "berg", "mora", "dale",
                                          "wick", "minster"};
  std::vector<std::string> names;
  for (const auto& s : stems)
    for (const auto& x : suffixes) names.push_back(s + x);  // 320 single-token places
  const auto seconds = place_second_tokens();
  for (std::size_t i = 0; i < stems.size(); ++i)
    for (std::size_t k = 0; k < 4; ++k)
      names.push_back(stems[i] + suffixes[(i + k + 1) % suffixes.size()] + " " +
                      seconds[(i * 4 + k) % seconds.size()]);  // 160 two-token places
  return names;
}

std::vector<std::string> profession_names() {
  const std::vector<std::string> stems{"glass", "map",  "stone", "net",   "dye",   "quill",
                                       "rope",  "salt", "wax",   "tide",  "fern",  "moss",
                                       "ash",   "flint", "harrow", "kiln", "loom",  "forge",
                                       "brine", "sable"};
  const std::vector<std::string> suffixes{"wright", "binder", "warden", "smith", "caller",
                                          "keeper"};
  std::vector<std::string> names;
  for (const auto& s : stems)
    for (const auto& x : suffixes) names.push_back(s + x);  // 120 professions
  return names;
}

std::vector<std::string> country_names() {
  const std::vector<std::string> stems{"Vald", "Krest", "Melg", "Ostr", "Pell",
                                       "Sorv", "Tarv",  "Ulv",  "Bren", "Cors"};
  const std::vector<std::string> suffixes{"oria", "avia", "marn"};
  std::vector<std::string> names;
  for (const auto& s : stems)
    for (const auto& x : suffixes) names.push_back(s + x);  // 30 countries
  return names;
}

const std::vector<std::string>& band_word_pool() {
  static const std::vector<std::string> v{"Morvane",  "Kestrelli", "Vandrik",  "Solmara",
                                          "Threnik",  "Galvora",   "Ostrevan", "Quillmar",
                                          "Drevana",  "Yorvette",  "Belnara",  "Corvessa",
                                          "Fenmark",  "Gildrora",  "Halvern",  "Ismarel",
                                          "Jorvette", "Kalmora",   "Lorvess",  "Mindrava",
                                          "Nervalla", "Orlatte",   "Pendrik",  "Quorvess"};
  return v;
}

const std::vector<std::string>& work_word_pool() {
  static const std::vector<std::string> v{"Vantara",  "Silmoren", "Ashfall",  "Brontide",
                                          "Cindralis", "Dewmere",  "Emberline", "Froswick",
                                          "Glimmervane", "Hollowsong", "Ironbloom", "Junewrack",
                                          "Kelpmire", "Lanterfall", "Mistrevel", "Nightglass",
                                          "Opaline",  "Palewater", "Quernstone", "Rimeveil",
                                          "Saltmere", "Thornwake", "Umbervale", "Windlass",
                                          "Yarrowgate", "Zephyrine", "Askurath", "Bellvane",
                                          "Corvamere", "Dannewick"};
  return v;
}

struct World {
  std::vector<std::string> entity_names;
  std::map<std::string, int> entity_id;
  // per-entity attribute bits; -1 where the attribute does not apply
  std::vector<std::array<int, kAttrCount>> attrs;
  std::vector<int> places, professions, countries;
  std::map<int, int> year_entity;  // year value -> entity id
  int attr_entity[kAttrCount][2] = {};
  std::set<std::array<int, 3>> triples;

  int add_entity(const std::string& name) {
    const auto it = entity_id.find(name);
    if (it != entity_id.end()) return it->second;
    const int id = static_cast<int>(entity_names.size());
    entity_names.push_back(name);
    entity_id.emplace(name, id);
    attrs.push_back({-1, -1, -1, -1});
    return id;
  }

  void add_triple(int s, int r, int o) { triples.insert({s, r, o}); }
};

World build_world(Rng& rng) {
  World w;
  const char* attr_entity_names[kAttrCount][2] = {
      {"attr_region_sea", "attr_region_hills"},
      {"attr_kind_village", "attr_kind_fortress"},
      {"attr_era_old", "attr_era_new"},
      {"attr_field_craft", "attr_field_trade"},
  };
  const int attr_rel[kAttrCount] = {kRegionOf, kKindOf, kEraOf, kFieldOf};
  for (int a = 0; a < kAttrCount; ++a)
    for (int b = 0; b < 2; ++b) w.attr_entity[a][b] = w.add_entity(attr_entity_names[a][b]);

  for (const std::string& name : place_names()) {
    const int id = w.add_entity(name);
    w.attrs[id][kRegion] = rng.bernoulli(0.5) ? 1 : 0;
    w.attrs[id][kKind] = rng.bernoulli(0.5) ? 1 : 0;
    w.places.push_back(id);
  }
  for (int year = 1800; year <= 2049; ++year) {
    const int id = w.add_entity(std::to_string(year));
    w.attrs[id][kEra] = year < 1925 ? 0 : 1;
    w.year_entity[year] = id;
  }
  for (const std::string& name : profession_names()) {
    const int id = w.add_entity(name);
    w.attrs[id][kField] = rng.bernoulli(0.5) ? 1 : 0;
    w.professions.push_back(id);
  }
  for (const std::string& name : country_names()) w.countries.push_back(w.add_entity(name));

  // attribute side structure: the KG knows each entity's attribute values
  for (int id = 0; id < static_cast<int>(w.attrs.size()); ++id)
    for (int a = 0; a < kAttrCount; ++a)
      if (w.attrs[id][a] >= 0) w.add_triple(id, attr_rel[a], w.attr_entity[a][w.attrs[id][a]]);
  return w;
}

std::vector<std::string> name_words(const std::string& name) {
  std::vector<std::string> words;
  std::istringstream ss(name);
  std::string tok;
  while (ss >> tok) words.push_back(tok);
  return words;
}

bool words_clash(const std::vector<std::string>& words, const std::set<std::string>& used) {
  std::set<std::string> folded;
  for (const auto& word : words) {
    const std::string f = fold_word(word);
    if (used.count(f) || !folded.insert(f).second) return true;  // also bans repeats inside
  }
  return false;
}

void consume_words(const std::vector<std::string>& words, std::set<std::string>& used) {
  for (const auto& word : words) used.insert(fold_word(word));
}

}  // namespace

std::vector<SynthTemplate> default_templates() {
  using Role = SynthTemplate::Role;
  return {
      {"<topic> was born in <obj:born_in> , <region:born_in> , in <obj:born_year> , "
       "<era:born_year> .",
       Role::intro},
      {"<subj_last> died in <obj:died_in> , <kind:died_in> , in <obj:died_year> .", Role::body},
      {"<pron> died in <obj:died_year> , <era:died_year> , in <obj:died_in> .", Role::body},
      {"<pron> worked as a <obj:profession> , <field:profession> , for many years .",
       Role::body},
      {"as a <obj:profession> , <subj_last> earned wide respect .", Role::body},
      {"<subj_last> was married to <obj:spouse> .", Role::body},
      {"<pron> shared a long life with <obj:spouse> .", Role::body},
      {"<pron> played with the band <obj:band> .", Role::body},
      {"the band <obj:band> made <subj_last> famous .", Role::body},
      {"<pron> is best known for <obj:known_for> .", Role::body},
      {"critics still praise <obj:known_for> today .", Role::body},
      {"<pron> later lived in <obj:lived_in> , <kind:lived_in> <region:lived_in> .", Role::body},
      {"for a time <subj_last> lived in <obj:lived_in> , <region:lived_in> .", Role::body},
      {"<pron> remained a citizen of <obj:citizen_of> until the end .", Role::body},
      {"<subj_last> held citizenship in <obj:citizen_of> .", Role::body},
      {"<pron> often visited <anchor> with friends .", Role::anchor},
  };
}

SynthResult synthesize_corpus(const SynthConfig& config) {
  if (config.topics <= 0) throw ConfigError("synthesize_corpus: topics must be positive");
  if (config.min_facts < 3 || config.max_facts < config.min_facts)
    throw ConfigError("synthesize_corpus: need 3 <= min_facts <= max_facts");
  if (config.min_sentences < 2 || config.max_sentences < config.min_sentences)
    throw ConfigError("synthesize_corpus: need 2 <= min_sentences <= max_sentences");
  if (config.anchor_prob < 0.0 || config.anchor_prob > 1.0)
    throw ConfigError("synthesize_corpus: anchor_prob must lie in [0, 1]");

  const std::vector<SynthTemplate> raw =
      config.templates.empty() ? default_templates() : config.templates;
  std::vector<CompiledTemplate> intros, bodies, anchors;
  std::set<std::string> scaffold{"he", "she"};
  for (const SynthTemplate& t : raw) {
    CompiledTemplate c = compile_template(t);
    for (const PlaceholderRef& p : c.parts)
      if (p.kind == PlaceholderRef::Kind::literal) scaffold.insert(fold_word(p.literal));
    switch (c.role) {
      case SynthTemplate::Role::intro: intros.push_back(std::move(c)); break;
      case SynthTemplate::Role::body: bodies.push_back(std::move(c)); break;
      case SynthTemplate::Role::anchor: anchors.push_back(std::move(c)); break;
    }
  }
  for (const auto& phrase_pair : kAttrPhrases)
    for (const char* phrase : phrase_pair)
      for (const std::string& word : name_words(phrase)) scaffold.insert(fold_word(word));
  if (intros.empty()) throw ConfigError("synthesize_corpus: no intro template");

  Rng rng(config.seed);
  World world = build_world(rng);

  // every pool word must stay out of the scaffold vocabulary, or alignment
  // could not recover gold labels
  auto check_pool = [&](const std::vector<std::string>& names, const char* what) {
    for (const auto& name : names)
      for (const auto& word : name_words(name))
        if (scaffold.count(fold_word(word)))
          throw ConfigError(std::string("synthesize_corpus: ") + what + " word '" + word +
                            "' collides with template scaffold");
  };
  check_pool(first_name_pool(), "first-name");
  check_pool(last_name_pool(), "last-name");
  check_pool(place_names(), "place");
  check_pool(profession_names(), "profession");
  check_pool(country_names(), "country");
  check_pool(band_word_pool(), "band");
  check_pool(work_word_pool(), "work");

  SynthResult result;
  std::set<std::string> used_topic_names;

  for (int ti = 0; ti < config.topics; ++ti) {
    // topic person
    std::string full_name;
    std::vector<std::string> topic_words;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) throw ConfigError("synthesize_corpus: name pool exhausted");
      const std::string& first = rng.choice(first_name_pool());
      const std::string& last = rng.choice(last_name_pool());
      if (fold_word(first) == fold_word(last)) continue;
      full_name = first + " " + last;
      if (used_topic_names.count(full_name) || world.entity_id.count(full_name)) continue;
      used_topic_names.insert(full_name);
      topic_words = {first, last};
      break;
    }
    const int topic_entity = world.add_entity(full_name);
    const std::string pron = rng.bernoulli(0.5) ? "he" : "she";

    std::set<std::string> used;
    consume_words(topic_words, used);

    TopicDocument doc;
    doc.topic_id = topic_entity;
    doc.facts.push_back(make_fact(0, topic_entity, kTopicItself, topic_entity, topic_words,
                                  false, /*topic_itself=*/true));
    int next_fact_id = 1;
    std::map<int, int> fact_by_relation;  // relation -> index in doc.facts

    auto add_fact = [&](int rel, int object, const std::vector<std::string>& words) {
      doc.facts.push_back(make_fact(next_fact_id++, topic_entity, rel, object, words));
      fact_by_relation[rel] = static_cast<int>(doc.facts.size()) - 1;
      world.add_triple(topic_entity, rel, object);
    };
    auto sample_from_pool = [&](const std::vector<int>& pool) -> int {
      for (int attempt = 0; attempt < 200; ++attempt) {
        const int id = pool[rng.below(pool.size())];
        if (!words_clash(name_words(world.entity_names[id]), used)) {
          consume_words(name_words(world.entity_names[id]), used);
          return id;
        }
      }
      return -1;
    };

    // forced facts: born_in, born_year
    const int born_place = sample_from_pool(world.places);
    if (born_place < 0) throw ConfigError("synthesize_corpus: place pool exhausted");
    add_fact(kBornIn, born_place, name_words(world.entity_names[born_place]));
    const int born_year = 1800 + static_cast<int>(rng.below(180));
    consume_words({std::to_string(born_year)}, used);
    add_fact(kBornYear, world.year_entity.at(born_year), {std::to_string(born_year)});

    const int target_facts =
        config.min_facts + static_cast<int>(rng.below(config.max_facts - config.min_facts + 1));
    int facts_made = 2;

    enum Option { kOptDied, kOptProfession, kOptSpouse, kOptBand, kOptKnownFor, kOptLived,
                  kOptCitizen };
    std::vector<int> options{kOptDied, kOptProfession, kOptSpouse, kOptBand, kOptKnownFor,
                             kOptLived, kOptCitizen};
    rng.shuffle(options);
    for (const int opt : options) {
      const int cost = opt == kOptDied ? 2 : 1;
      if (facts_made + cost > target_facts) continue;
      switch (opt) {
        case kOptDied: {
          const int died_place = sample_from_pool(world.places);
          if (died_place < 0) break;
          int died_year = std::min(2049, born_year + 20 + static_cast<int>(rng.below(51)));
          if (words_clash({std::to_string(died_year)}, used)) break;
          consume_words({std::to_string(died_year)}, used);
          add_fact(kDiedIn, died_place, name_words(world.entity_names[died_place]));
          add_fact(kDiedYear, world.year_entity.at(died_year), {std::to_string(died_year)});
          facts_made += 2;
          break;
        }
        case kOptProfession: {
          const int id = sample_from_pool(world.professions);
          if (id < 0) break;
          add_fact(kProfession, id, name_words(world.entity_names[id]));
          ++facts_made;
          break;
        }
        case kOptSpouse: {
          std::string spouse_name;
          bool found = false;
          for (int attempt = 0; attempt < 200 && !found; ++attempt) {
            const std::string& first = rng.choice(first_name_pool());
            const std::string& last = rng.choice(last_name_pool());
            if (fold_word(first) == fold_word(last)) continue;
            spouse_name = first + " " + last;
            if (spouse_name == full_name) continue;
            if (words_clash(name_words(spouse_name), used)) continue;
            found = true;
          }
          if (!found) break;
          consume_words(name_words(spouse_name), used);
          add_fact(kSpouse, world.add_entity(spouse_name), name_words(spouse_name));
          ++facts_made;
          break;
        }
        case kOptBand: {
          std::string band_name;
          bool found = false;
          for (int attempt = 0; attempt < 200 && !found; ++attempt) {
            const std::string& a = rng.choice(band_word_pool());
            const std::string& b = rng.choice(band_word_pool());
            if (fold_word(a) == fold_word(b)) continue;
            band_name = a + " " + b;
            if (words_clash(name_words(band_name), used)) continue;
            found = true;
          }
          if (!found) break;
          consume_words(name_words(band_name), used);
          add_fact(kBand, world.add_entity(band_name), name_words(band_name));
          ++facts_made;
          break;
        }
        case kOptKnownFor: {
          std::string work_name;
          bool found = false;
          const int len = 2 + static_cast<int>(rng.below(2));
          for (int attempt = 0; attempt < 200 && !found; ++attempt) {
            std::vector<std::string> parts;
            for (int j = 0; j < len; ++j) parts.push_back(rng.choice(work_word_pool()));
            work_name = parts[0];
            for (int j = 1; j < len; ++j) work_name += " " + parts[j];
            if (words_clash(parts, used)) continue;
            found = true;
          }
          if (!found) break;
          consume_words(name_words(work_name), used);
          add_fact(kKnownFor, world.add_entity(work_name), name_words(work_name));
          ++facts_made;
          break;
        }
        case kOptLived: {
          const int id = sample_from_pool(world.places);
          if (id < 0) break;
          add_fact(kLivedIn, id, name_words(world.entity_names[id]));
          ++facts_made;
          break;
        }
        case kOptCitizen: {
          const int id = sample_from_pool(world.countries);
          if (id < 0) break;
          add_fact(kCitizenOf, id, name_words(world.entity_names[id]));
          ++facts_made;
          break;
        }
      }
    }

    // incidental anchor mention
    int anchor_fact_index = -1;
    if (!anchors.empty() && rng.bernoulli(config.anchor_prob)) {
      const int id = rng.bernoulli(0.8) ? sample_from_pool(world.places)
                                        : sample_from_pool(world.countries);
      if (id >= 0) {
        doc.facts.push_back(make_fact(next_fact_id++, topic_entity, kUnknownRelation, id,
                                      name_words(world.entity_names[id]), false, false,
                                      /*is_anchor=*/true));
        anchor_fact_index = static_cast<int>(doc.facts.size()) - 1;
        world.add_triple(topic_entity, kUnknownRelation, id);
      }
    }
    doc.facts.push_back(make_fact(-1, -1, -1, -1, {}, /*naf=*/true));
    if (!facts_are_canonical(doc.facts))
      throw ConfigError("synthesize_corpus: internal fact-order bug");

    // sentence selection: one intro + shuffled applicable bodies (+ anchor)
    std::vector<const CompiledTemplate*> sentence_plan;
    std::vector<const CompiledTemplate*> applicable;
    for (const CompiledTemplate& c : intros) {
      bool ok = true;
      for (int rel : c.required) ok = ok && fact_by_relation.count(rel);
      if (ok) {
        sentence_plan.push_back(&c);
        break;
      }
    }
    if (sentence_plan.empty())
      throw ConfigError("synthesize_corpus: no applicable intro template for topic");
    for (const CompiledTemplate& c : bodies) {
      bool ok = true;
      for (int rel : c.required) ok = ok && fact_by_relation.count(rel);
      if (ok) applicable.push_back(&c);
    }
    if (anchor_fact_index >= 0)
      for (const CompiledTemplate& c : anchors) applicable.push_back(&c);
    rng.shuffle(applicable);
    const int target_sentences =
        config.min_sentences +
        static_cast<int>(rng.below(config.max_sentences - config.min_sentences + 1));
    for (const CompiledTemplate* c : applicable) {
      if (static_cast<int>(sentence_plan.size()) >= target_sentences) break;
      sentence_plan.push_back(c);
    }

    // render tokens + gold augmentation
    AlignedTopic topic;
    auto emit_plain = [&](const std::string& word) {
      topic.alignment.push_back({word, -1, false,
                                 static_cast<int>(doc.facts.size()) - 1, 0, topic_entity});
      doc.tokens.push_back(word);
    };
    auto emit_copy = [&](const std::string& word, int fact_index, int n) {
      topic.alignment.push_back({word, -1, true, fact_index, n, topic_entity});
      doc.tokens.push_back(word);
    };
    for (const CompiledTemplate* c : sentence_plan) {
      for (const PlaceholderRef& p : c->parts) {
        switch (p.kind) {
          case PlaceholderRef::Kind::literal: emit_plain(p.literal); break;
          case PlaceholderRef::Kind::pron: emit_plain(pron); break;
          case PlaceholderRef::Kind::topic:
            for (std::size_t j = 0; j < topic_words.size(); ++j)
              emit_copy(topic_words[j], 0, static_cast<int>(j));
            break;
          case PlaceholderRef::Kind::subj_last: emit_copy(topic_words[1], 0, 1); break;
          case PlaceholderRef::Kind::anchor: {
            const Fact& f = doc.facts[anchor_fact_index];
            const int start = static_cast<int>(doc.tokens.size());
            for (std::size_t j = 0; j < f.knowledge_words.size(); ++j)
              emit_copy(f.knowledge_words[j], anchor_fact_index, static_cast<int>(j));
            doc.anchors.push_back(
                {start, static_cast<int>(f.knowledge_words.size()), f.object});
            break;
          }
          case PlaceholderRef::Kind::obj: {
            const int fi = fact_by_relation.at(p.relation);
            const Fact& f = doc.facts[fi];
            for (std::size_t j = 0; j < f.knowledge_words.size(); ++j)
              emit_copy(f.knowledge_words[j], fi, static_cast<int>(j));
            break;
          }
          case PlaceholderRef::Kind::attr: {
            const Fact& f = doc.facts[fact_by_relation.at(p.relation)];
            const int bit = world.attrs[f.object][p.attr];
            for (const std::string& word : name_words(kAttrPhrases[p.attr][bit]))
              emit_plain(word);
            break;
          }
        }
      }
    }
    topic.doc = std::move(doc);
    result.corpus.push_back(std::move(topic));
  }

  assign_splits(result.corpus);

  result.kg.entity_count = static_cast<int>(world.entity_names.size());
  result.kg.relation_count = kRelCount;
  result.kg.entity_names = world.entity_names;
  result.kg.relation_names.assign(kRelNames, kRelNames + kRelCount);
  for (const auto& t : world.triples) result.kg.triples.push_back({t[0], t[1], t[2]});
  validate_triples(result.kg);
  return result;
}

}  // namespace nklm
