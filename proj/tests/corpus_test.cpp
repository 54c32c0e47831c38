#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "nklm/corpus.hpp"
#include "nklm/errors.hpp"
#include "test_util.hpp"

using namespace nklm;
using testutil::TempDir;

namespace {

TopicDocument doc_of(int topic_id, std::vector<std::string> tokens, std::vector<Fact> facts) {
  TopicDocument d;
  d.topic_id = topic_id;
  d.tokens = std::move(tokens);
  d.facts = std::move(facts);
  return d;
}

Fact naf() { return make_fact(-1, -1, -1, -1, {}, true); }

Corpus corpus_of_tokens(const std::vector<std::vector<std::string>>& topics) {
  Corpus c;
  int id = 0;
  for (const auto& tokens : topics) {
    AlignedTopic t;
    t.doc = doc_of(id, tokens, {make_fact(0, id, 0, id, {tokens.front()}, false, true), naf()});
    ++id;
    c.push_back(std::move(t));
  }
  return c;
}

bool same_fact(const Fact& a, const Fact& b) {
  return a.fact_id == b.fact_id && a.subject == b.subject && a.relation == b.relation &&
         a.object == b.object && a.knowledge_words == b.knowledge_words &&
         a.is_naf == b.is_naf && a.is_topic_itself == b.is_topic_itself &&
         a.is_anchor == b.is_anchor;
}

bool same_gold(const AugmentedToken& a, const AugmentedToken& b) {
  return a.w == b.w && a.z == b.z && a.a == b.a && (!a.z || a.n == b.n);
}

}  // namespace

TEST_CASE("fold_word lowers ASCII only") {
  CHECK(fold_word("Rogers") == "rogers");
  CHECK(fold_word("PENNSYLVANIA") == "pennsylvania");
  CHECK(fold_word("1928") == "1928");
  CHECK(fold_word(".") == ".");
  CHECK(fold_word("\xC3\x89tude") == "\xC3\x89tude");  // bytes >= 0x80 untouched
}

TEST_CASE("split names round trip") {
  for (Split s : {Split::train, Split::valid, Split::test})
    CHECK(parse_split(split_name(s)) == s);
  CHECK_THROWS_AS(parse_split("dev"), ParseError);
}

TEST_CASE("vocabulary ranks by frequency then spelling") {
  // a:5 b:3 c:1 d:1 -> a, b, then c before d on the tie
  Corpus c = corpus_of_tokens({{"a", "a", "a", "b", "c"}, {"a", "A", "b", "b", "d"}});
  Vocabulary v = Vocabulary::build(c, 6);
  CHECK(v.size() == 6);
  CHECK(v.word(Vocabulary::kUnkId) == "<unk>");
  CHECK(v.word(Vocabulary::kBosId) == "<bos>");
  CHECK(v.word(Vocabulary::kEosId) == "<eos>");
  CHECK(v.word(3) == "a");
  CHECK(v.word(4) == "b");
  CHECK(v.word(5) == "c");
  CHECK(v.id_or_unk("A") == 3);
  CHECK(v.id_or_unk("d") == Vocabulary::kUnkId);
  CHECK(v.contains("B"));
  CHECK_FALSE(v.contains("zzz"));

  SUBCASE("size above unique count keeps every word without error") {
    Vocabulary all = Vocabulary::build(c, 50);
    CHECK(all.size() == 3 + 4);
    CHECK(all.id_or_unk("d") == 6);
  }
  SUBCASE("size must leave room for at least one content word") {
    CHECK_THROWS_AS(Vocabulary::build(c, 3), DomainError);
  }
  SUBCASE("content words rebuild the same vocabulary") {
    Vocabulary again = Vocabulary::from_content_words(v.content_words());
    CHECK(again.words() == v.words());
  }
  SUBCASE("word id out of range throws") { CHECK_THROWS_AS(v.word(99), DomainError); }
}

TEST_CASE("alignment recovers copy positions on a biography sentence") {
  std::vector<Fact> facts{
      make_fact(0, 7, 11, 7, {"Fred", "Rogers"}, false, true),
      make_fact(42, 7, 0, 101, {"Latrobe", "Pennsylvania"}),
      make_fact(83, 7, 1, 102, {"1928"}),
      naf(),
  };
  TopicDocument doc = doc_of(
      7, {"Rogers", "was", "born", "in", "Latrobe", "Pennsylvania", "in", "1928"}, facts);
  const auto gold = align(doc);
  REQUIRE(gold.size() == 8);
  const int kNaf = 3;
  const std::vector<std::tuple<bool, int, int>> expect{
      {true, 0, 1},  {false, kNaf, 0}, {false, kNaf, 0}, {false, kNaf, 0},
      {true, 1, 0},  {true, 1, 1},     {false, kNaf, 0}, {true, 2, 0},
  };
  for (std::size_t t = 0; t < expect.size(); ++t) {
    CAPTURE(t);
    CHECK(gold[t].w == doc.tokens[t]);  // surface form preserved
    CHECK(gold[t].z == std::get<0>(expect[t]));
    CHECK(gold[t].a == std::get<1>(expect[t]));
    CHECK(gold[t].n == std::get<2>(expect[t]));
    CHECK(gold[t].k == 7);
  }
}

TEST_CASE("alignment prefers the longest run, then the earliest fact") {
  std::vector<Fact> facts{
      make_fact(0, 1, 11, 1, {"Ada"}, false, true),
      make_fact(1, 1, 0, 10, {"silver"}),
      make_fact(2, 1, 1, 11, {"silver", "moon", "road"}),
      make_fact(3, 1, 2, 12, {"moon", "road"}),
      naf(),
  };
  SUBCASE("longest contiguous match wins even for a later fact") {
    const auto gold = align(doc_of(1, {"silver", "moon", "road"}, facts));
    for (int t = 0; t < 3; ++t) {
      CHECK(gold[t].z);
      CHECK(gold[t].a == 2);
      CHECK(gold[t].n == t);
    }
  }
  SUBCASE("equal-length candidates go to the earlier fact") {
    const auto gold = align(doc_of(1, {"silver"}, facts));
    CHECK(gold[0].a == 1);  // fact 1 beats fact 2 at run length 1
    CHECK(gold[0].n == 0);
  }
  SUBCASE("repeated knowledge word matches its first position") {
    std::vector<Fact> rep{
        make_fact(0, 2, 11, 2, {"Bo"}, false, true),
        make_fact(1, 2, 0, 20, {"dun", "dun", "dun"}),
        naf(),
    };
    const auto gold = align(doc_of(2, {"dun", "dun"}, rep));
    CHECK(gold[0].n == 0);  // two-token run from position 0, not 1
    CHECK(gold[1].n == 1);
  }
  SUBCASE("no shared words leaves everything unmatched") {
    const auto gold = align(doc_of(1, {"the", "quick", "fox"}, facts));
    for (const auto& g : gold) {
      CHECK_FALSE(g.z);
      CHECK(g.a == 4);
      CHECK(g.n == 0);
    }
  }
}

TEST_CASE("alignment folds case and applies aliases to the text side") {
  std::vector<Fact> facts{
      make_fact(0, 3, 11, 3, {"Mister", "Rogers"}, false, true),
      make_fact(1, 3, 0, 30, {"Pennsylvania"}),
      naf(),
  };
  AliasTable aliases;
  aliases.canonical["pa"] = "pennsylvania";
  const auto gold = align(doc_of(3, {"ROGERS", "of", "PA"}, facts), aliases);
  CHECK(gold[0].z);
  CHECK(gold[0].a == 0);
  CHECK(gold[0].n == 1);
  CHECK(gold[0].w == "ROGERS");  // alias + fold never rewrite the surface
  CHECK_FALSE(gold[1].z);
  CHECK(gold[2].z);
  CHECK(gold[2].a == 1);
  CHECK(gold[2].w == "PA");
}

TEST_CASE("alignment validates its inputs") {
  std::vector<Fact> facts{make_fact(0, 1, 11, 1, {"Ada"}, false, true), naf()};
  CHECK_THROWS_AS(align(doc_of(1, {}, facts)), DataError);
  std::vector<Fact> backwards{naf(), make_fact(0, 1, 11, 1, {"Ada"}, false, true)};
  CHECK_THROWS_AS(align(doc_of(1, {"Ada"}, backwards)), DataError);
  std::vector<Fact> no_naf{make_fact(0, 1, 11, 1, {"Ada"}, false, true)};
  CHECK_THROWS_AS(align(doc_of(1, {"Ada"}, no_naf)), DataError);
}

TEST_CASE("alias table reads tab-separated pairs") {
  TempDir tmp("alias");
  {
    std::ofstream out(tmp.path("alias.tsv"));
    out << "# surface\tcanonical\n";
    out << "PA\tPennsylvania\n";
    out << "penna\tpennsylvania\n";
  }
  AliasTable t = AliasTable::read(tmp.path("alias.tsv"));
  CHECK(t.resolve("pa") == "pennsylvania");
  CHECK(t.resolve("penna") == "pennsylvania");
  CHECK(t.resolve("other") == "other");

  {
    std::ofstream out(tmp.path("bad.tsv"));
    out << "no-tab-here\n";
  }
  CHECK_THROWS_AS(AliasTable::read(tmp.path("bad.tsv")), ParseError);
  CHECK_THROWS_AS(AliasTable::read(tmp.path("missing.tsv")), IoError);
}

TEST_CASE("anchor spans become anchor facts, one per entity") {
  TopicDocument doc =
      doc_of(9, {"he", "visited", "Three", "Days", "Grace", "and", "Three", "Days", "Grace"},
             {make_fact(0, 9, 11, 9, {"Kei"}, false, true), naf()});
  doc.anchors.push_back({2, 3, 500});
  doc.anchors.push_back({6, 3, 500});  // duplicate entity collapses
  const auto facts = synthesize_anchor_facts(doc, /*unknown_relation_id=*/10,
                                             /*first_fact_id=*/1);
  REQUIRE(facts.size() == 1);
  CHECK(facts[0].fact_id == 1);
  CHECK(facts[0].subject == 9);
  CHECK(facts[0].relation == 10);
  CHECK(facts[0].object == 500);
  CHECK(facts[0].knowledge_words == std::vector<std::string>{"Three", "Days", "Grace"});
  CHECK(facts[0].is_anchor);
  CHECK_FALSE(facts[0].is_topic_itself);

  SUBCASE("distinct entities get sequential ids") {
    doc.anchors.push_back({0, 1, 501});
    const auto two = synthesize_anchor_facts(doc, 10, 5);
    REQUIRE(two.size() == 2);
    CHECK(two[0].fact_id == 5);
    CHECK(two[1].fact_id == 6);
    CHECK(two[1].knowledge_words == std::vector<std::string>{"he"});
  }
  SUBCASE("span outside the description throws") {
    doc.anchors.push_back({7, 5, 502});
    CHECK_THROWS_AS(synthesize_anchor_facts(doc, 10, 1), DataError);
  }
}

TEST_CASE("corpus stats match hand counts") {
  Corpus c;
  {
    AlignedTopic t;
    t.doc = doc_of(1, {"Ada", "was", "from", "Kyo", "."},
                   {make_fact(0, 1, 11, 1, {"Ada"}, false, true),
                    make_fact(1, 1, 0, 10, {"Kyo", "City"}), naf()});
    c.push_back(t);
  }
  {
    AlignedTopic t;
    t.doc = doc_of(2, {"Bo", "sang", "."},
                   {make_fact(0, 2, 11, 2, {"Bo", "Ren", "Ten"}, false, true),
                    make_fact(1, 2, 0, 11, {"Naru"}),
                    make_fact(2, 2, 10, 12, {"Oslo"}, false, false, true), naf()});
    c.push_back(t);
  }
  const CorpusStats s = corpus_stats(c);
  CHECK(s.topic_count == 2);
  CHECK(s.token_count == 8);
  // ada was from kyo . bo sang -> 7 distinct folded words
  CHECK(s.unique_word_count == 7);
  CHECK(s.avg_facts_per_topic == doctest::Approx(1.5));       // (1 + 2) / 2
  CHECK(s.avg_knowledge_words_per_fact == doctest::Approx(4.0 / 3.0));
  CHECK(s.max_knowledge_words == 3);  // the three-word topic name
  CHECK(s.topic_knowledge_word_count.at(1) == 3);  // ada kyo city
  CHECK(s.topic_knowledge_word_count.at(2) == 5);  // bo ren ten naru oslo
}

TEST_CASE("topic filter drops short or fact-heavy topics") {
  Corpus c;
  auto push = [&](int id, int sentences, int facts) {
    AlignedTopic t;
    std::vector<std::string> tokens{"Ada"};
    for (int s = 0; s < sentences; ++s) {
      tokens.push_back("x");
      tokens.push_back(s % 2 ? "!" : ".");
    }
    std::vector<Fact> fs{make_fact(0, id, 11, id, {"Ada"}, false, true)};
    for (int f = 0; f < facts; ++f)
      fs.push_back(make_fact(f + 1, id, 0, 100 + f, {"w" + std::to_string(f)}));
    fs.push_back(naf());
    t.doc = doc_of(id, tokens, fs);
    c.push_back(t);
  };
  push(1, 3, 2);
  push(2, 2, 2);   // too few sentences
  push(3, 5, 4);   // too many facts for the tight limit below
  const Corpus kept = filter_topics(c, /*max_facts=*/3, /*min_sentences=*/3);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].doc.topic_id == 1);
  CHECK(filter_topics(c).size() == 2);  // defaults keep topic 3
}

TEST_CASE("splits interleave eight-one-one") {
  Corpus c = corpus_of_tokens(std::vector<std::vector<std::string>>(12, {"x"}));
  assign_splits(c);
  std::vector<Split> got;
  for (const auto& t : c) got.push_back(t.doc.split);
  for (int i = 0; i < 8; ++i) CHECK(got[i] == Split::train);
  CHECK(got[8] == Split::valid);
  CHECK(got[9] == Split::test);
  CHECK(got[10] == Split::train);
  CHECK(got[11] == Split::train);
}

TEST_CASE("dataset files round trip byte for byte") {
  SynthConfig cfg;
  cfg.topics = 10;
  cfg.seed = 77;
  const SynthResult synth = synthesize_corpus(cfg);
  TempDir tmp("dataset");
  write_dataset(synth.corpus, tmp.path("d.jsonl"));
  const Corpus back = read_dataset(tmp.path("d.jsonl"));
  REQUIRE(back.size() == synth.corpus.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CAPTURE(i);
    CHECK(back[i].doc.topic_id == synth.corpus[i].doc.topic_id);
    CHECK(back[i].doc.split == synth.corpus[i].doc.split);
    CHECK(back[i].doc.tokens == synth.corpus[i].doc.tokens);
    REQUIRE(back[i].doc.facts.size() == synth.corpus[i].doc.facts.size());
    for (std::size_t f = 0; f < back[i].doc.facts.size(); ++f)
      CHECK(same_fact(back[i].doc.facts[f], synth.corpus[i].doc.facts[f]));
    REQUIRE(back[i].alignment.size() == synth.corpus[i].alignment.size());
    for (std::size_t t = 0; t < back[i].alignment.size(); ++t)
      CHECK(same_gold(back[i].alignment[t], synth.corpus[i].alignment[t]));
  }
  write_dataset(back, tmp.path("again.jsonl"));
  CHECK(testutil::slurp(tmp.path("again.jsonl")) == testutil::slurp(tmp.path("d.jsonl")));
}

TEST_CASE("dataset reader rejects malformed files") {
  SynthConfig cfg;
  cfg.topics = 2;
  const SynthResult synth = synthesize_corpus(cfg);
  TempDir tmp("badset");
  write_dataset(synth.corpus, tmp.path("good.jsonl"));
  const std::string good = testutil::slurp(tmp.path("good.jsonl"));
  const auto first_line = good.substr(0, good.find('\n'));

  auto write_file = [&](const std::string& name, const std::string& body) {
    std::ofstream out(tmp.path(name), std::ios::binary);
    out << body;
    return tmp.path(name);
  };

  SUBCASE("truncated json names the line") {
    const auto p = write_file("t.jsonl", first_line + "\n" + first_line.substr(0, 40) + "\n");
    try {
      read_dataset(p);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
  SUBCASE("future schema version") {
    std::string bumped = first_line;
    const auto at = bumped.find("\"schema_version\":1");
    REQUIRE(at != std::string::npos);
    bumped.replace(at, 18, "\"schema_version\":9");
    CHECK_THROWS_AS(read_dataset(write_file("v.jsonl", bumped + "\n")), VersionError);
  }
  SUBCASE("duplicate topic id") {
    CHECK_THROWS_AS(read_dataset(write_file("dup.jsonl", first_line + "\n" + first_line + "\n")),
                    ParseError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(read_dataset(tmp.path("nope.jsonl")), IoError); }
  SUBCASE("alignment length mismatch") {
    AlignedTopic t = synth.corpus[0];
    t.alignment.pop_back();
    Corpus c{t};
    const auto p = tmp.path("mis.jsonl");
    write_dataset(c, p);
    CHECK_THROWS_AS(read_dataset(p), ParseError);
  }
  SUBCASE("copy token pointing at NaF") {
    AlignedTopic t = synth.corpus[0];
    t.alignment[0].z = true;
    t.alignment[0].a = static_cast<int>(t.doc.facts.size()) - 1;
    t.alignment[0].n = 0;
    Corpus c{t};
    const auto p = tmp.path("naf.jsonl");
    write_dataset(c, p);
    CHECK_THROWS_AS(read_dataset(p), ParseError);
  }
}

TEST_CASE("synthetic corpus is deterministic per seed") {
  SynthConfig cfg;
  cfg.topics = 6;
  cfg.seed = 5;
  const SynthResult a = synthesize_corpus(cfg);
  const SynthResult b = synthesize_corpus(cfg);
  REQUIRE(a.corpus.size() == b.corpus.size());
  for (std::size_t i = 0; i < a.corpus.size(); ++i)
    CHECK(a.corpus[i].doc.tokens == b.corpus[i].doc.tokens);
  CHECK(a.kg.triples.size() == b.kg.triples.size());

  cfg.seed = 6;
  const SynthResult c = synthesize_corpus(cfg);
  bool differs = a.corpus.size() != c.corpus.size();
  for (std::size_t i = 0; !differs && i < a.corpus.size(); ++i)
    differs = a.corpus[i].doc.tokens != c.corpus[i].doc.tokens;
  CHECK(differs);
}

TEST_CASE("synthetic topics respect the configured shape") {
  SynthConfig cfg;
  cfg.topics = 40;
  cfg.seed = 11;
  const SynthResult synth = synthesize_corpus(cfg);
  REQUIRE(synth.corpus.size() == 40);
  int with_anchor = 0, without_anchor = 0;
  for (const AlignedTopic& topic : synth.corpus) {
    CAPTURE(topic.doc.topic_id);
    REQUIRE(facts_are_canonical(topic.doc.facts));
    CHECK(topic.alignment.size() == topic.doc.tokens.size());
    int ordinary = 0, anchors = 0, sentences = 0;
    for (const Fact& f : topic.doc.facts) {
      if (f.is_anchor)
        ++anchors;
      else if (!f.is_naf && !f.is_topic_itself)
        ++ordinary;
    }
    for (const auto& w : topic.doc.tokens)
      if (w == "." || w == "!" || w == "?") ++sentences;
    CHECK(ordinary >= cfg.min_facts);
    CHECK(ordinary <= cfg.max_facts);
    CHECK(sentences >= cfg.min_sentences);
    CHECK(sentences <= cfg.max_sentences);
    (anchors ? with_anchor : without_anchor) += 1;
  }
  CHECK(with_anchor > 0);
  CHECK(without_anchor > 0);
  CHECK(filter_topics(synth.corpus).size() == synth.corpus.size());  // nothing filterable
}

TEST_CASE("gold alignment is exactly what the aligner recovers") {
  SynthConfig cfg;
  cfg.topics = 25;
  cfg.seed = 21;
  const SynthResult synth = synthesize_corpus(cfg);
  for (const AlignedTopic& topic : synth.corpus) {
    CAPTURE(topic.doc.topic_id);
    const auto recovered = align(topic.doc);
    REQUIRE(recovered.size() == topic.alignment.size());
    for (std::size_t t = 0; t < recovered.size(); ++t) {
      CAPTURE(t);
      CHECK(same_gold(recovered[t], topic.alignment[t]));
    }
  }
}

TEST_CASE("synthetic knowledge graph carries attribute side structure") {
  SynthConfig cfg;
  cfg.topics = 12;
  cfg.seed = 31;
  const SynthResult synth = synthesize_corpus(cfg);
  REQUIRE_NOTHROW(validate_triples(synth.kg));

  std::map<std::string, int> rel_id;
  for (int r = 0; r < synth.kg.relation_count; ++r) rel_id[synth.kg.relation_names[r]] = r;
  REQUIRE(rel_id.count("region_of"));
  REQUIRE(rel_id.count("era_of"));
  REQUIRE(rel_id.count("born_in"));

  std::set<std::pair<int, int>> has_region, has_era;
  std::set<std::array<int, 3>> all;
  for (const Triple& t : synth.kg.triples) {
    all.insert({t.subject, t.relation, t.object});
    if (t.relation == rel_id["region_of"]) has_region.insert({t.subject, t.object});
    if (t.relation == rel_id["era_of"]) has_era.insert({t.subject, t.object});
  }
  int checked_places = 0, checked_years = 0;
  for (const AlignedTopic& topic : synth.corpus) {
    for (const Fact& f : topic.doc.facts) {
      if (f.is_naf || f.is_topic_itself || f.is_anchor) continue;
      // every stated fact is a triple
      CHECK(all.count({f.subject, f.relation, f.object}));
      const std::string rel = synth.kg.relation_names[f.relation];
      if (rel == "born_in" || rel == "died_in" || rel == "lived_in") {
        bool found = false;
        for (const auto& [s, o] : has_region) found = found || s == f.object;
        CHECK(found);
        ++checked_places;
      }
      if (rel == "born_year" || rel == "died_year") {
        bool found = false;
        for (const auto& [s, o] : has_era) found = found || s == f.object;
        CHECK(found);
        ++checked_years;
      }
    }
  }
  CHECK(checked_places > 0);
  CHECK(checked_years > 0);
}

TEST_CASE("scaffold words and knowledge words never overlap") {
  SynthConfig cfg;
  cfg.topics = 30;
  cfg.seed = 41;
  const SynthResult synth = synthesize_corpus(cfg);
  std::set<std::string> scaffold, copied;
  for (const AlignedTopic& topic : synth.corpus)
    for (const AugmentedToken& t : topic.alignment)
      (t.z ? copied : scaffold).insert(fold_word(t.w));
  CHECK(scaffold.size() > 10);
  CHECK(copied.size() > 30);
  for (const std::string& w : copied) {
    CAPTURE(w);
    CHECK(scaffold.count(w) == 0);
  }
  // within a topic, no two facts share a folded knowledge word
  for (const AlignedTopic& topic : synth.corpus) {
    std::set<std::string> seen;
    for (const Fact& f : topic.doc.facts)
      for (const std::string& w : f.knowledge_words) {
        if (f.is_topic_itself) continue;  // topic name also appears in no other fact
        CAPTURE(topic.doc.topic_id);
        CAPTURE(w);
        CHECK(seen.insert(fold_word(w)).second);
      }
  }
}

TEST_CASE("template validation rejects bad placeholders") {
  SynthConfig cfg;
  cfg.topics = 1;
  SUBCASE("unknown placeholder") {
    cfg.templates = {{"<topic> was born in <obj:born_in> .", SynthTemplate::Role::intro},
                     {"<pron> liked <thing:born_in> .", SynthTemplate::Role::body}};
    CHECK_THROWS_AS(synthesize_corpus(cfg), ConfigError);
  }
  SUBCASE("unknown relation") {
    cfg.templates = {{"<topic> came from <obj:hometown> .", SynthTemplate::Role::intro}};
    CHECK_THROWS_AS(synthesize_corpus(cfg), ConfigError);
  }
  SUBCASE("attribute on wrong relation") {
    cfg.templates = {{"<topic> was born in <obj:born_in> , <era:born_in> .",
                      SynthTemplate::Role::intro}};
    CHECK_THROWS_AS(synthesize_corpus(cfg), ConfigError);
  }
  SUBCASE("scaffold word colliding with an entity pool") {
    cfg.templates = {{"<topic> was born in <obj:born_in> in <obj:born_year> Korvik .",
                      SynthTemplate::Role::intro}};
    CHECK_THROWS_AS(synthesize_corpus(cfg), ConfigError);
  }
  SUBCASE("no intro template") {
    cfg.templates = {{"<pron> sang .", SynthTemplate::Role::body}};
    CHECK_THROWS_AS(synthesize_corpus(cfg), ConfigError);
  }
  SUBCASE("bad bounds") {
    cfg.min_facts = 2;
    CHECK_THROWS_AS(synthesize_corpus(cfg), ConfigError);
  }
}
