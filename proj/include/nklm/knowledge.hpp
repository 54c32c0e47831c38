#pragma once

#include <string>
#include <vector>

#include "nklm/tensor.hpp"

namespace nklm {

// One knowledge fact. Ordinary facts are (subject, relation, object) triples
// whose knowledge words are the object's surface words. Two specials exist
// per topic: Topic_Itself (knowledge words = the topic's own surface words)
// and NaF ("not a fact", the sink for plain language; no knowledge words).
// Anchor facts attach incidental entity mentions under a shared
// UnknownRelation so their words stay copyable.
struct Fact {
  int fact_id = -1;
  int subject = -1;
  int relation = -1;
  int object = -1;
  std::vector<std::string> knowledge_words;
  bool is_naf = false;
  bool is_topic_itself = false;
  bool is_anchor = false;
};

// Validates the Fact invariants; throws DomainError on violation.
Fact make_fact(int fact_id, int subject, int relation, int object,
               std::vector<std::string> knowledge_words, bool is_naf = false,
               bool is_topic_itself = false, bool is_anchor = false);

const std::vector<std::string>& knowledge_words_of(const Fact& f);

// Entity / relation vectors, either trained or random. Column e of
// `entities` is the vector of entity id e; likewise for relations.
struct EmbeddingStore {
  enum class Provenance { trained, random };
  std::size_t dim = 0;
  Tensor2 entities;   // dim x entity_count
  Tensor2 relations;  // dim x relation_count
  std::vector<std::string> entity_names;    // may be empty (names unknown)
  std::vector<std::string> relation_names;  // may be empty
  Provenance provenance = Provenance::trained;

  std::size_t entity_count() const { return entities.cols(); }
  std::size_t relation_count() const { return relations.cols(); }
  Vec entity_vec(int id) const;    // throws BuildError when id has no column
  Vec relation_vec(int id) const;
};

// Per-topic fact memory. Facts are kept in canonical order: Topic_Itself
// first, ordinary facts by ascending fact_id, then anchors by ascending
// fact_id, NaF last. Column j of `memory` is the embedding of facts[j]:
// concat(relation vector, object entity vector) for ordinary/anchor facts,
// the shared learned vectors for Topic_Itself and NaF.
struct TopicKnowledge {
  int topic_id = -1;
  std::vector<Fact> facts;
  Tensor2 memory;  // (2 * store.dim) x facts.size()
  Vec context;     // mean of the non-NaF memory columns
  int naf_index() const { return static_cast<int>(facts.size()) - 1; }
  int fact_count() const { return static_cast<int>(facts.size()); }
  // Index of the fact with this fact_id; -1 if absent.
  int index_of(int fact_id) const;
};

// Sorts facts into canonical order. Throws BuildError unless the list has
// exactly one Topic_Itself and exactly one NaF.
std::vector<Fact> canonicalize_facts(std::vector<Fact> facts);
bool facts_are_canonical(const std::vector<Fact>& facts);

// Assembles the fact memory for one topic. `facts` must already be in
// canonical order. naf / topic_itself are the shared model vectors; pass
// nullptr for zeros. Throws BuildError on a missing embedding id, naming the
// entity or relation.
TopicKnowledge build_knowledge_memory(int topic_id, const std::vector<Fact>& facts,
                                      const EmbeddingStore& store,
                                      const Vec* naf_embedding = nullptr,
                                      const Vec* topic_itself_embedding = nullptr);

// Mean of the non-NaF memory columns (recomputed from `memory`).
Vec topic_context_embedding(const TopicKnowledge& topic);

// Copy of `topic` with facts[fact_index] pointing at a different object:
// new entity id, new knowledge words, memory column and context rebuilt.
// Model parameters are untouched by construction. Specials cannot be edited.
TopicKnowledge with_edited_object(const TopicKnowledge& topic, int fact_index, int new_object,
                                  std::vector<std::string> new_object_words,
                                  const EmbeddingStore& store);

}  // namespace nklm
