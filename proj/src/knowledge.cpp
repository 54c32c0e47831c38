#include "nklm/knowledge.hpp"

#include <algorithm>

#include "nklm/errors.hpp"

namespace nklm {

Fact make_fact(int fact_id, int subject, int relation, int object,
               std::vector<std::string> knowledge_words, bool is_naf, bool is_topic_itself,
               bool is_anchor) {
  if (is_naf && (is_topic_itself || is_anchor))
    throw DomainError("make_fact: NaF cannot carry another special flag");
  if (is_naf && !knowledge_words.empty())
    throw DomainError("make_fact: NaF has no knowledge words");
  if (!is_naf && knowledge_words.empty())
    throw DomainError("make_fact: fact " + std::to_string(fact_id) + " has no knowledge words");
  for (const auto& w : knowledge_words)
    if (w.empty()) throw DomainError("make_fact: empty knowledge word");
  Fact f;
  f.fact_id = fact_id;
  f.subject = subject;
  f.relation = relation;
  f.object = object;
  f.knowledge_words = std::move(knowledge_words);
  f.is_naf = is_naf;
  f.is_topic_itself = is_topic_itself;
  f.is_anchor = is_anchor;
  return f;
}

const std::vector<std::string>& knowledge_words_of(const Fact& f) { return f.knowledge_words; }

Vec EmbeddingStore::entity_vec(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= entity_count()) {
    std::string name = (id >= 0 && static_cast<std::size_t>(id) < entity_names.size())
                           ? " (" + entity_names[id] + ")"
                           : "";
    throw BuildError("no embedding for entity " + std::to_string(id) + name);
  }
  return entities.col(id);
}

Vec EmbeddingStore::relation_vec(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= relation_count()) {
    std::string name = (id >= 0 && static_cast<std::size_t>(id) < relation_names.size())
                           ? " (" + relation_names[id] + ")"
                           : "";
    throw BuildError("no embedding for relation " + std::to_string(id) + name);
  }
  return relations.col(id);
}

int TopicKnowledge::index_of(int fact_id) const {
  for (std::size_t i = 0; i < facts.size(); ++i)
    if (facts[i].fact_id == fact_id) return static_cast<int>(i);
  return -1;
}

namespace {

int fact_rank(const Fact& f) {
  if (f.is_topic_itself) return 0;
  if (f.is_naf) return 3;
  return f.is_anchor ? 2 : 1;
}

}  // namespace

std::vector<Fact> canonicalize_facts(std::vector<Fact> facts) {
  std::size_t naf = 0, ti = 0;
  for (const Fact& f : facts) {
    naf += f.is_naf;
    ti += f.is_topic_itself;
  }
  if (naf != 1) throw BuildError("canonicalize_facts: expected exactly one NaF, got " +
                                 std::to_string(naf));
  if (ti != 1) throw BuildError("canonicalize_facts: expected exactly one Topic_Itself, got " +
                                std::to_string(ti));
  std::stable_sort(facts.begin(), facts.end(), [](const Fact& a, const Fact& b) {
    const int ra = fact_rank(a), rb = fact_rank(b);
    if (ra != rb) return ra < rb;
    return a.fact_id < b.fact_id;
  });
  return facts;
}

bool facts_are_canonical(const std::vector<Fact>& facts) {
  if (facts.size() < 2 || !facts.front().is_topic_itself || !facts.back().is_naf) return false;
  for (std::size_t i = 0; i + 1 < facts.size(); ++i) {
    const int ra = fact_rank(facts[i]), rb = fact_rank(facts[i + 1]);
    if (ra > rb) return false;
    if (ra == rb && facts[i].fact_id >= facts[i + 1].fact_id) return false;
  }
  std::size_t naf = 0, ti = 0;
  for (const Fact& f : facts) {
    naf += f.is_naf;
    ti += f.is_topic_itself;
  }
  return naf == 1 && ti == 1;
}

TopicKnowledge build_knowledge_memory(int topic_id, const std::vector<Fact>& facts,
                                      const EmbeddingStore& store, const Vec* naf_embedding,
                                      const Vec* topic_itself_embedding) {
  if (store.dim == 0) throw BuildError("build_knowledge_memory: empty embedding store");
  if (!facts_are_canonical(facts))
    throw BuildError("build_knowledge_memory: facts not in canonical order (topic " +
                     std::to_string(topic_id) + ")");
  const std::size_t d_a = 2 * store.dim;
  if (naf_embedding && naf_embedding->size() != d_a)
    throw BuildError("build_knowledge_memory: NaF vector has wrong width");
  if (topic_itself_embedding && topic_itself_embedding->size() != d_a)
    throw BuildError("build_knowledge_memory: Topic_Itself vector has wrong width");

  TopicKnowledge topic;
  topic.topic_id = topic_id;
  topic.facts = facts;
  topic.memory = Tensor2(d_a, facts.size());
  for (std::size_t j = 0; j < facts.size(); ++j) {
    const Fact& f = facts[j];
    if (f.is_naf) {
      if (naf_embedding) topic.memory.set_col(j, *naf_embedding);
    } else if (f.is_topic_itself) {
      if (topic_itself_embedding) topic.memory.set_col(j, *topic_itself_embedding);
    } else {
      topic.memory.set_col(j, concat(store.relation_vec(f.relation), store.entity_vec(f.object)));
    }
  }
  topic.context = topic_context_embedding(topic);
  return topic;
}

Vec topic_context_embedding(const TopicKnowledge& topic) {
  const std::size_t n = topic.facts.size();
  if (n < 2) throw BuildError("topic_context_embedding: no non-NaF facts");
  Vec mean(topic.memory.rows(), 0.0);
  for (std::size_t j = 0; j + 1 < n; ++j)  // all but the trailing NaF
    axpy(1.0, topic.memory.col(j), mean);
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (double& v : mean) v *= inv;
  return mean;
}

TopicKnowledge with_edited_object(const TopicKnowledge& topic, int fact_index, int new_object,
                                  std::vector<std::string> new_object_words,
                                  const EmbeddingStore& store) {
  if (fact_index < 0 || fact_index >= topic.fact_count())
    throw DomainError("with_edited_object: fact index out of range");
  const Fact& old = topic.facts[fact_index];
  if (old.is_naf || old.is_topic_itself)
    throw DomainError("with_edited_object: special facts cannot be edited");
  if (new_object_words.empty()) throw DomainError("with_edited_object: empty object words");

  TopicKnowledge edited = topic;
  Fact& f = edited.facts[fact_index];
  f.object = new_object;
  f.knowledge_words = std::move(new_object_words);
  edited.memory.set_col(fact_index,
                        concat(store.relation_vec(f.relation), store.entity_vec(f.object)));
  edited.context = topic_context_embedding(edited);
  return edited;
}

}  // namespace nklm
