#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nklm/knowledge.hpp"

namespace nklm {

struct Triple {
  int subject = -1;
  int relation = -1;
  int object = -1;
  bool operator==(const Triple&) const = default;
};

struct TripleSet {
  std::vector<Triple> triples;
  int entity_count = 0;
  int relation_count = 0;
  std::vector<std::string> entity_names;    // parallel to entity ids; may be empty
  std::vector<std::string> relation_names;  // parallel to relation ids; may be empty
};

// Ids in range, names consistent, no duplicate triples. Throws DomainError.
void validate_triples(const TripleSet& ts);

// Uniform vectors in [-0.5/dim, 0.5/dim]; the control condition for the
// translation-trained embeddings. Deterministic per seed.
EmbeddingStore random_embeddings(int entity_count, int relation_count, int dim,
                                 std::uint64_t seed,
                                 std::vector<std::string> entity_names = {},
                                 std::vector<std::string> relation_names = {});

// Margin-ranking embedding training over (subject + relation ~ object) with
// squared L2 dissimilarity. One sampled corruption (head or tail) per triple
// per epoch; entity vectors are renormalized to unit L2 at the start of every
// epoch. Deterministic per seed.
EmbeddingStore train_translation_embeddings(const TripleSet& ts, int dim, int epochs,
                                            double margin, double lr, std::uint64_t seed);

// Mean hinge over all triples with full corruption of the object slot;
// deterministic diagnostic of how well the margin is satisfied.
double ranking_loss(const EmbeddingStore& store, const TripleSet& ts, double margin);

// Rank of the true object among all entities by distance from subject +
// relation (1 = best; ties counted optimistically).
double mean_tail_rank(const EmbeddingStore& store, const TripleSet& ts);
double hits_at_1(const EmbeddingStore& store, const TripleSet& ts);

// Text embedding file: one row per vector,
//   E <tab> id <tab> name <tab> v0 v1 ...
// then R rows; 17 significant digits, bit-exact round trip. A leading
// '# key=value ...' comment carries dim and provenance.
void write_embeddings(const EmbeddingStore& store, const std::string& path);
EmbeddingStore read_embeddings(const std::string& path);

// Triples file: 'E <tab> id <tab> name', 'R <tab> id <tab> name',
// 'T <tab> s <tab> r <tab> o' lines.
void write_triples(const TripleSet& ts, const std::string& path);
TripleSet read_triples(const std::string& path);

}  // namespace nklm
