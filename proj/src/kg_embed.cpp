#include "nklm/kg_embed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <tuple>

#include "nklm/errors.hpp"
#include "nklm/rng.hpp"

namespace nklm {

namespace {

std::vector<std::string> default_names(char prefix, int n) {
  std::vector<std::string> v(n);
  for (int i = 0; i < n; ++i) v[i] = prefix + std::to_string(i);
  return v;
}

void check_names(const std::vector<std::string>& names, int count, const char* what) {
  if (!names.empty() && names.size() != static_cast<std::size_t>(count))
    throw DomainError(std::string("triple set: ") + what + " name list has wrong length");
  for (const auto& n : names)
    if (n.find('\t') != std::string::npos || n.find('\n') != std::string::npos)
      throw DomainError(std::string("triple set: ") + what + " name contains tab/newline");
}

// d(s + r, o) with squared L2
double dissim(const Tensor2& ent, const Tensor2& rel, int s, int r, int o) {
  double d = 0.0;
  for (std::size_t k = 0; k < ent.rows(); ++k) {
    const double v = ent.at(k, s) + rel.at(k, r) - ent.at(k, o);
    d += v * v;
  }
  return d;
}

}  // namespace

void validate_triples(const TripleSet& ts) {
  if (ts.entity_count <= 0 || ts.relation_count <= 0)
    throw DomainError("triple set: entity and relation counts must be positive");
  check_names(ts.entity_names, ts.entity_count, "entity");
  check_names(ts.relation_names, ts.relation_count, "relation");
  std::set<std::tuple<int, int, int>> seen;
  for (const Triple& t : ts.triples) {
    if (t.subject < 0 || t.subject >= ts.entity_count || t.object < 0 ||
        t.object >= ts.entity_count)
      throw DomainError("triple set: entity id out of range in (" + std::to_string(t.subject) +
                        "," + std::to_string(t.relation) + "," + std::to_string(t.object) + ")");
    if (t.relation < 0 || t.relation >= ts.relation_count)
      throw DomainError("triple set: relation id out of range in (" + std::to_string(t.subject) +
                        "," + std::to_string(t.relation) + "," + std::to_string(t.object) + ")");
    if (!seen.insert({t.subject, t.relation, t.object}).second)
      throw DomainError("triple set: duplicate triple (" + std::to_string(t.subject) + "," +
                        std::to_string(t.relation) + "," + std::to_string(t.object) + ")");
  }
}

EmbeddingStore random_embeddings(int entity_count, int relation_count, int dim,
                                 std::uint64_t seed, std::vector<std::string> entity_names,
                                 std::vector<std::string> relation_names) {
  if (entity_count <= 0 || relation_count <= 0 || dim <= 0)
    throw DomainError("random_embeddings: counts and dim must be positive");
  Rng rng(seed);
  const double b = 0.5 / dim;
  EmbeddingStore s;
  s.dim = dim;
  s.entities = Tensor2::uniform(dim, entity_count, -b, b, rng);
  s.relations = Tensor2::uniform(dim, relation_count, -b, b, rng);
  s.entity_names = entity_names.empty() ? default_names('e', entity_count) : std::move(entity_names);
  s.relation_names =
      relation_names.empty() ? default_names('r', relation_count) : std::move(relation_names);
  s.provenance = EmbeddingStore::Provenance::random;
  check_names(s.entity_names, entity_count, "entity");
  check_names(s.relation_names, relation_count, "relation");
  return s;
}

EmbeddingStore train_translation_embeddings(const TripleSet& ts, int dim, int epochs,
                                            double margin, double lr, std::uint64_t seed) {
  validate_triples(ts);
  if (dim <= 0) throw DomainError("train_translation_embeddings: dim must be positive");
  if (epochs < 0) throw DomainError("train_translation_embeddings: negative epochs");
  if (!(margin > 0.0) || !(lr > 0.0))
    throw DomainError("train_translation_embeddings: margin and lr must be positive");

  Rng rng(seed);
  const double b = 6.0 / std::sqrt(static_cast<double>(dim));
  EmbeddingStore s;
  s.dim = dim;
  s.entities = Tensor2::uniform(dim, ts.entity_count, -b, b, rng);
  s.relations = Tensor2::uniform(dim, ts.relation_count, -b, b, rng);
  s.entity_names =
      ts.entity_names.empty() ? default_names('e', ts.entity_count) : ts.entity_names;
  s.relation_names =
      ts.relation_names.empty() ? default_names('r', ts.relation_count) : ts.relation_names;
  s.provenance = EmbeddingStore::Provenance::trained;

  Tensor2& E = s.entities;
  Tensor2& R = s.relations;
  const int ne = ts.entity_count;
  Vec col(dim);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (int e = 0; e < ne; ++e) {
      col = E.col(e);
      l2_normalize(col);
      E.set_col(e, col);
    }
    for (const Triple& t : ts.triples) {
      // corrupt head or tail with a fresh entity
      const bool corrupt_head = rng.bernoulli(0.5);
      const int victim = corrupt_head ? t.subject : t.object;
      int alt = static_cast<int>(rng.below(ne - 1));
      if (alt >= victim) ++alt;
      const int cs = corrupt_head ? alt : t.subject;
      const int co = corrupt_head ? t.object : alt;

      const double pos = dissim(E, R, t.subject, t.relation, t.object);
      const double neg = dissim(E, R, cs, t.relation, co);
      if (margin + pos - neg <= 0.0) continue;

      for (int k = 0; k < dim; ++k) {
        const double gp = 2.0 * (E.at(k, t.subject) + R.at(k, t.relation) - E.at(k, t.object));
        const double gn = 2.0 * (E.at(k, cs) + R.at(k, t.relation) - E.at(k, co));
        E.at(k, t.subject) -= lr * gp;
        E.at(k, t.object) += lr * gp;
        E.at(k, cs) += lr * gn;
        E.at(k, co) -= lr * gn;
        R.at(k, t.relation) -= lr * (gp - gn);
      }
    }
  }
  if (!E.all_finite() || !R.all_finite())
    throw TrainError("train_translation_embeddings: embeddings diverged");
  return s;
}

double ranking_loss(const EmbeddingStore& store, const TripleSet& ts, double margin) {
  validate_triples(ts);
  if (ts.triples.empty()) return 0.0;
  double total = 0.0;
  std::size_t terms = 0;
  for (const Triple& t : ts.triples) {
    const double pos = dissim(store.entities, store.relations, t.subject, t.relation, t.object);
    for (int e = 0; e < ts.entity_count; ++e) {
      if (e == t.object) continue;
      const double neg = dissim(store.entities, store.relations, t.subject, t.relation, e);
      total += std::max(0.0, margin + pos - neg);
      ++terms;
    }
  }
  return terms ? total / static_cast<double>(terms) : 0.0;
}

double mean_tail_rank(const EmbeddingStore& store, const TripleSet& ts) {
  validate_triples(ts);
  if (ts.triples.empty()) throw DomainError("mean_tail_rank: empty triple set");
  double sum = 0.0;
  for (const Triple& t : ts.triples) {
    const double d_true =
        dissim(store.entities, store.relations, t.subject, t.relation, t.object);
    int better = 0;
    for (int e = 0; e < ts.entity_count; ++e) {
      if (e == t.object) continue;
      if (dissim(store.entities, store.relations, t.subject, t.relation, e) < d_true) ++better;
    }
    sum += 1.0 + better;
  }
  return sum / static_cast<double>(ts.triples.size());
}

double hits_at_1(const EmbeddingStore& store, const TripleSet& ts) {
  validate_triples(ts);
  if (ts.triples.empty()) throw DomainError("hits_at_1: empty triple set");
  int hits = 0;
  for (const Triple& t : ts.triples) {
    const double d_true =
        dissim(store.entities, store.relations, t.subject, t.relation, t.object);
    bool best = true;
    for (int e = 0; e < ts.entity_count && best; ++e) {
      if (e == t.object) continue;
      if (dissim(store.entities, store.relations, t.subject, t.relation, e) < d_true)
        best = false;
    }
    hits += best;
  }
  return static_cast<double>(hits) / static_cast<double>(ts.triples.size());
}

// --- file I/O ---

namespace {

void write_vector_row(std::FILE* f, char kind, int id, const std::string& name,
                      const Tensor2& m) {
  std::fprintf(f, "%c\t%d\t%s\t", kind, id, name.c_str());
  for (std::size_t k = 0; k < m.rows(); ++k)
    std::fprintf(f, k ? " %.17g" : "%.17g", m.at(k, id));
  std::fputc('\n', f);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t tab = line.find('\t', pos);
    if (tab == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
}

}  // namespace

void write_embeddings(const EmbeddingStore& store, const std::string& path) {
  check_names(store.entity_names, static_cast<int>(store.entity_count()), "entity");
  check_names(store.relation_names, static_cast<int>(store.relation_count()), "relation");
  std::unique_ptr<std::FILE, decltype(&std::fclose)> f(std::fopen(path.c_str(), "wb"),
                                                       &std::fclose);
  if (!f) throw IoError("write_embeddings: cannot open " + path);
  std::fprintf(f.get(), "# dim=%zu provenance=%s\n", store.dim,
               store.provenance == EmbeddingStore::Provenance::trained ? "trained" : "random");
  for (std::size_t e = 0; e < store.entity_count(); ++e)
    write_vector_row(f.get(), 'E', static_cast<int>(e),
                     e < store.entity_names.size() ? store.entity_names[e] : "e" + std::to_string(e),
                     store.entities);
  for (std::size_t r = 0; r < store.relation_count(); ++r)
    write_vector_row(f.get(), 'R', static_cast<int>(r),
                     r < store.relation_names.size() ? store.relation_names[r]
                                                     : "r" + std::to_string(r),
                     store.relations);
}

EmbeddingStore read_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_embeddings: cannot open " + path);

  struct Row {
    int id;
    std::string name;
    Vec values;
  };
  std::vector<Row> ents, rels;
  std::string provenance = "trained";
  std::string line;
  std::size_t lineno = 0;
  std::size_t dim = 0;

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("provenance=random") != std::string::npos) provenance = "random";
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() != 4 || (fields[0] != "E" && fields[0] != "R"))
      throw ParseError("read_embeddings: " + path + ":" + std::to_string(lineno) +
                       ": expected 'E|R<tab>id<tab>name<tab>values'");
    Row row;
    try {
      row.id = std::stoi(fields[1]);
    } catch (const std::exception&) {
      throw ParseError("read_embeddings: " + path + ":" + std::to_string(lineno) + ": bad id '" +
                       fields[1] + "'");
    }
    row.name = fields[2];
    std::istringstream vs(fields[3]);
    double v;
    while (vs >> v) row.values.push_back(v);
    if (!vs.eof())
      throw ParseError("read_embeddings: " + path + ":" + std::to_string(lineno) +
                       ": bad float in values");
    if (row.values.empty())
      throw ParseError("read_embeddings: " + path + ":" + std::to_string(lineno) +
                       ": empty vector");
    if (dim == 0) dim = row.values.size();
    if (row.values.size() != dim)
      throw ParseError("read_embeddings: " + path + ":" + std::to_string(lineno) +
                       ": inconsistent dim (" + std::to_string(row.values.size()) + " vs " +
                       std::to_string(dim) + ")");
    (fields[0] == "E" ? ents : rels).push_back(std::move(row));
  }
  if (ents.empty() || rels.empty())
    throw ParseError("read_embeddings: " + path + ": need at least one E and one R row");

  auto build = [&](std::vector<Row>& rows, Tensor2& m, std::vector<std::string>& names,
                   const char* what) {
    names.assign(rows.size(), "");
    m = Tensor2(dim, rows.size());
    std::vector<bool> seen(rows.size(), false);
    for (Row& r : rows) {
      if (r.id < 0 || static_cast<std::size_t>(r.id) >= rows.size() || seen[r.id])
        throw ParseError("read_embeddings: " + path + ": " + what + " ids must be 0..n-1, got " +
                         std::to_string(r.id));
      seen[r.id] = true;
      names[r.id] = std::move(r.name);
      for (std::size_t k = 0; k < dim; ++k) m.at(k, r.id) = r.values[k];
    }
  };
  EmbeddingStore s;
  s.dim = dim;
  build(ents, s.entities, s.entity_names, "entity");
  build(rels, s.relations, s.relation_names, "relation");
  s.provenance = provenance == "random" ? EmbeddingStore::Provenance::random
                                        : EmbeddingStore::Provenance::trained;
  return s;
}

void write_triples(const TripleSet& ts, const std::string& path) {
  validate_triples(ts);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_triples: cannot open " + path);
  const auto ename = ts.entity_names.empty() ? default_names('e', ts.entity_count) : ts.entity_names;
  const auto rname =
      ts.relation_names.empty() ? default_names('r', ts.relation_count) : ts.relation_names;
  for (int e = 0; e < ts.entity_count; ++e) out << "E\t" << e << '\t' << ename[e] << '\n';
  for (int r = 0; r < ts.relation_count; ++r) out << "R\t" << r << '\t' << rname[r] << '\n';
  for (const Triple& t : ts.triples)
    out << "T\t" << t.subject << '\t' << t.relation << '\t' << t.object << '\n';
}

TripleSet read_triples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_triples: cannot open " + path);
  TripleSet ts;
  std::string line;
  std::size_t lineno = 0;
  auto bad = [&](const std::string& why) {
    return ParseError("read_triples: " + path + ":" + std::to_string(lineno) + ": " + why);
  };
  auto to_int = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw bad("bad integer '" + s + "'");
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_tabs(line);
    if (fields[0] == "E" || fields[0] == "R") {
      if (fields.size() != 3) throw bad("expected 'E|R<tab>id<tab>name'");
      auto& names = fields[0] == "E" ? ts.entity_names : ts.relation_names;
      const int id = to_int(fields[1]);
      if (id != static_cast<int>(names.size()))
        throw bad("ids must be declared in order 0..n-1, got " + fields[1]);
      names.push_back(fields[2]);
    } else if (fields[0] == "T") {
      if (fields.size() != 4) throw bad("expected 'T<tab>s<tab>r<tab>o'");
      ts.triples.push_back({to_int(fields[1]), to_int(fields[2]), to_int(fields[3])});
    } else {
      throw bad("unknown record kind '" + fields[0] + "'");
    }
  }
  ts.entity_count = static_cast<int>(ts.entity_names.size());
  ts.relation_count = static_cast<int>(ts.relation_names.size());
  try {
    validate_triples(ts);
  } catch (const DomainError& e) {
    throw ParseError("read_triples: " + path + ": " + e.what());
  }
  return ts;
}

}  // namespace nklm
