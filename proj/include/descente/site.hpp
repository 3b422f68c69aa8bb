#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "descente/fincat.hpp"

namespace descente {

struct ApexMismatch : Error {
  explicit ApexMismatch(const std::string& what) : Error(what) {}
};
struct InvalidBasis : Error {
  explicit InvalidBasis(const std::string& what) : Error(what) {}
};
struct NoMediator : Error {
  explicit NoMediator(const std::string& what) : Error(what) {}
};
struct NonUniqueMediator : Error {
  explicit NonUniqueMediator(const std::string& what) : Error(what) {}
};

// Set of arrows with a common codomain, closed under precomposition.
struct Sieve {
  ObjId apex = kNone;
  std::vector<MorId> arrows;  // sorted, unique

  bool contains(MorId m) const;
  bool operator==(const Sieve& other) const = default;
  bool operator<(const Sieve& other) const;
  bool subset_of(const Sieve& other) const;
};

// Raw basis data: a finite list of arrows into a common apex.
struct CoverFamily {
  ObjId apex = kNone;
  std::vector<MorId> members;  // sorted; may be empty

  bool operator==(const CoverFamily& other) const = default;
  bool operator<(const CoverFamily& other) const;
};

struct Pullback {
  ObjId apex = kNone;
  MorId p1 = kNone;  // apex -> dom(f) for the cospan (f, g)
  MorId p2 = kNone;  // apex -> dom(g)
  bool operator==(const Pullback& other) const = default;
};

// Chosen pullback per cospan; cospans are ordered pairs of arrows with equal
// codomain, so (f, g) and (g, f) carry independent (possibly equal) choices.
struct PullbackTable {
  std::map<std::pair<MorId, MorId>, Pullback> table;

  const Pullback& at(MorId f, MorId g) const;
  bool has(MorId f, MorId g) const;
};

struct Topology {
  // covers[u] = covering sieves on object u, sorted.
  std::vector<std::vector<Sieve>> covers;

  bool is_covering(const Sieve& s) const;
  const std::vector<Sieve>& on(ObjId u) const { return covers[u]; }
};

using Basis = std::vector<std::vector<CoverFamily>>;  // per object, sorted

struct Site {
  CatPtr cat;
  ObjId terminal = kNone;
  PullbackTable pullbacks;
  Topology topology;
  std::optional<Basis> basis;

  const FinCategory& c() const { return *cat; }
  Sieve maximal_sieve(ObjId u) const;
  // Covering sieves used for descent-style quantification: the sieves
  // generated by the basis families when a basis is present, otherwise all
  // covering sieves of the topology.
  std::vector<Sieve> covering_sieves(ObjId u) const;
  std::vector<CoverFamily> basis_families(ObjId u) const;
};

using SitePtr = std::shared_ptr<const Site>;

// Smallest sieve containing the family (precomposition closure).
Sieve generate_sieve(const Site& s, const CoverFamily& fam);
Sieve generate_sieve(const FinCategory& c, ObjId apex,
                     const std::vector<MorId>& arrows);

// g^*(sv) = { f | g∘f ∈ sv } on dom(g).
Sieve pullback_sieve(const Site& s, MorId g, const Sieve& sv);

Sieve sieve_intersection(const Sieve& a, const Sieve& b);

// All sieves on u, in canonical order.
std::vector<Sieve> all_sieves(const FinCategory& c, ObjId u);

// Terminal object, pullback-table totality and universal property,
// topology axioms 1-3, and basis/topology agreement when a basis is present.
ValidationReport validate_site(const Site& s);
ValidationReport validate_topology(const Site& s);

ValidationReport validate_basis(const FinCategory& c,
                                const PullbackTable& pullbacks,
                                const Basis& basis);

// S covering iff some basis family is contained in S.  Throws InvalidBasis
// when the basis axioms fail.
Topology generate_topology(const FinCategory& c, const PullbackTable& pullbacks,
                           const Basis& basis);

// Unique arrow into the chosen apex commuting with the projections.
MorId mediator(const Site& s, MorId f, MorId g, MorId q1, MorId q2);

std::string sieve_to_string(const FinCategory& c, const Sieve& s);
std::string family_to_string(const FinCategory& c, const CoverFamily& f);

}  // namespace descente
