#pragma once

#include <optional>

#include "descente/descent.hpp"

namespace descente {

// A pseudo-commuting square from f (left) to g (right):
//
//        top
//     A -----> C
//   f |    γ    | g        γ : g∘top => bottom∘f, invertible
//     v         v
//     B -----> D
//       bottom
struct Square {
  PseudoNat left, right, top, bottom;
  Modification gamma;
};

ValidationReport validate_square(const Square& s);

// 2-cell of the arrow 2-category between parallel squares.
struct SquareCell {
  Modification phi0;  // top => top'
  Modification phi1;  // bottom => bottom'
};

// Exchange law  γ'·(g*φ0) = (φ1*f)·γ.
bool check_square_cell(const Square& s, const Square& s_prime,
                       const SquareCell& cell);

Square square_hcompose(const Square& s2, const Square& s1);

struct LiftSolution {
  PseudoNat l;          // B -> C
  Modification lambda;  // top => l∘f
  Modification rho;     // g∘l => bottom
};

// Pasting equality: γ = (ρ*f)·(g*λ), componentwise, plus shape checks.
ValidationReport validate_lift(const Square& s, const LiftSolution& sol);

// Exhaustive search over candidate diagonals and invertible 2-cells; first
// solution in canonical order.
std::optional<LiftSolution> search_lift(const Square& s,
                                        uint64_t bound = default_bound());

// The constructive lift for left ∈ W and right a local fibration, assembled
// from lwe-descent data, pushforward and amalgamation.
LiftSolution construct_lift(const Square& s, uint64_t bound = default_bound());

// Enumerates every square from f to g (bounded) and lifts each.
struct PitchforkReport {
  bool ok = true;
  std::string witness;
  uint64_t squares = 0;
};
PitchforkReport pitchfork(const PseudoNat& f, const PseudoNat& g,
                          uint64_t bound = default_bound());

// W ⋔ A against the canonical corpus of covering-sieve inclusions: for every
// inclusion i : S^ -> yU and h : S^ -> A there must be l : yU -> A with an
// invertible 2-cell h => l∘i.
bool is_fibrant(const PstackPtr& a, uint64_t bound = default_bound());

struct Triangle {
  PseudoNat f;          // A -> C
  PseudoNat g;          // A -> B
  PseudoNat h;          // B -> C
  Modification gamma;   // f => h∘g, invertible
};

struct ThreeForTwoReport {
  bool f_lwe = false, g_lwe = false, h_lwe = false;
  bool two_of_three_holds = true;  // no two sides lwe with the third failing
};
ThreeForTwoReport three_for_two(const Triangle& t,
                                uint64_t bound = default_bound());

// System-of-fibrant-objects axioms over a finite corpus, with the fibrant
// replacement supplied as a callback (identities; 3-for-2 on the given
// triangles; eta components in W; corpus-relative fibrancy of each Q(A)).
struct SfoReport {
  bool ok = true;
  std::vector<std::string> failures;
};
SfoReport validate_sfo(
    const std::function<bool(const PseudoNat&)>& is_weq,
    const std::function<std::pair<PstackPtr, PseudoNat>(const PstackPtr&)>&
        replacement,
    const std::vector<PstackPtr>& corpus, const std::vector<Triangle>& triangles,
    uint64_t bound = default_bound());

struct EquivalenceData {
  PseudoNat inverse;
  Modification unit;    // 1_A => inverse∘f
  Modification counit;  // f∘inverse => 1_B
};
// A local weak equivalence between stacks is an equivalence (two lifts
// against the terminal fibrations).
EquivalenceData lwe_between_fibrants_to_equivalence(
    const PseudoNat& f, uint64_t bound = default_bound());

struct Hocat {
  std::vector<std::string> names;
  std::vector<PstackPtr> objects;                      // the stacks kept
  std::vector<std::pair<std::string, PstackPtr>> replaced;  // non-stacks -> Q
  std::map<std::pair<size_t, size_t>, HomCategory> homs;
};
Hocat homotopy_2category(
    const std::vector<std::pair<std::string, PstackPtr>>& corpus,
    const std::function<std::pair<PstackPtr, PseudoNat>(const PstackPtr&)>&
        replacement,
    uint64_t bound = default_bound());

}  // namespace descente
