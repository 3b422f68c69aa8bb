#pragma once

#include "descente/hofib.hpp"

namespace descente {

struct NotAPrestack : Error {
  explicit NotAPrestack(const std::string& what) : Error(what) {}
};

// The factorization  f = Q(f) ∘ eta_f  through the path-object prestack whose
// fiber at U holds pairs (covering sieve S, descent datum in Desc(f, S)) and
// whose arrows are intersection-restricted maps of descent data.
struct PathFactorization {
  PstackPtr path;  // P(f)
  PseudoNat q;     // P(f) -> B, projection onto the base
  PseudoNat eta;   // A -> P(f), maximal-sieve comparison data
};

PathFactorization path_object_prestack(const PseudoNat& f,
                                       uint64_t bound = default_bound());

struct FactorReport {
  bool strict_triangle = false;   // Q(f)∘eta_f = f on the nose
  bool eta_lwe = false;
  bool q_local_fibration = false;
  std::string witness;
  bool ok() const { return strict_triangle && eta_lwe && q_local_fibration; }
};
FactorReport verify_factorization(const PseudoNat& f,
                                  const PathFactorization& pf,
                                  uint64_t bound = default_bound());

struct Stackification {
  PstackPtr stack;
  PseudoNat unit;  // A -> stack, a local weak equivalence
};
// The associated stack, realized as the path object of A -> 1.
Stackification stackify(const PstackPtr& a, uint64_t bound = default_bound());

struct Isocomma {
  PstackPtr obj;      // (f, g)
  PseudoNat proj_a;   // -> source of f
  PseudoNat proj_c;   // -> source of g
  Modification chi;   // f∘proj_a => g∘proj_c, projects (a,c,ξ) to ξ
};
Isocomma isocomma(const PseudoNat& f, const PseudoNat& g);

// Canonical map z : Z -> (f,g) with proj_a∘z = za, proj_c∘z = zc and
// chi∘z = chi_prime exactly.
PseudoNat isocomma_mediator(const Isocomma& ic, const PseudoNat& za,
                            const PseudoNat& zc, const Modification& chi_prime);

struct IsocommaFactorization {
  Isocomma comma;  // (f, 1_B)
  PseudoNat i;     // A -> (f, 1_B), a ↦ (a, f(a), 1)
  PseudoNat p;     // (f, 1_B) -> B
};
IsocommaFactorization factor_through_isocomma(const PseudoNat& f);

struct PathObject {
  PstackPtr path;  // A^I
  PseudoNat d0, d1;
  PseudoNat eta;   // A -> A^I with d_i∘eta = 1_A
};
PathObject path_object(const PstackPtr& a, uint64_t bound = default_bound());

}  // namespace descente
