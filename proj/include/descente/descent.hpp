#pragma once

#include "descente/pstack.hpp"

namespace descente {

struct NotLWE : Error {
  explicit NotLWE(const std::string& what) : Error(what) {}
};
struct NotLocalFibration : Error {
  explicit NotLocalFibration(const std::string& what) : Error(what) {}
};
struct NoAmalgamation : Error {
  explicit NoAmalgamation(const std::string& what) : Error(what) {}
};
struct InternalAmalgamationFailure : Error {
  explicit InternalAmalgamationFailure(const std::string& what) : Error(what) {}
};

// Index set for descent data: a basis family (indices are list positions) or
// a sieve (indices are the member arrows in canonical order).
struct Cover {
  ObjId apex = kNone;
  std::vector<MorId> members;

  static Cover from_family(const CoverFamily& f) { return {f.apex, f.members}; }
  static Cover from_sieve(const Sieve& s) { return {s.apex, s.arrows}; }
  size_t size() const { return members.size(); }
  bool operator==(const Cover&) const = default;
};

// A tuple (b, (e_a), (psi_a), (theta_ab)); theta is stored as a flat k*k
// table with theta[a*k+b] : e_b|_ab -> e_a|_ab over the chosen pullback of
// (f_a, f_b), and identity cells on the diagonal.
struct DescentObject {
  ObjId base = kNone;
  std::vector<ObjId> section;
  std::vector<MorId> psi;
  std::vector<MorId> theta;

  bool operator==(const DescentObject&) const = default;
  MorId theta_at(size_t a, size_t b) const { return theta[a * section.size() + b]; }
};

struct DescentMorphism {
  MorId base = kNone;
  std::vector<MorId> section;

  bool operator==(const DescentMorphism&) const = default;
};

struct DescentCategory {
  PseudoNat p;  // E -> B
  Cover cover;
  CatPtr cat;
  Functor projection;  // cat -> B(U), picks out base components
  std::vector<DescentObject> objects;
  std::vector<DescentMorphism> morphisms;

  ObjId find_object(const DescentObject& o) const;          // kNone if absent
  MorId find_morphism(ObjId from_id, ObjId to_id,
                      const DescentMorphism& m) const;      // kNone if absent
};

ValidationReport validate_descent_object(const PseudoNat& p, const Cover& cover,
                                         const DescentObject& obj);
ValidationReport validate_descent_morphism(const PseudoNat& p,
                                           const Cover& cover,
                                           const DescentObject& from,
                                           const DescentObject& to,
                                           const DescentMorphism& m);

DescentCategory build_descent_category(const PseudoNat& p, const Cover& cover,
                                       uint64_t bound = default_bound());

// The comparison functor E(U) -> Desc(p, S).
DescentObject phi_object(const PseudoNat& p, const Cover& cover, ObjId e);
DescentMorphism phi_morphism(const PseudoNat& p, const Cover& cover, MorId m);
Functor phi_functor(const DescentCategory& d);

// Induced functor Desc(i, S) -> Desc(p, S) of a square (h, k, gamma) with
// gamma : p∘h => k∘i invertible.
Functor pushforward_square(const DescentCategory& from,
                           const DescentCategory& to, const PseudoNat& h,
                           const PseudoNat& k, const Modification& gamma);

// Natural isomorphism  Phi_S ∘ h_U ==> (h,k,gamma)_* ∘ Phi_S.
NatTrans gamma_hat(const DescentCategory& from, const DescentCategory& to,
                   const PseudoNat& h, const PseudoNat& k,
                   const Modification& gamma);

// Index-set restriction Desc(p, S) -> Desc(p, R) for R ⊆ S.
Functor restrict_to_subcover(const DescentCategory& from,
                             const DescentCategory& to);

// The pulled-back index set {f | g∘f ∈ S} on dom(g).
Cover pullback_cover(const Site& s, MorId g, const Cover& cover);
// Base change Desc(p, S over U) -> Desc(p, g*(S) over V).
Functor base_change(const DescentCategory& from, MorId g,
                    const DescentCategory& to);

struct Judgment {
  bool ok = true;
  std::string witness;
};

// Effective-descent condition: Phi an equivalence for every object and basis
// family, for the canonical map F -> 1.
Judgment is_stack(const PstackPtr& f, uint64_t bound = default_bound());
// Same condition relative to p; strict mode quantifies over the covering
// sieves instead of the basis families.
Judgment is_local_fibration(const PseudoNat& p,
                            uint64_t bound = default_bound(),
                            bool sieve_mode = false);

struct LweReport {
  bool ok = true;
  bool full = true, faithful = true, locally_ess_surjective = true;
  std::string witness;
};
LweReport is_lwe(const PseudoNat& h, uint64_t bound = default_bound());

struct LweDescent {
  Sieve cover;
  DescentObject obj;  // sections/psi indexed by the sieve arrows, theta lifted
};
// For an lwe i and c in C(U): a sieve cover plus descent data in Desc(i, S)
// projecting onto c, built from chosen local preimages and canonical lifts.
LweDescent descent_from_lwe(const PseudoNat& i, ObjId u, ObjId c,
                            uint64_t bound = default_bound());

struct Amalgamation {
  ObjId object;           // e in E(U)
  MorId iso;              // iso  Phi(e) -> obj  in the descent category
  ObjId phi_image;        // Phi(e) as an object of the descent category
};
// First (canonical order; exact preimages first) object whose Phi-image is
// isomorphic to obj.
Amalgamation amalgamate(const DescentCategory& d, const DescentObject& obj);

}  // namespace descente
