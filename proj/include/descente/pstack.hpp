#pragma once

#include <map>
#include <string>
#include <vector>

#include "descente/pstack_fwd.hpp"
#include "descente/site.hpp"

namespace descente {

struct NotPointwiseEquivalence : Error {
  explicit NotPointwiseEquivalence(const std::string& what) : Error(what) {}
};

// Contravariant pseudofunctor from the site into finite categories.
// Orientation conventions (fixed once, everything else derived by inversion):
//   upsilon[U] has components  F(1_U)(x) -> x            in F(U)
//   phi[{f,g}] has components  F(f∘g)(x) -> F(g)(F(f)(x)) in F(W)
// for site arrows f : V -> U and g : W -> V and x an object of F(U).
struct Pseudofunctor {
  SitePtr site;
  std::string tag;  // short name used in canonical encodings
  std::vector<CatPtr> fiber;          // per site object
  std::vector<Functor> restriction;   // per site arrow f: V->U, F(U) -> F(V)
  std::vector<std::vector<MorId>> upsilon;
  std::map<std::pair<MorId, MorId>, std::vector<MorId>> phi;

  const FinCategory& fib(ObjId u) const { return *fiber[u]; }
  const Functor& res(MorId f) const { return restriction[f]; }
  ObjId rob(MorId f, ObjId x) const { return restriction[f].obj_map[x]; }
  MorId rmor(MorId f, MorId m) const { return restriction[f].mor_map[m]; }
  MorId ups(ObjId u, ObjId x) const { return upsilon[u][x]; }
  MorId phi_at(MorId f, MorId g, ObjId x) const;

  // x restricted along a path (f1, f2, ...) with f1: V1->U, f2: V2->V1, ...
  ObjId rob_path(const std::vector<MorId>& path, ObjId x) const;
};

ValidationReport validate_pseudofunctor(const Pseudofunctor& F);

class PseudofunctorBuilder {
 public:
  PseudofunctorBuilder(SitePtr site, std::string tag);
  PseudofunctorBuilder& fiber(ObjId u, CatPtr cat);
  PseudofunctorBuilder& restriction(MorId f, Functor fun);
  // Identity coherence cells; valid only when the restriction tables are
  // strictly functorial, which build() checks.
  PseudofunctorBuilder& strict_coherence();
  PseudofunctorBuilder& upsilon_component(ObjId u, std::vector<MorId> comps);
  PseudofunctorBuilder& phi_component(MorId f, MorId g,
                                      std::vector<MorId> comps);
  PstackPtr build();

 private:
  std::shared_ptr<Pseudofunctor> p_;
  bool strict_requested_ = false;
};

// Canonical iso between the two restrictions of x along equal-composite
// paths, built from the coherence cells:  x·pathA -> x·pathB  where both
// paths start at F(u).  The empty path denotes "no restriction" and is only
// valid when the other path composes to 1_u.
MorId restriction_comparison(const Pseudofunctor& F, ObjId u, ObjId x,
                             const std::vector<MorId>& path_a,
                             const std::vector<MorId>& path_b);

// x|_alpha|_alphabeta -> x|_beta|_alphabeta over the chosen pullback of
// (f_alpha, f_beta); both arrows must share a codomain containing x's stage.
MorId sigma(const Pseudofunctor& F, ObjId u, ObjId x, MorId f_alpha,
            MorId f_beta);

// Morphism of pseudofunctors.  coherence[f][e] : p_V(e·f) -> p_U(e)·f.
struct PseudoNat {
  PstackPtr source, target;
  std::vector<Functor> component;
  std::vector<std::vector<MorId>> coherence;

  ObjId app(ObjId u, ObjId x) const { return component[u].obj_map[x]; }
  MorId app_mor(ObjId u, MorId m) const { return component[u].mor_map[m]; }
  MorId coh(MorId f, ObjId e) const { return coherence[f][e]; }
};

ValidationReport validate_pseudonat(const PseudoNat& p);

PseudoNat identity_pseudonat(const PstackPtr& a);
PseudoNat compose_pseudonat(const PseudoNat& q, const PseudoNat& p);
bool pseudonat_equal(const PseudoNat& a, const PseudoNat& b);

// 2-cell between parallel pseudonatural transformations.
struct Modification {
  PseudoNat source, target;
  std::vector<std::vector<MorId>> component;  // [U][x in source fiber]

  MorId at(ObjId u, ObjId x) const { return component[u][x]; }
};

ValidationReport validate_modification(const Modification& m);
bool modification_is_iso(const Modification& m);
Modification identity_modification(const PseudoNat& p);
Modification mod_inverse(const Modification& m);
Modification mod_vcompose(const Modification& b, const Modification& a);
// Whiskering with maps: (q * m) : q∘m.source => q∘m.target and
// (m * r) : m.source∘r => m.target∘r.
Modification mod_whisker_left(const PseudoNat& q, const Modification& m);
Modification mod_whisker_right(const Modification& m, const PseudoNat& r);

// Stock constructions.
PstackPtr terminal_prestack(const SitePtr& s);
PseudoNat to_terminal(const PstackPtr& a);
PstackPtr representable(const SitePtr& s, ObjId u);

struct SieveSubfunctor {
  PstackPtr subfunctor;
  PseudoNat inclusion;  // into representable(apex)
  PstackPtr ambient;    // the representable
};
SieveSubfunctor sieve_subfunctor(const SitePtr& s, const Sieve& sv);

struct Product {
  PstackPtr prod;
  PseudoNat proj1, proj2;
};
Product product(const PstackPtr& a, const PstackPtr& b);
PseudoNat diagonal(const PstackPtr& a, const Product& axa);

struct Cotensor {
  PstackPtr path;        // fiberwise arrow category
  PseudoNat boundary;    // <d0, d1> into a×a
  Product square;        // the product a×a used by the boundary
};
Cotensor cotensor_two(const PstackPtr& a);

// The pseudonatural transformation yU -> B picking b ∈ B(U); components are
// b's restrictions, coherence cells the composition coherences of B.
PseudoNat representing_pseudonat(const PstackPtr& b, ObjId u, ObjId obj);

// Hom-presheaf gluing: the unique m : a -> b in F(U) with m·f = family(f)
// for every f in the sieve.  Requires F separated over the sieve; returns
// kNone when no amalgamation exists, throws on non-uniqueness.
MorId glue_hom_family(const Pseudofunctor& F, ObjId u, ObjId a, ObjId b,
                      const Sieve& sv,
                      const std::function<MorId(MorId)>& family);

struct PrestackReport {
  bool ok = true;
  std::string witness;
};
// Sheaf condition for every hom-presheaf F(a,b), tested over the basis
// families of every slice stage.
PrestackReport is_prestack(const Pseudofunctor& F);

struct HomCategory {
  CatPtr cat;  // objects/morphisms in enumeration order, canonical names
  std::vector<PseudoNat> objects;
  std::vector<Modification> morphisms;
};
HomCategory hom_category(const PstackPtr& a, const PstackPtr& b,
                         uint64_t bound);

// All modifications p => q (optionally only the invertible ones), in
// deterministic order.
std::vector<Modification> all_modifications(const PseudoNat& p,
                                            const PseudoNat& q,
                                            uint64_t bound,
                                            bool isos_only = false);

struct PseudoInverse {
  PseudoNat inverse;
  Modification unit;    // 1_source => inverse ∘ xi
  Modification counit;  // xi ∘ inverse => 1_target
};
// Adjoint pseudoinverse of a pointwise equivalence.
PseudoInverse pointwise_pseudoinverse(const PseudoNat& xi);

}  // namespace descente
