#pragma once

#include "descente/pstack_fwd.hpp"
#include "descente/site.hpp"

namespace descente::fixtures {

// Small categories used throughout the tests and the law suites.
CatPtr empty_category();
CatPtr terminal_category();
CatPtr discrete_category(const std::vector<std::string>& objects);
CatPtr walking_arrow();    // x --u--> y
CatPtr walking_iso();      // a <--> b, mutually inverse
CatPtr parallel_pair();    // u, v : a -> b
CatPtr bz2();              // one object, automorphism t with t∘t = 1

// Open-set lattice site over a finite point set.  Opens are bitmasks over
// points; arrows are inclusions; pullback = intersection; terminal = the
// whole space.  With union_basis the basis consists of all families whose
// union is the apex, otherwise of the iso singletons (trivial topology).
SitePtr open_set_site(const std::vector<uint32_t>& opens,
                      const std::vector<std::string>& names, bool union_basis);

SitePtr site_pt();    // opens of the one-point space, union basis
SitePtr site_2();     // opens of the two-point discrete space, union basis
SitePtr site_triv();  // same category as site_2, trivial topology

// Pseudofunctor fixtures over site_2 (see pstack.hpp for the types):
//  - terminal fibers everywhere                       (stack)
//  - representables yU                                (stacks)
//  - K': walking arrow on nonempty opens, collapsed at the empty set
//                                                     (prestack, not a stack)
//  - STK-ISO: walking iso on nonempty opens           (stack)
//  - PSH-PAIR: parallel pair at X collapsing to a single arrow locally
//                                                     (not a prestack)
//  - PSH-TWIST: constant bz2 with a nontrivial composition coherence
//                                                     (pseudofunctor only)
PstackPtr terminal_prestack_on(const SitePtr& s);
PstackPtr arrow_prestack(const SitePtr& s);     // K'
PstackPtr iso_stack(const SitePtr& s);          // STK-ISO
PstackPtr pair_presheaf(const SitePtr& s);      // PSH-PAIR
PstackPtr twisted_bz2(const SitePtr& s);        // PSH-TWIST
PstackPtr constant_discrete2(const SitePtr& s); // PSH-CONST2

}  // namespace descente::fixtures
