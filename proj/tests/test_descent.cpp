#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "descente/descent.hpp"
#include "descente/fixtures.hpp"

using namespace descente;
namespace fx = descente::fixtures;

namespace {

Cover two_patch_cover(const SitePtr& s) {
  const FinCategory& c = s->c();
  Cover cover;
  cover.apex = c.obj_index("X");
  cover.members = {c.mor_index("U1>X"), c.mor_index("U2>X")};
  return cover;
}

PstackPtr constant_bz2(const SitePtr& s) {
  PseudofunctorBuilder b(s, "BZ2");
  for (ObjId u = 0; u < s->c().n_obj(); ++u) b.fiber(u, fx::bz2());
  for (MorId f = 0; f < s->c().n_mor(); ++f)
    b.restriction(f, identity_functor(fx::bz2()));
  b.strict_coherence();
  return b.build();
}

}  // namespace

TEST_CASE("descent over the empty cover is the base fiber") {
  auto s = fx::site_2();
  auto F = fx::arrow_prestack(s);
  Cover empty;
  empty.apex = s->c().obj_index("O");
  DescentCategory d = build_descent_category(to_terminal(F), empty);
  CHECK(d.cat->n_obj() == 1);  // B = 1
  CHECK(d.cat->n_mor() == 1);
  CHECK(validate_category(*d.cat).ok());

  // Relative to the identity the empty-cover descent category is B(U) itself.
  DescentCategory di = build_descent_category(identity_pseudonat(F), empty);
  CHECK(di.cat->n_obj() == F->fib(empty.apex).n_obj());
  CHECK(di.cat->n_mor() == F->fib(empty.apex).n_mor());
  CHECK(check_equivalence(d.projection).is_equivalence());
}

TEST_CASE("descent for the singleton identity cover is the fiber") {
  auto s = fx::site_2();
  auto F = fx::iso_stack(s);
  Cover idc;
  idc.apex = s->c().obj_index("X");
  idc.members = {s->c().obj_identity[idc.apex]};
  DescentCategory d = build_descent_category(to_terminal(F), idc);
  Functor phi = phi_functor(d);
  CHECK(check_equivalence(phi).is_equivalence());
}

TEST_CASE("constant bz2 over the two-patch cover has the twisted datum") {
  // Hand count: sections are forced (single object fibers), psi is trivial
  // (target is terminal), the two off-diagonal theta cells are each 1 or t,
  // and the degenerate cocycle faces force theta_21 = theta_12^{-1}; so there
  // are exactly two objects, the split one and the twisted one.
  auto s = fx::site_2();
  auto F = constant_bz2(s);
  DescentCategory d =
      build_descent_category(to_terminal(F), two_patch_cover(s));
  CHECK(d.objects.size() == 2);
  CHECK(validate_category(*d.cat).ok());

  // Both data are isomorphic (conjugate by t on one patch), so Phi is an
  // equivalence and the constant bz2 satisfies descent for this cover.
  CHECK(check_equivalence(phi_functor(d)).is_equivalence());
}

TEST_CASE("every enumerated descent object and morphism validates") {
  auto s = fx::site_2();
  for (const PstackPtr& F : {fx::arrow_prestack(s), fx::iso_stack(s)}) {
    PseudoNat p = to_terminal(F);
    for (const Cover& cover :
         {two_patch_cover(s),
          Cover{s->c().obj_index("X"),
                {s->c().obj_identity[s->c().obj_index("X")],
                 s->c().mor_index("U1>X")}}}) {
      DescentCategory d = build_descent_category(p, cover);
      for (const DescentObject& o : d.objects)
        CHECK(validate_descent_object(p, cover, o).ok());
      for (MorId m = 0; m < d.cat->n_mor(); ++m)
        CHECK(validate_descent_morphism(p, cover, d.objects[d.cat->mor_dom[m]],
                                        d.objects[d.cat->mor_cod[m]],
                                        d.morphisms[m])
                  .ok());
    }
  }
}

TEST_CASE("phi lands in valid descent data and is faithful for prestacks") {
  auto s = fx::site_2();
  for (const PstackPtr& F : {fx::arrow_prestack(s), fx::iso_stack(s)}) {
    PseudoNat p = to_terminal(F);
    for (ObjId u = 0; u < s->c().n_obj(); ++u)
      for (const CoverFamily& fam : s->basis_families(u)) {
        DescentCategory d = build_descent_category(p, Cover::from_family(fam));
        Functor phi = phi_functor(d);
        CHECK(validate_functor(phi).ok());
        CHECK(check_equivalence(phi).faithful);
      }
  }

  SUBCASE("faithfulness needs separated hom presheaves") {
    // For the non-prestack parallel-pair fixture the two parallel arrows at
    // the top restrict equally to both patches, so Phi identifies them.
    auto F = fx::pair_presheaf(s);
    PseudoNat p = to_terminal(F);
    Cover cover = two_patch_cover(s);
    DescentCategory d = build_descent_category(p, cover);
    CHECK_FALSE(check_equivalence(phi_functor(d)).faithful);
  }
}

TEST_CASE("phi over the maximal sieve is an equivalence for every fixture") {
  auto s = fx::site_2();
  for (const PstackPtr& F : {fx::arrow_prestack(s), fx::iso_stack(s),
                             fx::pair_presheaf(s), fx::constant_discrete2(s)}) {
    PseudoNat p = to_terminal(F);
    for (ObjId u = 0; u < s->c().n_obj(); ++u) {
      Cover cover = Cover::from_sieve(s->maximal_sieve(u));
      DescentCategory d = build_descent_category(p, cover);
      CHECK(check_equivalence(phi_functor(d)).is_equivalence());
    }
  }
}

TEST_CASE("is_stack") {
  auto s = fx::site_2();
  SUBCASE("the terminal prestack is a stack") {
    CHECK(is_stack(terminal_prestack(s)).ok);
  }
  SUBCASE("representables on the open-set site are stacks") {
    for (ObjId u = 0; u < s->c().n_obj(); ++u)
      CHECK(is_stack(representable(s, u)).ok);
  }
  SUBCASE("the iso stack is a stack") { CHECK(is_stack(fx::iso_stack(s)).ok); }
  SUBCASE("the arrow prestack is not a stack") {
    auto j = is_stack(fx::arrow_prestack(s));
    CHECK_FALSE(j.ok);
    CHECK(j.witness.find("U=X") != std::string::npos);
  }
  SUBCASE("constant discrete fibers fail at the empty cover") {
    auto j = is_stack(fx::constant_discrete2(s));
    CHECK_FALSE(j.ok);
    CHECK(j.witness.find("U=O") != std::string::npos);
  }
  SUBCASE("everything is a stack over the trivial topology") {
    auto st = fx::site_triv();
    CHECK(is_stack(fx::constant_discrete2(st)).ok);
    CHECK(is_stack(fx::pair_presheaf(st)).ok);
  }
  SUBCASE("a covering sieve subfunctor is a prestack but not a stack") {
    const FinCategory& c = s->c();
    Sieve cover = generate_sieve(c, c.obj_index("X"),
                                 {c.mor_index("U1>X"), c.mor_index("U2>X")});
    SieveSubfunctor sub = sieve_subfunctor(s, cover);
    CHECK(is_prestack(*sub.subfunctor).ok);
    CHECK_FALSE(is_stack(sub.subfunctor).ok);
  }
}

TEST_CASE("is_local_fibration") {
  auto s = fx::site_2();
  SUBCASE("F -> 1 agrees with is_stack") {
    for (const PstackPtr& F : {fx::arrow_prestack(s), fx::iso_stack(s)})
      CHECK(is_local_fibration(to_terminal(F)).ok == is_stack(F).ok);
  }
  SUBCASE("identity transformations are local fibrations") {
    for (const PstackPtr& F : {fx::arrow_prestack(s), fx::iso_stack(s)})
      CHECK(is_local_fibration(identity_pseudonat(F)).ok);
  }
  SUBCASE("cotensor boundary of the non-prestack is not a local fibration") {
    Cotensor ct = cotensor_two(fx::pair_presheaf(s));
    CHECK_FALSE(is_local_fibration(ct.boundary).ok);
  }
  SUBCASE("cotensor boundary of a prestack is a local fibration") {
    Cotensor ct = cotensor_two(fx::arrow_prestack(s));
    CHECK(is_local_fibration(ct.boundary).ok);
  }
  SUBCASE("sieve mode agrees with family mode on the fixtures") {
    auto F = fx::iso_stack(s);
    CHECK(is_local_fibration(to_terminal(F), default_bound(), true).ok ==
          is_local_fibration(to_terminal(F), default_bound(), false).ok);
    auto G = fx::arrow_prestack(s);
    CHECK(is_local_fibration(to_terminal(G), default_bound(), true).ok ==
          is_local_fibration(to_terminal(G), default_bound(), false).ok);
  }
}

TEST_CASE("is_lwe") {
  auto s = fx::site_2();
  SUBCASE("identities are local weak equivalences") {
    CHECK(is_lwe(identity_pseudonat(fx::arrow_prestack(s))).ok);
  }
  SUBCASE("covering sieve inclusions are local weak equivalences") {
    const FinCategory& c = s->c();
    Sieve cover = generate_sieve(c, c.obj_index("X"),
                                 {c.mor_index("U1>X"), c.mor_index("U2>X")});
    SieveSubfunctor sub = sieve_subfunctor(s, cover);
    CHECK(is_lwe(sub.inclusion).ok);
  }
  SUBCASE("non-covering sieve inclusions are not") {
    const FinCategory& c = s->c();
    Sieve partial = generate_sieve(c, c.obj_index("X"), {c.mor_index("U1>X")});
    SieveSubfunctor sub = sieve_subfunctor(s, partial);
    auto rep = is_lwe(sub.inclusion);
    CHECK_FALSE(rep.ok);
    CHECK_FALSE(rep.locally_ess_surjective);
    CHECK(rep.full);
    CHECK(rep.faithful);
  }
  SUBCASE("a constant section picking one of two objects is not an lwe") {
    auto st = fx::site_triv();
    auto two = fx::constant_discrete2(st);
    auto one = terminal_prestack(st);
    PseudoNat pick;
    pick.source = one;
    pick.target = two;
    const FinCategory& c = st->c();
    for (ObjId u = 0; u < c.n_obj(); ++u)
      pick.component.push_back(
          constant_functor(one->fiber[u], two->fiber[u], 0));
    pick.coherence.resize(c.n_mor());
    for (MorId f = 0; f < c.n_mor(); ++f)
      pick.coherence[f].assign(1, two->fiber[c.mor_dom[f]]->obj_identity[0]);
    REQUIRE(validate_pseudonat(pick).ok());
    auto rep = is_lwe(pick);
    CHECK_FALSE(rep.ok);
    CHECK_FALSE(rep.locally_ess_surjective);
  }
}

TEST_CASE("descent_from_lwe and amalgamate") {
  auto s = fx::site_2();
  const FinCategory& c = s->c();
  Sieve cover = generate_sieve(c, c.obj_index("X"),
                               {c.mor_index("U1>X"), c.mor_index("U2>X")});
  SieveSubfunctor sub = sieve_subfunctor(s, cover);

  SUBCASE("descent data for an object in the image of the inclusion") {
    ObjId u1 = c.obj_index("U1");
    REQUIRE(sub.ambient->fib(u1).n_obj() == 1);
    LweDescent dd = descent_from_lwe(sub.inclusion, u1, 0);
    CHECK(dd.obj.base == 0);
    CHECK(
        validate_descent_object(sub.inclusion, Cover::from_sieve(dd.cover), dd.obj)
            .ok());
  }
  SUBCASE("descent data over the generated cover for the apex object") {
    ObjId x = c.obj_index("X");
    REQUIRE(sub.ambient->fib(x).n_obj() == 1);
    LweDescent dd = descent_from_lwe(sub.inclusion, x, 0);
    CHECK(dd.cover.arrows.size() == 3);
    CHECK(
        validate_descent_object(sub.inclusion, Cover::from_sieve(dd.cover), dd.obj)
            .ok());
  }
  SUBCASE("rejects a non-lwe") {
    Sieve partial = generate_sieve(c, c.obj_index("X"), {c.mor_index("U1>X")});
    SieveSubfunctor bad = sieve_subfunctor(s, partial);
    CHECK_THROWS_AS(descent_from_lwe(bad.inclusion, c.obj_index("X"), 0),
                    NotLWE);
  }
  SUBCASE("amalgamate returns exact preimages first") {
    auto F = fx::iso_stack(s);
    PseudoNat p = to_terminal(F);
    Cover two = two_patch_cover(s);
    DescentCategory d = build_descent_category(p, two);
    ObjId e = 0;
    Amalgamation am = amalgamate(d, phi_object(p, two, e));
    CHECK(am.object == e);
    CHECK(d.cat->is_identity(am.iso));
  }
  SUBCASE("amalgamate finds a preimage up to iso for stack data") {
    auto F = fx::iso_stack(s);
    PseudoNat p = to_terminal(F);
    Cover two = two_patch_cover(s);
    DescentCategory d = build_descent_category(p, two);
    for (const DescentObject& o : d.objects) {
      Amalgamation am = amalgamate(d, o);
      CHECK(inverse_of(*d.cat, am.iso).has_value());
    }
  }
  SUBCASE("amalgamate fails on a non-glueable datum") {
    auto F = fx::arrow_prestack(s);
    PseudoNat p = to_terminal(F);
    Cover two = two_patch_cover(s);
    DescentCategory d = build_descent_category(p, two);
    bool threw = false;
    for (const DescentObject& o : d.objects) {
      try {
        amalgamate(d, o);
      } catch (const NoAmalgamation&) {
        threw = true;
      }
    }
    CHECK(threw);  // the mixed (0, 1) datum cannot glue
  }
}

TEST_CASE("pushforward squares and gamma_hat") {
  auto s = fx::site_2();
  auto A = fx::iso_stack(s);
  PseudoNat id_a = identity_pseudonat(A);
  Cover two = two_patch_cover(s);

  SUBCASE("identity square induces the identity functor") {
    DescentCategory d = build_descent_category(id_a, two);
    Functor f =
        pushforward_square(d, d, identity_pseudonat(A), identity_pseudonat(A),
                           identity_modification(id_a));
    CHECK(f == identity_functor(d.cat));
    NatTrans gh = gamma_hat(d, d, identity_pseudonat(A), identity_pseudonat(A),
                            identity_modification(id_a));
    CHECK(validate_nat_trans(gh).ok());
    CHECK(nat_is_iso(gh));
  }
  SUBCASE("pushforward commutes strictly with the projections") {
    PseudoNat p = to_terminal(A);
    DescentCategory from = build_descent_category(id_a, two);
    DescentCategory to = build_descent_category(p, two);
    Functor push =
        pushforward_square(from, to, identity_pseudonat(A), to_terminal(A),
                           identity_modification(p));
    Functor lhs = compose(to.projection, push);
    Functor rhs = compose(to_terminal(A).component[two.apex], from.projection);
    CHECK(lhs.obj_map == rhs.obj_map);
    CHECK(lhs.mor_map == rhs.mor_map);

    NatTrans gh = gamma_hat(from, to, identity_pseudonat(A), to_terminal(A),
                            identity_modification(p));
    CHECK(validate_nat_trans(gh).ok());
    // Pasting property: projecting a gamma_hat component recovers gamma.
    for (ObjId a = 0; a < A->fib(two.apex).n_obj(); ++a)
      CHECK(to.projection.mor_map[gh.component[a]] ==
            identity_modification(p).component[two.apex][a]);
  }
}

TEST_CASE("restriction to a subcover and base change") {
  auto s = fx::site_2();
  const FinCategory& c = s->c();
  auto F = fx::iso_stack(s);
  PseudoNat p = to_terminal(F);

  Sieve big = generate_sieve(c, c.obj_index("X"),
                             {c.mor_index("U1>X"), c.mor_index("U2>X")});
  Cover big_cover = Cover::from_sieve(big);
  DescentCategory dbig = build_descent_category(p, big_cover);

  SUBCASE("restrict to itself is the identity") {
    Functor f = restrict_to_subcover(dbig, dbig);
    CHECK(f == identity_functor(dbig.cat));
  }
  SUBCASE("chained restriction composes") {
    Sieve small = generate_sieve(c, c.obj_index("X"), {c.mor_index("O>X")});
    Sieve mid = generate_sieve(c, c.obj_index("X"),
                               {c.mor_index("U1>X"), c.mor_index("O>X")});
    Sieve mid_cap = sieve_intersection(big, mid);
    DescentCategory dmid =
        build_descent_category(p, Cover::from_sieve(mid_cap));
    DescentCategory dsmall = build_descent_category(p, Cover::from_sieve(small));
    Functor one = restrict_to_subcover(dbig, dmid);
    Functor two = restrict_to_subcover(dmid, dsmall);
    Functor direct = restrict_to_subcover(dbig, dsmall);
    CHECK(compose(two, one) == direct);
  }
  SUBCASE("the restriction triangle with phi commutes") {
    Sieve small = generate_sieve(c, c.obj_index("X"), {c.mor_index("O>X")});
    DescentCategory dsmall = build_descent_category(p, Cover::from_sieve(small));
    Functor via = compose(restrict_to_subcover(dbig, dsmall), phi_functor(dbig));
    Functor direct = phi_functor(dsmall);
    CHECK(via == direct);
  }
  SUBCASE("base change lands in valid data and respects g = identity") {
    MorId g = c.mor_index("U1>X");
    Cover pulled = pullback_cover(*s, g, big_cover);
    DescentCategory dv = build_descent_category(p, pulled);
    Functor bc = base_change(dbig, g, dv);
    CHECK(validate_functor(bc).ok());

    MorId one = c.obj_identity[c.obj_index("X")];
    Cover same = pullback_cover(*s, one, big_cover);
    CHECK(same.members == big_cover.members);
    Functor idc = base_change(dbig, one, dbig);
    CHECK(idc == identity_functor(dbig.cat));
  }
}
