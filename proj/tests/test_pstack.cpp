#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "descente/fixtures.hpp"
#include "descente/pstack.hpp"

using namespace descente;
namespace fx = descente::fixtures;

TEST_CASE("the fixture pseudofunctors validate") {
  auto s2 = fx::site_2();
  for (const PstackPtr& F :
       {fx::terminal_prestack_on(s2), fx::arrow_prestack(s2), fx::iso_stack(s2),
        fx::pair_presheaf(s2), fx::twisted_bz2(s2),
        fx::constant_discrete2(s2), representable(s2, s2->c().obj_index("X")),
        representable(s2, s2->c().obj_index("O"))})
    CHECK(validate_pseudofunctor(*F).ok());
}

TEST_CASE("validate_pseudofunctor catches an incoherent phi cell") {
  auto s2 = fx::site_2();
  Pseudofunctor broken = *fx::twisted_bz2(s2);
  const FinCategory& c = s2->c();
  // Flip one phi component on a pair composing with an identity; the unit
  // axiom then fails.
  MorId f = kNone;
  for (MorId m = 0; m < c.n_mor(); ++m)
    if (!c.is_identity(m)) f = m;
  REQUIRE(f != kNone);
  MorId one = c.obj_identity[c.mor_dom[f]];
  auto& cell = broken.phi[{f, one}];
  cell[0] = fx::bz2()->mor_index("t");
  auto report = validate_pseudofunctor(broken);
  CHECK_FALSE(report.ok());
}

TEST_CASE("restriction comparisons and sigma") {
  auto s2 = fx::site_2();
  const FinCategory& c = s2->c();
  ObjId X = c.obj_index("X");
  MorId i1 = c.mor_index("U1>X"), i2 = c.mor_index("U2>X");

  SUBCASE("strict pseudofunctor: sigma is an identity") {
    auto F = fx::constant_discrete2(s2);
    for (ObjId x = 0; x < F->fib(X).n_obj(); ++x) {
      MorId sg = sigma(*F, X, x, i1, i2);
      CHECK(F->fib(s2->pullbacks.at(i1, i2).apex).is_identity(sg));
    }
  }
  SUBCASE("twisted pseudofunctor: sigma is the twist, and cancels") {
    auto F = fx::twisted_bz2(s2);
    ObjId e = 0;
    MorId ab = sigma(*F, X, e, i1, i2);
    MorId ba = sigma(*F, X, e, i2, i1);
    const FinCategory& fib = F->fib(s2->pullbacks.at(i1, i2).apex);
    // One of the two composition cells carries the twist.
    CHECK_FALSE(fib.is_identity(ab));
    // sigma_{alpha beta} ∘ sigma_{beta alpha} = identity needs matching
    // pullback choices; over a poset both chosen pullbacks coincide.
    CHECK(fib.is_identity(fib.compose(ab, ba)));
  }
  SUBCASE("sigma composed with its reverse is the identity on all fixtures") {
    for (const PstackPtr& F : {fx::arrow_prestack(s2), fx::iso_stack(s2),
                               fx::twisted_bz2(s2)})
      for (MorId fa = 0; fa < c.n_mor(); ++fa)
        for (MorId fb = 0; fb < c.n_mor(); ++fb) {
          if (c.mor_cod[fa] != c.mor_cod[fb]) continue;
          ObjId u = c.mor_cod[fa];
          const FinCategory& fib = F->fib(s2->pullbacks.at(fa, fb).apex);
          for (ObjId x = 0; x < F->fib(u).n_obj(); ++x) {
            MorId ab = sigma(*F, u, x, fa, fb);
            MorId ba = sigma(*F, u, x, fb, fa);
            // Both land over the same chosen pullback in a poset site.
            CHECK(fib.is_identity(fib.compose(ba, ab)));
          }
        }
  }
}

TEST_CASE("is_prestack") {
  auto s2 = fx::site_2();
  SUBCASE("representables are prestacks") {
    for (ObjId u = 0; u < s2->c().n_obj(); ++u)
      CHECK(is_prestack(*representable(s2, u)).ok);
  }
  SUBCASE("PSH-PAIR is not a prestack, with a separation witness") {
    auto rep = is_prestack(*fx::pair_presheaf(s2));
    REQUIRE_FALSE(rep.ok);
    CHECK(rep.witness.find("non-separated") != std::string::npos);
  }
  SUBCASE("every pseudofunctor on the trivial site is a prestack") {
    auto st = fx::site_triv();
    CHECK(is_prestack(*fx::constant_discrete2(st)).ok);
    CHECK(is_prestack(*fx::pair_presheaf(st)).ok);
  }
  SUBCASE("the arrow prestack and the iso stack are prestacks") {
    CHECK(is_prestack(*fx::arrow_prestack(s2)).ok);
    CHECK(is_prestack(*fx::iso_stack(s2)).ok);
  }
  SUBCASE("constant discrete fibers fail glueing at the empty cover") {
    auto rep = is_prestack(*fx::constant_discrete2(s2));
    REQUIRE_FALSE(rep.ok);
    CHECK(rep.witness.find("empty cover") != std::string::npos);
  }
}

TEST_CASE("stock constructions validate") {
  auto s2 = fx::site_2();
  auto A = fx::arrow_prestack(s2);
  auto B = fx::iso_stack(s2);

  SUBCASE("terminal prestack and the map into it") {
    auto one = terminal_prestack(s2);
    CHECK(validate_pseudofunctor(*one).ok());
    CHECK(validate_pseudonat(to_terminal(A)).ok());
  }
  SUBCASE("product, projections, diagonal") {
    Product prod = product(A, B);
    CHECK(validate_pseudofunctor(*prod.prod).ok());
    CHECK(validate_pseudonat(prod.proj1).ok());
    CHECK(validate_pseudonat(prod.proj2).ok());
    Product aa = product(A, A);
    PseudoNat diag = diagonal(A, aa);
    CHECK(validate_pseudonat(diag).ok());
    SUBCASE("diagonal then first projection is the identity") {
      PseudoNat round = compose_pseudonat(aa.proj1, diag);
      CHECK(pseudonat_equal(round, identity_pseudonat(A)));
    }
    SUBCASE("fiber sizes multiply") {
      for (ObjId u = 0; u < s2->c().n_obj(); ++u)
        CHECK(prod.prod->fib(u).n_obj() ==
              A->fib(u).n_obj() * B->fib(u).n_obj());
    }
  }
  SUBCASE("product with the terminal is fiberwise the original") {
    auto one = terminal_prestack(s2);
    Product prod = product(A, one);
    for (ObjId u = 0; u < s2->c().n_obj(); ++u) {
      CHECK(prod.prod->fib(u).n_obj() == A->fib(u).n_obj());
      CHECK(check_equivalence(prod.proj1.component[u]).is_equivalence());
    }
  }
  SUBCASE("cotensor with the walking arrow") {
    Cotensor ct = cotensor_two(A);
    CHECK(validate_pseudofunctor(*ct.path).ok());
    CHECK(validate_pseudonat(ct.boundary).ok());
    // Fiber of [2, A] at u is the arrow category: one object per arrow.
    for (ObjId u = 0; u < s2->c().n_obj(); ++u)
      CHECK(ct.path->fib(u).n_obj() == A->fib(u).n_mor());
    Cotensor one = cotensor_two(terminal_prestack(s2));
    for (ObjId u = 0; u < s2->c().n_obj(); ++u)
      CHECK(one.path->fib(u).n_obj() == 1);
  }
  SUBCASE("sieve subfunctor and inclusion") {
    const FinCategory& c = s2->c();
    Sieve cover = generate_sieve(
        c, c.obj_index("X"), {c.mor_index("U1>X"), c.mor_index("U2>X")});
    SieveSubfunctor sub = sieve_subfunctor(s2, cover);
    CHECK(validate_pseudofunctor(*sub.subfunctor).ok());
    CHECK(validate_pseudonat(sub.inclusion).ok());
    CHECK(sub.subfunctor->fib(c.obj_index("X")).n_obj() == 0);
    CHECK(sub.subfunctor->fib(c.obj_index("U1")).n_obj() == 1);
    SUBCASE("maximal sieve gives an identity-like inclusion") {
      SieveSubfunctor whole =
          sieve_subfunctor(s2, s2->maximal_sieve(c.obj_index("X")));
      for (ObjId u = 0; u < c.n_obj(); ++u)
        CHECK(check_equivalence(whole.inclusion.component[u]).is_equivalence());
    }
    SUBCASE("empty sieve gives empty fibers") {
      Sieve empty;
      empty.apex = c.obj_index("X");
      SieveSubfunctor none = sieve_subfunctor(s2, empty);
      for (ObjId u = 0; u < c.n_obj(); ++u)
        CHECK(none.subfunctor->fib(u).n_obj() == 0);
    }
  }
  SUBCASE("representable fiber sizes count hom sets") {
    auto yX = representable(s2, s2->c().obj_index("X"));
    for (ObjId u = 0; u < s2->c().n_obj(); ++u)
      CHECK(yX->fib(u).n_obj() == 1);
    auto yO = representable(s2, s2->c().obj_index("O"));
    CHECK(yO->fib(s2->c().obj_index("X")).n_obj() == 0);
    auto y1 = representable(s2, s2->c().obj_index("U1"));
    CHECK(y1->fib(s2->c().obj_index("U2")).n_obj() == 0);
    CHECK(y1->fib(s2->c().obj_index("O")).n_obj() == 1);
  }
  SUBCASE("representing pseudonats validate") {
    const FinCategory& c = s2->c();
    for (ObjId x = 0; x < B->fib(c.obj_index("X")).n_obj(); ++x)
      CHECK(validate_pseudonat(
                representing_pseudonat(B, c.obj_index("X"), x))
                .ok());
  }
}

TEST_CASE("pseudonat composition") {
  auto s2 = fx::site_2();
  auto A = fx::arrow_prestack(s2);
  PseudoNat id = identity_pseudonat(A);
  PseudoNat bang = to_terminal(A);

  CHECK(pseudonat_equal(compose_pseudonat(bang, id), bang));
  CHECK(validate_pseudonat(compose_pseudonat(bang, id)).ok());

  SUBCASE("composition is strictly associative") {
    auto one = terminal_prestack(s2);
    PseudoNat idone = identity_pseudonat(one);
    PseudoNat left = compose_pseudonat(idone, compose_pseudonat(bang, id));
    PseudoNat right = compose_pseudonat(compose_pseudonat(idone, bang), id);
    CHECK(pseudonat_equal(left, right));
  }
}

TEST_CASE("hom_category") {
  auto s2 = fx::site_2();
  auto one = terminal_prestack(s2);

  SUBCASE("hom(1, 1) is the terminal category") {
    HomCategory h = hom_category(one, one, default_bound());
    CHECK(h.cat->n_obj() == 1);
    CHECK(h.cat->n_mor() == 1);
    CHECK(validate_category(*h.cat).ok());
  }
  SUBCASE("hom(A, 1) is terminal") {
    auto A = fx::arrow_prestack(s2);
    HomCategory h = hom_category(A, one, default_bound());
    CHECK(h.cat->n_obj() == 1);
    CHECK(h.cat->n_mor() == 1);
  }
  SUBCASE("hom(S^, yX) rediscovers the inclusion") {
    const FinCategory& c = s2->c();
    Sieve cover = generate_sieve(
        c, c.obj_index("X"), {c.mor_index("U1>X"), c.mor_index("U2>X")});
    SieveSubfunctor sub = sieve_subfunctor(s2, cover);
    HomCategory h =
        hom_category(sub.subfunctor, sub.ambient, default_bound());
    bool found = false;
    for (const auto& p : h.objects)
      if (pseudonat_equal(p, sub.inclusion)) found = true;
    CHECK(found);
    CHECK(validate_category(*h.cat).ok());
  }
}

TEST_CASE("pointwise pseudoinverse") {
  auto s2 = fx::site_2();
  auto B = fx::iso_stack(s2);

  SUBCASE("identity inverts to itself") {
    PseudoInverse inv = pointwise_pseudoinverse(identity_pseudonat(B));
    CHECK(pseudonat_equal(inv.inverse, identity_pseudonat(B)));
    CHECK(modification_is_iso(inv.unit));
    CHECK(modification_is_iso(inv.counit));
  }
  SUBCASE("a pointwise-equivalence with nontrivial components inverts") {
    // B -> 1 is not an equivalence, but 1 -> 1 and the iso-stack identity
    // exercised above are; use the diagonal-projection roundtrip instead.
    Product bb = product(B, B);
    PseudoNat diag = diagonal(B, bb);
    // proj1 ∘ diag = id is an equivalence; diag itself is pointwise one too.
    PseudoInverse inv = pointwise_pseudoinverse(diag);
    CHECK(validate_pseudonat(inv.inverse).ok());
    CHECK(validate_modification(inv.unit).ok());
    CHECK(validate_modification(inv.counit).ok());
    CHECK(modification_is_iso(inv.unit));
    CHECK(modification_is_iso(inv.counit));
  }
  SUBCASE("a non-equivalence is rejected") {
    auto A = fx::constant_discrete2(s2);
    CHECK_THROWS_AS(pointwise_pseudoinverse(to_terminal(A)),
                    NotPointwiseEquivalence);
  }
}
