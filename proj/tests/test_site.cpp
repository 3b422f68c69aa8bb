#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "descente/fixtures.hpp"
#include "descente/site.hpp"

using namespace descente;
namespace fx = descente::fixtures;

namespace {

// Closure oracle independent of generate_sieve.
bool closed_under_precomposition(const FinCategory& c, const Sieve& s) {
  for (MorId f : s.arrows)
    for (MorId h = 0; h < c.n_mor(); ++h)
      if (c.composable(f, h) && !s.contains(c.compose(f, h))) return false;
  return true;
}

Sieve named_sieve(const SitePtr& s, const std::string& apex,
                  const std::vector<std::string>& arrows) {
  const FinCategory& c = s->c();
  std::vector<MorId> ms;
  for (const auto& a : arrows) ms.push_back(c.mor_index(a));
  return generate_sieve(c, c.obj_index(apex), ms);
}

}  // namespace

TEST_CASE("the fixture sites validate") {
  for (const SitePtr& s : {fx::site_pt(), fx::site_2(), fx::site_triv()})
    CHECK(validate_site(*s).ok());
}

TEST_CASE("generate_sieve") {
  auto s = fx::site_2();
  const FinCategory& c = s->c();
  ObjId X = c.obj_index("X");

  SUBCASE("closure of an identity is the maximal sieve") {
    Sieve got = generate_sieve(*s, {X, {c.obj_identity[X]}});
    CHECK(got == s->maximal_sieve(X));
  }
  SUBCASE("closure of the empty family is empty") {
    Sieve got = generate_sieve(*s, {X, {}});
    CHECK(got.arrows.empty());
  }
  SUBCASE("closure of the two-patch cover adds the empty open") {
    // Hand fixpoint: {U1>X, U2>X} picks up O>X via O>U1 and nothing else.
    Sieve got = generate_sieve(
        *s, {X, {c.mor_index("U1>X"), c.mor_index("U2>X")}});
    Sieve want;
    want.apex = X;
    want.arrows = {c.mor_index("O>X"), c.mor_index("U1>X"),
                   c.mor_index("U2>X")};
    std::sort(want.arrows.begin(), want.arrows.end());
    CHECK(got == want);
  }
  SUBCASE("outputs satisfy the closure invariant") {
    for (ObjId u = 0; u < c.n_obj(); ++u)
      for (const CoverFamily& fam : s->basis_families(u))
        CHECK(closed_under_precomposition(c, generate_sieve(*s, fam)));
  }
}

TEST_CASE("pullback_sieve") {
  auto s = fx::site_2();
  const FinCategory& c = s->c();
  ObjId X = c.obj_index("X");
  ObjId U1 = c.obj_index("U1");
  Sieve cover = named_sieve(s, "X", {"U1>X", "U2>X"});

  SUBCASE("maximal pulls back to maximal") {
    CHECK(pullback_sieve(*s, c.mor_index("U1>X"), s->maximal_sieve(X)) ==
          s->maximal_sieve(U1));
  }
  SUBCASE("pullback along the identity is the sieve itself") {
    CHECK(pullback_sieve(*s, c.obj_identity[X], cover) == cover);
  }
  SUBCASE("two-patch cover pulls back to the maximal sieve on a patch") {
    CHECK(pullback_sieve(*s, c.mor_index("U1>X"), cover) ==
          s->maximal_sieve(U1));
  }
  SUBCASE("covering sieves pull back to covering sieves on all fixtures") {
    for (const SitePtr& site : {fx::site_pt(), fx::site_2(), fx::site_triv()})
      for (ObjId u = 0; u < site->c().n_obj(); ++u)
        for (const Sieve& sv : site->topology.on(u))
          for (MorId g = 0; g < site->c().n_mor(); ++g) {
            if (site->c().mor_cod[g] != u) continue;
            CHECK(site->topology.is_covering(pullback_sieve(*site, g, sv)));
          }
  }
}

TEST_CASE("sieve_intersection") {
  auto s = fx::site_2();
  const FinCategory& c = s->c();
  Sieve cover = named_sieve(s, "X", {"U1>X", "U2>X"});

  CHECK(sieve_intersection(cover, s->maximal_sieve(c.obj_index("X"))) == cover);
  CHECK(sieve_intersection(cover, cover) == cover);

  SUBCASE("the one-patch sieves meet in the empty open only") {
    Sieve s1 = named_sieve(s, "X", {"U1>X"});
    Sieve s2 = named_sieve(s, "X", {"U2>X"});
    Sieve meet = sieve_intersection(s1, s2);
    CHECK(meet.arrows == std::vector<MorId>{c.mor_index("O>X")});
  }
  SUBCASE("apex mismatch throws") {
    CHECK_THROWS_AS(
        sieve_intersection(cover, s->maximal_sieve(c.obj_index("U1"))),
        ApexMismatch);
  }
  SUBCASE("intersections of covering sieves cover, on all fixtures") {
    for (const SitePtr& site : {fx::site_pt(), fx::site_2(), fx::site_triv()})
      for (ObjId u = 0; u < site->c().n_obj(); ++u)
        for (const Sieve& a : site->topology.on(u))
          for (const Sieve& b : site->topology.on(u))
            CHECK(site->topology.is_covering(sieve_intersection(a, b)));
  }
}

TEST_CASE("validate_topology") {
  auto s2 = fx::site_2();

  SUBCASE("the trivial topology is valid") {
    CHECK(validate_topology(*fx::site_triv()).ok());
  }
  SUBCASE("the union topology on SITE-2 is valid") {
    CHECK(validate_topology(*s2).ok());
  }
  SUBCASE("adding a sieve without its pullbacks breaks axiom 2") {
    Site broken = *s2;
    broken.basis.reset();  // keep the mutation visible to the topology only
    ObjId X = broken.c().obj_index("X");
    Sieve bad = named_sieve(s2, "X", {"U1>X"});
    broken.topology.covers[X].push_back(bad);
    std::sort(broken.topology.covers[X].begin(),
              broken.topology.covers[X].end());
    auto report = validate_topology(broken);
    REQUIRE_FALSE(report.ok());
    bool axiom2 = false;
    for (const auto& v : report.violations)
      if (v.rule == "axiom-2") axiom2 = true;
    CHECK(axiom2);
  }
}

TEST_CASE("generate_topology") {
  SUBCASE("iso singleton basis generates the trivial topology") {
    auto s = fx::site_triv();
    for (ObjId u = 0; u < s->c().n_obj(); ++u) {
      ObjId bottom = s->c().obj_index("O");
      // Only the maximal sieve covers, except at the bottom where nothing
      // forces more either.
      CHECK(s->topology.on(u).size() == 1);
      CHECK(s->topology.on(u)[0] == s->maximal_sieve(u));
      (void)bottom;
    }
  }
  SUBCASE("union basis on SITE-2: covering sieve counts frozen by hand") {
    auto s = fx::site_2();
    const FinCategory& c = s->c();
    // X: the maximal sieve and {U1>X, U2>X, O>X}; U1, U2: maximal only;
    // O: maximal and the empty sieve (the empty family covers).
    CHECK(s->topology.on(c.obj_index("X")).size() == 2);
    CHECK(s->topology.on(c.obj_index("U1")).size() == 1);
    CHECK(s->topology.on(c.obj_index("U2")).size() == 1);
    CHECK(s->topology.on(c.obj_index("O")).size() == 2);
    Sieve empty;
    empty.apex = c.obj_index("O");
    CHECK(s->topology.is_covering(empty));
  }
  SUBCASE("a basis violating stability is rejected") {
    auto s = fx::site_2();
    Basis broken = *s->basis;
    ObjId U1 = s->c().obj_index("U1");
    // Keep only the iso singleton on U1; the two-patch family on X then has
    // no pulled-back family along U1>X.
    CoverFamily keep{U1, {s->c().obj_identity[U1]}};
    broken[U1] = {keep};
    CHECK_THROWS_AS(generate_topology(s->c(), s->pullbacks, broken),
                    InvalidBasis);
  }
  SUBCASE("generated topologies validate on every fixture") {
    for (const SitePtr& site : {fx::site_pt(), fx::site_2(), fx::site_triv()}) {
      Site copy = *site;
      copy.topology =
          generate_topology(site->c(), site->pullbacks, *site->basis);
      CHECK(validate_topology(copy).ok());
    }
  }
}

TEST_CASE("mediator") {
  auto s = fx::site_2();
  const FinCategory& c = s->c();
  MorId i1 = c.mor_index("U1>X"), i2 = c.mor_index("U2>X");

  SUBCASE("the projections mediate themselves via the identity") {
    const Pullback& pb = s->pullbacks.at(i1, i2);
    CHECK(mediator(*s, i1, i2, pb.p1, pb.p2) == c.obj_identity[pb.apex]);
  }
  SUBCASE("pullback of an identity cospan mediates any leg by itself") {
    MorId one = c.obj_identity[c.obj_index("X")];
    CHECK(mediator(*s, one, one, i1, i1) == i1);
  }
  SUBCASE("the two patches of SITE-2 meet in the empty open") {
    const Pullback& pb = s->pullbacks.at(i1, i2);
    CHECK(pb.apex == c.obj_index("O"));
    CHECK(mediator(*s, i1, i2, c.mor_index("O>U1"), c.mor_index("O>U2")) ==
          c.obj_identity[pb.apex]);
  }
}
