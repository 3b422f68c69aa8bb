#include "descente/fixtures.hpp"

#include <bit>
#include <map>

#include "descente/pstack.hpp"

namespace descente::fixtures {

CatPtr empty_category() {
  static CatPtr c = CategoryBuilder{}.build();
  return c;
}

CatPtr terminal_category() {
  static CatPtr c = [] {
    CategoryBuilder b;
    b.object("*").morphism("1", "*", "*").identity("*", "1");
    return b.build();
  }();
  return c;
}

CatPtr discrete_category(const std::vector<std::string>& objects) {
  CategoryBuilder b;
  for (const auto& o : objects) {
    b.object(o).morphism("1_" + o, o, o).identity(o, "1_" + o);
  }
  return b.build();
}

CatPtr walking_arrow() {
  static CatPtr c = [] {
    CategoryBuilder b;
    b.object("x").object("y");
    b.morphism("1x", "x", "x").identity("x", "1x");
    b.morphism("1y", "y", "y").identity("y", "1y");
    b.morphism("u", "x", "y");
    return b.build();
  }();
  return c;
}

CatPtr walking_iso() {
  static CatPtr c = [] {
    CategoryBuilder b;
    b.object("a").object("b");
    b.morphism("1a", "a", "a").identity("a", "1a");
    b.morphism("1b", "b", "b").identity("b", "1b");
    b.morphism("s", "a", "b").morphism("t", "b", "a");
    b.composite("t", "s", "1a").composite("s", "t", "1b");
    return b.build();
  }();
  return c;
}

CatPtr parallel_pair() {
  static CatPtr c = [] {
    CategoryBuilder b;
    b.object("a").object("b");
    b.morphism("1a", "a", "a").identity("a", "1a");
    b.morphism("1b", "b", "b").identity("b", "1b");
    b.morphism("u", "a", "b").morphism("v", "a", "b");
    return b.build();
  }();
  return c;
}

CatPtr bz2() {
  static CatPtr c = [] {
    CategoryBuilder b;
    b.object("e");
    b.morphism("1", "e", "e").identity("e", "1");
    b.morphism("t", "e", "e");
    b.composite("t", "t", "1");
    return b.build();
  }();
  return c;
}

SitePtr open_set_site(const std::vector<uint32_t>& opens,
                      const std::vector<std::string>& names, bool union_basis) {
  if (opens.size() != names.size())
    throw Error("open_set_site: opens/names size mismatch");
  std::map<uint32_t, std::string> name_of;
  for (size_t i = 0; i < opens.size(); ++i) name_of[opens[i]] = names[i];

  auto arrow_name = [&](uint32_t from, uint32_t to) {
    return name_of.at(from) + ">" + name_of.at(to);
  };

  CategoryBuilder b;
  for (size_t i = 0; i < opens.size(); ++i) b.object(names[i]);
  for (uint32_t from : opens)
    for (uint32_t to : opens) {
      if ((from & to) != from) continue;  // not a subset
      b.morphism(arrow_name(from, to), name_of.at(from), name_of.at(to));
      if (from == to) b.identity(name_of.at(from), arrow_name(from, to));
    }
  for (uint32_t a : opens)
    for (uint32_t bset : opens)
      for (uint32_t c : opens) {
        if ((a & bset) != a || (bset & c) != bset) continue;
        b.composite(arrow_name(bset, c), arrow_name(a, bset), arrow_name(a, c));
      }
  CatPtr cat = b.build();

  auto site = std::make_shared<Site>();
  site->cat = cat;
  uint32_t top = 0;
  for (uint32_t o : opens) top |= o;
  if (!name_of.count(top)) throw Error("open_set_site: no top element");
  site->terminal = cat->obj_index(name_of.at(top));

  for (MorId f = 0; f < cat->n_mor(); ++f)
    for (MorId g = 0; g < cat->n_mor(); ++g) {
      if (cat->mor_cod[f] != cat->mor_cod[g]) continue;
      // Chosen pullback of two inclusions is the intersection.
      uint32_t vf = 0, vg = 0;
      for (uint32_t o : opens) {
        if (cat->obj_index(name_of.at(o)) == cat->mor_dom[f]) vf = o;
        if (cat->obj_index(name_of.at(o)) == cat->mor_dom[g]) vg = o;
      }
      uint32_t meet = vf & vg;
      if (!name_of.count(meet)) throw Error("open_set_site: not meet-closed");
      Pullback pb;
      pb.apex = cat->obj_index(name_of.at(meet));
      pb.p1 = cat->mor_index(arrow_name(meet, vf));
      pb.p2 = cat->mor_index(arrow_name(meet, vg));
      site->pullbacks.table[{f, g}] = pb;
    }

  Basis basis(cat->n_obj());
  for (uint32_t u : opens) {
    ObjId uid = cat->obj_index(name_of.at(u));
    std::vector<MorId> into = cat->arrows_into(uid);
    if (union_basis) {
      // Every subfamily of arrows into u whose union is u.
      const size_t n = into.size();
      for (uint64_t mask = 0; mask < (uint64_t{1} << n); ++mask) {
        uint32_t covered = 0;
        CoverFamily fam;
        fam.apex = uid;
        for (size_t i = 0; i < n; ++i)
          if (mask & (uint64_t{1} << i)) {
            fam.members.push_back(into[i]);
            for (uint32_t o : opens)
              if (cat->obj_index(name_of.at(o)) == cat->mor_dom[into[i]])
                covered |= o;
          }
        if (covered == u) basis[uid].push_back(fam);
      }
    } else {
      // Iso singletons only: in a poset, just the identity.
      basis[uid].push_back({uid, {cat->obj_identity[uid]}});
    }
    std::sort(basis[uid].begin(), basis[uid].end());
  }
  site->basis = basis;
  site->topology = generate_topology(*cat, site->pullbacks, basis);
  return site;
}

SitePtr site_pt() {
  static SitePtr s = open_set_site({0u, 1u}, {"O", "P"}, true);
  return s;
}

SitePtr site_2() {
  static SitePtr s = open_set_site({0u, 1u, 2u, 3u}, {"O", "U1", "U2", "X"}, true);
  return s;
}

SitePtr site_triv() {
  static SitePtr s =
      open_set_site({0u, 1u, 2u, 3u}, {"O", "U1", "U2", "X"}, false);
  return s;
}

namespace {

// Constant-on-nonempty-opens pseudofunctor over an open-set site, with the
// fiber at the bottom object replaced by `at_bottom` and every restriction
// into the bottom collapsing through `collapse`.
PstackPtr glued_constant(const SitePtr& s, const CatPtr& fiber,
                         const CatPtr& at_bottom, const Functor& collapse,
                         const std::string& tag) {
  const FinCategory& c = s->c();
  ObjId bottom = kNone;
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    bool is_bottom = true;
    for (ObjId v = 0; v < c.n_obj() && is_bottom; ++v)
      if (c.hom(u, v).empty()) is_bottom = false;
    if (is_bottom) bottom = u;
  }
  if (bottom == kNone) throw Error("glued_constant: no bottom object");

  PseudofunctorBuilder b(s, tag);
  for (ObjId u = 0; u < c.n_obj(); ++u)
    b.fiber(u, u == bottom ? at_bottom : fiber);
  for (MorId f = 0; f < c.n_mor(); ++f) {
    ObjId v = c.mor_dom[f], u = c.mor_cod[f];
    if (v == bottom && u == bottom)
      b.restriction(f, identity_functor(at_bottom));
    else if (v == bottom)
      b.restriction(f, collapse);
    else
      b.restriction(f, identity_functor(fiber));
  }
  b.strict_coherence();
  return b.build();
}

}  // namespace

PstackPtr terminal_prestack_on(const SitePtr& s) {
  return terminal_prestack(s);
}

PstackPtr arrow_prestack(const SitePtr& s) {
  Functor collapse = constant_functor(walking_arrow(), terminal_category(), 0);
  return glued_constant(s, walking_arrow(), terminal_category(), collapse,
                        "Karrow");
}

PstackPtr iso_stack(const SitePtr& s) {
  Functor collapse = constant_functor(walking_iso(), terminal_category(), 0);
  return glued_constant(s, walking_iso(), terminal_category(), collapse,
                        "StkIso");
}

PstackPtr pair_presheaf(const SitePtr& s) {
  const FinCategory& c = s->c();
  CatPtr pair = parallel_pair();
  CatPtr arrow = walking_arrow();
  CatPtr term = terminal_category();

  // u, v : a -> b at the top collapse to the single arrow below it.
  Functor squash;
  squash.src = pair;
  squash.dst = arrow;
  squash.obj_map = {arrow->obj_index("x"), arrow->obj_index("y")};
  squash.mor_map.assign(pair->n_mor(), kNone);
  squash.mor_map[pair->mor_index("1a")] = arrow->mor_index("1x");
  squash.mor_map[pair->mor_index("1b")] = arrow->mor_index("1y");
  squash.mor_map[pair->mor_index("u")] = arrow->mor_index("u");
  squash.mor_map[pair->mor_index("v")] = arrow->mor_index("u");

  PseudofunctorBuilder b(s, "PshPair");
  ObjId top = kNone, bottom = kNone;
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    bool is_top = true, is_bottom = true;
    for (ObjId v = 0; v < c.n_obj(); ++v) {
      if (c.hom(v, u).empty()) is_top = false;
      if (c.hom(u, v).empty()) is_bottom = false;
    }
    if (is_top) top = u;
    if (is_bottom) bottom = u;
  }
  for (ObjId u = 0; u < c.n_obj(); ++u)
    b.fiber(u, u == top ? pair : (u == bottom ? term : arrow));
  for (MorId f = 0; f < c.n_mor(); ++f) {
    ObjId v = c.mor_dom[f], u = c.mor_cod[f];
    const CatPtr& from = (u == top) ? pair : (u == bottom ? term : arrow);
    const CatPtr& to = (v == top) ? pair : (v == bottom ? term : arrow);
    if (u == v) {
      b.restriction(f, identity_functor(to));
    } else if (v == bottom) {
      b.restriction(f, constant_functor(from, term, 0));
    } else if (u == top) {
      b.restriction(f, squash);
    } else {
      b.restriction(f, identity_functor(arrow));
    }
  }
  b.strict_coherence();
  return b.build();
}

PstackPtr twisted_bz2(const SitePtr& s) {
  const FinCategory& c = s->c();
  CatPtr fiber = bz2();
  MorId twist = fiber->mor_index("t");

  PseudofunctorBuilder b(s, "Twist");
  for (ObjId u = 0; u < c.n_obj(); ++u) b.fiber(u, fiber);
  for (MorId f = 0; f < c.n_mor(); ++f)
    b.restriction(f, identity_functor(fiber));
  b.strict_coherence();
  // One nontrivial composition coherence cell; with only two-step chains of
  // non-identity arrows in the lattice, any normalized assignment is coherent.
  MorId outer = kNone, inner = kNone;
  for (MorId f = 0; f < c.n_mor() && outer == kNone; ++f)
    for (MorId g = 0; g < c.n_mor(); ++g) {
      if (!c.composable(f, g)) continue;
      if (c.is_identity(f) || c.is_identity(g)) continue;
      outer = f;
      inner = g;
      break;
    }
  if (outer == kNone) throw Error("twisted_bz2: site has no two-step chain");
  b.phi_component(outer, inner, {twist});
  return b.build();
}

PstackPtr constant_discrete2(const SitePtr& s) {
  CatPtr fiber = discrete_category({"x", "y"});
  PseudofunctorBuilder b(s, "Const2");
  for (ObjId u = 0; u < s->c().n_obj(); ++u) b.fiber(u, fiber);
  for (MorId f = 0; f < s->c().n_mor(); ++f)
    b.restriction(f, identity_functor(fiber));
  b.strict_coherence();
  return b.build();
}

}  // namespace descente::fixtures
