#include "descente/factor.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace descente {

namespace {

std::string pad(size_t i, size_t width = 4) {
  std::string s = std::to_string(i);
  while (s.size() < width) s = "0" + s;
  return s;
}

size_t sieve_pos(const Sieve& sv, MorId m) {
  auto it = std::lower_bound(sv.arrows.begin(), sv.arrows.end(), m);
  if (it == sv.arrows.end() || *it != m)
    throw Error("path_object: arrow not in sieve");
  return static_cast<size_t>(it - sv.arrows.begin());
}

// All per-object data of one path-object fiber.
struct PathFiber {
  std::vector<Sieve> sieves;                    // covering sieves at u
  std::vector<DescentCategory> descent;         // Desc(f, sieve)
  std::vector<std::pair<size_t, ObjId>> objs;   // fiber object = (sieve, datum)
  struct Arrow {
    size_t from, to;   // indices into objs
    MorId rep;         // morphism of the intersection descent category
  };
  std::vector<Arrow> arrows;
  std::map<std::vector<MorId>, DescentCategory> cache;  // by sieve arrows

  const DescentCategory& meet(const PseudoNat& f, const Sieve& sv,
                              uint64_t bound) {
    auto it = cache.find(sv.arrows);
    if (it == cache.end())
      it = cache.emplace(sv.arrows,
                         build_descent_category(f, Cover::from_sieve(sv), bound))
               .first;
    return it->second;
  }
  size_t sieve_index(const Sieve& sv) const {
    for (size_t s = 0; s < sieves.size(); ++s)
      if (sieves[s] == sv) return s;
    throw Error("path_object: sieve is not a covering sieve of the fiber");
  }
  size_t obj_index(size_t sidx, ObjId o) const {
    for (size_t i = 0; i < objs.size(); ++i)
      if (objs[i] == std::make_pair(sidx, o)) return i;
    throw Error("path_object: unknown fiber object");
  }
};

// Unique extension of a descent morphism from a refinement W3 ⊆ W13 of the
// covering sieve W13 (separated hom presheaves make it unique).
MorId promote_morphism(const DescentCategory& coarse, ObjId from_id,
                       ObjId to_id, const DescentCategory& fine,
                       const Functor& restrict_fine, MorId fine_mor) {
  MorId found = kNone;
  for (MorId cand = 0; cand < coarse.cat->n_mor(); ++cand) {
    if (coarse.cat->mor_dom[cand] != from_id ||
        coarse.cat->mor_cod[cand] != to_id)
      continue;
    if (restrict_fine.mor_map[cand] == fine_mor) {
      if (found != kNone)
        throw Error("path_object: morphism promotion not unique");
      found = cand;
    }
  }
  if (found == kNone)
    throw Error("path_object: morphism promotion failed");
  return found;
}

}  // namespace

PathFactorization path_object_prestack(const PseudoNat& f, uint64_t bound) {
  const Pseudofunctor& A = *f.source;
  const Pseudofunctor& B = *f.target;
  const Site& site = *A.site;
  const FinCategory& c = site.c();

  {
    PrestackReport ra = is_prestack(A);
    if (!ra.ok) throw NotAPrestack("path_object_prestack: source: " + ra.witness);
    PrestackReport rb = is_prestack(B);
    if (!rb.ok) throw NotAPrestack("path_object_prestack: target: " + rb.witness);
  }

  auto P = std::make_shared<Pseudofunctor>();
  P->site = A.site;
  P->tag = "P(" + A.tag + ">" + B.tag + ")";
  P->fiber.resize(c.n_obj());
  std::vector<PathFiber> fibers(c.n_obj());

  // Fibers: objects and intersection-restricted arrows.
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    PathFiber& pf = fibers[u];
    pf.sieves = site.covering_sieves(u);
    if (pf.sieves.size() > 8)
      throw BoundExceeded("path_object_prestack: too many covering sieves");
    for (const Sieve& sv : pf.sieves)
      pf.descent.push_back(
          build_descent_category(f, Cover::from_sieve(sv), bound));
    for (size_t s = 0; s < pf.sieves.size(); ++s)
      for (ObjId o = 0; o < pf.descent[s].cat->n_obj(); ++o)
        pf.objs.emplace_back(s, o);

    CategoryBuilder bld;
    auto obj_name = [&](size_t idx) {
      return "S" + pad(fibers[u].objs[idx].first, 2) + "|" +
             pf.descent[pf.objs[idx].first].cat->obj_names[pf.objs[idx].second];
    };
    for (size_t i = 0; i < pf.objs.size(); ++i) bld.object(obj_name(i));

    // Arrows between (S, x) and (T, y): descent morphisms over S∩T.
    for (size_t x = 0; x < pf.objs.size(); ++x)
      for (size_t y = 0; y < pf.objs.size(); ++y) {
        const Sieve& sx = pf.sieves[pf.objs[x].first];
        const Sieve& sy = pf.sieves[pf.objs[y].first];
        Sieve w = sieve_intersection(sx, sy);
        const DescentCategory& dw = pf.meet(f, w, bound);
        Functor rx = restrict_to_subcover(pf.descent[pf.objs[x].first], dw);
        Functor ry = restrict_to_subcover(pf.descent[pf.objs[y].first], dw);
        ObjId xw = rx.obj_map[pf.objs[x].second];
        ObjId yw = ry.obj_map[pf.objs[y].second];
        for (MorId mu = 0; mu < dw.cat->n_mor(); ++mu)
          if (dw.cat->mor_dom[mu] == xw && dw.cat->mor_cod[mu] == yw)
            pf.arrows.push_back({x, y, mu});
      }
    for (size_t i = 0; i < pf.arrows.size(); ++i)
      bld.morphism("w" + pad(i) + ":" + pad(pf.arrows[i].from) + ">" +
                       pad(pf.arrows[i].to),
                   obj_name(pf.arrows[i].from), obj_name(pf.arrows[i].to));

    auto arrow_id = [&](size_t from, size_t to, MorId rep) {
      for (size_t i = 0; i < pf.arrows.size(); ++i)
        if (pf.arrows[i].from == from && pf.arrows[i].to == to &&
            pf.arrows[i].rep == rep)
          return "w" + pad(i) + ":" + pad(from) + ">" + pad(to);
      throw Error("path_object: arrow lookup failed");
    };

    // Identities: the identity representative over S∩S = S.
    for (size_t i = 0; i < pf.objs.size(); ++i) {
      const DescentCategory& ds = pf.descent[pf.objs[i].first];
      Sieve s_self = pf.sieves[pf.objs[i].first];
      const DescentCategory& dw = pf.meet(f, s_self, bound);
      Functor r = restrict_to_subcover(ds, dw);
      MorId rep = dw.cat->obj_identity[r.obj_map[pf.objs[i].second]];
      bld.identity(obj_name(i), arrow_id(i, i, rep));
    }
    // Composition: restrict both representatives to the triple meet, compose
    // there, and promote uniquely back to the pairwise meet.
    for (size_t m1 = 0; m1 < pf.arrows.size(); ++m1)
      for (size_t m2 = 0; m2 < pf.arrows.size(); ++m2) {
        if (pf.arrows[m2].from != pf.arrows[m1].to) continue;
        size_t xo = pf.arrows[m1].from;
        size_t yo = pf.arrows[m1].to;
        size_t zo = pf.arrows[m2].to;
        const Sieve& sx = pf.sieves[pf.objs[xo].first];
        const Sieve& sy = pf.sieves[pf.objs[yo].first];
        const Sieve& sz = pf.sieves[pf.objs[zo].first];
        Sieve w_xy = sieve_intersection(sx, sy);
        Sieve w_yz = sieve_intersection(sy, sz);
        Sieve w_xz = sieve_intersection(sx, sz);
        Sieve w3 = sieve_intersection(w_xy, sz);
        const DescentCategory& d_xy = pf.meet(f, w_xy, bound);
        const DescentCategory& d_yz = pf.meet(f, w_yz, bound);
        const DescentCategory& d_xz = pf.meet(f, w_xz, bound);
        const DescentCategory& d3 = pf.meet(f, w3, bound);
        Functor r_xy = restrict_to_subcover(d_xy, d3);
        Functor r_yz = restrict_to_subcover(d_yz, d3);
        Functor r_xz = restrict_to_subcover(d_xz, d3);
        MorId comp3 = d3.cat->compose(r_yz.mor_map[pf.arrows[m2].rep],
                                      r_xy.mor_map[pf.arrows[m1].rep]);
        Functor rx = restrict_to_subcover(pf.descent[pf.objs[xo].first], d_xz);
        Functor rz = restrict_to_subcover(pf.descent[pf.objs[zo].first], d_xz);
        MorId rep = promote_morphism(d_xz, rx.obj_map[pf.objs[xo].second],
                                     rz.obj_map[pf.objs[zo].second], d3, r_xz,
                                     comp3);
        bld.composite(arrow_id(yo, zo, pf.arrows[m2].rep),
                      arrow_id(xo, yo, pf.arrows[m1].rep),
                      arrow_id(xo, zo, rep));
      }
    P->fiber[u] = bld.build();
  }

  // Index helpers between the fiber categories and the side tables.
  auto fiber_obj = [&](ObjId u, size_t sidx, ObjId o) {
    return P->fiber[u]->obj_index(
        "S" + pad(sidx, 2) + "|" +
        fibers[u].descent[sidx].cat->obj_names[o]);
  };
  auto fiber_mor = [&](ObjId u, size_t from, size_t to, MorId rep) {
    const PathFiber& pf = fibers[u];
    for (size_t i = 0; i < pf.arrows.size(); ++i)
      if (pf.arrows[i].from == from && pf.arrows[i].to == to &&
          pf.arrows[i].rep == rep)
        return P->fiber[u]->mor_index("w" + pad(i) + ":" + pad(from) + ">" +
                                      pad(to));
    throw Error("path_object: fiber morphism lookup failed");
  };

  // Restrictions: pull back the cover and base-change the data.
  P->restriction.resize(c.n_mor());
  for (MorId g = 0; g < c.n_mor(); ++g) {
    ObjId u = c.mor_cod[g], v = c.mor_dom[g];
    PathFiber& pu = fibers[u];
    PathFiber& pv = fibers[v];
    Functor r;
    r.src = P->fiber[u];
    r.dst = P->fiber[v];
    r.obj_map.resize(P->fiber[u]->n_obj());
    r.mor_map.resize(P->fiber[u]->n_mor());

    std::vector<size_t> sieve_to(pu.sieves.size());
    std::vector<Functor> bc(pu.sieves.size());
    for (size_t s = 0; s < pu.sieves.size(); ++s) {
      Sieve pulled = pullback_sieve(site, g, pu.sieves[s]);
      sieve_to[s] = pv.sieve_index(pulled);
      bc[s] = base_change(pu.descent[s], g, pv.descent[sieve_to[s]]);
    }
    for (size_t i = 0; i < pu.objs.size(); ++i) {
      auto [s, o] = pu.objs[i];
      r.obj_map[fiber_obj(u, s, o)] =
          fiber_obj(v, sieve_to[s], bc[s].obj_map[o]);
    }
    for (size_t i = 0; i < pu.arrows.size(); ++i) {
      const PathFiber::Arrow& ar = pu.arrows[i];
      auto [sx, ox] = pu.objs[ar.from];
      auto [sy, oy] = pu.objs[ar.to];
      Sieve w = sieve_intersection(pu.sieves[sx], pu.sieves[sy]);
      Sieve pulled_w = pullback_sieve(site, g, w);
      const DescentCategory& dw = pu.meet(f, w, bound);
      const DescentCategory& dvw = pv.meet(f, pulled_w, bound);
      Functor bcw = base_change(dw, g, dvw);
      // The image representative lives over g*(S)∩g*(T) = g*(S∩T).
      size_t from_v = pv.obj_index(sieve_to[sx], bc[sx].obj_map[ox]);
      size_t to_v = pv.obj_index(sieve_to[sy], bc[sy].obj_map[oy]);
      r.mor_map[fiber_mor(u, ar.from, ar.to, ar.rep)] =
          fiber_mor(v, from_v, to_v, bcw.mor_map[ar.rep]);
    }
    P->restriction[g] = std::move(r);
  }

  // Coherence cells: base components are the coherences of B, sections are
  // identities (base change reindexes without moving the sections).
  P->upsilon.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    MorId one = c.obj_identity[u];
    PathFiber& pu = fibers[u];
    P->upsilon[u].resize(P->fiber[u]->n_obj());
    for (size_t i = 0; i < pu.objs.size(); ++i) {
      auto [s, o] = pu.objs[i];
      const DescentCategory& ds = pu.descent[s];
      const DescentObject& datum = ds.objects[o];
      // (υ^B(b), identities) : datum·1 -> datum over S.
      size_t source_idx = pu.obj_index(
          pu.sieve_index(pullback_sieve(site, one, pu.sieves[s])),
          base_change(ds, one, pu.descent[pu.sieve_index(pullback_sieve(
                                  site, one, pu.sieves[s]))])
              .obj_map[o]);
      DescentMorphism cell;
      cell.base = B.ups(u, datum.base);
      cell.section.resize(pu.sieves[s].arrows.size());
      for (size_t a = 0; a < pu.sieves[s].arrows.size(); ++a) {
        ObjId stage = c.mor_dom[pu.sieves[s].arrows[a]];
        cell.section[a] = A.fib(stage).obj_identity[datum.section[a]];
      }
      const DescentCategory& dw = pu.meet(f, pu.sieves[s], bound);
      Functor rs = restrict_to_subcover(ds, dw);
      MorId rep = dw.find_morphism(
          restrict_to_subcover(pu.descent[pu.objs[source_idx].first], dw)
              .obj_map[pu.objs[source_idx].second],
          rs.obj_map[o], cell);
      if (rep == kNone)
        throw Error("path_object: upsilon cell is not valid descent data");
      P->upsilon[u][fiber_obj(u, s, o)] =
          fiber_mor(u, source_idx, pu.obj_index(s, o), rep);
    }
  }
  for (MorId g = 0; g < c.n_mor(); ++g)
    for (MorId g2 = 0; g2 < c.n_mor(); ++g2) {
      if (!c.composable(g, g2)) continue;
      ObjId u = c.mor_cod[g], w_stage = c.mor_dom[g2];
      MorId gg = c.compose(g, g2);
      PathFiber& pu = fibers[u];
      PathFiber& pw = fibers[w_stage];
      std::vector<MorId> comps(P->fiber[u]->n_obj());
      for (size_t i = 0; i < pu.objs.size(); ++i) {
        auto [s, o] = pu.objs[i];
        Sieve pulled = pullback_sieve(site, gg, pu.sieves[s]);
        size_t sw = pw.sieve_index(pulled);
        const DescentCategory& dvw = pw.descent[sw];
        Functor bc_direct = base_change(pu.descent[s], gg, dvw);
        ObjId direct = bc_direct.obj_map[o];
        // Two-step base change lands on the same sieve.
        Sieve mid = pullback_sieve(site, g, pu.sieves[s]);
        ObjId v = c.mor_dom[g];
        size_t sv = fibers[v].sieve_index(mid);
        Functor bc1 = base_change(pu.descent[s], g, fibers[v].descent[sv]);
        Functor bc2 = base_change(fibers[v].descent[sv], g2, dvw);
        ObjId two_step = bc2.obj_map[bc1.obj_map[o]];

        DescentMorphism cell;
        cell.base = B.phi_at(g, g2, pu.descent[s].objects[o].base);
        cell.section.resize(pulled.arrows.size());
        for (size_t a = 0; a < pulled.arrows.size(); ++a) {
          ObjId stage = c.mor_dom[pulled.arrows[a]];
          cell.section[a] =
              A.fib(stage).obj_identity[dvw.objects[direct].section[a]];
        }
        MorId rep = dvw.find_morphism(direct, two_step, cell);
        if (rep == kNone)
          throw Error("path_object: phi cell is not valid descent data");
        comps[fiber_obj(u, s, o)] =
            fiber_mor(w_stage, pw.obj_index(sw, direct),
                      pw.obj_index(sw, two_step), rep);
      }
      P->phi[{g, g2}] = std::move(comps);
    }

  validate_pseudofunctor(*P).require("path_object_prestack");

  PathFactorization out;
  out.path = P;

  // q : P -> B projects onto the base; its coherence cells are identities.
  out.q.source = P;
  out.q.target = f.target;
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    PathFiber& pu = fibers[u];
    Functor qu;
    qu.src = P->fiber[u];
    qu.dst = B.fiber[u];
    qu.obj_map.resize(P->fiber[u]->n_obj());
    qu.mor_map.resize(P->fiber[u]->n_mor());
    for (size_t i = 0; i < pu.objs.size(); ++i) {
      auto [s, o] = pu.objs[i];
      qu.obj_map[fiber_obj(u, s, o)] = pu.descent[s].objects[o].base;
    }
    for (size_t i = 0; i < pu.arrows.size(); ++i) {
      const PathFiber::Arrow& ar = pu.arrows[i];
      auto [sx, ox] = pu.objs[ar.from];
      auto [sy, oy] = pu.objs[ar.to];
      Sieve w = sieve_intersection(pu.sieves[sx], pu.sieves[sy]);
      const DescentCategory& dw = pu.meet(f, w, bound);
      qu.mor_map[fiber_mor(u, ar.from, ar.to, ar.rep)] =
          dw.morphisms[ar.rep].base;
    }
    out.q.component.push_back(std::move(qu));
  }
  out.q.coherence.resize(c.n_mor());
  for (MorId g = 0; g < c.n_mor(); ++g) {
    ObjId u = c.mor_cod[g], v = c.mor_dom[g];
    out.q.coherence[g].resize(P->fiber[u]->n_obj());
    for (ObjId x = 0; x < P->fiber[u]->n_obj(); ++x)
      out.q.coherence[g][x] =
          B.fib(v).obj_identity[out.q.component[v].obj_map[P->rob(g, x)]];
  }
  validate_pseudonat(out.q).require("path_object_prestack: q");

  // eta : A -> P sends a to the maximal-sieve comparison datum.
  out.eta.source = f.source;
  out.eta.target = P;
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    PathFiber& pu = fibers[u];
    Sieve maximal = site.maximal_sieve(u);
    size_t smax = pu.sieve_index(maximal);
    const DescentCategory& dmax = pu.descent[smax];
    Cover cover = Cover::from_sieve(maximal);
    Functor eu;
    eu.src = A.fiber[u];
    eu.dst = P->fiber[u];
    eu.obj_map.resize(A.fib(u).n_obj());
    eu.mor_map.resize(A.fib(u).n_mor());
    for (ObjId a = 0; a < A.fib(u).n_obj(); ++a) {
      ObjId img = dmax.find_object(phi_object(f, cover, a));
      if (img == kNone)
        throw Error("path_object_prestack: eta image invalid");
      eu.obj_map[a] = fiber_obj(u, smax, img);
    }
    for (MorId m = 0; m < A.fib(u).n_mor(); ++m) {
      DescentMorphism pm = phi_morphism(f, cover, m);
      const DescentCategory& dw = pu.meet(f, maximal, bound);
      Functor r = restrict_to_subcover(dmax, dw);
      ObjId from_w =
          r.obj_map[dmax.find_object(phi_object(f, cover, A.fib(u).mor_dom[m]))];
      ObjId to_w =
          r.obj_map[dmax.find_object(phi_object(f, cover, A.fib(u).mor_cod[m]))];
      MorId rep = dw.find_morphism(from_w, to_w, pm);
      if (rep == kNone)
        throw Error("path_object_prestack: eta morphism image invalid");
      eu.mor_map[m] =
          fiber_mor(u, pu.obj_index(smax, dmax.find_object(phi_object(
                                               f, cover, A.fib(u).mor_dom[m]))),
                    pu.obj_index(smax, dmax.find_object(phi_object(
                                           f, cover, A.fib(u).mor_cod[m]))),
                    rep);
    }
    out.eta.component.push_back(std::move(eu));
  }
  out.eta.coherence.resize(c.n_mor());
  for (MorId g = 0; g < c.n_mor(); ++g) {
    ObjId u = c.mor_cod[g], v = c.mor_dom[g];
    PathFiber& pv = fibers[v];
    out.eta.coherence[g].resize(A.fib(u).n_obj());
    for (ObjId a = 0; a < A.fib(u).n_obj(); ++a) {
      // eta(a·g) -> eta(a)·g over the maximal sieve on v: base is the
      // coherence of f, sections compare a·g·w with a·(g∘w).
      Sieve maximal_v = site.maximal_sieve(v);
      size_t smax_v = pv.sieve_index(maximal_v);
      Cover cover_v = Cover::from_sieve(maximal_v);
      const DescentCategory& dv = pv.descent[smax_v];

      ObjId from_o = dv.find_object(phi_object(f, cover_v, A.rob(g, a)));
      // eta(a)·g : base-change of the maximal-sieve datum at u.
      Sieve maximal_u = site.maximal_sieve(u);
      size_t smax_u = fibers[u].sieve_index(maximal_u);
      size_t starget = pv.sieve_index(pullback_sieve(site, g, maximal_u));
      Functor bc = base_change(fibers[u].descent[smax_u], g,
                               pv.descent[starget]);
      ObjId to_o = bc.obj_map[fibers[u].descent[smax_u].find_object(
          phi_object(f, Cover::from_sieve(maximal_u), a))];
      DescentMorphism cell;
      cell.base = f.coherence[g][a];
      // Representative over maximal_v ∩ g*(maximal_u) = maximal_v.
      Sieve w = sieve_intersection(maximal_v, pv.sieves[starget]);
      const DescentCategory& dw = pv.meet(f, w, bound);
      cell.section.resize(w.arrows.size());
      for (size_t pos = 0; pos < w.arrows.size(); ++pos) {
        MorId warr = w.arrows[pos];
        cell.section[pos] = restriction_comparison(
            A, u, a, {g, warr}, {c.compose(g, warr)});
      }
      Functor rv = restrict_to_subcover(dv, dw);
      Functor rt = restrict_to_subcover(pv.descent[starget], dw);
      MorId rep =
          dw.find_morphism(rv.obj_map[from_o], rt.obj_map[to_o], cell);
      if (rep == kNone)
        throw Error("path_object_prestack: eta coherence invalid");
      out.eta.coherence[g][a] =
          fiber_mor(v, pv.obj_index(smax_v, from_o),
                    pv.obj_index(starget, to_o), rep);
    }
  }
  validate_pseudonat(out.eta).require("path_object_prestack: eta");

  PrestackReport pr = is_prestack(*P);
  if (!pr.ok)
    throw Error("path_object_prestack: result is not a prestack: " +
                pr.witness);
  return out;
}

FactorReport verify_factorization(const PseudoNat& f,
                                  const PathFactorization& pf, uint64_t bound) {
  FactorReport rep;
  PseudoNat composite = compose_pseudonat(pf.q, pf.eta);
  rep.strict_triangle = pseudonat_equal(composite, f);
  LweReport lw = is_lwe(pf.eta, bound);
  rep.eta_lwe = lw.ok;
  Judgment fib = is_local_fibration(pf.q, bound);
  rep.q_local_fibration = fib.ok;
  if (!rep.strict_triangle) rep.witness = "Q(f)∘eta differs from f";
  if (!rep.eta_lwe) rep.witness += " | eta: " + lw.witness;
  if (!rep.q_local_fibration) rep.witness += " | q: " + fib.witness;
  return rep;
}

Stackification stackify(const PstackPtr& a, uint64_t bound) {
  PathFactorization pf = path_object_prestack(to_terminal(a), bound);
  Judgment st = is_stack(pf.path, bound);
  if (!st.ok)
    throw Error("stackify: path object is not a stack: " + st.witness);
  return {pf.path, pf.eta};
}

Isocomma isocomma(const PseudoNat& f, const PseudoNat& g) {
  const Pseudofunctor& A = *f.source;
  const Pseudofunctor& C = *g.source;
  const Pseudofunctor& B = *f.target;
  const FinCategory& c = A.site->c();

  auto I = std::make_shared<Pseudofunctor>();
  I->site = A.site;
  I->tag = "(" + A.tag + "," + C.tag + ")";
  I->fiber.resize(c.n_obj());

  struct Obj {
    ObjId a, cc;
    MorId xi;
  };
  struct Mor {
    size_t from, to;
    MorId i, j;
  };
  std::vector<std::vector<Obj>> objs(c.n_obj());
  std::vector<std::vector<Mor>> mors(c.n_obj());

  for (ObjId u = 0; u < c.n_obj(); ++u) {
    const FinCategory& fa = A.fib(u);
    const FinCategory& fc = C.fib(u);
    const FinCategory& fb = B.fib(u);
    CategoryBuilder bld;
    auto oname = [&](const Obj& o) {
      return "(" + fa.obj_names[o.a] + "|" + fc.obj_names[o.cc] + "|" +
             fb.mor_names[o.xi] + ")";
    };
    for (ObjId a = 0; a < fa.n_obj(); ++a)
      for (ObjId cc = 0; cc < fc.n_obj(); ++cc)
        for (MorId xi : fb.hom(f.component[u].obj_map[a],
                               g.component[u].obj_map[cc]))
          if (inverse_of(fb, xi)) objs[u].push_back({a, cc, xi});
    for (const Obj& o : objs[u]) bld.object(oname(o));
    for (size_t x = 0; x < objs[u].size(); ++x)
      for (size_t y = 0; y < objs[u].size(); ++y) {
        for (MorId mi : fa.hom(objs[u][x].a, objs[u][y].a))
          for (MorId mj : fc.hom(objs[u][x].cc, objs[u][y].cc)) {
            // ζ∘f(i) = g(j)∘ξ
            if (fb.compose(objs[u][y].xi, f.component[u].mor_map[mi]) !=
                fb.compose(g.component[u].mor_map[mj], objs[u][x].xi))
              continue;
            mors[u].push_back({x, y, mi, mj});
          }
      }
    auto mname = [&](const Mor& m) {
      return fa.mor_names[m.i] + "|" + fc.mor_names[m.j] + ":" +
             oname(objs[u][m.from]) + ">" + oname(objs[u][m.to]);
    };
    for (const Mor& m : mors[u])
      bld.morphism(mname(m), oname(objs[u][m.from]), oname(objs[u][m.to]));
    for (size_t x = 0; x < objs[u].size(); ++x) {
      Mor id{x, x, fa.obj_identity[objs[u][x].a],
             fc.obj_identity[objs[u][x].cc]};
      bld.identity(oname(objs[u][x]), mname(id));
    }
    for (const Mor& m1 : mors[u])
      for (const Mor& m2 : mors[u]) {
        if (m2.from != m1.to) continue;
        Mor comp{m1.from, m2.to, fa.compose(m2.i, m1.i),
                 fc.compose(m2.j, m1.j)};
        bld.composite(mname(m2), mname(m1), mname(comp));
      }
    I->fiber[u] = bld.build();
  }

  auto obj_idx = [&](ObjId u, ObjId a, ObjId cc, MorId xi) {
    const FinCategory& fa = A.fib(u);
    const FinCategory& fc = C.fib(u);
    const FinCategory& fb = B.fib(u);
    return I->fiber[u]->obj_index("(" + fa.obj_names[a] + "|" +
                                  fc.obj_names[cc] + "|" + fb.mor_names[xi] +
                                  ")");
  };
  auto mor_idx = [&](ObjId u, const Obj& from, const Obj& to, MorId i,
                     MorId j) {
    const FinCategory& fa = A.fib(u);
    const FinCategory& fc = C.fib(u);
    const FinCategory& fb = B.fib(u);
    auto oname = [&](const Obj& o) {
      return "(" + fa.obj_names[o.a] + "|" + fc.obj_names[o.cc] + "|" +
             fb.mor_names[o.xi] + ")";
    };
    return I->fiber[u]->mor_index(fa.mor_names[i] + "|" + fc.mor_names[j] +
                                  ":" + oname(from) + ">" + oname(to));
  };

  // ξ restricted along h : f(a·h) -> f(a)·h -> g(c)·h -> g(c·h).
  auto restrict_xi = [&](MorId h, const Obj& o) {
    ObjId u = c.mor_cod[h], v = c.mor_dom[h];
    const FinCategory& fbv = B.fib(v);
    MorId step1 = f.coherence[h][o.a];
    MorId step2 = B.rmor(h, o.xi);
    MorId step3 = *inverse_of(fbv, g.coherence[h][o.cc]);
    (void)u;
    return fbv.compose(step3, fbv.compose(step2, step1));
  };

  I->restriction.resize(c.n_mor());
  for (MorId h = 0; h < c.n_mor(); ++h) {
    ObjId u = c.mor_cod[h], v = c.mor_dom[h];
    Functor r;
    r.src = I->fiber[u];
    r.dst = I->fiber[v];
    r.obj_map.resize(I->fiber[u]->n_obj());
    r.mor_map.resize(I->fiber[u]->n_mor());
    for (const Obj& o : objs[u])
      r.obj_map[obj_idx(u, o.a, o.cc, o.xi)] =
          obj_idx(v, A.rob(h, o.a), C.rob(h, o.cc), restrict_xi(h, o));
    for (const Mor& m : mors[u]) {
      const Obj& from = objs[u][m.from];
      const Obj& to = objs[u][m.to];
      Obj from_v{A.rob(h, from.a), C.rob(h, from.cc), restrict_xi(h, from)};
      Obj to_v{A.rob(h, to.a), C.rob(h, to.cc), restrict_xi(h, to)};
      r.mor_map[mor_idx(u, from, to, m.i, m.j)] =
          mor_idx(v, from_v, to_v, A.rmor(h, m.i), C.rmor(h, m.j));
    }
    I->restriction[h] = std::move(r);
  }
  I->upsilon.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    MorId one = c.obj_identity[u];
    I->upsilon[u].resize(I->fiber[u]->n_obj());
    for (const Obj& o : objs[u]) {
      Obj restricted{A.rob(one, o.a), C.rob(one, o.cc), restrict_xi(one, o)};
      I->upsilon[u][obj_idx(u, o.a, o.cc, o.xi)] =
          mor_idx(u, restricted, o, A.ups(u, o.a), C.ups(u, o.cc));
    }
  }
  for (MorId h = 0; h < c.n_mor(); ++h)
    for (MorId h2 = 0; h2 < c.n_mor(); ++h2) {
      if (!c.composable(h, h2)) continue;
      ObjId u = c.mor_cod[h], w = c.mor_dom[h2];
      MorId hh = c.compose(h, h2);
      std::vector<MorId> comps(I->fiber[u]->n_obj());
      for (const Obj& o : objs[u]) {
        Obj direct{A.rob(hh, o.a), C.rob(hh, o.cc), restrict_xi(hh, o)};
        Obj r1{A.rob(h, o.a), C.rob(h, o.cc), restrict_xi(h, o)};
        Obj two_step{A.rob(h2, r1.a), C.rob(h2, r1.cc), restrict_xi(h2, r1)};
        comps[obj_idx(u, o.a, o.cc, o.xi)] =
            mor_idx(w, direct, two_step, A.phi_at(h, h2, o.a),
                    C.phi_at(h, h2, o.cc));
      }
      I->phi[{h, h2}] = std::move(comps);
    }
  validate_pseudofunctor(*I).require("isocomma");

  Isocomma out;
  out.obj = I;
  for (int side = 0; side < 2; ++side) {
    PseudoNat proj;
    proj.source = I;
    proj.target = side == 0 ? f.source : g.source;
    for (ObjId u = 0; u < c.n_obj(); ++u) {
      Functor pf;
      pf.src = I->fiber[u];
      pf.dst = side == 0 ? A.fiber[u] : C.fiber[u];
      pf.obj_map.resize(I->fiber[u]->n_obj());
      pf.mor_map.resize(I->fiber[u]->n_mor());
      for (const Obj& o : objs[u])
        pf.obj_map[obj_idx(u, o.a, o.cc, o.xi)] = side == 0 ? o.a : o.cc;
      for (const Mor& m : mors[u])
        pf.mor_map[mor_idx(u, objs[u][m.from], objs[u][m.to], m.i, m.j)] =
            side == 0 ? m.i : m.j;
      proj.component.push_back(std::move(pf));
    }
    proj.coherence.resize(c.n_mor());
    for (MorId h = 0; h < c.n_mor(); ++h) {
      ObjId u = c.mor_cod[h], v = c.mor_dom[h];
      const Pseudofunctor& t = side == 0 ? A : C;
      proj.coherence[h].resize(I->fiber[u]->n_obj());
      for (ObjId x = 0; x < I->fiber[u]->n_obj(); ++x)
        proj.coherence[h][x] =
            t.fib(v).obj_identity[proj.component[v].obj_map[I->rob(h, x)]];
    }
    (side == 0 ? out.proj_a : out.proj_c) = std::move(proj);
  }
  validate_pseudonat(out.proj_a).require("isocomma: proj_a");
  validate_pseudonat(out.proj_c).require("isocomma: proj_c");

  out.chi.source = compose_pseudonat(f, out.proj_a);
  out.chi.target = compose_pseudonat(g, out.proj_c);
  out.chi.component.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    out.chi.component[u].resize(I->fiber[u]->n_obj());
    for (const Obj& o : objs[u])
      out.chi.component[u][obj_idx(u, o.a, o.cc, o.xi)] = o.xi;
  }
  validate_modification(out.chi).require("isocomma: chi");
  return out;
}

PseudoNat isocomma_mediator(const Isocomma& ic, const PseudoNat& za,
                            const PseudoNat& zc, const Modification& chi_prime) {
  const Pseudofunctor& Z = *za.source;
  const FinCategory& c = Z.site->c();
  const Pseudofunctor& I = *ic.obj;

  if (!modification_is_iso(chi_prime))
    throw Error("isocomma_mediator: chi' not invertible");

  PseudoNat z;
  z.source = za.source;
  z.target = ic.obj;
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    Functor zu;
    zu.src = Z.fiber[u];
    zu.dst = I.fiber[u];
    zu.obj_map.resize(Z.fib(u).n_obj());
    zu.mor_map.resize(Z.fib(u).n_mor());
    const FinCategory& fa = ic.proj_a.target->fib(u);
    const FinCategory& fc = ic.proj_c.target->fib(u);
    const FinCategory& fi = I.fib(u);
    for (ObjId x = 0; x < Z.fib(u).n_obj(); ++x) {
      std::string name = "(" + fa.obj_names[za.component[u].obj_map[x]] + "|" +
                         fc.obj_names[zc.component[u].obj_map[x]] + "|" +
                         ic.chi.source.target->fib(u)
                             .mor_names[chi_prime.component[u][x]] +
                         ")";
      ObjId img = fi.obj_index(name);
      if (img == kNone)
        throw Error("isocomma_mediator: cone object missing in the isocomma");
      zu.obj_map[x] = img;
    }
    for (MorId m = 0; m < Z.fib(u).n_mor(); ++m) {
      ObjId xo = Z.fib(u).mor_dom[m], yo = Z.fib(u).mor_cod[m];
      std::string from = fi.obj_names[zu.obj_map[xo]];
      std::string to = fi.obj_names[zu.obj_map[yo]];
      std::string name = fa.mor_names[za.component[u].mor_map[m]] + "|" +
                         fc.mor_names[zc.component[u].mor_map[m]] + ":" +
                         from + ">" + to;
      MorId img = fi.mor_index(name);
      if (img == kNone)
        throw Error("isocomma_mediator: cone morphism missing");
      zu.mor_map[m] = img;
    }
    z.component.push_back(std::move(zu));
  }
  z.coherence.resize(c.n_mor());
  for (MorId h = 0; h < c.n_mor(); ++h) {
    ObjId u = c.mor_cod[h], v = c.mor_dom[h];
    const FinCategory& fi = I.fib(v);
    const Pseudofunctor& Ap = *ic.proj_a.target;
    const Pseudofunctor& Cp = *ic.proj_c.target;
    z.coherence[h].resize(Z.fib(u).n_obj());
    for (ObjId x = 0; x < Z.fib(u).n_obj(); ++x) {
      ObjId from_o = z.component[v].obj_map[Z.rob(h, x)];
      ObjId to_o = I.rob(h, z.component[u].obj_map[x]);
      std::string name = Ap.fib(v).mor_names[za.coherence[h][x]] + "|" +
                         Cp.fib(v).mor_names[zc.coherence[h][x]] + ":" +
                         fi.obj_names[from_o] + ">" + fi.obj_names[to_o];
      MorId cell = fi.mor_index(name);
      if (cell == kNone)
        throw Error("isocomma_mediator: coherence cell missing");
      z.coherence[h][x] = cell;
    }
  }
  validate_pseudonat(z).require("isocomma_mediator");

  // chi∘z = chi' exactly.
  for (ObjId u = 0; u < c.n_obj(); ++u)
    for (ObjId x = 0; x < Z.fib(u).n_obj(); ++x)
      if (ic.chi.component[u][z.component[u].obj_map[x]] !=
          chi_prime.component[u][x])
        throw Error("isocomma_mediator: chi∘z differs from chi'");
  return z;
}

IsocommaFactorization factor_through_isocomma(const PseudoNat& f) {
  IsocommaFactorization out;
  PseudoNat id_b = identity_pseudonat(f.target);
  out.comma = isocomma(f, id_b);

  // chi' : f∘1_A => 1_B∘f with identity components.
  Modification chi_prime;
  chi_prime.source = compose_pseudonat(f, identity_pseudonat(f.source));
  chi_prime.target = compose_pseudonat(id_b, f);
  const FinCategory& c = f.source->site->c();
  chi_prime.component.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    chi_prime.component[u].resize(f.source->fib(u).n_obj());
    for (ObjId x = 0; x < f.source->fib(u).n_obj(); ++x)
      chi_prime.component[u][x] =
          f.target->fib(u).obj_identity[f.component[u].obj_map[x]];
  }
  out.i = isocomma_mediator(out.comma, identity_pseudonat(f.source), f,
                            chi_prime);
  out.p = out.comma.proj_c;
  if (!pseudonat_equal(compose_pseudonat(out.p, out.i), f))
    throw Error("factor_through_isocomma: p∘i differs from f");
  return out;
}

PathObject path_object(const PstackPtr& a, uint64_t bound) {
  Product aa = product(a, a);
  PseudoNat diag = diagonal(a, aa);
  PathFactorization pf = path_object_prestack(diag, bound);
  PathObject out;
  out.path = pf.path;
  out.d0 = compose_pseudonat(aa.proj1, pf.q);
  out.d1 = compose_pseudonat(aa.proj2, pf.q);
  out.eta = pf.eta;
  // d_i ∘ eta = proj_i ∘ (q∘eta) = proj_i ∘ diag = 1 strictly; failure here
  // would signal a coherence bug upstream.
  if (!pseudonat_equal(compose_pseudonat(out.d0, out.eta),
                       identity_pseudonat(a)) ||
      !pseudonat_equal(compose_pseudonat(out.d1, out.eta),
                       identity_pseudonat(a)))
    throw Error("path_object: d_i∘eta is not the identity");
  return out;
}

}  // namespace descente
