#include "descente/descent.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "descente/parallel.hpp"

namespace descente {

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ",";
    out += parts[i];
  }
  return out;
}

// Per-cover geometry: chosen pullbacks for every index pair and the mediator
// arrows from each triple overlap (U_ab x_U U_c) into the pairwise overlaps.
struct CoverGeometry {
  const Site& site;
  const Cover& cover;
  std::vector<ObjId> stage;       // dom(f_a)
  std::vector<Pullback> pair_pb;  // [a*k+b]
  struct Triple {
    ObjId apex;
    MorId to_ab, to_ac, to_bc;
    MorId r_a, r_b, r_c;
  };
  std::vector<Triple> triples;  // [(a*k+b)*k+c]

  CoverGeometry(const Site& s, const Cover& cv) : site(s), cover(cv) {
    const FinCategory& c = s.c();
    const size_t k = cv.size();
    stage.resize(k);
    for (size_t a = 0; a < k; ++a) stage[a] = c.mor_dom[cv.members[a]];
    pair_pb.resize(k * k);
    for (size_t a = 0; a < k; ++a)
      for (size_t b = 0; b < k; ++b)
        pair_pb[a * k + b] = s.pullbacks.at(cv.members[a], cv.members[b]);
    triples.resize(k * k * k);
    for (size_t a = 0; a < k; ++a)
      for (size_t b = 0; b < k; ++b) {
        const Pullback& ab = pair_pb[a * k + b];
        MorId leg = c.compose(cv.members[a], ab.p1);  // U_ab -> U
        for (size_t cc = 0; cc < k; ++cc) {
          Triple t;
          const Pullback& outer = s.pullbacks.at(leg, cv.members[cc]);
          t.apex = outer.apex;
          t.to_ab = outer.p1;
          t.r_a = c.compose(ab.p1, outer.p1);
          t.r_b = c.compose(ab.p2, outer.p1);
          t.r_c = outer.p2;
          t.to_ac = mediator(s, cv.members[a], cv.members[cc], t.r_a, t.r_c);
          t.to_bc = mediator(s, cv.members[b], cv.members[cc], t.r_b, t.r_c);
          triples[(a * k + b) * k + cc] = t;
        }
      }
  }
};

// Cocycle condition on the (a, b, c) face of the tuple.
bool cocycle_holds(const PseudoNat& p, const CoverGeometry& geo,
                   const DescentObject& obj, size_t a, size_t b, size_t c) {
  const Pseudofunctor& E = *p.source;
  const size_t k = geo.cover.size();
  const auto& t = geo.triples[(a * k + b) * k + c];
  const auto& ab = geo.pair_pb[a * k + b];
  const auto& ac = geo.pair_pb[a * k + c];
  const auto& bc = geo.pair_pb[b * k + c];
  const FinCategory& fib = E.fib(t.apex);

  MorId sigma_c = restriction_comparison(E, geo.stage[c], obj.section[c],
                                         {bc.p2, t.to_bc}, {ac.p2, t.to_ac});
  MorId theta_ac = E.rmor(t.to_ac, obj.theta_at(a, c));
  MorId sigma_a = restriction_comparison(E, geo.stage[a], obj.section[a],
                                         {ac.p1, t.to_ac}, {ab.p1, t.to_ab});
  MorId left = fib.compose(sigma_a, fib.compose(theta_ac, sigma_c));

  MorId theta_bc = E.rmor(t.to_bc, obj.theta_at(b, c));
  MorId sigma_b = restriction_comparison(E, geo.stage[b], obj.section[b],
                                         {bc.p1, t.to_bc}, {ab.p2, t.to_ab});
  MorId theta_ab = E.rmor(t.to_ab, obj.theta_at(a, b));
  MorId right = fib.compose(theta_ab, fib.compose(sigma_b, theta_bc));
  return left == right;
}

// p-compatibility of the (a, b) square.
bool p_compat_holds(const PseudoNat& p, const CoverGeometry& geo,
                    const DescentObject& obj, size_t a, size_t b) {
  const Pseudofunctor& E = *p.source;
  const Pseudofunctor& B = *p.target;
  const FinCategory& site_cat = E.site->c();
  const size_t k = geo.cover.size();
  const Pullback& pb = geo.pair_pb[a * k + b];
  ObjId overlap = site_cat.mor_dom[pb.p1];
  const FinCategory& fib = B.fib(overlap);
  MorId f_a = geo.cover.members[a], f_b = geo.cover.members[b];

  MorId lhs = fib.compose(
      restriction_comparison(B, geo.cover.apex, obj.base, {f_b, pb.p2},
                             {f_a, pb.p1}),
      fib.compose(B.rmor(pb.p2, obj.psi[b]),
                  p.coherence[pb.p2][obj.section[b]]));
  MorId rhs = fib.compose(
      B.rmor(pb.p1, obj.psi[a]),
      fib.compose(p.coherence[pb.p1][obj.section[a]],
                  p.component[overlap].mor_map[obj.theta_at(a, b)]));
  return lhs == rhs;
}

std::string encode_object(const PseudoNat& p, const Cover& cover,
                          const DescentObject& obj) {
  const Pseudofunctor& E = *p.source;
  const Pseudofunctor& B = *p.target;
  const FinCategory& c = E.site->c();
  std::vector<std::string> es, ps, ts;
  for (size_t a = 0; a < cover.size(); ++a) {
    ObjId v = c.mor_dom[cover.members[a]];
    es.push_back(E.fib(v).obj_names[obj.section[a]]);
    ps.push_back(B.fib(v).mor_names[obj.psi[a]]);
  }
  const size_t k = cover.size();
  for (size_t a = 0; a < k; ++a)
    for (size_t b = 0; b < k; ++b) {
      ObjId overlap =
          c.mor_dom[E.site->pullbacks.at(cover.members[a], cover.members[b]).p1];
      ts.push_back(E.fib(overlap).mor_names[obj.theta_at(a, b)]);
    }
  return "b=" + B.fib(cover.apex).obj_names[obj.base] + "|e=" + join(es) +
         "|p=" + join(ps) + "|t=" + join(ts);
}

}  // namespace

ObjId DescentCategory::find_object(const DescentObject& o) const {
  for (size_t i = 0; i < objects.size(); ++i)
    if (objects[i] == o) return static_cast<ObjId>(i);
  return kNone;
}

MorId DescentCategory::find_morphism(ObjId from_id, ObjId to_id,
                                     const DescentMorphism& m) const {
  for (MorId i = 0; i < cat->n_mor(); ++i)
    if (cat->mor_dom[i] == from_id && cat->mor_cod[i] == to_id &&
        morphisms[i] == m)
      return i;
  return kNone;
}

ValidationReport validate_descent_object(const PseudoNat& p, const Cover& cover,
                                         const DescentObject& obj) {
  ValidationReport report;
  const Pseudofunctor& E = *p.source;
  const Pseudofunctor& B = *p.target;
  const FinCategory& c = E.site->c();
  const size_t k = cover.size();
  if (obj.section.size() != k || obj.psi.size() != k ||
      obj.theta.size() != k * k) {
    report.add("shape", "section/psi/theta sizes do not match the cover");
    return report;
  }
  CoverGeometry geo(*E.site, cover);
  for (size_t a = 0; a < k; ++a) {
    ObjId v = geo.stage[a];
    const FinCategory& fib_b = B.fib(v);
    MorId psi = obj.psi[a];
    ObjId want_dom = p.component[v].obj_map[obj.section[a]];
    ObjId want_cod = B.rob(cover.members[a], obj.base);
    if (fib_b.mor_dom[psi] != want_dom || fib_b.mor_cod[psi] != want_cod)
      report.add("psi", "component " + std::to_string(a) + " mistyped");
    else if (!inverse_of(fib_b, psi))
      report.add("psi", "component " + std::to_string(a) + " not invertible");
  }
  for (size_t a = 0; a < k; ++a)
    for (size_t b = 0; b < k; ++b) {
      const Pullback& pb = geo.pair_pb[a * k + b];
      const FinCategory& fib = E.fib(c.mor_dom[pb.p1]);
      MorId th = obj.theta_at(a, b);
      ObjId want_dom = E.rob(pb.p2, obj.section[b]);
      ObjId want_cod = E.rob(pb.p1, obj.section[a]);
      if (fib.mor_dom[th] != want_dom || fib.mor_cod[th] != want_cod)
        report.add("theta", "cell (" + std::to_string(a) + "," +
                                std::to_string(b) + ") mistyped");
      else if (!inverse_of(fib, th))
        report.add("theta", "cell (" + std::to_string(a) + "," +
                                std::to_string(b) + ") not invertible");
      else if (a == b && !fib.is_identity(th))
        report.add("theta-diagonal", "cell " + std::to_string(a));
    }
  if (!report.ok()) return report;
  for (size_t a = 0; a < k; ++a)
    for (size_t b = 0; b < k; ++b) {
      if (!p_compat_holds(p, geo, obj, a, b))
        report.add("p-compatibility",
                   "(" + std::to_string(a) + "," + std::to_string(b) + ")");
      for (size_t cc = 0; cc < k; ++cc)
        if (!cocycle_holds(p, geo, obj, a, b, cc))
          report.add("cocycle", "(" + std::to_string(a) + "," +
                                    std::to_string(b) + "," +
                                    std::to_string(cc) + ")");
    }
  return report;
}

ValidationReport validate_descent_morphism(const PseudoNat& p,
                                           const Cover& cover,
                                           const DescentObject& from,
                                           const DescentObject& to,
                                           const DescentMorphism& m) {
  ValidationReport report;
  const Pseudofunctor& E = *p.source;
  const Pseudofunctor& B = *p.target;
  const FinCategory& c = E.site->c();
  const size_t k = cover.size();
  if (m.section.size() != k) {
    report.add("shape", "section count");
    return report;
  }
  const FinCategory& base_fib = B.fib(cover.apex);
  if (base_fib.mor_dom[m.base] != from.base ||
      base_fib.mor_cod[m.base] != to.base)
    report.add("base", "mistyped");
  for (size_t a = 0; a < k; ++a) {
    ObjId v = c.mor_dom[cover.members[a]];
    const FinCategory& fib = E.fib(v);
    if (fib.mor_dom[m.section[a]] != from.section[a] ||
        fib.mor_cod[m.section[a]] != to.section[a])
      report.add("section", std::to_string(a) + " mistyped");
  }
  if (!report.ok()) return report;

  // psi-compatibility: psi'_a ∘ p(g_a) = g|_a ∘ psi_a.
  for (size_t a = 0; a < k; ++a) {
    ObjId v = c.mor_dom[cover.members[a]];
    const FinCategory& fib = B.fib(v);
    MorId lhs = fib.compose(to.psi[a], p.component[v].mor_map[m.section[a]]);
    MorId rhs = fib.compose(B.rmor(cover.members[a], m.base), from.psi[a]);
    if (lhs != rhs) report.add("psi-compat", std::to_string(a));
  }
  // theta-compatibility: g_a|_ab ∘ theta_ab = theta'_ab ∘ g_b|_ab.
  for (size_t a = 0; a < k; ++a)
    for (size_t b = 0; b < k; ++b) {
      const Pullback& pb =
          E.site->pullbacks.at(cover.members[a], cover.members[b]);
      const FinCategory& fib = E.fib(c.mor_dom[pb.p1]);
      MorId lhs = fib.compose(E.rmor(pb.p1, m.section[a]), from.theta_at(a, b));
      MorId rhs = fib.compose(to.theta_at(a, b), E.rmor(pb.p2, m.section[b]));
      if (lhs != rhs)
        report.add("theta-compat",
                   "(" + std::to_string(a) + "," + std::to_string(b) + ")");
    }
  return report;
}

DescentCategory build_descent_category(const PseudoNat& p, const Cover& cover,
                                       uint64_t bound) {
  DescentCategory d;
  d.p = p;
  d.cover = cover;
  const Pseudofunctor& E = *p.source;
  const Pseudofunctor& B = *p.target;
  const FinCategory& c = E.site->c();
  const size_t k = cover.size();
  CoverGeometry geo(*E.site, cover);
  const FinCategory& base_fib = B.fib(cover.apex);
  uint64_t examined = 0;

  // Objects, block by block over (base, sections).
  for (ObjId b = 0; b < base_fib.n_obj(); ++b) {
    if (k == 0) {
      DescentObject obj;
      obj.base = b;
      d.objects.push_back(obj);
      continue;
    }
    bool stage_empty = false;
    for (size_t a = 0; a < k; ++a)
      if (E.fib(geo.stage[a]).n_obj() == 0) stage_empty = true;
    if (stage_empty) continue;
    std::vector<ObjId> section(k, 0);
    bool sections_done = false;
    while (!sections_done) {
      bool feasible = true;
      std::vector<std::vector<MorId>> psi_cand(k);
      for (size_t a = 0; a < k && feasible; ++a) {
        ObjId v = geo.stage[a];
        const FinCategory& fib = B.fib(v);
        for (MorId m : fib.hom(p.component[v].obj_map[section[a]],
                               B.rob(cover.members[a], b)))
          if (inverse_of(fib, m)) psi_cand[a].push_back(m);
        if (psi_cand[a].empty()) feasible = false;
      }
      std::vector<std::vector<MorId>> theta_cand(k * k);
      for (size_t a = 0; a < k && feasible; ++a)
        for (size_t b2 = 0; b2 < k && feasible; ++b2) {
          const Pullback& pb = geo.pair_pb[a * k + b2];
          const FinCategory& fib = E.fib(c.mor_dom[pb.p1]);
          ObjId dom = E.rob(pb.p2, section[b2]);
          ObjId cod = E.rob(pb.p1, section[a]);
          if (a == b2) {
            if (dom != cod)
              throw Error(
                  "build_descent_category: self-overlap projections disagree; "
                  "the diagonal theta has no identity reading");
            theta_cand[a * k + b2].push_back(fib.obj_identity[dom]);
          } else {
            for (MorId m : fib.hom(dom, cod))
              if (inverse_of(fib, m)) theta_cand[a * k + b2].push_back(m);
          }
          if (theta_cand[a * k + b2].empty()) feasible = false;
        }
      if (feasible) {
        std::vector<size_t> radix;
        for (size_t a = 0; a < k; ++a) radix.push_back(psi_cand[a].size());
        for (size_t cell = 0; cell < k * k; ++cell)
          radix.push_back(theta_cand[cell].size());
        uint64_t total = 1;
        for (size_t r : radix) {
          total *= r;
          if (total > bound)
            throw BoundExceeded("build_descent_category: objects");
        }
        examined += total;
        if (examined > bound)
          throw BoundExceeded("build_descent_category: objects");

        auto decode = [&](int64_t idx) {
          DescentObject obj;
          obj.base = b;
          obj.section = section;
          obj.psi.resize(k);
          obj.theta.resize(k * k);
          uint64_t rest = static_cast<uint64_t>(idx);
          for (size_t a = 0; a < k; ++a) {
            obj.psi[a] = psi_cand[a][rest % radix[a]];
            rest /= radix[a];
          }
          for (size_t cell = 0; cell < k * k; ++cell) {
            obj.theta[cell] = theta_cand[cell][rest % radix[k + cell]];
            rest /= radix[k + cell];
          }
          return obj;
        };
        std::vector<int64_t> hits =
            par::matching(static_cast<int64_t>(total), [&](int64_t idx) {
              DescentObject obj = decode(idx);
              for (size_t a = 0; a < k; ++a)
                for (size_t b2 = 0; b2 < k; ++b2) {
                  if (!p_compat_holds(p, geo, obj, a, b2)) return false;
                  for (size_t c2 = 0; c2 < k; ++c2)
                    if (!cocycle_holds(p, geo, obj, a, b2, c2)) return false;
                }
              return true;
            });
        for (int64_t idx : hits) d.objects.push_back(decode(idx));
      }
      size_t pos = 0;
      while (pos < k) {
        if (static_cast<int>(++section[pos]) < E.fib(geo.stage[pos]).n_obj())
          break;
        section[pos] = 0;
        ++pos;
      }
      if (pos == k) sections_done = true;
    }
  }

  // Canonical object order: lexicographic in the encoded names.
  {
    std::vector<std::string> names(d.objects.size());
    for (size_t i = 0; i < d.objects.size(); ++i)
      names[i] = encode_object(p, cover, d.objects[i]);
    std::vector<size_t> order(d.objects.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t x, size_t y) { return names[x] < names[y]; });
    std::vector<DescentObject> sorted;
    sorted.reserve(d.objects.size());
    for (size_t i : order) sorted.push_back(d.objects[i]);
    d.objects = std::move(sorted);
  }

  CategoryBuilder bld;
  for (size_t i = 0; i < d.objects.size(); ++i)
    bld.object(encode_object(p, cover, d.objects[i]));

  auto pad = [](size_t i) {
    std::string s = std::to_string(i);
    while (s.size() < 5) s = "0" + s;
    return s;
  };
  struct MorRec {
    size_t from, to;
    DescentMorphism m;
    std::string name;
  };
  std::vector<MorRec> mors;
  for (size_t x = 0; x < d.objects.size(); ++x)
    for (size_t y = 0; y < d.objects.size(); ++y) {
      const DescentObject& ox = d.objects[x];
      const DescentObject& oy = d.objects[y];
      std::vector<MorId> base_cand = base_fib.hom(ox.base, oy.base);
      if (base_cand.empty()) continue;
      std::vector<std::vector<MorId>> sec_cand(k);
      bool feasible = true;
      for (size_t a = 0; a < k && feasible; ++a) {
        sec_cand[a] = E.fib(geo.stage[a]).hom(ox.section[a], oy.section[a]);
        if (sec_cand[a].empty()) feasible = false;
      }
      if (!feasible) continue;
      uint64_t total = base_cand.size();
      for (size_t a = 0; a < k; ++a) {
        total *= sec_cand[a].size();
        if (total > bound)
          throw BoundExceeded("build_descent_category: morphisms");
      }
      examined += total;
      if (examined > bound)
        throw BoundExceeded("build_descent_category: morphisms");
      auto decode = [&](int64_t idx) {
        DescentMorphism m;
        uint64_t rest = static_cast<uint64_t>(idx);
        m.base = base_cand[rest % base_cand.size()];
        rest /= base_cand.size();
        m.section.resize(k);
        for (size_t a = 0; a < k; ++a) {
          m.section[a] = sec_cand[a][rest % sec_cand[a].size()];
          rest /= sec_cand[a].size();
        }
        return m;
      };
      std::vector<int64_t> hits =
          par::matching(static_cast<int64_t>(total), [&](int64_t idx) {
            return validate_descent_morphism(p, cover, ox, oy, decode(idx))
                .ok();
          });
      for (int64_t idx : hits) mors.push_back({x, y, decode(idx), ""});
    }
  for (size_t i = 0; i < mors.size(); ++i) {
    mors[i].name =
        "m" + pad(i) + "@" + pad(mors[i].from) + ">" + pad(mors[i].to);
    bld.morphism(mors[i].name, encode_object(p, cover, d.objects[mors[i].from]),
                 encode_object(p, cover, d.objects[mors[i].to]));
  }

  auto find_rec = [&](size_t from, size_t to,
                      const DescentMorphism& m) -> const MorRec* {
    for (const auto& r : mors)
      if (r.from == from && r.to == to && r.m == m) return &r;
    return nullptr;
  };
  for (size_t i = 0; i < d.objects.size(); ++i) {
    DescentMorphism id;
    id.base = base_fib.obj_identity[d.objects[i].base];
    id.section.resize(k);
    for (size_t a = 0; a < k; ++a)
      id.section[a] = E.fib(geo.stage[a]).obj_identity[d.objects[i].section[a]];
    const MorRec* rec = find_rec(i, i, id);
    if (!rec) throw Error("build_descent_category: identity morphism missing");
    bld.identity(encode_object(p, cover, d.objects[i]), rec->name);
  }
  for (const auto& m1 : mors)
    for (const auto& m2 : mors) {
      if (m2.from != m1.to) continue;
      DescentMorphism comp;
      comp.base = base_fib.compose(m2.m.base, m1.m.base);
      comp.section.resize(k);
      for (size_t a = 0; a < k; ++a)
        comp.section[a] =
            E.fib(geo.stage[a]).compose(m2.m.section[a], m1.m.section[a]);
      const MorRec* rec = find_rec(m1.from, m2.to, comp);
      if (!rec) throw Error("build_descent_category: composite missing");
      bld.composite(m2.name, m1.name, rec->name);
    }
  d.cat = bld.build();

  // Align the side tables with the built category's id order.
  {
    std::vector<DescentObject> objs_by_id(d.objects.size());
    for (size_t i = 0; i < d.objects.size(); ++i)
      objs_by_id[d.cat->obj_index(encode_object(p, cover, d.objects[i]))] =
          d.objects[i];
    std::vector<DescentMorphism> mors_by_id(mors.size());
    for (const auto& r : mors) mors_by_id[d.cat->mor_index(r.name)] = r.m;
    d.objects = std::move(objs_by_id);
    d.morphisms = std::move(mors_by_id);
  }

  d.projection.src = d.cat;
  d.projection.dst = B.fiber[cover.apex];
  d.projection.obj_map.resize(d.cat->n_obj());
  d.projection.mor_map.resize(d.cat->n_mor());
  for (ObjId i = 0; i < d.cat->n_obj(); ++i)
    d.projection.obj_map[i] = d.objects[i].base;
  for (MorId i = 0; i < d.cat->n_mor(); ++i)
    d.projection.mor_map[i] = d.morphisms[i].base;
  return d;
}

DescentObject phi_object(const PseudoNat& p, const Cover& cover, ObjId e) {
  const Pseudofunctor& E = *p.source;
  const size_t k = cover.size();
  DescentObject obj;
  obj.base = p.component[cover.apex].obj_map[e];
  obj.section.resize(k);
  obj.psi.resize(k);
  obj.theta.resize(k * k);
  for (size_t a = 0; a < k; ++a) {
    obj.section[a] = E.rob(cover.members[a], e);
    obj.psi[a] = p.coherence[cover.members[a]][e];
  }
  for (size_t a = 0; a < k; ++a)
    for (size_t b = 0; b < k; ++b) {
      const Pullback& pb =
          E.site->pullbacks.at(cover.members[a], cover.members[b]);
      obj.theta[a * k + b] =
          restriction_comparison(E, cover.apex, e, {cover.members[b], pb.p2},
                                 {cover.members[a], pb.p1});
    }
  return obj;
}

DescentMorphism phi_morphism(const PseudoNat& p, const Cover& cover, MorId m) {
  const Pseudofunctor& E = *p.source;
  const size_t k = cover.size();
  DescentMorphism out;
  out.base = p.component[cover.apex].mor_map[m];
  out.section.resize(k);
  for (size_t a = 0; a < k; ++a) out.section[a] = E.rmor(cover.members[a], m);
  return out;
}

Functor phi_functor(const DescentCategory& d) {
  const Pseudofunctor& E = *d.p.source;
  Functor f;
  f.src = E.fiber[d.cover.apex];
  f.dst = d.cat;
  f.obj_map.resize(f.src->n_obj());
  f.mor_map.resize(f.src->n_mor());
  for (ObjId e = 0; e < f.src->n_obj(); ++e) {
    ObjId image = d.find_object(phi_object(d.p, d.cover, e));
    if (image == kNone)
      throw Error("phi_functor: image of an object is not valid descent data");
    f.obj_map[e] = image;
  }
  for (MorId m = 0; m < f.src->n_mor(); ++m) {
    MorId image =
        d.find_morphism(f.obj_map[f.src->mor_dom[m]],
                        f.obj_map[f.src->mor_cod[m]], phi_morphism(d.p, d.cover, m));
    if (image == kNone)
      throw Error("phi_functor: image of a morphism is not valid descent data");
    f.mor_map[m] = image;
  }
  return f;
}

Functor pushforward_square(const DescentCategory& from,
                           const DescentCategory& to, const PseudoNat& h,
                           const PseudoNat& k_map, const Modification& gamma) {
  if (!(from.cover == to.cover))
    throw Error("pushforward_square: cover mismatch");
  const Cover& cover = from.cover;
  const size_t k = cover.size();
  const Pseudofunctor& A = *from.p.source;  // i : A -> C
  const Pseudofunctor& E = *to.p.source;    // p : E -> B
  const Pseudofunctor& B = *to.p.target;
  const FinCategory& site_cat = A.site->c();

  auto push_object = [&](const DescentObject& o) {
    DescentObject out;
    out.base = k_map.component[cover.apex].obj_map[o.base];
    out.section.resize(k);
    out.psi.resize(k);
    out.theta.resize(k * k);
    for (size_t a = 0; a < k; ++a) {
      ObjId v = site_cat.mor_dom[cover.members[a]];
      out.section[a] = h.component[v].obj_map[o.section[a]];
      const FinCategory& fib = B.fib(v);
      // gamma(a_α), then k(psi_α), then k's coherence cell.
      out.psi[a] =
          fib.compose(k_map.coherence[cover.members[a]][o.base],
                      fib.compose(k_map.component[v].mor_map[o.psi[a]],
                                  gamma.component[v][o.section[a]]));
    }
    for (size_t a = 0; a < k; ++a)
      for (size_t b = 0; b < k; ++b) {
        const Pullback& pb =
            A.site->pullbacks.at(cover.members[a], cover.members[b]);
        ObjId overlap = site_cat.mor_dom[pb.p1];
        const FinCategory& fib = E.fib(overlap);
        MorId in = *inverse_of(fib, h.coherence[pb.p2][o.section[b]]);
        MorId mid = h.component[overlap].mor_map[o.theta_at(a, b)];
        MorId outc = h.coherence[pb.p1][o.section[a]];
        out.theta[a * k + b] = fib.compose(outc, fib.compose(mid, in));
      }
    return out;
  };

  Functor f;
  f.src = from.cat;
  f.dst = to.cat;
  f.obj_map.resize(from.cat->n_obj());
  f.mor_map.resize(from.cat->n_mor());
  for (ObjId x = 0; x < from.cat->n_obj(); ++x) {
    ObjId image = to.find_object(push_object(from.objects[x]));
    if (image == kNone)
      throw Error("pushforward_square: image object is not valid descent data");
    f.obj_map[x] = image;
  }
  for (MorId m = 0; m < from.cat->n_mor(); ++m) {
    DescentMorphism out;
    out.base = k_map.component[cover.apex].mor_map[from.morphisms[m].base];
    out.section.resize(k);
    for (size_t a = 0; a < k; ++a) {
      ObjId v = site_cat.mor_dom[cover.members[a]];
      out.section[a] = h.component[v].mor_map[from.morphisms[m].section[a]];
    }
    MorId image = to.find_morphism(f.obj_map[from.cat->mor_dom[m]],
                                   f.obj_map[from.cat->mor_cod[m]], out);
    if (image == kNone)
      throw Error("pushforward_square: image morphism invalid");
    f.mor_map[m] = image;
  }
  return f;
}

NatTrans gamma_hat(const DescentCategory& from, const DescentCategory& to,
                   const PseudoNat& h, const PseudoNat& k_map,
                   const Modification& gamma) {
  const Cover& cover = from.cover;
  const size_t k = cover.size();
  const Pseudofunctor& A = *from.p.source;
  const Pseudofunctor& E = *to.p.source;
  const FinCategory& site_cat = A.site->c();
  ObjId u = cover.apex;

  Functor phi_from = phi_functor(from);
  Functor phi_to = phi_functor(to);
  Functor push = pushforward_square(from, to, h, k_map, gamma);

  NatTrans n;
  n.source = compose(phi_to, h.component[u]);
  n.target = compose(push, phi_from);
  n.component.resize(A.fib(u).n_obj());
  for (ObjId a = 0; a < A.fib(u).n_obj(); ++a) {
    DescentMorphism cell;
    cell.base = gamma.component[u][a];
    cell.section.resize(k);
    for (size_t idx = 0; idx < k; ++idx) {
      const FinCategory& fib = E.fib(site_cat.mor_dom[cover.members[idx]]);
      cell.section[idx] = *inverse_of(fib, h.coherence[cover.members[idx]][a]);
    }
    MorId image =
        to.find_morphism(n.source.obj_map[a], n.target.obj_map[a], cell);
    if (image == kNone)
      throw Error("gamma_hat: component is not a valid descent morphism");
    n.component[a] = image;
  }
  return n;
}

Functor restrict_to_subcover(const DescentCategory& from,
                             const DescentCategory& to) {
  const size_t k_to = to.cover.size();
  std::vector<size_t> reindex(k_to);
  for (size_t a = 0; a < k_to; ++a) {
    auto it = std::find(from.cover.members.begin(), from.cover.members.end(),
                        to.cover.members[a]);
    if (it == from.cover.members.end())
      throw Error("restrict_to_subcover: target cover is not a subcover");
    reindex[a] = static_cast<size_t>(it - from.cover.members.begin());
  }
  const size_t k_from = from.cover.size();

  Functor f;
  f.src = from.cat;
  f.dst = to.cat;
  f.obj_map.resize(from.cat->n_obj());
  f.mor_map.resize(from.cat->n_mor());
  for (ObjId x = 0; x < from.cat->n_obj(); ++x) {
    const DescentObject& o = from.objects[x];
    DescentObject out;
    out.base = o.base;
    out.section.resize(k_to);
    out.psi.resize(k_to);
    out.theta.resize(k_to * k_to);
    for (size_t a = 0; a < k_to; ++a) {
      out.section[a] = o.section[reindex[a]];
      out.psi[a] = o.psi[reindex[a]];
      for (size_t b = 0; b < k_to; ++b)
        out.theta[a * k_to + b] = o.theta[reindex[a] * k_from + reindex[b]];
    }
    ObjId image = to.find_object(out);
    if (image == kNone) throw Error("restrict_to_subcover: image missing");
    f.obj_map[x] = image;
  }
  for (MorId m = 0; m < from.cat->n_mor(); ++m) {
    const DescentMorphism& mm = from.morphisms[m];
    DescentMorphism out;
    out.base = mm.base;
    out.section.resize(k_to);
    for (size_t a = 0; a < k_to; ++a) out.section[a] = mm.section[reindex[a]];
    MorId image = to.find_morphism(f.obj_map[from.cat->mor_dom[m]],
                                   f.obj_map[from.cat->mor_cod[m]], out);
    if (image == kNone) throw Error("restrict_to_subcover: morphism missing");
    f.mor_map[m] = image;
  }
  return f;
}

Cover pullback_cover(const Site& s, MorId g, const Cover& cover) {
  const FinCategory& c = s.c();
  Cover out;
  out.apex = c.mor_dom[g];
  for (MorId f = 0; f < c.n_mor(); ++f) {
    if (c.mor_cod[f] != out.apex) continue;
    MorId gf = c.compose(g, f);
    if (std::find(cover.members.begin(), cover.members.end(), gf) !=
        cover.members.end())
      out.members.push_back(f);
  }
  return out;
}

Functor base_change(const DescentCategory& from, MorId g,
                    const DescentCategory& to) {
  const Pseudofunctor& E = *from.p.source;
  const Pseudofunctor& B = *from.p.target;
  const Site& site = *E.site;
  const FinCategory& c = site.c();
  const Cover& S = from.cover;
  const Cover& V = to.cover;  // g*(S)
  const size_t kv = V.size();
  ObjId u = S.apex;

  // Member f of g*(S) corresponds to g∘f in S.
  std::vector<size_t> s_index(kv);
  for (size_t a = 0; a < kv; ++a) {
    MorId gf = c.compose(g, V.members[a]);
    auto it = std::find(S.members.begin(), S.members.end(), gf);
    if (it == S.members.end())
      throw Error("base_change: target cover is not the pullback cover");
    s_index[a] = static_cast<size_t>(it - S.members.begin());
  }

  auto push_object = [&](const DescentObject& o) {
    DescentObject out;
    out.base = B.rob(g, o.base);
    out.section.resize(kv);
    out.psi.resize(kv);
    out.theta.resize(kv * kv);
    for (size_t a = 0; a < kv; ++a) {
      size_t sa = s_index[a];
      out.section[a] = o.section[sa];
      ObjId w = c.mor_dom[V.members[a]];
      const FinCategory& fib = B.fib(w);
      // psi, then the comparison  b·(g∘f) -> (b·g)·f.
      out.psi[a] = fib.compose(
          restriction_comparison(B, u, o.base, {S.members[sa]},
                                 {g, V.members[a]}),
          o.psi[sa]);
    }
    for (size_t a = 0; a < kv; ++a)
      for (size_t b = 0; b < kv; ++b) {
        size_t sa = s_index[a], sb = s_index[b];
        const Pullback& pbv = site.pullbacks.at(V.members[a], V.members[b]);
        const Pullback& pbu = site.pullbacks.at(S.members[sa], S.members[sb]);
        const FinCategory& fib = E.fib(c.mor_dom[pbv.p1]);
        MorId med =
            mediator(site, S.members[sa], S.members[sb], pbv.p1, pbv.p2);
        MorId into =
            restriction_comparison(E, c.mor_dom[S.members[sb]], o.section[sb],
                                   {pbv.p2}, {pbu.p2, med});
        MorId mid = E.rmor(med, o.theta_at(sa, sb));
        MorId back =
            restriction_comparison(E, c.mor_dom[S.members[sa]], o.section[sa],
                                   {pbu.p1, med}, {pbv.p1});
        out.theta[a * kv + b] = fib.compose(back, fib.compose(mid, into));
      }
    return out;
  };

  Functor f;
  f.src = from.cat;
  f.dst = to.cat;
  f.obj_map.resize(from.cat->n_obj());
  f.mor_map.resize(from.cat->n_mor());
  for (ObjId x = 0; x < from.cat->n_obj(); ++x) {
    ObjId image = to.find_object(push_object(from.objects[x]));
    if (image == kNone) throw Error("base_change: image object missing");
    f.obj_map[x] = image;
  }
  for (MorId m = 0; m < from.cat->n_mor(); ++m) {
    const DescentMorphism& mm = from.morphisms[m];
    DescentMorphism out;
    out.base = B.rmor(g, mm.base);
    out.section.resize(kv);
    for (size_t a = 0; a < kv; ++a) out.section[a] = mm.section[s_index[a]];
    MorId image = to.find_morphism(f.obj_map[from.cat->mor_dom[m]],
                                   f.obj_map[from.cat->mor_cod[m]], out);
    if (image == kNone) throw Error("base_change: image morphism missing");
    f.mor_map[m] = image;
  }
  return f;
}

Judgment is_stack(const PstackPtr& f, uint64_t bound) {
  return is_local_fibration(to_terminal(f), bound, false);
}

Judgment is_local_fibration(const PseudoNat& p, uint64_t bound,
                            bool sieve_mode) {
  const Site& site = *p.source->site;
  const FinCategory& c = site.c();
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    std::vector<Cover> covers;
    if (sieve_mode) {
      for (const Sieve& s : site.covering_sieves(u))
        covers.push_back(Cover::from_sieve(s));
    } else {
      for (const CoverFamily& fam : site.basis_families(u))
        covers.push_back(Cover::from_family(fam));
    }
    for (const Cover& cover : covers) {
      DescentCategory d = build_descent_category(p, cover, bound);
      EquivalenceReport rep = check_equivalence(phi_functor(d));
      if (!rep.is_equivalence()) {
        Judgment j;
        j.ok = false;
        std::ostringstream os;
        os << "Phi not an equivalence at U=" << c.obj_names[u] << " cover {";
        for (size_t i = 0; i < cover.members.size(); ++i)
          os << (i ? "," : "") << c.mor_names[cover.members[i]];
        os << "}: " << rep.summary();
        j.witness = os.str();
        return j;
      }
    }
  }
  return {};
}

LweReport is_lwe(const PseudoNat& h, uint64_t bound) {
  LweReport rep;
  const Pseudofunctor& A = *h.source;
  const Pseudofunctor& B = *h.target;
  const Site& site = *A.site;
  const FinCategory& c = site.c();

  for (ObjId u = 0; u < c.n_obj(); ++u) {
    EquivalenceReport er = check_equivalence(h.component[u]);
    if (!er.full && rep.full) {
      rep.full = false;
      rep.witness = "not full at " + c.obj_names[u] + ": " + er.full_witness;
    }
    if (!er.faithful && rep.faithful) {
      rep.faithful = false;
      if (rep.witness.empty())
        rep.witness =
            "not faithful at " + c.obj_names[u] + ": " + er.faithful_witness;
    }
  }

  for (ObjId u = 0; u < c.n_obj() && rep.locally_ess_surjective; ++u) {
    for (ObjId b = 0; b < B.fib(u).n_obj(); ++b) {
      bool found_cover = false;
      for (const CoverFamily& fam : site.basis_families(u)) {
        bool all_members = true;
        for (MorId f : fam.members) {
          ObjId v = c.mor_dom[f];
          bool found = false;
          for (ObjId cand = 0; cand < A.fib(v).n_obj() && !found; ++cand)
            for (MorId iso :
                 B.fib(v).hom(h.component[v].obj_map[cand], B.rob(f, b)))
              if (inverse_of(B.fib(v), iso)) {
                found = true;
                break;
              }
          if (!found) {
            all_members = false;
            break;
          }
        }
        if (all_members) {
          found_cover = true;
          break;
        }
      }
      if (!found_cover) {
        rep.locally_ess_surjective = false;
        if (rep.witness.empty())
          rep.witness = "no cover with local preimages for " +
                        B.fib(u).obj_names[b] + " at " + c.obj_names[u];
        break;
      }
    }
  }
  (void)bound;
  rep.ok = rep.full && rep.faithful && rep.locally_ess_surjective;
  return rep;
}

LweDescent descent_from_lwe(const PseudoNat& i, ObjId u, ObjId c_obj,
                            uint64_t bound) {
  const Pseudofunctor& A = *i.source;
  const Pseudofunctor& C = *i.target;
  const Site& site = *A.site;
  const FinCategory& c = site.c();

  LweReport lwe = is_lwe(i, bound);
  if (!lwe.ok) throw NotLWE("descent_from_lwe: " + lwe.witness);

  // First basis family admitting local preimages of c_obj, with the first
  // (object, iso) pair per member.
  std::vector<MorId> fam_members;
  std::vector<ObjId> tilde;
  std::vector<MorId> psi;
  bool found_cover = false;
  for (const CoverFamily& fam : site.basis_families(u)) {
    fam_members = fam.members;
    tilde.assign(fam.members.size(), kNone);
    psi.assign(fam.members.size(), kNone);
    bool ok = true;
    for (size_t a = 0; a < fam.members.size() && ok; ++a) {
      MorId f = fam.members[a];
      ObjId v = c.mor_dom[f];
      for (ObjId cand = 0; cand < A.fib(v).n_obj() && tilde[a] == kNone; ++cand)
        for (MorId iso :
             C.fib(v).hom(i.component[v].obj_map[cand], C.rob(f, c_obj)))
          if (inverse_of(C.fib(v), iso)) {
            tilde[a] = cand;
            psi[a] = iso;
            break;
          }
      if (tilde[a] == kNone) ok = false;
    }
    if (ok) {
      found_cover = true;
      break;
    }
  }
  if (!found_cover)
    throw NotLWE("descent_from_lwe: no basis cover admits local preimages");

  LweDescent out;
  out.cover = generate_sieve(c, u, fam_members);
  const std::vector<MorId>& members = out.cover.arrows;
  const size_t k = members.size();
  out.obj.base = c_obj;
  out.obj.section.resize(k);
  out.obj.psi.resize(k);
  out.obj.theta.assign(k * k, kNone);

  // Extend the family data to the generated sieve along the first
  // factorization f = f_a ∘ w in canonical order.
  for (size_t idx = 0; idx < k; ++idx) {
    MorId f = members[idx];
    ObjId w_stage = c.mor_dom[f];
    bool set = false;
    for (size_t a = 0; a < fam_members.size() && !set; ++a) {
      ObjId va = c.mor_dom[fam_members[a]];
      for (MorId w : c.hom(w_stage, va)) {
        if (c.compose(fam_members[a], w) != f) continue;
        out.obj.section[idx] = A.rob(w, tilde[a]);
        const FinCategory& fib = C.fib(w_stage);
        MorId coh = i.coherence[w][tilde[a]];
        MorId moved = C.rmor(w, psi[a]);
        MorId cmp =
            restriction_comparison(C, u, c_obj, {fam_members[a], w}, {f});
        out.obj.psi[idx] = fib.compose(cmp, fib.compose(moved, coh));
        set = true;
        break;
      }
    }
    if (!set) throw Error("descent_from_lwe: sieve member does not factor");
  }

  // Theta cells via the canonical lift of the five-arrow composite.
  for (size_t a = 0; a < k; ++a)
    for (size_t b = 0; b < k; ++b) {
      const Pullback& pb = site.pullbacks.at(members[a], members[b]);
      ObjId overlap = c.mor_dom[pb.p1];
      const FinCategory& fib = C.fib(overlap);
      if (a == b) {
        out.obj.theta[a * k + b] =
            A.fib(overlap).obj_identity[A.rob(pb.p1, out.obj.section[a])];
        continue;
      }
      MorId step1 = i.coherence[pb.p2][out.obj.section[b]];
      MorId step2 = C.rmor(pb.p2, out.obj.psi[b]);
      MorId step3 = restriction_comparison(C, u, c_obj, {members[b], pb.p2},
                                           {members[a], pb.p1});
      MorId step4 = C.rmor(pb.p1, *inverse_of(fib, out.obj.psi[a]));
      MorId step5 = *inverse_of(fib, i.coherence[pb.p1][out.obj.section[a]]);
      MorId composite = fib.compose(
          step5,
          fib.compose(step4, fib.compose(step3, fib.compose(step2, step1))));
      out.obj.theta[a * k + b] =
          canonical_lift(i.component[overlap], A.rob(pb.p2, out.obj.section[b]),
                         A.rob(pb.p1, out.obj.section[a]), composite);
    }

  validate_descent_object(i, Cover::from_sieve(out.cover), out.obj)
      .require("descent_from_lwe");
  return out;
}

Amalgamation amalgamate(const DescentCategory& d, const DescentObject& obj) {
  ObjId target = d.find_object(obj);
  if (target == kNone)
    throw Error("amalgamate: datum is not an object of the descent category");
  const Pseudofunctor& E = *d.p.source;
  const FinCategory& fib = E.fib(d.cover.apex);

  // Exact preimages first.
  for (ObjId e = 0; e < fib.n_obj(); ++e)
    if (phi_object(d.p, d.cover, e) == obj) {
      Amalgamation out;
      out.object = e;
      out.phi_image = target;
      out.iso = d.cat->obj_identity[target];
      return out;
    }
  for (ObjId e = 0; e < fib.n_obj(); ++e) {
    ObjId x = d.find_object(phi_object(d.p, d.cover, e));
    if (x == kNone) continue;
    for (MorId m : d.cat->hom(x, target))
      if (inverse_of(*d.cat, m)) {
        Amalgamation out;
        out.object = e;
        out.phi_image = x;
        out.iso = m;
        return out;
      }
  }
  throw NoAmalgamation("amalgamate: no object maps onto the datum");
}

}  // namespace descente
