#include "descente/pstack.hpp"

#include <algorithm>
#include <sstream>

#include "descente/parallel.hpp"

namespace descente {

namespace {

bool same_cat(const CatPtr& a, const CatPtr& b) {
  return a == b || *a == *b;
}

std::string obj_label(const FinCategory& c, ObjId o) { return c.obj_names[o]; }

}  // namespace

MorId Pseudofunctor::phi_at(MorId f, MorId g, ObjId x) const {
  auto it = phi.find({f, g});
  if (it == phi.end())
    throw Error("Pseudofunctor: missing phi cell (" +
                site->c().mor_names[f] + ", " + site->c().mor_names[g] + ")");
  return it->second[x];
}

ObjId Pseudofunctor::rob_path(const std::vector<MorId>& path, ObjId x) const {
  ObjId acc = x;
  for (MorId f : path) acc = rob(f, acc);
  return acc;
}

PseudofunctorBuilder::PseudofunctorBuilder(SitePtr site, std::string tag) {
  p_ = std::make_shared<Pseudofunctor>();
  p_->site = std::move(site);
  p_->tag = std::move(tag);
  p_->fiber.resize(p_->site->c().n_obj());
  p_->restriction.resize(p_->site->c().n_mor());
  p_->upsilon.resize(p_->site->c().n_obj());
}

PseudofunctorBuilder& PseudofunctorBuilder::fiber(ObjId u, CatPtr cat) {
  p_->fiber[u] = std::move(cat);
  return *this;
}

PseudofunctorBuilder& PseudofunctorBuilder::restriction(MorId f, Functor fun) {
  p_->restriction[f] = std::move(fun);
  return *this;
}

PseudofunctorBuilder& PseudofunctorBuilder::strict_coherence() {
  strict_requested_ = true;
  return *this;
}

PseudofunctorBuilder& PseudofunctorBuilder::upsilon_component(
    ObjId u, std::vector<MorId> comps) {
  p_->upsilon[u] = std::move(comps);
  return *this;
}

PseudofunctorBuilder& PseudofunctorBuilder::phi_component(
    MorId f, MorId g, std::vector<MorId> comps) {
  p_->phi[{f, g}] = std::move(comps);
  return *this;
}

PstackPtr PseudofunctorBuilder::build() {
  const FinCategory& c = p_->site->c();
  if (strict_requested_) {
    for (ObjId u = 0; u < c.n_obj(); ++u) {
      if (!p_->upsilon[u].empty()) continue;
      const Functor& idres = p_->restriction[c.obj_identity[u]];
      std::vector<MorId> comps(p_->fiber[u]->n_obj());
      for (ObjId x = 0; x < p_->fiber[u]->n_obj(); ++x) {
        if (idres.obj_map[x] != x)
          throw Error("strict_coherence: F(1) is not the identity functor");
        comps[x] = p_->fiber[u]->obj_identity[x];
      }
      p_->upsilon[u] = std::move(comps);
    }
    for (MorId f = 0; f < c.n_mor(); ++f)
      for (MorId g = 0; g < c.n_mor(); ++g) {
        if (!c.composable(f, g)) continue;
        if (p_->phi.count({f, g})) continue;
        MorId fg = c.compose(f, g);
        const Functor& direct = p_->restriction[fg];
        const Functor& two_step =
            compose(p_->restriction[g], p_->restriction[f]);
        if (!(direct.obj_map == two_step.obj_map &&
              direct.mor_map == two_step.mor_map))
          throw Error("strict_coherence: restrictions are not strictly functorial");
        ObjId w = c.mor_dom[g];
        std::vector<MorId> comps(p_->fiber[c.mor_cod[f]]->n_obj());
        for (ObjId x = 0; x < p_->fiber[c.mor_cod[f]]->n_obj(); ++x)
          comps[x] = p_->fiber[w]->obj_identity[direct.obj_map[x]];
        p_->phi[{f, g}] = std::move(comps);
      }
  }
  validate_pseudofunctor(*p_).require("PseudofunctorBuilder(" + p_->tag + ")");
  return p_;
}

ValidationReport validate_pseudofunctor(const Pseudofunctor& F) {
  ValidationReport report;
  const FinCategory& c = F.site->c();
  if (F.fiber.size() != static_cast<size_t>(c.n_obj()) ||
      F.restriction.size() != static_cast<size_t>(c.n_mor()) ||
      F.upsilon.size() != static_cast<size_t>(c.n_obj())) {
    report.add("shape", "table sizes do not match the site");
    return report;
  }
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    if (!F.fiber[u]) {
      report.add("fiber", "missing fiber at " + c.obj_names[u]);
      return report;
    }
  }
  for (MorId f = 0; f < c.n_mor(); ++f) {
    const Functor& r = F.restriction[f];
    if (!r.src || !same_cat(r.src, F.fiber[c.mor_cod[f]]) ||
        !same_cat(r.dst, F.fiber[c.mor_dom[f]])) {
      report.add("restriction", "functor for " + c.mor_names[f] + " mistyped");
      return report;
    }
    auto fr = validate_functor(r);
    if (!fr.ok())
      report.add("restriction", c.mor_names[f] + ": " + fr.summary());
  }
  if (!report.ok()) return report;

  for (ObjId u = 0; u < c.n_obj(); ++u) {
    const FinCategory& fib = *F.fiber[u];
    const Functor& idres = F.restriction[c.obj_identity[u]];
    if (F.upsilon[u].size() != static_cast<size_t>(fib.n_obj())) {
      report.add("upsilon", "component count at " + c.obj_names[u]);
      continue;
    }
    for (ObjId x = 0; x < fib.n_obj(); ++x) {
      MorId comp = F.upsilon[u][x];
      if (fib.mor_dom[comp] != idres.obj_map[x] || fib.mor_cod[comp] != x)
        report.add("upsilon", "component mistyped at " + c.obj_names[u] + "/" +
                                  obj_label(fib, x));
      else if (!inverse_of(fib, comp))
        report.add("upsilon", "component not invertible at " + c.obj_names[u]);
    }
    for (MorId m = 0; m < fib.n_mor(); ++m) {
      ObjId x = fib.mor_dom[m], y = fib.mor_cod[m];
      if (fib.compose(F.upsilon[u][y], idres.mor_map[m]) !=
          fib.compose(m, F.upsilon[u][x]))
        report.add("upsilon-naturality",
                   c.obj_names[u] + "/" + fib.mor_names[m]);
    }
  }

  for (MorId f = 0; f < c.n_mor(); ++f)
    for (MorId g = 0; g < c.n_mor(); ++g) {
      if (!c.composable(f, g)) continue;
      auto it = F.phi.find({f, g});
      if (it == F.phi.end()) {
        report.add("phi", "missing cell (" + c.mor_names[f] + ", " +
                              c.mor_names[g] + ")");
        continue;
      }
      ObjId u = c.mor_cod[f], w = c.mor_dom[g];
      const FinCategory& fib_u = *F.fiber[u];
      const FinCategory& fib_w = *F.fiber[w];
      if (it->second.size() != static_cast<size_t>(fib_u.n_obj())) {
        report.add("phi", "component count for (" + c.mor_names[f] + ", " +
                              c.mor_names[g] + ")");
        continue;
      }
      MorId fg = c.compose(f, g);
      for (ObjId x = 0; x < fib_u.n_obj(); ++x) {
        MorId comp = it->second[x];
        if (fib_w.mor_dom[comp] != F.rob(fg, x) ||
            fib_w.mor_cod[comp] != F.rob(g, F.rob(f, x)))
          report.add("phi", "component mistyped at (" + c.mor_names[f] + ", " +
                                c.mor_names[g] + ")/" + obj_label(fib_u, x));
        else if (!inverse_of(fib_w, comp))
          report.add("phi", "component not invertible at (" + c.mor_names[f] +
                                ", " + c.mor_names[g] + ")");
      }
      if (!report.ok()) return report;
      for (MorId m = 0; m < fib_u.n_mor(); ++m) {
        ObjId x = fib_u.mor_dom[m], y = fib_u.mor_cod[m];
        if (fib_w.compose(it->second[y], F.rmor(fg, m)) !=
            fib_w.compose(F.rmor(g, F.rmor(f, m)), it->second[x]))
          report.add("phi-naturality", "(" + c.mor_names[f] + ", " +
                                           c.mor_names[g] + ")/" +
                                           fib_u.mor_names[m]);
      }
    }
  if (!report.ok()) return report;

  // Unit coherence in both directions.
  for (MorId f = 0; f < c.n_mor(); ++f) {
    ObjId u = c.mor_cod[f], v = c.mor_dom[f];
    const FinCategory& fib_u = *F.fiber[u];
    const FinCategory& fib_v = *F.fiber[v];
    for (ObjId x = 0; x < fib_u.n_obj(); ++x) {
      MorId right = F.phi_at(f, c.obj_identity[v], x);
      MorId expect_right = *inverse_of(fib_v, F.ups(v, F.rob(f, x)));
      if (right != expect_right)
        report.add("phi-unit-right", c.mor_names[f] + "/" + obj_label(fib_u, x));
      MorId left = F.phi_at(c.obj_identity[u], f, x);
      MorId expect_left = F.rmor(f, *inverse_of(fib_u, F.ups(u, x)));
      if (left != expect_left)
        report.add("phi-unit-left", c.mor_names[f] + "/" + obj_label(fib_u, x));
    }
  }

  // Associativity coherence over every composable triple of site arrows.
  struct Triple {
    MorId f, g, h;
  };
  std::vector<Triple> triples;
  for (MorId f = 0; f < c.n_mor(); ++f)
    for (MorId g = 0; g < c.n_mor(); ++g) {
      if (!c.composable(f, g)) continue;
      for (MorId h = 0; h < c.n_mor(); ++h)
        if (c.composable(g, h)) triples.push_back({f, g, h});
    }
  auto triple_ok = [&](int64_t i) {
    const Triple& t = triples[static_cast<size_t>(i)];
    ObjId u = c.mor_cod[t.f];
    const FinCategory& fib_y = *F.fiber[c.mor_dom[t.h]];
    MorId fg = c.compose(t.f, t.g);
    MorId gh = c.compose(t.g, t.h);
    for (ObjId x = 0; x < F.fiber[u]->n_obj(); ++x) {
      MorId path1 = fib_y.compose(F.rmor(t.h, F.phi_at(t.f, t.g, x)),
                                  F.phi_at(fg, t.h, x));
      MorId path2 = fib_y.compose(F.phi_at(t.g, t.h, F.rob(t.f, x)),
                                  F.phi_at(t.f, gh, x));
      if (path1 != path2) return false;
    }
    return true;
  };
  int64_t bad = par::first_failure(static_cast<int64_t>(triples.size()), triple_ok);
  if (bad != -1) {
    const Triple& t = triples[static_cast<size_t>(bad)];
    report.add("phi-associativity", "(" + c.mor_names[t.f] + ", " +
                                        c.mor_names[t.g] + ", " +
                                        c.mor_names[t.h] + ")");
  }
  return report;
}

namespace {

// Composite of a restriction path as an arrow of the site.
MorId path_composite(const FinCategory& c, const std::vector<MorId>& path,
                     ObjId u) {
  if (path.empty()) return c.obj_identity[u];
  MorId acc = path.front();
  for (size_t i = 1; i < path.size(); ++i) acc = c.compose(acc, path[i]);
  return acc;
}

// Iso F(composite)(x) -> x·path in the fiber at the end of the path.
MorId collapse_iso(const Pseudofunctor& F, ObjId u, ObjId x,
                   const std::vector<MorId>& path) {
  const FinCategory& c = F.site->c();
  if (path.empty()) return F.ups(u, x);
  if (path.size() == 1) {
    ObjId v = c.mor_dom[path[0]];
    return F.fiber[v]->obj_identity[F.rob(path[0], x)];
  }
  std::vector<MorId> prefix(path.begin(), path.end() - 1);
  MorId last = path.back();
  MorId prefix_comp = path_composite(c, prefix, u);
  ObjId stage = c.mor_dom[last];
  MorId phi = F.phi_at(prefix_comp, last, x);
  MorId inner = collapse_iso(F, u, x, prefix);
  return F.fiber[stage]->compose(F.rmor(last, inner), phi);
}

}  // namespace

MorId restriction_comparison(const Pseudofunctor& F, ObjId u, ObjId x,
                             const std::vector<MorId>& path_a,
                             const std::vector<MorId>& path_b) {
  const FinCategory& c = F.site->c();
  MorId comp_a = path_composite(c, path_a, u);
  MorId comp_b = path_composite(c, path_b, u);
  if (comp_a != comp_b)
    throw Error("restriction_comparison: paths have different composites");
  ObjId stage = c.mor_dom[comp_a];
  MorId ka = collapse_iso(F, u, x, path_a);
  MorId kb = collapse_iso(F, u, x, path_b);
  auto ka_inv = inverse_of(*F.fiber[stage], ka);
  if (!ka_inv) throw Error("restriction_comparison: collapse iso not invertible");
  return F.fiber[stage]->compose(kb, *ka_inv);
}

MorId sigma(const Pseudofunctor& F, ObjId u, ObjId x, MorId f_alpha,
            MorId f_beta) {
  const Pullback& pb = F.site->pullbacks.at(f_alpha, f_beta);
  return restriction_comparison(F, u, x, {f_alpha, pb.p1}, {f_beta, pb.p2});
}

ValidationReport validate_pseudonat(const PseudoNat& p) {
  ValidationReport report;
  const FinCategory& c = p.source->site->c();
  if (p.source->site != p.target->site &&
      !(p.source->site->c() == p.target->site->c())) {
    report.add("shape", "source and target live on different sites");
    return report;
  }
  if (p.component.size() != static_cast<size_t>(c.n_obj()) ||
      p.coherence.size() != static_cast<size_t>(c.n_mor())) {
    report.add("shape", "component/coherence table sizes");
    return report;
  }
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    const Functor& comp = p.component[u];
    if (!comp.src || !same_cat(comp.src, p.source->fiber[u]) ||
        !same_cat(comp.dst, p.target->fiber[u])) {
      report.add("component", "functor at " + c.obj_names[u] + " mistyped");
      return report;
    }
    auto fr = validate_functor(comp);
    if (!fr.ok()) report.add("component", c.obj_names[u] + ": " + fr.summary());
  }
  if (!report.ok()) return report;

  const Pseudofunctor& S = *p.source;
  const Pseudofunctor& T = *p.target;
  for (MorId f = 0; f < c.n_mor(); ++f) {
    ObjId u = c.mor_cod[f], v = c.mor_dom[f];
    const FinCategory& fib_v = *T.fiber[v];
    if (p.coherence[f].size() != static_cast<size_t>(S.fiber[u]->n_obj())) {
      report.add("coherence", "component count for " + c.mor_names[f]);
      return report;
    }
    for (ObjId e = 0; e < S.fiber[u]->n_obj(); ++e) {
      MorId cell = p.coherence[f][e];
      ObjId want_dom = p.component[v].obj_map[S.rob(f, e)];
      ObjId want_cod = T.rob(f, p.component[u].obj_map[e]);
      if (fib_v.mor_dom[cell] != want_dom || fib_v.mor_cod[cell] != want_cod)
        report.add("coherence", "cell mistyped at " + c.mor_names[f]);
      else if (!inverse_of(fib_v, cell))
        report.add("coherence", "cell not invertible at " + c.mor_names[f]);
    }
    if (!report.ok()) return report;
    // Naturality of the coherence cells in e.
    for (MorId m = 0; m < S.fiber[u]->n_mor(); ++m) {
      ObjId x = S.fiber[u]->mor_dom[m], y = S.fiber[u]->mor_cod[m];
      MorId lhs = fib_v.compose(p.coherence[f][y],
                                p.component[v].mor_map[S.rmor(f, m)]);
      MorId rhs = fib_v.compose(T.rmor(f, p.component[u].mor_map[m]),
                                p.coherence[f][x]);
      if (lhs != rhs)
        report.add("coherence-naturality",
                   c.mor_names[f] + "/" + S.fiber[u]->mor_names[m]);
    }
  }
  if (!report.ok()) return report;

  // Unit compatibility: υ^T(p x) ∘ coh_{1}(x) = p(υ^S x).
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    MorId one = c.obj_identity[u];
    const FinCategory& fib = *T.fiber[u];
    for (ObjId x = 0; x < S.fiber[u]->n_obj(); ++x) {
      MorId lhs = fib.compose(T.ups(u, p.component[u].obj_map[x]),
                              p.coherence[one][x]);
      MorId rhs = p.component[u].mor_map[S.ups(u, x)];
      if (lhs != rhs) report.add("coherence-unit", c.obj_names[u]);
    }
  }

  // Composite compatibility over every composable pair of site arrows.
  for (MorId f = 0; f < c.n_mor(); ++f)
    for (MorId g = 0; g < c.n_mor(); ++g) {
      if (!c.composable(f, g)) continue;
      ObjId u = c.mor_cod[f], w = c.mor_dom[g];
      MorId fg = c.compose(f, g);
      const FinCategory& fib_w = *T.fiber[w];
      for (ObjId x = 0; x < S.fiber[u]->n_obj(); ++x) {
        MorId path1 = fib_w.compose(
            T.rmor(g, p.coherence[f][x]),
            fib_w.compose(p.coherence[g][S.rob(f, x)],
                          p.component[w].mor_map[S.phi_at(f, g, x)]));
        MorId path2 = fib_w.compose(T.phi_at(f, g, p.component[u].obj_map[x]),
                                    p.coherence[fg][x]);
        if (path1 != path2)
          report.add("coherence-composite", "(" + c.mor_names[f] + ", " +
                                                c.mor_names[g] + ")");
      }
    }
  return report;
}

PseudoNat identity_pseudonat(const PstackPtr& a) {
  PseudoNat p;
  p.source = p.target = a;
  const FinCategory& c = a->site->c();
  p.component.reserve(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u)
    p.component.push_back(identity_functor(a->fiber[u]));
  p.coherence.resize(c.n_mor());
  for (MorId f = 0; f < c.n_mor(); ++f) {
    ObjId u = c.mor_cod[f], v = c.mor_dom[f];
    p.coherence[f].resize(a->fiber[u]->n_obj());
    for (ObjId e = 0; e < a->fiber[u]->n_obj(); ++e)
      p.coherence[f][e] = a->fiber[v]->obj_identity[a->rob(f, e)];
  }
  return p;
}

PseudoNat compose_pseudonat(const PseudoNat& q, const PseudoNat& p) {
  PseudoNat r;
  r.source = p.source;
  r.target = q.target;
  const FinCategory& c = p.source->site->c();
  r.component.reserve(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u)
    r.component.push_back(compose(q.component[u], p.component[u]));
  r.coherence.resize(c.n_mor());
  for (MorId f = 0; f < c.n_mor(); ++f) {
    ObjId u = c.mor_cod[f], v = c.mor_dom[f];
    r.coherence[f].resize(p.source->fiber[u]->n_obj());
    for (ObjId e = 0; e < p.source->fiber[u]->n_obj(); ++e) {
      ObjId pe = p.component[u].obj_map[e];
      r.coherence[f][e] = q.target->fiber[v]->compose(
          q.coherence[f][pe], q.component[v].mor_map[p.coherence[f][e]]);
    }
  }
  return r;
}

bool pseudonat_equal(const PseudoNat& a, const PseudoNat& b) {
  if (a.component.size() != b.component.size()) return false;
  for (size_t u = 0; u < a.component.size(); ++u) {
    if (a.component[u].obj_map != b.component[u].obj_map ||
        a.component[u].mor_map != b.component[u].mor_map)
      return false;
  }
  return a.coherence == b.coherence;
}

ValidationReport validate_modification(const Modification& m) {
  ValidationReport report;
  const FinCategory& c = m.source.source->site->c();
  if (m.component.size() != static_cast<size_t>(c.n_obj())) {
    report.add("shape", "component table size");
    return report;
  }
  const Pseudofunctor& S = *m.source.source;
  const Pseudofunctor& T = *m.source.target;
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    const FinCategory& fib = *T.fiber[u];
    if (m.component[u].size() != static_cast<size_t>(S.fiber[u]->n_obj())) {
      report.add("shape", "component count at " + c.obj_names[u]);
      return report;
    }
    for (ObjId x = 0; x < S.fiber[u]->n_obj(); ++x) {
      MorId cell = m.component[u][x];
      if (fib.mor_dom[cell] != m.source.component[u].obj_map[x] ||
          fib.mor_cod[cell] != m.target.component[u].obj_map[x])
        report.add("component", "cell mistyped at " + c.obj_names[u]);
    }
    if (!report.ok()) return report;
    // Naturality at every fiber morphism (2-cells in Cat are natural
    // transformations).
    for (MorId mm = 0; mm < S.fiber[u]->n_mor(); ++mm) {
      ObjId x = S.fiber[u]->mor_dom[mm], y = S.fiber[u]->mor_cod[mm];
      if (fib.compose(m.component[u][y], m.source.component[u].mor_map[mm]) !=
          fib.compose(m.target.component[u].mor_map[mm], m.component[u][x]))
        report.add("component-naturality",
                   c.obj_names[u] + "/" + S.fiber[u]->mor_names[mm]);
    }
  }
  if (!report.ok()) return report;

  // Modification square for every site arrow.
  for (MorId f = 0; f < c.n_mor(); ++f) {
    ObjId u = c.mor_cod[f], v = c.mor_dom[f];
    const FinCategory& fib_v = *T.fiber[v];
    for (ObjId x = 0; x < S.fiber[u]->n_obj(); ++x) {
      MorId lhs = fib_v.compose(m.target.coherence[f][x],
                                m.component[v][S.rob(f, x)]);
      MorId rhs = fib_v.compose(T.rmor(f, m.component[u][x]),
                                m.source.coherence[f][x]);
      if (lhs != rhs)
        report.add("modification-square",
                   c.mor_names[f] + "/" + obj_label(*S.fiber[u], x));
    }
  }
  return report;
}

bool modification_is_iso(const Modification& m) {
  const FinCategory& c = m.source.source->site->c();
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    const FinCategory& fib = *m.source.target->fiber[u];
    for (MorId cell : m.component[u])
      if (!inverse_of(fib, cell)) return false;
  }
  return true;
}

Modification identity_modification(const PseudoNat& p) {
  Modification m;
  m.source = m.target = p;
  const FinCategory& c = p.source->site->c();
  m.component.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    m.component[u].resize(p.source->fiber[u]->n_obj());
    for (ObjId x = 0; x < p.source->fiber[u]->n_obj(); ++x)
      m.component[u][x] =
          p.target->fiber[u]->obj_identity[p.component[u].obj_map[x]];
  }
  return m;
}

Modification mod_inverse(const Modification& m) {
  Modification r;
  r.source = m.target;
  r.target = m.source;
  const FinCategory& c = m.source.source->site->c();
  r.component.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    const FinCategory& fib = *m.source.target->fiber[u];
    r.component[u].resize(m.component[u].size());
    for (size_t x = 0; x < m.component[u].size(); ++x) {
      auto inv = inverse_of(fib, m.component[u][x]);
      if (!inv) throw Error("mod_inverse: component not invertible");
      r.component[u][x] = *inv;
    }
  }
  return r;
}

Modification mod_vcompose(const Modification& b, const Modification& a) {
  Modification r;
  r.source = a.source;
  r.target = b.target;
  const FinCategory& c = a.source.source->site->c();
  r.component.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    const FinCategory& fib = *a.source.target->fiber[u];
    r.component[u].resize(a.component[u].size());
    for (size_t x = 0; x < a.component[u].size(); ++x)
      r.component[u][x] = fib.compose(b.component[u][x], a.component[u][x]);
  }
  return r;
}

Modification mod_whisker_left(const PseudoNat& q, const Modification& m) {
  Modification r;
  r.source = compose_pseudonat(q, m.source);
  r.target = compose_pseudonat(q, m.target);
  const FinCategory& c = m.source.source->site->c();
  r.component.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    r.component[u].resize(m.component[u].size());
    for (size_t x = 0; x < m.component[u].size(); ++x)
      r.component[u][x] = q.component[u].mor_map[m.component[u][x]];
  }
  return r;
}

Modification mod_whisker_right(const Modification& m, const PseudoNat& r0) {
  Modification r;
  r.source = compose_pseudonat(m.source, r0);
  r.target = compose_pseudonat(m.target, r0);
  const FinCategory& c = r0.source->site->c();
  r.component.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    r.component[u].resize(r0.source->fiber[u]->n_obj());
    for (ObjId x = 0; x < r0.source->fiber[u]->n_obj(); ++x)
      r.component[u][x] = m.component[u][r0.component[u].obj_map[x]];
  }
  return r;
}

PstackPtr terminal_prestack(const SitePtr& s) {
  CatPtr term = [] {
    CategoryBuilder b;
    b.object("*").morphism("1", "*", "*").identity("*", "1");
    return b.build();
  }();
  PseudofunctorBuilder b(s, "One");
  for (ObjId u = 0; u < s->c().n_obj(); ++u) b.fiber(u, term);
  for (MorId f = 0; f < s->c().n_mor(); ++f)
    b.restriction(f, identity_functor(term));
  b.strict_coherence();
  return b.build();
}

PseudoNat to_terminal(const PstackPtr& a) {
  PstackPtr one = terminal_prestack(a->site);
  PseudoNat p;
  p.source = a;
  p.target = one;
  const FinCategory& c = a->site->c();
  for (ObjId u = 0; u < c.n_obj(); ++u)
    p.component.push_back(constant_functor(a->fiber[u], one->fiber[u], 0));
  p.coherence.resize(c.n_mor());
  for (MorId f = 0; f < c.n_mor(); ++f)
    p.coherence[f].assign(a->fiber[c.mor_cod[f]]->n_obj(),
                          one->fiber[0]->obj_identity[0]);
  return p;
}

namespace {

CatPtr discrete_on(const std::vector<std::string>& names) {
  CategoryBuilder b;
  for (const auto& n : names) {
    b.object(n).morphism("1_" + n, n, n).identity(n, "1_" + n);
  }
  return b.build();
}

}  // namespace

PstackPtr representable(const SitePtr& s, ObjId u) {
  const FinCategory& c = s->c();
  auto F = std::make_shared<Pseudofunctor>();
  F->site = s;
  F->tag = "y" + c.obj_names[u];
  F->fiber.resize(c.n_obj());
  for (ObjId v = 0; v < c.n_obj(); ++v) {
    std::vector<std::string> names;
    for (MorId h : c.hom(v, u)) names.push_back(c.mor_names[h]);
    F->fiber[v] = discrete_on(names);
  }
  F->restriction.resize(c.n_mor());
  for (MorId g = 0; g < c.n_mor(); ++g) {
    ObjId v = c.mor_cod[g], w = c.mor_dom[g];
    Functor r;
    r.src = F->fiber[v];
    r.dst = F->fiber[w];
    r.obj_map.resize(F->fiber[v]->n_obj());
    r.mor_map.resize(F->fiber[v]->n_mor());
    for (ObjId x = 0; x < F->fiber[v]->n_obj(); ++x) {
      MorId h = c.mor_index(F->fiber[v]->obj_names[x]);
      ObjId image = F->fiber[w]->obj_index(c.mor_names[c.compose(h, g)]);
      r.obj_map[x] = image;
      r.mor_map[F->fiber[v]->obj_identity[x]] =
          F->fiber[w]->obj_identity[image];
    }
    F->restriction[g] = std::move(r);
  }
  F->upsilon.resize(c.n_obj());
  for (ObjId v = 0; v < c.n_obj(); ++v) {
    F->upsilon[v].resize(F->fiber[v]->n_obj());
    for (ObjId x = 0; x < F->fiber[v]->n_obj(); ++x)
      F->upsilon[v][x] = F->fiber[v]->obj_identity[x];
  }
  for (MorId f = 0; f < c.n_mor(); ++f)
    for (MorId g = 0; g < c.n_mor(); ++g) {
      if (!c.composable(f, g)) continue;
      std::vector<MorId> comps(F->fiber[c.mor_cod[f]]->n_obj());
      for (ObjId x = 0; x < F->fiber[c.mor_cod[f]]->n_obj(); ++x)
        comps[x] =
            F->fiber[c.mor_dom[g]]->obj_identity[F->rob(g, F->rob(f, x))];
      F->phi[{f, g}] = std::move(comps);
    }
  return F;
}

SieveSubfunctor sieve_subfunctor(const SitePtr& s, const Sieve& sv) {
  const FinCategory& c = s->c();
  PstackPtr ambient = representable(s, sv.apex);
  auto F = std::make_shared<Pseudofunctor>();
  F->site = s;
  F->tag = "S" + c.obj_names[sv.apex];
  F->fiber.resize(c.n_obj());
  for (ObjId v = 0; v < c.n_obj(); ++v) {
    std::vector<std::string> names;
    for (MorId h : c.hom(v, sv.apex))
      if (sv.contains(h)) names.push_back(c.mor_names[h]);
    F->fiber[v] = discrete_on(names);
  }
  F->restriction.resize(c.n_mor());
  for (MorId g = 0; g < c.n_mor(); ++g) {
    ObjId v = c.mor_cod[g], w = c.mor_dom[g];
    Functor r;
    r.src = F->fiber[v];
    r.dst = F->fiber[w];
    r.obj_map.resize(F->fiber[v]->n_obj());
    r.mor_map.resize(F->fiber[v]->n_mor());
    for (ObjId x = 0; x < F->fiber[v]->n_obj(); ++x) {
      MorId h = c.mor_index(F->fiber[v]->obj_names[x]);
      ObjId image = F->fiber[w]->obj_index(c.mor_names[c.compose(h, g)]);
      r.obj_map[x] = image;
      r.mor_map[F->fiber[v]->obj_identity[x]] =
          F->fiber[w]->obj_identity[image];
    }
    F->restriction[g] = std::move(r);
  }
  F->upsilon.resize(c.n_obj());
  for (ObjId v = 0; v < c.n_obj(); ++v) {
    F->upsilon[v].resize(F->fiber[v]->n_obj());
    for (ObjId x = 0; x < F->fiber[v]->n_obj(); ++x)
      F->upsilon[v][x] = F->fiber[v]->obj_identity[x];
  }
  for (MorId f = 0; f < c.n_mor(); ++f)
    for (MorId g = 0; g < c.n_mor(); ++g) {
      if (!c.composable(f, g)) continue;
      std::vector<MorId> comps(F->fiber[c.mor_cod[f]]->n_obj());
      for (ObjId x = 0; x < F->fiber[c.mor_cod[f]]->n_obj(); ++x)
        comps[x] =
            F->fiber[c.mor_dom[g]]->obj_identity[F->rob(g, F->rob(f, x))];
      F->phi[{f, g}] = std::move(comps);
    }

  PseudoNat inc;
  inc.source = F;
  inc.target = ambient;
  for (ObjId v = 0; v < c.n_obj(); ++v) {
    Functor j;
    j.src = F->fiber[v];
    j.dst = ambient->fiber[v];
    j.obj_map.resize(F->fiber[v]->n_obj());
    j.mor_map.resize(F->fiber[v]->n_mor());
    for (ObjId x = 0; x < F->fiber[v]->n_obj(); ++x) {
      ObjId image = ambient->fiber[v]->obj_index(F->fiber[v]->obj_names[x]);
      j.obj_map[x] = image;
      j.mor_map[F->fiber[v]->obj_identity[x]] =
          ambient->fiber[v]->obj_identity[image];
    }
    inc.component.push_back(std::move(j));
  }
  inc.coherence.resize(c.n_mor());
  for (MorId g = 0; g < c.n_mor(); ++g) {
    ObjId v = c.mor_cod[g], w = c.mor_dom[g];
    inc.coherence[g].resize(F->fiber[v]->n_obj());
    for (ObjId x = 0; x < F->fiber[v]->n_obj(); ++x)
      inc.coherence[g][x] =
          ambient->fiber[w]
              ->obj_identity[inc.component[w].obj_map[F->rob(g, x)]];
  }
  return {F, std::move(inc), ambient};
}

namespace {

struct PairedCat {
  CatPtr cat;
  // obj_of[x * nb + y], mor_of[m * nbm + n]
  std::vector<ObjId> obj_of;
  std::vector<MorId> mor_of;
  int nb_obj = 0, nb_mor = 0;
};

PairedCat product_category(const CatPtr& a, const CatPtr& b) {
  CategoryBuilder bld;
  auto oname = [&](ObjId x, ObjId y) {
    return "(" + a->obj_names[x] + "|" + b->obj_names[y] + ")";
  };
  auto mname = [&](MorId m, MorId n) {
    return "(" + a->mor_names[m] + "|" + b->mor_names[n] + ")";
  };
  for (ObjId x = 0; x < a->n_obj(); ++x)
    for (ObjId y = 0; y < b->n_obj(); ++y) bld.object(oname(x, y));
  for (MorId m = 0; m < a->n_mor(); ++m)
    for (MorId n = 0; n < b->n_mor(); ++n)
      bld.morphism(mname(m, n), oname(a->mor_dom[m], b->mor_dom[n]),
                   oname(a->mor_cod[m], b->mor_cod[n]));
  for (ObjId x = 0; x < a->n_obj(); ++x)
    for (ObjId y = 0; y < b->n_obj(); ++y)
      bld.identity(oname(x, y), mname(a->obj_identity[x], b->obj_identity[y]));
  for (MorId m = 0; m < a->n_mor(); ++m)
    for (MorId n = 0; n < b->n_mor(); ++n)
      for (MorId m2 = 0; m2 < a->n_mor(); ++m2)
        for (MorId n2 = 0; n2 < b->n_mor(); ++n2) {
          if (!a->composable(m2, m) || !b->composable(n2, n)) continue;
          bld.composite(mname(m2, n2), mname(m, n),
                        mname(a->compose(m2, m), b->compose(n2, n)));
        }
  PairedCat out;
  out.cat = bld.build();
  out.nb_obj = b->n_obj();
  out.nb_mor = b->n_mor();
  out.obj_of.resize(static_cast<size_t>(a->n_obj()) * b->n_obj());
  out.mor_of.resize(static_cast<size_t>(a->n_mor()) * b->n_mor());
  for (ObjId x = 0; x < a->n_obj(); ++x)
    for (ObjId y = 0; y < b->n_obj(); ++y)
      out.obj_of[static_cast<size_t>(x) * b->n_obj() + y] =
          out.cat->obj_index(oname(x, y));
  for (MorId m = 0; m < a->n_mor(); ++m)
    for (MorId n = 0; n < b->n_mor(); ++n)
      out.mor_of[static_cast<size_t>(m) * b->n_mor() + n] =
          out.cat->mor_index(mname(m, n));
  return out;
}

}  // namespace

Product product(const PstackPtr& a, const PstackPtr& b) {
  const FinCategory& c = a->site->c();
  auto F = std::make_shared<Pseudofunctor>();
  F->site = a->site;
  F->tag = "(" + a->tag + "x" + b->tag + ")";
  F->fiber.resize(c.n_obj());
  std::vector<PairedCat> paired(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    paired[u] = product_category(a->fiber[u], b->fiber[u]);
    F->fiber[u] = paired[u].cat;
  }
  F->restriction.resize(c.n_mor());
  for (MorId f = 0; f < c.n_mor(); ++f) {
    ObjId u = c.mor_cod[f], v = c.mor_dom[f];
    Functor r;
    r.src = F->fiber[u];
    r.dst = F->fiber[v];
    r.obj_map.resize(F->fiber[u]->n_obj());
    r.mor_map.resize(F->fiber[u]->n_mor());
    for (ObjId x = 0; x < a->fiber[u]->n_obj(); ++x)
      for (ObjId y = 0; y < b->fiber[u]->n_obj(); ++y)
        r.obj_map[paired[u].obj_of[static_cast<size_t>(x) *
                                       b->fiber[u]->n_obj() +
                                   y]] =
            paired[v].obj_of[static_cast<size_t>(a->rob(f, x)) *
                                 b->fiber[v]->n_obj() +
                             b->rob(f, y)];
    for (MorId m = 0; m < a->fiber[u]->n_mor(); ++m)
      for (MorId n = 0; n < b->fiber[u]->n_mor(); ++n)
        r.mor_map[paired[u].mor_of[static_cast<size_t>(m) *
                                       b->fiber[u]->n_mor() +
                                   n]] =
            paired[v].mor_of[static_cast<size_t>(a->rmor(f, m)) *
                                 b->fiber[v]->n_mor() +
                             b->rmor(f, n)];
    F->restriction[f] = std::move(r);
  }
  F->upsilon.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    F->upsilon[u].resize(F->fiber[u]->n_obj());
    for (ObjId x = 0; x < a->fiber[u]->n_obj(); ++x)
      for (ObjId y = 0; y < b->fiber[u]->n_obj(); ++y)
        F->upsilon[u][paired[u].obj_of[static_cast<size_t>(x) *
                                           b->fiber[u]->n_obj() +
                                       y]] =
            paired[u].mor_of[static_cast<size_t>(a->ups(u, x)) *
                                 b->fiber[u]->n_mor() +
                             b->ups(u, y)];
  }
  for (MorId f = 0; f < c.n_mor(); ++f)
    for (MorId g = 0; g < c.n_mor(); ++g) {
      if (!c.composable(f, g)) continue;
      ObjId u = c.mor_cod[f], w = c.mor_dom[g];
      std::vector<MorId> comps(F->fiber[u]->n_obj());
      for (ObjId x = 0; x < a->fiber[u]->n_obj(); ++x)
        for (ObjId y = 0; y < b->fiber[u]->n_obj(); ++y)
          comps[paired[u].obj_of[static_cast<size_t>(x) *
                                     b->fiber[u]->n_obj() +
                                 y]] =
              paired[w].mor_of[static_cast<size_t>(a->phi_at(f, g, x)) *
                                   b->fiber[w]->n_mor() +
                               b->phi_at(f, g, y)];
      F->phi[{f, g}] = std::move(comps);
    }

  Product out;
  out.prod = F;
  // Projections (coherence cells are identities).
  for (int side = 0; side < 2; ++side) {
    PseudoNat proj;
    proj.source = F;
    proj.target = side == 0 ? a : b;
    for (ObjId u = 0; u < c.n_obj(); ++u) {
      Functor pf;
      pf.src = F->fiber[u];
      pf.dst = side == 0 ? a->fiber[u] : b->fiber[u];
      pf.obj_map.resize(F->fiber[u]->n_obj());
      pf.mor_map.resize(F->fiber[u]->n_mor());
      for (ObjId x = 0; x < a->fiber[u]->n_obj(); ++x)
        for (ObjId y = 0; y < b->fiber[u]->n_obj(); ++y)
          pf.obj_map[paired[u].obj_of[static_cast<size_t>(x) *
                                          b->fiber[u]->n_obj() +
                                      y]] = side == 0 ? x : y;
      for (MorId m = 0; m < a->fiber[u]->n_mor(); ++m)
        for (MorId n = 0; n < b->fiber[u]->n_mor(); ++n)
          pf.mor_map[paired[u].mor_of[static_cast<size_t>(m) *
                                          b->fiber[u]->n_mor() +
                                      n]] = side == 0 ? m : n;
      proj.component.push_back(std::move(pf));
    }
    proj.coherence.resize(c.n_mor());
    for (MorId f = 0; f < c.n_mor(); ++f) {
      ObjId u = c.mor_cod[f], v = c.mor_dom[f];
      const PstackPtr& t = side == 0 ? a : b;
      proj.coherence[f].resize(F->fiber[u]->n_obj());
      for (ObjId x = 0; x < F->fiber[u]->n_obj(); ++x)
        proj.coherence[f][x] =
            t->fiber[v]
                ->obj_identity[proj.component[v].obj_map[F->rob(f, x)]];
    }
    (side == 0 ? out.proj1 : out.proj2) = std::move(proj);
  }
  return out;
}

PseudoNat diagonal(const PstackPtr& a, const Product& axa) {
  const FinCategory& c = a->site->c();
  PseudoNat d;
  d.source = a;
  d.target = axa.prod;
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    Functor df;
    df.src = a->fiber[u];
    df.dst = axa.prod->fiber[u];
    df.obj_map.resize(a->fiber[u]->n_obj());
    df.mor_map.resize(a->fiber[u]->n_mor());
    for (ObjId x = 0; x < a->fiber[u]->n_obj(); ++x)
      df.obj_map[x] = axa.prod->fiber[u]->obj_index(
          "(" + a->fiber[u]->obj_names[x] + "|" + a->fiber[u]->obj_names[x] +
          ")");
    for (MorId m = 0; m < a->fiber[u]->n_mor(); ++m)
      df.mor_map[m] = axa.prod->fiber[u]->mor_index(
          "(" + a->fiber[u]->mor_names[m] + "|" + a->fiber[u]->mor_names[m] +
          ")");
    d.component.push_back(std::move(df));
  }
  d.coherence.resize(c.n_mor());
  for (MorId f = 0; f < c.n_mor(); ++f) {
    ObjId u = c.mor_cod[f], v = c.mor_dom[f];
    d.coherence[f].resize(a->fiber[u]->n_obj());
    for (ObjId x = 0; x < a->fiber[u]->n_obj(); ++x)
      d.coherence[f][x] =
          axa.prod->fiber[v]
              ->obj_identity[d.component[v].obj_map[a->rob(f, x)]];
  }
  return d;
}

Cotensor cotensor_two(const PstackPtr& a) {
  const FinCategory& c = a->site->c();
  auto F = std::make_shared<Pseudofunctor>();
  F->site = a->site;
  F->tag = "[2," + a->tag + "]";
  F->fiber.resize(c.n_obj());

  // Fiber at u: the arrow category of a's fiber.
  // Objects "[m]"; morphisms "r|s:[m]>[m']" for commuting (r, s).
  std::vector<std::vector<std::array<MorId, 4>>> cells(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    const FinCategory& fib = *a->fiber[u];
    CategoryBuilder bld;
    auto oname = [&](MorId m) { return "[" + fib.mor_names[m] + "]"; };
    for (MorId m = 0; m < fib.n_mor(); ++m) bld.object(oname(m));
    auto mname = [&](MorId r, MorId s, MorId m, MorId m2) {
      return fib.mor_names[r] + "|" + fib.mor_names[s] + ":" + oname(m) + ">" +
             oname(m2);
    };
    for (MorId m = 0; m < fib.n_mor(); ++m)
      for (MorId m2 = 0; m2 < fib.n_mor(); ++m2)
        for (MorId r : fib.hom(fib.mor_dom[m], fib.mor_dom[m2]))
          for (MorId s : fib.hom(fib.mor_cod[m], fib.mor_cod[m2])) {
            if (fib.compose(s, m) != fib.compose(m2, r)) continue;
            bld.morphism(mname(r, s, m, m2), oname(m), oname(m2));
            cells[u].push_back({r, s, m, m2});
          }
    for (MorId m = 0; m < fib.n_mor(); ++m)
      bld.identity(oname(m),
                   mname(fib.obj_identity[fib.mor_dom[m]],
                         fib.obj_identity[fib.mor_cod[m]], m, m));
    for (const auto& one : cells[u])
      for (const auto& two : cells[u]) {
        if (two[2] != one[3]) continue;  // match middle object
        bld.composite(
            mname(two[0], two[1], two[2], two[3]),
            mname(one[0], one[1], one[2], one[3]),
            mname(fib.compose(two[0], one[0]), fib.compose(two[1], one[1]),
                  one[2], two[3]));
      }
    F->fiber[u] = bld.build();
  }

  auto arrow_obj = [&](ObjId u, MorId m) {
    return F->fiber[u]->obj_index("[" + a->fiber[u]->mor_names[m] + "]");
  };
  auto arrow_mor = [&](ObjId u, MorId r, MorId s, MorId m, MorId m2) {
    const FinCategory& fib = *a->fiber[u];
    return F->fiber[u]->mor_index(fib.mor_names[r] + "|" + fib.mor_names[s] +
                                  ":[" + fib.mor_names[m] + "]>[" +
                                  fib.mor_names[m2] + "]");
  };

  F->restriction.resize(c.n_mor());
  for (MorId f = 0; f < c.n_mor(); ++f) {
    ObjId u = c.mor_cod[f], v = c.mor_dom[f];
    Functor r;
    r.src = F->fiber[u];
    r.dst = F->fiber[v];
    r.obj_map.resize(F->fiber[u]->n_obj());
    r.mor_map.resize(F->fiber[u]->n_mor());
    for (MorId m = 0; m < a->fiber[u]->n_mor(); ++m)
      r.obj_map[arrow_obj(u, m)] = arrow_obj(v, a->rmor(f, m));
    for (const auto& cell : cells[u])
      r.mor_map[arrow_mor(u, cell[0], cell[1], cell[2], cell[3])] =
          arrow_mor(v, a->rmor(f, cell[0]), a->rmor(f, cell[1]),
                    a->rmor(f, cell[2]), a->rmor(f, cell[3]));
    F->restriction[f] = std::move(r);
  }
  F->upsilon.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    const FinCategory& fib = *a->fiber[u];
    MorId one = c.obj_identity[u];
    F->upsilon[u].resize(F->fiber[u]->n_obj());
    for (MorId m = 0; m < fib.n_mor(); ++m)
      F->upsilon[u][arrow_obj(u, m)] =
          arrow_mor(u, a->ups(u, fib.mor_dom[m]), a->ups(u, fib.mor_cod[m]),
                    a->rmor(one, m), m);
  }
  for (MorId f = 0; f < c.n_mor(); ++f)
    for (MorId g = 0; g < c.n_mor(); ++g) {
      if (!c.composable(f, g)) continue;
      ObjId u = c.mor_cod[f], w = c.mor_dom[g];
      MorId fg = c.compose(f, g);
      std::vector<MorId> comps(F->fiber[u]->n_obj());
      for (MorId m = 0; m < a->fiber[u]->n_mor(); ++m) {
        ObjId x = a->fiber[u]->mor_dom[m], y = a->fiber[u]->mor_cod[m];
        comps[arrow_obj(u, m)] =
            arrow_mor(w, a->phi_at(f, g, x), a->phi_at(f, g, y),
                      a->rmor(fg, m), a->rmor(g, a->rmor(f, m)));
      }
      F->phi[{f, g}] = std::move(comps);
    }

  Cotensor out;
  out.path = F;
  out.square = product(a, a);
  PseudoNat b;
  b.source = F;
  b.target = out.square.prod;
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    const FinCategory& fib = *a->fiber[u];
    Functor bf;
    bf.src = F->fiber[u];
    bf.dst = out.square.prod->fiber[u];
    bf.obj_map.resize(F->fiber[u]->n_obj());
    bf.mor_map.resize(F->fiber[u]->n_mor());
    for (MorId m = 0; m < fib.n_mor(); ++m)
      bf.obj_map[arrow_obj(u, m)] = out.square.prod->fiber[u]->obj_index(
          "(" + fib.obj_names[fib.mor_dom[m]] + "|" +
          fib.obj_names[fib.mor_cod[m]] + ")");
    for (const auto& cell : cells[u])
      bf.mor_map[arrow_mor(u, cell[0], cell[1], cell[2], cell[3])] =
          out.square.prod->fiber[u]->mor_index(
              "(" + fib.mor_names[cell[0]] + "|" + fib.mor_names[cell[1]] +
              ")");
    b.component.push_back(std::move(bf));
  }
  b.coherence.resize(c.n_mor());
  for (MorId f = 0; f < c.n_mor(); ++f) {
    ObjId u = c.mor_cod[f], v = c.mor_dom[f];
    b.coherence[f].resize(F->fiber[u]->n_obj());
    for (ObjId x = 0; x < F->fiber[u]->n_obj(); ++x)
      b.coherence[f][x] =
          out.square.prod->fiber[v]
              ->obj_identity[b.component[v].obj_map[F->rob(f, x)]];
  }
  out.boundary = std::move(b);
  return out;
}

PseudoNat representing_pseudonat(const PstackPtr& b, ObjId u, ObjId obj) {
  const FinCategory& c = b->site->c();
  PstackPtr yu = representable(b->site, u);
  PseudoNat p;
  p.source = yu;
  p.target = b;
  for (ObjId v = 0; v < c.n_obj(); ++v) {
    Functor pf;
    pf.src = yu->fiber[v];
    pf.dst = b->fiber[v];
    pf.obj_map.resize(yu->fiber[v]->n_obj());
    pf.mor_map.resize(yu->fiber[v]->n_mor());
    for (ObjId x = 0; x < yu->fiber[v]->n_obj(); ++x) {
      MorId h = c.mor_index(yu->fiber[v]->obj_names[x]);
      pf.obj_map[x] = b->rob(h, obj);
      pf.mor_map[yu->fiber[v]->obj_identity[x]] =
          b->fiber[v]->obj_identity[pf.obj_map[x]];
    }
    p.component.push_back(std::move(pf));
  }
  p.coherence.resize(c.n_mor());
  for (MorId g = 0; g < c.n_mor(); ++g) {
    ObjId v = c.mor_cod[g];
    p.coherence[g].resize(yu->fiber[v]->n_obj());
    for (ObjId x = 0; x < yu->fiber[v]->n_obj(); ++x) {
      MorId h = c.mor_index(yu->fiber[v]->obj_names[x]);
      // b·(h∘g) -> (b·h)·g
      p.coherence[g][x] =
          restriction_comparison(*b, u, obj, {c.compose(h, g)}, {h, g});
    }
  }
  return p;
}

MorId glue_hom_family(const Pseudofunctor& F, ObjId u, ObjId a, ObjId b,
                      const Sieve& sv,
                      const std::function<MorId(MorId)>& family) {
  const FinCategory& fib = *F.fiber[u];
  MorId found = kNone;
  for (MorId m : fib.hom(a, b)) {
    bool matches = true;
    for (MorId f : sv.arrows)
      if (F.rmor(f, m) != family(f)) {
        matches = false;
        break;
      }
    if (matches) {
      if (found != kNone)
        throw Error("glue_hom_family: two amalgamations (not separated)");
      found = m;
    }
  }
  return found;
}

namespace {

// Conjugated restriction of a hom element from stage s to stage s∘q:
//   a·(s∘q) -> a·s·q -> b·s·q -> b·(s∘q).
MorId transport_hom(const Pseudofunctor& F, ObjId u, ObjId a, ObjId b, MorId s,
                    MorId q, MorId elem) {
  const FinCategory& c = F.site->c();
  MorId sq = c.compose(s, q);
  ObjId stage = c.mor_dom[q];
  MorId in = restriction_comparison(F, u, a, {sq}, {s, q});
  MorId out = restriction_comparison(F, u, b, {s, q}, {sq});
  return F.fiber[stage]->compose(out,
                                 F.fiber[stage]->compose(F.rmor(q, elem), in));
}

}  // namespace

PrestackReport is_prestack(const Pseudofunctor& F) {
  const FinCategory& c = F.site->c();
  const Site& site = *F.site;

  struct Task {
    ObjId u;
    ObjId a, b;
    MorId f;
  };
  std::vector<Task> tasks;
  for (ObjId u = 0; u < c.n_obj(); ++u)
    for (ObjId a = 0; a < F.fiber[u]->n_obj(); ++a)
      for (ObjId b = 0; b < F.fiber[u]->n_obj(); ++b)
        for (MorId f = 0; f < c.n_mor(); ++f)
          if (c.mor_cod[f] == u) tasks.push_back({u, a, b, f});

  // Checks the sheaf condition for hom(a·-, b·-) over every basis family of
  // the stage; returns "" when fine, otherwise a witness.
  auto check_task = [&](const Task& t) -> std::string {
    ObjId v = c.mor_dom[t.f];
    for (const CoverFamily& fam : site.basis_families(v)) {
      const size_t k = fam.members.size();
      std::vector<MorId> stage(k);
      std::vector<std::vector<MorId>> choices(k);
      for (size_t i = 0; i < k; ++i) {
        stage[i] = c.compose(t.f, fam.members[i]);
        ObjId w = c.mor_dom[fam.members[i]];
        choices[i] = F.fiber[w]->hom(F.rob(stage[i], t.a), F.rob(stage[i], t.b));
      }
      // Enumerate all families; keep the matching ones.
      std::vector<size_t> pick(k, 0);
      bool exhausted = false;
      if (!k) {
        // The empty family covers: the unique matching family is empty and
        // must have exactly one amalgamation.
        int count = 0;
        for (MorId m : F.fiber[v]->hom(F.rob(t.f, t.a), F.rob(t.f, t.b))) {
          (void)m;
          ++count;
        }
        if (count != 1)
          return "empty cover of " + c.obj_names[v] + " at stage " +
                 c.mor_names[t.f] + ": hom(a·f, b·f) has " +
                 std::to_string(count) + " elements";
        continue;
      }
      for (size_t i = 0; i < k; ++i)
        if (choices[i].empty()) exhausted = true;
      while (!exhausted) {
        std::vector<MorId> fam_elems(k);
        for (size_t i = 0; i < k; ++i) fam_elems[i] = choices[i][pick[i]];
        bool matching = true;
        for (size_t i = 0; i < k && matching; ++i)
          for (size_t j = 0; j < k && matching; ++j) {
            const Pullback& pb =
                site.pullbacks.at(fam.members[i], fam.members[j]);
            MorId ti = transport_hom(F, t.u, t.a, t.b, stage[i], pb.p1,
                                     fam_elems[i]);
            MorId tj = transport_hom(F, t.u, t.a, t.b, stage[j], pb.p2,
                                     fam_elems[j]);
            if (ti != tj) matching = false;
          }
        if (matching) {
          int amalgamations = 0;
          for (MorId m : F.fiber[v]->hom(F.rob(t.f, t.a), F.rob(t.f, t.b))) {
            bool glues = true;
            for (size_t i = 0; i < k && glues; ++i)
              if (transport_hom(F, t.u, t.a, t.b, t.f, fam.members[i], m) !=
                  fam_elems[i])
                glues = false;
            if (glues) ++amalgamations;
          }
          if (amalgamations != 1) {
            std::ostringstream os;
            os << (amalgamations ? "non-separated" : "non-glueing")
               << " family at U=" << c.obj_names[t.u]
               << " a=" << F.fiber[t.u]->obj_names[t.a]
               << " b=" << F.fiber[t.u]->obj_names[t.b]
               << " stage=" << c.mor_names[t.f] << " cover "
               << family_to_string(c, fam);
            return os.str();
          }
        }
        size_t pos = 0;
        while (pos < k) {
          if (++pick[pos] < choices[pos].size()) break;
          pick[pos] = 0;
          ++pos;
        }
        if (pos == k) exhausted = true;
      }
    }
    return "";
  };

  int64_t bad =
      par::first_failure(static_cast<int64_t>(tasks.size()), [&](int64_t i) {
        return check_task(tasks[static_cast<size_t>(i)]).empty();
      });
  PrestackReport rep;
  if (bad != -1) {
    rep.ok = false;
    rep.witness = check_task(tasks[static_cast<size_t>(bad)]);
  }
  return rep;
}

HomCategory hom_category(const PstackPtr& a, const PstackPtr& b,
                         uint64_t bound) {
  const FinCategory& c = a->site->c();
  HomCategory out;
  uint64_t examined = 0;

  // Candidate component functors per site object.
  std::vector<std::vector<Functor>> functors(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    functors[u] = all_functors(a->fiber[u], b->fiber[u], bound);
    if (functors[u].empty()) {
      out.cat = CategoryBuilder{}.build();
      return out;
    }
  }

  std::vector<size_t> pick(c.n_obj(), 0);
  bool done = false;
  while (!done) {
    if (++examined > bound) throw BoundExceeded("hom_category: objects");
    // For the chosen functors, enumerate coherence families per site arrow.
    std::vector<std::vector<NatTrans>> coh_choices(c.n_mor());
    bool feasible = true;
    for (MorId f = 0; f < c.n_mor() && feasible; ++f) {
      ObjId u = c.mor_cod[f], v = c.mor_dom[f];
      Functor lhs = compose(functors[v][pick[v]], a->res(f));
      Functor rhs = compose(b->res(f), functors[u][pick[u]]);
      coh_choices[f] = all_natural_isos(lhs, rhs);
      if (coh_choices[f].empty()) feasible = false;
    }
    if (feasible) {
      std::vector<size_t> cpick(c.n_mor(), 0);
      bool cdone = false;
      while (!cdone) {
        if (++examined > bound) throw BoundExceeded("hom_category: coherence");
        PseudoNat cand;
        cand.source = a;
        cand.target = b;
        for (ObjId u = 0; u < c.n_obj(); ++u)
          cand.component.push_back(functors[u][pick[u]]);
        cand.coherence.resize(c.n_mor());
        for (MorId f = 0; f < c.n_mor(); ++f)
          cand.coherence[f] = coh_choices[f][cpick[f]].component;
        if (validate_pseudonat(cand).ok()) out.objects.push_back(cand);
        size_t pos = 0;
        while (pos < static_cast<size_t>(c.n_mor())) {
          if (++cpick[pos] < coh_choices[pos].size()) break;
          cpick[pos] = 0;
          ++pos;
        }
        if (pos == static_cast<size_t>(c.n_mor())) cdone = true;
      }
    }
    size_t pos = 0;
    while (pos < static_cast<size_t>(c.n_obj())) {
      if (++pick[pos] < functors[pos].size()) break;
      pick[pos] = 0;
      ++pos;
    }
    if (pos == static_cast<size_t>(c.n_obj())) done = true;
  }

  // Modifications between every ordered pair of objects.
  auto pad = [](size_t i) {
    std::string s = std::to_string(i);
    while (s.size() < 4) s = "0" + s;
    return s;
  };
  CategoryBuilder bld;
  for (size_t i = 0; i < out.objects.size(); ++i) bld.object("p" + pad(i));

  std::map<std::vector<std::vector<MorId>>, size_t> index_of;
  std::vector<std::pair<size_t, size_t>> endpoints;
  for (size_t i = 0; i < out.objects.size(); ++i)
    for (size_t j = 0; j < out.objects.size(); ++j) {
      // Component candidates per object; assembled by odometer.
      std::vector<std::vector<NatTrans>> comps(c.n_obj());
      bool feasible = true;
      for (ObjId u = 0; u < c.n_obj() && feasible; ++u) {
        comps[u] = all_nat_transformations(out.objects[i].component[u],
                                           out.objects[j].component[u]);
        if (comps[u].empty()) feasible = false;
      }
      if (!feasible) continue;
      std::vector<size_t> mpick(c.n_obj(), 0);
      bool mdone = false;
      while (!mdone) {
        if (++examined > bound) throw BoundExceeded("hom_category: 2-cells");
        Modification cand;
        cand.source = out.objects[i];
        cand.target = out.objects[j];
        cand.component.resize(c.n_obj());
        for (ObjId u = 0; u < c.n_obj(); ++u)
          cand.component[u] = comps[u][mpick[u]].component;
        if (validate_modification(cand).ok()) {
          size_t idx = out.morphisms.size();
          std::string name = "m" + pad(idx) + ":p" + pad(i) + ">p" + pad(j);
          bld.morphism(name, "p" + pad(i), "p" + pad(j));
          index_of[cand.component] = idx;
          endpoints.emplace_back(i, j);
          out.morphisms.push_back(std::move(cand));
        }
        size_t pos = 0;
        while (pos < static_cast<size_t>(c.n_obj())) {
          if (++mpick[pos] < comps[pos].size()) break;
          mpick[pos] = 0;
          ++pos;
        }
        if (pos == static_cast<size_t>(c.n_obj())) mdone = true;
      }
    }

  auto mor_name = [&](size_t idx) {
    return "m" + pad(idx) + ":p" + pad(endpoints[idx].first) + ">p" +
           pad(endpoints[idx].second);
  };
  for (size_t i = 0; i < out.objects.size(); ++i) {
    Modification id = identity_modification(out.objects[i]);
    auto it = index_of.find(id.component);
    if (it == index_of.end()) throw Error("hom_category: identity 2-cell missing");
    bld.identity("p" + pad(i), mor_name(it->second));
  }
  for (size_t x = 0; x < out.morphisms.size(); ++x)
    for (size_t y = 0; y < out.morphisms.size(); ++y) {
      if (endpoints[y].first != endpoints[x].second) continue;
      Modification comp = mod_vcompose(out.morphisms[y], out.morphisms[x]);
      auto it = index_of.find(comp.component);
      if (it == index_of.end())
        throw Error("hom_category: composite 2-cell missing");
      bld.composite(mor_name(y), mor_name(x), mor_name(it->second));
    }
  out.cat = bld.build();
  return out;
}

std::vector<Modification> all_modifications(const PseudoNat& p,
                                            const PseudoNat& q, uint64_t bound,
                                            bool isos_only) {
  const FinCategory& c = p.source->site->c();
  std::vector<Modification> out;
  std::vector<std::vector<NatTrans>> comps(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    comps[u] = isos_only
                   ? all_natural_isos(p.component[u], q.component[u])
                   : all_nat_transformations(p.component[u], q.component[u]);
    if (comps[u].empty()) return out;
  }
  uint64_t examined = 0;
  std::vector<size_t> pick(c.n_obj(), 0);
  bool done = false;
  while (!done) {
    if (++examined > bound) throw BoundExceeded("all_modifications");
    Modification cand;
    cand.source = p;
    cand.target = q;
    cand.component.resize(c.n_obj());
    for (ObjId u = 0; u < c.n_obj(); ++u)
      cand.component[u] = comps[u][pick[u]].component;
    if (validate_modification(cand).ok()) out.push_back(std::move(cand));
    size_t pos = 0;
    while (pos < static_cast<size_t>(c.n_obj())) {
      if (++pick[pos] < comps[pos].size()) break;
      pick[pos] = 0;
      ++pos;
    }
    if (pos == static_cast<size_t>(c.n_obj())) done = true;
  }
  return out;
}

PseudoInverse pointwise_pseudoinverse(const PseudoNat& xi) {
  const FinCategory& c = xi.source->site->c();
  const Pseudofunctor& S = *xi.source;
  const Pseudofunctor& T = *xi.target;

  std::vector<AdjointEquivalence> adj(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    EquivalenceReport rep = check_equivalence(xi.component[u]);
    if (!rep.is_equivalence())
      throw NotPointwiseEquivalence("pointwise_pseudoinverse at " +
                                    c.obj_names[u] + ": " + rep.summary());
    adj[u] = promote_to_adjoint_equivalence(xi.component[u]);
  }

  PseudoNat inv;
  inv.source = xi.target;
  inv.target = xi.source;
  for (ObjId u = 0; u < c.n_obj(); ++u) inv.component.push_back(adj[u].backward);
  inv.coherence.resize(c.n_mor());
  for (MorId f = 0; f < c.n_mor(); ++f) {
    ObjId u = c.mor_cod[f], v = c.mor_dom[f];
    const FinCategory& sv = *S.fiber[v];
    inv.coherence[f].resize(T.fiber[u]->n_obj());
    for (ObjId t = 0; t < T.fiber[u]->n_obj(); ++t) {
      ObjId back_t = adj[u].backward.obj_map[t];
      // (ξ'_U t)·f -> ξ'_V ξ_V ((ξ'_U t)·f) -> ξ'_V (ξ_U(ξ'_U t)·f) -> ξ'_V(t·f)
      MorId u1 = adj[v].unit.component[S.rob(f, back_t)];
      MorId u2 = adj[v].backward.mor_map[xi.coherence[f][back_t]];
      MorId u3 = adj[v].backward.mor_map[T.rmor(f, adj[u].counit.component[t])];
      MorId fwd = sv.compose(u3, sv.compose(u2, u1));
      auto invm = inverse_of(sv, fwd);
      if (!invm) throw Error("pointwise_pseudoinverse: coherence not invertible");
      inv.coherence[f][t] = *invm;
    }
  }
  validate_pseudonat(inv).require("pointwise_pseudoinverse");

  PseudoInverse out;
  out.inverse = inv;
  out.unit.source = identity_pseudonat(xi.source);
  out.unit.target = compose_pseudonat(inv, xi);
  out.unit.component.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u)
    out.unit.component[u] = adj[u].unit.component;
  out.counit.source = compose_pseudonat(xi, inv);
  out.counit.target = identity_pseudonat(xi.target);
  out.counit.component.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u)
    out.counit.component[u] = adj[u].counit.component;
  validate_modification(out.unit).require("pointwise_pseudoinverse unit");
  validate_modification(out.counit).require("pointwise_pseudoinverse counit");
  return out;
}

}  // namespace descente
