#include "descente/fincat.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <map>
#include <sstream>

#include "descente/parallel.hpp"

namespace descente {

namespace par {
namespace {
Mode g_mode = Mode::OpenMP;
}
Mode mode() { return g_mode; }
void set_mode(Mode m) { g_mode = m; }
int max_threads() {
#ifdef DESCENTE_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}
}  // namespace par

uint64_t default_bound() {
  static uint64_t bound = [] {
    if (const char* env = std::getenv("DESCENTE_BOUND")) {
      char* end = nullptr;
      unsigned long long v = std::strtoull(env, &end, 10);
      if (end != env && v > 0) return static_cast<uint64_t>(v);
    }
    return static_cast<uint64_t>(1000000);
  }();
  return bound;
}

std::string ValidationReport::summary() const {
  if (ok()) return "ok";
  std::ostringstream os;
  os << violations.size() << " violation(s):";
  for (const auto& v : violations) os << "\n  [" << v.rule << "] " << v.witness;
  return os.str();
}

void ValidationReport::require(const std::string& context) const {
  if (!ok()) throw Error(context + ": " + summary());
}

MorId FinCategory::compose(MorId g, MorId f) const {
  if (!composable(g, f))
    throw Error("compose: not composable: " + mor_names[g] + " after " +
                mor_names[f]);
  MorId r = comp[static_cast<size_t>(g) * mor_names.size() + f];
  if (r == kNone)
    throw Error("compose: missing composite: " + mor_names[g] + " after " +
                mor_names[f]);
  return r;
}

MorId FinCategory::compose_path(const std::vector<MorId>& path) const {
  if (path.empty()) throw Error("compose_path: empty path");
  MorId acc = path.front();
  for (size_t i = 1; i < path.size(); ++i) acc = compose(path[i], acc);
  return acc;
}

ObjId FinCategory::obj_index(std::string_view name) const {
  auto it = std::lower_bound(obj_names.begin(), obj_names.end(), name);
  if (it == obj_names.end() || *it != name) return kNone;
  return static_cast<ObjId>(it - obj_names.begin());
}

MorId FinCategory::mor_index(std::string_view name) const {
  auto it = std::lower_bound(mor_names.begin(), mor_names.end(), name);
  if (it == mor_names.end() || *it != name) return kNone;
  return static_cast<MorId>(it - mor_names.begin());
}

std::vector<MorId> FinCategory::hom(ObjId a, ObjId b) const {
  std::vector<MorId> out;
  for (MorId m = 0; m < n_mor(); ++m)
    if (mor_dom[m] == a && mor_cod[m] == b) out.push_back(m);
  return out;
}

std::vector<MorId> FinCategory::arrows_into(ObjId u) const {
  std::vector<MorId> out;
  for (MorId m = 0; m < n_mor(); ++m)
    if (mor_cod[m] == u) out.push_back(m);
  return out;
}

bool FinCategory::is_identity(MorId m) const {
  return obj_identity[mor_dom[m]] == m;
}

CategoryBuilder& CategoryBuilder::object(const std::string& name) {
  objects_.push_back(name);
  return *this;
}

CategoryBuilder& CategoryBuilder::morphism(const std::string& name,
                                           const std::string& dom,
                                           const std::string& cod) {
  morphisms_.push_back({name, dom, cod});
  return *this;
}

CategoryBuilder& CategoryBuilder::identity(const std::string& obj,
                                           const std::string& mor) {
  identities_.emplace_back(obj, mor);
  return *this;
}

CategoryBuilder& CategoryBuilder::composite(const std::string& g,
                                            const std::string& f,
                                            const std::string& gf) {
  composites_.push_back({g, f, gf});
  return *this;
}

CatPtr CategoryBuilder::build() const {
  auto cat = std::make_shared<FinCategory>();
  cat->obj_names = objects_;
  std::sort(cat->obj_names.begin(), cat->obj_names.end());
  cat->obj_names.erase(
      std::unique(cat->obj_names.begin(), cat->obj_names.end()),
      cat->obj_names.end());
  if (cat->obj_names.size() != objects_.size())
    throw Error("CategoryBuilder: duplicate object name");

  for (const auto& m : morphisms_) cat->mor_names.push_back(m.name);
  std::sort(cat->mor_names.begin(), cat->mor_names.end());
  cat->mor_names.erase(
      std::unique(cat->mor_names.begin(), cat->mor_names.end()),
      cat->mor_names.end());
  if (cat->mor_names.size() != morphisms_.size())
    throw Error("CategoryBuilder: duplicate morphism name");

  const int n_obj = cat->n_obj();
  const int n_mor = cat->n_mor();
  cat->mor_dom.assign(n_mor, kNone);
  cat->mor_cod.assign(n_mor, kNone);
  cat->obj_identity.assign(n_obj, kNone);
  cat->comp.assign(static_cast<size_t>(n_mor) * n_mor, kNone);

  auto need_obj = [&](const std::string& s) {
    ObjId o = cat->obj_index(s);
    if (o == kNone) throw Error("CategoryBuilder: unknown object " + s);
    return o;
  };
  auto need_mor = [&](const std::string& s) {
    MorId m = cat->mor_index(s);
    if (m == kNone) throw Error("CategoryBuilder: unknown morphism " + s);
    return m;
  };

  for (const auto& m : morphisms_) {
    MorId id = need_mor(m.name);
    cat->mor_dom[id] = need_obj(m.dom);
    cat->mor_cod[id] = need_obj(m.cod);
  }
  for (const auto& [obj, mor] : identities_) {
    cat->obj_identity[need_obj(obj)] = need_mor(mor);
  }
  for (ObjId o = 0; o < n_obj; ++o)
    if (cat->obj_identity[o] == kNone)
      throw Error("CategoryBuilder: no identity for object " +
                  cat->obj_names[o]);
  // Identity composites are implied.
  for (MorId m = 0; m < n_mor; ++m) {
    cat->comp[static_cast<size_t>(m) * n_mor +
              cat->obj_identity[cat->mor_dom[m]]] = m;
    cat->comp[static_cast<size_t>(cat->obj_identity[cat->mor_cod[m]]) * n_mor +
              m] = m;
  }
  for (const auto& [g, f, gf] : composites_) {
    MorId gi = need_mor(g), fi = need_mor(f), gfi = need_mor(gf);
    size_t cell = static_cast<size_t>(gi) * n_mor + fi;
    if (cat->comp[cell] != kNone && cat->comp[cell] != gfi)
      throw Error("CategoryBuilder: conflicting composite for " + g + " after " +
                  f);
    cat->comp[cell] = gfi;
  }
  return cat;
}

ValidationReport validate_category(const FinCategory& c) {
  ValidationReport report;
  const int n_mor = c.n_mor();
  for (ObjId o = 0; o < c.n_obj(); ++o) {
    MorId id = c.obj_identity[o];
    if (id == kNone) {
      report.add("identity", "object " + c.obj_names[o] + " has no identity");
      continue;
    }
    if (c.mor_dom[id] != o || c.mor_cod[id] != o)
      report.add("identity",
                 "identity of " + c.obj_names[o] + " is not an endo-arrow");
  }

  for (MorId m = 0; m < n_mor; ++m) {
    if (c.mor_dom[m] == kNone || c.mor_cod[m] == kNone) {
      report.add("dom/cod", "morphism " + c.mor_names[m] + " untyped");
      continue;
    }
    MorId idd = c.obj_identity[c.mor_dom[m]];
    MorId idc = c.obj_identity[c.mor_cod[m]];
    if (idd != kNone && c.comp[static_cast<size_t>(m) * n_mor + idd] != m)
      report.add("unit", c.mor_names[m] + " ∘ 1 != " + c.mor_names[m]);
    if (idc != kNone && c.comp[static_cast<size_t>(idc) * n_mor + m] != m)
      report.add("unit", "1 ∘ " + c.mor_names[m] + " != " + c.mor_names[m]);
  }

  // Totality and typing of the composition table over composable pairs.
  for (MorId g = 0; g < n_mor; ++g) {
    for (MorId f = 0; f < n_mor; ++f) {
      MorId r = c.comp[static_cast<size_t>(g) * n_mor + f];
      if (!c.composable(g, f)) {
        if (r != kNone)
          report.add("compose", "composite defined for non-composable pair (" +
                                    c.mor_names[g] + ", " + c.mor_names[f] +
                                    ")");
        continue;
      }
      if (r == kNone) {
        report.add("compose", "missing composite " + c.mor_names[g] +
                                  " after " + c.mor_names[f]);
      } else if (c.mor_dom[r] != c.mor_dom[f] || c.mor_cod[r] != c.mor_cod[g]) {
        report.add("compose", "composite " + c.mor_names[g] + " after " +
                                  c.mor_names[f] + " has wrong endpoints");
      }
    }
  }
  if (!report.ok()) return report;  // associativity needs a total table

  // Associativity over every composable triple, in parallel.
  const int64_t total = static_cast<int64_t>(n_mor) * n_mor * n_mor;
  auto assoc_ok = [&](int64_t idx) {
    MorId h = static_cast<MorId>(idx / (n_mor * n_mor));
    MorId g = static_cast<MorId>((idx / n_mor) % n_mor);
    MorId f = static_cast<MorId>(idx % n_mor);
    if (!c.composable(g, f) || !c.composable(h, g)) return true;
    MorId gf = c.comp[static_cast<size_t>(g) * n_mor + f];
    MorId hg = c.comp[static_cast<size_t>(h) * n_mor + g];
    return c.comp[static_cast<size_t>(h) * n_mor + gf] ==
           c.comp[static_cast<size_t>(hg) * n_mor + f];
  };
  int64_t bad = par::first_failure(total, assoc_ok);
  while (bad != -1) {
    MorId h = static_cast<MorId>(bad / (n_mor * n_mor));
    MorId g = static_cast<MorId>((bad / n_mor) % n_mor);
    MorId f = static_cast<MorId>(bad % n_mor);
    report.add("associativity", "(" + c.mor_names[h] + ", " + c.mor_names[g] +
                                    ", " + c.mor_names[f] + ")");
    if (bad + 1 >= total) break;
    int64_t next = par::first_failure(total - bad - 1, [&](int64_t i) {
      return assoc_ok(bad + 1 + i);
    });
    bad = next == -1 ? -1 : bad + 1 + next;
  }
  return report;
}

std::optional<MorId> inverse_of(const FinCategory& c, MorId m) {
  ObjId a = c.mor_dom[m], b = c.mor_cod[m];
  for (MorId i : c.hom(b, a)) {
    if (c.compose(i, m) == c.obj_identity[a] &&
        c.compose(m, i) == c.obj_identity[b])
      return i;
  }
  return std::nullopt;
}

bool Functor::operator==(const Functor& other) const {
  return obj_map == other.obj_map && mor_map == other.mor_map &&
         (src == other.src || *src == *other.src) &&
         (dst == other.dst || *dst == *other.dst);
}

Functor identity_functor(const CatPtr& c) {
  Functor f;
  f.src = f.dst = c;
  f.obj_map.resize(c->n_obj());
  f.mor_map.resize(c->n_mor());
  for (ObjId o = 0; o < c->n_obj(); ++o) f.obj_map[o] = o;
  for (MorId m = 0; m < c->n_mor(); ++m) f.mor_map[m] = m;
  return f;
}

Functor compose(const Functor& g, const Functor& f) {
  if (!(*f.dst == *g.src)) throw Error("compose(Functor): middle mismatch");
  Functor r;
  r.src = f.src;
  r.dst = g.dst;
  r.obj_map.resize(f.obj_map.size());
  r.mor_map.resize(f.mor_map.size());
  for (size_t o = 0; o < f.obj_map.size(); ++o)
    r.obj_map[o] = g.obj_map[f.obj_map[o]];
  for (size_t m = 0; m < f.mor_map.size(); ++m)
    r.mor_map[m] = g.mor_map[f.mor_map[m]];
  return r;
}

Functor constant_functor(const CatPtr& src, const CatPtr& dst, ObjId target) {
  Functor f;
  f.src = src;
  f.dst = dst;
  f.obj_map.assign(src->n_obj(), target);
  f.mor_map.assign(src->n_mor(), dst->obj_identity[target]);
  return f;
}

ValidationReport validate_functor(const Functor& f) {
  ValidationReport report;
  const FinCategory& c = *f.src;
  const FinCategory& d = *f.dst;
  if (f.obj_map.size() != static_cast<size_t>(c.n_obj()) ||
      f.mor_map.size() != static_cast<size_t>(c.n_mor())) {
    report.add("shape", "object/morphism map sizes do not match source");
    return report;
  }
  for (MorId m = 0; m < c.n_mor(); ++m) {
    MorId fm = f.mor_map[m];
    if (d.mor_dom[fm] != f.obj_map[c.mor_dom[m]] ||
        d.mor_cod[fm] != f.obj_map[c.mor_cod[m]])
      report.add("dom/cod", "image of " + c.mor_names[m] + " mistyped");
  }
  for (ObjId o = 0; o < c.n_obj(); ++o)
    if (f.mor_map[c.obj_identity[o]] != d.obj_identity[f.obj_map[o]])
      report.add("identity", "identity of " + c.obj_names[o] + " not preserved");
  for (MorId g = 0; g < c.n_mor(); ++g)
    for (MorId m = 0; m < c.n_mor(); ++m) {
      if (!c.composable(g, m)) continue;
      if (f.mor_map[c.compose(g, m)] !=
          d.compose(f.mor_map[g], f.mor_map[m]))
        report.add("composition", "(" + c.mor_names[g] + ", " + c.mor_names[m] +
                                      ") not preserved");
    }
  return report;
}

bool NatTrans::operator==(const NatTrans& other) const {
  return component == other.component && source == other.source &&
         target == other.target;
}

NatTrans identity_nat(const Functor& f) {
  NatTrans n;
  n.source = n.target = f;
  n.component.resize(f.obj_map.size());
  for (size_t o = 0; o < f.obj_map.size(); ++o)
    n.component[o] = f.dst->obj_identity[f.obj_map[o]];
  return n;
}

ValidationReport validate_nat_trans(const NatTrans& n) {
  ValidationReport report;
  const FinCategory& c = *n.source.src;
  const FinCategory& d = *n.source.dst;
  if (!(n.source.src == n.target.src || *n.source.src == *n.target.src) ||
      !(n.source.dst == n.target.dst || *n.source.dst == *n.target.dst)) {
    report.add("shape", "source/target functors not parallel");
    return report;
  }
  if (n.component.size() != static_cast<size_t>(c.n_obj())) {
    report.add("shape", "component count mismatch");
    return report;
  }
  for (ObjId o = 0; o < c.n_obj(); ++o) {
    MorId comp = n.component[o];
    if (d.mor_dom[comp] != n.source.obj_map[o] ||
        d.mor_cod[comp] != n.target.obj_map[o])
      report.add("component", "component at " + c.obj_names[o] + " mistyped");
  }
  if (!report.ok()) return report;
  for (MorId m = 0; m < c.n_mor(); ++m) {
    ObjId a = c.mor_dom[m], b = c.mor_cod[m];
    if (d.compose(n.component[b], n.source.mor_map[m]) !=
        d.compose(n.target.mor_map[m], n.component[a]))
      report.add("naturality", "square at " + c.mor_names[m] + " fails");
  }
  return report;
}

bool nat_is_iso(const NatTrans& n) {
  const FinCategory& d = *n.source.dst;
  for (MorId comp : n.component)
    if (!inverse_of(d, comp)) return false;
  return true;
}

NatTrans nat_inverse(const NatTrans& n) {
  NatTrans r;
  r.source = n.target;
  r.target = n.source;
  r.component.resize(n.component.size());
  const FinCategory& d = *n.source.dst;
  for (size_t o = 0; o < n.component.size(); ++o) {
    auto inv = inverse_of(d, n.component[o]);
    if (!inv) throw Error("nat_inverse: component not invertible");
    r.component[o] = *inv;
  }
  return r;
}

NatTrans nat_vcompose(const NatTrans& b, const NatTrans& a) {
  if (!(a.target == b.source))
    throw Error("nat_vcompose: middle functor mismatch");
  NatTrans r;
  r.source = a.source;
  r.target = b.target;
  r.component.resize(a.component.size());
  const FinCategory& d = *a.source.dst;
  for (size_t o = 0; o < a.component.size(); ++o)
    r.component[o] = d.compose(b.component[o], a.component[o]);
  return r;
}

NatTrans whisker_left(const Functor& g, const NatTrans& n) {
  NatTrans r;
  r.source = compose(g, n.source);
  r.target = compose(g, n.target);
  r.component.resize(n.component.size());
  for (size_t o = 0; o < n.component.size(); ++o)
    r.component[o] = g.mor_map[n.component[o]];
  return r;
}

NatTrans whisker_right(const NatTrans& n, const Functor& h) {
  NatTrans r;
  r.source = compose(n.source, h);
  r.target = compose(n.target, h);
  r.component.resize(h.obj_map.size());
  for (size_t o = 0; o < h.obj_map.size(); ++o)
    r.component[o] = n.component[h.obj_map[o]];
  return r;
}

std::string EquivalenceReport::summary() const {
  std::ostringstream os;
  os << (full ? "full" : "not full (" + full_witness + ")") << ", "
     << (faithful ? "faithful" : "not faithful (" + faithful_witness + ")")
     << ", "
     << (ess_surjective ? "essentially surjective"
                        : "not essentially surjective (" + ess_witness + ")");
  return os.str();
}

EquivalenceReport check_equivalence(const Functor& f) {
  EquivalenceReport rep;
  const FinCategory& c = *f.src;
  const FinCategory& d = *f.dst;

  for (MorId m = 0; m < c.n_mor() && rep.faithful; ++m)
    for (MorId m2 = m + 1; m2 < c.n_mor(); ++m2) {
      if (c.mor_dom[m] != c.mor_dom[m2] || c.mor_cod[m] != c.mor_cod[m2])
        continue;
      if (f.mor_map[m] == f.mor_map[m2]) {
        rep.faithful = false;
        rep.faithful_witness = c.mor_names[m] + " vs " + c.mor_names[m2];
        break;
      }
    }

  for (ObjId a = 0; a < c.n_obj() && rep.full; ++a)
    for (ObjId b = 0; b < c.n_obj() && rep.full; ++b) {
      for (MorId n : d.hom(f.obj_map[a], f.obj_map[b])) {
        bool hit = false;
        for (MorId m : c.hom(a, b))
          if (f.mor_map[m] == n) {
            hit = true;
            break;
          }
        if (!hit) {
          rep.full = false;
          rep.full_witness = d.mor_names[n] + " not hit from hom(" +
                             c.obj_names[a] + ", " + c.obj_names[b] + ")";
          break;
        }
      }
    }

  for (ObjId dObj = 0; dObj < d.n_obj(); ++dObj) {
    bool hit = false;
    for (ObjId a = 0; a < c.n_obj() && !hit; ++a)
      for (MorId m : d.hom(f.obj_map[a], dObj))
        if (inverse_of(d, m)) {
          hit = true;
          break;
        }
    if (!hit) {
      rep.ess_surjective = false;
      rep.ess_witness = d.obj_names[dObj];
      break;
    }
  }
  return rep;
}

ValidationReport validate_adjoint_equivalence(const AdjointEquivalence& e) {
  ValidationReport report;
  auto unit_rep = validate_nat_trans(e.unit);
  auto counit_rep = validate_nat_trans(e.counit);
  for (auto& v : unit_rep.violations) report.add("unit " + v.rule, v.witness);
  for (auto& v : counit_rep.violations)
    report.add("counit " + v.rule, v.witness);
  if (!nat_is_iso(e.unit)) report.add("unit", "component not invertible");
  if (!nat_is_iso(e.counit)) report.add("counit", "component not invertible");
  if (!report.ok()) return report;

  const FinCategory& c = *e.forward.src;
  const FinCategory& d = *e.forward.dst;
  // ε_{Fa} ∘ F(η_a) = 1_{Fa} and G(ε_d) ∘ η_{Gd} = 1_{Gd}.
  for (ObjId a = 0; a < c.n_obj(); ++a) {
    MorId lhs = d.compose(e.counit.component[e.forward.obj_map[a]],
                          e.forward.mor_map[e.unit.component[a]]);
    if (lhs != d.obj_identity[e.forward.obj_map[a]])
      report.add("triangle-1", c.obj_names[a]);
  }
  for (ObjId x = 0; x < d.n_obj(); ++x) {
    MorId lhs = c.compose(e.backward.mor_map[e.counit.component[x]],
                          e.unit.component[e.backward.obj_map[x]]);
    if (lhs != c.obj_identity[e.backward.obj_map[x]])
      report.add("triangle-2", d.obj_names[x]);
  }
  return report;
}

AdjointEquivalence promote_to_adjoint_equivalence(const Functor& f) {
  EquivalenceReport rep = check_equivalence(f);
  if (!rep.is_equivalence())
    throw NotAnEquivalence("promote_to_adjoint_equivalence: " + rep.summary());

  const FinCategory& c = *f.src;
  const FinCategory& d = *f.dst;

  AdjointEquivalence adj;
  adj.forward = f;
  adj.backward.src = f.dst;
  adj.backward.dst = f.src;
  adj.backward.obj_map.assign(d.n_obj(), kNone);
  adj.backward.mor_map.assign(d.n_mor(), kNone);
  adj.counit.component.assign(d.n_obj(), kNone);

  // For each x in d choose (a, iso F(a) -> x): exact preimages with the
  // identity iso come first, then the first candidate in canonical order.
  for (ObjId x = 0; x < d.n_obj(); ++x) {
    for (ObjId a = 0; a < c.n_obj(); ++a)
      if (f.obj_map[a] == x) {
        adj.backward.obj_map[x] = a;
        adj.counit.component[x] = d.obj_identity[x];
        break;
      }
    for (ObjId a = 0; a < c.n_obj() && adj.backward.obj_map[x] == kNone; ++a)
      for (MorId m : d.hom(f.obj_map[a], x)) {
        if (inverse_of(d, m)) {
          adj.backward.obj_map[x] = a;
          adj.counit.component[x] = m;  // ε_x : F(G x) -> x
          break;
        }
      }
  }
  // Backward action on morphisms via the canonical lift of ε-conjugates.
  for (MorId n = 0; n < d.n_mor(); ++n) {
    ObjId x = d.mor_dom[n], y = d.mor_cod[n];
    MorId eps_x = adj.counit.component[x];
    MorId eps_y_inv = *inverse_of(d, adj.counit.component[y]);
    MorId conj = d.compose(eps_y_inv, d.compose(n, eps_x));
    adj.backward.mor_map[n] = canonical_lift(f, adj.backward.obj_map[x],
                                             adj.backward.obj_map[y], conj);
  }
  validate_functor(adj.backward).require("promoted backward functor");

  adj.unit.source = identity_functor(f.src);
  adj.unit.target = compose(adj.backward, adj.forward);
  adj.unit.component.assign(c.n_obj(), kNone);
  for (ObjId a = 0; a < c.n_obj(); ++a) {
    ObjId fa = f.obj_map[a];
    MorId eps_inv = *inverse_of(d, adj.counit.component[fa]);
    adj.unit.component[a] =
        canonical_lift(f, a, adj.backward.obj_map[fa], eps_inv);
  }
  adj.counit.source = compose(adj.forward, adj.backward);
  adj.counit.target = identity_functor(f.dst);

  validate_adjoint_equivalence(adj).require("promote_to_adjoint_equivalence");
  return adj;
}

MorId canonical_lift(const Functor& ff, ObjId dom, ObjId cod, MorId image) {
  const FinCategory& c = *ff.src;
  MorId found = kNone;
  for (MorId m : c.hom(dom, cod)) {
    if (ff.mor_map[m] == image) {
      if (found != kNone)
        throw Error("canonical_lift: non-unique preimage (functor not faithful)");
      found = m;
    }
  }
  if (found == kNone)
    throw Error("canonical_lift: no preimage (functor not full at " +
                c.obj_names[dom] + " -> " + c.obj_names[cod] + ")");
  return found;
}

namespace {

// Depth-first enumeration of strict functors in lexicographic order.  The
// object map is chosen first, then morphism images for non-forced morphisms;
// identities are forced and composites are checked as soon as both factors
// are assigned.
struct FunctorSearch {
  const FinCategory& c;
  const FinCategory& d;
  const CatPtr& cp;
  const CatPtr& dp;
  uint64_t bound;
  uint64_t examined = 0;
  const std::function<bool(const Functor&)>& yield;
  std::vector<ObjId> obj_map;
  std::vector<MorId> mor_map;
  std::vector<MorId> non_identity;
  bool stopped = false;

  bool mor_consistent(MorId just_set) {
    for (MorId g = 0; g < c.n_mor(); ++g) {
      if (mor_map[g] == kNone) continue;
      if (c.composable(g, just_set)) {
        MorId gf = c.compose(g, just_set);
        if (mor_map[gf] != kNone &&
            d.compose(mor_map[g], mor_map[just_set]) != mor_map[gf])
          return false;
      }
      if (c.composable(just_set, g)) {
        MorId fg = c.compose(just_set, g);
        if (mor_map[fg] != kNone &&
            d.compose(mor_map[just_set], mor_map[g]) != mor_map[fg])
          return false;
      }
    }
    return true;
  }

  void assign_mor(size_t idx) {
    if (stopped) return;
    if (idx == non_identity.size()) {
      Functor f;
      f.src = cp;
      f.dst = dp;
      f.obj_map = obj_map;
      f.mor_map = mor_map;
      if (!yield(f)) stopped = true;
      return;
    }
    MorId m = non_identity[idx];
    // Forced by an earlier composite assignment.
    if (mor_map[m] != kNone) {
      assign_mor(idx + 1);
      return;
    }
    ObjId a = obj_map[c.mor_dom[m]], b = obj_map[c.mor_cod[m]];
    for (MorId n : d.hom(a, b)) {
      if (++examined > bound) throw BoundExceeded("enumerate_functors");
      mor_map[m] = n;
      if (mor_consistent(m)) assign_mor(idx + 1);
      mor_map[m] = kNone;
      if (stopped) return;
    }
  }

  void assign_obj(ObjId o) {
    if (stopped) return;
    if (o == c.n_obj()) {
      mor_map.assign(c.n_mor(), kNone);
      for (ObjId u = 0; u < c.n_obj(); ++u)
        mor_map[c.obj_identity[u]] = d.obj_identity[obj_map[u]];
      non_identity.clear();
      for (MorId m = 0; m < c.n_mor(); ++m)
        if (!c.is_identity(m)) non_identity.push_back(m);
      assign_mor(0);
      return;
    }
    for (ObjId x = 0; x < d.n_obj(); ++x) {
      if (++examined > bound) throw BoundExceeded("enumerate_functors");
      obj_map[o] = x;
      assign_obj(o + 1);
      if (stopped) return;
    }
  }
};

}  // namespace

void enumerate_functors(const CatPtr& c, const CatPtr& d, uint64_t bound,
                        const std::function<bool(const Functor&)>& yield) {
  if (c->n_obj() > 0 && d->n_obj() == 0) return;  // no functor can exist
  FunctorSearch search{*c, *d, c, d, bound, 0, yield, {}, {}, {}, false};
  search.obj_map.assign(c->n_obj(), kNone);
  search.assign_obj(0);
}

std::vector<Functor> all_functors(const CatPtr& c, const CatPtr& d,
                                  uint64_t bound) {
  std::vector<Functor> out;
  enumerate_functors(c, d, bound, [&](const Functor& f) {
    out.push_back(f);
    return true;
  });
  return out;
}

void enumerate_nat_transformations(
    const Functor& f, const Functor& g,
    const std::function<bool(const NatTrans&)>& yield) {
  const FinCategory& c = *f.src;
  const FinCategory& d = *f.dst;
  if (!(f.src == g.src || *f.src == *g.src) ||
      !(f.dst == g.dst || *f.dst == *g.dst))
    throw Error("enumerate_nat_transformations: functors not parallel");

  std::vector<MorId> component(c.n_obj(), kNone);
  bool stopped = false;

  // Naturality for m is checked once both endpoint components are set.
  std::function<void(ObjId)> rec = [&](ObjId o) {
    if (stopped) return;
    if (o == c.n_obj()) {
      NatTrans n;
      n.source = f;
      n.target = g;
      n.component = component;
      if (!yield(n)) stopped = true;
      return;
    }
    for (MorId cand : d.hom(f.obj_map[o], g.obj_map[o])) {
      component[o] = cand;
      bool ok = true;
      for (MorId m = 0; m < c.n_mor() && ok; ++m) {
        ObjId a = c.mor_dom[m], b = c.mor_cod[m];
        if (a > o || b > o) continue;
        if (d.compose(component[b], f.mor_map[m]) !=
            d.compose(g.mor_map[m], component[a]))
          ok = false;
      }
      if (ok) rec(o + 1);
      component[o] = kNone;
      if (stopped) return;
    }
  };
  rec(0);
}

std::vector<NatTrans> all_nat_transformations(const Functor& f,
                                              const Functor& g) {
  std::vector<NatTrans> out;
  enumerate_nat_transformations(f, g, [&](const NatTrans& n) {
    out.push_back(n);
    return true;
  });
  return out;
}

std::vector<NatTrans> all_natural_isos(const Functor& f, const Functor& g) {
  std::vector<NatTrans> out;
  enumerate_nat_transformations(f, g, [&](const NatTrans& n) {
    if (nat_is_iso(n)) out.push_back(n);
    return true;
  });
  return out;
}

}  // namespace descente
