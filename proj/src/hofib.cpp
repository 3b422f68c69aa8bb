#include "descente/hofib.hpp"

#include <algorithm>
#include <sstream>

namespace descente {

ValidationReport validate_square(const Square& s) {
  ValidationReport report;
  for (auto [name, part] :
       {std::pair<const char*, const PseudoNat*>{"left", &s.left},
        {"right", &s.right},
        {"top", &s.top},
        {"bottom", &s.bottom}}) {
    auto r = validate_pseudonat(*part);
    if (!r.ok()) report.add(name, r.summary());
  }
  auto g = validate_modification(s.gamma);
  if (!g.ok()) report.add("gamma", g.summary());
  if (!modification_is_iso(s.gamma)) report.add("gamma", "not invertible");
  if (!pseudonat_equal(s.gamma.source, compose_pseudonat(s.right, s.top)))
    report.add("gamma", "source is not right∘top");
  if (!pseudonat_equal(s.gamma.target, compose_pseudonat(s.bottom, s.left)))
    report.add("gamma", "target is not bottom∘left");
  return report;
}

bool check_square_cell(const Square& s, const Square& s_prime,
                       const SquareCell& cell) {
  if (!modification_is_iso(cell.phi0) || !modification_is_iso(cell.phi1))
    return false;
  // γ'·(g*φ0) = (φ1*f)·γ
  Modification lhs =
      mod_vcompose(s_prime.gamma, mod_whisker_left(s.right, cell.phi0));
  Modification rhs =
      mod_vcompose(mod_whisker_right(cell.phi1, s.left), s.gamma);
  return lhs.component == rhs.component;
}

Square square_hcompose(const Square& s2, const Square& s1) {
  // s1 : f -> g, s2 : g -> i; the composite 2-cell is (m*γ1)·(δ*h1), the
  // associators being identities in the strict setting.
  Square out;
  out.left = s1.left;
  out.right = s2.right;
  out.top = compose_pseudonat(s2.top, s1.top);
  out.bottom = compose_pseudonat(s2.bottom, s1.bottom);
  Modification first = mod_whisker_right(s2.gamma, s1.top);
  Modification second = mod_whisker_left(s2.bottom, s1.gamma);
  out.gamma = mod_vcompose(second, first);
  out.gamma.source = compose_pseudonat(out.right, out.top);
  out.gamma.target = compose_pseudonat(out.bottom, out.left);
  return out;
}

ValidationReport validate_lift(const Square& s, const LiftSolution& sol) {
  ValidationReport report;
  auto lr = validate_pseudonat(sol.l);
  if (!lr.ok()) report.add("l", lr.summary());
  auto lam = validate_modification(sol.lambda);
  if (!lam.ok()) report.add("lambda", lam.summary());
  auto rho = validate_modification(sol.rho);
  if (!rho.ok()) report.add("rho", rho.summary());
  if (!report.ok()) return report;
  if (!modification_is_iso(sol.lambda)) report.add("lambda", "not invertible");
  if (!modification_is_iso(sol.rho)) report.add("rho", "not invertible");
  if (!pseudonat_equal(sol.lambda.source, s.top))
    report.add("lambda", "source is not the top map");
  if (!pseudonat_equal(sol.lambda.target, compose_pseudonat(sol.l, s.left)))
    report.add("lambda", "target is not l∘left");
  if (!pseudonat_equal(sol.rho.source, compose_pseudonat(s.right, sol.l)))
    report.add("rho", "source is not right∘l");
  if (!pseudonat_equal(sol.rho.target, s.bottom))
    report.add("rho", "target is not the bottom map");
  if (!report.ok()) return report;

  // Pasting equality γ = (ρ*f)·(g*λ), componentwise.
  Modification paste = mod_vcompose(mod_whisker_right(sol.rho, s.left),
                                    mod_whisker_left(s.right, sol.lambda));
  if (paste.component != s.gamma.component)
    report.add("pasting", "γ differs from (ρ*f)·(g*λ)");
  return report;
}

std::optional<LiftSolution> search_lift(const Square& s, uint64_t bound) {
  HomCategory candidates = hom_category(s.left.target, s.right.source, bound);
  for (const PseudoNat& l : candidates.objects) {
    PseudoNat li = compose_pseudonat(l, s.left);
    PseudoNat gl = compose_pseudonat(s.right, l);
    std::vector<Modification> lambdas =
        all_modifications(s.top, li, bound, /*isos_only=*/true);
    if (lambdas.empty()) continue;
    std::vector<Modification> rhos =
        all_modifications(gl, s.bottom, bound, /*isos_only=*/true);
    for (const Modification& lambda : lambdas)
      for (const Modification& rho : rhos) {
        Modification paste = mod_vcompose(mod_whisker_right(rho, s.left),
                                          mod_whisker_left(s.right, lambda));
        if (paste.component == s.gamma.component)
          return LiftSolution{l, lambda, rho};
      }
  }
  return std::nullopt;
}

namespace {

struct ObjectLift {
  Sieve cover;
  DescentObject dd;       // lwe-descent datum in Desc(i, cover)
  DescentCategory d_i;    // Desc(i, cover)
  DescentCategory d_p;    // Desc(p, cover)
  Functor push;           // (h,k,γ)_* : d_i -> d_p
  ObjId dd_id = kNone;
  ObjId chat_id = kNone;  // pushed datum in d_p
  ObjId l_obj = kNone;    // chosen amalgamation in E(u)
  MorId chi = kNone;      // iso Φ(l_obj) -> chat in d_p
};

}  // namespace

LiftSolution construct_lift(const Square& s, uint64_t bound) {
  const PseudoNat& i = s.left;
  const PseudoNat& p = s.right;
  const PseudoNat& h = s.top;
  const PseudoNat& k = s.bottom;
  const Pseudofunctor& A = *i.source;
  const Pseudofunctor& Cc = *i.target;
  const Pseudofunctor& E = *p.source;
  const Site& site = *A.site;
  const FinCategory& c = site.c();

  LweReport lwe = is_lwe(i, bound);
  if (!lwe.ok) throw NotLWE("construct_lift: " + lwe.witness);
  Judgment fib = is_local_fibration(p, bound);
  if (!fib.ok) throw NotLocalFibration("construct_lift: " + fib.witness);

  // Per-object data: lwe-descent, pushforward, amalgamation.
  std::vector<std::vector<ObjectLift>> lift(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    lift[u].resize(Cc.fib(u).n_obj());
    for (ObjId cobj = 0; cobj < Cc.fib(u).n_obj(); ++cobj) {
      ObjectLift& ol = lift[u][cobj];
      LweDescent ld = descent_from_lwe(i, u, cobj, bound);
      ol.cover = ld.cover;
      ol.dd = ld.obj;
      Cover cover = Cover::from_sieve(ld.cover);
      ol.d_i = build_descent_category(i, cover, bound);
      ol.d_p = build_descent_category(p, cover, bound);
      ol.dd_id = ol.d_i.find_object(ol.dd);
      if (ol.dd_id == kNone)
        throw InternalAmalgamationFailure(
            "construct_lift: lwe-descent datum missing from Desc(i, S)");
      ol.push = pushforward_square(ol.d_i, ol.d_p, h, k, s.gamma);
      ol.chat_id = ol.push.obj_map[ol.dd_id];
      try {
        Amalgamation am = amalgamate(ol.d_p, ol.d_p.objects[ol.chat_id]);
        ol.l_obj = am.object;
        ol.chi = am.iso;
      } catch (const NoAmalgamation& e) {
        throw InternalAmalgamationFailure(std::string("construct_lift: ") +
                                          e.what());
      }
    }
  }

  auto sieve_pos = [](const Sieve& sv, MorId m) {
    auto it = std::lower_bound(sv.arrows.begin(), sv.arrows.end(), m);
    if (it == sv.arrows.end() || *it != m)
      throw Error("construct_lift: arrow not in sieve");
    return static_cast<size_t>(it - sv.arrows.begin());
  };

  // l on objects and morphisms; arrows glue over the intersection cover.
  PseudoNat l;
  l.source = i.target;
  l.target = p.source;
  l.component.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    Functor lu;
    lu.src = Cc.fiber[u];
    lu.dst = E.fiber[u];
    lu.obj_map.resize(Cc.fib(u).n_obj());
    lu.mor_map.resize(Cc.fib(u).n_mor());
    for (ObjId cobj = 0; cobj < Cc.fib(u).n_obj(); ++cobj)
      lu.obj_map[cobj] = lift[u][cobj].l_obj;
    for (MorId m = 0; m < Cc.fib(u).n_mor(); ++m) {
      ObjId cfrom = Cc.fib(u).mor_dom[m], cto = Cc.fib(u).mor_cod[m];
      const ObjectLift& oc = lift[u][cfrom];
      const ObjectLift& od = lift[u][cto];
      Sieve w_sieve = sieve_intersection(oc.cover, od.cover);
      Cover w_cover = Cover::from_sieve(w_sieve);
      DescentCategory d_pw = build_descent_category(p, w_cover, bound);
      Functor rest_c = restrict_to_subcover(oc.d_p, d_pw);
      Functor rest_d = restrict_to_subcover(od.d_p, d_pw);

      DescentMorphism pushed;
      pushed.base = k.component[u].mor_map[m];
      pushed.section.resize(w_sieve.arrows.size());
      for (size_t a = 0; a < w_sieve.arrows.size(); ++a) {
        MorId w = w_sieve.arrows[a];
        ObjId v = c.mor_dom[w];
        size_t pc = sieve_pos(oc.cover, w);
        size_t pd = sieve_pos(od.cover, w);
        const FinCategory& fib = Cc.fib(v);
        MorId comp =
            fib.compose(*inverse_of(fib, od.dd.psi[pd]),
                        fib.compose(Cc.rmor(w, m), oc.dd.psi[pc]));
        MorId lifted = canonical_lift(i.component[v], oc.dd.section[pc],
                                      od.dd.section[pd], comp);
        pushed.section[a] = h.component[v].mor_map[lifted];
      }
      MorId pushed_id = d_pw.find_morphism(rest_c.obj_map[oc.chat_id],
                                           rest_d.obj_map[od.chat_id], pushed);
      if (pushed_id == kNone)
        throw InternalAmalgamationFailure(
            "construct_lift: pushed morphism is not valid descent data");
      MorId chi_c = rest_c.mor_map[oc.chi];
      MorId chi_d = rest_d.mor_map[od.chi];
      MorId total = d_pw.cat->compose(
          *inverse_of(*d_pw.cat, chi_d), d_pw.cat->compose(pushed_id, chi_c));
      const DescentMorphism& tm = d_pw.morphisms[total];
      MorId glued = glue_hom_family(
          E, u, oc.l_obj, od.l_obj, w_sieve,
          [&](MorId w) { return tm.section[sieve_pos(w_sieve, w)]; });
      if (glued == kNone)
        throw InternalAmalgamationFailure(
            "construct_lift: morphism family does not glue");
      lu.mor_map[m] = glued;
    }
    auto fr = validate_functor(lu);
    if (!fr.ok())
      throw InternalAmalgamationFailure("construct_lift: l at " +
                                        c.obj_names[u] + ": " + fr.summary());
    l.component[u] = std::move(lu);
  }

  // Coherence cells of l, glued over pulled-back ∩ chosen covers.
  l.coherence.resize(c.n_mor());
  for (MorId g = 0; g < c.n_mor(); ++g) {
    ObjId u = c.mor_cod[g], v = c.mor_dom[g];
    l.coherence[g].resize(Cc.fib(u).n_obj());
    for (ObjId cobj = 0; cobj < Cc.fib(u).n_obj(); ++cobj) {
      const ObjectLift& oc = lift[u][cobj];
      ObjId cg = Cc.rob(g, cobj);
      const ObjectLift& ov = lift[v][cg];
      Sieve t_sieve =
          sieve_intersection(pullback_sieve(site, g, oc.cover), ov.cover);
      auto kappa = [&](MorId f) {
        ObjId w_stage = c.mor_dom[f];
        MorId gf = c.compose(g, f);
        size_t pos_v = sieve_pos(ov.cover, f);
        size_t pos_c = sieve_pos(oc.cover, gf);
        const FinCategory& cfib = Cc.fib(w_stage);
        const FinCategory& efib = E.fib(w_stage);
        MorId comp = cfib.compose(
            *inverse_of(cfib, oc.dd.psi[pos_c]),
            cfib.compose(restriction_comparison(Cc, u, cobj, {g, f}, {gf}),
                         ov.dd.psi[pos_v]));
        MorId iota =
            canonical_lift(i.component[w_stage], ov.dd.section[pos_v],
                           oc.dd.section[pos_c], comp);
        MorId chi_v_sect = ov.d_p.morphisms[ov.chi].section[pos_v];
        MorId chi_c_sect =
            *inverse_of(efib, oc.d_p.morphisms[oc.chi].section[pos_c]);
        MorId cmp_e = restriction_comparison(E, u, oc.l_obj, {gf}, {g, f});
        return efib.compose(
            cmp_e,
            efib.compose(chi_c_sect,
                         efib.compose(h.component[w_stage].mor_map[iota],
                                      chi_v_sect)));
      };
      MorId glued =
          glue_hom_family(E, v, ov.l_obj, E.rob(g, oc.l_obj), t_sieve, kappa);
      if (glued == kNone)
        throw InternalAmalgamationFailure(
            "construct_lift: coherence family does not glue");
      l.coherence[g][cobj] = glued;
    }
  }
  {
    auto lr = validate_pseudonat(l);
    if (!lr.ok())
      throw InternalAmalgamationFailure("construct_lift: l invalid: " +
                                        lr.summary());
  }

  // λ : h => l∘i via the gamma_hat composite, glued through Φ.
  Modification lambda;
  lambda.source = h;
  lambda.target = compose_pseudonat(l, i);
  lambda.component.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    lambda.component[u].resize(A.fib(u).n_obj());
    for (ObjId a = 0; a < A.fib(u).n_obj(); ++a) {
      ObjId ia = i.component[u].obj_map[a];
      const ObjectLift& ol = lift[u][ia];
      Cover cover = Cover::from_sieve(ol.cover);
      Functor phi_i = phi_functor(ol.d_i);
      NatTrans gh = gamma_hat(ol.d_i, ol.d_p, h, k, s.gamma);

      // (1_{ia}, (lift of ψ_pos⁻¹ ∘ coh)) : Φ(a) -> dd.
      DescentMorphism j;
      j.base = Cc.fib(u).obj_identity[ia];
      j.section.resize(cover.size());
      for (size_t pos = 0; pos < cover.size(); ++pos) {
        MorId f = cover.members[pos];
        ObjId v = c.mor_dom[f];
        const FinCategory& cfib = Cc.fib(v);
        MorId comp = cfib.compose(*inverse_of(cfib, ol.dd.psi[pos]),
                                  i.coherence[f][a]);
        j.section[pos] = canonical_lift(i.component[v], A.rob(f, a),
                                        ol.dd.section[pos], comp);
      }
      MorId j_id = ol.d_i.find_morphism(phi_i.obj_map[a], ol.dd_id, j);
      if (j_id == kNone)
        throw InternalAmalgamationFailure(
            "construct_lift: comparison into the lwe-descent datum invalid");
      MorId total = ol.d_p.cat->compose(
          *inverse_of(*ol.d_p.cat, ol.chi),
          ol.d_p.cat->compose(ol.push.mor_map[j_id], gh.component[a]));
      const DescentMorphism& tm = ol.d_p.morphisms[total];
      MorId glued = glue_hom_family(
          E, u, h.component[u].obj_map[a], ol.l_obj, ol.cover,
          [&](MorId w) { return tm.section[sieve_pos(ol.cover, w)]; });
      if (glued == kNone)
        throw InternalAmalgamationFailure(
            "construct_lift: lambda family does not glue");
      lambda.component[u][a] = glued;
    }
  }

  // ρ : p∘l => k from the base components of the amalgamation isos.
  Modification rho;
  rho.source = compose_pseudonat(p, l);
  rho.target = k;
  rho.component.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    rho.component[u].resize(Cc.fib(u).n_obj());
    for (ObjId cobj = 0; cobj < Cc.fib(u).n_obj(); ++cobj)
      rho.component[u][cobj] =
          lift[u][cobj].d_p.morphisms[lift[u][cobj].chi].base;
  }

  LiftSolution sol{std::move(l), std::move(lambda), std::move(rho)};
  auto check = validate_lift(s, sol);
  if (!check.ok())
    throw InternalAmalgamationFailure("construct_lift: " + check.summary());
  return sol;
}

PitchforkReport pitchfork(const PseudoNat& f, const PseudoNat& g,
                          uint64_t bound) {
  PitchforkReport rep;
  HomCategory tops = hom_category(f.source, g.source, bound);
  HomCategory bottoms = hom_category(f.target, g.target, bound);
  for (size_t hi = 0; hi < tops.objects.size(); ++hi)
    for (size_t ki = 0; ki < bottoms.objects.size(); ++ki) {
      PseudoNat gh = compose_pseudonat(g, tops.objects[hi]);
      PseudoNat kf = compose_pseudonat(bottoms.objects[ki], f);
      for (const Modification& gamma :
           all_modifications(gh, kf, bound, /*isos_only=*/true)) {
        ++rep.squares;
        Square sq{f, g, tops.objects[hi], bottoms.objects[ki], gamma};
        if (!search_lift(sq, bound)) {
          rep.ok = false;
          std::ostringstream os;
          os << "unliftable square: top #" << hi << ", bottom #" << ki;
          rep.witness = os.str();
          return rep;
        }
      }
    }
  return rep;
}

bool is_fibrant(const PstackPtr& a, uint64_t bound) {
  const Site& site = *a->site;
  const FinCategory& c = site.c();
  for (ObjId u = 0; u < c.n_obj(); ++u)
    for (const Sieve& sv : site.covering_sieves(u)) {
      SieveSubfunctor sub = sieve_subfunctor(a->site, sv);
      HomCategory hs = hom_category(sub.subfunctor, a, bound);
      HomCategory ls = hom_category(sub.ambient, a, bound);
      for (const PseudoNat& h : hs.objects) {
        bool lifted = false;
        for (const PseudoNat& l : ls.objects) {
          PseudoNat li = compose_pseudonat(l, sub.inclusion);
          if (!all_modifications(h, li, bound, /*isos_only=*/true).empty()) {
            lifted = true;
            break;
          }
        }
        if (!lifted) return false;
      }
    }
  return true;
}

ThreeForTwoReport three_for_two(const Triangle& t, uint64_t bound) {
  ThreeForTwoReport rep;
  rep.f_lwe = is_lwe(t.f, bound).ok;
  rep.g_lwe = is_lwe(t.g, bound).ok;
  rep.h_lwe = is_lwe(t.h, bound).ok;
  int count = int(rep.f_lwe) + int(rep.g_lwe) + int(rep.h_lwe);
  rep.two_of_three_holds = (count != 2);
  return rep;
}

SfoReport validate_sfo(
    const std::function<bool(const PseudoNat&)>& is_weq,
    const std::function<std::pair<PstackPtr, PseudoNat>(const PstackPtr&)>&
        replacement,
    const std::vector<PstackPtr>& corpus,
    const std::vector<Triangle>& triangles, uint64_t bound) {
  SfoReport rep;
  for (size_t idx = 0; idx < corpus.size(); ++idx) {
    if (!is_weq(identity_pseudonat(corpus[idx]))) {
      rep.ok = false;
      rep.failures.push_back("identity of corpus member " +
                             std::to_string(idx) + " is not a weq");
    }
  }
  for (size_t idx = 0; idx < triangles.size(); ++idx) {
    if (!three_for_two(triangles[idx], bound).two_of_three_holds) {
      rep.ok = false;
      rep.failures.push_back("3-for-2 fails on triangle " +
                             std::to_string(idx));
    }
  }
  for (size_t idx = 0; idx < corpus.size(); ++idx) {
    auto [qa, eta] = replacement(corpus[idx]);
    if (!is_weq(eta)) {
      rep.ok = false;
      rep.failures.push_back("eta of corpus member " + std::to_string(idx) +
                             " is not a weq");
    }
    if (!is_fibrant(qa, bound)) {
      rep.ok = false;
      rep.failures.push_back("replacement of corpus member " +
                             std::to_string(idx) + " is not fibrant");
    }
  }
  return rep;
}

namespace {

// γ for a square whose right and bottom legs land in the terminal prestack.
Modification terminal_gamma(const PseudoNat& src, const PseudoNat& dst) {
  Modification m;
  m.source = src;
  m.target = dst;
  const FinCategory& c = src.source->site->c();
  m.component.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    m.component[u].resize(src.source->fib(u).n_obj());
    for (ObjId x = 0; x < src.source->fib(u).n_obj(); ++x)
      m.component[u][x] =
          src.target->fib(u).obj_identity[src.component[u].obj_map[x]];
  }
  return m;
}

}  // namespace

EquivalenceData lwe_between_fibrants_to_equivalence(const PseudoNat& f,
                                                    uint64_t bound) {
  Judgment src_stack = is_stack(f.source, bound);
  Judgment dst_stack = is_stack(f.target, bound);
  if (!src_stack.ok || !dst_stack.ok)
    throw Error("lwe_between_fibrants_to_equivalence: endpoints not stacks");
  LweReport lw = is_lwe(f, bound);
  if (!lw.ok)
    throw NotLWE("lwe_between_fibrants_to_equivalence: " + lw.witness);

  // First lift: 1_A along f against A -> 1.
  PseudoNat bang_a = to_terminal(f.source);
  PseudoNat bang_b = to_terminal(f.target);
  Square s1;
  s1.left = f;
  s1.right = bang_a;
  s1.top = identity_pseudonat(f.source);
  s1.bottom = bang_b;
  s1.gamma = terminal_gamma(compose_pseudonat(s1.right, s1.top),
                            compose_pseudonat(s1.bottom, s1.left));
  LiftSolution first = construct_lift(s1, bound);
  PseudoNat f_prime = first.l;       // B -> A
  Modification eta = first.lambda;   // 1_A => f'∘f

  LweReport lw2 = is_lwe(f_prime, bound);
  if (!lw2.ok)
    throw Error("lwe_between_fibrants_to_equivalence: inverse not a weq");

  // Second lift: 1_B along f' against B -> 1.
  Square s2;
  s2.left = f_prime;
  s2.right = bang_b;
  s2.top = identity_pseudonat(f.target);
  s2.bottom = bang_a;
  s2.gamma = terminal_gamma(compose_pseudonat(s2.right, s2.top),
                            compose_pseudonat(s2.bottom, s2.left));
  LiftSolution second = construct_lift(s2, bound);
  PseudoNat f_second = second.l;        // A -> B
  Modification lambda2 = second.lambda; // 1_B => f''∘f'

  // μ : f => f'' via λ2*f then f''*η⁻¹; ε := λ2⁻¹ ∘ (μ*f').
  Modification mu = mod_vcompose(mod_whisker_left(f_second, mod_inverse(eta)),
                                 mod_whisker_right(lambda2, f));
  Modification eps =
      mod_vcompose(mod_inverse(lambda2), mod_whisker_right(mu, f_prime));

  EquivalenceData out;
  out.inverse = f_prime;
  out.unit = eta;
  out.counit = eps;
  out.counit.source = compose_pseudonat(f, f_prime);
  out.counit.target = identity_pseudonat(f.target);
  validate_modification(out.unit).require("equivalence unit");
  validate_modification(out.counit).require("equivalence counit");
  if (!modification_is_iso(out.unit) || !modification_is_iso(out.counit))
    throw Error("lwe_between_fibrants_to_equivalence: 2-cells not invertible");
  return out;
}

Hocat homotopy_2category(
    const std::vector<std::pair<std::string, PstackPtr>>& corpus,
    const std::function<std::pair<PstackPtr, PseudoNat>(const PstackPtr&)>&
        replacement,
    uint64_t bound) {
  Hocat out;
  for (const auto& [name, member] : corpus) {
    if (is_stack(member, bound).ok) {
      out.names.push_back(name);
      out.objects.push_back(member);
    } else {
      auto [qa, eta] = replacement(member);
      out.replaced.emplace_back(name, qa);
      out.names.push_back(name + "~fibrant");
      out.objects.push_back(qa);
    }
  }
  for (size_t x = 0; x < out.objects.size(); ++x)
    for (size_t y = 0; y < out.objects.size(); ++y)
      out.homs[{x, y}] = hom_category(out.objects[x], out.objects[y], bound);
  return out;
}

}  // namespace descente
