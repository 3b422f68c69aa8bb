#include "descente/workspace.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "descente/fixtures.hpp"
#include "descente/parallel.hpp"

namespace descente {

using nlohmann::json;

namespace {

json category_to_json(const FinCategory& c) {
  json out;
  out["objects"] = c.obj_names;
  json mors = json::array();
  for (MorId m = 0; m < c.n_mor(); ++m)
    mors.push_back({{"name", c.mor_names[m]},
                    {"dom", c.obj_names[c.mor_dom[m]]},
                    {"cod", c.obj_names[c.mor_cod[m]]}});
  out["morphisms"] = mors;
  json ids = json::object();
  for (ObjId o = 0; o < c.n_obj(); ++o)
    ids[c.obj_names[o]] = c.mor_names[c.obj_identity[o]];
  out["identities"] = ids;
  json comps = json::array();
  for (MorId g = 0; g < c.n_mor(); ++g)
    for (MorId f = 0; f < c.n_mor(); ++f) {
      if (!c.composable(g, f)) continue;
      if (c.is_identity(g) || c.is_identity(f)) continue;  // implied
      comps.push_back({{"g", c.mor_names[g]},
                       {"f", c.mor_names[f]},
                       {"gf", c.mor_names[c.comp[size_t(g) * c.n_mor() + f]]}});
    }
  out["composites"] = comps;
  return out;
}

CatPtr category_from_json(const json& j, const std::string& where) {
  CategoryBuilder b;
  if (!j.contains("objects") || !j.contains("morphisms"))
    throw ParseError(where + ": category needs objects and morphisms");
  for (const auto& o : j.at("objects")) b.object(o.get<std::string>());
  for (const auto& m : j.at("morphisms"))
    b.morphism(m.at("name").get<std::string>(), m.at("dom").get<std::string>(),
               m.at("cod").get<std::string>());
  for (auto it = j.at("identities").begin(); it != j.at("identities").end();
       ++it)
    b.identity(it.key(), it.value().get<std::string>());
  if (j.contains("composites"))
    for (const auto& cmp : j.at("composites"))
      b.composite(cmp.at("g").get<std::string>(),
                  cmp.at("f").get<std::string>(),
                  cmp.at("gf").get<std::string>());
  return b.build();
}

json functor_to_json(const Functor& f) {
  json out;
  json objs = json::object();
  for (ObjId o = 0; o < f.src->n_obj(); ++o)
    objs[f.src->obj_names[o]] = f.dst->obj_names[f.obj_map[o]];
  out["objects"] = objs;
  json mors = json::object();
  for (MorId m = 0; m < f.src->n_mor(); ++m)
    mors[f.src->mor_names[m]] = f.dst->mor_names[f.mor_map[m]];
  out["morphisms"] = mors;
  return out;
}

Functor functor_from_json(const json& j, const CatPtr& src, const CatPtr& dst,
                          const std::string& where) {
  Functor f;
  f.src = src;
  f.dst = dst;
  f.obj_map.assign(src->n_obj(), kNone);
  f.mor_map.assign(src->n_mor(), kNone);
  for (auto it = j.at("objects").begin(); it != j.at("objects").end(); ++it) {
    ObjId o = src->obj_index(it.key());
    ObjId v = dst->obj_index(it.value().get<std::string>());
    if (o == kNone || v == kNone)
      throw ParseError(where + ": dangling object reference " + it.key());
    f.obj_map[o] = v;
  }
  for (auto it = j.at("morphisms").begin(); it != j.at("morphisms").end();
       ++it) {
    MorId m = src->mor_index(it.key());
    MorId v = dst->mor_index(it.value().get<std::string>());
    if (m == kNone || v == kNone)
      throw ParseError(where + ": dangling morphism reference " + it.key());
    f.mor_map[m] = v;
  }
  for (ObjId o = 0; o < src->n_obj(); ++o)
    if (f.obj_map[o] == kNone)
      throw ParseError(where + ": object map not total");
  for (MorId m = 0; m < src->n_mor(); ++m)
    if (f.mor_map[m] == kNone)
      throw ParseError(where + ": morphism map not total");
  return f;
}

json site_to_json(const Site& s, const std::string& name) {
  const FinCategory& c = s.c();
  json out;
  out["name"] = name;
  out["category"] = category_to_json(c);
  out["terminal"] = c.obj_names[s.terminal];
  json pbs = json::array();
  for (const auto& [key, pb] : s.pullbacks.table)
    pbs.push_back({{"f", c.mor_names[key.first]},
                   {"g", c.mor_names[key.second]},
                   {"apex", c.obj_names[pb.apex]},
                   {"p1", c.mor_names[pb.p1]},
                   {"p2", c.mor_names[pb.p2]}});
  out["pullbacks"] = pbs;
  json basis = json::object();
  if (s.basis) {
    for (ObjId u = 0; u < c.n_obj(); ++u) {
      json fams = json::array();
      for (const CoverFamily& fam : (*s.basis)[u]) {
        json members = json::array();
        for (MorId m : fam.members) members.push_back(c.mor_names[m]);
        fams.push_back(members);
      }
      basis[c.obj_names[u]] = fams;
    }
  }
  out["basis"] = basis;
  return out;
}

SitePtr site_from_json(const json& j, const std::string& where) {
  auto site = std::make_shared<Site>();
  site->cat = category_from_json(j.at("category"), where + "/category");
  const FinCategory& c = *site->cat;
  site->terminal = c.obj_index(j.at("terminal").get<std::string>());
  if (site->terminal == kNone)
    throw ParseError(where + ": unknown terminal object");
  for (const auto& pb : j.at("pullbacks")) {
    MorId f = c.mor_index(pb.at("f").get<std::string>());
    MorId g = c.mor_index(pb.at("g").get<std::string>());
    Pullback entry;
    entry.apex = c.obj_index(pb.at("apex").get<std::string>());
    entry.p1 = c.mor_index(pb.at("p1").get<std::string>());
    entry.p2 = c.mor_index(pb.at("p2").get<std::string>());
    if (f == kNone || g == kNone || entry.apex == kNone || entry.p1 == kNone ||
        entry.p2 == kNone)
      throw ParseError(where + ": dangling pullback reference");
    site->pullbacks.table[{f, g}] = entry;
  }
  Basis basis(c.n_obj());
  for (auto it = j.at("basis").begin(); it != j.at("basis").end(); ++it) {
    ObjId u = c.obj_index(it.key());
    if (u == kNone) throw ParseError(where + ": unknown basis object");
    for (const auto& fam : it.value()) {
      CoverFamily cf;
      cf.apex = u;
      for (const auto& m : fam) {
        MorId mor = c.mor_index(m.get<std::string>());
        if (mor == kNone) throw ParseError(where + ": dangling basis member");
        cf.members.push_back(mor);
      }
      std::sort(cf.members.begin(), cf.members.end());
      basis[u].push_back(cf);
    }
    std::sort(basis[u].begin(), basis[u].end());
  }
  site->basis = basis;
  site->topology = generate_topology(c, site->pullbacks, basis);
  auto report = validate_site(*site);
  if (!report.ok())
    throw WorkspaceValidationError(where + ": " + report.summary());
  return site;
}

json pseudofunctor_to_json(const Pseudofunctor& F) {
  const FinCategory& c = F.site->c();
  json out;
  json fibers = json::object();
  for (ObjId u = 0; u < c.n_obj(); ++u)
    fibers[c.obj_names[u]] = category_to_json(*F.fiber[u]);
  out["fibers"] = fibers;
  json res = json::object();
  for (MorId f = 0; f < c.n_mor(); ++f)
    res[c.mor_names[f]] = functor_to_json(F.restriction[f]);
  out["restrictions"] = res;
  json ups = json::object();
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    json comp = json::object();
    for (ObjId x = 0; x < F.fib(u).n_obj(); ++x)
      comp[F.fib(u).obj_names[x]] = F.fib(u).mor_names[F.upsilon[u][x]];
    ups[c.obj_names[u]] = comp;
  }
  out["upsilon"] = ups;
  json phis = json::array();
  for (const auto& [key, comps] : F.phi) {
    const FinCategory& fu = F.fib(c.mor_cod[key.first]);
    const FinCategory& fw = F.fib(c.mor_dom[key.second]);
    json comp = json::object();
    for (ObjId x = 0; x < fu.n_obj(); ++x)
      comp[fu.obj_names[x]] = fw.mor_names[comps[x]];
    phis.push_back({{"f", c.mor_names[key.first]},
                    {"g", c.mor_names[key.second]},
                    {"components", comp}});
  }
  out["phi"] = phis;
  return out;
}

PstackPtr pseudofunctor_from_json(const json& j, const SitePtr& site,
                                  const std::string& tag,
                                  const std::string& where) {
  const FinCategory& c = site->c();
  auto F = std::make_shared<Pseudofunctor>();
  F->site = site;
  F->tag = tag;
  F->fiber.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u)
    F->fiber[u] = category_from_json(j.at("fibers").at(c.obj_names[u]),
                                     where + "/fibers");
  F->restriction.resize(c.n_mor());
  for (MorId f = 0; f < c.n_mor(); ++f)
    F->restriction[f] = functor_from_json(
        j.at("restrictions").at(c.mor_names[f]), F->fiber[c.mor_cod[f]],
        F->fiber[c.mor_dom[f]], where + "/restrictions");
  F->upsilon.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    const FinCategory& fib = *F->fiber[u];
    F->upsilon[u].assign(fib.n_obj(), kNone);
    const json& comp = j.at("upsilon").at(c.obj_names[u]);
    for (auto it = comp.begin(); it != comp.end(); ++it) {
      ObjId x = fib.obj_index(it.key());
      MorId m = fib.mor_index(it.value().get<std::string>());
      if (x == kNone || m == kNone)
        throw ParseError(where + ": dangling upsilon reference");
      F->upsilon[u][x] = m;
    }
  }
  for (const auto& cell : j.at("phi")) {
    MorId f = c.mor_index(cell.at("f").get<std::string>());
    MorId g = c.mor_index(cell.at("g").get<std::string>());
    if (f == kNone || g == kNone)
      throw ParseError(where + ": dangling phi arrows");
    const FinCategory& fu = *F->fiber[c.mor_cod[f]];
    const FinCategory& fw = *F->fiber[c.mor_dom[g]];
    std::vector<MorId> comps(fu.n_obj(), kNone);
    const json& table = cell.at("components");
    for (auto it = table.begin(); it != table.end(); ++it) {
      ObjId x = fu.obj_index(it.key());
      MorId m = fw.mor_index(it.value().get<std::string>());
      if (x == kNone || m == kNone)
        throw ParseError(where + ": dangling phi component");
      comps[x] = m;
    }
    F->phi[{f, g}] = std::move(comps);
  }
  auto report = validate_pseudofunctor(*F);
  if (!report.ok())
    throw WorkspaceValidationError(where + ": " + report.summary());
  return F;
}

json map_to_json(const PseudoNat& p, const std::string& source,
                 const std::string& target) {
  const FinCategory& c = p.source->site->c();
  json out;
  out["source"] = source;
  out["target"] = target;
  json comps = json::object();
  for (ObjId u = 0; u < c.n_obj(); ++u)
    comps[c.obj_names[u]] = functor_to_json(p.component[u]);
  out["components"] = comps;
  json coh = json::object();
  for (MorId f = 0; f < c.n_mor(); ++f) {
    const FinCategory& fu = p.source->fib(c.mor_cod[f]);
    const FinCategory& fv = p.target->fib(c.mor_dom[f]);
    json cells = json::object();
    for (ObjId e = 0; e < fu.n_obj(); ++e)
      cells[fu.obj_names[e]] = fv.mor_names[p.coherence[f][e]];
    coh[c.mor_names[f]] = cells;
  }
  out["coherence"] = coh;
  return out;
}

PseudoNat map_from_json(const json& j, const Workspace& ws,
                        const std::string& where) {
  PseudoNat p;
  p.source = ws.pseudofunctor(j.at("source").get<std::string>());
  p.target = ws.pseudofunctor(j.at("target").get<std::string>());
  const FinCategory& c = ws.site->c();
  for (ObjId u = 0; u < c.n_obj(); ++u)
    p.component.push_back(functor_from_json(
        j.at("components").at(c.obj_names[u]), p.source->fiber[u],
        p.target->fiber[u], where + "/components"));
  p.coherence.resize(c.n_mor());
  for (MorId f = 0; f < c.n_mor(); ++f) {
    const FinCategory& fu = p.source->fib(c.mor_cod[f]);
    const FinCategory& fv = p.target->fib(c.mor_dom[f]);
    p.coherence[f].assign(fu.n_obj(), kNone);
    const json& cells = j.at("coherence").at(c.mor_names[f]);
    for (auto it = cells.begin(); it != cells.end(); ++it) {
      ObjId e = fu.obj_index(it.key());
      MorId m = fv.mor_index(it.value().get<std::string>());
      if (e == kNone || m == kNone)
        throw ParseError(where + ": dangling coherence reference");
      p.coherence[f][e] = m;
    }
  }
  auto report = validate_pseudonat(p);
  if (!report.ok())
    throw WorkspaceValidationError(where + ": " + report.summary());
  return p;
}

json workspace_to_json(const Workspace& ws) {
  json out;
  out["site"] = site_to_json(*ws.site, ws.site_name);
  json ps = json::object();
  for (const auto& [name, F] : ws.pseudofunctors)
    ps[name] = pseudofunctor_to_json(*F);
  out["pseudofunctors"] = ps;
  json maps = json::object();
  for (const auto& [name, p] : ws.maps) {
    std::string src, dst;
    for (const auto& [n, F] : ws.pseudofunctors) {
      if (F == p.source) src = n;
      if (F == p.target) dst = n;
    }
    maps[name] = map_to_json(p, src, dst);
  }
  out["maps"] = maps;
  return out;
}

}  // namespace

PstackPtr Workspace::pseudofunctor(const std::string& name) const {
  for (const auto& [n, F] : pseudofunctors)
    if (n == name) return F;
  throw UnknownEntity("unknown pseudofunctor " + name);
}

const PseudoNat& Workspace::map(const std::string& name) const {
  for (const auto& [n, p] : maps)
    if (n == name) return p;
  throw UnknownEntity("unknown map " + name);
}

uint64_t content_hash(const std::string& canonical) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

Workspace parse_workspace(const std::vector<std::string>& paths) {
  Workspace ws;
  bool have_site = false;
  for (const std::string& path : paths) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError(path + ": " + e.what());
    }
    if (doc.contains("site")) {
      if (have_site)
        throw ParseError(path + ": a workspace may define only one site");
      ws.site = site_from_json(doc.at("site"), path + "#/site");
      ws.site_name = doc.at("site").value("name", "site");
      ws.provenance[ws.site_name] = path + "#/site";
      ws.hashes[ws.site_name] =
          content_hash(site_to_json(*ws.site, ws.site_name).dump(2));
      have_site = true;
    }
    if (doc.contains("pseudofunctors")) {
      if (!have_site) throw ParseError(path + ": pseudofunctors before site");
      for (auto it = doc.at("pseudofunctors").begin();
           it != doc.at("pseudofunctors").end(); ++it) {
        std::string where = path + "#/pseudofunctors/" + it.key();
        for (const auto& [n, F] : ws.pseudofunctors)
          if (n == it.key())
            throw ParseError(where + ": duplicate pseudofunctor name");
        PstackPtr F =
            pseudofunctor_from_json(it.value(), ws.site, it.key(), where);
        ws.pseudofunctors.emplace_back(it.key(), F);
        ws.provenance[it.key()] = where;
        ws.hashes[it.key()] = content_hash(pseudofunctor_to_json(*F).dump(2));
      }
    }
    if (doc.contains("maps")) {
      if (!have_site) throw ParseError(path + ": maps before site");
      for (auto it = doc.at("maps").begin(); it != doc.at("maps").end(); ++it) {
        std::string where = path + "#/maps/" + it.key();
        for (const auto& [n, p] : ws.maps)
          if (n == it.key()) throw ParseError(where + ": duplicate map name");
        PseudoNat p = map_from_json(it.value(), ws, where);
        ws.maps.emplace_back(it.key(), p);
        ws.provenance[it.key()] = where;
        ws.hashes[it.key()] = content_hash(
            map_to_json(p, it.value().at("source").get<std::string>(),
                        it.value().at("target").get<std::string>())
                .dump(2));
      }
    }
  }
  if (!have_site) throw ParseError("no site section in the workspace files");
  return ws;
}

std::string serialize_workspace(const Workspace& ws) {
  return workspace_to_json(ws).dump(2) + "\n";
}

std::string Report::text() const {
  std::ostringstream os;
  os << judgment << ": " << (positive ? "POSITIVE" : "NEGATIVE");
  if (!verdict.empty()) os << " (" << verdict << ")";
  os << "\n";
  for (const auto& [name, hash] : inputs)
    os << "  input " << name << " #" << hash << "\n";
  for (const auto& [k, v] : witnesses) os << "  " << k << ": " << v << "\n";
  os << "  time: " << seconds << "s\n";
  return os.str();
}

std::string Report::json() const {
  nlohmann::json out;
  out["judgment"] = judgment;
  nlohmann::json ins = nlohmann::json::array();
  for (const auto& [name, hash] : inputs)
    ins.push_back({{"name", name}, {"hash", hash}});
  out["inputs"] = ins;
  out["positive"] = positive;
  out["verdict"] = verdict;
  nlohmann::json wit = nlohmann::json::array();
  for (const auto& [k, v] : witnesses) wit.push_back({{"law", k}, {"detail", v}});
  out["witnesses"] = wit;
  return out.dump(2) + "\n";
}

namespace {

std::string hash_hex(uint64_t h) {
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

// Map expressions: a named map, id(F), bang(F) = F -> 1, boundary(F),
// diag(F), unit(F) = stackification unit, or inclusion(U;f1,f2,...).
PseudoNat resolve_map(const Workspace& ws, const std::string& expr,
                      uint64_t bound) {
  auto open = expr.find('(');
  if (open == std::string::npos) return ws.map(expr);
  if (expr.back() != ')') throw UnknownEntity("malformed map expression " + expr);
  std::string head = expr.substr(0, open);
  std::string arg = expr.substr(open + 1, expr.size() - open - 2);
  if (head == "id") return identity_pseudonat(ws.pseudofunctor(arg));
  if (head == "bang") return to_terminal(ws.pseudofunctor(arg));
  if (head == "boundary") return cotensor_two(ws.pseudofunctor(arg)).boundary;
  if (head == "diag") {
    PstackPtr F = ws.pseudofunctor(arg);
    return diagonal(F, product(F, F));
  }
  if (head == "unit") return stackify(ws.pseudofunctor(arg), bound).unit;
  if (head == "inclusion") {
    auto semi = arg.find(';');
    if (semi == std::string::npos)
      throw UnknownEntity("inclusion needs apex;members");
    const FinCategory& c = ws.site->c();
    ObjId apex = c.obj_index(arg.substr(0, semi));
    if (apex == kNone) throw UnknownEntity("unknown apex in " + expr);
    std::vector<MorId> members;
    std::string rest = arg.substr(semi + 1);
    std::stringstream ss(rest);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      MorId m = c.mor_index(tok);
      if (m == kNone) throw UnknownEntity("unknown arrow " + tok);
      members.push_back(m);
    }
    Sieve sv = generate_sieve(c, apex, members);
    return sieve_subfunctor(ws.site, sv).inclusion;
  }
  throw UnknownEntity("unknown map expression " + expr);
}

void add_law(Report& rep, const std::string& law, bool ok,
             const std::string& detail) {
  rep.witnesses.emplace_back(law, std::string(ok ? "pass" : "FAIL") +
                                      (detail.empty() ? "" : ": " + detail));
  if (!ok) rep.positive = false;
}

void laws_site(const Workspace& ws, Report& rep) {
  const Site& s = *ws.site;
  const FinCategory& c = s.c();
  add_law(rep, "site/valid", validate_site(s).ok(), "");
  bool closure = true, stability = true, meets = true;
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    for (const CoverFamily& fam : s.basis_families(u)) {
      Sieve sv = generate_sieve(s, fam);
      for (MorId f : sv.arrows)
        for (MorId h = 0; h < c.n_mor(); ++h)
          if (c.composable(f, h) && !sv.contains(c.compose(f, h)))
            closure = false;
    }
    for (const Sieve& sv : s.topology.on(u)) {
      for (MorId g = 0; g < c.n_mor(); ++g)
        if (c.mor_cod[g] == u &&
            !s.topology.is_covering(pullback_sieve(s, g, sv)))
          stability = false;
      for (const Sieve& other : s.topology.on(u))
        if (!s.topology.is_covering(sieve_intersection(sv, other)))
          meets = false;
    }
  }
  add_law(rep, "site/sieve-closure", closure, "");
  add_law(rep, "site/pullback-stability", stability, "");
  add_law(rep, "site/intersection-covering", meets, "");
  if (s.basis) {
    Topology regen = generate_topology(c, s.pullbacks, *s.basis);
    add_law(rep, "site/basis-generates-topology",
            regen.covers == s.topology.covers, "");
  }
}

void laws_pstack(const Workspace& ws, Report& rep) {
  const FinCategory& c = ws.site->c();
  for (const auto& [name, F] : ws.pseudofunctors) {
    add_law(rep, "pstack/valid/" + name, validate_pseudofunctor(*F).ok(), "");
    bool sigma_inverse = true;
    for (MorId fa = 0; fa < c.n_mor(); ++fa)
      for (MorId fb = 0; fb < c.n_mor(); ++fb) {
        if (c.mor_cod[fa] != c.mor_cod[fb]) continue;
        ObjId u = c.mor_cod[fa];
        const Pullback& pb = ws.site->pullbacks.at(fa, fb);
        const FinCategory& fib = F->fib(c.mor_dom[pb.p1]);
        for (ObjId x = 0; x < F->fib(u).n_obj(); ++x) {
          MorId ab = sigma(*F, u, x, fa, fb);
          MorId ba = sigma(*F, u, x, fb, fa);
          if (!fib.is_identity(fib.compose(ba, ab))) sigma_inverse = false;
        }
      }
    add_law(rep, "pstack/sigma-inverse/" + name, sigma_inverse, "");
  }
  for (const auto& [name, p] : ws.maps)
    add_law(rep, "pstack/map-valid/" + name, validate_pseudonat(p).ok(), "");
}

void laws_descent(const Workspace& ws, Report& rep, uint64_t bound) {
  const FinCategory& c = ws.site->c();
  for (const auto& [name, F] : ws.pseudofunctors) {
    bool max_equiv = true;
    PseudoNat p = to_terminal(F);
    for (ObjId u = 0; u < c.n_obj(); ++u) {
      DescentCategory d = build_descent_category(
          p, Cover::from_sieve(ws.site->maximal_sieve(u)), bound);
      if (!check_equivalence(phi_functor(d)).is_equivalence())
        max_equiv = false;
    }
    add_law(rep, "descent/maximal-sieve-equivalence/" + name, max_equiv, "");

    if (is_prestack(*F).ok) {
      bool faithful = true;
      for (ObjId u = 0; u < c.n_obj(); ++u)
        for (const CoverFamily& fam : ws.site->basis_families(u)) {
          DescentCategory d =
              build_descent_category(p, Cover::from_family(fam), bound);
          if (!check_equivalence(phi_functor(d)).faithful) faithful = false;
        }
      add_law(rep, "descent/phi-faithful/" + name, faithful, "");
    }
  }
}

void laws_hofib(const Workspace& ws, Report& rep, uint64_t bound) {
  for (const auto& [name, F] : ws.pseudofunctors) {
    bool fib = is_fibrant(F, bound);
    bool stack = is_stack(F, bound).ok;
    add_law(rep, "hofib/fibrant-iff-stack/" + name, fib == stack,
            fib == stack ? "" : "fibrancy and descent disagree");
  }
}

void laws_factor(const Workspace& ws, Report& rep, uint64_t bound) {
  for (const auto& [name, F] : ws.pseudofunctors) {
    if (!is_prestack(*F).ok) continue;
    PseudoNat bang = to_terminal(F);
    PathFactorization pf = path_object_prestack(bang, bound);
    FactorReport fr = verify_factorization(bang, pf, bound);
    add_law(rep, "factor/strict-triangle/" + name, fr.strict_triangle, "");
    add_law(rep, "factor/eta-lwe/" + name, fr.eta_lwe, "");
    add_law(rep, "factor/q-local-fibration/" + name, fr.q_local_fibration, "");
    add_law(rep, "factor/stackification-是-stack/" + name,
            is_stack(pf.path, bound).ok, "");
  }
}

int emit(const Report& rep, bool json_format, std::ostream& out) {
  if (json_format)
    out << rep.json();
  else
    out << rep.text();
  return rep.positive ? 0 : 1;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  bool json_format = false;
  std::vector<std::string> files;
  std::vector<std::string> positional;
  uint64_t bound = default_bound();
  std::string suite = "all";

  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--format" && i + 1 < args.size()) {
      json_format = args[++i] == "json";
    } else if (args[i] == "-w" && i + 1 < args.size()) {
      files.push_back(args[++i]);
    } else if (args[i] == "--bound" && i + 1 < args.size()) {
      bound = std::stoull(args[++i]);
    } else if (args[i] == "--suite" && i + 1 < args.size()) {
      suite = args[++i];
    } else {
      positional.push_back(args[i]);
    }
  }
  if (positional.empty()) {
    err << "usage: descente <command> [-w workspace.json ...] [--format json]\n"
        << "commands: validate | fixture <name> | check "
           "{prestack|stack|local-fib|lwe|fibrant} <entity> | desc <map> <U> "
           "<members,> | lift {--search|--construct} <f> <g> | factorize "
           "{--method path|isocomma} <f> | stackify <F> | isocomma <f> <g> | "
           "hocat <F...> | laws [--suite name] [--bound N]\n";
    return 2;
  }
  const std::string& cmd = positional[0];

  try {
    if (cmd == "fixture") {
      if (positional.size() < 2) throw UnknownEntity("fixture needs a name");
      Workspace ws = builtin_fixture_workspace(positional[1]);
      out << serialize_workspace(ws);
      return 0;
    }

    auto t0 = std::chrono::steady_clock::now();
    Workspace ws = parse_workspace(files);
    Report rep;
    rep.positive = true;
    auto note_input = [&](const std::string& name) {
      auto it = ws.hashes.find(name);
      rep.inputs.emplace_back(name,
                              it == ws.hashes.end() ? "-" : hash_hex(it->second));
    };
    note_input(ws.site_name);

    if (cmd == "validate") {
      rep.judgment = "validate";
      rep.verdict = "workspace loads and every validator passes";
      for (const auto& [name, F] : ws.pseudofunctors) note_input(name);
      for (const auto& [name, p] : ws.maps) note_input(name);
    } else if (cmd == "check") {
      if (positional.size() < 3) throw UnknownEntity("check needs kind+entity");
      const std::string& kind = positional[1];
      const std::string& entity = positional[2];
      rep.judgment = "check " + kind + " " + entity;
      if (kind == "prestack") {
        PrestackReport r = is_prestack(*ws.pseudofunctor(entity));
        note_input(entity);
        rep.positive = r.ok;
        if (!r.ok) rep.witnesses.emplace_back("witness", r.witness);
      } else if (kind == "stack") {
        Judgment r = is_stack(ws.pseudofunctor(entity), bound);
        note_input(entity);
        rep.positive = r.ok;
        if (!r.ok) rep.witnesses.emplace_back("witness", r.witness);
      } else if (kind == "local-fib") {
        PseudoNat p = resolve_map(ws, entity, bound);
        Judgment r = is_local_fibration(p, bound);
        rep.positive = r.ok;
        if (!r.ok) rep.witnesses.emplace_back("witness", r.witness);
      } else if (kind == "lwe") {
        PseudoNat p = resolve_map(ws, entity, bound);
        LweReport r = is_lwe(p, bound);
        rep.positive = r.ok;
        if (!r.ok) rep.witnesses.emplace_back("witness", r.witness);
      } else if (kind == "fibrant") {
        bool r = is_fibrant(ws.pseudofunctor(entity), bound);
        note_input(entity);
        rep.positive = r;
      } else {
        throw UnknownEntity("unknown check kind " + kind);
      }
    } else if (cmd == "desc") {
      if (positional.size() < 4) throw UnknownEntity("desc <map> <U> <members>");
      PseudoNat p = resolve_map(ws, positional[1], bound);
      const FinCategory& c = ws.site->c();
      ObjId u = c.obj_index(positional[2]);
      if (u == kNone) throw UnknownEntity("unknown object " + positional[2]);
      Cover cover;
      cover.apex = u;
      std::stringstream ss(positional[3]);
      std::string tok;
      while (std::getline(ss, tok, ','))
        if (!tok.empty()) {
          MorId m = c.mor_index(tok);
          if (m == kNone) throw UnknownEntity("unknown arrow " + tok);
          cover.members.push_back(m);
        }
      DescentCategory d = build_descent_category(p, cover, bound);
      EquivalenceReport er = check_equivalence(phi_functor(d));
      rep.judgment = "desc " + positional[1];
      rep.positive = er.is_equivalence();
      rep.witnesses.emplace_back("objects", std::to_string(d.cat->n_obj()));
      rep.witnesses.emplace_back("morphisms", std::to_string(d.cat->n_mor()));
      rep.witnesses.emplace_back("phi", er.summary());
    } else if (cmd == "lift") {
      if (positional.size() < 4)
        throw UnknownEntity("lift {--search|--construct} <f> <g>");
      bool construct = positional[1] == "--construct";
      PseudoNat f = resolve_map(ws, positional[2], bound);
      PseudoNat g = resolve_map(ws, positional[3], bound);
      rep.judgment = "lift " + positional[2] + " vs " + positional[3];
      if (construct) {
        HomCategory tops = hom_category(f.source, g.source, bound);
        HomCategory bottoms = hom_category(f.target, g.target, bound);
        uint64_t squares = 0, lifted = 0;
        for (const PseudoNat& h : tops.objects)
          for (const PseudoNat& kk : bottoms.objects)
            for (const Modification& gamma : all_modifications(
                     compose_pseudonat(g, h), compose_pseudonat(kk, f), bound,
                     true)) {
              ++squares;
              Square sq{f, g, h, kk, gamma};
              LiftSolution sol = construct_lift(sq, bound);
              if (validate_lift(sq, sol).ok()) ++lifted;
            }
        rep.positive = squares == lifted;
        rep.witnesses.emplace_back("squares", std::to_string(squares));
        rep.witnesses.emplace_back("constructed", std::to_string(lifted));
      } else {
        PitchforkReport r = pitchfork(f, g, bound);
        rep.positive = r.ok;
        rep.witnesses.emplace_back("squares", std::to_string(r.squares));
        if (!r.ok) rep.witnesses.emplace_back("witness", r.witness);
      }
    } else if (cmd == "factorize") {
      std::string method = "path";
      std::string target;
      for (size_t i = 1; i < positional.size(); ++i) {
        if (positional[i] == "--method" && i + 1 < positional.size())
          method = positional[++i];
        else
          target = positional[i];
      }
      if (target.empty()) throw UnknownEntity("factorize needs a map");
      PseudoNat f = resolve_map(ws, target, bound);
      rep.judgment = "factorize " + target + " --method " + method;
      if (method == "path") {
        PathFactorization pf = path_object_prestack(f, bound);
        FactorReport fr = verify_factorization(f, pf, bound);
        rep.positive = fr.ok();
        rep.witnesses.emplace_back("strict-triangle",
                                   fr.strict_triangle ? "pass" : "FAIL");
        rep.witnesses.emplace_back("eta-lwe", fr.eta_lwe ? "pass" : "FAIL");
        rep.witnesses.emplace_back(
            "q-local-fibration", fr.q_local_fibration ? "pass" : "FAIL");
      } else if (method == "isocomma") {
        IsocommaFactorization fi = factor_through_isocomma(f);
        bool i_lwe = is_lwe(fi.i, bound).ok;
        bool strict = pseudonat_equal(compose_pseudonat(fi.p, fi.i), f);
        rep.positive = i_lwe && strict;
        rep.witnesses.emplace_back("strict-triangle", strict ? "pass" : "FAIL");
        rep.witnesses.emplace_back("i-lwe", i_lwe ? "pass" : "FAIL");
        if (is_stack(f.source, bound).ok) {
          bool p_fib = is_local_fibration(fi.p, bound).ok;
          rep.positive = rep.positive && p_fib;
          rep.witnesses.emplace_back("p-local-fibration",
                                     p_fib ? "pass" : "FAIL");
        }
      } else {
        throw UnknownEntity("unknown factorization method " + method);
      }
    } else if (cmd == "stackify") {
      if (positional.size() < 2) throw UnknownEntity("stackify <F>");
      note_input(positional[1]);
      Stackification st = stackify(ws.pseudofunctor(positional[1]), bound);
      rep.judgment = "stackify " + positional[1];
      rep.positive = is_stack(st.stack, bound).ok && is_lwe(st.unit, bound).ok;
      const FinCategory& c = ws.site->c();
      for (ObjId u = 0; u < c.n_obj(); ++u)
        rep.witnesses.emplace_back(
            "fiber " + c.obj_names[u],
            std::to_string(st.stack->fib(u).n_obj()) + " objects");
    } else if (cmd == "isocomma") {
      if (positional.size() < 3) throw UnknownEntity("isocomma <f> <g>");
      PseudoNat f = resolve_map(ws, positional[1], bound);
      PseudoNat g = resolve_map(ws, positional[2], bound);
      Isocomma ic = isocomma(f, g);
      rep.judgment = "isocomma " + positional[1] + " " + positional[2];
      rep.positive = validate_modification(ic.chi).ok();
      const FinCategory& c = ws.site->c();
      for (ObjId u = 0; u < c.n_obj(); ++u)
        rep.witnesses.emplace_back(
            "fiber " + c.obj_names[u],
            std::to_string(ic.obj->fib(u).n_obj()) + " objects");
    } else if (cmd == "hocat") {
      std::vector<std::pair<std::string, PstackPtr>> corpus;
      for (size_t i = 1; i < positional.size(); ++i)
        corpus.emplace_back(positional[i], ws.pseudofunctor(positional[i]));
      auto replacement = [&](const PstackPtr& a) {
        Stackification st = stackify(a, bound);
        return std::make_pair(st.stack, st.unit);
      };
      Hocat ho = homotopy_2category(corpus, replacement, bound);
      rep.judgment = "hocat";
      rep.positive = true;
      for (size_t i = 0; i < ho.names.size(); ++i)
        for (size_t jj = 0; jj < ho.names.size(); ++jj)
          rep.witnesses.emplace_back(
              "hom(" + ho.names[i] + "," + ho.names[jj] + ")",
              std::to_string(ho.homs.at({i, jj}).objects.size()) + " maps, " +
                  std::to_string(ho.homs.at({i, jj}).morphisms.size()) +
                  " 2-cells");
    } else if (cmd == "laws") {
      rep.judgment = "laws --suite " + suite;
      for (const auto& [name, F] : ws.pseudofunctors) note_input(name);
      for (const auto& [name, p] : ws.maps) note_input(name);
      if (suite == "site" || suite == "all") laws_site(ws, rep);
      if (suite == "pstack" || suite == "all") laws_pstack(ws, rep);
      if (suite == "descent" || suite == "all") laws_descent(ws, rep, bound);
      if (suite == "hofib" || suite == "all") laws_hofib(ws, rep, bound);
      if (suite == "factor" || suite == "all") laws_factor(ws, rep, bound);
    } else {
      err << "unknown command " << cmd << "\n";
      return 2;
    }

    auto t1 = std::chrono::steady_clock::now();
    rep.seconds = std::chrono::duration<double>(t1 - t0).count();
    return emit(rep, json_format, out);
  } catch (const BoundExceeded& e) {
    err << "bound exceeded: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const UnknownEntity& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace descente
