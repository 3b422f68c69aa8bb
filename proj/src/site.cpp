#include "descente/site.hpp"

#include <algorithm>
#include <sstream>

namespace descente {

bool Sieve::contains(MorId m) const {
  return std::binary_search(arrows.begin(), arrows.end(), m);
}

bool Sieve::operator<(const Sieve& other) const {
  if (apex != other.apex) return apex < other.apex;
  return arrows < other.arrows;
}

bool Sieve::subset_of(const Sieve& other) const {
  return std::includes(other.arrows.begin(), other.arrows.end(),
                       arrows.begin(), arrows.end());
}

bool CoverFamily::operator<(const CoverFamily& other) const {
  if (apex != other.apex) return apex < other.apex;
  return members < other.members;
}

const Pullback& PullbackTable::at(MorId f, MorId g) const {
  auto it = table.find({f, g});
  if (it == table.end()) throw Error("PullbackTable: no entry for cospan");
  return it->second;
}

bool PullbackTable::has(MorId f, MorId g) const {
  return table.count({f, g}) > 0;
}

bool Topology::is_covering(const Sieve& s) const {
  const auto& on_apex = covers[s.apex];
  return std::binary_search(on_apex.begin(), on_apex.end(), s);
}

Sieve Site::maximal_sieve(ObjId u) const {
  Sieve s;
  s.apex = u;
  s.arrows = cat->arrows_into(u);
  return s;
}

std::vector<Sieve> Site::covering_sieves(ObjId u) const {
  if (basis) {
    std::vector<Sieve> out;
    for (const auto& fam : (*basis)[u]) out.push_back(generate_sieve(*this, fam));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  return topology.on(u);
}

std::vector<CoverFamily> Site::basis_families(ObjId u) const {
  if (basis) return (*basis)[u];
  // No basis: treat every covering sieve as a family.
  std::vector<CoverFamily> out;
  for (const Sieve& s : topology.on(u)) out.push_back({u, s.arrows});
  return out;
}

Sieve generate_sieve(const FinCategory& c, ObjId apex,
                     const std::vector<MorId>& arrows) {
  std::set<MorId> acc(arrows.begin(), arrows.end());
  for (MorId m : arrows)
    if (c.mor_cod[m] != apex)
      throw Error("generate_sieve: member does not land in apex");
  bool grew = true;
  while (grew) {
    grew = false;
    std::vector<MorId> snapshot(acc.begin(), acc.end());
    for (MorId f : snapshot)
      for (MorId h = 0; h < c.n_mor(); ++h) {
        if (!c.composable(f, h)) continue;
        if (acc.insert(c.compose(f, h)).second) grew = true;
      }
  }
  Sieve s;
  s.apex = apex;
  s.arrows.assign(acc.begin(), acc.end());
  return s;
}

Sieve generate_sieve(const Site& s, const CoverFamily& fam) {
  return generate_sieve(s.c(), fam.apex, fam.members);
}

Sieve pullback_sieve(const Site& s, MorId g, const Sieve& sv) {
  const FinCategory& c = s.c();
  if (c.mor_cod[g] != sv.apex)
    throw ApexMismatch("pullback_sieve: cod(g) is not the sieve apex");
  Sieve out;
  out.apex = c.mor_dom[g];
  for (MorId f = 0; f < c.n_mor(); ++f) {
    if (c.mor_cod[f] != out.apex) continue;
    if (sv.contains(c.compose(g, f))) out.arrows.push_back(f);
  }
  return out;
}

Sieve sieve_intersection(const Sieve& a, const Sieve& b) {
  if (a.apex != b.apex)
    throw ApexMismatch("sieve_intersection: different apexes");
  Sieve out;
  out.apex = a.apex;
  std::set_intersection(a.arrows.begin(), a.arrows.end(), b.arrows.begin(),
                        b.arrows.end(), std::back_inserter(out.arrows));
  return out;
}

std::vector<Sieve> all_sieves(const FinCategory& c, ObjId u) {
  std::vector<MorId> into = c.arrows_into(u);
  const size_t n = into.size();
  if (n > 20) throw BoundExceeded("all_sieves: too many arrows into object");
  std::vector<Sieve> out;
  for (uint64_t mask = 0; mask < (uint64_t{1} << n); ++mask) {
    Sieve s;
    s.apex = u;
    for (size_t i = 0; i < n; ++i)
      if (mask & (uint64_t{1} << i)) s.arrows.push_back(into[i]);
    std::sort(s.arrows.begin(), s.arrows.end());
    // Closure under precomposition.
    bool closed = true;
    for (MorId f : s.arrows) {
      for (MorId h = 0; h < c.n_mor() && closed; ++h)
        if (c.composable(f, h) && !s.contains(c.compose(f, h))) closed = false;
      if (!closed) break;
    }
    if (closed) out.push_back(s);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string sieve_to_string(const FinCategory& c, const Sieve& s) {
  std::ostringstream os;
  os << "sieve(" << c.obj_names[s.apex] << "; ";
  for (size_t i = 0; i < s.arrows.size(); ++i)
    os << (i ? "," : "") << c.mor_names[s.arrows[i]];
  os << ")";
  return os.str();
}

std::string family_to_string(const FinCategory& c, const CoverFamily& f) {
  std::ostringstream os;
  os << "family(" << c.obj_names[f.apex] << "; ";
  for (size_t i = 0; i < f.members.size(); ++i)
    os << (i ? "," : "") << c.mor_names[f.members[i]];
  os << ")";
  return os.str();
}

namespace {

// Universal property of one chosen pullback entry, by exhausting competitors.
void check_pullback_entry(const FinCategory& c, MorId f, MorId g,
                          const Pullback& pb, ValidationReport& report) {
  std::string where =
      "cospan (" + c.mor_names[f] + ", " + c.mor_names[g] + ")";
  if (c.mor_dom[pb.p1] != pb.apex || c.mor_dom[pb.p2] != pb.apex ||
      c.mor_cod[pb.p1] != c.mor_dom[f] || c.mor_cod[pb.p2] != c.mor_dom[g]) {
    report.add("pullback-typing", where);
    return;
  }
  if (c.compose(f, pb.p1) != c.compose(g, pb.p2)) {
    report.add("pullback-square", where);
    return;
  }
  for (ObjId z = 0; z < c.n_obj(); ++z) {
    for (MorId q1 : c.hom(z, c.mor_dom[f]))
      for (MorId q2 : c.hom(z, c.mor_dom[g])) {
        if (c.compose(f, q1) != c.compose(g, q2)) continue;
        int hits = 0;
        for (MorId h : c.hom(z, pb.apex))
          if (c.compose(pb.p1, h) == q1 && c.compose(pb.p2, h) == q2) ++hits;
        if (hits != 1) {
          report.add("pullback-universal",
                     where + " competitor (" + c.mor_names[q1] + ", " +
                         c.mor_names[q2] + ") has " + std::to_string(hits) +
                         " mediators");
          return;
        }
      }
  }
}

}  // namespace

ValidationReport validate_topology(const Site& s) {
  ValidationReport report;
  const FinCategory& c = s.c();
  const Topology& j = s.topology;
  if (j.covers.size() != static_cast<size_t>(c.n_obj())) {
    report.add("topology-shape", "covers table size mismatch");
    return report;
  }
  // Axiom 1: the maximal sieve covers.
  for (ObjId u = 0; u < c.n_obj(); ++u)
    if (!j.is_covering(s.maximal_sieve(u)))
      report.add("axiom-1", "maximal sieve on " + c.obj_names[u]);

  // Axiom 2: pullback stability along every arrow.
  for (ObjId u = 0; u < c.n_obj(); ++u)
    for (const Sieve& sv : j.on(u)) {
      if (sv.apex != u) {
        report.add("topology-shape", "sieve filed under wrong object");
        continue;
      }
      for (MorId g = 0; g < c.n_mor(); ++g) {
        if (c.mor_cod[g] != u) continue;
        if (!j.is_covering(pullback_sieve(s, g, sv)))
          report.add("axiom-2", sieve_to_string(c, sv) + " along " +
                                    c.mor_names[g]);
      }
    }

  // Axiom 3: local character, quantified over all sieves on each object.
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    std::vector<Sieve> candidates = all_sieves(c, u);
    for (const Sieve& sv : j.on(u))
      for (const Sieve& r : candidates) {
        if (j.is_covering(r)) continue;
        bool all_pullbacks_cover = true;
        for (MorId f : sv.arrows)
          if (!j.is_covering(pullback_sieve(s, f, r))) {
            all_pullbacks_cover = false;
            break;
          }
        if (all_pullbacks_cover)
          report.add("axiom-3", sieve_to_string(c, r) + " locally covers via " +
                                    sieve_to_string(c, sv));
      }
  }
  return report;
}

ValidationReport validate_site(const Site& s) {
  ValidationReport report;
  const FinCategory& c = s.c();
  auto cat_report = validate_category(c);
  for (auto& v : cat_report.violations) report.add("category " + v.rule, v.witness);
  if (!cat_report.ok()) return report;

  if (s.terminal == kNone || s.terminal >= c.n_obj()) {
    report.add("terminal", "missing terminal object");
  } else {
    for (ObjId u = 0; u < c.n_obj(); ++u)
      if (c.hom(u, s.terminal).size() != 1)
        report.add("terminal", "hom(" + c.obj_names[u] + ", terminal) has " +
                                   std::to_string(c.hom(u, s.terminal).size()) +
                                   " arrows");
  }

  for (MorId f = 0; f < c.n_mor(); ++f)
    for (MorId g = 0; g < c.n_mor(); ++g) {
      if (c.mor_cod[f] != c.mor_cod[g]) continue;
      if (!s.pullbacks.has(f, g)) {
        report.add("pullback-total", "cospan (" + c.mor_names[f] + ", " +
                                         c.mor_names[g] + ") missing");
        continue;
      }
      check_pullback_entry(c, f, g, s.pullbacks.at(f, g), report);
    }

  auto top_report = validate_topology(s);
  for (auto& v : top_report.violations) report.add(v.rule, v.witness);

  if (s.basis) {
    auto basis_report = validate_basis(c, s.pullbacks, *s.basis);
    for (auto& v : basis_report.violations) report.add(v.rule, v.witness);
    if (basis_report.ok()) {
      Topology regenerated = generate_topology(c, s.pullbacks, *s.basis);
      if (!(regenerated.covers == s.topology.covers))
        report.add("basis-topology",
                   "stored topology differs from the basis-generated one");
    }
  }
  return report;
}

ValidationReport validate_basis(const FinCategory& c,
                                const PullbackTable& pullbacks,
                                const Basis& basis) {
  ValidationReport report;
  if (basis.size() != static_cast<size_t>(c.n_obj())) {
    report.add("basis-shape", "per-object table size mismatch");
    return report;
  }
  auto has_family = [&](ObjId u, const CoverFamily& fam) {
    return std::binary_search(basis[u].begin(), basis[u].end(), fam);
  };
  for (ObjId u = 0; u < c.n_obj(); ++u)
    for (const CoverFamily& fam : basis[u]) {
      if (fam.apex != u) report.add("basis-shape", "family filed under wrong object");
      for (MorId m : fam.members)
        if (c.mor_cod[m] != u)
          report.add("basis-shape", "family member with wrong codomain");
    }
  if (!report.ok()) return report;

  // Axiom 1: iso singletons are basic.
  for (MorId m = 0; m < c.n_mor(); ++m) {
    if (!inverse_of(c, m)) continue;
    CoverFamily singleton{c.mor_cod[m], {m}};
    if (!has_family(c.mor_cod[m], singleton))
      report.add("basis-axiom-1",
                 "iso singleton {" + c.mor_names[m] + "} not basic");
  }

  // Axiom 2: stability under chosen pullback along any arrow.
  for (ObjId u = 0; u < c.n_obj(); ++u)
    for (const CoverFamily& fam : basis[u])
      for (MorId g = 0; g < c.n_mor(); ++g) {
        if (c.mor_cod[g] != u) continue;
        CoverFamily pulled;
        pulled.apex = c.mor_dom[g];
        for (MorId m : fam.members)
          pulled.members.push_back(pullbacks.at(g, m).p1);
        std::sort(pulled.members.begin(), pulled.members.end());
        pulled.members.erase(
            std::unique(pulled.members.begin(), pulled.members.end()),
            pulled.members.end());
        if (!has_family(pulled.apex, pulled))
          report.add("basis-axiom-2", family_to_string(c, fam) + " along " +
                                          c.mor_names[g]);
      }

  // Axiom 3: closure under composition with member-wise refinements.
  for (ObjId u = 0; u < c.n_obj(); ++u)
    for (const CoverFamily& fam : basis[u]) {
      const size_t k = fam.members.size();
      std::vector<size_t> choice(k, 0);
      auto family_count = [&](size_t i) {
        return basis[c.mor_dom[fam.members[i]]].size();
      };
      if (k == 0) continue;
      bool done = false;
      while (!done) {
        CoverFamily composed;
        composed.apex = u;
        for (size_t i = 0; i < k; ++i) {
          const CoverFamily& refinement =
              basis[c.mor_dom[fam.members[i]]][choice[i]];
          for (MorId inner : refinement.members)
            composed.members.push_back(c.compose(fam.members[i], inner));
        }
        std::sort(composed.members.begin(), composed.members.end());
        composed.members.erase(
            std::unique(composed.members.begin(), composed.members.end()),
            composed.members.end());
        if (!has_family(u, composed))
          report.add("basis-axiom-3", family_to_string(c, fam) +
                                          " composed with refinements");
        // Advance the odometer over refinement choices.
        size_t pos = 0;
        while (pos < k) {
          if (++choice[pos] < family_count(pos)) break;
          choice[pos] = 0;
          ++pos;
        }
        if (pos == k) done = true;
      }
      if (!report.ok()) return report;  // avoid witness explosion
    }
  return report;
}

Topology generate_topology(const FinCategory& c, const PullbackTable& pullbacks,
                           const Basis& basis) {
  auto basis_report = validate_basis(c, pullbacks, basis);
  if (!basis_report.ok())
    throw InvalidBasis("generate_topology: " + basis_report.summary());

  Topology j;
  j.covers.resize(c.n_obj());
  for (ObjId u = 0; u < c.n_obj(); ++u) {
    for (const Sieve& s : all_sieves(c, u)) {
      bool covering = false;
      for (const CoverFamily& fam : basis[u]) {
        bool contained = true;
        for (MorId m : fam.members)
          if (!s.contains(m)) {
            contained = false;
            break;
          }
        if (contained) {
          covering = true;
          break;
        }
      }
      if (covering) j.covers[u].push_back(s);
    }
    std::sort(j.covers[u].begin(), j.covers[u].end());
  }
  return j;
}

MorId mediator(const Site& s, MorId f, MorId g, MorId q1, MorId q2) {
  const FinCategory& c = s.c();
  const Pullback& pb = s.pullbacks.at(f, g);
  if (c.mor_dom[q1] != c.mor_dom[q2])
    throw Error("mediator: competitor legs have different domains");
  if (c.compose(f, q1) != c.compose(g, q2))
    throw Error("mediator: competitor does not commute over the cospan");
  ObjId z = c.mor_dom[q1];
  MorId found = kNone;
  for (MorId h : c.hom(z, pb.apex)) {
    if (c.compose(pb.p1, h) == q1 && c.compose(pb.p2, h) == q2) {
      if (found != kNone)
        throw NonUniqueMediator("mediator: two arrows mediate");
      found = h;
    }
  }
  if (found == kNone) throw NoMediator("mediator: no arrow mediates");
  return found;
}

}  // namespace descente
