#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace descente {

using ObjId = int32_t;
using MorId = int32_t;
inline constexpr int32_t kNone = -1;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BoundExceeded : Error {
  explicit BoundExceeded(const std::string& what) : Error(what) {}
};
struct NotAnEquivalence : Error {
  explicit NotAnEquivalence(const std::string& what) : Error(what) {}
};

// Global enumeration bound; every exhaustive search aborts with BoundExceeded
// once it has examined this many candidates.  DESCENTE_BOUND overrides.
uint64_t default_bound();

struct Violation {
  std::string rule;
  std::string witness;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  void add(std::string rule, std::string witness) {
    violations.push_back({std::move(rule), std::move(witness)});
  }
  std::string summary() const;
  void require(const std::string& context) const;  // throws Error when not ok
};

// A finite category given by explicit tables.  Objects and morphisms carry
// opaque string names; indices follow the lexicographic order of those names,
// which fixes every enumeration order in the library.
struct FinCategory {
  std::vector<std::string> obj_names;
  std::vector<std::string> mor_names;
  std::vector<ObjId> mor_dom;
  std::vector<ObjId> mor_cod;
  std::vector<MorId> obj_identity;
  std::vector<MorId> comp;  // comp[g * n_mor + f] = g∘f, kNone when undefined

  int n_obj() const { return static_cast<int>(obj_names.size()); }
  int n_mor() const { return static_cast<int>(mor_names.size()); }

  bool composable(MorId g, MorId f) const { return mor_cod[f] == mor_dom[g]; }
  MorId compose(MorId g, MorId f) const;  // throws when undefined
  MorId compose_path(const std::vector<MorId>& path) const;  // first applied first
  MorId identity(ObjId u) const { return obj_identity[u]; }

  ObjId obj_index(std::string_view name) const;  // kNone when absent
  MorId mor_index(std::string_view name) const;
  const std::string& obj_name(ObjId o) const { return obj_names[o]; }
  const std::string& mor_name(MorId m) const { return mor_names[m]; }

  std::vector<MorId> hom(ObjId a, ObjId b) const;
  std::vector<MorId> arrows_into(ObjId u) const;
  bool is_identity(MorId m) const;

  bool operator==(const FinCategory& other) const = default;
};

using CatPtr = std::shared_ptr<const FinCategory>;

// Incremental builder; build() sorts names, rewires all references and
// returns an immutable category.  Unit/associativity are NOT enforced here;
// run validate_category for that.
class CategoryBuilder {
 public:
  CategoryBuilder& object(const std::string& name);
  CategoryBuilder& morphism(const std::string& name, const std::string& dom,
                            const std::string& cod);
  // Declares id_mor already added via morphism().
  CategoryBuilder& identity(const std::string& obj, const std::string& mor);
  // g after f equals gf; all three already added.
  CategoryBuilder& composite(const std::string& g, const std::string& f,
                             const std::string& gf);
  CatPtr build() const;

 private:
  struct Mor {
    std::string name, dom, cod;
  };
  std::vector<std::string> objects_;
  std::vector<Mor> morphisms_;
  std::vector<std::pair<std::string, std::string>> identities_;
  std::vector<std::array<std::string, 3>> composites_;
};

ValidationReport validate_category(const FinCategory& c);

// Unique two-sided inverse of m, when m is an isomorphism.
std::optional<MorId> inverse_of(const FinCategory& c, MorId m);

struct Functor {
  CatPtr src, dst;
  std::vector<ObjId> obj_map;
  std::vector<MorId> mor_map;

  ObjId on_obj(ObjId o) const { return obj_map[o]; }
  MorId on_mor(MorId m) const { return mor_map[m]; }
  bool operator==(const Functor& other) const;
};

Functor identity_functor(const CatPtr& c);
Functor compose(const Functor& g, const Functor& f);
Functor constant_functor(const CatPtr& src, const CatPtr& dst, ObjId target);
ValidationReport validate_functor(const Functor& f);

struct NatTrans {
  Functor source, target;                // parallel functors
  std::vector<MorId> component;          // per source-category object

  MorId at(ObjId o) const { return component[o]; }
  bool operator==(const NatTrans& other) const;
};

NatTrans identity_nat(const Functor& f);
ValidationReport validate_nat_trans(const NatTrans& n);
bool nat_is_iso(const NatTrans& n);
NatTrans nat_inverse(const NatTrans& n);
// Vertical composite (b after a).
NatTrans nat_vcompose(const NatTrans& b, const NatTrans& a);
// Whiskering: (g * n) has components g(n_x); (n * h) has components n_{h(x)}.
NatTrans whisker_left(const Functor& g, const NatTrans& n);
NatTrans whisker_right(const NatTrans& n, const Functor& h);

// Full / faithful / essentially surjective judgment with witnesses.
struct EquivalenceReport {
  bool full = true, faithful = true, ess_surjective = true;
  std::string full_witness, faithful_witness, ess_witness;
  bool is_equivalence() const { return full && faithful && ess_surjective; }
  std::string summary() const;
};

EquivalenceReport check_equivalence(const Functor& f);

struct AdjointEquivalence {
  Functor forward, backward;
  NatTrans unit;    // 1_src => backward∘forward
  NatTrans counit;  // forward∘backward => 1_dst
};

ValidationReport validate_adjoint_equivalence(const AdjointEquivalence& e);
// Requires check_equivalence(f) to pass; chooses backward functor and
// unit/counit canonically (first candidate in lexicographic order) and
// asserts both triangle identities.
AdjointEquivalence promote_to_adjoint_equivalence(const Functor& f);

// The unique m with big(m) = image, when big is full and faithful.
MorId canonical_lift(const Functor& fully_faithful, ObjId dom, ObjId cod,
                     MorId image);

// Exhaustive, deterministic enumeration (lexicographic in the object map,
// then the morphism map).  yield returning false stops the enumeration.
void enumerate_functors(const CatPtr& c, const CatPtr& d, uint64_t bound,
                        const std::function<bool(const Functor&)>& yield);
std::vector<Functor> all_functors(const CatPtr& c, const CatPtr& d,
                                  uint64_t bound);

void enumerate_nat_transformations(
    const Functor& f, const Functor& g,
    const std::function<bool(const NatTrans&)>& yield);
std::vector<NatTrans> all_nat_transformations(const Functor& f,
                                              const Functor& g);
std::vector<NatTrans> all_natural_isos(const Functor& f, const Functor& g);

}  // namespace descente
