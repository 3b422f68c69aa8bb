#pragma once

#include <iosfwd>

#include "descente/factor.hpp"

namespace descente {

struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error(what) {}
};
struct WorkspaceValidationError : Error {
  explicit WorkspaceValidationError(const std::string& what) : Error(what) {}
};
struct UnknownEntity : Error {
  explicit UnknownEntity(const std::string& what) : Error(what) {}
};

// One site plus named pseudofunctors and maps over it, loaded from explicit
// JSON tables.  All validators run at load time.
struct Workspace {
  SitePtr site;
  std::string site_name;
  std::vector<std::pair<std::string, PstackPtr>> pseudofunctors;
  std::vector<std::pair<std::string, PseudoNat>> maps;
  std::map<std::string, std::string> provenance;  // entity -> file#pointer
  std::map<std::string, uint64_t> hashes;         // entity -> content hash

  PstackPtr pseudofunctor(const std::string& name) const;
  const PseudoNat& map(const std::string& name) const;
};

Workspace parse_workspace(const std::vector<std::string>& paths);

// Canonical serialization (sorted keys, two-space indent, '\n' terminated);
// parse ∘ serialize is the identity on canonicalized files.
std::string serialize_workspace(const Workspace& ws);

// FNV-1a over the canonical serialization of one entity.
uint64_t content_hash(const std::string& canonical);

struct Report {
  std::string judgment;
  std::vector<std::pair<std::string, std::string>> inputs;  // name, hash hex
  bool positive = false;
  std::string verdict;
  std::vector<std::pair<std::string, std::string>> witnesses;
  double seconds = 0.0;  // human output only, never serialized

  std::string text() const;
  std::string json() const;  // deterministic witness bundle
};

// Exit codes: 0 positive, 1 negative-with-witness, 2 usage/parse, 3 bound.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace descente
