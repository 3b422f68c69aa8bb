#pragma once

#include <memory>

namespace descente {
struct Pseudofunctor;
struct PseudoNat;
struct Modification;
using PstackPtr = std::shared_ptr<const Pseudofunctor>;
}  // namespace descente
