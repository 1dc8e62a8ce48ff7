#pragma once

#include "artifact/backends.hpp"

namespace artifact::detail {

std::shared_ptr<const Geometry> make_torus(const BackendConfig& cfg);
std::shared_ptr<const Geometry> make_abelian(const BackendConfig& cfg);
std::shared_ptr<const Geometry> make_projective(const BackendConfig& cfg);

}  // namespace artifact::detail
