#pragma once

#include "fedstyle/ad/gradcheck.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fedstyle::loss {

struct NamedGradCheck {
    std::string name;
    ad::GradCheckResult result;
};

/// Finite-difference checks of every differentiable op and loss on small
/// random inputs drawn from `seed`.
std::vector<NamedGradCheck> run_gradcheck_suite(std::uint64_t seed);

}  // namespace fedstyle::loss
