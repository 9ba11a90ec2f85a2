#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "streamgp/psi.hpp"

namespace streamgp {

// Closed-form Psi statistics against the Monte Carlo oracle.
struct PsiCheckCase {
    std::string name;
    int entries = 0;          // compared entries across psi0, Psi1, Psi2 (upper triangle)
    int beyond_3se = 0;       // raw count of entries outside 3 SE
    double max_z = 0.0;       // largest |closed - mc| / se
    std::array<bool, 3> family_ok{};  // psi0, Psi1, Psi2 at the 3-SE level, Sidak-adjusted over entries
    bool pass() const { return beyond_3se == 0 && family_ok[0] && family_ok[1] && family_ok[2]; }
};

// Kernels/rows storage for a request built by the helpers below.
struct PsiCase {
    std::string name;
    KernelConfig kernels;
    PsiRequest request;
};

PsiCase psi_worked_element_case();
PsiCase random_psi_case(std::mt19937_64& rng, int index);

PsiCheckCase psi_check_case(const PsiCase& c, std::int64_t samples, std::uint64_t seed);

// The worked element plus n_random randomised configurations.
std::vector<PsiCheckCase> psi_check_suite(int n_random, std::int64_t samples, std::uint64_t seed);

}  // namespace streamgp
