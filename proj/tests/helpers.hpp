#pragma once

#include <random>
#include <string>

#include "structhinf/system_file.hpp"

namespace testutil {

// dx = -x + u + w, z = (x; u), y = x, with a dummy parameter the plant does not use.
inline const char* kScalarPlant = R"({
  "parameters": [{"name": "a", "lo": -1.0, "hi": 1.0}],
  "partition": {"n": [1], "m_w": [1], "m_u": [1], "o_y": [1], "p": [1]},
  "xi_basis": ["1"],
  "eta_basis": ["1"],
  "matrices": [{"A": [[-1.0]], "Bw": [[1.0]], "Bu": [[1.0]], "Cy": [[1.0]], "Dyw": 0}],
  "performance": {"Cz": [[1.0], [0.0]], "Dzw": 0, "Dzu": [[0.0], [1.0]]},
  "control_graph": [[0]],
  "design_graph": [[0]]
})";

// Same plant, but the pole moves with the parameter and the strategy may follow it.
inline const char* kScalarParamPlant = R"({
  "parameters": [{"name": "a", "lo": -0.5, "hi": 0.5}],
  "partition": {"n": [1], "m_w": [1], "m_u": [1], "o_y": [1], "p": [1]},
  "xi_basis": ["1", "a"],
  "eta_basis": ["1", "a"],
  "matrices": [{"A": [[-1.0]], "Bw": [[1.0]], "Bu": [[1.0]], "Cy": [[1.0]], "Dyw": 0},
               {"A": [[1.0]], "Bw": 0, "Bu": 0, "Cy": 0, "Dyw": 0}],
  "performance": {"Cz": [[1.0], [0.0]], "Dzw": 0, "Dzu": [[0.0], [1.0]]},
  "control_graph": [[0]],
  "design_graph": [[0]],
  "gamma0": [[[-0.5]], [[0.0]]],
  "alpha0": [0.0]
})";

inline structhinf::VectorXd random_in_box(const structhinf::ParamBox& box, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    structhinf::VectorXd a(box.dim());
    for (int i = 0; i < box.dim(); ++i) a(i) = box.lo(i) + u(rng) * (box.hi(i) - box.lo(i));
    return a;
}

/// Adds scale * N(0, 1) to every free coefficient entry.
inline structhinf::GainExpansion perturb(structhinf::GainExpansion g, double scale, std::mt19937& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t l = 0; l < g.G.size(); ++l)
        for (Eigen::Index k = 0; k < g.G[l].size(); ++k)
            if (g.masks[l](k) != 0.0) g.G[l](k) += scale * nd(rng);
    return g;
}

inline structhinf::SystemFile builtin(const std::string& name) { return structhinf::load_system("builtin:" + name); }

}  // namespace testutil
