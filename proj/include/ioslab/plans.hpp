#pragma once

#include <numbers>

#include "ioslab/props.hpp"
#include "ioslab/zoo.hpp"

namespace ioslab {

/// Sampling plan tuned to one zoo system (grids, horizon, integrator, seeds).
[[nodiscard]] inline SamplingPlan default_plan(const std::string& raw_id, const zoo::ZooParams& params = {})
{
    std::string id = zoo::normalize_id(raw_id);
    const std::string wrap = "full_state:";
    if (id.rfind(wrap, 0) == 0) id = id.substr(wrap.size());
    SamplingPlan p;
    p.sim.step = 1e-2;
    p.eps_grid = {0.1, 0.5};
    if (id == "sin_output") {
        p.r_grid = {0.1, 0.5, 1.0, 2.0, std::numbers::pi, 5.0, 10.0};
        p.s_grid = {0.0};
        p.sim.horizon = 20.0;
        p.t_grid = {1.0, 2.0, 5.0, 10.0, 20.0};
    } else if (id == "rotation") {
        p.r_grid = {0.1, 0.5, 1.0, 2.0, 5.0};
        p.s_grid = {0.0};
        p.sim.horizon = 15.0;
        p.directions = 8;
        p.t_grid = {1.0, std::numbers::pi, 7.5, 15.0};
    } else if (id == "sat_polar") {
        p.r_grid = {0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
        p.s_grid = {0.0};
        p.sim.horizon = 30.0;
        p.directions = 8;
        p.t_grid = {1.0, 5.0, 10.0, 20.0, 30.0};
    } else if (id == "l2_blowup" || id == "l2_timewarp") {
        const std::size_t n = params.n;
        const bool warp = id == "l2_timewarp";
        p.r_grid = {0.25, 0.5, 1.0, 2.0, zoo::l2_ball_radius()};
        p.s_grid = warp ? std::vector<double>{0.0, 1.0, 2.0, 4.0} : std::vector<double>{0.0};
        p.step_inputs = false;
        p.random_inputs = 0;
        p.sim.horizon = warp ? 60.0 : 10.0;
        p.sim.step = warp ? 2e-2 : 1e-2;
        p.sim.method = Method::rk4_adaptive;
        p.sim.adaptive_tol = 1e-8;
        p.t_grid = warp ? std::vector<double>{1.0, 5.0, 15.0, 30.0, 60.0} : std::vector<double>{0.5, 1.0, 2.5, 5.0, 10.0};
        p.tau_grid = warp ? std::vector<double>{0.5, 1.0, 15.0, 60.0} : std::vector<double>{0.5, 1.0, 2.5, 10.0};
        for (std::size_t j : {n / 4, n / 2, n})
            if (j >= 1)
                p.extra_probes.push_back({zoo::l2_seed(n, j), InputSignal::zero(warp ? 1 : 0), "seed x^" + std::to_string(j)});
    } else if (id == "lin_scalar") {
        p.r_grid = {0.1, 0.3, 1.0, 3.0, 10.0};
        p.s_grid = {0.0, 0.1, 0.3, 1.0, 3.0, 10.0};
        p.sim.horizon = 20.0;
        p.t_grid = {1.0, 2.0, 5.0, 10.0, 20.0};
    } else {
        throw lookup_error("no default plan for '" + raw_id + "'");
    }
    validate(p);
    return p;
}

} // namespace ioslab
