#pragma once

#include "mlmc/random.hpp"

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

namespace mlmc {

/// Scalar SDE dS = a(S) dt + b(S) dW on [0, maturity], S(0) = s0.
struct SdeModel {
    std::function<double(double)> drift;
    std::function<double(double)> diffusion;
    std::function<double(double)> diffusion_derivative;
    double s0 = 1.0;
    double maturity = 1.0;
};

/// Geometric Brownian motion: a = r S, b = sigma S.
SdeModel gbm(double r, double sigma, double s0, double maturity);

enum class Scheme { euler, milstein };

Scheme parse_scheme(std::string_view name);
std::string_view to_string(Scheme scheme);

/// One Euler-Maruyama or Milstein step of size h driven by the increment dw.
double step(const SdeModel& model, double s, double dw, double h, Scheme scheme);

/// Everything a level-l correction needs from one coupled fine/coarse pair.
/// For level 0 there is no coarse path and has_coarse is false.
struct CoupledPathState {
    int level = 0;
    bool has_coarse = false;
    double fine_terminal = 0.0;
    double coarse_terminal = 0.0;
    double fine_penultimate = 0.0;    // fine state at T - h_fine
    double coarse_penultimate = 0.0;  // coarse state at T - h_coarse
    double dw_last = 0.0;             // final fine increment
    double dw_second_last = 0.0;      // second to last fine increment
    double h_fine = 0.0;
    double h_coarse = 0.0;
    std::int64_t cost = 0;            // fine timesteps simulated
};

/// Fine path with n0_steps * 2^level uniform steps; the coarse path (level >= 1)
/// uses half as many steps driven by pairwise sums of the fine increments.
CoupledPathState simulate_coupled(const SdeModel& model, int level, int n0_steps, Scheme scheme,
                                  GaussianStream& stream);

/// Advances a coupled pair by `coarse_steps` coarse steps (two fine steps each).
struct CoupledPair {
    double fine;
    double coarse;
};
CoupledPair advance_coupled(const SdeModel& model, CoupledPair state, std::int64_t coarse_steps, double h_fine,
                            Scheme scheme, GaussianStream& stream);

/// Path on a uniform grid that keeps its Brownian increments so it can be
/// refined later.
struct StoredPath {
    double h = 0.0;
    std::vector<double> increments;
    double terminal = 0.0;
    std::int64_t cost = 0;  // timesteps simulated so far, refinements included
};

double simulate_on_increments(const SdeModel& model, Scheme scheme, double h, const std::vector<double>& increments);

StoredPath simulate_stored(const SdeModel& model, Scheme scheme, std::int64_t steps, GaussianStream& stream);

/// Splits every increment in two by Brownian bridge sampling, `halvings` times.
/// The sum over each original interval is preserved exactly up to rounding.
std::vector<double> bridge_refine(const std::vector<double>& increments, double h, int halvings,
                                  GaussianStream& stream);

/// Brownian-bridge refinement to step target_h, then re-simulation on the
/// finer grid. target_h must equal path.h / 2^k for some k >= 0.
StoredPath refine_path(const SdeModel& model, Scheme scheme, const StoredPath& path, double target_h,
                       GaussianStream& stream);

/// Number of halvings taking h to target_h; throws InvalidRefinement otherwise.
int refinement_halvings(double h, double target_h);

}  // namespace mlmc
