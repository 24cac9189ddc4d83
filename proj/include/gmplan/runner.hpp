#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gmplan/config.hpp"
#include "gmplan/gvi.hpp"
#include "gmplan/pgcs.hpp"

namespace gmplan {

/// Everything a finished run needs to report and re-sample: per-knot moments,
/// cost history, solver-specific distribution data, and metadata.
struct ResultBundle {
    ExperimentConfig config;
    std::uint64_t hash = 0;

    Eigen::VectorXd knot_times;
    std::vector<Eigen::VectorXd> knot_means;
    std::vector<Eigen::MatrixXd> knot_covs;

    std::vector<CostReport> gvi_history;          // GVI runs
    GaussianTrajectory gvi_distribution;          // mean + precision
    std::vector<double> pgcs_cost_history;        // PGCS runs
    std::vector<double> pgcs_step_history;
    GainSchedule pgcs_gains;                      // net gains w.r.t. the base system

    std::vector<Eigen::VectorXd> samples;  // flattened joint samples
    double final_mean_collision = 0.0;     // hinge cost summed along the mean
    double solve_ms = 0.0;
    bool solver_failed = false;
    std::string failure_reason;
};

/// Run the experiment described by the config and write the result files
/// (means.csv, covariances.csv, costs.csv, samples.csv, summary.json,
/// distribution.json) into the output directory.
ResultBundle run(const ExperimentConfig& config, const std::string& output_root = "");

/// Re-load enough of a result directory to sample/plot from it.
ResultBundle load_result(const std::string& result_dir);

enum class PGCSSampleMode { KnotMarginals, SimulateSDE };

/// Draw n joint samples. GVI samples the joint Gaussian through the sparse
/// Cholesky of the precision; PGCS either samples each knot marginal
/// (default) or forward-simulates the closed-loop SDE by Euler-Maruyama.
std::vector<Eigen::VectorXd> sample_trajectories(
    const ResultBundle& result, int n, std::uint64_t seed,
    PGCSSampleMode mode = PGCSSampleMode::KnotMarginals);

/// Write 3-sigma contour data of the per-knot position marginals:
/// 64 boundary points per knot in 2D; scaled principal axes plus an
/// orientation quaternion in 3D.
void emit_plot_data(const ResultBundle& result, const std::string& out_dir);

/// Batch runner: executes every *.json config under dir with worker threads.
/// Returns the number of failed runs.
int run_batch(const std::string& config_dir, const std::string& output_root, int workers);

void write_samples_csv(const std::string& path, const std::vector<Eigen::VectorXd>& samples,
                       int state_dim);

}  // namespace gmplan
