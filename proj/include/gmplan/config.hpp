#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "gmplan/environment.hpp"
#include "gmplan/gvi.hpp"
#include "gmplan/pgcs.hpp"

namespace gmplan {

enum class SolverKind { GVI, PGCS };

/// Environment source: either an SDF grid file or an inline box list that is
/// rasterized at load time.
struct EnvironmentSpec {
    std::string sdf_file;  // empty when boxes are inline
    std::vector<BoxObstacle> boxes;
    Eigen::VectorXd grid_origin;
    double cell_size = 0.5;
    std::vector<int> grid_counts;
};

/// One experiment: robot, dynamics horizon, boundary, environment, collision
/// weights, solver settings, and reproducibility knobs.
struct ExperimentConfig {
    std::string name = "experiment";
    SolverKind solver = SolverKind::PGCS;
    RobotModel robot;
    double horizon = 1.0;
    int support_states = 15;
    Eigen::VectorXd mu0, muT;
    Eigen::MatrixXd K0, KT;
    EnvironmentSpec environment;
    CollisionParams collision;
    GVIConfig gvi;
    PGCSConfig pgcs;
    std::uint64_t seed = 0;
    int sample_count = 100;
    std::string output_dir = "out";

    int state_dim() const { return 2 * robot.dof; }

    /// Full consistency check; throws ConfigError naming the offending field.
    void validate() const;
};

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);

/// Serialization used by both the config file round-trip and the hash.
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& json_text);

/// FNV-1a hash of the canonical JSON form.
std::uint64_t config_hash(const ExperimentConfig& config);

/// Rasterize or load the configured environment.
SignedDistanceField build_environment(const ExperimentConfig& config);

}  // namespace gmplan
