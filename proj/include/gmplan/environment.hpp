#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "gmplan/errors.hpp"

namespace gmplan {

/// Regular grid of signed distances (positive outside obstacles), 2D or 3D.
/// Queries bilinearly / trilinearly interpolate; out-of-range points clamp to
/// the boundary cells.
class SignedDistanceField {
  public:
    SignedDistanceField() = default;
    SignedDistanceField(int dims, Eigen::VectorXd origin, double cell_size,
                        std::vector<int> counts, std::vector<double> values);

    int dims() const { return dims_; }
    const Eigen::VectorXd& origin() const { return origin_; }
    double cell_size() const { return cell_size_; }
    const std::vector<int>& counts() const { return counts_; }
    const std::vector<double>& values() const { return values_; }

    /// Interpolated signed distance at p (clamped to the grid support).
    double distance(const Eigen::VectorXd& p) const;

    /// Distance and spatial gradient; the gradient uses central differences
    /// of the interpolant (one-sided at the grid boundary).
    std::pair<double, Eigen::VectorXd> query(const Eigen::VectorXd& p) const;

    /// Plain-text format: header (dims, counts, origin, cell size) then
    /// row-major values.
    void save(const std::string& path) const;
    static SignedDistanceField load(const std::string& path);

    double node(const std::vector<int>& idx) const;

  private:
    double interpolate(const Eigen::VectorXd& p) const;

    int dims_ = 0;
    Eigen::VectorXd origin_;
    double cell_size_ = 0.0;
    std::vector<int> counts_;
    std::vector<double> values_;  // row-major, x fastest
};

/// Axis-aligned box obstacle given by center and half extents.
struct BoxObstacle {
    Eigen::VectorXd center;
    Eigen::VectorXd half_extents;
};

/// Exact signed distance from p to the union of boxes (min over boxes).
double box_signed_distance(const Eigen::VectorXd& p, const std::vector<BoxObstacle>& boxes);

/// Rasterize a box obstacle list into a signed distance field.
SignedDistanceField make_sdf(const std::vector<BoxObstacle>& boxes, int dims,
                             const Eigen::VectorXd& origin, double cell_size,
                             const std::vector<int>& counts);

/// Obstacle-list file: "boxes <dims>" header then one "center... half..." row
/// per box.
std::vector<BoxObstacle> load_obstacles(const std::string& path, int& dims);
void save_obstacles(const std::string& path, const std::vector<BoxObstacle>& boxes, int dims);

enum class RobotKind { PointRobot, PlanarArm };

/// Collision geometry: every checking point is a ball of fixed radius whose
/// center follows the robot's forward kinematics.
struct RobotModel {
    RobotKind kind = RobotKind::PointRobot;
    int dof = 2;
    double radius = 0.5;
    std::vector<double> link_lengths;   // planar arm only
    int points_per_link = 3;            // planar arm only

    int workspace_dims() const { return kind == RobotKind::PlanarArm ? 2 : dof; }
    int num_checking_points() const;
};

/// A checking-point center with its Jacobian d center / d configuration.
struct CheckPoint {
    Eigen::VectorXd position;
    double radius = 0.0;
    Eigen::MatrixXd jacobian;  // workspace_dims x dof
};

/// Checking-point centers (and Jacobians) for configuration q; q may be a
/// full state vector, in which case the first dof entries are used.
std::vector<CheckPoint> forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q);

/// Hinge-loss weighting parameters.
struct CollisionParams {
    double eps_margin = 0.5;  // obstacle clearance margin
    double sigma_obs = 1.0;   // scalar hinge weight
};

/// Margin hinge: max(eps + radius - d, 0). Zero iff the ball surface clears
/// the margin; slope -1 w.r.t. d inside the support.
double hinge(double d, const CollisionParams& params, double radius);

/// V(x) = sum_k sigma_obs * hinge_k^2 over all checking points.
double collision_cost(const RobotModel& model, const SignedDistanceField& field,
                      const CollisionParams& params, const Eigen::VectorXd& state);

/// Gradient and Gauss-Newton Hessian of collision_cost w.r.t. the full state
/// (velocity entries are zero). The Hessian drops residual second-order
/// terms, so it is always positive semi-definite.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> collision_grad(const RobotModel& model,
                                                           const SignedDistanceField& field,
                                                           const CollisionParams& params,
                                                           const Eigen::VectorXd& state);

}  // namespace gmplan
